"""
Decomposition of symmetric matrices near the identity into positive rank-one sums

A frame is a set of N* = n(n+1)/2 unit directions ξ_i whose outer products form a
basis of symmetric matrices. Writing D = Σ c_i ξ_i⊗ξ_i gives c = c_id + T⁻¹(D − Id),
and on the ball ‖D − Id‖₀ ≤ σ* every c_i stays in [c*², C*²], so d_i = √c_i is a
smooth positive amplitude.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import special_ortho_group

from .errors import DecompositionError, FrameError
from .field import n_star, sym_index_pairs
from .utils import make_rng

logger = logging.getLogger('corrugate.decomp')

# Upper bound on the condition number of an accepted frame map
MAX_CONDITION = 1e3


@dataclass(frozen=True, eq=False)
class Frame:
    """
    Admissible direction frame with its certified constants

    Args:
        n (int): Dimension
        xis (np.ndarray): Unit directions, shape (N*, n)
        T (np.ndarray): Map from coefficients to upper-triangle coordinates
        T_inv (np.ndarray): Its inverse
        c_id (np.ndarray): Coefficients of the identity
        sigma_star (float): Radius of the admissible ball
        c_star (float): Lower amplitude bound
        C_star (float): Upper amplitude bound
        condition (float): Condition number of T
        seed (int): Seed the frame was built with
        construction (str): 'base', 'rotated' (base frame under a seeded rotation) or 'random'
    """

    n: int
    xis: np.ndarray
    T: np.ndarray
    T_inv: np.ndarray
    c_id: np.ndarray
    sigma_star: float
    c_star: float
    C_star: float
    condition: float
    seed: int = 0
    construction: str = 'base'

    @property
    def N_star(self):
        return n_star(self.n)

    @property
    def d_star(self):
        """Constant amplitudes of the identity, Id = Σ d*_i² ξ_i⊗ξ_i"""
        return np.sqrt(self.c_id)

    @property
    def T_inv_norm(self):
        """Operator norm of T⁻¹ for the entrywise sup norm (max absolute row sum)"""
        return float(np.max(np.sum(np.abs(self.T_inv), axis=1)))

    @property
    def lipschitz(self):
        """Lipschitz constant of D ↦ d(D) on the admissible ball"""
        return self.T_inv_norm / (2.0 * self.c_star)

    def to_dict(self):
        return {
            'n': self.n,
            'xis': self.xis.tolist(),
            'c_id': self.c_id.tolist(),
            'sigma_star': self.sigma_star,
            'c_star': self.c_star,
            'C_star': self.C_star,
            'condition': self.condition,
            'seed': self.seed,
            'construction': self.construction,
        }


def upper(M):
    """Upper-triangle coordinates of matrices stacked on the leading two axes"""
    M = np.asarray(M, dtype=float)
    return np.stack([M[i, j] for i, j in sym_index_pairs(M.shape[0])])


def frame_map(xis):
    """Columns are the upper-triangle coordinates of ξ_i⊗ξ_i"""
    return np.stack([upper(np.outer(xi, xi)) for xi in xis], axis=1)


def _certify(n, xis, seed, construction):
    T = frame_map(xis)
    condition = float(np.linalg.cond(T))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        return None, condition
    T_inv = np.linalg.inv(T)
    c_id = T_inv @ upper(np.eye(n))
    if np.min(c_id) <= 0.0:
        return None, condition
    norm = float(np.max(np.sum(np.abs(T_inv), axis=1)))
    sigma_star = min(float(np.min(c_id)) / (2.0 * norm), 0.49)
    c_star = math.sqrt(float(np.min(c_id)) / 2.0)
    C_star = math.sqrt(float(np.max(c_id)) + norm * sigma_star)
    frame = Frame(n=n, xis=xis, T=T, T_inv=T_inv, c_id=c_id, sigma_star=sigma_star,
                  c_star=c_star, C_star=C_star, condition=condition, seed=seed,
                  construction=construction)
    return frame, condition


def _base_frame(n):
    if n == 2:
        angles = np.array([0.0, np.pi / 3.0, 2.0 * np.pi / 3.0])
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n == 3:
        dirs = []
        for i in range(3):
            for j in range(i + 1, 3):
                for sign in (1.0, -1.0):
                    v = np.zeros(3)
                    v[i], v[j] = 1.0, sign
                    dirs.append(v / math.sqrt(2.0))
        return np.stack(dirs)
    return None


def build_frame(n, seed=0, max_retries=10000):
    """
    Admissible frame for dimension n

    Seed 0 gives the canonical frame: equiangular directions at 0, π/3, 2π/3 in
    the plane and the (e_i ± e_j)/√2 frame in space. Other seeds rotate it, which
    keeps the identity coefficients. From n = 4 on, candidates are random unit
    vectors from the seeded generator.

    Args:
        n (int): Dimension, at least 2
        seed (int): Generator seed
        max_retries (int): Random candidates tried before giving up

    Returns:
        Frame: The first admissible frame. For n = 2, 3 its directions are the fixed
            base set (rotated when seed is nonzero), not seeded random samples;
            ``construction`` records which path produced it

    Raises:
        FrameError: if no candidate passes
    """
    if n < 2:
        raise FrameError(f"Frames need n >= 2, got {n}")
    rng = make_rng(seed)
    base = _base_frame(n)
    if base is not None:
        if seed:
            if n == 2:
                theta = rng.uniform(0.0, np.pi / 3.0)
                rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
            else:
                rot = special_ortho_group.rvs(n, random_state=rng)
            base = base @ rot.T
        frame, condition = _certify(n, base, seed, 'rotated' if seed else 'base')
        if frame is not None:
            logger.debug(f"Frame n={n} seed={seed}: sigma*={frame.sigma_star:.4g}")
            return frame

    best = np.inf
    N = n_star(n)
    for _ in range(max_retries):
        xis = rng.standard_normal((N, n))
        xis /= np.linalg.norm(xis, axis=1, keepdims=True)
        frame, condition = _certify(n, xis, seed, 'random')
        best = min(best, condition)
        if frame is not None:
            logger.debug(f"Frame n={n} seed={seed}: sigma*={frame.sigma_star:.4g}, cond={condition:.4g}")
            return frame
    raise FrameError(f"No admissible frame for n={n} after {max_retries} candidates "
                     f"(best condition number {best:.4g})")


def decompose(frame, D):
    """
    Amplitudes d_i with D = Σ d_i² ξ_i⊗ξ_i

    Args:
        frame (Frame): Direction frame
        D (np.ndarray): Symmetric n×n matrix with ‖D − Id‖₀ ≤ σ*

    Returns:
        np.ndarray: d_1..d_{N*}, each in [c*, C*]

    Raises:
        DecompositionError: outside sigma_star ball
    """
    D = np.asarray(D, dtype=float)
    gap = upper(D - np.eye(frame.n))
    distance = float(np.max(np.abs(gap)))
    if distance > frame.sigma_star * (1.0 + 1e-12):
        raise DecompositionError("outside sigma_star ball", distance)
    return np.sqrt(frame.c_id + frame.T_inv @ gap)


def decompose_field(frame, D, strict=None):
    """
    Pointwise decomposition of a matrix field stored as upper triangles

    Points inside ``strict`` must lie in the admissible ball. Other points outside
    it are pulled radially onto the ball's surface before decomposing.

    Args:
        frame (Frame): Direction frame
        D (np.ndarray): Upper-triangle components, shape (N*, ...)
        strict (np.ndarray, optional): Boolean region where the ball is enforced

    Returns:
        tuple: amplitudes of shape (N*, ...) and the boolean mask of projected points

    Raises:
        DecompositionError: outside sigma_star ball at a strict point
    """
    D = np.asarray(D, dtype=float)
    eye = upper(np.eye(frame.n)).reshape((-1,) + (1,) * (D.ndim - 1))
    gap = D - eye
    distance = np.max(np.abs(gap), axis=0)
    limit = frame.sigma_star * (1.0 + 1e-12)
    outside = distance > limit
    if strict is not None:
        bad = outside & strict
        if np.any(bad):
            worst = np.where(bad, distance, -np.inf)
            location = np.unravel_index(int(np.argmax(worst)), distance.shape)
            raise DecompositionError("outside sigma_star ball", float(distance[location]),
                                     tuple(int(i) for i in location))
    if np.any(outside):
        factor = np.where(outside, frame.sigma_star / np.where(outside, distance, 1.0), 1.0)
        gap = gap * factor
    coeffs = frame.c_id.reshape(eye.shape) + np.tensordot(frame.T_inv, gap, axes=(1, 0))
    return np.sqrt(np.maximum(coeffs, 0.0)), outside


def squared_amplitudes(frame, D):
    """T⁻¹D: squared amplitudes without normalization, shape (N*, ...)"""
    return np.tensordot(frame.T_inv, np.asarray(D, dtype=float), axes=(1, 0))


def reconstruct(frame, d):
    """Σ d_i² ξ_i⊗ξ_i as upper-triangle coordinates"""
    d = np.asarray(d, dtype=float)
    return np.tensordot(frame.T, d * d, axes=(1, 0))


def frame_to_text(frame):
    """Human-readable frame block for the run log"""
    lines = [f"frame n={frame.n} N*={frame.N_star} seed={frame.seed} construction={frame.construction}"]
    for k, xi in enumerate(frame.xis):
        lines.append(f"  xi[{k}] = ({', '.join(f'{c:+.12f}' for c in xi)})  c_id={frame.c_id[k]:.12f}")
    lines.append(f"  sigma*={frame.sigma_star:.12g} c*={frame.c_star:.12g} C*={frame.C_star:.12g} "
                 f"cond={frame.condition:.6g}")
    return '\n'.join(lines)
