"""
Sampled fields on a padded uniform grid

Fields live on a box that covers the domain plus a collar of width ``pad``.
Derivatives are second-order central differences (one-sided at the box edge),
mollification is a discrete convolution with a unit-mass bump, and norms are
sup norms over a region together with dyadic Hölder quotients.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, ndimage, signal, special
from scipy.interpolate import RegularGridInterpolator

from .errors import FieldError
from .utils import thread_count

logger = logging.getLogger('corrugate.field')

EXTERIOR = 0
INTERIOR = 1
COLLAR = 2

# Kernels wider than this per axis go through FFT convolution
_DIRECT_KERNEL_WIDTH = 15


def sym_index_pairs(n):
    """Upper-triangle (i, j) pairs in row order, the storage order of SymMatrixField"""
    return [(i, j) for i in range(n) for j in range(i, n)]


def n_star(n):
    return n * (n + 1) // 2


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

class Domain:
    """Bounded domain with a level function that is positive inside"""

    name = 'domain'

    def __init__(self, n):
        if n < 1:
            raise FieldError(f"Dimension must be positive, got {n}")
        self.n = n

    @property
    def lower(self):
        raise NotImplementedError

    @property
    def upper(self):
        raise NotImplementedError

    def level(self, points):
        """
        Signed distance to the boundary, positive inside

        Args:
            points (np.ndarray): Coordinates with the axis index first, shape (n, ...)

        Returns:
            np.ndarray: Signed distance, shape points.shape[1:]
        """
        raise NotImplementedError

    def reflect(self, points):
        """Mirror image inside the domain of points outside it"""
        raise NotImplementedError

    def project(self, points):
        """Nearest boundary point"""
        raise NotImplementedError

    def axis_crossing(self, point, axis, sign, h):
        """
        Fraction of the arm from ``point`` along ``sign*e_axis`` that stays inside

        Returns:
            float: theta in (0, 1]; 1 when the neighbor itself is inside or on the boundary
        """
        raise NotImplementedError

    def contains(self, points, eps=0.0):
        return self.level(points) > eps

    def to_dict(self):
        return {'name': self.name, 'n': self.n}


class Square(Domain):
    """Unit cube (0, 1)^n"""

    name = 'square'

    @property
    def lower(self):
        return np.zeros(self.n)

    @property
    def upper(self):
        return np.ones(self.n)

    def level(self, points):
        points = np.asarray(points, dtype=float)
        inside = np.min(np.minimum(points, 1.0 - points), axis=0)
        # Euclidean distance outside the cube
        excess = np.maximum(np.maximum(-points, points - 1.0), 0.0)
        outside = np.sqrt(np.sum(excess ** 2, axis=0))
        return np.where(inside >= 0.0, inside, -outside)

    def reflect(self, points):
        points = np.asarray(points, dtype=float)
        folded = np.where(points < 0.0, -points, points)
        return np.where(folded > 1.0, 2.0 - folded, folded)

    def project(self, points):
        points = np.asarray(points, dtype=float)
        clipped = np.clip(points, 0.0, 1.0)
        inside = self.level(points) > 0.0
        if not np.any(inside):
            return clipped
        # Interior points go to the nearest face
        dist = np.minimum(points, 1.0 - points)
        axis = np.argmin(dist, axis=0)
        to_upper = np.take_along_axis(points, axis[None], axis=0)[0] > 0.5
        projected = clipped.copy()
        for k in range(self.n):
            sel = inside & (axis == k)
            projected[k][sel] = np.where(to_upper[sel], 1.0, 0.0)
        return projected

    def axis_crossing(self, point, axis, sign, h):
        target = point[axis] + sign * h
        if 0.0 <= target <= 1.0:
            return 1.0
        wall = 1.0 if sign > 0 else 0.0
        return abs(wall - point[axis]) / h


class Disc(Domain):
    """Unit ball centered at the origin"""

    name = 'disc'

    @property
    def lower(self):
        return -np.ones(self.n)

    @property
    def upper(self):
        return np.ones(self.n)

    def level(self, points):
        points = np.asarray(points, dtype=float)
        return 1.0 - np.sqrt(np.sum(points ** 2, axis=0))

    def reflect(self, points):
        points = np.asarray(points, dtype=float)
        r2 = np.sum(points ** 2, axis=0)
        safe = np.where(r2 > 1.0, r2, 1.0)
        return points / safe

    def project(self, points):
        points = np.asarray(points, dtype=float)
        r = np.sqrt(np.sum(points ** 2, axis=0))
        safe = np.where(r > 0.0, r, 1.0)
        projected = points / safe
        if np.any(r == 0.0):
            projected[0][r == 0.0] = 1.0
        return projected

    def axis_crossing(self, point, axis, sign, h):
        neighbor = np.array(point, dtype=float)
        neighbor[axis] += sign * h
        if np.dot(neighbor, neighbor) <= 1.0:
            return 1.0
        # Solve |point + t*sign*e_axis|^2 = 1 for t in (0, h]
        rest = float(np.dot(point, point) - point[axis] ** 2)
        reach = math.sqrt(max(1.0 - rest, 0.0))
        t = reach - sign * point[axis]
        return min(max(t / h, 0.0), 1.0)


def make_domain(name, n):
    """
    Build a domain by name

    Args:
        name (str): 'square' or 'disc'
        n (int): Dimension

    Returns:
        Domain: The domain instance
    """
    if name == 'square':
        return Square(n)
    if name == 'disc':
        return Disc(n)
    raise FieldError(f"Unknown domain '{name}', expected 'square' or 'disc'")


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grid:
    """
    Uniform grid on the padded bounding box of a domain

    Args:
        domain (Domain): Domain the grid samples
        shape (tuple): Points per axis
        h (float): Spacing
        origin (np.ndarray): Coordinates of the first node
        pad (float): Collar width
    """

    domain: Domain
    shape: tuple
    h: float
    origin: np.ndarray
    pad: float

    def __post_init__(self):
        if not self.h > 0:
            raise FieldError(f"Grid spacing must be positive, got {self.h}")
        if len(self.shape) != self.domain.n:
            raise FieldError(f"Grid shape {self.shape} does not match dimension {self.domain.n}")
        if not np.any(self.mask == INTERIOR):
            raise FieldError("Grid has no interior points")

    @classmethod
    def build(cls, domain, resolution, pad):
        """
        Grid with ``resolution`` cells across the domain and a collar of at least ``pad``

        Args:
            domain (Domain): Domain to sample
            resolution (int): Cells across the domain's bounding box
            pad (float): Collar width

        Returns:
            Grid: The grid
        """
        if resolution < 4:
            raise FieldError(f"Resolution must be at least 4, got {resolution}")
        if pad <= 0:
            raise FieldError(f"Collar width must be positive, got {pad}")
        extent = float(np.max(domain.upper - domain.lower))
        h = extent / resolution
        npad = int(math.ceil(pad / h - 1e-9))
        shape = tuple(resolution + 1 + 2 * npad for _ in range(domain.n))
        origin = domain.lower - npad * h
        return cls(domain=domain, shape=shape, h=h, origin=origin, pad=npad * h)

    @property
    def n(self):
        return self.domain.n

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def axes(self):
        return tuple(self.origin[k] + self.h * np.arange(self.shape[k]) for k in range(self.n))

    @cached_property
    def coords(self):
        """Node coordinates, shape (n, *shape)"""
        mesh = np.meshgrid(*self.axes, indexing='ij')
        return np.stack(mesh)

    @property
    def bbox(self):
        lo = self.origin
        hi = self.origin + self.h * (np.array(self.shape) - 1)
        return np.stack([lo, hi], axis=1)

    @cached_property
    def level(self):
        return self.domain.level(self.coords)

    @cached_property
    def mask(self):
        """Per-point flag: INTERIOR inside the domain, COLLAR within pad of it, EXTERIOR beyond"""
        eps = 1e-9 * self.h
        codes = np.full(self.shape, EXTERIOR, dtype=np.int8)
        codes[self.level >= -self.pad - eps] = COLLAR
        codes[self.level > eps] = INTERIOR
        return codes

    @property
    def interior(self):
        return self.mask == INTERIOR

    @cached_property
    def collar_cutoff(self):
        """Smooth cut-off: 1 on the domain and within pad/2 of it, 0 from distance pad on"""
        outside = np.maximum(-self.level, 0.0)
        t = (outside - 0.5 * self.pad) / (0.5 * self.pad)
        return 1.0 - smooth_step(t)

    def index_of(self, point):
        """Nearest grid index of a point"""
        idx = np.rint((np.asarray(point, dtype=float) - self.origin) / self.h).astype(int)
        return tuple(int(np.clip(i, 0, s - 1)) for i, s in zip(idx, self.shape))

    def extend(self, values):
        """Multiply by the collar cut-off so values vanish towards the box edge"""
        cut = self.collar_cutoff
        values = np.asarray(values, dtype=float)
        return values * cut

    def reflect_extension(self, values, boundary=None):
        """
        Extend interior values across the boundary by reflection about the boundary value

        Points outside the domain receive ``2*g(P(x)) - u(R(x))`` where R mirrors x
        inside the domain and P projects it on the boundary. With zero boundary data
        this is the odd reflection.

        Args:
            values (np.ndarray): Scalar values; only interior points are read
            boundary (callable, optional): Boundary data g evaluated on points (n, m)

        Returns:
            np.ndarray: Extended values multiplied by the collar cut-off
        """
        values = np.asarray(values, dtype=float)
        inside = self.interior
        outside = ~inside
        pts = self.coords[:, outside]
        g = _boundary_values(boundary, self.domain.project(pts))

        # First pass so interpolation stencils straddling the boundary see boundary data
        seeded = values.copy()
        seeded[outside] = g
        interp = RegularGridInterpolator(self.axes, seeded, method='linear',
                                         bounds_error=False, fill_value=None)
        mirrored = self.domain.reflect(pts)
        extended = values.copy()
        extended[outside] = 2.0 * g - interp(mirrored.T)
        on_boundary = outside & (self.level > -1e-9 * self.h)
        extended[on_boundary] = seeded[on_boundary]
        return self.extend(extended)

    def describe(self):
        return {
            'domain': self.domain.name,
            'n': self.n,
            'shape': list(self.shape),
            'h': self.h,
            'pad': self.pad,
            'bbox': self.bbox.tolist(),
        }


def _boundary_values(boundary, points):
    if boundary is None:
        return np.zeros(points.shape[1:])
    if callable(boundary):
        return np.asarray(boundary(points), dtype=float) * np.ones(points.shape[1:])
    return np.full(points.shape[1:], float(boundary))


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1"""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
        left = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        right = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return left / (left + right)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Field:
    grid: Grid
    values: np.ndarray = field(repr=False)

    kind = 'field'

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = self._expected_shape(self.grid)
        if values.shape != expected:
            raise FieldError(f"{type(self).__name__} expects shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise FieldError(f"{type(self).__name__} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)

    @staticmethod
    def _expected_shape(grid):
        raise NotImplementedError

    def _like(self, values):
        return type(self)(self.grid, values)

    def _check_grid(self, other):
        if isinstance(other, _Field) and other.grid is not self.grid:
            raise FieldError("Fields live on different grids")

    def _other_values(self, other):
        self._check_grid(other)
        return other.values if isinstance(other, _Field) else other

    def __add__(self, other):
        return self._like(self.values + self._other_values(other))

    def __sub__(self, other):
        return self._like(self.values - self._other_values(other))

    def __mul__(self, scalar):
        if isinstance(scalar, ScalarField):
            self._check_grid(scalar)
            return self._like(self.values * scalar.values)
        return self._like(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self._like(-self.values)

    def components(self):
        """Iterate over scalar component arrays"""
        return [self.values]

    @classmethod
    def from_components(cls, grid, comps):
        raise NotImplementedError


class ScalarField(_Field):
    kind = 'scalar'

    @staticmethod
    def _expected_shape(grid):
        return tuple(grid.shape)

    @classmethod
    def from_components(cls, grid, comps):
        return cls(grid, comps[0])

    @classmethod
    def sample(cls, grid, func):
        """Evaluate ``func(coords)`` on every node"""
        return cls(grid, np.broadcast_to(func(grid.coords), grid.shape))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))


class VectorField(_Field):
    kind = 'vector'

    @staticmethod
    def _expected_shape(grid):
        return (grid.n,) + tuple(grid.shape)

    def components(self):
        return list(self.values)

    @classmethod
    def from_components(cls, grid, comps):
        return cls(grid, np.stack(comps))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n,) + tuple(grid.shape)))


class SymMatrixField(_Field):
    """Symmetric matrix field stored as its upper triangle, shape (N*, *grid.shape)"""

    kind = 'symmat'

    @staticmethod
    def _expected_shape(grid):
        return (n_star(grid.n),) + tuple(grid.shape)

    def components(self):
        return list(self.values)

    @classmethod
    def from_components(cls, grid, comps):
        return cls(grid, np.stack(comps))

    @classmethod
    def from_full(cls, grid, full):
        """Build from a full (n, n, *shape) array, symmetrizing it"""
        full = np.asarray(full, dtype=float)
        comps = [0.5 * (full[i, j] + full[j, i]) for i, j in sym_index_pairs(grid.n)]
        return cls(grid, np.stack(comps))

    @classmethod
    def identity(cls, grid, scale=1.0):
        """``scale * Id``; scale may be a number or an array over the grid"""
        scale = np.broadcast_to(np.asarray(scale, dtype=float), grid.shape)
        comps = [scale if i == j else np.zeros(grid.shape) for i, j in sym_index_pairs(grid.n)]
        return cls(grid, np.stack(comps))

    @classmethod
    def outer(cls, u, v=None):
        """Symmetrized outer product of two vector fields"""
        v = u if v is None else v
        u._check_grid(v)
        comps = [0.5 * (u.values[i] * v.values[j] + u.values[j] * v.values[i])
                 for i, j in sym_index_pairs(u.grid.n)]
        return cls(u.grid, np.stack(comps))

    def full(self):
        """Full (n, n, *shape) array"""
        n = self.grid.n
        out = np.empty((n, n) + tuple(self.grid.shape))
        for k, (i, j) in enumerate(sym_index_pairs(n)):
            out[i, j] = self.values[k]
            out[j, i] = self.values[k]
        return out

    def trace(self):
        pairs = sym_index_pairs(self.grid.n)
        return ScalarField(self.grid, sum(self.values[k] for k, (i, j) in enumerate(pairs) if i == j))


def field_class(kind):
    return {'scalar': ScalarField, 'vector': VectorField, 'symmat': SymMatrixField}[kind]


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _diff(values, axis, h):
    return np.gradient(values, h, axis=axis, edge_order=2)


def gradient(f):
    """
    Central-difference gradient, one-sided at the box edge

    Args:
        f (ScalarField): Field to differentiate

    Returns:
        VectorField: Gradient
    """
    g = f.grid
    return VectorField(g, np.stack([_diff(f.values, k, g.h) for k in range(g.n)]))


def second_derivatives(values, h, n):
    """Upper-triangle second derivatives of an array as the symmetrized repeated gradient"""
    first = [_diff(values, k, h) for k in range(n)]
    return [0.5 * (_diff(first[i], j, h) + _diff(first[j], i, h)) for i, j in sym_index_pairs(n)]


def hessian(f):
    """
    Hessian as the symmetrized gradient of the gradient

    Args:
        f (ScalarField): Field to differentiate

    Returns:
        SymMatrixField: Hessian
    """
    g = f.grid
    return SymMatrixField(g, np.stack(second_derivatives(f.values, g.h, g.n)))


def jacobian(w):
    """Full Jacobian J[i, j] = d_j w_i, shape (n, n, *shape)"""
    g = w.grid
    return np.stack([np.stack([_diff(w.values[i], j, g.h) for j in range(g.n)]) for i in range(g.n)])


def sym_grad(w):
    """
    Symmetric gradient ½(∇w + ∇wᵀ)

    Args:
        w (VectorField): Field to differentiate

    Returns:
        SymMatrixField: Symmetric part of the Jacobian
    """
    return SymMatrixField.from_full(w.grid, jacobian(w))


# ---------------------------------------------------------------------------
# Mollification
# ---------------------------------------------------------------------------

def _bump(r2):
    with np.errstate(divide='ignore', over='ignore'):
        return np.where(r2 < 1.0, np.exp(-1.0 / np.where(r2 < 1.0, 1.0 - r2, 1.0)), 0.0)


class Mollifier:
    """
    Radial bump c·exp(-1/(1-|x|²)) on the unit ball with unit total mass

    Args:
        n (int): Dimension
    """

    def __init__(self, n):
        self.n = n
        sphere = 2.0 * math.pi ** (n / 2.0) / special.gamma(n / 2.0)
        radial, _ = integrate.quad(lambda r: float(_bump(r * r)) * r ** (n - 1), 0.0, 1.0,
                                   epsabs=1e-14, epsrel=1e-13)
        self.constant = 1.0 / (sphere * radial)
        self._kernels = {}

    def profile(self, points):
        """Continuous profile φ at points (n, ...)"""
        r2 = np.sum(np.asarray(points, dtype=float) ** 2, axis=0)
        return self.constant * _bump(r2)

    def kernel(self, l, h):
        """
        Sampled φ_l on the grid, renormalized to unit discrete mass

        Returns:
            np.ndarray or None: Kernel of odd width per axis, None when l < h
        """
        if l < h:
            return None
        key = (round(l / h, 12), self.n)
        if key not in self._kernels:
            m = int(math.floor(l / h))
            offsets = np.arange(-m, m + 1) * h / l
            mesh = np.stack(np.meshgrid(*([offsets] * self.n), indexing='ij'))
            weights = self.profile(mesh) * (h / l) ** self.n
            discrete_mass = weights.sum()
            if abs(discrete_mass - 1.0) > 0.5:
                logger.debug(f"Mollifier at l/h={l / h:.3g} has raw discrete mass {discrete_mass:.4g}")
            weights = weights / discrete_mass
            weights.setflags(write=False)
            self._kernels[key] = weights
        return self._kernels[key]


_MOLLIFIERS = {}


def get_mollifier(n):
    if n not in _MOLLIFIERS:
        _MOLLIFIERS[n] = Mollifier(n)
    return _MOLLIFIERS[n]


def convolve_array(values, kernel):
    """Convolve with a symmetric kernel, edge values repeated beyond the box"""
    if kernel is None:
        return np.array(values, dtype=float)
    width = kernel.shape[0]
    if width <= _DIRECT_KERNEL_WIDTH:
        return ndimage.correlate(values, kernel, mode='nearest')
    m = width // 2
    padded = np.pad(values, m, mode='edge')
    return signal.fftconvolve(padded, kernel, mode='valid')


def mollify(f, l):
    """
    Convolve every component with φ_l

    Args:
        f: ScalarField, VectorField or SymMatrixField
        l (float): Mollification length

    Returns:
        Field of the same kind

    Raises:
        FieldError: if l exceeds the collar width
    """
    grid = f.grid
    if l > grid.pad * (1.0 + 1e-12):
        raise FieldError(f"Mollification length {l:.6g} exceeds collar width {grid.pad:.6g}")
    kernel = get_mollifier(grid.n).kernel(l, grid.h)
    comps = f.components()
    if len(comps) == 1:
        return type(f).from_components(grid, [convolve_array(comps[0], kernel)])
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(comps))) as pool:
        smoothed = list(pool.map(lambda c: convolve_array(c, kernel), comps))
    return type(f).from_components(grid, smoothed)


def smooth_indicator(grid, region, radius):
    """
    Mollified indicator of a boolean region at a spatial radius

    The result is exactly 0 farther than ``radius`` from the region and exactly 1
    deeper than ``radius`` inside it.
    """
    kernel = get_mollifier(grid.n).kernel(radius, grid.h)
    smoothed = convolve_array(region.astype(float), kernel)
    smoothed = np.clip(smoothed, 0.0, 1.0)
    smoothed[smoothed < 1e-13] = 0.0
    smoothed[smoothed > 1.0 - 1e-13] = 1.0
    return smoothed


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _region(grid, where):
    if where is None:
        return np.ones(grid.shape, dtype=bool)
    return np.asarray(where, dtype=bool)


def sup_norm(f, where=None):
    """
    Entrywise sup norm over a region (whole grid by default)

    Args:
        f: Any field
        where (np.ndarray, optional): Boolean region

    Returns:
        float: max |component| over the region
    """
    region = _region(f.grid, where)
    if not np.any(region):
        return 0.0
    return float(max(np.max(np.abs(c[region])) for c in f.components()))


def derivative_arrays(f, k):
    """All k-th order partial derivative arrays of every component (k <= 2)"""
    h, n = f.grid.h, f.grid.n
    arrays = []
    for comp in f.components():
        if k == 0:
            arrays.append(comp)
        elif k == 1:
            arrays.extend(_diff(comp, j, h) for j in range(n))
        elif k == 2:
            arrays.extend(second_derivatives(comp, h, n))
        else:
            raise FieldError(f"Derivative order {k} not supported")
    return arrays


def ck_norm(f, k, where=None):
    """‖f‖_k: sum over orders j <= k of the sup of the j-th derivatives"""
    region = _region(f.grid, where)
    if not np.any(region):
        return 0.0
    total = 0.0
    for j in range(k + 1):
        total += max(float(np.max(np.abs(a[region]))) for a in derivative_arrays(f, j))
    return total


def holder_seminorm(f, k, beta, where=None, max_separation=None):
    """
    Dyadic estimate of [∇^k f]_β

    Quotients |∇^k f(x) - ∇^k f(y)| / |x - y|^β are sampled along every axis at
    separations 2^j h up to ``max_separation`` (a quarter of the box by default),
    keeping pairs with both points in the region.

    Args:
        f: Any field
        k (int): Derivative order, 0 or 1
        beta (float): Exponent in (0, 1]
        where (np.ndarray, optional): Boolean region
        max_separation (float, optional): Largest separation sampled

    Returns:
        float: Largest sampled quotient
    """
    if not 0.0 < beta <= 1.0:
        raise FieldError(f"Hölder exponent must lie in (0, 1], got {beta}")
    if k not in (0, 1):
        raise FieldError(f"Hölder seminorm order must be 0 or 1, got {k}")
    grid = f.grid
    region = _region(grid, where)
    if max_separation is None:
        max_separation = 0.25 * float(np.max(grid.bbox[:, 1] - grid.bbox[:, 0]))
    arrays = derivative_arrays(f, k)
    best = 0.0
    step = 1
    while step * grid.h <= max_separation + 1e-12 and step < min(grid.shape):
        scale = (step * grid.h) ** beta
        for axis in range(grid.n):
            head = [slice(None)] * grid.n
            tail = [slice(None)] * grid.n
            head[axis] = slice(step, None)
            tail[axis] = slice(None, -step)
            head, tail = tuple(head), tuple(tail)
            pair = region[head] & region[tail]
            if not np.any(pair):
                continue
            for a in arrays:
                diff = np.abs(a[head] - a[tail])[pair]
                best = max(best, float(diff.max()) / scale)
        step *= 2
    return best


def holder_norm(f, k, beta, where=None):
    """‖f‖_{k,β} = ‖f‖_k + [∇^k f]_β"""
    return ck_norm(f, k, where) + holder_seminorm(f, k, beta, where)


def mollification_report(f, l, where=None):
    """
    Measured constants of the mollification estimates for one field

    Returns:
        dict: gap ‖f - f_l‖₀, its ratio to ‖f‖₂ l², the first-order locality
              ratio ‖f - f_l‖₁ / (‖f‖₂ l), and the monotonicity ratio ‖f_l‖₀ / ‖f‖₀
    """
    smoothed = mollify(f, l)
    gap = f - smoothed
    c2 = ck_norm(f, 2, where)
    c0 = sup_norm(f, where)
    gap0 = sup_norm(gap, where)
    gap1 = ck_norm(gap, 1, where)
    tiny = np.finfo(float).tiny
    return {
        'l': l,
        'gap_c0': gap0,
        'second_order_ratio': gap0 / max(c2 * l * l, tiny),
        'first_order_ratio': gap1 / max(c2 * l, tiny),
        'monotonicity_ratio': sup_norm(smoothed, where) / max(c0, tiny),
    }


def commutator_norm(f1, f2, l, where=None):
    """‖(f₁f₂)_l − (f₁)_l(f₂)_l‖₀ together with ‖f₁‖₁‖f₂‖₁l²"""
    prod = ScalarField(f1.grid, f1.values * f2.values)
    lhs = mollify(prod, l).values - mollify(f1, l).values * mollify(f2, l).values
    region = _region(f1.grid, where)
    value = float(np.max(np.abs(lhs[region])))
    bound = ck_norm(f1, 1, where) * ck_norm(f2, 1, where) * l * l
    return value, bound
