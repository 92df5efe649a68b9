import math

import numpy as np
import pytest

from core.decomp import (
    build_frame, decompose, decompose_field, frame_to_text, reconstruct, squared_amplitudes, upper,
)
from core.errors import DecompositionError, FrameError
from core.field import sym_index_pairs


def _symmetric(n, coords):
    M = np.zeros((n, n))
    for k, (i, j) in enumerate(sym_index_pairs(n)):
        M[i, j] = M[j, i] = coords[k]
    return M


def test_planar_frame_constants(frame2):
    assert frame2.N_star == 3
    assert np.allclose(frame2.c_id, 2.0 / 3.0)
    norm = 2.0 / math.sqrt(3.0) + 2.0 / 3.0
    assert frame2.T_inv_norm == pytest.approx(norm)
    assert frame2.sigma_star == pytest.approx((2.0 / 3.0) / (2.0 * norm))
    assert frame2.sigma_star == pytest.approx(0.183, abs=1e-3)


def test_frame_reconstructs_identity(frame2, frame3):
    for frame in (frame2, frame3):
        assert np.allclose(reconstruct(frame, frame.d_star), upper(np.eye(frame.n)), atol=1e-12)
        assert np.allclose(np.linalg.norm(frame.xis, axis=1), 1.0)


def test_spatial_frame_is_invertible(frame3):
    assert frame3.N_star == 6
    assert frame3.T.shape == (6, 6)
    assert abs(np.linalg.det(frame3.T)) > 1e-6


def test_seeded_frame_is_a_rotation(frame2):
    rotated = build_frame(2, seed=7)
    assert np.allclose(rotated.c_id, frame2.c_id)
    assert not np.allclose(rotated.xis, frame2.xis)


def test_frame_needs_two_dimensions():
    with pytest.raises(FrameError):
        build_frame(1)


@pytest.mark.parametrize('n', [2, 3])
def test_decomposition_reconstructs_random_matrices(n, frame2, frame3, rng):
    frame = frame2 if n == 2 else frame3
    for _ in range(2000):
        gap = rng.uniform(-1.0, 1.0, size=frame.N_star) * frame.sigma_star
        D = np.eye(n) + _symmetric(n, gap)
        d = decompose(frame, D)
        assert np.allclose(reconstruct(frame, d), upper(D), atol=1e-10)
        assert np.all(d >= frame.c_star - 1e-12)
        assert np.all(d <= frame.C_star + 1e-12)


def test_decomposition_outside_the_ball_fails(frame2):
    D = np.eye(2)
    D[0, 1] = D[1, 0] = 1.1 * frame2.sigma_star
    with pytest.raises(DecompositionError) as info:
        decompose(frame2, D)
    assert info.value.distance == pytest.approx(1.1 * frame2.sigma_star)


def test_decompose_field_strict_and_projected(frame2):
    shape = (4, 4)
    D = np.repeat(upper(np.eye(2))[:, None, None], 4, axis=1).repeat(4, axis=2).astype(float)
    D[0, 2, 3] += 2.0 * frame2.sigma_star
    strict = np.zeros(shape, dtype=bool)
    strict[2, 3] = True
    with pytest.raises(DecompositionError) as info:
        decompose_field(frame2, D, strict)
    assert info.value.location == (2, 3)

    d, projected = decompose_field(frame2, D, None)
    assert projected.sum() == 1 and projected[2, 3]
    pulled = reconstruct(frame2, d[:, 2, 3]) - upper(np.eye(2))
    assert np.max(np.abs(pulled)) == pytest.approx(frame2.sigma_star)
    assert np.allclose(d[:, 0, 0], frame2.d_star)


def test_normalized_and_direct_amplitudes_agree(frame2, rng):
    """s·d(D/s)² equals T⁻¹D for any scale s keeping D/s admissible"""
    gap = rng.uniform(-0.5, 0.5, size=3) * frame2.sigma_star
    for s in (1e-3, 0.2, 5.0):
        D = s * (np.eye(2) + _symmetric(2, gap))
        d = decompose(frame2, D / s)
        assert np.allclose(s * d ** 2, squared_amplitudes(frame2, upper(D)), rtol=1e-12, atol=1e-15)


def test_frame_text_lists_every_direction(frame3):
    text = frame_to_text(frame3)
    assert text.count('xi[') == 6
    assert 'sigma*' in text


def test_frame_records_its_construction(frame2):
    assert frame2.construction == 'base'
    rotated = build_frame(3, seed=4)
    assert rotated.construction == 'rotated'
    assert rotated.to_dict()['construction'] == 'rotated'
    assert 'construction=rotated' in frame_to_text(rotated)
