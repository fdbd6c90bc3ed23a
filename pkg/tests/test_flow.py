from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from backends import BACKEND_REGISTRY, FlowBackendSpec, build_backend
from backends.blockmatch import BlockMatchBackend, BlockMatchParams, block_match_flow, block_sad, candidate_order
from backends.farneback import FarnebackBackend, FarnebackParams, farneback_flow, poly_expansion
from core.errors import ConfigError, DimensionMismatchError, ImageTooSmallError
from core.types import LumaFrame
from tests.conftest import noise_frame, shifted_pair

SHIFTS = [(1, 0), (-2, 0), (0, 3), (0, -1), (2, -2), (-3, 1)]
MARGIN = 16


def test_poly_expansion_recovers_a_quadratic_surface() -> None:
    ys, xs = np.mgrid[0:21, 0:21].astype(np.float64)
    img = 0.5 * xs**2 + 0.25 * ys**2 + 0.1 * xs * ys + 3.0 * xs - 2.0 * ys + 7.0
    expansion = poly_expansion(img, poly_n=7, poly_sigma=1.5)
    inner = (slice(3, -3), slice(3, -3))
    assert np.allclose(expansion.a11[inner], 0.5)
    assert np.allclose(expansion.a22[inner], 0.25)
    assert np.allclose(expansion.a12[inner], 0.05)
    assert expansion.b1[10, 10] == pytest.approx(14.0)
    assert expansion.b2[10, 10] == pytest.approx(4.0)
    assert expansion.c[10, 10] == pytest.approx(102.0)
    assert expansion.A.shape == (21, 21, 2, 2)


def test_poly_expansion_validates_window() -> None:
    with pytest.raises(ConfigError):
        poly_expansion(np.zeros((10, 10)), poly_n=6)
    with pytest.raises(ImageTooSmallError):
        poly_expansion(np.zeros((5, 10)), poly_n=7)
    with pytest.raises(ValidationError):
        FarnebackParams(poly_n=8)


def test_farneback_identical_frames_give_zero_flow() -> None:
    frame = noise_frame(48, 48, seed=4, scale=5.0)
    field = farneback_flow(frame, frame)
    assert np.allclose(field.u, 0.0, atol=1e-6)
    assert np.allclose(field.v, 0.0, atol=1e-6)


@pytest.mark.parametrize(("dx", "dy"), SHIFTS)
def test_farneback_recovers_integer_shifts(dx: int, dy: int) -> None:
    prev, curr = shifted_pair(96, 96, dx, dy, seed=21, scale=6.0)
    field = farneback_flow(prev, curr)
    inner = (slice(MARGIN, -MARGIN), slice(MARGIN, -MARGIN))
    error = np.hypot(field.u[inner] - dx, field.v[inner] - dy)
    assert float(np.median(error)) <= 0.5


@pytest.mark.parametrize(("dx", "dy"), SHIFTS)
def test_farneback_agrees_with_block_matching(dx: int, dy: int) -> None:
    prev, curr = shifted_pair(96, 96, dx, dy, seed=21, scale=6.0)
    matched = block_match_flow(prev, curr, block=8, search_radius=4)
    estimated = farneback_flow(prev, curr)
    inner = (slice(MARGIN, -MARGIN), slice(MARGIN, -MARGIN))
    assert float(np.median(matched.u[inner])) == dx
    assert float(np.median(matched.v[inner])) == dy
    assert abs(float(np.median(estimated.u[inner])) - dx) <= 0.5
    assert abs(float(np.median(estimated.v[inner])) - dy) <= 0.5


def test_candidate_order_prefers_small_displacements() -> None:
    order = candidate_order(1)
    assert order[0] == (0, 0)
    assert order[1:5] == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    assert len(order) == 9


def test_block_matching_is_exhaustively_optimal() -> None:
    rng = np.random.default_rng(5)
    block, radius = 8, 2
    candidates = candidate_order(radius)
    for _ in range(20):
        prev = rng.integers(0, 4, size=(16, 16), dtype=np.uint8)
        curr = rng.integers(0, 4, size=(16, 16), dtype=np.uint8)
        field = block_match_flow(LumaFrame(prev), LumaFrame(curr), block=block, search_radius=radius)
        for y in (0, 8):
            for x in (0, 8):
                sads = [
                    (block_sad(prev, curr, x, y, (block, block), dx, dy), (dy, dx)) for dy, dx in candidates
                ]
                valid = [(sad, d) for sad, d in sads if sad is not None]
                best = min(sad for sad, _ in valid)
                first_best = next(d for sad, d in valid if sad == best)
                assert (int(field.v[y, x]), int(field.u[y, x])) == first_best
                chosen = block_sad(prev, curr, x, y, (block, block), int(field.u[y, x]), int(field.v[y, x]))
                assert chosen == best


def test_block_matching_fills_each_block_and_handles_ragged_edges() -> None:
    prev, curr = shifted_pair(20, 21, 1, 0, seed=2, scale=3.0)
    field = block_match_flow(prev, curr, block=8, search_radius=2)
    assert field.shape == (20, 21)
    assert np.all(field.u[:8, :8] == field.u[0, 0])


def test_block_matching_validates_parameters() -> None:
    frame = LumaFrame(np.zeros((8, 8), dtype=np.uint8))
    with pytest.raises(ConfigError):
        block_match_flow(frame, frame, block=2)
    with pytest.raises(ConfigError):
        block_match_flow(frame, frame, search_radius=0)
    with pytest.raises(DimensionMismatchError):
        block_match_flow(frame, LumaFrame(np.zeros((8, 9), dtype=np.uint8)))


def test_backend_context_and_alignment() -> None:
    farneback = FarnebackBackend()
    assert farneback.window_radius == 104
    assert farneback.alignment == 4
    blockmatch = BlockMatchBackend(BlockMatchParams(block=8, search_radius=4))
    assert blockmatch.window_radius == 12
    assert blockmatch.alignment == 8


def test_farneback_rejects_tiny_frames() -> None:
    frame = LumaFrame(np.zeros((5, 40), dtype=np.uint8))
    with pytest.raises(ImageTooSmallError):
        FarnebackBackend().estimate(frame, frame)


def test_build_backend_uses_registry() -> None:
    assert set(BACKEND_REGISTRY) == {"farneback", "blockmatch", "external"}
    backend = build_backend(FlowBackendSpec(kind="blockmatch", blockmatch=BlockMatchParams(block=4)))
    assert isinstance(backend, BlockMatchBackend)
    assert backend.params.block == 4
    with pytest.raises(ValidationError):
        FlowBackendSpec(kind="raft")
