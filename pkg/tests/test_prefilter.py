from __future__ import annotations

import numpy as np
import pytest

from core.errors import ConfigError, DimensionMismatchError
from core.prefilter import (
    PrefilterParams,
    bounding_rect,
    edge_thin_binarize,
    find_contours,
    gaussian_blur,
    gaussian_kernel,
    merge_rois,
    pattern_to_rois,
    rois_from_contours,
    sobel_gradients,
)
from core.sensor import BinConfig
from core.types import MotionPattern, RoiRect


def test_gaussian_kernel_is_normalized() -> None:
    kernel = gaussian_kernel(0.8)
    assert kernel.shape == (7,)
    assert kernel.sum() == pytest.approx(1.0)
    assert kernel[3] == kernel.max()
    with pytest.raises(ConfigError):
        gaussian_kernel(0.0)


def test_gaussian_blur_preserves_constant_images() -> None:
    img = np.full((5, 7), 3.0)
    assert np.allclose(gaussian_blur(img, 1.2), 3.0)


def test_sobel_on_a_horizontal_ramp() -> None:
    img = np.tile(np.arange(6, dtype=np.float64), (5, 1))
    gx, gy = sobel_gradients(img)
    assert np.allclose(gx[:, 1:-1], 8.0)
    assert np.allclose(gy, 0.0)


def test_edge_thinning_keeps_only_the_step_columns() -> None:
    img = np.zeros((9, 9))
    img[:, 5:] = 1.0
    gx, gy = sobel_gradients(gaussian_blur(img, 0.8))
    edges = edge_thin_binarize(gx, gy, 0.1)
    columns = np.flatnonzero(edges.any(axis=0))
    assert columns.size >= 1
    assert set(columns.tolist()) <= {4, 5}
    with pytest.raises(ConfigError):
        edge_thin_binarize(gx, gy, 0.0)


def test_find_contours_one_per_component() -> None:
    binary = np.zeros((10, 10), dtype=np.uint8)
    binary[1:4, 1:4] = 1
    binary[6, 7] = 1
    contours = find_contours(binary)
    rects = sorted(bounding_rect(contour) for contour in contours)
    assert rects == [RoiRect(1, 1, 3, 3), RoiRect(7, 6, 1, 1)]
    assert find_contours(np.zeros((4, 4))) == []


def test_contour_of_a_square_is_its_border() -> None:
    binary = np.zeros((6, 6), dtype=np.uint8)
    binary[1:4, 1:4] = 1
    (contour,) = find_contours(binary)
    points = {tuple(point) for point in contour.tolist()}
    assert len(points) == 8
    assert (2, 2) not in points


def test_merge_rois_reaches_a_fixed_point() -> None:
    rois = [RoiRect(0, 0, 10, 10), RoiRect(2, 0, 10, 10), RoiRect(40, 40, 5, 5)]
    merged = merge_rois(rois, 0.3)
    assert sorted(merged) == [RoiRect(0, 0, 12, 10), RoiRect(40, 40, 5, 5)]
    for i, a in enumerate(merged):
        for b in merged[i + 1 :]:
            assert a.iou(b) < 0.3


def test_rois_from_contours_inflates_and_clamps() -> None:
    contour = np.array([[0, 0], [3, 0], [3, 3], [0, 3]])
    (roi,) = rois_from_contours([contour], expand=0.25, bounds=(10, 10))
    assert roi == RoiRect(0, 0, 5, 5)
    with pytest.raises(ConfigError):
        rois_from_contours([contour], expand=-1.0, bounds=(10, 10))


def test_pattern_to_rois_covers_active_block() -> None:
    bits = np.zeros((20, 20), dtype=np.uint8)
    bits[5:8, 8:11] = 1
    bin_cfg = BinConfig(m=4, n=4)
    rois = pattern_to_rois(MotionPattern(bits), bin_cfg, (80, 80), PrefilterParams())
    assert len(rois) >= 1
    covered = np.zeros((80, 80), dtype=bool)
    for roi in rois:
        assert roi.x >= 0 and roi.y >= 0 and roi.x2 <= 80 and roi.y2 <= 80
        assert roi.x % 4 == 0 and roi.y % 4 == 0
        covered[roi.slices()] = True
    assert covered[20:32, 32:44].all()
    assert not covered.all()


def test_pattern_to_rois_empty_and_forced() -> None:
    bin_cfg = BinConfig(m=4, n=4)
    empty = MotionPattern(np.zeros((5, 5), dtype=np.uint8))
    assert pattern_to_rois(empty, bin_cfg, (20, 20), PrefilterParams()) == []
    forced = pattern_to_rois(empty, bin_cfg, (20, 20), PrefilterParams(force_full_frame=True))
    assert forced == [RoiRect(0, 0, 20, 20)]
    with pytest.raises(DimensionMismatchError):
        pattern_to_rois(empty, bin_cfg, (24, 20), PrefilterParams())


def _assert_active_cells_covered(bits: np.ndarray, rois, bin_cfg: BinConfig) -> None:
    covered = np.zeros(bits.shape, dtype=bool)
    for roi in rois:
        assert roi.x % bin_cfg.n == 0 and roi.y % bin_cfg.m == 0
        covered[roi.y // bin_cfg.m : roi.y2 // bin_cfg.m, roi.x // bin_cfg.n : roi.x2 // bin_cfg.n] = True
    assert covered[bits > 0].all()


@pytest.mark.parametrize("shape", [(2, 2), (2, 3), (1, 1)])
def test_pattern_to_rois_on_grids_smaller_than_the_stencil(shape) -> None:
    bits = np.zeros(shape, dtype=np.uint8)
    bits[0, 0] = 1
    bin_cfg = BinConfig(m=20, n=20)
    frame_dims = (shape[1] * 20, shape[0] * 20)

    rois = pattern_to_rois(MotionPattern(bits), bin_cfg, frame_dims, PrefilterParams())

    assert rois
    _assert_active_cells_covered(bits, rois, bin_cfg)
    for roi in rois:
        assert roi.x2 <= frame_dims[0] and roi.y2 <= frame_dims[1]


def test_pattern_to_rois_covers_border_and_full_field_motion() -> None:
    bin_cfg = BinConfig(m=20, n=20)
    full = np.ones((45, 96), dtype=np.uint8)
    left = np.zeros((45, 96), dtype=np.uint8)
    left[:, :40] = 1
    corner = np.zeros((45, 96), dtype=np.uint8)
    corner[40:, 90:] = 1

    for bits in (full, left, corner):
        rois = pattern_to_rois(MotionPattern(bits), bin_cfg, (1920, 900), PrefilterParams())
        _assert_active_cells_covered(bits, rois, bin_cfg)


def test_pattern_to_rois_covers_random_blobs() -> None:
    rng = np.random.default_rng(7)
    bin_cfg = BinConfig(m=4, n=4)
    for _ in range(25):
        bits = np.zeros((24, 32), dtype=np.uint8)
        for _ in range(int(rng.integers(1, 5))):
            h, w = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            y, x = int(rng.integers(0, 24 - h + 1)), int(rng.integers(0, 32 - w + 1))
            bits[y : y + h, x : x + w] = 1
        params = PrefilterParams(expand=float(rng.choice([0.0, 0.25])))

        rois = pattern_to_rois(MotionPattern(bits), bin_cfg, (128, 96), params)

        _assert_active_cells_covered(bits, rois, bin_cfg)
        for i, a in enumerate(rois):
            for b in rois[i + 1 :]:
                assert a.iou(b) < params.merge_iou
