"""Binary morphology with a square structuring element; pixels outside the image count as 0."""
from __future__ import annotations

from typing import Literal

import numpy as np
from scipy import ndimage

from core.errors import ConfigError

MorphOp = Literal["erode", "dilate", "open"]


def morph(binary: np.ndarray, op: MorphOp, kernel: int = 3) -> np.ndarray:
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"Morphology kernel must be odd and positive, got {kernel}")
    image = np.asarray(binary) > 0
    structure = np.ones((kernel, kernel), dtype=bool)

    if op == "erode":
        result = ndimage.binary_erosion(image, structure=structure, border_value=0)
    elif op == "dilate":
        result = ndimage.binary_dilation(image, structure=structure, border_value=0)
    elif op == "open":
        eroded = ndimage.binary_erosion(image, structure=structure, border_value=0)
        result = ndimage.binary_dilation(eroded, structure=structure, border_value=0)
    else:
        raise ConfigError(f"Unknown morphology operation '{op}'")
    return result.astype(np.uint8)


__all__ = ["morph"]
