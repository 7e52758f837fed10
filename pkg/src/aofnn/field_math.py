"""Discrete field algebra shared by the optics engine and the network.

Real images are plain 2-D float arrays. Complex wavefronts are wrapped in
:class:`ComplexField`, which carries a layout tag telling whether the zero
frequency (or the optical axis) sits at index ``(0, 0)`` or at the array
centre. Transforms act on the last two axes, so leading batch axes are
allowed everywhere.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

CORNER = "dc_at_corner"
CENTER = "dc_at_center"


@dataclass(frozen=True)
class ComplexField:
    values: np.ndarray
    layout: str = CORNER

    def __post_init__(self):
        if self.layout not in (CORNER, CENTER):
            raise ValueError(f"unknown layout {self.layout!r}")
        if np.ndim(self.values) < 2:
            raise ValueError("a field needs at least two axes")

    @property
    def shape(self):
        return self.values.shape


def as_field(values, layout=CORNER):
    return ComplexField(np.asarray(values, dtype=np.complex128), layout)


# Raw orthonormal transforms used on hot paths (training, batched optics).
def fft2o(a):
    return sfft.fft2(a, norm="ortho")


def ifft2o(a):
    return sfft.ifft2(a, norm="ortho")


def _check_finite(field):
    if not np.all(np.isfinite(field.values)):
        raise ValueError("field contains non-finite samples")


def dft2(field):
    """Orthonormal forward 2-D DFT with kernel ``exp(-2j*pi*(u*x + v*y))``.

    Input and output are both ``dc_at_corner``. The ``1/sqrt(rows*cols)``
    scaling makes the transform unitary, so Parseval holds exactly.
    """
    if field.layout != CORNER:
        raise ValueError("dft2 expects a dc_at_corner field")
    _check_finite(field)
    return ComplexField(fft2o(field.values), CORNER)


def idft2(field):
    """Exact inverse of :func:`dft2`."""
    if field.layout != CORNER:
        raise ValueError("idft2 expects a dc_at_corner field")
    _check_finite(field)
    return ComplexField(ifft2o(field.values), CORNER)


def shift_layout(field):
    """Swap quadrants and toggle the layout tag.

    corner -> center uses ``fftshift``, center -> corner uses
    ``ifftshift``, so a round trip restores odd-sized fields too.
    """
    if field.layout == CORNER:
        return ComplexField(sfft.fftshift(field.values, axes=(-2, -1)), CENTER)
    return ComplexField(sfft.ifftshift(field.values, axes=(-2, -1)), CORNER)


def intensity(field):
    values = field.values if isinstance(field, ComplexField) else np.asarray(field)
    return values.real ** 2 + values.imag ** 2


def center_offsets(source, target):
    """Floor offsets that centre a ``source`` extent inside ``target``."""
    return (target[0] - source[0]) // 2, (target[1] - source[1]) // 2


def zero_pad_center(img, target_rows, target_cols):
    img = np.asarray(img)
    rows, cols = img.shape[-2:]
    if target_rows < rows or target_cols < cols:
        raise ValueError(
            f"cannot pad {rows}x{cols} into smaller {target_rows}x{target_cols}")
    r0, c0 = center_offsets((rows, cols), (target_rows, target_cols))
    out = np.zeros(img.shape[:-2] + (target_rows, target_cols), dtype=img.dtype)
    out[..., r0:r0 + rows, c0:c0 + cols] = img
    return out


def center_crop(img, rows, cols):
    """Inverse of :func:`zero_pad_center`: take the centred ``rows x cols`` window."""
    img = np.asarray(img)
    big_r, big_c = img.shape[-2:]
    if rows > big_r or cols > big_c:
        raise ValueError(f"crop {rows}x{cols} larger than image {big_r}x{big_c}")
    r0, c0 = center_offsets((rows, cols), (big_r, big_c))
    return img[..., r0:r0 + rows, c0:c0 + cols]


def expand_pixels(img, factor):
    """Replicate every pixel into a ``factor x factor`` block."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"expansion factor must be a positive integer, got {factor}")
    factor = int(factor)
    img = np.asarray(img)
    if factor == 1:
        return img.copy()
    return np.repeat(np.repeat(img, factor, axis=-2), factor, axis=-1)


def superpixel_reduce(img, block):
    """Average each ``block x block`` tile down to one pixel.

    The mean (not the sum) is used so that a detector's full-scale range is
    independent of the block size.
    """
    if int(block) != block or block < 1:
        raise ValueError(f"block must be a positive integer, got {block}")
    block = int(block)
    img = np.asarray(img)
    rows, cols = img.shape[-2:]
    if rows % block or cols % block:
        raise ValueError(f"{rows}x{cols} image is not divisible into {block}x{block} blocks")
    if block == 1:
        return img.copy()
    lead = img.shape[:-2]
    tiles = img.reshape(lead + (rows // block, block, cols // block, block))
    # Averaging deviations from each block's first sample keeps uniform
    # blocks exact, so reducing a pixel-expanded image is lossless.
    ref = tiles[..., :, :1, :, :1]
    return ref[..., :, 0, :, 0] + (tiles - ref).mean(axis=(-3, -1))


@dataclass(frozen=True)
class Placement:
    row: int
    col: int


def tile_capacity(tile_shape, canvas_rows, canvas_cols):
    return (canvas_rows // tile_shape[0]) * (canvas_cols // tile_shape[1])


def tile_images(images, canvas_rows, canvas_cols):
    """Pack equally sized tiles row-major onto a blank canvas.

    Returns the canvas and one :class:`Placement` per tile. Raises
    ``ValueError`` naming the grid capacity when there are too many tiles.
    """
    images = [np.asarray(im) for im in images]
    if not images:
        raise ValueError("no tiles given")
    shape = images[0].shape
    if any(im.shape != shape for im in images):
        raise ValueError("all tiles must share the same dimensions")
    per_row = canvas_cols // shape[1]
    capacity = tile_capacity(shape, canvas_rows, canvas_cols)
    if len(images) > capacity:
        raise ValueError(
            f"{len(images)} tiles of {shape[0]}x{shape[1]} exceed the grid capacity "
            f"{capacity} of a {canvas_rows}x{canvas_cols} canvas")
    canvas = np.zeros((canvas_rows, canvas_cols), dtype=np.result_type(*images))
    placements = []
    for n, im in enumerate(images):
        r, c = (n // per_row) * shape[0], (n % per_row) * shape[1]
        canvas[r:r + shape[0], c:c + shape[1]] = im
        placements.append(Placement(r, c))
    return canvas, placements


def untile_images(canvas, placements, tile_shape):
    rows, cols = tile_shape
    return [np.array(canvas[p.row:p.row + rows, p.col:p.col + cols]) for p in placements]
