"""Tiled qualitative comparison grids."""

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .. import imageio
from ..errors import ArgumentError, DimensionError

HEADER_HEIGHT = 24


def _cell_array(cell):
    if isinstance(cell, np.ndarray):
        return cell
    return imageio.to_uint8(cell)


def emit_grid(rows, path, headers=None, header_height=HEADER_HEIGHT):
    """Tile rows of equally sized images under a header band of column titles.

    Args:
        rows: list of rows; each row is a sequence of (3, H, W) tensors in
            [-1, 1] (or uint8 HxWx3 arrays), or a mapping whose keys name
            the columns.
        headers: column titles; taken from mapping keys when omitted.

    Returns:
        Path of the written PNG. Cell (r, c) occupies rows
        ``header + r*H .. header + (r+1)*H`` and columns ``c*W .. (c+1)*W``.
    """
    if not rows:
        raise ArgumentError("grid needs at least one row")
    if isinstance(rows[0], dict):
        headers = headers or list(rows[0].keys())
        rows = [list(r.values()) for r in rows]
    ncols = len(rows[0])
    if ncols == 0 or any(len(r) != ncols for r in rows):
        raise ArgumentError("grid rows must all have the same, non-zero number of cells")
    headers = list(headers) if headers is not None else [""] * ncols
    if len(headers) != ncols:
        raise ArgumentError(f"{len(headers)} headers for {ncols} columns")
    cells = [[_cell_array(c) for c in r] for r in rows]
    h, w = cells[0][0].shape[:2]
    if any(c.shape != (h, w, 3) for r in cells for c in r):
        raise DimensionError("all grid cells must share one resolution")
    canvas = np.full((header_height + h * len(rows), w * ncols, 3), 255, dtype=np.uint8)
    for r, row in enumerate(cells):
        for c, cell in enumerate(row):
            canvas[header_height + r * h:header_height + (r + 1) * h, c * w:(c + 1) * w] = cell
    im = Image.fromarray(canvas)
    draw = ImageDraw.Draw(im)
    for c, title in enumerate(headers):
        draw.text((c * w + 4, 4), str(title), fill=(0, 0, 0))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    im.save(path, format="PNG")
    return path
