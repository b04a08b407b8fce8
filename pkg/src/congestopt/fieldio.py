"""CSV and PGM serialisation of grid fields."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField


def write_csv(field: ScalarField, path) -> None:
    """Header ``nx,ny,hx,hy``, one metadata row, then the values row by row.

    Rows run over the first array index (x), full float precision.
    """
    g = field.grid
    lines = ["nx,ny,hx,hy", f"{g.nx},{g.ny},{g.hx!r},{g.hy!r}", f"# centering={field.centering}"]
    for row in field.values:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> ScalarField:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "nx,ny,hx,hy":
        raise ValueError(f"{path}: missing nx,ny,hx,hy header")
    nx, ny, hx, hy = text[1].split(",")
    nx, ny = int(nx), int(ny)
    grid = Grid(nx, ny, nx * float(hx), ny * float(hy))
    centering = "node"
    body = text[2:]
    if body and body[0].startswith("#"):
        centering = body[0].split("=", 1)[1].strip()
        body = body[1:]
    vals = np.array([[float(v) for v in line.split(",")] for line in body if line.strip()])
    return ScalarField(grid, vals, centering)


def to_gray(values, *, invert: bool = False) -> np.ndarray:
    """Min-max normalise to 8 bits; a constant field maps to 0 (or 255 inverted)."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    g = np.zeros(v.shape) if hi <= lo else (v - lo) / (hi - lo)
    if invert:
        g = 1.0 - g
    return np.round(255.0 * g).astype(np.uint8)


def write_pgm(values, path, *, invert: bool = False) -> None:
    """Binary P5 image; array ``[i, j]`` is pixel column ``i``, row ``ny-1-j``
    so that ``y`` grows upwards."""
    write_pgm_u8(to_gray(values, invert=invert), path)


def write_pgm_u8(pixels, path) -> None:
    """Write ``uint8[i, j]`` pixels with the same orientation as :func:`write_pgm`."""
    img = np.asarray(pixels, dtype=np.uint8).T[::-1]
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm` up to quantisation; returns ``uint8[i, j]``."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("16-bit PGM not supported")
    img = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    return img[::-1].T.copy()


def write_theta_pgm(theta: ScalarField, path) -> None:
    """Mixing density image with theta = 1 drawn black."""
    write_pgm(theta.values, path, invert=True)
