"""Image file I/O: PFM float maps, PGM, PNG, and the channel manifest.

Grayscale float data travels as PFM ("Pf" identifier, 32-bit scanlines,
bottom row first, scale line whose sign encodes endianness; written
little-endian with scale -1.0). Internal math is 64-bit; export rounds to
32-bit, and reading back reproduces those 32-bit values exactly.

8-bit images (PGM P2/P5, PNG) are normalized to [0, 1] by dividing by the
header maxval (255 for 8-bit data) on read.

A multichannel stack is a directory of per-channel PFM files plus a JSON
manifest ("gridstack-manifest/1") naming each file, its role, and its
position, so intermediate layers stay individually inspectable.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import ParseError
from .grid import as_grid

MANIFEST_SCHEMA = "gridstack-manifest/1"


def write_pfm(path, grid) -> None:
    """Write a grid as a grayscale little-endian PFM (rounds to float32)."""
    g = as_grid(grid)
    h, w = g.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.flipud(g).astype("<f4").tobytes())


def _read_token(fh) -> bytes:
    tok = b""
    while True:
        c = fh.read(1)
        if not c:
            raise ParseError("unexpected end of PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM into a float64 grid (values kept as stored)."""
    with open(path, "rb") as fh:
        ident = _read_token(fh)
        if ident != b"Pf":
            raise ParseError(f"not a grayscale PFM (identifier {ident!r})")
        try:
            w = int(_read_token(fh))
            h = int(_read_token(fh))
            scale = float(_read_token(fh))
        except ValueError as exc:
            raise ParseError(f"malformed PFM header: {exc}") from exc
        if w < 1 or h < 1:
            raise ParseError(f"bad PFM dimensions {w}x{h}")
        dtype = "<f4" if scale < 0 else ">f4"
        buf = fh.read(4 * w * h)
        if len(buf) != 4 * w * h:
            raise ParseError("PFM payload shorter than header promises")
        data = np.frombuffer(buf, dtype=dtype).reshape(h, w)
        return np.flipud(data).astype(np.float64)


def write_pgm(path, grid) -> None:
    """Write a [0, 1] grid as binary 8-bit PGM (values scaled by 255)."""
    g = as_grid(grid)
    h, w = g.shape
    data = np.clip(np.rint(g * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P2/P5 PGM, normalized to [0, 1] by the header maxval."""
    with open(path, "rb") as fh:
        raw = fh.read()
    header = re.match(
        rb"(P[25])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if header is None:
        raise ParseError("malformed PGM header")
    magic, w, h, maxval = (header.group(1), int(header.group(2)),
                           int(header.group(3)), int(header.group(4)))
    if maxval < 1 or maxval > 65535:
        raise ParseError(f"unsupported PGM maxval {maxval}")
    body = raw[header.end():]
    count = w * h
    if magic == b"P5":
        dtype = np.uint8 if maxval < 256 else ">u2"
        itemsize = 1 if maxval < 256 else 2
        if len(body) < count * itemsize:
            raise ParseError("PGM payload shorter than header promises")
        data = np.frombuffer(body[:count * itemsize], dtype=dtype)
    else:
        values = body.split()
        if len(values) < count:
            raise ParseError("PGM payload shorter than header promises")
        data = np.array([int(v) for v in values[:count]], dtype=np.int64)
    return data.reshape(h, w).astype(np.float64) / float(maxval)


def read_image(path) -> np.ndarray:
    """Read PFM/PGM/PNG by extension; 8-bit formats normalize to [0, 1]."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path)
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
        return arr / 255.0
    raise ParseError(f"unsupported image extension {suffix!r} (use pfm/pgm/png)")


def write_manifest(directory, entries, height: int, width: int) -> Path:
    """Write the stack manifest; entries are (filename, role, index) triples."""
    directory = Path(directory)
    doc = {
        "version": MANIFEST_SCHEMA,
        "height": int(height),
        "width": int(width),
        "channels": [
            {"file": name, "role": role, "index": int(idx)}
            for name, role, idx in entries
        ],
    }
    path = directory / "manifest.json"
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def read_manifest(path) -> tuple[np.ndarray, list[dict]]:
    """Load a manifest plus its channel files, in manifest order.

    Returns the (channels, height, width) stack and the channel records.
    """
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("version") != MANIFEST_SCHEMA:
        raise ParseError(f"manifest version must be {MANIFEST_SCHEMA!r}")
    for name in ("height", "width", "channels"):
        if name not in doc:
            raise ParseError(f"manifest missing field: {name}")
    records = doc["channels"]
    if not isinstance(records, list) or not records:
        raise ParseError("manifest channels must be a nonempty list")
    base = path.parent
    grids = []
    for i, rec in enumerate(records):
        if "file" not in rec:
            raise ParseError(f"manifest channels[{i}] missing field: file")
        g = read_image(base / rec["file"])
        if g.shape != (doc["height"], doc["width"]):
            raise ValueError(
                f"channel {rec['file']}: shape {g.shape} does not match manifest "
                f"{(doc['height'], doc['width'])}"
            )
        grids.append(g)
    return np.stack(grids), records
