"""Binary netpbm images: 8-bit P6 (RGB) and P5 (grayscale).

Float images in [0, 1] are quantized with round-half-up to 0..255 on write
and divided by 255 on read, so a round trip changes no value by more than
one quantization step (1/255).  Writers emit a fixed header layout, making
repeated writes byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["write_ppm", "read_ppm", "write_pgm", "read_pgm"]


def _quantize(values: np.ndarray) -> np.ndarray:
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path, image: np.ndarray) -> None:
    """Write a (3, H, W) float image in [0, 1] as binary P6."""
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"write_ppm expects a (3, H, W) image, got {image.shape}")
    h, w = image.shape[1], image.shape[2]
    raster = _quantize(image).transpose(1, 2, 0).tobytes()
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(raster)


def write_pgm(path, values: np.ndarray) -> None:
    """Write an (H, W) float map in [0, 1] as binary P5."""
    if values.ndim != 2:
        raise ValueError(f"write_pgm expects an (H, W) map, got {values.shape}")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(_quantize(values).tobytes())


def _read_header(data: bytes, magic: bytes, path) -> tuple[int, int, int]:
    """Parse '<magic> w h maxval' allowing comments; return (w, h, raster offset)."""
    if not data.startswith(magic):
        raise ValueError(f"{path}: not a {magic.decode()} file")
    pos = len(magic)
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise ValueError(f"{path}: truncated header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise ValueError(f"{path}: truncated header")
            pos += 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise ValueError(f"{path}: malformed header near byte {pos}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ValueError(f"{path}: missing whitespace before raster")
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit images supported, got maxval {maxval}")
    if w < 1 or h < 1:
        raise ValueError(f"{path}: invalid dimensions {w}x{h}")
    return w, h, pos


def read_ppm(path) -> np.ndarray:
    """Read binary P6 into a (3, H, W) float32 image in [0, 1]."""
    data = Path(path).read_bytes()
    w, h, pos = _read_header(data, b"P6", path)
    expected = w * h * 3
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise ValueError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return np.ascontiguousarray(arr.transpose(2, 0, 1)).astype(np.float32) / 255.0


def read_pgm(path) -> np.ndarray:
    """Read binary P5 into an (H, W) float32 map in [0, 1]."""
    data = Path(path).read_bytes()
    w, h, pos = _read_header(data, b"P5", path)
    expected = w * h
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise ValueError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).astype(np.float32) / 255.0
