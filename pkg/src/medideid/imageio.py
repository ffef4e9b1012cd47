"""PNG encode/decode via Pillow. Re-encoding drops every ancillary chunk."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from .text_redact import Image2D


def decode_png(data: bytes) -> Image2D:
    with Image.open(io.BytesIO(data)) as im:
        im.load()
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.array(im, dtype=np.uint16)
        elif im.mode in ("L", "RGB"):
            arr = np.array(im)
        else:
            arr = np.array(im.convert("RGB"))
    return Image2D(arr)


def encode_png(image: Image2D) -> bytes:
    px = image.pixels
    if px.dtype == np.uint16 and px.ndim == 2:
        im = Image.frombytes("I;16", (image.width, image.height), px.astype("<u2").tobytes())
    elif px.dtype == np.uint8:
        im = Image.fromarray(px, "L" if px.ndim == 2 else "RGB")
    else:
        raise ValueError(f"cannot write {px.dtype} {px.shape} as PNG")
    buf = io.BytesIO()
    im.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()
