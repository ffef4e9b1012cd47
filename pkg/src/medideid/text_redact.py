"""Burned-in text removal for 2D images.

Detection runs twice. The first pass hides the image centre behind a white
rectangle so the detector concentrates on annotations along the borders;
the second pass restores the centre, blanks what was already found and
looks again. Everything either pass reports is filled in the output.
"""

from __future__ import annotations

import csv
import io
import os
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np

from .font5x7 import ADVANCE, CODE_TO_CHAR, GLYPH_H, GLYPH_W

FILL_MODES = ("min-value", "mean-border")
DEFAULT_PAD = 2


class DetectorError(RuntimeError):
    def __init__(self, message: str, stderr: str = "", returncode: int | None = None):
        super().__init__(message)
        self.stderr = stderr
        self.returncode = returncode


@dataclass
class Image2D:
    pixels: np.ndarray  # (H, W) or (H, W, 3)

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels)
        if self.pixels.ndim == 3 and self.pixels.shape[2] == 1:
            self.pixels = self.pixels[:, :, 0]
        if self.pixels.ndim not in (2, 3) or (self.pixels.ndim == 3 and self.pixels.shape[2] != 3):
            raise ValueError(f"expected (H, W) or (H, W, 3) pixels, got {self.pixels.shape}")
        if self.pixels.size == 0:
            raise ValueError("empty image")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def value_range(self) -> tuple:
        return self.pixels.min().item(), self.pixels.max().item()


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int
    text: str = ""
    confidence: float = 1.0
    pass_index: int = 0  # 1 or 2 once recorded by the redaction pipeline

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box must be at least 1x1, got {self.w}x{self.h}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def x1(self) -> int:
        return self.x + self.w

    @property
    def y1(self) -> int:
        return self.y + self.h

    def overlaps(self, other: "BoundingBox") -> bool:
        return self.x < other.x1 and other.x < self.x1 and self.y < other.y1 and other.y < self.y1

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h, "text": self.text,
                "confidence": self.confidence, "pass": self.pass_index}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"]), d.get("text", ""),
                   float(d.get("confidence", 1.0)), int(d.get("pass", 0)))


def clip_box(box: BoundingBox, width: int, height: int) -> BoundingBox | None:
    x0, y0 = max(box.x, 0), max(box.y, 0)
    x1, y1 = min(box.x1, width), min(box.y1, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return replace(box, x=x0, y=y0, w=x1 - x0, h=y1 - y0)


def pad_box(box: BoundingBox, pad: int, width: int, height: int) -> BoundingBox:
    grown = replace(box, x=box.x - pad, y=box.y - pad, w=box.w + 2 * pad, h=box.h + 2 * pad)
    return clip_box(grown, width, height)


def has_alnum(text: str) -> bool:
    return any(c.isalnum() for c in text)


# ---------------------------------------------------------------------------
# detectors


class DetectorAdapter(Protocol):
    kind: str

    def detect(self, image: Image2D) -> list[BoundingBox]: ...


def _box_sum(S: np.ndarray, y0, x0, h: int, w: int) -> np.ndarray:
    return S[y0 + h, x0 + w] - S[y0, x0 + w] - S[y0 + h, x0] + S[y0, x0]


@dataclass
class BuiltinDetector:
    """Exact template matching against the bundled 5x7 font.

    A glyph is reported where a 7x5 window of ink pixels equals a template
    and the one-pixel ring around the window holds no ink. Glyphs on one row
    spaced by exactly one font advance are merged into a word.
    """

    ink: float | None = None  # defaults to the dtype maximum (image max for floats)
    kind: str = field(default="builtin-synthetic", init=False)

    def ink_mask(self, image: Image2D) -> np.ndarray:
        px = image.pixels
        ink = self.ink
        if ink is None:
            ink = np.iinfo(px.dtype).max if px.dtype.kind in "ui" else px.max()
        hit = px == ink
        return hit.all(axis=2) if hit.ndim == 3 else hit

    def glyphs(self, image: Image2D) -> list[tuple[int, int, str]]:
        B = self.ink_mask(image)
        H, W = B.shape
        if H < GLYPH_H or W < GLYPH_W:
            return []
        P = np.pad(B, 1)
        ny, nx = H - GLYPH_H + 1, W - GLYPH_W + 1
        code = np.zeros((ny, nx), dtype=np.int64)
        for dy in range(GLYPH_H):
            for dx in range(GLYPH_W):
                code |= P[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx].astype(np.int64) << (dy * GLYPH_W + dx)
        S = np.zeros((H + 3, W + 3), dtype=np.int64)
        S[1:, 1:] = P.astype(np.int64).cumsum(0).cumsum(1)
        yy, xx = np.mgrid[0:ny, 0:nx]
        outer = _box_sum(S, yy, xx, GLYPH_H + 2, GLYPH_W + 2)
        inner = _box_sum(S, yy + 1, xx + 1, GLYPH_H, GLYPH_W)
        known = np.isin(code, np.fromiter(CODE_TO_CHAR, dtype=np.int64))
        ys, xs = np.nonzero(known & (outer == inner))
        return [(int(y), int(x), CODE_TO_CHAR[int(code[y, x])]) for y, x in zip(ys, xs)]

    def detect(self, image: Image2D) -> list[BoundingBox]:
        words: list[list[tuple[int, int, str]]] = []
        for y, x, ch in sorted(self.glyphs(image)):
            last = words[-1][-1] if words else None
            if last is not None and last[0] == y and x - last[1] == ADVANCE:
                words[-1].append((y, x, ch))
            else:
                words.append([(y, x, ch)])
        boxes = []
        for word in words:
            y, x = word[0][0], word[0][1]
            text = "".join(ch for _, _, ch in word)
            box = BoundingBox(x, y, word[-1][1] + GLYPH_W - x, GLYPH_H, text, 1.0)
            if has_alnum(text):
                boxes.append(box)
        return boxes


def parse_detector_tsv(text: str, conf_floor: float = 0.3) -> list[BoundingBox]:
    """Parse OCR-style TSV rows (left, top, width, height, confidence, text).

    A header row naming those columns is honoured (extra columns ignored);
    without one the first six columns are taken in that order. Confidences
    above 1 are read as percentages.
    """
    rows = [r for r in csv.reader(io.StringIO(text), delimiter="\t", quoting=csv.QUOTE_NONE) if r]
    if not rows:
        return []
    names = ("left", "top", "width", "height", "conf", "text")
    header = [c.strip().lower() for c in rows[0]]
    if "left" in header:
        if "conf" not in header and "confidence" in header:
            header[header.index("confidence")] = "conf"
        missing = [n for n in names if n not in header]
        if missing:
            raise DetectorError(f"detector TSV header lacks columns {missing}")
        cols = [header.index(n) for n in names]
        rows = rows[1:]
    else:
        cols = list(range(6))
    boxes = []
    for r in rows:
        if len(r) <= max(cols[:5]):
            continue
        try:
            left, top, w, h = (int(float(r[c])) for c in cols[:4])
            conf = float(r[cols[4]])
        except ValueError:
            continue
        text = r[cols[5]].strip() if cols[5] < len(r) else ""
        if conf > 1:
            conf /= 100.0
        if conf < conf_floor or w < 1 or h < 1:
            continue
        boxes.append(BoundingBox(left, top, w, h, text, min(conf, 1.0)))
    return boxes


@dataclass
class ExternalDetector:
    """Run an OCR executable on a temporary PNG and read its TSV output.

    ``command`` is an argv list in which ``{image}`` is replaced by the
    temporary file path.
    """

    command: list
    conf_floor: float = 0.3
    timeout_s: float = 120.0
    max_processes: int = 4
    kind: str = field(default="external-process", init=False)

    def __post_init__(self):
        if not self.command:
            raise ValueError("external detector needs a command")
        self._slots = threading.BoundedSemaphore(max(1, self.max_processes))

    def detect(self, image: Image2D) -> list[BoundingBox]:
        from .imageio import encode_png

        fd, path = tempfile.mkstemp(suffix=".png")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(encode_png(image))
            argv = [str(a).replace("{image}", path) for a in self.command]
            if not any("{image}" in str(a) for a in self.command):
                argv.append(path)
            with self._slots:
                try:
                    proc = subprocess.run(argv, capture_output=True, timeout=self.timeout_s)
                except (OSError, subprocess.TimeoutExpired) as exc:
                    raise DetectorError(f"detector {argv[0]!r} failed to run: {exc}") from exc
        finally:
            os.unlink(path)
        stderr = proc.stderr.decode("utf-8", "replace")
        if proc.returncode != 0:
            raise DetectorError(f"detector exited with status {proc.returncode}", stderr, proc.returncode)
        boxes = parse_detector_tsv(proc.stdout.decode("utf-8", "replace"), self.conf_floor)
        return boxes


def make_detector(config: dict | None) -> DetectorAdapter:
    config = dict(config or {})
    kind = config.pop("kind", "builtin-synthetic")
    if kind == "builtin-synthetic":
        return BuiltinDetector(**config)
    if kind == "external-process":
        return ExternalDetector(**config)
    raise ValueError(f"unknown detector kind {kind!r}")


def detect_text(image: Image2D, detector: DetectorAdapter) -> list[BoundingBox]:
    """Detected words that contain a letter or digit, clipped to the image."""
    out = []
    for box in detector.detect(image):
        if not has_alnum(box.text):
            continue
        clipped = clip_box(box, image.width, image.height)
        if clipped is not None:
            out.append(clipped)
    return out


# ---------------------------------------------------------------------------
# redaction


def center_rect(width: int, height: int, fraction: float) -> tuple[int, int, int, int]:
    """(x, y, w, h) of the centred occluder."""
    w = max(1, int(round(fraction * width)))
    h = max(1, int(round(fraction * height)))
    return (width - w) // 2, (height - h) // 2, w, h


def white_value(pixels: np.ndarray):
    return np.iinfo(pixels.dtype).max if pixels.dtype.kind in "ui" else pixels.max()


def _fill_value(original: np.ndarray, box: BoundingBox, mode: str):
    if mode == "min-value":
        return original.min(axis=(0, 1))
    H, W = original.shape[:2]
    y0, y1 = max(box.y - 1, 0), min(box.y1 + 1, H)
    x0, x1 = max(box.x - 1, 0), min(box.x1 + 1, W)
    ring = np.ones((y1 - y0, x1 - x0), dtype=bool)
    ring[box.y - y0:box.y1 - y0, box.x - x0:box.x1 - x0] = False
    if not ring.any():
        return original.min(axis=(0, 1))
    mean = original[y0:y1, x0:x1][ring].mean(axis=0)
    if original.dtype.kind in "ui":
        info = np.iinfo(original.dtype)
        return np.clip(np.rint(mean), info.min, info.max).astype(original.dtype)
    return mean.astype(original.dtype)


def fill_boxes(pixels: np.ndarray, boxes, mode: str, original: np.ndarray | None = None) -> np.ndarray:
    original = pixels if original is None else original
    out = pixels.copy()
    for b in boxes:
        out[b.y:b.y1, b.x:b.x1] = _fill_value(original, b, mode)
    return out


def redact_pipeline(image: Image2D, detector: DetectorAdapter, rect_fraction: float = 0.5,
                    fill_mode: str = "min-value",
                    pad: int = DEFAULT_PAD) -> tuple[Image2D, list[BoundingBox]]:
    """Two-pass detect-and-fill; returns the cleaned image and the filled boxes."""
    if not 0.0 < rect_fraction < 1.0:
        raise ValueError("rect_fraction must lie in (0, 1)")
    if fill_mode not in FILL_MODES:
        raise ValueError(f"fill_mode must be one of {FILL_MODES}")
    original = image.pixels
    W, H = image.width, image.height

    occluded = original.copy()
    x, y, w, h = center_rect(W, H, rect_fraction)
    occluded[y:y + h, x:x + w] = white_value(original)
    first = [replace(pad_box(b, pad, W, H), pass_index=1)
             for b in detect_text(Image2D(occluded), detector)]

    restored = fill_boxes(original, first, fill_mode)
    second = [replace(pad_box(b, pad, W, H), pass_index=2)
              for b in detect_text(Image2D(restored), detector)]

    boxes = first + second
    return Image2D(fill_boxes(original, boxes, fill_mode)), boxes


@dataclass
class TextResult:
    ground_truth: list
    residual: list

    def clean(self) -> bool:
        return not any(r.overlaps(g) for r in self.residual for g in self.ground_truth)


def text_removal_score(results) -> float:
    """Percentage of images with no residual detection over any ground-truth text."""
    results = list(results)
    if not results:
        raise ValueError("no results to score")
    return 100.0 * sum(r.clean() for r in results) / len(results)
