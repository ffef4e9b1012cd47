import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medideid.font5x7 import GLYPHS, render, text_size
from medideid.imageio import decode_png, encode_png
from medideid.synthetic import TEXT_CATEGORIES, text_image
from medideid.text_redact import (
    BoundingBox, BuiltinDetector, DetectorError, ExternalDetector, Image2D, TextResult,
    center_rect, detect_text, fill_boxes, make_detector, parse_detector_tsv, redact_pipeline,
    text_removal_score,
)


def canvas(h=64, w=96, value=20):
    return np.full((h, w), value, np.uint8)


def plant(px, text, x, y, ink=255):
    m = render(text)
    px[y:y + m.shape[0], x:x + m.shape[1]][m] = ink
    return BoundingBox(x, y, m.shape[1], m.shape[0], text)


def diff_inside(original, out, boxes):
    changed = np.argwhere((original != out).reshape(original.shape[0], original.shape[1], -1).any(2))
    return all(any(b.x <= x < b.x1 and b.y <= y < b.y1 for b in boxes) for y, x in changed)


# --------------------------------------------------------------------- font and detection


def test_font_covers_alnum():
    for ch in "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789":
        assert GLYPHS[ch].shape == (7, 5)
        assert GLYPHS[ch].any(axis=0).all(), ch
    assert text_size("AB") == (11, 7)


def test_one_word_at_10_10():
    px = canvas()
    truth = plant(px, "DOE", 10, 10)
    boxes = detect_text(Image2D(px), BuiltinDetector())
    assert boxes == [BoundingBox(10, 10, truth.w, 7, "DOE", 1.0)]


def test_blank_image():
    assert detect_text(Image2D(canvas()), BuiltinDetector()) == []


def test_punctuation_only_filtered():
    px = canvas()
    plant(px, ".:/-", 10, 10)
    assert BuiltinDetector().glyphs(Image2D(px))  # the marks are seen...
    assert detect_text(Image2D(px), BuiltinDetector()) == []  # ...but carry no letter or digit


def test_words_split_on_space():
    px = canvas()
    plant(px, "AB CD", 4, 4)
    texts = [b.text for b in detect_text(Image2D(px), BuiltinDetector())]
    assert texts == ["AB", "CD"]


def test_glyph_touching_other_ink_ignored():
    px = canvas()
    plant(px, "A", 10, 10)
    px[9, 12] = 255  # ink on the ring
    assert detect_text(Image2D(px), BuiltinDetector()) == []


def test_rgb_detection():
    px = np.stack([canvas()] * 3, axis=2)
    m = render("X1")
    px[5:12, 5:16][m] = 255
    assert [b.text for b in detect_text(Image2D(px), BuiltinDetector())] == ["X1"]


def test_box_clipped():
    class Wild:
        kind = "test"

        def detect(self, image):
            return [BoundingBox(-5, -5, 20, 20, "A"), BoundingBox(500, 500, 3, 3, "B")]

    assert detect_text(Image2D(canvas()), Wild()) == [BoundingBox(0, 0, 15, 15, "A")]


def test_bounding_box_validation_and_dict():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 3)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 3, 3, confidence=1.5)
    b = BoundingBox(1, 2, 3, 4, "T", 0.5, 2)
    assert BoundingBox.from_dict(b.to_dict()) == b


# --------------------------------------------------------------------- pipeline


def test_border_text_found_in_pass_one():
    px = canvas()
    plant(px, "NAME", 2, 2)
    out, boxes = redact_pipeline(Image2D(px), BuiltinDetector())
    assert [(b.text, b.pass_index) for b in boxes] == [("NAME", 1)]
    assert boxes[0] == BoundingBox(0, 0, 2 + 23 + 2, 2 + 7 + 2, "NAME", 1.0, 1)
    assert not (out.pixels == 255).any()


def test_center_text_found_only_in_pass_two():
    px = canvas()
    x, y, w, h = center_rect(96, 64, 0.5)
    plant(px, "MID", x + 5, y + 5)
    out, boxes = redact_pipeline(Image2D(px), BuiltinDetector())
    assert [(b.text, b.pass_index) for b in boxes] == [("MID", 2)]
    assert detect_text(out, BuiltinDetector()) == []


def test_textless_image_unchanged():
    px = np.random.default_rng(0).integers(0, 200, (40, 50), dtype=np.uint8)
    out, boxes = redact_pipeline(Image2D(px), BuiltinDetector())
    assert boxes == []
    np.testing.assert_array_equal(out.pixels, px)


def test_fill_modes():
    px = canvas(value=20)
    px[0, :] = 200
    b = BoundingBox(10, 1, 4, 4)
    assert (fill_boxes(px, [b], "min-value")[1:5, 10:14] == 20).all()
    mean_fill = fill_boxes(px, [b], "mean-border")[1:5, 10:14]
    # ring: 6 pixels at 200 above, 14 pixels at 20 elsewhere
    assert (mean_fill == round((6 * 200 + 14 * 20) / 20)).all()


def test_pipeline_argument_checks():
    with pytest.raises(ValueError):
        redact_pipeline(Image2D(canvas()), BuiltinDetector(), rect_fraction=1.0)
    with pytest.raises(ValueError):
        redact_pipeline(Image2D(canvas()), BuiltinDetector(), fill_mode="blur")


def test_score_examples():
    g = [BoundingBox(0, 0, 5, 5)]
    clean = TextResult(g, [])
    dirty = TextResult(g, [BoundingBox(2, 2, 2, 2)])
    assert text_removal_score([clean, clean, clean, dirty]) == 75.0
    assert text_removal_score([clean]) == 100.0
    with pytest.raises(ValueError):
        text_removal_score([])


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from(TEXT_CATEGORIES))
def test_confinement_restoration_and_safety(seed, category):
    fx = text_image(seed, category)
    original = fx.image.pixels
    out, boxes = redact_pipeline(fx.image, BuiltinDetector())
    assert diff_inside(original, out.pixels, boxes)
    # every reported box is filled
    for b in boxes:
        assert (out.pixels[b.y:b.y1, b.x:b.x1] == original.min()).all()
    again, boxes_again = redact_pipeline(fx.image, BuiltinDetector())
    assert again.pixels.tobytes() == out.pixels.tobytes() and boxes_again == boxes
    residual = detect_text(out, BuiltinDetector())
    assert TextResult(fx.ground_truth, residual).clean()


# --------------------------------------------------------------------- external detector


def test_parse_tsv_header_and_floor():
    text = ("level\tleft\ttop\twidth\theight\tconf\ttext\n"
            "5\t10\t20\t30\t8\t91.5\tDOE\n"
            "5\t1\t1\t2\t2\t12\tNOISE\n"
            "5\t0\t0\t4\t4\t-1\t\n")
    assert parse_detector_tsv(text) == [BoundingBox(10, 20, 30, 8, "DOE", 0.915)]


def test_parse_tsv_plain_columns():
    assert parse_detector_tsv("3\t4\t5\t6\t0.9\tX1\n") == [BoundingBox(3, 4, 5, 6, "X1", 0.9)]


def test_parse_tsv_missing_columns():
    with pytest.raises(DetectorError):
        parse_detector_tsv("left\ttop\n1\t2\n")


def test_external_detector_roundtrip(tmp_path):
    script = tmp_path / "ocr.py"
    script.write_text(textwrap.dedent("""
        import sys
        from PIL import Image
        im = Image.open(sys.argv[1])
        print("left\\ttop\\twidth\\theight\\tconf\\ttext")
        print(f"1\\t2\\t{im.width - 2}\\t3\\t95\\tSEEN")
    """))
    det = ExternalDetector([sys.executable, str(script), "{image}"])
    assert det.detect(Image2D(canvas(10, 12))) == [BoundingBox(1, 2, 10, 3, "SEEN", 0.95)]


def test_external_detector_failure_captures_stderr(tmp_path):
    script = tmp_path / "bad.py"
    script.write_text("import sys\nsys.stderr.write('no model')\nsys.exit(3)\n")
    det = make_detector({"kind": "external-process", "command": [sys.executable, str(script)]})
    with pytest.raises(DetectorError) as info:
        det.detect(Image2D(canvas()))
    assert info.value.returncode == 3 and "no model" in info.value.stderr


def test_external_detector_missing_binary():
    det = ExternalDetector(["/nonexistent/ocr"])
    with pytest.raises(DetectorError):
        det.detect(Image2D(canvas()))


def test_make_detector_unknown():
    with pytest.raises(ValueError):
        make_detector({"kind": "magic"})


# --------------------------------------------------------------------- png


@pytest.mark.parametrize("px", [canvas(), np.stack([canvas()] * 3, 2),
                                np.arange(60, dtype=np.uint16).reshape(6, 10) * 1000])
def test_png_roundtrip(px):
    back = decode_png(encode_png(Image2D(px)))
    np.testing.assert_array_equal(back.pixels, px)
    assert back.pixels.dtype == px.dtype
