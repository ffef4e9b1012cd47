import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medideid.deid_rules import UidMap, builtin_profile
from medideid.dicom_core import PIXEL_DATA, DataSet, DicomError, Element
from medideid.pixels import PixelDataUnsupported, pixel_array
from medideid.synthetic import image_dataset, wsi_study
from medideid.wsi_deid import (
    Disposition, WsiRole, WsiStudy, blank_label, classify_wsi_instance, deid_wsi_study,
    redact_overview,
)

ROWS, COLS = (0x0028, 0x0010), (0x0028, 0x0011)


def typed(image_type):
    return image_dataset(np.zeros((2, 2), np.uint8), image_type=image_type)


def non_pixel_elements(ds: DataSet):
    return [e for e in ds.elements if e.tag != PIXEL_DATA]


def encapsulated(ds: DataSet) -> DataSet:
    frag = b"\xfe\xff\x00\xe0\x00\x00\x00\x00" + b"\xfe\xff\x00\xe0\x04\x00\x00\x00JPEG"
    opaque = Element(PIXEL_DATA, "OB", frag + b"\xfe\xff\xdd\xe0\x00\x00\x00\x00", True)
    return replace(ds, elements=[opaque if e.tag == PIXEL_DATA else e for e in ds.elements])


@pytest.mark.parametrize("image_type, role", [
    ("ORIGINAL\\PRIMARY\\LABEL\\NONE", WsiRole.LABEL),
    ("ORIGINAL\\PRIMARY\\VOLUME\\NONE", WsiRole.VOLUME),
    ("DERIVED\\PRIMARY\\OVERVIEW\\NONE", WsiRole.OVERVIEW),
    ("ORIGINAL\\PRIMARY\\THUMBNAIL\\NONE", WsiRole.UNKNOWN),
])
def test_classify(image_type, role):
    assert classify_wsi_instance(typed(image_type)) is role


def test_classify_without_image_type():
    ds = typed("X")
    ds = replace(ds, elements=[e for e in ds.elements if e.tag != (0x0008, 0x0008)])
    assert classify_wsi_instance(ds) is WsiRole.UNKNOWN


def test_blank_gray_label():
    px = np.random.default_rng(0).integers(1, 256, (8, 8), dtype=np.uint8)
    out = blank_label(image_dataset(px))
    assert out[PIXEL_DATA].value == bytes(64)


def test_blank_rgb_label_confined_to_pixels():
    ds = image_dataset(np.random.default_rng(1).integers(1, 256, (4, 4, 3), dtype=np.uint8))
    out = blank_label(ds)
    assert out[PIXEL_DATA].value == bytes(48)
    assert non_pixel_elements(out) == non_pixel_elements(ds)
    assert out[ROWS].value == ds[ROWS].value and out[COLS].value == ds[COLS].value
    assert blank_label(out) == out


def test_blank_label_odd_pixel_count():
    ds = image_dataset(np.full((3, 3), 7, np.uint8))
    assert ds[PIXEL_DATA].value == b"\x07" * 9 + b"\x00"  # even-length padding
    assert blank_label(ds)[PIXEL_DATA].value == bytes(10)


def test_overview_ten_columns_half():
    px = np.arange(1, 61, dtype=np.uint8).reshape(6, 10)
    arr = pixel_array(redact_overview(image_dataset(px), 0.5))[0, :, :, 0]
    assert (arr[:, :5] == 0).all()
    np.testing.assert_array_equal(arr[:, 5:], px[:, 5:])


def test_overview_full_fraction():
    px = np.full((4, 4), 9, np.uint8)
    assert not pixel_array(redact_overview(image_dataset(px), 1.0)).any()


def test_overview_rgb_third():
    px = np.random.default_rng(2).integers(1, 256, (6, 6, 3), dtype=np.uint8)
    arr = pixel_array(redact_overview(image_dataset(px), 0.33))[0]
    assert math.ceil(0.33 * 6) == 2
    assert (arr[:, :2, :] == 0).all()
    np.testing.assert_array_equal(arr[:, 2:, :], px[:, 2:, :])


def test_overview_fraction_checked():
    with pytest.raises(ValueError):
        redact_overview(typed("OVERVIEW"), 0.0)


def test_encapsulated_pixels_unsupported():
    ds = encapsulated(image_dataset(np.ones((2, 2), np.uint8)))
    with pytest.raises(PixelDataUnsupported):
        blank_label(ds)
    with pytest.raises(PixelDataUnsupported):
        redact_overview(ds)


def _run(pairs, converted=False, workers=1):
    m = UidMap(b"wsi")
    actions, audit = deid_wsi_study(WsiStudy.from_datasets(pairs, converted),
                                    builtin_profile("basic"), m, workers=workers)
    return {a.file_id: a for a in actions}, audit, m


def test_full_study():
    pairs = wsi_study(0)
    acts, audit, m = _run(pairs)
    assert len(acts) == 5
    assert all(a.disposition is Disposition.WRITTEN for a in acts.values())
    label = acts["label.dcm"]
    assert label.steps == ["metadata", "blank-label"]
    assert not pixel_array(label.dataset).any()
    ov = pixel_array(acts["overview.dcm"].dataset)[0]
    cols = ov.shape[1]
    assert (ov[:, :math.ceil(cols / 2)] == 0).all() and ov[:, math.ceil(cols / 2):].all()
    for a in acts.values():
        assert a.dataset[(0x0010, 0x0010)].value == b""
        assert a.dataset.text((0x0012, 0x0062)) == "YES"
    vol0 = dict(pairs)["volume_0.dcm"]
    np.testing.assert_array_equal(pixel_array(acts["volume_0.dcm"].dataset), pixel_array(vol0))
    studies = {a.dataset.text((0x0020, 0x000D)) for a in acts.values()}
    series = {a.dataset.text((0x0020, 0x000E)) for a in acts.values()}
    assert studies == {m.remap(vol0.text((0x0020, 0x000D)))} and len(series) == 1


def test_converted_label_dropped():
    acts, audit, _ = _run(wsi_study(1), converted=True)
    assert acts["label.dcm"].disposition is Disposition.DROPPED
    assert acts["label.dcm"].dataset is None
    assert any(e.path == "label.dcm" and e.disposition == "dropped" for e in audit.entries)
    assert sum(a.disposition is Disposition.WRITTEN for a in acts.values()) == 4


def test_unsupported_label_dropped_overview_errors():
    pairs = [(n, encapsulated(ds) if n in ("label.dcm", "overview.dcm") else ds)
             for n, ds in wsi_study(2)]
    acts, _, _ = _run(pairs)
    assert acts["label.dcm"].disposition is Disposition.DROPPED
    assert acts["overview.dcm"].disposition is Disposition.ERROR
    assert "PixelDataUnsupported" in acts["overview.dcm"].error
    assert all(acts[f"volume_{i}.dcm"].disposition is Disposition.WRITTEN for i in range(3))


def test_volumes_only_metadata():
    acts, _, _ = _run(wsi_study(3, label=False, overview=False))
    assert all(a.steps == ["metadata"] for a in acts.values())


def test_two_labels_rejected():
    pairs = wsi_study(4)
    pairs.append(("label2.dcm", dict(pairs)["label.dcm"]))
    with pytest.raises(DicomError, match="LABEL"):
        WsiStudy.from_datasets(pairs).check()


def test_audit_has_no_phi():
    pairs = wsi_study(5)
    name = dict(pairs)["label.dcm"].text((0x0010, 0x0010))
    _, audit, _ = _run(pairs)
    assert name not in repr(audit.to_dict())


@settings(max_examples=10)
@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans(), st.booleans(),
       st.integers(1, 4))
def test_study_invariants(seed, label, overview, converted, workers):
    pairs = wsi_study(seed, label=label, overview=overview)
    acts, audit, _ = _run(pairs, converted, workers)
    written = [a for a in acts.values() if a.disposition is Disposition.WRITTEN]
    dropped = [a for a in acts.values() if a.disposition is Disposition.DROPPED]
    assert len(written) + len(dropped) == len(pairs)
    assert len({a.dataset.text((0x0020, 0x000D)) for a in written}) == 1
    assert len({a.dataset.text((0x0020, 0x000E)) for a in written}) == 1
    serial, _, _ = _run(pairs, converted, 1)
    for k, a in acts.items():
        assert a.disposition is serial[k].disposition
        assert a.dataset == serial[k].dataset
