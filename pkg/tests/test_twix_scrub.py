import struct

import pytest
from hypothesis import given, settings, strategies as st

from medideid.synthetic import twix_file
from medideid.twix_scrub import (
    DEFAULT_SPECS, Kind, PhiFieldSpec, PhiMatch, TwixScrubError, TwixVerificationError,
    ascii_regions, locate_phi_fields, scrub_in_place, scrub_twix, specs_from_config, verify_scrub,
)

PAD = b"#" * 80  # keeps every fixture line inside a text region of at least 64 bytes


def blob(text: bytes) -> bytes:
    return b"\x00\x01\x02" + PAD + b"\n" + text + b"\n" + PAD + b"\x00\xff"


def test_quoted_name_example():
    data = blob(b'tPatientName = "MUSTERMANN"')
    matches = locate_phi_fields(data)
    assert len(matches) == 1
    m = matches[0]
    assert m.spec.kind is Kind.QUOTED_TEXT and m.length == 10
    assert data[m.offset:m.end] == b"MUSTERMANN"
    out = scrub_in_place(data, matches)
    assert b'tPatientName = "xxxxxxxxxx"' in out


def test_numeric_birthday_zeroed():
    data = blob(b"PatientBirthDay = 19800101")
    out = scrub_in_place(data, locate_phi_fields(data))
    assert b"PatientBirthDay = 00000000" in out


def test_xprotocol_param_block():
    data = blob(b'<ParamString."PatientID">  { "123456"  }')
    (m,) = locate_phi_fields(data)
    assert data[m.offset:m.end] == b"123456"
    assert b'{ "000000"  }' in scrub_in_place(data, [m])


def test_key_must_be_whole_word():
    data = blob(b'xtPatientName = "A"\nsPatientName.x = "B"\nPatientNameX = "C"')
    assert locate_phi_fields(data) == []


def test_no_phi_keys():
    data = blob(b"tProtocolName = \"gre\"")
    assert locate_phi_fields(data) == []
    assert scrub_in_place(data, []) == data


def test_short_region_ignored():
    assert locate_phi_fields(b"\x00" + b'PatientID = 12' + b"\x00") == []
    assert ascii_regions(b"\x00" + b"a" * 63 + b"\x00") == []
    assert ascii_regions(b"\x00" + b"a" * 64 + b"\x00") == [(1, 65)]


def test_two_sections_two_matches():
    fx = twix_file(3, sections=2)
    name = fx.phi["name"].encode()
    ms = [m for m in locate_phi_fields(fx.data) if m.spec.key == "tPatientName"]
    assert len(ms) == 2
    # independent search for the MeasYaps line
    needle = b'tPatientName = "' + name + b'"'
    first = fx.data.find(needle)
    second = fx.data.find(needle, first + 1)
    assert [m.offset for m in ms] == [first + 16, second + 16]
    assert {m.section for m in ms} == {0, 1}


def test_matches_equal_oracle_spans():
    for seed in range(10):
        fx = twix_file(seed, sections=1 + seed % 3, raid_header=seed % 2 == 1)
        got = [(m.offset, m.length) for m in locate_phi_fields(fx.data)]
        assert got == fx.value_spans


def test_raid_header_name_scrubbed():
    fx = twix_file(5, sections=2, raid_header=True)
    out, matches, report = scrub_twix(fx.data)
    assert any(m.section == -1 for m in matches)
    assert fx.phi["name"].encode() not in out
    assert out[8 + 88:8 + 98] == b"gre_field_"  # protocol name slot untouched


def test_overlapping_spans_rejected():
    spec = DEFAULT_SPECS[0]
    data = blob(b"x")
    with pytest.raises(TwixScrubError, match="overlapping"):
        scrub_in_place(data, [PhiMatch(spec, 5, 4, 0), PhiMatch(spec, 7, 4, 0)])
    with pytest.raises(TwixScrubError):
        scrub_in_place(data, [PhiMatch(spec, len(data) - 1, 4, 0)])


def test_verify_detects_restored_byte():
    fx = twix_file(1)
    out, matches, _ = scrub_twix(fx.data)
    m = matches[2]
    bad = bytearray(out)
    bad[m.offset + 1] = fx.data[m.offset + 1]
    report = verify_scrub(fx.data, bytes(bad))
    assert not report.passed
    assert report.problems[0][0] == m.offset + 1
    with pytest.raises(TwixVerificationError, match=str(m.offset + 1)):
        report.check()


def test_verify_detects_length_change():
    fx = twix_file(1)
    out, _, _ = scrub_twix(fx.data)
    report = verify_scrub(fx.data, out + b"\x00")
    assert not report.passed and "length" in report.problems[0][1]


def test_verify_detects_change_outside_spans():
    fx = twix_file(2)
    out = bytearray(scrub_twix(fx.data)[0])
    out[-1] ^= 0xFF
    report = verify_scrub(fx.data, bytes(out))
    assert report.problems == [(len(out) - 1, "byte changed outside any PHI span")]


def test_specs_from_config():
    specs = specs_from_config(["SiteCode", {"key": "tAccession", "kind": "numeric"}, "PatientID"])
    keys = [s.key for s in specs]
    assert keys[-2:] == ["SiteCode", "tAccession"] and keys.count("PatientID") == 1
    assert specs[-1].replacement_char == b"0"
    with pytest.raises(ValueError):
        PhiFieldSpec("bad key")


def test_custom_key_scrubbed():
    data = blob(b'SiteCode = "HOSP42"')
    out, matches, _ = scrub_twix(data, specs_from_config(["SiteCode"]))
    assert b'SiteCode = "xxxxxx"' in out


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_scrub_properties(seed, sections, raid):
    fx = twix_file(seed, sections=sections, raid_header=raid)
    out, matches, report = scrub_twix(fx.data)
    assert len(out) == len(fx.data)
    assert report.passed and report.matches == len(fx.value_spans)
    inside = set()
    for off, n in fx.value_spans:
        inside.update(range(off, off + n))
    assert all(i in inside for i, (a, b) in enumerate(zip(fx.data, out)) if a != b)
    for v in fx.phi.values():
        assert v.encode() not in out
    again, _, _ = scrub_twix(out)
    assert again == out


@given(st.binary(min_size=0, max_size=2000))
def test_random_binary_never_grows(data):
    out = scrub_in_place(data, locate_phi_fields(data))
    assert len(out) == len(data)


def test_kspace_payload_untouched():
    fx = twix_file(9)
    out = scrub_twix(fx.data)[0]
    text_len = struct.unpack_from("<I", fx.data, 0)[0]
    assert out[text_len:] == fx.data[text_len:]
