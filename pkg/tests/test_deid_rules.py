import hashlib
import hmac
import json
import re
import threading

import pytest
from hypothesis import given, settings, strategies as st

from medideid.deid_rules import (
    ActionCode, ConfigError, DeidProfile, PrivateTagPolicy, TEMPORAL_MODIFIED, TagPattern,
    UidCollisionError, UidMap, action_for_tag, apply_profile, builtin_profile,
    builtin_profile_names, dummy_value, load_profile, remap_uid, shift_dates,
)
from medideid.dicom_core import DataSet, Tag, make_element, make_item, make_part10, serialize_dataset
from medideid.synthetic import phi_dataset, uid_corpus

KEY = b"k"
# frozen: HMAC-SHA256(b"k", b"1.2.3"), first 16 bytes as a big-endian integer
FROZEN_123 = "2.25.111263612402845642126382191733580811337"


def _uid_oracle(key: bytes, uid: str, root: str = "2.25") -> str:
    digest = hmac.new(key, uid.encode(), hashlib.sha256).digest()
    return (root + "." + str(int.from_bytes(digest[:16], "big")))[:64]


# --------------------------------------------------------------------- profiles


def test_basic_profile_entries():
    basic = load_profile(name="basic")
    assert basic.entry_map()["0010,0010"] is ActionCode.ZERO
    assert basic.entry_map()["0010,0030"] is ActionCode.ZERO
    assert action_for_tag(basic, (0x0010, 0x0010)) is ActionCode.ZERO


def test_eleven_builtins():
    names = builtin_profile_names()
    assert names[0] == "basic" and len(names) == 11
    for n in names:
        assert builtin_profile(n).name == n


def test_private_tag_removed_under_remove_all():
    assert action_for_tag(builtin_profile("basic"), (0x0009, 0x0001)) is ActionCode.REMOVE


def test_private_kept_with_safe_private_option():
    p = builtin_profile("retain_safe_private")
    assert p.private_tag_policy is PrivateTagPolicy.KEEP
    assert action_for_tag(p, (0x0009, 0x0001)) is ActionCode.KEEP


def test_empty_profile_defaults_to_keep():
    p = DeidProfile("empty", private_tag_policy=PrivateTagPolicy.KEEP, risk_groups=frozenset())
    assert action_for_tag(p, (0x0008, 0x0060)) is ActionCode.KEEP
    assert action_for_tag(load_profile(""), (0x0008, 0x0060)) is ActionCode.KEEP


def test_empty_file_extending_basic_equals_basic():
    loaded = load_profile("extends = basic\n")
    assert loaded == builtin_profile("basic")


def test_override_wins():
    p = load_profile("extends = basic\ndate_shift_days = -30\n0010,0030 = C\n")
    assert action_for_tag(p, (0x0010, 0x0030)) is ActionCode.CLEAN
    assert p.date_shift_days == -30


def test_unknown_letter_is_config_error():
    with pytest.raises(ConfigError, match="unknown action"):
        load_profile("0010,0010 = Q\n")


def test_conflicting_duplicate_is_config_error():
    with pytest.raises(ConfigError, match="already set"):
        load_profile("0010,0010 = X\n0010,0010 = K\n")
    # identical repeats are harmless
    load_profile("0010,0010 = X\n0010,0010 = X\n")


@pytest.mark.parametrize("text", ["zzzz,0010 = X", "0010,0010", "default_action = Q",
                                  "retain = nope", "extends = nope", "0010,0020-0010,0010 = X"])
def test_malformed_profiles(text):
    with pytest.raises(ConfigError):
        load_profile(text)


def test_precedence_exact_masked_range_default():
    p = load_profile("default_action = K\nprivate_tags = keep\nrisk_groups =\n"
                     "5000,0000-50FF,FFFF = D\n50xx,xxxx = X\n50xx,3000 = Z\n5000,3000 = C\n")
    assert action_for_tag(p, (0x5000, 0x3000)) is ActionCode.CLEAN
    assert action_for_tag(p, (0x5002, 0x3000)) is ActionCode.ZERO
    assert action_for_tag(p, (0x5002, 0x0010)) is ActionCode.REMOVE
    assert action_for_tag(p, (0x5100, 0x0010)) is ActionCode.KEEP


def test_unmatched_risk_group_defaults_to_remove():
    p = load_profile("default_action = K\n")
    assert action_for_tag(p, (0x0010, 0x9999)) is ActionCode.REMOVE
    assert action_for_tag(p, (0x0018, 0x9999)) is ActionCode.KEEP


def test_masked_pattern_parse():
    t = TagPattern.parse("60xx,3000")
    assert t.kind == "masked"
    assert t.matches(0x60223000) and not t.matches(0x60223001)


def test_pixel_data_always_kept():
    p = load_profile("7FE0,0010 = X\n")
    assert action_for_tag(p, (0x7FE0, 0x0010)) is ActionCode.KEEP


# --------------------------------------------------------------------- dummies, dates


@pytest.mark.parametrize("vr, expected", [("PN", b"ANONYMIZED"), ("DA", b"19000101"),
                                          ("TM", b"000000"), ("IS", b"0 "), ("DS", b"0 ")])
def test_dummy_values(vr, expected):
    assert dummy_value(vr) == expected


def test_shift_dates_calendar():
    assert shift_dates("DA", "20240101", -30) == "20231202"
    assert shift_dates("DA", "20240301", -1) == "20240229"
    assert shift_dates("DT", "20240101120000.5+0100", 1) == "20240102120000.5+0100"
    assert shift_dates("TM", "1200", 5) == "1200"
    with pytest.raises(ValueError):
        shift_dates("DA", "2024-01-01", 1)


# --------------------------------------------------------------------- UID remap


def test_remap_oracle():
    m = UidMap(KEY)
    out = remap_uid(m, "1.2.3")
    assert out == _uid_oracle(KEY, "1.2.3") == FROZEN_123
    assert len(out) <= 64 and re.fullmatch(r"[0-9]+(\.[0-9]+)*", out)


def test_remap_deterministic_and_injective():
    m = UidMap(KEY)
    assert m.remap("1.2.3") == m.remap("1.2.3")
    assert m.remap("1.2.3") != m.remap("1.2.4")
    assert UidMap(KEY).remap("1.2.3") == m.remap("1.2.3")
    assert UidMap(b"other").remap("1.2.3") != m.remap("1.2.3")


def test_custom_root_truncated_to_64():
    root = "1.2.826.0.1.3680043.10.543.999999"
    out = UidMap(KEY, root).remap("1.2.3")
    assert out == _uid_oracle(KEY, "1.2.3", root) and len(out) == 64


def test_bad_root_rejected():
    with pytest.raises(ConfigError):
        UidMap(KEY, "1.2.x")


def test_collision_is_hard_error():
    m = UidMap(KEY)
    forged = _uid_oracle(KEY, "1.2.3")
    m.cache["9.9"] = forged
    m._reverse[forged] = "9.9"
    with pytest.raises(UidCollisionError, match="rotate"):
        m.remap("1.2.3")


def test_uid_map_persistence(tmp_path):
    m = UidMap(KEY)
    first = m.remap("1.2.3")
    m.save(tmp_path / "map.json")
    again = UidMap.load(tmp_path / "map.json", KEY)
    assert again.cache == {"1.2.3": first}
    assert UidMap.load(tmp_path / "missing.json", KEY).cache == {}


def test_concurrent_remap_single_replacement():
    m = UidMap(KEY)
    results = []
    barrier = threading.Barrier(8)

    def worker():
        barrier.wait()
        results.append([m.remap(f"1.2.{i}") for i in range(200)])

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r == results[0] for r in results)
    assert len(m.cache) == 200


# --------------------------------------------------------------------- apply


def _demo_set():
    return make_part10([
        make_element((0x0010, 0x0010), "PN", "DOE^JOHN"),
        make_element((0x0010, 0x0020), "LO", "123"),
        make_element((0x0008, 0x0020), "DA", "20240101"),
        make_element((0x0008, 0x0018), "UI", "1.2.3.4"),
    ])


def test_apply_basic_and_clean_variant():
    out, audit = apply_profile(_demo_set(), builtin_profile("basic"), UidMap(KEY), "f")
    assert out[(0x0010, 0x0010)].value == b""
    assert out[(0x0010, 0x0020)].value == b""
    assert out[(0x0008, 0x0020)].value == b""
    assert out.text((0x0012, 0x0062)) == "YES"
    assert out.text((0x0012, 0x0063)) == "medideid basic"

    c_variant = load_profile("extends = basic\ndate_shift_days = -30\n0008,0020 = C\n")
    out, audit = apply_profile(_demo_set(), c_variant, UidMap(KEY), "f")
    assert out.text((0x0008, 0x0020)) == "20231202"
    assert out.text(TEMPORAL_MODIFIED) == "MODIFIED"
    assert out[(0x0010, 0x0010)].value == b""


def test_meta_sop_uid_follows_dataset():
    m = UidMap(KEY)
    out, _ = apply_profile(_demo_set(), builtin_profile("basic"), m)
    meta = {e.tag: e for e in out.meta}
    assert meta[Tag(0x0002, 0x0003)].text == out.text((0x0008, 0x0018)) == m.remap("1.2.3.4")


def test_unparseable_date_falls_back_to_zero_length():
    p = load_profile("extends = basic\ndate_shift_days = 3\n0008,0020 = C\n")
    ds = make_part10([make_element((0x0008, 0x0020), "DA", "JAN 2024")])
    out, audit = apply_profile(ds, p, UidMap(KEY))
    assert out[(0x0008, 0x0020)].value == b""
    assert any("unparseable" in e.note for e in audit.entries)


def test_empty_dataset():
    out, audit = apply_profile(DataSet(), builtin_profile("basic"), UidMap(KEY))
    assert len(out) == 0 and audit.entries == []


def test_shared_study_uid_maps_identically():
    m = UidMap(KEY)
    a = make_part10([make_element((0x0020, 0x000D), "UI", "1.2.840.99.1")], sop_instance_uid="1.1")
    b = make_part10([make_element((0x0020, 0x000D), "UI", "1.2.840.99.1")], sop_instance_uid="1.2")
    oa, _ = apply_profile(a, builtin_profile("basic"), m)
    ob, _ = apply_profile(b, builtin_profile("basic"), m)
    assert oa.text((0x0020, 0x000D)) == ob.text((0x0020, 0x000D)) == _uid_oracle(KEY, "1.2.840.99.1")


def test_removed_sequence_drops_subtree():
    ds = make_part10([make_element((0x0010, 0x1002), "SQ", [make_item([
        make_element((0x0010, 0x0020), "LO", "SECRETID")])])])
    out, _ = apply_profile(ds, builtin_profile("basic"), UidMap(KEY))
    assert (0x0010, 0x1002) not in out
    assert b"SECRETID" not in serialize_dataset(out)


def test_nested_items_cleaned():
    ds = make_part10([make_element((0x0008, 0x1140), "SQ", [make_item([
        make_element((0x0008, 0x1155), "UI", "1.2.9"),
        make_element((0x0010, 0x0010), "PN", "NESTED^NAME")])])])
    m = UidMap(KEY)
    out, _ = apply_profile(ds, builtin_profile("basic"), m)
    item = out[(0x0008, 0x1140)].items[0]
    assert item.text((0x0008, 0x1155)) == m.remap("1.2.9")
    assert item[(0x0010, 0x0010)].value == b""


def test_retain_uids_keeps_originals():
    out, _ = apply_profile(_demo_set(), builtin_profile("retain_uids"), UidMap(KEY))
    assert out.text((0x0008, 0x0018)) == "1.2.3.4"


# --------------------------------------------------------------------- invariants


def _removed_anywhere(profile, ds):
    return [p for p, e in ds.walk() if action_for_tag(profile, e.tag) is ActionCode.REMOVE]


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_completeness_and_audit_safety(seed):
    fx = phi_dataset(seed)
    basic = builtin_profile("basic")
    out, audit = apply_profile(fx.dataset, basic, UidMap(KEY), f"file{seed}")
    assert _removed_anywhere(basic, out) == []
    blob = serialize_dataset(out)
    audit_blob = json.dumps(audit.to_dict()).encode()
    for phi in fx.phi:
        if len(phi) >= 4:
            assert phi.encode() not in blob
            assert phi.encode() not in audit_blob


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["basic", "clean_descriptors",
                                                   "retain_long_modified_dates"]),
       st.integers(-400, 400))
def test_idempotence(seed, name, shift):
    profile = load_profile(f"extends = {name}\ndate_shift_days = {shift}\n0040,A030 = C\n")
    m = UidMap(KEY)
    once, _ = apply_profile(phi_dataset(seed).dataset, profile, m)
    twice, _ = apply_profile(once, profile, m)
    assert serialize_dataset(twice) == serialize_dataset(once)


def _uid_slots(corpus):
    slots = {}
    for i, ds in enumerate(corpus):
        for path, e in ds.walk():
            if e.vr == "UI":
                slots[(i,) + path] = e.text
    return slots


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_referential_integrity(seed):
    corpus = uid_corpus(seed)
    m = UidMap(KEY)
    out = [apply_profile(ds, builtin_profile("basic"), m)[0] for ds in corpus]
    pre, post = _uid_slots(corpus), _uid_slots(out)
    keys = sorted(set(pre) & set(post))
    assert len(keys) == len(pre)
    for a in keys:
        for b in keys:
            assert (pre[a] == pre[b]) == (post[a] == post[b])
