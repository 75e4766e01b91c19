import hashlib
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cedensity import approximators as ap
from cedensity import artifacts as ar
from cedensity import builders
from cedensity.core import CEStream, SetOracle
from cedensity.errors import ArtifactError


def sample_artifact(n_max=500):
    stream = CEStream.from_oracle(SetOracle.residue_union(2, [0]),
                                  n_max=n_max, stage_max=2 * n_max)
    return ap.checkpoint_subset(stream, "1/4")


@given(st.lists(st.booleans(), max_size=300))
def test_rle_round_trip(bits):
    b = np.array(bits, dtype=bool)
    runs = ar.bits_to_rle(b)
    assert np.array_equal(ar.rle_to_bits(runs, b.size), b)
    # alternating runs: all positive except a possible leading zero-length
    assert all(r > 0 for r in runs[1:])


def test_rle_rejects_inconsistent_lengths():
    with pytest.raises(ArtifactError):
        ar.rle_to_bits([3, 2], 4)
    with pytest.raises(ArtifactError):
        ar.rle_to_bits([1], 4)


def test_save_load_round_trip(tmp_path):
    art = sample_artifact()
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    back = ar.load_artifact(path)
    assert back.kind == art.kind
    assert np.array_equal(back.bits, art.bits)
    assert back.checkpoints == art.checkpoints
    assert back.guarantee == art.guarantee
    assert ar.verify_artifact(back)["ok"]


def test_load_rejects_tampered_bytes(tmp_path):
    art = sample_artifact()
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    raw = path.read_text()
    i = raw.index('"n_max": ') + len('"n_max": ')
    flip = "9" if raw[i] != "9" else "8"
    (tmp_path / "b.json").write_text(raw[:i] + flip + raw[i + 1:])
    with pytest.raises(ArtifactError):
        ar.load_artifact(tmp_path / "b.json")


def test_load_rejects_missing_digest(tmp_path):
    art = sample_artifact()
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    payload = json.loads(path.read_text())
    payload.pop("integrity_sha256")
    path.write_text(json.dumps(payload))
    with pytest.raises(ArtifactError):
        ar.load_artifact(path)


def redigest(payload):
    payload.pop("integrity_sha256", None)
    payload["integrity_sha256"] = hashlib.sha256(
        ar._canonical(payload)).hexdigest()
    return payload


def test_verify_catches_semantic_corruption(tmp_path):
    art = sample_artifact()
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    payload = json.loads(path.read_text())
    payload["checkpoints"][1]["count"] += 1
    path.write_text(json.dumps(redigest(payload)))
    back = ar.load_artifact(path)  # digest is consistent again
    rep = ar.verify_artifact(back)
    assert not rep["ok"] and rep["failures"]


def test_verify_catches_bit_flip_in_certified_block(tmp_path):
    art = sample_artifact()
    # clear a selected bit inside a certified prefix
    idx = int(np.nonzero(art.bits)[0][0])
    art.bits[idx] = False
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    rep = ar.verify_artifact(ar.load_artifact(path))
    assert not rep["ok"]


def test_verify_infsup_artifact(tmp_path):
    art = builders.infsup_build(["1/3", "2/3"] * 3, 6, 10**6)
    path = tmp_path / "i.json"
    ar.save_artifact(art, path)
    assert ar.verify_artifact(ar.load_artifact(path))["ok"]


def test_unknown_guarantee_form_fails_closed():
    art = sample_artifact()
    art.guarantee = {"form": "no-such-form"}
    rep = ar.verify_artifact(art)
    assert not rep["ok"]


def test_format_version_checked(tmp_path):
    art = sample_artifact()
    path = tmp_path / "a.json"
    ar.save_artifact(art, path)
    payload = json.loads(path.read_text())
    payload["format_version"] = 99
    path.write_text(json.dumps(redigest(payload)))
    with pytest.raises(ArtifactError):
        ar.load_artifact(path)


def test_certified_csv_export(tmp_path):
    art = sample_artifact()
    path = tmp_path / "c.csv"
    ar.write_certified_csv(art, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,count,lower_num,lower_den,upper_num,upper_den,holds"
    assert len(lines) == len(art.checkpoints)  # one per non-trivial checkpoint
    assert all(line.endswith(",1") for line in lines[1:])

    look = ap.lookahead_subset(
        CEStream.from_oracle(SetOracle.naturals(), n_max=50, stage_max=100),
        "1/2")
    ar.write_certified_csv(look, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 51  # header + one row per window n
    assert all(line.endswith(",1") for line in lines[1:])
