import numpy as np
import pytest

from marsit.checkpoint import load_checkpoint, save_checkpoint
from marsit.data import load_csv, synth_dataset, write_csv
from marsit.errors import DatasetError, ParameterError


def test_synth_is_seeded():
    a = synth_dataset(3, 50, 4, 0.1)
    b = synth_dataset(3, 50, 4, 0.1)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert not np.array_equal(a.features, synth_dataset(4, 50, 4, 0.1).features)


def test_synth_noise_free_labels_are_linear():
    ds = synth_dataset(0, 30, 3, 0.0, feature_std=0.5)
    np.testing.assert_allclose(ds.labels, ds.features @ ds.truth)
    assert abs(ds.features.std() - 0.5) < 0.15


def test_synth_logistic_labels_binary():
    ds = synth_dataset(0, 200, 3, 0.1, kind="logistic")
    assert set(np.unique(ds.labels)) <= {0.0, 1.0}


@pytest.mark.parametrize("kw", [dict(n=0), dict(noise_sigma=-1.0), dict(kind="poisson"), dict(feature_std=0.0)])
def test_synth_rejects_bad_arguments(kw):
    args = dict(seed=0, n=10, d=2, noise_sigma=0.1) | kw
    with pytest.raises(ParameterError):
        synth_dataset(**args)


def test_round_robin_shards():
    ds = synth_dataset(0, 10, 2, 0.1)
    shards = ds.shards(3)
    assert [s.tolist() for s in shards] == [[0, 3, 6, 9], [1, 4, 7], [2, 5, 8]]
    with pytest.raises(DatasetError):
        ds.shards(11)


@pytest.mark.parametrize("header", [False, True])
def test_csv_roundtrip(tmp_path, header):
    ds = synth_dataset(1, 20, 3, 0.2)
    write_csv(ds, tmp_path / "d.csv", header=header)
    back = load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


@pytest.mark.parametrize("text, msg", [
    ("", "no data"),
    ("a,b\n", "no data"),
    ("1,2\n3\n", "line 2"),
    ("1,2\n3,x\n", "line 2"),
    ("1,2\n3,nan\n", "line 2"),
    ("1\n", "line 1"),
])
def test_csv_errors(tmp_path, text, msg):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DatasetError, match=msg):
        load_csv(p)


def test_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError):
        load_csv(tmp_path / "nope.csv")


def test_checkpoint_roundtrip_and_errors(tmp_path):
    x = np.array([1.5, -2.0, 3e-300])
    save_checkpoint(tmp_path / "m.ckpt", x)
    np.testing.assert_array_equal(load_checkpoint(tmp_path / "m.ckpt"), x)
    raw = (tmp_path / "m.ckpt").read_bytes()
    (tmp_path / "t.ckpt").write_bytes(raw[:-1])
    with pytest.raises(DatasetError):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "b.ckpt").write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(DatasetError):
        load_checkpoint(tmp_path / "b.ckpt")
