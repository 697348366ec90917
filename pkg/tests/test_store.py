import numpy as np
import pytest

from cuspfactor.errors import IntegrityError, ShapeError
from cuspfactor.store import DrawStore, config_hash, read_draws, read_manifest, unflatten, write_draws
from cuspfactor.prob_core import make_rng


def _store(n=4, p=3, seed=0):
    r = make_rng(seed)
    s = DrawStore(p, {"method": "cusp", "settings.seed": 7, "hyper.alpha": 5.0, "settings.adapt": True})
    for t in range(n):
        s.append(10 * (t + 1), r.standard_normal((p, 2)), r.uniform(0.5, 1.5, p), 1, 2)
    return s


def test_append_and_unflatten():
    lam = np.array([[1.0, 2.0], [0.5, -1.0]])
    s = DrawStore(2)
    s.append(1, lam, np.array([0.1, 0.2]), 2, 3)
    omega = s.omega_matrices()[0]
    assert np.allclose(omega, lam @ lam.T + np.diag([0.1, 0.2]))
    assert s.omega.shape == (1, 3)


def test_wrong_length():
    with pytest.raises(ShapeError):
        DrawStore(3).append_upper(1, np.zeros(5), 0, 1)


def test_round_trip_is_exact(tmp_path):
    s = _store()
    write_draws(s, tmp_path)
    back = read_draws(tmp_path)
    assert np.array_equal(back.omega, s.omega)
    assert np.array_equal(back.h_star, s.h_star) and np.array_equal(back.iteration, s.iteration)
    assert back.manifest == s.manifest


def test_empty_round_trip(tmp_path):
    s = DrawStore(2, {"method": "mgp"})
    write_draws(s, tmp_path)
    assert len(read_draws(tmp_path)) == 0


def test_manifest_contents(tmp_path):
    s = _store()
    write_draws(s, tmp_path)
    m = read_manifest(tmp_path / "manifest.txt")
    assert m["n_draws"] == 4 and m["p"] == 3 and m["settings.adapt"] is True
    assert m["config_hash"] == config_hash(s.manifest)


def test_tampered_manifest(tmp_path):
    write_draws(_store(), tmp_path)
    path = tmp_path / "manifest.txt"
    path.write_text(path.read_text().replace("hyper.alpha=5.0", "hyper.alpha=6.0"))
    with pytest.raises(IntegrityError, match="config_hash"):
        read_draws(tmp_path)


def test_truncated_draws(tmp_path):
    write_draws(_store(), tmp_path)
    lines = (tmp_path / "omega.csv").read_text().splitlines()
    (tmp_path / "omega.csv").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(IntegrityError, match="draws"):
        read_draws(tmp_path)


def test_stray_rows_when_empty(tmp_path):
    write_draws(DrawStore(2), tmp_path)
    with open(tmp_path / "traces.csv", "a") as fh:
        fh.write("1,0,1\n")
    with pytest.raises(IntegrityError):
        read_draws(tmp_path)


def test_missing_file(tmp_path):
    write_draws(_store(), tmp_path)
    (tmp_path / "traces.csv").unlink()
    with pytest.raises(IntegrityError, match="missing"):
        read_draws(tmp_path)


def test_garbled_cell(tmp_path):
    write_draws(_store(), tmp_path)
    text = (tmp_path / "omega.csv").read_text().splitlines()
    text[1] = "x" + text[1][1:]
    (tmp_path / "omega.csv").write_text("\n".join(text) + "\n")
    with pytest.raises(IntegrityError):
        read_draws(tmp_path)


def test_unflatten_batch():
    up = np.arange(6.0).reshape(2, 3)
    mats = unflatten(up, 2)
    assert mats.shape == (2, 2, 2) and np.all(mats == np.swapaxes(mats, 1, 2))


def test_numeric_looking_strings_survive(tmp_path):
    s = DrawStore(2, {"data.source": "007", "data.negate_columns": "1,9"})
    write_draws(s, tmp_path)
    assert read_draws(tmp_path).manifest["data.source"] == 7
