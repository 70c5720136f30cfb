import math

import numpy as np
import pytest
import scipy.linalg

import pyspamm


def inv_sqrt_reference(s):
    w, v = np.linalg.eigh(s)
    return (v / np.sqrt(w)) @ v.T


def test_exact_multiply_matches_numpy():
    rng = np.random.default_rng(1)
    a = rng.uniform(-1, 1, (37, 37))
    b = rng.uniform(-1, 1, (37, 37))
    c, stats = pyspamm.multiply(a, b, tau=0.0, block_size=8)
    assert np.linalg.norm(c - a @ b) <= 1e-12 * np.linalg.norm(a @ b)
    # Padding blocks are zero markers; every block pair inside 37 x 37 is kept.
    assert stats["leaf_products_performed"] == math.ceil(37 / 8) ** 3
    assert stats["leaf_products_possible"] == 8**3


def test_approximate_multiply_respects_bound():
    s = pyspamm.gen_decay(64, gamma=0.5)
    c, stats = pyspamm.multiply(s, s, tau=1e-3, block_size=8)
    err = np.linalg.norm(c - s @ s)
    norm = np.linalg.norm(s)
    assert err <= pyspamm.error_bound(64, 1e-3, norm, norm)
    assert stats["volume_fraction"] < 1.0


def test_inverse_square_root():
    s = pyspamm.gen_decay(48, gamma=0.5, shift=0.1, kappa=1e3)
    for mode in ("dual", "single"):
        r = pyspamm.inv_sqrt(s, mode=mode, block_size=8)
        assert r["status"] == "converged"
        assert abs(r["history"][-1]["t"]) < 1e-10
        z = r["inv_sqrt"]
        assert np.linalg.norm(z - inv_sqrt_reference(s)) <= 1e-8 * np.linalg.norm(z)
        assert np.linalg.norm(r["sqrt"] - scipy.linalg.sqrtm(s).real) <= 1e-8 * np.linalg.norm(s)


def test_schedules():
    for t in (0.0, 0.3, 0.35, 1.0):
        assert pyspamm.alpha_schedule(t) == pytest.approx(1 + 1.85 / (1 + math.exp(-50 * (t - 0.35))))
        assert pyspamm.epsilon_schedule(t) == pytest.approx(0.1 / (1 + math.exp(-75 * (t - 0.30))))


def test_error_flow_at_zero_threshold():
    s = pyspamm.gen_decay(32, gamma=0.5, shift=0.1, kappa=1e2)
    f = pyspamm.error_flow(s, steps=40, block_size=8)
    assert f["status"] == "converged"
    assert not f["bifurcated"]
    assert max(r["dz"] for r in f["records"]) <= 1e-12


def test_representation_round_trip(tmp_path):
    s = pyspamm.gen_decay(64, gamma=1.0, shift=0.5, kappa=1e4, surgery="graded", seed=3)
    s /= np.linalg.eigvalsh(s).max()
    rep = pyspamm.Representation(block_size=8)
    for mu in (0.1, 0.01):
        rep.extend(s, mu, tau0=0.0, tau_apply=0.0)
    assert len(rep) == 2
    assert [sl["mu"] for sl in rep.slices] == [0.1, 0.01]
    w = np.linalg.eigvalsh(rep.congruence(s))
    assert w.max() / w.min() < np.linalg.cond(s)
    z0, z1 = (sl["z"] for sl in rep.slices)
    m = np.eye(64)
    assert np.allclose(rep.apply(m), z1.T @ z0.T, atol=1e-12)

    rep.save(tmp_path / "slices")
    back = pyspamm.Representation.load(tmp_path / "slices", block_size=8)
    assert len(back) == 2
    assert np.array_equal(back.slices[1]["z"], z1)
    with pytest.raises(ValueError):
        rep.extend(s, 0.05)


def test_matrix_market_round_trip(tmp_path):
    s = pyspamm.gen_decay(16, dim=2, gamma=0.7)
    path = tmp_path / "s.mtx"
    pyspamm.write_matrix_market(s, path)
    assert np.array_equal(pyspamm.read_matrix_market(path), s)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(ValueError):
        pyspamm.multiply(np.eye(4), np.eye(5))
    with pytest.raises(ValueError):
        pyspamm.inv_sqrt(np.eye(4), tau=-1.0)
    with pytest.raises(OSError):
        pyspamm.read_matrix_market(tmp_path / "missing.mtx")
    assert issubclass(pyspamm.DivergenceError, RuntimeError)
