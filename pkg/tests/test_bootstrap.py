import copy
import importlib
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lochar.bootstrap import align_conjugation, bootstrap, resample_curve, shifted_std
from lochar.errors import BootstrapUnstable
from lochar.pipeline import characterize, dataset_from_simulation
from lochar.simulator import make_plan, simulate_direct

# the package re-exports the function under the module's name
bmod = importlib.import_module("lochar.bootstrap")


def _dataset(m=3, seed=7, **kw):
    plan = make_plan(m, seed=seed, **kw)
    return plan, dataset_from_simulation(plan, simulate_direct(plan))


@pytest.fixture(scope="module")
def noisy():
    plan, ds = _dataset()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        primary = characterize(ds)
    return plan, ds, primary


def test_noiseless_gives_zero_bars():
    _, ds = _dataset(noise=False)
    res = bootstrap(ds, n=50, seed=0)
    assert np.max(res.sigma_re) < 1e-9
    assert np.max(res.sigma_im) < 1e-9
    assert res.sigma_gamma < 1e-9
    assert not res.dropped


def test_too_few_rounds(noisy):
    _, ds, primary = noisy
    with pytest.raises(ValueError):
        bootstrap(ds, n=49, primary=primary)


def test_determinism_and_worker_independence(noisy):
    _, ds, primary = noisy
    a = bootstrap(ds, n=50, seed=3, primary=primary)
    b = bootstrap(ds, n=50, seed=3, primary=primary)
    np.testing.assert_array_equal(a.samples, b.samples)
    c = bootstrap(ds, n=50, seed=3, primary=primary, workers=2)
    np.testing.assert_allclose(a.samples, c.samples, atol=1e-12)
    d = bootstrap(ds, n=50, seed=4, primary=primary)
    assert not np.allclose(a.samples, d.samples)


def test_result_shapes_and_archive(noisy):
    _, ds, primary = noisy
    res = bootstrap(ds, n=50, seed=0, primary=primary)
    m = primary.W.shape[0]
    assert res.samples.shape == (50, m, m)
    assert res.sigma_re.shape == (m, m)
    rows = res.archive_rows()
    assert len(rows) == 50 * m * m
    assert rows[0][:3] == (0, 1, 1)
    # samples are gauge-fixed, so the first row and column carry no imaginary part
    assert np.max(res.sigma_im[0]) < 1e-12 and np.max(res.sigma_im[:, 0]) < 1e-12
    report = res.apply(copy.deepcopy(primary))
    assert report.to_dict()["diagnostics"]["bootstrap"]["kept"] == 50


def test_too_many_failed_rounds(noisy, monkeypatch):
    _, ds, primary = noisy
    real = bmod._round
    calls = iter(range(10_000))

    def flaky(*args):
        if next(calls) % 5 == 0:
            return None, None, "forced failure"
        return real(*args)

    monkeypatch.setattr(bmod, "_round", flaky)
    with pytest.raises(BootstrapUnstable):
        bootstrap(ds, n=50, seed=0, primary=primary)


def test_small_failure_rate_is_tolerated(noisy, monkeypatch):
    _, ds, primary = noisy
    real = bmod._round
    calls = iter(range(10_000))

    def flaky(*args):
        if next(calls) in (3, 17):
            return None, None, "forced failure"
        return real(*args)

    monkeypatch.setattr(bmod, "_round", flaky)
    res = bootstrap(ds, n=50, seed=0, primary=primary)
    assert [k for k, _ in res.dropped] == [3, 17]
    assert res.samples.shape[0] == 48
    assert res.drop_fraction == pytest.approx(0.04)


def test_resample_curve_noiseless_is_fit(noisy):
    _, ds, primary = noisy
    ports, result = sorted(primary.arguments.fits.items())[0]
    curve = ds.source.get(ports)
    rep = resample_curve(curve, result, np.random.default_rng(0))
    assert rep.ports == curve.ports
    assert np.all(rep.counts >= 0)
    # every replica point is the fit times (1 + a residual from the pool)
    rel = rep.counts / np.asarray(result.fitted) - 1
    pool = (curve.counts - result.fitted) / result.fitted
    assert np.all(np.min(np.abs(rel[:, None] - pool[None, :]), axis=1) < 1e-9)


def test_align_conjugation():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(align_conjugation(W.conj(), W), W)
    np.testing.assert_array_equal(align_conjugation(W, W), W)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60), st.floats(-1e6, 1e6))
def test_shifted_std_matches_numpy(values, offset):
    x = np.array(values) + offset
    assert shifted_std(x) == pytest.approx(np.std(x, ddof=1), rel=1e-6, abs=1e-6)


def test_error_bars_converge(noisy):
    # doubling the rounds from 200 to 400 moves the mean error bar by under 15%
    _, ds, primary = noisy
    res = bootstrap(ds, n=400, seed=1, primary=primary)
    half = res.samples[:200]
    for part in ("real", "imag"):
        a = shifted_std(getattr(half, part)).mean()
        b = shifted_std(getattr(res.samples, part)).mean()
        assert abs(b / a - 1) < 0.15
    assert set(res.checkpoints) == {100, 200, 400}
