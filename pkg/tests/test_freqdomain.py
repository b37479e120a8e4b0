import numpy as np
import pytest

from periodreg import freqdomain
from periodreg.freqdomain import (
    bode_linear,
    bound_constants,
    transfer_curve,
    transfer_gain,
    transfer_gain_normalized,
    transfer_gain_resolvent,
)
from periodreg.internal_model import CoefficientSequence, RegulatorConfig, build_bank

TWO_PI = 2.0 * np.pi


def canonical(n_o, sigma=2.0, omega_hat=TWO_PI, mu=1.0, epsilon=0.5):
    cfg = RegulatorConfig.canonical(n_o, sigma, omega_hat, mu, epsilon)
    return cfg, build_bank(cfg)


# ---------------------------------------------------------------------------
# closed-form gain

def test_gain_at_resonances_is_exact():
    """At the embedded frequencies the removable-singularity value applies."""
    for mu in (0.5, 1.0, 2.0):
        cfg, _ = canonical(6, mu=mu)
        nz = cfg.coefficients.values
        assert transfer_gain(cfg, 0.0) == pytest.approx(1.0 / (mu * mu * nz[0]), rel=1e-14)
        for l in range(1, 7):
            got = transfer_gain(cfg, l * cfg.omega_hat)
            assert got == pytest.approx(2.0 / (mu * mu * nz[l]), rel=1e-12)


def test_scalar_bank_closed_form():
    """n_o = 0 reduces to the first-order gain n_z0 / (w^2 + mu^2 n_z0^2)."""
    cfg, _ = canonical(0, mu=1.3)
    nz0 = 2.0
    for w in (0.0, 0.7, 5.0, 77.0):
        want = nz0 / (w * w + cfg.mu ** 2 * nz0 ** 2)
        assert transfer_gain(cfg, w) == pytest.approx(want, rel=1e-13)


def test_gain_tail_bounded_for_integrator_only():
    cfg, _ = canonical(0)
    for w in np.logspace(0, 4, 17):
        assert transfer_gain(cfg, w) <= 1.5 * 2.0


def test_gain_matches_resolvent_oracle():
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(300):
        n_o = int(rng.integers(0, 21))
        mu = float(rng.uniform(0.5, 2.0))
        cfg, bank = canonical(n_o, mu=mu)
        w = float(rng.uniform(0.0, 30.0 * cfg.omega_hat))
        closed = transfer_gain(cfg, w)
        oracle = transfer_gain_resolvent(bank, mu, w)
        worst = max(worst, abs(closed - oracle) / oracle)
    assert worst < 1e-8


def test_gain_matches_literal_forms_off_resonance():
    """Production evaluator == rational form == log-product form."""
    rng = np.random.default_rng(29)
    n_o, mu = 12, 1.0
    nz = np.asarray(CoefficientSequence.canonical(n_o).values)
    checked = 0
    while checked < 10_000:
        x = float(rng.uniform(0.0, n_o + 8.0))
        if np.min(np.abs(x - np.arange(0, n_o + 1))) < 1e-3:
            continue
        stable = transfer_gain_normalized(nz, mu, x)
        rational = freqdomain._rational_form(nz, mu, 1.0, x)
        poly = freqdomain._polynomial_form(nz, mu, 1.0, x)
        assert stable == pytest.approx(rational, rel=1e-9)
        assert stable == pytest.approx(poly, rel=1e-9)
        checked += 1


def test_gain_vectorized_matches_scalar():
    nz = np.asarray(CoefficientSequence.canonical(5).values)
    grid = np.linspace(0.0, 9.0, 101)
    vec = freqdomain._gain_core(nz, 1.0, grid, 1.0)
    pointwise = np.array([transfer_gain_normalized(nz, 1.0, x) for x in grid])
    np.testing.assert_array_equal(vec, pointwise)


def test_gain_finite_nonnegative_everywhere():
    nz = np.asarray(CoefficientSequence.canonical(16, 0.25).values)
    grid = np.concatenate([np.arange(0.0, 17.0), np.linspace(0.0, 21.0, 4001)])
    vals = freqdomain._gain_core(nz, 2.0, grid, 1.0)
    assert np.all(np.isfinite(vals))
    assert np.all(vals >= 0.0)


# ---------------------------------------------------------------------------
# Lemma-style parabolic bound

def test_bound_constants_reference_arithmetic():
    coeffs = CoefficientSequence.canonical(4, epsilon=0.5)
    kappa0, kappa1 = bound_constants(coeffs, mu=1.0)
    assert kappa0 == pytest.approx(7.0)
    s = 2.0 / 1.0 + 2.0 / (3.0 * 2.0 ** -1.5) + 10.0 / 3.0
    assert s == pytest.approx(7.219, abs=5e-4)
    a = (2.0 + np.sqrt(2.0)) * s
    varpi = 1.0 / (48.0 * (a + 2.0))
    assert kappa1 == pytest.approx(4.0 * 2.0 / varpi ** 2 + 512.0 / 1.0)


def test_bound_constants_shrink_with_mu():
    coeffs = CoefficientSequence.canonical(3)
    _, k1_one = bound_constants(coeffs, mu=1.0)
    _, k1_two = bound_constants(coeffs, mu=2.0)
    assert k1_two < k1_one


def test_bound_constants_need_three_weights():
    with pytest.raises(ValueError):
        bound_constants([2.0, 1.0], mu=1.0)
    # canonical sequences grow their own tail
    k0, _ = bound_constants(CoefficientSequence.canonical(1), mu=1.0)
    assert k0 == pytest.approx(7.0)


def test_transfer_curve_respects_bound():
    coeffs = CoefficientSequence.canonical(8)
    grid = np.linspace(0.0, 13.0, 2001)
    curve = transfer_curve(coeffs, 1.0, grid)
    assert curve.bound_ok
    assert curve.bound_violations().size == 0
    assert np.all(curve.values <= curve.kappa0 + curve.kappa1 * grid ** 2)


def test_transfer_curve_csv(tmp_path):
    curve = transfer_curve(CoefficientSequence.canonical(2), 1.0, np.linspace(0, 3, 7))
    path = tmp_path / "curve.csv"
    curve.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,gain"
    assert len(lines) == 8


# ---------------------------------------------------------------------------
# Bode curves

def test_high_gain_bode_closed_form():
    grid = np.array([0.0, 1.0, TWO_PI, 100.0])
    curve = bode_linear(2.0, grid)
    np.testing.assert_allclose(curve.magnitude, 1.0 / np.sqrt(grid ** 2 + 4.0), rtol=1e-14)
    assert curve.magnitude[0] == pytest.approx(0.5)
    assert curve.magnitude_db[0] == pytest.approx(20 * np.log10(0.5))
    assert curve.label == "high_gain"


def test_internal_model_bode_notches():
    cfg, _ = canonical(3)
    notches = cfg.omega_hat * np.arange(0, 4)
    curve = bode_linear(cfg, notches)
    assert np.all(curve.magnitude == 0.0)
    assert np.all(curve.magnitude_db == freqdomain.DB_FLOOR)


def test_internal_model_bode_formula_off_notch():
    cfg, _ = canonical(2, sigma=2.0, mu=1.5)
    w = 9.0
    nz = np.asarray(cfg.coefficients.values)
    wl = cfg.omega_hat * np.arange(0, 3)
    s = np.sum(nz / (wl ** 2 - w ** 2))
    want = (1.0 / np.hypot(w, 2.0)) / np.sqrt(1.0 + cfg.mu ** 2 * (w * s) ** 2)
    got = bode_linear(cfg, np.array([w])).magnitude[0]
    assert got == pytest.approx(want, rel=1e-12)


def test_integrator_only_bode_has_single_notch():
    cfg, _ = canonical(0)
    grid = np.array([0.0, TWO_PI, 2 * TWO_PI])
    curve = bode_linear(cfg, grid)
    assert curve.magnitude[0] == 0.0
    assert np.all(curve.magnitude[1:] > 0.0)


def test_bode_curves_converge_at_high_frequency():
    cfg, _ = canonical(10)
    grid = np.logspace(np.log10(150.0 * TWO_PI), 4, 300)
    hg = bode_linear(2.0, grid)
    im = bode_linear(cfg, grid)
    np.testing.assert_allclose(im.magnitude, hg.magnitude, rtol=1e-2)


def test_bode_csv(tmp_path):
    curve = bode_linear(2.0, np.logspace(-1, 3, 5))
    path = tmp_path / "bode.csv"
    curve.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "omega_rad_s,magnitude,magnitude_db"
    assert len(lines) == 6
    first = float(lines[1].split(",")[0])
    last = float(lines[-1].split(",")[0])
    assert first == pytest.approx(0.1)
    assert last == pytest.approx(1000.0)
