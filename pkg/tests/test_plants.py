import numpy as np
import pytest

from periodreg.plants import (
    NormalFormReduction,
    example_plant,
    harmonic_signal,
    linear_test_plant,
    reduce_relative_degree,
)

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# benchmark plant

def test_benchmark_hand_values():
    plant = example_plant()
    assert plant.n == 2
    assert plant.period == 1.0
    f0 = plant.f(0.0, np.zeros(2), 0.0)
    np.testing.assert_allclose(f0, [0.0, 1.0], atol=1e-15)
    # 1 + 0 + arctan(0) + (1 + 1 + 1 + 1)
    assert plant.q(0.0, np.zeros(2), 0.0) == pytest.approx(5.0)


def test_benchmark_periodicity():
    plant = example_plant()
    rng = np.random.default_rng(3)
    for _ in range(100):
        t = float(rng.uniform(0.0, 10.0))
        x = rng.standard_normal(2)
        e = float(rng.standard_normal())
        np.testing.assert_allclose(
            plant.f(t, x, e), plant.f(t + 1.0, x, e), rtol=0, atol=1e-12)
        assert plant.q(t, x, e) == pytest.approx(plant.q(t + 1.0, x, e), abs=1e-12)


def test_benchmark_nonlinear_terms_respond():
    plant = example_plant()
    x = np.array([0.0, 2.0])
    # the x2*e coupling enters f2 linearly in e
    d = plant.f(0.0, x, 1.0)[1] - plant.f(0.0, x, 0.0)[1]
    assert d == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# linear test plant and drift signals

def test_linear_plant_zero_signal():
    plant = linear_test_plant(harmonic_signal())
    assert plant.n == 0
    assert plant.f(0.3, np.empty(0), 1.0).shape == (0,)
    for t in (0.0, 0.3, 0.77):
        assert plant.q(t, np.empty(0), 5.0) == 0.0


def test_linear_plant_sine_signal():
    plant = linear_test_plant(harmonic_signal(sin_amps=(1.0,)))
    assert plant.q(0.25, np.empty(0), 0.0) == pytest.approx(1.0)
    assert plant.q(0.5, np.empty(0), 0.0) == pytest.approx(0.0, abs=1e-15)


def test_linear_plant_accepts_plain_python_signal():
    plant = linear_test_plant(lambda t: 3.0 * t)
    assert plant.q(2.0, np.empty(0), 0.0) == 6.0


def test_harmonic_signal_matches_direct_sum():
    sig = harmonic_signal(dc=0.4, sin_amps=(1.0, 0.0, -0.3), cos_amps=(0.2,), period=2.0)
    w0 = TWO_PI / 2.0
    rng = np.random.default_rng(9)
    for t in rng.uniform(0.0, 4.0, 25):
        want = (0.4 + 1.0 * np.sin(w0 * t) - 0.3 * np.sin(3 * w0 * t)
                + 0.2 * np.cos(w0 * t))
        assert sig(t) == pytest.approx(want, abs=1e-14)


# ---------------------------------------------------------------------------
# relative-degree reduction

def test_reduction_companion_matrix_and_eigenvalues():
    red = NormalFormReduction.build(3, (3.0, 2.0))
    np.testing.assert_array_equal(red.A, [[0.0, 1.0], [-2.0, -3.0]])
    np.testing.assert_array_equal(red.B, [0.0, 1.0])
    np.testing.assert_array_equal(red.C, [1.0, 0.0])
    eigs = np.sort(np.linalg.eigvals(red.A).real)
    np.testing.assert_allclose(eigs, [-2.0, -1.0], atol=1e-12)


def test_reduction_rejects_bad_inputs():
    with pytest.raises(ValueError, match="Hurwitz"):
        NormalFormReduction.build(2, (-1.0,))
    with pytest.raises(ValueError):
        NormalFormReduction.build(1, ())
    with pytest.raises(ValueError):
        NormalFormReduction.build(3, (1.0,))
    with pytest.raises(ValueError, match="Hurwitz"):
        reduce_relative_degree(0, 2, (-0.5,))


def test_error_from_chain():
    red = NormalFormReduction.build(3, (3.0, 2.0))
    # e = xi_3 + a_1 xi_2 + a_2 xi_1
    assert red.error_from_chain([1.0, 2.0, 4.0]) == pytest.approx(4.0 + 3.0 * 2.0 + 2.0 * 1.0)


def test_reduced_degree_two_plant():
    """r=2, a_1=1: f(t, y, e) = -y + e and q = e - y."""
    plant = reduce_relative_degree(0, 2, (1.0,))
    assert plant.n == 1
    y = np.array([0.7])
    e = -0.3
    np.testing.assert_allclose(plant.f(0.0, y, e), [e - 0.7], atol=1e-15)
    assert plant.q(0.0, y, e) == pytest.approx(e - 0.7)


def test_reduced_degree_three_drift():
    """r=3, a=(3,2): q = a_2 xi_2 + a_1 (e - a_2 xi_1 - a_1 xi_2)."""
    plant = reduce_relative_degree(0, 3, (3.0, 2.0))
    y = np.array([0.5, -1.2])
    e = 0.9
    xi3 = e - 2.0 * y[0] - 3.0 * y[1]
    want = 2.0 * y[1] + 3.0 * xi3
    assert plant.q(0.0, y, e) == pytest.approx(want, rel=1e-13)
    dy = plant.f(0.0, y, e)
    np.testing.assert_allclose(dy, [y[1], xi3], rtol=1e-13)


def _rk4(rhs, s0, dt, n):
    s = np.asarray(s0, dtype=float)
    out = np.empty((n + 1, len(s)))
    out[0] = s
    for i in range(n):
        t = i * dt
        k1 = rhs(t, s)
        k2 = rhs(t + dt / 2, s + dt / 2 * k1)
        k3 = rhs(t + dt / 2, s + dt / 2 * k2)
        k4 = rhs(t + dt, s + dt * k3)
        s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = s
    return out


def test_reduction_preserves_chain_solutions():
    """Original degree-3 chain and its reduced form agree on xi_1.

    Both systems are driven open loop by the same input; the reduction
    is an exact change of coordinates, so xi_1 trajectories must match
    to integrator accuracy over 10 s.
    """
    r, a = 3, (3.0, 2.0)

    def q0(t, chi, xi, xi_r):
        return np.sin(TWO_PI * t) + 0.1 * xi[0] - 0.2 * xi_r

    def u(t):
        return np.sin(t) + 0.5 * np.cos(2.0 * t)

    def chain_rhs(t, s):
        return np.array([s[1], s[2], q0(t, np.empty(0), s[:2], s[2]) + u(t)])

    plant = reduce_relative_degree(0, r, a, q0=q0)
    red = NormalFormReduction.build(r, a)

    def reduced_rhs(t, s):
        y, e = s[:2], s[2]
        dy = plant.f(t, y, e)
        de = plant.q(t, y, e) + u(t)
        return np.append(dy, de)

    xi0 = np.array([0.3, -0.2, 0.5])
    s0 = np.append(xi0[:2], red.error_from_chain(xi0))
    dt, n = 1e-3, 10_000
    chain = _rk4(chain_rhs, xi0, dt, n)
    reduced = _rk4(reduced_rhs, s0, dt, n)
    assert np.max(np.abs(chain[:, 0] - reduced[:, 0])) < 1e-6


def test_reduction_with_internal_dynamics():
    """chi block rides along: dchi/dt = f0(t, chi, xi_1)."""
    def f0(t, chi, xi1):
        return np.array([-chi[0] + xi1])

    plant = reduce_relative_degree(1, 2, (2.0,), f0=f0)
    assert plant.n == 2
    x = np.array([0.5, 1.5])      # (chi, xi_1)
    dx = plant.f(0.0, x, 0.25)
    assert dx[0] == pytest.approx(-0.5 + 1.5)
    assert dx[1] == pytest.approx(0.25 - 2.0 * 1.5)


def test_reduction_jitted_when_maps_are_jitted():
    from numba import njit

    @njit(cache=False)
    def q0(t, chi, xi, xir):
        return np.sin(TWO_PI * t)

    plant = reduce_relative_degree(0, 2, (1.0,), q0=q0)
    from periodreg.plants import _is_dispatcher
    assert _is_dispatcher(plant.f) and _is_dispatcher(plant.q)
    # q0 contributes sin(2 pi t); the a_1 xi_2 term vanishes at this state
    assert plant.q(0.25, np.array([0.0]), 0.0) == pytest.approx(1.0)
