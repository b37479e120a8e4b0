"""T-periodic plants in normal form: dx/dt = f(t,x,e), de/dt = q(t,x,e) + u.

Three plant families ship with the package:

* :func:`example_plant` -- the 2-state nonlinear benchmark with a mix of
  harmonics 1..4 in the drift, locally stable but unstable far from the
  origin (the x2^2 term).
* :func:`linear_test_plant` -- the scalar loop de/dt = u + q(t) with no
  internal state, used for Bode comparisons and integrator-order checks.
* :func:`reduce_relative_degree` -- folds a relative-degree-r chain into
  this r=1 normal form through the filtered-error change of coordinates
  e = xi_r + a_1 xi_{r-1} + ... + a_{r-1} xi_1.

Plant right-hand sides are plain callables ``f(t, x, e) -> ndarray`` and
``q(t, x, e) -> float``.  The bundled plants ship numba-jitted callables
so the simulator can compile its inner loop around them; foreign Python
callables work too and take the interpreter path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit

__all__ = [
    "PlantModel",
    "NormalFormReduction",
    "example_plant",
    "linear_test_plant",
    "reduce_relative_degree",
    "harmonic_signal",
]


@dataclass(frozen=True, eq=False)
class PlantModel:
    """A T-periodic plant in normal form with scalar regulated output e."""

    n: int                        # dimension of the internal state x
    period: float                 # T, seconds
    f: Callable                   # (t, x, e) -> dx/dt, shape (n,)
    q: Callable                   # (t, x, e) -> drift term in de/dt
    name: str = ""


_SQRT3 = np.sqrt(3.0)
_TWO_PI = 2.0 * np.pi


@njit(cache=True)
def _f_benchmark(t, x, e):
    out = np.empty(2)
    out[0] = (
        -0.2 * x[0] + _SQRT3 * x[1] + 0.1 * np.sin(x[1]) + np.sin(_TWO_PI * t)
    )
    out[1] = (
        -_SQRT3 * x[0] - x[1] + 0.1 * x[1] * x[1] + x[1] * e
        + np.cos(2.0 * _TWO_PI * t) * (1.0 + np.sin(_TWO_PI * t))
    )
    return out


@njit(cache=True)
def _q_benchmark(t, x, e):
    c = np.cos(_TWO_PI * t)
    return 1.0 + x[0] + np.arctan(e * x[1]) + c + c * c + c ** 3 + c ** 4


def example_plant():
    """The 2-state nonlinear benchmark plant, period T = 1 s.

    f and q are hard-coded with exact literals (1/5, sqrt(3), 1/10, the
    cos^k harmonics) so there is no transcription drift between runs.
    """
    return PlantModel(n=2, period=1.0, f=_f_benchmark, q=_q_benchmark, name="benchmark")


@njit(cache=True)
def _f_empty(t, x, e):
    return np.empty(0)


def linear_test_plant(q_signal, period=1.0):
    """Scalar plant de/dt = u + q(t) with no internal state (n = 0).

    ``q_signal`` maps t to the exogenous drift.  If it is numba-jitted the
    plant q is jitted too and the simulator keeps its fast path.
    """
    if _is_dispatcher(q_signal):

        @njit(cache=False)
        def q(t, x, e):
            return q_signal(t)

    else:

        def q(t, x, e):
            return q_signal(t)

    return PlantModel(n=0, period=float(period), f=_f_empty, q=q, name="linear")


def _is_dispatcher(fn):
    # numba Dispatcher without importing dispatcher internals
    return hasattr(fn, "py_func") and hasattr(fn, "nopython_signatures")


def harmonic_signal(dc=0.0, sin_amps=(), cos_amps=(), period=1.0):
    """Jitted T-periodic drift  dc + sum_k A_k sin(k w t) + B_k cos(k w t).

    Amplitude k of each tuple rides harmonic k of the base frequency
    2*pi/period.  This is the serializable signal family the scenario
    files use for the linear and chain plants.
    """
    sin_a = np.asarray(sin_amps, dtype=float)
    cos_a = np.asarray(cos_amps, dtype=float)
    w0 = _TWO_PI / float(period)

    @njit(cache=False)
    def sig(t):
        acc = dc
        for k in range(sin_a.shape[0]):
            acc += sin_a[k] * np.sin((k + 1) * w0 * t)
        for k in range(cos_a.shape[0]):
            acc += cos_a[k] * np.cos((k + 1) * w0 * t)
        return acc

    return sig


@dataclass(frozen=True, eq=False)
class NormalFormReduction:
    """Change of coordinates folding a degree-r chain into normal form.

    With y = (xi_1 .. xi_{r-1}) and e = xi_r + sum_i a_i xi_{r-i}, the
    chain becomes dy/dt = A y + B e where A is the companion matrix of
    lambda^{r-1} + a_1 lambda^{r-2} + ... + a_{r-1}; that polynomial being
    Hurwitz is exactly what makes the hidden y-dynamics stable, so it is
    validated at construction.
    """

    r: int
    a_coeffs: tuple               # (a_1, ..., a_{r-1})
    A: np.ndarray                 # (r-1, r-1) companion matrix
    B: np.ndarray                 # (r-1,)    input column, last slot 1
    C: np.ndarray                 # (r-1,)    selects xi_1

    @classmethod
    def build(cls, r, a_coeffs):
        if r < 2:
            raise ValueError(f"relative degree must be >= 2, got {r}")
        a = tuple(float(c) for c in a_coeffs)
        if len(a) != r - 1:
            raise ValueError(f"need {r - 1} coefficients for r={r}, got {len(a)}")
        roots = np.roots(np.concatenate(([1.0], a)))
        if roots.size and np.max(roots.real) >= 0.0:
            raise ValueError(
                "filter polynomial is not Hurwitz: roots " + str(np.sort_complex(roots))
            )
        m = r - 1
        A = np.zeros((m, m))
        for i in range(m - 1):
            A[i, i + 1] = 1.0
        # row for d(xi_{r-1})/dt = xi_r = e - sum_j a_{r-j} xi_j
        for j in range(1, m + 1):
            A[m - 1, j - 1] = -a[r - j - 1]
        B = np.zeros(m)
        B[m - 1] = 1.0
        C = np.zeros(m)
        C[0] = 1.0
        A.setflags(write=False)
        B.setflags(write=False)
        C.setflags(write=False)
        return cls(r=r, a_coeffs=a, A=A, B=B, C=C)

    def error_from_chain(self, xi):
        """e = xi_r + sum_i a_i xi_{r-i} for a full chain state (xi_1..xi_r)."""
        xi = np.asarray(xi, dtype=float)
        e = xi[-1]
        for i in range(1, self.r):
            e += self.a_coeffs[i - 1] * xi[self.r - i - 1]
        return e


def reduce_relative_degree(chi_dim, r, a_coeffs, f0=None, q0=None, period=1.0):
    """Fold a relative-degree-r chain into an equivalent n=1-degree plant.

    The original system is

        dchi/dt = f0(t, chi, xi_1),   dxi_i/dt = xi_{i+1},
        dxi_r/dt = q0(t, chi, xi, xi_r') + u,

    and the reduced plant has state x = (chi, xi_1..xi_{r-1}) with

        f(t, x, e) = ( f0(t, chi, xi_1) ; A y + B e )
        q(t, x, e) = q0(t, chi, xi, xi_r) + sum_{i=2}^{r-1} a_i xi_{r-i+1}
                     + a_1 (e - sum_j a_{r-j} xi_j)

    where xi_r is recovered as e - sum_j a_{r-j} xi_j.  ``f0`` has
    signature (t, chi, xi_1) -> dchi/dt and ``q0`` has signature
    (t, chi, xi, xi_r) -> float; pass None for identically-zero maps.
    When f0/q0 are numba dispatchers (or None) the composite plant is
    jitted.

    Raises ValueError when the filter polynomial
    lambda^{r-1} + a_1 lambda^{r-2} + ... + a_{r-1} is not Hurwitz.
    """
    red = NormalFormReduction.build(r, a_coeffs)
    m = r - 1
    n = chi_dim + m
    a = np.array(red.a_coeffs)          # a[i-1] = a_i
    a_rev = a[::-1].copy()              # a_rev[j-1] = a_{r-j}, coefficient on xi_j

    jit_ok = (f0 is None or _is_dispatcher(f0)) and (q0 is None or _is_dispatcher(q0))

    if jit_ok:
        if f0 is None:
            f0 = _zero_f0
        if q0 is None:
            q0 = _zero_q0
        f = _jit_reduced_f(f0, chi_dim, m, a_rev)
        q = _jit_reduced_q(q0, chi_dim, m, a, a_rev)
    else:
        f0_py = f0 if f0 is not None else (lambda t, chi, xi1: np.empty(0))
        q0_py = q0 if q0 is not None else (lambda t, chi, xi, xir: 0.0)

        def f(t, x, e):
            chi = x[:chi_dim]
            y = x[chi_dim:]
            out = np.empty(n)
            out[:chi_dim] = f0_py(t, chi, y[0] if m else e)
            out[chi_dim : n - 1] = y[1:]
            out[n - 1] = e - float(a_rev @ y)
            return out

        def q(t, x, e):
            chi = x[:chi_dim]
            y = x[chi_dim:]
            xi_r = e - float(a_rev @ y)
            acc = q0_py(t, chi, y, xi_r)
            for i in range(2, m + 1):
                acc += a[i - 1] * y[m - i + 1]
            return acc + a[0] * xi_r

    return PlantModel(n=n, period=float(period), f=f, q=q, name="chain")


@njit(cache=True)
def _zero_f0(t, chi, xi1):
    return np.zeros(0)


@njit(cache=True)
def _zero_q0(t, chi, xi, xir):
    return 0.0


def _jit_reduced_f(f0, chi_dim, m, a_rev):
    n = chi_dim + m

    @njit(cache=False)
    def f(t, x, e):
        chi = x[:chi_dim]
        y = x[chi_dim:]
        out = np.empty(n)
        dchi = f0(t, chi, y[0])
        for i in range(chi_dim):
            out[i] = dchi[i]
        for i in range(m - 1):
            out[chi_dim + i] = y[i + 1]
        s = 0.0
        for j in range(m):
            s += a_rev[j] * y[j]
        out[n - 1] = e - s
        return out

    return f


def _jit_reduced_q(q0, chi_dim, m, a, a_rev):
    @njit(cache=False)
    def q(t, x, e):
        chi = x[:chi_dim]
        y = x[chi_dim:]
        s = 0.0
        for j in range(m):
            s += a_rev[j] * y[j]
        xi_r = e - s
        acc = q0(t, chi, y, xi_r)
        for i in range(2, m + 1):
            acc += a[i - 1] * y[m - i + 1]
        return acc + a[0] * xi_r

    return q
