"""Closed-form frequency-domain quantities of the regulator.

Central object: the gain of the shifted oscillator subsystem

    dzeta/dt = (Phi - mu M M^T N_z) zeta - M v,

measured as  T(w) = zeta* N_z zeta / |v|^2  on the imaginary axis.  Its
rational closed form (with w_0 = 0, w_l = l*omega_hat) is

    T(w) = sum_l n_zl (w^2 + w_l^2) / (w_l^2 - w^2)^2
           -------------------------------------------
           1 + mu^2 [ sum_l n_zl w / (w_l^2 - w^2) ]^2 ,

whose singularities at w = w_l are removable: T(w_l) = 2/(mu^2 n_zl) for
l >= 1, and T(0) = 1/(mu^2 n_z0) (the integrator slot is scalar, so the
factor 2 of the oscillator blocks does not apply at DC).

The production evaluator multiplies numerator and denominator by
(w_l*^2 - w^2)^2 for the nearest resonance l*, which removes the
singular factor exactly and is numerically stable on the whole axis;
the literal rational and product (polynomial) forms are kept as
module-private functions because tests cross-check all three against
each other and against the resolvent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .internal_model import CoefficientSequence

__all__ = [
    "TransferCurve",
    "BodeCurve",
    "transfer_gain",
    "transfer_gain_normalized",
    "transfer_gain_resolvent",
    "bound_constants",
    "transfer_curve",
    "bode_linear",
    "DB_FLOOR",
]

DB_FLOOR = -160.0


def _gain_core(nz, mu, x, c):
    """T at normalized frequency x, with denominator constant c = omega_hat^2.

    Evaluates the closed form with numerator and denominator multiplied
    by (l*^2 - x^2)^2, l* the in-range integer nearest |x|; exact and
    singularity-free.  c=1 gives the dimensionless normalized curve.
    Accepts a scalar or an array of frequencies (vectorized over grids).
    """
    n_o = len(nz) - 1
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    l = np.clip(np.rint(x), 0, n_o).astype(int)

    m = np.arange(n_o + 1, dtype=float)
    x2 = x * x
    dm = m * m - x2[:, None]                      # (points, n_o+1)
    picked = m[None, :] == l[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = nz / dm
        t2 = nz * (x2[:, None] + m * m) / (dm * dm)
    t1[picked] = 0.0                              # leave-one-out sums
    t2[picked] = 0.0
    s1 = t1.sum(axis=1)
    s2 = t2.sum(axis=1)

    lf = l.astype(float)
    nzl = nz[l]
    d = lf * lf - x2
    # l* = 0: factor x^2 out of both sides so the DC limit is explicit
    num = np.where(l == 0, nz[0] + x2 * s2, nzl * (x2 + lf * lf) + d * d * s2)
    den = np.where(
        l == 0,
        c * x2 + mu * mu * (nz[0] - x2 * s1) ** 2,
        c * d * d + mu * mu * x2 * (nzl + d * s1) ** 2,
    )
    out = num / den
    return float(out[0]) if scalar else out


def transfer_gain(config, omega):
    """T(omega) in physical units for a regulator configuration.

    At omega = l*omega_hat the removable-singularity value is returned
    (2/(mu^2 n_zl) for l >= 1, 1/(mu^2 n_z0) at omega = 0).
    """
    nz = np.asarray(config.coefficients.values, dtype=float)
    x = omega / config.omega_hat
    return _gain_core(nz, config.mu, x, config.omega_hat ** 2)


def transfer_gain_normalized(nz, mu, x):
    """Dimensionless T(x) with oscillators at the integers (omega_hat = 1)."""
    return _gain_core(np.asarray(nz, dtype=float), mu, x, 1.0)


def transfer_gain_resolvent(bank, mu, omega):
    """Oracle for transfer_gain via a complex resolvent solve.

    Solves (i w I - Phi + mu Nh M M^T Nh) g = Nh M with Nh = N_z^{1/2}
    and returns |g|^2 = zeta* N_z zeta / |v|^2.  Independent of the
    closed-form algebra; used to cross-check it.
    """
    k = bank.dim
    nh = np.sqrt(np.diag(bank.n_z))
    m = bank.m_vec
    A = (
        1j * omega * np.eye(k)
        - bank.phi
        + mu * np.outer(nh * m, nh * m)
    )
    g = np.linalg.solve(A, nh * m)
    return float(np.real(np.vdot(g, g)))


# literal textbook forms, kept for cross-checking ----------------------------

def _rational_form(nz, mu, omega_hat, omega):
    """Literal rational form; singular at omega = l*omega_hat."""
    n_o = len(nz) - 1
    wl = omega_hat * np.arange(n_o + 1, dtype=float)
    d = wl * wl - omega * omega
    num = float(np.sum(nz * (omega * omega + wl * wl) / (d * d)))
    den = 1.0 + mu * mu * float(np.sum(nz * omega / d)) ** 2
    return num / den


def _polynomial_form(nz, mu, omega_hat, omega):
    """Literal product form, evaluated with log-domain products.

    Equivalent to the rational form after clearing denominators;
    log-domain evaluation keeps the products representable for large
    n_o, where the raw products overflow double precision.
    """
    n_o = len(nz) - 1
    wl = omega_hat * np.arange(n_o + 1, dtype=float)
    d = wl * wl - omega * omega
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(d))
    signs = np.sign(d)
    total_log = float(np.sum(logs))
    total_sign = float(np.prod(signs))
    # leave-one-out products
    loo_log = total_log - logs
    loo_sign = total_sign * signs      # sign(d_m) * sign(prod) = sign(prod excluding m)
    ref = float(np.max(loo_log))
    p = loo_sign * np.exp(loo_log - ref)
    num = float(np.sum((wl * wl + omega * omega) * nz * p * p))
    den_poly = (total_sign * np.exp(total_log - ref)) ** 2
    den_sum = float(np.sum(nz * p))
    den = den_poly + mu * mu * omega * omega * den_sum * den_sum
    return num / den


def bound_constants(coeffs, mu):
    """Parabolic envelope constants (kappa0, kappa1) with T(x) <= k0 + k1 x^2.

    kappa0 = (7/2) n_z0 and kappa1 = 4 n_z0 / varpi^2 + 512/(mu^2 n_z1),
    where varpi = 1/(48 (a + 2)), a = max{(2 + sqrt(2)) S, 25/8} and
    S = n_z0/n_z1 + n_z0/(3 n_z2) + 10/3.  Deliberately loose; the point
    is that the envelope is independent of n_o.
    """
    if isinstance(coeffs, CoefficientSequence):
        vals = coeffs.extended(3)
    else:
        vals = tuple(coeffs)
    if len(vals) < 3:
        raise ValueError("bound constants need n_z0, n_z1, n_z2")
    nz0, nz1, nz2 = float(vals[0]), float(vals[1]), float(vals[2])
    s = nz0 / nz1 + nz0 / (3.0 * nz2) + 10.0 / 3.0
    a = max((2.0 + np.sqrt(2.0)) * s, 25.0 / 8.0)
    varpi = 1.0 / (48.0 * (a + 2.0))
    kappa0 = 3.5 * nz0
    kappa1 = 4.0 * nz0 / varpi ** 2 + 512.0 / (mu * mu * nz1)
    return kappa0, kappa1


@dataclass(eq=False)
class TransferCurve:
    """Normalized gain samples with their parabolic bound constants."""

    x_grid: np.ndarray
    values: np.ndarray
    kappa0: float
    kappa1: float

    def bound_violations(self):
        """Indices where T(x) exceeds kappa0 + kappa1 x^2."""
        envelope = self.kappa0 + self.kappa1 * self.x_grid ** 2
        return np.nonzero(self.values > envelope)[0]

    @property
    def bound_ok(self):
        return len(self.bound_violations()) == 0

    def to_csv(self, path):
        data = np.column_stack([self.x_grid, self.values])
        np.savetxt(path, data, fmt="%.17g", delimiter=",",
                   header="x,gain", comments="")


def transfer_curve(coeffs, mu, x_grid):
    """Sample the normalized gain on a grid and attach bound constants.

    ``coeffs`` is a CoefficientSequence; its length sets n_o (constants
    extend a canonical tail when the truncation is shorter than 3).
    """
    nz = np.asarray(coeffs.values, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    values = _gain_core(nz, mu, x_grid, 1.0)
    kappa0, kappa1 = bound_constants(coeffs, mu)
    return TransferCurve(x_grid=x_grid, values=values, kappa0=kappa0, kappa1=kappa1)


@dataclass(eq=False)
class BodeCurve:
    """Magnitude of the closed-loop map q -> e on a frequency grid."""

    omega_grid: np.ndarray        # rad/s
    magnitude: np.ndarray
    magnitude_db: np.ndarray      # floored at DB_FLOOR
    label: str = ""

    def to_csv(self, path):
        data = np.column_stack([self.omega_grid, self.magnitude, self.magnitude_db])
        np.savetxt(path, data, fmt="%.17g", delimiter=",",
                   header="omega_rad_s,magnitude,magnitude_db", comments="")


def _db(mag):
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag)
    return np.maximum(db, DB_FLOOR)


def bode_linear(controller, omega_grid):
    """Closed-loop |e(iw)/q(iw)| for the scalar plant de/dt = u + q(t).

    ``controller`` is either a float sigma (high-gain feedback, magnitude
    1/sqrt(w^2 + sigma^2)) or a RegulatorConfig (internal model; the
    high-gain magnitude times the notch factor, exactly 0 at each
    embedded frequency l*omega_hat including DC).
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    if np.isscalar(controller) or isinstance(controller, float) or isinstance(controller, int):
        sigma = float(controller)
        mag = 1.0 / np.sqrt(omega_grid ** 2 + sigma ** 2)
        return BodeCurve(omega_grid=omega_grid, magnitude=mag,
                         magnitude_db=_db(mag), label="high_gain")

    config = controller
    sigma, mu = config.sigma, config.mu
    nz = np.asarray(config.coefficients.values, dtype=float)
    wl = config.omega_hat * np.arange(config.n_o + 1, dtype=float)
    mag = np.empty(len(omega_grid))
    for i, w in enumerate(omega_grid):
        base = 1.0 / np.sqrt(w * w + sigma * sigma)
        d = wl * wl - w * w
        with np.errstate(divide="ignore"):
            terms = nz / d
        if not np.all(np.isfinite(terms)) or (w == 0.0):
            mag[i] = 0.0          # exactly on a blocking zero
            continue
        s = float(np.sum(terms))
        mag[i] = base / np.sqrt(1.0 + mu * mu * (w * s) ** 2)
    return BodeCurve(omega_grid=omega_grid, magnitude=mag,
                     magnitude_db=_db(mag), label="internal_model")
