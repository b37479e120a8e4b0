"""Construction of the internal-model regulator.

The regulator is the linear law

    dz/dt = Phi z + Gamma e,        u = -sigma*e + mu * M^T N_z (z - M e),

where Phi stacks a pure integrator with ``n_o`` harmonic oscillators at
frequencies ``omega_l = l*omega_hat``:

    Phi = blkdiag(0, [[0, w1], [-w1, 0]], ..., [[0, w_no], [-w_no, 0]]),

``M`` selects the integrator slot and the first row of every oscillator
block, ``N_z = diag(n_z0, n_z1, n_z1, ..., n_zno, n_zno)`` carries a
summable weight sequence, and ``Gamma = -(Phi + sigma*I) M``.  State
dimension is ``2*n_o + 1``; slot 0 is the integrator and oscillator ``l``
occupies slots ``2l-1`` and ``2l``.

The weight sequence must decay fast enough that the stability margins of
the closed loop do not degrade as oscillators are added; the admissibility
conditions are checked by :meth:`CoefficientSequence.violations`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "SequenceError",
    "CoefficientSequence",
    "RegulatorConfig",
    "OscillatorBank",
    "RegulatorState",
    "build_bank",
    "make_bank",
    "controller_rhs",
    "control_output",
    "zeta_coordinates",
]


class SequenceError(ValueError):
    """A coefficient sequence violates the admissibility conditions."""


@dataclass(frozen=True)
class CoefficientSequence:
    """Weights n_z0 .. n_z(n_o) attached to the integrator and oscillators.

    Admissible sequences are strictly positive, strictly decreasing,
    have ``l*n_zl`` non-increasing over l >= 1 and ``l^2*n_zl``
    non-decreasing over l >= 0.  (By transitivity the adjacent-pair form
    of the last two checks implies the full pairwise families.)  Overall
    summability cannot be decided from a finite prefix: for canonical
    sequences it holds by construction, for explicit lists it is the
    caller's responsibility.

    Parameters
    ----------
    values : tuple of float
        The weights, ``values[l]`` = n_zl.
    epsilon : float or None
        Set when the sequence follows the canonical rule
        ``n_z0 = 2, n_zl = 1/l^(1+epsilon)``; None for explicit lists.
    """

    values: tuple
    epsilon: Optional[float] = None

    @classmethod
    def canonical(cls, n_o, epsilon=0.5):
        """Canonical sequence n_z0=2, n_zl=1/l^(1+eps), eps in (0, 1]."""
        if not 0.0 < epsilon <= 1.0:
            raise SequenceError(f"epsilon must lie in (0, 1], got {epsilon}")
        if n_o < 0:
            raise SequenceError(f"n_o must be >= 0, got {n_o}")
        vals = (2.0,) + tuple(1.0 / l ** (1.0 + epsilon) for l in range(1, n_o + 1))
        return cls(values=vals, epsilon=epsilon)

    @classmethod
    def explicit(cls, values):
        """Wrap an explicit weight list (validated on use, not here)."""
        return cls(values=tuple(float(v) for v in values), epsilon=None)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, l):
        return self.values[l]

    def extended(self, count):
        """The first ``count`` weights, growing a canonical tail if needed."""
        if count <= len(self.values):
            return self.values[:count]
        if self.epsilon is None:
            raise SequenceError(
                f"explicit sequence has {len(self.values)} weights, {count} requested"
            )
        tail = tuple(
            1.0 / l ** (1.0 + self.epsilon) for l in range(len(self.values), count)
        )
        return self.values + tail

    def partial_sum(self):
        return float(sum(self.values))

    def violations(self):
        """List of human-readable admissibility violations (empty = pass)."""
        v = self.values
        out = []
        for l, val in enumerate(v):
            if not val > 0.0:
                out.append(f"n_z{l} = {val} is not strictly positive")
        for l in range(len(v) - 1):
            if not v[l + 1] < v[l]:
                out.append(f"not strictly decreasing at l={l}: n_z{l+1}={v[l+1]} >= n_z{l}={v[l]}")
        for l in range(1, len(v) - 1):
            if l * v[l] < (l + 1) * v[l + 1] - 1e-15 * abs(l * v[l]):
                out.append(f"l*n_zl increases from l={l} to {l+1}")
        for l in range(len(v) - 1):
            if l * l * v[l] > (l + 1) ** 2 * v[l + 1] + 1e-15 * abs(l * l * v[l]):
                out.append(f"l^2*n_zl decreases from l={l} to {l+1}")
        if self.epsilon is not None:
            if abs(v[0] - 2.0) > 1e-12:
                out.append(f"canonical sequence must start at n_z0=2, got {v[0]}")
        return out

    def validate(self):
        problems = self.violations()
        if problems:
            raise SequenceError("; ".join(problems))


@dataclass(frozen=True)
class RegulatorConfig:
    """Gains and frequency layout of the regulator."""

    n_o: int                      # oscillator count, excluding the integrator
    sigma: float                  # high-gain coefficient of -sigma*e
    omega_hat: float              # base frequency, rad/s
    coefficients: CoefficientSequence
    mu: float = 1.0               # forwarding gain on the oscillator coupling

    def __post_init__(self):
        if self.n_o < 0:
            raise ValueError(f"n_o must be >= 0, got {self.n_o}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.mu <= 0.0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.omega_hat <= 0.0:
            raise ValueError(f"omega_hat must be > 0, got {self.omega_hat}")
        if len(self.coefficients) != self.n_o + 1:
            raise ValueError(
                f"need {self.n_o + 1} coefficients for n_o={self.n_o}, "
                f"got {len(self.coefficients)}"
            )

    @classmethod
    def canonical(cls, n_o, sigma, omega_hat=2.0 * np.pi, mu=1.0, epsilon=0.5):
        return cls(
            n_o=n_o,
            sigma=sigma,
            omega_hat=omega_hat,
            coefficients=CoefficientSequence.canonical(n_o, epsilon),
            mu=mu,
        )

    @property
    def omegas(self):
        """Oscillator frequencies l*omega_hat, l = 1..n_o (rad/s)."""
        return self.omega_hat * np.arange(1, self.n_o + 1, dtype=float)

    @property
    def dim(self):
        return 2 * self.n_o + 1


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OscillatorBank:
    """Materialized regulator matrices plus the structured data behind them.

    ``phi``, ``n_z`` (the diagonal weight matrix), ``m_vec`` and ``gamma``
    are the dense objects used for verification and oracles; the hot
    integration path works from ``omegas`` and ``nz`` (the weight vector)
    at O(n_o) per evaluation instead of touching the dense matrices.
    """

    omegas: np.ndarray            # (n_o,) oscillator frequencies, rad/s
    nz: np.ndarray                # (n_o+1,) weights n_z0..n_zno
    sigma: float
    phi: np.ndarray = field(repr=False, default=None)
    n_z: np.ndarray = field(repr=False, default=None)
    m_vec: np.ndarray = field(repr=False, default=None)
    gamma: np.ndarray = field(repr=False, default=None)

    @property
    def n_o(self):
        return len(self.omegas)

    @property
    def dim(self):
        return 2 * len(self.omegas) + 1


def make_bank(omegas, nz, sigma):
    """Assemble an OscillatorBank from raw arrays, no admissibility checks.

    Exists so pathological banks (duplicate frequencies, bad weights) can
    be built deliberately for certification tests; normal construction
    goes through :func:`build_bank`.
    """
    omegas = np.asarray(omegas, dtype=float)
    nz = np.asarray(nz, dtype=float)
    if len(nz) != len(omegas) + 1:
        raise ValueError(f"need {len(omegas) + 1} weights for {len(omegas)} oscillators")
    n_o = len(omegas)
    k = 2 * n_o + 1

    phi = np.zeros((k, k))
    diag = np.empty(k)
    m = np.zeros(k)
    diag[0] = nz[0]
    m[0] = 1.0
    for l in range(1, n_o + 1):
        w = omegas[l - 1]
        phi[2 * l - 1, 2 * l] = w
        phi[2 * l, 2 * l - 1] = -w
        diag[2 * l - 1] = nz[l]
        diag[2 * l] = nz[l]
        m[2 * l - 1] = 1.0
    gamma = -(phi + sigma * np.eye(k)) @ m

    return OscillatorBank(
        omegas=_readonly(omegas),
        nz=_readonly(nz),
        sigma=float(sigma),
        phi=_readonly(phi),
        n_z=_readonly(np.diag(diag)),
        m_vec=_readonly(m),
        gamma=_readonly(gamma),
    )


def build_bank(config):
    """Build the regulator matrices for a validated configuration.

    Raises SequenceError if the coefficient sequence is inadmissible;
    gain positivity is enforced by RegulatorConfig itself.
    """
    config.coefficients.validate()
    return make_bank(config.omegas, np.asarray(config.coefficients.values), config.sigma)


@dataclass
class RegulatorState:
    """Mutable controller state z (one per running simulation)."""

    z: np.ndarray

    @classmethod
    def zero(cls, bank):
        return cls(z=np.zeros(bank.dim))


def _check_dim(bank, z):
    z = np.asarray(z, dtype=float)
    if z.shape != (bank.dim,):
        raise ValueError(f"controller state has shape {z.shape}, expected ({bank.dim},)")
    return z


def controller_rhs(bank, z, e):
    """Right-hand side Phi z + Gamma e, evaluated blockwise in O(n_o)."""
    z = _check_dim(bank, z)
    dz = np.empty_like(z)
    dz[0] = -bank.sigma * e
    om = bank.omegas
    for l in range(1, len(om) + 1):
        w = om[l - 1]
        dz[2 * l - 1] = w * z[2 * l] - bank.sigma * e
        dz[2 * l] = -w * z[2 * l - 1] + w * e
    return dz


def control_output(bank, config, z, e):
    """Control law u = -sigma*e + mu * M^T N_z (z - M e)."""
    z = _check_dim(bank, z)
    nz = bank.nz
    acc = nz[0] * (z[0] - e)
    for l in range(1, len(nz)):
        acc += nz[l] * (z[2 * l - 1] - e)
    return -config.sigma * e + config.mu * acc


def zeta_coordinates(bank, z, e):
    """Shifted coordinates zeta = z - M e used in the stability analysis."""
    z = _check_dim(bank, z)
    return z - bank.m_vec * e
