"""Deterministic fixed-step closed-loop integration.

The coupled system

    dx/dt = f(t, x, e)
    de/dt = q(t, x, e) + u
    dz/dt = Phi z + Gamma (e + v)
    u     = -sigma*e + mu * M^T N_z (z - M (e + v))

is advanced with classical fixed-step RK4; the measurement noise v is
held constant across the four stages of a step.  Without a bank the loop
degenerates to pure high-gain feedback u = -sigma*(e + v).

Two execution paths produce identical arithmetic: a numba kernel compiled
per (f, q) plant pair (used when the plant ships jitted callables) and a
plain-Python loop built on :func:`step_rk4`.  Their agreement is part of
the test suite, so the fast path is not a second source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit
from scipy import signal

from .plants import _is_dispatcher

__all__ = [
    "SimConfig",
    "NoiseModel",
    "Trajectory",
    "SimulationOverflowError",
    "step_rk4",
    "run",
    "make_noise",
]

OVERFLOW_LIMIT = 1e12


class SimulationOverflowError(RuntimeError):
    """State left the trust region |state| <= 1e12 (plant is unstable there)."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"state overflow at t = {t:.6g} s (|state| > {OVERFLOW_LIMIT:g})")


@dataclass
class SimConfig:
    dt: float = 1e-4              # integration step, s
    t_end: float = 150.0          # horizon, s
    x0: tuple = ()                # initial plant state
    e0: float = 0.0               # initial regulated error
    z0: Optional[np.ndarray] = None   # initial controller state, zeros when None
    record_stride: int = 10       # keep one sample every this many steps
    seed: int = 0                 # noise reproducibility

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_end < self.dt:
            raise ValueError(f"t_end must be >= dt, got {self.t_end}")
        if self.record_stride < 1:
            raise ValueError(f"record_stride must be >= 1, got {self.record_stride}")


@dataclass
class NoiseModel:
    """Band-limited measurement noise: white Gaussian -> high-pass filter.

    The white sequence has variance power/dt (one draw per integration
    step) and is coloured by the bilinear-transform discretization of
    H(s) = s^2 / (s^2 + 3s + 2) at the simulation rate.
    """

    power: float = 0.0            # white-noise power (variance * s)
    enabled: bool = False

    NUM = (1.0, 0.0, 0.0)         # continuous-time H(s) numerator: s^2
    DEN = (1.0, 3.0, 2.0)         # denominator: s^2 + 3s + 2

    @classmethod
    def off(cls):
        return cls(power=0.0, enabled=False)

    @classmethod
    def band_limited(cls, power):
        if power < 0.0:
            raise ValueError(f"noise power must be >= 0, got {power}")
        return cls(power=float(power), enabled=True)

    def discretize(self, dt):
        """(b, a) IIR coefficients of H at sample rate 1/dt."""
        return signal.bilinear(self.NUM, self.DEN, fs=1.0 / dt)


def make_noise(power, dt, n_steps, seed):
    """Sampled noise series v[0..n_steps-1], deterministic per seed."""
    if power < 0.0:
        raise ValueError(f"noise power must be >= 0, got {power}")
    if power == 0.0:
        return np.zeros(n_steps)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n_steps) * np.sqrt(power / dt)
    b, a = NoiseModel(power=power, enabled=True).discretize(dt)
    return signal.lfilter(b, a, white)


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled closed-loop record."""

    times: np.ndarray             # (samples,)
    x: np.ndarray                 # (samples, n)
    e: np.ndarray                 # (samples,)
    z: np.ndarray                 # (samples, 2*n_o+1), zero columns when no bank
    u: np.ndarray                 # (samples,)
    v: np.ndarray                 # (samples,) noise held during the sample's step

    @property
    def dt_record(self):
        return self.times[1] - self.times[0] if len(self.times) > 1 else 0.0

    def to_csv(self, path):
        n = self.x.shape[1]
        k = self.z.shape[1]
        header = ",".join(
            ["t", "e", "u", "v"]
            + [f"x{i + 1}" for i in range(n)]
            + [f"z{i + 1}" for i in range(k)]
        )
        data = np.column_stack([self.times, self.e, self.u, self.v, self.x, self.z])
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")


# ---------------------------------------------------------------------------
# controller arithmetic shared by both execution paths

@njit(cache=True)
def _u_law(nz, mu, sigma, z, e, v, use_bank):
    if not use_bank:
        return -sigma * (e + v)
    meas = e + v
    acc = nz[0] * (z[0] - meas)
    for l in range(1, nz.shape[0]):
        acc += nz[l] * (z[2 * l - 1] - meas)
    return -sigma * e + mu * acc


@njit(cache=True)
def _z_rhs(omegas, sigma, z, drive, out):
    if z.shape[0] == 0:
        return
    out[0] = -sigma * drive
    for l in range(1, omegas.shape[0] + 1):
        w = omegas[l - 1]
        out[2 * l - 1] = w * z[2 * l] - sigma * drive
        out[2 * l] = -w * z[2 * l - 1] + w * drive


_KERNELS = {}


def _kernel_for(f, q):
    key = (f, q)
    kern = _KERNELS.get(key)
    if kern is None:
        kern = _make_kernel(f, q)
        _KERNELS[key] = kern
    return kern


def _make_kernel(f, q):
    @njit(cache=False)
    def kernel(x0, e0, z0, omegas, nz, sigma, mu, use_bank, dt, n_steps, stride,
               v_seq, t_rec, x_rec, e_rec, z_rec, u_rec, v_rec):
        n = x0.shape[0]
        k = z0.shape[0]
        x = x0.copy()
        z = z0.copy()
        e = e0
        k1z = np.empty(k); k2z = np.empty(k); k3z = np.empty(k); k4z = np.empty(k)
        z_st = np.empty(k)
        r = 0
        for i in range(n_steps + 1):
            if i % stride == 0:
                t_rec[r] = i * dt
                e_rec[r] = e
                for j in range(n):
                    x_rec[r, j] = x[j]
                for j in range(k):
                    z_rec[r, j] = z[j]
                vi = v_seq[i] if i < n_steps else v_seq[n_steps - 1]
                u_rec[r] = _u_law(nz, mu, sigma, z, e, vi, use_bank)
                v_rec[r] = vi
                r += 1
            if i == n_steps:
                break
            t = i * dt
            v = v_seq[i]

            k1x = f(t, x, e)
            k1e = q(t, x, e) + _u_law(nz, mu, sigma, z, e, v, use_bank)
            _z_rhs(omegas, sigma, z, e + v, k1z)

            x_st = x + 0.5 * dt * k1x
            e_st = e + 0.5 * dt * k1e
            for j in range(k):
                z_st[j] = z[j] + 0.5 * dt * k1z[j]
            k2x = f(t + 0.5 * dt, x_st, e_st)
            k2e = q(t + 0.5 * dt, x_st, e_st) + _u_law(nz, mu, sigma, z_st, e_st, v, use_bank)
            _z_rhs(omegas, sigma, z_st, e_st + v, k2z)

            x_st = x + 0.5 * dt * k2x
            e_st = e + 0.5 * dt * k2e
            for j in range(k):
                z_st[j] = z[j] + 0.5 * dt * k2z[j]
            k3x = f(t + 0.5 * dt, x_st, e_st)
            k3e = q(t + 0.5 * dt, x_st, e_st) + _u_law(nz, mu, sigma, z_st, e_st, v, use_bank)
            _z_rhs(omegas, sigma, z_st, e_st + v, k3z)

            x_st = x + dt * k3x
            e_st = e + dt * k3e
            for j in range(k):
                z_st[j] = z[j] + dt * k3z[j]
            k4x = f(t + dt, x_st, e_st)
            k4e = q(t + dt, x_st, e_st) + _u_law(nz, mu, sigma, z_st, e_st, v, use_bank)
            _z_rhs(omegas, sigma, z_st, e_st + v, k4z)

            x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            e = e + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
            for j in range(k):
                z[j] = z[j] + (dt / 6.0) * (k1z[j] + 2.0 * k2z[j] + 2.0 * k3z[j] + k4z[j])

            ok = np.isfinite(e) and abs(e) <= OVERFLOW_LIMIT
            if ok:
                for j in range(n):
                    if not np.isfinite(x[j]) or abs(x[j]) > OVERFLOW_LIMIT:
                        ok = False
                        break
            if ok:
                for j in range(k):
                    if not np.isfinite(z[j]) or abs(z[j]) > OVERFLOW_LIMIT:
                        ok = False
                        break
            if not ok:
                return i + 1
        return -1

    return kernel


# ---------------------------------------------------------------------------
# reference Python path

def _gains(bank, regulator_config):
    if bank is None:
        omegas = np.empty(0)
        nz = np.empty(0)
        use_bank = False
    else:
        omegas = bank.omegas
        nz = bank.nz
        use_bank = True
    return omegas, nz, float(regulator_config.sigma), float(regulator_config.mu), use_bank


def step_rk4(plant, bank, config, state, v, dt):
    """One RK4 step of the coupled loop; v held constant across stages.

    ``state`` is (t, x, e, z); returns (x', e', z').  ``config`` supplies
    sigma and mu; ``bank`` may be None for pure high-gain feedback.
    Mirrors the jitted kernel's arithmetic exactly.
    """
    t, x, e, z = state
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    omegas, nz, sigma, mu, use_bank = _gains(bank, config)
    f, q = plant.f, plant.q
    k = z.shape[0]

    def u_of(zz, ee):
        return _u_law(nz, mu, sigma, zz, ee, v, use_bank)

    def z_rhs(zz, drive):
        out = np.empty(k)
        _z_rhs(omegas, sigma, zz, drive, out)
        return out

    k1x = np.asarray(f(t, x, e))
    k1e = q(t, x, e) + u_of(z, e)
    k1z = z_rhs(z, e + v)

    x_st = x + 0.5 * dt * k1x
    e_st = e + 0.5 * dt * k1e
    z_st = z + 0.5 * dt * k1z
    k2x = np.asarray(f(t + 0.5 * dt, x_st, e_st))
    k2e = q(t + 0.5 * dt, x_st, e_st) + u_of(z_st, e_st)
    k2z = z_rhs(z_st, e_st + v)

    x_st = x + 0.5 * dt * k2x
    e_st = e + 0.5 * dt * k2e
    z_st = z + 0.5 * dt * k2z
    k3x = np.asarray(f(t + 0.5 * dt, x_st, e_st))
    k3e = q(t + 0.5 * dt, x_st, e_st) + u_of(z_st, e_st)
    k3z = z_rhs(z_st, e_st + v)

    x_st = x + dt * k3x
    e_st = e + dt * k3e
    z_st = z + dt * k3z
    k4x = np.asarray(f(t + dt, x_st, e_st))
    k4e = q(t + dt, x_st, e_st) + u_of(z_st, e_st)
    k4z = z_rhs(z_st, e_st + v)

    x_new = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    e_new = e + (dt / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
    z_new = z + (dt / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)

    if not _state_ok(x_new, e_new, z_new):
        raise SimulationOverflowError(t + dt)
    return x_new, e_new, z_new


def _state_ok(x, e, z):
    if not (np.isfinite(e) and abs(e) <= OVERFLOW_LIMIT):
        return False
    for arr in (x, z):
        if arr.size and (not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > OVERFLOW_LIMIT):
            return False
    return True


def run(plant, bank, regulator_config, sim_config, noise=None, jit=None):
    """Integrate the closed loop on [0, t_end] and record every stride steps.

    Parameters
    ----------
    plant : PlantModel
    bank : OscillatorBank or None
        None selects pure high-gain feedback u = -sigma*(e + v).
    regulator_config : RegulatorConfig
        Supplies sigma and mu (the bank, if any, was built from it).
    sim_config : SimConfig
    noise : NoiseModel, optional
    jit : bool, optional
        Force (True) or forbid (False) the compiled path; default picks
        it automatically when the plant's f and q are numba dispatchers.

    Returns
    -------
    Trajectory

    Raises
    ------
    SimulationOverflowError
        When any state component exceeds 1e12 in magnitude.
    """
    dt = float(sim_config.dt)
    n_steps = int(round(sim_config.t_end / dt))
    stride = int(sim_config.record_stride)

    x0 = np.asarray(sim_config.x0, dtype=float).reshape(-1)
    if x0.size != plant.n:
        raise ValueError(f"x0 has {x0.size} entries, plant expects {plant.n}")
    e0 = float(sim_config.e0)
    dim = bank.dim if bank is not None else 0
    if sim_config.z0 is None:
        z0 = np.zeros(dim)
    else:
        z0 = np.asarray(sim_config.z0, dtype=float).reshape(-1)
        if z0.size != dim:
            raise ValueError(f"z0 has {z0.size} entries, bank expects {dim}")

    if noise is not None and noise.enabled and noise.power > 0.0:
        v_seq = make_noise(noise.power, dt, n_steps, sim_config.seed)
    else:
        v_seq = np.zeros(n_steps)

    omegas, nz, sigma, mu, use_bank = _gains(bank, regulator_config)

    n_rec = n_steps // stride + 1
    t_rec = np.empty(n_rec)
    x_rec = np.empty((n_rec, plant.n))
    e_rec = np.empty(n_rec)
    z_rec = np.empty((n_rec, dim))
    u_rec = np.empty(n_rec)
    v_rec = np.empty(n_rec)

    use_jit = jit if jit is not None else (_is_dispatcher(plant.f) and _is_dispatcher(plant.q))
    if use_jit:
        kernel = _kernel_for(plant.f, plant.q)
        status = kernel(x0, e0, z0, omegas, nz, sigma, mu, use_bank, dt, n_steps,
                        stride, v_seq, t_rec, x_rec, e_rec, z_rec, u_rec, v_rec)
        if status >= 0:
            raise SimulationOverflowError(status * dt)
    else:
        _python_loop(plant, bank, regulator_config, nz, mu, sigma, use_bank,
                     x0, e0, z0, dt, n_steps, stride, v_seq,
                     t_rec, x_rec, e_rec, z_rec, u_rec, v_rec)

    return Trajectory(times=t_rec, x=x_rec, e=e_rec, z=z_rec, u=u_rec, v=v_rec)


def _python_loop(plant, bank, config, nz, mu, sigma, use_bank, x0, e0, z0,
                 dt, n_steps, stride, v_seq,
                 t_rec, x_rec, e_rec, z_rec, u_rec, v_rec):
    x, e, z = x0.copy(), e0, z0.copy()
    r = 0
    for i in range(n_steps + 1):
        if i % stride == 0:
            t_rec[r] = i * dt
            x_rec[r] = x
            e_rec[r] = e
            z_rec[r] = z
            vi = v_seq[i] if i < n_steps else v_seq[n_steps - 1]
            u_rec[r] = _u_law(nz, mu, sigma, z, e, vi, use_bank)
            v_rec[r] = vi
            r += 1
        if i == n_steps:
            break
        x, e, z = step_rk4(plant, bank, config, (i * dt, x, e, z), v_seq[i], dt)
