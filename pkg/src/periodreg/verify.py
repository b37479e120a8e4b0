"""Structural certification of a regulator configuration.

A lint pass before spending simulation time: the oscillator pair
(Phi, M^T N_z) must be observable, the shifted-subsystem matrix
Phi - mu M M^T N_z must be Hurwitz, and the weight sequence must satisfy
the admissibility conditions.  All three hold for canonical
configurations by construction of the method; the checks exist to catch
hand-edited banks (duplicate frequencies, non-monotone weights, zero
gain) before they produce confusing simulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .internal_model import CoefficientSequence, make_bank

__all__ = [
    "CertificationReport",
    "check_observability",
    "check_hurwitz",
    "check_sequence",
    "certify",
]


@dataclass
class CertificationReport:
    checks: list = field(default_factory=list)   # (name, passed, detail)
    worst_eig_real: float = np.nan
    sequence_violations: list = field(default_factory=list)

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.checks)

    def add(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def to_text(self):
        lines = []
        for name, ok, detail in self.checks:
            mark = "PASS" if ok else "FAIL"
            lines.append(f"{mark}  {name}" + (f": {detail}" if detail else ""))
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("check,pass,detail\n")
            for name, ok, detail in self.checks:
                detail = detail.replace(",", ";")
                fh.write(f"{name},{str(ok).lower()},{detail}\n")


def check_observability(bank):
    """Rank test of the stacked observability matrix of (Phi, M^T N_z).

    The rank equals the dimension of the Krylov space spanned by the
    rows C Phi^k, which is computed by stacking the rows one at a time
    and orthogonalizing each against the basis built so far (a row
    operation, so the rank is unchanged).  Raw stacking followed by one
    SVD is hopeless here: the row scales spread like omega_max^k, so
    beyond a dozen oscillators the stacked matrix is numerically
    rank-deficient even though the pair is observable.  A new direction
    counts while its orthogonal residual exceeds 1e-8 of the row norm.
    """
    k = bank.dim
    vec = bank.m_vec @ bank.n_z
    basis = []
    for _ in range(k):
        w = vec.copy()
        for b in basis:               # modified Gram-Schmidt, repeated once
            w -= (w @ b) * b
        for b in basis:
            w -= (w @ b) * b
        nrm = np.linalg.norm(w)
        if nrm <= 1e-8 * np.linalg.norm(vec):
            break
        w /= nrm
        basis.append(w)
        vec = w @ bank.phi
    return len(basis) == k


def check_hurwitz(bank, mu):
    """(is_hurwitz, worst real part) of Phi - mu M M^T N_z."""
    A = bank.phi - mu * np.outer(bank.m_vec, bank.m_vec) @ bank.n_z
    eigs = np.linalg.eigvals(A)
    worst = float(np.max(eigs.real))
    return worst < -1e-12, worst


def check_sequence(coeffs):
    """Admissibility violations of a weight sequence (empty list = pass)."""
    if not isinstance(coeffs, CoefficientSequence):
        coeffs = CoefficientSequence.explicit(coeffs)
    return coeffs.violations()


def certify(n_o, sigma, mu, omega_hat, coefficients=None, epsilon=0.5):
    """Full certification report for a (possibly invalid) parameter set.

    Unlike RegulatorConfig this deliberately accepts bad gains, so that
    mu = 0 or a non-monotone weight list produces a failing report
    instead of a constructor exception.
    """
    report = CertificationReport()

    gains_ok = sigma > 0.0 and mu > 0.0 and omega_hat > 0.0 and n_o >= 0
    report.add(
        "gains_positive",
        gains_ok,
        f"sigma={sigma:g} mu={mu:g} omega_hat={omega_hat:g} n_o={n_o}",
    )

    if coefficients is None:
        coefficients = CoefficientSequence.canonical(max(n_o, 0), epsilon)
    elif not isinstance(coefficients, CoefficientSequence):
        coefficients = CoefficientSequence.explicit(coefficients)
    violations = coefficients.violations()
    report.sequence_violations = violations
    report.add(
        "sequence_conditions",
        not violations,
        "; ".join(violations) if violations else f"{len(coefficients)} weights admissible",
    )

    if len(coefficients) != n_o + 1:
        report.add("dimensions", False,
                   f"{len(coefficients)} weights for n_o={n_o}")
        return report

    try:
        omegas = omega_hat * np.arange(1, n_o + 1, dtype=float)
        bank = make_bank(omegas, np.asarray(coefficients.values), sigma)
    except Exception as exc:  # pragma: no cover - construction is total for finite input
        report.add("bank_construction", False, str(exc))
        return report

    obs = check_observability(bank)
    report.add("observability", obs,
               f"pair (Phi, M^T N_z) of dimension {bank.dim}")

    hurwitz, worst = check_hurwitz(bank, mu)
    report.worst_eig_real = worst
    detail = f"worst eigenvalue real part {worst:.6g}"
    if not hurwitz and worst < 0.0:
        # inside eigensolver noise of the axis: flag but do not fail
        report.add("hurwitz", True, detail + " (marginal)")
    else:
        report.add("hurwitz", hurwitz, detail)

    residual = float(np.max(np.abs(bank.gamma + (bank.phi + sigma * np.eye(bank.dim)) @ bank.m_vec)))
    report.add("gamma_identity", residual < 1e-12,
               f"|Gamma + (Phi + sigma I)M| = {residual:.3g}")

    skew = float(np.max(np.abs(bank.n_z @ bank.phi + bank.phi.T @ bank.n_z)))
    report.add("weight_skew_identity", skew < 1e-12,
               f"|N_z Phi + Phi^T N_z| = {skew:.3g}")

    return report
