"""Step-size criteria, sup-gain searches and mean-squared-error bounds.

Five criteria are covered.  Two are certificate producing:

* ``theorem1``   - the drift inequality over free P > 0 (LMI path);
* ``corollary2`` - the same inequality restricted to P = I, which reduces to
  the matrix pencil test lambda_max(a*M4 - 2*S) < 0 and is decided by
  bisection on that monotone eigenvalue, no SDP involved.

Three are classical literature rules computed in closed form from S alone:
``widrow_lambda_max`` (2/lambda_max), ``widrow_trace`` (2/tr) and
``zhu_criterion`` (2*lambda_min/lambda_max^2, inapplicable for singular S).

The error bounds mirror the certificates: given (a, chi, P) the asymptotic
mean-squared error is bounded by a*sigma_eps^2*tr(P S)/(chi*lambda_min(P))
and the finite-horizon bound interpolates geometrically from the initial
error energy.  A rate of chi = 0 (degenerate laws under the relaxed mode)
yields an infinite bound, reported as such rather than raising.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .lmi import (GainCertificate, LmiProblem, NonConvergence,
                  RELAXED_TOL_DEFAULT, STRICT_MARGIN, solve_feasibility)
from .moments import MomentModel

TOL_A_DEFAULT = 1e-5
TOL_CHI_DEFAULT = 1e-9
XI_DEFAULT = 1e-4
_SINGULAR_TOL = 1e-9
_MAX_DOUBLINGS = 60


class GainTooLarge(ValueError):
    """The requested gain is beyond the feasible range of the criterion."""


class InvalidRate(ValueError):
    """a*chi outside (0, 2); the geometric contraction factor is invalid."""


class CriterionKind(enum.Enum):
    THEOREM1 = "theorem1"
    COROLLARY2 = "corollary2"
    WIDROW_LAMBDA_MAX = "widrow_lambda_max"
    WIDROW_TRACE = "widrow_trace"
    ZHU = "zhu_criterion"

    @classmethod
    def from_name(cls, name: str) -> "CriterionKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown criterion {name!r}; "
                         f"expected one of {[k.value for k in cls]}")


CERTIFICATE_KINDS = (CriterionKind.THEOREM1, CriterionKind.COROLLARY2)


@dataclass
class SupGainResult:
    kind: CriterionKind
    sup_gain: float
    bisection_width: float = 0.0
    certificate: Optional[GainCertificate] = None
    inapplicable: bool = False
    tolerance_limited: bool = False
    strictly_infeasible: bool = False
    note: str = ""


@dataclass
class ChiSearchResult:
    chi: float
    p_matrix: np.ndarray
    certificate: Optional[GainCertificate]
    tolerance_limited: bool = False


def pencil_max_eigenvalue(model: MomentModel, gain: float) -> float:
    """lambda_max(a*M4 - 2*S): negative iff P = I certifies gain a (some chi > 0)."""
    values, _ = linalg.eigh(gain * model.m4 - 2.0 * model.second_moment)
    return float(values[-1])


def _second_moment_spectrum(model: MomentModel) -> tuple[float, float, float]:
    values, _ = linalg.eigh(model.second_moment)
    return float(values[0]), float(values[-1]), float(np.trace(model.second_moment))


def protocol_gain(sup_gain: float, xi: float = XI_DEFAULT) -> float:
    """Working gain derived from a published sup: quote at 4 decimals, back off xi.

    Reported sup gains are quoted at 4-decimal precision, and downstream
    selections subtract xi from the quoted value so that printed tables and
    reruns agree exactly.
    """
    a = round(sup_gain, 4) - xi
    if a <= 0:
        raise GainTooLarge(f"sup gain {sup_gain} leaves no positive working gain")
    return a


def _bisect_sup(feasible, hi0: float, tol_a: float) -> tuple[float, float]:
    """Generic sup-gain bisection: feasible(a) must be monotone (up to tol)."""
    if not feasible(tol_a):
        return 0.0, 0.0
    lo, hi = tol_a, hi0
    doublings = 0
    while feasible(hi):
        lo, hi = hi, hi * 2.0
        doublings += 1
        if doublings > _MAX_DOUBLINGS:
            raise NonConvergence("sup-gain bracket expansion did not terminate")
    while hi - lo > tol_a:
        mid = (lo + hi) / 2.0
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0, hi - lo


def sup_gain(model: MomentModel, kind: CriterionKind, tol_a: float = TOL_A_DEFAULT,
             mode: str = "relaxed",
             relaxed_tol: float = RELAXED_TOL_DEFAULT) -> SupGainResult:
    """Supremum gain admitted by a criterion, with certificate where one exists.

    ``mode`` applies to the certificate-producing criteria: "strict" demands
    a strictly negative slack, "relaxed" (default) additionally accepts
    slack within ``relaxed_tol``, which is how degenerate laws (singular
    second moment) get their tolerance-limited boundary reproduced instead
    of a flat infeasibility report.
    """
    lam_min, lam_max, trace = _second_moment_spectrum(model)

    if kind is CriterionKind.WIDROW_LAMBDA_MAX:
        if lam_max <= 0:
            return SupGainResult(kind, 0.0, inapplicable=True, note="zero second moment")
        return SupGainResult(kind, 2.0 / lam_max)
    if kind is CriterionKind.WIDROW_TRACE:
        if trace <= 0:
            return SupGainResult(kind, 0.0, inapplicable=True, note="zero second moment")
        return SupGainResult(kind, 2.0 / trace)
    if kind is CriterionKind.ZHU:
        if lam_min <= _SINGULAR_TOL * max(1.0, lam_max):
            return SupGainResult(
                kind, 0.0, inapplicable=True,
                note="second moment is singular; criterion gives a zero gain")
        return SupGainResult(kind, 2.0 * lam_min / lam_max**2)

    hi0 = 2.0 / trace if trace > 0 else 1.0

    if kind is CriterionKind.COROLLARY2:
        threshold = -STRICT_MARGIN if mode == "strict" else relaxed_tol

        def feasible(a: float) -> bool:
            return pencil_max_eigenvalue(model, a) <= threshold

    elif kind is CriterionKind.THEOREM1:
        if not model.supports_general_p:
            # Raises UnsupportedOperator with the model's explanation.
            model.fourth_moment(np.ones((model.dim, model.dim)))

        def feasible(a: float) -> bool:
            problem = LmiProblem(model, a, TOL_CHI_DEFAULT, mode=mode,
                                 relaxed_tol=relaxed_tol)
            return solve_feasibility(problem).feasible
    else:
        raise ValueError(f"unhandled criterion {kind}")

    sup, width = _bisect_sup(feasible, hi0, tol_a)
    if sup == 0.0:
        return SupGainResult(
            kind, 0.0, strictly_infeasible=True,
            note="no feasible gain: the drift inequality has no strictly "
                 "feasible point (singular second moment)" if mode == "strict"
            else "no feasible gain found")

    a_verify = sup - width
    if kind is CriterionKind.COROLLARY2:
        phi = pencil_max_eigenvalue(model, a_verify)
        chi_v = max(-phi / 2.0, TOL_CHI_DEFAULT)
        problem = LmiProblem(model, a_verify, chi_v, mode=mode,
                             relaxed_tol=relaxed_tol, p_restriction="identity")
    else:
        problem = LmiProblem(model, a_verify, TOL_CHI_DEFAULT, mode=mode,
                             relaxed_tol=relaxed_tol)
    outcome = solve_feasibility(problem)
    return SupGainResult(
        kind, sup, bisection_width=width, certificate=outcome.certificate,
        tolerance_limited=outcome.tolerance_limited)


def max_chi_search(model: MomentModel, kind: CriterionKind, gain: float,
                   tol_chi: float = TOL_CHI_DEFAULT, mode: str = "relaxed",
                   relaxed_tol: float = RELAXED_TOL_DEFAULT) -> ChiSearchResult:
    """Largest certified rate chi at a fixed gain, with the certifying P.

    For corollary2 the rate is the closed-form -lambda_max(a*M4 - 2*S),
    clipped at zero under the relaxed mode (degenerate laws certify only a
    vanishing rate, flagged tolerance-limited).  For theorem1 the rate is
    found by bisection over chi with a feasibility probe per step.
    """
    if gain <= 0:
        raise GainTooLarge(f"gain must be positive, got {gain}")
    identity = np.eye(model.dim)

    if kind is CriterionKind.COROLLARY2:
        phi = pencil_max_eigenvalue(model, gain)
        if mode == "strict":
            if phi >= -STRICT_MARGIN:
                raise GainTooLarge(
                    f"gain {gain} is not strictly feasible for corollary2 "
                    f"(pencil eigenvalue {phi:.3g})")
            return ChiSearchResult(-phi, identity, None)
        if phi > relaxed_tol:
            raise GainTooLarge(
                f"gain {gain} is beyond the corollary2 range "
                f"(pencil eigenvalue {phi:.3g})")
        chi = max(0.0, -phi)
        return ChiSearchResult(chi, identity, None,
                               tolerance_limited=chi <= STRICT_MARGIN)

    if kind is not CriterionKind.THEOREM1:
        raise ValueError(f"max chi is defined for certificate criteria, not {kind}")

    def probe(chi: float, probe_mode: str):
        problem = LmiProblem(model, gain, chi, mode=probe_mode,
                             relaxed_tol=relaxed_tol)
        return solve_feasibility(problem)

    # Strict probes first so non-degenerate laws get the exact maximal rate;
    # the relaxed tolerance only enters when no strictly feasible rate
    # exists at all (frozen directions of degenerate laws).
    lo = tol_chi
    phase = "strict"
    outcome_lo = probe(lo, phase)
    if not outcome_lo.feasible:
        if mode == "relaxed":
            phase = "relaxed"
            outcome_lo = probe(lo, phase)
        if not outcome_lo.feasible:
            raise GainTooLarge(
                f"gain {gain} is infeasible for the drift inequality even at "
                f"vanishing rate (slack {outcome_lo.best_slack:.3g})")
    hi = min(1.0 / gain, (2.0 / gain) * (1.0 - 1e-12))
    doublings = 0
    while probe(hi, phase).feasible:
        lo_next = hi
        hi = min(hi * 2.0, (2.0 / gain) * (1.0 - 1e-12))
        if hi <= lo_next or doublings > _MAX_DOUBLINGS:
            raise NonConvergence("rate bracket expansion did not terminate")
        outcome_lo, lo = probe(lo_next, phase), lo_next
        doublings += 1
    best = outcome_lo
    while hi - lo > tol_chi:
        mid = (lo + hi) / 2.0
        outcome = probe(mid, phase)
        if outcome.feasible:
            lo, best = mid, outcome
        else:
            hi = mid
    cert = best.certificate
    return ChiSearchResult(lo, cert.p_matrix, cert,
                           tolerance_limited=cert.tolerance_limited)


def max_chi(model: MomentModel, kind: CriterionKind, gain: float,
            tol_chi: float = TOL_CHI_DEFAULT, mode: str = "relaxed") -> tuple[float, np.ndarray]:
    """(chi, P) pair from ``max_chi_search``; see that function for semantics."""
    res = max_chi_search(model, kind, gain, tol_chi=tol_chi, mode=mode)
    return res.chi, res.p_matrix


def asymptotic_bound(kind: CriterionKind, gain: float, chi: Optional[float],
                     p_matrix: Optional[np.ndarray], second_moment: np.ndarray,
                     sigma_eps: float) -> float:
    """Steady-state upper bound on E||theta_err||^2 for a certified gain.

    theorem1:   a*sigma^2*tr(P S)/(chi*lambda_min(P))
    corollary2: (a/chi)*sigma^2*tr(S)
    zhu:        a*sigma^2*tr(S)/(2*lambda_min(S))

    Returns +inf when the relevant denominator vanishes (chi = 0 for the
    certificate criteria, singular S for zhu).
    """
    s = linalg.symmetrize(second_moment)
    noise = sigma_eps * sigma_eps
    if kind is CriterionKind.THEOREM1:
        if chi is None or p_matrix is None:
            raise ValueError("theorem1 bound needs chi and P")
        p = linalg.symmetrize(p_matrix)
        p_min = float(linalg.eigh(p).values[0])
        denom = chi * p_min
        if denom <= 0:
            return float("inf")
        return gain * noise * float(np.trace(p @ s)) / denom
    if kind is CriterionKind.COROLLARY2:
        if chi is None:
            raise ValueError("corollary2 bound needs chi")
        if chi <= 0:
            return float("inf")
        return (gain / chi) * noise * float(np.trace(s))
    if kind is CriterionKind.ZHU:
        lam_min = float(linalg.eigh(s).values[0])
        if lam_min <= _SINGULAR_TOL * max(1.0, float(np.trace(s))):
            return float("inf")
        return gain * noise * float(np.trace(s)) / (2.0 * lam_min)
    raise ValueError(f"no error bound is defined for criterion {kind}")


def finite_k_bound(gain: float, chi: float, p_matrix: np.ndarray,
                   second_moment: np.ndarray, sigma_eps: float,
                   initial_v: float, k: int) -> float:
    """Upper bound on E||theta_err_k||^2 after k steps from a certificate.

    Geometric interpolation between the initial Lyapunov energy and the
    asymptotic bound, with contraction factor (1 - a*chi) per step.
    """
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    rate = gain * chi
    if not 0.0 < rate < 2.0:
        raise InvalidRate(f"a*chi must lie in (0, 2), got {rate:.6g}")
    p = linalg.symmetrize(p_matrix)
    p_min = float(linalg.eigh(p).values[0])
    if p_min <= 0:
        raise ValueError("P must be positive definite")
    s = linalg.symmetrize(second_moment)
    contraction = (1.0 - rate) ** k
    inject = gain * sigma_eps * sigma_eps * float(np.trace(p @ s))
    return (contraction * initial_v / p_min
            + (1.0 - contraction) * inject / (chi * p_min))


def initial_error_second_moment(theta_star: np.ndarray,
                                init: str | np.ndarray = "standard_normal") -> np.ndarray:
    """E[e0 e0^T] for the initial estimation error e0 = theta0_hat - theta_star.

    With the standard-normal initial estimate this is I + theta* theta*^T;
    with a fixed initial vector it is the rank-one outer product.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    m = theta_star.shape[0]
    if isinstance(init, str):
        if init != "standard_normal":
            raise ValueError(f"unknown init law {init!r}")
        return np.eye(m) + np.outer(theta_star, theta_star)
    theta0 = np.asarray(init, dtype=float)
    err = theta0 - theta_star
    return np.outer(err, err)


def initial_v(p_matrix: np.ndarray, theta_star: np.ndarray,
              init: str | np.ndarray = "standard_normal") -> float:
    """Initial Lyapunov energy tr(P E[e0 e0^T]) under the simulation protocol."""
    m0 = initial_error_second_moment(theta_star, init)
    return float(np.trace(linalg.symmetrize(p_matrix) @ m0))
