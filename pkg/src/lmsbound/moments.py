"""Regressor moment models: second moments and the fourth-moment operator.

A moment model packages the two statistics the stability analysis consumes:

* ``second_moment``  S = E[h h^T]
* the linear operator  F(P) = E[h h^T P h h^T] = E[(h^T P h) h h^T]

Three constructions are supported.  For zero-mean Gaussian regressors F has
the closed form (Isserlis' theorem, symmetric P)

    F(P) = 2 S P S + S * tr(P S),

valid in any dimension.  An explicit model carries printed/published matrices
S and M4 = F(I) only, so F is available only at P = I and anything else
raises UnsupportedOperator.  An empirical model averages the moments over
data rows with compensated (Kahan) summation in a fixed chunk order, which
makes the result independent of threading and repeatable to the bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import linalg

_PSD_TOL = 1e-9
_CHUNK = 65536
# Full fourth-moment tensors are cached up to this dimension (m^4 floats).
_TENSOR_DIM_CAP = 8


class InvalidCovariance(ValueError):
    """Covariance is not symmetric PSD, or scalar parameters are out of range."""


class DimMismatch(ValueError):
    """Matrix/vector dimensions disagree."""


class EmptyData(ValueError):
    """A data matrix with zero rows was supplied."""


class UnsupportedOperator(RuntimeError):
    """The model cannot evaluate F(P) for this P (printed-moments model)."""


@dataclass(frozen=True)
class GaussianSpec:
    """Zero-mean Gaussian regressor law, defined by its covariance."""

    covariance: np.ndarray

    def __post_init__(self):
        cov = linalg.symmetrize(self.covariance)
        ok, margin = linalg.is_psd(cov, _PSD_TOL * max(1.0, float(np.linalg.norm(cov))))
        if not ok:
            raise InvalidCovariance(f"covariance is not PSD (min eigenvalue {margin:.3g})")
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.covariance.shape[0]

    @classmethod
    def from_two_dim(cls, sigma1: float, sigma2: float, rho: float) -> "GaussianSpec":
        """Bivariate spec from marginal standard deviations and correlation."""
        if sigma1 <= 0 or sigma2 <= 0:
            raise InvalidCovariance("standard deviations must be positive")
        if not -1.0 <= rho <= 1.0:
            raise InvalidCovariance(f"correlation must lie in [-1, 1], got {rho}")
        c = rho * sigma1 * sigma2
        return cls(np.array([[sigma1**2, c], [c, sigma2**2]]))


@dataclass
class DataMatrix:
    """Regressor rows (n, m) with an optional response column of length n."""

    rows: np.ndarray
    responses: Optional[np.ndarray] = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim != 2:
            raise DimMismatch(f"expected a 2-d row matrix, got ndim={rows.ndim}")
        if rows.shape[0] == 0:
            raise EmptyData("data matrix has no rows")
        if not np.all(np.isfinite(rows)):
            raise InvalidCovariance("data rows contain non-finite values")
        self.rows = rows
        if self.responses is not None:
            resp = np.asarray(self.responses, dtype=float)
            if resp.shape != (rows.shape[0],):
                raise DimMismatch(
                    f"responses length {resp.shape} does not match {rows.shape[0]} rows")
            self.responses = resp

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class MomentModel:
    """Second moment plus fourth-moment operator for one regressor law.

    ``fourth_operator`` is None for printed-moments models; ``sampling_cov``
    is set when the law can be sampled (Gaussian specs).
    """

    second_moment: np.ndarray
    m4: np.ndarray
    provenance: str
    fourth_operator: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, repr=False)
    sampling_cov: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        s = linalg.symmetrize(self.second_moment)
        m4 = linalg.symmetrize(self.m4)
        if s.shape != m4.shape:
            raise DimMismatch(
                f"second moment {s.shape} and fourth moment {m4.shape} disagree")
        scale = max(1.0, float(np.linalg.norm(s)))
        ok, margin = linalg.is_psd(s, _PSD_TOL * scale)
        if not ok:
            raise InvalidCovariance(f"second moment is not PSD (margin {margin:.3g})")
        self.second_moment = s
        self.m4 = m4

    @property
    def dim(self) -> int:
        return self.second_moment.shape[0]

    @property
    def supports_general_p(self) -> bool:
        return self.fourth_operator is not None

    def fourth_moment(self, p) -> np.ndarray:
        """Evaluate F(P) = E[h h^T P h h^T] for symmetric P."""
        P = linalg.symmetrize(p)
        if P.shape != self.second_moment.shape:
            raise DimMismatch(
                f"P has shape {P.shape}, model dimension is {self.dim}")
        if self.fourth_operator is not None:
            return self.fourth_operator(P)
        if np.allclose(P, np.eye(self.dim), rtol=0.0, atol=1e-12):
            return self.m4.copy()
        raise UnsupportedOperator(
            "this model carries printed moment matrices only; "
            "F(P) is available solely at P = I")


def _wick_operator(cov: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def apply(P: np.ndarray) -> np.ndarray:
        return 2.0 * cov @ P @ cov + cov * float(np.trace(P @ cov))
    return apply


def gaussian_moment_model(spec: GaussianSpec | np.ndarray) -> MomentModel:
    """Moment model for zero-mean Gaussian regressors with the given covariance."""
    if not isinstance(spec, GaussianSpec):
        spec = GaussianSpec(np.asarray(spec, dtype=float))
    cov = spec.covariance
    op = _wick_operator(cov)
    return MomentModel(
        second_moment=cov,
        m4=op(np.eye(spec.dim)),
        provenance="gaussian",
        fourth_operator=op,
        sampling_cov=cov,
    )


def explicit_moment_model(second_moment, m4,
                          provenance: str = "explicit") -> MomentModel:
    """Moment model from printed matrices S and M4 = F(I); F limited to P = I."""
    model = MomentModel(
        second_moment=np.asarray(second_moment, dtype=float),
        m4=np.asarray(m4, dtype=float),
        provenance=provenance,
    )
    scale = max(1.0, float(np.linalg.norm(model.m4)))
    ok, margin = linalg.is_psd(model.m4, _PSD_TOL * scale)
    if not ok:
        raise InvalidCovariance(f"fourth moment matrix is not PSD (margin {margin:.3g})")
    return model


def _kahan_add(total: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    """One compensated-summation step, in place on (total, comp)."""
    y = term - comp
    t = total + y
    comp[...] = (t - total) - y
    total[...] = t


def empirical_moment_model(data: DataMatrix | np.ndarray) -> MomentModel:
    """Moment model averaged over data rows.

    Chunks of rows are reduced in a fixed order with Kahan compensation, so
    the moments are deterministic for a given row order.  For dimensions up
    to 8 the full fourth-moment tensor is cached and F(P) is a tensor
    contraction; beyond that F(P) re-scans the rows per call.
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(np.asarray(data, dtype=float))
    rows = data.rows
    n, m = rows.shape

    second = np.zeros((m, m))
    comp2 = np.zeros((m, m))
    for start in range(0, n, _CHUNK):
        h = rows[start:start + _CHUNK]
        _kahan_add(second, comp2, h.T @ h)
    second /= n

    if m <= _TENSOR_DIM_CAP:
        tensor = np.zeros((m, m, m, m))
        comp4 = np.zeros((m, m, m, m))
        for start in range(0, n, _CHUNK):
            h = rows[start:start + _CHUNK]
            _kahan_add(tensor, comp4, np.einsum("ni,nj,nk,nl->ijkl", h, h, h, h))
        tensor /= n

        def apply(P: np.ndarray) -> np.ndarray:
            return np.einsum("ijkl,kl->ij", tensor, P)
    else:
        def apply(P: np.ndarray) -> np.ndarray:
            out = np.zeros((m, m))
            comp = np.zeros((m, m))
            for start in range(0, n, _CHUNK):
                h = rows[start:start + _CHUNK]
                w = np.einsum("ni,ij,nj->n", h, P, h)
                _kahan_add(out, comp, np.einsum("n,ni,nj->ij", w, h, h))
            return out / n

    return MomentModel(
        second_moment=second,
        m4=apply(np.eye(m)),
        provenance="empirical",
        fourth_operator=apply,
    )
