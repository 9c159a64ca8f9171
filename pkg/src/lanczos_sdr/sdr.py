"""Inverse-regression matrices: sliced (SIR, SAVE) and Lanczos-Stieltjes (LSIR, LSAVE)."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .lanczos import LanczosFactorization, composite_factorization
from .quadrature import QuadratureRule

ESTIMATORS = ("SIR", "SAVE", "LSIR", "LSAVE")
PSD_RTOL = 1e-10
PSD_ATOL = 1e-14  # roundoff floor for matrices that vanish
_CHUNK = 1 << 16


class PSDViolation(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class SdrMatrix:
    """Symmetric positive semidefinite m x m estimate with provenance.

    The matrix is symmetrized on construction; a minimum eigenvalue below
    ``-(1e-10 * max eigenvalue + 1e-14)`` raises :class:`PSDViolation`.
    """

    matrix: np.ndarray
    estimator: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        C = np.array(self.matrix, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("an SDR matrix must be square")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        C = 0.5 * (C + C.T)
        evals = np.linalg.eigvalsh(C)
        if evals[0] < -(PSD_RTOL * max(evals[-1], 0.0) + PSD_ATOL):
            raise PSDViolation(
                f"{self.estimator} matrix is not PSD: eigenvalues span "
                f"[{evals[0]:.3e}, {evals[-1]:.3e}]"
            )
        C.setflags(write=False)
        object.__setattr__(self, "matrix", C)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self.matrix)[::-1]

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "params": self.params,
            "matrix": self.matrix.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def eigen_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "eigenvalue"])
        for i, lam in enumerate(self.eigenvalues()):
            writer.writerow([i, repr(float(lam))])
        return buf.getvalue()


@dataclass(frozen=True)
class SlicePartition:
    """Equal-count partition of responses into R slices.

    ``boundaries[r]`` is the largest response in slice r (r < R-1);
    ``order`` is the stable sort of the responses, so slice r holds
    ``order[starts[r]:starts[r + 1]]``.
    """

    boundaries: np.ndarray
    assignments: np.ndarray
    counts: np.ndarray
    order: np.ndarray

    @property
    def R(self) -> int:
        return self.counts.size

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])


@dataclass(frozen=True)
class PseudospectralMoments:
    """Pseudospectral coefficients of the conditional mean (k, m) and covariance (k, m, m)."""

    mu_coeffs: np.ndarray
    sigma_coeffs: np.ndarray | None = None


def slice_equal_count(responses, R: int, allow_degenerate: bool = False) -> SlicePartition:
    """Partition sorted responses into R contiguous slices whose counts differ by at most one.

    Ties are ordered by sample index, so tied responses straddling a slice
    boundary are split positionally; the lower slice gets the earlier samples.
    All-equal responses raise unless ``allow_degenerate`` is set, in which
    case the positional split is used as is.
    """
    y = np.asarray(responses, dtype=float).reshape(-1)
    n = y.size
    if R < 2:
        raise ValueError("need at least two slices")
    if R > n:
        raise ValueError(f"{R} slices requested for only {n} samples")
    if not allow_degenerate and np.all(y == y[0]):
        raise ValueError("all responses are equal; slicing is degenerate")
    order = np.argsort(y, kind="stable")
    counts = np.full(R, n // R, dtype=np.int64)
    counts[: n % R] += 1
    starts = np.concatenate([[0], np.cumsum(counts)])
    assignments = np.empty(n, dtype=np.int64)
    for r in range(R):
        assignments[order[starts[r] : starts[r + 1]]] = r
    boundaries = y[order[starts[1:-1] - 1]]
    return SlicePartition(boundaries, assignments, counts, order)


def _check_standardized(X: np.ndarray):
    mean = X.mean(axis=0)
    var = X.var(axis=0)
    if np.any(np.abs(mean) > 0.1) or np.any(np.abs(var - 1.0) > 0.2):
        warnings.warn(
            "predictors do not look standardized (mean 0, unit variance)",
            RuntimeWarning,
            stacklevel=3,
        )


def _as_samples(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} predictor rows but {y.size} responses")
    return X, y


def sir(X, y, R: int, allow_degenerate: bool = False) -> SdrMatrix:
    """Sliced inverse regression: ``(1/N) sum_r N_r mu_r mu_r^T`` over equal-count slices."""
    X, y = _as_samples(X, y)
    _check_standardized(X)
    part = slice_equal_count(y, R, allow_degenerate)
    Xs = X[part.order]
    sums = np.add.reduceat(Xs, part.starts[:-1], axis=0)
    C = (sums.T / part.counts) @ sums / y.size
    return SdrMatrix(C, "SIR", {"N": int(y.size), "R": int(R)})


def save(X, y, R: int, allow_degenerate: bool = False) -> SdrMatrix:
    """Sliced average variance estimation: ``(1/N) sum_r N_r (I - Sigma_r)^2``."""
    X, y = _as_samples(X, y)
    _check_standardized(X)
    part = slice_equal_count(y, R, allow_degenerate)
    if part.counts.min() < 2:
        raise ValueError("every slice needs at least two samples for SAVE")
    n, m = X.shape
    Xs = X[part.order]
    eye = np.eye(m)
    C = np.zeros((m, m))
    for r in range(part.R):
        block = Xs[part.starts[r] : part.starts[r + 1]]
        D = eye - np.atleast_2d(np.cov(block, rowvar=False))
        C += part.counts[r] * (D @ D)
    return SdrMatrix(C / n, "SAVE", {"N": int(n), "R": int(R)})


def _rule_descriptor(rule: QuadratureRule) -> dict:
    return {"kind": rule.kind, "N": int(rule.size), "dim": int(rule.dim)}


def _prepare(model, rule: QuadratureRule, k: int, fact, allow_nonstandard: bool):
    if not model.standardized and not allow_nonstandard:
        raise ValueError(
            f"model {model.name!r} has non-standardized inputs; pass allow_nonstandard=True to override"
        )
    if fact is None:
        fact = composite_factorization(model, rule, k)
    elif fact.size != rule.size:
        raise ValueError("factorization does not belong to this rule")
    return fact


def _truncate(fact: LanczosFactorization, k: int | None) -> np.ndarray:
    kk = fact.achieved_k if k is None else min(k, fact.achieved_k)
    return fact.V[:, :kk]


def mean_coefficients(nodes, fact: LanczosFactorization, k: int | None = None) -> np.ndarray:
    """Coefficients of the conditional mean, ``mu_l = sum_p sqrt(nu_p) x_p V[p, l]``; shape (k, m)."""
    V = _truncate(fact, k)
    sw = np.sqrt(fact.weights)
    return (V * sw[:, None]).T @ np.asarray(nodes, dtype=float)


def covariance_coefficients(nodes, fact: LanczosFactorization, mu: np.ndarray) -> np.ndarray:
    """Coefficients of the conditional covariance; shape (k, m, m).

    The conditional mean at each node is rebuilt from its expansion,
    ``mu(f(x_p)) = sum_l mu_l V[p, l] / sqrt(nu_p)``.
    """
    X = np.asarray(nodes, dtype=float)
    k, m = mu.shape
    V = fact.V[:, :k]
    sw = np.sqrt(fact.weights)
    if np.any(sw <= 0):
        raise ValueError("every node needs a positive weight")
    out = np.zeros((k, m * m))
    for start in range(0, X.shape[0], _CHUNK):
        sl = slice(start, start + _CHUNK)
        Vb = V[sl]
        D = X[sl] - (Vb / sw[sl, None]) @ mu
        outer = (D[:, :, None] * D[:, None, :]).reshape(-1, m * m)
        out += (Vb * sw[sl, None]).T @ outer
    S = out.reshape(k, m, m)
    return 0.5 * (S + S.transpose(0, 2, 1))


def lsir_from_factorization(nodes, fact: LanczosFactorization, k: int | None = None, params: dict | None = None):
    mu = mean_coefficients(nodes, fact, k)
    C = mu.T @ mu
    info = {"k": int(mu.shape[0]), "N": int(fact.size)}
    info.update(params or {})
    return SdrMatrix(C, "LSIR", info), PseudospectralMoments(mu)


def lsave_from_factorization(nodes, fact: LanczosFactorization, k: int | None = None, params: dict | None = None):
    mu = mean_coefficients(nodes, fact, k)
    sigma = covariance_coefficients(nodes, fact, mu)
    m = mu.shape[1]
    C = np.eye(m) - 2.0 * sigma[0] + np.einsum("lij,ljk->ik", sigma, sigma)
    info = {"k": int(mu.shape[0]), "N": int(fact.size)}
    info.update(params or {})
    return SdrMatrix(C, "LSAVE", info), PseudospectralMoments(mu, sigma)


def lsir(model, input_rule: QuadratureRule, k: int, *, factorization=None, allow_nonstandard: bool = False):
    """Lanczos-Stieltjes inverse regression.

    Returns ``(C_IR estimate, moments, factorization)`` where the estimate is
    ``sum_l mu_l mu_l^T`` over the achieved Lanczos steps.
    """
    fact = _prepare(model, input_rule, k, factorization, allow_nonstandard)
    C, moments = lsir_from_factorization(
        input_rule.nodes, fact, k, {"rule": _rule_descriptor(input_rule), "model": model.name}
    )
    return C, moments, fact


def lsave(model, input_rule: QuadratureRule, k: int, *, factorization=None, allow_nonstandard: bool = False):
    """Lanczos-Stieltjes average variance estimation.

    Returns ``(C_AVE estimate, moments)`` with
    ``C_AVE = I - 2 Sigma_0 + sum_l Sigma_l^2``. Pass the factorization from
    :func:`lsir` to avoid evaluating the model again.
    """
    fact = _prepare(model, input_rule, k, factorization, allow_nonstandard)
    return lsave_from_factorization(
        input_rule.nodes, fact, k, {"rule": _rule_descriptor(input_rule), "model": model.name}
    )


def subspace(C, n: int) -> np.ndarray:
    """Leading n eigenvectors (by eigenvalue magnitude) as an orthonormal m x n basis.

    Each column's first non-negligible entry is made positive.
    """
    M = C.matrix if isinstance(C, SdrMatrix) else np.asarray(C, dtype=float)
    m = M.shape[0]
    if not 1 <= n <= m:
        raise ValueError(f"n must lie in [1, {m}]")
    evals, evecs = np.linalg.eigh(0.5 * (M + M.T))
    idx = np.argsort(-np.abs(evals), kind="stable")[:n]
    W = evecs[:, idx]
    for j in range(n):
        col = W[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())[0]
        if col[lead] < 0:
            W[:, j] = -col
    return W


def frobenius_distance(A, B) -> float:
    A = A.matrix if isinstance(A, SdrMatrix) else np.asarray(A, dtype=float)
    B = B.matrix if isinstance(B, SdrMatrix) else np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.linalg.norm(A - B, "fro"))


def relative_error(A, ref) -> float:
    R = ref.matrix if isinstance(ref, SdrMatrix) else np.asarray(ref, dtype=float)
    scale = float(np.linalg.norm(R, "fro"))
    if scale == 0.0:
        raise ValueError("reference matrix is zero; relative error undefined")
    return frobenius_distance(A, R) / scale
