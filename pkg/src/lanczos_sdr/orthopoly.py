"""Discrete Stieltjes procedure, three-term recurrence evaluation, pseudospectral sums."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .jacobi import JacobiMatrix
from .quadrature import WEIGHT_SUM_TOL, QuadratureRule

log = logging.getLogger(__name__)

BREAKDOWN_RTOL = 1e-12


class BreakdownError(RuntimeError):
    """The recurrence broke down before reaching the requested number of terms."""

    def __init__(self, requested: int, achieved: int):
        self.requested = requested
        self.achieved = achieved
        super().__init__(
            f"recurrence broke down after {achieved} of {requested} terms; "
            "the measure has too few distinct atoms"
        )


@dataclass(frozen=True, eq=False)
class PolynomialTable:
    """Orthonormal polynomials tabulated at points: ``values[i, j] = phi_j(points[i])``."""

    values: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        points = np.array(self.points, dtype=float).reshape(-1)
        if values.ndim != 2 or values.shape[0] != points.size:
            raise ValueError("values must be (len(points), k)")
        values.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "points", points)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def gram(self, weights) -> np.ndarray:
        """Discrete Gram matrix of the columns under ``weights``."""
        w = np.asarray(weights, dtype=float)
        return self.values.T @ (w[:, None] * self.values)

    def restrict(self, rows) -> "PolynomialTable":
        rows = np.asarray(rows)
        return PolynomialTable(self.values[rows], self.points[rows])


def _check_probability(weights: np.ndarray):
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError("weights must form a probability vector")


def stieltjes_discrete(
    measure: QuadratureRule,
    k: int,
    allow_truncation: bool = True,
    reorthogonalize: bool = True,
) -> JacobiMatrix:
    """Recurrence coefficients of the polynomials orthonormal under a discrete measure.

    Works on polynomial values at the atoms with the weighted inner product
    ``(p, q) = sum_i w_i p(t_i) q(t_i)``. With ``reorthogonalize`` each new
    polynomial is Gram-Schmidt corrected against all earlier ones, which keeps
    the coefficients accurate when k approaches the number of atoms.

    If the recurrence breaks down (fewer distinct atoms than ``k``) the
    result is truncated to the terms achieved, or :class:`BreakdownError` is
    raised when ``allow_truncation`` is false.
    """
    if measure.dim != 1:
        raise ValueError("the Stieltjes procedure needs a univariate measure")
    if k < 1:
        raise ValueError("k must be at least 1")
    t = measure.points
    w = measure.weights
    _check_probability(w)

    phi = np.empty((k, t.size))
    alpha = np.empty(k)
    beta = np.empty(k)
    phi[0] = 1.0
    beta[0] = 1.0
    achieved = k
    prev = np.zeros_like(t)
    for i in range(k):
        cur = phi[i]
        wc = w * cur
        alpha[i] = np.dot(wc * t, cur)
        if i == k - 1:
            break
        nxt = (t - alpha[i]) * cur - beta[i] * prev
        if reorthogonalize:
            for _ in range(2):
                coef = phi[: i + 1] @ (w * nxt)
                nxt = nxt - coef @ phi[: i + 1]
        b = np.sqrt(np.dot(w * nxt, nxt))
        tol = BREAKDOWN_RTOL * max(1.0, np.max(np.abs(alpha[: i + 1])), beta[i])
        if not b > tol:
            achieved = i + 1
            break
        beta[i + 1] = b
        phi[i + 1] = nxt / b
        prev = cur

    if achieved < k:
        if not allow_truncation:
            raise BreakdownError(k, achieved)
        log.info("Stieltjes breakdown: achieved %d of %d terms", achieved, k)
    return JacobiMatrix(alpha[:achieved], beta[1:achieved])


def eval_polynomials(jacobi: JacobiMatrix, points) -> PolynomialTable:
    """Tabulate phi_0 .. phi_{k-1} at ``points`` by the forward three-term recurrence."""
    y = np.asarray(points, dtype=float).reshape(-1)
    k = jacobi.k
    a, b = jacobi.alpha, jacobi.beta
    values = np.empty((y.size, k))
    values[:, 0] = 1.0
    if k > 1:
        values[:, 1] = (y - a[0]) / b[0]
    for j in range(1, k - 1):
        values[:, j + 1] = ((y - a[j]) * values[:, j] - b[j - 1] * values[:, j - 1]) / b[j]
    return PolynomialTable(values, y)


def pseudospectral_coefficients(values_at_nodes, rule: QuadratureRule, table: PolynomialTable) -> np.ndarray:
    """Discrete Fourier coefficients ``c_i = sum_j w_j g_j phi_i(t_j)``.

    ``values_at_nodes`` may carry trailing axes (vector- or matrix-valued g);
    the result then has shape ``(k, *trailing)``.
    """
    g = np.asarray(values_at_nodes, dtype=float)
    if g.shape[0] != rule.size or table.values.shape[0] != rule.size:
        raise ValueError(
            f"length mismatch: {g.shape[0]} values, {rule.size} nodes, "
            f"{table.values.shape[0]} table rows"
        )
    weighted = table.values * rule.weights[:, None]
    return np.tensordot(weighted, g, axes=(0, 0))


def evaluate_expansion(coefficients, table: PolynomialTable) -> np.ndarray:
    """Sum ``sum_i c_i phi_i`` at the table's points."""
    c = np.asarray(coefficients, dtype=float)
    return np.tensordot(table.values[:, : c.shape[0]], c, axes=(1, 0))
