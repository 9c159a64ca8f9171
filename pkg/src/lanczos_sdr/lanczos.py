"""Lanczos on the diagonal matrix of responses: output-space quadrature and polynomials.

Running Lanczos on ``diag(f_i)`` from the start vector ``sqrt(nu_i)`` is the
discrete Stieltjes procedure for the pushforward measure ``sum_i nu_i delta(f_i)``.
The Jacobi matrix gives the output-space Gauss rule and each row of the
Lanczos vectors, divided by ``sqrt(nu_i)``, tabulates the orthonormal
polynomials at ``f_i``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .jacobi import JacobiMatrix
from .orthopoly import PolynomialTable
from .quadrature import WEIGHT_SUM_TOL, QuadratureRule

log = logging.getLogger(__name__)

BREAKDOWN_RTOL = 1e-12
REORTH_PASSES = 2


@dataclass(frozen=True, eq=False)
class LanczosFactorization:
    """``diag(f) V = V T + trailing_beta * trailing_vector e_k^T``."""

    T: JacobiMatrix
    V: np.ndarray
    trailing_beta: float
    trailing_vector: np.ndarray
    response_values: np.ndarray
    weights: np.ndarray
    requested_k: int

    @property
    def achieved_k(self) -> int:
        return self.T.k

    @property
    def size(self) -> int:
        return self.response_values.size

    def orthogonality_error(self) -> float:
        """max |V^T V - I|"""
        G = self.V.T @ self.V
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))

    def residual(self) -> np.ndarray:
        AV = self.response_values[:, None] * self.V
        R = AV - self.V @ self.T.dense()
        R[:, -1] -= self.trailing_beta * self.trailing_vector
        return R

    def to_dict(self, include_vectors: bool = True) -> dict:
        out = {
            "T": self.T.to_dict(),
            "trailing_beta": self.trailing_beta,
            "achieved_k": self.achieved_k,
            "requested_k": self.requested_k,
            "response_values": self.response_values.tolist(),
            "weights": self.weights.tolist(),
        }
        if include_vectors:
            out["V"] = self.V.tolist()
            out["trailing_vector"] = self.trailing_vector.tolist()
        return out

    def to_json(self, include_vectors: bool = True) -> str:
        return json.dumps(self.to_dict(include_vectors))


def lanczos_diagonal(response_values, weights, k: int) -> LanczosFactorization:
    """k steps of Lanczos with full reorthogonalization on ``diag(response_values)``.

    The start vector is ``sqrt(weights)``. If the recurrence breaks down
    (trailing beta at or below ``1e-12 * max|f|``) before k steps, the
    factorization is truncated; check ``achieved_k``.
    """
    f = np.array(response_values, dtype=float).reshape(-1)
    w = np.array(weights, dtype=float).reshape(-1)
    n = f.size
    if w.size != n:
        raise ValueError(f"{n} responses but {w.size} weights")
    if k < 1 or k > n:
        raise ValueError(f"k must satisfy 1 <= k <= N = {n}, got {k}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError("weights must form a probability vector")
    if not np.all(np.isfinite(f)):
        raise ValueError("response values must be finite")

    tol = BREAKDOWN_RTOL * float(np.max(np.abs(f)))
    V = np.empty((n, k), order="F")
    alpha = np.empty(k)
    beta = np.empty(k)
    v = np.sqrt(w)
    v_prev = np.zeros(n)
    b_prev = 0.0
    achieved = k
    for i in range(k):
        V[:, i] = v
        u = f * v
        alpha[i] = np.dot(v, u)
        u -= alpha[i] * v
        if i > 0:
            u -= b_prev * v_prev
        basis = V[:, : i + 1]
        for _ in range(REORTH_PASSES):
            u -= basis @ (basis.T @ u)
        b = float(np.linalg.norm(u))
        if i < k - 1 and b <= tol:
            achieved = i + 1
            break
        if i < k - 1:
            beta[i + 1] = b
            v_prev, v = v, u / b
            b_prev = b

    if achieved < k:
        log.info("Lanczos breakdown: achieved %d of %d steps", achieved, k)
    trailing = u / b if b > 0 else np.zeros(n)
    f.setflags(write=False)
    w.setflags(write=False)
    V = np.ascontiguousarray(V[:, :achieved])
    V.setflags(write=False)
    trailing.setflags(write=False)
    return LanczosFactorization(
        T=JacobiMatrix(alpha[:achieved], beta[1:achieved]),
        V=V,
        trailing_beta=b,
        trailing_vector=trailing,
        response_values=f,
        weights=w,
        requested_k=k,
    )


def composite_factorization(model, input_rule: QuadratureRule, k: int) -> LanczosFactorization:
    """Evaluate ``model`` on every node of ``input_rule`` and run Lanczos on the responses."""
    if input_rule.dim != model.dim:
        raise ValueError(
            f"rule dimension {input_rule.dim} does not match model dimension {model.dim}"
        )
    responses = model.evaluate_nodes(input_rule.nodes)
    return lanczos_diagonal(responses, input_rule.weights, k)


def output_quadrature(fact: LanczosFactorization) -> QuadratureRule:
    """Gauss rule for the pushforward measure from the eigen-decomposition of T."""
    nodes, weights = fact.T.gauss_nodes_weights()
    return QuadratureRule(nodes, weights, "lanczos_output")


def polynomials_at_responses(fact: LanczosFactorization) -> PolynomialTable:
    """Orthonormal polynomials at the responses, ``V[i, j] / sqrt(nu_i)``."""
    if np.any(fact.weights <= 0):
        bad = int(np.flatnonzero(fact.weights <= 0)[0])
        raise ValueError(f"node {bad} has zero weight; polynomial values are undefined")
    values = fact.V / np.sqrt(fact.weights)[:, None]
    values[:, 0] = 1.0  # exact: the first Lanczos vector is sqrt(nu)
    return PolynomialTable(values, fact.response_values)
