"""Discrete probability measures: Gauss, Clenshaw-Curtis, tensor and Monte Carlo rules.

Every rule carries probability weights (nonnegative, summing to one); raw
Lebesgue weights are never exposed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .jacobi import JacobiMatrix

DEFAULT_NODE_BUDGET = 30_000_000
WEIGHT_SUM_TOL = 1e-12

RULE_KINDS = ("gauss", "clenshaw_curtis", "tensor", "monte_carlo", "lanczos_output")
MEASURE_KINDS = ("uniform_box", "gaussian_standard")


class NodeBudgetError(ValueError):
    """Raised when a tensor product would exceed the configured node budget."""

    def __init__(self, requested: int, budget: int):
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"tensor rule would have {requested} nodes, exceeding the node "
            f"budget of {budget}"
        )


def node_budget() -> int:
    """Node budget for tensor rules; ``LANCZOS_SDR_NODE_BUDGET`` overrides the default."""
    raw = os.environ.get("LANCZOS_SDR_NODE_BUDGET")
    return int(float(raw)) if raw else DEFAULT_NODE_BUDGET


@dataclass(frozen=True)
class MeasureSpec:
    """A product input measure: uniform on a box, or the standard Gaussian."""

    kind: str
    dim: int
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ValueError(f"unsupported measure kind {self.kind!r}")
        if int(self.dim) < 1:
            raise ValueError("measure dimension must be positive")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind == "uniform_box":
            if self.bounds is None or len(self.bounds) != self.dim:
                raise ValueError("uniform_box needs one (lower, upper) pair per dimension")
            bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
            for i, (lo, hi) in enumerate(bounds):
                if not lo < hi:
                    raise ValueError(f"dimension {i}: lower bound {lo} is not below upper {hi}")
            object.__setattr__(self, "bounds", bounds)
        elif self.bounds is not None:
            raise ValueError("gaussian_standard takes no bounds")

    @classmethod
    def uniform(cls, bounds) -> "MeasureSpec":
        bounds = tuple(tuple(b) for b in bounds)
        return cls("uniform_box", len(bounds), bounds)

    @classmethod
    def gaussian(cls, dim: int) -> "MeasureSpec":
        return cls("gaussian_standard", dim)

    def marginal(self, i: int) -> "MeasureSpec":
        if self.kind == "uniform_box":
            return MeasureSpec("uniform_box", 1, (self.bounds[i],))
        return MeasureSpec("gaussian_standard", 1)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.bounds is not None:
            out["bounds"] = [list(b) for b in self.bounds]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureSpec":
        bounds = data.get("bounds")
        if bounds is not None:
            bounds = tuple(tuple(b) for b in bounds)
        return cls(data["kind"], data.get("dim", len(bounds) if bounds else 1), bounds)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes in R^dim with probability weights."""

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if nodes.ndim != 2 or nodes.shape[1] < 1:
            raise ValueError("nodes must be an (N, dim) array")
        if nodes.shape[0] != weights.size:
            raise ValueError(
                f"{nodes.shape[0]} nodes but {weights.size} weights"
            )
        if weights.size == 0:
            raise ValueError("a rule needs at least one node")
        if self.kind not in RULE_KINDS:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if np.any(weights < 0):
            raise ValueError("quadrature weights must be nonnegative")
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if self.kind == "gauss" and nodes.shape[1] == 1 and np.any(np.diff(nodes[:, 0]) <= 0):
            raise ValueError("univariate Gauss nodes must be strictly increasing")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def __len__(self):
        return self.size

    @property
    def points(self) -> np.ndarray:
        """Node abscissae of a univariate rule."""
        if self.dim != 1:
            raise ValueError("points is only defined for univariate rules")
        return self.nodes[:, 0]

    def integrate(self, values) -> np.ndarray:
        """Weighted sum of ``values`` (first axis indexed by node)."""
        values = np.asarray(values, dtype=float)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "kind": self.kind,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
        }

    def to_json(self) -> str:
        # float repr round-trips, which covers 17 significant digits
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureRule":
        nodes = np.asarray(data["nodes"], dtype=float).reshape(-1, int(data["dim"]))
        return cls(nodes, np.asarray(data["weights"], dtype=float), data["kind"])

    @classmethod
    def from_json(cls, text: str) -> "QuadratureRule":
        return cls.from_dict(json.loads(text))


def _require_univariate(measure: MeasureSpec):
    if measure.dim != 1:
        raise ValueError(f"expected a univariate measure, got dimension {measure.dim}")


def reference_jacobi(measure: MeasureSpec, k: int) -> JacobiMatrix:
    """Closed-form Jacobi matrix of the orthonormal polynomials of ``measure``.

    Uniform measures give (shifted, scaled) Legendre coefficients; the
    standard Gaussian gives probabilists' Hermite coefficients.
    """
    _require_univariate(measure)
    if k < 1:
        raise ValueError("k must be at least 1")
    i = np.arange(1, k, dtype=float)
    if measure.kind == "uniform_box":
        lo, hi = measure.bounds[0]
        alpha = np.full(k, 0.5 * (lo + hi))
        beta = 0.5 * (hi - lo) * i / np.sqrt(4.0 * i * i - 1.0)
    elif measure.kind == "gaussian_standard":
        alpha = np.zeros(k)
        beta = np.sqrt(i)
    else:  # pragma: no cover - MeasureSpec rejects other kinds
        raise ValueError(f"unsupported measure kind {measure.kind!r}")
    return JacobiMatrix(alpha, beta)


def gauss_rule(measure: MeasureSpec, k: int) -> QuadratureRule:
    """k-point Gauss-Christoffel rule for a univariate measure."""
    nodes, weights = reference_jacobi(measure, k).gauss_nodes_weights()
    # both supported measures are symmetric about their center
    center = 0.0 if measure.kind == "gaussian_standard" else 0.5 * sum(measure.bounds[0])
    nodes = center + 0.5 * ((nodes - center) - (nodes[::-1] - center))
    weights = 0.5 * (weights + weights[::-1])
    return QuadratureRule(nodes, weights, "gauss")


def clenshaw_curtis_rule(level: int) -> QuadratureRule:
    """Nested Clenshaw-Curtis rule on [-1, 1] for the uniform probability measure.

    Level ``M`` has ``2**M + 1`` nodes (a single midpoint node at level 0), so
    every level contains the nodes of the previous one exactly.
    """
    if level < 0:
        raise ValueError("Clenshaw-Curtis level must be nonnegative")
    if level == 0:
        return QuadratureRule(np.zeros(1), np.ones(1), "clenshaw_curtis")
    n = 2**level
    j = np.arange(n + 1)
    # sin form keeps the nodes exactly antisymmetric and exactly nested
    nodes = np.sin(np.pi * (n - 2 * j) / (2 * n))
    theta = np.pi * j / n
    weights = np.empty(n + 1)
    # closed-form integrals of the cosine (Lagrange) basis, per Waldvogel/Trefethen
    interior = j[1:-1]
    v = np.ones(interior.size)
    for kk in range(1, n // 2):
        v -= 2.0 * np.cos(2 * kk * theta[interior]) / (4 * kk * kk - 1)
    v -= np.cos(n * theta[interior]) / (n * n - 1)
    weights[1:-1] = 2.0 * v / n
    weights[0] = weights[-1] = 1.0 / (n * n - 1)
    weights *= 0.5  # Lebesgue weights on [-1, 1] -> probability weights
    order = np.argsort(nodes, kind="stable")
    return QuadratureRule(nodes[order], weights[order], "clenshaw_curtis")


def tensor_size(univariate: Sequence[QuadratureRule]) -> int:
    return math.prod(r.size for r in univariate)


def tensor_rule(univariate: Sequence[QuadratureRule], budget: int | None = None) -> QuadratureRule:
    """Tensor product of univariate rules; the last dimension varies fastest."""
    univariate = list(univariate)
    if not univariate:
        raise ValueError("need at least one univariate rule")
    for i, r in enumerate(univariate):
        if r.dim != 1:
            raise ValueError(f"rule {i} is not univariate")
    budget = node_budget() if budget is None else budget
    count = tensor_size(univariate)
    if count > budget:
        raise NodeBudgetError(count, budget)
    grids = np.meshgrid(*[r.points for r in univariate], indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = univariate[0].weights
    for r in univariate[1:]:
        weights = np.multiply.outer(weights, r.weights).reshape(-1)
    return QuadratureRule(nodes, weights, "tensor")


def gauss_tensor_rule(measure: MeasureSpec, points_per_dim: int, budget: int | None = None) -> QuadratureRule:
    """Tensor Gauss rule with ``points_per_dim`` nodes along each input."""
    rules = [gauss_rule(measure.marginal(i), points_per_dim) for i in range(measure.dim)]
    if measure.dim == 1:
        return rules[0]
    return tensor_rule(rules, budget)


def clenshaw_curtis_tensor_rule(level: int, dim: int, budget: int | None = None) -> QuadratureRule:
    return tensor_rule([clenshaw_curtis_rule(level)] * dim, budget)


def nested_indices(coarse: QuadratureRule, fine: QuadratureRule) -> np.ndarray:
    """Positions in ``fine`` of every node of ``coarse`` (exact float matching).

    Raises ``ValueError`` if some coarse node is missing from ``fine``.
    """
    lookup = {tuple(row): i for i, row in enumerate(fine.nodes.tolist())}
    out = np.empty(coarse.size, dtype=np.int64)
    for i, row in enumerate(coarse.nodes.tolist()):
        try:
            out[i] = lookup[tuple(row)]
        except KeyError:
            raise ValueError(f"coarse node {i} is not a node of the finer rule") from None
    return out


def monte_carlo_rule(measure: MeasureSpec, n: int, seed: int) -> QuadratureRule:
    """``n`` i.i.d. draws from ``measure`` with equal weights ``1/n``."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    if measure.kind == "gaussian_standard":
        nodes = rng.standard_normal((n, measure.dim))
    else:
        lo = np.array([b[0] for b in measure.bounds])
        hi = np.array([b[1] for b in measure.bounds])
        nodes = rng.uniform(lo, hi, size=(n, measure.dim))
    return QuadratureRule(nodes, np.full(n, 1.0 / n), "monte_carlo")
