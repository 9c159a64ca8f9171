"""Analytic test functions and the maps that standardize their inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import MeasureSpec

SQRT3 = math.sqrt(3.0)

# (name, lower, upper) for the push-pull circuit inputs
OTL_INPUTS = (
    ("Rb1", 50.0, 150.0),
    ("Rb2", 25.0, 70.0),
    ("Rf", 0.5, 3.0),
    ("Rc1", 1.2, 2.5),
    ("Rc2", 0.25, 1.2),
    ("beta", 50.0, 300.0),
)


class ModelEvaluationError(RuntimeError):
    """A model failed, or returned a non-finite value, at a specific node."""

    def __init__(self, index: int, reason):
        self.index = index
        super().__init__(f"model evaluation failed at node {index}: {reason}")


class DomainError(ValueError):
    """A standardized input maps outside the physical input box."""

    def __init__(self, dimension: int, name: str, value: float, lo: float, hi: float):
        self.dimension = dimension
        super().__init__(
            f"input dimension {dimension} ({name}) = {value!r} lies outside [{lo}, {hi}]"
        )


@dataclass(frozen=True)
class StandardizationMap:
    """Per-dimension affine map ``z = (x - shift) / scale`` from physical to standard."""

    shift: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        shift = np.array(self.shift, dtype=float).reshape(-1)
        scale = np.array(self.scale, dtype=float).reshape(-1)
        if shift.shape != scale.shape:
            raise ValueError("shift and scale must have the same length")
        if np.any(~(scale > 0)):
            raise ValueError("scale entries must be positive")
        shift.setflags(write=False)
        scale.setflags(write=False)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "scale", scale)

    @property
    def dim(self) -> int:
        return self.shift.size

    def to_standard(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def to_physical(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.shift


def standardize_uniform(bounds) -> StandardizationMap:
    """Map uniform inputs on a box to uniform on [-sqrt(3), sqrt(3)]^m (mean 0, covariance I)."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = b[:, 0], b[:, 1]
    for i in range(lo.size):
        if not lo[i] < hi[i]:
            raise ValueError(f"dimension {i}: degenerate interval [{lo[i]}, {hi[i]}]")
    return StandardizationMap(0.5 * (lo + hi), (hi - lo) / (2.0 * SQRT3))


@dataclass(frozen=True, eq=False)
class Model:
    """Deterministic scalar function of ``dim`` inputs together with its input measure.

    ``func`` maps an ``(N, dim)`` array to ``N`` responses. ``standardized``
    records whether the measure has zero mean and identity covariance.
    """

    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    measure: MeasureSpec
    description: str = ""
    standardized: bool = True
    params: dict = field(default_factory=dict)
    standardization: StandardizationMap | None = None

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.func(x[None, :])[0])
        return np.asarray(self.func(x), dtype=float)

    def evaluate_nodes(self, nodes, chunk: int = 1 << 16) -> np.ndarray:
        """Evaluate at every row of ``nodes`` in order; failures name the node index."""
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != self.dim:
            raise ValueError(f"expected nodes of shape (N, {self.dim})")
        out = np.empty(nodes.shape[0])
        for start in range(0, nodes.shape[0], chunk):
            block = nodes[start : start + chunk]
            try:
                vals = np.asarray(self.func(block), dtype=float).reshape(-1)
            except Exception as exc:
                for j in range(block.shape[0]):
                    try:
                        self.func(block[j : j + 1])
                    except Exception as inner:
                        raise ModelEvaluationError(start + j, inner) from inner
                raise ModelEvaluationError(start, exc) from exc
            if vals.size != block.shape[0]:
                raise ModelEvaluationError(start, f"returned {vals.size} values for {block.shape[0]} nodes")
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                raise ModelEvaluationError(start + int(bad[0]), f"non-finite value {vals[bad[0]]}")
            out[start : start + block.shape[0]] = vals
        return out


def default_ex1_params(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(3)
    M = rng.standard_normal((3, 3))
    return {"g": g.tolist(), "H": (0.5 * (M + M.T)).tolist()}


def default_ex2_direction(seed: int = 0, dim: int = 5) -> list[float]:
    return np.random.default_rng(seed).standard_normal(dim).tolist()


def model_ex1(g=None, H=None, seed: int = 0) -> Model:
    """Quadratic ``g^T x + x^T H x`` on the uniform measure over [-1, 1]^3.

    The inputs are not standardized (covariance I/3); this model is meant
    for output-quadrature studies only.
    """
    if g is None or H is None:
        defaults = default_ex1_params(seed)
        g = defaults["g"] if g is None else g
        H = defaults["H"] if H is None else H
    g = np.asarray(g, dtype=float).reshape(-1)
    H = np.asarray(H, dtype=float)
    m = g.size
    if H.shape != (m, m):
        raise ValueError(f"H must be {m}x{m}")
    if not np.allclose(H, H.T, rtol=0, atol=1e-14 * max(1.0, np.abs(H).max())):
        raise ValueError("H must be symmetric")

    def f(x):
        return x @ g + np.einsum("ni,ij,nj->n", x, H, x)

    return Model(
        name="ex1",
        dim=m,
        func=f,
        measure=MeasureSpec.uniform([(-1.0, 1.0)] * m),
        description="quadratic g^T x + x^T H x, uniform on [-1,1]^m",
        standardized=False,
        params={"g": g.tolist(), "H": H.tolist()},
    )


def model_ex2(a=None, seed: int = 0) -> Model:
    """Ridge function ``t cos(t / 2 pi)`` with ``t = a^T x`` and standard Gaussian inputs."""
    a = np.asarray(default_ex2_direction(seed) if a is None else a, dtype=float).reshape(-1)
    if not np.any(a != 0):
        raise ValueError("ridge direction a must be nonzero")

    def f(x):
        t = x @ a
        return t * np.cos(t / (2.0 * np.pi))

    return Model(
        name="ex2",
        dim=a.size,
        func=f,
        measure=MeasureSpec.gaussian(a.size),
        description="ridge a^T x cos(a^T x / 2pi), standard Gaussian inputs",
        params={"a": a.tolist()},
    )


def otl_voltage(Rb1, Rb2, Rf, Rc1, Rc2, beta):
    """Midpoint voltage of the push-pull circuit in physical units."""
    vb1 = 12.0 * Rb2 / (Rb1 + Rb2)
    gain = beta * (Rc2 + 9.0)
    denom = gain + Rf
    return (vb1 + 0.74) * gain / denom + 11.35 * Rf / denom + 0.74 * Rf * gain / (denom * Rc1)


def model_ex3_otl(domain_rtol: float = 1e-9) -> Model:
    """Push-pull circuit midpoint voltage on standardized uniform inputs.

    Standard coordinates are uniform on [-sqrt(3), sqrt(3)]^6 and are mapped
    affinely onto the physical ranges before evaluation.
    """
    lo = np.array([r[1] for r in OTL_INPUTS])
    hi = np.array([r[2] for r in OTL_INPUTS])
    smap = standardize_uniform(np.stack([lo, hi], axis=1))
    slack = domain_rtol * (hi - lo)

    def f(z):
        x = smap.to_physical(z)
        outside = (x < lo - slack) | (x > hi + slack)
        if np.any(outside):
            row, col = np.argwhere(outside)[0]
            raise DomainError(int(col), OTL_INPUTS[col][0], float(x[row, col]), lo[col], hi[col])
        x = np.clip(x, lo, hi)
        return otl_voltage(*x.T)

    return Model(
        name="otl",
        dim=6,
        func=f,
        measure=MeasureSpec.uniform([(-SQRT3, SQRT3)] * 6),
        description="OTL push-pull circuit midpoint voltage, standardized uniform inputs",
        standardization=smap,
    )


def model_linear(a, measure: MeasureSpec | None = None) -> Model:
    """``a^T x``; with a univariate uniform measure this is the identity-map oracle."""
    a = np.asarray(a, dtype=float).reshape(-1)
    measure = MeasureSpec.gaussian(a.size) if measure is None else measure
    if measure.dim != a.size:
        raise ValueError("measure dimension must match len(a)")
    return Model(
        name="linear",
        dim=a.size,
        func=lambda x: x @ a,
        measure=measure,
        description="linear a^T x",
        standardized=_is_standardized(measure),
        params={"a": a.tolist(), "measure": measure.to_dict()},
    )


def model_constant(value: float, measure: MeasureSpec) -> Model:
    value = float(value)
    return Model(
        name="constant",
        dim=measure.dim,
        func=lambda x: np.full(x.shape[0], value),
        measure=measure,
        description="constant response",
        standardized=_is_standardized(measure),
        params={"value": value, "measure": measure.to_dict()},
    )


def _is_standardized(measure: MeasureSpec) -> bool:
    if measure.kind == "gaussian_standard":
        return True
    return all(math.isclose(lo, -SQRT3) and math.isclose(hi, SQRT3) for lo, hi in measure.bounds)


def build_model(name: str, params: dict | None = None) -> Model:
    """Construct a registered model from a name and a parameter record."""
    params = dict(params or {})
    if name == "ex1":
        return model_ex1(params.get("g"), params.get("H"), seed=params.get("seed", 0))
    if name == "ex2":
        return model_ex2(params.get("a"), seed=params.get("seed", 0))
    if name == "otl":
        return model_ex3_otl()
    if name in ("linear", "constant"):
        measure = params.get("measure")
        measure = MeasureSpec.from_dict(measure) if measure else None
        if name == "linear":
            return model_linear(params.get("a", [1.0]), measure)
        if measure is None:
            measure = MeasureSpec.gaussian(int(params.get("dim", 1)))
        return model_constant(params.get("value", 0.0), measure)
    raise ValueError(f"unknown model {name!r}; known: {sorted(MODEL_NAMES)}")


MODEL_NAMES = ("ex1", "ex2", "otl", "linear", "constant")
