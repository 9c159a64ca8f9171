"""Convergence studies: nested quadrature, (N, k) matrix grids, slicing rates, Monte Carlo parity.

Every runner takes an :class:`ExperimentConfig` and returns a
:class:`ConvergenceReport` whose rows are ``(study, param_name, param_value,
metric, value, wall_ms)``. Apart from the wall-time column a report is a
deterministic function of its config.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lanczos import composite_factorization, output_quadrature, polynomials_at_responses
from .models import Model, build_model
from .quadrature import (
    QuadratureRule,
    clenshaw_curtis_rule,
    gauss_tensor_rule,
    monte_carlo_rule,
    nested_indices,
    tensor_rule,
)
from .sdr import (
    frobenius_distance,
    lsave_from_factorization,
    lsir_from_factorization,
    relative_error,
    save,
    sir,
)

RULE_SPECS = ("gauss", "clenshaw_curtis", "monte_carlo")
CSV_COLUMNS = ("study", "param_name", "param_value", "metric", "value", "wall_ms")
_SLICED_TO_LANCZOS = {"SIR": "LSIR", "SAVE": "LSAVE"}


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


class ReferenceRunError(RuntimeError):
    """The reference computation failed, so no errors can be measured."""


def worker_count() -> int:
    """Worker threads for independent cells; ``LANCZOS_SDR_WORKERS`` overrides the default of 1."""
    raw = os.environ.get("LANCZOS_SDR_WORKERS")
    return max(1, int(raw)) if raw else 1


def _int_grid(values, name: str) -> list[int]:
    if values is None:
        return []
    if isinstance(values, (int, float)):
        values = [values]
    try:
        grid = [int(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigError(f"{name} grid must be a list of integers") from None
    if any(int(v) != v for v in values):
        raise ConfigError(f"{name} grid must hold integers")
    if grid != sorted(grid) or len(set(grid)) != len(grid):
        raise ConfigError(f"{name} grid must be sorted ascending without repeats")
    if grid and grid[0] < 0:
        raise ConfigError(f"{name} grid must be nonnegative")
    return grid


@dataclass(frozen=True)
class RuleSpec:
    """One input rule: Gauss points per dimension, a Clenshaw-Curtis level, or N Monte Carlo draws."""

    kind: str
    size: int
    seed: int = 0

    def build(self, model: Model) -> QuadratureRule:
        measure = model.measure
        if self.kind == "gauss":
            return gauss_tensor_rule(measure, self.size)
        if self.kind == "monte_carlo":
            return monte_carlo_rule(measure, self.size, self.seed)
        if measure.kind != "uniform_box":
            raise ConfigError("Clenshaw-Curtis rules need a bounded (uniform) input measure")
        base = clenshaw_curtis_rule(self.size)
        rules = []
        for lo, hi in measure.bounds:
            # the same affine map on every level keeps nested nodes bit-identical
            pts = lo + (base.points + 1.0) * (0.5 * (hi - lo))
            rules.append(QuadratureRule(pts, base.weights, "clenshaw_curtis"))
        return rules[0] if len(rules) == 1 else tensor_rule(rules)

    def node_count(self, dim: int) -> int:
        if self.kind == "gauss":
            return self.size**dim
        if self.kind == "clenshaw_curtis":
            return (1 if self.size == 0 else 2**self.size + 1) ** dim
        return self.size

    @property
    def param_name(self) -> str:
        return {"gauss": "points_per_dim", "clenshaw_curtis": "level", "monte_carlo": "N"}[self.kind]


@dataclass(frozen=True)
class ExperimentConfig:
    """A study description, usually loaded from JSON.

    ``rule_grid`` holds Gauss points per dimension, Clenshaw-Curtis levels or
    Monte Carlo sample counts depending on ``rule_kind``. The reference is a
    Gauss or Clenshaw-Curtis run with ``reference_size`` and ``reference_k``.
    """

    model: str
    model_params: dict
    rule_kind: str
    rule_grid: list
    seed: int = 0
    estimators: tuple = ("LSIR",)
    k_grid: list = field(default_factory=list)
    R_grid: list = field(default_factory=list)
    reference_kind: str | None = None
    reference_size: int | None = None
    reference_k: int | None = None
    csv_path: str | None = None
    json_path: str | None = None

    def __post_init__(self):
        if self.rule_kind not in RULE_SPECS:
            raise ConfigError(f"rule kind must be one of {RULE_SPECS}, got {self.rule_kind!r}")
        object.__setattr__(self, "rule_grid", _int_grid(self.rule_grid, "rule"))
        object.__setattr__(self, "k_grid", _int_grid(self.k_grid, "k"))
        object.__setattr__(self, "R_grid", _int_grid(self.R_grid, "R"))
        if not self.rule_grid:
            raise ConfigError("rule grid must be nonempty")
        if self.k_grid and self.k_grid[0] < 1:
            raise ConfigError("k values must be at least 1")
        if self.R_grid and self.R_grid[0] < 2:
            raise ConfigError("R values must be at least 2")
        ests = tuple(self.estimators)
        for e in ests:
            if e not in ("SIR", "SAVE", "LSIR", "LSAVE"):
                raise ConfigError(f"unknown estimator {e!r}")
        object.__setattr__(self, "estimators", ests)
        if self.reference_kind is not None:
            if self.reference_kind not in ("gauss", "clenshaw_curtis"):
                raise ConfigError("the reference must be a Gauss or Clenshaw-Curtis rule")
            if self.reference_size is None or self.reference_k is None:
                raise ConfigError("reference needs both a size and k")
            if self.k_grid and self.reference_k < self.k_grid[-1]:
                raise ConfigError(
                    f"reference k={self.reference_k} is below the largest grid k={self.k_grid[-1]}"
                )
            # node counts are comparable only within one rule family
            if self.reference_kind == self.rule_kind and self.reference_size < self.rule_grid[-1]:
                raise ConfigError(
                    f"reference size {self.reference_size} is below the largest grid value {self.rule_grid[-1]}"
                )

    @property
    def has_reference(self) -> bool:
        return self.reference_kind is not None

    def rule_specs(self) -> list[RuleSpec]:
        return [RuleSpec(self.rule_kind, n, self.seed) for n in self.rule_grid]

    def reference_spec(self) -> RuleSpec:
        if not self.has_reference:
            raise ConfigError("this study needs a reference run")
        return RuleSpec(self.reference_kind, self.reference_size)

    def build_model(self) -> Model:
        try:
            return build_model(self.model, self.model_params)
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"bad model {self.model!r}: {exc}") from exc

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            model = data["model"]
            rule = data["rule"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"config is missing {exc}") from None
        if isinstance(model, str):
            model = {"name": model}
        ref = data.get("reference") or {}
        out = data.get("output") or {}
        try:
            return cls(
                model=model["name"],
                model_params=dict(model.get("params") or {}),
                rule_kind=rule["kind"],
                rule_grid=rule["grid"],
                seed=int(rule.get("seed", 0)),
                estimators=tuple(data.get("estimators", ("LSIR",))),
                k_grid=data.get("k", []),
                R_grid=data.get("R", []),
                reference_kind=ref.get("kind") if ref else None,
                reference_size=ref.get("size"),
                reference_k=ref.get("k"),
                csv_path=out.get("csv"),
                json_path=out.get("json"),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing {exc}") from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {
            "model": {"name": self.model, "params": self.model_params},
            "rule": {"kind": self.rule_kind, "grid": self.rule_grid, "seed": self.seed},
            "estimators": list(self.estimators),
            "k": self.k_grid,
            "R": self.R_grid,
        }
        if self.has_reference:
            out["reference"] = {"kind": self.reference_kind, "size": self.reference_size, "k": self.reference_k}
        if self.csv_path or self.json_path:
            out["output"] = {"csv": self.csv_path, "json": self.json_path}
        return out


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(log x, log y)``; ``residual`` is the 2-norm of the misfit."""

    slope: float
    intercept: float
    residual: float
    points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual, "points": self.points}


def fit_slope(x, y) -> SlopeFit:
    """Log-log slope over at least three positive points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise ValueError("a slope needs at least three points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fits need positive data")
    A = np.stack([np.log(x), np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    misfit = A @ coef - np.log(y)
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.linalg.norm(misfit)), int(x.size))


@dataclass(frozen=True)
class Row:
    study: str
    param_name: str
    param_value: float
    metric: str
    value: float
    wall_ms: float


@dataclass
class ConvergenceReport:
    """Rows of measured quantities plus fitted log-log slopes keyed by metric."""

    study: str
    config: dict
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, param_name, param_value, metric, value, wall_ms=0.0, study=None):
        self.rows.append(
            Row(study or self.study, param_name, param_value, metric, float(value), float(wall_ms))
        )

    def series(self, metric: str, study: str | None = None):
        """``(param_values, values)`` for one metric, in insertion order."""
        rows = [r for r in self.rows if r.metric == metric and (study is None or r.study == study)]
        return np.array([r.param_value for r in rows], dtype=float), np.array([r.value for r in rows])

    def fit(self, metric: str, x=None, study: str | None = None, key: str | None = None):
        """Fit and store the slope of ``metric``; skipped when fewer than three positive values exist."""
        px, y = self.series(metric, study)
        x = px if x is None else np.asarray(x, dtype=float)
        keep = (y > 0) & (x > 0)
        if keep.sum() < 3:
            return None
        fit = fit_slope(x[keep], y[keep])
        self.slopes[key or metric] = fit
        return fit

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.study, r.param_name, _fmt(r.param_value), r.metric, repr(r.value), f"{r.wall_ms:.3f}"])
        return buf.getvalue()

    def to_dict(self, include_timing: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = {"study": r.study, "param_name": r.param_name, "param_value": r.param_value,
                 "metric": r.metric, "value": r.value}
            if include_timing:
                d["wall_ms"] = r.wall_ms
            rows.append(d)
        return {
            "study": self.study,
            "config": self.config,
            "rows": rows,
            "slopes": {k: v.to_dict() for k, v in self.slopes.items()},
            "extra": self.extra,
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)

    def write(self, csv_path=None, json_path=None):
        for path, text in ((csv_path, self.to_csv), (json_path, self.to_json)):
            if path:
                Path(path).parent.mkdir(parents=True, exist_ok=True)
                Path(path).write_text(text())


def _fmt(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _ms(t0: float) -> float:
    return 1e3 * (time.perf_counter() - t0)


def _map_cells(func, cells):
    workers = worker_count()
    if workers == 1 or len(cells) < 2:
        return [func(c) for c in cells]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(func, cells))  # map keeps the input order


def _report(study: str, config: ExperimentConfig, model: Model) -> ConvergenceReport:
    cfg = config.to_dict()
    cfg["model"]["params"] = dict(model.params)  # records seeded defaults actually used
    return ConvergenceReport(study, cfg)


# ---------------------------------------------------------------- quadrature


def run_quadrature_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Subsequent differences of output-space Gauss rules and polynomials over nested levels.

    For each level after the first: per-index node and weight differences, and
    per-degree maximum polynomial differences on the nodes the two levels share.
    """
    if config.rule_kind != "clenshaw_curtis":
        raise ConfigError("quadrature convergence needs nested Clenshaw-Curtis levels")
    if not config.k_grid:
        raise ConfigError("quadrature convergence needs k")
    model = config.build_model()
    k = config.k_grid[-1]
    report = _report("quadrature", config, model)

    levels = []
    for spec in config.rule_specs():
        t0 = time.perf_counter()
        rule = spec.build(model)
        fact = composite_factorization(model, rule, min(k, rule.size))
        out = output_quadrature(fact)
        table = polynomials_at_responses(fact)
        levels.append((spec.size, rule, out.points, out.weights, table, _ms(t0)))
        report.add("level", spec.size, "nodes", rule.size, _ms(t0))
        report.add("level", spec.size, "achieved_k", fact.achieved_k)

    sizes = []
    for (_, crule, cn, cw, ctab, _), (lvl, frule, fn, fw, ftab, wall) in zip(levels, levels[1:]):
        idx = nested_indices(crule, frule)
        kk = min(cn.size, fn.size)
        dn = np.abs(fn[:kk] - cn[:kk])
        dw = np.abs(fw[:kk] - cw[:kk])
        jj = min(ctab.k, ftab.k)
        dp = np.max(np.abs(ftab.values[idx, :jj] - ctab.values[:, :jj]), axis=0)
        for i in range(kk):
            report.add("level", lvl, f"node_diff[{i}]", dn[i], wall)
            report.add("level", lvl, f"weight_diff[{i}]", dw[i], wall)
        for j in range(jj):
            report.add("level", lvl, f"poly_diff[{j}]", dp[j], wall)
        report.add("level", lvl, "max_node_diff", dn.max(), wall)
        report.add("level", lvl, "max_weight_diff", dw.max(), wall)
        report.add("level", lvl, "max_poly_diff", dp.max(), wall)
        sizes.append(frule.size)
    for metric in ("max_node_diff", "max_weight_diff", "max_poly_diff"):
        report.fit(metric, x=sizes)
    return report


# ---------------------------------------------------------------- matrices


def _matrices(model, rule, ks, estimators):
    """Estimator matrices for each k from one factorization at max(k)."""
    fact = composite_factorization(model, rule, min(ks[-1], rule.size))
    info = {"rule": {"kind": rule.kind, "N": int(rule.size), "dim": int(rule.dim)}, "model": model.name}
    out = {}
    for k in ks:
        if "LSIR" in estimators:
            out["LSIR", k] = lsir_from_factorization(rule.nodes, fact, k, info)[0]
        if "LSAVE" in estimators:
            out["LSAVE", k] = lsave_from_factorization(rule.nodes, fact, k, info)[0]
    return out, fact


def _reference(config: ExperimentConfig, model: Model, estimators):
    spec = config.reference_spec()
    try:
        rule = spec.build(model)
        mats, _ = _matrices(model, rule, [config.reference_k], estimators)
    except ConfigError:
        raise
    except Exception as exc:
        raise ReferenceRunError(f"reference run failed: {exc}") from exc
    return {est: mats[est, config.reference_k] for est in estimators}


def run_matrix_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Relative-error grid over (rule size, k) against a reference run, plus subsequent differences.

    Rows: ``rel_error[EST,k=..]`` per rule size, ``diff_N[EST,k=..]`` between
    consecutive rule sizes and ``diff_k[EST,<size>=..]`` between consecutive k.
    ``extra["grid"][EST]`` holds the error surface as a nested list
    (rows: rule sizes, columns: k).
    """
    if not config.k_grid:
        raise ConfigError("matrix convergence needs a k grid")
    estimators = [e for e in config.estimators if e in ("LSIR", "LSAVE")]
    if not estimators:
        raise ConfigError("matrix convergence runs LSIR and/or LSAVE")
    model = config.build_model()
    report = _report("matrix", config, model)
    ref = _reference(config, model, estimators)
    ks = config.k_grid
    specs = config.rule_specs()

    def cell(spec):
        t0 = time.perf_counter()
        rule = spec.build(model)
        mats, fact = _matrices(model, rule, ks, estimators)
        return rule.size, mats, fact.orthogonality_error(), _ms(t0)

    results = _map_cells(cell, specs)
    pname = specs[0].param_name
    grid = {e: np.full((len(specs), len(ks)), np.nan) for e in estimators}
    for i, (spec, (n, mats, orth, wall)) in enumerate(zip(specs, results)):
        report.add(pname, spec.size, "nodes", n, wall)
        report.add(pname, spec.size, "orthogonality_error", orth, wall)
        for e in estimators:
            for j, k in enumerate(ks):
                err = relative_error(mats[e, k], ref[e])
                grid[e][i, j] = err
                report.add(pname, spec.size, f"rel_error[{e},k={k}]", err, wall)
                if i > 0:
                    prev = results[i - 1][1][e, k]
                    report.add(pname, spec.size, f"diff_N[{e},k={k}]", frobenius_distance(mats[e, k], prev), wall,
                               study="matrix_diff_N")
            for k0, k1 in zip(ks, ks[1:]):
                report.add("k", k1, f"diff_k[{e},{pname}={spec.size}]",
                           frobenius_distance(mats[e, k1], mats[e, k0]), wall, study="matrix_diff_k")
    sizes = [r[0] for r in results]
    for e in estimators:
        for k in ks:
            report.fit(f"diff_N[{e},k={k}]", x=sizes[1:], study="matrix_diff_N")
    report.extra["grid"] = {
        e: {pname: [s.size for s in specs], "k": list(ks), "rel_error": grid[e].tolist()} for e in estimators
    }
    return report


# ---------------------------------------------------------------- slicing


def run_slice_comparison(config: ExperimentConfig) -> ConvergenceReport:
    """Frobenius distance of SIR / SAVE from the LSIR / LSAVE reference as the slice count R grows."""
    if not config.has_reference:
        raise ConfigError("slice comparison needs a reference (LSIR/LSAVE) run")
    if not config.R_grid:
        raise ConfigError("slice comparison needs an R grid")
    sliced = [e for e in config.estimators if e in _SLICED_TO_LANCZOS] or ["SIR", "SAVE"]
    model = config.build_model()
    report = _report("slices", config, model)
    ref = _reference(config, model, [_SLICED_TO_LANCZOS[e] for e in sliced])

    for spec in config.rule_specs():
        rule = spec.build(model)
        y = model.evaluate_nodes(rule.nodes)
        degenerate = bool(np.all(y == y[0]))
        for e in sliced:
            estimate = sir if e == "SIR" else save
            metric = f"frobenius[{e},{spec.param_name}={spec.size}]"
            for R in config.R_grid:
                if R > rule.size:
                    raise ConfigError(f"R={R} exceeds the {rule.size} samples")
                t0 = time.perf_counter()
                C = estimate(rule.nodes, y, R, allow_degenerate=degenerate)
                err = frobenius_distance(C, ref[_SLICED_TO_LANCZOS[e]])
                report.add("R", R, metric, err, _ms(t0))
            report.fit(metric, key=e if len(config.rule_grid) == 1 else metric)
    return report


# ---------------------------------------------------------------- Monte Carlo


def run_mc_mode_comparison(config: ExperimentConfig) -> ConvergenceReport:
    """SIR over R and LSIR over k on the same Monte Carlo samples, against a quadrature reference.

    ``SIR[best]`` is the per-N minimum error over the R grid. With ``SAVE``
    and ``LSAVE`` among the estimators the same comparison is made for them.
    """
    if config.rule_kind != "monte_carlo":
        raise ConfigError("Monte Carlo comparison needs a monte_carlo rule grid")
    if not (config.R_grid and config.k_grid):
        raise ConfigError("Monte Carlo comparison needs both R and k grids")
    model = config.build_model()
    pairs = [("SIR", "LSIR")]
    if "SAVE" in config.estimators or "LSAVE" in config.estimators:
        pairs.append(("SAVE", "LSAVE"))
    report = _report("mc", config, model)
    ref = _reference(config, model, [p[1] for p in pairs])

    for spec in config.rule_specs():
        rule = spec.build(model)
        y = model.evaluate_nodes(rule.nodes)
        N = rule.size
        for sliced, lanczos in pairs:
            estimate = sir if sliced == "SIR" else save
            errs = []
            for R in config.R_grid:
                if R > N or (sliced == "SAVE" and 2 * R > N):
                    continue
                t0 = time.perf_counter()
                err = relative_error(estimate(rule.nodes, y, R), ref[lanczos])
                errs.append(err)
                report.add("N", N, f"{sliced}[R={R}]", err, _ms(t0))
            if errs:
                report.add("N", N, f"{sliced}[best]", min(errs))
            t0 = time.perf_counter()
            mats, _ = _matrices(model, rule, config.k_grid, [lanczos])
            wall = _ms(t0)
            for k in config.k_grid:
                report.add("N", N, f"{lanczos}[k={k}]", relative_error(mats[lanczos, k], ref[lanczos]), wall)
    for metric in sorted({r.metric for r in report.rows}):
        report.fit(metric)
    return report


STUDIES = {
    "converge-quad": run_quadrature_convergence,
    "converge-matrix": run_matrix_convergence,
    "compare-slices": run_slice_comparison,
    "compare-mc": run_mc_mode_comparison,
}


def rule_from_config(config: ExperimentConfig, model: Model) -> QuadratureRule:
    """The largest rule in the config's grid, for single-run commands."""
    return config.rule_specs()[-1].build(model)

