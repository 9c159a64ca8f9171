"""Command-line entry point: ``lanczos-sdr <verb> CONFIG.json``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures (breakdown, loss of definiteness, failed model evaluation, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import STUDIES, ConfigError, ExperimentConfig, ReferenceRunError, rule_from_config
from .jacobi import EigenConvergenceError
from .lanczos import composite_factorization, output_quadrature
from .models import DomainError, ModelEvaluationError
from .orthopoly import BreakdownError
from .quadrature import NodeBudgetError
from .sdr import PSDViolation, lsave_from_factorization, lsir_from_factorization, save, sir

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (
    BreakdownError,
    PSDViolation,
    EigenConvergenceError,
    ModelEvaluationError,
    DomainError,
    ReferenceRunError,
    ArithmeticError,
    np.linalg.LinAlgError,
)
CONFIG_ERRORS = (ConfigError, NodeBudgetError, OSError, ValueError, KeyError, TypeError)

log = logging.getLogger("lanczos_sdr")


def _emit(csv_text: str, payload: dict, config: ExperimentConfig, args):
    csv_path = args.csv or config.csv_path
    json_path = args.json or config.json_path
    if csv_path:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        Path(csv_path).write_text(csv_text)
    if json_path:
        Path(json_path).parent.mkdir(parents=True, exist_ok=True)
        Path(json_path).write_text(json.dumps(payload, indent=2))
    if not csv_path:
        sys.stdout.write(csv_text)


def cmd_quadrature(config: ExperimentConfig, args):
    model = config.build_model()
    if not config.k_grid:
        raise ConfigError("the quadrature command needs k")
    rule = rule_from_config(config, model)
    fact = composite_factorization(model, rule, min(config.k_grid[-1], rule.size))
    out = output_quadrature(fact)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "node", "weight"])
    for i, (x, w) in enumerate(zip(out.points, out.weights)):
        writer.writerow([i, repr(float(x)), repr(float(w))])
    payload = {
        "config": config.to_dict(),
        "model_params": model.params,
        "achieved_k": fact.achieved_k,
        "jacobi": fact.T.to_dict(),
        "rule": out.to_dict(),
        "orthogonality_error": fact.orthogonality_error(),
    }
    _emit(buf.getvalue(), payload, config, args)


def cmd_estimate(config: ExperimentConfig, args):
    model = config.build_model()
    rule = rule_from_config(config, model)
    matrices = {}
    lanczos = [e for e in config.estimators if e in ("LSIR", "LSAVE")]
    if lanczos:
        if not config.k_grid:
            raise ConfigError("LSIR/LSAVE need k")
        fact = composite_factorization(model, rule, min(config.k_grid[-1], rule.size))
        if "LSIR" in lanczos:
            matrices["LSIR"] = lsir_from_factorization(rule.nodes, fact)[0]
        if "LSAVE" in lanczos:
            matrices["LSAVE"] = lsave_from_factorization(rule.nodes, fact)[0]
    sliced = [e for e in config.estimators if e in ("SIR", "SAVE")]
    if sliced:
        if not config.R_grid:
            raise ConfigError("SIR/SAVE need R")
        y = model.evaluate_nodes(rule.nodes)
        for e in sliced:
            matrices[e] = (sir if e == "SIR" else save)(rule.nodes, y, config.R_grid[-1])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["estimator", "index", "eigenvalue"])
    for name, C in matrices.items():
        for i, lam in enumerate(C.eigenvalues()):
            writer.writerow([name, i, repr(float(lam))])
    payload = {
        "config": config.to_dict(),
        "model_params": model.params,
        "matrices": {name: C.to_dict() for name, C in matrices.items()},
    }
    _emit(buf.getvalue(), payload, config, args)


def _study_command(study):
    def run(config: ExperimentConfig, args):
        report = STUDIES[study](config)
        _emit(report.to_csv(), report.to_dict(), config, args)
        for name, fit in report.slopes.items():
            log.info("slope %s: %.3f (residual %.2e, %d points)", name, fit.slope, fit.residual, fit.points)

    return run


COMMANDS = {
    "quadrature": (cmd_quadrature, "output-space Gauss rule of a model under one input rule"),
    "estimate": (cmd_estimate, "SIR / SAVE / LSIR / LSAVE matrices and their eigenvalues"),
    "converge-quad": (_study_command("converge-quad"), "nested Clenshaw-Curtis convergence of the output rule"),
    "converge-matrix": (_study_command("converge-matrix"), "(rule size, k) error grid for LSIR / LSAVE"),
    "compare-slices": (_study_command("compare-slices"), "SIR / SAVE error against the slice count R"),
    "compare-mc": (_study_command("compare-mc"), "SIR and LSIR on shared Monte Carlo samples"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanczos-sdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and fitted slopes")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--csv", help="CSV output path (overrides the config)")
        p.add_argument("--json", help="JSON output path (overrides the config)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = ExperimentConfig.from_file(args.config)
        COMMANDS[args.command][0](config, args)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
