"""Session-wide invariant checks.

Every ``LanczosFactorization`` and ``SdrMatrix`` built during a test is
recorded; after the test they are checked for orthonormality, symmetry,
semidefiniteness and the trace bound. Acceptance results are printed in the
terminal summary.
"""

import numpy as np
import pytest

from lanczos_sdr.lanczos import LanczosFactorization
from lanczos_sdr.sdr import SdrMatrix

ORTHO_TOL = 1e-10
SYM_TOL = 1e-12
PSD_TOL = 1e-10
TRACE_SLACK = 1e-6

_created = {"fact": [], "sdr": []}
_stats = {"fact": 0, "sdr": 0, "max_ortho": 0.0}
ACCEPTANCE_LINES = []


def _recording(cls, key):
    original = cls.__init__

    def __init__(self, *args, **kwargs):
        original(self, *args, **kwargs)
        _created[key].append(self)

    cls.__init__ = __init__


_recording(LanczosFactorization, "fact")
_recording(SdrMatrix, "sdr")


def check_factorization(fact) -> float:
    err = fact.orthogonality_error()
    assert err <= ORTHO_TOL, f"Lanczos vectors lost orthonormality: {err:.2e}"
    return err


def check_sdr_matrix(C):
    M = C.matrix
    assert np.max(np.abs(M - M.T)) <= SYM_TOL
    evals = np.linalg.eigvalsh(M)
    assert evals[0] >= -PSD_TOL * max(evals[-1], 0.0) - 1e-14, evals
    rule = C.params.get("rule") or {}
    # Bessel's inequality bounds the trace by E|x|^2 = m when the rule is exact for it
    if C.estimator == "LSIR" and rule.get("kind") != "monte_carlo":
        assert np.trace(M) <= C.m + TRACE_SLACK


def invariant_stats():
    return dict(_stats)


@pytest.fixture(autouse=True)
def _session_invariants():
    _created["fact"].clear()
    _created["sdr"].clear()
    yield
    facts, mats = list(_created["fact"]), list(_created["sdr"])
    _created["fact"].clear()
    _created["sdr"].clear()
    for f in facts:
        _stats["max_ortho"] = max(_stats["max_ortho"], check_factorization(f))
    for C in mats:
        check_sdr_matrix(C)
    _stats["fact"] += len(facts)
    _stats["sdr"] += len(mats)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    terminalreporter.write_line(
        f"invariants: {_stats['fact']} factorizations (max orthogonality error "
        f"{_stats['max_ortho']:.2e}), {_stats['sdr']} SDR matrices checked"
    )
