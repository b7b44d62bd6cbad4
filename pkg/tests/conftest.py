import numpy as np
import pytest

P_S, P_G = 0.8, 0.3

_CRITERIA = []


def stationary_by_solve(P):
    """Stationary law of a truncated kernel; mass leaking past the last state
    is folded back onto it so the rows are stochastic."""
    P = np.array(P, dtype=float)
    P[:, -1] += 1.0 - P.sum(axis=1)
    S = P.shape[0]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    b = np.zeros(S)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


@pytest.fixture
def criterion():
    """Record a one-line pass/fail verdict for the acceptance summary."""

    def report(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        _CRITERIA.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
