import math

import numpy as np
import pytest

from jointggm.hgsl import HGSLProblem


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_problem(rng, k=2, G=3, n=20, signal=1.0, noise=1.0):
    """Well-conditioned Gaussian design with a sparse shared signal in group 0."""
    X = [rng.standard_normal((n, G)) for _ in range(k)]
    y = []
    for m in X:
        b = np.zeros(G)
        b[0] = signal
        y.append(m @ b + noise * rng.standard_normal(n))
    return HGSLProblem(tuple(y), tuple(X))


def cd_sqrt_lasso(X, y, lam, sweeps=100000, tol=1e-14):
    """Square-root Lasso by coordinate descent with closed-form 1-D minimization."""
    n, G = X.shape
    w = np.sqrt(np.mean(X * X, axis=0))
    b = np.zeros(G)
    for _ in range(sweeps):
        change = 0.0
        for l in range(G):
            x = X[:, l]
            r = y - X @ b + x * b[l]
            xx = x @ x
            c = x @ r / xx
            e = math.sqrt(max(r @ r - (x @ r) ** 2 / xx, 0.0) / xx)
            mu = lam * w[l] * math.sqrt(n) / math.sqrt(xx)
            new = 0.0 if mu >= 1 else math.copysign(max(abs(c) - mu * e / math.sqrt(1 - mu * mu), 0.0), c)
            change = max(change, abs(new - b[l]))
            b[l] = new
        if change < tol:
            break
    return b


# one (criterion, passed, detail) entry per acceptance check, printed at the end
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
