import numpy as np
import pytest
from hypothesis import settings, strategies as st

from wassbary.gausswass import BarycenterProblem

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

TOP_ROW = [np.diag([9.0, 1.0]), np.diag([1.0, 4.0])]
BOTTOM_ROW = TOP_ROW + [
    np.array([[2.0, 1.0], [1.0, 2.0]]),
    np.array([[2.0, 1.0], [1.0, 1.0]]),
    np.array([[0.5, 0.25], [0.25, 1.0]]),
]


def random_pd(rng: np.random.Generator, d: int, floor: float = 0.1) -> np.ndarray:
    g = rng.standard_normal((d, d))
    return g @ g.T + floor * np.eye(d)


def random_problem(rng: np.random.Generator, d: int, k: int) -> BarycenterProblem:
    w = rng.uniform(0.2, 1.0, k)
    return BarycenterProblem.from_covariances([random_pd(rng, d) for _ in range(k)], w / w.sum())


@st.composite
def pd_matrices(draw, max_dim=5):
    d = draw(st.integers(1, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    scale = draw(st.floats(0.01, 100.0))
    return scale * random_pd(np.random.default_rng(seed), d)


@st.composite
def problems(draw, max_dim=4, max_k=4):
    d = draw(st.integers(1, max_dim))
    k = draw(st.integers(1, max_k))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_problem(np.random.default_rng(seed), d, k)


@pytest.fixture
def top_row():
    return BarycenterProblem.from_covariances(TOP_ROW)


@pytest.fixture
def bottom_row():
    return BarycenterProblem.from_covariances(BOTTOM_ROW)


# acceptance lines are echoed at the end of the run so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
