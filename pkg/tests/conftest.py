import numpy as np
import pytest

from rowcov import DesignSpec


def random_design(kind: str, n: int, p: int, rng: np.random.Generator, q2: int = 2, q1: int = 1) -> DesignSpec:
    if kind == "zero":
        return DesignSpec.zero()
    if kind == "colmeans":
        return DesignSpec.column_means()
    if kind == "reg":
        return DesignSpec.row_regression(rng.standard_normal((n, q2)))
    if kind == "rowcol":
        return DesignSpec.row_column_regression(rng.standard_normal((n, q2)), rng.standard_normal((p, q1)))
    raise ValueError(kind)


DESIGN_KINDS = ("zero", "colmeans", "reg", "rowcol")


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
