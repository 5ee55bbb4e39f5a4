import numpy as np
import pytest

from fastcorr.quantize import QuantizedMatrix, quantize_templates

ACCEPTANCE_LINES: list[str] = []


def random_matrix(rng: np.random.Generator, K: int, m: int, digits: int, base: int = 10) -> QuantizedMatrix:
    return quantize_templates(rng.standard_normal((K, m)), digits, base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    def record(number: int, title: str, passed: bool, detail: str = ""):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
