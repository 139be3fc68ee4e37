import pytest

from aisrec.dataset import VoteScale, generate_synthetic, generate_synthetic_clusters


@pytest.fixture(scope="session")
def scale():
    return VoteScale(0, 5, 1)


@pytest.fixture(scope="session")
def small_table(scale):
    return generate_synthetic(60, 40, 3, 0.5, 0.5, scale, 7)


@pytest.fixture(scope="session")
def clustered(scale):
    return generate_synthetic_clusters(100, 120, 4, 0.3, 0.3, scale, 11)


# one line per acceptance criterion, printed at the end of the run
_CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def criterion():
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
