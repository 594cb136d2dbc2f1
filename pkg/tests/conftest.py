import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


DEFAULT_ELLS = [0.2 * 2.0**-j for j in range(7)]


@pytest.fixture(scope="session")
def default_sweep():
    from contactlimit.potential import PotentialFamily
    from contactlimit.tuner import build_sweep, fix_a

    return build_sweep(PotentialFamily(1.0, 1.0, 0.0, 2.0), DEFAULT_ELLS, fix_a(1.0))


@pytest.fixture(scope="session")
def default_records(default_sweep):
    from contactlimit.limit import run_sweep

    return run_sweep(default_sweep, 2j, 1.0, jobs=1)
