import pytest

from aqcdyn.codes import classify, default_error_model, get_code


@pytest.fixture(scope="session")
def steane():
    return get_code("steane")


@pytest.fixture(scope="session")
def steane_table(steane):
    return classify(steane, default_error_model(steane), 2)


@pytest.fixture(scope="session")
def shipped():
    out = {}
    for name in ("bit_flip", "five_qubit", "steane"):
        code = get_code(name)
        model = default_error_model(code)
        out[name] = (code, model, classify(code, model, 2))
    return out


ACCEPTANCE_LINES: dict = {}


def record_acceptance(n: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
