"""Shared test plumbing: acceptance criteria get one pass/fail summary line each."""

ACCEPTANCE_RESULTS: list[tuple[str, bool, float, float]] = []


def record_criterion(name: str, passed: bool, elapsed: float, limit: float) -> None:
    ACCEPTANCE_RESULTS.append((name, passed, elapsed, limit))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed, elapsed, limit in ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"[{status}] {name} ({elapsed:.1f}s, limit {limit:.0f}s)"
        )
