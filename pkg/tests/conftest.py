"""Shared test configuration: the acceptance suite records one line per
criterion and a terminal-summary hook prints them after the run (so the
pass/fail ledger is visible even though stdout is captured)."""

CRITERION_LINES: list[str] = []


def record_criterion(num: int, desc: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[criterion {num}] {status} {desc}"
    if detail:
        line += f" ({detail})"
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)
