"""Shared pytest hooks: a per-criterion pass/fail summary for the acceptance suite."""

CRITERION_RESULTS: list[tuple[int, bool, str]] = []


class CriterionLog:
    """Context manager that records one pass/fail line for an acceptance criterion."""

    def __init__(self, index: int, title: str):
        self.index = index
        self.title = title
        self.note = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        detail = self.note or self.title
        if exc_type is not None:
            detail = f"{self.title}: {exc}"
        CRITERION_RESULTS.append((self.index, exc_type is None, detail))
        return False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for index, passed, detail in sorted(CRITERION_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {index}: {status} - {detail}")
