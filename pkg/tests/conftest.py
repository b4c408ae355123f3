import pytest


@pytest.fixture
def criterion_report(request):
    """Reporter for acceptance criteria: one PASS/FAIL line per criterion,
    written through pytest's terminal stream so it shows without -s."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def report(num: int, ok: bool, detail: str) -> bool:
        line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'}: {detail}"
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        return ok

    return report
