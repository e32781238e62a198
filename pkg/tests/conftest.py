import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Recorder for acceptance-criterion outcomes, printed in the terminal summary."""
    log = request.config.stash.setdefault(_RESULTS, [])

    def record(number, title, passed, detail, seconds):
        log.append((number, title, passed, detail, seconds))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {title} ({detail}; {seconds:.1f} s)")

    return record


def pytest_terminal_summary(terminalreporter, config):
    log = config.stash.get(_RESULTS, [])
    if not log:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, title, passed, detail, seconds in sorted(log):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}: {detail} ({seconds:.1f} s)")
