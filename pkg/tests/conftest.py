import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acceptance_log.RESULTS,
                      key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        terminalreporter.write_line(acceptance_log.line(key))
