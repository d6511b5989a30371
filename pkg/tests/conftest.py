import sys
from pathlib import Path

from hypothesis import settings

# fixed example streams keep test_output.txt reproducible
settings.register_profile("repo", derandomize=True)
settings.load_profile("repo")

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
