import pytest

from inodevfs import fscore

TINY = dict(block_size=64, disk_blocks=1024, no_of_inodes=8)

_acceptance_lines = []


@pytest.fixture
def report():
    """Record a one-line verdict for the acceptance summary."""
    def _report(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        _acceptance_lines.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_disk(tmp_path):
    path = tmp_path / "tiny.img"
    fscore.create_disk(path, **TINY)
    return path


@pytest.fixture
def tiny_mount(tiny_disk):
    m = fscore.mount(tiny_disk)
    yield m
    if m.mounted:
        m.unmount()
