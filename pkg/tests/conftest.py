import numpy as np
import pytest

from avibench.audio import AudioClip

SR = 44100


def sine(freq_hz, dur_s, amp=0.5, sr=SR, clip_id="sine"):
    t = np.arange(int(round(dur_s * sr))) / sr
    return AudioClip(clip_id, amp * np.sin(2 * np.pi * freq_hz * t), sr)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(pytestconfig):
    """`acceptance(n, ok, detail)` records one criterion's verdict and prints it."""
    lines = pytestconfig.stash.setdefault(ACCEPTANCE, [])

    def record(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
