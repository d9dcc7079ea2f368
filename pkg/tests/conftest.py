import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mmprep.ingest import SceneConfig  # noqa: E402


def milipoint_scene(seed: int, **overrides) -> SceneConfig:
    """Single-frame scene shaped like a stacked MiliPoint sample: 1100 slots,
    60-300 human returns, sparse uniform clutter and two static reflectors."""
    kw = dict(num_frames=1, frame_size=1100, human_points=(60, 300), clutter_points=40,
              reflectors=2, reflector_points=40, noise_sigma=0.12, vertical_sigma=0.3, seed=seed)
    kw.update(overrides)
    return SceneConfig(**kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
