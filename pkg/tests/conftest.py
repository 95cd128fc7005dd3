import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rpcp import synthetic  # noqa: E402
from rpcp.patch_bank import Patch  # noqa: E402

_acceptance_results = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(ident, text): exit criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _acceptance_results.append((marker.args[0], marker.args[1], rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for ident, text, passed in sorted(_acceptance_results, key=lambda r: int(r[0].lstrip("AC"))):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {ident:<5} {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """The 10-image 256x256 synthetic dataset, seed 42."""
    root = tmp_path_factory.mktemp("toy")
    images, masks = synthetic.write_dataset(root, count=10, size=256, seed=42)
    return images, masks


def make_patch(mask, class_id=2, colour=(0.9, 0.1, 0.1), rgb=None):
    mask = np.asarray(mask, dtype=bool)
    if rgb is None:
        rgb = np.broadcast_to(np.asarray(colour, dtype=float), mask.shape + (3,)).copy()
    return Patch(rgb=rgb, mask=mask, class_id=class_id, source_id="fixture", bounding_box=(0, 0, mask.shape[1], mask.shape[0]))
