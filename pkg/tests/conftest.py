"""Shared fixtures and the acceptance-summary terminal hook."""

import numpy as np
import pytest
import torch

from sen import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def synth16_dir(tmp_path_factory):
    """16 identities x 4 images, train-only; the standard smoke dataset."""
    out = tmp_path_factory.mktemp("synth16")
    generate_synthetic(SyntheticSpec(num_identities=16, images_per_identity=4, seed=7), out)
    return out


@pytest.fixture(scope="session")
def synth_holdout_dir(tmp_path_factory):
    """64 identities with 8 val / 16 test identities held out."""
    out = tmp_path_factory.mktemp("synth64")
    spec = SyntheticSpec(
        num_identities=64,
        images_per_identity=4,
        val_identities=8,
        test_identities=16,
        seed=11,
    )
    generate_synthetic(spec, out)
    return out


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one line per acceptance criterion after the run.

    The registry must come from the module instance pytest executed, so it
    is looked up in sys.modules rather than imported fresh (a fresh import
    would see an empty registry).
    """
    import sys

    module = None
    for name in ("test_acceptance", "tests.test_acceptance"):
        candidate = sys.modules.get(name)
        if candidate is not None and getattr(candidate, "CRITERIA_RESULTS", None):
            module = candidate
            break
    if module is None:
        return
    results = module.CRITERIA_RESULTS
    total = module.CRITERIA_TOTAL
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    for num in sorted(set(range(1, total + 1)) - set(results)):
        tr.write_line(f"[----] criterion {num}: not run")
