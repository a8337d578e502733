import time
from contextlib import contextmanager

import numpy as np
import pytest

from seiswarp.cluster import TrainConfig
from seiswarp.pipeline import PipelineSettings
from seiswarp.signal_io import TwoClassRecipe, make_two_class_dataset

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


class _Criterion:
    def __init__(self, number, title, budget_s):
        self.number, self.title, self.budget_s = number, title, budget_s
        self.details = []
        self.extra_s = 0.0

    def note(self, text):
        self.details.append(text)


@pytest.fixture
def criterion():
    """Time a block, then record one PASS/FAIL line for the summary.

    The block fails if it raises or if it overruns ``budget_s`` (when given).
    ``extra_s`` adds time spent in shared fixtures.
    """

    @contextmanager
    def run(number, title, budget_s=None):
        c = _Criterion(number, title, budget_s)
        start = time.perf_counter()
        ok = False
        try:
            yield c
            ok = True
        finally:
            elapsed = time.perf_counter() - start + c.extra_s
            in_time = budget_s is None or elapsed < budget_s
            status = "PASS" if ok and in_time else "FAIL"
            limit = f" < {budget_s:g}s" if budget_s is not None else ""
            info = "; ".join(c.details)
            ACCEPTANCE_LINES.append(
                f"criterion {number}: {status}  {title}  [{info}] ({elapsed:.2f}s{limit})")
        if not in_time:
            pytest.fail(f"criterion {number} took {elapsed:.1f}s, budget {budget_s}s")

    return run


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """Ten per class, short records; enough to exercise the whole pipeline quickly."""
    return make_two_class_dataset(TwoClassRecipe(n_per_class=10, duration_s=12.0, seed=7))


@pytest.fixture(scope="session")
def small_settings():
    return PipelineSettings(n_filters=12,
                            train=TrainConfig(K_init=3, max_epochs=40, batch_size=12,
                                              prune_weight_threshold=0.01, seed=1))
