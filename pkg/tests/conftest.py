import numpy as np
import pytest
from hypothesis import settings

from irisbench.synthgen import generate_dataset

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# acceptance criteria append (label, passed, detail) here; printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(n_identities=3, samples_per_identity=4, master_seed=11)


@pytest.fixture(scope="session")
def sample(small_dataset):
    return small_dataset.samples[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
