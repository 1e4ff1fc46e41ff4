import numpy as np
import pytest
from hypothesis import settings

from exercise_eval.features import featurize
from exercise_eval.synthetic import SynthConfig, synth_generate

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def synth_recordings():
    """Noise-free 8-volunteer synthetic dataset over the full taxonomy."""
    return synth_generate(SynthConfig(), seed=0)


@pytest.fixture(scope="session")
def synth_table(synth_recordings):
    return featurize(synth_recordings, 100)


@pytest.fixture(scope="session")
def small_recordings():
    return synth_generate(SynthConfig(n_volunteers=2, reps=2, series_per_class=1), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from _acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
