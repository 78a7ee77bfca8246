import pytest

from landtriage import fixtures


@pytest.fixture(scope="session")
def trial_engine():
    """The bundled trial fixture, built once per session."""
    return fixtures.build_trial_engine()
