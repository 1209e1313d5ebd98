# tests/conftest.py

import os
from pathlib import Path

import pytest

from qp_recast import create_app
from qp_recast.fileformat import load_system

FIXTURES = Path(__file__).resolve().parent.parent / "data" / "fixtures"


def fixture_path(name):
    return FIXTURES / f"{name}.json"


@pytest.fixture(scope="session")
def test_app():
    """
    A pytest fixture to set up a test Flask application using the
    'testing' configuration (metrics disabled).
    """
    os.environ.setdefault("QP_RECAST_ENV", "testing")
    app = create_app("testing")
    with app.app_context():
        yield app


@pytest.fixture(scope="session")
def client(test_app):
    """A pytest fixture for the Flask test client."""
    return test_app.test_client()


@pytest.fixture(scope="session")
def morse():
    return load_system(fixture_path("morse")).system


@pytest.fixture(scope="session")
def morse_lv():
    return load_system(fixture_path("morse_lv")).system


@pytest.fixture(scope="session")
def brusselator():
    return load_system(fixture_path("brusselator")).system


@pytest.fixture(scope="session")
def exciton():
    return load_system(fixture_path("exciton")).system


@pytest.fixture(scope="session")
def three_wave():
    return load_system(fixture_path("three_wave")).system


@pytest.fixture(scope="session")
def rank_deficient_a():
    return load_system(fixture_path("rank_deficient_a")).system


@pytest.fixture(scope="session")
def blowup():
    return load_system(fixture_path("blowup")).system


@pytest.fixture(scope="session")
def morse_x0():
    # from (1, 1, 1) the Morse flow leaves the positive orthant before t = 0.3
    return (1.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def morse_lv_x0():
    """The Morse initial point seen through the quasimonomials of the Morse system."""
    return (1.0, 1.0, 0.25, 0.0625, 1.0)


@pytest.fixture(scope="session")
def fixture_file():
    """Path of a bundled system file by name, e.g. fixture_file("morse")."""
    return fixture_path
