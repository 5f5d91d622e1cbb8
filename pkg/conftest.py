import pytest

from fusion.config import EstimationConfig


@pytest.fixture(autouse=True)
def auto_setup_method(request):
    """
    Automatically call setup_method on test classes if it exists.
    Database-backed setup_method bodies run after the django_db marker is applied.
    """
    if request.instance and hasattr(request.instance, "setup_method"):
        # Make sure setup_method is a callable method, not a fixture
        setup_method = getattr(request.instance, "setup_method")
        if callable(setup_method) and not hasattr(setup_method, "_pytestfixturefunction"):
            setup_method()


@pytest.fixture(autouse=True)
def results_dir(settings, tmp_path):
    """Point the default results directory at a per-test temporary directory."""
    directory = tmp_path / "results"
    settings.ECO_ATE = {**settings.ECO_ATE, "RESULTS_DIR": str(directory)}
    return directory


@pytest.fixture()
def estimation_config():
    """Estimation defaults with a short protocol round timeout."""
    return EstimationConfig().replace(round_timeout=30)
