import importlib
import inspect
import pkgutil

import pytest

import theta_forge

SUBMODULES = sorted(m.name for m in pkgutil.iter_modules(theta_forge.__path__) if m.name != "__main__")


def test_submodules_stay_modules():
    for name in SUBMODULES:
        importlib.import_module(f"theta_forge.{name}")
        assert inspect.ismodule(getattr(theta_forge, name)), name


@pytest.mark.parametrize("name", SUBMODULES)
def test_submodule_imports(name):
    module = importlib.import_module(f"theta_forge.{name}")
    assert module.__name__ == f"theta_forge.{name}"


def test_public_names():
    for name in theta_forge.__all__:
        assert hasattr(theta_forge, name)
    assert inspect.ismodule(theta_forge.theta)
    assert theta_forge.theta.DEFAULT_TOL == 1e-10
