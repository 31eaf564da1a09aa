"""Shared pytest fixtures.

Tests import app modules by bare name (e.g. `import coupling`); `app/` and
`tools/` are put on sys.path via [tool.pytest.ini_options] pythonpath in
pyproject.toml.
"""

import math
import os

import numpy as np
import pytest

REPO_DIR = os.path.dirname(os.path.dirname(__file__))
SCENARIO_DIR = os.path.join(REPO_DIR, "data", "scenarios")


@pytest.fixture(autouse=True)
def _serial_sweeps(monkeypatch):
    """One worker and no progress bars so sweeps are quiet and ordered in tests."""
    from config import settings

    monkeypatch.setattr(settings, "threads", 1)
    monkeypatch.setattr(settings, "progress", False)


@pytest.fixture(autouse=True)
def _reference_dir(monkeypatch):
    """Point reference-pack loading at the shipped data/reference."""
    import reference_packs
    from config import settings

    monkeypatch.setattr(settings, "reference_dir", os.path.join(REPO_DIR, "data", "reference"))
    reference_packs._PACKS_CACHE = None
    reference_packs._PACKS_MTIME = None
    yield
    reference_packs._PACKS_CACHE = None
    reference_packs._PACKS_MTIME = None


@pytest.fixture
def reset_metrics():
    """Clear the module-level metric dicts so counter assertions are isolated."""
    import metrics

    metrics.reset_metrics()
    yield
    metrics.reset_metrics()


@pytest.fixture
def reference_scenario():
    from scenario import parse_scenario

    return parse_scenario(os.path.join(SCENARIO_DIR, "reference.json"))


@pytest.fixture
def symmetric_scenario():
    from scenario import parse_scenario

    return parse_scenario(os.path.join(SCENARIO_DIR, "symmetric.json"))


@pytest.fixture
def reference_coupling(reference_scenario):
    return reference_scenario.coupling_network()


@pytest.fixture
def reference_conversion(reference_scenario):
    return reference_scenario.conversion


@pytest.fixture
def random_element():
    """Factory for seeded series R-L-C elements with magnitudes in 1e-3 .. 1e7 ohm.

    Call as ``random_element(rng, omega)``; the reactance sign is random and
    realised as either an inductor or a capacitor at ``omega``.
    """
    from numeric_core import ImpedanceElement

    def _make(rng: np.random.Generator, omega: float) -> ImpedanceElement:
        magnitude = 10 ** rng.uniform(-3, 7)
        angle = rng.uniform(-0.45 * math.pi, 0.45 * math.pi)
        r = magnitude * math.cos(angle)
        x = magnitude * math.sin(angle)
        if x >= 0:
            return ImpedanceElement(r_ohm=r, l_henry=x / omega)
        return ImpedanceElement(r_ohm=r, c_farad=1.0 / (-x * omega))

    return _make
