"""Backend selection rules for the compiled and portable run paths."""

import numpy as np
import pytest

from dynreg import (
    ConfigError,
    active_backend,
    available_backends,
    make_drifting_sine_stream,
    resolve_backend,
)
from dynreg.backends import ENV_BACKEND, HAS_NUMBA, weighted_window_norms


def test_available_backends_always_include_the_portable_one():
    names = available_backends()
    assert "numpy" in names
    assert set(names) <= {"numba", "numpy"}
    assert ("numba" in names) == HAS_NUMBA


def test_active_backend_honors_the_environment(monkeypatch):
    monkeypatch.setenv(ENV_BACKEND, "numpy")
    assert active_backend() == "numpy"
    monkeypatch.setenv(ENV_BACKEND, "auto")
    assert active_backend() in ("numba", "numpy")
    monkeypatch.delenv(ENV_BACKEND)
    assert active_backend() in ("numba", "numpy")
    monkeypatch.setenv(ENV_BACKEND, "gpu")
    with pytest.raises(ConfigError):
        active_backend()


def test_resolve_backend_rejects_unknown_names():
    with pytest.raises(ConfigError):
        resolve_backend("cython")


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled backend unavailable")
def test_compiled_path_requires_a_sine_stream(monkeypatch):
    class Opaque:
        dim = 2

    with pytest.raises(ConfigError):
        resolve_backend("numba", Opaque())
    monkeypatch.setenv(ENV_BACKEND, "auto")
    assert resolve_backend(None, Opaque()) == "numpy"  # generic streams fall back
    stream = make_drifting_sine_stream(dim=2, seed=0)
    assert resolve_backend(None, stream) == "numba"
    assert resolve_backend("numpy", stream) == "numpy"


def test_weighted_window_norms_tiny_case():
    G = np.array([[1.0, 0.0], [0.0, 2.0]])
    out = weighted_window_norms(G, 2, 0.5, backend="numpy")
    # round 1: [1, 0] / 1.5; round 2: [0.5, 2] / 1.5
    assert out.tolist() == [
        (1.0 / 1.5) ** 2,
        (0.5 / 1.5) ** 2 + (2.0 / 1.5) ** 2,
    ]
