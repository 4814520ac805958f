import numpy as np
import pytest

from stabqubit import MeasurementSchedule, PauliAxis, bloch_to_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_bloch(rng, pure_fraction=0.2):
    """Random vector in the closed Bloch ball; some draws exactly on the sphere."""
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    if rng.random() < pure_fraction:
        return v
    return v * rng.random() ** (1.0 / 3.0)


def random_state(rng, pure_fraction=0.2):
    return bloch_to_state(random_bloch(rng, pure_fraction))


def random_operator(rng):
    """Random complex 2x2 operator (not necessarily Hermitian)."""
    return rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))


def random_axis(rng):
    v = rng.standard_normal(3)
    return PauliAxis(v / np.linalg.norm(v))


def static_schedule(axis, m, kappa=1.0, eta=1.0):
    return MeasurementSchedule(
        axes=np.tile(np.asarray(axis, dtype=float), (m, 1)), kappa=kappa, eta=eta
    )
