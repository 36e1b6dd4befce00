import numpy as np
import pytest

from billiard_security.core.config import settings
from billiard_security.services.curve import circle, ellipse, noisy


@pytest.fixture(autouse=True)
def restore_settings():
    """CLI runs and tests may assign to the shared settings object"""
    saved = settings.model_dump()
    yield
    for name, value in saved.items():
        setattr(settings, name, value)


@pytest.fixture
def unit_circle():
    return circle(1.0)


@pytest.fixture
def circle_r2():
    return circle(2.0)


@pytest.fixture
def ellipse_21():
    return ellipse(2.0, 1.0)


@pytest.fixture
def noisy_circle():
    """Unit circle with seeded Fourier noise of amplitude 1e-2"""
    return noisy(circle(1.0), 1e-2, np.random.default_rng(7))


@pytest.fixture
def foci():
    c = np.sqrt(3.0)
    return np.array([-c, 0.0]), np.array([c, 0.0])


def fd_envelope(family, u0=0.0, h=1e-6):
    """Focusing distance of a line family from central differences of xi and v"""
    plus, minus = family(u0 + h), family(u0 - h)
    d_point = (plus.point - minus.point) / (2 * h)
    d_direction = (plus.direction - minus.direction) / (2 * h)
    return -float(np.dot(d_point, d_direction)) / float(np.dot(d_direction, d_direction))
