import numpy as np
import pytest

from habtrack.ax25 import Ax25Frame, Callsign


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_callsign(rng) -> Callsign:
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    n = int(rng.integers(1, 7))
    base = "".join(letters[i] for i in rng.integers(0, len(letters), n))
    # Callsign bases must not be all-empty after strip; letters only here.
    return Callsign(base, int(rng.integers(0, 16)))


def random_frame(rng, max_info=100) -> Ax25Frame:
    n_digis = int(rng.integers(0, 3))
    digis = tuple(
        (random_callsign(rng), bool(rng.integers(0, 2))) for _ in range(n_digis)
    )
    info = bytes(rng.integers(0, 256, int(rng.integers(0, max_info + 1))).astype(np.uint8))
    return Ax25Frame(
        destination=random_callsign(rng),
        source=random_callsign(rng),
        digipeaters=digis,
        info=info,
    )
