"""Small shared helpers: unit conversions and seeded RNG substreams."""
from __future__ import annotations

import numpy as np

# Substream domain codes. Keyed substreams make each random quantity a pure
# function of (seed, domain, indices), so e.g. moving an RIS never perturbs
# the user positions or the fading draws of unrelated links.
DOMAIN_USERS = 0
DOMAIN_DIRECT = 1
DOMAIN_BS_RIS = 2
DOMAIN_RIS_USER = 3
DOMAIN_PRICES = 4
DOMAIN_ORACLE = 5


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


def db_to_linear(db: float) -> float:
    """Attenuation in dB -> linear power gain (<= 1 for positive dB)."""
    return 10.0 ** (-db / 10.0)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...). Deterministic and order-free."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def complex_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circularly-symmetric complex Gaussian, unit variance per entry."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)
