"""Channel realization: distance path loss times i.i.d. Rayleigh fading.

Every link draws its fading from a substream keyed by (seed, link class,
endpoint indices), so regenerating one part of the geometry (say, user
positions) leaves the other links' draws untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Geometry, Scenario
from .util import (DOMAIN_BS_RIS, DOMAIN_DIRECT, DOMAIN_RIS_USER, complex_normal,
                   db_to_linear, substream)

DUMP_FORMAT_VERSION = 1


def path_loss_db(distance: float, exponent: float, ref_db: float) -> float:
    """Path loss in dB at `distance` meters; distances below 1 m clamp to 1 m."""
    d = max(float(distance), 1.0)
    return ref_db + 10.0 * exponent * np.log10(d)


def path_gain(distance: float, exponent: float, ref_db: float) -> float:
    """Linear power gain of one link."""
    return db_to_linear(path_loss_db(distance, exponent, ref_db))


@dataclass
class ChannelSet:
    """One realization of all channel coefficients.

    h_direct[k]  : (K, M) BS -> user k rows
    bs_ris       : (L, M) BS -> RIS elements, rows grouped per RIS in index order
    ris_user[k]  : (K, L) RIS elements -> user k rows
    """

    h_direct: np.ndarray
    bs_ris: np.ndarray
    ris_user: np.ndarray

    def validate(self, scenario: Scenario) -> None:
        m, k, l = scenario.num_antennas, scenario.num_users, scenario.total_elements
        if self.h_direct.shape != (k, m):
            raise ValueError(f"h_direct shape {self.h_direct.shape} != {(k, m)}")
        if self.bs_ris.shape != (l, m):
            raise ValueError(f"bs_ris shape {self.bs_ris.shape} != {(l, m)}")
        if self.ris_user.shape != (k, l):
            raise ValueError(f"ris_user shape {self.ris_user.shape} != {(k, l)}")
        for arr in (self.h_direct, self.bs_ris, self.ris_user):
            if not np.isfinite(arr).all():
                raise ValueError("channel entries must be finite")


def generate(scenario: Scenario, geometry: Geometry) -> ChannelSet:
    """Draw one ChannelSet. Pure function of (scenario, geometry, seed)."""
    seed = scenario.rng_seed
    m = scenario.num_antennas
    k = scenario.num_users
    ref = scenario.pathloss_ref_db

    h_direct = np.empty((k, m), dtype=complex)
    for ku in range(k):
        d = np.linalg.norm(geometry.user_positions[ku] - geometry.bs_position)
        amp = np.sqrt(path_gain(d, scenario.exponent_direct, ref))
        h_direct[ku] = amp * complex_normal(substream(seed, DOMAIN_DIRECT, ku), m)

    bs_ris = np.empty((scenario.total_elements, m), dtype=complex)
    ris_user = np.empty((k, scenario.total_elements), dtype=complex)
    for s in range(scenario.num_ris):
        rows = scenario.element_slice(s)
        ls = scenario.elements_per_ris[s]
        d_bs = np.linalg.norm(geometry.ris_positions[s] - geometry.bs_position)
        amp_bs = np.sqrt(path_gain(d_bs, scenario.exponent_ris, ref))
        bs_ris[rows] = amp_bs * complex_normal(substream(seed, DOMAIN_BS_RIS, s), ls, m)
        for ku in range(k):
            d_u = np.linalg.norm(geometry.user_positions[ku] - geometry.ris_positions[s])
            amp_u = np.sqrt(path_gain(d_u, scenario.exponent_ris, ref))
            ris_user[ku, rows] = amp_u * complex_normal(
                substream(seed, DOMAIN_RIS_USER, s, ku), ls)

    channels = ChannelSet(h_direct=h_direct, bs_ris=bs_ris, ris_user=ris_user)
    channels.validate(scenario)
    return channels


def save_channels(channels: ChannelSet, path: str) -> None:
    """Dump a ChannelSet for replay (.npz, versioned)."""
    np.savez(path,
             format_version=np.int64(DUMP_FORMAT_VERSION),
             h_direct=channels.h_direct,
             bs_ris=channels.bs_ris,
             ris_user=channels.ris_user)


def load_channels(path: str) -> ChannelSet:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != DUMP_FORMAT_VERSION:
            raise ValueError(f"unsupported channel dump version {version}")
        return ChannelSet(h_direct=data["h_direct"],
                          bs_ris=data["bs_ris"],
                          ris_user=data["ris_user"])
