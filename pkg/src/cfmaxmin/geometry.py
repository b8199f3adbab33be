"""Network layout, pathloss with shadowing, and spatial correlation matrices."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfig, InvalidParameter, NonPositiveDistance

D_FLOOR_M = 1.0


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Static parameters of a cell-free network setup.

    Defaults are the desk-scale setup; the full-scale values (L=100, K=40,
    N=4) are reached by overriding fields.
    """

    L: int = 16
    K: int = 8
    N: int = 2
    area_side_m: float = 1000.0
    f: int = 2
    tau_c: int = 200
    bandwidth_hz: float = 20e6
    noise_power_dbm: float = -96.0
    pmax_range_mw: tuple = (90.0, 110.0)
    asd_deg: float = 15.0
    mc_realizations: int = 1000
    seed: int = 0
    antenna_spacing: float = 0.5

    @property
    def tau_p(self):
        return math.ceil(self.K / self.f)

    @property
    def noise_power_w(self):
        return dbm_to_watt(self.noise_power_dbm)

    @property
    def asd_rad(self):
        return math.radians(self.asd_deg)

    def validate(self):
        for name in ("L", "K", "N", "f", "tau_c", "mc_realizations"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {value!r}")
        if not self.tau_c - self.tau_p > 0:
            raise InvalidConfig(f"tau_p={self.tau_p} leaves no data samples in tau_c={self.tau_c}")
        lo, hi = self.pmax_range_mw
        if not (0 < lo <= hi):
            raise InvalidConfig(f"pmax range must satisfy 0 < min <= max, got {self.pmax_range_mw}")
        if not self.area_side_m > 0:
            raise InvalidConfig("area_side_m must be positive")
        if not self.asd_deg > 0:
            raise InvalidConfig("asd_deg must be positive")
        if not self.antenna_spacing > 0:
            raise InvalidConfig("antenna_spacing must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")
        return self


@dataclass(frozen=True)
class Layout:
    """AP/UE positions for one drop.

    ``distances_m`` and ``nominal_angles_rad`` are indexed ``[l, k]``.
    """

    ap_positions: np.ndarray
    ue_positions: np.ndarray
    distances_m: np.ndarray
    nominal_angles_rad: np.ndarray
    pmax_w: np.ndarray
    virtual_cell: np.ndarray = field(default=None)


def virtual_cell_counts(K):
    """UE count per virtual cell of the 2x2 grid, differing by at most one."""
    base, extra = divmod(K, 4)
    return [base + (1 if c < extra else 0) for c in range(4)]


def generate_layout(cfg, rng=None):
    """Drop L APs uniformly and K UEs evenly over the 2x2 virtual cells.

    With no ``rng`` the draw is seeded from ``cfg.seed``.
    """
    cfg.validate()
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    D = float(cfg.area_side_m)
    half = D / 2.0
    ap = rng.uniform(0.0, D, size=(cfg.L, 2))

    ue_chunks, cell_ids = [], []
    for c, count in enumerate(virtual_cell_counts(cfg.K)):
        origin = np.array([(c % 2) * half, (c // 2) * half])
        ue_chunks.append(origin + rng.uniform(0.0, half, size=(count, 2)))
        cell_ids += [c] * count
    ue = np.concatenate(ue_chunks, axis=0)

    lo, hi = cfg.pmax_range_mw
    pmax_w = rng.uniform(lo, hi, size=cfg.K) * 1e-3

    delta = ue[None, :, :] - ap[:, None, :]
    dist = np.maximum(np.hypot(delta[..., 0], delta[..., 1]), D_FLOOR_M)
    angles = np.arctan2(delta[..., 1], delta[..., 0])
    return Layout(ap, ue, dist, angles, pmax_w, np.asarray(cell_ids, dtype=int))


def large_scale_fading(d_m, shadow_db=0.0):
    """Linear channel gain of the urban-microcell pathloss plus shadowing."""
    d_m = np.asarray(d_m, dtype=float)
    if np.any(~(d_m > 0)):
        raise NonPositiveDistance("distances must be positive")
    gain_db = -30.5 - 36.7 * np.log10(d_m) + shadow_db
    return 10.0 ** (gain_db / 10.0)


def local_scattering_correlation(beta, phi, asd_rad, N, spacing=0.5):
    """Spatial correlation of a ULA under the Gaussian local scattering model.

    Uses the small-angle closed form, so the result is a Hermitian Toeplitz
    matrix with ``beta`` on the diagonal.
    """
    if N < 1 or not beta > 0 or not asd_rad > 0:
        raise InvalidParameter(f"need N >= 1, beta > 0, asd > 0 (got {N}, {beta}, {asd_rad})")
    lag = np.arange(N)[None, :] - np.arange(N)[:, None]  # n - m
    arg = 2.0 * np.pi * spacing * lag
    return beta * np.exp(1j * arg * np.sin(phi)) * np.exp(-0.5 * asd_rad**2 * (arg * np.cos(phi)) ** 2)


def channel_correlations(cfg, layout, rng):
    """Shadowed large-scale gains and correlation matrices for every UE/AP pair.

    Returns ``(beta, R)`` with ``beta`` of shape (K, L) and ``R`` of shape
    (K, L, N, N). Shadowing is i.i.d. N(0, 4^2) dB per pair.
    """
    shadow = rng.normal(0.0, 4.0, size=layout.distances_m.shape)
    beta = large_scale_fading(layout.distances_m, shadow).T
    phi = layout.nominal_angles_rad.T
    N = cfg.N
    lag = np.arange(N)[None, :] - np.arange(N)[:, None]
    arg = 2.0 * np.pi * cfg.antenna_spacing * lag
    s, c = np.sin(phi)[..., None, None], np.cos(phi)[..., None, None]
    R = beta[..., None, None] * np.exp(1j * arg * s) * np.exp(-0.5 * cfg.asd_rad**2 * (arg * c) ** 2)
    return beta, R
