"""Synthetic multipath MIMO channel generation, normalization, and splitting.

Channels follow a geometric cluster model: each sample has a random number of
propagation paths whose departure/arrival angles scatter around a per-sample
cluster center, with complex path gains drawn from an exponentially decaying
power-delay profile.  The transmitter is a uniform rectangular array (URA),
the receiver a uniform linear array (ULA), both at half-wavelength spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ArgumentError, ConfigurationError, DegenerateDataError

# Uplink carrier; the downlink carrier is CARRIER_HZ * (1 + carrier_offset).
CARRIER_HZ = 2.53e9
# Path delays are uniform in [0, MAX_DELAY_S]; powers decay with DELAY_DECAY_S.
MAX_DELAY_S = 1e-6
DELAY_DECAY_S = 0.3e-6
# Cluster centers: azimuth uniform over a 120 degree sector, elevation band.
SECTOR_HALF_RAD = np.deg2rad(60.0)
ELEVATION_HALF_RAD = np.deg2rad(30.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Array geometry and propagation parameters for one cell scenario."""

    ntx_h: int
    ntx_v: int
    nrx: int
    num_paths_range: tuple[int, int] = (2, 8)
    angle_spread_deg: float = 4.0
    carrier_offset: float = 200e6 / CARRIER_HZ
    rng_seed: int = 0

    def __post_init__(self):
        if self.ntx_h < 1 or self.ntx_v < 1:
            raise ConfigurationError(
                f"URA dimensions must be >= 1, got {self.ntx_h}x{self.ntx_v}")
        if self.nrx < 1:
            raise ConfigurationError(f"nrx must be >= 1, got {self.nrx}")
        lo, hi = self.num_paths_range
        if lo < 1 or hi < lo:
            raise ConfigurationError(
                f"num_paths_range must satisfy 1 <= lo <= hi, got {self.num_paths_range}")
        if self.angle_spread_deg <= 0:
            raise ConfigurationError("angle_spread_deg must be positive")

    @property
    def ntx(self) -> int:
        return self.ntx_h * self.ntx_v


def ula_steering(n: int, angle_rad: float | np.ndarray) -> np.ndarray:
    """Half-wavelength ULA response; entries have unit modulus, ||a||^2 = n."""
    idx = np.arange(n)
    return np.exp(1j * np.pi * np.multiply.outer(np.sin(np.asarray(angle_rad)), idx))


def ura_steering(ntx_h: int, ntx_v: int, azimuth_rad: float,
                 elevation_rad: float) -> np.ndarray:
    """URA response as Kronecker product of horizontal and vertical ULA responses."""
    ah = np.exp(1j * np.pi * np.arange(ntx_h) * np.sin(azimuth_rad) * np.cos(elevation_rad))
    av = np.exp(1j * np.pi * np.arange(ntx_v) * np.sin(elevation_rad))
    return np.kron(ah, av)


def path_channel(scenario: ScenarioConfig, rx_angles: np.ndarray,
                 azimuths: np.ndarray, elevations: np.ndarray,
                 gains: np.ndarray, delays: np.ndarray,
                 carrier_hz: float) -> np.ndarray:
    """Sum of per-path rank-one terms: H = sum_l g_l a_rx a_tx^H e^{-2 pi j f tau_l}.

    Returns an [nrx x ntx] matrix in downlink orientation.
    """
    h = np.zeros((scenario.nrx, scenario.ntx), dtype=complex)
    for theta, az, el, g, tau in zip(rx_angles, azimuths, elevations, gains, delays):
        a_rx = ula_steering(scenario.nrx, theta)
        a_tx = ura_steering(scenario.ntx_h, scenario.ntx_v, az, el)
        phase = np.exp(-2j * np.pi * carrier_hz * tau)
        h += g * phase * np.outer(a_rx, a_tx.conj())
    return h


@dataclass
class ChannelDataset:
    """A set of equally sized complex channel matrices plus scenario metadata.

    ``channels`` is an [count x rows x cols] array.  Downlink sets are
    [nrx x ntx]; raw uplink sets are transposed ([ntx x nrx]) because the
    base station is the receiving side there.  ``geometry`` carries the
    per-sample path parameters when the set came from the generator; it is
    not serialized.
    """

    channels: np.ndarray
    domain_tag: str
    scenario: ScenarioConfig
    normalization_factor: float = 1.0
    geometry: list[dict] | None = None

    def __post_init__(self):
        self.channels = np.ascontiguousarray(self.channels, dtype=np.complex128)
        if self.channels.ndim != 3:
            raise ArgumentError("channels must be a [count x rows x cols] array")
        if self.domain_tag not in ("UL", "DL"):
            raise ArgumentError(f"domain_tag must be 'UL' or 'DL', got {self.domain_tag!r}")
        if self.normalization_factor <= 0:
            raise ArgumentError("normalization_factor must be positive")

    def __len__(self) -> int:
        return self.channels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1], self.channels.shape[2]

    def vectors(self) -> np.ndarray:
        """Column-major vectorization of every channel; shape [count x rows*cols]."""
        n, r, c = self.channels.shape
        return self.channels.transpose(0, 2, 1).reshape(n, r * c)

    def transposed(self) -> "ChannelDataset":
        """Swap the rx/tx roles of every matrix (uplink -> emulated downlink)."""
        return replace(self, channels=np.ascontiguousarray(
            self.channels.transpose(0, 2, 1)), geometry=self.geometry)


def vec(h: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return h.reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(v).reshape(rows, cols, order="F")


def _sample_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent per-sample RNG stream derived from (seed, stream, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream, int(index)]))


def _draw_geometry(scenario: ScenarioConfig, rng: np.random.Generator) -> dict:
    lo, hi = scenario.num_paths_range
    n_paths = int(rng.integers(lo, hi + 1))
    spread = np.deg2rad(scenario.angle_spread_deg)
    az_center = rng.uniform(-SECTOR_HALF_RAD, SECTOR_HALF_RAD)
    el_center = rng.uniform(-ELEVATION_HALF_RAD, ELEVATION_HALF_RAD)
    wrap = lambda a: np.angle(np.exp(1j * a))
    azimuths = wrap(az_center + spread * rng.standard_normal(n_paths))
    elevations = wrap(el_center + spread * rng.standard_normal(n_paths))
    # departure angles cluster tightly (elevated array, far scatterers) but the
    # terminal is surrounded by local scatterers, so arrival angles spread wide
    rx_angles = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths)
    delays = rng.uniform(0.0, MAX_DELAY_S, size=n_paths)
    powers = np.exp(-delays / DELAY_DECAY_S)
    powers /= powers.sum()
    magnitudes = np.abs(
        np.sqrt(powers / 2) * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)))
    return {
        "azimuths": azimuths,
        "elevations": elevations,
        "rx_angles": rx_angles,
        "delays": delays,
        "magnitudes": magnitudes,
    }


def generate_scenario(config: ScenarioConfig, count: int,
                      correlated_pair: bool = True
                      ) -> tuple[ChannelDataset, ChannelDataset]:
    """Generate paired UL/DL channel sets.

    With ``correlated_pair`` the two domains share per-sample path geometry
    (angles, delays, gain magnitudes) and differ only in carrier frequency
    and independently drawn per-path phases; otherwise the uplink geometry
    is drawn from an independent stream.

    The uplink set is returned in its physical orientation [ntx x nrx]; use
    :meth:`ChannelDataset.transposed` to emulate downlink training data.
    """
    if count < 1:
        raise ArgumentError(f"count must be >= 1, got {count}")
    f_ul = CARRIER_HZ
    f_dl = CARRIER_HZ * (1.0 + config.carrier_offset)

    ul = np.empty((count, config.ntx, config.nrx), dtype=complex)
    dl = np.empty((count, config.nrx, config.ntx), dtype=complex)
    geo_ul, geo_dl = [], []
    for i in range(count):
        rng = _sample_rng(config.rng_seed, i)
        geom_dl = _draw_geometry(config, rng)
        if correlated_pair:
            geom_ul = geom_dl
        else:
            geom_ul = _draw_geometry(config, _sample_rng(config.rng_seed, i, stream=1))
        phase_rng = _sample_rng(config.rng_seed, i, stream=2)
        for geom, f_c, out, store in ((geom_dl, f_dl, dl, geo_dl),
                                      (geom_ul, f_ul, None, geo_ul)):
            n_paths = len(geom["delays"])
            phases = np.exp(1j * phase_rng.uniform(0, 2 * np.pi, size=n_paths))
            gains = geom["magnitudes"] * phases
            h = path_channel(config, geom["rx_angles"], geom["azimuths"],
                             geom["elevations"], gains, geom["delays"], f_c)
            if out is None:
                ul[i] = h.T
            else:
                out[i] = h
            store.append(geom)

    ds_ul = ChannelDataset(ul, "UL", config, geometry=geo_ul)
    ds_dl = ChannelDataset(dl, "DL", config, geometry=geo_dl)
    return ds_ul, ds_dl


def normalize_dataset(ds: ChannelDataset) -> ChannelDataset:
    """Rescale so the mean squared vector norm equals rows*cols exactly.

    The returned ``normalization_factor`` composes with any factor already
    recorded on the input set.
    """
    if len(ds) == 0:
        raise ArgumentError("cannot normalize an empty dataset")
    n = ds.channels.shape[1] * ds.channels.shape[2]
    energy = float(np.mean(np.sum(np.abs(ds.channels) ** 2, axis=(1, 2))))
    if energy == 0.0:
        raise DegenerateDataError("dataset is all-zero; normalization undefined")
    scale = np.sqrt(n / energy)
    return replace(ds, channels=ds.channels * scale,
                   normalization_factor=ds.normalization_factor * scale,
                   geometry=ds.geometry)


def split_dataset(ds: ChannelDataset, train_count: int
                  ) -> tuple[ChannelDataset, ChannelDataset]:
    """Order-preserving disjoint split into (train, eval)."""
    if not 0 < train_count < len(ds):
        raise ArgumentError(
            f"train_count must be in (0, {len(ds)}), got {train_count}")
    geo = ds.geometry
    train = replace(ds, channels=ds.channels[:train_count].copy(),
                    geometry=None if geo is None else geo[:train_count])
    evl = replace(ds, channels=ds.channels[train_count:].copy(),
                  geometry=None if geo is None else geo[train_count:])
    return train, evl
