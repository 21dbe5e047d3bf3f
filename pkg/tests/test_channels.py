import numpy as np
import pytest

from gmm_feedback.channels import (CARRIER_HZ, ChannelDataset, ScenarioConfig,
                                   generate_scenario, normalize_dataset,
                                   path_channel, split_dataset, ula_steering,
                                   unvec, ura_steering, vec)
from gmm_feedback.errors import (ArgumentError, ConfigurationError,
                                 DegenerateDataError)


def small_config(**kw):
    defaults = dict(ntx_h=2, ntx_v=2, nrx=2, num_paths_range=(1, 3),
                    angle_spread_deg=5.0, rng_seed=7)
    defaults.update(kw)
    return ScenarioConfig(**defaults)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ScenarioConfig(ntx_h=0, ntx_v=2, nrx=2)
    with pytest.raises(ConfigurationError):
        ScenarioConfig(ntx_h=2, ntx_v=2, nrx=0)
    with pytest.raises(ConfigurationError):
        ScenarioConfig(ntx_h=2, ntx_v=2, nrx=2, num_paths_range=(0, 3))
    with pytest.raises(ConfigurationError):
        ScenarioConfig(ntx_h=2, ntx_v=2, nrx=2, angle_spread_deg=0.0)


def test_steering_unit_modulus_and_norm():
    rng = np.random.default_rng(0)
    for n in (1, 3, 8):
        for angle in rng.uniform(-np.pi / 2, np.pi / 2, size=5):
            a = ula_steering(n, angle)
            assert np.allclose(np.abs(a), 1.0)
            assert np.isclose(np.linalg.norm(a) ** 2, n)
    a = ura_steering(4, 2, 0.3, -0.2)
    assert np.allclose(np.abs(a), 1.0)
    assert np.isclose(np.linalg.norm(a) ** 2, 8)


def test_single_broadside_path_is_rank_one_all_ones():
    cfg = small_config(nrx=3)
    h = path_channel(cfg, rx_angles=np.array([0.0]), azimuths=np.array([0.0]),
                     elevations=np.array([0.0]), gains=np.array([2.0 + 0j]),
                     delays=np.array([0.0]), carrier_hz=CARRIER_HZ)
    assert h.shape == (3, 4)
    assert np.allclose(h, 2.0 * np.ones((3, 4)))
    assert np.linalg.matrix_rank(h) == 1


def test_two_path_channel_matches_hand_formula():
    # independent elementwise evaluation of the steering-vector sum
    cfg = ScenarioConfig(ntx_h=1, ntx_v=2, nrx=2, num_paths_range=(1, 2),
                         angle_spread_deg=3.0)
    rx = np.array([0.4, -0.7])
    az = np.array([0.2, 1.0])
    el = np.array([-0.3, 0.25])
    gains = np.array([1.2 - 0.4j, -0.3 + 0.9j])
    delays = np.array([0.1e-6, 0.7e-6])
    f = 2.6e9
    h = path_channel(cfg, rx, az, el, gains, delays, f)

    expected = np.zeros((2, 2), dtype=complex)
    for l in range(2):
        for i in range(2):          # rx antenna
            for mh in range(1):     # URA horizontal index
                for mv in range(2):  # URA vertical index
                    a_rx = np.exp(1j * np.pi * i * np.sin(rx[l]))
                    a_tx = (np.exp(1j * np.pi * mh * np.sin(az[l]) * np.cos(el[l]))
                            * np.exp(1j * np.pi * mv * np.sin(el[l])))
                    col = mh * 2 + mv
                    expected[i, col] += (gains[l] * np.exp(-2j * np.pi * f * delays[l])
                                         * a_rx * np.conj(a_tx))
    assert np.allclose(h, expected, atol=1e-12)


def test_generate_deterministic_and_correlated():
    cfg = small_config(num_paths_range=(1, 1))
    ul1, dl1 = generate_scenario(cfg, 4)
    ul2, dl2 = generate_scenario(cfg, 4)
    assert np.array_equal(ul1.channels, ul2.channels)
    assert np.array_equal(dl1.channels, dl2.channels)
    # correlated pairs share per-sample path geometry
    for g_ul, g_dl in zip(ul1.geometry, dl1.geometry):
        assert np.array_equal(g_ul["azimuths"], g_dl["azimuths"])
        assert np.array_equal(g_ul["delays"], g_dl["delays"])


def test_generate_shapes_and_orientation():
    cfg = small_config()
    ul, dl = generate_scenario(cfg, 5)
    assert dl.channels.shape == (5, 2, 4)
    assert ul.channels.shape == (5, 4, 2)
    assert ul.transposed().channels.shape == (5, 2, 4)
    with pytest.raises(ArgumentError):
        generate_scenario(cfg, 0)


def test_uncorrelated_pair_differs():
    cfg = small_config()
    ul, dl = generate_scenario(cfg, 3, correlated_pair=False)
    assert not np.array_equal(ul.geometry[0]["azimuths"], dl.geometry[0]["azimuths"])


def test_normalize_scales_to_per_antenna_energy():
    cfg = small_config()
    n = cfg.ntx * cfg.nrx
    # single channel with ||h||^2 = 4N must be scaled by 1/2
    h = np.zeros((1, cfg.nrx, cfg.ntx), dtype=complex)
    h[0, 0, 0] = 2.0 * np.sqrt(n)
    ds = ChannelDataset(h, "DL", cfg)
    out = normalize_dataset(ds)
    assert np.isclose(out.normalization_factor, 0.5)
    assert np.allclose(out.channels, 0.5 * h)

    # already normalized: unchanged, factor 1
    again = normalize_dataset(out)
    assert np.isclose(again.normalization_factor, out.normalization_factor)
    assert np.allclose(again.channels, out.channels)


def test_normalize_random_dataset_hits_target():
    cfg = small_config()
    rng = np.random.default_rng(3)
    ds = ChannelDataset(rng.standard_normal((100, 2, 4))
                        + 1j * rng.standard_normal((100, 2, 4)), "DL", cfg)
    out = normalize_dataset(ds)
    n = cfg.ntx * cfg.nrx
    energy = np.mean(np.linalg.norm(out.vectors(), axis=1) ** 2)
    assert abs(energy - n) / n < 1e-9


def test_normalize_zero_dataset_raises():
    cfg = small_config()
    ds = ChannelDataset(np.zeros((3, 2, 4), dtype=complex), "DL", cfg)
    with pytest.raises(DegenerateDataError):
        normalize_dataset(ds)


def test_split_partition():
    cfg = small_config()
    _, dl = generate_scenario(cfg, 6)
    train, evl = split_dataset(dl, 4)
    assert len(train) == 4 and len(evl) == 2
    assert np.array_equal(np.concatenate([train.channels, evl.channels]),
                          dl.channels)
    with pytest.raises(ArgumentError):
        split_dataset(dl, 6)
    with pytest.raises(ArgumentError):
        split_dataset(dl, 0)
    t2, e2 = split_dataset(dl, 1)
    assert np.array_equal(t2.channels[0], dl.channels[0])
    assert np.array_equal(e2.channels[0], dl.channels[1])


def test_vec_unvec_roundtrip_column_major():
    h = np.arange(6).reshape(2, 3) + 0j
    v = vec(h)
    assert np.array_equal(v, np.array([0, 3, 1, 4, 2, 5], dtype=complex))
    assert np.array_equal(unvec(v, 2, 3), h)


def test_dataset_vectors_match_vec():
    cfg = small_config()
    _, dl = generate_scenario(cfg, 3)
    vv = dl.vectors()
    for i in range(3):
        assert np.array_equal(vv[i], vec(dl.channels[i]))
