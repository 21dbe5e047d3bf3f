"""End-to-end experiment harness: single-user normalized spectral efficiency
and multi-user sum-rate Monte Carlo runs, empirical cCDFs, and CSV output.

Every Monte Carlo task draws its random numbers from a stream derived from
(master seed, stream id, task index), so results are byte-identical for any
worker thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import (ChannelDataset, ScenarioConfig, generate_scenario,
                       normalize_dataset, split_dataset, unvec, vec)
from .codebooks import (CovCodebook, DirCodebook, LloydOptions, PgaOptions,
                        extract_directions, gmm_codebook, lloyd_codebook,
                        random_grassmann_codebook)
from .errors import ValidationError
from .estimators import (Dictionary, build_dictionary, estimate_gmm,
                         estimate_lmmse, estimate_omp_genie, sample_covariance)
from .feedback import (select_by_rate_cov, select_by_rate_subspace,
                       select_by_responsibility, select_by_responsibility_perfect)
from .gmm import AdaptedGmm, GmmModel, adapt_to_observation, fit_em, fit_kronecker
from .pilots import ObservationModel, observe
from .precoding import (PrecoderSet, baseline_tx_strategy, rbd, rci, swmmse,
                        sum_rate, waterfilling_capacity, wmmse)
from .rates import rates_for_entries, spectral_efficiency

P2P_METHODS = ("uniform", "eigsp", "lloyd-h", "lloyd-gmm", "lloyd-lmmse",
               "lloyd-omp", "gmm-h", "gmm-y")
MU_METHODS = ("gmm-y", "gmm-h", "lloyd-h", "lloyd-gmm", "lloyd-lmmse",
              "lloyd-omp", "random-h", "random-gmm", "random-lmmse",
              "random-omp", "gmm-samples-y", "gmm-samples-h")

_STREAM_P2P = 1
_STREAM_MU = 2
_STREAM_RANDOM_CB = 3


def task_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Splittable per-task random stream; independent of worker scheduling."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream, int(index)]))


def snr_db_to_sigma2(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


@dataclass
class DataConfig:
    count: int = 30000
    train_count: int = 20000
    correlated_pair: bool = True


@dataclass
class GmmConfig:
    structure: str = "kronecker"
    k_tx: int | None = None
    k_rx: int | None = None
    max_iter: int = 100
    tol: float = 1e-5
    reg_eps: float | None = None
    init_seed: int = 0
    zero_mean: bool = False

    def side_counts(self, k: int) -> tuple[int, int]:
        if self.k_tx is not None and self.k_rx is not None:
            if self.k_tx * self.k_rx != k:
                raise ValidationError(
                    f"gmm.k_tx * gmm.k_rx = {self.k_tx * self.k_rx} must equal K = {k}")
            return self.k_tx, self.k_rx
        bits = int(np.log2(k))
        k_rx = 2 ** max((bits - 2) // 2, 0)
        return k // k_rx, k_rx


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig
    mode: str = "mu"                      # "p2p" | "mu"
    snr_db_list: tuple[float, ...] = (5.0,)
    n_p: int = 8
    bits: int = 6
    users: int = 4
    methods: tuple[str, ...] = ()
    precoder: str = "rbd"                 # rbd | rci | wmmse | swmmse
    d: int | None = None
    num_constellations: int = 2500
    num_eval: int | None = None           # cap on evaluation samples (p2p)
    seed: int = 0
    codebook_design_snr_db: float = 25.0
    rho: float = 1.0
    omp_s_max: int | None = None
    enforce_mu_geometry: bool = True
    data: DataConfig = field(default_factory=DataConfig)
    gmm: GmmConfig = field(default_factory=GmmConfig)
    lloyd: LloydOptions = field(default_factory=LloydOptions)
    pga: PgaOptions = field(default_factory=lambda: PgaOptions(max_iter=25))
    swmmse_i_max: int = 300
    wmmse_i_max: int = 300

    @property
    def k(self) -> int:
        return 2 ** self.bits

    def active_methods(self) -> tuple[str, ...]:
        if self.methods:
            return self.methods
        return P2P_METHODS if self.mode == "p2p" else MU_METHODS[:10]

    def validate(self) -> None:
        problems = []
        if self.mode not in ("p2p", "mu"):
            problems.append(f"mode: must be 'p2p' or 'mu', got {self.mode!r}")
        if self.bits < 1:
            problems.append(f"bits: must be >= 1, got {self.bits}")
        if not 1 <= self.n_p <= self.scenario.ntx:
            problems.append(f"n_p: must be in [1, {self.scenario.ntx}], got {self.n_p}")
        if self.mode == "mu":
            if self.users < 1:
                problems.append(f"users: must be >= 1, got {self.users}")
            if (self.enforce_mu_geometry
                    and self.users * self.scenario.nrx != self.scenario.ntx):
                problems.append(
                    "users: J * nrx must equal ntx (set enforce_mu_geometry=false "
                    f"to override), got {self.users} * {self.scenario.nrx} != "
                    f"{self.scenario.ntx}")
            if self.precoder not in ("rbd", "rci", "wmmse", "swmmse"):
                problems.append(f"precoder: unknown {self.precoder!r}")
            if self.users == 1 and self.precoder in ("rbd", "rci"):
                problems.append("precoder: rbd/rci need at least two users")
        if self.num_constellations < 1:
            problems.append("num_constellations: must be >= 1")
        known = P2P_METHODS if self.mode == "p2p" else MU_METHODS
        for m in self.active_methods():
            if m not in known:
                problems.append(f"methods: unknown method {m!r} for mode {self.mode}")
        if self.data.train_count >= self.data.count:
            problems.append("data.train_count: must be below data.count")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass
class Artifacts:
    """Everything an experiment run needs beyond its config."""

    train: ChannelDataset
    eval: ChannelDataset
    model: GmmModel
    sample_cov: np.ndarray
    dictionary: Dictionary
    lloyd_cov: dict[float, CovCodebook] = field(default_factory=dict)
    gmm_cov: dict[float, CovCodebook] = field(default_factory=dict)
    lloyd_dir: DirCodebook | None = None
    gmm_dir: DirCodebook | None = None
    random_dir: list[DirCodebook] | None = None


def build_datasets(cfg: ExperimentConfig
                   ) -> tuple[ChannelDataset, ChannelDataset, ChannelDataset, ChannelDataset]:
    """Generate the scenario and return (train_ul_t, eval_ul_t, train_dl, eval_dl).

    Uplink channels are transposed into downlink orientation and both domains
    are normalized to unit mean per-antenna energy before splitting; mixtures
    train on the transposed uplink sets, evaluation uses the downlink sets.
    """
    ul, dl = generate_scenario(cfg.scenario, cfg.data.count,
                               correlated_pair=cfg.data.correlated_pair)
    ul_t = normalize_dataset(ul.transposed())
    dl = normalize_dataset(dl)
    train_ul, eval_ul = split_dataset(ul_t, cfg.data.train_count)
    train_dl, eval_dl = split_dataset(dl, cfg.data.train_count)
    return train_ul, eval_ul, train_dl, eval_dl


def fit_model(cfg: ExperimentConfig, train: ChannelDataset) -> GmmModel:
    g = cfg.gmm
    if g.structure == "full":
        return fit_em(train, cfg.k, max_iter=g.max_iter, tol=g.tol,
                      reg_eps=g.reg_eps, init_seed=g.init_seed,
                      zero_mean=g.zero_mean)
    k_tx, k_rx = g.side_counts(cfg.k)
    return fit_kronecker(train, k_tx, k_rx, max_iter=g.max_iter, tol=g.tol,
                         reg_eps=g.reg_eps, init_seed=g.init_seed,
                         zero_mean=g.zero_mean)


def build_artifacts(cfg: ExperimentConfig, train: ChannelDataset | None = None,
                    eval_ds: ChannelDataset | None = None,
                    model: GmmModel | None = None) -> Artifacts:
    """Build every artifact the configured methods require."""
    cfg.validate()
    if train is None or eval_ds is None:
        train, _, _, eval_ds = build_datasets(cfg)
    if model is None:
        model = fit_model(cfg, train)
    methods = cfg.active_methods()
    art = Artifacts(train=train, eval=eval_ds, model=model,
                    sample_cov=sample_covariance(train.vectors()),
                    dictionary=build_dictionary(cfg.scenario.ntx_h,
                                                cfg.scenario.ntx_v,
                                                cfg.scenario.nrx))
    need_lloyd = any(m.startswith("lloyd") for m in methods)
    need_gmm_cb = any(m.startswith("gmm") and not m.startswith("gmm-samples")
                      for m in methods)
    if cfg.mode == "p2p":
        for snr in cfg.snr_db_list:
            sigma2 = snr_db_to_sigma2(snr)
            if need_lloyd:
                cb, _ = lloyd_codebook(train, cfg.k, cfg.rho, sigma2, cfg.lloyd)
                art.lloyd_cov[snr] = cb
            if need_gmm_cb:
                art.gmm_cov[snr] = gmm_codebook(model, train, cfg.rho, sigma2, cfg.pga)
    else:
        sigma2 = snr_db_to_sigma2(cfg.codebook_design_snr_db)
        nrx = cfg.scenario.nrx
        if need_lloyd:
            cb, _ = lloyd_codebook(train, cfg.k, cfg.rho, sigma2, cfg.lloyd)
            art.lloyd_cov[cfg.codebook_design_snr_db] = cb
            art.lloyd_dir = extract_directions(cb, nrx)
        if need_gmm_cb:
            cb = gmm_codebook(model, train, cfg.rho, sigma2, cfg.pga)
            art.gmm_cov[cfg.codebook_design_snr_db] = cb
            art.gmm_dir = extract_directions(cb, nrx)
        if any(m.startswith("random") for m in methods):
            art.random_dir = [
                random_grassmann_codebook(cfg.k, cfg.scenario.ntx, nrx,
                                          task_rng(cfg.seed, _STREAM_RANDOM_CB, j))
                for j in range(cfg.users)]
    return art


@dataclass
class ExperimentResult:
    metric: str
    records: list[tuple[str, int, float]]
    traces: dict[str, np.ndarray] = field(default_factory=dict)

    def values(self, method: str) -> np.ndarray:
        return np.array([v for m, _, v in self.records if m == method])

    def methods(self) -> list[str]:
        seen: list[str] = []
        for m, _, _ in self.records:
            if m not in seen:
                seen.append(m)
        return seen


def eccdf(values) -> list[tuple[float, float]]:
    """Empirical complementary CDF P(metric > s) at each distinct value."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("eccdf needs a non-empty value list")
    uniq = np.unique(arr)
    return [(float(s), float(np.mean(arr > s))) for s in uniq]


# ---------------------------------------------------------------------------
# Point-to-point experiment


def _estimate(method: str, art: Artifacts, adapted: AdaptedGmm,
              obs: ObservationModel, y: np.ndarray, h: np.ndarray,
              s_max: int) -> np.ndarray:
    """Channel estimate for an estimator-suffixed method name."""
    kind = method.rsplit("-", 1)[1]
    if kind == "gmm":
        return estimate_gmm(adapted, y)
    if kind == "lmmse":
        return estimate_lmmse(art.sample_cov, obs.A, obs.sigma2, y)
    if kind == "omp":
        est, _ = estimate_omp_genie(art.dictionary, obs.A, y, vec(h), s_max)
        return est
    raise ValidationError(f"unknown estimator suffix in method {method!r}")


def run_p2p_experiment(cfg: ExperimentConfig, art: Artifacts,
                       threads: int = 1) -> ExperimentResult:
    """Normalized spectral efficiency of every configured method per channel."""
    cfg.validate()
    methods = cfg.active_methods()
    nrx, ntx = cfg.scenario.nrx, cfg.scenario.ntx
    n_eval = len(art.eval) if cfg.num_eval is None else min(cfg.num_eval, len(art.eval))
    s_max = cfg.omp_s_max or nrx * cfg.n_p
    records: list[tuple[str, int, float]] = []
    multi_snr = len(cfg.snr_db_list) > 1
    for snr in cfg.snr_db_list:
        sigma2 = snr_db_to_sigma2(snr)
        obs = ObservationModel.build(cfg.scenario.ntx_h, cfg.scenario.ntx_v,
                                     nrx, cfg.n_p, cfg.rho, sigma2)
        adapted = adapt_to_observation(art.model, obs.A, sigma2)
        lloyd_cb = art.lloyd_cov.get(snr)
        gmm_cb = art.gmm_cov.get(snr)

        def one_sample(i: int) -> list[float]:
            h = art.eval.channels[i]
            rng = task_rng(cfg.seed, _STREAM_P2P, i)
            y = observe(h, obs, rng)
            _, capacity = waterfilling_capacity(h, cfg.rho, sigma2)
            out = []
            for method in methods:
                if method == "uniform":
                    q = baseline_tx_strategy("uniform_cov", None, ntx, nrx, cfg.rho)
                elif method == "eigsp":
                    q = baseline_tx_strategy("uniform_eigsp", h, ntx, nrx, cfg.rho)
                elif method == "gmm-y":
                    q = gmm_cb.entries[select_by_responsibility(adapted, y).entry_index]
                elif method == "gmm-h":
                    q = gmm_cb.entries[
                        select_by_responsibility_perfect(art.model, h).entry_index]
                elif method == "lloyd-h":
                    q = lloyd_cb.entries[select_by_rate_cov(h, lloyd_cb, sigma2).entry_index]
                else:
                    h_hat = unvec(_estimate(method, art, adapted, obs, y, h, s_max),
                                  nrx, ntx)
                    q = lloyd_cb.entries[
                        select_by_rate_cov(h_hat, lloyd_cb, sigma2).entry_index]
                out.append(spectral_efficiency(h, q, sigma2, validate=False) / capacity)
            return out

        rows = _map_tasks(one_sample, range(n_eval), threads)
        for i, row in enumerate(rows):
            for method, value in zip(methods, row):
                label = f"{method}@{snr:g}dB" if multi_snr else method
                records.append((label, i, value))
    return ExperimentResult(metric="nSE", records=records)


# ---------------------------------------------------------------------------
# Multi-user experiment


def _feedback_indices(method: str, cfg: ExperimentConfig, art: Artifacts,
                      adapted: AdaptedGmm, obs: ObservationModel,
                      hs: list[np.ndarray], ys: list[np.ndarray],
                      s_max: int) -> list[int]:
    """Per-user selected entry indices (0-based) for one MU method."""
    nrx = cfg.scenario.nrx
    out = []
    for j, (h, y) in enumerate(zip(hs, ys)):
        if method.startswith("gmm-samples"):
            base = method.rsplit("-", 1)[1]
            if base == "h":
                idx = select_by_responsibility_perfect(art.model, h).entry_index
            else:
                idx = select_by_responsibility(adapted, y).entry_index
        elif method == "gmm-y":
            idx = select_by_responsibility(adapted, y).entry_index
        elif method == "gmm-h":
            idx = select_by_responsibility_perfect(art.model, h).entry_index
        else:
            family = method.split("-", 1)[0]
            cb = art.lloyd_dir if family == "lloyd" else art.random_dir[j]
            if method.endswith("-h"):
                h_hat = h
            else:
                h_hat = unvec(_estimate(method, art, adapted, obs, y, h, s_max),
                              nrx, cfg.scenario.ntx)
            idx = select_by_rate_subspace(h_hat, cb, cfg.rho,
                                          obs.sigma2).entry_index
        out.append(idx)
    return out


def _design_precoders(method: str, cfg: ExperimentConfig, art: Artifacts,
                      indices: list[int], sigma2: float, hs: list[np.ndarray],
                      rng: np.random.Generator
                      ) -> tuple[PrecoderSet, np.ndarray | None]:
    nrx = cfg.scenario.nrx
    if method.startswith("gmm-samples"):
        ps, trace = swmmse(art.model, [i + 1 for i in indices], cfg.rho, sigma2,
                           i_max=cfg.swmmse_i_max, rng=rng, trace_channels=hs)
        return ps, trace.eval_sum_rate
    if method.startswith("gmm"):
        dir_cb = art.gmm_dir
    elif method.startswith("lloyd"):
        dir_cb = art.lloyd_dir
    else:
        dir_cb = None
    if dir_cb is not None:
        h_tilde = [dir_cb.entries[i].conj().T for i in indices]
    else:
        h_tilde = [art.random_dir[j].entries[i].conj().T
                   for j, i in enumerate(indices)]
    if cfg.precoder == "rbd":
        return rbd(h_tilde, cfg.rho, sigma2), None
    if cfg.precoder == "rci":
        return rci(h_tilde, cfg.rho, sigma2), None
    d = cfg.d if cfg.d is not None else 1
    ps, trace = wmmse(h_tilde, cfg.rho, sigma2, d, i_max=cfg.wmmse_i_max,
                      trace_channels=hs)
    return ps, trace.eval_sum_rate


def run_mu_experiment(cfg: ExperimentConfig, art: Artifacts,
                      threads: int = 1) -> ExperimentResult:
    """Sum rate on true channels for every configured method per constellation."""
    cfg.validate()
    methods = cfg.active_methods()
    nrx = cfg.scenario.nrx
    s_max = cfg.omp_s_max or nrx * cfg.n_p
    records: list[tuple[str, int, float]] = []
    trace_sums: dict[str, np.ndarray] = {}
    multi_snr = len(cfg.snr_db_list) > 1
    for snr in cfg.snr_db_list:
        sigma2 = snr_db_to_sigma2(snr)
        obs = ObservationModel.build(cfg.scenario.ntx_h, cfg.scenario.ntx_v,
                                     nrx, cfg.n_p, cfg.rho, sigma2)
        adapted = adapt_to_observation(art.model, obs.A, sigma2)

        def one_constellation(c: int) -> list[tuple[float, np.ndarray | None]]:
            rng = task_rng(cfg.seed, _STREAM_MU, c)
            idx = rng.choice(len(art.eval), size=cfg.users, replace=False)
            hs = [art.eval.channels[i] for i in idx]
            ys = [observe(h, obs, rng) for h in hs]
            out = []
            for method in methods:
                sel = _feedback_indices(method, cfg, art, adapted, obs, hs, ys, s_max)
                ps, trace = _design_precoders(method, cfg, art, sel, sigma2, hs, rng)
                out.append((sum_rate(hs, ps, sigma2), trace))
            return out

        results = _map_tasks(one_constellation, range(cfg.num_constellations), threads)
        for c, row in enumerate(results):
            for method, (value, trace) in zip(methods, row):
                label = f"{method}@{snr:g}dB" if multi_snr else method
                records.append((label, c, value))
                if trace is not None:
                    padded = _pad_trace(trace, max(cfg.wmmse_i_max, cfg.swmmse_i_max))
                    if label not in trace_sums:
                        trace_sums[label] = padded
                    else:
                        trace_sums[label] = trace_sums[label] + padded
    traces = {m: t / cfg.num_constellations for m, t in trace_sums.items()}
    return ExperimentResult(metric="SumRate", records=records, traces=traces)


def _pad_trace(trace: np.ndarray, length: int) -> np.ndarray:
    if len(trace) >= length:
        return trace[:length]
    return np.concatenate([trace, np.full(length - len(trace), trace[-1])])


def _map_tasks(fn, indices, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, indices))


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float) -> str:
    return repr(float(x))


def write_results_csv(result: ExperimentResult, path: str | Path) -> None:
    """Long-format records: one row per (method, id, value)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "id", "value"])
        for method, i, value in result.records:
            w.writerow([method, i, _fmt(value)])


def write_eccdf_csv(result: ExperimentResult, path: str | Path) -> None:
    """Wide-format plotting table: sorted per-method values + shared P levels.

    Row i holds each method's i-th smallest value and p = (n-1-i)/n, the
    probability of exceeding that value under the strict-inequality cCDF.
    """
    methods = result.methods()
    columns = {m: np.sort(result.values(m)) for m in methods}
    n = min(len(v) for v in columns.values())
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p"] + methods)
        for i in range(n):
            w.writerow([_fmt((n - 1 - i) / n)] + [_fmt(columns[m][i]) for m in methods])


def write_trace_csv(result: ExperimentResult, path: str | Path) -> None:
    """Mean per-iteration sum-rate of the iterative precoders."""
    if not result.traces:
        return
    methods = sorted(result.traces)
    length = max(len(t) for t in result.traces.values())
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + methods)
        for i in range(length):
            row = [str(i + 1)]
            for m in methods:
                t = result.traces[m]
                row.append(_fmt(t[min(i, len(t) - 1)]))
            w.writerow(row)
