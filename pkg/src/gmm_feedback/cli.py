"""Command-line driver: dataset generation, mixture fitting, codebook
construction, Monte Carlo experiment runs, and result reporting.

Configuration is an INI file with [scenario], [data], [gmm], and [experiment]
sections; see the repository README for the full key reference.  Artifacts
live in the --out directory and later stages rebuild anything missing, so
``run`` also works on an empty directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
from pathlib import Path

import numpy as np

from . import storage
from .channels import ScenarioConfig
from .codebooks import (LloydOptions, PgaOptions, extract_directions,
                        gmm_codebook, lloyd_codebook)
from .errors import FeedbackError, ValidationError
from .experiments import (Artifacts, DataConfig, ExperimentConfig, GmmConfig,
                          build_datasets, eccdf, fit_model,
                          run_mu_experiment, run_p2p_experiment,
                          snr_db_to_sigma2, task_rng, write_eccdf_csv,
                          write_results_csv, write_trace_csv)
from .codebooks import random_grassmann_codebook
from .estimators import build_dictionary, sample_covariance

_STREAM_RANDOM_CB = 3


def _get(section, key, cast, default):
    if section is None or key not in section:
        return default
    raw = section.get(key, "").strip()
    if raw == "":
        return default
    if cast is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return cast(raw)


def load_config(path: str | Path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValidationError(f"config file not found: {path}")
    sc = parser["scenario"] if parser.has_section("scenario") else None
    if sc is None:
        raise ValidationError("config must contain a [scenario] section")
    scenario = ScenarioConfig(
        ntx_h=_get(sc, "ntx_h", int, 4),
        ntx_v=_get(sc, "ntx_v", int, 4),
        nrx=_get(sc, "nrx", int, 4),
        num_paths_range=(_get(sc, "num_paths_min", int, 2),
                         _get(sc, "num_paths_max", int, 8)),
        angle_spread_deg=_get(sc, "angle_spread_deg", float, 4.0),
        carrier_offset=_get(sc, "carrier_offset", float, 200e6 / 2.53e9),
        rng_seed=_get(sc, "rng_seed", int, 0))
    da = parser["data"] if parser.has_section("data") else None
    data = DataConfig(
        count=_get(da, "count", int, 30000),
        train_count=_get(da, "train_count", int, 20000),
        correlated_pair=_get(da, "correlated_pair", bool, True))
    gm = parser["gmm"] if parser.has_section("gmm") else None
    gmm = GmmConfig(
        structure=_get(gm, "structure", str, "kronecker"),
        k_tx=_get(gm, "k_tx", int, None),
        k_rx=_get(gm, "k_rx", int, None),
        max_iter=_get(gm, "max_iter", int, 100),
        tol=_get(gm, "tol", float, 1e-5),
        reg_eps=_get(gm, "reg_eps", float, None),
        init_seed=_get(gm, "init_seed", int, 0),
        zero_mean=_get(gm, "zero_mean", bool, False))
    ll = parser["lloyd"] if parser.has_section("lloyd") else None
    lloyd = LloydOptions(
        max_outer=_get(ll, "max_outer", int, 30),
        seed=_get(ll, "seed", int, 0),
        pga=PgaOptions(max_iter=_get(ll, "pga_max_iter", int, 25)))
    pg = parser["pga"] if parser.has_section("pga") else None
    pga = PgaOptions(max_iter=_get(pg, "max_iter", int, 25))
    ex = parser["experiment"] if parser.has_section("experiment") else None
    snr_raw = _get(ex, "snr_db", str, "5")
    snrs = tuple(float(s) for s in snr_raw.replace(",", " ").split())
    methods_raw = _get(ex, "methods", str, "")
    methods = tuple(m.strip() for m in methods_raw.split(",") if m.strip())
    return ExperimentConfig(
        scenario=scenario,
        mode=_get(ex, "mode", str, "mu"),
        snr_db_list=snrs,
        n_p=_get(ex, "n_p", int, 8),
        bits=_get(ex, "bits", int, 6),
        users=_get(ex, "users", int, 4),
        methods=methods,
        precoder=_get(ex, "precoder", str, "rbd"),
        d=_get(ex, "d", int, None),
        num_constellations=_get(ex, "num_constellations", int, 2500),
        num_eval=_get(ex, "num_eval", int, None),
        seed=_get(ex, "seed", int, 0),
        codebook_design_snr_db=_get(ex, "codebook_design_snr_db", float, 25.0),
        omp_s_max=_get(ex, "omp_s_max", int, None),
        enforce_mu_geometry=_get(ex, "enforce_mu_geometry", bool, True),
        data=data, gmm=gmm, lloyd=lloyd, pga=pga,
        swmmse_i_max=_get(ex, "swmmse_i_max", int, 300),
        wmmse_i_max=_get(ex, "wmmse_i_max", int, 300))


# ---------------------------------------------------------------------------
# Artifact files


def _dataset_paths(out: Path) -> dict[str, Path]:
    return {name: out / f"{name}.bin"
            for name in ("train_ul", "eval_ul", "train_dl", "eval_dl")}


def ensure_datasets(cfg: ExperimentConfig, out: Path, force: bool = False) -> dict:
    paths = _dataset_paths(out)
    if force or not all(p.exists() for p in paths.values()):
        print("generating datasets ...", flush=True)
        train_ul, eval_ul, train_dl, eval_dl = build_datasets(cfg)
        storage.save_dataset(train_ul, paths["train_ul"])
        storage.save_dataset(eval_ul, paths["eval_ul"])
        storage.save_dataset(train_dl, paths["train_dl"])
        storage.save_dataset(eval_dl, paths["eval_dl"])
    return {name: storage.load_dataset(p) for name, p in paths.items()}


def ensure_model(cfg: ExperimentConfig, out: Path, train, force: bool = False):
    path = out / "gmm.model"
    if force or not path.exists():
        print(f"fitting {cfg.gmm.structure} mixture with K={cfg.k} ...", flush=True)
        model = fit_model(cfg, train)
        storage.save_model(model, path)
    return storage.load_model(path)


def ensure_codebooks(cfg: ExperimentConfig, out: Path, train, model,
                     force: bool = False) -> Artifacts:
    art = Artifacts(train=train, eval=train, model=model,
                    sample_cov=sample_covariance(train.vectors()),
                    dictionary=build_dictionary(cfg.scenario.ntx_h,
                                                cfg.scenario.ntx_v,
                                                cfg.scenario.nrx))
    methods = cfg.active_methods()
    need_lloyd = any(m.startswith("lloyd") for m in methods)
    need_gmm = any(m.startswith("gmm") and not m.startswith("gmm-samples")
                   for m in methods)
    snrs = (cfg.snr_db_list if cfg.mode == "p2p"
            else (cfg.codebook_design_snr_db,))
    for snr in snrs:
        sigma2 = snr_db_to_sigma2(snr)
        if need_lloyd:
            path = out / f"lloyd_cov_snr{snr:g}.cb"
            if force or not path.exists():
                print(f"building Lloyd codebook at {snr:g} dB ...", flush=True)
                cb, _ = lloyd_codebook(train, cfg.k, cfg.rho, sigma2, cfg.lloyd)
                storage.save_cov_codebook(cb, path)
            art.lloyd_cov[snr] = storage.load_cov_codebook(path)
        if need_gmm:
            path = out / f"gmm_cov_snr{snr:g}.cb"
            if force or not path.exists():
                print(f"building mixture codebook at {snr:g} dB ...", flush=True)
                cb = gmm_codebook(model, train, cfg.rho, sigma2, cfg.pga)
                storage.save_cov_codebook(cb, path)
            art.gmm_cov[snr] = storage.load_cov_codebook(path)
    if cfg.mode == "mu":
        if need_lloyd:
            art.lloyd_dir = extract_directions(
                art.lloyd_cov[cfg.codebook_design_snr_db], cfg.scenario.nrx)
        if need_gmm:
            art.gmm_dir = extract_directions(
                art.gmm_cov[cfg.codebook_design_snr_db], cfg.scenario.nrx)
        if any(m.startswith("random") for m in methods):
            art.random_dir = []
            for j in range(cfg.users):
                path = out / f"random_dir_user{j}.cb"
                if force or not path.exists():
                    cb = random_grassmann_codebook(
                        cfg.k, cfg.scenario.ntx, cfg.scenario.nrx,
                        task_rng(cfg.seed, _STREAM_RANDOM_CB, j))
                    storage.save_dir_codebook(cb, path)
                art.random_dir.append(storage.load_dir_codebook(path))
    return art


def _load_artifacts(cfg: ExperimentConfig, out: Path) -> Artifacts:
    ds = ensure_datasets(cfg, out)
    model = ensure_model(cfg, out, ds["train_ul"])
    art = ensure_codebooks(cfg, out, ds["train_ul"], model)
    art.eval = ds["eval_dl"]
    return art


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(cfg: ExperimentConfig, out: Path, args) -> int:
    ensure_datasets(cfg, out, force=True)
    print(f"datasets written to {out}")
    return 0


def cmd_fit(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = ensure_datasets(cfg, out)
    ensure_model(cfg, out, ds["train_ul"], force=True)
    print(f"model written to {out / 'gmm.model'}")
    return 0


def cmd_codebook(cfg: ExperimentConfig, out: Path, args) -> int:
    ds = ensure_datasets(cfg, out)
    model = ensure_model(cfg, out, ds["train_ul"])
    ensure_codebooks(cfg, out, ds["train_ul"], model, force=True)
    print(f"codebooks written to {out}")
    return 0


def cmd_run(cfg: ExperimentConfig, out: Path, args) -> int:
    art = _load_artifacts(cfg, out)
    threads = args.threads
    if cfg.mode == "p2p":
        result = run_p2p_experiment(cfg, art, threads=threads)
        metric = "nse"
    else:
        result = run_mu_experiment(cfg, art, threads=threads)
        metric = "sumrate"
    write_results_csv(result, out / f"results_{metric}.csv")
    write_eccdf_csv(result, out / f"eccdf_{metric}.csv")
    if result.traces:
        write_trace_csv(result, out / f"trace_{cfg.precoder}.csv")
    for method in result.methods():
        vals = result.values(method)
        print(f"{method:>16s}: mean={vals.mean():.4f} std={vals.std():.4f}")
    print(f"results written to {out}")
    return 0


def cmd_report(cfg: ExperimentConfig, out: Path, args) -> int:
    found = False
    for metric in ("nse", "sumrate"):
        path = out / f"results_{metric}.csv"
        if not path.exists():
            continue
        found = True
        by_method: dict[str, list[float]] = {}
        with path.open() as fh:
            for row in csv.DictReader(fh):
                by_method.setdefault(row["method"], []).append(float(row["value"]))
        print(f"[{metric}]")
        for method, vals in by_method.items():
            arr = np.asarray(vals)
            steps = eccdf(arr)
            median = steps[len(steps) // 2][0]
            print(f"{method:>16s}: n={arr.size} mean={arr.mean():.4f} "
                  f"std={arr.std():.4f} median={median:.4f}")
        with (out / f"eccdf_{metric}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            methods = list(by_method)
            w.writerow(["p"] + methods)
            n = min(len(v) for v in by_method.values())
            cols = {m: np.sort(np.asarray(v))[:n] for m, v in by_method.items()}
            for i in range(n):
                w.writerow([repr((n - 1 - i) / n)]
                           + [repr(float(cols[m][i])) for m in methods])
    if not found:
        print(f"no results_*.csv found in {out}", file=sys.stderr)
        return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmm-feedback",
        description="GMM-based limited feedback experiments for FDD MIMO")
    parser.add_argument("--config", required=True, help="INI config file")
    parser.add_argument("--out", default="results", help="artifact/output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the experiment seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for Monte Carlo tasks")
    parser.add_argument("--method", default=None,
                        help="comma-separated method filter")
    parser.add_argument("command",
                        choices=["generate", "fit", "codebook", "run", "report"])
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.method:
            cfg.methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
        cfg.validate()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        handler = {"generate": cmd_generate, "fit": cmd_fit,
                   "codebook": cmd_codebook, "run": cmd_run,
                   "report": cmd_report}[args.command]
        return handler(cfg, out, args)
    except FeedbackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
