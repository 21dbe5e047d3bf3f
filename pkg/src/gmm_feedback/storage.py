"""Binary persistence for datasets, mixture models, and codebooks.

Datasets are stored as a raw blob of interleaved little-endian float64
(re, im) pairs, row-major per matrix, next to a JSON sidecar ``<path>.json``
holding dimensions, count, domain tag, normalization factor, scenario fields,
and seed.  Models and codebooks are single files: a magic tag, a
length-prefixed JSON header describing the packed arrays, then the raw
arrays in order.  All round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .channels import ChannelDataset, ScenarioConfig
from .codebooks import CovCodebook, DirCodebook
from .errors import ArgumentError
from .gmm import GmmModel, KroneckerFactors

_MAGIC = b"GMFB"
_VERSION = 1


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def save_dataset(ds: ChannelDataset, path: str | Path) -> None:
    path = Path(path)
    blob = np.ascontiguousarray(ds.channels, dtype="<c16").tobytes()
    path.write_bytes(blob)
    sc = ds.scenario
    header = {
        "count": len(ds),
        "rows": ds.channels.shape[1],
        "cols": ds.channels.shape[2],
        "domain_tag": ds.domain_tag,
        "normalization_factor": ds.normalization_factor,
        "scenario": {
            "ntx_h": sc.ntx_h, "ntx_v": sc.ntx_v, "nrx": sc.nrx,
            "num_paths_range": list(sc.num_paths_range),
            "angle_spread_deg": sc.angle_spread_deg,
            "carrier_offset": sc.carrier_offset,
            "rng_seed": sc.rng_seed,
        },
    }
    _sidecar(path).write_text(json.dumps(header, indent=1, sort_keys=True))


def load_dataset(path: str | Path) -> ChannelDataset:
    path = Path(path)
    header = json.loads(_sidecar(path).read_text())
    count, rows, cols = header["count"], header["rows"], header["cols"]
    blob = np.frombuffer(path.read_bytes(), dtype="<c16")
    if blob.size != count * rows * cols:
        raise ArgumentError(
            f"dataset blob holds {blob.size} values, header expects {count * rows * cols}")
    sc = header["scenario"]
    scenario = ScenarioConfig(
        ntx_h=sc["ntx_h"], ntx_v=sc["ntx_v"], nrx=sc["nrx"],
        num_paths_range=tuple(sc["num_paths_range"]),
        angle_spread_deg=sc["angle_spread_deg"],
        carrier_offset=sc["carrier_offset"], rng_seed=sc["rng_seed"])
    channels = blob.reshape(count, rows, cols).astype(np.complex128)
    return ChannelDataset(channels=channels, domain_tag=header["domain_tag"],
                          scenario=scenario,
                          normalization_factor=header["normalization_factor"])


def _write_packed(path: Path, header: dict, arrays: list[np.ndarray]) -> None:
    header = dict(header)
    header["arrays"] = [{"shape": list(a.shape), "dtype": str(a.dtype)}
                        for a in arrays]
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(raw)))
        fh.write(raw)
        for a in arrays:
            fh.write(np.ascontiguousarray(a).tobytes())


def _read_packed(path: Path) -> tuple[dict, list[np.ndarray]]:
    data = path.read_bytes()
    if data[:4] != _MAGIC:
        raise ArgumentError(f"{path} is not a packed model/codebook file")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != _VERSION:
        raise ArgumentError(f"unsupported file version {version}")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    arrays = []
    offset = 12 + hlen
    for spec in header["arrays"]:
        dtype = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * dtype.itemsize
        arr = np.frombuffer(data[offset:offset + nbytes], dtype=dtype)
        arrays.append(arr.reshape(spec["shape"]).copy())
        offset += nbytes
    return header, arrays


def save_model(model: GmmModel, path: str | Path) -> None:
    path = Path(path)
    header = {
        "kind": "gmm",
        "k": model.k,
        "dim": model.dim,
        "structure": model.structure,
        "channel_shape": list(model.channel_shape) if model.channel_shape else None,
    }
    arrays = [model.weights.astype("<f8"), model.means.astype("<c16"),
              model.covariances.astype("<c16")]
    if model.kronecker is not None:
        arrays += [model.kronecker.cov_tx.astype("<c16"),
                   model.kronecker.cov_rx.astype("<c16")]
    _write_packed(path, header, arrays)


def load_model(path: str | Path) -> GmmModel:
    header, arrays = _read_packed(Path(path))
    if header.get("kind") != "gmm":
        raise ArgumentError(f"{path} does not hold a mixture model")
    kron = None
    if header["structure"] == "kronecker":
        kron = KroneckerFactors(cov_tx=arrays[3], cov_rx=arrays[4])
    shape = header.get("channel_shape")
    return GmmModel(weights=arrays[0], means=arrays[1], covariances=arrays[2],
                    kronecker=kron,
                    channel_shape=tuple(shape) if shape else None)


def save_cov_codebook(cb: CovCodebook, path: str | Path) -> None:
    _write_packed(Path(path),
                  {"kind": "cov_codebook", "k": len(cb),
                   "design_snr_db": cb.design_snr_db, "rho": cb.rho},
                  [cb.entries.astype("<c16")])


def load_cov_codebook(path: str | Path) -> CovCodebook:
    header, arrays = _read_packed(Path(path))
    if header.get("kind") != "cov_codebook":
        raise ArgumentError(f"{path} does not hold a covariance codebook")
    return CovCodebook(entries=arrays[0], design_snr_db=header["design_snr_db"],
                       rho=header["rho"])


def save_dir_codebook(cb: DirCodebook, path: str | Path) -> None:
    _write_packed(Path(path), {"kind": "dir_codebook", "k": len(cb)},
                  [cb.entries.astype("<c16")])


def load_dir_codebook(path: str | Path) -> DirCodebook:
    header, arrays = _read_packed(Path(path))
    if header.get("kind") != "dir_codebook":
        raise ArgumentError(f"{path} does not hold a directional codebook")
    return DirCodebook(entries=arrays[0])
