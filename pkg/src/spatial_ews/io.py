"""File formats: datasets, curves, experiment outputs and run configs.

Datasets are CSV (``t,x,u,v``; rows ordered by time then space) with a JSON
sidecar. Floats are written with 17 significant digits so that parsing and
re-serializing is lossless.
"""
from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .dispersion import DispersionCurve, DominantMode, classify
from .sim import Forcing, NoiseConfig, SimConfig, SpatioTemporalData

__all__ = [
    "FORMAT_VERSION",
    "ConfigError",
    "DatasetError",
    "write_dataset",
    "read_dataset",
    "write_curve_csv",
    "read_curve_csv",
    "write_json",
    "load_sim_config",
    "sim_config_document",
    "write_experiment_cell",
]

FORMAT_VERSION = 1
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    pass


class DatasetError(ValueError):
    pass


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _clean(obj):
    # JSON has no NaN/inf; keep them readable as strings
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, doc) -> Path:
    path = Path(path)
    doc = json.loads(json.dumps(doc, default=_json_default))
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")
    return path


def sidecar_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".meta.json")


def write_dataset(data: SpatioTemporalData, csv_path) -> tuple[Path, Path]:
    """Write the dataset CSV and its metadata sidecar."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    nt, nx = data.times.size, data.xs.size
    table = np.empty((nt * nx, 2 + len(data.names)))
    table[:, 0] = np.repeat(data.times, nx)
    table[:, 1] = np.tile(data.xs, nt)
    for i in range(len(data.names)):
        table[:, 2 + i] = data.values[i].reshape(-1)
    header = ",".join(("t", "x", *data.names))
    np.savetxt(csv_path, table, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")
    meta = {
        "format_version": FORMAT_VERSION,
        "columns": ["t", "x", *data.names],
        "n_times": nt,
        "n_space": nx,
        "dt_record": data.dt_record,
        "dx_effective": data.dx_effective,
        "data_file": csv_path.name,
    }
    for key in ("config", "seed", "time_keep", "space_keep"):
        if key in data.meta:
            meta[key] = data.meta[key]
    side = write_json(sidecar_path(csv_path), meta)
    return csv_path, side


def read_dataset(path) -> SpatioTemporalData:
    """Read a dataset CSV (or its directory) and validate it against the sidecar."""
    path = Path(path)
    if path.is_dir():
        path = path / "data.csv"
    side = sidecar_path(path)
    if not path.exists():
        raise DatasetError(f"dataset file {path} not found")
    if not side.exists():
        raise DatasetError(f"metadata sidecar {side} not found")
    meta = json.loads(side.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"unsupported format version {meta.get('format_version')!r}")
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if header != meta["columns"] or header[:2] != ["t", "x"]:
        raise DatasetError(f"CSV header {header} does not match sidecar {meta['columns']}")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"malformed dataset {path}: {exc}") from exc
    nt, nx = int(meta["n_times"]), int(meta["n_space"])
    if table.shape != (nt * nx, len(header)):
        raise DatasetError(
            f"dataset has {table.shape[0]} rows x {table.shape[1]} columns; sidecar "
            f"expects {nt * nx} x {len(header)}")
    t = table[:, 0].reshape(nt, nx)
    x = table[:, 1].reshape(nt, nx)
    if not ((t == t[:, :1]).all() and (x == x[:1]).all()):
        raise DatasetError("rows are not ordered by time then space")
    times, xs = t[:, 0].copy(), x[0].copy()
    if nt > 1 and not np.allclose(np.diff(times), meta["dt_record"], rtol=1e-6, atol=0):
        raise DatasetError("time spacing does not match sidecar dt_record")
    if nx > 1 and not np.allclose(np.diff(xs), meta["dx_effective"], rtol=1e-6, atol=0):
        raise DatasetError("grid spacing does not match sidecar dx_effective")
    values = np.stack([table[:, 2 + i].reshape(nt, nx) for i in range(len(header) - 2)])
    return SpatioTemporalData(times=times, xs=xs, values=values,
                              names=tuple(header[2:]), meta=meta)


def write_curve_csv(path, curve: DispersionCurve) -> Path:
    path = Path(path)
    alpha = curve.eigs.shape[1]
    header = ["k", "max_real"]
    header += [f"re_eig_{i + 1}" for i in range(alpha)]
    header += [f"im_eig_{i + 1}" for i in range(alpha)]
    table = np.column_stack([curve.k, curve.max_real, curve.eigs.real, curve.eigs.imag])
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",", header=",".join(header),
               comments="")
    return path


def read_curve_csv(path) -> DispersionCurve:
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    alpha = (table.shape[1] - 2) // 2
    eigs = table[:, 2:2 + alpha] + 1j * table[:, 2 + alpha:]
    return DispersionCurve(k=table[:, 0], eigs=eigs)


def mode_document(mode: DominantMode, k_threshold: float) -> dict:
    return {"k_star": mode.k_star, "lambda_star": mode.lambda_star,
            "classification": classify(mode, k_threshold).value,
            "k_threshold": k_threshold}


# -- run configuration --------------------------------------------------------

_CONFIG_SCHEMA = {
    "model": {"m": float, "h": float, "delta": float},
    "forcing": {"p0": float, "rate": float},
    "grid": {"L": float, "dx": float},
    "time": {"dt": float, "t_end": float, "record_stride": int, "record_start": float},
    "noise": {"strength": float, "correlation_length": float},
}
_CONFIG_REQUIRED = {("forcing", "p0")}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _config_error(source: str, text: str, key: str, message: str) -> ConfigError:
    line = _line_of(text, key)
    where = f"{source}:{line}" if line else source
    return ConfigError(f"{where}: {message}")


def sim_config_document(cfg: SimConfig) -> dict:
    """The structured-text (JSON) form of a run config."""
    return {
        "format_version": FORMAT_VERSION,
        "model": {"m": cfg.m, "h": cfg.h, "delta": cfg.delta},
        "forcing": {"p0": cfg.forcing.p0, "rate": cfg.forcing.rate},
        "grid": {"L": cfg.L, "dx": cfg.dx},
        "time": {"dt": cfg.dt, "t_end": cfg.t_end, "record_stride": cfg.record_stride,
                 "record_start": cfg.record_start},
        "noise": {"strength": cfg.noise.strength,
                  "correlation_length": cfg.noise.correlation_length},
        "seed": cfg.seed,
    }


def parse_sim_config(text: str, source: str = "<config>", **overrides) -> SimConfig:
    """Parse and validate a JSON run config; messages point at the offending line.

    ``overrides`` are flat field names (``seed``, ``t_end``, ``p0``...) that
    replace values from the document.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise _config_error(source, text, "format_version",
                            f"unsupported format_version {version!r}")
    flat: dict = {}
    for section, value in doc.items():
        if section in ("format_version",):
            continue
        if section == "seed":
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise _config_error(source, text, "seed", "seed must be a non-negative integer")
            flat["seed"] = value
            continue
        if section not in _CONFIG_SCHEMA:
            raise _config_error(source, text, section, f"unknown section {section!r}")
        if not isinstance(value, dict):
            raise _config_error(source, text, section, f"section {section!r} must be an object")
        for key, v in value.items():
            kind = _CONFIG_SCHEMA[section].get(key)
            if kind is None:
                raise _config_error(source, text, key, f"unknown field {section}.{key}")
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise _config_error(source, text, key, f"{section}.{key} must be a number")
            if kind is int and not float(v).is_integer():
                raise _config_error(source, text, key, f"{section}.{key} must be an integer")
            flat[key] = kind(v)
    for section, key in _CONFIG_REQUIRED:
        if key not in flat and key not in overrides:
            raise ConfigError(f"{source}: missing required field {section}.{key}")
    flat.update({k: v for k, v in overrides.items() if v is not None})

    forcing = Forcing(p0=flat.pop("p0"), rate=flat.pop("rate", 0.0))
    noise = NoiseConfig(strength=flat.pop("strength", 1.0),
                        correlation_length=flat.pop("correlation_length", 0.1))
    try:
        return SimConfig(forcing=forcing, noise=noise, **flat)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in ("dt", "dx", "L", "t_end", "record_start", "delta",
                                "p0", "m", "h") if re.search(rf"\b{k}\b", msg)), None)
        if key:
            raise _config_error(source, text, key, msg) from exc
        raise ConfigError(f"{source}: {msg}") from exc


def load_sim_config(path, **overrides) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_sim_config(text, str(path), **overrides)


# -- experiment outputs -------------------------------------------------------

def write_experiment_cell(directory, result, summary) -> dict:
    """Scatter CSV, curves CSV and stats document for one experiment cell."""
    from .stats import format_mean_std

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    with (directory / "scatter.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "k_star", "lambda_star", "flags"])
        for m in result.members:
            if m.ok:
                w.writerow([m.seed, _fmt(m.mode.k_star), _fmt(m.mode.lambda_star),
                            ";".join(m.flags)])
            else:
                w.writerow([m.seed, "nan", "nan", "failed:" + m.error.split(":")[0]])

    cols = [summary.k, summary.mean_curve, summary.p05_curve, summary.p95_curve]
    names = ["k", "mean", "p05", "p95", "true"]
    cols += [c.max_real for c in summary.true_curves]
    if len(summary.true_curves) > 1:
        names.append("true_final")
    np.savetxt(directory / "curves.csv", np.column_stack(cols), fmt=FLOAT_FMT,
               delimiter=",", header=",".join(names), comments="")

    def ms(pair):
        return None if pair is None else {
            "mean": pair[0], "std": pair[1], "text": format_mean_std(*pair)}

    ell = summary.ellipse
    stats = {
        "setting": result.setting.label,
        "cell": result.setting.cell,
        "n_members": summary.n_members,
        "n_failed": summary.n_failed,
        "failures": {str(m.seed): m.error for m in result.members if not m.ok},
        "flag_counts": summary.flag_counts,
        "classification_counts": summary.classification_counts,
        "true_mode": {"k_star": summary.true_mode.k_star,
                      "lambda_star": summary.true_mode.lambda_star},
        "delta_k_star": ms(summary.delta_k),
        "delta_lambda_star": ms(summary.delta_lambda),
        "mean_k_star": ms((float(summary.scatter[:, 0].mean()),
                           float(summary.scatter[:, 0].std(ddof=1))))
        if len(summary.scatter) > 1 else None,
        "mean_lambda_star": ms((float(summary.scatter[:, 1].mean()),
                                float(summary.scatter[:, 1].std(ddof=1))))
        if len(summary.scatter) > 1 else None,
        "ellipse": None if ell is None else {
            "center": ell.center, "axes": ell.axes.T, "radii": ell.radii},
        "theta": {k: {"mean": summary.theta_mean[k], "std": summary.theta_std[k],
                      "text": format_mean_std(summary.theta_mean[k], summary.theta_std[k])}
                  for k in summary.theta_mean},
        "kde_k_star": {"grid": summary.kde_k[0], "density": summary.kde_k[1]},
        "kde_lambda_star": {"grid": summary.kde_lambda[0], "density": summary.kde_lambda[1]},
    }
    write_json(directory / "stats.json", stats)
    return stats
