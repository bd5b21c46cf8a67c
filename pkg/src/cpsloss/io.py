"""Dataset readers and deterministic report writers.

Tabular inputs are CSV with a fixed header; lines starting with ``#`` before
the header carry provenance notes and are returned alongside the data.
Key-value files (geometry, trace metadata, config, reports) are JSON.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .field_solver import CpsGeometry
from .loss_budget import BudgetSystem
from .regrowth import RegrowthObservation
from .trace_fit import ReflectionTrace, device_power

TRACE_COLUMNS = ("frequency_hz", "s11_real", "s11_imag")
POWER_COLUMNS = ("n_photon", "q_int")
TEMPERATURE_COLUMNS = ("temperature_k", "q_intr")
OBSERVATION_COLUMNS = ("device_id", "f0_before_hz", "f0_after_hz", "q_intr_before", "q_intr_after")
BUDGET_COLUMNS = ("device_id", "q_intr", "p_ma_eff", "p_ms_eff", "p_sa", "qp_coeff")
TRACE_META_KEYS = {"applied_power_dbm", "line_attenuation_db", "temperature_k", "provenance"}
GEOMETRY_KEYS = {"width_um", "gap_um", "length_um", "t_nb_nm", "eps_substrate", "eps_interface",
                 "t_ma_nm", "t_ms_nm", "t_sa_nm"}
GEOMETRY_OPTIONAL = {"lambda_nm", "filament_nx", "filament_ny", "f0_hz", "name",
                     "eps_substrate_normal", "provenance"}


def read_table(path, required, optional=(), text_columns=()):
    """Parse a CSV file into ``{column: list}`` plus its ``#`` comments.

    Numeric columns are converted to float. Raises ParseError with the
    1-based line number of the first offending line.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    comments = []
    start = 0
    while start < len(lines) and (lines[start].startswith("#") or not lines[start].strip()):
        if lines[start].startswith("#"):
            comments.append(lines[start][1:].strip())
        start += 1
    if start == len(lines):
        raise ParseError(f"{path}: missing header", line=start + 1)
    reader = csv.reader(lines[start:])
    header = [h.strip() for h in next(reader)]
    missing = [c for c in required if c not in header]
    unknown = [c for c in header if c not in required and c not in optional]
    if missing or unknown:
        raise ParseError(f"{path}: header {header} lacks {missing} or has unknown {unknown}",
                         line=start + 1)
    cols = {h: [] for h in header}
    for offset, row in enumerate(reader, start=start + 2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{offset}: expected {len(header)} fields, got {len(row)}",
                             line=offset)
        for h, raw in zip(header, row):
            raw = raw.strip()
            if h in text_columns:
                if not raw:
                    raise ParseError(f"{path}:{offset}: empty {h}", line=offset)
                cols[h].append(raw)
                continue
            try:
                value = float(raw)
            except ValueError:
                raise ParseError(f"{path}:{offset}: {h}={raw!r} is not a number",
                                 line=offset) from None
            if math.isnan(value):
                raise ParseError(f"{path}:{offset}: {h} is NaN", line=offset)
            cols[h].append(value)
    if not cols[header[0]]:
        raise ParseError(f"{path}: no data rows", line=start + 2)
    return cols, comments


def read_json(path, allowed=None):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: expected a key-value object")
    if allowed is not None:
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise ParseError(f"{path}: unknown keys {unknown}")
    return data


def trace_sidecar(path):
    side = Path(path).with_suffix(".json")
    return side if side.exists() else None


def read_trace(path, metadata_path=None, default_attenuation_db=0.0):
    """Load a reflection trace and its metadata sidecar, if any.

    Power at the device is the applied power minus the line attenuation,
    taken from the sidecar or else ``default_attenuation_db``.
    """
    cols, comments = read_table(path, TRACE_COLUMNS)
    meta_path = metadata_path or trace_sidecar(path)
    meta = read_json(meta_path, TRACE_META_KEYS) if meta_path else {}
    atten = meta.get("line_attenuation_db", default_attenuation_db)
    kwargs = {"name": Path(path).stem}
    if "applied_power_dbm" in meta:
        kwargs["applied_power"] = device_power(meta["applied_power_dbm"], atten)
    if "temperature_k" in meta:
        kwargs["temperature"] = meta["temperature_k"]
    f = np.array(cols["frequency_hz"])
    s = np.array(cols["s11_real"]) + 1j * np.array(cols["s11_imag"])
    try:
        trace = ReflectionTrace(f, s, **kwargs)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return trace, {"comments": comments, **meta, "line_attenuation_db": atten}


def read_sweep(path, kind):
    """Rows (x, q[, sigma]) of a power or temperature sweep and a sigma flag."""
    if kind == "power":
        req, sig = POWER_COLUMNS, "q_int_sigma"
    elif kind == "temperature":
        req, sig = TEMPERATURE_COLUMNS, "q_intr_sigma"
    else:
        raise InvalidInputError("sweep kind must be 'power' or 'temperature'")
    cols, comments = read_table(path, req, optional=(sig,))
    arrays = [cols[c] for c in req]
    has_sigma = sig in cols
    if has_sigma:
        arrays.append(cols[sig])
    return np.column_stack(arrays), has_sigma, comments


def read_observations(path, p_tilde_ma_eff=None):
    """Regrowth observations; ``p_tilde_ma_eff`` maps device id to ppm/nm."""
    cols, comments = read_table(path, OBSERVATION_COLUMNS, text_columns=("device_id",))
    p_map = p_tilde_ma_eff or {}
    obs = []
    for i, dev in enumerate(cols["device_id"]):
        obs.append(RegrowthObservation(dev, cols["f0_before_hz"][i], cols["f0_after_hz"][i],
                                       cols["q_intr_before"][i], cols["q_intr_after"][i],
                                       p_map.get(dev)))
    return obs, comments


def read_budget(path):
    cols, comments = read_table(path, BUDGET_COLUMNS, text_columns=("device_id",))
    return BudgetSystem(tuple(cols["device_id"]), cols["p_ma_eff"], cols["p_ms_eff"],
                        cols["p_sa"], cols["qp_coeff"], cols["q_intr"]), comments


def geometry_from_dict(data, source="geometry"):
    missing = sorted(GEOMETRY_KEYS - set(data))
    unknown = sorted(set(data) - GEOMETRY_KEYS - GEOMETRY_OPTIONAL)
    if missing or unknown:
        raise ParseError(f"{source}: missing keys {missing}, unknown keys {unknown}")
    geom = CpsGeometry(
        width=data["width_um"] * 1e-6, gap=data["gap_um"] * 1e-6,
        length=data["length_um"] * 1e-6, t_nb=data["t_nb_nm"] * 1e-9,
        eps_substrate=data["eps_substrate"], eps_interface=data["eps_interface"],
        t_ma=data["t_ma_nm"] * 1e-9, t_ms=data["t_ms_nm"] * 1e-9, t_sa=data["t_sa_nm"] * 1e-9,
        eps_substrate_normal=data.get("eps_substrate_normal"), f0=data.get("f0_hz"),
        name=data.get("name", ""))
    extras = {k: data[k] for k in ("lambda_nm", "filament_nx", "filament_ny") if k in data}
    return geom, extras


def read_geometry(path):
    data = read_json(path)
    if "name" not in data:
        data["name"] = Path(path).stem
    return geometry_from_dict(data, str(path))


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj):
    """Canonical JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_tidy_csv(path, header, rows):
    """One observation per row, floats in repr form for exact round trips."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
