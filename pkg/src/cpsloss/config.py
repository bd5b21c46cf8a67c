"""Project configuration: one JSON document with units in the key names.

Unknown keys and out-of-range values are rejected at load. Relative file
paths resolve against the directory holding the config file.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

from .constants import MEV, E_CHARGE, NIOBIUM, MaterialConstants
from .errors import InvalidInputError
from .field_solver import GridSpec
from .inductance_solver import FilamentSpec
from .io import read_geometry, read_json
from .loss_budget import COLLINEARITY_THRESHOLD, R_MEAS_CAVITY


class ConfigError(InvalidInputError):
    """The project configuration is invalid."""


SCHEMA = {
    "materials": {"gap_energy_mev", "dos_fermi_per_ev_um3", "london_depth_nm", "rho_nb_kg_m3",
                  "rho_nb2o5_kg_m3", "a_nb", "a_o", "eps_interface"},
    "calibration": {"line_attenuation_db", "r_meas_cavity_ohm_sq", "f_cavity_hz",
                    "extrinsic_law"},
    "field_solver": {"growth", "domain_factor", "cells_per_layer", "probe_thickness_nm",
                     "linearity_tolerance", "edge_cell_nm"},
    "filaments": {"nx", "ny", "growth_x", "growth_y"},
    "regrowth": {"growth", "filament_nx", "filament_ny", "delta_t_ma_nm", "surrogate_nodes_nm",
                 "bootstrap"},
    "fit": {"xtol", "ftol", "max_iter"},
    "budget": {"collinearity_threshold", "method"},
    "bounds": {"device", "literature_tan_delta_ma", "literature_tan_delta_sa"},
}
DEVICE_KEYS = {"geometry", "q_int", "q_extr", "q_extr_law", "p_tilde_ppm_nm"}
TOP_KEYS = set(SCHEMA) | {"devices", "output_dir"}
P_TILDE_KEYS = {"ma", "ms", "sa", "c"}


@dataclass(frozen=True)
class DeviceConfig:
    name: str
    geometry: object
    geometry_path: Path
    extras: dict = field(default_factory=dict)
    q_int: float = None
    q_extr: float = None
    q_extr_law: str = "tabulated"
    p_tilde: dict = None


@dataclass(frozen=True)
class ProjectConfig:
    materials: MaterialConstants = NIOBIUM
    devices: dict = field(default_factory=dict)
    line_attenuation_db: float = 0.0
    r_meas_cavity: float = R_MEAS_CAVITY
    f_cavity: float = 7.687e9
    extrinsic_law: str = "tabulated"
    grid_spec: GridSpec = GridSpec()
    filament_spec: FilamentSpec = FilamentSpec()
    regrowth_grid: GridSpec = GridSpec(growth=1.25)
    regrowth_filaments: FilamentSpec = FilamentSpec(nx=40, ny=10)
    regrowth_curve_nm: tuple = (0.0, 1.0, 2.5, 5.0)
    surrogate_nodes_nm: tuple = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 20.0)
    bootstrap: int = 200
    fit_tolerances: dict = field(default_factory=lambda: {"xtol": 1e-10, "ftol": 1e-12,
                                                          "max_iter": 200})
    collinearity_threshold: float = COLLINEARITY_THRESHOLD
    budget_method: str = "nonnegative"
    bound_device: str = None
    literature_tan_delta: dict = field(default_factory=dict)
    output_dir: Path = None
    source: Path = None

    def as_dict(self):
        """Echo of the effective settings, for reports."""
        return {
            "materials": self.materials.provenance(),
            "devices": sorted(self.devices),
            "line_attenuation_db": self.line_attenuation_db,
            "r_meas_cavity_ohm_sq": self.r_meas_cavity,
            "f_cavity_hz": self.f_cavity,
            "extrinsic_law": self.extrinsic_law,
            "fit": dict(self.fit_tolerances),
            "collinearity_threshold": self.collinearity_threshold,
            "budget_method": self.budget_method,
        }


def _check_keys(section, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown keys {unknown}")


def _positive(section, data, keys):
    for k in keys:
        if k in data and not (isinstance(data[k], (int, float)) and data[k] > 0):
            raise ConfigError(f"{section}.{k} must be a positive number, got {data[k]!r}")


def _materials(data):
    _check_keys("materials", data, SCHEMA["materials"])
    _positive("materials", data, SCHEMA["materials"])
    m = NIOBIUM
    mapping = {"gap_energy_mev": ("gap_energy", MEV), "dos_fermi_per_ev_um3": ("dos_fermi", 1 / E_CHARGE),
               "london_depth_nm": ("london_depth", 1e-9), "rho_nb_kg_m3": ("rho_nb", 1.0),
               "rho_nb2o5_kg_m3": ("rho_nb2o5", 1.0), "a_nb": ("a_nb", 1.0), "a_o": ("a_o", 1.0),
               "eps_interface": ("eps_interface", 1.0)}
    kwargs = {mapping[k][0]: v * mapping[k][1] for k, v in data.items()}
    try:
        return replace(m, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"materials: {exc}") from None


def _device(name, data, base):
    _check_keys(f"devices.{name}", data, DEVICE_KEYS)
    if "geometry" not in data:
        raise ConfigError(f"devices.{name}: geometry path required")
    path = (base / data["geometry"]).resolve()
    if not path.exists():
        raise ConfigError(f"devices.{name}: geometry file {path} does not exist")
    geom, extras = read_geometry(path)
    geom = replace(geom, name=name)
    _positive(f"devices.{name}", data, ("q_int", "q_extr"))
    law = data.get("q_extr_law", "tabulated")
    if law not in ("tabulated", "classical"):
        raise ConfigError(f"devices.{name}.q_extr_law must be 'tabulated' or 'classical'")
    p = data.get("p_tilde_ppm_nm")
    if p is not None:
        _check_keys(f"devices.{name}.p_tilde_ppm_nm", p, P_TILDE_KEYS)
        if set(p) != P_TILDE_KEYS:
            raise ConfigError(f"devices.{name}.p_tilde_ppm_nm needs keys {sorted(P_TILDE_KEYS)}")
        _positive(f"devices.{name}.p_tilde_ppm_nm", p, P_TILDE_KEYS)
    return DeviceConfig(name, geom, path, extras, data.get("q_int"), data.get("q_extr"), law, p)


def load_config(path=None):
    """Parse and validate a project config; ``None`` gives the defaults."""
    if path is None:
        return ProjectConfig()
    path = Path(path).resolve()
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw = read_json(path)
    _check_keys("config", raw, TOP_KEYS)
    base = path.parent
    kw = {"source": path}
    if "materials" in raw:
        kw["materials"] = _materials(raw["materials"])
    cal = raw.get("calibration", {})
    _check_keys("calibration", cal, SCHEMA["calibration"])
    _positive("calibration", cal, ("r_meas_cavity_ohm_sq", "f_cavity_hz"))
    if "line_attenuation_db" in cal:
        if not isinstance(cal["line_attenuation_db"], (int, float)) or cal["line_attenuation_db"] < 0:
            raise ConfigError("calibration.line_attenuation_db must be >= 0")
        kw["line_attenuation_db"] = float(cal["line_attenuation_db"])
    if "r_meas_cavity_ohm_sq" in cal:
        kw["r_meas_cavity"] = float(cal["r_meas_cavity_ohm_sq"])
    if "f_cavity_hz" in cal:
        kw["f_cavity"] = float(cal["f_cavity_hz"])
    if "extrinsic_law" in cal:
        if cal["extrinsic_law"] not in ("tabulated", "classical", "ase"):
            raise ConfigError("calibration.extrinsic_law must be tabulated, classical or ase")
        kw["extrinsic_law"] = cal["extrinsic_law"]

    fs = raw.get("field_solver", {})
    _check_keys("field_solver", fs, SCHEMA["field_solver"])
    _positive("field_solver", fs, SCHEMA["field_solver"])
    grid = {}
    for k in ("growth", "domain_factor", "linearity_tolerance"):
        if k in fs:
            grid[k] = float(fs[k])
    if "cells_per_layer" in fs:
        grid["cells_per_layer"] = int(fs["cells_per_layer"])
    if "probe_thickness_nm" in fs:
        grid["probe_thickness"] = fs["probe_thickness_nm"] * 1e-9
    if "edge_cell_nm" in fs:
        grid["edge_cell"] = fs["edge_cell_nm"] * 1e-9
    fl = raw.get("filaments", {})
    _check_keys("filaments", fl, SCHEMA["filaments"])
    _positive("filaments", fl, SCHEMA["filaments"])
    rg = raw.get("regrowth", {})
    _check_keys("regrowth", rg, SCHEMA["regrowth"])
    try:
        kw["grid_spec"] = GridSpec(**grid)
        kw["filament_spec"] = FilamentSpec(**{k: (int(v) if k in ("nx", "ny") else float(v))
                                              for k, v in fl.items()})
        kw["regrowth_grid"] = replace(kw["grid_spec"], growth=float(rg.get("growth", 1.25)))
        kw["regrowth_filaments"] = FilamentSpec(nx=int(rg.get("filament_nx", 40)),
                                                ny=int(rg.get("filament_ny", 10)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"solver settings: {exc}") from None
    for key, target in (("delta_t_ma_nm", "regrowth_curve_nm"), ("surrogate_nodes_nm", "surrogate_nodes_nm")):
        if key in rg:
            vals = rg[key]
            if not isinstance(vals, list) or not vals or any(
                    not isinstance(v, (int, float)) or v < 0 for v in vals):
                raise ConfigError(f"regrowth.{key} must be a list of non-negative numbers")
            kw[target] = tuple(float(v) for v in vals)
    if "bootstrap" in rg:
        if not isinstance(rg["bootstrap"], int) or rg["bootstrap"] < 0:
            raise ConfigError("regrowth.bootstrap must be a non-negative integer")
        kw["bootstrap"] = rg["bootstrap"]

    fit = raw.get("fit", {})
    _check_keys("fit", fit, SCHEMA["fit"])
    _positive("fit", fit, SCHEMA["fit"])
    if fit:
        tol = dict(ProjectConfig().fit_tolerances)
        tol.update(fit)
        tol["max_iter"] = int(tol["max_iter"])
        kw["fit_tolerances"] = tol
    bud = raw.get("budget", {})
    _check_keys("budget", bud, SCHEMA["budget"])
    _positive("budget", bud, ("collinearity_threshold",))
    if "collinearity_threshold" in bud:
        kw["collinearity_threshold"] = float(bud["collinearity_threshold"])
    if "method" in bud:
        if bud["method"] not in ("direct", "nonnegative"):
            raise ConfigError("budget.method must be 'direct' or 'nonnegative'")
        kw["budget_method"] = bud["method"]

    devices = raw.get("devices", {})
    _check_keys("devices", devices, devices.keys() if isinstance(devices, dict) else ())
    kw["devices"] = {name: _device(name, d, base) for name, d in sorted(devices.items())}

    bnd = raw.get("bounds", {})
    _check_keys("bounds", bnd, SCHEMA["bounds"])
    _positive("bounds", bnd, ("literature_tan_delta_ma", "literature_tan_delta_sa"))
    if "device" in bnd:
        if bnd["device"] not in kw["devices"]:
            raise ConfigError(f"bounds.device {bnd['device']!r} is not a configured device")
        kw["bound_device"] = bnd["device"]
    lit = {k[-2:]: float(v) for k, v in bnd.items() if k.startswith("literature_")}
    kw["literature_tan_delta"] = lit
    if "output_dir" in raw:
        kw["output_dir"] = (base / raw["output_dir"]).resolve()
    return ProjectConfig(**kw)
