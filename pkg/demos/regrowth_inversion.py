"""Recover the regrown oxide thickness from measured resonance shifts,
then the metal-air loss tangent from the drop in Q_intr.

Takes about half a minute: each device needs a handful of field and
inductance solves.
"""

from importlib.resources import files

from cpsloss import ShiftSolver, extract_ma_loss_tangent, invert_thickness, io

DATA = files("cpsloss") / "data"
NAMES = ("cps1", "cps2", "cps3", "cps4")

geoms = {n.upper(): io.read_geometry(DATA / "geometries" / f"{n}.json")[0] for n in NAMES}
cfg = io.read_json(DATA / "project.json")
p_ma = {d: v["p_tilde_ppm_nm"]["ma"] + v["p_tilde_ppm_nm"]["c"] / 2
        for d, v in cfg["devices"].items()}
obs, _ = io.read_observations(DATA / "observations.csv", p_ma)

for o in obs:
    print(f"{o.device_id}: df/f = {o.fractional_shift:.3e}")

est = invert_thickness(obs, geoms, ShiftSolver())
print(f"dt_MA = {est.delta_t_ma * 1e9:.2f} +- {est.sigma * 1e9:.2f} nm")

tan = extract_ma_loss_tangent(obs, est.delta_t_ma)
print(f"tan(delta_MA) = {tan.mean:.2e} +- {tan.stderr:.1e}")
