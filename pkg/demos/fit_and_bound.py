"""Walk from a raw reflection trace to interface-loss upper bounds.

1. fit the shipped cavity trace with the reflection model;
2. fit the CPS3 temperature sweep for the saturated TLS loss and Q_r;
3. turn the saturated loss into per-interface bounds on t * tan(delta).
"""

from importlib.resources import files

from cpsloss import fit_resonance, fit_temperature_sweep, interface_bound, io

DATA = files("cpsloss") / "data"

trace, meta = io.read_trace(DATA / "cavity_trace.csv")
fit = fit_resonance(trace)
print(f"cavity trace: f0 = {fit.f0 / 1e9:.4f} GHz, Q_int = {fit.q_int:.0f}, Q_ext = {fit.q_ext:.0f}")

points, has_sigma, _ = io.read_sweep(DATA / "cps3_temperature.csv", "temperature")
tfit = fit_temperature_sweep(points, 5.470e9)
sig_a, sig_qr = tfit.uncertainties
print(f"CPS3 sweep: 1/(F tan d) = {1 / tfit.saturated_tls_loss / 1e6:.2f}e6, "
      f"Q_r = {tfit.q_r / 1e6:.1f}e6 +- {sig_qr / 1e6:.1f}e6")

# effective p-tilde (ppm/nm) with half of the corner term folded into MA and MS
p_eff = {"MA": 17.4 + 24.0 / 2, "MS": 106 + 24.0 / 2, "SA": 103}
for name, p in p_eff.items():
    bound = interface_bound(tfit.saturated_tls_loss, p)
    print(f"  {name}: t tan(delta) <= {bound * 1e3:.2f}e-3 nm")
