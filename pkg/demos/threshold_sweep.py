"""A quick pseudo-threshold scan, small enough to run in a minute or two.

Uses far fewer trials than the acceptance suite, so expect visible noise.
"""
from ionqec.estimator import log_grid, pseudo_threshold, sweep
from ionqec.noise import NoiseParams

grid = log_grid(1e-3, 1e-2, 4)
for pc in (1e-6, 1e-3):
    base = NoiseParams(p_c=pc, crosstalk_mode="entangling-incoherent")
    res = sweep("p_ms", grid, base, 50_000, master_seed=11)
    print(f"p_c = {pc:.0e}")
    for p, est in zip(grid, res.estimates):
        print(f"  p_ms {p:.2e}  p_log {est.p_log:.2e} +- {est.err:.1e}")
    th = pseudo_threshold(grid, [e.p_log for e in res.estimates])
    print("  pseudo-threshold:", "none in range" if th is None else f"{th:.2e}")
