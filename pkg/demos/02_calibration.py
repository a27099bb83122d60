"""Where the calibrated defaults come from.

The filter resistance ``r`` and capacitances ``C1``, ``C2`` are fitted to the
published constant-voltage eigenvalues (input-filter pair and dc-link mode at
300, 700 and 1000 W). The ZVS thresholds are fitted to the published
switching-boundary powers. Both fits start from neutral guesses and should
land on the values shipped in the default parameter file.

    python3 demos/02_calibration.py
"""
from dabdyn import sweep_power
from dabdyn.model import load_params
from dabdyn.stability import PUBLISHED_CV_TARGETS, calibrate_passives
from dabdyn.zvs import calibrate_thresholds

p = load_params()
cal = calibrate_passives(p)
print(f"r  = {cal.r:.4f} ohm   (default {p.r})")
print(f"C1 = {cal.C1 * 1e3:.4f} mF  (default {p.C1 * 1e3:.4f})")
print(f"C2 = {cal.C2 * 1e3:.4f} mF  (default {p.C2 * 1e3:.4f})")
for P, rep in cal.eigen.items():
    filt, dc = PUBLISHED_CV_TARGETS[P]
    lc = rep.by_label("input_filter")
    lc = lc[lc.imag.argmax()]
    print(f"  {P:6.0f} W: filter {lc:.1f} (target {filt}), "
          f"dc link {rep.by_label('dc_link')[0].real:.1f} (target {dc})")

table = sweep_power(-1000.0, 1000.0, 41, p.replace(I1min=0.0, I2min=0.0), seed=0)
I1min, I2min = calibrate_thresholds(table, p)
print(f"\nZVS thresholds: I1min = {I1min} A, I2min = {I2min} A "
      f"(defaults {p.I1min}, {p.I2min})")
