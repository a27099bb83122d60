"""Small-signal stability around optimal operating points.

Under a constant-voltage load all seven envelope eigenvalues stay in the
left half plane and hardly move with power. Replacing the load by a
constant-power load adds the negative incremental conductance ``-P/Vc2**2``
and pushes the dc-link mode across the imaginary axis. The internal (zero)
dynamics are checked separately with the real and complex Hurwitz tests.

    python3 demos/03_stability.py
"""
import warnings

import numpy as np

from dabdyn import eigen_table, zero_dynamics_verdicts
from dabdyn.model import load_params
from dabdyn.stability import TABLE_ROW_LABELS, cpl_crossing_power

p = load_params()
powers = (300.0, 700.0, 1000.0)
for mode in ("cv", "cpl"):
    reps = eigen_table(powers, mode, p, seed=0)
    print(f"\n{mode.upper()} load")
    print(f"{'mode':>13} " + " ".join(f"{P:>22.0f}" for P in powers))
    cols = np.array([r.table_spectrum for r in reps]).T
    for label, row in zip(TABLE_ROW_LABELS, cols):
        print(f"{label:>13} " + " ".join(f"{z.real:>10.4g}{z.imag:+10.4g}j" for z in row))
    print("stable:", [r.stable for r in reps])

print(f"\nconstant-power load loses stability at about {cpl_crossing_power(p):.0f} W")

v = zero_dynamics_verdicts(p)
print(f"zero dynamics: real test {v['real'].stable}, complex test {v['complex'].stable} "
      f"(delta2 = {v['complex'].delta2:.3e}), filter pole {v['filter_pole']:.2f} 1/s")
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    bad = p.replace(Lm=1.05 * p.L1, L2=1.2 * p.L1)
v = zero_dynamics_verdicts(bad)
print(f"with Lm > L1 the verdicts flip: real {v['real'].stable}, complex {v['complex'].stable}")
