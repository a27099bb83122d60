"""Nonlinear controllability, observability and relative degree.

With a constant-current load the switched model is bilinear in the two
switching functions, so all Lie brackets are exact affine fields. Measuring
the two dc voltages, each output sees a control after one differentiation;
the remaining three states (input current and both winding currents) form
the internal dynamics.

    python3 demos/05_geometry.py
"""
import json

from dabdyn import geometry_report, solve_operating_point
from dabdyn.model import load_params

p = load_params()
for P in (300.0, 700.0, -500.0):
    g = geometry_report(solve_operating_point(P, p, seed=0), p)
    print(f"{P:6.0f} W: controllability rank {g['controllability']['rank']} "
          f"(by bracket depth {g['controllability']['rank_by_depth']}), "
          f"observability rank {g['observability']['max_rank']}, "
          f"relative degree {g['relative_degree']['degrees']}, "
          f"zero dynamics {g['zero_dynamics']['states']}")

print(json.dumps(geometry_report(solve_operating_point(700.0, p, seed=0), p), indent=2)[:800])
