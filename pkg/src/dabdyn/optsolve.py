"""Steady-state operating points: minimum winding-current solutions.

For a target output power the solver minimizes ``|I_qd1|**2 + |I_qd2|**2``
over the control triple subject to the output-current balance, with
``Vc2 = Vc2_ref`` and ``Vc1`` fixed by the input-voltage equation. ``Id`` then
follows from the input-current balance.

The winding currents are linear in the bridge voltage phasors, so for given
pulse amplitudes ``u = sin(d/2)`` the output-current constraint is of the form
``A cos(delta + psi) + B = target`` and has closed-form roots in ``delta``.
The search therefore runs over ``(u1, u2)`` in the unit box: a coarse grid,
1-D searches on the two saturated faces ``u1 = 1`` / ``u2 = 1`` and bounded
quasi-Newton polishing from the best grid points.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .envelope import EnvelopeState, steady_state_residual
from .exceptions import ConvergenceError, InfeasiblePowerError, SingularSystemError
from .model import ControlVector, ConverterParams, _transformer_coefficients, fundamental_phasors
from . import tables

__all__ = [
    "OperatingPoint",
    "SweepTable",
    "SWEEP_COLUMNS",
    "solve_currents",
    "solve_operating_point",
    "sweep_power",
    "max_transferable_power",
    "CONSTRAINT_TOL",
    "OPTIMALITY_TOL",
    "ITERATION_CAP",
]

CONSTRAINT_TOL = 1e-6
OPTIMALITY_TOL = 1e-6
ITERATION_CAP = 500

_AMP = 4.0 / math.pi
_GRID = 33


@dataclass(frozen=True)
class OperatingPoint:
    control: ControlVector
    phasors: tuple
    state: EnvelopeState
    P_target: float
    Io: float
    Pin: float
    Pout: float
    objective: float
    converged: bool
    iterations: int
    constraint_error: float = 0.0
    optimality: float = 0.0
    message: str = ""

    @property
    def delta(self) -> float:
        return self.control.delta

    @property
    def I_qd1(self) -> complex:
        return self.state.I_qd1

    @property
    def I_qd2(self) -> complex:
        return self.state.I_qd2


def _admittance(p: ConverterParams) -> np.ndarray:
    """``Y`` with ``[I_qd1, I_qd2] = Y @ [S_qd1*Vc1, S_qd2*Vc2]`` in steady state."""
    K, B = _transformer_coefficients(p)
    M = K - 1j * p.ws * np.eye(2)
    if np.linalg.cond(M) > 1e12:
        raise SingularSystemError("winding-current equations are singular")
    return -np.linalg.solve(M, B.astype(complex))


def solve_currents(S_qd1: complex, S_qd2: complex, Vc1: float, Vc2: float,
                   p: ConverterParams):
    """Steady-state winding-current phasors for given switching phasors and dc voltages."""
    I = _admittance(p) @ np.array([S_qd1 * Vc1, S_qd2 * Vc2])
    return complex(I[0]), complex(I[1])


class _Reduced:
    """Objective and constraint-solved ``delta`` as functions of ``(u1, u2)``."""

    def __init__(self, p: ConverterParams, Io: float):
        self.p = p
        self.Y = _admittance(p)
        self.Vc2 = p.Vc2_ref
        self.q = 2.0 * Io / p.n
        self.y = self.Y[1, 0]
        self.psi = math.atan2(self.y.imag, self.y.real)
        self.nfev = 0

    def _branch(self, a1, a2, Vc1):
        """Candidate ``delta`` values (possibly empty) meeting the output-current balance."""
        den = a1 * a2 * Vc1 * abs(self.y)
        if den <= 0.0:
            return (), math.inf
        c = (self.q - a2 * a2 * self.Vc2 * self.Y[1, 1].real) / den
        if abs(c) > 1.0:
            return (), abs(c)
        ac = math.acos(c)
        return tuple(math.remainder(-self.psi + s * ac, 2.0 * math.pi) for s in (1.0, -1.0)), abs(c)

    def solve(self, u1, u2):
        """Best feasible point for amplitudes ``(u1, u2)``, or ``None`` with the violation."""
        self.nfev += 1
        p = self.p
        a1, a2 = _AMP * u1, _AMP * u2
        Vc1 = p.V1
        best = None
        for _ in range(60 if p.resistive_input_drop else 1):
            deltas, viol = self._branch(a1, a2, Vc1)
            if not deltas:
                return None, viol
            best = None
            for d in deltas:
                S2 = a2 * complex(math.cos(d), -math.sin(d))
                I1, I2 = self.Y @ np.array([a1 * Vc1, S2 * self.Vc2])
                obj = abs(I1) ** 2 + abs(I2) ** 2
                if best is None or obj < best[0]:
                    best = (obj, d, Vc1, complex(I1), complex(I2))
            if not p.resistive_input_drop:
                break
            Id = 0.5 * a1 * best[3].real
            Vc1_new = p.V1 - p.r * Id
            if abs(Vc1_new - Vc1) <= 1e-14 * abs(p.V1):
                break
            Vc1 = Vc1_new
        return best, 0.0

    def merit(self, u):
        u1, u2 = float(u[0]), float(u[1])
        best, viol = self.solve(u1, u2)
        if best is None:
            # smooth-ish penalty growing away from the feasible set
            return 1e9 * (1.0 + min(viol, 1e6))
        return best[0]


def _projected_gradient(red: _Reduced, u, f0, h=1e-7):
    """Infinity norm of the box-projected gradient, relative to the objective."""
    g = np.zeros(2)
    for i in range(2):
        up = np.array(u, dtype=float)
        um = np.array(u, dtype=float)
        if up[i] + h > 1.0:
            # one-sided at the upper bound
            um[i] -= h
            g[i] = (f0 - red.merit(um)) / h
        else:
            up[i] += h
            um[i] -= h
            g[i] = (red.merit(up) - red.merit(um)) / (2 * h)
        if u[i] >= 1.0 and g[i] < 0.0:
            g[i] = 0.0
        if u[i] <= 0.0 and g[i] > 0.0:
            g[i] = 0.0
    return float(np.max(np.abs(g))) / max(f0, 1e-12)


def _zero_point(p: ConverterParams) -> OperatingPoint:
    state = EnvelopeState(0.0, p.V1, 0.0, 0.0, 0.0, 0.0, p.Vc2_ref)
    return OperatingPoint(ControlVector(0.0, 0.0, 0.0), (0j, 0j), state, 0.0, 0.0,
                          0.0, 0.0, 0.0, True, 0)


def solve_operating_point(P_target: float, p: ConverterParams, warm_start=None,
                          seed=None) -> OperatingPoint:
    """Minimum-current steady state delivering ``P_target`` watts to the load.

    At zero power the bridges are idle (``d1 = d2 = 0``) and every current
    is zero. ``warm_start`` (an :class:`OperatingPoint`) adds its amplitudes
    as an extra start; ``seed`` adds three jittered starts.

    Raises :class:`InfeasiblePowerError` when no control delivers the power
    and :class:`ConvergenceError` when no local search satisfies the
    tolerances within the iteration cap.
    """
    P_target = float(P_target)
    if P_target == 0.0:
        return _zero_point(p)
    Io = P_target / p.Vc2_ref
    red = _Reduced(p, Io)

    grid = np.linspace(1.0 / _GRID, 1.0, _GRID)
    vals = np.array([[red.merit((u1, u2)) for u2 in grid] for u1 in grid])
    if not np.any(vals < 1e8):
        pmax = max_transferable_power(p)
        raise InfeasiblePowerError(
            f"|P| = {abs(P_target):.6g} W is not reachable (first-harmonic limit {pmax:.6g} W)")

    order = np.argsort(vals, axis=None)
    starts = [np.array([grid[i // _GRID], grid[i % _GRID]]) for i in order[:4]]
    if warm_start is not None and warm_start.control.d1 > 0 and warm_start.control.d2 > 0:
        starts.append(np.array([math.sin(warm_start.control.d1 / 2),
                                math.sin(warm_start.control.d2 / 2)]))
    if seed is not None:
        rng = np.random.default_rng(seed)
        for _ in range(3):
            starts.append(np.clip(starts[0] + rng.normal(scale=0.05, size=2), 1e-3, 1.0))

    candidates = []
    iterations = 0
    lo = 1.0 / (4 * _GRID)
    # saturated faces
    for axis in (0, 1):
        def face(v, axis=axis):
            u = (1.0, v) if axis == 0 else (v, 1.0)
            return red.merit(u)
        res = optimize.minimize_scalar(face, bounds=(lo, 1.0), method="bounded",
                                       options={"xatol": 1e-12, "maxiter": ITERATION_CAP})
        iterations += int(res.nfev)
        u = np.array([1.0, res.x]) if axis == 0 else np.array([res.x, 1.0])
        candidates.append((float(res.fun), u))
    # interior / general
    for u0 in starts:
        res = optimize.minimize(red.merit, u0, method="L-BFGS-B", bounds=[(lo, 1.0)] * 2,
                                options={"maxiter": ITERATION_CAP, "ftol": 1e-16,
                                         "gtol": 1e-13, "maxls": 50})
        iterations += int(res.nit)
        candidates.append((float(res.fun), np.asarray(res.x)))

    candidates.sort(key=lambda c: c[0])
    for fval, u in candidates:
        if fval >= 1e8:
            continue
        u = _polish(red, u)
        point = _assemble(red, u, P_target, Io, iterations)
        if point.converged:
            return point
    fval, u = candidates[0]
    diag = {"objective": fval, "u": u.tolist(), "iterations": iterations}
    if fval < 1e8:
        point = _assemble(red, _polish(red, u), P_target, Io, iterations)
        diag.update(constraint_error=point.constraint_error, optimality=point.optimality)
    raise ConvergenceError(f"operating point at {P_target} W did not converge", diag)


def _polish(red: _Reduced, u):
    """Tighten a candidate on its active face (or in the interior)."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    on_face = [i for i in range(2) if u[i] >= 1.0 - 1e-9]
    if len(on_face) == 1:
        i = on_face[0]
        j = 1 - i
        span = 0.02

        def face(v):
            w = np.array(u)
            w[i] = 1.0
            w[j] = v
            return red.merit(w)

        res = optimize.minimize_scalar(face, bounds=(max(u[j] - span, 1e-6), min(u[j] + span, 1.0)),
                                       method="bounded", options={"xatol": 1e-13})
        if res.fun <= face(u[j]):
            u = np.array(u)
            u[i] = 1.0
            u[j] = res.x
    return u


def _assemble(red: _Reduced, u, P_target, Io, iterations) -> OperatingPoint:
    p = red.p
    best, _ = red.solve(float(u[0]), float(u[1]))
    obj, delta, Vc1, I1, I2 = best
    d1 = 2.0 * math.asin(min(1.0, float(u[0])))
    d2 = 2.0 * math.asin(min(1.0, float(u[1])))
    S1, S2 = fundamental_phasors(d1, d2, delta)
    Id = 0.5 * (S1 * I1.conjugate()).real
    state = EnvelopeState.from_phasors(Id, Vc1, I1, I2, red.Vc2)
    q = red.q
    out = (S2 * I2.conjugate()).real
    cerr = abs(out - q) / max(abs(q), 1e-12)
    opt = _projected_gradient(red, np.asarray(u, dtype=float), obj)
    converged = cerr < CONSTRAINT_TOL and opt < OPTIMALITY_TOL
    point = OperatingPoint(
        control=ControlVector.from_delta(d1, d2, delta),
        phasors=(S1, S2),
        state=state,
        P_target=P_target,
        Io=Io,
        Pin=p.V1 * Id,
        Pout=red.Vc2 * Io,
        objective=obj,
        converged=converged,
        iterations=iterations + red.nfev,
        constraint_error=cerr,
        optimality=opt,
    )
    if converged:
        res = steady_state_residual(point, p).max_norm()
        if res > CONSTRAINT_TOL:
            return _with(point, converged=False, message=f"residual {res:.3g}")
    return point


def _with(point: OperatingPoint, **changes) -> OperatingPoint:
    return dataclasses.replace(point, **changes)


def _failed_point(P_target, p, message) -> OperatingPoint:
    nan = math.nan
    state = EnvelopeState(0.0, p.V1, 0.0, 0.0, 0.0, 0.0, p.Vc2_ref)
    return OperatingPoint(ControlVector(0.0, 0.0, 0.0), (0j, 0j), state, P_target,
                          P_target / p.Vc2_ref, nan, nan, nan, False, 0, message=message)


# -- sweeps --------------------------------------------------------------------

SWEEP_COLUMNS = ("P_target_W", "d1_rad", "d2_rad", "delta_rad", "Iqd1_peak_A",
                 "Iqd2_peak_A", "Id_A", "Io_A", "Pin_W", "Pout_W", "objective", "converged")


@dataclass
class SweepTable:
    points: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def P(self) -> np.ndarray:
        return np.array([pt.P_target for pt in self.points])

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows()])

    def rows(self):
        out = []
        for pt in self.points:
            failed = not pt.converged and math.isnan(pt.objective)
            nan = math.nan
            out.append({
                "P_target_W": pt.P_target,
                "d1_rad": nan if failed else pt.control.d1,
                "d2_rad": nan if failed else pt.control.d2,
                "delta_rad": nan if failed else pt.control.delta,
                "Iqd1_peak_A": nan if failed else abs(pt.I_qd1),
                "Iqd2_peak_A": nan if failed else abs(pt.I_qd2),
                "Id_A": nan if failed else pt.state.Id,
                "Io_A": pt.Io,
                "Pin_W": pt.Pin,
                "Pout_W": pt.Pout,
                "objective": pt.objective,
                "converged": bool(pt.converged),
            })
        return out

    @property
    def all_converged(self) -> bool:
        return all(pt.converged for pt in self.points)

    def to_csv(self, path, degrees: bool = False) -> None:
        rows = self.rows()
        if degrees:
            for row in rows:
                for k in ("d1_rad", "d2_rad", "delta_rad"):
                    row[k] = math.degrees(row[k])
        columns = SWEEP_COLUMNS if not degrees else tuple(
            c.replace("_rad", "_deg") for c in SWEEP_COLUMNS)
        if degrees:
            rows = [{c.replace("_rad", "_deg"): v for c, v in r.items()} for r in rows]
        tables.write_csv(path, columns, rows)


def sweep_power(P_min: float, P_max: float, steps: int, p: ConverterParams,
                seed=None) -> SweepTable:
    """Continuation sweep over an evenly spaced power grid.

    Each point is warm-started from its converged neighbour. Failures become
    rows with ``converged = False``; the sweep itself never aborts.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    grid = np.linspace(P_min, P_max, int(steps))
    points = []
    prev = None
    for k, P in enumerate(grid):
        P = float(P)
        if abs(P) < 1e-9 * max(abs(P_min), abs(P_max), 1.0):
            P = 0.0
        try:
            pt = solve_operating_point(P, p, warm_start=prev,
                                       seed=None if seed is None else seed + k)
        except (ConvergenceError, InfeasiblePowerError, SingularSystemError) as exc:
            pt = _failed_point(P, p, str(exc))
        points.append(pt)
        prev = pt if pt.converged else prev
    return SweepTable(points)


def _max_output_current(red: _Reduced, u1, u2, Vc1):
    a1, a2 = _AMP * u1, _AMP * u2
    return 0.5 * red.p.n * (a1 * a2 * Vc1 * abs(red.y) + a2 * a2 * red.Vc2 * red.Y[1, 1].real)


def max_transferable_power(p: ConverterParams, grid: int = 101, return_controls: bool = False):
    """Largest output power reachable under first-harmonic operation.

    Maximizes over the pulse amplitudes on a dense grid (the phase shift is
    already optimal in closed form) and polishes the best grid point. Uses
    ``Vc1 = V1`` and ``Vc2 = Vc2_ref``.
    """
    red = _Reduced(p, 0.0)
    g = np.linspace(0.0, 1.0, grid)
    U1, U2 = np.meshgrid(g, g, indexing="ij")
    vals = _max_output_current(red, U1, U2, p.V1)
    i = int(np.argmax(vals))
    u0 = np.array([U1.flat[i], U2.flat[i]])
    res = optimize.minimize(lambda u: -_max_output_current(red, u[0], u[1], p.V1), u0,
                            method="L-BFGS-B", bounds=[(0.0, 1.0)] * 2)
    best = max(float(vals.flat[i]), float(-res.fun))
    u = res.x if -res.fun >= vals.flat[i] else u0
    pmax = p.Vc2_ref * best
    if return_controls:
        return pmax, (2 * math.asin(u[0]), 2 * math.asin(u[1]), -red.psi)
    return pmax
