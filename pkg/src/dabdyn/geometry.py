"""Geometric-control analysis of the switched model.

With a constant-current load the model is control affine and bilinear::

    dx/dt = f(x) + g1(x) s1 + g2(x) s2,   y = (Vc1, Vc2)

and every field is affine, ``v(x) = M x + c``. Lie brackets of affine fields
are affine again, so brackets of any depth are exact.

Ranks are computed after equilibration: states are scaled by
``max(|x0_i|, 1)``, each column (row for observability) is normalized and
all-zero ones are dropped; the tolerance is ``1e-8 * sigma_max``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import STATE_NAMES, ConverterParams, _transformer_coefficients
from .numerics import numerical_rank, singular_values
from .zvs import instantaneous_current

__all__ = [
    "RANK_TOL",
    "AffineField",
    "AffineSystem",
    "lie_bracket",
    "bracket_field",
    "ControllabilityResult",
    "ObservabilityResult",
    "RelativeDegree",
    "controllability_matrix",
    "observability_matrix",
    "relative_degree",
    "representative_state",
    "zero_dynamics_states",
    "geometry_report",
]

RANK_TOL = 1e-8


@dataclass(frozen=True)
class AffineField:
    """Vector field ``x -> M @ x + c`` with its exact Jacobian ``M``."""

    M: np.ndarray
    c: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return self.M @ np.asarray(x, dtype=float) + self.c

    def jacobian(self, x=None) -> np.ndarray:
        return self.M

    def __mul__(self, a: float) -> "AffineField":
        return AffineField(a * self.M, a * self.c)

    __rmul__ = __mul__


def lie_bracket(v, w, x0) -> np.ndarray:
    """``[v, w](x0) = Jw(x0) v(x0) - Jv(x0) w(x0)``.

    ``v`` and ``w`` are callables with a ``jacobian(x)`` method.
    """
    x0 = np.asarray(x0, dtype=float)
    return w.jacobian(x0) @ v(x0) - v.jacobian(x0) @ w(x0)


def bracket_field(v: AffineField, w: AffineField) -> AffineField:
    """The bracket ``[v, w]`` as an affine field (exact)."""
    return AffineField(w.M @ v.M - v.M @ w.M, w.M @ v.c - v.M @ w.c)


@dataclass(frozen=True)
class AffineSystem:
    drift: AffineField
    controls: tuple
    outputs: tuple = (1, 4)

    @classmethod
    def from_params(cls, p: ConverterParams, Io: float = 0.0) -> "AffineSystem":
        """Fields of the switched model feeding a constant current ``Io``."""
        K, B = _transformer_coefficients(p)
        F = np.zeros((5, 5))
        F[0, 0] = -p.r / p.Ld
        F[0, 1] = -1.0 / p.Ld
        F[1, 0] = 1.0 / p.C1
        F[2:4, 2:4] = K
        f0 = np.array([p.V1 / p.Ld, 0.0, 0.0, 0.0, -Io / p.C2])
        G1 = np.zeros((5, 5))
        G1[1, 2] = -1.0 / p.C1
        G1[2:4, 1] = B[:, 0]
        G2 = np.zeros((5, 5))
        G2[2:4, 4] = B[:, 1]
        G2[4, 3] = p.n / p.C2
        zero = np.zeros(5)
        return cls(AffineField(F, f0), (AffineField(G1, zero), AffineField(G2, zero.copy())))

    @property
    def output_names(self):
        return tuple(STATE_NAMES[k] for k in self.outputs)

    def swapped(self) -> "AffineSystem":
        return AffineSystem(self.drift, tuple(reversed(self.controls)), self.outputs)

    def rhs(self, x, u) -> np.ndarray:
        out = self.drift(x)
        for g, uk in zip(self.controls, u):
            out = out + uk * g(x)
        return out


def _state_scale(x0) -> np.ndarray:
    return np.maximum(np.abs(np.asarray(x0, dtype=float)), 1.0)


def _equilibrated(vectors, axis: int) -> np.ndarray:
    """Normalize along ``axis`` and drop all-zero entries."""
    norms = np.linalg.norm(vectors, axis=axis)
    keep = norms > 0
    if axis == 0:
        return vectors[:, keep] / norms[keep]
    return vectors[keep] / norms[keep, None]


def _rank(m) -> int:
    if m.size == 0:
        return 0
    return numerical_rank(m, RANK_TOL)


@dataclass
class ControllabilityResult:
    matrix: np.ndarray
    rank: int
    rank_by_depth: list
    singular_values: np.ndarray
    depth: int

    @property
    def controllable(self) -> bool:
        return self.rank == self.matrix.shape[0]


def controllability_matrix(x0, sys: AffineSystem, depth: int = 4) -> ControllabilityResult:
    """Columns ``ad_f^i g_j (x0)`` for ``i = 0..depth`` and each control.

    Column order: ``g1, g2, ad_f g1, ad_f g2, ...``. ``rank_by_depth[i]`` is
    the rank of the columns with bracket order up to ``i``.
    """
    x0 = np.asarray(x0, dtype=float)
    fields = list(sys.controls)
    cols = []
    for _ in range(depth + 1):
        cols.extend(g(x0) for g in fields)
        fields = [bracket_field(sys.drift, g) for g in fields]
    C = np.array(cols).T
    S = np.diag(1.0 / _state_scale(x0))
    m = len(sys.controls)
    by_depth = [_rank(_equilibrated(S @ C[:, : m * (i + 1)], axis=0)) for i in range(depth + 1)]
    Ce = _equilibrated(S @ C, axis=0)
    return ControllabilityResult(C, by_depth[-1], by_depth,
                                 singular_values(Ce) if Ce.size else np.zeros(0), depth)


@dataclass
class ObservabilityResult:
    matrix: np.ndarray
    max_rank: int
    singular_values: np.ndarray

    @property
    def fully_observable(self) -> bool:
        return self.max_rank == self.matrix.shape[1]


def observability_matrix(x0, sys: AffineSystem, depth: int = 4) -> ObservabilityResult:
    """Gradients of ``L_f^i h_j`` for ``i = 0..depth``, grouped by output.

    With coordinate outputs and an affine drift the gradient of
    ``L_f^i h_j`` is the constant row ``e_j^T F^i``.
    """
    x0 = np.asarray(x0, dtype=float)
    F = sys.drift.M
    rows = []
    for k in sys.outputs:
        w = np.eye(F.shape[0])[k]
        for _ in range(depth + 1):
            rows.append(w)
            w = w @ F
    J = np.array(rows)
    Je = _equilibrated(J * _state_scale(x0), axis=1)
    return ObservabilityResult(J, _rank(Je), singular_values(Je) if Je.size else np.zeros(0))


@dataclass
class RelativeDegree:
    degrees: tuple
    ill_defined: tuple
    coefficients: list = field(default_factory=list)

    @property
    def total(self):
        if any(d is None for d in self.degrees):
            return None
        return int(sum(self.degrees))

    @property
    def zero_dim(self):
        t = self.total
        return None if t is None else 5 - t


def relative_degree(sys: AffineSystem, x0, max_order: int = 5) -> RelativeDegree:
    """Differentiate each output until a control appears.

    ``coefficients[j][i]`` holds ``L_gi L_f^(r-1) h_j`` at ``x0``. If that
    coefficient is structurally nonzero but vanishes at ``x0`` (for output 1,
    ``-I1/C1`` with ``I1 = 0``), the degree of that output is reported as
    ``None`` with its ``ill_defined`` flag set.
    """
    x0 = np.asarray(x0, dtype=float)
    F = sys.drift.M
    scale = _state_scale(x0)
    degrees, flags, coefs = [], [], []
    for k in sys.outputs:
        w = np.eye(F.shape[0])[k]
        found = None
        bad = False
        vals = []
        for order in range(1, max_order + 1):
            structural = [np.abs(w @ g.M) @ scale + abs(w @ g.c) for g in sys.controls]
            if max(structural) > 0:
                vals = [float(w @ g(x0)) for g in sys.controls]
                tol = 1e-12 * max(structural)
                if max(abs(v) for v in vals) > tol:
                    found = order
                else:
                    bad = True
                break
            w = w @ F
        degrees.append(found)
        flags.append(bad)
        coefs.append(vals)
    return RelativeDegree(tuple(degrees), tuple(flags), coefs)


def zero_dynamics_states(sys: AffineSystem, rd: RelativeDegree):
    """States left free when every output and its first ``r_j - 1``
    derivatives are pinned; only defined for unit relative degrees."""
    if rd.degrees != (1,) * len(sys.outputs):
        return None
    return tuple(n for i, n in enumerate(STATE_NAMES) if i not in sys.outputs)


def representative_state(op, angle: float = math.pi / 4) -> np.ndarray:
    """Instantaneous full-order state built from a solved envelope point.

    DC states are taken as-is; winding currents are ``real(I_qd e^{j angle})``.
    """
    xe = op.state
    return np.array([xe.Id, xe.Vc1, instantaneous_current(xe.I_qd1, angle),
                     instantaneous_current(xe.I_qd2, angle), xe.Vc2])


def geometry_report(op, p: ConverterParams, angle: float = math.pi / 4, depth: int = 4) -> dict:
    """Ranks, singular values, relative degrees and zero-dynamics states at ``op``."""
    sys = AffineSystem.from_params(p, op.Io)
    x0 = representative_state(op, angle)
    ctrb = controllability_matrix(x0, sys, depth)
    obsv = observability_matrix(x0, sys, depth)
    rd = relative_degree(sys, x0)
    return {
        "P_W": op.P_target,
        "angle_rad": angle,
        "state": dict(zip(STATE_NAMES, x0.tolist())),
        "controllability": {
            "rank": ctrb.rank,
            "rank_by_depth": ctrb.rank_by_depth,
            "singular_values": ctrb.singular_values.tolist(),
            "controllable": ctrb.controllable,
            "depth": depth,
        },
        "observability": {
            "max_rank": obsv.max_rank,
            "singular_values": obsv.singular_values.tolist(),
            "fully_observable": obsv.fully_observable,
        },
        "relative_degree": {
            "outputs": list(sys.output_names),
            "degrees": list(rd.degrees),
            "total": rd.total,
            "ill_defined": list(rd.ill_defined),
        },
        "zero_dynamics": {
            "dimension": rd.zero_dim,
            "states": list(zero_dynamics_states(sys, rd) or []),
        },
        "rank_tolerance": RANK_TOL,
    }
