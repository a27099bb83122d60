"""Small dense numerical kernels.

Eigenvalues and singular values are delegated to LAPACK through numpy; the
wrappers pin down sort order, size limits and error types. RK4, the
finite-difference Jacobian and the complex quadratic are implemented here.
"""
from __future__ import annotations

import cmath

import numpy as np

from .exceptions import (
    ConvergenceError,
    DegeneratePolynomialError,
    DomainError,
    IntegrationBlowupError,
)

__all__ = [
    "MAX_DIM",
    "sort_spectrum",
    "eigenvalues",
    "singular_values",
    "numerical_rank",
    "rk4_step",
    "jacobian_fd",
    "quadratic_roots_complex",
]

MAX_DIM = 16


def _square(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise DomainError(f"matrix dimension {a.shape[0]} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    return a


def sort_spectrum(values) -> np.ndarray:
    """Sort by descending real part, ties broken by descending imaginary part."""
    v = np.asarray(values, dtype=complex)
    return v[np.lexsort((-v.imag, -v.real))]


def eigenvalues(m) -> np.ndarray:
    """Eigenvalues of a square matrix (n <= 16), sorted as :func:`sort_spectrum`.

    For real input, the members of each conjugate pair are made exact
    conjugates of one another.
    """
    a = _square(m)
    try:
        lam = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
    if not np.iscomplexobj(a):
        lam = _pair_conjugates(lam)
    return sort_spectrum(lam)


def _pair_conjugates(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex).copy()
    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    used = np.zeros(lam.size, dtype=bool)
    for i in range(lam.size):
        if used[i]:
            continue
        used[i] = True
        if abs(lam[i].imag) <= 1e-14 * scale:
            lam[i] = lam[i].real
            continue
        cands = [j for j in range(lam.size) if not used[j]]
        if not cands:
            continue
        j = min(cands, key=lambda k: abs(lam[k] - lam[i].conjugate()))
        used[j] = True
        mean = 0.5 * (lam[i] + lam[j].conjugate())
        lam[i], lam[j] = mean, mean.conjugate()
    return lam


def singular_values(m) -> np.ndarray:
    a = np.asarray(m)
    if a.size == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def numerical_rank(m, tol_rel: float = 1e-8) -> int:
    """Number of singular values above ``tol_rel * sigma_max``."""
    if not (0.0 < tol_rel < 1.0):
        raise DomainError("tol_rel must lie in (0, 1)")
    s = singular_values(m)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol_rel * s[0]))


def rk4_step(rhs, x, t: float, dt: float):
    """One classical Runge-Kutta step of ``dx/dt = rhs(t, x)``.

    ``x`` may be any numpy array shape that ``rhs`` understands.
    """
    if not dt > 0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = rhs(t + dt, x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError(f"non-finite state after RK4 step at t={t!r}")
    return out


def jacobian_fd(f, x0, h_rel: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x0``.

    The step for component ``i`` is ``h_rel * max(|x0_i|, 1)``.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(f(x0))
    J = np.zeros((f0.size, x0.size), dtype=f0.dtype if np.iscomplexobj(f0) else float)
    for i in range(x0.size):
        step = h_rel * max(abs(x0[i]), 1.0)
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        J[:, i] = (np.asarray(f(xp)) - np.asarray(f(xm))).reshape(-1) / (2.0 * step)
    return J


def quadratic_roots_complex(a0: complex, a1: complex, a2: complex):
    """Roots of ``a0*z**2 + a1*z + a2`` for complex coefficients.

    Uses ``q = -(a1 + sign*sqrt(disc))/2`` with the sign chosen to avoid
    cancellation, then ``z = q/a0`` and ``z = a2/q``.
    """
    a0, a1, a2 = complex(a0), complex(a1), complex(a2)
    if a0 == 0:
        raise DegeneratePolynomialError("leading coefficient is zero")
    root = cmath.sqrt(a1 * a1 - 4.0 * a0 * a2)
    if (a1.conjugate() * root).real < 0:
        root = -root
    q = -0.5 * (a1 + root)
    if q == 0:
        return 0j, 0j
    return q / a0, a2 / q
