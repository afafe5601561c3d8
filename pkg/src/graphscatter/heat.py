"""Heat semigroup exp(-sH): kernels, matrix-free action, gradient kernel.

The kernel is taken with respect to the vertex measure:
(exp(-sH) f)(x) = sum_y P_s(x, y) f(y) m(y).  It is symmetric, has positive
diagonal bounded by 1/m(x) (exp(-sH) is a self-adjoint contraction), and
satisfies the semigroup reproduction sum_z P_s(x,z) P_s(z,y) m(z) = P_2s(x,y).

Two methods: dense eigendecomposition (n <= dense cap), and a Chebyshev
expansion of exp(-s lam) on [0, lam_max] with lam_max from the Gershgorin
row bound, whose scalar sup-error transfers to operator norm by the spectral
calculus.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonPositiveTimeError,
    ToleranceNotReachedError,
    TooLargeForDenseError,
)
from .graphs import WeightedGraph
from .operators import DENSE_CAP, eig_cache, symmetrized_matrix

__all__ = [
    "HeatKernel",
    "GradHeatKernel",
    "heat_kernel",
    "heat_apply",
    "heat_diagonal",
    "grad_heat_kernel",
    "sqrt_h_semigroup_norm",
    "chebyshev_coefficients",
]

DIAG_SLACK = 1e-10


@dataclass(frozen=True)
class HeatKernel:
    """Kernel of exp(-sH) with respect to the vertex measure m."""

    s: float
    values: np.ndarray          # (n, n), P_s(x, y)
    m: np.ndarray
    method: str                 # dense-eigen | chebyshev
    accuracy: float             # scalar sup-error estimate of the method

    def __post_init__(self):
        viol = float(np.max(np.diag(self.values) - 1.0 / self.m))
        slack = max(DIAG_SLACK, 4.0 * self.accuracy / float(np.min(self.m)))
        if viol > slack:
            raise ToleranceNotReachedError(
                f"heat kernel diagonal exceeds 1/m by {viol:.3e} (method {self.method})"
            )

    @property
    def n(self):
        return self.values.shape[0]

    def apply(self, f):
        return self.values @ (self.m * np.asarray(f))

    def diagonal(self):
        return np.diag(self.values)


def _dense_propagator(g: WeightedGraph, s: float, dense_cap):
    lam, V = eig_cache(g, dense_cap)
    rm = np.sqrt(g.m)
    Phi = (V * np.exp(-s * lam)) @ V.T
    P = Phi / rm[:, None] / rm[None, :]
    return 0.5 * (P + P.T)


def chebyshev_coefficients(c: float, tol: float, max_degree: int = 200000):
    """Coefficients a_j with exp(-c(u+1)) ~= sum a_j T_j(u) on [-1, 1].

    Returns (coefficients, tail_bound); the tail bound dominates the sup-error
    of the truncation.  a_j = (2 - delta_j0) (-1)^j e^{-c} I_j(c).
    """
    from scipy.special import ive

    if c < 0:
        raise NonPositiveTimeError("c must be >= 0")
    if c == 0.0:
        return np.array([1.0]), 0.0
    jcap = int(min(max_degree, c + 80 * np.sqrt(max(c, 1.0)) + 200))
    js = np.arange(jcap + 1)
    mags = 2.0 * ive(js, c)
    mags[0] *= 0.5
    tails = np.cumsum(mags[::-1])[::-1]
    # smallest K with everything beyond it below tol
    ok = np.nonzero(tails <= tol)[0]
    if ok.size == 0:
        raise ToleranceNotReachedError(
            f"Chebyshev degree cap {jcap} too small for tol {tol} at c = {c}"
        )
    K = int(ok[0])
    coeffs = mags[:K] * np.where(js[:K] % 2 == 0, 1.0, -1.0)
    return coeffs, float(tails[K])


def _cheb_apply_block(g: WeightedGraph, s: float, F, tol):
    """exp(-sH) applied to the columns of F via the Chebyshev recurrence."""
    lam_max = g.gershgorin_bound()
    c = 0.5 * s * lam_max
    coeffs, err = chebyshev_coefficients(c, tol)
    import scipy.sparse as sp

    rm = np.sqrt(g.m)
    B = g.b_matrix()
    A = sp.diags(g.degrees() / g.m) - sp.diags(1.0 / rm) @ B @ sp.diags(1.0 / rm)
    A = A.tocsr()
    scale = 2.0 / lam_max if lam_max > 0 else 0.0
    V = rm[:, None] * np.asarray(F, dtype=np.result_type(F, float))
    t_prev = V
    out = coeffs[0] * t_prev
    if len(coeffs) > 1:
        t_cur = scale * (A @ V) - V
        out = out + coeffs[1] * t_cur
        for j in range(2, len(coeffs)):
            t_prev, t_cur = t_cur, 2.0 * (scale * (A @ t_cur) - t_cur) - t_prev
            out = out + coeffs[j] * t_cur
    return out / rm[:, None], err


def heat_kernel(g: WeightedGraph, s: float, method="auto", tol=1e-10,
                dense_cap=DENSE_CAP) -> HeatKernel:
    """Kernel of exp(-sH); `method` is dense | chebyshev | auto."""
    if not s > 0:
        raise NonPositiveTimeError(f"semigroup time must be > 0, got {s}")
    if method == "auto":
        method = "dense" if g.n <= dense_cap else "chebyshev"
    if method == "dense":
        P = _dense_propagator(g, s, dense_cap)
        return HeatKernel(s=float(s), values=P, m=g.m, method="dense-eigen",
                          accuracy=1e-13 * max(1.0, float(np.max(np.abs(P)))))
    if method == "chebyshev":
        # tighten the scalar target so entrywise kernel errors (amplified by
        # 1/sqrt(m_x m_y)) stay inside the diagonal-bound slack
        m_min = float(np.min(g.m))
        eff_tol = min(tol, 0.25 * DIAG_SLACK * m_min)
        E, err = _cheb_apply_block(g, s, np.eye(g.n), eff_tol)
        P = E / g.m[None, :]
        P = 0.5 * (P + P.T)
        return HeatKernel(s=float(s), values=P, m=g.m, method="chebyshev",
                          accuracy=err)
    raise ValueError(f"unknown heat method '{method}'")


def heat_apply(g: WeightedGraph, s: float, f, method="auto", tol=1e-10,
               dense_cap=DENSE_CAP):
    """Matrix-free action exp(-sH) f (contraction on l2(X, m))."""
    if not s > 0:
        raise NonPositiveTimeError(f"semigroup time must be > 0, got {s}")
    f = np.asarray(f)
    if method == "auto":
        method = "dense" if g.n <= dense_cap else "chebyshev"
    if method == "dense":
        lam, V = eig_cache(g, dense_cap)
        rm = np.sqrt(g.m)
        w = V.T @ (rm * f)
        return (V @ (np.exp(-s * lam) * w)) / rm
    if method == "chebyshev":
        out, _ = _cheb_apply_block(g, s, f.reshape(-1, 1), tol)
        return out[:, 0]
    raise ValueError(f"unknown heat method '{method}'")


def heat_diagonal(g: WeightedGraph, s: float, dense_cap=DENSE_CAP):
    """Diagonal P_s(x, x) without forming the full kernel."""
    if not s > 0:
        raise NonPositiveTimeError(f"semigroup time must be > 0, got {s}")
    lam, V = eig_cache(g, dense_cap)
    return ((V ** 2) @ np.exp(-s * lam)) / g.m


@dataclass(frozen=True)
class GradHeatKernel:
    """Kernel rows of d exp(-sH) on the canonical edge support.

    row_e(z) = P_s(x, z) - P_s(y, z) for the edge e = (x, y); the squared
    m-weighted row sums obey sum_z |row|^2 m(z) <= 2 P_2s(x,x) + 2 P_2s(y,y),
    which is checked for every stored edge at construction.
    """

    s: float
    edges: np.ndarray
    rows: np.ndarray            # (E, n)
    row_bound: np.ndarray       # (E,) the 2 P_2s(x,x) + 2 P_2s(y,y) bound
    row_norm_sq: np.ndarray     # (E,) sum_z |row|^2 m(z)

    def apply(self, f, m):
        return self.rows @ (m * np.asarray(f))


def grad_heat_kernel(g: WeightedGraph, s: float, dense_cap=DENSE_CAP) -> GradHeatKernel:
    """Gradient heat kernel d exp(-sH), stored per canonical edge."""
    kern = heat_kernel(g, s, method="dense", dense_cap=dense_cap)
    x, y = g.edges[:, 0], g.edges[:, 1]
    rows = kern.values[x, :] - kern.values[y, :]
    diag2s = heat_diagonal(g, 2.0 * s, dense_cap)
    bound = 2.0 * diag2s[x] + 2.0 * diag2s[y]
    norm_sq = (rows ** 2) @ g.m
    worst = float(np.max(norm_sq - bound)) if norm_sq.size else 0.0
    if worst > DIAG_SLACK:
        raise ToleranceNotReachedError(
            f"gradient-kernel row bound violated by {worst:.3e}"
        )
    return GradHeatKernel(s=float(s), edges=g.edges, rows=rows,
                          row_bound=bound, row_norm_sq=norm_sq)


def sqrt_h_semigroup_norm(g: WeightedGraph, t: float, dense_cap=DENSE_CAP):
    """Operator norm of sqrt(H) exp(-tH) on l2(X, m).

    Always <= sup_{lam >= 0} sqrt(lam) e^{-t lam} = (2 e t)^(-1/2); the
    scalar bound is asserted with a small numerical slack.
    """
    if not t > 0:
        raise NonPositiveTimeError(f"t must be > 0, got {t}")
    lam, _ = eig_cache(g, dense_cap)
    lam = np.clip(lam, 0.0, None)
    norm = float(np.max(np.sqrt(lam) * np.exp(-t * lam)))
    cap = (2.0 * np.e * t) ** -0.5
    if norm > cap + DIAG_SLACK:
        raise ToleranceNotReachedError(
            f"spectral-calculus bound violated: {norm} > {cap}"
        )
    return norm
