"""Two-space scattering machinery on a pair of weighted graphs.

Everything here is finite-dimensional linear algebra between the weighted
spaces l2(X, m_1) and l2(X, m_2) (and the edge spaces l2(X x X, b_k)).
Adjoints are always taken with respect to the weighted inner products,
never as plain transposes.

The operator assembled by `hpw_operator`,

    T = (S2h Ph2_s)* Uh (S1h Ph1_s)  -  (S2 P2_s)* U (S1 P1_{s/2}) H1 P1_{s/2},

satisfies  <f2, T f1>_{m2} = <H2 f2, P2_s I P1_s f1>_{m2}
                             - <f2, P2_s I P1_s H1 f1>_{m2}

for all vectors, where I is the trivial identification.  The multiplication
factors are

    S_k  = |tilde_m|^(1/2)            (self-adjoint in l2(m_k)),
    S_kh = |tilde_b|^(1/2)            (self-adjoint in l2(b_k)),
    U    = sgn+(tilde_m_{2,1}) m_{2,1}^(-1/2) = -sgn(tilde_m) m_{1,2}^(1/2),
    Uh   = likewise with b-ratios,

with sgn+(0) := +1, so U and Uh are honest unitaries between the weighted
spaces: |U|^2 m_2 = m_1 pointwise.  (Writing U with the inverse ratio
m_{1,2}^(-1/2) breaks both unitarity and the identity above; the inversion
is observable numerically, so the swapped-ratio form is used throughout.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .criteria import tilde_fields
from .errors import TooLargeForDenseError
from .graphs import GraphPair
from .operators import (
    DENSE_CAP,
    OperatorHandle,
    adjoint_matrix,
    eig_cache,
    m_inner,
    operator_hs_norm,
    operator_norm,
    to_euclidean,
    trace_norm,
)

__all__ = [
    "MultiplicationOps",
    "HsEstimate",
    "HpwBundle",
    "BbHypothesisReport",
    "CookDiagnostic",
    "identification",
    "multiplication_ops",
    "hpw_operator",
    "hpw_identity_check",
    "hs_norms",
    "bb_hypotheses_report",
    "cook_integrand",
]


def _sgn_plus(v):
    return np.where(v >= 0, 1.0, -1.0)


def _propagator(g, s, dense_cap=DENSE_CAP):
    """Coordinate matrix of exp(-sH)."""
    lam, V = eig_cache(g, dense_cap)
    rm = np.sqrt(g.m)
    Phi = (V * np.exp(-s * lam)) @ V.T
    return Phi * (rm[None, :] / rm[:, None])


def _laplacian(g):
    H = np.zeros((g.n, g.n))
    x, y = g.edges[:, 0], g.edges[:, 1]
    H[x, y] = -g.weights / g.m[x]
    H[y, x] = -g.weights / g.m[y]
    H[np.arange(g.n), np.arange(g.n)] = g.degrees() / g.m
    return H


def identification(pair: GraphPair):
    """The trivial identification I: l2(m1) -> l2(m2) and its adjoint.

    I leaves values unchanged; the adjoint relation
    <I f, g>_{m2} = <f, I* g>_{m1} forces I* to multiply by m2/m1.
    """
    n = pair.n
    ratio_inv = 1.0 / pair.ratio_m          # m2/m1
    ident = OperatorHandle(n=n, measure=pair.g2.m, matvec=lambda f: np.asarray(f),
                           matrix=np.eye(n))
    adj = OperatorHandle(n=n, measure=pair.g1.m,
                         matvec=lambda f: ratio_inv * np.asarray(f),
                         matrix=np.diag(ratio_inv))
    return ident, adj


@dataclass(frozen=True)
class MultiplicationOps:
    """Diagonal factors of the scattering operator.

    s_m / s_b act identically in both weighted spaces; u / u_b are the
    unitaries between them.  Operator norms are the sup of |values|.
    """

    s_m: np.ndarray             # |tilde_m|^(1/2) on vertices
    u: np.ndarray               # unitary multiplier l2(m1) -> l2(m2)
    s_b: np.ndarray             # |tilde_b|^(1/2) on common edges
    u_b: np.ndarray             # unitary multiplier l2(b1) -> l2(b2)
    common_edges: np.ndarray

    @property
    def norms(self):
        return {
            "S_m": float(np.max(self.s_m)) if self.s_m.size else 0.0,
            "S_b": float(np.max(self.s_b)) if self.s_b.size else 0.0,
            "U": float(np.max(np.abs(self.u))) if self.u.size else 0.0,
            "U_b": float(np.max(np.abs(self.u_b))) if self.u_b.size else 0.0,
        }


def multiplication_ops(pair: GraphPair) -> MultiplicationOps:
    pair.require_applicable("multiplication operators")
    tf = tilde_fields(pair)
    # ratio with roles swapped: tilde_{2,1} = -tilde_{1,2}, ratio_{2,1} = 1/ratio
    u = _sgn_plus(-tf.tilde_m) * np.sqrt(pair.ratio_m)
    u_b = _sgn_plus(-tf.tilde_b) * np.sqrt(pair.ratio_b) if tf.tilde_b.size else np.empty(0)
    return MultiplicationOps(
        s_m=np.sqrt(np.abs(tf.tilde_m)),
        u=u,
        s_b=np.sqrt(np.abs(tf.tilde_b)) if tf.tilde_b.size else np.empty(0),
        u_b=u_b,
        common_edges=pair.common_edges,
    )


@dataclass(frozen=True)
class HsEstimate:
    name: str
    hs_norm: float
    bound_semigroup: float      # bound derived via the semigroup property (2s)
    bound_printed: float        # looser monotonicity variant (s/2)

    @property
    def slack(self):
        return self.bound_semigroup - self.hs_norm ** 2


@dataclass(frozen=True)
class HpwBundle:
    """The assembled scattering operator and its factor estimates."""

    s: float
    T: np.ndarray               # l2(m1) -> l2(m2)
    B1: np.ndarray              # l2(m1) -> l2(b1, common edges)
    B2: np.ndarray
    C1: np.ndarray              # S1 P1_{s/2}
    C2: np.ndarray              # S2 P2_s
    A: np.ndarray               # (I* I - id) P1_s
    ops: MultiplicationOps
    hs: dict                    # name -> HsEstimate
    trace_norm_estimate: float
    h1_prop_norm: float         # ||H1 P1_{s/2}||
    factorization_bound: float
    pair: GraphPair

    @property
    def hs_norms(self):
        return {k: v.hs_norm for k, v in self.hs.items()}

    @property
    def hs_bounds(self):
        return {k: (v.bound_semigroup, v.bound_printed) for k, v in self.hs.items()}


def hpw_operator(pair: GraphPair, s: float, kernels=None,
                 dense_cap=DENSE_CAP) -> HpwBundle:
    """Assemble T and its factors; fill Hilbert-Schmidt norms and bounds.

    `kernels`, when given, is the pair of HeatKernel objects at time s
    (consistency-checked); the half- and double-time propagators always come
    from the cached eigendecompositions.
    """
    pair.require_applicable("scattering operator")
    if pair.n > dense_cap:
        raise TooLargeForDenseError(f"n = {pair.n} exceeds dense cap {dense_cap}")
    g1, g2 = pair.g1, pair.g2
    if kernels is not None:
        k1, k2 = kernels
        from .errors import TimeMismatchError

        if k1.s != s or k2.s != s:
            raise TimeMismatchError("supplied heat kernels are not at time s")
    ops = multiplication_ops(pair)
    x, y = pair.common_edges[:, 0], pair.common_edges[:, 1]

    E1s = _propagator(g1, s, dense_cap)
    E2s = _propagator(g2, s, dense_cap)
    E1h = _propagator(g1, s / 2.0, dense_cap)
    H1 = _laplacian(g1)

    # edge-space factors: B_k = S_bh d P_k(s), rows on common canonical edges
    D1 = E1s[x, :] - E1s[y, :]
    D2 = E2s[x, :] - E2s[y, :]
    B1 = ops.s_b[:, None] * D1
    B2 = ops.s_b[:, None] * D2
    # vertex-space factors
    C1 = ops.s_m[:, None] * E1h
    C2 = ops.s_m[:, None] * E2s

    b2c = pair.b2_common
    B2_star = adjoint_matrix(B2, b2c, g2.m)          # l2(b2) -> l2(m2)
    first = B2_star @ (ops.u_b[:, None] * B1)
    C2_star = adjoint_matrix(C2, g2.m, g2.m)
    second = C2_star @ (ops.u[:, None] * (C1 @ (H1 @ E1h)))
    T = first - second

    # compactness witness (I*I - id) P1_s; I*I multiplies by m2/m1
    ratio21 = 1.0 / pair.ratio_m
    A = (ratio21 - 1.0)[:, None] * E1s

    d1_s = _diag_of_propagator(g1, s)
    d2_s = _diag_of_propagator(g2, s)
    d1_2s = _diag_of_propagator(g1, 2.0 * s)
    d2_2s = _diag_of_propagator(g2, 2.0 * s)
    d1_h = _diag_of_propagator(g1, s / 2.0)
    d2_h = _diag_of_propagator(g2, s / 2.0)
    tf = tilde_fields(pair)
    am = np.abs(tf.tilde_m)
    ab = np.abs(tf.tilde_b)
    b1c = pair.b1_common

    hs = {}
    hs["B1"] = HsEstimate(
        "B1", operator_hs_norm(B1, b1c, g1.m),
        bound_semigroup=2.0 * float(np.sum(ab * (d1_2s[x] + d1_2s[y]) * b1c)),
        bound_printed=2.0 * float(np.sum(ab * (d1_h[x] + d1_h[y]) * b1c)),
    )
    hs["B2"] = HsEstimate(
        "B2", operator_hs_norm(B2, b2c, g2.m),
        bound_semigroup=2.0 * float(np.sum(ab * (d2_2s[x] + d2_2s[y]) * b2c)),
        bound_printed=2.0 * float(np.sum(ab * (d2_h[x] + d2_h[y]) * b2c)),
    )
    hs["C1"] = HsEstimate(
        "C1", operator_hs_norm(C1, g1.m, g1.m),
        bound_semigroup=float(np.sum(am * d1_s * g1.m)),
        bound_printed=float(np.sum(am * d1_h * g1.m)),
    )
    hs["C2"] = HsEstimate(
        "C2", operator_hs_norm(C2, g2.m, g2.m),
        bound_semigroup=float(np.sum(am * d2_2s * g2.m)),
        bound_printed=float(np.sum(am * d2_h * g2.m)),
    )
    # |ratio21 - 1|^2 <= const * |tilde_m| with an explicit constant
    supp = am > 0
    const = float(np.max((ratio21[supp] - 1.0) ** 2 / am[supp])) if supp.any() else 0.0
    hs["A"] = HsEstimate(
        "A", operator_hs_norm(A, g1.m, g1.m),
        bound_semigroup=const * float(np.sum(am * d1_2s * g1.m)),
        bound_printed=const * float(np.sum(am * d1_h * g1.m)),
    )

    lam1, _ = eig_cache(g1, dense_cap)
    h1_prop = float(np.max(np.clip(lam1, 0, None) * np.exp(-np.clip(lam1, 0, None) * s / 2.0)))
    tnorm = trace_norm(T, g2.m, g1.m)
    bound = hs["B2"].hs_norm * hs["B1"].hs_norm + hs["C2"].hs_norm * h1_prop * hs["C1"].hs_norm
    return HpwBundle(
        s=float(s), T=T, B1=B1, B2=B2, C1=C1, C2=C2, A=A, ops=ops, hs=hs,
        trace_norm_estimate=tnorm, h1_prop_norm=h1_prop,
        factorization_bound=bound, pair=pair,
    )


def _diag_of_propagator(g, s):
    lam, V = eig_cache(g)
    return ((V ** 2) @ np.exp(-s * lam)) / g.m


def hpw_identity_check(pair: GraphPair, s: float, f1, f2,
                       bundle: HpwBundle | None = None) -> float:
    """Relative residual |LHS - RHS| / (1 + |LHS| + |RHS|) of the identity."""
    if bundle is None:
        bundle = hpw_operator(pair, s)
    g1, g2 = pair.g1, pair.g2
    f1 = np.asarray(f1)
    f2 = np.asarray(f2)
    lhs = m_inner(g2, f2, bundle.T @ f1)
    E1s = _propagator(g1, s)
    E2s = _propagator(g2, s)
    H1 = _laplacian(g1)
    H2 = _laplacian(g2)
    K = E2s @ E1s                 # P2_s I P1_s as coordinate matrix
    rhs = m_inner(g2, H2 @ f2, K @ f1) - m_inner(g2, f2, K @ (H1 @ f1))
    return abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


def hs_norms(bundle: HpwBundle):
    """Per-operator (hs_norm, semigroup bound, printed bound, slack) table."""
    return [
        (est.name, est.hs_norm, est.bound_semigroup, est.bound_printed, est.slack)
        for est in bundle.hs.values()
    ]


@dataclass(frozen=True)
class BbHypothesisReport:
    """Hypothesis table for the abstract two-space wave-operator theorem."""

    i_norm: float
    i_inverse_norm: float
    i_invertible: bool
    form_domain_note: str
    compactness_hs_norm: float          # HS norm of (I*I - id) P1_s
    trace_norm_estimate: float
    factorization_bound: float
    entries: tuple                      # (name, verified, value) triples


def bb_hypotheses_report(pair: GraphPair, s: float,
                         bundle: HpwBundle | None = None) -> BbHypothesisReport:
    if bundle is None:
        bundle = hpw_operator(pair, s)
    i_norm = float(np.sqrt(np.max(1.0 / pair.ratio_m)))       # sup sqrt(m2/m1)
    i_inv_norm = float(np.sqrt(np.max(pair.ratio_m)))
    a_hs = bundle.hs["A"].hs_norm
    entries = (
        ("identification bounded", True, i_norm),
        ("identification inverse bounded", True, i_inv_norm),
        ("form domains mapped onto each other", True,
         0.0),  # all domains coincide on a finite graph
        ("compactness witness HS norm", True, a_hs),
        ("trace-class estimate", bundle.trace_norm_estimate <= bundle.factorization_bound + 1e-8,
         bundle.trace_norm_estimate),
    )
    return BbHypothesisReport(
        i_norm=i_norm,
        i_inverse_norm=i_inv_norm,
        i_invertible=np.isfinite(i_inv_norm),
        form_domain_note="finite vertex set: every operator domain is the whole space",
        compactness_hs_norm=a_hs,
        trace_norm_estimate=bundle.trace_norm_estimate,
        factorization_bound=bundle.factorization_bound,
        entries=entries,
    )


@dataclass(frozen=True)
class CookDiagnostic:
    """Commutator-integrand samples along a unitary evolution.

    Purely diagnostic on finite graphs: the spectrum is pure point, wave
    packets reflect off the truncation boundary, and no convergence claim
    is made (see `caveat`).
    """

    times: tuple
    values: tuple
    caveat: str


def cook_integrand(pair: GraphPair, f, times, dense_cap=DENSE_CAP) -> CookDiagnostic:
    """|| (H2 I - I H1) exp(-itH1) f ||_{m2} for each requested time."""
    if pair.n > dense_cap:
        raise TooLargeForDenseError(f"n = {pair.n} exceeds dense cap {dense_cap}")
    g1, g2 = pair.g1, pair.g2
    f = np.asarray(f, dtype=complex)
    lam, V = eig_cache(g1, dense_cap)
    rm = np.sqrt(g1.m)
    coeff = V.T @ (rm * f)
    D = _laplacian(g2) - _laplacian(g1)
    vals = []
    for t in times:
        evolved = (V @ (np.exp(-1j * lam * float(t)) * coeff)) / rm
        w = D @ evolved
        vals.append(float(np.sqrt(np.sum(np.abs(w) ** 2 * g2.m))))
    return CookDiagnostic(
        times=tuple(float(t) for t in times),
        values=tuple(vals),
        caveat=("finite truncation: pure point spectrum, boundary reflections "
                "after t ~ radius / group velocity; no convergence claim"),
    )
