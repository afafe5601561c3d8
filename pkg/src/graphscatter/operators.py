"""Discrete differential, codifferential, Laplacian and quadratic form.

Conventions
-----------
Vertex functions live in l2(X, m) with <f, g>_m = sum_x f(x) conj(g(x)) m(x)
(conjugation on the second argument).  Edge functions live in l2(X x X, b)
with <a, c>_b = (1/2) sum_{x,y} a(x,y) conj(c(x,y)) b(x,y) over ordered
pairs; values are stored once per canonical edge (x < y) together with an
antisymmetry flag, so the 1/2 against the double count cancels and the
stored inner product is a plain weighted sum over canonical edges.

Scalar accumulations use math.fsum: exactly rounded, hence independent of
summation order and reproducible across runs and thread counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    NotAntisymmetricError,
    TooLargeForDenseError,
)
from .graphs import WeightedGraph

__all__ = [
    "EdgeFunction",
    "OperatorHandle",
    "m_inner",
    "m_norm",
    "b_inner",
    "differential",
    "codifferential",
    "laplacian_apply",
    "quadratic_form",
    "laplacian_matrix",
    "symmetrized_matrix",
    "eig_cache",
    "to_euclidean",
    "operator_hs_norm",
    "operator_norm",
    "trace_norm",
    "adjoint_matrix",
]

DENSE_CAP = 4096


def fsum_c(values):
    """Exactly rounded sum of an iterable of complex (or real) values."""
    vals = np.asarray(list(values))
    if vals.size == 0:
        return 0.0
    if np.iscomplexobj(vals):
        return complex(math.fsum(vals.real), math.fsum(vals.imag))
    return math.fsum(vals)


def _check_vertex(g, f):
    f = np.asarray(f)
    if f.shape != (g.n,):
        raise DimensionMismatchError(f"vertex function shape {f.shape}, expected ({g.n},)")
    return f


@dataclass(frozen=True)
class EdgeFunction:
    """Edge-space function stored on the canonical edges of a graph."""

    edges: np.ndarray
    values: np.ndarray
    antisymmetric: bool

    def __post_init__(self):
        if self.edges.shape[0] != np.asarray(self.values).shape[0]:
            raise DimensionMismatchError("edge values do not match edge list")


def m_inner(g: WeightedGraph, f, h):
    """<f, h>_m, conjugate-linear in the second argument."""
    f = _check_vertex(g, f)
    h = _check_vertex(g, h)
    return fsum_c(f * np.conj(h) * g.m)


def m_norm(g: WeightedGraph, f):
    f = _check_vertex(g, f)
    return math.fsum(np.abs(f) ** 2 * g.m) ** 0.5


def b_inner(g: WeightedGraph, a: EdgeFunction, c: EdgeFunction):
    """<a, c>_b for edge functions of equal symmetry type."""
    if a.antisymmetric != c.antisymmetric:
        raise NotAntisymmetricError("mixed symmetry types in edge inner product")
    return fsum_c(a.values * np.conj(c.values) * g.weights)


def differential(g: WeightedGraph, f) -> EdgeFunction:
    """df(x, y) = f(x) - f(y) on the edge support; antisymmetric."""
    f = _check_vertex(g, f)
    vals = f[g.edges[:, 0]] - f[g.edges[:, 1]]
    return EdgeFunction(edges=g.edges, values=vals, antisymmetric=True)


def codifferential(g: WeightedGraph, alpha: EdgeFunction):
    """(d* a)(x) = (1/m(x)) sum_y b(x, y) a(x, y) for antisymmetric a."""
    if not alpha.antisymmetric:
        raise NotAntisymmetricError("codifferential requires an antisymmetric edge function")
    if alpha.edges.shape != g.edges.shape or not np.array_equal(alpha.edges, g.edges):
        raise DimensionMismatchError("edge function does not match graph edges")
    out = np.zeros(g.n, dtype=np.result_type(alpha.values, float))
    contrib = g.weights * alpha.values
    np.add.at(out, g.edges[:, 0], contrib)
    np.add.at(out, g.edges[:, 1], -contrib)
    return out / g.m


def laplacian_apply(g: WeightedGraph, f):
    """H f = d* d f, evaluated literally as the composition."""
    return codifferential(g, differential(g, f))


def quadratic_form(g: WeightedGraph, f, h):
    """Q(f, h) = <df, dh>_b; sesquilinear, Q(f, f) >= 0."""
    return b_inner(g, differential(g, f), differential(g, h))


def symmetrized_matrix(g: WeightedGraph):
    """Euclidean-symmetric similarity M^(1/2) H M^(-1/2); exactly symmetric.

    Cached on the graph: reused by heat kernels, eigensolvers and KPM.
    """
    if "sym" not in g._cache:
        rm = np.sqrt(g.m)
        A = np.zeros((g.n, g.n))
        x, y = g.edges[:, 0], g.edges[:, 1]
        off = g.weights / (rm[x] * rm[y])
        A[x, y] = -off
        A[y, x] = -off
        A[np.arange(g.n), np.arange(g.n)] = g.degrees() / g.m
        A.setflags(write=False)
        g._cache["sym"] = A
    return g._cache["sym"]


def eig_cache(g: WeightedGraph, dense_cap=DENSE_CAP):
    """Eigendecomposition of the symmetrized Laplacian, cached on the graph."""
    if g.n > dense_cap:
        raise TooLargeForDenseError(f"n = {g.n} exceeds dense cap {dense_cap}")
    if "eig" not in g._cache:
        import scipy.linalg

        lam, V = scipy.linalg.eigh(symmetrized_matrix(g))
        lam.setflags(write=False)
        V.setflags(write=False)
        g._cache["eig"] = (lam, V)
    return g._cache["eig"]


@dataclass
class OperatorHandle:
    """A linear map on vertex functions along with its measure context."""

    n: int
    measure: np.ndarray
    matvec: object                  # callable f -> Af
    matrix: np.ndarray | None = None

    def __call__(self, f):
        return self.matvec(np.asarray(f))

    def self_adjointness_defect(self, g: WeightedGraph, trials=8, seed=0):
        """max |<Af, h>_m - <f, Ah>_m| / scale over random vectors."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(trials):
            f = rng.normal(size=self.n) + 1j * rng.normal(size=self.n)
            h = rng.normal(size=self.n) + 1j * rng.normal(size=self.n)
            lhs = m_inner(g, self(f), h)
            rhs = m_inner(g, f, self(h))
            scale = max(abs(lhs), abs(rhs), 1.0)
            worst = max(worst, abs(lhs - rhs) / scale)
        return worst


def laplacian_matrix(g: WeightedGraph, dense_cap=DENSE_CAP) -> OperatorHandle:
    """Dense matrix of H acting on coordinates: Hf(x) = (1/m) sum b (f(x)-f(y))."""
    if g.n > dense_cap:
        raise TooLargeForDenseError(f"n = {g.n} exceeds dense cap {dense_cap}")
    H = np.zeros((g.n, g.n))
    x, y = g.edges[:, 0], g.edges[:, 1]
    H[x, y] = -g.weights / g.m[x]
    H[y, x] = -g.weights / g.m[y]
    H[np.arange(g.n), np.arange(g.n)] = g.degrees() / g.m
    return OperatorHandle(n=g.n, measure=g.m, matvec=lambda f: H @ f, matrix=H)


# ---------------------------------------------------------------------------
# weighted-space norms of explicit matrices
#
# An operator K: l2(w_in) -> l2(w_out) given as a plain coordinate matrix is
# unitarily equivalent to diag(sqrt(w_out)) K diag(1/sqrt(w_in)) on Euclidean
# space; HS/trace/operator norms are computed there.  For the edge space the
# weight of a canonical edge is b_e (the 1/2 of <.,.>_b against the ordered
# double count).


def to_euclidean(K, w_out, w_in):
    K = np.asarray(K)
    return np.sqrt(w_out)[:, None] * K * (1.0 / np.sqrt(w_in))[None, :]


def operator_hs_norm(K, w_out, w_in):
    return float(np.linalg.norm(to_euclidean(K, w_out, w_in)))


def operator_norm(K, w_out, w_in):
    return float(np.linalg.norm(to_euclidean(K, w_out, w_in), 2))


def trace_norm(K, w_out, w_in):
    sv = np.linalg.svd(to_euclidean(K, w_out, w_in), compute_uv=False)
    return float(sv.sum())


def adjoint_matrix(K, w_out, w_in):
    """Adjoint of K: l2(w_in) -> l2(w_out) as a coordinate matrix."""
    K = np.asarray(K)
    return (1.0 / w_in)[:, None] * K.conj().T * w_out[None, :]
