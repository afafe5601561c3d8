"""Ratio/tilde fields and the three l1 perturbation criteria, with tail
diagnostics over growing truncations.

Criterion sums are accumulated with math.fsum (exactly rounded, order
independent), so algebraic identities such as the sphere telescoping
sum_n #S_n mu_n = sum_x |mu(x)| hold bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotApplicableError, TimeMismatchError
from .graphs import GraphPair, SphereDecomposition
from .heat import HeatKernel, heat_diagonal
from .operators import DENSE_CAP

__all__ = [
    "TildeFields",
    "CriterionReport",
    "SphereRow",
    "TailReport",
    "tilde_fields",
    "criterion_theorem",
    "criterion_geometric",
    "criterion_sphere",
    "tail_extrapolation",
]


@dataclass(frozen=True)
class TildeFields:
    """Signed multiplicative-distortion fields sqrt(r) - 1/sqrt(r).

    tilde_m is indexed by vertex; tilde_b lives on the pair's common canonical
    edges (the else-branch ratio 1 gives tilde 0 off the common support, so
    such edges never contribute).
    """

    tilde_m: np.ndarray
    tilde_b: np.ndarray
    common_edges: np.ndarray


def tilde_fields(pair: GraphPair) -> TildeFields:
    rm = pair.ratio_m
    tm = np.sqrt(rm) - 1.0 / np.sqrt(rm)
    rb = pair.ratio_b
    tb = np.sqrt(rb) - 1.0 / np.sqrt(rb) if rb.size else np.empty(0)
    return TildeFields(tilde_m=tm, tilde_b=tb, common_edges=pair.common_edges)


@dataclass(frozen=True)
class SphereRow:
    n: int
    size: int
    beta_n: float
    mu_n: float
    partial_sum: float          # cumulative sum of #S_j (beta_j + mu_j), j <= n


@dataclass(frozen=True)
class CriterionReport:
    """Evaluated criterion sums with hypothesis bookkeeping.

    On a finite graph every sum is finite, so `verdict` is "satisfied"
    whenever the hypotheses hold; it carries the values for tail analysis.
    "not-applicable" marks equivalence failure or support change.
    """

    criterion: str              # theorem | geometric | sphere
    m_sums: dict                # k -> value (k in {1, 2})
    b_sums: dict
    s: float | None = None
    equiv_constants: tuple = ()
    support_changes: tuple = ()
    verdict: str = "satisfied"
    sphere_rows: tuple = ()
    radius: int | None = None

    @property
    def total(self):
        return math.fsum([self.m_sums[1], self.m_sums[2],
                          self.b_sums[1], self.b_sums[2]])


def _fsum(values):
    return math.fsum(values)


def criterion_theorem(pair: GraphPair, s: float, heat1: HeatKernel | None = None,
                      heat2: HeatKernel | None = None,
                      dense_cap=DENSE_CAP) -> CriterionReport:
    """Heat-weighted l1 sums at time s, for k = 1 and k = 2.

    m-part:  sum_x |tilde_m(x)| P_s^(k)(x,x) m_k(x)
    b-part:  sum_{x,y} |tilde_b(x,y)| (P_s^(k)(x,x) + P_s^(k)(y,y)) b_k(x,y),
    the double sum running over ordered pairs (twice the canonical edges).
    """
    pair.require_applicable("heat-weighted criterion")
    tf = tilde_fields(pair)
    if heat1 is not None and heat1.s != s:
        raise TimeMismatchError(f"heat1 at s={heat1.s}, expected {s}")
    if heat2 is not None and heat2.s != s:
        raise TimeMismatchError(f"heat2 at s={heat2.s}, expected {s}")
    d1 = heat1.diagonal() if heat1 is not None else heat_diagonal(pair.g1, s, dense_cap)
    d2 = heat2.diagonal() if heat2 is not None else heat_diagonal(pair.g2, s, dense_cap)
    am = np.abs(tf.tilde_m)
    ab = np.abs(tf.tilde_b)
    x, y = pair.common_edges[:, 0], pair.common_edges[:, 1]
    m_sums = {1: _fsum(am * d1 * pair.g1.m), 2: _fsum(am * d2 * pair.g2.m)}
    b_sums = {
        1: _fsum(2.0 * ab * (d1[x] + d1[y]) * pair.b1_common),
        2: _fsum(2.0 * ab * (d2[x] + d2[y]) * pair.b2_common),
    }
    return CriterionReport(
        criterion="theorem", m_sums=m_sums, b_sums=b_sums, s=float(s),
        equiv_constants=pair.equiv_constants,
    )


def criterion_geometric(pair: GraphPair) -> CriterionReport:
    """Heat-kernel-free sums using P_s(x,x) <= 1/m(x).

    m-part: sum_x |tilde_m(x)| (the same for k = 1, 2); b-part:
    sum_{x,y} |tilde_b| (1/m_k(x) + 1/m_k(y)) b_k(x,y).  Dominates the
    heat-weighted sums entrywise for every s.
    """
    pair.require_applicable("geometric criterion")
    tf = tilde_fields(pair)
    am = np.abs(tf.tilde_m)
    ab = np.abs(tf.tilde_b)
    x, y = pair.common_edges[:, 0], pair.common_edges[:, 1]
    msum = _fsum(am)
    inv1 = 1.0 / pair.g1.m
    inv2 = 1.0 / pair.g2.m
    b_sums = {
        1: _fsum(2.0 * ab * (inv1[x] + inv1[y]) * pair.b1_common),
        2: _fsum(2.0 * ab * (inv2[x] + inv2[y]) * pair.b2_common),
    }
    return CriterionReport(
        criterion="geometric", m_sums={1: msum, 2: msum}, b_sums=b_sums,
        equiv_constants=pair.equiv_constants,
    )


def criterion_sphere(pair: GraphPair, spheres: SphereDecomposition) -> CriterionReport:
    """Sphere-averaged sums of the additive perturbation.

    beta_n = (1/#S_n) sum_{x in S_n, y} |beta(x, y)| and
    mu_n = (1/#S_n) sum_{x in S_n} |mu(x)|; the reported sums are
    sum_n #S_n beta_n and sum_n #S_n mu_n, accumulated per vertex/edge term
    so the telescoping identities hold exactly.  Empty spheres contribute 0.
    """
    import warnings

    pair.require_applicable("sphere-averaged criterion")
    g1, g2 = pair.g1, pair.g2
    standard = (
        np.all(g1.m == 1.0)
        and (g1.weights.size == 0 or np.all(g1.weights == 1.0))
    )
    if not standard:
        warnings.warn("sphere criterion assumes a standard-weight base graph",
                      stacklevel=2)
    mu = g2.m - g1.m
    beta = pair.b2_common - pair.b1_common       # no support changes here
    x, y = pair.common_edges[:, 0], pair.common_edges[:, 1]
    amu = np.abs(mu)
    abeta = np.abs(beta)
    rows = []
    mu_terms = []                # per-vertex |mu|, sphere by sphere
    beta_terms = []              # per ordered-pair |beta|, sphere by sphere
    partial = 0.0
    sph_of = spheres.index_of
    for n, sph in enumerate(spheres.spheres):
        if sph.size:
            mu_sphere = amu[sph]
            sel = np.concatenate([abeta[sph_of[x] == n], abeta[sph_of[y] == n]])
        else:
            mu_sphere = np.empty(0)
            sel = np.empty(0)
        mu_terms.extend(mu_sphere.tolist())
        beta_terms.extend(sel.tolist())
        mu_tot = _fsum(mu_sphere)
        beta_tot = _fsum(sel)
        size = int(sph.size)
        partial = _fsum([partial, beta_tot, mu_tot])
        rows.append(SphereRow(
            n=n, size=size,
            beta_n=beta_tot / size if size else 0.0,
            mu_n=mu_tot / size if size else 0.0,
            partial_sum=partial,
        ))
    mu_weighted = _fsum(mu_terms)        # = sum_n #S_n mu_n, telescoped
    beta_weighted = _fsum(beta_terms)    # = sum_n #S_n beta_n
    return CriterionReport(
        criterion="sphere",
        m_sums={1: mu_weighted, 2: mu_weighted},
        b_sums={1: beta_weighted, 2: beta_weighted},
        equiv_constants=pair.equiv_constants,
        sphere_rows=tuple(rows),
    )


@dataclass(frozen=True)
class TailReport:
    """Criterion sums on growing truncations with a convergence-evidence flag.

    trend: CONVERGENT when the fitted log-log exponent of the increments is
    <= -1.1; DIVERGENT when the last-half increments stay above half their
    median; INCONCLUSIVE otherwise.  Finite truncations prove nothing; the
    flag reports evidence only.
    """

    radii: tuple
    reports: tuple
    totals: tuple
    increments: tuple
    fitted_exponent: float | None
    trend: str

    CONVERGENT = "CONVERGENT"
    DIVERGENT = "DIVERGENT"
    INCONCLUSIVE = "INCONCLUSIVE"


def tail_extrapolation(family, radii, criterion: str, s: float | None = None,
                       spheres_family=None) -> TailReport:
    """Evaluate a criterion over a family of truncations.

    `family(radius)` returns the GraphPair at that radius (and, for the
    sphere criterion, `spheres_family(radius)` its decomposition unless
    `family` returns a (pair, spheres) tuple).
    """
    radii = [int(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    reports = []
    for r in radii:
        got = family(r)
        if isinstance(got, tuple):
            pair, spheres = got
        else:
            pair, spheres = got, (spheres_family(r) if spheres_family else None)
        if criterion == "theorem":
            rep = criterion_theorem(pair, s if s is not None else 1.0)
        elif criterion == "geometric":
            rep = criterion_geometric(pair)
        elif criterion == "sphere":
            rep = criterion_sphere(pair, spheres)
        else:
            raise ValueError(f"unknown criterion '{criterion}'")
        reports.append(CriterionReport(
            criterion=rep.criterion, m_sums=rep.m_sums, b_sums=rep.b_sums,
            s=rep.s, equiv_constants=rep.equiv_constants,
            support_changes=rep.support_changes, verdict=rep.verdict,
            sphere_rows=rep.sphere_rows, radius=r,
        ))
    totals = [rep.total for rep in reports]
    increments = [b - a for a, b in zip(totals, totals[1:])]
    trend, exponent = _classify_increments(radii[1:], increments)
    return TailReport(
        radii=tuple(radii), reports=tuple(reports), totals=tuple(totals),
        increments=tuple(increments), fitted_exponent=exponent, trend=trend,
    )


def _classify_increments(radii, increments):
    incs = np.asarray(increments, dtype=float)
    if incs.size == 0:
        return TailReport.INCONCLUSIVE, None
    if np.all(incs == 0.0):
        return TailReport.CONVERGENT, None
    # fit over the last half of the radii
    half = max(incs.size // 2, 1)
    r_fit = np.asarray(radii, dtype=float)[-half:]
    i_fit = incs[-half:]
    exponent = None
    pos = i_fit > 0
    if pos.sum() >= 2:
        exponent = float(np.polyfit(np.log(r_fit[pos]), np.log(i_fit[pos]), 1)[0])
        if exponent <= -1.1:
            return TailReport.CONVERGENT, exponent
    elif np.all(i_fit <= 0):
        return TailReport.CONVERGENT, exponent
    med = float(np.median(i_fit))
    if med > 0 and np.all(i_fit >= 0.5 * med):
        return TailReport.DIVERGENT, exponent
    return TailReport.INCONCLUSIVE, exponent
