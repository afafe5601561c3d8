"""Weighted-graph data model, sphere decompositions and graph-family generators.

A weighted graph is a triple: a finite vertex set (dense 0-based indices),
a symmetric edge-weight function b >= 0 with zero diagonal, and a strictly
positive vertex measure m.  Edges are stored once, on canonical ordered
pairs (x, y) with x < y, sorted lexicographically.  All arrays are frozen
after construction; instances can be shared freely across threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidInputError,
    InvalidLabelError,
    NegativeEdgeWeightError,
    NonPositiveMeasureError,
    NonSymmetricInputError,
    SelfLoopError,
)

__all__ = [
    "WeightedGraph",
    "SphereDecomposition",
    "PerturbationSpec",
    "GraphPair",
    "new_graph",
    "lattice_ball",
    "regular_tree_ball",
    "cone_tree_ball",
    "perturb",
    "decay_perturbation",
    "power_iteration",
]


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


class WeightedGraph:
    """Finite weighted graph (vertex measure m, symmetric edge weights b).

    Parameters
    ----------
    vertex_count : int
        Number of vertices; indices run 0..vertex_count-1.
    edges : (E, 2) integer array
        Canonical edge endpoints, x < y, lexicographically sorted.
    weights : (E,) float array
        Strictly positive edge weights b(x, y).
    measure : (N,) float array
        Strictly positive vertex measure m(x).
    labels : sequence, optional
        Per-vertex opaque tags (lattice coordinates, tree cone labels).
    meta : dict, optional
        Generator metadata (family, degree convention, growth rate...).
    """

    __slots__ = ("n", "edges", "weights", "m", "labels", "meta", "_cache")

    def __init__(self, vertex_count, edges, weights, measure, labels=None, meta=None):
        self.n = int(vertex_count)
        self.edges = _frozen(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
        self.weights = _frozen(np.asarray(weights, dtype=np.float64))
        self.m = _frozen(np.asarray(measure, dtype=np.float64))
        self.labels = tuple(labels) if labels is not None else None
        self.meta = dict(meta) if meta else {}
        self._cache = {}
        self._validate()

    def _validate(self):
        if self.m.shape != (self.n,):
            raise DimensionMismatchError(
                f"measure shape {self.m.shape} does not match vertex count {self.n}"
            )
        if not np.all(np.isfinite(self.m)) or np.any(self.m <= 0):
            raise NonPositiveMeasureError("vertex measure must be finite and > 0")
        if self.edges.shape[0] != self.weights.shape[0]:
            raise InvalidInputError("edges and weights lengths differ")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise InvalidInputError("edge endpoint out of range")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise InvalidInputError("edges must be canonical (x < y)")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
            raise NegativeEdgeWeightError("edge weights must be finite and >= 0")
        deg = self.degrees()
        if not np.all(np.isfinite(deg)):
            raise InvalidInputError("weighted degree not finite")

    @property
    def edge_count(self):
        return self.edges.shape[0]

    def degrees(self):
        """Weighted degree vector deg(x) = sum_y b(x, y)."""
        deg = np.zeros(self.n)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg

    def b_matrix(self):
        """Symmetric sparse weight matrix (scipy CSR)."""
        import scipy.sparse as sp

        x, y = self.edges[:, 0], self.edges[:, 1]
        return sp.csr_matrix(
            (np.concatenate([self.weights, self.weights]),
             (np.concatenate([x, y]), np.concatenate([y, x]))),
            shape=(self.n, self.n),
        )

    def weight_lookup(self):
        """Dict (x, y) -> b for canonical pairs; cached."""
        if "wl" not in self._cache:
            self._cache["wl"] = {
                (int(x), int(y)): float(w)
                for (x, y), w in zip(self.edges, self.weights)
            }
        return self._cache["wl"]

    def gershgorin_bound(self):
        """Upper bound on the spectrum of the Laplacian: max_x 2 deg(x)/m(x)."""
        if self.edge_count == 0:
            return 0.0
        return float(np.max(2.0 * self.degrees() / self.m))

    def equals_exact(self, other):
        """Bitwise equality of all stored values (used by round-trip tests)."""
        return (
            self.n == other.n
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.m, other.m)
        )

    def __repr__(self):
        fam = self.meta.get("family", "graph")
        return f"WeightedGraph({fam}, n={self.n}, edges={self.edge_count})"


class SphereDecomposition:
    """Ordered partition of the vertex set into disjoint spheres S_0..S_R."""

    __slots__ = ("spheres", "index_of")

    def __init__(self, spheres, vertex_count=None):
        self.spheres = tuple(_frozen(np.asarray(s, dtype=np.int64)) for s in spheres)
        total = np.concatenate([s for s in self.spheres]) if self.spheres else np.array([], dtype=np.int64)
        n = vertex_count if vertex_count is not None else (int(total.max()) + 1 if total.size else 0)
        if total.size != n or (total.size and (np.unique(total) != np.arange(n)).any()):
            raise InvalidInputError("spheres must partition the vertex set")
        index_of = np.empty(n, dtype=np.int64)
        for i, s in enumerate(self.spheres):
            index_of[s] = i
        self.index_of = _frozen(index_of)

    @property
    def count(self):
        return len(self.spheres)

    def sizes(self):
        return [int(s.size) for s in self.spheres]

    def __repr__(self):
        return f"SphereDecomposition(sizes={self.sizes()})"


@dataclass(frozen=True)
class PerturbationSpec:
    """Additive perturbation (beta on edges, mu on vertices) of a base graph.

    beta is stored on canonical ordered pairs; mu is a full vector.  Feasibility
    (b + beta >= 0, m + mu > 0) is checked when the spec is applied to a graph,
    not at construction.
    """

    vertex_count: int
    mu: np.ndarray
    beta_edges: np.ndarray      # (E, 2) canonical pairs; may include new edges
    beta_values: np.ndarray
    seed: int = 0
    decay_exponent: float | None = None
    base_rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(np.asarray(self.mu, dtype=np.float64)))
        be = np.asarray(self.beta_edges, dtype=np.int64).reshape(-1, 2)
        bv = np.asarray(self.beta_values, dtype=np.float64)
        if be.shape[0] != bv.shape[0]:
            raise InvalidInputError("beta edges/values lengths differ")
        if be.size:
            if np.any(be[:, 0] == be[:, 1]):
                raise SelfLoopError("beta has a diagonal entry")
            lo = np.minimum(be[:, 0], be[:, 1])
            hi = np.maximum(be[:, 0], be[:, 1])
            order = np.lexsort((hi, lo))
            be = np.stack([lo[order], hi[order]], axis=1)
            bv = bv[order]
            dup = np.all(be[1:] == be[:-1], axis=1)
            if dup.any():
                bad = be[1:][dup]
                same = bv[1:][dup] == bv[:-1][dup]
                if not same.all():
                    raise NonSymmetricInputError(f"conflicting beta entries at {bad.tolist()}")
                keep = np.concatenate([[True], ~dup])
                be, bv = be[keep], bv[keep]
        if self.mu.shape != (self.vertex_count,):
            raise DimensionMismatchError(
                f"mu shape {self.mu.shape} does not match vertex count {self.vertex_count}"
            )
        object.__setattr__(self, "beta_edges", _frozen(be))
        object.__setattr__(self, "beta_values", _frozen(bv))


@dataclass(frozen=True)
class GraphPair:
    """Two weighted graphs on the same vertex set, with cached ratio fields.

    ratio_m(x) = m1(x)/m2(x).  ratio_b is defined on `common_edges`, the
    canonical edges where both weights are positive; edges present in exactly
    one support are collected in `support_changes` and mark the b-equivalence
    as failed.  equiv constants are (min, max) of the respective ratios.
    """

    g1: WeightedGraph
    g2: WeightedGraph
    ratio_m: np.ndarray
    common_edges: np.ndarray
    b1_common: np.ndarray
    b2_common: np.ndarray
    ratio_b: np.ndarray
    support_changes: tuple          # ((x, y, b1, b2), ...)
    c_m: float
    C_m: float
    c_b: float | None
    C_b: float | None

    @property
    def n(self):
        return self.g1.n

    @property
    def b_equivalent(self):
        return not self.support_changes

    @property
    def equiv_constants(self):
        return (self.c_m, self.C_m, self.c_b, self.C_b)

    def swapped(self):
        """The pair with the roles of g1 and g2 exchanged."""
        return graph_pair(self.g2, self.g1)

    def require_applicable(self, what="criterion"):
        from .errors import NotApplicableError

        if self.support_changes:
            edges = [(int(x), int(y)) for (x, y, _, _) in self.support_changes]
            raise NotApplicableError(
                f"{what} not applicable: edge support changed at {edges}",
                support_changes=self.support_changes,
            )


def graph_pair(g1: WeightedGraph, g2: WeightedGraph) -> GraphPair:
    """Build a GraphPair with ratio fields and equivalence constants."""
    if g1.n != g2.n:
        raise DimensionMismatchError(f"vertex counts differ: {g1.n} vs {g2.n}")
    ratio_m = g1.m / g2.m
    w1 = g1.weight_lookup()
    w2 = g2.weight_lookup()
    common, b1c, b2c, changes = [], [], [], []
    for key in sorted(set(w1) | set(w2)):
        a = w1.get(key, 0.0)
        b = w2.get(key, 0.0)
        if a > 0 and b > 0:
            common.append(key)
            b1c.append(a)
            b2c.append(b)
        else:
            changes.append((key[0], key[1], a, b))
    common = np.asarray(common, dtype=np.int64).reshape(-1, 2)
    b1c = np.asarray(b1c)
    b2c = np.asarray(b2c)
    ratio_b = b1c / b2c if b1c.size else np.empty(0)
    c_m, C_m = float(ratio_m.min()), float(ratio_m.max())
    if changes:
        c_b = C_b = None
    elif ratio_b.size:
        c_b, C_b = float(ratio_b.min()), float(ratio_b.max())
    else:
        c_b = C_b = 1.0
    return GraphPair(
        g1=g1, g2=g2, ratio_m=_frozen(ratio_m),
        common_edges=_frozen(common), b1_common=_frozen(b1c),
        b2_common=_frozen(b2c), ratio_b=_frozen(ratio_b),
        support_changes=tuple(changes), c_m=c_m, C_m=C_m, c_b=c_b, C_b=C_b,
    )


# ---------------------------------------------------------------------------
# constructors


def new_graph(edges, measure, labels=None, meta=None) -> WeightedGraph:
    """Build a graph from an edge list [(x, y, weight), ...] and a measure.

    The symmetric closure is stored once: (x, y) and (y, x) entries must agree;
    conflicting duplicates are rejected.  Zero-weight entries are dropped (no
    edge), nonzero diagonal entries are rejected.
    """
    m = np.asarray(measure, dtype=np.float64)
    n = m.shape[0]
    seen = {}
    for (x, y, w) in edges:
        x, y, w = int(x), int(y), float(w)
        if not (0 <= x < n and 0 <= y < n):
            raise InvalidInputError(f"edge ({x},{y}) out of range for {n} vertices")
        if x == y:
            if w != 0.0:
                raise SelfLoopError(f"nonzero diagonal weight b({x},{x}) = {w}")
            continue
        if w < 0:
            raise NegativeEdgeWeightError(f"negative weight {w} at ({x},{y})")
        key = (x, y) if x < y else (y, x)
        if key in seen and seen[key] != w:
            raise NonSymmetricInputError(
                f"conflicting weights for edge {key}: {seen[key]} vs {w}"
            )
        seen[key] = w
    items = sorted((k, v) for k, v in seen.items() if v > 0.0)
    edge_arr = np.asarray([k for k, _ in items], dtype=np.int64).reshape(-1, 2)
    weights = np.asarray([v for _, v in items])
    return WeightedGraph(n, edge_arr, weights, m, labels=labels, meta=meta)


def lattice_ball(d: int, radius: int):
    """Sup-norm ball of the integer lattice with standard weights.

    Vertices are ordered sphere by sphere (lexicographic within a sphere), so
    sphere indices are contiguous.  Returns (graph, spheres); sphere S_n is the
    set of points at sup-norm distance n, whose size grows like n^(d-1).
    """
    if d < 1:
        raise InvalidInputError("d must be >= 1")
    if radius < 0:
        raise InvalidInputError("radius must be >= 0")
    import itertools

    pts_by_sphere = [[] for _ in range(radius + 1)]
    for pt in itertools.product(range(-radius, radius + 1), repeat=d):
        pts_by_sphere[max(abs(c) for c in pt)].append(pt)
    coords = []
    spheres = []
    for n_s, pts in enumerate(pts_by_sphere):
        pts.sort()
        start = len(coords)
        coords.extend(pts)
        spheres.append(range(start, len(coords)))
    index = {pt: i for i, pt in enumerate(coords)}
    edges = []
    for pt, i in index.items():
        for axis in range(d):
            nb = list(pt)
            nb[axis] += 1
            j = index.get(tuple(nb))
            if j is not None:
                edges.append((i, j, 1.0))
    g = new_graph(
        edges,
        np.ones(len(coords)),
        labels=coords,
        meta={"family": "lattice", "d": d, "radius": radius,
              "weights": "standard"},
    )
    return g, SphereDecomposition([list(s) for s in spheres], g.n)


def regular_tree_ball(k: int, depth: int):
    """Rooted regular tree ball with standard weights.

    Degree convention (recorded in meta): the root has k children and every
    non-root vertex has k forward children, hence non-root degree k + 1.
    Sphere sizes are #S_0 = 1 and #S_n = k^n for n >= 1.
    """
    if k < 2:
        raise InvalidInputError("branching number k must be >= 2")
    if depth < 0:
        raise InvalidInputError("depth must be >= 0")
    edges = []
    spheres = [[0]]
    next_id = 1
    frontier = [0]
    for _ in range(depth):
        new_frontier = []
        for parent in frontier:
            for _ in range(k):
                edges.append((parent, next_id, 1.0))
                new_frontier.append(next_id)
                next_id += 1
        spheres.append(new_frontier)
        frontier = new_frontier
    g = new_graph(
        edges,
        np.ones(next_id),
        meta={
            "family": "regular-tree", "k": k, "depth": depth,
            "weights": "standard",
            "degree_convention": "root has k children; every other vertex has "
                                 "k forward children (degree k + 1)",
        },
    )
    return g, SphereDecomposition(spheres, g.n)


def power_iteration(M, tol=1e-13, max_iter=10000):
    """Largest eigenvalue of a nonnegative square matrix by power iteration."""
    M = np.asarray(M, dtype=np.float64)
    v = np.ones(M.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        w /= nrm
        new_lam = float(w @ (M @ w))
        if abs(new_lam - lam) <= tol * max(1.0, abs(new_lam)):
            return new_lam
        lam, v = new_lam, w
    return lam


def _is_irreducible(M):
    n = M.shape[0]
    reach = (M > 0).astype(bool) | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach.all())


def cone_tree_ball(M, root_label: int, depth: int):
    """Tree ball generated by a substitution matrix over vertex labels.

    Every vertex with label k gets M[k, l] forward children of label l
    (labels are 1-based at the interface).  Sphere sizes grow like gamma^n
    with gamma the largest eigenvalue of M (reported in meta via power
    iteration).  Warns when M is reducible or has zeros on the diagonal.
    """
    M = np.asarray(M, dtype=np.int64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("substitution matrix must be square")
    if np.any(M < 0):
        raise InvalidInputError("substitution matrix must be nonnegative")
    nlab = M.shape[0]
    if not (1 <= root_label <= nlab):
        raise InvalidLabelError(f"root label {root_label} not in 1..{nlab}")
    if depth < 0:
        raise InvalidInputError("depth must be >= 0")
    if not _is_irreducible(M):
        warnings.warn("substitution matrix is reducible", stacklevel=2)
    if np.any(np.diag(M) == 0):
        warnings.warn("substitution matrix has zero diagonal entries", stacklevel=2)

    labels = [root_label]
    edges = []
    spheres = [[0]]
    frontier = [0]
    next_id = 1
    for _ in range(depth):
        new_frontier = []
        for parent in frontier:
            plab = labels[parent] - 1
            for child_lab in range(nlab):
                for _ in range(int(M[plab, child_lab])):
                    edges.append((parent, next_id, 1.0))
                    labels.append(child_lab + 1)
                    new_frontier.append(next_id)
                    next_id += 1
        spheres.append(new_frontier)
        frontier = new_frontier
    gamma = power_iteration(M.astype(np.float64))
    g = new_graph(
        edges,
        np.ones(next_id),
        labels=labels,
        meta={"family": "cone-tree", "matrix": M.tolist(),
              "root_label": root_label, "depth": depth, "gamma": gamma,
              "weights": "standard"},
    )
    return g, SphereDecomposition(spheres, g.n)


# ---------------------------------------------------------------------------
# perturbations


def perturb(g1: WeightedGraph, spec: PerturbationSpec) -> GraphPair:
    """Apply b2 = b1 + beta, m2 = m1 + mu and return the resulting pair.

    Edges where exactly one of b1, b2 vanishes land on the pair's
    support-change list and mark the b-equivalence as failed; criterion
    operations then refuse with a precise error.
    """
    if spec.vertex_count != g1.n:
        raise DimensionMismatchError(
            f"spec vertex count {spec.vertex_count} does not match graph ({g1.n})"
        )
    if spec.beta_edges.size and spec.beta_edges.max() >= g1.n:
        raise InvalidInputError("beta support outside vertex range")
    m2 = g1.m + spec.mu
    if np.any(m2 <= 0):
        bad = np.nonzero(m2 <= 0)[0][:8].tolist()
        raise NonPositiveMeasureError(f"m1 + mu not strictly positive at vertices {bad}")
    w2 = dict(g1.weight_lookup())
    for (x, y), dv in zip(spec.beta_edges, spec.beta_values):
        key = (int(x), int(y))
        w2[key] = w2.get(key, 0.0) + float(dv)
    neg = [k for k, v in w2.items() if v < 0]
    if neg:
        raise NegativeEdgeWeightError(f"b1 + beta negative at edges {neg[:8]}")
    edge_list = [(x, y, v) for (x, y), v in w2.items()]
    g2 = new_graph(edge_list, m2, labels=g1.labels,
                   meta={**g1.meta, "perturbed": True, "seed": spec.seed})
    return graph_pair(g1, g2)


def _sphere_rng(seed, tag, sphere_index):
    # Counter-based generator: one independent stream per (seed, tag, sphere).
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(seed), tag, int(sphere_index))))
    )


def decay_perturbation(g: WeightedGraph, spheres: SphereDecomposition,
                       target, seed: int, *, decay_exponent=None,
                       base_rate=None) -> PerturbationSpec:
    """Pseudo-random perturbation with prescribed sphere-averaged decay.

    `target` maps a sphere index n to the desired average rate of
    mu_n = avg_{x in S_n} |mu(x)| and beta_n = avg_{x in S_n} sum_y |beta(x,y)|.
    Vertex values are rate(n) times a random factor in +-[0.5, 1.5], so the
    realized mu_n lands within a factor 2 of the target by construction.

    Edge values straddle two spheres, so their sphere averages are coupled;
    they are set by a greedy sweep over spheres: each sphere's not-yet-fixed
    incident edges are scaled to bring the sphere total to its target (never
    below half of it), given what earlier spheres already committed.  For
    smoothly decaying rates this also realizes beta_n within a factor 2 of
    target away from the innermost spheres; sharp target drops between
    adjacent spheres (e.g. a zero target next to a large one) are structurally
    infeasible for edge averages and then the inner commitment wins.

    Signs that would make m2 or b2 infeasible are flipped to +.
    Deterministic: one counter-based stream per (seed, field, sphere index).
    """
    rates = np.array([float(target(n)) for n in range(spheres.count)])
    if np.any(rates < 0):
        raise InvalidInputError("target rate must be nonnegative")
    n = g.n
    mu = np.zeros(n)
    for ns, sph in enumerate(spheres.spheres):
        if sph.size == 0 or rates[ns] == 0.0:
            continue
        rng = _sphere_rng(seed, 1, ns)
        mag = rates[ns] * rng.uniform(0.5, 1.5, size=sph.size)
        sign = np.where(rng.uniform(size=sph.size) < 0.5, -1.0, 1.0)
        # a negative draw may not push the measure to <= 0
        sign = np.where(mag >= g.m[sph], 1.0, sign)
        mu[sph] = sign * mag

    # raw edge shapes, one stream per sphere of the lower endpoint
    ex, ey = g.edges[:, 0], g.edges[:, 1]
    sx, sy = spheres.index_of[ex], spheres.index_of[ey]
    s_lo = np.minimum(sx, sy)
    raw = np.zeros(g.edge_count)
    sign = np.ones(g.edge_count)
    for ns in range(spheres.count):
        sel = np.nonzero(s_lo == ns)[0]
        if sel.size == 0:
            continue
        rng = _sphere_rng(seed, 2, ns)
        raw[sel] = rng.uniform(0.5, 1.5, size=sel.size)
        sign[sel] = np.where(rng.uniform(size=sel.size) < 0.5, -1.0, 1.0)

    # greedy sweep over spheres: scale each sphere's not-yet-committed
    # incident edges so the sphere total meets its target given earlier
    # commitments; cross-edge allocations are capped by the destination
    # sphere's own target so one sphere cannot overload the next
    targets = rates * np.array([s.size for s in spheres.spheres], dtype=float)
    mag = np.zeros(g.edge_count)
    done = np.zeros(g.edge_count, dtype=bool)
    for ns in range(spheres.count):
        incident = np.nonzero((s_lo == ns) & ~done)[0]
        if incident.size == 0:
            continue
        done[incident] = True
        prior = np.nonzero((mag > 0) & ((sx == ns) | (sy == ns)))[0]
        back = float(mag[prior].sum())
        # always push at least half the budget outward, so a fully satisfied
        # sphere cannot starve the next one
        need = max(targets[ns] - back, targets[ns] / 2.0)
        if need == 0.0:
            continue
        intra = incident[(sx[incident] == ns) & (sy[incident] == ns)]
        cross = incident[(sx[incident] != ns) | (sy[incident] != ns)]
        raw_eff = 2.0 * raw[intra].sum() + raw[cross].sum()
        if raw_eff == 0.0:
            continue
        alpha = need / raw_eff
        mag[incident] = alpha * raw[incident]
        # cap each destination sphere's share at that sphere's target
        shortfall = 0.0
        dest = np.maximum(sx[cross], sy[cross])
        for d in np.unique(dest):
            grp = cross[dest == d]
            tot = float(mag[grp].sum())
            cap = float(targets[d])
            if tot > cap:
                mag[grp] *= cap / tot if tot > 0 else 0.0
                shortfall += tot - cap
        if shortfall > 0 and intra.size and raw[intra].sum() > 0:
            mag[intra] += (shortfall / 2.0) * raw[intra] / raw[intra].sum()
    sign = np.where(mag >= g.weights, 1.0, sign)
    beta = sign * mag
    keep = mag > 0
    return PerturbationSpec(
        vertex_count=n,
        mu=mu,
        beta_edges=g.edges[keep],
        beta_values=beta[keep],
        seed=int(seed),
        decay_exponent=decay_exponent,
        base_rate=base_rate,
    )
