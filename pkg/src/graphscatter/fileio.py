"""Plain-text file formats: graphs, perturbations, spheres, densities, triplets.

All floats are written with Python's shortest round-trip representation
(`repr`), so parse(emit(x)) reproduces every stored value bit for bit.
Lines starting with '#' are comments.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .graphs import PerturbationSpec, SphereDecomposition, WeightedGraph, new_graph

__all__ = [
    "emit_graph", "parse_graph",
    "emit_perturbation", "parse_perturbation",
    "emit_spheres", "parse_spheres",
    "emit_density", "parse_density",
    "emit_triplets",
]


def _fmt(x: float) -> str:
    return repr(float(x))


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def emit_graph(g: WeightedGraph) -> str:
    """Serialize a graph: header, then m-lines, then b-lines (x < y)."""
    out = [f"graph v={g.n}"]
    for x in range(g.n):
        out.append(f"m {x} {_fmt(g.m[x])}")
    for (x, y), w in zip(g.edges, g.weights):
        out.append(f"b {x} {y} {_fmt(w)}")
    return "\n".join(out) + "\n"


def parse_graph(text: str) -> WeightedGraph:
    n = None
    measure = None
    edges = []
    seen_m = None
    for lineno, line in _content_lines(text):
        parts = line.split()
        if parts[0] == "graph":
            if n is not None:
                raise InvalidInputError(f"line {lineno}: duplicate graph header")
            try:
                n = int(dict(p.split("=") for p in parts[1:])["v"])
            except (KeyError, ValueError) as exc:
                raise InvalidInputError(f"line {lineno}: bad graph header") from exc
            measure = np.full(n, np.nan)
            seen_m = np.zeros(n, dtype=bool)
        elif parts[0] == "m":
            if n is None:
                raise InvalidInputError(f"line {lineno}: m before header")
            x, val = int(parts[1]), float(parts[2])
            if not 0 <= x < n:
                raise InvalidInputError(f"line {lineno}: vertex {x} out of range")
            measure[x] = val
            seen_m[x] = True
        elif parts[0] == "b":
            if n is None:
                raise InvalidInputError(f"line {lineno}: b before header")
            x, y, val = int(parts[1]), int(parts[2]), float(parts[3])
            if not x < y:
                raise InvalidInputError(f"line {lineno}: b lines require x < y")
            edges.append((x, y, val))
        else:
            raise InvalidInputError(f"line {lineno}: unknown record '{parts[0]}'")
    if n is None:
        raise InvalidInputError("missing graph header")
    if not seen_m.all():
        missing = np.nonzero(~seen_m)[0][:8].tolist()
        raise InvalidInputError(f"missing measure for vertices {missing}")
    return new_graph(edges, measure)


def emit_perturbation(spec: PerturbationSpec) -> str:
    out = [f"perturbation v={spec.vertex_count}", f"seed {spec.seed}"]
    if spec.decay_exponent is not None:
        out.append(f"decay_exponent {_fmt(spec.decay_exponent)}")
    if spec.base_rate is not None:
        out.append(f"base_rate {_fmt(spec.base_rate)}")
    for x in range(spec.vertex_count):
        if spec.mu[x] != 0.0:
            out.append(f"mu {x} {_fmt(spec.mu[x])}")
    for (x, y), v in zip(spec.beta_edges, spec.beta_values):
        out.append(f"beta {x} {y} {_fmt(v)}")
    return "\n".join(out) + "\n"


def parse_perturbation(text: str) -> PerturbationSpec:
    n = None
    seed = 0
    decay_exponent = None
    base_rate = None
    mu = None
    beta_edges, beta_values = [], []
    for lineno, line in _content_lines(text):
        parts = line.split()
        if parts[0] == "perturbation":
            n = int(dict(p.split("=") for p in parts[1:])["v"])
            mu = np.zeros(n)
        elif parts[0] == "seed":
            seed = int(parts[1])
        elif parts[0] == "decay_exponent":
            decay_exponent = float(parts[1])
        elif parts[0] == "base_rate":
            base_rate = float(parts[1])
        elif parts[0] == "mu":
            if mu is None:
                raise InvalidInputError(f"line {lineno}: mu before header")
            mu[int(parts[1])] = float(parts[2])
        elif parts[0] == "beta":
            beta_edges.append((int(parts[1]), int(parts[2])))
            beta_values.append(float(parts[3]))
        else:
            raise InvalidInputError(f"line {lineno}: unknown record '{parts[0]}'")
    if n is None:
        raise InvalidInputError("missing perturbation header")
    return PerturbationSpec(
        vertex_count=n, mu=mu,
        beta_edges=np.asarray(beta_edges, dtype=np.int64).reshape(-1, 2),
        beta_values=np.asarray(beta_values),
        seed=seed, decay_exponent=decay_exponent, base_rate=base_rate,
    )


def emit_spheres(sd: SphereDecomposition) -> str:
    out = [f"spheres count={sd.count}"]
    for n, sph in enumerate(sd.spheres):
        out.append("s " + " ".join([str(n)] + [str(int(v)) for v in sph]))
    return "\n".join(out) + "\n"


def parse_spheres(text: str) -> SphereDecomposition:
    count = None
    spheres = {}
    for lineno, line in _content_lines(text):
        parts = line.split()
        if parts[0] == "spheres":
            count = int(dict(p.split("=") for p in parts[1:])["count"])
        elif parts[0] == "s":
            spheres[int(parts[1])] = [int(v) for v in parts[2:]]
        else:
            raise InvalidInputError(f"line {lineno}: unknown record '{parts[0]}'")
    if count is None:
        raise InvalidInputError("missing spheres header")
    if sorted(spheres) != list(range(count)):
        raise InvalidInputError("sphere indices must be 0..count-1")
    return SphereDecomposition([spheres[i] for i in range(count)])


def emit_density(density) -> str:
    """Two-column `lambda density` text with a metadata header."""
    out = ["# graphscatter density v1",
           f"# bandwidth: {_fmt(density.bandwidth)}",
           f"# normalization: {_fmt(density.normalization)}"]
    for key in sorted(density.meta):
        out.append(f"# meta {key}: {density.meta[key]}")
    for lam, rho in zip(density.grid, density.density):
        out.append(f"{_fmt(lam)} {_fmt(rho)}")
    return "\n".join(out) + "\n"


def parse_density(text: str):
    from .spectra import SpectralDensity

    bandwidth = 0.0
    meta = {}
    grid, dens = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("bandwidth:"):
                bandwidth = float(body.split(":", 1)[1])
            elif body.startswith("meta "):
                key, val = body[5:].split(":", 1)
                meta[key.strip()] = val.strip()
            continue
        a, b = line.split()
        grid.append(float(a))
        dens.append(float(b))
    if not grid:
        raise InvalidInputError("density file has no samples")
    return SpectralDensity(
        grid=np.asarray(grid), density=np.asarray(dens),
        bandwidth=bandwidth, meta=meta,
    )


def emit_triplets(matrix, tol=0.0) -> str:
    """Debug export `i j value` of the entries with |value| > tol."""
    matrix = np.asarray(matrix)
    out = []
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            v = matrix[i, j]
            if abs(v) > tol:
                out.append(f"{i} {j} {_fmt(v.real) if not np.iscomplexobj(matrix) else repr(complex(v))}")
    return "\n".join(out) + "\n"
