"""Discrete state space derived from a Hamiltonian's sparsity pattern.

Nodes are dense integer indices. Undirected edges {n,m} exist wherever some
slice of the Hamiltonian has a nonzero (n,m) entry; diagonal entries give
loop edges {n,n}. Jump potentials and last-jump times are stored per
*directed* edge; a loop edge stores a single entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .hamiltonian import HamiltonianModel, ZERO_THRESHOLD

SNAPSHOT_FORMAT = "memhop-state/1"


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class DirectedEdge:
    from_node: int
    to_node: int


class StateGraph:
    """Immutable graph with a fixed directed-edge enumeration.

    Directed edges are enumerated per undirected edge: two entries (n->m,
    m->n) for non-loops, one for loops. CSR-style adjacency arrays give,
    for each node, its neighbors and the directed-edge indices out of and
    into the node.
    """

    def __init__(self, node_count: int, edges):
        if node_count < 1:
            raise GraphError("node_count must be >= 1")
        norm = []
        seen = set()
        for n, m in edges:
            n, m = int(n), int(m)
            if not (0 <= n < node_count and 0 <= m < node_count):
                raise GraphError(f"edge ({n},{m}) out of range for {node_count} nodes")
            key = (min(n, m), max(n, m))
            if key not in seen:
                seen.add(key)
                norm.append(key)
        norm.sort()
        self.node_count = node_count
        self.edges = tuple(norm)

        directed = []
        index = {}
        for n, m in norm:
            if n == m:
                index[(n, n)] = len(directed)
                directed.append((n, n))
            else:
                index[(n, m)] = len(directed)
                directed.append((n, m))
                index[(m, n)] = len(directed)
                directed.append((m, n))
        self.n_directed = len(directed)
        self.directed_from = np.array([d[0] for d in directed], dtype=np.int64)
        self.directed_to = np.array([d[1] for d in directed], dtype=np.int64)
        self._directed_index = index

        adj = [[] for _ in range(node_count)]
        for n, m in norm:
            adj[n].append((n, m))
            if m != n:
                adj[m].append((n, m))
        counts = [len(a) for a in adj]
        self.indptr = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        nnz = int(self.indptr[-1])
        self.nbr = np.zeros(nnz, dtype=np.int64)
        self.edge_out = np.zeros(nnz, dtype=np.int64)
        self.edge_rev = np.zeros(nnz, dtype=np.int64)
        for k in range(node_count):
            base = int(self.indptr[k])
            for j, (n, m) in enumerate(adj[k]):
                other = m if k == n else n
                self.nbr[base + j] = other
                self.edge_out[base + j] = index[(k, other)]
                self.edge_rev[base + j] = index[(other, k)]
        for a in (self.indptr, self.nbr, self.edge_out, self.edge_rev,
                  self.directed_from, self.directed_to):
            a.flags.writeable = False
        self.max_degree = int(max(counts)) if counts else 0

    def directed_index(self, n: int, m: int) -> int:
        try:
            return self._directed_index[(n, m)]
        except KeyError:
            raise GraphError(f"({n},{m}) is not an edge") from None

    def has_edge(self, n: int, m: int) -> bool:
        return (n, m) in self._directed_index

    def adjacency(self, n: int) -> list[tuple[int, int]]:
        """Undirected edges touching node n (loop included once)."""
        k0, k1 = int(self.indptr[n]), int(self.indptr[n + 1])
        out = []
        for k in range(k0, k1):
            m = int(self.nbr[k])
            out.append((min(n, m), max(n, m)))
        return out

    def directed_edges(self):
        return [DirectedEdge(int(a), int(b))
                for a, b in zip(self.directed_from, self.directed_to)]

    def degree(self, n: int) -> int:
        return int(self.indptr[n + 1] - self.indptr[n])


def build_graph(H: HamiltonianModel) -> StateGraph:
    """Graph whose edge set is the union of nonzero patterns over all slices."""
    pattern = H.union_pattern()
    dim = H.dimension
    edges = [(n, m) for n in range(dim) for m in range(n, dim) if pattern[n, m]]
    return StateGraph(dim, edges)


def regularize_amplitudes(psi: np.ndarray, epsilon_psi: float) -> np.ndarray:
    """Lift every component below the magnitude floor, preserving phase.

    Exact zeros get phase 0 (a real positive floor value).
    """
    if epsilon_psi <= 0:
        raise GraphError("epsilon_psi must be > 0")
    out = np.array(psi, dtype=np.complex128)
    mags = np.abs(out)
    small = mags < epsilon_psi
    zero = mags == 0
    out[small & ~zero] *= epsilon_psi / mags[small & ~zero]
    out[zero] = epsilon_psi
    return out


class PotentialTable:
    """Per-directed-edge complex jump potential plus last same-direction jump time."""

    def __init__(self, graph: StateGraph, values=None, last_jump_times=None):
        self.graph = graph
        n = graph.n_directed
        self.values = (np.zeros(n, dtype=np.complex128) if values is None
                       else np.array(values, dtype=np.complex128))
        self.last_jump_times = (np.zeros(n, dtype=np.float64) if last_jump_times is None
                                else np.array(last_jump_times, dtype=np.float64))
        if self.values.shape != (n,) or self.last_jump_times.shape != (n,):
            raise GraphError("table arrays must have one entry per directed edge")

    def get(self, n: int, m: int) -> complex:
        return complex(self.values[self.graph.directed_index(n, m)])

    def set(self, n: int, m: int, value: complex) -> None:
        self.values[self.graph.directed_index(n, m)] = value

    def tbar(self, n: int, m: int) -> float:
        return float(self.last_jump_times[self.graph.directed_index(n, m)])

    def copy(self) -> "PotentialTable":
        return PotentialTable(self.graph, self.values, self.last_jump_times)

    def to_snapshot(self, node: int | None = None, time: float | None = None) -> dict:
        g = self.graph
        out = {
            "format": SNAPSHOT_FORMAT,
            "node_count": g.node_count,
            "edges": [list(e) for e in g.edges],
            "potentials": [
                {
                    "from": int(g.directed_from[d]),
                    "to": int(g.directed_to[d]),
                    "value": [float(self.values[d].real), float(self.values[d].imag)],
                    "tbar": float(self.last_jump_times[d]),
                }
                for d in range(g.n_directed)
            ],
        }
        if node is not None:
            out["node"] = int(node)
        if time is not None:
            out["time"] = float(time)
        return out

    @classmethod
    def from_snapshot(cls, snap: dict) -> "PotentialTable":
        if snap.get("format") != SNAPSHOT_FORMAT:
            raise GraphError(f"unknown snapshot format {snap.get('format')!r}")
        graph = StateGraph(snap["node_count"], [tuple(e) for e in snap["edges"]])
        table = cls(graph)
        for rec in snap["potentials"]:
            d = graph.directed_index(rec["from"], rec["to"])
            table.values[d] = complex(rec["value"][0], rec["value"][1])
            table.last_jump_times[d] = rec["tbar"]
        return table

    def save(self, path, **meta) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_snapshot(**meta), fh, indent=1)

    @classmethod
    def load(cls, path) -> "PotentialTable":
        with open(path) as fh:
            return cls.from_snapshot(json.load(fh))


def init_potentials(H: HamiltonianModel, psi0: np.ndarray, epsilon_psi: float,
                    graph: StateGraph | None = None) -> PotentialTable:
    """Initial table A[n->m] = H_nm(0) * psi'_m / psi'_n with floored psi'."""
    psi0 = np.asarray(psi0, dtype=np.complex128)
    if psi0.shape != (H.dimension,):
        raise GraphError(f"psi0 shape {psi0.shape} incompatible with dimension {H.dimension}")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-6:
        raise GraphError(f"psi0 not normalized (|psi0| = {norm})")
    psi = regularize_amplitudes(psi0, epsilon_psi)
    if graph is None:
        graph = build_graph(H)
    h0 = H.slice_matrix(0)
    table = PotentialTable(graph)
    frm, to = graph.directed_from, graph.directed_to
    table.values[:] = h0[frm, to] * psi[to] / psi[frm]
    if not np.all(np.isfinite(table.values.view(np.float64))):
        bad = int(np.flatnonzero(~np.isfinite(table.values))[0])
        raise GraphError(
            f"non-finite initial potential on edge {frm[bad]}->{to[bad]}")
    return table
