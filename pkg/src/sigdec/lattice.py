"""Toric-code geometry: chains, syndromes, homology, toroidal metric.

Qubits live on the edges of a periodic d x d lattice.  A chain is a bool
array of shape ``(..., 2, d, d)``: axis -3 is the edge orientation
(``H = 0`` joins (r,c)-(r,c+1), ``V = 1`` joins (r,c)-(r+1,c)), the last
two axes are the anchor vertex.  A syndrome is a bool array of shape
``(..., d, d)`` over vertices.  XOR (``^``) is the group operation on
both.  Leading batch axes are supported throughout.
"""

from __future__ import annotations

import numpy as np

H = 0
V = 1
ORIENT_NAMES = ("H", "V")


def empty_chain(d: int, batch_shape: tuple = ()) -> np.ndarray:
    return np.zeros((*batch_shape, 2, d, d), dtype=bool)


def empty_syndrome(d: int, batch_shape: tuple = ()) -> np.ndarray:
    return np.zeros((*batch_shape, d, d), dtype=bool)


def chain_from_edges(edges, d: int) -> np.ndarray:
    """Build a chain from an iterable of (orient, row, col) edges (XOR semantics)."""
    chain = empty_chain(d)
    for o, r, c in edges:
        chain[o, r % d, c % d] ^= True
    return chain


def edges_of_chain(chain: np.ndarray) -> list[tuple[int, int, int]]:
    """Support of a single chain as a sorted list of (orient, row, col)."""
    o, r, c = np.nonzero(chain)
    return sorted(zip(o.tolist(), r.tolist(), c.tolist()))


def vertices_of_syndrome(syndrome: np.ndarray) -> list[tuple[int, int]]:
    r, c = np.nonzero(syndrome)
    return sorted(zip(r.tolist(), c.tolist()))


def boundary(chain: np.ndarray) -> np.ndarray:
    """Vertices incident to an odd number of chain edges.

    F2-linear; on the torus the result always has even cardinality.
    """
    h = chain[..., H, :, :]
    v = chain[..., V, :, :]
    # vertex (r,c) touches H edges (r,c) and (r,c-1), V edges (r,c) and (r-1,c)
    return h ^ np.roll(h, 1, axis=-1) ^ v ^ np.roll(v, 1, axis=-2)


def homology_class(cycle: np.ndarray) -> tuple[int, int]:
    """Winding parities (h, v) of a cycle.

    h counts H edges crossing the vertical seam at col d-1, v counts V
    edges crossing the horizontal seam at row d-1.  Raises ValueError on
    a chain with nonempty boundary.
    """
    if boundary(cycle).any():
        raise ValueError("chain has nonempty boundary")
    d = cycle.shape[-1]
    h = int(cycle[..., H, :, d - 1].sum()) % 2
    v = int(cycle[..., V, d - 1, :].sum()) % 2
    return h, v


def toric_distance(u: tuple[int, int], v: tuple[int, int], d: int) -> int:
    """L1 distance on the torus."""
    dr = abs(u[0] - v[0]) % d
    dc = abs(u[1] - v[1]) % d
    return min(dr, d - dr) + min(dc, d - dc)


def shortest_path_chain(u: tuple[int, int], v: tuple[int, int], d: int) -> np.ndarray:
    """Deterministic minimum-length chain with boundary {u, v}.

    Walks rows first, then columns, taking the shorter wrap direction and
    breaking exact ties (even d) toward increasing coordinate.
    """
    chain = empty_chain(d)
    r, c = u[0] % d, u[1] % d
    r2, c2 = v[0] % d, v[1] % d

    fwd = (r2 - r) % d
    steps = min(fwd, d - fwd)
    south = fwd <= d - fwd  # tie -> increasing row
    for _ in range(steps):
        if south:
            chain[V, r, c] ^= True
            r = (r + 1) % d
        else:
            r = (r - 1) % d
            chain[V, r, c] ^= True

    fwd = (c2 - c) % d
    steps = min(fwd, d - fwd)
    east = fwd <= d - fwd
    for _ in range(steps):
        if east:
            chain[H, r, c] ^= True
            c = (c + 1) % d
        else:
            c = (c - 1) % d
            chain[H, r, c] ^= True
    return chain


def plaquette_loop(r: int, c: int, d: int) -> np.ndarray:
    """Boundary loop of the plaquette whose north-west vertex is (r, c)."""
    return chain_from_edges(
        [(H, r, c), (H, (r + 1) % d, c), (V, r, c), (V, r, (c + 1) % d)], d
    )
