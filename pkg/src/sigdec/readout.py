"""Final-round noiseless decoding: exact minimum-weight perfect matching.

Distances are toroidal L1.  Small instances (n <= 14) use a bitmask DP;
larger ones fall back to blossom matching (networkx) with a feasibility
walk to restore the canonical tie-break.  Both report, among all
minimum-weight pairings, the lexicographically smallest one under the
canonical vertex order — logical-failure decisions are bit-reproducible.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .lattice import boundary, empty_chain, shortest_path_chain, toric_distance, vertices_of_syndrome

_DP_LIMIT = 14


def _as_vertices(defects) -> list[tuple[int, int]]:
    if isinstance(defects, np.ndarray):
        return vertices_of_syndrome(defects)
    return sorted((int(r), int(c)) for r, c in defects)


def mwpm(defects, d: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Exact minimum-weight perfect matching of an even defect set.

    Accepts a syndrome array or an iterable of (row, col) vertices.
    """
    verts = _as_vertices(defects)
    n = len(verts)
    if n % 2:
        raise ValueError("invalid syndrome parity")
    if n == 0:
        return []
    if n == 2:
        return [(verts[0], verts[1])]
    dist = np.array(
        [[toric_distance(u, v, d) for v in verts] for u in verts], dtype=np.int64
    )
    if n <= _DP_LIMIT:
        pairs_idx = _mwpm_dp(n, dist)
    else:
        pairs_idx = _mwpm_blossom(n, dist)
    return [(verts[i], verts[j]) for i, j in pairs_idx]


def _mwpm_dp(n: int, dist: np.ndarray) -> list[tuple[int, int]]:
    """Bitmask DP over subsets; reconstruction picks lexicographic-smallest."""
    full = (1 << n) - 1
    INF = np.iinfo(np.int64).max // 2
    best = np.full(1 << n, INF, dtype=np.int64)
    best[0] = 0
    for mask in range(1, 1 << n):
        if bin(mask).count("1") % 2:
            continue
        i = (mask & -mask).bit_length() - 1  # lowest unmatched vertex
        rest = mask & ~(1 << i)
        j = rest
        acc = INF
        while j:
            k = (j & -j).bit_length() - 1
            cand = dist[i, k] + best[rest & ~(1 << k)]
            if cand < acc:
                acc = cand
            j &= j - 1
        best[mask] = acc
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        j = rest
        while j:
            k = (j & -j).bit_length() - 1
            if dist[i, k] + best[rest & ~(1 << k)] == best[mask]:
                pairs.append((i, k))
                mask = rest & ~(1 << k)
                break
            j &= j - 1
    return pairs


def _blossom_weight(indices: tuple[int, ...], dist_key: bytes, n: int) -> int:
    return _blossom_weight_cached(indices, dist_key, n)


@lru_cache(maxsize=4096)
def _blossom_weight_cached(indices: tuple[int, ...], dist_key: bytes, n: int) -> int:
    import networkx as nx

    dist = np.frombuffer(dist_key, dtype=np.int64).reshape(n, n)
    if not indices:
        return 0
    big = int(dist.max()) + 1
    g = nx.Graph()
    for a, i in enumerate(indices):
        for j in indices[a + 1 :]:
            g.add_edge(i, j, weight=big - int(dist[i, j]))
    matching = nx.max_weight_matching(g, maxcardinality=True)
    return sum(int(dist[i, j]) for i, j in matching)


def _mwpm_blossom(n: int, dist: np.ndarray) -> list[tuple[int, int]]:
    """Blossom total weight + greedy feasibility walk for the canonical pairing."""
    key = dist.tobytes()
    remaining = list(range(n))
    pairs = []
    target = _blossom_weight(tuple(remaining), key, n)
    while remaining:
        i = remaining[0]
        for j in remaining[1:]:
            rest = tuple(v for v in remaining if v not in (i, j))
            if dist[i, j] + _blossom_weight(rest, key, n) == target:
                pairs.append((i, j))
                remaining = list(rest)
                target -= dist[i, j]
                break
        else:  # pragma: no cover - matching feasibility always holds
            raise RuntimeError("matching reconstruction failed")
    return pairs


def matching_bruteforce(defects, d: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """Exhaustive (n-1)!! oracle with the same tie-break; n <= 12."""
    verts = _as_vertices(defects)
    n = len(verts)
    if n % 2:
        raise ValueError("invalid syndrome parity")
    if n > 12:
        raise ValueError("brute-force oracle is limited to 12 defects")
    if n == 0:
        return []
    dist = {(u, v): toric_distance(u, v, d) for u in verts for v in verts}
    best: list = [None, None]  # weight, pairing

    def rec(remaining, acc, weight):
        if best[0] is not None and weight >= best[0]:
            return  # ties never replace the first (lexicographic) optimum
        if not remaining:
            if best[0] is None or weight < best[0]:
                best[0] = weight
                best[1] = list(acc)
            return
        u = remaining[0]
        for v in remaining[1:]:
            rest = [x for x in remaining if x not in (u, v)]
            rec(rest, acc + [(u, v)], weight + dist[(u, v)])

    rec(verts, [], 0)
    return best[1]


def correction_from_pairing(pairing, d: int) -> np.ndarray:
    """XOR of deterministic shortest paths over all pairs."""
    chain = empty_chain(d)
    for u, v in pairing:
        chain ^= shortest_path_chain(u, v, d)
    return chain


def readout_correction(residual: np.ndarray, d: int) -> np.ndarray:
    """Noiseless-round correction for a residual error chain."""
    return correction_from_pairing(mwpm(boundary(residual), d), d)
