import numpy as np
import pytest

from sigdec.lattice import H, V, chain_from_edges, empty_chain, plaquette_loop


def random_chain(rng, d, density=0.2):
    return rng.random((2, d, d)) < density


def random_cycle(rng, d, n_plaquettes=6, windings=(0, 0)):
    """Cycle with known homology: plaquette boundaries plus full-row/col loops."""
    cyc = empty_chain(d)
    for _ in range(n_plaquettes):
        cyc ^= plaquette_loop(int(rng.integers(d)), int(rng.integers(d)), d)
    if windings[0] % 2:
        cyc ^= chain_from_edges([(H, 0, c) for c in range(d)], d)
    if windings[1] % 2:
        cyc ^= chain_from_edges([(V, r, 0) for r in range(d)], d)
    return cyc


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
