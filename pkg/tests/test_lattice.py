import pytest

from sigdec.lattice import (
    H,
    V,
    boundary,
    chain_from_edges,
    edges_of_chain,
    empty_chain,
    homology_class,
    plaquette_loop,
    shortest_path_chain,
    toric_distance,
    vertices_of_syndrome,
)

from conftest import random_chain, random_cycle


def test_boundary_empty_chain():
    assert not boundary(empty_chain(5)).any()


def test_boundary_single_edge():
    chain = chain_from_edges([(H, 0, 0)], 5)
    assert vertices_of_syndrome(boundary(chain)) == [(0, 0), (0, 1)]


def test_boundary_plaquette_loop_is_empty():
    assert not boundary(plaquette_loop(2, 3, 5)).any()


def test_boundary_wraps_the_torus():
    chain = chain_from_edges([(H, 1, 4), (V, 4, 2)], 5)
    assert vertices_of_syndrome(boundary(chain)) == [(0, 2), (1, 0), (1, 4), (4, 2)]


def test_boundary_is_f2_linear(rng):
    for d in (3, 5, 9):
        for _ in range(340):
            a = random_chain(rng, d)
            b = random_chain(rng, d)
            assert (boundary(a ^ b) == (boundary(a) ^ boundary(b))).all()


def test_boundary_has_even_support(rng):
    for d in (3, 5, 9):
        for _ in range(200):
            assert int(boundary(random_chain(rng, d)).sum()) % 2 == 0


def test_homology_trivial_cases():
    assert homology_class(empty_chain(7)) == (0, 0)
    assert homology_class(plaquette_loop(1, 1, 7)) == (0, 0)


def test_homology_noncontractible_row():
    loop = chain_from_edges([(H, 0, c) for c in range(7)], 7)
    assert homology_class(loop) == (1, 0)


def test_homology_noncontractible_column():
    loop = chain_from_edges([(V, r, 3) for r in range(7)], 7)
    assert homology_class(loop) == (0, 1)


def test_homology_rejects_open_chain():
    chain = chain_from_edges([(H, 0, 0)], 5)
    with pytest.raises(ValueError, match="nonempty boundary"):
        homology_class(chain)


def test_homology_invariant_under_plaquette_xor(rng):
    d = 7
    for _ in range(200):
        cyc = random_cycle(rng, d, windings=(int(rng.integers(2)), int(rng.integers(2))))
        cls = homology_class(cyc)
        bumped = cyc ^ plaquette_loop(int(rng.integers(d)), int(rng.integers(d)), d)
        assert homology_class(bumped) == cls


def test_homology_is_additive(rng):
    d = 7
    for _ in range(200):
        wa = (int(rng.integers(2)), int(rng.integers(2)))
        wb = (int(rng.integers(2)), int(rng.integers(2)))
        a = random_cycle(rng, d, windings=wa)
        b = random_cycle(rng, d, windings=wb)
        ha, hb = homology_class(a), homology_class(b)
        assert homology_class(a ^ b) == (ha[0] ^ hb[0], ha[1] ^ hb[1])
        assert ha == wa and hb == wb


def test_toric_distance_examples():
    assert toric_distance((0, 0), (0, 0), 7) == 0
    assert toric_distance((0, 0), (0, 6), 7) == 1
    assert toric_distance((0, 0), (2, 3), 7) == 5


def test_toric_distance_is_a_metric(rng):
    d = 9
    pts = [(int(rng.integers(d)), int(rng.integers(d))) for _ in range(60)]
    for u in pts[:20]:
        for v in pts[20:40]:
            assert toric_distance(u, v, d) == toric_distance(v, u, d)
            assert (toric_distance(u, v, d) == 0) == (u == v)
            for w in pts[40:]:
                assert toric_distance(u, w, d) <= toric_distance(u, v, d) + toric_distance(v, w, d)


def test_toric_distance_translation_invariant(rng):
    d = 9
    for _ in range(100):
        u = (int(rng.integers(d)), int(rng.integers(d)))
        v = (int(rng.integers(d)), int(rng.integers(d)))
        dr, dc = int(rng.integers(d)), int(rng.integers(d))
        tu = ((u[0] + dr) % d, (u[1] + dc) % d)
        tv = ((v[0] + dr) % d, (v[1] + dc) % d)
        assert toric_distance(u, v, d) == toric_distance(tu, tv, d)


def test_shortest_path_trivial_cases():
    assert not shortest_path_chain((2, 2), (2, 2), 5).any()
    assert edges_of_chain(shortest_path_chain((0, 0), (0, 1), 5)) == [(H, 0, 0)]


def test_shortest_path_realizes_distance(rng):
    for d in (5, 7, 9):
        for _ in range(120):
            u = (int(rng.integers(d)), int(rng.integers(d)))
            v = (int(rng.integers(d)), int(rng.integers(d)))
            chain = shortest_path_chain(u, v, d)
            assert int(chain.sum()) == toric_distance(u, v, d)
            expected = sorted({u, v}) if u != v else []
            assert vertices_of_syndrome(boundary(chain)) == expected


def test_shortest_path_spec_example():
    chain = shortest_path_chain((0, 0), (2, 3), 7)
    assert int(chain.sum()) == 5
    assert vertices_of_syndrome(boundary(chain)) == [(0, 0), (2, 3)]


def test_shortest_path_is_deterministic():
    a = shortest_path_chain((1, 6), (5, 2), 7)
    b = shortest_path_chain((1, 6), (5, 2), 7)
    assert (a == b).all()
