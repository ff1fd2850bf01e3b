import io
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opinionsim.graph import (PSTAR, CapExceededError, CounterexampleParams, Graph,
                              InfeasibleSizesError, disjoint_union, generate_complete,
                              generate_counterexample, generate_er, generate_line,
                              generate_random_regular, generate_star, graph_from_spec,
                              read_edge_list, resolve_sizes, validate_params,
                              write_edge_list)

BOUNDARY_VALUES = CounterexampleParams(mu=0.2, delta=0.2, eps1=1e-2, eps2=1e-6, d=1e-4)


def to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges())
    return h


# -- validate_params -------------------------------------------------------

def test_pstar_is_valid():
    report = validate_params(PSTAR)
    assert report.ok, str(report)
    # the tightest bound, by hand: eps1*delta*mu/4 = 0.089*0.45*0.4/4
    assert 0.089 * 0.45 * 0.4 / 4 == pytest.approx(0.004005)


def test_boundary_values_sit_on_the_d_boundary():
    report = validate_params(BOUNDARY_VALUES)
    assert report.names == ["d < ε₁δμ/4"]
    (v,) = report.violations
    assert v.lhs == v.rhs == pytest.approx(1e-4)


def test_eps1_too_large():
    report = validate_params(CounterexampleParams(0.2, 0.2, 0.03, 1e-7, 1e-5))
    assert report.names == ["ε₁ < δμ/2"]
    assert report.violations[0].rhs == pytest.approx(0.02)


@pytest.mark.parametrize("field,value,name", [
    ("mu", 0.5, "μ < 1/2"),
    ("delta", 1 / 6, "δ > 1/6"),
    ("delta", 0.1, "δ > 1/6"),
    ("eps2", 0.0, "ε₂ > 0"),
])
def test_named_range_violations(field, value, name):
    params = CounterexampleParams(**{**PSTAR.as_dict(), field: value})
    assert name in validate_params(params).names


def test_non_finite_is_reported_not_raised():
    params = CounterexampleParams(**{**PSTAR.as_dict(), "d": float("nan")})
    report = validate_params(params)
    assert not report.ok


def test_probabilities():
    ratio = 0.05 / 0.95
    assert PSTAR.p_ij == PSTAR.p_jp == pytest.approx(ratio + 0.089)
    assert PSTAR.p_ip == pytest.approx(ratio - 5e-4)


# -- resolve_sizes ---------------------------------------------------------

def test_sizes_pstar():
    s = resolve_sizes(PSTAR, 20000)
    assert s.as_tuple() == (7600, 2360, 400, 9560, 80)


def test_sizes_boundary_values():
    s = resolve_sizes(BOUNDARY_VALUES, 10**5)
    assert s.as_tuple() == (14000, 35995, 6000, 43995, 10)


def test_sizes_empty_graph():
    with pytest.raises(InfeasibleSizesError):
        resolve_sizes(PSTAR, 0)


def test_sizes_d_larger_than_j():
    # delta close to 1/2 empties J while d stays large
    params = CounterexampleParams(mu=0.49, delta=0.49, eps1=0.01, eps2=1e-6, d=0.2)
    with pytest.raises(InfeasibleSizesError):
        resolve_sizes(params, 1000)


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(0.05, 0.45), delta=st.floats(0.17, 0.45), d=st.floats(1e-4, 0.05),
       n=st.integers(100, 10**6))
def test_sizes_invariants(mu, delta, d, n):
    params = CounterexampleParams(mu, delta, 1e-3, 1e-6, d)
    try:
        s = resolve_sizes(params, n)
    except InfeasibleSizesError:
        return
    assert s.n == n
    assert s.size_I + s.size_J == s.size_O + s.size_P == (n - s.size_D) // 2
    assert (n - s.size_D) % 2 == 0
    assert s.size_I + s.size_O == math.floor(mu * n + 0.5 + 1e-9 * max(1, mu * n))
    assert 0 <= s.size_D <= s.size_J
    assert abs(s.size_D - d * n) <= 1.5
    assert min(s.as_tuple()) >= 0


# -- counterexample --------------------------------------------------------

def test_regular_exact_degrees(pstar_regular):
    g = pstar_regular
    into_i = g.count_into("I")
    s, e = g.blocks["P"]
    assert (into_i[s:e] == round(PSTAR.p_ip * 7600)).all()
    assert round(PSTAR.p_ip * 7600) == 396
    s, e = g.blocks["J"]
    assert (into_i[s:e] == round(PSTAR.p_ij * 7600)).all()
    assert round(PSTAR.p_ij * 7600) == 1076


def test_o_block_degree(pstar_regular, pstar_random):
    for g in (pstar_regular, pstar_random):
        s, e = g.blocks["O"]
        assert (g.degrees()[s:e] == 20000 - 80 - 1).all()


@pytest.mark.parametrize("mode", ["regular", "random"])
def test_counterexample_invariants(mode, pstar_regular, pstar_random):
    g = pstar_regular if mode == "regular" else pstar_random
    g.check_invariants(sample=400)


def test_small_counterexample_full_scan():
    g = generate_counterexample(PSTAR, 2000, "random", seed=3)
    g.check_invariants()
    h = to_nx(g)
    assert h.number_of_edges() == g.num_edges
    # every D vertex hangs off a distinct J vertex
    s, e = g.blocks["D"]
    js, je = g.blocks["J"]
    nbrs = [next(iter(h[v])) for v in range(s, e)]
    assert len(set(nbrs)) == e - s and all(js <= w < je for w in nbrs)


RANDOM_PAIRS = [("I", "J", "p_ij"), ("I", "P", "p_ip"), ("J", "P", "p_jp")]


@pytest.mark.parametrize("params,n", [
    (PSTAR, 20000),
    (CounterexampleParams(0.3, 0.3, 0.02, 1e-4, 0.01), 7919),
    (CounterexampleParams(0.45, 0.2, 0.005, 1e-6, 2e-4), 5003),
])
def test_regular_within_one(params, n):
    g = generate_counterexample(params, n, "regular")
    for x, y, attr in RANDOM_PAIRS:
        p = getattr(params, attr)
        for here, there in ((x, y), (y, x)):
            s, e = g.blocks[here]
            size = g.blocks[there][1] - g.blocks[there][0]
            counts = g.count_into(there)[s:e]
            assert np.abs(counts - p * size).max() <= 1, (here, there)


def test_random_mode_concentration(pstar_random):
    g = pstar_random
    for x, y, attr in RANDOM_PAIRS:
        p = getattr(PSTAR, attr)
        for here, there in ((x, y), (y, x)):
            s, e = g.blocks[here]
            size = g.blocks[there][1] - g.blocks[there][0]
            mean = g.count_into(there)[s:e].mean()
            sigma = math.sqrt(size * p * (1 - p))
            assert abs(mean - p * size) <= 4 * sigma


def test_random_mode_seed_determinism():
    a = generate_counterexample(PSTAR, 3000, "random", seed=9)
    b = generate_counterexample(PSTAR, 3000, "random", seed=9)
    c = generate_counterexample(PSTAR, 3000, "random", seed=10)
    assert (a.adj != b.adj).nnz == 0
    assert (a.adj != c.adj).nnz > 0


# -- generic generators ----------------------------------------------------

def test_er_extremes():
    assert generate_er(5, 0.0, 1).num_edges == 0
    k5 = generate_er(5, 1.0, 1)
    assert k5.num_edges == 10
    assert (k5.degrees() == 4).all()


def test_er_edge_count_moments():
    g = generate_er(2000, 0.5, seed=42)
    pairs = 2000 * 1999 // 2
    sigma = math.sqrt(pairs * 0.25)
    assert sigma == pytest.approx(706.93, abs=0.01)
    assert abs(g.num_edges - pairs * 0.5) <= 4 * sigma
    g.check_invariants(sample=200)


def test_er_seeded():
    a, b = generate_er(300, 0.1, 5), generate_er(300, 0.1, 5)
    assert (a.adj != b.adj).nnz == 0


def test_line():
    assert generate_line(1).num_edges == 0
    g = generate_line(13)
    assert g.num_edges == 12
    deg = g.degrees()
    assert (deg == 1).sum() == 2
    assert generate_line(3).degrees().tolist() == [1, 2, 1]


def test_star():
    assert generate_star(1).num_edges == 1
    assert generate_star(4).degree(0) == 4
    g = generate_star(1000)
    assert g.num_edges == 1000
    assert g.degrees()[1:].max() == 1


def test_random_regular():
    k4 = generate_random_regular(4, 3, seed=1)
    assert k4.num_edges == 6
    g = generate_random_regular(10, 3, seed=7)
    assert (g.degrees() == 3).all()
    g.check_invariants()
    assert (generate_random_regular(10, 3, 7).adj != g.adj).nnz == 0
    with pytest.raises(InfeasibleSizesError):
        generate_random_regular(5, 3)


def test_union():
    k3 = generate_complete(3)
    u = disjoint_union(k3, k3)
    assert (u.n, u.num_edges) == (6, 6)
    assert nx.number_connected_components(to_nx(u)) == 2
    g = generate_line(5)
    same = disjoint_union(g, Graph(0))
    assert same.n == 5 and list(same.edges()) == list(g.edges())
    mixed = disjoint_union(generate_star(4), generate_line(3))
    assert (mixed.n, mixed.num_edges) == (8, 6)


# -- implicit vs explicit bookkeeping --------------------------------------

def dense(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n), dtype=np.int64)
    for u, v in g.edges():
        a[u, v] = a[v, u] = 1
    return a


@st.composite
def small_graphs(draw):
    kind = draw(st.sampled_from(["line", "star", "complete", "er"]))
    if kind == "line":
        return generate_line(draw(st.integers(1, 9)))
    if kind == "star":
        return generate_star(draw(st.integers(1, 8)))
    if kind == "complete":
        return generate_complete(draw(st.integers(1, 8)))
    return generate_er(draw(st.integers(1, 9)), draw(st.floats(0, 1)), draw(st.integers(0, 99)))


@settings(max_examples=150, deadline=None)
@given(g1=small_graphs(), g2=small_graphs(), seed=st.integers(0, 1000))
def test_neighbor_sum_matches_dense(g1, g2, seed):
    g = disjoint_union(g1, g2)
    a = dense(g)
    assert (a == a.T).all() and np.trace(a) == 0
    assert a.sum() // 2 == g.num_edges
    x = np.random.default_rng(seed).integers(-3, 4, size=g.n)
    assert (g.neighbor_sum(x) == a @ x).all()
    masked = np.where(a == 1, x[None, :], x.min())
    expect = masked.max(axis=1) if g.n else masked
    assert (g.neighbor_max(x) == expect).all()
    for v in range(g.n):
        assert g.neighbors(v).tolist() == np.flatnonzero(a[v]).tolist()


def test_small_counterexample_matches_dense():
    g = generate_counterexample(PSTAR, 1200, "random", seed=1)
    a = dense(g)
    x = np.random.default_rng(0).integers(0, 2, g.n)
    assert (g.neighbor_sum(x) == a @ x).all()


# -- files -----------------------------------------------------------------

def test_edge_list_roundtrip():
    g = disjoint_union(generate_star(4), generate_line(3))
    buf = io.StringIO()
    write_edge_list(g, buf)
    text = buf.getvalue()
    lines = text.splitlines()
    assert lines[0] == "8 6"
    pairs = [tuple(map(int, l.split())) for l in lines[1:]]
    assert pairs == sorted(pairs) and all(u < v for u, v in pairs)
    back = read_edge_list(io.StringIO(text))
    assert list(back.edges()) == list(g.edges())


def test_edge_list_cap(pstar_regular):
    with pytest.raises(CapExceededError):
        write_edge_list(pstar_regular, io.StringIO())


@pytest.mark.parametrize("spec,n,m", [
    ({"type": "line", "n": 13}, 13, 12),
    ({"type": "star", "leaves": 4}, 5, 4),
    ({"type": "complete", "n": 4}, 4, 6),
    ({"type": "er", "n": 5, "p": 1.0, "seed": 1}, 5, 10),
    ({"type": "regular", "n": 4, "deg": 3, "seed": 2}, 4, 6),
    ({"type": "union", "parts": [{"type": "complete", "n": 3}, {"type": "complete", "n": 3}]}, 6, 6),
])
def test_graph_from_spec(spec, n, m):
    g = graph_from_spec(spec)
    assert (g.n, g.num_edges) == (n, m)


def test_graph_from_spec_counterexample_json():
    g = graph_from_spec('{"type": "counterexample", "n": 2000, "mode": "regular",'
                        ' "params": {"mu": 0.4, "delta": 0.45, "eps1": 0.089,'
                        ' "eps2": 0.0005, "d": 0.004}}')
    assert g.is_counterexample and g.meta["sizes"].as_tuple() == resolve_sizes(PSTAR, 2000).as_tuple()


def test_graph_from_spec_unknown():
    with pytest.raises(ValueError):
        graph_from_spec({"type": "hypercube"})
