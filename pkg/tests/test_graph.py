import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from bitovernet.errors import ConnectivityError, ParameterError, ParseError
from bitovernet.graph import (
    BERNOULLI,
    Graph,
    diameter,
    eccentricities,
    eccentricity,
    gen_evolutionary_random,
    gen_random,
    gen_scale_free,
    in_degree_histogram,
    measure_diameter,
    radius,
    read_edgelist,
    sampled_diameter,
    write_edgelist,
)


def from_pairs(n, pairs):
    pairs = list(pairs)
    src = np.array([a for a, _ in pairs], dtype=np.int64)
    dst = np.array([b for _, b in pairs], dtype=np.int64)
    return Graph(n, src, dst)


# --- construction ----------------------------------------------------------------

def test_graph_rejects_self_loops_and_duplicates():
    with pytest.raises(ParameterError):
        from_pairs(3, [(1, 1)])
    with pytest.raises(ParameterError):
        from_pairs(3, [(1, 0), (0, 1)])
    with pytest.raises(ParameterError):
        from_pairs(3, [(3, 0)])


def test_graph_arrays_are_read_only():
    g = gen_evolutionary_random(20, 3, seed=0)
    with pytest.raises(ValueError):
        g.initiator[0] = 5


def test_random_extremes():
    k5 = gen_random(5, 1.0, seed=3)
    assert k5.num_edges == 10
    assert diameter(k5) == 1
    assert gen_random(5, 0.0, seed=3).num_edges == 0


def test_random_rejects_bad_probability():
    with pytest.raises(ParameterError):
        gen_random(5, 1.5)


def test_random_mean_degree_matches_binomial():
    n, p = 1000, 0.016
    means = [gen_random(n, p, seed=s).degree().mean() for s in range(1, 101)]
    expected = p * (n - 1)
    se = np.std(means, ddof=1) / np.sqrt(len(means))
    assert abs(np.mean(means) - expected) <= 3 * se


def test_scale_free_seed_clique():
    g = gen_scale_free(4, 3, seed=11)
    assert g.num_edges == 6
    assert diameter(g) == 1


def test_scale_free_edge_count():
    assert gen_scale_free(100, 8, seed=7).num_edges == 36 + 91 * 8 == 764


def test_scale_free_rejects_small_n():
    with pytest.raises(ParameterError):
        gen_scale_free(3, 3)


def test_scale_free_tail_prefers_power_law():
    from bitovernet.fitting import fit_poisson, fit_power_law

    k = gen_scale_free(10_000, 8, seed=1).in_degree()
    assert fit_power_law(k, k_min=8).loglik > fit_poisson(k, k_min=8).loglik


def test_fixed_m_small_is_complete():
    g = gen_evolutionary_random(9, 8, seed=5)
    assert g.num_edges == 36
    assert diameter(g) == 1
    assert in_degree_histogram(g).counts == {k: 1 for k in range(9)}


def test_fixed_m_edge_count():
    expected = sum(min(j, 8) for j in range(1, 1000))
    assert expected == 36 + 991 * 8 == 7964
    assert gen_evolutionary_random(1000, 8, seed=1).num_edges == expected


@given(st.integers(1, 300), st.integers(1, 12), st.integers(0, 2**31))
def test_fixed_m_out_degree_and_connectivity(n, m, seed):
    g = gen_evolutionary_random(n, m, seed)
    assert np.array_equal(g.out_degree(), np.minimum(np.arange(n), m))
    assert np.all(g.target < g.initiator)
    # every joiner links back to an older node, so the graph is connected
    assert oracles.bfs(oracles.adjacency(n, g.edges), 0).count(-1) == 0


@given(st.sampled_from(["random", "scale-free", "fixed-m", "bernoulli"]), st.integers(0, 2**31))
def test_generators_are_deterministic(kind, seed):
    make = {
        "random": lambda s: gen_random(60, 0.1, s),
        "scale-free": lambda s: gen_scale_free(60, 3, s),
        "fixed-m": lambda s: gen_evolutionary_random(60, 3, s),
        "bernoulli": lambda s: gen_evolutionary_random(60, 3, s, BERNOULLI),
    }[kind]
    assert make(seed).same_edges(make(seed))


def test_bernoulli_variant_mean_out_degree():
    n, m = 2000, 4
    outs = np.mean([gen_evolutionary_random(n, m, s, BERNOULLI).out_degree() for s in range(20)], axis=0)
    expected = np.minimum(1.0, m / np.maximum(np.arange(n), 1)) * np.arange(n)
    assert abs(outs[m + 1:].mean() - expected[m + 1:].mean()) < 0.05


# --- degree histogram ---------------------------------------------------------------

def test_histogram_of_empty_graph():
    h = in_degree_histogram(from_pairs(5, []))
    assert h.counts == {0: 5}


def test_histogram_peak_matches_model_peak():
    from bitovernet.analytic import ModelParams, degree_pmf

    g = gen_evolutionary_random(1000, 8, seed=1)
    h = in_degree_histogram(g)
    assert sum(h.counts.values()) == 1000
    model_peak = int(np.argmax(degree_pmf(ModelParams(1000, 8)).probabilities))
    assert abs(max(h.counts, key=h.counts.get) - model_peak) <= 3
    # counted with the m initiated links, the mode sits next to m
    total = np.bincount(g.degree())
    assert 8 - 3 <= int(np.argmax(total)) <= 8 + 3


def test_histogram_csv():
    buf = io.StringIO()
    in_degree_histogram(gen_evolutionary_random(9, 8, seed=0)).to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,count,fraction"
    assert lines[1] == "0,1,0.1111111111111111"


# --- distances -----------------------------------------------------------------------

def test_path_and_star_eccentricities():
    path = from_pairs(3, oracles.path_edges(2))
    assert eccentricity(path, 1) == 1
    assert eccentricity(path, 0) == 2
    assert radius(path) == 1
    star = from_pairs(6, oracles.star_edges(5))
    assert eccentricity(star, 0) == 1
    assert eccentricity(star, 3) == 2
    assert radius(star) == 1


@pytest.mark.parametrize("length", [1, 2, 7, 70, 130])
def test_path_diameter(length):
    # long paths exercise more than one 64-source word in the bit-parallel BFS
    assert diameter(from_pairs(length + 1, oracles.path_edges(length))) == length


def test_complete_graph_diameter():
    assert diameter(from_pairs(12, oracles.complete_edges(12))) == 1


def test_disconnected_graph_names_unreachable_node():
    g = from_pairs(4, [(1, 0)])
    with pytest.raises(ConnectivityError) as exc:
        diameter(g)
    assert exc.value.node in (2, 3)
    with pytest.raises(ConnectivityError):
        eccentricity(g, 0)


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(1, 200))
    parents = [draw(st.integers(0, j - 1)) for j in range(1, n)]
    pairs = {(j, p) for j, p in zip(range(1, n), parents)}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n))
    for a, b in extra:
        if a != b and (a, b) not in pairs and (b, a) not in pairs:
            pairs.add((a, b))
    return n, sorted(pairs)


@given(connected_graphs())
def test_eccentricities_match_brute_force(case):
    n, pairs = case
    g = from_pairs(n, pairs)
    expected = oracles.all_pairs_eccentricities(n, pairs)
    assert eccentricities(g).tolist() == expected
    assert diameter(g) == max(expected)
    assert radius(g) <= diameter(g) <= 2 * radius(g)


@given(connected_graphs(), st.integers(0, 1000))
def test_sampled_diameter_is_lower_bound(case, seed):
    n, pairs = case
    g = from_pairs(n, pairs)
    assert sampled_diameter(g, 8, seed) <= diameter(g)


def test_measure_diameter_modes():
    g = gen_evolutionary_random(500, 8, seed=2)
    assert measure_diameter(g) == (diameter(g), True)
    assert measure_diameter(g, mode="sampled", seed=1).exact is False
    with pytest.raises(ParameterError):
        measure_diameter(g, mode="bogus")


def test_mean_diameter_at_thousand_nodes():
    d = [diameter(gen_evolutionary_random(1000, 8, seed=s)) for s in range(100)]
    assert abs(np.mean(d) - 4.0) <= 1.0


# --- serialization ---------------------------------------------------------------------

@given(st.integers(1, 80), st.integers(1, 6), st.integers(0, 2**31))
def test_edgelist_round_trip(n, m, seed):
    g = gen_evolutionary_random(n, m, seed)
    buf = io.StringIO()
    write_edgelist(g, buf)
    assert buf.getvalue().splitlines()[0] == f"{n} {m} fixed-m {seed}"
    back = read_edgelist(io.StringIO(buf.getvalue()))
    assert back.same_edges(g) and back.m == m and back.seed == seed


def test_edgelist_parse_errors_carry_line():
    with pytest.raises(ParseError, match="line 3"):
        read_edgelist(io.StringIO("3 1 fixed-m 0\n1 0\n2 x\n"))
    with pytest.raises(ParseError, match="line 1"):
        read_edgelist(io.StringIO("3 1\n"))
