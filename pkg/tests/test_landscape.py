import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marginlab.disorder import sample_ensemble, uniform_tau_grid
from marginlab.errors import CapExceededError, DomainError
from marginlab.landscape import (
    SignVector,
    TupleQuery,
    count_overlap_tuples_bruteforce,
    count_overlap_tuples_exact,
    discrepancy,
    enumerate_forbidden_tuples,
    enumerate_solutions,
    hamming,
    is_solution,
    overlap,
    overlap_band,
)
from marginlab.disorder import sample_disorder
from marginlab.thresholds import phi_count


def all_sign_vectors(n):
    for signs in itertools.product((1, -1), repeat=n):
        yield SignVector.from_signs(np.array(signs, dtype=np.int8))


def test_pack_unpack_roundtrip_various_sizes():
    rng = np.random.default_rng(0)
    for n in (1, 5, 8, 63, 64, 65, 200):
        signs = rng.choice([-1, 1], size=n).astype(np.int8)
        sv = SignVector.from_signs(signs)
        assert len(sv) == n
        assert np.array_equal(sv.signs(), signs)
        assert all(sv[j] == int(signs[j]) for j in range(n))


def test_flip_all_is_involution():
    sv = SignVector.from_signs(np.array([1, -1, -1, 1, 1], dtype=np.int8))
    assert np.array_equal(sv.flip_all().signs(), -sv.signs())
    assert sv.flip_all().flip_all() == sv


def test_lexicographic_order_puts_plus_first():
    # ascending mask order must equal lexicographic order on sign tuples
    # with +1 sorting before -1
    vecs = sorted(all_sign_vectors(4))
    keys = [tuple(0 if s > 0 else 1 for s in v.signs()) for v in vecs]
    assert keys == sorted(keys)
    assert np.array_equal(vecs[0].signs(), np.ones(4, dtype=np.int8))


def test_hamming_and_overlap():
    a = SignVector.from_signs(np.array([1, 1, 1, 1], dtype=np.int8))
    b = SignVector.from_signs(np.array([1, -1, 1, -1], dtype=np.int8))
    assert hamming(a, b) == 2
    assert overlap(a, b) == pytest.approx(0.0)
    assert overlap(a, a) == pytest.approx(1.0)
    assert overlap(a, a.flip_all()) == pytest.approx(-1.0)


def test_is_solution_matches_direct_margins():
    mat = sample_disorder(12, 0.5, seed=3)
    rng = np.random.default_rng(1)
    root_n = math.sqrt(12)
    for _ in range(20):
        signs = rng.choice([-1, 1], size=12).astype(np.int8)
        sv = SignVector.from_signs(signs)
        margins = mat.entries @ signs.astype(np.float64)
        assert is_solution(mat, sv, 1.0) == bool(np.max(np.abs(margins)) <= root_n)
        assert is_solution(mat, sv, 1.0, symmetric=False) == bool(
            np.min(margins) >= root_n
        )


def test_enumeration_matches_brute_force():
    for seed in (0, 1, 2):
        mat = sample_disorder(10, 0.3, seed=seed)
        got = enumerate_solutions(mat, 1.0)
        want = [sv for sv in all_sign_vectors(10) if is_solution(mat, sv, 1.0)]
        assert got == want  # same vectors, same lexicographic order


def test_enumeration_closed_under_negation():
    mat = sample_disorder(12, 0.4, seed=5)
    sols = set(enumerate_solutions(mat, 0.9))
    assert sols  # kappa = 0.9 leaves solutions at this size
    for sv in sols:
        assert sv.flip_all() in sols


def test_enumeration_cap():
    mat = sample_disorder(30, 0.2, seed=0)
    with pytest.raises(CapExceededError):
        enumerate_solutions(mat, 1.0)


def test_discrepancy_matches_brute_force():
    mat = sample_disorder(11, 0.4, seed=7)
    best, arg = discrepancy(mat)
    vals = {
        sv: float(np.max(np.abs(mat.entries @ sv.signs().astype(np.float64))))
        for sv in all_sign_vectors(11)
    }
    want = min(vals.values())
    assert best == pytest.approx(want, abs=1e-12)
    assert vals[arg] == pytest.approx(want, abs=1e-12)
    assert arg[0] == 1  # canonical representative from the +1 half


def test_overlap_band_integer_arithmetic():
    # band [beta - eta, beta] on overlaps maps to an integer window on
    # Hamming distances; verify against a direct scan
    for n, beta, eta in [(10, 0.6, 0.2), (12, 0.5, 1.0 / 6.0), (14, 6.0 / 7.0, 2.0 / 7.0)]:
        d_lo, d_hi = overlap_band(n, beta, eta)
        want = [d for d in range(n + 1)
                if beta - eta - 1e-12 <= 1.0 - 2.0 * d / n <= beta + 1e-12]
        assert list(range(d_lo, d_hi + 1)) == want


def test_overlap_band_rejects_non_integral():
    with pytest.raises(DomainError):
        overlap_band(10, 0.615, 0.2)


def test_exact_counts_match_brute_force_spot():
    for n, m, beta, eta in [
        (6, 2, 2.0 / 3.0, 1.0 / 3.0),
        (8, 2, 0.5, 0.25),
        (8, 3, 0.5, 0.25),
        (10, 3, 0.6, 0.2),
    ]:
        exact = count_overlap_tuples_exact(n, m, beta, eta)
        brute = count_overlap_tuples_bruteforce(n, m, beta, eta)
        assert exact == brute


def test_exact_count_two_is_closed_form():
    # ordered pairs: 2^n * sum of C(n, d) over the distance window
    n, beta, eta = 12, 0.5, 1.0 / 3.0
    d_lo, d_hi = overlap_band(n, beta, eta)
    want = (2 ** n) * sum(math.comb(n, d) for d in range(d_lo, d_hi + 1))
    assert count_overlap_tuples_exact(n, 2, beta, eta) == want


def test_count_growth_rate_tracks_entropy_functional():
    # log2 of the exact pair count per coordinate approaches the counting
    # part 1 + h((1 - beta + eta)/2) of the first-moment functional
    n, beta, eta = 2000, 0.6, 0.05
    count = count_overlap_tuples_exact(n, 2, beta, eta)
    rate = math.log2(count) / n
    target = phi_count(beta, eta, 2)
    assert rate == pytest.approx(target, abs=math.log2(n) / n + 1e-3)


def test_count_growth_rate_three_way():
    n, beta, eta = 600, 0.6, 0.1
    count = count_overlap_tuples_exact(n, 3, beta, eta)
    rate = math.log2(count) / n
    target = phi_count(beta, eta, 3)
    assert rate == pytest.approx(target, abs=4.0 * math.log2(n) / n)


def test_tuple_query_validation():
    with pytest.raises(DomainError):
        TupleQuery(m=1, beta=0.5, eta=0.1, kappa=1.0, tau_set=(0.0,))
    with pytest.raises(DomainError):
        TupleQuery(m=2, beta=0.5, eta=0.1, kappa=0.0, tau_set=(0.0,))
    with pytest.raises(DomainError):
        TupleQuery(m=2, beta=0.5, eta=0.1, kappa=1.0, tau_set=(0.5, 0.5))


def naive_forbidden_tuples(query, ensemble):
    n = ensemble.base.cols
    grid = list(ensemble.tau_grid)
    ids = [grid.index(t) for t in query.tau_set]
    pools = []
    for i in range(query.m):
        pool = set()
        for k in ids:
            pool.update(enumerate_solutions(ensemble.instance(i, k), query.kappa))
        pools.append(sorted(pool))
    lo = query.beta - query.eta - 1e-12
    hi = query.beta + 1e-12
    out = []
    for combo in itertools.product(*pools):
        ok = all(
            lo <= overlap(combo[i], combo[j]) <= hi
            for i in range(query.m) for j in range(i + 1, query.m)
        )
        if ok:
            out.append(combo)
    return out


def test_forbidden_tuples_match_naive_oracle():
    n = 8
    ens = sample_ensemble(n, 0.25, n_replicas=3, tau_grid=uniform_tau_grid(2), seed=13)
    for m, kappa in [(2, 0.7), (3, 0.9)]:
        query = TupleQuery(m=m, beta=0.5, eta=0.25, kappa=kappa,
                           tau_set=(0.0, math.pi / 4))
        got = enumerate_forbidden_tuples(query, ens)
        want = naive_forbidden_tuples(query, ens)
        assert got == want


def test_forbidden_tuples_cap():
    ens = sample_ensemble(20, 0.1, n_replicas=2, tau_grid=uniform_tau_grid(1), seed=0)
    query = TupleQuery(m=2, beta=0.5, eta=0.2, kappa=1.0, tau_set=(0.0,))
    with pytest.raises(CapExceededError):
        enumerate_forbidden_tuples(query, ens)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=24),
    b=st.data(),
)
def test_property_overlap_band_window(n, b):
    bn = b.draw(st.integers(min_value=2, max_value=n))
    en = b.draw(st.integers(min_value=1, max_value=bn - 1))
    beta = bn / n
    eta = en / n
    d_lo, d_hi = overlap_band(n, beta, eta)
    want = [d for d in range(n + 1)
            if beta - eta - 1e-12 <= 1.0 - 2.0 * d / n <= beta + 1e-12]
    if want:
        assert (d_lo, d_hi) == (want[0], want[-1])
    else:
        assert d_lo > d_hi


@settings(max_examples=30, deadline=None)
@given(
    n=st.integers(min_value=2, max_value=9),
    seeddata=st.data(),
)
def test_property_exact_equals_brute(n, seeddata):
    bn = seeddata.draw(st.integers(min_value=2, max_value=n))
    en = seeddata.draw(st.integers(min_value=1, max_value=bn - 1))
    m = seeddata.draw(st.sampled_from([2, 3]))
    beta, eta = bn / n, en / n
    assert (
        count_overlap_tuples_exact(n, m, beta, eta)
        == count_overlap_tuples_bruteforce(n, m, beta, eta)
    )
