import random

import pytest
from hypothesis import given, settings, strategies as st

from arccert.perturbation import (
    EMPTY,
    PerturbationSpace,
    Transformation,
    decompose,
    enumerate_space,
    iter_space,
    reduce,
    space_metrics,
    subtract,
    transform_apply,
)

from helpers import brute_force_strings, random_input, random_space

# running-example vocabulary ids
TO, THE, MOVIE, FILM, MOVIES = range(5)
T_DEL = Transformation.delete([TO, THE])
T_SUB = Transformation.substitute({MOVIE: [FILM, MOVIES]})
X = (TO, THE, MOVIE)


def words(text):
    ids = {"to": TO, "the": THE, "movie": MOVIE, "film": FILM, "movies": MOVIES}
    return tuple(ids[w] for w in text.split())


class TestTransformApply:
    def test_delete_matches_stopword(self):
        assert transform_apply(T_DEL, (THE,)) == {()}

    def test_substitute_returns_synonyms(self):
        assert transform_apply(T_SUB, (MOVIE,)) == {(FILM,), (MOVIES,)}

    def test_substitute_no_match(self):
        assert transform_apply(T_SUB, (TO,)) == set()

    def test_wrong_window_length(self):
        with pytest.raises(ValueError):
            transform_apply(T_SUB, (TO, THE))

    def test_wildcards(self):
        assert transform_apply(Transformation.duplicate(), (7,)) == {(7, 7)}
        assert transform_apply(Transformation.swap(), (1, 2)) == {(2, 1)}

    def test_generic_table(self):
        T = Transformation.from_table("table", 2, 1, {(TO, THE): [(THE,)]})
        assert transform_apply(T, (TO, THE)) == {(THE,)}
        assert transform_apply(T, (THE, TO)) == set()

    def test_rejects_ragged_rules(self):
        with pytest.raises(ValueError):
            Transformation.from_table("table", 1, 1, {(TO,): [(THE, THE)]})


class TestAlgebra:
    def test_decompose_single(self):
        S = PerturbationSpace(((T_DEL, 2),))
        assert [D.budgets for D in decompose(S)] == [(0,), (1,), (2,)]

    def test_decompose_pair(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        bs = [D.budgets for D in decompose(S)]
        assert bs == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_decompose_empty(self):
        assert decompose(EMPTY) == [EMPTY]

    def test_reduce(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        assert reduce(S, 0).budgets == (0, 1)
        assert reduce(PerturbationSpace(((T_DEL, 2),)), 0).budgets == (1,)
        assert reduce(S, 0) in decompose(S)

    def test_reduce_exhausted(self):
        with pytest.raises(ValueError):
            reduce(PerturbationSpace(((T_DEL, 0),)), 0)

    def test_subtract(self):
        S = PerturbationSpace(((T_DEL, 2), (T_SUB, 1)))
        assert subtract(S, S.with_budgets((1, 0))).budgets == (1, 1)
        assert subtract(S, S).budgets == (0, 0)
        assert subtract(S, S.with_budgets((0, 0))) == S

    def test_subtract_errors(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        with pytest.raises(ValueError):
            subtract(S, S.with_budgets((2, 0)))
        with pytest.raises(ValueError):
            subtract(S, PerturbationSpace(((T_SUB, 1), (T_DEL, 1))))

    def test_metrics(self):
        assert space_metrics(PerturbationSpace(((T_DEL, 1),)), 3).offset == -1
        assert space_metrics(PerturbationSpace(((Transformation.duplicate(), 2),)), 3).max_len == 5
        assert space_metrics(PerturbationSpace(((T_DEL, 2),)), 3).decomposition_size == 3

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            PerturbationSpace(((T_DEL, -1),))


class TestEnumerate:
    # frozen from brute_force_strings, an independent per-position labelling oracle
    NINE = {
        "to the movie", "to the film", "to the movies", "the movie", "to movie",
        "the film", "the movies", "to film", "to movies",
    }
    TIGHT = {"the film", "the movies", "to film", "to movies"}

    def test_running_example(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        got = enumerate_space(S, X)
        assert got == {words(s) for s in self.NINE}
        assert got == brute_force_strings(S, X)

    def test_running_example_tight(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        got = enumerate_space(S, X, tight=True)
        assert got == {words(s) for s in self.TIGHT}
        assert got == brute_force_strings(S, X, tight=True)

    def test_empty_space(self):
        assert enumerate_space(EMPTY, X) == {X}
        assert enumerate_space(EMPTY, ()) == {()}

    def test_order_is_deterministic_and_starts_with_x(self):
        S = PerturbationSpace(((T_DEL, 1), (T_SUB, 1)))
        a, b = list(iter_space(S, X)), list(iter_space(S, X))
        assert a == b and a[0] == X and len(a) == len(set(a))

    def test_infeasible_tight_is_empty(self):
        S = PerturbationSpace(((T_SUB, 2),))
        assert enumerate_space(S, X, tight=True) == set()

    def test_outputs_never_rematched(self):
        # duplicating "a" then swapping the copies would need to re-match an output
        S = PerturbationSpace(((Transformation.duplicate(), 1), (Transformation.swap(), 1)))
        got = enumerate_space(S, (1, 2))
        assert got == {(1, 2), (1, 1, 2), (1, 2, 2), (2, 1)}

    def test_windows_do_not_overlap(self):
        S = PerturbationSpace(((Transformation.swap(), 2),))
        # (1,2,3): swapping (1,2) and (2,3) together would overlap at 2
        assert enumerate_space(S, (1, 2, 3)) == {(1, 2, 3), (2, 1, 3), (1, 3, 2)}


SEEDS = st.integers(min_value=0, max_value=10**6)


def _case(seed, L_max=5):
    rng = random.Random(seed)
    V = rng.randint(2, 6)
    return random_space(rng, V), random_input(rng, V, L_max)


@settings(max_examples=150, deadline=None)
@given(SEEDS)
def test_matches_bruteforce_oracle(seed):
    S, x = _case(seed)
    assert enumerate_space(S, x) == brute_force_strings(S, x)
    assert enumerate_space(S, x, tight=True) == brute_force_strings(S, x, tight=True)


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_union_of_tight_subspaces(seed):
    S, x = _case(seed)
    union = set().union(*(enumerate_space(D, x, tight=True) for D in decompose(S)))
    assert enumerate_space(S, x) == union


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_lengths(seed):
    S, x = _case(seed)
    for D in decompose(S):
        assert all(len(z) == len(x) + D.offset() for z in enumerate_space(D, x, tight=True))
    bound = space_metrics(S, len(x)).max_len
    assert all(len(z) <= bound for z in enumerate_space(S, x))


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_decompose_count_and_distinct(seed):
    S, _ = _case(seed)
    D = decompose(S)
    assert len(D) == space_metrics(S, 0).decomposition_size == len(set(D))
    assert EMPTY.with_budgets(()) == EMPTY
    assert S in D and S.with_budgets([0] * len(S)) in D


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_subtract_roundtrip(seed):
    S, _ = _case(seed)
    for Sp in decompose(S):
        R = subtract(S, Sp)
        assert tuple(a + b for a, b in zip(R.budgets, Sp.budgets)) == S.budgets


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_monotone_in_budgets(seed):
    S, x = _case(seed)
    full = enumerate_space(S, x)
    for Sp in decompose(S):
        assert enumerate_space(Sp, x) <= full


@settings(max_examples=100, deadline=None)
@given(SEEDS, st.randoms(use_true_random=False))
def test_item_order_irrelevant(seed, rnd):
    S, x = _case(seed)
    items = list(S.items)
    rnd.shuffle(items)
    assert enumerate_space(PerturbationSpace(tuple(items)), x) == enumerate_space(S, x)


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_x_membership(seed):
    S, x = _case(seed)
    assert x in enumerate_space(S, x)
    assert (x in enumerate_space(S, x, tight=True)) or any(S.budgets)
