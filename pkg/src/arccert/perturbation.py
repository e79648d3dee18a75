"""String-transformation DSL and programmable perturbation spaces.

A :class:`Transformation` pairs a match predicate over length-``s`` windows
with a replace function producing length-``t`` strings.  A
:class:`PerturbationSpace` applies each transformation up to its budget to
non-overlapping windows of the *original* string; replacement output is never
matched again.

Strings are tuples of integer symbol ids.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterator, Mapping, NamedTuple, Sequence

TokenString = tuple  # tuple[int, ...]

KINDS = ("substitute", "delete", "duplicate", "swap", "table")
WILDCARD_KINDS = ("duplicate", "swap")


@dataclass(frozen=True)
class Transformation:
    """A (match, replace) pair.

    ``rules`` maps each matchable window to the tuple of its replacements and
    is empty for the wildcard kinds (``duplicate``, ``swap``), which match
    every window.
    """

    kind: str
    s: int
    t: int
    rules: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transformation kind {self.kind!r}")
        if self.s < 1 or self.t < 0:
            raise ValueError(f"invalid sizes s={self.s}, t={self.t}")
        expected = {"substitute": (1, 1), "delete": (1, 0), "duplicate": (1, 2), "swap": (2, 2)}
        if self.kind in expected and (self.s, self.t) != expected[self.kind]:
            raise ValueError(f"{self.kind} requires (s, t) = {expected[self.kind]}")
        if self.kind in WILDCARD_KINDS and self.rules:
            raise ValueError(f"{self.kind} is a wildcard transformation and takes no rules")
        for window, outs in self.rules:
            if len(window) != self.s:
                raise ValueError(f"rule key {window} does not have length {self.s}")
            if not outs:
                raise ValueError(f"rule for {window} has no replacements")
            for out in outs:
                if len(out) != self.t:
                    raise ValueError(f"replacement {out} does not have length {self.t}")

    @classmethod
    def from_table(cls, kind: str, s: int, t: int, table: Mapping, name: str = "") -> "Transformation":
        rules = tuple(
            sorted((tuple(k), tuple(sorted(set(map(tuple, v))))) for k, v in table.items())
        )
        return cls(kind, s, t, rules, name)

    @classmethod
    def substitute(cls, table: Mapping[int, Sequence[int]], name: str = "sub") -> "Transformation":
        return cls.from_table("substitute", 1, 1, {(k,): [(w,) for w in v] for k, v in table.items()}, name)

    @classmethod
    def delete(cls, words, name: str = "del") -> "Transformation":
        return cls.from_table("delete", 1, 0, {(w,): [()] for w in words}, name)

    @classmethod
    def duplicate(cls, name: str = "dup") -> "Transformation":
        return cls("duplicate", 1, 2, (), name)

    @classmethod
    def swap(cls, name: str = "swap") -> "Transformation":
        return cls("swap", 2, 2, (), name)

    @cached_property
    def table(self) -> dict:
        return dict(self.rules)

    @property
    def is_wildcard(self) -> bool:
        return self.kind in WILDCARD_KINDS

    def match(self, window: TokenString) -> bool:
        window = tuple(window)
        if len(window) != self.s:
            raise ValueError(f"window length {len(window)} != domain size {self.s}")
        return self.is_wildcard or window in self.table

    def apply(self, window: TokenString) -> tuple:
        """Replacements of ``window`` (sorted); empty when it does not match."""
        window = tuple(window)
        if len(window) != self.s:
            raise ValueError(f"window length {len(window)} != domain size {self.s}")
        if self.kind == "duplicate":
            return ((window[0], window[0]),)
        if self.kind == "swap":
            return ((window[1], window[0]),)
        return self.table.get(window, ())

    def reversed(self) -> "Transformation":
        """Transformation acting on reversed strings (for backward passes)."""
        if self.is_wildcard:
            return self
        rules = tuple(
            sorted((k[::-1], tuple(sorted(o[::-1] for o in outs))) for k, outs in self.rules)
        )
        return Transformation(self.kind, self.s, self.t, rules, self.name)


def transform_apply(T: Transformation, window: TokenString) -> set:
    return set(T.apply(window))


class SpaceMetrics(NamedTuple):
    offset: int
    max_len: int
    decomposition_size: int


@dataclass(frozen=True)
class PerturbationSpace:
    items: tuple = ()  # ((Transformation, budget), ...)

    def __post_init__(self):
        items = tuple((T, int(d)) for T, d in self.items)
        for _, d in items:
            if d < 0:
                raise ValueError("budgets must be non-negative")
        object.__setattr__(self, "items", items)

    @property
    def transformations(self) -> tuple:
        return tuple(T for T, _ in self.items)

    @property
    def budgets(self) -> tuple:
        return tuple(d for _, d in self.items)

    def __len__(self):
        return len(self.items)

    def with_budgets(self, budgets: Sequence[int]) -> "PerturbationSpace":
        if len(budgets) != len(self.items):
            raise ValueError("budget vector length does not match the space")
        return PerturbationSpace(tuple(zip(self.transformations, budgets)))

    def is_empty(self) -> bool:
        return all(d == 0 for d in self.budgets)

    def reversed(self) -> "PerturbationSpace":
        return PerturbationSpace(tuple((T.reversed(), d) for T, d in self.items))

    def offset(self) -> int:
        return sum((T.t - T.s) * d for T, d in self.items)

    def __str__(self):
        inner = ", ".join(f"({T.name or T.kind}, {d})" for T, d in self.items)
        return "{" + inner + "}"


EMPTY = PerturbationSpace()


def budget_vectors(budgets: Sequence[int]) -> list[tuple]:
    """All componentwise-smaller budget vectors, lexicographic order."""
    return list(itertools.product(*(range(d + 1) for d in budgets)))


def decompose(S: PerturbationSpace) -> list[PerturbationSpace]:
    return [S.with_budgets(b) for b in budget_vectors(S.budgets)]


def reduce(S: PerturbationSpace, k: int) -> PerturbationSpace:
    """``S`` with the budget of its ``k``-th transformation (0-based) lowered by one."""
    b = list(S.budgets)
    if not 0 <= k < len(b):
        raise IndexError(f"transformation index {k} out of range")
    if b[k] < 1:
        raise ValueError(f"budget of transformation {k} is already exhausted")
    b[k] -= 1
    return S.with_budgets(b)


def subtract(S: PerturbationSpace, Sp: PerturbationSpace) -> PerturbationSpace:
    if S.transformations != Sp.transformations:
        raise ValueError("spaces are over different transformation lists")
    diff = [d - dp for d, dp in zip(S.budgets, Sp.budgets)]
    if any(v < 0 for v in diff):
        raise ValueError(f"{Sp} is not in the decomposition of {S}")
    return S.with_budgets(diff)


def space_metrics(S: PerturbationSpace, L: int) -> SpaceMetrics:
    size = 1
    for d in S.budgets:
        size *= d + 1
    grow = sum(max(T.t - T.s, 0) * d for T, d in S.items)
    return SpaceMetrics(S.offset(), L + grow, size)


def _tight_generator(S: PerturbationSpace, x: TokenString):
    """Yield ``S^=(x)`` derivations left to right (may repeat strings)."""
    Ts = S.transformations
    n, L = len(Ts), len(x)

    @lru_cache(maxsize=None)
    def feasible(j: int, rem: tuple) -> bool:
        if j == L:
            return not any(rem)
        if sum(r * Ts[k].s for k, r in enumerate(rem)) > L - j:
            return False
        if feasible(j + 1, rem):
            return True
        for k in range(n):
            if rem[k] and j + Ts[k].s <= L and Ts[k].match(x[j : j + Ts[k].s]):
                nxt = rem[:k] + (rem[k] - 1,) + rem[k + 1 :]
                if feasible(j + Ts[k].s, nxt):
                    return True
        return False

    def walk(j: int, rem: tuple) -> Iterator[tuple]:
        if j == L:
            yield ()
            return
        if feasible(j + 1, rem):
            for tail in walk(j + 1, rem):
                yield (x[j],) + tail
        for k in range(n):
            T = Ts[k]
            if rem[k] and j + T.s <= L:
                window = x[j : j + T.s]
                outs = T.apply(window)
                if not outs:
                    continue
                nxt = rem[:k] + (rem[k] - 1,) + rem[k + 1 :]
                if not feasible(j + T.s, nxt):
                    continue
                for tail in walk(j + T.s, nxt):
                    for w in outs:
                        yield w + tail

    if feasible(0, S.budgets):
        yield from walk(0, S.budgets)


def iter_space(S: PerturbationSpace, x: TokenString, tight: bool = False) -> Iterator[tuple]:
    """Distinct members of ``S(x)`` (or ``S^=(x)``) in a deterministic order.

    Non-tight iteration visits the tight subspaces in decomposition order, so
    ``x`` itself is always yielded first.
    """
    x = tuple(x)
    seen = set()
    spaces = [S] if tight else decompose(S)
    for sub in spaces:
        for z in _tight_generator(sub, x):
            if z not in seen:
                seen.add(z)
                yield z


def enumerate_space(S: PerturbationSpace, x: TokenString, tight: bool = False) -> set:
    """All perturbed strings of ``x`` as a set."""
    return set(iter_space(S, x, tight))
