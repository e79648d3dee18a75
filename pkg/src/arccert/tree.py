"""TreeLSTM certification over binary constituency trees.

Tree perturbation spaces reuse :class:`PerturbationSpace` with three kinds of
transformation, all acting on leaves of the original tree:

* ``substitute`` replaces a leaf word,
* ``duplicate`` turns a leaf into a node with two copies of the leaf,
* ``delete`` removes a stop-word leaf; its sibling takes the parent's place.

Every leaf takes at most one transformation.  Budgets are shared by the whole
tree.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .cert import CertResult, SpaceTooLargeError, max_enum
from .interval import Box, join_all
from .model import ArchitectureError, ModelBundle, lstm_cell, lstm_cell_abs, trlstm_cell, trlstm_cell_abs
from .perturbation import PerturbationSpace, budget_vectors

TREE_KINDS = ("substitute", "duplicate", "delete")


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Tree:
    word: int | None = None
    left: "Tree | None" = None
    right: "Tree | None" = None

    def __post_init__(self):
        leaf = self.word is not None and self.left is None and self.right is None
        node = self.word is None and self.left is not None and self.right is not None
        if not (leaf or node):
            raise TreeError("a node is either a leaf with a word or has exactly two children")

    @classmethod
    def leaf(cls, word: int) -> "Tree":
        return cls(word=word)

    @classmethod
    def node(cls, left: "Tree", right: "Tree") -> "Tree":
        return cls(left=left, right=right)

    @property
    def is_leaf(self) -> bool:
        return self.word is not None

    @cached_property
    def size(self) -> int:
        """Number of leaves."""
        return 1 if self.is_leaf else self.left.size + self.right.size

    def leaves(self) -> list:
        if self.is_leaf:
            return [self.word]
        return self.left.leaves() + self.right.leaves()

    def postorder(self) -> Iterator["Tree"]:
        if not self.is_leaf:
            yield from self.left.postorder()
            yield from self.right.postorder()
        yield self

    def sexpr(self, itos: Sequence[str] | None = None) -> str:
        if self.is_leaf:
            return itos[self.word] if itos is not None else str(self.word)
        return f"({self.left.sexpr(itos)} {self.right.sexpr(itos)})"

    def __str__(self):
        return self.sexpr()


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_sexpr(text: str):
    """Parse ``((to the) movie)`` into nested lists/strings; binary nodes only."""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise TreeError("empty tree")
    pos = 0

    def walk():
        nonlocal pos
        if pos >= len(tokens):
            raise TreeError("unexpected end of tree")
        tok = tokens[pos]
        pos += 1
        if tok == ")":
            raise TreeError(f"unexpected ')' at token {pos}")
        if tok != "(":
            return tok
        kids = []
        while pos < len(tokens) and tokens[pos] != ")":
            kids.append(walk())
        if pos >= len(tokens):
            raise TreeError("unbalanced parentheses")
        pos += 1
        if len(kids) != 2:
            raise TreeError(f"node with {len(kids)} children; trees must be strictly binary")
        return kids

    out = walk()
    if pos != len(tokens):
        raise TreeError(f"trailing input after token {pos}")
    return out


def parse_tree(text: str, vocab: dict) -> Tree:
    def build(n):
        if isinstance(n, str):
            if n not in vocab:
                raise KeyError(f"unknown token {n!r}")
            return Tree.leaf(vocab[n])
        return Tree.node(build(n[0]), build(n[1]))

    return build(parse_sexpr(text))


def check_tree_space(S: PerturbationSpace):
    kinds = [T.kind for T in S.transformations]
    for k in kinds:
        if k not in TREE_KINDS:
            raise ValueError(f"transformation kind {k!r} is not defined on trees")
    if kinds.count("delete") > 1:
        raise ValueError("tree spaces allow at most one delete transformation")


def deletable(u: Tree, delta: int, stopwords) -> bool:
    return u.size <= delta and all(w in stopwords for w in u.leaves())


# -- enumeration oracle -----------------------------------------------------

_KEEP = ("keep",)


def _leaf_options(word: int, S: PerturbationSpace) -> list:
    opts = [(None, _KEEP)]
    for k, (T, d) in enumerate(S.items):
        if d < 1 or not T.match((word,)):
            continue
        if T.kind == "substitute":
            opts.extend((k, ("sub", w[0])) for w in T.apply((word,)))
        elif T.kind == "duplicate":
            opts.append((k, ("dup",)))
        else:
            opts.append((k, ("del",)))
    return opts


def _build(t: Tree, ops: list, pos: list) -> Tree | None:
    """Apply per-leaf ops (consumed left to right); ``None`` if fully deleted."""
    if t.is_leaf:
        op = ops[pos[0]]
        pos[0] += 1
        if op[0] == "keep":
            return t
        if op[0] == "sub":
            return Tree.leaf(op[1])
        if op[0] == "dup":
            return Tree.node(t, t)
        return None
    left = _build(t.left, ops, pos)
    right = _build(t.right, ops, pos)
    if left is None:
        return right
    if right is None:
        return left
    return Tree.node(left, right)


def iter_trees(S: PerturbationSpace, t: Tree, tight: bool = False) -> Iterator[Tree]:
    """Distinct perturbed trees: every per-leaf assignment within budget."""
    check_tree_space(S)
    leaves = t.leaves()
    options = [_leaf_options(w, S) for w in leaves]
    budgets = S.budgets
    seen = set()
    used = [0] * len(budgets)
    chosen = []

    def rec(p):
        if p == len(leaves):
            if tight and list(budgets) != used:
                return
            tree = _build(t, chosen, [0])
            if tree is not None and tree not in seen:
                seen.add(tree)
                yield tree
            return
        for k, op in options[p]:
            if k is not None:
                if used[k] >= budgets[k]:
                    continue
                used[k] += 1
            chosen.append(op)
            yield from rec(p + 1)
            chosen.pop()
            if k is not None:
                used[k] -= 1

    yield from rec(0)


def enumerate_trees(S: PerturbationSpace, t: Tree, tight: bool = False, cap: int | None = None) -> set:
    cap = max_enum() if cap is None else cap
    out = set()
    for tree in iter_trees(S, t, tight):
        out.add(tree)
        if len(out) > cap:
            raise SpaceTooLargeError(f"tree perturbation space has more than {cap} trees")
    return out


# -- concrete evaluation ----------------------------------------------------


def tree_state(model: ModelBundle, t: Tree) -> np.ndarray:
    if t.is_leaf:
        return lstm_cell(model.lstm, model.embeddings[t.word], model.h0)
    return trlstm_cell(model.treelstm, tree_state(model, t.left), tree_state(model, t.right))


def _check_tree_model(model: ModelBundle):
    if model.arch != "treelstm":
        raise ArchitectureError(f"tree certification needs a treelstm model, got {model.arch}")


# -- memoized equations -----------------------------------------------------


def _sub(b, bp):
    return tuple(x - y for x, y in zip(b, bp))


class _TreeEquations:
    """Bottom-up node maps ``budget vector -> value`` for one tree.

    ``leaf_sub``, ``leaf_dup``, ``merge`` and ``join`` supply the value domain,
    so the same recurrence fills concrete state sets and abstract boxes.
    """

    def __init__(self, S: PerturbationSpace):
        check_tree_space(S)
        self.S = S
        self.vectors = budget_vectors(S.budgets)
        kinds = [T.kind for T in S.transformations]
        self.kdel = kinds.index("delete") if "delete" in kinds else None
        self.stopwords = set()
        if self.kdel is not None:
            self.stopwords = {w[0] for w, _ in S.transformations[self.kdel].rules}

    def leaf_map(self, u: Tree, base, leaf_sub, leaf_dup) -> dict:
        zero = tuple(0 for _ in self.S.items)
        out = {zero: base}
        for k, (T, d) in enumerate(self.S.items):
            if d < 1 or not T.match((u.word,)):
                continue
            e = tuple(int(i == k) for i in range(len(self.S.items)))
            if T.kind == "substitute":
                out[e] = leaf_sub(T.apply((u.word,)))
            elif T.kind == "duplicate":
                out[e] = leaf_dup(base)
        return out

    def node_map(self, v: Tree, left: dict, right: dict, merge, join) -> dict:
        out = {}
        for b in self.vectors:
            parts = []
            for bp in budget_vectors(b):
                l, r = left.get(bp), right.get(_sub(b, bp))
                if l is not None and r is not None:
                    parts.append(merge(l, r))
            if self.kdel is not None:
                for gone, kept in ((v.left, right), (v.right, left)):
                    if deletable(gone, b[self.kdel], self.stopwords):
                        rest = b[: self.kdel] + (b[self.kdel] - gone.size,) + b[self.kdel + 1 :]
                        if rest in kept:
                            parts.append(kept[rest])
            if parts:
                out[b] = join(parts)
        return out


@dataclass
class TreeAbstractResult:
    hull: Box
    node_maps: list  # [(node, {budget: Box})] in postorder
    cells: int


def tree_abstract_final(model: ModelBundle, t: Tree, S: PerturbationSpace) -> TreeAbstractResult:
    _check_tree_model(model)
    eq = _TreeEquations(S)
    cells = 0
    h0 = Box.point(model.h0)

    def cell(xbox):
        nonlocal cells
        cells += 1
        return lstm_cell_abs(model.lstm, xbox, h0)

    def merge(l, r):
        nonlocal cells
        cells += 1
        return trlstm_cell_abs(model.treelstm, l, r)

    maps = {}
    ordered = []
    for u in _postorder_nodes(t):
        if u.is_leaf:
            base = cell(Box.point(model.embeddings[u.word]))
            m = eq.leaf_map(u, base, lambda outs: cell(model.embed_abs(outs)[0]), lambda h: merge(h, h))
        else:
            m = eq.node_map(u, maps[id(u.left)], maps[id(u.right)], merge, join_all)
        maps[id(u)] = m
        ordered.append((u, m))
    root = maps[id(t)]
    hull = join_all([root[b] for b in eq.vectors if b in root])
    return TreeAbstractResult(hull, ordered, cells)


def tree_concrete_final(model: ModelBundle, t: Tree, S: PerturbationSpace) -> dict:
    """Perturbed tree -> root state, computed through the node-map recurrence."""
    _check_tree_model(model)
    eq = _TreeEquations(S)
    p = model.treelstm

    def leaf_state(w):
        return lstm_cell(model.lstm, model.embeddings[w], model.h0)

    def merge(l, r):
        return {Tree.node(a, b): trlstm_cell(p, sa, sb) for a, sa in l.items() for b, sb in r.items()}

    def join(parts):
        out = {}
        for d in parts:
            for k, v in d.items():
                out.setdefault(k, v)
        return out

    maps = {}
    for u in _postorder_nodes(t):
        if u.is_leaf:
            base = {u: leaf_state(u.word)}
            m = eq.leaf_map(
                u, base,
                lambda outs: {Tree.leaf(w[0]): leaf_state(w[0]) for w in outs},
                lambda h: merge(h, h),
            )
        else:
            m = eq.node_map(u, maps[id(u.left)], maps[id(u.right)], merge, join)
        maps[id(u)] = m
    root = maps[id(t)]
    return join([root[b] for b in eq.vectors if b in root])


def _postorder_nodes(t: Tree) -> list:
    # identical subtrees compare equal, so walk by object identity
    out = []

    def walk(u):
        if not u.is_leaf:
            walk(u.left)
            walk(u.right)
        out.append(u)

    walk(t)
    return out


def certify_tree(model: ModelBundle, t: Tree, y: int, S: PerturbationSpace) -> CertResult:
    res = tree_abstract_final(model, t, S)
    margin = model.margin_upper(res.hull, y)
    return CertResult(margin < 0, margin, res.cells, res.hull)


def tree_exhaustive_check(model: ModelBundle, t: Tree, y: int, S: PerturbationSpace, cap: int | None = None):
    """``(robust, first misclassified tree)`` over the enumerated space."""
    _check_tree_model(model)
    trees = list(iter_trees(S, t))
    cap = max_enum() if cap is None else cap
    if len(trees) > cap:
        raise SpaceTooLargeError(f"tree perturbation space has more than {cap} trees")
    for tree in trees:
        if model.predict_state(tree_state(model, tree)) != y:
            return False, tree
    return True, None


def tree_attack_search(model: ModelBundle, t: Tree, y: int, S: PerturbationSpace, budget: int = 1000):
    if budget < 1:
        raise ValueError("budget must be >= 1")
    _check_tree_model(model)
    for n, tree in enumerate(iter_trees(S, t)):
        if n >= budget:
            break
        if model.predict_state(tree_state(model, tree)) != y:
            return tree
    return None
