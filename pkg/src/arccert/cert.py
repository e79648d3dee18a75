"""Memoized prefix-state certification for LSTM and BiLSTM classifiers.

Entries of a :class:`StateTable` are keyed by ``(i, j, b)``: perturbed prefix
length ``i``, original prefix length ``j`` and the budget vector ``b`` of a
tight subspace.  An entry holds the states of every string obtained from
``x[:j]`` by applying each transformation exactly ``b[k]`` times and whose
length is ``i``.  Concrete tables store exact states keyed by the perturbed
string; abstract tables store one :class:`Box` per entry.
"""
from __future__ import annotations

import os
import random
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .interval import Box, concat, join, join_all
from .model import ArchitectureError, LstmParams, ModelBundle, lstm_cell, lstm_cell_abs
from .perturbation import PerturbationSpace, budget_vectors, iter_space, space_metrics

DEFAULT_MAX_ENUM = 10**6


class SpaceTooLargeError(RuntimeError):
    pass


def max_enum() -> int:
    return int(os.environ.get("ARC_MAX_ENUM", DEFAULT_MAX_ENUM))


# -- tables -----------------------------------------------------------------


@dataclass
class StateSet:
    """Distinct perturbed strings and their states (one row per string)."""

    strings: list
    states: np.ndarray

    def as_dict(self) -> dict:
        return dict(zip(self.strings, self.states))

    def __len__(self):
        return len(self.strings)


@dataclass
class StateTable:
    mode: str  # "concrete" or "abstract"
    entries: dict = field(default_factory=dict)

    def get(self, key):
        return self.entries.get(key)

    def __contains__(self, key):
        return key in self.entries

    def __len__(self):
        return len(self.entries)

    def final(self, L: int, b: tuple):
        """Entries ``(i, L, b)`` for increasing ``i``."""
        return [v for (i, j, bb), v in sorted(self.entries.items(), key=lambda kv: kv[0][0]) if j == L and bb == b]


@dataclass
class CertResult:
    certified: bool
    margin_upper: float
    cells_evaluated: int
    final_hull: Box

    def to_json(self) -> dict:
        return {
            "certified": self.certified,
            "margin_upper": self.margin_upper,
            "cells_evaluated": self.cells_evaluated,
        }


@dataclass
class AbstractFinal:
    hull: Box
    table: StateTable
    cells: int
    backward_table: StateTable | None = None


def feasible_length(S_sub: PerturbationSpace, j: int) -> int | None:
    """The only perturbed length a tight subspace can reach from ``x[:j]``."""
    if j < 0:
        raise ValueError("j must be non-negative")
    i = j + S_sub.offset()
    return i if i >= 0 else None


def _offset(Ts, b) -> int:
    return sum((T.t - T.s) * d for T, d in zip(Ts, b))


def _down(b: tuple, k: int) -> tuple:
    return b[:k] + (b[k] - 1,) + b[k + 1 :]


def _subspace_order(budgets) -> list[tuple]:
    # every dependency of (j, b) lives at a smaller j, so this order is only cosmetic
    return sorted(budget_vectors(budgets), key=lambda b: (sum(b), b))


# -- concrete ---------------------------------------------------------------


def _run_batch(model: ModelBundle, params: LstmParams, w: tuple, states: np.ndarray) -> np.ndarray:
    for sym in w:
        states = lstm_cell(params, model.embeddings[sym], states)
    return states


def concrete_states(model: ModelBundle, x: Sequence[int], S: PerturbationSpace,
                    params: LstmParams | None = None) -> StateTable:
    params = params or model.lstm
    x = tuple(x)
    Ts = S.transformations
    zero = tuple(0 for _ in Ts)
    table = StateTable("concrete")
    table.entries[(0, 0, zero)] = StateSet([()], model.h0[None, :].copy())
    order = _subspace_order(S.budgets)
    for j in range(1, len(x) + 1):
        for b in order:
            i = j + _offset(Ts, b)
            if i < 0:
                continue
            strings, blocks = [], []
            dep = table.get((i - 1, j - 1, b))
            if dep is not None:
                strings.extend(z + (x[j - 1],) for z in dep.strings)
                blocks.append(_run_batch(model, params, (x[j - 1],), dep.states))
            for k, T in enumerate(Ts):
                if b[k] < 1 or j < T.s:
                    continue
                outs = T.apply(x[j - T.s : j])
                dep = table.get((i - T.t, j - T.s, _down(b, k))) if outs else None
                if dep is None:
                    continue
                for w in outs:
                    strings.extend(z + w for z in dep.strings)
                    blocks.append(_run_batch(model, params, w, dep.states))
            if not strings:
                continue
            states = np.concatenate(blocks)
            keep, seen = [], set()
            for r, z in enumerate(strings):
                if z not in seen:
                    seen.add(z)
                    keep.append(r)
            table.entries[(i, j, b)] = StateSet([strings[r] for r in keep], states[keep])
    return table


def concrete_final(model: ModelBundle, x: Sequence[int], S: PerturbationSpace) -> dict:
    """Map from each perturbed string to its final state (``[fwd; bwd]`` for BiLSTMs)."""
    x = tuple(x)
    out = _concrete_final_dict(concrete_states(model, x, S), len(x), S)
    if model.arch == "bilstm":
        back = _concrete_final_dict(
            concrete_states(model, x[::-1], S.reversed(), model.lstm_backward), len(x), S
        )
        out = {z: np.concatenate([s, back[z[::-1]]]) for z, s in out.items()}
    elif model.arch != "lstm":
        raise ArchitectureError(f"sequence certification does not support {model.arch}")
    return out


def _concrete_final_dict(table: StateTable, L: int, S: PerturbationSpace) -> dict:
    out = {}
    for b in budget_vectors(S.budgets):
        for entry in table.final(L, b):
            for z, s in zip(entry.strings, entry.states):
                out.setdefault(z, s)
    return out


# -- abstract ---------------------------------------------------------------


class _AbstractRun:
    """One abstract table fill; also records mid-replacement boxes on demand."""

    def __init__(self, model, params, x, S, use_feasibility=True, record_prefix=False):
        self.model = model
        self.params = params
        self.x = tuple(x)
        self.S = S
        self.use_feasibility = use_feasibility
        self.cells = 0
        self.table = StateTable("abstract")
        self.prefix = {} if record_prefix else None
        self._emb_cache = {}

    def _embed(self, outs: tuple) -> list[Box]:
        boxes = self._emb_cache.get(outs)
        if boxes is None:
            boxes = self._emb_cache[outs] = self.model.embed_abs(outs)
        return boxes

    def _note_prefix(self, i, box):
        if self.prefix is not None:
            cur = self.prefix.get(i)
            self.prefix[i] = box if cur is None else join(cur, box)

    def _cell(self, xbox, sbox):
        self.cells += 1
        return lstm_cell_abs(self.params, xbox, sbox)

    def fill(self) -> StateTable:
        x, Ts = self.x, self.S.transformations
        L = len(x)
        zero = tuple(0 for _ in Ts)
        h0 = Box.point(self.model.h0)
        self.table.entries[(0, 0, zero)] = h0
        self._note_prefix(0, h0)
        max_len = space_metrics(self.S, L).max_len
        order = _subspace_order(self.S.budgets)
        for j in range(1, L + 1):
            for b in order:
                if self.use_feasibility:
                    i = j + _offset(Ts, b)
                    lengths = [i] if i >= 0 else []
                else:
                    lengths = range(max_len + 1)
                for i in lengths:
                    self._entry(i, j, b)
        return self.table

    def _entry(self, i, j, b):
        x, Ts, table = self.x, self.S.transformations, self.table
        parts = []
        dep = table.get((i - 1, j - 1, b))
        if dep is not None:
            parts.append(self._cell(self._embed(((x[j - 1],),))[0], dep))
        for k, T in enumerate(Ts):
            if b[k] < 1 or j < T.s:
                continue
            outs = T.apply(x[j - T.s : j])
            dep = table.get((i - T.t, j - T.s, _down(b, k))) if outs else None
            if dep is None:
                continue
            box = dep
            if T.t:
                for step, pbox in enumerate(self._embed(outs), start=1):
                    box = self._cell(pbox, box)
                    if step < T.t:
                        self._note_prefix(i - T.t + step, box)
            parts.append(box)
        if parts:
            box = join_all(parts)
            table.entries[(i, j, b)] = box
            self._note_prefix(i, box)


def _final_by_subspace(table: StateTable, L: int, S: PerturbationSpace) -> dict:
    out = {}
    for b in budget_vectors(S.budgets):
        hull = join_all(table.final(L, b))
        if hull is not None:
            out[b] = hull
    return out


def abstract_final(model: ModelBundle, x: Sequence[int], S: PerturbationSpace,
                   use_feasibility: bool = True) -> AbstractFinal:
    """Interval hull over the final states of every string in ``S(x)``.

    For BiLSTMs the forward and (reversed-input) backward hulls of each tight
    subspace are concatenated before joining across subspaces.
    """
    if model.arch not in ("lstm", "bilstm"):
        raise ArchitectureError(f"sequence certification does not support {model.arch}")
    x = tuple(x)
    fwd = _AbstractRun(model, model.lstm, x, S, use_feasibility)
    fwd.fill()
    per_sub = _final_by_subspace(fwd.table, len(x), S)
    if model.arch == "lstm":
        return AbstractFinal(join_all(list(per_sub.values())), fwd.table, fwd.cells)
    bwd = _AbstractRun(model, model.lstm_backward, x[::-1], S.reversed(), use_feasibility)
    bwd.fill()
    back = _final_by_subspace(bwd.table, len(x), S)
    hull = join_all([concat(per_sub[b], back[b]) for b in per_sub])
    return AbstractFinal(hull, fwd.table, fwd.cells + bwd.cells, bwd.table)


def certify(model: ModelBundle, x: Sequence[int], y: int, S: PerturbationSpace) -> CertResult:
    res = abstract_final(model, x, S)
    margin = model.margin_upper(res.hull, y)
    return CertResult(margin < 0, margin, res.cells, res.hull)


def prefix_hulls(model: ModelBundle, x: Sequence[int], S: PerturbationSpace) -> dict:
    """Box over every LSTM state reached after ``i`` perturbed symbols, for each ``i``.

    Includes states in the middle of a multi-symbol replacement, which the
    completed-prefix entries alone would miss.
    """
    if model.arch != "lstm":
        raise ArchitectureError("prefix hulls are defined for forward LSTMs")
    run = _AbstractRun(model, model.lstm, x, S, record_prefix=True)
    run.fill()
    return dict(sorted(run.prefix.items()))


# -- oracle and attack ------------------------------------------------------


def _batched_margins(model: ModelBundle, strings: list, y: int) -> np.ndarray:
    """Margins (max wrong logit minus true logit) of many strings at once."""
    margins = np.empty(len(strings))
    by_len = {}
    for r, z in enumerate(strings):
        by_len.setdefault(len(z), []).append(r)
    for n, rows in by_len.items():
        zs = np.array([strings[r] for r in rows], dtype=np.int64).reshape(len(rows), n)
        fwd = np.repeat(model.h0[None, :], len(rows), axis=0)
        for p in range(n):
            fwd = lstm_cell(model.lstm, model.embeddings[zs[:, p]], fwd)
        state = fwd
        if model.arch == "bilstm":
            bwd = np.repeat(model.h0[None, :], len(rows), axis=0)
            for p in reversed(range(n)):
                bwd = lstm_cell(model.lstm_backward, model.embeddings[zs[:, p]], bwd)
            state = np.concatenate([fwd, bwd], axis=1)
        lg = model.logits(state)
        others = np.delete(lg, y, axis=1)
        margins[rows] = others.max(axis=1) - lg[:, y]
    return margins


def _misclassified(model, strings, y, margins=None) -> int | None:
    """Index of the first string not predicted as ``y``."""
    if not strings:
        return None
    if margins is None:
        margins = _batched_margins(model, strings, y)
    # argmax picks the lowest index on ties, so y loses a tie only to a smaller label
    for r, m in enumerate(margins):
        if m > 0 or (m == 0 and _loses_tie(model, strings[r], y)):
            return r
    return None


def _loses_tie(model, z, y) -> bool:
    return model.predict(z) != y


def _chunks(it: Iterator, size: int) -> Iterator[list]:
    buf = []
    for v in it:
        buf.append(v)
        if len(buf) == size:
            yield buf
            buf = []
    if buf:
        yield buf


def count_space(S: PerturbationSpace, x: Sequence[int], limit: int | None = None) -> int:
    """Distinct strings in ``S(x)``, stopping early once ``limit`` is exceeded."""
    n = 0
    for _ in iter_space(S, x):
        n += 1
        if limit is not None and n > limit:
            break
    return n


def exhaustive_check(model: ModelBundle, x: Sequence[int], y: int, S: PerturbationSpace,
                     cap: int | None = None, batch: int = 4096):
    """Classify every string of ``S(x)``; returns ``(robust, first_counterexample)``."""
    if model.arch not in ("lstm", "bilstm"):
        raise ArchitectureError(f"exhaustive_check does not support {model.arch}")
    model._check_label(y)
    cap = max_enum() if cap is None else cap
    if count_space(S, x, cap) > cap:
        raise SpaceTooLargeError(f"perturbation space has more than {cap} strings")
    for chunk in _chunks(iter_space(S, x), batch):
        r = _misclassified(model, chunk, y)
        if r is not None:
            return False, chunk[r]
    return True, None


def _edits_to_string(x, edits):
    out, pos = [], 0
    for start, _, s, w in edits:
        out.extend(x[pos:start])
        out.extend(w)
        pos = start + s
    out.extend(x[pos:])
    return tuple(out)


def attack_search(model: ModelBundle, x: Sequence[int], y: int, S: PerturbationSpace,
                  budget: int = 1000, seed: int = 0, batch: int = 512):
    """Gradient-free attack: enumeration up to ``budget`` strings, then greedy
    descent that adds one transformation application at a time, keeping the
    neighbour with the largest margin.  Returns a misclassified string or ``None``.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    x = tuple(x)
    seen = 0
    for chunk in _chunks(iter_space(S, x), batch):
        chunk = chunk[: budget - seen]
        r = _misclassified(model, chunk, y)
        if r is not None:
            return chunk[r]
        seen += len(chunk)
        if seen >= budget:
            break
    else:
        return None  # the whole space was checked

    rng = random.Random(seed)
    Ts = S.transformations
    edits: list = []
    used = [0] * len(Ts)
    best = float(_batched_margins(model, [x], y)[0])
    evals = 0
    while evals < budget:
        taken = set()
        for start, _, s, _ in edits:
            taken.update(range(start, start + s))
        cands = []
        for k, T in enumerate(Ts):
            if used[k] >= S.budgets[k]:
                continue
            for start in range(len(x) - T.s + 1):
                if taken.intersection(range(start, start + T.s)):
                    continue
                for w in T.apply(x[start : start + T.s]):
                    cands.append((start, k, T.s, w))
        if not cands:
            return None
        rng.shuffle(cands)
        cands = cands[: budget - evals]
        strings = [_edits_to_string(x, sorted(edits + [c])) for c in cands]
        margins = _batched_margins(model, strings, y)
        evals += len(cands)
        r = _misclassified(model, strings, y, margins)
        if r is not None:
            return strings[r]
        top = int(np.argmax(margins))
        if margins[top] <= best:
            return None
        best = float(margins[top])
        edits = sorted(edits + [cands[top]])
        used[cands[top][1]] += 1
    return None
