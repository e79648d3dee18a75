"""Dataset-level evaluation: accuracy, certified, exhaustive and attack accuracy."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import cert, tree
from .io import Dataset
from .model import ModelBundle
from .perturbation import PerturbationSpace

DEFAULT_ATTACK_BUDGET = 1000


@dataclass
class EvalOptions:
    exhaustive: bool = False
    attack_budget: int = DEFAULT_ATTACK_BUDGET  # 0 disables the attack
    seed: int = 0
    workers: int = 1
    timings: bool = False
    cap: int | None = None


def _render(model: ModelBundle, inp) -> str:
    if isinstance(inp, tree.Tree):
        return inp.sexpr(model.decode(range(len(model.vocab))))
    return " ".join(model.decode(inp))


def evaluate_example(model: ModelBundle, inp, label: int, S: PerturbationSpace, opts: EvalOptions) -> dict:
    start = time.perf_counter()
    is_tree = model.arch == "treelstm"
    if is_tree:
        predicted = model.predict_state(tree.tree_state(model, inp))
        res = tree.certify_tree(model, inp, label, S)
    else:
        predicted = model.predict(inp)
        res = cert.certify(model, inp, label, S)
    rec = {
        "label": label,
        "predicted": predicted,
        "correct": predicted == label,
        "certified": res.certified,
        "margin_upper": res.margin_upper,
        "cells": res.cells_evaluated,
        "exhaustive": None,
        "attacked": None,
    }
    if opts.exhaustive:
        try:
            if is_tree:
                robust, cex = tree.tree_exhaustive_check(model, inp, label, S, opts.cap)
            else:
                robust, cex = cert.exhaustive_check(model, inp, label, S, opts.cap)
            rec["exhaustive"] = robust
            if cex is not None:
                rec["counterexample"] = _render(model, cex)
        except cert.SpaceTooLargeError:
            rec["exhaustive"] = "skipped"
    if opts.attack_budget > 0:
        if is_tree:
            found = tree.tree_attack_search(model, inp, label, S, opts.attack_budget)
        else:
            found = cert.attack_search(model, inp, label, S, opts.attack_budget, opts.seed)
        rec["attacked"] = found is not None
        if found is not None:
            rec["attack_example"] = _render(model, found)
    if opts.timings:
        rec["wall_time"] = time.perf_counter() - start
    return rec


def eval_metrics(model: ModelBundle, dataset: Dataset, S: PerturbationSpace,
                 opts: EvalOptions | None = None) -> dict:
    opts = opts or EvalOptions()
    want = "tree" if model.arch == "treelstm" else "sequence"
    if dataset.kind != want:
        raise ValueError(f"{model.arch} model needs a {want} dataset, got {dataset.kind}")

    def run(n):
        inp, label = dataset.examples[n]
        rec = {"index": n}
        rec.update(evaluate_example(model, inp, label, S, opts))
        return rec

    indices = range(len(dataset))
    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            records = list(pool.map(run, indices))
    else:
        records = [run(n) for n in indices]
    return {"examples": records, "aggregates": aggregate(records)}


def aggregate(records: list) -> dict:
    n = len(records)

    def frac(k, d):
        return k / d if d else None

    agg = {
        "count": n,
        "accuracy": frac(sum(r["correct"] for r in records), n),
        "cf_acc": frac(sum(r["certified"] for r in records), n),
    }
    checked = [r for r in records if r["exhaustive"] in (True, False)]
    if any(r["exhaustive"] is not None for r in records):
        agg["ex_acc"] = frac(sum(r["exhaustive"] is True for r in checked), len(checked))
        agg["ex_coverage"] = frac(len(checked), n)
    attacked = [r for r in records if r["attacked"] is not None]
    if attacked:
        agg["attack_acc"] = frac(sum(not r["attacked"] for r in attacked), len(attacked))
    return agg


def dumps(obj) -> str:
    """Deterministic JSON: insertion-ordered keys, floats with 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("non-finite float in report")
        text = format(obj, ".17g")
        return text if any(ch in text for ch in ".e") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")
