"""Random instance generators and brute-force oracles shared by the tests.

The oracles here deliberately avoid the package's own enumeration and cell
code: strings come from labelling every position independently, states from
a scalar pure-Python LSTM.
"""
import itertools
import math
import random

import numpy as np

from arccert.model import gen_random
from arccert.perturbation import PerturbationSpace, Transformation

RUNNING_VOCAB = ["to", "the", "movie", "film", "movies", "a", "good", "bad"]


def running_example(seed=1, E=3, H=4):
    m = gen_random(seed, RUNNING_VOCAB, E, H, 2)
    v = m.vocab
    t_del = Transformation.delete([v["to"], v["the"]], "del")
    t_sub = Transformation.substitute({v["movie"]: [v["film"], v["movies"]]}, "sub")
    return m, v, t_del, t_sub


# -- random instances -------------------------------------------------------


def random_transformation(rng: random.Random, V: int) -> Transformation:
    kind = rng.choice(["delete", "substitute", "duplicate", "swap", "table21", "table12"])
    words = list(range(V))
    if kind == "delete":
        return Transformation.delete(rng.sample(words, rng.randint(1, max(1, V // 2))))
    if kind == "substitute":
        table = {w: rng.sample(words, rng.randint(1, 2)) for w in rng.sample(words, rng.randint(1, max(1, V // 2)))}
        return Transformation.substitute(table)
    if kind == "duplicate":
        return Transformation.duplicate()
    if kind == "swap":
        return Transformation.swap()
    if kind == "table21":
        table = {}
        for _ in range(rng.randint(1, 3)):
            table.setdefault((rng.randrange(V), rng.randrange(V)), []).append((rng.randrange(V),))
        return Transformation.from_table("table", 2, 1, table, "t21")
    table = {}
    for _ in range(rng.randint(1, 3)):
        table.setdefault((rng.randrange(V),), []).append((rng.randrange(V), rng.randrange(V)))
    return Transformation.from_table("table", 1, 2, table, "t12")


def random_space(rng: random.Random, V: int, n_max=2, delta_max=2) -> PerturbationSpace:
    n = rng.randint(1, n_max)
    return PerturbationSpace(tuple((random_transformation(rng, V), rng.randint(0, delta_max)) for _ in range(n)))


def random_input(rng: random.Random, V: int, L_max=6, L_min=0):
    return tuple(rng.randrange(V) for _ in range(rng.randint(L_min, L_max)))


def random_instance(seed: int, L_max=6, arch="lstm", V_max=8, H_max=8):
    rng = random.Random(seed)
    V = rng.randint(2, V_max)
    E = rng.randint(1, 4)
    H = rng.randint(1, H_max)
    m = gen_random(seed, V, E, H, rng.randint(2, 3), arch, scale=rng.choice([0.5, 1.0, 2.0]))
    S = random_space(rng, V)
    x = random_input(rng, V, L_max)
    y = rng.randrange(m.num_classes)
    return m, S, x, y


# -- oracles ----------------------------------------------------------------


def brute_force_strings(S: PerturbationSpace, x, tight=False) -> set:
    """Label each position as copied, covered, or the start of a window."""
    Ts, budgets = S.transformations, S.budgets
    L = len(x)
    COPY, COVERED = -1, -2
    labels = [COPY, COVERED] + list(range(len(Ts)))
    out = set()
    for lab in itertools.product(labels, repeat=L):
        pieces, used, p, ok = [], [0] * len(Ts), 0, True
        while p < L:
            if lab[p] == COPY:
                pieces.append([(x[p],)])
                p += 1
                continue
            if lab[p] == COVERED:
                ok = False
                break
            k = lab[p]
            T = Ts[k]
            if p + T.s > L or any(lab[q] != COVERED for q in range(p + 1, p + T.s)):
                ok = False
                break
            window = tuple(x[p : p + T.s])
            if T.is_wildcard:
                outs = [(window[0], window[0])] if T.kind == "duplicate" else [(window[1], window[0])]
            else:
                outs = dict(T.rules).get(window)
                if not outs:
                    ok = False
                    break
            pieces.append(list(outs))
            used[k] += 1
            p += T.s
        if not ok:
            continue
        if tight and used != list(budgets):
            continue
        if any(u > d for u, d in zip(used, budgets)):
            continue
        for choice in itertools.product(*pieces):
            out.add(tuple(s for piece in choice for s in piece))
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def reference_lstm_step(m, sym, state):
    """Scalar-by-scalar LSTM cell with gate order [i, f, g, o]."""
    H = m.dim_hidden
    E = m.dim_embed
    emb = m.embeddings[sym]
    h, c = list(state[:H]), list(state[H:])
    W, U, b = m.lstm.w_x, m.lstm.w_h, m.lstm.b
    pre = []
    for r in range(4 * H):
        acc = float(b[r])
        for q in range(E):
            acc += float(W[r, q]) * float(emb[q])
        for q in range(H):
            acc += float(U[r, q]) * h[q]
        pre.append(acc)
    new_h, new_c = [], []
    for u in range(H):
        i, f = _sig(pre[u]), _sig(pre[H + u])
        g, o = math.tanh(pre[2 * H + u]), _sig(pre[3 * H + u])
        cu = f * c[u] + i * g
        new_c.append(cu)
        new_h.append(o * math.tanh(cu))
    return new_h + new_c


def reference_run(m, z):
    state = [0.0] * (2 * m.dim_hidden)
    for sym in z:
        state = reference_lstm_step(m, sym, state)
    return np.array(state)


def rel_close(a, b, rel):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= rel * (1.0 + np.maximum(np.abs(a), np.abs(b)))))


# -- trees ------------------------------------------------------------------


def random_tree(rng: random.Random, V: int, n_leaves: int):
    from arccert.tree import Tree

    if n_leaves == 1:
        return Tree.leaf(rng.randrange(V))
    k = rng.randint(1, n_leaves - 1)
    return Tree.node(random_tree(rng, V, k), random_tree(rng, V, n_leaves - k))


def random_tree_space(rng: random.Random, V: int, delta_max=2, all_kinds=False) -> PerturbationSpace:
    """A substitute / duplicate / stop-word-delete space with random budgets.

    With ``all_kinds`` every kind is present with a budget of at least 1.
    """
    words = list(range(V))
    sub = Transformation.substitute(
        {w: rng.sample(words, rng.randint(1, 2)) for w in rng.sample(words, rng.randint(1, V))}, "sub"
    )
    stop = Transformation.delete(rng.sample(words, rng.randint(1, max(1, V // 2))), "del")
    low = 1 if all_kinds else 0
    items = [(sub, rng.randint(low, delta_max)), (Transformation.duplicate(), rng.randint(low, delta_max)),
             (stop, rng.randint(low, delta_max))]
    if all_kinds:
        return PerturbationSpace(tuple(items))
    rng.shuffle(items)
    return PerturbationSpace(tuple(items[: rng.randint(1, 3)]))


def random_tree_instance(seed: int, max_leaves=7, delta_max=2, all_kinds=False):
    rng = random.Random(seed)
    V = rng.randint(2, 6)
    H = rng.randint(1, 6)
    m = gen_random(seed, V, rng.randint(1, 3), H, rng.randint(2, 3), "treelstm", scale=rng.choice([0.5, 1.0, 2.0]))
    t = random_tree(rng, V, rng.randint(1, max_leaves))
    return m, random_tree_space(rng, V, delta_max, all_kinds), t, rng.randrange(m.num_classes)


# one line per acceptance criterion, echoed by conftest at the end of the run
ACCEPTANCE_LINES: list = []


def verdict(n: int, ok: bool, detail: str) -> bool:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
