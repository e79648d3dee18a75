"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import cert, evaluate, model as model_mod, tree
from .io import DataError, load_dataset, load_space, parse_input
from .model import ModelError
from .perturbation import iter_space


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _kind(m) -> str:
    return "tree" if m.arch == "treelstm" else "sequence"


def _load_model_space(args):
    m = model_mod.load(args.model)
    return m, load_space(args.space, m.vocab)


def cmd_certify(args, out):
    m, S = _load_model_space(args)
    inp = parse_input(args.input, m.vocab, _kind(m))
    if m.arch == "treelstm":
        res = tree.certify_tree(m, inp, args.label, S)
    else:
        res = cert.certify(m, inp, args.label, S)
    out.write(evaluate.dumps(res.to_json()) + "\n")


def cmd_enumerate(args, out):
    m = model_mod.load(args.vocab_from)
    S = load_space(args.space, m.vocab)
    itos = m.decode(range(len(m.vocab)))
    cap = args.cap if args.cap is not None else cert.max_enum()
    n = 0
    if args.tree:
        items = (t.sexpr(itos) for t in tree.iter_trees(S, parse_input(args.input, m.vocab, "tree"), args.tight))
    else:
        x = parse_input(args.input, m.vocab, "sequence")
        items = (" ".join(itos[s] for s in z) for z in iter_space(S, x, args.tight))
    lines = []
    for line in items:
        n += 1
        if n > cap:
            raise cert.SpaceTooLargeError(f"perturbation space has more than {cap} members")
        lines.append(line)
    out.write("".join(line + "\n" for line in lines))


def cmd_eval(args, out):
    m, S = _load_model_space(args)
    ds = load_dataset(args.data, m.vocab, _kind(m), m.num_classes)
    opts = evaluate.EvalOptions(
        exhaustive=args.exhaustive,
        attack_budget=args.attack_budget,
        seed=args.seed,
        workers=args.workers,
        timings=args.timings,
    )
    report = evaluate.eval_metrics(m, ds, S, opts)
    text = evaluate.dumps(report) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        out.write(evaluate.dumps(report["aggregates"]) + "\n")
    else:
        out.write(text)


def cmd_gen_model(args, out):
    if args.vocab:
        vocab = [t for t in args.vocab.split(",") if t]
    elif args.vocab_file:
        vocab = Path(args.vocab_file).read_text(encoding="utf-8").split()
    else:
        vocab = args.vocab_size
    m = model_mod.gen_random(args.seed, vocab, args.embed_dim, args.hidden_dim, args.classes, args.arch, args.scale)
    model_mod.save(m, args.out)


def cmd_attack(args, out):
    m, S = _load_model_space(args)
    inp = parse_input(args.input, m.vocab, _kind(m))
    if m.arch == "treelstm":
        found = tree.tree_attack_search(m, inp, args.label, S, args.budget)
        text = "none" if found is None else found.sexpr(m.decode(range(len(m.vocab))))
    else:
        found = cert.attack_search(m, inp, args.label, S, args.budget, args.seed)
        text = "none" if found is None else " ".join(m.decode(found))
    out.write(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arccert", description="Certify LSTM classifiers against programmable perturbations.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("certify", help="certify one input")
    c.add_argument("--model", required=True)
    c.add_argument("--space", required=True)
    c.add_argument("--input", required=True, help="space-separated tokens, or an s-expression for tree models")
    c.add_argument("--label", type=int, required=True)
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("enumerate", help="list every perturbed input")
    e.add_argument("--space", required=True)
    e.add_argument("--vocab-from", required=True, help="model file whose vocabulary resolves tokens")
    e.add_argument("--input", required=True)
    e.add_argument("--tight", action="store_true", help="apply every transformation exactly its budget")
    e.add_argument("--tree", action="store_true", help="input is an s-expression tree")
    e.add_argument("--cap", type=int, default=None)
    e.set_defaults(func=cmd_enumerate)

    v = sub.add_parser("eval", help="evaluate a dataset")
    v.add_argument("--model", required=True)
    v.add_argument("--space", required=True)
    v.add_argument("--data", required=True)
    v.add_argument("--out", help="write the full report here (aggregates go to stdout)")
    v.add_argument("--exhaustive", action="store_true")
    v.add_argument("--attack-budget", type=int, default=evaluate.DEFAULT_ATTACK_BUDGET)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--timings", action="store_true", help="record per-example wall time (not reproducible)")
    v.set_defaults(func=cmd_eval)

    g = sub.add_parser("gen-model", help="write a seeded random model")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--arch", choices=model_mod.ARCHS, default="lstm")
    g.add_argument("--vocab", help="comma-separated tokens")
    g.add_argument("--vocab-file", help="whitespace-separated tokens")
    g.add_argument("--vocab-size", type=int, default=8)
    g.add_argument("--embed-dim", type=int, default=4)
    g.add_argument("--hidden-dim", type=int, default=4)
    g.add_argument("--classes", type=int, default=2)
    g.add_argument("--scale", type=float, default=0.5)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_model)

    a = sub.add_parser("attack", help="search for a counterexample")
    a.add_argument("--model", required=True)
    a.add_argument("--space", required=True)
    a.add_argument("--input", required=True)
    a.add_argument("--label", type=int, required=True)
    a.add_argument("--budget", type=int, default=evaluate.DEFAULT_ATTACK_BUDGET)
    a.add_argument("--seed", type=int, default=0)
    a.set_defaults(func=cmd_attack)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError(parser.format_usage().strip())
        args.func(args, out)
    except UsageError as e:
        err.write(f"{e}\n")
        return 1
    except (DataError, ModelError, tree.TreeError, cert.SpaceTooLargeError, model_mod.ArchitectureError,
            ValueError, KeyError, OSError) as e:
        err.write(f"error: {e}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
