"""Loading perturbation-space files and labelled datasets.

Space file::

    {"transformations": [
        {"kind": "delete", "budget": 1, "match": ["to", "the"]},
        {"kind": "substitute", "budget": 1, "table": {"movie": ["film", "movies"]}},
        {"kind": "duplicate", "budget": 2},
        {"kind": "swap", "budget": 1},
        {"kind": "table", "budget": 1, "s": 2, "t": 1,
         "rules": [{"match": ["to", "the"], "replace": [["the"]]}]}]}

Dataset files are UTF-8 TSV, one example per line: ``<label>\\t<tokens>`` for
sequences or ``<label>\\t<s-expression>`` for trees.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .perturbation import PerturbationSpace, Transformation
from .tree import TreeError, parse_tree


class DataError(ValueError):
    """Invalid space or dataset file; the message names the field or line."""


def _resolve(vocab: dict, tok, where: str) -> int:
    if not isinstance(tok, str):
        raise DataError(f"{where}: expected a token string, got {tok!r}")
    try:
        return vocab[tok]
    except KeyError:
        raise DataError(f"{where}: unknown token {tok!r}") from None


def _tokens(vocab, seq, where) -> tuple:
    if not isinstance(seq, list):
        raise DataError(f"{where}: expected a list of tokens")
    return tuple(_resolve(vocab, t, f"{where}[{n}]") for n, t in enumerate(seq))


def _int(d, key, where, minimum=0) -> int:
    v = d.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise DataError(f"{where}.{key}: expected an integer >= {minimum}")
    return v


def space_from_dict(d: dict, vocab: dict) -> PerturbationSpace:
    if not isinstance(d, dict) or not isinstance(d.get("transformations"), list):
        raise DataError("transformations: missing or not a list")
    items = []
    for n, spec in enumerate(d["transformations"]):
        where = f"transformations[{n}]"
        if not isinstance(spec, dict):
            raise DataError(f"{where}: expected an object")
        kind = spec.get("kind")
        budget = _int(spec, "budget", where)
        name = spec.get("name", kind)
        try:
            if kind == "delete":
                if not isinstance(spec.get("match"), list):
                    raise DataError(f"{where}.match: expected a list of tokens")
                words = _tokens(vocab, spec["match"], f"{where}.match")
                T = Transformation.delete(words, name)
            elif kind == "substitute":
                table = spec.get("table")
                if not isinstance(table, dict):
                    raise DataError(f"{where}.table: expected an object")
                resolved = {
                    _resolve(vocab, k, f"{where}.table"): _tokens(vocab, v, f"{where}.table.{k}")
                    for k, v in table.items()
                }
                T = Transformation.substitute(resolved, name)
            elif kind == "duplicate":
                T = Transformation.duplicate(name)
            elif kind == "swap":
                T = Transformation.swap(name)
            elif kind == "table":
                s, t = _int(spec, "s", where, 1), _int(spec, "t", where, 0)
                rules = spec.get("rules")
                if not isinstance(rules, list):
                    raise DataError(f"{where}.rules: expected a list")
                table = {}
                for r, rule in enumerate(rules):
                    rw = f"{where}.rules[{r}]"
                    if not isinstance(rule, dict) or not isinstance(rule.get("replace"), list):
                        raise DataError(f"{rw}: expected {{match, replace}}")
                    key = _tokens(vocab, rule.get("match"), f"{rw}.match")
                    outs = [_tokens(vocab, o, f"{rw}.replace[{m}]") for m, o in enumerate(rule["replace"])]
                    table.setdefault(key, []).extend(outs)
                T = Transformation.from_table("table", s, t, table, name)
            else:
                raise DataError(f"{where}.kind: unknown kind {kind!r}")
        except DataError:
            raise
        except ValueError as e:
            raise DataError(f"{where}: {e}") from None
        items.append((T, budget))
    return PerturbationSpace(tuple(items))


def load_space(path, vocab: dict) -> PerturbationSpace:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    return space_from_dict(d, vocab)


@dataclass
class Dataset:
    kind: str  # "sequence" or "tree"
    examples: list = field(default_factory=list)  # [(tuple[int] | Tree, label)]
    source: str = ""

    def __len__(self):
        return len(self.examples)


def parse_example(line: str, vocab: dict, kind: str, where: str = "input"):
    label_text, sep, body = line.partition("\t")
    if not sep:
        raise DataError(f"{where}: expected '<label>\\t<input>'")
    try:
        label = int(label_text)
    except ValueError:
        raise DataError(f"{where}: label {label_text!r} is not an integer") from None
    return parse_input(body, vocab, kind, where), label


def parse_input(text: str, vocab: dict, kind: str, where: str = "input"):
    try:
        if kind == "tree":
            return parse_tree(text, vocab)
        return tuple(vocab[t] if t in vocab else _unknown(t) for t in text.split())
    except KeyError as e:
        raise DataError(f"{where}: {e.args[0]}") from None
    except TreeError as e:
        raise DataError(f"{where}: {e}") from None


def _unknown(tok):
    raise KeyError(f"unknown token {tok!r}")


def load_dataset(path, vocab: dict, kind: str = "sequence", num_classes: int | None = None) -> Dataset:
    ds = Dataset(kind, source=str(path))
    text = Path(path).read_text(encoding="utf-8")
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        inp, label = parse_example(line, vocab, kind, f"{path}:{n}")
        if num_classes is not None and not 0 <= label < num_classes:
            raise DataError(f"{path}:{n}: label {label} out of range for {num_classes} classes")
        ds.examples.append((inp, label))
    return ds
