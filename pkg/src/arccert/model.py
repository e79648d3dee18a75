"""LSTM, BiLSTM and binary TreeLSTM classifiers: concrete evaluation, interval
evaluation, JSON serialization and seeded random generation.

A state is a flat float64 vector ``[h; c]`` of length ``2H``.  Concrete cell
functions broadcast over leading batch dimensions.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .interval import Box, add, alpha, concat, matvec, monotone, mul, sigmoid, split_signs

ARCHS = ("lstm", "bilstm", "treelstm")


class ModelError(ValueError):
    """Malformed model file or inconsistent parameters; ``field`` names the culprit."""

    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.field = where


class ArchitectureError(TypeError):
    pass


@dataclass(eq=False)
class LstmParams:
    w_x: np.ndarray  # (4H, E), gate blocks [i, f, g, o]
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.w_x.shape[1]

    @cached_property
    def _signs(self):
        return split_signs(self.w_x), split_signs(self.w_h)

    def validate(self, prefix: str, E: int, H: int):
        _check_shape(f"{prefix}.w_x", self.w_x, (4 * H, E))
        _check_shape(f"{prefix}.w_h", self.w_h, (4 * H, H))
        _check_shape(f"{prefix}.b", self.b, (4 * H,))


@dataclass(eq=False)
class TreeLstmParams:
    u_l: np.ndarray  # (5H, H), gate blocks [i, f_l, f_r, g, o]
    u_r: np.ndarray  # (5H, H)
    b: np.ndarray  # (5H,)

    @property
    def hidden(self) -> int:
        return self.u_l.shape[1]

    @cached_property
    def _signs(self):
        return split_signs(self.u_l), split_signs(self.u_r)

    def validate(self, prefix: str, H: int):
        _check_shape(f"{prefix}.u_l", self.u_l, (5 * H, H))
        _check_shape(f"{prefix}.u_r", self.u_r, (5 * H, H))
        _check_shape(f"{prefix}.b", self.b, (5 * H,))


def _check_shape(name, arr, shape):
    if arr.shape != shape:
        raise ModelError(name, f"expected shape {shape}, got {arr.shape}")


def initial_state(H: int) -> np.ndarray:
    return np.zeros(2 * H)


# -- concrete cells ---------------------------------------------------------


def lstm_cell(p: LstmParams, x_emb, s) -> np.ndarray:
    x_emb = np.asarray(x_emb, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    H = p.hidden
    if x_emb.shape[-1] != p.embed_dim or s.shape[-1] != 2 * H:
        raise ValueError(
            f"lstm_cell shapes: embedding {x_emb.shape[-1]} (want {p.embed_dim}), "
            f"state {s.shape[-1]} (want {2 * H})"
        )
    h, c = s[..., :H], s[..., H:]
    z = x_emb @ p.w_x.T + h @ p.w_h.T + p.b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = sigmoid(z[..., 3 * H :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return np.concatenate([h_new, c_new], axis=-1)


def trlstm_cell(p: TreeLstmParams, left, right) -> np.ndarray:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    H = p.hidden
    if left.shape[-1] != 2 * H or right.shape[-1] != 2 * H:
        raise ValueError(f"trlstm_cell expects states of size {2 * H}")
    hl, cl = left[..., :H], left[..., H:]
    hr, cr = right[..., :H], right[..., H:]
    z = hl @ p.u_l.T + hr @ p.u_r.T + p.b
    i = sigmoid(z[..., :H])
    fl = sigmoid(z[..., H : 2 * H])
    fr = sigmoid(z[..., 2 * H : 3 * H])
    g = np.tanh(z[..., 3 * H : 4 * H])
    o = sigmoid(z[..., 4 * H :])
    c = fl * cl + fr * cr + i * g
    h = o * np.tanh(c)
    return np.concatenate([h, c], axis=-1)


# -- abstract cells ---------------------------------------------------------


def lstm_cell_abs(p: LstmParams, x_box: Box, s_box: Box) -> Box:
    H = p.hidden
    if x_box.dim != p.embed_dim or s_box.dim != 2 * H:
        raise ValueError(
            f"lstm_cell_abs shapes: embedding {x_box.dim} (want {p.embed_dim}), "
            f"state {s_box.dim} (want {2 * H})"
        )
    sx, sh = p._signs
    z = add(matvec(p.w_x, p.b, x_box, sx), matvec(p.w_h, None, s_box[:H], sh))
    i = monotone("sigmoid", z[:H])
    f = monotone("sigmoid", z[H : 2 * H])
    g = monotone("tanh", z[2 * H : 3 * H])
    o = monotone("sigmoid", z[3 * H :])
    c = add(mul(f, s_box[H:]), mul(i, g))
    h = mul(o, monotone("tanh", c))
    return concat(h, c)


def trlstm_cell_abs(p: TreeLstmParams, left: Box, right: Box) -> Box:
    H = p.hidden
    if left.dim != 2 * H or right.dim != 2 * H:
        raise ValueError(f"trlstm_cell_abs expects boxes of size {2 * H}")
    sl, sr = p._signs
    z = add(matvec(p.u_l, p.b, left[:H], sl), matvec(p.u_r, None, right[:H], sr))
    i = monotone("sigmoid", z[:H])
    fl = monotone("sigmoid", z[H : 2 * H])
    fr = monotone("sigmoid", z[2 * H : 3 * H])
    g = monotone("tanh", z[3 * H : 4 * H])
    o = monotone("sigmoid", z[4 * H :])
    c = add(add(mul(fl, left[H:]), mul(fr, right[H:])), mul(i, g))
    h = mul(o, monotone("tanh", c))
    return concat(h, c)


# -- model bundle -----------------------------------------------------------


@dataclass(eq=False)
class ModelBundle:
    arch: str
    vocab: dict  # token text -> id
    embeddings: np.ndarray  # (V, E)
    lstm: LstmParams
    classifier_w: np.ndarray  # (C, H) or (C, 2H) for bilstm
    classifier_b: np.ndarray  # (C,)
    lstm_backward: LstmParams | None = None
    treelstm: TreeLstmParams | None = None
    _itos: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.validate()
        self._itos = [None] * len(self.vocab)
        for tok, i in self.vocab.items():
            self._itos[i] = tok

    def validate(self):
        if self.arch not in ARCHS:
            raise ModelError("arch", f"unknown architecture {self.arch!r}")
        V = len(self.vocab)
        if sorted(self.vocab.values()) != list(range(V)):
            raise ModelError("vocab", "ids must be exactly 0..V-1")
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] != V:
            raise ModelError("embeddings", f"expected {V} rows, got shape {self.embeddings.shape}")
        E = self.embeddings.shape[1]
        H = self.lstm.w_h.shape[1] if self.lstm.w_h.ndim == 2 else -1
        self.lstm.validate("lstm", E, H)
        if (self.arch == "bilstm") != (self.lstm_backward is not None):
            raise ModelError("lstm_backward", "present iff arch is bilstm")
        if self.lstm_backward is not None:
            self.lstm_backward.validate("lstm_backward", E, H)
        if (self.arch == "treelstm") != (self.treelstm is not None):
            raise ModelError("treelstm", "present iff arch is treelstm")
        if self.treelstm is not None:
            self.treelstm.validate("treelstm", H)
        C = self.classifier_b.shape[0] if self.classifier_b.ndim == 1 else -1
        if C < 2:
            raise ModelError("classifier.b", "need at least two classes")
        feat = 2 * H if self.arch == "bilstm" else H
        _check_shape("classifier.w", self.classifier_w, (C, feat))

    @property
    def dim_embed(self) -> int:
        return self.embeddings.shape[1]

    @property
    def dim_hidden(self) -> int:
        return self.lstm.hidden

    @property
    def num_classes(self) -> int:
        return self.classifier_b.shape[0]

    @property
    def h0(self) -> np.ndarray:
        return initial_state(self.dim_hidden)

    # vocabulary

    def encode(self, tokens: Sequence[str]) -> tuple:
        out = []
        for tok in tokens:
            if tok not in self.vocab:
                raise KeyError(f"unknown token {tok!r}")
            out.append(self.vocab[tok])
        return tuple(out)

    def decode(self, ids: Sequence[int]) -> list:
        return [self._itos[i] for i in ids]

    def embed(self, sym: int) -> np.ndarray:
        return self.embeddings[sym]

    def embed_abs(self, words) -> list[Box]:
        """Positionwise boxes over the embeddings of equal-length strings."""
        words = [tuple(w) for w in words]
        if not words:
            raise ValueError("embed_abs needs at least one string")
        t = len(words[0])
        if t < 1 or any(len(w) != t for w in words):
            raise ValueError("embed_abs needs non-empty strings of equal length")
        ids = np.array(words)
        return [alpha(self.embeddings[ids[:, p]]) for p in range(t)]

    # sequence evaluation

    def run(self, z: Sequence[int], s=None, params: LstmParams | None = None) -> np.ndarray:
        """Fold the LSTM over ``z`` starting from ``s`` (default ``h0``)."""
        params = params or self.lstm
        s = self.h0 if s is None else s
        for sym in z:
            s = lstm_cell(params, self.embeddings[sym], s)
        return s

    def final_state(self, z: Sequence[int]) -> np.ndarray:
        if self.arch == "treelstm":
            raise ArchitectureError("final_state is for sequence models")
        fwd = self.run(z)
        if self.arch == "bilstm":
            return np.concatenate([fwd, self.run(tuple(z)[::-1], params=self.lstm_backward)])
        return fwd

    def features(self, state):
        """Classifier input: hidden part(s) of a state vector or box."""
        H = self.dim_hidden
        if isinstance(state, Box):
            if self.arch == "bilstm":
                return concat(state[:H], state[2 * H : 3 * H])
            return state[:H]
        state = np.asarray(state)
        if self.arch == "bilstm":
            return np.concatenate([state[..., :H], state[..., 2 * H : 3 * H]], axis=-1)
        return state[..., :H]

    def logits(self, state) -> np.ndarray:
        return self.features(state) @ self.classifier_w.T + self.classifier_b

    def predict_state(self, state) -> int:
        return int(np.argmax(self.logits(state)))

    def predict(self, z: Sequence[int]) -> int:
        return self.predict_state(self.final_state(z))

    def margin(self, state, y: int) -> float:
        """``max_{y' != y} logit_{y'} - logit_y``; negative iff ``y`` wins strictly."""
        self._check_label(y)
        lg = self.logits(state)
        others = np.delete(lg, y)
        return float(others.max() - lg[y])

    def margin_upper(self, box: Box, y: int) -> float:
        self._check_label(y)
        out = matvec(self.classifier_w, self.classifier_b, self.features(box))
        hi = np.delete(out.hi, y)
        return float(hi.max() - out.lo[y])

    def _check_label(self, y: int):
        if not 0 <= y < self.num_classes:
            raise ValueError(f"label {y} out of range for {self.num_classes} classes")


def classify_margin(model: ModelBundle, final, y: int):
    """Concrete state -> logits; Box -> upper bound of the adversarial margin."""
    if isinstance(final, Box):
        return model.margin_upper(final, y)
    model._check_label(y)
    return model.logits(final)


# -- serialization ----------------------------------------------------------


def _mat(obj, name, ndim):
    try:
        arr = np.array(obj, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ModelError(name, f"not a numeric array ({e})") from None
    if arr.ndim != ndim:
        raise ModelError(name, f"expected a {ndim}-d array, got {arr.ndim}-d")
    if not np.all(np.isfinite(arr)):
        raise ModelError(name, "non-finite value")
    return arr


def _get(d, key, prefix=""):
    name = f"{prefix}{key}"
    if not isinstance(d, dict) or key not in d:
        raise ModelError(name, "missing field")
    return d[key]


def bundle_from_dict(d: dict) -> ModelBundle:
    arch = _get(d, "arch")
    if arch not in ARCHS:
        raise ModelError("arch", f"unknown architecture {arch!r}")
    vocab = _get(d, "vocab")
    if not isinstance(vocab, dict) or not all(isinstance(v, int) for v in vocab.values()):
        raise ModelError("vocab", "must map token text to integer ids")
    E, H, C = (_get(d, k) for k in ("dim_embed", "dim_hidden", "num_classes"))

    def lstm_block(key):
        blk = _get(d, key)
        p = LstmParams(
            _mat(_get(blk, "w_x", key + "."), key + ".w_x", 2),
            _mat(_get(blk, "w_h", key + "."), key + ".w_h", 2),
            _mat(_get(blk, "b", key + "."), key + ".b", 1),
        )
        p.validate(key, E, H)
        return p

    emb = _mat(_get(d, "embeddings"), "embeddings", 2)
    _check_shape("embeddings", emb, (len(vocab), E))
    lstm = lstm_block("lstm")
    backward = lstm_block("lstm_backward") if arch == "bilstm" else None
    tree = None
    if arch == "treelstm":
        blk = _get(d, "treelstm")
        tree = TreeLstmParams(
            _mat(_get(blk, "u_l", "treelstm."), "treelstm.u_l", 2),
            _mat(_get(blk, "u_r", "treelstm."), "treelstm.u_r", 2),
            _mat(_get(blk, "b", "treelstm."), "treelstm.b", 1),
        )
        tree.validate("treelstm", H)
    cls = _get(d, "classifier")
    w = _mat(_get(cls, "w", "classifier."), "classifier.w", 2)
    b = _mat(_get(cls, "b", "classifier."), "classifier.b", 1)
    _check_shape("classifier.b", b, (C,))
    return ModelBundle(arch, dict(vocab), emb, lstm, w, b, backward, tree)


def bundle_to_dict(m: ModelBundle) -> dict:
    d = {
        "arch": m.arch,
        "vocab": dict(sorted(m.vocab.items(), key=lambda kv: kv[1])),
        "dim_embed": m.dim_embed,
        "dim_hidden": m.dim_hidden,
        "num_classes": m.num_classes,
        "embeddings": m.embeddings.tolist(),
        "lstm": {"w_x": m.lstm.w_x.tolist(), "w_h": m.lstm.w_h.tolist(), "b": m.lstm.b.tolist()},
    }
    if m.lstm_backward is not None:
        p = m.lstm_backward
        d["lstm_backward"] = {"w_x": p.w_x.tolist(), "w_h": p.w_h.tolist(), "b": p.b.tolist()}
    if m.treelstm is not None:
        p = m.treelstm
        d["treelstm"] = {"u_l": p.u_l.tolist(), "u_r": p.u_r.tolist(), "b": p.b.tolist()}
    d["classifier"] = {"w": m.classifier_w.tolist(), "b": m.classifier_b.tolist()}
    return d


def save(m: ModelBundle, path) -> None:
    # json emits shortest round-trip float reprs, so load(save(m)) is bit-exact
    Path(path).write_text(json.dumps(bundle_to_dict(m), separators=(",", ":")) + "\n", encoding="utf-8")


def load(path) -> ModelBundle:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelError("<file>", f"invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(d, dict):
        raise ModelError("<file>", "top level must be an object")
    return bundle_from_dict(d)


def gen_random(seed: int, V: int | Sequence[str], E: int, H: int, C: int, arch: str = "lstm",
               scale: float = 0.5) -> ModelBundle:
    """Deterministic random model with weights uniform in ``[-scale, scale]``.

    ``V`` is a vocabulary size (tokens ``w0, w1, ...``) or a token list.
    """
    if arch not in ARCHS:
        raise ModelError("arch", f"unknown architecture {arch!r}")
    tokens = [f"w{i}" for i in range(V)] if isinstance(V, int) else list(V)
    if len(set(tokens)) != len(tokens) or not tokens:
        raise ValueError("vocabulary must be non-empty and duplicate-free")
    if min(E, H) < 1 or C < 2:
        raise ValueError("dimensions must be positive and C >= 2")
    rng = np.random.default_rng(seed)

    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    emb = u(len(tokens), E)
    lstm = LstmParams(u(4 * H, E), u(4 * H, H), u(4 * H))
    backward = LstmParams(u(4 * H, E), u(4 * H, H), u(4 * H)) if arch == "bilstm" else None
    tree = TreeLstmParams(u(5 * H, H), u(5 * H, H), u(5 * H)) if arch == "treelstm" else None
    feat = 2 * H if arch == "bilstm" else H
    w, b = u(C, feat), u(C)
    return ModelBundle(arch, {t: i for i, t in enumerate(tokens)}, emb, lstm, w, b, backward, tree)


def constant_classifier(m: ModelBundle, bias: Sequence[float]) -> ModelBundle:
    """Copy of ``m`` whose classifier ignores its input and outputs ``bias``."""
    bias = np.asarray(bias, dtype=np.float64)
    return ModelBundle(m.arch, dict(m.vocab), m.embeddings, m.lstm, np.zeros((len(bias), m.classifier_w.shape[1])),
                       bias, m.lstm_backward, m.treelstm)


def isclose_rel(a, b, rel: float) -> bool:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return bool(np.all(np.abs(a - b) <= rel * (1.0 + np.maximum(np.abs(a), np.abs(b)))))

