"""Micro encoder-decoder translation model with exact manual backprop.

One single-head self-attention encoder layer, one decoder layer (causal
self-attention + cross-attention + feed-forward), learned position
embeddings, residual connections, no layer norm, no biases. Small enough
that every gradient path is checkable against finite differences.

Two encoder regimes:
  * BIDIRECTIONAL - offline-style encoder, every position sees the whole
    source prefix it was given.
  * UNIDIRECTIONAL - causal encoder; the state at source position p is
    invariant to tokens at positions > p, which is what makes masked
    cross-attention training and incremental decoding sound.

Cross-attention limits restrict how much of the encoded source each decoder
position may see; they are the engine for both streaming inference and
prefix-to-prefix training.
"""

from __future__ import annotations

import numpy as np

from .core import CapacityError, ConfigError, Distribution, NumericError, Vocabulary

BIDIRECTIONAL = "BIDIRECTIONAL"
UNIDIRECTIONAL = "UNIDIRECTIONAL"
MODES = (BIDIRECTIONAL, UNIDIRECTIONAL)

ATTN_BLOCKS = ("enc", "dec_self", "dec_cross")


def tensor_shapes(n_vocab: int, d: int, max_len: int) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {
        "embed": (n_vocab, d),
        "pos": (max_len, d),
        "ff_w1": (d, 4 * d),
        "ff_w2": (4 * d, d),
        "out_proj": (d, n_vocab),
    }
    for block in ATTN_BLOCKS:
        for proj in ("q", "k", "v", "o"):
            shapes[f"{block}_{proj}"] = (d, d)
    return shapes


class MicroModel:
    """Parameter container plus forward/backward passes."""

    def __init__(
        self,
        vocab: Vocabulary,
        d: int = 32,
        max_len: int = 64,
        mode: str = BIDIRECTIONAL,
        seed: int = 0,
        params: dict[str, np.ndarray] | None = None,
    ):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        self.vocab = vocab
        self.d = d
        self.max_len = max_len
        self.mode = mode
        shapes = tensor_shapes(len(vocab), d, max_len)
        if params is None:
            rng = np.random.default_rng(seed)
            params = {name: rng.uniform(-0.1, 0.1, size=shape)
                      for name, shape in shapes.items()}
        else:
            for name, shape in shapes.items():
                if name not in params or params[name].shape != shape:
                    raise ConfigError(f"parameter {name!r} missing or wrong shape")
            params = {name: np.asarray(p, dtype=np.float64) for name, p in params.items()}
        self.params = params

    # -- forward ----------------------------------------------------------

    def _check_len(self, n: int, what: str) -> None:
        if n > self.max_len:
            raise CapacityError(f"{what} length {n} exceeds max_len {self.max_len}")

    def _encode(self, src: np.ndarray):
        p = self.params
        s = len(src)
        x0 = p["embed"][src] + p["pos"][:s]
        if self.mode == UNIDIRECTIONAL:
            allowed = np.tril(np.ones((s, s), dtype=bool))
        else:
            allowed = np.ones((s, s), dtype=bool)
        return _attn_forward(x0, x0, p, "enc", allowed), x0

    def _forward(self, src_ids, tgt_in_ids, cross_limits: np.ndarray):
        """Logits over the vocabulary at every decoder position.

        cross_limits[i] = number of leading source positions decoder row i
        may attend to (must be >= 1).
        """
        src = np.asarray(src_ids, dtype=np.intp)
        tgt_in = np.asarray(tgt_in_ids, dtype=np.intp)
        self._check_len(len(src), "source")
        self._check_len(len(tgt_in), "target")
        if np.any(cross_limits < 1) or np.any(cross_limits > len(src)):
            raise ConfigError("cross-attention limits must lie in [1, source length]")
        p = self.params

        (henc, cache_enc), x0 = self._encode(src)
        tq = len(tgt_in)
        y0 = p["embed"][tgt_in] + p["pos"][:tq]
        causal = np.tril(np.ones((tq, tq), dtype=bool))
        y1, cache_self = _attn_forward(y0, y0, p, "dec_self", causal)
        cross_allowed = np.arange(len(src))[None, :] < cross_limits[:, None]
        y2, cache_cross = _attn_forward(y1, henc, p, "dec_cross", cross_allowed)
        h1 = y2 @ p["ff_w1"]
        relu = np.maximum(h1, 0.0)
        y3 = relu @ p["ff_w2"] + y2
        logits = y3 @ p["out_proj"]
        for name, val in (("encoder output", henc), ("logits", logits)):
            if not np.isfinite(val).all():
                raise NumericError(f"non-finite values in {name}")
        cache = {
            "src": src, "tgt_in": tgt_in, "x0": x0, "henc": henc,
            "enc": cache_enc, "self": cache_self, "cross": cache_cross,
            "y2": y2, "h1": h1, "relu": relu, "y3": y3,
        }
        return logits, cache

    def _backward(self, cache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        p = self.params
        grads = {name: np.zeros_like(val) for name, val in p.items()}

        y3 = cache["y3"]
        grads["out_proj"] += y3.T @ dlogits
        dy3 = dlogits @ p["out_proj"].T

        dy2 = dy3.copy()
        grads["ff_w2"] += cache["relu"].T @ dy3
        drelu = dy3 @ p["ff_w2"].T
        dh1 = drelu * (cache["h1"] > 0.0)
        grads["ff_w1"] += cache["y2"].T @ dh1
        dy2 += dh1 @ p["ff_w1"].T

        dy1, dhenc = _attn_backward(cache["cross"], dy2, p, "dec_cross", grads)
        dy0_q, dy0_kv = _attn_backward(cache["self"], dy1, p, "dec_self", grads)
        dy0 = dy0_q + dy0_kv

        tgt_in = cache["tgt_in"]
        np.add.at(grads["embed"], tgt_in, dy0)
        grads["pos"][:len(tgt_in)] += dy0

        dx0_q, dx0_kv = _attn_backward(cache["enc"], dhenc, p, "enc", grads)
        dx0 = dx0_q + dx0_kv
        src = cache["src"]
        np.add.at(grads["embed"], src, dx0)
        grads["pos"][:len(src)] += dx0
        return grads

    # -- public surface ---------------------------------------------------

    def next_dist(self, source_prefix, target_prefix) -> Distribution:
        return self.forward_next(source_prefix, target_prefix, cross_limit="all")

    def forward_next(self, source_prefix, target_prefix, cross_limit="all") -> Distribution:
        """Distribution of the next target token.

        The decoder input is BOS followed by ``target_prefix``; only the last
        position's prediction is returned. ``cross_limit`` caps how many
        source positions the decoder sees (``"all"`` = the whole prefix).
        """
        src = tuple(source_prefix)
        if not src:
            raise ConfigError("source prefix must be non-empty")
        limit = len(src) if cross_limit == "all" else int(cross_limit)
        if not (1 <= limit <= len(src)):
            raise ConfigError(f"cross_limit {cross_limit!r} outside [1, {len(src)}]")
        tgt_in = (self.vocab.bos,) + tuple(target_prefix)
        limits = np.full(len(tgt_in), limit, dtype=np.intp)
        logits, _ = self._forward(src, tgt_in, limits)
        return Distribution(_softmax_row(logits[-1]))

    def loss_and_grads(self, batch) -> tuple[float, dict[str, np.ndarray]]:
        """Mean token NLL over a batch plus exact gradients.

        Batch items are (source, target, limits) with limits either "full"
        or a per-target-position list of cross-attention caps.
        """
        if not batch:
            raise ConfigError("batch must be non-empty")
        total_nll = 0.0
        total_tokens = 0
        acc: dict[str, np.ndarray] | None = None
        for item in batch:
            nll, grads, n_tok = self._pair_nll_and_grads(*item)
            total_nll += nll
            total_tokens += n_tok
            if acc is None:
                acc = grads
            else:
                for name in acc:
                    acc[name] += grads[name]
        assert acc is not None
        scale = 1.0 / total_tokens
        for name in acc:
            acc[name] *= scale
        return total_nll * scale, acc

    def _pair_nll_and_grads(self, source, target, limits="full"):
        """Summed NLL of ``target`` given ``source`` and its exact gradients."""
        src = tuple(source)
        tgt = tuple(target)
        if not src or not tgt:
            raise ConfigError("source and target must be non-empty")
        tgt_in = (self.vocab.bos,) + tgt[:-1]
        if limits == "full":
            lim = np.full(len(tgt_in), len(src), dtype=np.intp)
        else:
            if len(limits) != len(tgt):
                raise ConfigError("need one cross-attention limit per target position")
            lim = np.asarray(limits, dtype=np.intp)
        logits, cache = self._forward(src, tgt_in, lim)
        rows = np.arange(len(tgt))
        nll = float(_log_softmax_nll(logits, list(tgt)).sum())
        dlogits = _softmax_rows(logits)
        dlogits[rows, list(tgt)] -= 1.0
        grads = self._backward(cache, dlogits)
        return nll, grads, len(tgt)

    def sentence_nlls(self, source, target, limits="full") -> np.ndarray:
        """Per-position -log p(y_t | ...), forward only."""
        src = tuple(source)
        tgt = tuple(target)
        tgt_in = (self.vocab.bos,) + tgt[:-1]
        if limits == "full":
            lim = np.full(len(tgt_in), len(src), dtype=np.intp)
        else:
            lim = np.asarray(limits, dtype=np.intp)
        logits, _ = self._forward(src, tgt_in, lim)
        return _log_softmax_nll(logits, list(tgt))

    def clone_params(self) -> dict[str, np.ndarray]:
        return {name: val.copy() for name, val in self.params.items()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for name, val in params.items():
            self.params[name][...] = val


def sgd_step(model: MicroModel, grads: dict[str, np.ndarray], lr: float) -> None:
    """In-place params -= lr * grads, re-checking finiteness afterwards."""
    if lr < 0:
        raise ConfigError("learning rate must be non-negative")
    for name, g in grads.items():
        model.params[name] -= lr * g
        if not np.isfinite(model.params[name]).all():
            raise NumericError(f"non-finite parameter tensor {name!r} after SGD step")


# ---------------------------------------------------------------------------
# Attention plumbing
# ---------------------------------------------------------------------------

def _softmax_row(row: np.ndarray) -> np.ndarray:
    e = np.exp(row - row.max())
    return e / e.sum()


def _softmax_rows(mat: np.ndarray) -> np.ndarray:
    e = np.exp(mat - mat.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax_nll(logits: np.ndarray, targets: list[int]) -> np.ndarray:
    """Per-row -log softmax(logits)[target]; stable even for extreme logits."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    return lse - shifted[np.arange(len(targets)), targets]


def _attn_forward(q_in, kv_in, params, block, allowed):
    """Single-head attention with residual: out = softmax(QK'/sqrt(d)) V Wo + q_in.

    ``allowed`` is a boolean (queries x keys) visibility mask; disallowed
    scores become -inf before the softmax, so their weights are exactly zero
    and masked positions cannot leak into the output.
    """
    d = q_in.shape[1]
    wq, wk, wv, wo = (params[f"{block}_{p}"] for p in ("q", "k", "v", "o"))
    q = q_in @ wq
    k = kv_in @ wk
    v = kv_in @ wv
    scores = (q @ k.T) / np.sqrt(d)
    scores = np.where(allowed, scores, -np.inf)
    attn = _softmax_rows(scores)
    ctx = attn @ v
    out = ctx @ wo + q_in
    cache = {"q_in": q_in, "kv_in": kv_in, "q": q, "k": k, "v": v,
             "attn": attn, "ctx": ctx}
    return out, cache


def _attn_backward(cache, dout, params, block, grads):
    """Gradients of _attn_forward; returns (d q_in, d kv_in)."""
    d = cache["q_in"].shape[1]
    wq, wk, wv, wo = (params[f"{block}_{p}"] for p in ("q", "k", "v", "o"))
    attn, v, q, k = cache["attn"], cache["v"], cache["q"], cache["k"]

    grads[f"{block}_o"] += cache["ctx"].T @ dout
    dctx = dout @ wo.T
    dattn = dctx @ v.T
    dv = attn.T @ dctx
    # softmax backward; masked cells have attn == 0 so their grads vanish
    dscores = attn * (dattn - (dattn * attn).sum(axis=1, keepdims=True))
    dq = (dscores @ k) / np.sqrt(d)
    dk = (dscores.T @ q) / np.sqrt(d)

    grads[f"{block}_q"] += cache["q_in"].T @ dq
    grads[f"{block}_k"] += cache["kv_in"].T @ dk
    grads[f"{block}_v"] += cache["kv_in"].T @ dv
    dq_in = dout + dq @ wq.T
    dkv_in = dk @ wk.T + dv @ wv.T
    return dq_in, dkv_in
