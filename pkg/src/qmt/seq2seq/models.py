"""The three encoder/decoder configurations.

M1  two stacked encoder LSTMs; a decoder LSTM starts from the top encoder
    layer's final (h, c) and reads the previous target token.
M2  two stacked LSTMs (100 units) over the source positions, a 24-unit
    tanh dense layer and a softmax dense layer; output aligned with input.
M3  encoder LSTM (32), its final h repeated over the target length and fed
    (with the previous target token) to a decoder LSTM (32), then a
    time-distributed softmax dense layer.

Token inputs are one-hot; the input projection is computed as a row gather.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .layers import (dense_backward, dense_forward, gather_backward, lstm_backward,
                     lstm_forward)

BOS = 0  # decoder input at step 0; PAD doubles as start symbol


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    vocab_size: int
    units: int = 32
    units2: int = 32
    dense_units: int = 24

    def __post_init__(self):
        if self.variant not in ("M1", "M2", "M3"):
            raise ValueError(f"unknown model variant {self.variant!r}")

    @classmethod
    def default(cls, variant: str, vocab_size: int) -> "ModelConfig":
        if variant == "M2":
            return cls("M2", vocab_size, 100, 100, 24)
        return cls(variant, vocab_size, 32, 32, 24)

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def output_dim(self) -> int:
        return self.vocab_size


def _uniform(rng, fan_in, shape):
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def _lstm_params(rng, prefix, fan_in, H, input_shape=None):
    """Input weights, recurrent weights and bias with forget bias 1."""
    b = np.zeros(4 * H)
    b[H:2 * H] = 1.0
    return {
        f"{prefix}.W": _uniform(rng, fan_in, input_shape or (fan_in, 4 * H)),
        f"{prefix}.U": _uniform(rng, H, (H, 4 * H)),
        f"{prefix}.b": b,
    }


def build_model(cfg: ModelConfig, seed: int) -> "Seq2Seq":
    rng = np.random.default_rng(seed)
    V, H, H2 = cfg.vocab_size, cfg.units, cfg.units2
    p: dict[str, np.ndarray] = {}
    if cfg.variant == "M1":
        p.update(_lstm_params(rng, "enc1", V, H))
        p.update(_lstm_params(rng, "enc2", H, H2))
        p.update(_lstm_params(rng, "dec", V, H2))
        p["out.W"] = _uniform(rng, H2, (H2, V))
        p["out.b"] = np.zeros(V)
    elif cfg.variant == "M2":
        p.update(_lstm_params(rng, "l1", V, H))
        p.update(_lstm_params(rng, "l2", H, H2))
        p["proj.W"] = _uniform(rng, H2, (H2, cfg.dense_units))
        p["proj.b"] = np.zeros(cfg.dense_units)
        p["out.W"] = _uniform(rng, cfg.dense_units, (cfg.dense_units, V))
        p["out.b"] = np.zeros(V)
    else:
        p.update(_lstm_params(rng, "enc", V, H))
        dec = _lstm_params(rng, "dec", H + V, H2)
        # decoder input is [context, one-hot previous token]; split the block
        p["dec.Wc"] = dec.pop("dec.W")[:H]
        p["dec.Wy"] = _uniform(rng, H + V, (V, 4 * H2))
        p.update(dec)
        p["out.W"] = _uniform(rng, H2, (H2, V))
        p["out.b"] = np.zeros(V)
    return Seq2Seq(cfg, p)


def param_count(cfg: ModelConfig) -> int:
    """Closed form, for checking ``build_model``."""
    V, H, H2, D = cfg.vocab_size, cfg.units, cfg.units2, cfg.dense_units

    def lstm(i, h):
        return 4 * h * (i + h + 1)

    if cfg.variant == "M1":
        return lstm(V, H) + lstm(H, H2) + lstm(V, H2) + H2 * V + V
    if cfg.variant == "M2":
        return lstm(V, H) + lstm(H, H2) + H2 * D + D + D * V + V
    return lstm(V, H) + lstm(H + V, H2) + H2 * V + V


def shift_right(tgt: np.ndarray) -> np.ndarray:
    """Teacher-forcing inputs: BOS then the target shifted by one."""
    dec_in = np.empty_like(tgt)
    dec_in[:, 0] = BOS
    dec_in[:, 1:] = tgt[:, :-1]
    return dec_in


class Seq2Seq:
    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray]):
        self.cfg = cfg
        self.params = params

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    # -- encoder ------------------------------------------------------------
    def _encode(self, src):
        p = self.params
        mask = (src != 0).astype(float)
        if self.cfg.variant == "M3":
            xw = p["enc.W"][src] + p["enc.b"]
            hs, (h, c), cache = lstm_forward(xw, p["enc.U"], mask=mask)
            return (h, c), [("enc", src, cache)]
        xw1 = p["enc1.W"][src] + p["enc1.b"]
        hs1, _, c1 = lstm_forward(xw1, p["enc1.U"], mask=mask)
        xw2 = dense_forward(hs1, p["enc2.W"], p["enc2.b"])
        hs2, (h, c), c2 = lstm_forward(xw2, p["enc2.U"], mask=mask)
        return (h, c), [("enc1", src, c1), ("enc2", hs1, c2)]

    def _encode_backward(self, grads, enc_cache, dh, dc):
        p = self.params
        V = self.cfg.vocab_size
        if self.cfg.variant == "M3":
            _, src, cache = enc_cache[0]
            B, T = src.shape
            dxw, dU, _, _ = lstm_backward(np.zeros((B, T, dh.shape[1])), cache, dh, dc)
            grads["enc.U"] += dU
            grads["enc.W"] += gather_backward(src, dxw, V)
            grads["enc.b"] += dxw.sum(axis=(0, 1))
            return
        (_, src, cache1), (_, hs1, cache2) = enc_cache
        B, T = src.shape
        dxw2, dU2, _, _ = lstm_backward(np.zeros((B, T, dh.shape[1])), cache2, dh, dc)
        grads["enc2.U"] += dU2
        dhs1, dW2, db2 = dense_backward(dxw2, hs1, p["enc2.W"])
        grads["enc2.W"] += dW2
        grads["enc2.b"] += db2
        dxw1, dU1, _, _ = lstm_backward(dhs1, cache1)
        grads["enc1.U"] += dU1
        grads["enc1.W"] += gather_backward(src, dxw1, V)
        grads["enc1.b"] += dxw1.sum(axis=(0, 1))

    # -- full model -----------------------------------------------------------
    def forward(self, src: np.ndarray, dec_in: np.ndarray | None = None):
        """Logits (B, T_out, V) and a cache for ``backward``.

        ``dec_in`` are the decoder's previous-token inputs (teacher forcing);
        M2 ignores it and emits one prediction per source position.
        """
        p = self.params
        if self.cfg.variant == "M2":
            xw1 = p["l1.W"][src] + p["l1.b"]
            hs1, _, c1 = lstm_forward(xw1, p["l1.U"])
            xw2 = dense_forward(hs1, p["l2.W"], p["l2.b"])
            hs2, _, c2 = lstm_forward(xw2, p["l2.U"])
            a = np.tanh(dense_forward(hs2, p["proj.W"], p["proj.b"]))
            logits = dense_forward(a, p["out.W"], p["out.b"])
            return logits, ("M2", src, hs1, c1, hs2, c2, a)
        (h, c), enc_cache = self._encode(src)
        if self.cfg.variant == "M3":
            T = dec_in.shape[1]
            ctx = h @ p["dec.Wc"]
            xw = p["dec.Wy"][dec_in] + (ctx + p["dec.b"])[:, None, :]
            hs, _, dcache = lstm_forward(xw, p["dec.U"])
            logits = dense_forward(hs, p["out.W"], p["out.b"])
            return logits, ("M3", enc_cache, h, dec_in, hs, dcache, T)
        xw = p["dec.W"][dec_in] + p["dec.b"]
        hs, _, dcache = lstm_forward(xw, p["dec.U"], h0=h, c0=c)
        logits = dense_forward(hs, p["out.W"], p["out.b"])
        return logits, ("M1", enc_cache, dec_in, hs, dcache)

    def backward(self, dlogits, cache) -> dict[str, np.ndarray]:
        p = self.params
        V = self.cfg.vocab_size
        grads = {k: np.zeros_like(v) for k, v in p.items()}
        kind = cache[0]
        if kind == "M2":
            _, src, hs1, c1, hs2, c2, a = cache
            da, grads["out.W"], grads["out.b"] = dense_backward(dlogits, a, p["out.W"])
            dpre = da * (1 - a * a)
            dhs2, grads["proj.W"], grads["proj.b"] = dense_backward(dpre, hs2, p["proj.W"])
            dxw2, grads["l2.U"], _, _ = lstm_backward(dhs2, c2)
            dhs1, grads["l2.W"], grads["l2.b"] = dense_backward(dxw2, hs1, p["l2.W"])
            dxw1, grads["l1.U"], _, _ = lstm_backward(dhs1, c1)
            grads["l1.W"] = gather_backward(src, dxw1, V)
            grads["l1.b"] = dxw1.sum(axis=(0, 1))
            return grads
        if kind == "M3":
            _, enc_cache, h, dec_in, hs, dcache, T = cache
            dhs, grads["out.W"], grads["out.b"] = dense_backward(dlogits, hs, p["out.W"])
            dxw, grads["dec.U"], _, _ = lstm_backward(dhs, dcache)
            grads["dec.Wy"] = gather_backward(dec_in, dxw, V)
            dctx = dxw.sum(axis=1)
            grads["dec.b"] = dctx.sum(axis=0)
            grads["dec.Wc"] = h.T @ dctx
            dh = dctx @ p["dec.Wc"].T
            self._encode_backward(grads, enc_cache, dh, np.zeros_like(dh))
            return grads
        _, enc_cache, dec_in, hs, dcache = cache
        dhs, grads["out.W"], grads["out.b"] = dense_backward(dlogits, hs, p["out.W"])
        dxw, grads["dec.U"], dh0, dc0 = lstm_backward(dhs, dcache)
        grads["dec.W"] = gather_backward(dec_in, dxw, V)
        grads["dec.b"] = dxw.sum(axis=(0, 1))
        self._encode_backward(grads, enc_cache, dh0, dc0)
        return grads

    # -- inference -------------------------------------------------------------
    def step_decoder(self, src: np.ndarray, max_len: int, choose):
        """Greedy-style decoding; ``choose(t, probs)`` returns the next ids (B,)."""
        from .layers import sigmoid, softmax

        p = self.params
        if self.cfg.variant == "M2":
            logits, _ = self.forward(src)
            probs = softmax(logits)
            return np.stack([choose(t, probs[:, t]) for t in range(min(max_len, probs.shape[1]))], 1)
        (h_enc, c_enc), _ = self._encode(src)
        B = src.shape[0]
        H = p["dec.U"].shape[0]
        if self.cfg.variant == "M3":
            base = h_enc @ p["dec.Wc"] + p["dec.b"]
            Wy = p["dec.Wy"]
            h, c = np.zeros((B, H)), np.zeros((B, H))
        else:
            base = np.broadcast_to(p["dec.b"], (B, 4 * H))
            Wy = p["dec.W"]
            h, c = h_enc, c_enc
        prev = np.full(B, BOS)
        out = []
        for t in range(max_len):
            z = base + Wy[prev] + h @ p["dec.U"]
            i, f = sigmoid(z[:, :H]), sigmoid(z[:, H:2 * H])
            g, o = np.tanh(z[:, 2 * H:3 * H]), sigmoid(z[:, 3 * H:])
            c = f * c + i * g
            h = o * np.tanh(c)
            probs = softmax(h @ p["out.W"] + p["out.b"])
            prev = np.asarray(choose(t, probs))
            out.append(prev)
        return np.stack(out, 1)
