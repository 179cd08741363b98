"""Speaker and listener networks.

The speaker encodes its input with one of three encoders (matching the
representation kind), then unrolls a 2-step gated recurrent decoder over a
10-symbol vocabulary.  The listener embeds the 2-symbol message with its
own recurrent encoder and scores each of the 15 candidates by dot product
against independently encoded candidate features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import meanings as me
from . import rng as rng_mod
from .autodiff import Tensor

VOCAB = 10
MSG_LEN = 2


@dataclass(frozen=True)
class Hyper:
    embed: int = 32
    hidden: int = 64            # also the encoder feature width
    bag_rounds: int = 5
    tau: float = 2.0
    learning_rate: float = 0.1
    batch: int = 32
    clip_norm: float = 5.0


def glorot(rng, fan_in, fan_out, shape=None, name=None):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape if shape is not None else (fan_in, fan_out)
    return Tensor(rng.uniform(-a, a, size=shape), requires_grad=True, name=name)


def zeros(shape, name=None):
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


class Module:
    """Bare container tracking named parameter tensors."""

    def __init__(self):
        self._params = {}

    def param(self, name, tensor):
        tensor.name = name
        self._params[name] = tensor
        return tensor

    def adopt(self, prefix, child):
        for k, v in child._params.items():
            self._params[f"{prefix}.{k}"] = v
        return child

    def named_params(self):
        return dict(self._params)

    def params(self):
        return list(self._params.values())


class GRUCell(Module):
    def __init__(self, rng, n_in, n_hid):
        super().__init__()
        self.n_hid = n_hid
        for gate in ("z", "r", "n"):
            self.param(f"W{gate}", glorot(rng, n_in, n_hid))
            self.param(f"U{gate}", glorot(rng, n_hid, n_hid))
            self.param(f"b{gate}", zeros(n_hid))
        p = self._params
        self.Wz, self.Uz, self.bz = p["Wz"], p["Uz"], p["bz"]
        self.Wr, self.Ur, self.br = p["Wr"], p["Ur"], p["br"]
        self.Wn, self.Un, self.bn = p["Wn"], p["Un"], p["bn"]

    def step(self, x, h):
        z = ad.sigmoid(x @ self.Wz + h @ self.Uz + self.bz)
        r = ad.sigmoid(x @ self.Wr + h @ self.Ur + self.br)
        n = ad.tanh(x @ self.Wn + (r * h) @ self.Un + self.bn)
        one = Tensor(1.0)
        return (one + z * Tensor(-1.0)) * h + z * n


class MLPEncoder(Module):
    kind = "concatenation"

    def __init__(self, rng, hyper):
        super().__init__()
        d = hyper.hidden
        n_in = 2 * me.COUNT_CLASSES
        self.W1 = self.param("W1", glorot(rng, n_in, d))
        self.b1 = self.param("b1", zeros(d))
        self.W2 = self.param("W2", glorot(rng, d, d))
        self.b2 = self.param("b2", zeros(d))

    def __call__(self, x):
        if np.asarray(x).shape[-1] != 2 * me.COUNT_CLASSES:
            raise ad.ShapeError(f"MLP encoder expects length-12 vectors, got {np.asarray(x).shape}")
        h = ad.tanh(Tensor(x) @ self.W1 + self.b1)
        return ad.tanh(h @ self.W2 + self.b2)


class LeNetEncoder(Module):
    """LeNet-5 layout with the final layer widened to the feature width."""

    kind = "image"

    def __init__(self, rng, hyper):
        super().__init__()
        d = hyper.hidden
        self.c1 = self.param("c1", glorot(rng, 25, 6 * 25, shape=(6, 1, 5, 5)))
        self.cb1 = self.param("cb1", zeros((1, 6, 1, 1)))
        self.c2 = self.param("c2", glorot(rng, 6 * 25, 16 * 25, shape=(16, 6, 5, 5)))
        self.cb2 = self.param("cb2", zeros((1, 16, 1, 1)))
        self.f1 = self.param("f1", glorot(rng, 400, 120))
        self.fb1 = self.param("fb1", zeros(120))
        self.f2 = self.param("f2", glorot(rng, 120, 84))
        self.fb2 = self.param("fb2", zeros(84))
        self.f3 = self.param("f3", glorot(rng, 84, d))
        self.fb3 = self.param("fb3", zeros(d))

    def __call__(self, x):
        x = np.asarray(x)
        if x.ndim != 4 or x.shape[1:] != (1, me.IMAGE_SIZE, me.IMAGE_SIZE):
            raise ad.ShapeError(f"image encoder expects (n,1,32,32), got {x.shape}")
        h = ad.tanh(ad.conv2d(Tensor(x), self.c1) + self.cb1)
        h = ad.avg_pool2(h)
        h = ad.tanh(ad.conv2d(h, self.c2) + self.cb2)
        h = ad.avg_pool2(h)
        h = ad.reshape(h, (x.shape[0], 400))
        h = ad.tanh(h @ self.f1 + self.fb1)
        h = ad.tanh(h @ self.f2 + self.fb2)
        return ad.tanh(h @ self.f3 + self.fb3)


class BagEncoder(Module):
    """Permutation-invariant set encoder with sigmoid attention.

    Tokens are embedded and repeatedly pooled into a memory state; the
    per-token weights go through a sigmoid rather than a softmax, so the
    pooled readout scales with bag cardinality instead of being normalised.
    Zero padding rows embed to zero and contribute nothing.
    """

    kind = "bag"

    def __init__(self, rng, hyper):
        super().__init__()
        d = hyper.hidden
        self.rounds = hyper.bag_rounds
        self.Wtok = self.param("Wtok", glorot(rng, 2, d))
        self.Wq = self.param("Wq", glorot(rng, d, d))
        self.Wr = self.param("Wr", glorot(rng, d, d))
        self.bq = self.param("bq", zeros(d))
        self.Wo = self.param("Wo", glorot(rng, d, d))
        self.bo = self.param("bo", zeros(d))

    def __call__(self, x):
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[-1] != 2:
            raise ad.ShapeError(f"bag encoder expects (n, tokens, 2), got {x.shape}")
        n, t, _ = x.shape
        e = Tensor(x) @ self.Wtok                     # (n, t, d)
        d = self.Wq.data.shape[0]
        q = Tensor(np.zeros((n, d)))
        for _ in range(self.rounds):
            pooled = ad.sigmoid_attention_pool(e, q)  # (n, d)
            q = ad.tanh(q @ self.Wq + pooled @ self.Wr + self.bq)
        # linear readout: the feature scale must keep growing with bag
        # cardinality, a final squashing nonlinearity erases the counts
        return q @ self.Wo + self.bo


_ENCODERS = {"concatenation": MLPEncoder, "image": LeNetEncoder, "bag": BagEncoder}


def make_encoder(kind, rng, hyper):
    if kind not in _ENCODERS:
        raise ValueError(f"unknown representation kind {kind!r}")
    return _ENCODERS[kind](rng, hyper)


class Speaker(Module):
    def __init__(self, kind, hyper, seed):
        super().__init__()
        self.kind = kind
        self.hyper = hyper
        self.seed = seed
        rng = rng_mod.stream(seed, "init-speaker", kind)
        self.encoder = self.adopt("enc", make_encoder(kind, rng, hyper))
        self.gru = self.adopt("gru", GRUCell(rng, hyper.embed, hyper.hidden))
        self.Wout = self.param("Wout", glorot(rng, hyper.hidden, VOCAB))
        self.bout = self.param("bout", zeros(VOCAB))
        self.Esym = self.param("Esym", glorot(rng, VOCAB, hyper.embed))
        self.start = self.param("start", zeros((1, hyper.embed)))

    def _unroll(self, features, next_input):
        """Shared decoder loop; `next_input(logits_t, t) -> embedded input`."""
        n = features.data.shape[0]
        h = features
        x = Tensor(np.ones((n, 1))) @ self.start
        per_step = []
        for t in range(MSG_LEN):
            h = self.gru.step(x, h)
            logits = h @ self.Wout + self.bout
            x, record = next_input(logits, t)
            per_step.append(record)
        return per_step

    def step_logits(self, x_enc, messages):
        """Teacher-forced logits for supervised training: (n, 2) targets."""
        messages = np.asarray(messages)

        def feed(logits, t):
            emb = ad.embedding(self.Esym, messages[:, t])
            return emb, logits
        return self._unroll(self.encoder(x_enc), feed)

    def speak_greedy(self, x_enc):
        out = []

        def feed(logits, t):
            sym = np.argmax(logits.data, axis=-1)
            out.append(sym)
            return ad.embedding(self.Esym, sym), sym
        self._unroll(self.encoder(x_enc), feed)
        return np.stack(out, axis=1)

    def speak_sample(self, x_enc, rng):
        out = []

        def feed(logits, t):
            p = ad.softmax(logits).data
            u = rng.random(p.shape[:-1] + (1,))
            sym = (p.cumsum(axis=-1) > u).argmax(axis=-1)
            out.append(sym)
            return ad.embedding(self.Esym, sym), sym
        self._unroll(self.encoder(x_enc), feed)
        return np.stack(out, axis=1)

    def speak_gumbel(self, x_enc, rng=None, hard=True, noise=None):
        """Relaxed message: list of per-step simplex tensors plus indices."""
        relaxed, indices = [], []

        def feed(logits, t):
            y, idx = ad.gumbel_softmax(logits, self.hyper.tau, hard=hard,
                                       rng=rng, noise=noise)
            relaxed.append(y)
            indices.append(idx)
            return y @ self.Esym, y
        self._unroll(self.encoder(x_enc), feed)
        return relaxed, np.stack(indices, axis=1)


class Listener(Module):
    def __init__(self, kind, hyper, seed):
        super().__init__()
        self.kind = kind
        self.hyper = hyper
        self.seed = seed
        rng = rng_mod.stream(seed, "init-listener", kind)
        self.Esym = self.param("Esym", glorot(rng, VOCAB, hyper.embed))
        self.gru = self.adopt("gru", GRUCell(rng, hyper.embed, hyper.hidden))
        self.encoder = self.adopt("enc", make_encoder(kind, rng, hyper))

    def embed_message(self, message):
        """Message -> dense vector; accepts int arrays or relaxed tensors."""
        if isinstance(message, (list, tuple)) and isinstance(message[0], Tensor):
            steps = [y @ self.Esym for y in message]
            n = steps[0].data.shape[0]
        else:
            message = np.atleast_2d(np.asarray(message))
            steps = [ad.embedding(self.Esym, message[:, t]) for t in range(MSG_LEN)]
            n = message.shape[0]
        h = Tensor(np.zeros((n, self.hyper.hidden)))
        for x in steps:
            h = self.gru.step(x, h)
        return h

    def listen(self, message, encoded_candidates):
        """Probability distribution over the 15 candidates per batch row."""
        feats = self.encode_candidates(encoded_candidates)
        return self.listen_with_features(message, feats)

    def encode_candidates(self, encoded_candidates):
        x = np.asarray(encoded_candidates)
        if x.shape[1] != me.CANDIDATES:
            raise ValueError(f"expected {me.CANDIDATES} candidates, got {x.shape[1]}")
        n = x.shape[0]
        flat = x.reshape((n * me.CANDIDATES,) + x.shape[2:])
        feats = self.encoder(flat)
        return ad.reshape(feats, (n, me.CANDIDATES, self.hyper.hidden))

    def listen_with_features(self, message, feats):
        h = self.embed_message(message)
        n = feats.data.shape[0]
        scores = feats @ ad.reshape(h, (n, self.hyper.hidden, 1))
        return ad.softmax(ad.reshape(scores, (n, me.CANDIDATES)), axis=-1)


def init_agent(role, kind, hyper, seed):
    if role == "speaker":
        return Speaker(kind, hyper, seed)
    if role == "listener":
        return Listener(kind, hyper, seed)
    raise ValueError(f"unknown role {role!r}")


CHECKPOINT_VERSION = 1


def save_checkpoint(agent, path):
    meta = {
        "version": CHECKPOINT_VERSION,
        "role": "speaker" if isinstance(agent, Speaker) else "listener",
        "kind": agent.kind,
        "seed": agent.seed,
        "hyper": vars(agent.hyper) if not isinstance(agent.hyper, dict) else agent.hyper,
    }
    arrays = {k.replace(".", "/"): v.data for k, v in agent.named_params().items()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path):
    with np.load(path) as z:
        meta = json.loads(z["__meta__"].tobytes().decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        hyper = Hyper(**meta["hyper"])
        agent = init_agent(meta["role"], meta["kind"], hyper, meta["seed"])
        for name, tensor in agent.named_params().items():
            stored = z[name.replace(".", "/")]
            if stored.shape != tensor.data.shape:
                raise ValueError(f"checkpoint shape mismatch for {name}")
            tensor.data = stored.astype(np.float64)
    return agent
