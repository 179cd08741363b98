"""Languages (total meaning -> message maps), the compositional/holistic
generators, distance kernels, topological similarity and the posterior
frequency of highly compositional languages.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import meanings as me
from .agents import MSG_LEN, VOCAB

ALPHABET = "abcdefghij"


@dataclass(frozen=True)
class Language:
    space: me.MeaningSpace
    mapping: dict                     # Meaning -> (sym, sym)

    def __post_init__(self):
        missing = [m for m in self.space.meanings if m not in self.mapping]
        if missing:
            raise ValueError(f"language is not total: missing {missing[:3]}...")
        for m, msg in self.mapping.items():
            if len(msg) != MSG_LEN or any(not 0 <= s < VOCAB for s in msg):
                raise ValueError(f"invalid message {msg} for {m}")

    def message(self, m):
        return self.mapping[m]

    def is_injective(self):
        return len(set(self.mapping.values())) == len(self.mapping)

    def messages(self):
        return [self.mapping[m] for m in self.space.meanings]

    def to_json(self):
        return {
            "alphabet": ALPHABET,
            "language": [
                {"meaning": m.label(),
                 "message": "".join(ALPHABET[s] for s in self.mapping[m])}
                for m in self.space.meanings
            ],
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def from_json(cls, obj, kind=None):
        alphabet = obj.get("alphabet", ALPHABET)
        entries = {me.Meaning.from_label(e["meaning"]):
                   tuple(alphabet.index(ch) for ch in e["message"])
                   for e in obj["language"]}
        if kind is None:
            kind = "bag" if me.Meaning(0, 0) not in entries else "concatenation"
        return cls(space=me.enumerate_meanings(kind), mapping=entries)

    @classmethod
    def load(cls, path, kind=None):
        with open(path) as fh:
            return cls.from_json(json.load(fh), kind=kind)


def compositional_language(space, assign_a=None, assign_b=None):
    """Positional code: first symbol encodes the A count, second the B count.

    Each assignment must map counts 0..5 to distinct symbols; defaults to
    the identity.
    """
    assign_a = list(assign_a) if assign_a is not None else list(range(me.COUNT_CLASSES))
    assign_b = list(assign_b) if assign_b is not None else list(range(me.COUNT_CLASSES))
    for name, a in (("first", assign_a), ("second", assign_b)):
        if len(a) != me.COUNT_CLASSES or len(set(a)) != me.COUNT_CLASSES:
            raise ValueError(f"{name}-position symbol assignment must be injective "
                             f"over counts 0..{me.MAX_COUNT}")
    mapping = {m: (assign_a[m.count_a], assign_b[m.count_b])
               for m in space.meanings}
    return Language(space=space, mapping=mapping)


def holistic_language(comp, rng):
    """Random re-pairing of the compositional language's messages: identical
    message multiset (so identical expressivity), no positional structure."""
    if not comp.is_injective():
        raise ValueError("holistic construction needs an injective source language")
    msgs = comp.messages()
    perm = rng.permutation(len(msgs))
    mapping = {m: msgs[perm[i]] for i, m in enumerate(comp.space.meanings)}
    return Language(space=comp.space, mapping=mapping)


def extract_language(speaker, space, image_seed=0):
    """Greedy (mode) message for every meaning: the speaker's deterministic
    language; image inputs use a fixed evaluation rendering."""
    from . import rng as rng_mod
    enc = me.encode_meanings(space.kind, space.meanings,
                             rng=rng_mod.stream(image_seed, "extract-render"),
                             fixed_layout=space.kind == "image")
    msgs = speaker.speak_greedy(enc)
    return Language(space=space,
                    mapping={m: tuple(int(s) for s in msgs[i])
                             for i, m in enumerate(space.meanings)})


def sample_language(speaker, space, rng, image_seed=0):
    """One message sampled per meaning from the speaker's distribution."""
    enc = me.encode_meanings(space.kind, space.meanings, rng=rng,
                             fixed_layout=space.kind == "image")
    msgs = speaker.speak_sample(enc, rng)
    return Language(space=space,
                    mapping={m: tuple(int(s) for s in msgs[i])
                             for i, m in enumerate(space.meanings)})


def hamming(m1, m2):
    """Differing count coordinates between two meanings: 0, 1 or 2."""
    return int(m1.count_a != m2.count_a) + int(m1.count_b != m2.count_b)


def edit_distance(s1, s2):
    """Levenshtein distance (unit costs), general DP over any two sequences."""
    n1, n2 = len(s1), len(s2)
    prev = list(range(n2 + 1))
    for i in range(1, n1 + 1):
        cur = [i] + [0] * n2
        for j in range(1, n2 + 1):
            cost = 0 if s1[i - 1] == s2[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[n2]


@dataclass(frozen=True)
class TopoSimResult:
    rho: float | None
    n_pairs: int

    @property
    def degenerate(self):
        return self.rho is None


def topological_similarity(lang, method="pearson"):
    """Correlation between pairwise meaning Hamming distances and message
    edit distances; degenerate (rho=None) when either side has no variance."""
    ms = lang.space.meanings
    dm, dx = [], []
    for m1, m2 in itertools.combinations(ms, 2):
        dm.append(hamming(m1, m2))
        dx.append(edit_distance(lang.mapping[m1], lang.mapping[m2]))
    n_pairs = len(dm)
    # distances are small integers, so the Pearson sums are exact in Python
    # ints; this makes perfectly correlated languages score exactly +/-1.0
    n = n_pairs
    sx, sy = sum(dm), sum(dx)
    sxx = n * sum(v * v for v in dm) - sx * sx
    syy = n * sum(v * v for v in dx) - sy * sy
    sxy = n * sum(a * b for a, b in zip(dm, dx)) - sx * sy
    if sxx == 0 or syy == 0:
        return TopoSimResult(rho=None, n_pairs=n_pairs)
    if method == "pearson":
        if sxy * sxy == sxx * syy:
            rho = 1.0 if sxy > 0 else -1.0
        else:
            rho = sxy / math.sqrt(sxx * syy)
    elif method == "spearman":
        from scipy.stats import spearmanr
        rho = float(spearmanr(dm, dx).statistic)
    else:
        raise ValueError(f"unknown correlation method {method!r}")
    return TopoSimResult(rho=rho, n_pairs=n_pairs)


def posterior_high_comp(speaker, space, rng, n_samples=200, threshold=0.6,
                        method="pearson"):
    """Fraction of sampled deterministic languages with rho above the
    threshold; degenerate samples count as not-high."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    high = 0
    for _ in range(n_samples):
        res = topological_similarity(sample_language(speaker, space, rng),
                                     method=method)
        if not res.degenerate and res.rho > threshold:
            high += 1
    return high / n_samples
