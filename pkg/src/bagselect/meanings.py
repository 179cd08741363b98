"""Meaning space (two object-type counts, 0..5 each) and its three input
representations: concatenated one-hots, rendered 32x32 images, and bags of
per-object one-hot tokens.  Also builds the 15-candidate sets for game
rounds and can dump the image dataset as PGM files for inspection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import rng as rng_mod

MAX_COUNT = 5
COUNT_CLASSES = MAX_COUNT + 1          # 0..5
CANDIDATES = 15
IMAGE_SIZE = 32
GLYPH = 5
# 3 rows x 4 cols of lattice cells covering the canvas
_ROW_EDGES = (0, 10, 21, 32)
_COL_EDGES = (0, 8, 16, 24, 32)
N_CELLS = (len(_ROW_EDGES) - 1) * (len(_COL_EDGES) - 1)

KINDS = ("concatenation", "image", "bag")


class Meaning(NamedTuple):
    count_a: int
    count_b: int

    def label(self):
        return f"{self.count_a}A{self.count_b}B"

    @classmethod
    def from_label(cls, s):
        a, rest = s.split("A")
        b = rest.rstrip("B")
        return cls(int(a), int(b))


@dataclass(frozen=True)
class MeaningSpace:
    kind: str
    meanings: tuple

    def __post_init__(self):
        object.__setattr__(self, "_lookup",
                           {m: i for i, m in enumerate(self.meanings)})

    def __len__(self):
        return len(self.meanings)

    def __contains__(self, m):
        return m in self._lookup

    def index(self, m):
        return self._lookup[m]


def enumerate_meanings(kind):
    """Canonical meaning space: lexicographic, 36 meanings (35 for bags,
    which exclude the empty bag)."""
    if kind not in KINDS:
        raise ValueError(f"unknown representation kind {kind!r}")
    ms = [Meaning(a, b)
          for a in range(COUNT_CLASSES) for b in range(COUNT_CLASSES)]
    if kind == "bag":
        ms = [m for m in ms if m != (0, 0)]
    return MeaningSpace(kind=kind, meanings=tuple(ms))


def encode_concatenation(m):
    """Two concatenated one-hot blocks of length 6 -> length-12 vector."""
    v = np.zeros(2 * COUNT_CLASSES)
    v[m.count_a] = 1.0
    v[COUNT_CLASSES + m.count_b] = 1.0
    return v


def encode_bag(m):
    """(count_a + count_b, 2) array of one-hot tokens: A = [0,1], B = [1,0]."""
    if m.count_a == 0 and m.count_b == 0:
        raise ValueError("the empty bag is not part of the bag meaning space")
    tokens = [[0.0, 1.0]] * m.count_a + [[1.0, 0.0]] * m.count_b
    return np.array(tokens)


def render_image(m, rng):
    """32x32 grayscale scene: each object occupies a random lattice cell.

    A objects are filled 5x5 squares, B objects hollow 5x5 squares; glyphs
    sit at the cell centre with +-1 pixel jitter, so they never touch.
    """
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
    total = m.count_a + m.count_b
    if total == 0:
        return img
    cells = rng.choice(N_CELLS, size=total, replace=False)
    kinds = ["a"] * m.count_a + ["b"] * m.count_b
    ncols = len(_COL_EDGES) - 1
    for cell, kind in zip(cells, kinds):
        r, c = divmod(int(cell), ncols)
        cy = (_ROW_EDGES[r] + _ROW_EDGES[r + 1]) // 2
        cx = (_COL_EDGES[c] + _COL_EDGES[c + 1]) // 2
        top = cy - GLYPH // 2 + rng.integers(-1, 2)
        left = cx - GLYPH // 2 + rng.integers(-1, 2)
        if kind == "a":
            img[top:top + GLYPH, left:left + GLYPH] = 1.0
        else:
            img[top:top + GLYPH, left:left + GLYPH] = 1.0
            img[top + 1:top + GLYPH - 1, left + 1:left + GLYPH - 1] = 0.0
    return img


def render_image_fixed(m, seed=0):
    """Deterministic layout per meaning (the --fixed-layout alternative)."""
    return render_image(m, rng_mod.stream(seed, "fixed-layout", m.count_a, m.count_b))


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple          # 15 distinct meanings
    target_index: int

    @property
    def target(self):
        return self.candidates[self.target_index]


def make_candidate_set(target, space, rng):
    """Target plus 14 distinct distractors sampled uniformly from the rest
    of the space; the target lands at a uniformly random position."""
    if len(space) < CANDIDATES:
        raise ValueError(
            f"meaning space of size {len(space)} cannot fill {CANDIDATES} candidates")
    others = [m for m in space.meanings if m != target]
    if len(others) == len(space):
        raise ValueError(f"target {target} not in the meaning space")
    picks = rng.choice(len(others), size=CANDIDATES - 1, replace=False)
    cands = [others[i] for i in picks]
    tpos = int(rng.integers(CANDIDATES))
    cands.insert(tpos, target)
    return CandidateSet(candidates=tuple(cands), target_index=tpos)


def encode_meanings(kind, meanings, rng=None, fixed_layout=False):
    """Batch-encode a list of meanings into the network input array.

    concatenation -> (n, 12); image -> (n, 1, 32, 32); bag -> (n, 10, 2)
    zero-padded (zero token rows contribute nothing downstream).
    """
    if kind == "concatenation":
        return np.stack([encode_concatenation(m) for m in meanings])
    if kind == "image":
        if fixed_layout:
            imgs = [render_image_fixed(m) for m in meanings]
        else:
            imgs = [render_image(m, rng) for m in meanings]
        return np.stack(imgs)[:, None, :, :]
    if kind == "bag":
        out = np.zeros((len(meanings), 2 * MAX_COUNT, 2))
        for i, m in enumerate(meanings):
            toks = encode_bag(m)
            out[i, :len(toks)] = toks
        return out
    raise ValueError(f"unknown representation kind {kind!r}")


def dump_dataset(space, out_dir, rng, fixed_layout=False):
    """Write one PGM (P5, maxval 255) per meaning plus a JSON index."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = {}
    for m in space.meanings:
        img = (render_image_fixed(m) if fixed_layout
               else render_image(m, rng))
        name = f"{m.label()}.pgm"
        data = (np.clip(img, 0, 1) * 255).astype(np.uint8)
        with open(out / name, "wb") as fh:
            fh.write(f"P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n".encode())
            fh.write(data.tobytes())
        index[name] = m.label()
    with open(out / "index.json", "w") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return out
