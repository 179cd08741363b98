"""Experiment configuration: a flat file of `dotted.key = value` lines,
overridable by CLI flags.  Values parse as JSON scalars (ints, floats,
booleans, quoted strings, lists); bare words are strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from . import meanings as me

EXPERIMENTS = ("dyad", "chain", "learnability", "metrics", "render-dataset")


def parse_config_text(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def load_config_file(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


@dataclass
class ExperimentConfig:
    experiment: str = "dyad"
    representation: str = "concatenation"
    seeds: list = field(default_factory=lambda: [0])
    learning_rate: float = 0.1
    batch: int = 32
    embed: int = 32
    hidden: int = 64
    bag_rounds: int = 5
    tau: float = 2.0
    clip_norm: float = 5.0
    learning_budget: int = 0          # 0 -> calibrate
    interaction_budget: int = 0       # 0 -> calibrate
    generations: int = 20
    n_samples: int = 200
    threshold: float = 0.6
    n_seeds: int = 10
    checkpoint_every: int = 100
    max_iterations: int = 8000
    language_kind: str = "compositional"
    language_file: str = ""
    emergent_checkpoint: str = ""
    fixed_layout: bool = False
    early_stop: bool = False
    output_dir: str = ""

    _KEYMAP = {}        # dotted key -> field name, filled below

    @classmethod
    def from_mapping(cls, mapping):
        cfg = cls()
        unknown = []
        for key, val in mapping.items():
            name = cls._KEYMAP.get(key)
            if name is None:
                unknown.append(key)
                continue
            setattr(cfg, name, val)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cfg

    def to_text(self):
        lines = []
        for key in sorted(self._KEYMAP):
            val = getattr(self, self._KEYMAP[key])
            lines.append(f"{key} = {json.dumps(val)}")
        return "\n".join(lines) + "\n"

    def hyper(self):
        from .agents import Hyper
        return Hyper(embed=self.embed, hidden=self.hidden,
                     bag_rounds=self.bag_rounds, tau=self.tau,
                     learning_rate=self.learning_rate, batch=self.batch,
                     clip_norm=self.clip_norm)

    def violations(self):
        """Every violated invariant, without running anything."""
        v = []
        if self.experiment not in EXPERIMENTS:
            v.append(f"experiment: unknown value {self.experiment!r}")
        if self.representation not in me.KINDS:
            v.append(f"representation: unknown value {self.representation!r}")
        if self.tau <= 0:
            v.append("train.tau: temperature must be positive")
        if self.learning_rate <= 0:
            v.append("train.learning_rate: must be positive")
        if self.clip_norm < 0:
            v.append("train.clip_norm: must be >= 0 (0 disables clipping)")
        for name, val in (("train.batch", self.batch),
                          ("model.embed", self.embed),
                          ("model.hidden", self.hidden),
                          ("model.bag_rounds", self.bag_rounds),
                          ("chain.generations", self.generations),
                          ("metrics.n_samples", self.n_samples),
                          ("learnability.n_seeds", self.n_seeds),
                          ("learnability.checkpoint_every", self.checkpoint_every),
                          ("learnability.max_iterations", self.max_iterations)):
            try:
                ok = int(val) >= 1
            except (TypeError, ValueError):
                ok = False
            if not ok:
                v.append(f"{name}: must be >= 1")
        if not -1.0 < self.threshold < 1.0:
            v.append("metrics.threshold: must lie in (-1, 1)")
        if self.learning_budget < 0:
            v.append("chain.learning_budget: must be >= 0")
        if self.interaction_budget < 0:
            v.append("chain.interaction_budget: must be >= 0")
        if not self.seeds or any(int(s) < 0 for s in self.seeds):
            v.append("seeds: need at least one non-negative seed")
        if self.language_kind not in ("compositional", "holistic", "emergent"):
            v.append(f"learnability.language_kind: unknown value "
                     f"{self.language_kind!r}")
        return v


ExperimentConfig._KEYMAP = {
    "experiment": "experiment",
    "representation": "representation",
    "seeds": "seeds",
    "train.learning_rate": "learning_rate",
    "train.batch": "batch",
    "train.tau": "tau",
    "train.clip_norm": "clip_norm",
    "model.embed": "embed",
    "model.hidden": "hidden",
    "model.bag_rounds": "bag_rounds",
    "chain.learning_budget": "learning_budget",
    "chain.interaction_budget": "interaction_budget",
    "chain.generations": "generations",
    "chain.early_stop": "early_stop",
    "metrics.n_samples": "n_samples",
    "metrics.threshold": "threshold",
    "learnability.n_seeds": "n_seeds",
    "learnability.checkpoint_every": "checkpoint_every",
    "learnability.max_iterations": "max_iterations",
    "learnability.language_kind": "language_kind",
    "learnability.emergent_checkpoint": "emergent_checkpoint",
    "metrics.language_file": "language_file",
    "render.fixed_layout": "fixed_layout",
    "output_dir": "output_dir",
}

_FIELD_NAMES = {f.name for f in fields(ExperimentConfig)}
assert set(ExperimentConfig._KEYMAP.values()) <= _FIELD_NAMES
