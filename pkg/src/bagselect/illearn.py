"""Iterated-learning chains and learnability experiments.

Each chain generation: a fresh speaker learns the previous generation's
(input, message) pairs (skipped at generation 1), the fresh dyad then plays
the game for a fixed interaction budget, and finally the speaker samples a
2,000-pair transmission dataset for the next generation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import game as game_mod
from . import languages as la
from . import meanings as me
from . import rng as rng_mod
from .agents import Hyper, Listener, Speaker
from .autodiff import SGD

TRANSMISSION_SIZE = 2000
LEARN_CAP = 50000
INTERACT_CAP = 15000


@dataclass(frozen=True)
class TransmissionDataset:
    pairs: tuple                      # ((Meaning, (sym, sym)), ...)

    def __post_init__(self):
        if len(self.pairs) != TRANSMISSION_SIZE:
            raise ValueError(
                f"transmission dataset must have {TRANSMISSION_SIZE} pairs, "
                f"got {len(self.pairs)}")

    def covers(self, space):
        seen = {m for m, _ in self.pairs}
        return all(m in seen for m in space.meanings)

    @classmethod
    def from_language(cls, lang):
        """Deterministic dataset from a fixed language (round-robin)."""
        ms = lang.space.meanings
        pairs = tuple((ms[i % len(ms)], lang.mapping[ms[i % len(ms)]])
                      for i in range(TRANSMISSION_SIZE))
        return cls(pairs=pairs)


@dataclass
class GenerationRecord:
    generation: int
    rho: float | None
    p_high_comp: float
    success: float
    language: la.Language


@dataclass
class LearningCurve:
    metric_kind: str                  # listener-accuracy | speaker-sequence-accuracy
                                      # | speaker-token-accuracy
    checkpoints: list = field(default_factory=list)   # (iteration, value)

    def add(self, iteration, value):
        if self.checkpoints and iteration <= self.checkpoints[-1][0]:
            raise ValueError("checkpoint iterations must strictly increase")
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"metric out of [0,1]: {value}")
        self.checkpoints.append((iteration, value))

    def first_crossing(self, level):
        for it, v in self.checkpoints:
            if v >= level:
                return it
        return None


def speaker_accuracy(speaker, lang, image_seed=0):
    """(sequence, token) greedy reproduction accuracy over the whole space."""
    space = lang.space
    enc = me.encode_meanings(space.kind, space.meanings,
                             rng=rng_mod.stream(image_seed, "acc-render"),
                             fixed_layout=space.kind == "image")
    out = speaker.speak_greedy(enc)
    ref = np.array([lang.mapping[m] for m in space.meanings])
    tok = float((out == ref).mean())
    seq = float((out == ref).all(axis=1).mean())
    return seq, tok


def _speaker_supervised_step(speaker, opt, batch_meanings, batch_msgs, rng):
    enc = me.encode_meanings(speaker.kind, batch_meanings, rng)
    per_step = speaker.step_logits(enc, batch_msgs)
    msgs = np.asarray(batch_msgs)
    total = None
    for t, logits in enumerate(per_step):
        l_t = ad.nll_from_logits(logits, msgs[:, t])
        total = l_t if total is None else total + l_t
    opt.zero_grad()
    total.backward()
    opt.step()
    return float(total.data)


def learning_phase(speaker, dataset, iterations, rng):
    """Supervised speaker training on (meaning, message) pairs; the listener
    is never touched in this phase."""
    if not dataset.pairs:
        raise ValueError("empty transmission dataset")
    if iterations == 0:
        return speaker
    opt = SGD(speaker.params(), lr=speaker.hyper.learning_rate, clip_norm=speaker.hyper.clip_norm)
    pairs = dataset.pairs
    for _ in range(iterations):
        idx = rng.integers(len(pairs), size=speaker.hyper.batch)
        batch = [pairs[i] for i in idx]
        _speaker_supervised_step(speaker, opt,
                                 [m for m, _ in batch],
                                 [msg for _, msg in batch], rng)
    return speaker


def calibrate_learning_iterations(encoder_kind, n_seeds=3, hyper=None,
                                  cap=LEARN_CAP, streak=200, base_seed=0):
    """Iterations a fresh speaker needs to fully learn the compositional
    language: per seed, train until greedy sequence accuracy holds at 1.0
    for `streak` consecutive iterations; budget is the max over seeds,
    rounded up to the next 500."""
    if n_seeds < 3:
        raise ValueError("calibration needs at least 3 seeds")
    hyper = hyper or Hyper()
    space = me.enumerate_meanings(encoder_kind)
    lang = la.compositional_language(space)
    dataset = TransmissionDataset.from_language(lang)
    budgets = []
    for s in range(n_seeds):
        seed = base_seed * 1000 + s
        speaker = Speaker(encoder_kind, hyper, seed)
        rng = rng_mod.stream(seed, "calibrate-learning")
        opt = SGD(speaker.params(), lr=hyper.learning_rate, clip_norm=hyper.clip_norm)
        run = 0
        for it in range(1, cap + 1):
            idx = rng.integers(len(dataset.pairs), size=hyper.batch)
            batch = [dataset.pairs[i] for i in idx]
            _speaker_supervised_step(speaker, opt,
                                     [m for m, _ in batch],
                                     [msg for _, msg in batch], rng)
            seq, _ = speaker_accuracy(speaker, lang)
            run = run + 1 if seq == 1.0 else 0
            if run >= streak:
                budgets.append(it)
                break
        else:
            raise RuntimeError(
                f"calibration did not converge within {cap} iterations "
                f"for {encoder_kind} seed {seed}")
    budget = max(budgets)
    return int(-(-budget // 500) * 500)


def calibrate_interaction_iterations(encoder_kind, n_seeds=1, hyper=None,
                                     cap=INTERACT_CAP, target=0.99,
                                     eval_rounds=500, base_seed=0):
    """Interaction budget from dyad pre-training: iterations until a fresh
    dyad holds >= `target` success, max over seeds, rounded up to 500."""
    hyper = hyper or Hyper()
    space = me.enumerate_meanings(encoder_kind)
    budgets = []
    for s in range(n_seeds):
        seed = base_seed * 1000 + s
        speaker = Speaker(encoder_kind, hyper, seed)
        listener = Listener(encoder_kind, hyper, seed + 500)
        rng = rng_mod.stream(seed, "calibrate-interaction")
        reached = []

        def stop(it, succ, reached=reached):
            if succ >= target:
                reached.append(it)
                return True
            return False

        game_mod.interaction_train(speaker, listener, space, cap, rng,
                                   eval_rounds=eval_rounds,
                                   final_eval_rounds=eval_rounds,
                                   on_checkpoint=stop)
        if not reached:
            raise RuntimeError(
                f"dyad pre-training did not reach {target} success within "
                f"{cap} iterations for {encoder_kind} seed {seed}")
        budgets.append(reached[0])
    return int(-(-max(budgets) // 500) * 500)


def transmission_phase(speaker, space, rng):
    """Sample 2,000 (meaning, message) pairs, cycling the meanings
    round-robin so the whole space is covered."""
    ms = space.meanings
    pairs = []
    while len(pairs) < TRANSMISSION_SIZE:
        chunk = ms[:TRANSMISSION_SIZE - len(pairs)]
        enc = me.encode_meanings(space.kind, chunk, rng)
        msgs = speaker.speak_sample(enc, rng)
        pairs.extend((m, tuple(int(x) for x in msgs[i]))
                     for i, m in enumerate(chunk))
    return TransmissionDataset(pairs=tuple(pairs))


def run_chain(encoder_kind, generations, seed, learning_budget,
              interaction_budget, hyper=None, posterior_samples=200,
              threshold=0.6, success_rounds=1000, early_stop=False,
              on_generation=None):
    """Full iterated-learning chain; returns one GenerationRecord per
    generation (partial list if a phase fails)."""
    if generations < 1:
        raise ValueError("need at least one generation")
    hyper = hyper or Hyper()
    space = me.enumerate_meanings(encoder_kind)
    records = []
    dataset = None
    high_streak = 0
    for t in range(1, generations + 1):
        speaker = Speaker(encoder_kind, hyper, seed=seed * 10000 + 2 * t)
        listener = Listener(encoder_kind, hyper, seed=seed * 10000 + 2 * t + 1)
        rng = rng_mod.stream(seed, "chain", encoder_kind, t)
        try:
            if t > 1:
                learning_phase(speaker, dataset, learning_budget, rng)
            report = game_mod.interaction_train(
                speaker, listener, space, interaction_budget, rng,
                final_eval_rounds=success_rounds)
            lang = la.extract_language(speaker, space)
            res = la.topological_similarity(lang)
            p_high = la.posterior_high_comp(speaker, space, rng,
                                            n_samples=posterior_samples,
                                            threshold=threshold)
            dataset = transmission_phase(speaker, space, rng)
            if not dataset.covers(space):
                raise RuntimeError("transmission dataset does not cover the space")
        except (ad.NonFiniteError, RuntimeError) as exc:
            import warnings
            warnings.warn(f"chain aborted at generation {t}: {exc}")
            return records
        rec = GenerationRecord(generation=t, rho=res.rho, p_high_comp=p_high,
                               success=report.final_success, language=lang)
        records.append(rec)
        if on_generation is not None:
            on_generation(rec)
        high_streak = high_streak + 1 if p_high > 0.95 else 0
        if early_stop and high_streak >= 3:
            break
    return records


def write_chain_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "rho", "degenerate_flag",
                    "p_high_comp", "success_rate"])
        for r in records:
            w.writerow([r.generation,
                        "" if r.rho is None else f"{r.rho:.6f}",
                        int(r.rho is None),
                        f"{r.p_high_comp:.6f}", f"{r.success:.6f}"])


def train_speaker_on_language(lang, encoder_kind, checkpoint_every,
                              max_iterations, seed, hyper=None):
    """Supervised speaker training on a fixed language; returns the
    (sequence-level, token-level) accuracy curves."""
    hyper = hyper or Hyper()
    speaker = Speaker(encoder_kind, hyper, seed)
    rng = rng_mod.stream(seed, "speaker-learnability")
    opt = SGD(speaker.params(), lr=hyper.learning_rate, clip_norm=hyper.clip_norm)
    seq_curve = LearningCurve("speaker-sequence-accuracy")
    tok_curve = LearningCurve("speaker-token-accuracy")
    seq, tok = speaker_accuracy(speaker, lang)
    seq_curve.add(0, seq)
    tok_curve.add(0, tok)
    ms = lang.space.meanings
    for it in range(1, max_iterations + 1):
        idx = rng.integers(len(ms), size=hyper.batch)
        batch = [ms[i] for i in idx]
        _speaker_supervised_step(speaker, opt, batch,
                                 [lang.mapping[m] for m in batch], rng)
        if it % checkpoint_every == 0 or it == max_iterations:
            seq, tok = speaker_accuracy(speaker, lang)
            seq_curve.add(it, seq)
            tok_curve.add(it, tok)
    return seq_curve, tok_curve


def listener_accuracy(listener, lang, rng, n_rounds=500):
    """Argmax candidate-selection accuracy on fresh rounds, messages taken
    from the language."""
    space = lang.space
    tgt_idx = rng.integers(len(space), size=n_rounds)
    targets = [space.meanings[i] for i in tgt_idx]
    cand_sets = [me.make_candidate_set(t, space, rng) for t in targets]
    msgs = np.array([lang.mapping[t] for t in targets])
    feats = game_mod.candidate_features(listener, space, cand_sets, rng)
    probs = listener.listen_with_features(msgs, feats).data
    choices = np.argmax(probs, axis=-1)
    return float(np.mean([c == cs.target_index
                          for c, cs in zip(choices, cand_sets)]))


def train_listener_on_language(lang, encoder_kind, checkpoint_every,
                               max_iterations, seed, hyper=None,
                               eval_rounds=500):
    """Train a fresh listener to pick the right candidate given messages of
    a fixed language; returns the accuracy curve."""
    hyper = hyper or Hyper()
    listener = Listener(encoder_kind, hyper, seed)
    rng = rng_mod.stream(seed, "listener-learnability")
    opt = SGD(listener.params(), lr=hyper.learning_rate, clip_norm=hyper.clip_norm)
    curve = LearningCurve("listener-accuracy")
    curve.add(0, listener_accuracy(listener, lang, rng, eval_rounds))
    space = lang.space
    for it in range(1, max_iterations + 1):
        tgt_idx = rng.integers(len(space), size=hyper.batch)
        targets = [space.meanings[i] for i in tgt_idx]
        cand_sets = [me.make_candidate_set(t, space, rng) for t in targets]
        msgs = np.array([lang.mapping[t] for t in targets])
        feats = game_mod.candidate_features(listener, space, cand_sets, rng)
        probs = listener.listen_with_features(msgs, feats)
        loss = ad.cross_entropy(probs, np.array([cs.target_index
                                                 for cs in cand_sets]))
        opt.zero_grad()
        loss.backward()
        opt.step()
        if it % checkpoint_every == 0 or it == max_iterations:
            curve.add(it, listener_accuracy(listener, lang, rng, eval_rounds))
    return curve


def make_test_language(language_kind, encoder_kind, rng=None,
                       emergent_speaker=None):
    space = me.enumerate_meanings(encoder_kind)
    if language_kind == "compositional":
        return la.compositional_language(space)
    if language_kind == "holistic":
        if rng is None:
            raise ValueError("holistic language needs an rng")
        return la.holistic_language(la.compositional_language(space), rng)
    if language_kind == "emergent":
        if emergent_speaker is None:
            raise ValueError("emergent language needs a converged dyad "
                             "speaker checkpoint")
        return la.extract_language(emergent_speaker, space)
    raise ValueError(f"unknown language kind {language_kind!r}")


def learnability_experiment(language_kind, encoder_kind, n_seeds=10,
                            checkpoint_every=100, max_iterations=8000,
                            hyper=None, base_seed=0, emergent_speaker=None):
    """Mean/std learning curves over independent fresh agents.

    Returns {metric_kind: [(iteration, mean, std), ...]} for the three
    metrics (speaker sequence, speaker token, listener accuracy).
    """
    lang = make_test_language(language_kind, encoder_kind,
                              rng=rng_mod.stream(base_seed, "holistic-lang"),
                              emergent_speaker=emergent_speaker)
    per_metric = {"speaker-sequence-accuracy": [],
                  "speaker-token-accuracy": [],
                  "listener-accuracy": []}
    for s in range(n_seeds):
        seed = base_seed * 1000 + s
        seq, tok = train_speaker_on_language(lang, encoder_kind,
                                             checkpoint_every,
                                             max_iterations, seed, hyper)
        lis = train_listener_on_language(lang, encoder_kind, checkpoint_every,
                                         max_iterations, seed, hyper)
        per_metric["speaker-sequence-accuracy"].append(seq)
        per_metric["speaker-token-accuracy"].append(tok)
        per_metric["listener-accuracy"].append(lis)
    out = {}
    for kind, curves in per_metric.items():
        its = [it for it, _ in curves[0].checkpoints]
        vals = np.array([[v for _, v in c.checkpoints] for c in curves])
        out[kind] = [(it, float(vals[:, i].mean()), float(vals[:, i].std()))
                     for i, it in enumerate(its)]
    return out


def write_learnability_csvs(results, language_kind, out_dir):
    """One CSV per metric: iteration, mean, std."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind, rows in results.items():
        role = "listener" if kind.startswith("listener") else "speaker"
        path = out / f"learnability_{language_kind}_{role}_{kind}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mean", "std"])
            for it, mean, std in rows:
                w.writerow([it, f"{mean:.6f}", f"{std:.6f}"])
        paths.append(path)
    return paths
