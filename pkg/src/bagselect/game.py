"""The Bag-Select referential game.

A round: the speaker sees only the target meaning and emits a 2-symbol
message; the listener picks one of 15 candidates.  Training runs batches of
independent rounds end-to-end through the straight-through Gumbel-softmax
channel; evaluation always uses greedy speaking and argmax listening.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import meanings as me
from .autodiff import SGD, Tensor


@dataclass
class RoundOutcome:
    target: me.Meaning
    message: np.ndarray
    choice_index: int
    success: bool
    loss: float


@dataclass
class DyadTrainReport:
    iterations: int
    checkpoints: list        # (iteration, mean_loss, success_rate)
    final_success: float

    @property
    def success_curve(self):
        return [s for _, _, s in self.checkpoints]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "mean_loss", "success_rate"])
            for it, loss, succ in self.checkpoints:
                w.writerow([it, f"{loss:.6f}", f"{succ:.6f}"])


def _encode_round_batch(space, targets, cand_sets, rng, fixed_layout=False):
    enc_t = me.encode_meanings(space.kind, targets, rng, fixed_layout)
    flat = [m for cs in cand_sets for m in cs.candidates]
    enc_c = me.encode_meanings(space.kind, flat, rng, fixed_layout)
    enc_c = enc_c.reshape((len(cand_sets), me.CANDIDATES) + enc_c.shape[1:])
    return enc_t, enc_c


def candidate_features(listener, space, cand_sets, rng, fixed_layout=False):
    """Listener features for every candidate, (n, 15, hidden).

    Concatenation and bag encodings are deterministic per meaning, so the
    whole space is encoded once and candidate rows are gathered by index
    (identical values and gradients, ~13x less encoder work than encoding
    every candidate separately).  Images are re-rendered per presentation
    and take the direct path.
    """
    if space.kind == "image" and not fixed_layout:
        flat = [m for cs in cand_sets for m in cs.candidates]
        enc_c = me.encode_meanings(space.kind, flat, rng)
        enc_c = enc_c.reshape((len(cand_sets), me.CANDIDATES) + enc_c.shape[1:])
        return listener.encode_candidates(enc_c)
    enc_all = me.encode_meanings(space.kind, space.meanings,
                                 fixed_layout=fixed_layout)
    feats_all = listener.encoder(enc_all)
    idx = np.array([space.index(m) for cs in cand_sets for m in cs.candidates])
    gathered = ad.embedding(feats_all, idx)
    return ad.reshape(gathered,
                      (len(cand_sets), me.CANDIDATES, listener.hyper.hidden))


def play_round(speaker, listener, target, space, mode, rng,
               listener_oracle=None, message_override=None):
    """Play one greedy/sampled round and score it.

    `listener_oracle` replaces the listener by exact meaning matching and
    `message_override` ablates the channel (constant message); both are
    test hooks.
    """
    if target not in space.meanings:
        raise ValueError(f"target {target} not in meaning space")
    cs = me.make_candidate_set(target, space, rng)
    enc_t = me.encode_meanings(space.kind, [target], rng)
    if mode == "greedy":
        msg = speaker.speak_greedy(enc_t)
    elif mode == "sample":
        msg = speaker.speak_sample(enc_t, rng)
    else:
        raise ValueError(f"unknown round mode {mode!r}")
    if message_override is not None:
        msg = np.atleast_2d(np.asarray(message_override))
    if listener_oracle is not None:
        choice = cs.candidates.index(target)
        probs = np.eye(me.CANDIDATES)[choice][None, :]
    else:
        feats = candidate_features(listener, space, [cs], rng)
        probs = listener.listen_with_features(msg, feats).data
        choice = int(np.argmax(probs[0]))
    loss = float(-np.log(max(probs[0, cs.target_index], 1e-300)))
    return RoundOutcome(target=target, message=msg[0], choice_index=choice,
                        success=choice == cs.target_index, loss=loss)


def evaluate_success(speaker, listener, space, n_rounds, rng,
                     listener_oracle=None, message_override=None):
    """Fraction of successful greedy/argmax rounds on fresh candidate sets."""
    if n_rounds <= 0:
        raise ValueError("n_rounds must be positive")
    wins = 0
    # batched for speed: one batch of n_rounds independent rounds
    tgt_idx = rng.integers(len(space), size=n_rounds)
    targets = [space.meanings[i] for i in tgt_idx]
    cand_sets = [me.make_candidate_set(t, space, rng) for t in targets]
    if listener_oracle is not None:
        return 1.0
    enc_t = me.encode_meanings(space.kind, targets, rng)
    msg = speaker.speak_greedy(enc_t)
    if message_override is not None:
        msg = np.broadcast_to(np.asarray(message_override), msg.shape)
    feats = candidate_features(listener, space, cand_sets, rng)
    probs = listener.listen_with_features(msg, feats).data
    choices = np.argmax(probs, axis=-1)
    wins = sum(int(c == cs.target_index) for c, cs in zip(choices, cand_sets))
    return wins / n_rounds


def interaction_train(speaker, listener, space, iterations, rng,
                      eval_every=50, eval_rounds=200, final_eval_rounds=1000,
                      soft_channel=False, on_checkpoint=None,
                      diversity_weight=2.0, diversity_frac=0.6):
    """Joint dyad training through the Gumbel-softmax channel.

    Loss per batch: mean cross-entropy of the listener's candidate
    distribution against the target index, plus a decaying message-diversity
    regularizer `lam(it) * sum_v pbar_v^2` per message position, where `pbar`
    is the batch-mean relaxed symbol distribution.  Minimizing the squared
    batch marginal spreads symbol usage and breaks the local optima where
    several meanings share one message; `lam` decays linearly from
    `diversity_weight` to 0 over the first `diversity_frac` of the budget, so
    the late-training objective is pure communication loss.  Recorded
    checkpoint losses are the cross-entropy term only.  Checkpoints are
    greedy/argmax evaluations on fresh rounds.
    """
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    hyper = speaker.hyper
    opt = SGD(speaker.params() + listener.params(), lr=hyper.learning_rate, clip_norm=hyper.clip_norm)
    checkpoints = []
    window_losses = []
    for it in range(iterations):
        tgt_idx = rng.integers(len(space), size=hyper.batch)
        targets = [space.meanings[i] for i in tgt_idx]
        cand_sets = [me.make_candidate_set(t, space, rng) for t in targets]
        enc_t = me.encode_meanings(space.kind, targets, rng)
        relaxed, _ = speaker.speak_gumbel(enc_t, rng=rng, hard=not soft_channel)
        feats = candidate_features(listener, space, cand_sets, rng)
        probs = listener.listen_with_features(relaxed, feats)
        target_pos = np.array([cs.target_index for cs in cand_sets])
        loss = ad.cross_entropy(probs, target_pos)
        if not np.isfinite(loss.data):
            raise ad.NonFiniteError(f"non-finite interaction loss at iteration {it}")
        window_losses.append(float(loss.data))
        lam = (diversity_weight
               * max(0.0, 1.0 - it / (diversity_frac * iterations))
               if diversity_weight else 0.0)
        if lam > 0.0:
            for y in relaxed:
                pbar = ad.mul(ad.sum_along(y, 0), 1.0 / hyper.batch)
                loss = ad.add(loss, ad.mul(
                    ad.sum_along(ad.mul(pbar, pbar), 0), lam))
        opt.zero_grad()
        loss.backward()
        opt.step()
        if (it + 1) % eval_every == 0 or it + 1 == iterations:
            n = final_eval_rounds if it + 1 == iterations else eval_rounds
            succ = evaluate_success(speaker, listener, space, n, rng)
            checkpoints.append((it + 1, float(np.mean(window_losses)), succ))
            window_losses = []
            if on_checkpoint is not None and on_checkpoint(it + 1, succ):
                break
    return DyadTrainReport(iterations=checkpoints[-1][0],
                           checkpoints=checkpoints,
                           final_success=checkpoints[-1][2])
