"""Experiment runner.

Subcommands: dyad, chain, learnability, metrics, render-dataset, validate.
Each run writes a self-describing directory: resolved config snapshot,
manifest, CSV outputs and language/parameter dumps.  `BAGSELECT_OUT` sets
the default output root.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import agents, illearn, kernels
from . import game as game_mod
from . import languages as la
from . import meanings as me
from . import rng as rng_mod
from .config import ExperimentConfig, load_config_file

VERSION = "0.1.0"


def _build_config(args):
    mapping = load_config_file(args.config) if args.config else {}
    cfg = ExperimentConfig.from_mapping(mapping)
    cfg.experiment = args.command
    for attr in ("representation", "generations", "learning_budget",
                 "interaction_budget", "language_kind", "emergent_checkpoint",
                 "n_seeds", "checkpoint_every", "max_iterations",
                 "language_file", "threshold", "n_samples"):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(cfg, attr, val)
    if getattr(args, "seed", None):
        cfg.seeds = list(args.seed)
    if getattr(args, "fixed_layout", False):
        cfg.fixed_layout = True
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def _check(cfg):
    problems = cfg.violations()
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        raise SystemExit(2)


def _run_dir(cfg):
    root = Path(cfg.output_dir or os.environ.get("BAGSELECT_OUT", "runs"))
    name = f"{cfg.experiment}_{cfg.representation}_s{'-'.join(map(str, cfg.seeds))}"
    if cfg.experiment == "learnability":
        name += f"_{cfg.language_kind}"
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(cfg, run_dir, extra=None):
    (run_dir / "config.cfg").write_text(cfg.to_text())
    manifest = {
        "version": VERSION,
        "numpy": np.__version__,
        "kernel_backend": kernels.BACKEND,
        "seeds": list(cfg.seeds),
        "experiment": cfg.experiment,
    }
    manifest.update(extra or {})
    (run_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_error_manifest(run_dir, exc):
    (run_dir / "error.json").write_text(
        json.dumps({"error": str(exc), "type": type(exc).__name__}, indent=2)
        + "\n")


def cmd_dyad(cfg, run_dir):
    space = me.enumerate_meanings(cfg.representation)
    hyper = cfg.hyper()
    budget = cfg.interaction_budget or illearn.INTERACT_CAP
    finals = {}
    for seed in cfg.seeds:
        speaker = agents.Speaker(cfg.representation, hyper, seed)
        listener = agents.Listener(cfg.representation, hyper, seed + 1)
        rng = rng_mod.stream(seed, "dyad", cfg.representation)
        report = game_mod.interaction_train(
            speaker, listener, space, budget, rng,
            on_checkpoint=lambda it, s: s >= 0.995)
        report.write_csv(run_dir / f"dyad_seed{seed}.csv")
        agents.save_checkpoint(speaker, run_dir / f"speaker_seed{seed}.npz")
        agents.save_checkpoint(listener, run_dir / f"listener_seed{seed}.npz")
        lang = la.extract_language(speaker, space)
        lang.dump(run_dir / f"language_seed{seed}.json")
        finals[seed] = report.final_success
        print(f"dyad seed {seed}: success {report.final_success:.3f} "
              f"after {report.iterations} iterations")
    return 0 if all(s >= 0.99 for s in finals.values()) else 1


def _resolve_budgets(cfg):
    hyper = cfg.hyper()
    learn = cfg.learning_budget
    interact = cfg.interaction_budget
    if not learn:
        learn = illearn.calibrate_learning_iterations(cfg.representation,
                                                      hyper=hyper)
        print(f"calibrated learning budget: {learn}")
    if not interact:
        interact = illearn.calibrate_interaction_iterations(cfg.representation,
                                                            hyper=hyper)
        print(f"calibrated interaction budget: {interact}")
    return learn, interact


def cmd_chain(cfg, run_dir):
    learn, interact = _resolve_budgets(cfg)
    for seed in cfg.seeds:
        lang_dir = run_dir / f"seed{seed}_languages"
        lang_dir.mkdir(exist_ok=True)

        def dump(rec, lang_dir=lang_dir):
            rec.language.dump(lang_dir / f"gen{rec.generation:03d}.json")
            print(f"  gen {rec.generation}: rho="
                  f"{'degenerate' if rec.rho is None else f'{rec.rho:.3f}'} "
                  f"p_high={rec.p_high_comp:.3f} success={rec.success:.3f}")

        print(f"chain seed {seed} ({cfg.representation}, G={cfg.generations})")
        records = illearn.run_chain(cfg.representation, cfg.generations, seed,
                                    learn, interact, hyper=cfg.hyper(),
                                    posterior_samples=cfg.n_samples,
                                    threshold=cfg.threshold,
                                    early_stop=cfg.early_stop,
                                    on_generation=dump)
        illearn.write_chain_csv(records, run_dir / f"chain_seed{seed}.csv")
        if len(records) < 1:
            return 1
    return 0


def cmd_learnability(cfg, run_dir):
    emergent_speaker = None
    if cfg.language_kind == "emergent":
        if not cfg.emergent_checkpoint:
            print("learnability: emergent kind needs --emergent-checkpoint",
                  file=sys.stderr)
            return 2
        emergent_speaker = agents.load_checkpoint(cfg.emergent_checkpoint)
    results = illearn.learnability_experiment(
        cfg.language_kind, cfg.representation, n_seeds=cfg.n_seeds,
        checkpoint_every=cfg.checkpoint_every,
        max_iterations=cfg.max_iterations, hyper=cfg.hyper(),
        base_seed=cfg.seeds[0], emergent_speaker=emergent_speaker)
    paths = illearn.write_learnability_csvs(results, cfg.language_kind, run_dir)
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_metrics(cfg, run_dir):
    if not cfg.language_file:
        print("metrics: needs --language dump.json", file=sys.stderr)
        return 2
    lang = la.Language.load(cfg.language_file)
    res = la.topological_similarity(lang)
    if res.degenerate:
        print("rho = degenerate (zero variance)")
    else:
        print(f"rho = {res.rho:.6g}")
    (run_dir / "metrics.json").write_text(json.dumps(
        {"rho": res.rho, "degenerate": res.degenerate,
         "n_pairs": res.n_pairs, "injective": lang.is_injective()},
        indent=2) + "\n")
    return 0


def cmd_render_dataset(cfg, run_dir):
    space = me.enumerate_meanings("image")
    rng = rng_mod.stream(cfg.seeds[0], "render-dataset")
    out = me.dump_dataset(space, run_dir / "images", rng,
                          fixed_layout=cfg.fixed_layout)
    print(f"wrote {len(space)} PGM images to {out}")
    return 0


def cmd_validate(args):
    try:
        mapping = load_config_file(args.config_file)
        cfg = ExperimentConfig.from_mapping(mapping)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    problems = cfg.violations()
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return 1
    print("ok: no violations")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bagselect",
        description="Emergent-communication experiments for numeric concepts")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file of dotted.key = value lines")
        p.add_argument("--representation",
                       choices=("concatenation", "image", "bag"))
        p.add_argument("--seed", type=int, action="append",
                       help="experiment seed (repeatable)")
        p.add_argument("--out", help="output root (default $BAGSELECT_OUT or ./runs)")

    p = sub.add_parser("dyad", help="train a speaker-listener dyad")
    common(p)
    p.add_argument("--interaction-budget", type=int, dest="interaction_budget")

    p = sub.add_parser("chain", help="run an iterated-learning chain")
    common(p)
    p.add_argument("--generations", type=int)
    p.add_argument("--learning-budget", type=int, dest="learning_budget")
    p.add_argument("--interaction-budget", type=int, dest="interaction_budget")

    p = sub.add_parser("learnability", help="learning curves for a language kind")
    common(p)
    p.add_argument("--language-kind", dest="language_kind",
                   choices=("compositional", "holistic", "emergent"))
    p.add_argument("--emergent-checkpoint", dest="emergent_checkpoint")
    p.add_argument("--n-seeds", type=int, dest="n_seeds")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--max-iterations", type=int, dest="max_iterations")

    p = sub.add_parser("metrics", help="topological similarity of a language dump")
    common(p)
    p.add_argument("--language", dest="language_file")

    p = sub.add_parser("render-dataset", help="dump the image dataset as PGM")
    common(p)
    p.add_argument("--fixed-layout", action="store_true", dest="fixed_layout")

    p = sub.add_parser("validate", help="check a config file without running")
    p.add_argument("config_file")
    return parser


_COMMANDS = {
    "dyad": cmd_dyad,
    "chain": cmd_chain,
    "learnability": cmd_learnability,
    "metrics": cmd_metrics,
    "render-dataset": cmd_render_dataset,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args)
    cfg = _build_config(args)
    _check(cfg)
    run_dir = _run_dir(cfg)
    _write_manifest(cfg, run_dir)
    try:
        return _COMMANDS[args.command](cfg, run_dir)
    except Exception as exc:
        _write_error_manifest(run_dir, exc)
        raise


if __name__ == "__main__":
    sys.exit(main())
