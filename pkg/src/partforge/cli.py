"""Command-line interface.

Subcommands: synth, validate, group, learn, encode, classify,
retrieve, viz, oracle.  A flat JSON config file can set any run
option; command-line flags override config-file values.  On failure
the process exits nonzero after printing a one-line JSON error object
to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigInvalidError, PartforgeError
from .grouping import BalancedKMeans, Partition
from .matrixio import load_manifest
from .oracles import ORACLE_SUITES
from .pipeline import (
    RunConfig,
    encode_dataset,
    learn_parts,
    load_banks,
    run_classification,
    run_retrieval,
    save_banks,
    save_encoded,
    visualize_parts,
)
from .synth import SynthParams, synth_generate

import numpy as np


def _add_common(parser):
    parser.add_argument("--config", type=Path, help="flat JSON config file")
    parser.add_argument("--seed", type=int, help="master RNG seed")
    parser.add_argument("--out-dir", type=Path, help="output directory")
    parser.add_argument("--solver", choices=("isa", "huna"))
    parser.add_argument("--encoding", choices=("bop", "sbop", "pcop", "wpcop"))
    parser.add_argument("--groups", type=int, help="number of groups K")
    parser.add_argument("--parts", type=int, help="parts per group P")
    parser.add_argument("--dim", type=int, help="reduced encoding dimension d'")
    parser.add_argument("--grouping", choices=("greedy", "iterative"))
    parser.add_argument("--mode", choices=("unsupervised", "supervised"))


_FLAG_TO_KEY = {
    "seed": "seed",
    "solver": "solver",
    "encoding": "encoding",
    "groups": "n_groups",
    "parts": "n_parts",
    "dim": "n_components",
    "grouping": "grouping",
    "mode": "mode",
}


def _build_config(args) -> RunConfig:
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigInvalidError(f"no such config file: {path}")
        doc = json.loads(path.read_text(encoding="utf-8"))
    cfg = RunConfig.from_document(doc)
    overrides = {
        key: getattr(args, flag)
        for flag, key in _FLAG_TO_KEY.items()
        if getattr(args, flag, None) is not None
    }
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    return cfg


def _dump(document, path=None):
    text = json.dumps(document, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")
        print(str(path))


def _cmd_synth(args):
    params = SynthParams(
        n_groups=args.groups if args.groups is not None else 4,
        images_per_group=args.images_per_group,
        regions_per_image=args.regions,
        dim=args.descriptor_dim,
        planted_per_group=args.planted,
        noise=args.noise,
        amplitude=args.amplitude,
        task=args.task,
        eval_per_group=args.eval_per_group,
        junk_per_query=args.junk_per_query,
    )
    seed = args.seed if args.seed is not None else 0
    out_dir = args.out_dir or Path("synth-data")
    manifest_path, truth_path = synth_generate(params, seed, out_dir)
    _dump({"manifest": str(manifest_path), "truth": str(truth_path)})


def _cmd_validate(args):
    manifest = load_manifest(args.manifest)
    _dump({
        "images": len(manifest.images),
        "region_dim": manifest.region_dim,
        "regions_per_image": manifest.regions_per_image,
        "global_dim": manifest.global_dim,
        "splits": {
            split: len(manifest.ids(split))
            for split in ("train", "test", "database", "query")
        },
        "junk_queries": len(manifest.junk),
        "valid": True,
    })


def _cmd_group(args):
    cfg = _build_config(args)
    manifest = load_manifest(args.manifest)
    split = args.split or ("train" if manifest.ids("train") else "database")
    ids = manifest.ids(split)
    globals_matrix = np.vstack([manifest.load_global(i) for i in ids])
    model = BalancedKMeans(
        n_clusters=cfg.n_groups,
        balance=cfg.grouping,
        alpha=cfg.alpha,
        balance_rounds=cfg.balance_rounds,
        random_state=cfg.seed,
    ).fit(globals_matrix)
    groups = [[] for _ in range(cfg.n_groups)]
    for image_id, label in zip(ids, model.labels_):
        groups[label].append(image_id)
    partition = Partition(
        groups=groups, method=cfg.grouping,
        provenance={"seed": cfg.seed, "alpha": cfg.alpha,
                    "balance_rounds": cfg.balance_rounds, "split": split},
    )
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        out = args.out_dir / "partition.json"
        partition.save(out)
        print(str(out))
    else:
        _dump(partition.to_document())


def _cmd_learn(args):
    cfg = _build_config(args)
    manifest = load_manifest(args.manifest)
    bank_set = learn_parts(manifest, cfg, split=args.split)
    out_dir = args.out_dir or Path("banks")
    meta_path = save_banks(bank_set, out_dir)
    print(str(meta_path))


def _cmd_encode(args):
    cfg = _build_config(args)
    manifest = load_manifest(args.manifest)
    bank_set = load_banks(args.banks)
    splits = tuple(args.splits.split(",")) if args.splits else None
    encoded = encode_dataset(manifest, bank_set, cfg, splits=splits)
    out_dir = args.out_dir or Path("encoded")
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"encoded_{cfg.encoding}.dmx"
    save_encoded(encoded, out)
    print(str(out))


def _cmd_classify(args):
    cfg = _build_config(args)
    manifest = load_manifest(args.manifest)
    report = run_classification(manifest, cfg)
    _dump(report, args.out_dir / "classification.json" if args.out_dir else None)


def _cmd_retrieve(args):
    cfg = _build_config(args)
    if args.dim_sweep:
        cfg = replace(cfg, dim_sweep=tuple(int(v) for v in args.dim_sweep.split(",")))
    manifest = load_manifest(args.manifest)
    report = run_retrieval(manifest, cfg, rankings_dir=args.dump_rankings)
    _dump(report, args.out_dir / "retrieval.json" if args.out_dir else None)


def _cmd_viz(args):
    manifest = load_manifest(args.manifest)
    bank_set = load_banks(args.banks)
    annotation = visualize_parts(manifest, bank_set, args.image_id, top_n=args.top_n)
    _dump(annotation, args.out_dir / f"parts_{args.image_id}.json" if args.out_dir else None)


def _cmd_oracle(args):
    suite = ORACLE_SUITES[args.suite]
    seed = args.seed if args.seed is not None else 0
    report = suite(seed=seed) if args.cases is None else suite(cases=args.cases, seed=seed)
    _dump(report.to_document())
    if not report.passed:
        raise PartforgeError(f"oracle suite {args.suite!r} failed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partforge",
        description="Unsupervised mid-level part learning over region descriptors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a planted synthetic dataset")
    _add_common(p)
    p.add_argument("--images-per-group", type=int, default=20)
    p.add_argument("--regions", type=int, default=50)
    p.add_argument("--descriptor-dim", type=int, default=16)
    p.add_argument("--planted", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.2)
    p.add_argument("--amplitude", type=float, default=3.0)
    p.add_argument("--task", choices=("classification", "retrieval"),
                   default="classification")
    p.add_argument("--eval-per-group", type=int, default=5)
    p.add_argument("--junk-per-query", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="validate a dataset manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("group", help="balanced grouping of a split's images")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--split", choices=("train", "database"))
    p.set_defaults(func=_cmd_group)

    p = sub.add_parser("learn", help="learn part banks from a manifest")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--split", choices=("train", "database"))
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("encode", help="encode images with learned banks")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--banks", type=Path, required=True, help="directory from 'learn'")
    p.add_argument("--splits", help="comma-separated splits to encode")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("classify", help="full classification run with baseline")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("retrieve", help="full retrieval run with baselines")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--dim-sweep", help="comma-separated d' values, e.g. 512,256,128,64")
    p.add_argument("--dump-rankings", type=Path,
                   help="directory for per-query ranked id lists, one id per line")
    p.set_defaults(func=_cmd_retrieve)

    p = sub.add_parser("viz", help="top scoring (part, region) pairs of one image")
    _add_common(p)
    p.add_argument("manifest", type=Path)
    p.add_argument("--banks", type=Path, required=True)
    p.add_argument("--image-id", required=True)
    p.add_argument("--top-n", type=int, default=200)
    p.set_defaults(func=_cmd_viz)

    p = sub.add_parser("oracle", help="run an independent-oracle suite")
    p.add_argument("suite", choices=sorted(ORACLE_SUITES))
    p.add_argument("--cases", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except PartforgeError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
