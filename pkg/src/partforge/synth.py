"""Synthetic planted-part datasets for desk-scale verification.

Each group owns a small set of prototype descriptor directions.  Every
image of the group carries each prototype at one random region slot
(plus additive noise); the remaining regions are fresh random
directions shared by no group.  Global descriptors are the mean of the
image's region descriptors.  The true planted slots are written next
to the manifest so recovery can be scored against ground truth.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ParamInvalidError
from .matrixio import RegionGeometry, save_geometry, save_matrix, write_manifest

IMAGE_WIDTH = 640.0
IMAGE_HEIGHT = 480.0


@dataclass
class SynthParams:
    """Knobs for the planted generator.

    ``noise`` is the relative perturbation added to every region;
    ``amplitude`` scales the prototypes against unit-norm background
    clutter.  ``task`` picks the split names: classification datasets
    get train/test splits, retrieval datasets get database/query
    splits plus optional per-query junk lists.
    """

    n_groups: int = 4
    images_per_group: int = 20
    regions_per_image: int = 50
    dim: int = 16
    planted_per_group: int = 5
    noise: float = 0.2
    amplitude: float = 3.0
    task: str = "classification"
    eval_per_group: int = 0  # test images (classification) or queries (retrieval)
    junk_per_query: int = 0

    def validate(self):
        if self.planted_per_group > self.regions_per_image:
            raise ParamInvalidError("more planted parts than regions per image")
        positive = {
            "n_groups": self.n_groups,
            "images_per_group": self.images_per_group,
            "regions_per_image": self.regions_per_image,
            "dim": self.dim,
            "planted_per_group": self.planted_per_group,
        }
        for name, value in positive.items():
            if value < 1:
                raise ParamInvalidError(f"{name} must be >= 1, got {value}")
        if self.noise < 0:
            raise ParamInvalidError("noise must be non-negative")
        if self.amplitude <= 0:
            raise ParamInvalidError("amplitude must be positive")
        if self.task not in ("classification", "retrieval"):
            raise ParamInvalidError(f"unknown task {self.task!r}")
        if self.junk_per_query < 0 or self.eval_per_group < 0:
            raise ParamInvalidError("split sizes must be non-negative")
        if self.junk_per_query >= self.images_per_group:
            raise ParamInvalidError("junk_per_query must leave real positives")


def _unit_rows(rng, count, dim):
    vectors = rng.standard_normal((count, dim))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)


def _make_image(rng, prototypes, params):
    """One image: planted prototype slots plus unit-norm clutter."""
    n_regions, dim = params.regions_per_image, params.dim
    slots = rng.choice(n_regions, size=prototypes.shape[0], replace=False)
    regions = _unit_rows(rng, n_regions, dim)
    regions[slots] = prototypes
    regions += params.noise * rng.standard_normal((n_regions, dim)) / np.sqrt(dim)
    planted = {int(slot): int(p) for p, slot in enumerate(slots)}
    return regions.T, planted  # (dim, n_regions) column-major


def _random_geometry(rng, n_regions) -> RegionGeometry:
    x0 = rng.uniform(0, IMAGE_WIDTH - 2, size=n_regions)
    y0 = rng.uniform(0, IMAGE_HEIGHT - 2, size=n_regions)
    x1 = x0 + rng.uniform(1, IMAGE_WIDTH - x0)
    y1 = y0 + rng.uniform(1, IMAGE_HEIGHT - y0)
    boxes = np.column_stack([x0, y0, x1, y1])
    return RegionGeometry(boxes=boxes, image_width=IMAGE_WIDTH, image_height=IMAGE_HEIGHT)


def synth_generate(params: SynthParams, seed, out_dir):
    """Write a planted dataset; returns (manifest_path, truth_path).

    Deterministic: the same parameters and seed reproduce the same
    bytes.  The truth document maps every image to its planted
    region -> prototype slots and records the prototypes per group.
    """
    params.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    prototypes = params.amplitude * _unit_rows(
        rng, params.n_groups * params.planted_per_group, params.dim
    ).reshape(params.n_groups, params.planted_per_group, params.dim)

    learn_split = "train" if params.task == "classification" else "database"
    eval_split = "test" if params.task == "classification" else "query"
    counts = [(learn_split, params.images_per_group), (eval_split, params.eval_per_group)]

    entries = []
    truth_planted = {}
    group_ids: dict[str, dict[int, list[str]]] = {learn_split: {}, eval_split: {}}
    for split, per_group in counts:
        for g in range(params.n_groups):
            group_ids[split].setdefault(g, [])
            for i in range(per_group):
                image_id = f"{split}-g{g}-{i:03d}"
                regions, planted = _make_image(rng, prototypes[g], params)
                globals_column = regions.mean(axis=1)[:, None]
                save_matrix(regions, out_dir / f"{image_id}.regions.dmx")
                save_matrix(globals_column, out_dir / f"{image_id}.global.dmx")
                save_geometry(_random_geometry(rng, params.regions_per_image),
                              out_dir / f"{image_id}.geom.dmx")
                entries.append({
                    "id": image_id,
                    "regions": f"{image_id}.regions.dmx",
                    "geometry": f"{image_id}.geom.dmx",
                    "global": f"{image_id}.global.dmx",
                    "label": f"g{g}",
                    "split": split,
                })
                truth_planted[image_id] = planted
                group_ids[split][g].append(image_id)

    junk = {}
    if params.task == "retrieval" and params.junk_per_query > 0:
        for g in range(params.n_groups):
            for query_id in group_ids[eval_split].get(g, []):
                junk[query_id] = group_ids[learn_split][g][:params.junk_per_query]

    manifest_path = out_dir / "manifest.json"
    write_manifest({"images": entries, "junk": junk}, manifest_path)

    truth_path = out_dir / "truth.json"
    truth_doc = {
        "params": asdict(params),
        "seed": seed,
        "planted": truth_planted,
        "prototypes": {
            str(g): prototypes[g].tolist() for g in range(params.n_groups)
        },
    }
    truth_path.write_text(json.dumps(truth_doc, indent=2, sort_keys=True), encoding="utf-8")
    return manifest_path, truth_path
