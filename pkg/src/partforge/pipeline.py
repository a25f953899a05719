"""End-to-end orchestration: group, learn parts, encode, evaluate.

The same learning core backs two faces: manifest-driven functions
(:func:`learn_parts`, :func:`run_classification`,
:func:`run_retrieval`) and the in-memory :class:`PartFeaturizer`
estimator.  Learning proceeds group by group: discriminative
initialization of candidate parts, soft-assignment of the initial
scores, then either the annealed iterative solver or a direct
per-image Hungarian solve, and finally whitened part models from the
binary assignment.

Everything is deterministic given the configured seed: repeated runs
produce bit-identical banks, encodings, and reports.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import assignment as asg
from . import encoding as enc
from .errors import (
    ConfigInvalidError,
    MissingLabelsError,
    MissingQueriesError,
    SingularCovarianceError,
)
from .evaluation import (
    average_precision,
    classification_map,
    classify,
    mean_ap,
    rank_database,
    train_classifier,
    write_ranking,
    accuracy,
)
from .grouping import Partition, greedy_balance, iterative_balance, kmeans
from .matrixio import DatasetManifest, load_matrix, save_matrix
from .parts import LdaStats, default_ridge, init_parts, matching_matrix, part_models
from .validation import check_matrix

SOLVERS = ("isa", "huna")
GROUPINGS = ("greedy", "iterative")
MODES = ("unsupervised", "supervised")
PCA_SCOPES = ("all-regions", "part-regions")
DEFAULT_PCA_DIM = 512


@dataclass
class RunConfig:
    """Flat run configuration; every field doubles as a config-file key."""

    n_groups: int = 4
    n_parts: int = 100
    regions_per_image: int | None = None  # None: take the manifest's value
    grouping: str = "iterative"
    alpha: float = 0.01
    balance_rounds: int = 80
    solver: str = "isa"
    encoding: str = "wpcop"
    n_components: int | None = None  # None: min(512, descriptor dim)
    ridge: float | None = None
    tau: float = 0.01
    beta0: float = 1.0
    beta_growth: float = 2.0
    beta_max: float = 128.0
    inner_tol: float = 1e-4
    inner_max_iter: int = 50
    candidate_factor: int = 10
    svm_c: float = 1.0
    seed: int = 0
    mode: str = "unsupervised"
    pca_scope: str = "all-regions"
    include_junk_in_learning: bool = True
    normalize_regions: bool = False
    dim_sweep: tuple | None = None
    random_rank_repeats: int = 10

    def validate(self):
        if self.n_groups < 1 or self.n_parts < 1:
            raise ConfigInvalidError("n_groups and n_parts must be >= 1")
        if self.regions_per_image is not None and self.n_parts > self.regions_per_image:
            raise ConfigInvalidError(
                f"n_parts={self.n_parts} exceeds regions_per_image={self.regions_per_image}"
            )
        if self.solver not in SOLVERS:
            raise ConfigInvalidError(f"solver must be one of {SOLVERS}")
        if self.grouping not in GROUPINGS:
            raise ConfigInvalidError(f"grouping must be one of {GROUPINGS}")
        if self.encoding not in enc.ENCODERS:
            raise ConfigInvalidError(f"encoding must be one of {enc.ENCODERS}")
        if self.mode not in MODES:
            raise ConfigInvalidError(f"mode must be one of {MODES}")
        if self.pca_scope not in PCA_SCOPES:
            raise ConfigInvalidError(f"pca_scope must be one of {PCA_SCOPES}")
        if not 0.0 < self.tau < 1.0:
            raise ConfigInvalidError("tau must lie in (0, 1)")
        for name in ("alpha", "inner_tol", "beta0", "beta_max", "svm_c"):
            if getattr(self, name) <= 0:
                raise ConfigInvalidError(f"{name} must be positive")
        if self.beta_growth <= 1:
            raise ConfigInvalidError("beta_growth must exceed 1")
        return self

    def schedule(self) -> asg.AnnealSchedule:
        return asg.AnnealSchedule(
            beta0=self.beta0, beta_growth=self.beta_growth, beta_max=self.beta_max,
            inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter,
        )

    def to_document(self) -> dict:
        doc = asdict(self)
        if doc["dim_sweep"] is not None:
            doc["dim_sweep"] = list(doc["dim_sweep"])
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigInvalidError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if doc.get("dim_sweep") is not None:
            doc["dim_sweep"] = tuple(int(v) for v in doc["dim_sweep"])
        return cls(**doc).validate()


def _seed_stream(seed, *key):
    return np.random.SeedSequence(seed, spawn_key=key)


@dataclass
class PartBankSet:
    """Learned part banks plus the grouping they came from."""

    banks: list  # one (dim, n_parts) matrix per group
    partition: Partition
    stats: LdaStats | None
    provenance: dict = field(default_factory=dict)

    @property
    def n_groups(self) -> int:
        return len(self.banks)

    @property
    def n_parts(self) -> int:
        return self.banks[0].shape[1]

    @property
    def dim(self) -> int:
        return self.banks[0].shape[0]


def _maybe_normalize(columns, flag):
    if not flag:
        return columns
    norms = np.linalg.norm(columns, axis=0, keepdims=True)
    return columns / np.where(norms == 0, 1.0, norms)


def _streaming_stats(region_arrays, ridge) -> LdaStats:
    """Mean/covariance over all region columns without concatenation."""
    dim = region_arrays[0].shape[0]
    total = 0
    mean_acc = np.zeros(dim)
    for arr in region_arrays:
        mean_acc += arr.sum(axis=1)
        total += arr.shape[1]
    mu = mean_acc / total
    cov_acc = np.zeros((dim, dim))
    for arr in region_arrays:
        centered = arr - mu[:, None]
        cov_acc += centered @ centered.T
    sigma = cov_acc / total
    lam = default_ridge(sigma) if ridge is None else ridge
    try:
        sigma_inv = np.linalg.inv(sigma + lam * np.eye(dim))
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceError(f"covariance not invertible at ridge={lam}") from exc
    return LdaStats(mu=mu, sigma=sigma, sigma_inv=sigma_inv, ridge=float(lam))


def _group_ids_supervised(ids, labels) -> tuple[list[list[str]], list[str]]:
    if any(label is None for label in labels):
        raise MissingLabelsError("supervised mode needs a label on every learning image")
    classes = sorted(set(labels))
    if len(classes) < 1:
        raise MissingLabelsError("no classes found")
    groups = [[i for i, lab in zip(ids, labels) if lab == cls] for cls in classes]
    return groups, classes


def _learn_banks(region_arrays, ids, globals_matrix, labels, cfg: RunConfig,
                 regions_per_image: int) -> PartBankSet:
    """Shared learning core over in-memory arrays (column-major regions)."""
    cfg.validate()
    if cfg.n_parts > regions_per_image:
        raise ConfigInvalidError(
            f"n_parts={cfg.n_parts} exceeds regions per image {regions_per_image}"
        )
    index_of = {image_id: i for i, image_id in enumerate(ids)}

    if cfg.mode == "supervised":
        groups, classes = _group_ids_supervised(ids, labels)
        partition = Partition(
            groups=groups, method="classes",
            provenance={"seed": cfg.seed, "classes": classes},
        )
    else:
        if globals_matrix is None:
            raise ConfigInvalidError("unsupervised grouping needs global descriptors")
        globals_matrix = check_matrix(globals_matrix, "globals")
        centroids = kmeans(globals_matrix, cfg.n_groups, _seed_stream(cfg.seed, 0))
        if cfg.grouping == "greedy":
            index_groups = greedy_balance(centroids, globals_matrix)
        else:
            index_groups = iterative_balance(
                centroids, globals_matrix, alpha=cfg.alpha, n_rounds=cfg.balance_rounds
            ).groups
        groups = [[ids[i] for i in grp] for grp in index_groups]
        partition = Partition(
            groups=groups, method=cfg.grouping,
            provenance={"seed": cfg.seed, "alpha": cfg.alpha,
                        "balance_rounds": cfg.balance_rounds},
        )

    stats = _streaming_stats(region_arrays, cfg.ridge)
    schedule = cfg.schedule()
    banks = []
    for k, group in enumerate(partition.groups):
        member_idx = [index_of[image_id] for image_id in group]
        group_regions = np.hstack([region_arrays[i] for i in member_idx])
        in_group = np.zeros(len(ids), dtype=bool)
        in_group[member_idx] = True
        initial = init_parts(
            group_regions, region_arrays, in_group, stats, cfg.n_parts,
            _seed_stream(cfg.seed, 1, k), candidate_factor=cfg.candidate_factor,
        )
        soft = asg.soft_assign(matching_matrix(initial, group_regions),
                               cfg.beta0, regions_per_image)
        if cfg.solver == "isa":
            binary = asg.isa(soft, group_regions, stats, regions_per_image,
                             schedule=schedule, tau=cfg.tau)
        else:
            binary = asg.hungarian_per_image(soft, regions_per_image)
        banks.append(part_models(binary, group_regions, stats, len(group)))
    provenance = {
        "config": cfg.to_document(),
        "regions_per_image": regions_per_image,
        "n_images": len(ids),
    }
    return PartBankSet(banks=banks, partition=partition, stats=stats,
                       provenance=provenance)


def _learning_ids(manifest: DatasetManifest, cfg: RunConfig, split: str) -> list[str]:
    ids = manifest.ids(split)
    if split == "database" and not cfg.include_junk_in_learning:
        junked = {m for members in manifest.junk.values() for m in members}
        ids = [i for i in ids if i not in junked]
    return ids


def learn_parts(manifest: DatasetManifest, cfg: RunConfig,
                split: str | None = None) -> PartBankSet:
    """Run the full part-learning stage on one manifest split.

    ``split`` defaults to "train" when present, else "database".  In
    supervised mode the labeled classes replace computed groups and no
    grouping runs at all.
    """
    cfg.validate()
    if (cfg.regions_per_image is not None
            and cfg.regions_per_image != manifest.regions_per_image):
        raise ConfigInvalidError(
            f"config says {cfg.regions_per_image} regions per image but the "
            f"manifest has {manifest.regions_per_image}"
        )
    if split is None:
        split = "train" if manifest.ids("train") else "database"
    ids = _learning_ids(manifest, cfg, split)
    if not ids:
        raise ConfigInvalidError(f"split {split!r} has no images to learn from")
    region_arrays = [
        _maybe_normalize(manifest.load_regions(i), cfg.normalize_regions) for i in ids
    ]
    if cfg.mode == "supervised":
        globals_matrix = None
        labels = [manifest.label(i) for i in ids]
    else:
        globals_matrix = np.vstack([manifest.load_global(i) for i in ids])
        labels = None
    bank_set = _learn_banks(region_arrays, ids, globals_matrix, labels, cfg,
                            manifest.regions_per_image)
    bank_set.provenance["split"] = split
    return bank_set


@dataclass
class EncodedSet:
    ids: list[str]
    vectors: np.ndarray  # (n_images, dim)
    meta: dict

    def subset(self, wanted_ids) -> "EncodedSet":
        index = {image_id: i for i, image_id in enumerate(self.ids)}
        rows = [index[i] for i in wanted_ids]
        return EncodedSet(ids=list(wanted_ids), vectors=self.vectors[rows],
                          meta=dict(self.meta))


def _fit_encoding_pca(manifest, bank_set, cfg, n_components, learn_split):
    ids = _learning_ids(manifest, cfg, learn_split)
    if cfg.pca_scope == "all-regions":
        columns = np.hstack([
            _maybe_normalize(manifest.load_regions(i), cfg.normalize_regions) for i in ids
        ])
    else:  # part-regions: each part's best region per learning image
        picked = []
        for image_id in ids:
            regions = _maybe_normalize(manifest.load_regions(image_id),
                                       cfg.normalize_regions)
            scores = enc.part_scores(bank_set.banks, regions)
            picked.append(regions[:, np.argmax(scores, axis=1)])
        columns = np.hstack(picked)
    n_components = min(n_components, columns.shape[0], columns.shape[1])
    return enc.fit_pca(columns, n_components)


def encode_dataset(manifest: DatasetManifest, bank_set: PartBankSet, cfg: RunConfig,
                   splits=None) -> EncodedSet:
    """Encode every image of the requested splits, in manifest order."""
    cfg.validate()
    if splits is None:
        splits = VALID_ENCODE_SPLITS
    wanted = set(splits)
    ids = [i for i in manifest.ids() if manifest.record(i).split in wanted]
    pca = None
    n_components = None
    if cfg.encoding in ("pcop", "wpcop"):
        requested = cfg.n_components or min(DEFAULT_PCA_DIM, manifest.region_dim)
        learn_split = bank_set.provenance.get("split") or (
            "train" if manifest.ids("train") else "database")
        pca = _fit_encoding_pca(manifest, bank_set, cfg, requested, learn_split)
        n_components = pca.n_components_
    rows = []
    for image_id in ids:
        regions = _maybe_normalize(manifest.load_regions(image_id), cfg.normalize_regions)
        scores = enc.part_scores(bank_set.banks, regions)
        if cfg.encoding == "bop":
            rows.append(enc.encode_bop(scores))
        elif cfg.encoding == "sbop":
            rows.append(enc.encode_sbop(scores, manifest.load_geometry(image_id)))
        elif cfg.encoding == "pcop":
            rows.append(enc.encode_pcop(scores, regions, pca))
        else:
            rows.append(enc.encode_wpcop(scores, regions, pca))
    meta = {
        "kind": cfg.encoding,
        "n_parts": bank_set.n_parts,
        "n_groups": bank_set.n_groups,
        "n_components": n_components,
        "part_order": "group-major, parts ascending within each group",
        "dim": int(rows[0].shape[0]) if rows else 0,
    }
    return EncodedSet(ids=ids, vectors=np.vstack(rows) if rows else np.empty((0, 0)),
                      meta=meta)


VALID_ENCODE_SPLITS = ("train", "test", "database", "query")


def _normalized_rows(matrix):
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / np.where(norms == 0, 1.0, norms)


def _global_vectors(manifest, ids):
    return _normalized_rows(np.vstack([manifest.load_global(i) for i in ids]))


def _classification_metrics(train_vectors, train_labels, test_vectors, test_labels,
                            reg_c, seed):
    clf = train_classifier(train_vectors, train_labels, reg_c=reg_c, seed=seed)
    scores, predicted = classify(clf, test_vectors)
    acc = accuracy(predicted, test_labels)
    map_value, per_class = classification_map(scores, test_labels, clf.classes_)
    return {"accuracy": acc, "map": map_value, "per_class_ap": per_class}


def run_classification(manifest: DatasetManifest, cfg: RunConfig) -> dict:
    """Learn parts on the train split, encode, classify the test split.

    The report carries the part-encoding metrics alongside a
    global-descriptor baseline trained and scored identically.
    """
    cfg.validate()
    train_ids = manifest.ids("train")
    test_ids = manifest.ids("test")
    if not train_ids or not test_ids:
        raise ConfigInvalidError("classification needs non-empty train and test splits")
    train_labels = [manifest.label(i) for i in train_ids]
    test_labels = [manifest.label(i) for i in test_ids]
    if any(l is None for l in train_labels + test_labels):
        raise MissingLabelsError("classification needs labels on train and test images")

    bank_set = learn_parts(manifest, cfg, split="train")
    encoded = encode_dataset(manifest, bank_set, cfg, splits=("train", "test"))
    enc_train = encoded.subset(train_ids)
    enc_test = encoded.subset(test_ids)
    svm_seed = _seed_stream(cfg.seed, 2, 0)
    metrics = _classification_metrics(enc_train.vectors, train_labels,
                                      enc_test.vectors, test_labels,
                                      cfg.svm_c, svm_seed)
    baseline = _classification_metrics(_global_vectors(manifest, train_ids), train_labels,
                                       _global_vectors(manifest, test_ids), test_labels,
                                       cfg.svm_c, _seed_stream(cfg.seed, 2, 1))
    return {
        "task": "classification",
        "config": cfg.to_document(),
        "encoding_meta": encoded.meta,
        "metrics": metrics,
        "baseline_global": baseline,
    }


def _retrieval_map(query_ids, query_vectors, db_ids, db_vectors, manifest,
                   rankings_dir=None):
    per_query = {}
    for qid, qvec in zip(query_ids, query_vectors):
        ranking = rank_database(qvec, db_ids, db_vectors, query_id=qid)
        junk = manifest.junk_for(qid)
        qlabel = manifest.label(qid)
        relevance = [
            "junk" if image_id in junk
            else ("positive" if manifest.label(image_id) == qlabel else "negative")
            for image_id in ranking.ids()
        ]
        per_query[qid] = average_precision(relevance)
        if rankings_dir is not None:
            write_ranking(ranking.without(junk), Path(rankings_dir) / f"{qid}.txt")
    return mean_ap(per_query.values()), per_query


def _random_ranking_map(query_ids, db_ids, manifest, seed, repeats):
    rng = np.random.default_rng(_seed_stream(seed, 3))
    values = []
    for _ in range(repeats):
        for qid in query_ids:
            junk = manifest.junk_for(qid)
            qlabel = manifest.label(qid)
            order = rng.permutation(len(db_ids))
            relevance = [
                "junk" if db_ids[i] in junk
                else ("positive" if manifest.label(db_ids[i]) == qlabel else "negative")
                for i in order
            ]
            values.append(average_precision(relevance))
    return float(np.mean(values))


def run_retrieval(manifest: DatasetManifest, cfg: RunConfig,
                  rankings_dir=None) -> dict:
    """Learn parts on the database split only, then rank it per query.

    Junk-listed images of each query are dropped from its average
    precision.  The report includes the global-descriptor baseline and
    a seeded random-ranking floor, plus an optional sweep over reduced
    encoding dimensions.  With ``rankings_dir`` set, the junk-filtered
    ranked id list of each query is written there as plain text, one
    id per line.
    """
    cfg.validate()
    query_ids = manifest.ids("query")
    db_ids = manifest.ids("database")
    if not query_ids:
        raise MissingQueriesError("retrieval needs a query split")
    if not db_ids:
        raise MissingQueriesError("retrieval needs a database split")
    labels = [manifest.label(i) for i in query_ids + db_ids]
    if any(l is None for l in labels):
        raise MissingLabelsError("retrieval needs labels to define positives")

    if rankings_dir is not None:
        Path(rankings_dir).mkdir(parents=True, exist_ok=True)
    bank_set = learn_parts(manifest, cfg, split="database")
    encoded = encode_dataset(manifest, bank_set, cfg, splits=("database", "query"))
    enc_db = encoded.subset(db_ids)
    enc_q = encoded.subset(query_ids)
    map_value, per_query = _retrieval_map(query_ids, enc_q.vectors, db_ids,
                                          enc_db.vectors, manifest,
                                          rankings_dir=rankings_dir)
    globals_db = _global_vectors(manifest, db_ids)
    globals_q = _global_vectors(manifest, query_ids)
    baseline_map, _ = _retrieval_map(query_ids, globals_q, db_ids, globals_db, manifest)
    random_map = _random_ranking_map(query_ids, db_ids, manifest, cfg.seed,
                                     cfg.random_rank_repeats)
    report = {
        "task": "retrieval",
        "config": cfg.to_document(),
        "encoding_meta": encoded.meta,
        "metrics": {"map": map_value, "per_query_ap": per_query},
        "baseline_global": {"map": baseline_map},
        "baseline_random": {"map": random_map},
    }
    if cfg.dim_sweep and cfg.encoding in ("pcop", "wpcop"):
        sweep = {}
        for dim in cfg.dim_sweep:
            swept = encode_dataset(manifest, bank_set, replace(cfg, n_components=int(dim)),
                                   splits=("database", "query"))
            value, _ = _retrieval_map(query_ids, swept.subset(query_ids).vectors,
                                      db_ids, swept.subset(db_ids).vectors, manifest)
            sweep[str(dim)] = value
        report["dim_sweep"] = sweep
    return report


def visualize_parts(manifest: DatasetManifest, bank_set: PartBankSet, image_id: str,
                    top_n: int = 200) -> dict:
    """Annotation of the top-scoring (part, region) pairs on one image.

    Parts are indexed globally (group-major).  Entries come sorted by
    score descending; ties break by part then region index.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    record = manifest.record(image_id)  # raises UnknownImageError
    regions = _maybe_normalize(manifest.load_regions(image_id), False)
    geometry = manifest.load_geometry(image_id)
    scores = enc.part_scores(bank_set.banks, regions)
    n_regions = scores.shape[1]
    flat = scores.ravel()
    # stable sort on the flattened matrix: score desc, then part, then region
    order = np.argsort(-flat, kind="stable")[:top_n]
    entries = [
        {
            "part": int(idx // n_regions),
            "group": int(idx // n_regions) // bank_set.n_parts,
            "region": int(idx % n_regions),
            "box": [float(v) for v in geometry.boxes[idx % n_regions]],
            "score": float(flat[idx]),
        }
        for idx in order
    ]
    return {
        "image_id": image_id,
        "split": record.split,
        "image_width": geometry.image_width,
        "image_height": geometry.image_height,
        "top_n": top_n,
        "entries": entries,
    }


def save_banks(bank_set: PartBankSet, out_dir) -> Path:
    """Write bank matrices, the partition, and a metadata document."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for k, bank in enumerate(bank_set.banks):
        name = f"bank_{k:03d}.dmx"
        save_matrix(bank, out_dir / name)
        files.append(name)
    bank_set.partition.save(out_dir / "partition.json")
    meta = {
        "n_groups": bank_set.n_groups,
        "n_parts": bank_set.n_parts,
        "dim": bank_set.dim,
        "files": files,
        "partition": "partition.json",
        "provenance": bank_set.provenance,
    }
    (out_dir / "banks.json").write_text(json.dumps(meta, indent=2, sort_keys=True),
                                        encoding="utf-8")
    return out_dir / "banks.json"


def load_banks(bank_dir) -> PartBankSet:
    bank_dir = Path(bank_dir)
    meta = json.loads((bank_dir / "banks.json").read_text(encoding="utf-8"))
    banks = [load_matrix(bank_dir / name).astype(np.float64) for name in meta["files"]]
    partition = Partition.load(bank_dir / meta["partition"])
    return PartBankSet(banks=banks, partition=partition, stats=None,
                       provenance=meta.get("provenance", {}))


def save_encoded(encoded: EncodedSet, path) -> None:
    """One matrix with one column per image, plus a JSON sidecar."""
    path = Path(path)
    save_matrix(encoded.vectors.T, path)
    sidecar = dict(encoded.meta, ids=encoded.ids)
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True), encoding="utf-8"
    )


class PartFeaturizer(BaseEstimator, TransformerMixin):
    """Learn part banks from region descriptors and encode images.

    ``fit`` expects X of shape (n_images, n_regions, dim); pass ``y``
    to use given classes as groups instead of balanced clustering.
    Whole-image descriptors for grouping default to the mean region
    descriptor and can be overridden with ``image_descriptors``.
    ``transform`` returns one row per image; the "sbop" encoding
    additionally needs per-image ``geometry``.
    """

    def __init__(self, n_groups=4, n_parts=10, solver="isa", grouping="iterative",
                 encoding="bop", alpha=0.01, balance_rounds=80, ridge=None, tau=0.01,
                 beta0=1.0, beta_growth=2.0, beta_max=128.0, inner_tol=1e-4,
                 inner_max_iter=50, candidate_factor=10, n_components=None,
                 random_state=0):
        self.n_groups = n_groups
        self.n_parts = n_parts
        self.solver = solver
        self.grouping = grouping
        self.encoding = encoding
        self.alpha = alpha
        self.balance_rounds = balance_rounds
        self.ridge = ridge
        self.tau = tau
        self.beta0 = beta0
        self.beta_growth = beta_growth
        self.beta_max = beta_max
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter
        self.candidate_factor = candidate_factor
        self.n_components = n_components
        self.random_state = random_state

    def _config(self, mode) -> RunConfig:
        return RunConfig(
            n_groups=self.n_groups, n_parts=self.n_parts, solver=self.solver,
            grouping=self.grouping, encoding=self.encoding, alpha=self.alpha,
            balance_rounds=self.balance_rounds, ridge=self.ridge, tau=self.tau,
            beta0=self.beta0, beta_growth=self.beta_growth, beta_max=self.beta_max,
            inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter,
            candidate_factor=self.candidate_factor, n_components=self.n_components,
            seed=self.random_state, mode=mode,
        ).validate()

    @staticmethod
    def _as_region_arrays(X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3:
            raise ValueError(f"X must be (n_images, n_regions, dim), got shape {X.shape}")
        return [X[i].T for i in range(X.shape[0])], X.shape[1]

    def fit(self, X, y=None, image_descriptors=None):
        region_arrays, regions_per_image = self._as_region_arrays(X)
        ids = [str(i) for i in range(len(region_arrays))]
        mode = "unsupervised" if y is None else "supervised"
        cfg = self._config(mode)
        if y is None:
            if image_descriptors is None:
                globals_matrix = np.vstack([arr.mean(axis=1) for arr in region_arrays])
            else:
                globals_matrix = check_matrix(image_descriptors, "image_descriptors")
            labels = None
        else:
            globals_matrix = None
            labels = [str(label) for label in np.asarray(y)]
        self.bank_set_ = _learn_banks(region_arrays, ids, globals_matrix, labels, cfg,
                                      regions_per_image)
        labels_out = np.empty(len(ids), dtype=int)
        for k, grp in enumerate(self.bank_set_.partition.groups):
            for image_id in grp:
                labels_out[int(image_id)] = k
        self.labels_ = labels_out
        if self.encoding in ("pcop", "wpcop"):
            columns = np.hstack(region_arrays)
            requested = self.n_components or min(DEFAULT_PCA_DIM, columns.shape[0])
            requested = min(requested, columns.shape[0], columns.shape[1])
            self.pca_ = enc.fit_pca(columns, requested)
        else:
            self.pca_ = None
        return self

    def transform(self, X, geometry=None):
        region_arrays, _ = self._as_region_arrays(X)
        banks = self.bank_set_.banks
        rows = []
        for i, regions in enumerate(region_arrays):
            scores = enc.part_scores(banks, regions)
            if self.encoding == "bop":
                rows.append(enc.encode_bop(scores))
            elif self.encoding == "sbop":
                if geometry is None:
                    raise ValueError("sbop encoding needs per-image geometry")
                rows.append(enc.encode_sbop(scores, geometry[i]))
            elif self.encoding == "pcop":
                rows.append(enc.encode_pcop(scores, regions, self.pca_))
            else:
                rows.append(enc.encode_wpcop(scores, regions, self.pca_))
        return np.vstack(rows)
