"""Independent oracles and generators used to cross-check the fast paths.

Every oracle here recomputes its quantity from the raw definition with
plain Python loops (no shared linear-algebra helpers), trading speed
for obviousness.  Instance sizes are capped; larger inputs are
refused rather than approximated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import EmptyPartError, InstanceTooLargeError, NoPositivesError, TruthMismatchError

RATIONAL_AP_CAP = 20


def oracle_lda(assign, descriptors, mu, sigma_inv) -> np.ndarray:
    """Part models by the scalar definition, one coordinate at a time.

    For each part: the assignment-weighted mean of its descriptors
    minus the global mean, multiplied through the inverse covariance
    with explicit summation loops.  Returns (dim, n_parts).
    """
    A = np.asarray(assign, dtype=np.float64)
    X = np.asarray(descriptors, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    sigma_inv = np.asarray(sigma_inv, dtype=np.float64)
    n_parts, n_regions = A.shape
    dim = X.shape[0]
    out = np.zeros((dim, n_parts))
    for p in range(n_parts):
        mass = 0.0
        for r in range(n_regions):
            mass += float(A[p, r])
        if mass <= 0.0:
            raise EmptyPartError(f"part {p} has no assigned mass")
        centered = [0.0] * dim
        for i in range(dim):
            weighted = 0.0
            for r in range(n_regions):
                weighted += float(A[p, r]) * float(X[i, r])
            centered[i] = weighted / mass - float(mu[i])
        for i in range(dim):
            value = 0.0
            for j in range(dim):
                value += float(sigma_inv[i, j]) * centered[j]
            out[i, p] = value
    return out


def oracle_ap(relevance) -> Fraction:
    """Exact rational average precision; refuses lists longer than 20."""
    kept = [value for value in relevance if value != "junk"]
    if len(kept) > RATIONAL_AP_CAP:
        raise InstanceTooLargeError(
            f"rational AP capped at {RATIONAL_AP_CAP} non-junk entries, got {len(kept)}"
        )
    n_positive = 0
    for value in kept:
        if value == "positive":
            n_positive += 1
    if n_positive == 0:
        raise NoPositivesError("no positive entry")
    total = Fraction(0)
    hits = 0
    rank = 0
    for value in kept:
        rank += 1
        if value == "positive":
            hits += 1
            total += Fraction(hits, rank)
    return total / n_positive


def random_feasible_assignment(n_parts, regions_per_image, n_images, rng) -> np.ndarray:
    """Uniformly random binary feasible assignment (for dominance checks)."""
    A = np.zeros((n_parts, n_images * regions_per_image))
    for i in range(n_images):
        slots = rng.choice(regions_per_image, size=n_parts, replace=False)
        for p, slot in enumerate(slots):
            A[p, i * regions_per_image + slot] = 1.0
    return A


def make_planted_assignment_instance(seed, n_parts, regions_per_image, n_images,
                                     dim=8, noise=0.05):
    """Planted region-to-part instance for solver tests.

    Returns (descriptors, true_assignment): descriptors are column-major
    (dim, n_images * regions_per_image); each image's planted slots
    carry one of ``n_parts`` well-separated prototype directions plus
    noise, and the true assignment marks those slots.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    prototypes = rng.standard_normal((n_parts, dim))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
    prototypes *= 3.0
    total = n_images * regions_per_image
    X = rng.standard_normal((dim, total)) / np.sqrt(dim)
    A_true = np.zeros((n_parts, total))
    for i in range(n_images):
        slots = rng.choice(regions_per_image, size=n_parts, replace=False)
        for p, slot in enumerate(slots):
            col = i * regions_per_image + slot
            X[:, col] = prototypes[p] + noise * rng.standard_normal(dim)
            A_true[p, col] = 1.0
    return X, A_true


@dataclass
class PlantedTruth:
    """Ground truth of a planted dataset."""

    planted: dict[str, dict[int, int]]  # image id -> region index -> prototype index
    prototypes: dict[int, np.ndarray]   # group -> (planted_per_group, dim)

    @classmethod
    def load(cls, path) -> "PlantedTruth":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        planted = {
            image_id: {int(slot): int(p) for slot, p in slots.items()}
            for image_id, slots in doc["planted"].items()
        }
        prototypes = {
            int(g): np.asarray(rows, dtype=np.float64)
            for g, rows in doc["prototypes"].items()
        }
        return cls(planted=planted, prototypes=prototypes)


def recovery_score(bank_set, manifest, truth: PlantedTruth) -> float:
    """Fraction of (group, image) pairs whose strongest part response
    lands on a planted region.

    For every learned group and every image assigned to it, the
    group's bank is scored on the image's regions and the single
    highest-scoring (part, region) cell is taken; the pair counts as
    recovered when that region is one of the image's planted slots.
    Chance level is the planted fraction of regions.
    """
    hits = 0
    pairs = 0
    for k, image_ids in enumerate(bank_set.partition.groups):
        bank = bank_set.banks[k]
        for image_id in image_ids:
            if image_id not in truth.planted:
                raise TruthMismatchError(f"no planted truth for image {image_id!r}")
            regions = manifest.load_regions(image_id)
            scores = bank.T @ regions
            best_region = int(np.unravel_index(np.argmax(scores), scores.shape)[1])
            hits += int(best_region in truth.planted[image_id])
            pairs += 1
    if pairs == 0:
        raise TruthMismatchError("no images to score")
    return hits / pairs


@dataclass
class OracleReport:
    """Outcome of one oracle suite run."""

    suite: str
    cases: int
    max_deviation: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_document(self) -> dict:
        return {
            "suite": self.suite,
            "cases": self.cases,
            "max_deviation": self.max_deviation,
            "failures": self.failures,
            "passed": self.passed,
        }


def run_lda_suite(cases=100, seed=0) -> OracleReport:
    """Matrix-path part models vs the scalar oracle on random instances."""
    from .parts import compute_lda_stats, part_models

    worst = 0.0
    failures = []
    for case in range(cases):
        rng = np.random.default_rng(np.random.SeedSequence((seed, case)))
        dim = int(rng.integers(2, 33))
        n_images = int(rng.integers(1, 4))
        regions = int(rng.integers(2, 7))
        n_parts = int(rng.integers(1, regions + 1))
        X = rng.standard_normal((dim, n_images * regions))
        stats = compute_lda_stats(X, ridge=0.1)
        A = random_feasible_assignment(n_parts, regions, n_images, rng)
        fast = part_models(A, X, stats, n_images)
        slow = oracle_lda(A, X, stats.mu, stats.sigma_inv)
        deviation = float(np.abs(fast - slow).max())
        worst = max(worst, deviation)
        if deviation > 1e-8:
            failures.append({"seed": [seed, case], "deviation": deviation})
    return OracleReport(suite="lda", cases=cases, max_deviation=worst, failures=failures)


def run_ap_suite(cases=1000, seed=0) -> OracleReport:
    """Float AP vs the rational oracle on random junk-bearing lists."""
    from .evaluation import average_precision

    failures = []
    for case in range(cases):
        rng = np.random.default_rng(np.random.SeedSequence((seed, case)))
        length = int(rng.integers(1, 21))
        relevance = list(rng.choice(["positive", "negative", "junk"], size=length))
        if "positive" not in relevance:
            relevance[int(rng.integers(length))] = "positive"
        fast = average_precision(relevance)
        exact = oracle_ap(relevance)
        if fast != float(exact):
            failures.append({"seed": [seed, case], "list": relevance})
    return OracleReport(suite="ap", cases=cases, max_deviation=0.0, failures=failures)


def run_assignment_suite(cases=50, seed=0) -> OracleReport:
    """Hungarian objective vs exhaustive enumeration on small instances."""
    from .assignment import brute_force_assign, hungarian_per_image
    from .parts import objective

    worst = 0.0
    failures = []
    for case in range(cases):
        rng = np.random.default_rng(np.random.SeedSequence((seed, case)))
        regions = int(rng.integers(2, 7))
        n_parts = int(rng.integers(1, min(4, regions) + 1))
        n_images = int(rng.integers(1, 4))
        M = rng.standard_normal((n_parts, n_images * regions))
        fast = objective(hungarian_per_image(M, regions), M)
        slow = objective(brute_force_assign(M, regions), M)
        deviation = abs(fast - slow)
        worst = max(worst, deviation)
        if deviation != 0.0:
            failures.append({"seed": [seed, case], "deviation": deviation})
    return OracleReport(suite="assignment", cases=cases, max_deviation=worst,
                        failures=failures)


ORACLE_SUITES = {
    "lda": run_lda_suite,
    "ap": run_ap_suite,
    "assignment": run_assignment_suite,
}
