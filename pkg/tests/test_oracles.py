from fractions import Fraction

import numpy as np
import pytest

from partforge.errors import InstanceTooLargeError, NoPositivesError, TruthMismatchError
from partforge.matrixio import load_manifest
from partforge.oracles import (
    ORACLE_SUITES,
    PlantedTruth,
    make_planted_assignment_instance,
    oracle_ap,
    random_feasible_assignment,
    recovery_score,
    run_ap_suite,
    run_assignment_suite,
    run_lda_suite,
)
from partforge.pipeline import PartBankSet, RunConfig, learn_parts
from partforge.grouping import Partition
from partforge.synth import SynthParams, synth_generate
from partforge.validation import check_binary_feasible


class TestOracleAp:
    def test_exact_fraction(self):
        assert oracle_ap(["positive", "negative", "positive"]) == Fraction(5, 6)

    def test_neg_pos(self):
        assert oracle_ap(["negative", "positive"]) == Fraction(1, 2)

    def test_junk_skipped(self):
        assert oracle_ap(["junk", "junk", "positive"]) == Fraction(1)

    def test_size_cap(self):
        with pytest.raises(InstanceTooLargeError):
            oracle_ap(["positive"] * 21)

    def test_no_positive(self):
        with pytest.raises(NoPositivesError):
            oracle_ap(["negative"])


class TestGenerators:
    def test_random_feasible_assignment_is_feasible(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n_parts = int(rng.integers(1, 4))
            regions = int(rng.integers(n_parts, 7))
            images = int(rng.integers(1, 4))
            A = random_feasible_assignment(n_parts, regions, images, rng)
            check_binary_feasible(A, regions)

    def test_planted_instance_truth_is_feasible(self):
        X, A_true = make_planted_assignment_instance(0, 3, 6, 2)
        check_binary_feasible(A_true, 6)
        assert X.shape == (8, 12)

    def test_planted_instance_deterministic(self):
        first = make_planted_assignment_instance(7, 2, 5, 2)
        second = make_planted_assignment_instance(7, 2, 5, 2)
        np.testing.assert_array_equal(first[0], second[0])
        np.testing.assert_array_equal(first[1], second[1])


def _tiny_dataset(tmp_path, seed=0, noise=0.1):
    params = SynthParams(n_groups=2, images_per_group=4, regions_per_image=10,
                         dim=8, planted_per_group=2, noise=noise)
    manifest_path, truth_path = synth_generate(params, seed, tmp_path)
    return load_manifest(manifest_path), PlantedTruth.load(truth_path), params


class TestRecoveryScore:
    def test_prototype_banks_score_one(self, tmp_path):
        manifest, truth, params = _tiny_dataset(tmp_path, noise=0.0)
        groups = [[i for i in manifest.ids("train") if manifest.label(i) == f"g{g}"]
                  for g in range(2)]
        banks = [truth.prototypes[g].T for g in range(2)]
        bank_set = PartBankSet(
            banks=banks,
            partition=Partition(groups=groups, method="classes"),
            stats=None,
        )
        assert recovery_score(bank_set, manifest, truth) == 1.0

    def test_random_banks_near_chance(self, tmp_path):
        # amplitude 1 keeps planted and background norms equal, so a random
        # direction has no norm bias toward planted slots
        params = SynthParams(n_groups=2, images_per_group=4, regions_per_image=10,
                             dim=8, planted_per_group=2, noise=0.0, amplitude=1.0)
        manifest_path, truth_path = synth_generate(params, 0, tmp_path)
        manifest = load_manifest(manifest_path)
        truth = PlantedTruth.load(truth_path)
        groups = [[i for i in manifest.ids("train") if manifest.label(i) == f"g{g}"]
                  for g in range(2)]
        values = []
        for seed in range(20):
            rng = np.random.default_rng(seed)
            banks = [rng.standard_normal((8, 2)) for _ in range(2)]
            bank_set = PartBankSet(
                banks=banks,
                partition=Partition(groups=groups, method="classes"),
                stats=None,
            )
            values.append(recovery_score(bank_set, manifest, truth))
        chance = params.planted_per_group / params.regions_per_image
        assert abs(np.mean(values) - chance) < 0.15

    def test_recovery_degrades_with_noise(self, tmp_path):
        means = []
        for noise in (0.1, 2.5):
            values = []
            for seed in range(10):
                root = tmp_path / f"n{noise}-{seed}"
                params = SynthParams(n_groups=2, images_per_group=5,
                                     regions_per_image=10, dim=8,
                                     planted_per_group=2, noise=noise)
                manifest_path, truth_path = synth_generate(params, seed, root)
                manifest = load_manifest(manifest_path)
                truth = PlantedTruth.load(truth_path)
                cfg = RunConfig(n_groups=2, n_parts=2, solver="huna", seed=seed)
                bank_set = learn_parts(manifest, cfg, split="train")
                values.append(recovery_score(bank_set, manifest, truth))
            means.append(np.mean(values))
        assert means[0] >= means[1]

    def test_truth_mismatch(self, tmp_path):
        manifest, truth, _ = _tiny_dataset(tmp_path)
        truth.planted.pop(manifest.ids("train")[0])
        groups = [[i for i in manifest.ids("train") if manifest.label(i) == f"g{g}"]
                  for g in range(2)]
        bank_set = PartBankSet(
            banks=[np.ones((8, 2)), np.ones((8, 2))],
            partition=Partition(groups=groups, method="classes"),
            stats=None,
        )
        with pytest.raises(TruthMismatchError):
            recovery_score(bank_set, manifest, truth)


class TestOracleSuites:
    def test_lda_suite_passes(self):
        report = run_lda_suite(cases=30, seed=0)
        assert report.passed
        assert report.max_deviation < 1e-8

    def test_ap_suite_passes(self):
        report = run_ap_suite(cases=200, seed=0)
        assert report.passed

    def test_assignment_suite_passes(self):
        report = run_assignment_suite(cases=25, seed=0)
        assert report.passed
        assert report.max_deviation == 0.0

    def test_report_document_shape(self):
        report = run_lda_suite(cases=5, seed=1)
        doc = report.to_document()
        assert set(doc) == {"suite", "cases", "max_deviation", "failures", "passed"}

    def test_registry(self):
        assert set(ORACLE_SUITES) == {"lda", "ap", "assignment"}
