import csv

import numpy as np
import pytest

from newsbench.ensemble import (
    ensemble_eval,
    repeated_vote_accuracy,
    simulate_members,
    vote,
    vote_matrix,
    write_ensemble_csv,
)
from newsbench.errors import EnsembleError
from newsbench.model import ModelConfig, init_state
from newsbench.rng import named_rng

from test_model import TINY, make_batch

A, B, C = 0, 1, 2
LABELS = ["a", "b", "c"]


class TestVote:
    def test_strict_majority(self):
        rng = named_rng(0, "v")
        assert vote([A, A, A, B, C, B], rng) == A

    def test_single_member_identity(self):
        assert vote([C], named_rng(0, "v")) == C

    def test_empty_rejected(self):
        with pytest.raises(EnsembleError):
            vote([], named_rng(0, "v"))

    def test_output_always_among_inputs(self):
        rng = named_rng(1, "v")
        for _ in range(200):
            k = int(rng.integers(1, 9))
            votes = rng.integers(0, 5, size=k).tolist()
            assert vote(votes, rng) in votes

    def test_no_tie_member_permutation_invariant(self):
        rng = named_rng(2, "v")
        votes = [A, B, A, C, A]
        for _ in range(20):
            shuffled = list(rng.permutation(votes))
            assert vote(shuffled, named_rng(3, "t")) == A

    def test_two_way_tie_uniform_chi_square(self):
        """[A,A,B,B,C]: A and B each win half the time over 10,000 draws."""
        stats = pytest.importorskip("scipy.stats")
        rng = named_rng(4, "tie")
        counts = {A: 0, B: 0}
        for _ in range(10_000):
            winner = vote([A, A, B, B, C], rng)
            assert winner in counts  # C can never win
            counts[winner] += 1
        _, p = stats.chisquare(list(counts.values()))
        assert p > 0.001, f"tie-break skewed: {counts}, p={p:.2e}"

    def test_three_way_tie_uniform(self):
        stats = pytest.importorskip("scipy.stats")
        rng = named_rng(5, "tie3")
        counts = np.zeros(3, dtype=int)
        for _ in range(9_000):
            counts[vote([A, B, C], rng)] += 1
        _, p = stats.chisquare(counts)
        assert p > 0.001


class TestVoteMatrix:
    def test_shapes_and_determinism(self):
        rng = named_rng(6, "m")
        preds = rng.integers(0, 4, size=(5, 40))
        a = vote_matrix(preds, seed=1)
        b = vote_matrix(preds, seed=1)
        assert a.shape == (40,)
        np.testing.assert_array_equal(a, b)

    def test_bad_shape_rejected(self):
        with pytest.raises(EnsembleError):
            vote_matrix(np.zeros(5, dtype=int), seed=0)


class TestSimulatedMembers:
    def test_member_accuracy_close_to_target(self):
        truths, preds = simulate_members(6, 10_000, 23, accuracy=0.6, seed=0)
        assert preds.shape == (6, 10_000)
        for k in range(6):
            acc = np.mean(preds[k] == truths)
            assert abs(acc - 0.6) < 0.02  # ~4 sigma for n=10,000

    def test_errors_are_never_the_truth(self):
        truths, preds = simulate_members(3, 5_000, 23, accuracy=0.0, seed=1)
        assert not np.any(preds == truths[None, :])

    def test_six_members_gain_at_least_point_one(self):
        """The reference setup: 6 members at 0.6 accuracy, errors uniform
        over the 22 wrong labels; majority voting gains >= 0.1 accuracy."""
        truths, preds = simulate_members(6, 10_000, 23, accuracy=0.6, seed=2)
        voted = vote_matrix(preds, seed=3)
        ensemble_acc = float(np.mean(voted == truths))
        member_acc = float(np.mean(preds[0] == truths))
        assert ensemble_acc - member_acc >= 0.1, (
            f"ensemble {ensemble_acc:.3f} vs member {member_acc:.3f}"
        )

    def test_repeated_reporting(self):
        truths, preds = simulate_members(4, 2_000, 5, accuracy=0.5, seed=4)
        mean, std = repeated_vote_accuracy(truths, preds, repeats=5, seed=10)
        assert 0.5 < mean < 1.0
        assert std < 0.05
        again = repeated_vote_accuracy(truths, preds, repeats=5, seed=10)
        assert again == (mean, std)


def tiny_members(n, batch_seed=0):
    cfg = ModelConfig(**TINY)
    members = [init_state(cfg, seed=100 + k) for k in range(n)]
    batch = make_batch(named_rng(batch_seed, "eb"), 30, 10, cfg.vocab_size,
                       cfg.max_len)
    return members, batch


class TestEnsembleEval:
    def test_identical_members_equal_reports(self):
        members, batch = tiny_members(1)
        trio = [members[0]] * 3
        result = ensemble_eval(trio, batch, LABELS, seed=0, batch_size=8)
        base = result.member_reports[0]
        for report in result.member_reports[1:]:
            assert report.accuracy == base.accuracy
            assert report.micro_f1 == base.micro_f1
        assert result.ensemble_report.accuracy == base.accuracy
        assert result.ensemble_report.micro_f1 == base.micro_f1
        assert result.ensemble_report.macro_f1 == base.macro_f1

    def test_distinct_members_full_result(self):
        members, batch = tiny_members(3)
        result = ensemble_eval(members, batch, LABELS, seed=1, batch_size=8)
        assert len(result.member_reports) == 3
        assert result.member_names == ("M1", "M2", "M3")
        assert result.ensemble_preds.shape == (30,)
        assert set(result.ensemble_preds) <= {0, 1, 2}
        assert result.member_reports[0].mean_loss is not None

    def test_incompatible_member_named(self):
        members, batch = tiny_members(2)
        odd = init_state(ModelConfig(**{**TINY, "n_classes": 5}), seed=9)
        with pytest.raises(EnsembleError, match="M2"):
            ensemble_eval([members[0], odd], batch, LABELS, seed=0)

    def test_no_members_rejected(self):
        _, batch = tiny_members(1)
        with pytest.raises(EnsembleError, match="at least one"):
            ensemble_eval([], batch, LABELS, seed=0)

    def test_table_csv_layout(self, tmp_path):
        members, batch = tiny_members(2)
        result = ensemble_eval(members, batch, LABELS, seed=2, batch_size=8)
        path = tmp_path / "ensemble.csv"
        write_ensemble_csv(path, result)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["metric", "M1", "M2", "Ensemble"]
        metric_names = [r[0] for r in rows[1:]]
        assert "f1_micro" in metric_names and "accuracy" in metric_names
        f1_row = rows[metric_names.index("f1_micro") + 1]
        assert f1_row[1] == f"{result.member_reports[0].micro_f1:.6f}"
        assert f1_row[-1] == f"{result.ensemble_report.micro_f1:.6f}"
