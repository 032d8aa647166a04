import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teleposture.errors import BudgetExceeded
from teleposture.flows import extract_d1
from teleposture.inference import (
    SUMMARY_COLUMNS,
    TARGETS,
    cluster_blocks,
    cluster_sample,
    enumerate_combinations,
    fit_block_regression,
    partition_blocks,
    summary_frame,
    write_summary_csv,
)

from conftest import attack_set, random_attack_set


def d1_of(sc):
    return extract_d1(sc.flows, window_seconds=sc.manifest["window_seconds"])


@pytest.fixture(scope="module")
def random_partition():
    a = random_attack_set(np.random.default_rng(3), 6000, hours=30, n_sources=80)
    return partition_blocks(a, 16)


class TestPartition:
    def test_one_block_is_the_total(self, rng):
        a = random_attack_set(rng, 500)
        part = partition_blocks(a, 1)
        for target in ("victims", "attacks", "attackers"):
            assert np.array_equal(getattr(part.blocks[0], target), getattr(part.total, target))

    def test_half_open_ranges(self):
        a = attack_set([1, 2, 3], [0, 0, 0], [63, 64, 65])
        part = partition_blocks(a, 4)
        assert part.block_of([63, 64, 65]).tolist() == [0, 1, 1]
        assert [s.attacks.sum() for s in part.blocks] == [1, 2, 0, 0]

    @pytest.mark.parametrize("B", [0, 3, 512])
    def test_b_must_divide(self, rng, B):
        with pytest.raises(ValueError):
            partition_blocks(random_attack_set(rng, 10), B)

    def test_conservation(self, random_partition):
        part = random_partition
        for target in ("victims", "attacks"):
            assert np.array_equal(part.target_matrix(target).sum(axis=1), part.target_series(target))
        assert np.all(part.target_matrix("attackers").sum(axis=1) >= part.target_series("attackers"))
        assert np.all(part.target_matrix("attackers").max(axis=1) <= part.target_series("attackers"))

    def test_uniform_scanner_equal_shares(self, scenario_cache):
        part = partition_blocks(d1_of(scenario_cache("uniform")), 16)
        counts = part.target_matrix("attacks").sum(axis=0)
        n, p = counts.sum(), 1 / 16
        assert np.all(np.abs(counts - n * p) <= 3 * math.sqrt(n * p * (1 - p)))


class TestRegression:
    def test_all_blocks_sum_exactly(self, random_partition):
        part = random_partition
        fit = fit_block_regression(part.target_series("attacks"), part.target_matrix("attacks"))
        assert fit.c == pytest.approx(0, abs=1e-8)
        assert np.allclose(fit.phi, 1, atol=1e-10)
        assert fit.pmad <= 1e-10

    def test_target_equal_to_one_block(self, random_partition):
        X = random_partition.target_matrix("victims")[:, :3]
        fit = fit_block_regression(X[:, 1], X)
        assert np.allclose(fit.phi, [0, 1, 0], atol=1e-8)
        assert fit.pmad <= 1e-10

    def test_rank_deficient_flagged(self, random_partition):
        x = random_partition.target_matrix("victims")[:, 0]
        fit = fit_block_regression(x * 2 + 1, np.column_stack([x, x]))
        assert fit.rank_deficient
        assert fit.pmad <= 1e-10
        assert np.allclose(fit.phi, [1, 1])

    def test_errors(self):
        with pytest.raises(ValueError):
            fit_block_regression(np.arange(5.0), np.ones((4, 1)))
        with pytest.raises(ValueError):
            fit_block_regression(np.arange(3.0) + 1, np.ones((3, 2)))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 5))
    def test_residuals_orthogonal(self, seed, b):
        rng = np.random.default_rng(seed)
        X = rng.poisson(20, (60, b)).astype(float)
        y = X @ rng.uniform(0, 3, b) + rng.normal(0, 5, 60) + 100
        fit = fit_block_regression(y, X)
        r = y - fit.fitted
        scale = np.linalg.norm(r) * np.linalg.norm(X, axis=0)
        assert np.all(np.abs(r @ X) <= 1e-6 * np.maximum(scale, 1))
        assert abs(r.sum()) <= 1e-6 * max(np.linalg.norm(r) * math.sqrt(60), 1)


class TestEnumerate:
    def test_full_combination(self, random_partition):
        for target in ("victims", "attacks"):
            res = enumerate_combinations(random_partition, 16, target)
            assert res.combinations == [tuple(range(16))]
            assert res.pmad <= 1e-10

    def test_summary_consistent(self, random_partition):
        res = enumerate_combinations(random_partition, 2, "attackers")
        assert len(res.combinations) == 120
        s = res.summary
        assert s["min"] == res.pmads.min() == res.pmad
        assert s["max"] == res.pmads.max()
        assert s["median"] == np.median(res.pmads)
        assert s["sd"] == pytest.approx(res.pmads.std(ddof=1))
        assert s["min"] <= s["median"] <= s["max"] and s["min"] <= s["mean"] <= s["max"]

    def test_uniform_symmetry(self, scenario_cache):
        part = partition_blocks(d1_of(scenario_cache("uniform")), 4)
        res = enumerate_combinations(part, 1, "victims")
        assert res.pmads.max() - res.pmads.min() <= 0.02
        assert res.pmads.max() <= 0.05

    def test_budget(self, random_partition):
        with pytest.raises(BudgetExceeded, match="cluster_sample"):
            enumerate_combinations(random_partition, 8, "victims", budget=1000)

    @pytest.mark.parametrize("b", [0, 17])
    def test_b_range(self, random_partition, b):
        with pytest.raises(ValueError):
            enumerate_combinations(random_partition, b, "victims")

    def test_bad_target(self, random_partition):
        with pytest.raises(ValueError):
            enumerate_combinations(random_partition, 1, "flows")

    def test_threads_agree(self, random_partition):
        one = enumerate_combinations(random_partition, 3, "attacks", threads=1)
        many = enumerate_combinations(random_partition, 3, "attacks", threads=4)
        assert np.array_equal(one.pmads, many.pmads)
        assert one.best == many.best

    def test_mean_nonincreasing(self, random_partition):
        means = [enumerate_combinations(random_partition, b, "victims").summary["mean"] for b in range(1, 5)]
        assert all(x >= y for x, y in zip(means[:-1], means[1:]))

    def test_summary_csv(self, random_partition, tmp_path):
        results = [enumerate_combinations(random_partition, b, t) for t in TARGETS for b in (1, 2)]
        path = tmp_path / "s.csv"
        write_summary_csv(results, path)
        text = path.read_text()
        assert text.splitlines()[0] == ",".join(SUMMARY_COLUMNS)
        assert len(text.splitlines()) == 7
        assert list(summary_frame(results).columns) == SUMMARY_COLUMNS


class TestCluster:
    def test_b_equals_B(self, random_partition):
        res = cluster_sample(random_partition, 16, "victims", samples=5)
        assert set(res.combinations) == {tuple(range(16))}
        assert res.pmad <= 1e-10
        assert sorted(res.clusters.tolist()) == list(range(1, 17))

    def test_deterministic(self, random_partition):
        a = cluster_sample(random_partition, 3, "attackers", samples=1, seed=7)
        b = cluster_sample(random_partition, 3, "attackers", samples=1, seed=7)
        assert a.combinations == b.combinations and np.array_equal(a.pmads, b.pmads)

    def test_one_block_per_cluster(self, random_partition):
        res = cluster_sample(random_partition, 4, "attacks", samples=30, seed=1)
        for combo in res.combinations:
            assert sorted(res.clusters[list(combo)].tolist()) == [1, 2, 3, 4]

    def test_all_zero_blocks_excluded(self):
        a = attack_set(np.arange(0, 40 * 3600, 600), np.zeros(240, int), np.arange(240) % 128)
        part = partition_blocks(a, 4)
        with pytest.warns(RuntimeWarning, match="all-zero"):
            labels = cluster_blocks(part, 2, "victims")
        assert labels[2] == labels[3] == 0
        assert sorted(labels[:2].tolist()) == [1, 2]

    def test_samples_validated(self, random_partition):
        with pytest.raises(ValueError):
            cluster_sample(random_partition, 2, "victims", samples=0)

    def test_halves_split(self, scenario_cache):
        part = partition_blocks(d1_of(scenario_cache("halves")), 16)
        res = cluster_sample(part, 2, "attackers", samples=100, seed=0)
        split = [(c[0] < 8) != (c[1] < 8) for c in res.combinations]
        assert np.mean(split) >= 0.95
