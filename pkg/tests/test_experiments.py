import math

import numpy as np
import pytest
from scipy import stats

from densiscore import density as D
from densiscore.errors import TooFewSamples
from densiscore.experiments import (
    FUNCTIONS,
    ORACLE_MODE,
    SHIFT_MEANS,
    StudyResult,
    SyntheticSpec,
    augmented_indices,
    chunk_indices,
    chunk_stress,
    gen_shift_testsets,
    gen_synthetic,
    replication_weights,
    run_chunk_study,
    run_invariance_study,
    spread,
    synthetic_chunk_data,
)
from densiscore.metrics import METRICS, EvalSet, compute_report, full_report

from .oracles import metric_close


@pytest.fixture(scope="module")
def f1_study():
    return run_invariance_study(SyntheticSpec("f1", seed=0))


@pytest.fixture(scope="module")
def f2_chunk_data():
    return synthetic_chunk_data(SyntheticSpec("f2", seed=0))


class TestGenerators:
    def test_functions(self):
        assert FUNCTIONS["f1"](np.array(2.0)) == 4.0
        assert FUNCTIONS["f2"](np.array(-2.0)) == -4.0
        assert FUNCTIONS["f3"](np.array(0.0)) == 10.0

    def test_training_set(self):
        spec = SyntheticSpec("f3", seed=3)
        X, y = gen_synthetic(spec)
        assert X.shape == (1000, 1)
        x = X[:, 0]
        assert np.all((x[:300] >= -4) & (x[:300] < 4))
        noise = y - FUNCTIONS["f3"](x)
        assert np.all((noise >= 0) & (noise < 0.1))
        X2, y2 = gen_synthetic(spec)
        assert np.array_equal(X, X2) and np.array_equal(y, y2)

    def test_zero_noise(self):
        X, y = gen_synthetic(SyntheticSpec("f1", noise_high=0.0))
        assert np.array_equal(y, 2 * X[:, 0])

    def test_shift_sets(self):
        spec = SyntheticSpec("f1", seed=1)
        sets = gen_shift_testsets(spec, 1000)
        assert [mu for mu, _, _ in sets] == list(SHIFT_MEANS)
        assert np.all(np.diff([mu for mu, _, _ in sets]) == 1.0)
        for mu, X, y in sets:
            assert X.shape == (1000, 1) and y.shape == (1000,)
            normal = X[300:, 0]
            assert abs(normal.mean() - mu) <= 3 * 0.1 / math.sqrt(normal.size)

    def test_first_shift_matches_training(self):
        spec = SyntheticSpec("f1", seed=2)
        Xtr, _ = gen_synthetic(spec)
        _, Xte, _ = gen_shift_testsets(spec, 1000)[0]
        assert stats.ks_2samp(Xtr[:, 0], Xte[:, 0]).pvalue > 0.01
        assert not np.array_equal(Xtr, Xte)

    def test_too_small_test_sets(self):
        with pytest.raises(TooFewSamples):
            gen_shift_testsets(SyntheticSpec(), 199)

    def test_invalid_spec(self):
        with pytest.raises(ValueError):
            SyntheticSpec("f4")
        with pytest.raises(ValueError):
            SyntheticSpec(normal_sd=0.0)


class TestSpread:
    def test_values(self):
        assert spread([1.0, 2.0, 3.0]) == 1.0
        assert spread([5.0] * 7) == 0.0
        assert math.isnan(spread([1.0, None]))
        assert spread([-1.0, 1.0]) == 2.0 / 1e-12


class TestChunks:
    def test_counts_and_contiguity(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-4, 4, 1000)
        chunks = chunk_indices(x, 5)
        assert [len(c) for c in chunks] == [200] * 5
        for lo, hi in zip(chunks, chunks[1:]):
            assert x[lo].max() <= x[hi].min()
        sets = chunk_stress(x[:, None], x, x, 5, 5)
        assert [len(s) for s in sets] == [2000] * 5

    def test_uneven_split(self):
        chunks = chunk_indices(np.arange(1003.0), 5)
        assert [len(c) for c in chunks] == [201, 201, 201, 200, 200]
        with pytest.raises(TooFewSamples):
            chunk_indices(np.arange(4.0), 5)

    def test_replication_oracle(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(-4, 4, 500)
        a = FUNCTIONS["f2"](x) + rng.uniform(0, 0.1, 500)
        p = a + rng.standard_normal(500)
        base = EvalSet(a, p, x)
        for chunk, aug in zip(chunk_indices(x, 5), chunk_stress(x, a, p, 5, 5)):
            w = replication_weights(500, chunk, 5)
            got = compute_report(base, w).values
            want = compute_report(aug).values
            for m in METRICS:
                assert metric_close(m, got[m], want[m]), m

    def test_augmented_indices(self):
        idx = augmented_indices(4, np.array([1, 2]), 2)
        np.testing.assert_array_equal(idx, [0, 1, 2, 3, 1, 2, 1, 2])

    def test_constant_density_modes_agree(self, f2_chunk_data):
        flat = D.DensityModel("histogram", edges=[-100.0, 100.0], masses=[1.0], meta={"n": 1})
        for aug in chunk_stress(f2_chunk_data.samples, f2_chunk_data.actual, f2_chunk_data.predicted):
            out = full_report(aug, flat, flat)
            for mode in ("yw", "xw"):
                for m in METRICS:
                    assert metric_close(m, out[mode].values[m], out["nw"].values[m])

    def test_oracle_weights_constant(self, f2_chunk_data):
        res = run_chunk_study(f2_chunk_data, modes=("nw",), oracle_weights=True)
        assert res.config["augmented_sizes"] == [2000] * 5
        for m in METRICS:
            assert res.spread(m, ORACLE_MODE) <= 1e-12
        assert res.spread("MSE", "nw") > 0.1

    def test_xw_beats_nw_on_f2(self, f2_chunk_data):
        res = run_chunk_study(f2_chunk_data, modes=("nw", "xw"))
        for m in ("MSE", "MAE"):
            assert res.spread(m, "xw") < res.spread(m, "nw")

    def test_zero_reps_gives_identical_sets(self, f2_chunk_data):
        res = run_chunk_study(f2_chunk_data, reps=0)
        assert all(s == 0.0 for s in res.spreads().values())

    def test_needs_one_dimensional_samples(self):
        es = EvalSet([0.0, 1.0], [0.0, 1.0], np.zeros((2, 2)))
        with pytest.raises(ValueError):
            run_chunk_study(es)


class TestInvarianceStudy:
    def test_shape(self, f1_study):
        assert len(f1_study.reports) == 7
        assert f1_study.modes == ["nw", "yw", "xw"]
        assert len(f1_study.tidy_rows()) == 7 * 3 * 9
        assert "kernel_ridge" in f1_study.config["regressor"]

    def test_xw_flattens_f1(self, f1_study):
        assert f1_study.spread("MSE", "xw") <= f1_study.spread("MSE", "nw") / 3

    def test_round_trip(self, f1_study):
        back = StudyResult.from_dict(f1_study.to_dict())
        assert back.reports == f1_study.reports
        assert back.labels == f1_study.labels

    def test_thread_count_does_not_matter(self):
        spec = SyntheticSpec("f3", seed=5)
        r1 = run_invariance_study(spec, threads=1, modes=("nw", "xw"))
        r4 = run_invariance_study(spec, threads=4, modes=("nw", "xw"))
        assert r1.to_dict() == r4.to_dict()

    def test_perfect_predictor(self):
        spec = SyntheticSpec("f2", noise_high=0.0, seed=2)
        res = run_invariance_study(spec, predictor=spec.func, test_n=300)
        for mode in ("nw", "yw", "xw"):
            assert res.values("MSE", mode) == [0.0] * 7

    def test_bad_predictor_is_still_scored(self):
        res = run_invariance_study(SyntheticSpec("f1"), predictor=lambda X: np.zeros(len(X)),
                                   test_n=300, modes=("nw",))
        assert all(v > 0 for v in res.values("MSE", "nw"))

    def test_unshifted_sets_barely_move(self, f1_study):
        spec = SyntheticSpec("f1", seed=0)
        res = run_invariance_study(spec, means=[-3.0] * 7, modes=("nw", "xw"))
        nw_shifted = f1_study.spread("MSE", "nw")
        for mode in ("nw", "xw"):
            assert res.spread("MSE", mode) < 0.2 * nw_shifted

    def test_uniform_sets_barely_move(self, f1_study):
        spec = SyntheticSpec("f1", train_uniform_n=1000, train_normal_n=0, seed=0)
        res = run_invariance_study(spec, modes=("nw", "xw"))
        nw_shifted = f1_study.spread("MSE", "nw")
        for mode in ("nw", "xw"):
            assert res.spread("MSE", mode) < 0.2 * nw_shifted
