import math

import numpy as np
import pytest

from dedtwin.errors import UnidentifiableError
from dedtwin.signals import TimeSeries
from dedtwin.surrogate import (
    Dataset,
    LmConfig,
    MlpModel,
    Normalizer,
    f2_ablation,
    f3_vs_composed,
    flatten_params,
    load_surrogate,
    mlp_forward,
    mlp_forward_batch,
    mlp_forward_flagged,
    mlp_residuals_jacobian,
    mlp_train_lm,
    read_dataset_csv,
    rsm_fit,
    rsm_predict,
    rsm_predict_batch,
    save_surrogate,
    split_dataset,
    with_params,
    write_dataset_csv,
    _design_matrix,
    _monomial_exponents,
    _residuals_and_jacobian,
)
from dedtwin.sysid import CompositeF1, FirstOrderDelayModel, simulate_composite_f1


def smooth_dataset(n=400, seed=0, noise=0.0):
    """Rows from a smooth positive function of (mpw, mpl, mpt, n)."""
    rng = np.random.default_rng(seed)
    mpw = rng.uniform(4.0, 8.0, n)
    mpl = rng.uniform(5.0, 10.0, n)
    mpt = rng.uniform(1000.0, 2400.0, n)
    layer = rng.integers(1, 6, n).astype(float)
    bw = (0.8 * mpw + 0.15 * mpl + 3e-4 * (mpt - 1500.0)
          - 0.12 * layer + 0.9 + noise * rng.normal(size=n))
    return Dataset(np.column_stack([mpw, mpl, mpt, layer]), bw,
                   ("mpw", "mpl", "mpt", "n"), ("mm", "mm", "C", ""))


def tiny_mlp(layer_sizes=(3, 4, 3, 1), activations=("relu", "sigmoid", "linear"),
             seed=0, lo=None, hi=None):
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for l in range(len(layer_sizes) - 1):
        weights.append(rng.normal(0, 0.7, (layer_sizes[l + 1], layer_sizes[l])))
        biases.append(rng.normal(0, 0.3, layer_sizes[l + 1]))
    d = layer_sizes[0]
    norm = Normalizer(lo or tuple([0.0] * d), hi or tuple([1.0] * d))
    return MlpModel(layer_sizes=tuple(layer_sizes), activations=tuple(activations),
                    weights=tuple(weights), biases=tuple(biases),
                    normalizer=norm, feature_names=tuple(f"x{i}" for i in range(d)))


class TestSplit:
    def test_default_fraction_partition(self):
        d = smooth_dataset(100)
        train, val = split_dataset(d, seed=3)
        assert len(train) == 80 and len(val) == 20

    def test_determinism(self):
        d = smooth_dataset(60)
        a1, b1 = split_dataset(d, 0.75, seed=9)
        a2, b2 = split_dataset(d, 0.75, seed=9)
        assert np.array_equal(a1.inputs, a2.inputs)
        assert np.array_equal(b1.target, b2.target)

    def test_disjoint_union(self):
        d = smooth_dataset(50)
        train, val = split_dataset(d, 0.8, seed=1)
        merged = np.vstack([train.inputs, val.inputs])
        assert merged.shape[0] == 50
        orig = {tuple(r) for r in d.inputs}
        assert {tuple(r) for r in merged} == orig

    def test_too_small_validation_rejected(self):
        d = smooth_dataset(20)
        with pytest.raises(ValueError):
            split_dataset(d, 0.99, seed=0)


class TestForward:
    def test_all_zero_weights_gives_one_mm(self):
        m = tiny_mlp()
        zero = with_params(m, np.zeros_like(flatten_params(m)))
        assert mlp_forward(zero, [0.3, 0.6, 0.9]) == pytest.approx(1.0)

    def test_hand_computed_single_unit_chain(self):
        m = MlpModel(layer_sizes=(1, 1, 1), activations=("sigmoid", "linear"),
                     weights=(np.array([[2.0]]), np.array([[1.5]])),
                     biases=(np.array([0.5]), np.array([-0.25])),
                     normalizer=Normalizer((0.0,), (1.0,)),
                     feature_names=("x0",))
        x = 0.6
        a1 = 1.0 / (1.0 + math.exp(-(2.0 * x + 0.5)))
        expected = math.exp(1.5 * a1 - 0.25)
        assert mlp_forward(m, [x]) == pytest.approx(expected, abs=1e-12)

    def test_output_strictly_positive(self):
        m = tiny_mlp(seed=5)
        rng = np.random.default_rng(2)
        out = mlp_forward_batch(m, rng.uniform(-2, 3, size=(50, 3)))
        assert np.all(out > 0)

    def test_dimension_mismatch(self):
        m = tiny_mlp()
        with pytest.raises(ValueError):
            mlp_forward(m, [1.0, 2.0])

    def test_extrapolation_flag(self):
        m = tiny_mlp()
        _, flagged = mlp_forward_flagged(m, [0.5, 0.5, 0.5])
        assert not flagged
        _, flagged = mlp_forward_flagged(m, [2.5, 0.5, 0.5])
        assert flagged


class TestJacobian:
    def test_matches_central_differences_all_activations(self):
        # 20+ random configurations over the full activation stack
        rng = np.random.default_rng(0)
        h = 1e-6
        for trial in range(21):
            layer_sizes = (2, 3, 2, 2, 1)
            activations = ("relu", "sigmoid", "sigmoid", "linear")
            Xn = rng.uniform(0, 1, size=(8, 2))
            t = rng.uniform(0.5, 1.5, size=8)
            theta = rng.normal(0, 0.8, size=sum(
                layer_sizes[i + 1] * (layer_sizes[i] + 1)
                for i in range(len(layer_sizes) - 1)))
            _, J = _residuals_and_jacobian(theta, layer_sizes, activations, Xn, np.log(t))
            J_fd = np.empty_like(J)
            for j in range(theta.size):
                up, dn = theta.copy(), theta.copy()
                up[j] += h
                dn[j] -= h
                r_up, _ = _residuals_and_jacobian(up, layer_sizes, activations, Xn, np.log(t))
                r_dn, _ = _residuals_and_jacobian(dn, layer_sizes, activations, Xn, np.log(t))
                J_fd[:, j] = (r_up - r_dn) / (2 * h)
            assert np.allclose(J, J_fd, rtol=1e-4, atol=1e-7), f"trial {trial}"

    def test_model_level_jacobian_shape(self):
        m = tiny_mlp()
        X = np.random.default_rng(1).uniform(0, 1, size=(12, 3))
        t = np.full(12, 2.0)
        r, J = mlp_residuals_jacobian(m, X, t)
        assert r.shape == (12,)
        assert J.shape == (12, flatten_params(m).size)


class TestTrainLm:
    def test_loss_history_monotone_and_capped(self):
        d = smooth_dataset(300, noise=0.01)
        cfg = LmConfig(max_epochs=40, seed=1, hidden_units=(6, 4),
                       hidden_activations=("relu", "sigmoid"))
        _, report = mlp_train_lm(d, cfg)
        assert report.epochs_run <= 40
        hist = np.array(report.loss_history)
        assert np.all(np.diff(hist) <= 0)
        assert report.final_loss == hist[-1]

    def test_fits_smooth_function(self):
        d = smooth_dataset(800, noise=0.005)
        cfg = LmConfig(max_epochs=60, seed=0, hidden_units=(8, 8),
                       hidden_activations=("relu", "sigmoid"))
        _, report = mlp_train_lm(d, cfg)
        assert report.metrics.r2 >= 0.97

    def test_deterministic_given_seed(self):
        d = smooth_dataset(200, noise=0.01)
        cfg = LmConfig(max_epochs=15, seed=7, hidden_units=(5,),
                       hidden_activations=("sigmoid",))
        m1, r1 = mlp_train_lm(d, cfg)
        m2, r2 = mlp_train_lm(d, cfg)
        assert r1 == r2
        assert np.array_equal(flatten_params(m1), flatten_params(m2))

    def test_normalization_envelope_invariance(self):
        d = smooth_dataset(250, noise=0.01)
        cfg = LmConfig(max_epochs=20, seed=3, hidden_units=(5, 4),
                       hidden_activations=("relu", "sigmoid"))
        m_raw, _ = mlp_train_lm(d, cfg)
        train, _ = split_dataset(d, cfg.train_fraction, cfg.seed)
        norm = Normalizer.from_data(train.inputs)
        d_pre = Dataset(norm.transform(d.inputs), d.target,
                        d.feature_names, d.units)
        m_pre, _ = mlp_train_lm(d_pre, cfg)
        probe = d.inputs[:10]
        a = mlp_forward_batch(m_raw, probe)
        b = mlp_forward_batch(m_pre, norm.transform(probe))
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


class TestRsm:
    def _cubic_dataset(self, n=220, d_feat=3, seed=4):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 1, size=(n, d_feat))
        exps = _monomial_exponents(d_feat, 3)
        coeffs = rng.normal(0, 0.3, len(exps))
        log_bw = _design_matrix(X, exps) @ coeffs
        return Dataset(X, np.exp(log_bw), tuple(f"x{i}" for i in range(d_feat))), coeffs

    def test_monomial_count(self):
        assert len(_monomial_exponents(3, 3)) == 20
        assert len(_monomial_exponents(2, 3)) == 10

    def test_exact_recovery_of_cubic_truth(self):
        d, _ = self._cubic_dataset()
        model, metrics = rsm_fit(d, seed=0)
        assert abs(metrics.r2 - 1.0) < 1e-9
        pred = rsm_predict_batch(model, d.inputs)
        assert np.allclose(pred, d.target, rtol=1e-8)

    def test_coefficients_match_pseudo_inverse_oracle(self):
        d, _ = self._cubic_dataset(seed=8)
        model, _ = rsm_fit(d, seed=2)
        train, _ = split_dataset(d, 0.8, seed=2)
        Xn = model.normalizer.transform(train.inputs)
        phi = _design_matrix(Xn, model.exponents)
        oracle = np.linalg.pinv(phi) @ np.log(train.target)
        assert np.allclose(model.coefficients, oracle, atol=1e-9)

    def test_residual_orthogonal_to_basis(self):
        rng = np.random.default_rng(5)
        d, _ = self._cubic_dataset(seed=6)
        noisy = Dataset(d.inputs, d.target * np.exp(rng.normal(0, 0.05, len(d))),
                        d.feature_names)
        model, _ = rsm_fit(noisy, seed=1)
        train, _ = split_dataset(noisy, 0.8, seed=1)
        phi = _design_matrix(model.normalizer.transform(train.inputs),
                             model.exponents)
        resid = phi @ np.asarray(model.coefficients) - np.log(train.target)
        assert np.max(np.abs(phi.T @ resid)) < 1e-9 * len(train)

    def test_rank_deficiency_names_monomials(self):
        rng = np.random.default_rng(9)
        x0 = rng.uniform(0, 1, 120)
        X = np.column_stack([x0, x0])  # duplicated feature: collinear basis
        d = Dataset(X, np.exp(0.4 * x0), ("mpw", "mpl"))
        with pytest.raises(UnidentifiableError, match="collinear"):
            rsm_fit(d, seed=0)

    def test_single_point_prediction(self):
        d, _ = self._cubic_dataset()
        model, _ = rsm_fit(d, seed=0)
        assert rsm_predict(model, d.inputs[0]) == pytest.approx(
            float(rsm_predict_batch(model, d.inputs[:1])[0]))


FAST_CFG = LmConfig(max_epochs=12, hidden_units=(5,),
                    hidden_activations=("sigmoid",), seed=0)


class TestAblation:
    def test_three_rows_in_fixed_order(self):
        d = smooth_dataset(150, noise=0.02)
        rows = f2_ablation(d, FAST_CFG)
        assert [r["inputs"] for r in rows] == [
            ("mpw", "mpl", "mpt", "n"), ("mpw", "mpl", "n"), ("mpw", "n")]
        assert all(r["metrics"].rmse > 0 for r in rows)

    def test_missing_column_rejected(self):
        d = smooth_dataset(100).select(("mpw", "mpl", "n"))
        with pytest.raises(ValueError, match="mpt"):
            f2_ablation(d, FAST_CFG)


class TestF3VsComposed:
    def _record_dataset(self):
        g = FirstOrderDelayModel(k_gain=2.5e-3, tw=0.3, td=0.06)
        f1 = CompositeF1(g_lp=g, g_n=-0.11)
        dt = 0.03
        per = 100
        lp = TimeSeries(0.0, dt, np.tile(
            np.concatenate([np.full(per, 2800.0), np.full(per, 3200.0)]), 3), "W")
        layer = TimeSeries(0.0, dt, np.repeat([1.0, 2.0, 3.0], 2 * per))
        mpw = simulate_composite_f1(f1, lp, layer)
        rng = np.random.default_rng(0)
        bw = 0.9 * mpw.values + 0.2 + rng.normal(0, 0.01, len(lp))
        X = np.column_stack([np.full(len(lp), 10.0), lp.values,
                             mpw.values + rng.normal(0, 0.01, len(lp)),
                             layer.values])
        d = Dataset(X, bw, ("ts", "lp", "mpw", "n"),
                    ("mm_s", "W", "mm", ""), time=lp.times, dt=dt)
        return d, f1, lp, layer

    def test_two_rows_and_order(self):
        d, f1, lp, layer = self._record_dataset()
        rows = f3_vs_composed(d, f1, FAST_CFG, lp_series=lp, layer_series=layer)
        assert [r["model_name"] for r in rows] == [
            "direct_parameter_mlp", "composed_signature_route"]

    def test_series_rebuilt_from_uniform_rows(self):
        d, f1, _, _ = self._record_dataset()
        rows = f3_vs_composed(d, f1, FAST_CFG)
        assert len(rows) == 2


class TestPersistence:
    def test_mlp_round_trip(self, tmp_path):
        d = smooth_dataset(150, noise=0.02)
        model, report = mlp_train_lm(d, FAST_CFG)
        path = tmp_path / "mlp.json"
        save_surrogate(path, model, metrics=report.metrics, seed=FAST_CFG.seed)
        back, doc = load_surrogate(path)
        probe = d.inputs[:5]
        assert np.allclose(mlp_forward_batch(back, probe),
                           mlp_forward_batch(model, probe), atol=1e-15)
        assert doc["training_seed"] == FAST_CFG.seed

    def test_rsm_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, size=(80, 2))
        d = Dataset(X, np.exp(0.3 * X[:, 0] - 0.2 * X[:, 1] + 0.5),
                    ("mpw", "n"))
        model, metrics = rsm_fit(d, seed=0)
        path = tmp_path / "rsm.json"
        save_surrogate(path, model, metrics=metrics)
        back, _ = load_surrogate(path)
        assert np.allclose(rsm_predict_batch(back, X),
                           rsm_predict_batch(model, X), atol=1e-15)

    def test_dataset_csv_round_trip(self, tmp_path):
        d = smooth_dataset(40)
        d2 = Dataset(d.inputs, d.target, d.feature_names, d.units,
                     time=0.03 * np.arange(40), dt=0.03)
        path = tmp_path / "data.csv"
        write_dataset_csv(path, d2)
        back = read_dataset_csv(path)
        assert back.feature_names == d.feature_names
        assert back.units == d.units
        assert np.allclose(back.inputs, d.inputs)
        assert np.allclose(back.target, d.target)
        assert back.dt == pytest.approx(0.03)


class TestDatasetValidation:
    def test_nonpositive_target_rejected(self):
        with pytest.raises(ValueError, match="row 1"):
            Dataset(np.ones((3, 1)), [1.0, -0.5, 2.0], ("x",))

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            Dataset(np.ones((2, 3)), [1.0, 2.0], ("a", "b", "c"))
