import json

import numpy as np
import pytest

from goosewatch import autoencoder as ae
from oracles import naive_forward


def fd_gradients(weights, biases, X, eps=1e-5):
    """Central finite differences over every parameter."""
    def loss_of(ws, bs):
        return ae.loss_and_grads(ws, bs, X)[0]

    dW = [np.zeros_like(W) for W in weights]
    db = [np.zeros_like(b) for b in biases]
    for li, W in enumerate(weights):
        for idx in np.ndindex(W.shape):
            W[idx] += eps
            up = loss_of(weights, biases)
            W[idx] -= 2 * eps
            down = loss_of(weights, biases)
            W[idx] += eps
            dW[li][idx] = (up - down) / (2 * eps)
    for li, b in enumerate(biases):
        for idx in np.ndindex(b.shape):
            b[idx] += eps
            up = loss_of(weights, biases)
            b[idx] -= 2 * eps
            down = loss_of(weights, biases)
            b[idx] += eps
            db[li][idx] = (up - down) / (2 * eps)
    return dW, db


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def normal_temp_matrix(rng, n=600):
    """Plausible temporal-view rows: tight timing, variable packet counts."""
    dt = rng.normal(0.2, 0.01, n)
    X = np.column_stack([
        dt,
        np.abs(rng.normal(0.01, 0.003, n)),
        1.0 / dt,
        rng.integers(3, 8, n).astype(float),
        np.abs(rng.normal(0.005, 0.002, n)),
        np.abs(rng.normal(0.002, 0.001, n)),
        rng.normal(140.0, 4.0, n),
        np.full(n, 400.0),
    ])
    return X


class TestScaler:
    def test_zscore_arithmetic(self):
        sc = ae.fit_scaler(np.array([[2.0], [4.0], [6.0]]))
        got = sc.transform(np.array([[2.0], [4.0], [6.0]])).ravel()
        assert got == pytest.approx([-1.2247, 0.0, 1.2247], abs=1e-4)

    def test_constant_column_maps_to_zero(self):
        sc = ae.fit_scaler(np.full((10, 2), 7.0))
        assert (sc.transform(np.full((4, 2), 7.0)) == 0.0).all()
        assert sc.degenerate.all()

    def test_roundtrip(self, rng):
        X = rng.normal(size=(50, 6)) * rng.uniform(0.5, 20, 6)
        sc = ae.fit_scaler(X)
        assert np.allclose(sc.inverse(sc.transform(X)), X, rtol=1e-9, atol=1e-12)

    def test_scaled_moments(self, rng):
        X = rng.normal(3.0, 2.5, size=(400, 5))
        Xs = ae.fit_scaler(X).transform(X)
        assert np.abs(Xs.mean(axis=0)).max() < 1e-6
        assert np.abs(Xs.std(axis=0) - 1).max() < 1e-6

    def test_empty_rejected(self):
        with pytest.raises(ae.EmptyInput):
            ae.fit_scaler(np.empty((0, 3)))


class TestForward:
    def test_zero_weights_give_zero_output(self, rng):
        dims = (6, 16, 8, 3, 8, 16, 6)
        weights = [np.zeros((a, b)) for a, b in zip(dims, dims[1:])]
        biases = [np.zeros(b) for b in dims[1:]]
        acts = ae.forward_pass(weights, biases, rng.normal(size=(5, 6)))
        assert (acts[-1] == 0).all()

    def test_identity_single_linear_pair(self):
        model = ae.AeModel(
            view="t", dims=(3, 3), weights=[np.eye(3)], biases=[np.zeros(3)],
            scaler=ae.Scaler(np.zeros(3), np.ones(3), np.zeros(3, dtype=bool)),
        )
        x = np.array([0.3, -1.2, 4.0])
        xhat, _, _ = model.forward(x)
        assert xhat == pytest.approx(x)

    def test_matches_naive_oracle(self, rng):
        for _ in range(20):
            dims = (4, 7, 2, 7, 4)
            weights, biases = ae.init_params(dims, rng)
            x = rng.normal(size=4)
            acts = ae.forward_pass(weights, biases, x[None, :])
            expected = naive_forward([W.tolist() for W in weights],
                                     [b.tolist() for b in biases], x.tolist())
            assert acts[-1][0] == pytest.approx(expected, abs=1e-10)

    def test_dimension_mismatch(self, rng):
        weights, biases = ae.init_params((4, 3, 4), rng)
        model = ae.AeModel(
            view="t", dims=(4, 3, 4), weights=weights, biases=biases,
            scaler=ae.Scaler(np.zeros(4), np.ones(4), np.zeros(4, dtype=bool)),
        )
        with pytest.raises(ae.DimensionMismatch):
            model.forward(np.zeros(5))

    def test_latent_dimension(self, rng):
        for view, dims in ae.DEFAULT_DIMS.items():
            weights, biases = ae.init_params(dims, rng)
            model = ae.AeModel(
                view=view, dims=dims, weights=weights, biases=biases,
                scaler=ae.Scaler(np.zeros(dims[0]), np.ones(dims[0]),
                                 np.zeros(dims[0], dtype=bool)),
            )
            z = model.latent(rng.normal(size=(9, dims[0])))
            assert z.shape == (9, min(dims))


class TestLoss:
    def test_unit_difference(self):
        assert ae.mse_rows(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))[0] == 1.0

    def test_zero_iff_equal(self, rng):
        X = rng.normal(size=(4, 5))
        assert (ae.mse_rows(X, X) == 0).all()
        assert (ae.mse_rows(X, X + 0.1) > 0).all()

    def test_attribution_sum_identity(self, rng):
        X = rng.normal(size=(7, 5))
        Xhat = rng.normal(size=(7, 5))
        e = ae.mse_rows(X, Xhat)
        c = (X - Xhat) ** 2
        assert c.sum(axis=1) == pytest.approx(5 * e, rel=1e-12)


class TestGradients:
    @pytest.mark.parametrize("dims", [ae.DEFAULT_DIMS["seq"], ae.DEFAULT_DIMS["temp"]])
    def test_matches_finite_differences(self, dims, rng):
        for _ in range(5):
            weights, biases = ae.init_params(dims, rng)
            X = rng.normal(size=(4, dims[0]))
            _, dW, db = ae.loss_and_grads(weights, biases, X)
            fdW, fdb = fd_gradients(weights, biases, X)
            assert max_rel_error(dW, fdW) < 1e-4
            assert max_rel_error(db, fdb) < 1e-4


class TestTraining:
    def test_memorizes_single_vector(self, rng):
        X = np.tile(rng.normal(size=8), (500, 1))
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=60, seed=3)
        model = ae.train(X, "temp", cfg)
        assert model.train_meta["final_loss"] < 1e-4

    def test_same_seed_reproduces_weights_exactly(self, rng):
        X = normal_temp_matrix(rng)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=30, seed=11)
        m1 = ae.train(X, "temp", cfg)
        m2 = ae.train(X, "temp", cfg)
        for a, b in zip(m1.weights, m2.weights):
            assert a.tobytes() == b.tobytes()
        assert json.dumps(m1.to_dict(), sort_keys=True) == \
            json.dumps(m2.to_dict(), sort_keys=True)

    def test_training_reduces_loss(self, rng):
        X = normal_temp_matrix(rng)
        cfg1 = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=1, seed=5)
        cfg50 = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=50, seed=5)
        loss1 = ae.train(X, "temp", cfg1).train_meta["final_loss"]
        loss50 = ae.train(X, "temp", cfg50).train_meta["final_loss"]
        assert loss50 < loss1

    def test_early_stopping_records_epochs(self, rng):
        X = np.tile(rng.normal(size=8), (300, 1))  # trivially learnable
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=500, seed=1)
        model = ae.train(X, "temp", cfg)
        assert model.train_meta["epochs_run"] < 500

    def test_warns_when_underdetermined(self, rng):
        X = rng.normal(size=(20, 8))
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=1, seed=0)
        with pytest.warns(UserWarning, match="rows"):
            ae.train(X, "temp", cfg)

    def test_divergence_detected(self, rng):
        X = normal_temp_matrix(rng, n=128)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], lr=float("inf"),
                             epochs=3, seed=0)
        with pytest.raises(ae.Diverged):
            ae.train(X, "temp", cfg)

    def test_bottleneck_blocks_volumetric_extrapolation(self, rng):
        X = normal_temp_matrix(rng)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=250, seed=7)
        model = ae.train(X, "temp", cfg)
        train_errors = model.reconstruction_errors(X)
        p99 = np.quantile(train_errors, 0.99)
        flood = X[0].copy()
        flood[3] = 50.0 * X[:, 3].max()
        assert model.reconstruction_errors(flood[None, :])[0] >= 10 * p99

    def test_column_mean_row_scores_like_zero_vector(self, rng):
        X = normal_temp_matrix(rng)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=20, seed=8)
        model = ae.train(X, "temp", cfg)
        means = model.scaler.mean.copy()
        e_means = model.reconstruction_errors(means[None, :])[0]
        zero = np.zeros((1, 8))
        xhat, _, _ = model.forward(zero)
        assert e_means == pytest.approx(float(ae.mse_rows(zero, xhat)[0]),
                                        rel=1e-9, abs=1e-12)

    def test_training_errors_straddle_tail_quantile(self, rng):
        X = normal_temp_matrix(rng)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=40, seed=2)
        model = ae.train(X, "temp", cfg)
        errors = model.reconstruction_errors(X)
        u = np.quantile(errors, 0.98)
        assert np.median(errors) < u


class TestSerialization:
    def test_json_roundtrip_is_exact(self, rng):
        X = normal_temp_matrix(rng, n=200)
        cfg = ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"], epochs=10, seed=9)
        model = ae.train(X, "temp", cfg)
        clone = ae.AeModel.from_dict(json.loads(json.dumps(model.to_dict())))
        for a, b in zip(model.weights, clone.weights):
            assert np.array_equal(a, b)
        for a, b in zip(model.biases, clone.biases):
            assert np.array_equal(a, b)
        assert np.array_equal(model.scaler.mean, clone.scaler.mean)
        x = rng.normal(size=(3, 8))
        assert np.array_equal(model.reconstruction_errors(x),
                              clone.reconstruction_errors(x))

    def test_save_load_file(self, tmp_path, rng):
        X = normal_temp_matrix(rng, n=100)
        model = ae.train(X, "temp", ae.TrainConfig(dims=ae.DEFAULT_DIMS["temp"],
                                                   epochs=5, seed=4))
        path = tmp_path / "model.json"
        model.save(path)
        clone = ae.AeModel.load(path)
        assert clone.view == "temp"
        assert clone.train_meta["seed"] == 4
        x = rng.normal(size=(2, 8))
        assert np.array_equal(model.latent(x), clone.latent(x))
