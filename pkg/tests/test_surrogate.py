import numpy as np
import pytest
from scipy import stats

from rbcmech.errors import DataError, ExtrapolationWarning, RbcmechError
from rbcmech.surrogate import (
    DESIGN_BOUNDS,
    SurrogateModel,
    build_training_table,
    load_table,
    sample_design,
    save_table,
    surrogate_predict,
    train_mlp,
    validate_surrogate,
)
from rbcmech.surrogate.mlp import subset_table, train_val_split
from rbcmech.surrogate.table import TrainingTable, condition_table


def synthetic_table(n=2000, seed=0, outputs=2):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n, 4))
    w = np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0], [-2.0, 0.2]])[:, :outputs]
    y = x @ w + 20.0
    return TrainingTable(
        kind="equilibrium", columns=("a", "b", "c", "d"), inputs=x,
        output_names=tuple(f"y{j}" for j in range(outputs)), outputs=y,
        ok=np.ones(n, dtype=bool), mesh_level=0, seed=seed,
        bounds={k: [-1.0, 1.0] for k in ("a", "b", "c", "d")},
    )


class TestDesign:
    def test_empty(self):
        d = sample_design(0, seed=1)
        assert d.n == 0
        assert d.rows.shape == (0, 6)

    def test_reproducible(self):
        a = sample_design(50, seed=9)
        b = sample_design(50, seed=9)
        np.testing.assert_array_equal(a.rows, b.rows)

    def test_marginals_uniform(self):
        d = sample_design(10_000, seed=4)
        for name in d.columns:
            lo, hi = DESIGN_BOUNDS[name]
            u = (d.column(name) - lo) / (hi - lo)
            p = stats.kstest(u, "uniform").pvalue
            assert p > 0.01, f"{name}: KS p-value {p}"

    def test_bounds_respected(self):
        d = sample_design(1000, seed=2)
        for name in d.columns:
            lo, hi = DESIGN_BOUNDS[name]
            col = d.column(name)
            assert col.min() >= lo and col.max() <= hi

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            sample_design(10, bounds={**DESIGN_BOUNDS, "v": (1.0, 0.5)}, seed=0)


class TestTable:
    def test_duplicate_rows_identical(self):
        d = sample_design(1, seed=3)
        from rbcmech.surrogate.design import DesignMatrix
        dup = DesignMatrix(columns=d.columns, rows=np.vstack([d.rows, d.rows]),
                           bounds=d.bounds, seed=3)
        tb = build_training_table(dup, "equilibrium", mesh_level=2)
        np.testing.assert_array_equal(tb.outputs[0], tb.outputs[1])

    def test_parallelism_bit_identical(self):
        d = sample_design(2, seed=5)
        t1 = build_training_table(d, "equilibrium", parallelism=1, mesh_level=2)
        t2 = build_training_table(d, "equilibrium", parallelism=2, mesh_level=2)
        np.testing.assert_array_equal(t1.outputs, t2.outputs)
        np.testing.assert_array_equal(t1.ok, t2.ok)

    def test_boundary_v_row_finite(self):
        from rbcmech.surrogate.design import DesignMatrix
        row = np.array([[1.0, 5.0, 2.0, 1.0, 0.5]])
        d = DesignMatrix(columns=("v", "mu", "kappa_b", "b2", "eta_m"),
                         rows=row, bounds=DESIGN_BOUNDS, seed=0)
        tb = build_training_table(d, "equilibrium", mesh_level=2)
        assert tb.ok[0]
        assert np.all(np.isfinite(tb.outputs[0]))
        # constrained to (A0, V0) the equilibrium is a discocyte even at v = 1
        d_um, h_min, h_max = tb.outputs[0]
        assert h_min <= h_max <= d_um

    def test_save_load_roundtrip(self, tmp_path):
        tb = synthetic_table(20)
        path = tmp_path / "table.csv"
        save_table(tb, path)
        back = load_table(path)
        np.testing.assert_array_equal(back.inputs, tb.inputs)
        np.testing.assert_array_equal(back.outputs, tb.outputs)
        assert back.bounds == tb.bounds
        assert back.kind == tb.kind

    def test_missing_files(self, tmp_path):
        with pytest.raises(DataError):
            load_table(tmp_path / "none.csv")

    def test_condition_projection(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, size=(10, 6))
        y = rng.uniform(1, 2, size=(10, 6))
        tb = TrainingTable(kind="all",
                           columns=("v", "mu", "kappa_b", "b2", "eta_m", "F_ext"),
                           inputs=x,
                           output_names=("D_um", "h_min_um", "h_max_um",
                                         "D_ax_um", "D_tr_um", "t_c_ms"),
                           outputs=y, ok=np.ones(10, dtype=bool), mesh_level=2,
                           seed=0, bounds={c: [0.0, 1.0] for c in
                                           ("v", "mu", "kappa_b", "b2", "eta_m", "F_ext")})
        eq = condition_table(tb, "equilibrium")
        assert eq.columns == ("v", "mu", "kappa_b", "b2", "eta_m")
        assert eq.output_names == ("D_um", "h_min_um", "h_max_um")
        st = condition_table(tb, "stretching")
        assert st.columns[-1] == "F_ext"
        rx = condition_table(tb, "relaxation")
        assert rx.output_names == ("t_c_ms",)


class TestTraining:
    def test_linear_function_learned(self):
        tb = synthetic_table(3000, seed=1)
        model = train_mlp(tb, split_seed=2)
        _, val_idx = train_val_split(tb, 2)
        report = validate_surrogate(model, subset_table(tb, val_idx))
        assert max(report["relative_rmse"]) < 0.005

    def test_split_is_80_20(self):
        tb = synthetic_table(1000)
        train_idx, val_idx = train_val_split(tb, 0)
        assert train_idx.size == 800 and val_idx.size == 200
        assert np.intersect1d(train_idx, val_idx).size == 0

    def test_architecture(self):
        tb = synthetic_table(600)
        model = train_mlp(tb, split_seed=0, max_epochs=5, patience=5)
        assert model.layer_sizes == (4, 32, 32, 32, 2)
        assert len(model.weights) == 4

    def test_shuffled_labels_have_no_skill(self):
        tb = synthetic_table(2000, seed=3)
        rng = np.random.default_rng(0)
        shuffled = TrainingTable(
            kind=tb.kind, columns=tb.columns, inputs=tb.inputs,
            output_names=tb.output_names,
            outputs=tb.outputs[rng.permutation(tb.n)], ok=tb.ok,
            mesh_level=0, seed=0, bounds=tb.bounds)
        model = train_mlp(shuffled, split_seed=1, max_epochs=300)
        _, val_idx = train_val_split(shuffled, 1)
        x, y = subset_table(shuffled, val_idx).usable()
        pred, _ = surrogate_predict(model, x, warn_extrapolation=False)
        mse = np.mean((pred - y) ** 2)
        assert mse > 0.5 * np.mean(np.var(y, axis=0))

    def test_training_deterministic(self):
        tb = synthetic_table(800)
        m1 = train_mlp(tb, split_seed=5, max_epochs=40, patience=40)
        m2 = train_mlp(tb, split_seed=5, max_epochs=40, patience=40)
        for a, b in zip(m1.weights, m2.weights):
            np.testing.assert_array_equal(a, b)

    def test_too_few_rows(self):
        with pytest.raises(RbcmechError):
            train_mlp(synthetic_table(100), split_seed=0)


class TestPrediction:
    @pytest.fixture(scope="class")
    def model(self):
        return train_mlp(synthetic_table(3000, seed=1), split_seed=2)

    def test_training_row_interpolates(self, model):
        tb = synthetic_table(3000, seed=1)
        x, y = tb.usable()
        pred, flags = surrogate_predict(model, x[:50])
        assert not flags.any()
        assert np.sqrt(np.mean((pred - y[:50]) ** 2)) < 0.05

    def test_corner_in_domain(self, model):
        corner = np.array([[-1.0, -1.0, -1.0, -1.0]])
        pred, flags = surrogate_predict(model, corner)
        assert np.all(np.isfinite(pred))
        assert not flags[0]

    def test_extrapolation_flagged(self, model):
        outside = np.array([[1.1, 0.0, 0.0, 0.0]])
        with pytest.warns(ExtrapolationWarning):
            _, flags = surrogate_predict(model, outside)
        assert flags[0]

    def test_dimension_mismatch(self, model):
        with pytest.raises(ValueError):
            surrogate_predict(model, np.zeros((1, 3)))

    def test_normalization_roundtrip(self, model):
        x = np.array([0.3, -0.4, 0.9, 0.1])
        xn = (x - model.x_mean) / model.x_std
        back = xn * model.x_std + model.x_mean
        np.testing.assert_allclose(back, x, atol=1e-12)

    def test_json_roundtrip(self, model, tmp_path):
        path = tmp_path / "model.json"
        model.save(path)
        back = SurrogateModel.load(path)
        x = np.array([[0.2, 0.1, -0.5, 0.7]])
        np.testing.assert_array_equal(
            surrogate_predict(model, x)[0], surrogate_predict(back, x)[0])


class TestValidation:
    def test_training_rows_match_training_error(self):
        tb = synthetic_table(1000, seed=2)
        model = train_mlp(tb, split_seed=0, max_epochs=200)
        rep = validate_surrogate(model, tb)
        assert rep["n_rows"] == 1000
        assert max(rep["relative_rmse"]) < 0.05

    def test_perfect_model_zero_rmse(self):
        # a model that reproduces the truth exactly reports RMSE 0
        rng = np.random.default_rng(1)
        x = rng.uniform(-1, 1, size=(800, 3))
        tb = TrainingTable(kind="equilibrium", columns=("a", "b", "c"),
                           inputs=x, output_names=("y0",),
                           outputs=np.full((800, 1), 2.0),
                           ok=np.ones(800, dtype=bool), mesh_level=0, seed=0)
        model = train_mlp(tb, split_seed=0, max_epochs=2, patience=2)
        model.weights[-1][:] = 0.0
        model.biases[-1][:] = 0.0  # normalized prediction == 0 -> y == y_mean == 2
        rep = validate_surrogate(model, tb)
        assert rep["rmse"][0] == 0.0
        assert rep["relative_rmse"][0] == 0.0

    def test_worst_row_identified(self):
        tb = synthetic_table(1000, seed=4)
        model = train_mlp(tb, split_seed=0, max_epochs=400)
        corrupted = TrainingTable(
            kind=tb.kind, columns=tb.columns, inputs=tb.inputs.copy(),
            output_names=tb.output_names, outputs=tb.outputs.copy(),
            ok=tb.ok.copy(), mesh_level=0, seed=0, bounds=tb.bounds)
        corrupted.outputs[123, 0] += 50.0
        rep = validate_surrogate(model, corrupted)
        assert rep["worst_row"] == 123
