import math
import warnings

import numpy as np
import pytest

from conftest import blobs
from oracles import slsqp_robust_kernel_reference
from tpmsvm import (
    Dataset,
    Hyperparams,
    KernelSpec,
    UncertaintySpec,
    load_model,
    save_model,
    train_binary,
    train_kernel_class,
    train_linear_class,
    train_multiclass,
    train_robust_kernel_class,
    train_robust_linear_class,
)
from tpmsvm.errors import (
    DegenerateClassifier,
    InvalidHyperparams,
    InvalidInput,
    TrainingWarning,
)
from tpmsvm.predict import classify, signed_distance
from tpmsvm.trainer import (
    binary_negative_primal_value,
    kernel_dual_shift,
    kernel_norm_sq_expansion,
    kernel_primal_value,
    linear_dual_shift,
    linear_primal_value,
)
from tpmsvm.kernels import gram


def random_dataset(rng, m_lo=6, m_hi=30, n_lo=2, n_hi=5, classes=3):
    while True:
        m = int(rng.integers(m_lo, m_hi + 1))
        n = int(rng.integers(n_lo, n_hi + 1))
        y = rng.integers(1, classes + 1, size=m)
        if len(np.unique(y)) == classes and np.bincount(y)[1:].min() >= 2:
            return Dataset(rng.normal(size=(m, n)), y)


def random_hyperparams(rng):
    alpha = float(rng.uniform(0.25, 4.0))
    return Hyperparams(float(rng.uniform(0.1, 1.0)) * alpha, alpha)


# --- deterministic linear ----------------------------------------------------


def test_mirror_symmetry_zeroes_second_weight():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    y = np.array([1, 1, 2, 2])
    model, _ = train_linear_class(Dataset(X, y), 1, Hyperparams(0.5, 1.0))
    assert model.w[1] == pytest.approx(0.0, abs=1e-9)


def test_strong_duality_random_instances():
    rng = np.random.default_rng(10)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(30):
            data = random_dataset(rng)
            h = random_hyperparams(rng)
            c = int(rng.integers(1, data.num_classes + 1))
            model, sol = train_linear_class(data, c, h)
            primal = linear_primal_value(data, c, h, model.w, model.theta)
            dual = sol.objective - linear_dual_shift(data, c, h)
            assert abs(primal - dual) <= 1e-6 * (1.0 + abs(dual))


def test_primal_value_matches_conic_route(toy3):
    # independent route: the robust trainer with eps = 0 solves the primal
    # directly through the conic solver
    h = Hyperparams(0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for c in (1, 2, 3):
            _, qp_sol = train_linear_class(toy3, c, h)
            dual = qp_sol.objective - linear_dual_shift(toy3, c, h)
            _, conic_sol = train_robust_linear_class(toy3, c, h, UncertaintySpec(2, 0.0))
            assert abs(conic_sol.objective - dual) <= 1e-6 * (1.0 + abs(dual))


def test_infeasible_hyperparams_rejected():
    with pytest.raises(InvalidHyperparams):
        Hyperparams(2.0, 1.0)
    with pytest.raises(InvalidHyperparams):
        Hyperparams(0.0, 1.0)


def test_interior_recovery_matches_projections(toy3):
    # when interior multipliers exist, theta equals minus their mean projection
    h = Hyperparams(0.31, 0.9)  # non-integer nu*mc/alpha keeps interior nonempty
    model, sol = train_linear_class(toy3, 1, h)
    from tpmsvm.qp import default_margin_tol, interior_index_set

    ub = h.alpha / (toy3.labels == 1).sum()
    interior = interior_index_set(sol, ub, default_margin_tol(ub))
    if interior.size:
        Xc = toy3.features[toy3.labels == 1]
        assert model.theta == pytest.approx(-np.mean(Xc[interior] @ model.w), abs=1e-12)


def test_empty_interior_falls_back_with_warning():
    # integer nu*mc/alpha drives every multiplier to a bound
    X = np.vstack([np.eye(2) + 3.0, -np.eye(2)])
    y = np.array([1, 1, 2, 2])
    with pytest.warns(TrainingWarning):
        model, sol = train_linear_class(Dataset(X, y), 1, Hyperparams(1.0, 1.0))
    # the fallback intercept is still primal optimal
    h = Hyperparams(1.0, 1.0)
    data = Dataset(X, y)
    base = linear_primal_value(data, 1, h, model.w, model.theta)
    for dt in (-0.05, 0.05):
        assert linear_primal_value(data, 1, h, model.w, model.theta + dt) >= base - 1e-12


# --- kernel ------------------------------------------------------------------


def test_kernel_linear_spec_matches_linear_trainer(toy3):
    h = Hyperparams(0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for c in (1, 2, 3):
            lin, _ = train_linear_class(toy3, c, h)
            ker, _ = train_kernel_class(toy3, c, h, KernelSpec("linear"))
            d_lin = signed_distance(lin, toy3.features)
            d_ker = signed_distance(ker, toy3.features)
            np.testing.assert_allclose(d_ker, d_lin, atol=1e-7)


def test_kernel_strong_duality_and_norm_expansion():
    rng = np.random.default_rng(11)
    specs = [KernelSpec("gaussian", sigma=1.0),
             KernelSpec("inhomogeneous-polynomial", d=2, gamma=0.5)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(10):
            data = random_dataset(rng, m_hi=20)
            h = random_hyperparams(rng)
            spec = specs[int(rng.integers(len(specs)))]
            c = int(rng.integers(1, data.num_classes + 1))
            model, sol = train_kernel_class(data, c, h, spec)
            primal = kernel_primal_value(data, c, h, spec, model.beta, model.theta)
            dual = sol.objective - kernel_dual_shift(data, c, h, spec)
            assert abs(primal - dual) <= 1e-6 * (1.0 + abs(dual))
            K = gram(spec, data.features)
            bkb = float(model.beta @ K @ model.beta)
            assert abs(bkb - model.norm_h**2) <= 1e-9 * (1.0 + bkb)


def test_norm_expansion_is_beta_K_beta():
    rng = np.random.default_rng(12)
    for _ in range(10):
        data = random_dataset(rng, m_hi=15)
        spec = KernelSpec("gaussian", sigma=0.9)
        h = random_hyperparams(rng)
        view_in = data.labels == 1
        Xc, Xr = data.features[view_in], data.features[~view_in]
        lam = rng.uniform(0, 1, size=Xc.shape[0])
        nu_over = h.nu / Xr.shape[0]
        expansion = kernel_norm_sq_expansion(
            lam, gram(spec, Xc), gram(spec, Xr, Xc), gram(spec, Xr), nu_over)
        beta = np.empty(data.m)
        beta[view_in] = lam
        beta[~view_in] = -nu_over
        direct = float(beta @ gram(spec, data.features) @ beta)
        assert expansion == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_beta_pinning_exact(toy3):
    h = Hyperparams(0.5, 1.0)
    spec = KernelSpec("gaussian", sigma=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for c in (1, 2, 3):
            model, _ = train_kernel_class(toy3, c, h, spec)
            mr = (toy3.labels != c).sum()
            out = toy3.labels != c
            assert np.all(model.beta[out] == -h.nu / mr)
            rob, _ = train_robust_kernel_class(toy3, c, h, spec, UncertaintySpec(2, 0.01))
            assert np.all(rob.beta[out] == -h.nu / mr)


# --- binary ------------------------------------------------------------------


def test_binary_label_swap_symmetry(toy2):
    h1, h2 = Hyperparams(0.4, 1.0), Hyperparams(0.6, 1.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pair = train_binary(toy2, h1, h2)
        swapped = Dataset(toy2.features, 3 - toy2.labels)
        pair_sw = train_binary(swapped, h2, h1)
    np.testing.assert_allclose(pair_sw.positive.w, -pair.negative.w, atol=1e-9)
    np.testing.assert_allclose(pair_sw.negative.w, -pair.positive.w, atol=1e-9)
    assert pair_sw.positive.theta == pytest.approx(-pair.negative.theta, abs=1e-9)


def test_binary_axis_symmetric_data_gives_vertical_planes():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [3.0, 1.0], [3.0, -1.0]])
    y = np.array([1, 1, 2, 2])
    pair = train_binary(Dataset(X, y), Hyperparams(0.5, 1.0), Hyperparams(0.5, 1.0))
    assert pair.positive.w[1] == pytest.approx(0.0, abs=1e-9)
    assert pair.negative.w[1] == pytest.approx(0.0, abs=1e-9)


def test_binary_negative_primal_duality(toy2):
    h1, h2 = Hyperparams(0.4, 1.0), Hyperparams(0.35, 0.8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pair = train_binary(toy2, h1, h2)
        _, sol_neg = train_linear_class(toy2, 2, h2)
    primal = binary_negative_primal_value(toy2, h2, pair.negative.w, pair.negative.theta)
    dual = sol_neg.objective - linear_dual_shift(toy2, 2, h2)
    assert abs(primal - dual) <= 1e-6 * (1.0 + abs(dual))


def test_binary_needs_two_classes(toy3):
    with pytest.raises(InvalidInput):
        train_binary(toy3, Hyperparams(0.5, 1.0), Hyperparams(0.5, 1.0))


# --- robust ------------------------------------------------------------------


def test_robust_objective_monotone_in_eps(toy3):
    h = Hyperparams(0.5, 1.0)
    for p in (1, 2, math.inf):
        vals = []
        for eps in (0.0, 1e-3, 1e-2, 1e-1):
            _, sol = train_robust_linear_class(toy3, 1, h, UncertaintySpec(p, eps))
            vals.append(sol.objective)
        assert all(b >= a - 1e-7 for a, b in zip(vals, vals[1:]))


def test_robust_collapse_predictions_agree(toy3):
    h = Hyperparams(0.5, 1.0)
    rng = np.random.default_rng(0)
    held_out = rng.normal([1.0, 0.7], 1.0, size=(200, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        det = train_multiclass(toy3, h, rule="argmin")
        rob = train_multiclass(toy3, h, uncertainty=UncertaintySpec(2, 0.0), rule="argmin")
    agree = np.mean(classify(det, held_out) == classify(rob, held_out))
    assert agree >= 0.99


def test_robust_kernel_collapse(toy3):
    h = Hyperparams(0.5, 1.0)
    spec = KernelSpec("gaussian", sigma=1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for c in (1, 2, 3):
            _, qp_sol = train_kernel_class(toy3, c, h, spec)
            dual = qp_sol.objective - kernel_dual_shift(toy3, c, h, spec)
            _, conic_sol = train_robust_kernel_class(
                toy3, c, h, spec, UncertaintySpec(2, 0.0))
            assert abs(conic_sol.objective - dual) <= 1e-6 * (1.0 + abs(dual))


def test_robust_kernel_matches_slsqp_reference():
    data = blobs(5, [(0.0, 0.0), (1.5, 1.0)], [3, 3], scale=0.4)
    h = Hyperparams(0.5, 1.0)
    spec = KernelSpec("gaussian", sigma=1.0)
    eps_f = 0.05
    _, sol = train_robust_kernel_class(data, 1, h, spec,
                                       UncertaintySpec(2, 0.1, eps_feature=eps_f))
    ref_obj, res = slsqp_robust_kernel_reference(data, 1, h, spec, eps_f)
    assert res.success
    assert sol.objective == pytest.approx(ref_obj, abs=1e-5 * (1.0 + abs(ref_obj)))


def test_robust_linear_norm_term_uses_dual_norm(toy3):
    # for p=1 the certified objective involves |w|_inf; check the margin
    # constraints hold at the trained point with that norm
    h = Hyperparams(0.5, 1.0)
    eps = 0.05
    model, sol = train_robust_linear_class(toy3, 1, h, UncertaintySpec(1, eps))
    Xc = toy3.features[toy3.labels == 1]
    margins = Xc @ model.w + model.theta - eps * np.abs(model.w).max()
    # every violated margin must be paid for by slack; none may exceed the
    # slack budget (all xi >= 0 absorbed them at the optimum)
    assert margins.min() >= -1.0  # sanity: finite
    # robust feasibility of the reported solution under worst-case shifts
    rng = np.random.default_rng(1)
    deltas = rng.uniform(-eps, eps, size=(2000, toy3.n))
    deltas *= eps / np.maximum(np.abs(deltas).sum(axis=1, keepdims=True), eps)
    worst = ((Xc[:, None, :] + deltas[None, :, :]) @ model.w).min(axis=1) + model.theta
    assert np.all(worst >= margins - 1e-9)


def test_uncertainty_spec_validation():
    with pytest.raises(InvalidInput):
        UncertaintySpec(3, 0.1)
    with pytest.raises(InvalidInput):
        UncertaintySpec(2, -0.1)
    with pytest.raises(InvalidInput):
        UncertaintySpec(2, 0.0, eps_feature=0.1)
    spec = UncertaintySpec(2, [0.0, 0.1], eps_feature=[0.0, 0.2])
    assert list(spec.eps_vector(2)) == [0.0, 0.1]


def test_feature_vector_mapping_and_override():
    u = UncertaintySpec(2, 0.1)
    vals = u.feature_vector(KernelSpec("gaussian", sigma=1.0), 3, 4)
    assert np.allclose(vals, 0.09987513011073057)
    u2 = UncertaintySpec(2, 0.1, eps_feature=0.07)
    assert np.allclose(u2.feature_vector(KernelSpec("sigmoid"), 3, 4), 0.07)


# --- multiclass assembly and serialization ------------------------------------


def test_multiclass_counts_and_order_independence(toy3):
    h = Hyperparams(0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = train_multiclass(toy3, h, rule="argmin")
        again = train_multiclass(toy3, h, rule="argmin")
    assert model.num_classes == 3
    assert model.kind == "linear"
    for a, b in zip(model.models, again.models):
        np.testing.assert_array_equal(a.w, b.w)
        assert a.theta == b.theta


def test_multiclass_failure_carries_class_id(toy3):
    bad = Hyperparams(0.5, 1.0)
    # duplicate a dataset where class 2 training degenerates: all features zero
    X = np.zeros_like(toy3.features)
    data = Dataset(X, toy3.labels)
    with pytest.raises(DegenerateClassifier, match="class 1"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            train_multiclass(data, bad, rule="argmin")


def test_degenerate_normal_vector_rejected():
    X = np.zeros((4, 2))
    y = np.array([1, 1, 2, 2])
    with pytest.raises(DegenerateClassifier):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            train_linear_class(Dataset(X, y), 1, Hyperparams(0.5, 1.0))


def test_linear_model_round_trip_bit_exact(toy3, tmp_path):
    h = Hyperparams(0.5, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = train_multiclass(toy3, h, rule="argmax")
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert back.rule == model.rule
    assert back.provenance == model.provenance
    for a, b in zip(model.models, back.models):
        assert np.array_equal(a.w, b.w)
        assert a.theta == b.theta
        assert a.norm_w == b.norm_w


def test_kernel_model_round_trip_with_digest(toy3, tmp_path):
    h = Hyperparams(0.5, 1.0)
    spec = KernelSpec("gaussian", sigma=1.25)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = train_multiclass(toy3, h, spec=spec, rule="argmin")
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path, train_features=toy3.features)
    for a, b in zip(model.models, back.models):
        assert np.array_equal(a.beta, b.beta)
        assert a.theta == b.theta
        assert a.norm_h == b.norm_h
        assert a.spec == b.spec
    with pytest.raises(InvalidInput):
        load_model(path)  # features required
    with pytest.raises(InvalidInput):
        load_model(path, train_features=toy3.features + 1.0)  # digest mismatch
