import numpy as np
import pytest

from conftest import model_point
from heatforms.exterior import fiber_tables
from heatforms.manifold import (ChartError, ConformalFactor, ConformalModel,
                                EuclideanModel, FlatTorusModel,
                                HyperbolicModel, ManifoldModel, ModelError,
                                SphereModel, curvature_package)


def test_dimension_bounds():
    with pytest.raises(ModelError):
        EuclideanModel(1)
    with pytest.raises(ModelError):
        EuclideanModel(5)
    with pytest.raises(ModelError):
        FlatTorusModel(2, [1.0, -1.0])


def test_euclid_curvature_trivial(euclid2):
    pkg = curvature_package(euclid2, np.array([0.7, -1.2]))
    assert np.abs(pkg.christoffels).max() == 0
    assert np.abs(pkg.riemann).max() == 0
    assert np.abs(pkg.ricci).max() == 0
    assert np.abs(pkg.weitzenboeck).max() == 0
    assert pkg.grad_R_norm == 0


def test_sphere_curvature_identities(sphere2):
    u = np.array([0.4, -0.25])
    x = sphere2.from_chart(u)
    pkg = curvature_package(sphere2, x)
    G = sphere2.metric(u)
    assert np.abs(pkg.ricci - G).max() < 1e-7            # Ric = (m-1) K g
    t = fiber_tables(2)
    s1 = t.degree_slices[1]
    assert np.abs(pkg.weitzenboeck[s1, s1] - np.eye(2)).max() < 1e-12
    assert np.allclose(pkg.curvature_operator, np.eye(1))
    assert pkg.grad_R_norm == 0.0


def test_hyperbolic_gallot_meyer_floor(hyperbolic2):
    x = np.array([0.2, 0.1])
    pkg = curvature_package(hyperbolic2, x)
    t = fiber_tables(2)
    s1 = t.degree_slices[1]
    # Ric = -g and the curvature-operator floor -K k (m-k) = -1 is attained
    assert np.abs(pkg.weitzenboeck[s1, s1] + np.eye(2)).max() < 1e-12
    assert np.allclose(pkg.curvature_operator, -np.eye(1))
    ev = np.linalg.eigvalsh(pkg.weitzenboeck[s1, s1])
    assert ev.min() >= -1.0 - 1e-8


def test_fd_christoffels_match_analytic(hyperbolic2, conformal_torus):
    for model in (hyperbolic2, conformal_torus):
        fd_model = type(model).__new__(type(model))
        fd_model.__dict__.update(model.__dict__)
        fd_model.deriv_mode = "fd"
        fd_model.h_fd = 1e-4
        x = model_point(model)
        Ga = model.christoffels(x)
        Gf = ManifoldModel.christoffels(fd_model, x)
        scale = max(1.0, np.abs(Ga).max())
        assert np.abs(Ga - Gf).max() / scale < 1e-6


def test_riemann_symmetries_all_models(all_models):
    from heatforms.selftest import riemann_symmetry_check
    for model in all_models.values():
        res = riemann_symmetry_check(model, model_point(model))
        assert res.passed, res.detail


def test_weitzenboeck_matches_ricci_in_frame(all_models):
    t = fiber_tables(2)
    s1 = t.degree_slices[1]
    for model in all_models.values():
        x = model_point(model)
        pkg = curvature_package(model, x)
        fp = model.orthonormal_frame(np.asarray(x, dtype=float))
        assert np.abs(pkg.weitzenboeck[s1, s1]
                      - model.ricci_frame(fp)).max() < 1e-8
        assert pkg.weitzenboeck[0, 0] == 0.0
        # symmetric and exactly block diagonal
        W = pkg.weitzenboeck
        assert np.abs(W - W.T).max() < 1e-10
        for k in range(3):
            s = t.degree_slices[k]
            other = np.ones(4, dtype=bool)
            other[s] = False
            assert np.all(W[s][:, other] == 0)


def test_geodesic_step_euclid_and_wrap(euclid2, torus2):
    fp = euclid2.orthonormal_frame(np.zeros(2))
    out = euclid2.geodesic_step(fp, np.array([1.0, 0]), 0.1)
    assert np.allclose(out.x, [0.1, 0]) and np.allclose(out.E, np.eye(2))
    fp = torus2.orthonormal_frame(np.array([0.95, 0.0]))
    out = torus2.geodesic_step(fp, np.array([1.0, 0]), 0.1)
    assert np.allclose(out.x, [0.05, 0])


def test_sphere_step_distance_third_order(sphere2):
    fp = sphere2.orthonormal_frame(sphere2.default_point())
    errs = []
    for h in (0.2, 0.1, 0.05):
        stepped = sphere2.geodesic_step(fp, np.array([0.6, 0.8]), h)
        errs.append(abs(sphere2.distance(fp.x, stepped.x) - h))
    assert errs[0] < 0.2 ** 3
    # cubic contraction under halving
    assert errs[1] / errs[0] < 0.2
    assert errs[2] / errs[1] < 0.2


def test_frame_orthonormality_drift(hyperbolic2):
    rng = np.random.default_rng(0)
    x = np.array([0.1, -0.2])
    fp = hyperbolic2.orthonormal_frame(x)
    budget = 0
    for _ in range(200):
        v = rng.standard_normal(2)
        v /= np.linalg.norm(v)
        fp = hyperbolic2.geodesic_step(fp, v, 5e-3)
        budget += 5e-3
    G = hyperbolic2.metric(fp.x)
    drift = np.abs(fp.E.T @ G @ fp.E - np.eye(2)).max()
    assert drift <= 1e-8 * max(budget, 1.0)


def test_sphere_chart_guard(sphere2):
    north = np.array([0.0, 0.0, 1.0])
    with pytest.raises(ChartError):
        sphere2.to_chart(north)


def test_hyperbolic_chart_exit_guard(hyperbolic2):
    fp = hyperbolic2.orthonormal_frame(np.array([0.97, 0.0]))
    with pytest.raises(ChartError):
        for _ in range(2000):
            fp = hyperbolic2.geodesic_step(fp, np.array([1.0, 0.0]), 0.05)


def test_non_spd_rejected():
    class Broken(ManifoldModel):
        kind = "broken"

        def metric(self, x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(np.diag([1.0, -1.0]),
                                   x.shape[:-1] + (2, 2)).copy()

    with pytest.raises(ModelError):
        curvature_package(Broken(2), np.zeros(2))


def test_conformal_psi_families():
    psi = ConformalFactor("gaussian_bump", amplitude=0.4, sigma=0.3,
                          center=[0.5, 0.5], periods=[1.0, 1.0])
    x = np.array([0.62, 0.47])
    h = 1e-6
    g_fd = np.array([(psi.value(x + np.eye(2)[i] * h)
                      - psi.value(x - np.eye(2)[i] * h)) / (2 * h)
                     for i in range(2)])
    assert np.abs(psi.grad(x) - g_fd).max() < 1e-8
    # periodic smoothness across the seam
    seam = np.array([0.999999, 0.5])
    seam2 = np.array([0.000001, 0.5])
    assert abs(psi.value(seam) - psi.value(seam2)) < 1e-10
    sp = ConformalFactor("spline_bump", amplitude=0.2, support_radius=0.3,
                         center=[0.5, 0.5], periods=[1.0, 1.0])
    assert sp.value(np.array([0.0, 0.0])) == 0.0
    assert sp.grad(np.array([0.0, 0.0]))[0] == 0.0
    assert sp.value(np.array([0.5, 0.52])) > 0


def test_conformal_shortcut_derivatives(conformal_torus):
    x = np.array([0.58, 0.43])
    fast = conformal_torus.dchristoffels(x)
    slow = ManifoldModel.dchristoffels(conformal_torus, x)
    assert np.abs(fast - slow).max() < 1e-8
    fastG = conformal_torus.christoffels(x)
    slowG = ManifoldModel.christoffels(conformal_torus, x)
    assert np.abs(fastG - slowG).max() < 1e-12


def test_conformal_over_sphere_rejected(sphere2):
    with pytest.raises(ModelError):
        ConformalModel(sphere2, ConformalFactor("constant", amplitude=0.1))
