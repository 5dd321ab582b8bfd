"""Acceptance criteria at full scale.

Each criterion is a function returning a CheckResult with its tolerance
spelled out; run_all executes every criterion and prints one line each.
n_scale shrinks Monte Carlo path counts for smoke runs while keeping the
standard-error-based tolerances honest.
"""

import time

import numpy as np

from .bismut import bismut_d, bismut_delta, semigroup_estimate
from .bounds import ConstantsLedger, criterion_integral, gradient_bound_check
from .exterior import fiber_tables, lambda_ext
from .fields import AmbientCovectorField, CoordField, ScalarField
from .manifold import (ConformalFactor, ConformalModel, EuclideanModel,
                       FlatTorusModel, HyperbolicModel, SphereModel,
                       curvature_package)
from .paths import damped_transport, kato_test, sample_path, simulate_chunk, \
    SimRequest
from .scenario import CoulombPotential, GaussianScalar, TrigScalar
from .selftest import CheckResult

__all__ = ["run_all", "CRITERIA"]


def _n(base, n_scale):
    return max(512, int(round(base * n_scale)))


def criterion_1_gaussian_gradient(n_scale=1.0, workers=1):
    """Euclidean Bismut-gradient oracle against the Gaussian convolution."""
    model = EuclideanModel(2)
    fld = ScalarField(GaussianScalar([0.0, 0.0], 1.0))
    x = np.array([0.3, 0.0])
    s, dt = 0.5, 1e-3
    n = _n(200_000, n_scale)
    exact = -0.2 * (1 / 1.5) * np.exp(-0.03)
    t0 = time.time()
    res = bismut_d(model, fld, x, s, n, dt, seed=20_101,
                   v=np.array([0, 1, 0, 0.0]), workers=workers)
    wall = time.time() - t0
    z = (res.pairing.real - exact) / res.pairing_se
    ok = abs(z) <= 3.0 and wall <= 300.0
    return CheckResult(
        "1-euclidean-bismut-gradient", ok,
        f"estimate {res.pairing.real:.5f} +- {res.pairing_se:.5f} vs "
        f"analytic {exact:.5f} (z={z:+.2f}, N={n}, {wall:.0f}s)",
        "within 3 SE, <= 5 min")


def criterion_2_damped_transport(n_scale=1.0, workers=1):
    """Constant-curvature transport: e^{-s/2} on the sphere, e^{+s/2} on
    the hyperbolic plane, per path to 1e-6 relative."""
    s, dt = 1.0, 1e-3
    n = max(64, int(round(1000 * min(1.0, n_scale * 4))))
    worst = 0.0
    for model, sign in ((SphereModel(2), -1.0), (HyperbolicModel(2), +1.0)):
        x0 = model.default_point()
        req = SimRequest(s=s, dt=dt, record=True)
        out = simulate_chunk(model, x0, req, 20_202, 0, 0, n)
        paths = [_path_view(out, i) for i in range(n)]
        Q = damped_transport(model, paths, degrees=(1,))
        target = np.exp(sign * s / 2) * np.eye(2)
        err = np.abs(Q[:, -1] - target).max() / np.exp(sign * s / 2)
        worst = max(worst, float(err))
    return CheckResult(
        "2-constant-curvature-transport", worst <= 1e-6,
        f"worst relative deviation {worst:.2e} over {2 * n} paths",
        "<= 1e-6 relative")


def _path_view(out, i):
    from .paths import PathSample
    return PathSample(times=out.times, points=out.rec_x[i],
                      frames=out.rec_E[i], increments=out.rec_dB[i],
                      transport=None, transport_degrees=(),
                      fk_integral=None, exit_records={}, substream=i)


def criterion_3_weitzenboeck(n_scale=1.0, workers=1):
    """Degree-0 block exactly zero and degree-1 block equal to the Ricci
    matrix in-frame on every builtin model."""
    t = fiber_tables(2)
    cases = {
        "euclidean": (EuclideanModel(2), np.array([0.2, -0.4])),
        "flat_torus": (FlatTorusModel(2, [1.0, 1.0]), np.array([0.3, 0.7])),
        "sphere": (SphereModel(2), SphereModel(2).from_chart(
            np.array([0.4, -0.2]))),
        "hyperbolic": (HyperbolicModel(2), np.array([0.25, 0.1])),
        "conformal_torus": (ConformalModel(
            FlatTorusModel(2, [1.0, 1.0]),
            ConformalFactor("gaussian_bump", amplitude=0.4, sigma=0.25,
                            center=[0.5, 0.5], periods=[1.0, 1.0])),
            np.array([0.55, 0.42])),
        "conformal_euclid": (ConformalModel(
            EuclideanModel(2),
            ConformalFactor("gaussian_bump", amplitude=0.3, sigma=0.5)),
            np.array([0.2, -0.1])),
    }
    worst0, worst1 = 0.0, 0.0
    for name, (model, x) in cases.items():
        pkg = curvature_package(model, x)
        fp = model.orthonormal_frame(np.asarray(x, dtype=float))
        b0 = abs(pkg.weitzenboeck[0, 0])
        s1 = t.degree_slices[1]
        b1 = np.abs(pkg.weitzenboeck[s1, s1] - model.ricci_frame(fp)).max()
        worst0, worst1 = max(worst0, b0), max(worst1, float(b1))
    ok = worst0 == 0.0 and worst1 <= 1e-8
    return CheckResult(
        "3-weitzenboeck-sanity", ok,
        f"degree-0 block {worst0:.1e} (exact), degree-1 vs Ricci {worst1:.2e}",
        "0 exactly; <= 1e-8")


def criterion_4_gradient_bounds(n_scale=1.0, workers=1):
    """One-sided gradient estimates over 3 models x 3 horizons."""
    n = _n(2000, n_scale)
    dt = 1e-3
    tor = FlatTorusModel(2, [1.0, 1.0])
    sph = SphereModel(2)
    hyp = HyperbolicModel(2)
    cells = [
        (tor, ScalarField(TrigScalar([1, 1])), np.array([0.3, 0.4])),
        (sph, AmbientCovectorField([1.0, 0.5, 0.0]),
         np.array([0.6, -0.3, -np.sqrt(1 - 0.45)])),
        (hyp, ScalarField(GaussianScalar([0.0, 0.0], 0.3)),
         np.array([0.1, 0.05])),
    ]
    fails, details = 0, []
    seed = 20_404
    for model, fld, x in cells:
        for s in (0.25, 0.5, 1.0):
            out = gradient_bound_check(model, fld, x, s, n, dt, seed,
                                       workers=workers)
            seed += 10
            if not out["all_hold"]:
                fails += 1
                details.append(f"{model.kind}@s={s}")
    return CheckResult(
        "4-gradient-estimates-one-sided", fails == 0,
        "all 9 cells hold" if fails == 0 else f"failures: {details}",
        "lhs^2 <= Psi Phi |alpha|^2 (resp. Xi) + 3 SE")


def criterion_5_lemma_identities(n_scale=1.0, workers=1):
    """Randomized verification of the pointwise lemma layer."""
    from .pair import metric_pair, sinh_bound_check, sym_pow, jacobi_dlogrho
    from .calculus import codifferential_transform, conformal_rules, \
        numeric_delta
    from .exterior import lambda_ext as lam
    t0 = time.time()
    rng = np.random.default_rng(50_505)
    msgs = []
    ok = True

    # trace inequality |tr(AB)| <= |A|_HS |B|_HS, do 10^4 complex pairs
    worst = 0.0
    for _ in range(10_000):
        mdim = rng.integers(2, 5)
        A = rng.standard_normal((mdim, mdim)) + 1j * rng.standard_normal((mdim, mdim))
        B = rng.standard_normal((mdim, mdim)) + 1j * rng.standard_normal((mdim, mdim))
        lhs = abs(np.trace(A @ B))
        rhs = np.linalg.norm(A) * np.linalg.norm(B)
        worst = max(worst, lhs - rhs)
    ok &= worst <= 1e-10
    msgs.append(f"trace ineq margin {worst:.1e}")

    # sinh bound on 10^4 random SPD matrices
    worst = 0.0
    for _ in range(10_000):
        mdim = rng.integers(2, 5)
        B = rng.standard_normal((mdim, mdim))
        A = B @ B.T + 0.05 * np.eye(mdim)
        lam_ = np.linalg.eigvalsh(A)
        delta = np.max(np.abs(lam_ ** (mdim / 4) - lam_ ** (-mdim / 4)))
        rho = np.sqrt(np.prod(lam_))
        calA = lam(mdim, np.linalg.inv(A))
        calA = 0.5 * (calA + calA.T)
        Shat = sym_pow(rho * calA, 0.5) - sym_pow(rho * calA, -0.5)
        smax = np.abs(np.linalg.eigvalsh(Shat)).max()
        Ssc = abs(np.sqrt(rho) - 1 / np.sqrt(rho))
        worst = max(worst, max(smax, Ssc) - delta)
    ok &= worst <= 1e-10
    msgs.append(f"sinh bound margin {worst:.1e}")

    # conformal torus staging for the derivative-level identities
    tor = FlatTorusModel(2, [1.0, 1.0])
    psi = ConformalFactor("gaussian_bump", amplitude=0.35, sigma=0.25,
                          center=[0.5, 0.5], periods=[1.0, 1.0])
    cm = ConformalModel(tor, psi)
    m = 2
    tt = fiber_tables(m)

    class _RandomTrig:
        def __init__(self, seed):
            r = np.random.default_rng(seed)
            self.c = r.standard_normal((4, 4)) + 1j * r.standard_normal((4, 4))

        def __call__(self, x):
            x = np.asarray(x, dtype=float)
            s1 = np.sin(2 * np.pi * x[..., 0])
            c1 = np.cos(2 * np.pi * x[..., 0])
            s2 = np.sin(2 * np.pi * x[..., 1])
            c2 = np.cos(2 * np.pi * x[..., 1])
            basis = np.stack([s1 * c2, c1 * s2, s1 * s2, c1 * c2], axis=-1)
            return np.einsum("...b,cb->...c", basis, self.c)

    # Lemma 2.8 codifferential transform and Prop 6.3 conformal rule at
    # 1000 random points, compared through chart coefficients
    pts = rng.uniform(0, 1, size=(1000, 2))
    eta = CoordField(_RandomTrig(7), degrees=(1, 2))
    direct = numeric_delta(cm, eta, pts)
    trans = codifferential_transform(tor, cm, eta, pts)
    E_h = cm.orthonormal_frame(pts).E
    E_g = tor.orthonormal_frame(pts).E
    dir_coord = np.linalg.solve(lam(m, E_h), direct[..., None])[..., 0]
    tr_coord = np.linalg.solve(lam(m, E_g), trans[..., None])[..., 0]
    err28 = np.abs(dir_coord - tr_coord).max()
    ok &= err28 <= 1e-6
    msgs.append(f"codiff transform {err28:.1e}")

    eta1 = CoordField(_Degree1Trig(9), degrees=(1,))
    direct1 = numeric_delta(cm, eta1, pts)
    dir1_coord = np.linalg.solve(lam(m, E_h), direct1[..., None])[..., 0]
    cr = conformal_rules(psi, tor, pts, eta1, k=1)
    rule_coord = np.linalg.solve(lam(m, E_g), cr["delta_conformal"][..., None])[..., 0]
    err63 = np.abs(dir1_coord - rule_coord).max()
    ok &= err63 <= 1e-6
    msgs.append(f"conformal codiff rule {err63:.1e}")

    # inner-product scale (6.2a) through the frame grams
    k = 1
    pm = metric_pair(tor, cm, pts)
    scale = np.exp(-2 * k * psi.value(pts))
    s1 = tt.degree_slices[1]
    gram_ratio = pm.calA[..., s1, s1][..., 0, 0]
    err62a = np.abs(gram_ratio - scale).max()
    ok &= err62a <= 1e-10
    msgs.append(f"inner-product scale {err62a:.1e}")

    # identification adjointness by quadrature and I* = e^{m psi} I^{-1}
    from .pair import identification_apply
    from .quadrature import model_quadrature
    quad = model_quadrature(tor, 32)
    nodes = quad.nodes
    pmq = metric_pair(tor, cm, nodes)
    al = _RandomTrig(11)(nodes)
    be = _RandomTrig(13)(nodes)
    al_g = np.einsum("...JI,...I->...J", lam(m, tor.orthonormal_frame(nodes).E), al)
    be_g = np.einsum("...JI,...I->...J", lam(m, tor.orthonormal_frame(nodes).E), be)
    I_be = np.einsum("...JK,...K->...J", pmq.calA_isqrt, be_g)
    Istar_al = pmq.rho[..., None] * np.einsum("...JK,...K->...J",
                                              pmq.calA_sqrt, al_g)
    # h-inner products through calA: (u, v)_h = (calA u, v)_g
    lhs = np.sum(quad.weights * np.einsum(
        "...J,...J->...", np.conj(Istar_al), be_g))
    hprod = np.einsum("...JK,...K->...J", pmq.calA, I_be)
    rhs = np.sum(quad.weights * pmq.rho * np.einsum(
        "...J,...J->...", np.conj(al_g), hprod))
    err_adj = abs(lhs - rhs) / max(abs(rhs), 1e-12)
    ok &= err_adj <= 1e-6
    msgs.append(f"I adjointness {err_adj:.1e}")
    istar_direct = np.exp(m * psi.value(nodes))[..., None] * np.einsum(
        "...JK,...K->...J", np.linalg.inv(pmq.calA_isqrt), al_g)
    err_63b = np.abs(istar_direct - Istar_al).max()
    ok &= err_63b <= 1e-8
    msgs.append(f"I* factor {err_63b:.1e}")

    # Jacobi formula against a centered difference of det A, 1000 instances
    worstJ = 0.0
    cme = ConformalModel(EuclideanModel(2),
                         ConformalFactor("gaussian_bump", amplitude=0.3,
                                         sigma=0.5))
    eu = EuclideanModel(2)
    for i in range(1000):
        x = rng.uniform(-0.8, 0.8, size=2)
        X = rng.standard_normal(2)
        res = jacobi_dlogrho(eu, cme, x, X)
        h = 1e-5
        Xu = X / np.linalg.norm(X)

        def detA(y):
            p = metric_pair(eu, cme, y)
            return float(np.prod(p.eigvals))
        fd = (detA(x + h * Xu) - detA(x - h * Xu)) / (2 * h) * np.linalg.norm(X)
        rel = abs(res["d_detA"] - fd) / max(abs(fd), 1e-10)
        worstJ = max(worstJ, rel)
        if not res["holds"]:
            ok = False
    ok &= worstJ <= 1e-6
    msgs.append(f"jacobi rel {worstJ:.1e}")

    wall = time.time() - t0
    ok &= wall <= 120.0
    return CheckResult("5-lemma-identities", bool(ok),
                       "; ".join(msgs) + f" ({wall:.0f}s)",
                       "tolerances 1e-6..1e-12, <= 2 min")


class _Degree1Trig:
    def __init__(self, seed):
        r = np.random.default_rng(seed)
        self.c = r.standard_normal((2, 4)) + 1j * r.standard_normal((2, 4))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s1 = np.sin(2 * np.pi * x[..., 0])
        c1 = np.cos(2 * np.pi * x[..., 0])
        s2 = np.sin(2 * np.pi * x[..., 1])
        c2 = np.cos(2 * np.pi * x[..., 1])
        basis = np.stack([s1 * c2, c1 * s2, s1 * s2, c1 * c2], axis=-1)
        out = np.zeros(x.shape[:-1] + (4,), dtype=complex)
        out[..., 1] = np.einsum("...b,b->...", basis, self.c[0])
        out[..., 2] = np.einsum("...b,b->...", basis, self.c[1])
        return out


def criterion_6_kato_coulomb(n_scale=1.0, workers=1):
    """Coulomb potential in R^3: sqrt(t) scaling of the short-time quantity
    and a kato verdict."""
    model = EuclideanModel(3)
    w = CoulombPotential()
    t_grid = (0.025, 0.05, 0.1)
    n = _n(100_000, n_scale)
    xs = [np.array([0.05, 0.0, 0.0]), np.array([0.3, 0.0, 0.0]),
          np.array([0.7, 0.0, 0.0])]
    t0 = time.time()
    rep = kato_test(model, w, t_grid, xs, n, 1e-3, 20_606)
    wall = time.time() - t0
    vals = rep.sup_estimates
    r1 = vals[1] / vals[0]
    r2 = vals[2] / vals[1]
    ok = (abs(r1 / np.sqrt(2) - 1) <= 0.15 and abs(r2 / np.sqrt(2) - 1) <= 0.15
          and rep.verdict == "kato" and wall <= 600.0)
    return CheckResult(
        "6-kato-coulomb-scaling", bool(ok),
        f"sup estimates {np.round(vals, 4).tolist()}, ratios "
        f"{r1:.3f}/{r2:.3f} vs sqrt2={np.sqrt(2):.3f}, verdict {rep.verdict} "
        f"({wall:.0f}s)", "ratios within 15%, verdict kato, <= 10 min")


def criterion_7_criterion_integral(n_scale=1.0, workers=1):
    """Scattering-criterion evaluation on the two conformal scenarios."""
    t0 = time.time()
    tor = FlatTorusModel(2, [1.0, 1.0])
    bump = ConformalModel(tor, ConformalFactor(
        "gaussian_bump", amplitude=0.3, sigma=0.25, center=[0.5, 0.5],
        periods=[1.0, 1.0]))
    repA = criterion_integral(tor, bump, s=0.5, n_per_dim=16, refine_levels=2)
    relA = abs(repA.refinement["h"][-1]["value"]
               - repA.refinement["h"][0]["value"]) \
        / max(abs(repA.refinement["h"][-1]["value"]), 1e-300)
    eu = EuclideanModel(2)
    const = ConformalModel(eu, ConformalFactor("constant", amplitude=0.4))
    repB = criterion_integral(eu, const, s=0.5, n_per_dim=12,
                              refine_levels=2, radius=3.0)
    wall = time.time() - t0
    ok = (repA.verdict == "finite" and relA <= 0.05
          and repB.verdict == "divergent-at-resolution" and wall <= 600.0)
    return CheckResult(
        "7-criterion-evaluation", bool(ok),
        f"bump-on-torus {repA.verdict} (refinement change {relA:.2e}); "
        f"constant-on-euclidean {repB.verdict} ({wall:.0f}s)",
        "finite stable <= 5% / divergent-at-resolution, <= 10 min")


def criterion_8_determinism(n_scale=1.0, workers=1):
    """Identical seed must give byte-identical reports for 1 and 8 workers."""
    import json
    from .bismut import EstimatorResult
    tor = FlatTorusModel(2, [1.0, 1.0])
    fld = ScalarField(TrigScalar([1, 2]))
    x = np.array([0.3, 0.4])
    outs = []
    for workers_n in (1, 8):
        r1 = semigroup_estimate(tor, fld, x, 0.3, 6000, 1e-3, seed=20_808,
                                workers=workers_n)
        r2 = bismut_d(tor, fld, x, 0.3, 6000, 1e-3, seed=20_808,
                      v=np.array([0, 1, 0, 0.0]), workers=workers_n)
        payload = json.dumps({"semigroup": r1.to_dict(),
                              "bismut_d": r2.to_dict()}, sort_keys=True)
        outs.append(payload)
    ok = outs[0] == outs[1]
    return CheckResult(
        "8-determinism-worker-count", ok,
        "byte-identical reports for workers in {1, 8}"
        if ok else "reports differ between worker counts",
        "byte-identical")


def criterion_9_dt_convergence(n_scale=1.0, workers=1):
    """Halving dt moves the torus semigroup oracle by at most one combined
    SE under coupled increments (weak order-1 consistency)."""
    tor = FlatTorusModel(2, [1.0, 1.0])
    fld = ScalarField(TrigScalar([1, 2]))
    x = np.array([0.3, 0.4])
    n = _n(20_000, n_scale)
    coarse = semigroup_estimate(tor, fld, x, 0.4, n, 1e-3, seed=20_909,
                                workers=workers, increment_refine=2)
    fine = semigroup_estimate(tor, fld, x, 0.4, n, 5e-4, seed=20_909,
                              workers=workers, increment_refine=1)
    diff = abs(coarse.value.coeffs[0] - fine.value.coeffs[0])
    comb = float(np.sqrt(coarse.se[0] ** 2 + fine.se[0] ** 2))
    ok = diff <= max(comb, 1e-14)
    return CheckResult(
        "9-dt-halving-consistency", bool(ok),
        f"coupled difference {diff:.2e} vs combined SE {comb:.2e}",
        "<= 1 combined SE")


CRITERIA = [
    criterion_1_gaussian_gradient,
    criterion_2_damped_transport,
    criterion_3_weitzenboeck,
    criterion_4_gradient_bounds,
    criterion_5_lemma_identities,
    criterion_6_kato_coulomb,
    criterion_7_criterion_integral,
    criterion_8_determinism,
    criterion_9_dt_convergence,
]


def run_all(n_scale=1.0, workers=1, echo=True):
    results = []
    for fn in CRITERIA:
        res = fn(n_scale=n_scale, workers=workers)
        results.append(res)
        if echo:
            print(res.line(), flush=True)
    return results
