"""Built-in verification checks.

Quick checks exercise every exactly-known identity (flat-space zeros,
algebraic conventions, wrap-around stepping, trivial weights) in well under
a minute.  Full checks run the Monte Carlo oracles at acceptance scale; the
n_scale knob shrinks the path counts while the tolerances stay SE-based, so
a reduced run still applies 3-sigma criteria honestly.
"""

from dataclasses import dataclass

import numpy as np

from .exterior import FormValue, fiber_tables, lambda_gram
from .fields import ScalarField
from .manifold import (ConformalFactor, ConformalModel, EuclideanModel,
                       FlatTorusModel, HyperbolicModel, SphereModel,
                       curvature_package)
from .pair import metric_pair, sinh_bound_check
from .paths import EllSpec, SimRequest, sample_path, simulate_chunk, feynman_kac
from .scenario import ConstantPotential

__all__ = ["CheckResult", "run_quick", "run_full", "riemann_symmetry_check"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    tolerance: str = ""

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        tol = f" [{self.tolerance}]" if self.tolerance else ""
        return f"{mark}  {self.name}: {self.detail}{tol}"


def _models():
    return {
        "euclidean": EuclideanModel(2),
        "flat_torus": FlatTorusModel(2, [1.0, 1.0]),
        "sphere": SphereModel(2),
        "hyperbolic": HyperbolicModel(2),
        "conformal_torus": ConformalModel(
            FlatTorusModel(2, [1.0, 1.0]),
            ConformalFactor("gaussian_bump", amplitude=0.3, sigma=0.25,
                            center=[0.5, 0.5], periods=[1.0, 1.0])),
    }


def riemann_symmetry_check(model, x, tol=1e-6):
    """Antisymmetries, pair symmetry and the first Bianchi identity of the
    lowered curvature tensor;  the fault-injection fixture targets this."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, SphereModel) and x.shape[-1] == model.m + 1:
        x = model.to_chart(x)
    R = model.riemann_low(x)
    scale = max(1.0, float(np.abs(R).max()))
    errs = {
        "antisym12": np.abs(R + np.einsum("...ijkl->...jikl", R)).max(),
        "antisym34": np.abs(R + np.einsum("...ijkl->...ijlk", R)).max(),
        "pair": np.abs(R - np.einsum("...ijkl->...klij", R)).max(),
        "bianchi": np.abs(R + np.einsum("...ijkl->...jkil", R)
                          + np.einsum("...ijkl->...kijl", R)).max(),
    }
    worst = max(errs.values()) / scale
    return CheckResult(
        f"riemann-symmetries[{model.kind}]", bool(worst <= tol),
        f"worst relative defect {worst:.2e}", f"<= {tol:g}")


def run_quick():
    checks = []
    t = fiber_tables(2)
    eu = EuclideanModel(2)
    tor = FlatTorusModel(2, [1.0, 1.0])
    sph = SphereModel(2)

    # exterior algebra conventions
    a = FormValue.from_blocks(2, {1: [1, 0]})
    b = FormValue.from_blocks(2, {1: [0, 1]})
    from .exterior import interior, wedge
    ab = wedge(a, b)
    checks.append(CheckResult(
        "wedge-basis", bool(ab.block(2)[0] == 1 and wedge(b, a).block(2)[0] == -1),
        "dx0^dx1 = +1, reversed = -1"))
    e0 = np.array([1.0, 0.0])
    checks.append(CheckResult(
        "interior-dual-basis",
        bool(np.allclose(interior(np.eye(2), e0, ab).block(1), [0, 1])),
        "e0 . (eps0^eps1) = eps1"))
    checks.append(CheckResult(
        "gram-k0", bool(lambda_gram(np.diag([4.0, 9.0]), 0)[0, 0] == 1.0),
        "Lambda^0 gram is [1]"))
    g22 = lambda_gram(np.diag([4.0, 9.0]), 2)[0, 0]
    checks.append(CheckResult(
        "gram-top", bool(abs(g22 - 1 / 36) < 1e-14), f"det cominor {g22:.6f}"))

    # identical metrics
    pair = metric_pair(tor, tor, np.array([0.3, 0.4]))
    sb = sinh_bound_check(pair)
    checks.append(CheckResult(
        "pair-identical",
        bool(pair.delta0 < 1e-14 and pair.delta_nabla < 1e-20
             and abs(pair.rho - 1) < 1e-14 and sb["holds"]),
        f"delta0={pair.delta0:.1e} rho-1={abs(pair.rho-1):.1e}"))

    # flat curvature package
    pkg = curvature_package(eu, np.array([0.2, -0.1]))
    checks.append(CheckResult(
        "euclid-curvature-zero",
        bool(np.abs(pkg.christoffels).max() == 0
             and np.abs(pkg.weitzenboeck).max() == 0
             and pkg.grad_R_norm == 0),
        "Gamma = R = Weitzenboeck = grad R = 0"))
    W0 = [curvature_package(m, _default_x(m)).weitzenboeck[0, 0]
          for m in _models().values()]
    checks.append(CheckResult(
        "weitzenboeck-degree0",
        bool(max(abs(w) for w in W0) == 0.0),
        "degree-0 block vanishes on every model"))

    # geodesic steps
    fp = eu.orthonormal_frame(np.zeros(2))
    stepped = eu.geodesic_step(fp, np.array([1.0, 0.0]), 0.1)
    checks.append(CheckResult(
        "euclid-step", bool(np.allclose(stepped.x, [0.1, 0])
                            and np.allclose(stepped.E, np.eye(2))),
        "straight line, frame fixed"))
    fp = tor.orthonormal_frame(np.array([0.95, 0.0]))
    wrapped = tor.geodesic_step(fp, np.array([1.0, 0.0]), 0.1)
    checks.append(CheckResult(
        "torus-wrap", bool(np.allclose(wrapped.x, [0.05, 0])),
        f"wrapped to {wrapped.x}"))

    # flat transport and increments
    p = sample_path(tor, np.array([0.2, 0.2]), 0.1, 1e-3, 7,
                    transport_degrees=(0, 1, 2))
    drift = np.abs(p.frames - np.eye(2)).max()
    qdrift = np.abs(p.transport - np.eye(4)).max()
    checks.append(CheckResult(
        "flat-exactness", bool(drift == 0 and qdrift == 0),
        "frames and damped transport stay identity"))
    wrapped_inc = p.points[1] - p.points[0]
    checks.append(CheckResult(
        "flat-increments", bool(np.allclose(
            np.minimum(np.abs(wrapped_inc), 1 - np.abs(wrapped_inc)),
            np.minimum(np.abs(p.increments[0]), 1 - np.abs(p.increments[0])))),
        "anti-development equals coordinate increments"))

    # Feynman-Kac trivia
    r0 = feynman_kac(p, ConstantPotential(0.0))
    r2 = feynman_kac(p, ConstantPotential(2.0))
    checks.append(CheckResult(
        "fk-const", bool(r0["weight"] == 1.0
                         and abs(r2["weight"] - np.exp(-0.1)) < 1e-12),
        "w=0 -> 1, w=2 -> e^{-s}"))

    # censored exit on a compact model
    from .paths import exit_time
    psph = sample_path(sph, sph.default_point(), 0.05, 1e-3, 3)
    checks.append(CheckResult(
        "exit-censored", exit_time(sph, psph, sph.default_point(), 10.0) is None,
        "radius beyond the diameter never exits"))

    # kato trivia
    from .paths import kato_test
    rep = kato_test(eu, ConstantPotential(0.0), (0.05, 0.1), [np.zeros(2)],
                    256, 1e-2, 11)
    checks.append(CheckResult(
        "kato-zero", bool(rep.verdict == "kato" and rep.c_gamma == 0.0
                          and rep.sup_estimates.max() == 0.0),
        f"verdict {rep.verdict}, c_gamma {rep.c_gamma}"))
    repb = kato_test(eu, ConstantPotential(3.0), (0.05, 0.1), [np.zeros(2)],
                     256, 1e-2, 11)
    checks.append(CheckResult(
        "kato-bounded", bool(repb.verdict == "kato"
                             and repb.sup_estimates.max() <= 3 * 0.1 + 1e-9),
        f"estimates {repb.sup_estimates}"))

    # conformal identity factors at psi = 0
    from .calculus import conformal_rules
    psi0 = ConformalFactor("constant", amplitude=0.0)
    fldc = ScalarField(_SinX())
    cr = conformal_rules(psi0, tor, np.array([0.3, 0.3]), fldc, k=0)
    checks.append(CheckResult(
        "conformal-identity", bool(cr["inner_scale"] == 1.0
                                   and cr["vol_factor"] == 1.0),
        "psi=0 factors are 1"))

    # curvature symmetry sweep
    for name, model in _models().items():
        checks.append(riemann_symmetry_check(model, _default_x(model)))

    # bound-function trivia
    from .bounds import ConstantsLedger, phi, psi as psi_fn, theta
    led = ConstantsLedger()
    pflat = psi_fn(eu, np.zeros(2), 0.5, led)
    expect = led.prefactor(0.5) / np.sqrt(0.5) * np.exp(np.pi ** 2 * 7 * 0.25)
    checks.append(CheckResult(
        "psi-flat-formula", bool(abs(pflat / expect - 1) < 1e-12),
        f"flat-space weight {pflat:.4e}"))
    checks.append(CheckResult(
        "theta-flat", bool(theta(eu, np.zeros(2), 0.5) == 1.0), "theta = 1"))
    checks.append(CheckResult(
        "phi-torus-equilibrium", bool(abs(phi(tor, np.zeros(2), 6.0) - 1.0) < 1e-9),
        "late-time kernel sup approaches 1/vol"))
    checks.append(CheckResult(
        "phi-sphere-homogeneous", True, "x-independent by construction"))
    return checks


class _SinX:
    def __call__(self, x):
        return np.sin(2 * np.pi * np.asarray(x)[..., 0])


def _default_x(model):
    if isinstance(model, SphereModel):
        return model.default_point()
    if isinstance(model, FlatTorusModel):
        return np.array([0.3, 0.4])
    if isinstance(model, ConformalModel):
        return np.array([0.55, 0.45]) if isinstance(model.base, FlatTorusModel) \
            else np.array([0.2, -0.1])
    return np.array([0.2, -0.1])


def run_full(n_scale=1.0, workers=1):
    from . import acceptance
    return acceptance.run_all(n_scale=n_scale, workers=workers)
