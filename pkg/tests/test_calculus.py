import numpy as np
import pytest

from heatforms.calculus import (codifferential_transform, conformal_rules,
                                covariant_derivative, numeric_d,
                                numeric_delta)
from heatforms.exterior import FormValue, fiber_tables, lambda_ext
from heatforms.fields import CoordField, FrameField, ScalarField
from heatforms.quadrature import model_quadrature


class RandomTrig:
    """Random mixed-degree trig field on the unit torus, picklable."""

    def __init__(self, seed, rows=4):
        r = np.random.default_rng(seed)
        self.c = r.standard_normal((rows, 4)) + 1j * r.standard_normal((rows, 4))

    def basis(self, x):
        x = np.asarray(x, dtype=float)
        s1, c1 = np.sin(2 * np.pi * x[..., 0]), np.cos(2 * np.pi * x[..., 0])
        s2, c2 = np.sin(2 * np.pi * x[..., 1]), np.cos(2 * np.pi * x[..., 1])
        return np.stack([s1 * c2, c1 * s2, s1 * s2, c1 * c2], axis=-1)

    def __call__(self, x):
        return np.einsum("...b,cb->...c", self.basis(x), self.c)


def test_d_of_linear_function_exact(euclid2):
    f = ScalarField(lambda x: np.asarray(x)[..., 0])
    out = numeric_d(euclid2, f, np.array([0.4, 0.2]))
    assert np.abs(out.block(1) - [1, 0]).max() < 1e-8
    assert np.abs(out.block(0)).max() == 0


def test_d_trig_against_analytic(torus2):
    f = ScalarField(lambda x: np.sin(2 * np.pi * np.asarray(x)[..., 0])
                    * np.cos(2 * np.pi * np.asarray(x)[..., 1]))
    x = np.array([0.37, 0.52])
    out = numeric_d(torus2, f, x)
    an = np.array([2 * np.pi * np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[1]),
                   -2 * np.pi * np.sin(2 * np.pi * x[0]) * np.sin(2 * np.pi * x[1])])
    assert np.abs(out.block(1) - an).max() < 1e-6


def test_dd_zero_polynomial(euclid2):
    one_form = CoordField(lambda x: np.stack(
        [np.zeros(np.asarray(x).shape[:-1]),
         np.asarray(x)[..., 0] ** 2 * np.asarray(x)[..., 1],
         np.asarray(x)[..., 1] ** 3 - np.asarray(x)[..., 0],
         np.zeros(np.asarray(x).shape[:-1])], axis=-1), degrees=(1,))

    def dfield(mo, fp):
        out = numeric_d(mo, one_form, fp)
        return out.coeffs if isinstance(out, FormValue) else out

    dd = numeric_d(euclid2, FrameField(dfield), np.array([0.3, -0.2]))
    assert np.abs(dd.coeffs).max() < 1e-6


def test_dd_zero_on_curved(conformal_torus):
    f = ScalarField(lambda x: np.sin(2 * np.pi * np.asarray(x)[..., 0]))

    def dfield(mo, fp):
        out = numeric_d(mo, f, fp, h=1e-4)
        return out.coeffs if isinstance(out, FormValue) else out

    dd = numeric_d(conformal_torus, FrameField(dfield), np.array([0.45, 0.55]),
                   h=1e-4)
    assert np.abs(dd.coeffs).max() < 1e-5


def test_adjointness_quadrature(torus2):
    """<d f, beta>_g = <f, delta beta>_g on the torus by exact-cell
    quadrature of trig fields."""
    f = ScalarField(RandomTrigScalar(21))
    beta = CoordField(RandomTrigOne(22), degrees=(1,))
    quad = model_quadrature(torus2, 24)
    nodes = quad.nodes
    df = numeric_d(torus2, f, nodes)
    db = numeric_delta(torus2, beta, nodes)
    fp = torus2.orthonormal_frame(nodes)
    fv = f.frame_coeffs(torus2, fp)
    bv = beta.frame_coeffs(torus2, fp)
    lhs = np.sum(quad.weights * np.einsum("nJ,nJ->n", np.conj(df), bv))
    rhs = np.sum(quad.weights * np.einsum("nJ,nJ->n", np.conj(fv), db))
    assert abs(lhs - rhs) / max(abs(rhs), 1e-12) < 1e-6


class RandomTrigScalar:
    def __init__(self, seed):
        self.inner = RandomTrig(seed, rows=1)

    def __call__(self, x):
        return self.inner(x)[..., 0]


class RandomTrigOne:
    def __init__(self, seed):
        self.inner = RandomTrig(seed, rows=2)

    def __call__(self, x):
        vals = self.inner(x)
        out = np.zeros(np.asarray(x).shape[:-1] + (4,), dtype=complex)
        out[..., 1] = vals[..., 0]
        out[..., 2] = vals[..., 1]
        return out


def test_codifferential_transform_conformal(torus2, conformal_torus):
    """delta_h computed directly versus through the g-metric transform."""
    eta = CoordField(RandomTrig(7), degrees=(1, 2))
    rng = np.random.default_rng(31)
    pts = rng.uniform(0, 1, size=(200, 2))
    direct = numeric_delta(conformal_torus, eta, pts)
    trans = codifferential_transform(torus2, conformal_torus, eta, pts)
    E_h = conformal_torus.orthonormal_frame(pts).E
    E_g = torus2.orthonormal_frame(pts).E
    dir_coord = np.linalg.solve(lambda_ext(2, E_h), direct[..., None])[..., 0]
    tr_coord = np.linalg.solve(lambda_ext(2, E_g), trans[..., None])[..., 0]
    assert np.abs(dir_coord - tr_coord).max() < 1e-6


def test_conformal_rules_values_and_rule(torus2, conformal_torus):
    psi = conformal_torus.psi
    eta = CoordField(RandomTrigOne(9), degrees=(1,))
    x = np.array([0.44, 0.58])
    cr = conformal_rules(psi, torus2, x, eta, k=1)
    pv = psi.value(x)
    assert abs(cr["inner_scale"] - np.exp(-2 * pv)) < 1e-14
    assert abs(cr["vol_factor"] - np.exp(2 * pv)) < 1e-14
    assert abs(cr["istar_factor"] - np.exp(2 * pv)) < 1e-14
    # tau = m - 2k = 0 at k = 1, m = 2: rule reduces to a plain rescaling
    dg = numeric_delta(torus2, eta, x)
    assert np.abs(cr["delta_conformal"].coeffs
                  - np.exp(-2 * pv) * dg.coeffs).max() < 1e-10
    # against the direct conformal-metric codifferential
    direct = numeric_delta(conformal_torus, eta, x)
    E_h = conformal_torus.orthonormal_frame(x).E
    E_g = torus2.orthonormal_frame(x).E
    dcoord = np.linalg.solve(lambda_ext(2, E_h), direct.coeffs)
    rcoord = np.linalg.solve(lambda_ext(2, E_g), cr["delta_conformal"].coeffs)
    assert np.abs(dcoord - rcoord).max() < 1e-6


def test_conformal_rules_identity_facts(torus2):
    from heatforms.manifold import ConformalFactor
    psi0 = ConformalFactor("constant", amplitude=0.0)
    f = ScalarField(RandomTrigScalar(33))
    cr = conformal_rules(psi0, torus2, np.array([0.3, 0.3]), f, k=0)
    assert cr["inner_scale"] == 1.0 and cr["vol_factor"] == 1.0
    # constant psi, k=1, m=2: inner product scales by e^{-2c}, tau = 0
    psic = ConformalFactor("constant", amplitude=0.7)
    eta = CoordField(RandomTrigOne(34), degrees=(1,))
    cr = conformal_rules(psic, torus2, np.array([0.4, 0.6]), eta, k=1)
    dg = numeric_delta(torus2, eta, np.array([0.4, 0.6]))
    assert abs(cr["inner_scale"] - np.exp(-1.4)) < 1e-14
    assert np.abs(cr["delta_conformal"].coeffs
                  - np.exp(-1.4) * dg.coeffs).max() < 1e-10


def test_conformal_adjointness_quadrature(torus2, conformal_torus):
    """<d eta1, eta2>_{g_psi} = <eta1, delta_{g_psi} eta2>_{g_psi} by torus
    quadrature, mirroring the integration-by-parts proof."""
    psi = conformal_torus.psi
    eta1 = ScalarField(RandomTrigScalar(41))
    eta2 = CoordField(RandomTrigOne(42), degrees=(1,))
    quad = model_quadrature(torus2, 24)
    nodes = quad.nodes
    pv = psi.value(nodes)
    fp = torus2.orthonormal_frame(nodes)
    d1 = numeric_d(torus2, eta1, nodes)
    cr = conformal_rules(psi, torus2, nodes, eta2, k=1)
    e1 = eta1.frame_coeffs(torus2, fp)
    e2 = eta2.frame_coeffs(torus2, fp)
    t = fiber_tables(2)
    s1 = t.degree_slices[1]
    # degree-1 h-inner product = e^{-2 psi} (.,.)_g; volume factor e^{2 psi}
    lhs = np.sum(quad.weights * np.exp(-2 * pv) * np.exp(2 * pv)
                 * np.einsum("nJ,nJ->n", np.conj(d1[:, s1]), e2[:, s1]))
    rhs = np.sum(quad.weights * np.exp(2 * pv)
                 * np.einsum("nJ,nJ->n",
                             np.conj(e1[:, [0]]),
                             cr["delta_conformal"][:, [0]]))
    assert abs(lhs - rhs) / max(abs(rhs), 1e-12) < 1e-6
