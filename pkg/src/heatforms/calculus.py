"""Numeric exterior derivative and codifferential on form fields.

Both operators are assembled from covariant derivatives in an orthonormal
frame:

    d alpha     = sum_a eps^a ^ (nabla_{e_a} alpha)
    delta alpha = - sum_a e_a . (nabla_{e_a} alpha)

The covariant derivative is a parallel-transport-corrected central
difference: the field is evaluated at transported frame points, so its
coefficients are already expressed relative to a parallel frame and the
plain difference quotient is the covariant one.
"""

import numpy as np

from .exterior import FormValue, fiber_tables
from .manifold import ChartError, ConformalModel, ManifoldModel

__all__ = [
    "covariant_derivative",
    "numeric_d",
    "numeric_delta",
    "codifferential_transform",
    "conformal_rules",
]


def _as_framepoint(model, x):
    from .manifold import FramePoint
    if isinstance(x, FramePoint):
        return x
    return model.orthonormal_frame(np.asarray(x, dtype=float))


def covariant_derivative(model: ManifoldModel, field, x, h=1e-4):
    """Frame components of nabla alpha at x, shape (..., m, 2^m).

    x may be a FramePoint to differentiate relative to a specific frame
    (needed when composing operators, so inner evaluations inherit the
    transported frame)."""
    fp = _as_framepoint(model, x)
    m = model.m
    out = np.empty(fp.batch_shape + (m, 2 ** m), dtype=complex)
    for a in range(m):
        v = np.eye(m)[a]
        cplus = field.frame_coeffs(model, model.geodesic_step(fp, v, h))
        cminus = field.frame_coeffs(model, model.geodesic_step(fp, -v, h))
        out[..., a, :] = (cplus - cminus) / (2 * h)
    return out


def numeric_d(model, field, x, h=1e-4):
    """Exterior derivative of the field at x, in the orthonormal frame."""
    t = fiber_tables(model.m)
    D = covariant_derivative(model, field, x, h)
    coeffs = np.einsum("aJK,...aK->...J", t.wedge1, D)
    if coeffs.ndim == 1:
        return FormValue(model.m, coeffs, "orthonormal")
    return coeffs


def numeric_delta(model, field, x, h=1e-4):
    """Codifferential (with respect to the model metric) at x."""
    t = fiber_tables(model.m)
    D = covariant_derivative(model, field, x, h)
    coeffs = -np.einsum("aJK,...aK->...J", t.interior_tensor, D)
    if coeffs.ndim == 1:
        return FormValue(model.m, coeffs, "orthonormal")
    return coeffs


def codifferential_transform(g_model, h_model, field, x, h=1e-4):
    """Codifferential of the h-metric expressed through g-quantities:

        delta_h eta = calA^{-1} ( delta_g(calA eta)
                                  - (d log rho)^{sharp_g} . (calA eta) )

    Returns frame coefficients at the g-orthonormal frame of x.
    """
    from .fields import TransformedField
    from .pair import grad_A_frame, metric_pair, _A_frame_at

    x = np.asarray(x, dtype=float)
    m = g_model.m
    pair = metric_pair(g_model, h_model, x)
    t = fiber_tables(m)

    def calA_op(fp):
        from .exterior import lambda_ext
        A = _A_frame_at(h_model, fp)
        return lambda_ext(m, np.linalg.inv(A))

    transformed = TransformedField(field, calA_op)
    delta_g_Aeta = numeric_delta(g_model, transformed, x, h)
    delta_g_Aeta = delta_g_Aeta.coeffs if isinstance(delta_g_Aeta, FormValue) \
        else delta_g_Aeta

    # d log rho in frame coefficients via Jacobi's formula per direction
    A = pair.A_frame
    Ainv = np.linalg.inv(A)
    dlr = np.empty(pair.x.shape[:-1] + (m,))
    for a in range(m):
        dA = grad_A_frame(g_model, h_model, x, np.eye(m)[a], h_step=h)
        dlr[..., a] = 0.5 * np.trace(Ainv @ dA, axis1=-2, axis2=-1)
    # sharp of a frame covector is the same coefficient vector
    fp = g_model.orthonormal_frame(x)
    Aeta = np.einsum("...JK,...K->...J", pair.calA,
                     field.frame_coeffs(g_model, fp))
    contr = np.einsum("aJK,...a,...K->...J", t.interior_tensor, dlr, Aeta)
    out = np.einsum("...JK,...K->...J", np.linalg.inv(pair.calA),
                    delta_g_Aeta - contr)
    if out.ndim == 1:
        return FormValue(m, out, "orthonormal")
    return out


def conformal_rules(psi, base_model, x, field, k, h=1e-4):
    """Transformation rules under the conformal change h = e^{2 psi} g.

    Returns the degree-k inner-product scale e^{-2 k psi(x)}, the volume
    factor e^{m psi(x)}, the conformal codifferential of the field at x
    (computed from base-metric quantities), and the adjoint-identification
    factor e^{m psi(x)}.
    """
    x = np.asarray(x, dtype=float)
    m = base_model.m
    if isinstance(base_model, ConformalModel):
        raise ValueError("pass the underlying base model, not the conformal one")
    t = fiber_tables(m)
    p = psi.value(x)
    inner_scale = np.exp(-2.0 * k * p)
    vol_factor = np.exp(m * p)

    delta_g = numeric_delta(base_model, field, x, h)
    delta_g = delta_g.coeffs if isinstance(delta_g, FormValue) else delta_g

    fp = base_model.orthonormal_frame(x)
    alpha = field.frame_coeffs(base_model, fp)
    # sharp_g of d psi in frame coefficients
    grad_coord = np.einsum("...ij,...j->...i", np.linalg.inv(base_model.metric(x)),
                           psi.grad(x))
    v = np.einsum("...ia,...ij,...j->...a", fp.E, base_model.metric(x), grad_coord)
    # tau = m - 2k acts blockwise on the input degree before contraction
    tau_contr = np.einsum("aJK,...a,K,...K->...J", t.interior_tensor, v,
                          m - 2.0 * t.degrees, alpha)
    delta_h = np.exp(-2.0 * p)[..., None] * (delta_g - tau_contr) \
        if np.ndim(p) else np.exp(-2.0 * p) * (delta_g - tau_contr)
    out = FormValue(m, delta_h, "orthonormal") if delta_h.ndim == 1 else delta_h
    return {
        "inner_scale": inner_scale,
        "vol_factor": vol_factor,
        "delta_conformal": out,
        "istar_factor": vol_factor,
    }
