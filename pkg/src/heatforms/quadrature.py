"""Quadrature grids over the model manifolds.

Compact models get exact-cell midpoint rules; noncompact models are
truncated at a radius chosen from the integrand envelope by the caller.
Nodes and weights are returned in chart coordinates with the metric volume
density folded into the weights, so sums approximate integrals against
vol_g.
"""

from dataclasses import dataclass

import numpy as np

from .manifold import (EuclideanModel, FlatTorusModel, HyperbolicModel,
                       ConformalModel, SphereModel, ManifoldModel)

__all__ = ["Quadrature", "model_quadrature", "l2_norm", "integrate"]


@dataclass
class Quadrature:
    nodes: np.ndarray      # (n, chart_dim) chart coordinates
    weights: np.ndarray    # (n,) includes the g-volume density
    truncated: bool
    radius: float | None = None


def _midpoint_axis(lo, hi, n):
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:]), (hi - lo) / n


def _tensor_grid(los, his, ns):
    axes, steps = [], []
    for lo, hi, n in zip(los, his, ns):
        a, s = _midpoint_axis(lo, hi, n)
        axes.append(a)
        steps.append(s)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    return nodes, float(np.prod(steps))


def model_quadrature(model: ManifoldModel, n_per_dim=24, radius=None):
    """Midpoint quadrature adapted to the model's chart."""
    base = model.base if isinstance(model, ConformalModel) else model
    if isinstance(base, FlatTorusModel):
        nodes, cell = _tensor_grid(np.zeros(base.m), base.periods,
                                   [n_per_dim] * base.m)
        w = cell * _density(model, nodes)
        return Quadrature(nodes, w, truncated=False)
    if isinstance(base, EuclideanModel):
        R = 4.0 if radius is None else float(radius)
        nodes, cell = _tensor_grid(-R * np.ones(base.m), R * np.ones(base.m),
                                   [n_per_dim] * base.m)
        w = cell * _density(model, nodes)
        return Quadrature(nodes, w, truncated=True, radius=R)
    if isinstance(base, HyperbolicModel) and base.m == 2:
        # polar coordinates, geodesic radius r and angle phi
        R = 3.0 if radius is None else float(radius)
        r, dr = _midpoint_axis(0.0, R, n_per_dim)
        phi, dphi = _midpoint_axis(0.0, 2 * np.pi, 2 * n_per_dim)
        rr, pp = np.meshgrid(r, phi, indexing="ij")
        k = base.kappa
        ball_r = np.tanh(np.sqrt(k) * rr / 2.0)
        nodes = np.stack([ball_r * np.cos(pp), ball_r * np.sin(pp)],
                         axis=-1).reshape(-1, 2)
        dens = np.sinh(np.sqrt(k) * rr) / np.sqrt(k)
        w = (dens * dr * dphi).ravel()
        if isinstance(model, ConformalModel):
            w = w * np.exp(model.m * model.psi.value(nodes))
        return Quadrature(nodes, w, truncated=True, radius=R)
    if isinstance(base, SphereModel) and base.m == 2:
        # Gauss-Legendre in cos(theta), uniform in phi, ambient nodes
        nt = n_per_dim
        xs, ws = np.polynomial.legendre.leggauss(nt)
        phi, dphi = _midpoint_axis(0.0, 2 * np.pi, 2 * nt)
        ct, pp = np.meshgrid(xs, phi, indexing="ij")
        st = np.sqrt(1 - ct ** 2)
        Rr = base.radius
        nodes = np.stack([Rr * st * np.cos(pp), Rr * st * np.sin(pp), Rr * ct],
                         axis=-1).reshape(-1, 3)
        w = (np.broadcast_to(ws[:, None], ct.shape) * dphi * Rr ** 2).ravel()
        return Quadrature(nodes, w, truncated=False)
    raise NotImplementedError(
        f"no quadrature rule for kind={base.kind}, m={base.m}")


def _density(model, nodes):
    return np.sqrt(np.linalg.det(model.metric(nodes)))


def integrate(model, fn, quad: Quadrature):
    """Integral of a batched scalar function against vol_g."""
    return float(np.sum(quad.weights * fn(quad.nodes)))


def l2_norm(model, field, quad: Quadrature):
    """L2 norm of a form field over the quadrature region."""
    if isinstance(model, SphereModel):
        fp = model.orthonormal_frame(quad.nodes)
    else:
        fp = model.orthonormal_frame(quad.nodes)
    c = field.frame_coeffs(model, fp)
    dens = np.sum(np.abs(c) ** 2, axis=-1)
    return float(np.sqrt(np.sum(quad.weights * dens)))
