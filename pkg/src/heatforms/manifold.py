"""Riemannian model manifolds with curvature and frame transport.

Every model carries a point representation (chart coordinates for intrinsic
models, ambient unit vectors for the sphere), a vectorized metric, analytic
or finite-difference metric derivatives, and a geodesic Euler step that
parallel-transports an orthonormal frame.  All methods broadcast over leading
batch axes; models are immutable after construction and safe to share across
workers.

Index conventions:
    christoffels(x)[..., k, i, j]   = Gamma^k_{ij}
    riemann_up(x)[..., l, k, i, j]  = component of R(d_i, d_j) d_k on d_l
    riemann_low(x)[..., i, j, k, l] = (R(d_i, d_j) d_k, d_l)_g
    riemann_frame(fp)[..., a, b, c, d] = (R(e_a, e_b) e_c, e_d)_g
"""

from dataclasses import dataclass, replace

import numpy as np

from .exterior import weitzenboeck_from_riemann

__all__ = [
    "ModelError",
    "StepError",
    "ChartError",
    "FramePoint",
    "CurvaturePackage",
    "ManifoldModel",
    "EuclideanModel",
    "FlatTorusModel",
    "SphereModel",
    "HyperbolicModel",
    "ConformalFactor",
    "ConformalModel",
    "curvature_package",
    "geodesic_step",
]


class ModelError(ValueError):
    """Invalid model definition (e.g. non-SPD metric at a sampled point)."""


class StepError(RuntimeError):
    """Geodesic or frame step failed."""


class ChartError(StepError):
    """Point too close to a chart singularity for the step policy."""


@dataclass
class FramePoint:
    """A point with a g-orthonormal frame, batched over leading axes.

    x has shape (..., point_dim); E has shape (..., point_dim, m) with
    columns e_a satisfying (e_a, e_b)_g = delta_ab.
    """

    x: np.ndarray
    E: np.ndarray

    @property
    def batch_shape(self):
        return self.x.shape[:-1]

    def take(self, idx):
        return FramePoint(self.x[idx], self.E[idx])


@dataclass
class CurvaturePackage:
    christoffels: np.ndarray      # Gamma^k_{ij}, chart components
    riemann: np.ndarray           # lowered R_{ijkl} = (R(d_i,d_j)d_k, d_l)
    riemann_up: np.ndarray        # R^l_{kij}
    ricci: np.ndarray             # Ric_{ij}, chart components
    weitzenboeck: np.ndarray      # 2^m x 2^m, orthonormal frame
    grad_R_norm: float            # max_a |nabla_{e_a} R|_F at the point
    curvature_operator: np.ndarray  # on Lambda^2, orthonormal frame


def _gram_schmidt(G, E):
    """Orthonormalize frame columns in the G-inner product (classical GS)."""
    m = E.shape[-1]
    cols = []
    for a in range(m):
        v = E[..., :, a]
        for u in cols:
            proj = np.einsum("...i,...ij,...j->...", u, G, v)
            v = v - proj[..., None] * u
        nrm = np.sqrt(np.einsum("...i,...ij,...j->...", v, G, v))
        if np.any(nrm <= 0) or not np.all(np.isfinite(nrm)):
            raise StepError("frame degenerated during orthonormalization")
        cols.append(v / nrm[..., None])
    return np.stack(cols, axis=-1)


def _euclidean_gram_schmidt(E):
    m = E.shape[-1]
    cols = []
    for a in range(m):
        v = E[..., :, a]
        for u in cols:
            v = v - np.einsum("...i,...i->...", u, v)[..., None] * u
        nrm = np.linalg.norm(v, axis=-1)
        cols.append(v / nrm[..., None])
    return np.stack(cols, axis=-1)


class ManifoldModel:
    """Base class: intrinsic chart model with a symmetric metric matrix."""

    kind = "abstract"
    is_flat = False
    constant_curvature = None   # sectional curvature if constant, else None
    complete = True

    def __init__(self, dim, deriv_mode="analytic", h_fd=1e-4):
        if dim < 2 or dim > 4:
            raise ModelError(f"dimension must be in 2..4, got {dim}")
        if deriv_mode not in ("analytic", "fd"):
            raise ModelError(f"unknown derivative mode {deriv_mode!r}")
        self.m = dim
        self.point_dim = dim
        self.deriv_mode = deriv_mode
        self.h_fd = float(h_fd)

    # -- metric ------------------------------------------------------------

    def metric(self, x):
        raise NotImplementedError

    def metric_analytic_deriv(self, x):
        """d_k G_ij as (..., m, m, m) with derivative index last, or None."""
        return None

    def dmetric(self, x):
        if self.deriv_mode == "analytic":
            d = self.metric_analytic_deriv(x)
            if d is not None:
                return d
        x = np.asarray(x, dtype=float)
        h = self.h_fd
        out = np.empty(x.shape[:-1] + (self.m, self.m, self.m))
        for k in range(self.m):
            dx = np.zeros(self.m)
            dx[k] = h
            out[..., k] = (self.metric(x + dx) - self.metric(x - dx)) / (2 * h)
        return out

    def check_spd(self, x):
        G = self.metric(x)
        ev = np.linalg.eigvalsh(G)
        if np.any(ev <= 0):
            raise ModelError(f"metric not positive definite at {x}")
        return G

    def volume_density(self, x):
        return np.sqrt(np.linalg.det(self.metric(x)))

    # -- connection and curvature ------------------------------------------

    def christoffels(self, x):
        G = self.metric(x)
        dG = self.dmetric(x)      # [..., i, j, k] = d_k g_ij
        ginv = np.linalg.inv(G)
        # Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)
        t = (np.einsum("...jli->...lij", dG) + np.einsum("...ilj->...lij", dG)
             - np.einsum("...ijl->...lij", dG))
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, t)

    def dchristoffels(self, x):
        """d_d Gamma^k_{ij}, Richardson-extrapolated central differences,
        (..., k, i, j, d)."""
        x = np.asarray(x, dtype=float)
        h = self.h_fd
        out = np.empty(x.shape[:-1] + (self.m,) * 4)
        for d in range(self.m):
            dx = np.zeros(self.m)
            dx[d] = h
            coarse = (self.christoffels(x + dx) - self.christoffels(x - dx)) / (2 * h)
            fine = (self.christoffels(x + dx / 2) - self.christoffels(x - dx / 2)) / h
            out[..., d] = (4.0 * fine - coarse) / 3.0
        return out

    def riemann_up(self, x):
        if self.is_flat:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (self.m,) * 4)
        G = self.christoffels(x)
        dG = self.dchristoffels(x)
        # R^l_{kij} = d_i Gamma^l_{jk} - d_j Gamma^l_{ik}
        #             + Gamma^l_{im} Gamma^m_{jk} - Gamma^l_{jm} Gamma^m_{ik}
        term = np.einsum("...ljki->...lkij", dG) - np.einsum("...likj->...lkij", dG)
        quad = (np.einsum("...lim,...mjk->...lkij", G, G)
                - np.einsum("...ljm,...mik->...lkij", G, G))
        return term + quad

    def riemann_low(self, x):
        up = self.riemann_up(x)
        return np.einsum("...lm,...mkij->...ijkl", self.metric(x), up)

    def ricci(self, x):
        up = self.riemann_up(x)
        return np.einsum("...ijik->...kj", up)

    # -- frames --------------------------------------------------------------

    def orthonormal_frame(self, x):
        """Deterministic g-orthonormal frame from the Cholesky factor."""
        x = np.asarray(x, dtype=float)
        G = self.check_spd(x)
        L = np.linalg.cholesky(G)
        E = np.linalg.inv(np.swapaxes(L, -1, -2))
        return FramePoint(x, E)

    def riemann_frame(self, fp):
        K = self.constant_curvature
        if K is not None:
            eye = np.eye(self.m)
            R = K * (np.einsum("bc,ad->abcd", eye, eye)
                     - np.einsum("ac,bd->abcd", eye, eye))
            return np.broadcast_to(R, fp.batch_shape + R.shape).copy()
        low = self.riemann_low(fp.x)
        E = fp.E
        return np.einsum("...ijkl,...ia,...jb,...kc,...ld->...abcd",
                         low, E, E, E, E)

    def weitzenboeck_frame(self, fp):
        return weitzenboeck_from_riemann(self.riemann_frame(fp))

    def ricci_frame(self, fp):
        K = self.constant_curvature
        if K is not None:
            eye = (self.m - 1) * K * np.eye(self.m)
            return np.broadcast_to(eye, fp.batch_shape + eye.shape).copy()
        return np.einsum("...ij,...ia,...jb->...ab", self.ricci(fp.x), fp.E, fp.E)

    def grad_riemann_frame(self, fp, h=None):
        """Covariant derivative of R in frame directions via transported FD.

        Returns (..., a, b, c, d, e) with the leading index the direction
        e_a.  Exactly zero for constant-curvature models.
        """
        if self.constant_curvature is not None or self.is_flat:
            return np.zeros(fp.batch_shape + (self.m,) * 5)
        h = h or self.h_fd
        out = np.empty(fp.batch_shape + (self.m,) * 5)
        for a in range(self.m):
            v = np.zeros(self.m)
            v[a] = 1.0
            fplus = self.geodesic_step(fp, v, h)
            fminus = self.geodesic_step(fp, -v, h)
            out[..., a, :, :, :, :] = (
                self.riemann_frame(fplus) - self.riemann_frame(fminus)
            ) / (2 * h)
        return out

    def grad_R_norm(self, fp, h=None):
        """max over frame directions of the Frobenius norm of nabla R."""
        D = self.grad_riemann_frame(fp, h)
        return np.sqrt(np.einsum("...abcde,...abcde->...a", D, D)).max(axis=-1)

    def grad_weitzenboeck_frame(self, fp, h=None):
        """Covariant FD of the curvature endomorphism, (..., a, J, K)."""
        if self.constant_curvature is not None or self.is_flat:
            dim = 2 ** self.m
            return np.zeros(fp.batch_shape + (self.m, dim, dim))
        h = h or self.h_fd
        dim = 2 ** self.m
        out = np.empty(fp.batch_shape + (self.m, dim, dim))
        for a in range(self.m):
            v = np.zeros(self.m)
            v[a] = 1.0
            fplus = self.geodesic_step(fp, v, h)
            fminus = self.geodesic_step(fp, -v, h)
            out[..., a, :, :] = (
                self.weitzenboeck_frame(fplus) - self.weitzenboeck_frame(fminus)
            ) / (2 * h)
        return out

    # -- transport -----------------------------------------------------------

    def wrap(self, x):
        return x

    def geodesic_step(self, fp, v, h):
        """One geodesic Euler step of length h along E v, frame transported.

        v holds frame coefficients; the chart displacement is u = h E v with
        quadratic geodesic correction, and the frame is moved by the linear
        transport equation and re-orthonormalized at the new point.
        """
        if h < 0:
            return self.geodesic_step(fp, -np.asarray(v), -h)
        if h == 0:
            return fp
        v = np.asarray(v, dtype=float)
        u = h * np.einsum("...ia,...a->...i", fp.E, v)
        if self.is_flat:
            return FramePoint(self.wrap(fp.x + u), fp.E)
        Gam = self.christoffels(fp.x)
        corr = 0.5 * np.einsum("...kij,...i,...j->...k", Gam, u, u)
        x_new = self.wrap(fp.x + u - corr)
        E_new = fp.E - np.einsum("...ijk,...j,...ka->...ia", Gam, u, fp.E)
        G_new = self.metric(x_new)
        if np.any(np.linalg.eigvalsh(G_new) <= 0):
            raise StepError("left the chart domain: metric not SPD after step")
        return FramePoint(x_new, _gram_schmidt(G_new, E_new))

    def exp_map(self, fp, w, nsub=8):
        """Geodesic from fp with initial frame vector w (coefficients), by
        nsub transported Euler substeps.  Returns the endpoint FramePoint."""
        r = np.linalg.norm(w)
        if r == 0:
            return fp
        v = np.asarray(w, dtype=float) / r
        cur = fp
        for _ in range(nsub):
            cur = self.geodesic_step(cur, v, r / nsub)
        return cur

    # -- geometry helpers ------------------------------------------------------

    def distance(self, x, y):
        raise NotImplementedError

    def has_distance(self):
        try:
            self.distance(self.default_point(), self.default_point())
            return True
        except NotImplementedError:
            return False

    def default_point(self):
        return np.zeros(self.m)

    def frame_coeff_pullback(self, fp, coord_coeffs_1form):
        """Chart 1-form coefficients -> frame coefficients at fp."""
        return np.einsum("...i,...ia->...a", coord_coeffs_1form, fp.E)


class EuclideanModel(ManifoldModel):
    kind = "euclidean"
    is_flat = True
    constant_curvature = 0.0

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.m), x.shape[:-1] + (self.m, self.m)).copy()

    def metric_analytic_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.m,) * 3)

    def distance(self, x, y):
        return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


class FlatTorusModel(ManifoldModel):
    kind = "flat_torus"
    is_flat = True
    constant_curvature = 0.0

    def __init__(self, dim, periods, **kw):
        super().__init__(dim, **kw)
        periods = np.asarray(periods, dtype=float)
        if periods.shape != (dim,) or np.any(periods <= 0):
            raise ModelError("torus needs one positive period per dimension")
        self.periods = periods

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.m), x.shape[:-1] + (self.m, self.m)).copy()

    def metric_analytic_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (self.m,) * 3)

    def wrap(self, x):
        return np.mod(x, self.periods)

    def distance(self, x, y):
        d = np.abs(np.asarray(x) - np.asarray(y))
        d = np.minimum(np.mod(d, self.periods), self.periods - np.mod(d, self.periods))
        return np.linalg.norm(d, axis=-1)

    def volume(self):
        return float(np.prod(self.periods))


class SphereModel(ManifoldModel):
    """Round sphere of radius R embedded in R^(m+1).

    Points are ambient vectors with |x| = R; frames are (m+1, m) matrices of
    tangent columns.  Stepping uses step-and-project which avoids polar chart
    singularities; the stereographic chart (from the north pole) is exposed
    for coordinate curvature components only.
    """

    kind = "sphere"

    def __init__(self, dim, radius=1.0, chart_guard=1e-6, **kw):
        super().__init__(dim, **kw)
        if radius <= 0:
            raise ModelError("sphere radius must be positive")
        self.radius = float(radius)
        self.point_dim = dim + 1
        self.constant_curvature = 1.0 / radius ** 2
        self.chart_guard = chart_guard

    def default_point(self):
        x = np.zeros(self.m + 1)
        x[-1] = -self.radius
        return x

    # chart interface (stereographic from the north pole (0,...,0,R))

    def to_chart(self, x):
        x = np.asarray(x, dtype=float)
        R = self.radius
        denom = R - x[..., -1]
        if np.any(denom < self.chart_guard * R):
            raise ChartError("point too close to the stereographic pole")
        return R * x[..., :-1] / denom[..., None]

    def from_chart(self, u):
        u = np.asarray(u, dtype=float)
        R = self.radius
        rho2 = np.sum(u ** 2, axis=-1)
        scale = 1.0 / (rho2 + R ** 2)
        xm = 2 * R ** 2 * u * scale[..., None]
        xl = R * (rho2 - R ** 2) * scale
        return np.concatenate([xm, xl[..., None]], axis=-1)

    def metric(self, u):
        """Chart metric in stereographic coordinates (conformally flat)."""
        u = np.asarray(u, dtype=float)
        R = self.radius
        rho2 = np.sum(u ** 2, axis=-1)
        f = 4 * R ** 4 / (rho2 + R ** 2) ** 2
        return f[..., None, None] * np.eye(self.m)

    def metric_analytic_deriv(self, u):
        u = np.asarray(u, dtype=float)
        R = self.radius
        rho2 = np.sum(u ** 2, axis=-1)
        df = -16 * R ** 4 / (rho2 + R ** 2) ** 3
        eye = np.eye(self.m)
        return np.einsum("...,...k,ij->...ijk", df, u, eye)

    def orthonormal_frame(self, x):
        """Tangent frame at the ambient point x from a Householder reflector."""
        x = np.asarray(x, dtype=float)
        n = x / np.linalg.norm(x, axis=-1, keepdims=True)
        pd = self.point_dim
        last = np.zeros(pd)
        last[-1] = 1.0
        w = n - last
        wn2 = np.sum(w ** 2, axis=-1)
        H = np.broadcast_to(np.eye(pd), x.shape[:-1] + (pd, pd)).copy()
        safe = wn2 > 1e-24
        coef = np.where(safe, 2.0 / np.where(safe, wn2, 1.0), 0.0)
        H -= coef[..., None, None] * np.einsum("...i,...j->...ij", w, w)
        return FramePoint(x, H[..., :, : self.m])

    def geodesic_step(self, fp, v, h):
        if h < 0:
            return self.geodesic_step(fp, -np.asarray(v), -h)
        if h == 0:
            return fp
        v = np.asarray(v, dtype=float)
        u = h * np.einsum("...ia,...a->...i", fp.E, v)
        y = fp.x + u
        nrm = np.linalg.norm(y, axis=-1, keepdims=True)
        x_new = self.radius * y / nrm
        n = x_new / self.radius
        proj = fp.E - np.einsum("...i,...j,...ja->...ia", n, n, fp.E)
        return FramePoint(x_new, _euclidean_gram_schmidt(proj))

    def distance(self, x, y):
        c = np.sum(np.asarray(x) * np.asarray(y), axis=-1) / self.radius ** 2
        return self.radius * np.arccos(np.clip(c, -1.0, 1.0))

    def riemann_frame(self, fp):
        K = self.constant_curvature
        eye = np.eye(self.m)
        R = K * (np.einsum("bc,ad->abcd", eye, eye)
                 - np.einsum("ac,bd->abcd", eye, eye))
        return np.broadcast_to(R, fp.batch_shape + R.shape).copy()

    def volume(self):
        from scipy.special import gamma
        m, R = self.m, self.radius
        return float(2 * np.pi ** ((m + 1) / 2) / gamma((m + 1) / 2) * R ** m)


class HyperbolicModel(ManifoldModel):
    """Hyperbolic space in the Poincare ball chart, curvature -kappa."""

    kind = "hyperbolic"

    def __init__(self, dim, kappa=1.0, ball_guard=1e-9, **kw):
        super().__init__(dim, **kw)
        if kappa <= 0:
            raise ModelError("kappa must be positive (curvature is -kappa)")
        self.kappa = float(kappa)
        self.constant_curvature = -float(kappa)
        self.ball_guard = ball_guard

    def _conf(self, x):
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        if np.any(r2 >= 1.0):
            raise ChartError("point left the Poincare ball")
        return 4.0 / (self.kappa * (1.0 - r2) ** 2)

    def metric(self, x):
        f = self._conf(x)
        return f[..., None, None] * np.eye(self.m)

    def metric_analytic_deriv(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x ** 2, axis=-1)
        df = 16.0 / (self.kappa * (1.0 - r2) ** 3)
        return np.einsum("...,...k,ij->...ijk", df, x, np.eye(self.m))

    def distance(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        num = 2 * np.sum((x - y) ** 2, axis=-1)
        den = (1 - np.sum(x ** 2, axis=-1)) * (1 - np.sum(y ** 2, axis=-1))
        return np.arccosh(1 + num / den) / np.sqrt(self.kappa)

    def geodesic_step(self, fp, v, h):
        new = super().geodesic_step(fp, v, h)
        if np.any(np.sum(new.x ** 2, axis=-1) >= 1.0 - self.ball_guard):
            raise ChartError("step reached the Poincare ball boundary")
        return new


class ConformalFactor:
    """Smooth conformal factor psi with analytic first derivatives.

    Families: constant, gaussian_bump, spline_bump.  On a torus base the
    gaussian bump is periodized through sin-displacements so psi stays
    smooth across the fundamental domain.
    """

    FAMILIES = ("constant", "gaussian_bump", "spline_bump")

    def __init__(self, family, amplitude=0.0, sigma=1.0, center=None,
                 support_radius=1.0, periods=None):
        if family not in self.FAMILIES:
            raise ModelError(f"unknown conformal family {family!r}")
        self.family = family
        self.amplitude = float(amplitude)
        self.sigma = float(sigma)
        self.support_radius = float(support_radius)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.periods = None if periods is None else np.asarray(periods, dtype=float)

    def _disp(self, x):
        """Displacement q(x) and its diagonal Jacobian dq_i/dx_i."""
        c = self.center if self.center is not None else np.zeros(x.shape[-1])
        d = np.asarray(x, dtype=float) - c
        if self.periods is None:
            return d, np.ones_like(d)
        w = np.pi * d / self.periods
        return (self.periods / np.pi) * np.sin(w), np.cos(w)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.full(x.shape[:-1], self.amplitude)
        q, _ = self._disp(x)
        r2 = np.sum(q ** 2, axis=-1)
        if self.family == "gaussian_bump":
            return self.amplitude * np.exp(-r2 / self.sigma ** 2)
        t2 = r2 / self.support_radius ** 2
        return np.where(t2 < 1.0, self.amplitude * (1.0 - t2) ** 3, 0.0)

    def grad(self, x):
        """Analytic chart gradient d psi / dx_i."""
        x = np.asarray(x, dtype=float)
        if self.family == "constant":
            return np.zeros_like(x)
        q, dq = self._disp(x)
        r2 = np.sum(q ** 2, axis=-1)
        if self.family == "gaussian_bump":
            val = self.amplitude * np.exp(-r2 / self.sigma ** 2)
            return val[..., None] * (-2.0 / self.sigma ** 2) * q * dq
        t2 = r2 / self.support_radius ** 2
        coef = np.where(t2 < 1.0, -6.0 * self.amplitude * (1.0 - np.minimum(t2, 1.0)) ** 2
                        / self.support_radius ** 2, 0.0)
        return coef[..., None] * q * dq

    def sup_abs(self):
        """Supremum of |psi| (attained at the center for the builtin families)."""
        return abs(self.amplitude)


class ConformalModel(ManifoldModel):
    """Metric e^{2 psi} g over an intrinsic-chart base model."""

    kind = "conformal"

    def __init__(self, base: ManifoldModel, psi: ConformalFactor, **kw):
        if isinstance(base, SphereModel):
            raise ModelError("conformal models over the embedded sphere are "
                             "not supported; use an intrinsic-chart base")
        kw.setdefault("deriv_mode", base.deriv_mode)
        kw.setdefault("h_fd", base.h_fd)
        super().__init__(base.m, **kw)
        self.base = base
        self.psi = psi
        self.is_flat = False
        self.constant_curvature = None
        if base.is_flat and psi.family == "constant" and psi.amplitude == 0.0:
            self.is_flat = True
            self.constant_curvature = 0.0

    def metric(self, x):
        f = np.exp(2.0 * self.psi.value(x))
        return f[..., None, None] * self.base.metric(x)

    def metric_analytic_deriv(self, x):
        base_d = self.base.dmetric(x)
        G = self.base.metric(x)
        f = np.exp(2.0 * self.psi.value(x))
        dpsi = self.psi.grad(x)
        return f[..., None, None, None] * (
            base_d + 2.0 * np.einsum("...k,...ij->...ijk", dpsi, G))

    def christoffels(self, x):
        """Base Christoffels plus the conformal correction, which needs only
        first derivatives of psi."""
        x = np.asarray(x, dtype=float)
        G = self.base.metric(x)
        ginv = np.linalg.inv(G)
        dpsi = self.psi.grad(x)
        grad = np.einsum("...kl,...l->...k", ginv, dpsi)
        eye = np.eye(self.m)
        corr = (np.einsum("ki,...j->...kij", eye, dpsi)
                + np.einsum("kj,...i->...kij", eye, dpsi)
                - np.einsum("...ij,...k->...kij", G, grad))
        return self.base.christoffels(x) + corr

    def _psi_hessian(self, x):
        """Richardson central differences of the analytic gradient."""
        x = np.asarray(x, dtype=float)
        h = self.h_fd
        out = np.empty(x.shape[:-1] + (self.m, self.m))
        for d in range(self.m):
            dx = np.zeros(self.m)
            dx[d] = h
            coarse = (self.psi.grad(x + dx) - self.psi.grad(x - dx)) / (2 * h)
            fine = (self.psi.grad(x + dx / 2) - self.psi.grad(x - dx / 2)) / h
            out[..., d] = (4.0 * fine - coarse) / 3.0
        return out

    def dchristoffels(self, x):
        """Derivative of the conformal correction from the psi Hessian; the
        base term comes from the base model's own derivative machinery."""
        x = np.asarray(x, dtype=float)
        G = self.base.metric(x)
        ginv = np.linalg.inv(G)
        dG = self.base.dmetric(x)
        dginv = -np.einsum("...ka,...abd,...bl->...kld",
                           ginv, dG, ginv)
        dpsi = self.psi.grad(x)
        H = self._psi_hessian(x)
        grad = np.einsum("...kl,...l->...k", ginv, dpsi)
        dgrad = (np.einsum("...kld,...l->...kd", dginv, dpsi)
                 + np.einsum("...kl,...ld->...kd", ginv, H))
        eye = np.eye(self.m)
        corr = (np.einsum("ki,...jd->...kijd", eye, H)
                + np.einsum("kj,...id->...kijd", eye, H)
                - np.einsum("...ijd,...k->...kijd", dG, grad)
                - np.einsum("...ij,...kd->...kijd", G, dgrad))
        if self.base.is_flat:
            return corr
        return self.base.dchristoffels(x) + corr

    def wrap(self, x):
        return self.base.wrap(x)

    def distance_lower_envelope(self, x, y):
        """Conservative lower bound e^{-sup|psi|} d_base; the conformal
        metric has no closed-form distance."""
        return np.exp(-self.psi.sup_abs()) * self.base.distance(x, y)

    def distance(self, x, y):
        raise NotImplementedError(
            "conformal metrics have no closed-form distance; "
            "use distance_lower_envelope")

    def default_point(self):
        return self.base.default_point()


def curvature_package(model: ManifoldModel, x) -> CurvaturePackage:
    """All curvature data at a point: chart tensors, frame endomorphisms,
    and the local derivative norm used by the bound functions."""
    x = np.asarray(x, dtype=float)
    if isinstance(model, SphereModel):
        u = model.to_chart(x)
        chart_model = model
        Gam = _sphere_chart_christoffels(model, u)
        low = _chart_riemann_low(model, u)
        up = _chart_riemann_up(model, u)
        ric = _chart_ricci(model, u)
    else:
        model.check_spd(x)
        Gam = model.christoffels(x)
        low = model.riemann_low(x)
        up = model.riemann_up(x)
        ric = model.ricci(x)
    fp = model.orthonormal_frame(x)
    Rf = model.riemann_frame(fp)
    W = weitzenboeck_from_riemann(Rf)
    gradn = float(model.grad_R_norm(fp))
    q_op = _curvature_operator(Rf)
    return CurvaturePackage(
        christoffels=Gam, riemann=low, riemann_up=up, ricci=ric,
        weitzenboeck=W, grad_R_norm=gradn, curvature_operator=q_op)


def _sphere_chart_christoffels(model, u):
    G = model.metric(u)
    dG = model.metric_analytic_deriv(u)
    ginv = np.linalg.inv(G)
    t = (np.einsum("...jli->...lij", dG) + np.einsum("...ilj->...lij", dG)
         - np.einsum("...ijl->...lij", dG))
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, t)


def _chart_riemann_up(model, u):
    return ManifoldModel.riemann_up(model, u)


def _chart_riemann_low(model, u):
    up = _chart_riemann_up(model, u)
    return np.einsum("...lm,...mkij->...ijkl", model.metric(u), up)


def _chart_ricci(model, u):
    return np.einsum("...ijik->...kj", _chart_riemann_up(model, u))


def _curvature_operator(R_frame):
    """Operator on Lambda^2 with (Q(e_a^e_b), e_c^e_d) = (R(e_a,e_b)e_d, e_c)."""
    from itertools import combinations
    m = R_frame.shape[-1]
    pairs = list(combinations(range(m), 2))
    n = len(pairs)
    out = np.empty(R_frame.shape[:-4] + (n, n))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            out[..., i, j] = R_frame[..., a, b, d, c]
    return out


def geodesic_step(model: ManifoldModel, fp: FramePoint, v, h) -> FramePoint:
    """Module-level alias for the model's transported geodesic Euler step."""
    return model.geodesic_step(fp, v, h)
