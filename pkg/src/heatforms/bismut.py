"""Monte Carlo estimators for the heat semigroup on forms and its
exterior derivative, codifferential, and covariant derivative.

The probabilistic representations evaluated here have no derivative on the
right-hand side: a path functional couples the Brownian increments to a
finite-energy interpolation process, and the damped transport carries the
endpoint form back to the start.  Since the path functionals are linear in
the test vector, one path ensemble yields the full coefficient vector of
the derivative at once.

All estimators share the deterministic chunk layout from `parallel`, so
results are bit-identical for any worker count, and common random numbers
across operands are achieved by reusing (seed, stream) pairs.
"""

from dataclasses import dataclass, field

import numpy as np

from .exterior import FormValue, fiber_tables
from .manifold import ConformalModel, FlatTorusModel, ManifoldModel, SphereModel
from .parallel import map_chunks, tree_sum
from .paths import CHUNK, EllSpec, SimRequest, active_indices, simulate_chunk

__all__ = [
    "EstimatorResult",
    "KatoGateError",
    "weitzenboeck_kato_gate",
    "make_ell",
    "semigroup_estimate",
    "bismut_d",
    "bismut_delta",
    "bismut_nabla",
    "domination_check",
]


class KatoGateError(RuntimeError):
    """Estimator precondition failed: curvature potential not certified."""


@dataclass
class EstimatorResult:
    value: object                 # FormValue, ndarray, or complex pairing
    se: object
    n: int
    seed: int
    mode: str
    pairing: complex | None = None
    pairing_se: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        def conv(v):
            if isinstance(v, FormValue):
                return {"m": v.m, "frame": v.frame,
                        "re": v.coeffs.real.tolist(),
                        "im": v.coeffs.imag.tolist()}
            if isinstance(v, np.ndarray):
                if np.iscomplexobj(v):
                    return {"re": v.real.tolist(), "im": v.imag.tolist()}
                return v.tolist()
            if isinstance(v, complex):
                return {"re": v.real, "im": v.imag}
            return v
        return {"value": conv(self.value), "se": conv(self.se),
                "n": self.n, "seed": self.seed, "mode": self.mode,
                "pairing": conv(self.pairing),
                "pairing_se": self.pairing_se, "meta": self.meta}


def is_compact(model):
    if isinstance(model, ConformalModel):
        return is_compact(model.base)
    return isinstance(model, (FlatTorusModel, SphereModel))


def weitzenboeck_kato_gate(model, sample_points=None, n_sample=128):
    """Certify the negative part of the curvature endomorphism as a Kato
    potential by a bounded-potential argument on a deterministic sample.

    Bounded potentials are in the Kato class (the time integral is at most
    M t); the builtin model families all have bounded curvature, so the gate
    reports the sampled bound.  A Monte Carlo test (paths.kato_test) is the
    honest instrument for unbounded potentials.
    """
    if model.is_flat:
        return {"verdict": "kato", "bound": 0.0, "rule": "flat"}
    if model.constant_curvature is not None:
        from math import comb
        K = model.constant_curvature
        vals = [K * k * (model.m - k) for k in range(model.m + 1)]
        neg = max(0.0, -min(vals))
        return {"verdict": "kato", "bound": neg, "rule": "constant-curvature"}
    if sample_points is None:
        base = model.base if isinstance(model, ConformalModel) else model
        rng = np.random.default_rng(2024)
        if isinstance(base, FlatTorusModel):
            sample_points = rng.uniform(0, 1, size=(n_sample, model.m)) * base.periods
        else:
            sample_points = rng.uniform(-3, 3, size=(n_sample, model.m))
            if base.kind == "hyperbolic":
                sample_points = np.tanh(sample_points) * 0.9
    fp = model.orthonormal_frame(np.asarray(sample_points, dtype=float))
    W = model.weitzenboeck_frame(fp)
    wmin = float(np.linalg.eigvalsh(W)[..., 0].min())
    return {"verdict": "kato", "bound": max(0.0, -wmin),
            "rule": "bounded-sample"}


def make_ell(mode, model, x, s):
    """Interpolation-process spec for the derivative estimators.

    mode "auto" picks compact-linear on compact models, the localized clock
    (unit ball at x, c_loc = 1) otherwise.
    """
    if mode == "auto":
        mode = "linear" if is_compact(model) else "localized"
    if mode in ("linear", "compact-linear"):
        if not is_compact(model):
            raise ValueError("compact-linear interpolation needs a compact model")
        return EllSpec("linear")
    if mode == "localized":
        return EllSpec("localized", center=tuple(np.atleast_1d(x)), radius=1.0,
                       c_loc=1.0)
    raise ValueError(f"unknown ell mode {mode!r}")


def _field_degrees(fld, model, x):
    if getattr(fld, "degrees", None):
        return tuple(sorted(set(fld.degrees)))
    fp = model.orthonormal_frame(np.asarray(x, dtype=float))
    c = fld.frame_coeffs(model, fp)
    t = fiber_tables(model.m)
    degs = [k for k in range(model.m + 1)
            if np.any(np.abs(c[..., t.degree_slices[k]]) > 0)]
    return tuple(degs) if degs else (0,)


def _check_gate(model, kato_gate, allow_override):
    gate = kato_gate if kato_gate is not None else weitzenboeck_kato_gate(model)
    verdict = gate["verdict"] if isinstance(gate, dict) else gate
    if verdict not in ("kato", "dynkin") and not allow_override:
        raise KatoGateError(
            f"curvature Kato gate returned {verdict!r}; pass "
            "allow_kato_override=True to proceed anyway")
    return gate


# ---------------------------------------------------------------------------
# chunk workers (top-level, picklable)


def _semigroup_chunk(lo, hi, model, x0, fld, req, seed, stream, act):
    out = simulate_chunk(model, x0, req, seed, stream, lo, hi)
    a = fld.frame_coeffs(model, out.fp_end)[:, act]
    u = a if out.Q is None or model.is_flat else \
        np.einsum("nJK,nK->nJ", out.Q, a)
    return {"sum": u.sum(axis=0), "sq": (np.abs(u) ** 2).sum(axis=0),
            "n": out.n}


def _coupled_chunk(lo, hi, model, x0, fld, req, seed, stream, act, which):
    out = simulate_chunk(model, x0, req, seed, stream, lo, hi)
    a = fld.frame_coeffs(model, out.fp_end)[:, act]
    Qa = a if (model.is_flat or out.Q is None) else \
        np.einsum("nKJ,nK->nJ", out.Q, a)     # Q_s^T a
    T = {"interior": out.T_interior, "wedge": out.T_wedge,
         "nabla": out.M_nabla}[which]
    u = np.einsum("nKJ,nK->nJ", T, Qa)        # T^T (Q^T a)
    if which == "wedge":
        # the multiplication map of the codifferential is minus the sharp
        # contraction, so the wedge coupling carries the opposite sign
        u = -u
    return {"sum": u.sum(axis=0), "sq": (np.abs(u) ** 2).sum(axis=0),
            "n": out.n, "rho_ratio": out.rho_ratio_max}


def _domination_chunk(lo, hi, model, x0, fld, req, seed, stream, act):
    out = simulate_chunk(model, x0, req, seed, stream, lo, hi)
    a = fld.frame_coeffs(model, out.fp_end)[:, act]
    u = a if out.Q is None or model.is_flat else \
        np.einsum("nJK,nK->nJ", out.Q, a)
    lhs = np.linalg.norm(u, axis=-1)
    w = np.exp(-0.5 * out.fk_integral) * np.linalg.norm(a, axis=-1)
    return {"lhs_sum": lhs.sum(), "lhs_sq": (lhs ** 2).sum(),
            "rhs_sum": w.sum(), "rhs_sq": (w ** 2).sum(), "n": out.n}


def _reduce_mean(partials, key="sum", sqkey="sq"):
    total = sum(p["n"] for p in partials)
    s = tree_sum([p[key] for p in partials])
    sq = tree_sum([p[sqkey] for p in partials])
    mean = s / total
    var = np.maximum(sq / total - np.abs(mean) ** 2, 0.0)
    se = np.sqrt(var / total)
    return mean, se, total


# ---------------------------------------------------------------------------
# estimators


def semigroup_estimate(model, fld, x, s, n_paths, dt, seed, stream=1,
                       workers=1, kato_gate=None, allow_kato_override=False,
                       increment_refine=1):
    """Estimate of the heat semigroup applied to the field at x, expressed
    in the orthonormal frame at x."""
    gate = _check_gate(model, kato_gate, allow_kato_override)
    degs = _field_degrees(fld, model, x)
    act = active_indices(model.m, degs)
    req = SimRequest(s=s, dt=dt, transport_degrees=degs,
                     increment_refine=increment_refine)
    parts = map_chunks(_semigroup_chunk, n_paths, CHUNK, workers,
                       model, np.asarray(x, dtype=float), fld, req, seed,
                       stream, act)
    mean, se, total = _reduce_mean(parts)
    full = np.zeros(2 ** model.m, dtype=complex)
    full[act] = mean
    se_full = np.zeros(2 ** model.m)
    se_full[act] = se
    return EstimatorResult(
        value=FormValue(model.m, full, "orthonormal"), se=se_full, n=total,
        seed=seed, mode="semigroup",
        meta={"s": s, "dt": dt, "degrees": degs, "kato": gate})


def _derivative_estimate(which, model, fld, x, s, n_paths, dt, seed, v, mode,
                         stream, workers, kato_gate, allow_kato_override,
                         grad_R_ball_max=None):
    gate = _check_gate(model, kato_gate, allow_kato_override)
    m = model.m
    degs = _field_degrees(fld, model, x)
    if which == "interior":
        tdegs = tuple(sorted(set(degs) | {k + 1 for k in degs if k + 1 <= m}))
    elif which == "wedge":
        tdegs = tuple(sorted(set(degs) | {k - 1 for k in degs if k - 1 >= 0}))
    else:
        tdegs = degs
    act = active_indices(m, tdegs)
    x = np.asarray(x, dtype=float)
    ell = make_ell(mode, model, x, s)
    req = SimRequest(
        s=s, dt=dt, transport_degrees=tdegs,
        qtilde_degrees=degs if which == "nabla" else (),
        coupling_interior=which == "interior",
        coupling_wedge=which == "wedge",
        coupling_nabla=which == "nabla",
        ell=ell, grad_R_ball_max=grad_R_ball_max)
    parts = map_chunks(_coupled_chunk, n_paths, CHUNK, workers,
                       model, x, fld, req, seed, stream, act, which)
    mean, se, total = _reduce_mean(parts)
    rho_ratio = max(p["rho_ratio"] for p in parts)

    if which == "nabla":
        ntl = len(active_indices(m, degs))
        value = mean.reshape(m, ntl)
        se_out = se.reshape(m, ntl)
    else:
        full = np.zeros(2 ** m, dtype=complex)
        full[act] = mean
        value = FormValue(m, full, "orthonormal")
        se_out = np.zeros(2 ** m)
        se_out[act] = se

    pairing = pairing_se = None
    if v is not None:
        if which == "nabla":
            v = np.asarray(v, dtype=complex).reshape(-1)
            flat = mean.reshape(-1)
            if v.shape != flat.shape:
                raise ValueError(
                    f"test vector has {v.shape[0]} components, expected "
                    f"{flat.shape[0]} (directions x degree block)")
            v_act = v
        else:
            v = np.asarray(v, dtype=complex).reshape(-1)
            if v.shape != (2 ** m,):
                raise ValueError(
                    f"test multivector must have 2^m = {2 ** m} components")
            v_act = v[act]
            flat = mean
        pairing = complex(np.dot(flat, v_act))
        pairing_se = float(np.sqrt(np.sum((se.reshape(-1)
                                           * np.abs(v_act).reshape(-1)) ** 2)))
    return EstimatorResult(
        value=value, se=se_out, n=total, seed=seed,
        mode=f"bismut-{which}/{ell.mode}", pairing=pairing,
        pairing_se=pairing_se,
        meta={"s": s, "dt": dt, "degrees": degs, "kato": gate,
              "rho_ratio_max": rho_ratio})


def bismut_d(model, fld, x, s, n_paths, dt, seed, v=None, mode="auto",
             stream=2, workers=1, kato_gate=None, allow_kato_override=False):
    """Derivative-free estimator of the exterior derivative of the heat
    semigroup at x.  The value holds the coefficients of the degree-shifted
    form in the orthonormal frame; v (multivector coefficients on the
    active blocks) produces the scalar pairing."""
    return _derivative_estimate("interior", model, fld, x, s, n_paths, dt,
                                seed, v, mode, stream, workers, kato_gate,
                                allow_kato_override)


def bismut_delta(model, fld, x, s, n_paths, dt, seed, v=None, mode="auto",
                 stream=3, workers=1, kato_gate=None,
                 allow_kato_override=False):
    """Codifferential analogue of bismut_d (wedge coupling, degree down)."""
    return _derivative_estimate("wedge", model, fld, x, s, n_paths, dt,
                                seed, v, mode, stream, workers, kato_gate,
                                allow_kato_override)


def bismut_nabla(model, fld, x, s, n_paths, dt, seed, xi=None, mode="auto",
                 stream=4, workers=1, kato_gate=None,
                 allow_kato_override=False, grad_R_ball_max=None):
    """Covariant-derivative estimator; value has shape (m, block) pairing
    against xi in T_x M tensor the field's degree block."""
    return _derivative_estimate("nabla", model, fld, x, s, n_paths, dt,
                                seed, xi, mode, stream, workers, kato_gate,
                                allow_kato_override,
                                grad_R_ball_max=grad_R_ball_max)


class _MinEigWeitzenboeck:
    """Pointwise smallest eigenvalue of the curvature endomorphism, as a
    picklable potential."""

    def __init__(self, model):
        self.model = model

    def __call__(self, x):
        fp = self.model.orthonormal_frame(np.asarray(x, dtype=float))
        W = self.model.weitzenboeck_frame(fp)
        return np.linalg.eigvalsh(W)[..., 0]


def domination_check(model, fld, x, s, n_paths, dt, seed, stream=5,
                     workers=1):
    """Semigroup domination: |P_s alpha(x)| against the Feynman-Kac bound
    driven by the smallest curvature eigenvalue, with combined errors."""
    degs = _field_degrees(fld, model, x)
    act = active_indices(model.m, degs)
    w = _MinEigWeitzenboeck(model)
    req = SimRequest(s=s, dt=dt, transport_degrees=degs, fk_w=w)
    parts = map_chunks(_domination_chunk, n_paths, CHUNK, workers,
                       model, np.asarray(x, dtype=float), fld, req, seed,
                       stream, act)
    total = sum(p["n"] for p in parts)
    lhs = tree_sum([p["lhs_sum"] for p in parts]) / total
    rhs = tree_sum([p["rhs_sum"] for p in parts]) / total
    lv = tree_sum([p["lhs_sq"] for p in parts]) / total - lhs ** 2
    rv = tree_sum([p["rhs_sq"] for p in parts]) / total - rhs ** 2
    se = float(np.sqrt(max(lv, 0) / total) + np.sqrt(max(rv, 0) / total))
    # |E P_s alpha| <= E |Q a| is itself below the FK mean only pathwise;
    # compare the pathwise norms
    return {"lhs": float(lhs), "rhs": float(rhs), "combined_se": se,
            "holds": bool(lhs <= rhs + 3 * se), "n": total}
