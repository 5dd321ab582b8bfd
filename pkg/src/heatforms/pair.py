"""Pointwise comparison of two quasi-isometric metrics.

Everything is computed in a g-orthonormal frame at the point: there the
metric morphism A has a symmetric positive matrix, its Lambda-extension is
symmetric, and spectral calculus (square roots, sinh) reduces to eigh.

Batched over leading axes of the evaluation points throughout.
"""

from dataclasses import dataclass

import numpy as np

from .exterior import fiber_tables, lambda_ext
from .manifold import ManifoldModel, ModelError

__all__ = [
    "MetricPair",
    "metric_pair",
    "sinh_bound_check",
    "jacobi_dlogrho",
    "identification_apply",
    "tensor_opnorm_sup",
    "sym_pow",
]


def sym_pow(M, p):
    """Spectral power of a symmetric positive matrix, batched."""
    w, V = np.linalg.eigh(M)
    if np.any(w <= 0):
        raise ModelError("matrix must be positive definite for spectral powers")
    return np.einsum("...ik,...k,...jk->...ij", V, w ** p, V)


def tensor_opnorm_sup(T, iters=50, tol=1e-10, n_starts=4):
    """sup over unit directions v of the operator norm of sum_a v_a T[a].

    T has shape (..., m, P, Q); the maximization alternates between the top
    singular pair of the assembled matrix and the optimal direction, from
    several deterministic starts.  Returns (..., ) values.
    """
    T = np.asarray(T)
    m = T.shape[-3]
    batch = T.shape[:-3]
    best = np.zeros(batch)
    starts = [np.eye(m)[a] for a in range(m)]
    rng = np.random.default_rng(1234)
    for _ in range(max(0, n_starts - m)):
        s = rng.standard_normal(m)
        starts.append(s / np.linalg.norm(s))
    for v0 in starts:
        v = np.broadcast_to(v0, batch + (m,)).copy()
        prev = np.zeros(batch)
        for _ in range(iters):
            M = np.einsum("...a,...apq->...pq", v, T)
            U, s, Vh = np.linalg.svd(M)
            u = U[..., :, 0]
            w = Vh[..., 0, :]
            val = s[..., 0]
            v_new = np.einsum("...p,...apq,...q->...a", u, T, w)
            nrm = np.linalg.norm(v_new, axis=-1, keepdims=True)
            v = np.where(nrm > 0, v_new / np.where(nrm == 0, 1, nrm), v)
            if np.all(np.abs(val - prev) <= tol * np.maximum(1.0, val)):
                prev = val
                break
            prev = val
        best = np.maximum(best, prev)
    return best


@dataclass
class MetricPair:
    """Pointwise data of the pair (g, h): morphisms, deviations, sections.

    Frame-coefficient operators (calA and friends) act on form coefficients
    in the g-orthonormal coframe dual to E.
    """

    m: int
    x: np.ndarray
    G: np.ndarray
    H: np.ndarray
    E: np.ndarray                 # g-orthonormal frame columns
    A_frame: np.ndarray           # matrix of A in the frame, symmetric SPD
    eigvals: np.ndarray           # eigenvalues of A
    calA: np.ndarray              # Lambda-extension of A^{-1}, (2^m, 2^m)
    calA_sqrt: np.ndarray
    calA_isqrt: np.ndarray
    rho: np.ndarray               # Radon-Nikodym density (det A)^{1/2}
    delta0: np.ndarray            # zeroth order deviation
    delta_nabla: np.ndarray       # first order deviation |nabla^h - nabla^g|_g^2
    conn_diff: np.ndarray         # chart components of nabla^h - nabla^g
    conn_diff_frame: np.ndarray   # frame components, [d, b, c]
    S: np.ndarray                 # rho^{1/2} - rho^{-1/2}
    S_hat: np.ndarray             # (rho calA)^{1/2} - (rho calA)^{-1/2}


def metric_pair(g_model: ManifoldModel, h_model: ManifoldModel, x) -> MetricPair:
    x = np.asarray(x, dtype=float)
    m = g_model.m
    G = g_model.check_spd(x)
    H = h_model.check_spd(x)
    fp = g_model.orthonormal_frame(x)
    E = fp.E
    A_frame = np.einsum("...ia,...ij,...jb->...ab", E, H, E)
    A_frame = 0.5 * (A_frame + np.swapaxes(A_frame, -1, -2))
    lam = np.linalg.eigvalsh(A_frame)
    if np.any(lam <= 0):
        raise ModelError("metric pair is not positive: A has nonpositive spectrum")

    delta0 = np.max(np.abs(lam ** (m / 4.0) - lam ** (-m / 4.0)), axis=-1)
    rho = np.sqrt(np.prod(lam, axis=-1))

    calA = lambda_ext(m, np.linalg.inv(A_frame))
    calA = 0.5 * (calA + np.swapaxes(calA, -1, -2))
    calA_sqrt = sym_pow(calA, 0.5)
    calA_isqrt = sym_pow(calA, -0.5)

    conn_diff = h_model.christoffels(x) - g_model.christoffels(x)
    Einv = np.einsum("...ia,...ij->...aj", E, G)     # E^{-1} = E^T G
    conn_diff_frame = np.einsum("...dk,...kij,...ib,...jc->...dbc",
                                Einv, conn_diff, E, E)
    # delta^nabla: sup over unit X of the g-operator norm of (nabla^h-nabla^g)(X)
    T = np.swapaxes(conn_diff_frame, -3, -2)          # [b, d, c]: direction first
    delta_nabla = tensor_opnorm_sup(T) ** 2

    S = np.sqrt(rho) - 1.0 / np.sqrt(rho)
    rhoA = rho[..., None, None] * calA
    S_hat = sym_pow(rhoA, 0.5) - sym_pow(rhoA, -0.5)

    return MetricPair(
        m=m, x=x, G=G, H=H, E=E, A_frame=A_frame, eigvals=lam,
        calA=calA, calA_sqrt=calA_sqrt, calA_isqrt=calA_isqrt,
        rho=rho, delta0=delta0, delta_nabla=delta_nabla,
        conn_diff=conn_diff, conn_diff_frame=conn_diff_frame,
        S=S, S_hat=S_hat)


def sinh_bound_check(pair: MetricPair):
    """Pointwise estimate max{|S|, sigma_max(|S_hat|)} <= delta0."""
    w = np.linalg.eigvalsh(pair.S_hat)
    sigma_max = np.max(np.abs(w), axis=-1)
    s_abs = np.abs(pair.S)
    bound = pair.delta0
    holds = np.maximum(s_abs, sigma_max) <= bound + 1e-12
    return {
        "sigma_max_S_hat": sigma_max,
        "abs_S": s_abs,
        "bound": bound,
        "holds": bool(np.all(holds)),
    }


def _covariant_fd_operator(g_model, h_model, x, v_frame, h_step, assemble):
    """Covariant derivative of a frame-operator field along a unit frame
    direction, via parallel-transported central differences.

    assemble(model_pair_args...) maps a FramePoint to the operator matrix in
    its transported frame.
    """
    fp = g_model.orthonormal_frame(np.asarray(x, dtype=float))
    fplus = g_model.geodesic_step(fp, v_frame, h_step)
    fminus = g_model.geodesic_step(fp, -np.asarray(v_frame), h_step)
    return (assemble(fplus) - assemble(fminus)) / (2 * h_step)


def _A_frame_at(h_model, fp):
    H = h_model.metric(fp.x)
    A = np.einsum("...ia,...ij,...jb->...ab", fp.E, H, fp.E)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _calA_at(g_model, h_model, fp):
    return lambda_ext(g_model.m, np.linalg.inv(_A_frame_at(h_model, fp)))


def grad_A_frame(g_model, h_model, x, v_frame, h_step=1e-5):
    """nabla^g_X A in the transported frame, X = E v_frame (unit)."""
    return _covariant_fd_operator(
        g_model, h_model, x, v_frame, h_step,
        lambda fp: _A_frame_at(h_model, fp))


def grad_calA(g_model, h_model, x, v_frame, h_step=1e-5):
    """nabla^g_X calA in the transported frame."""
    return _covariant_fd_operator(
        g_model, h_model, x, v_frame, h_step,
        lambda fp: _calA_at(g_model, h_model, fp))


def grad_calA_sqrt(g_model, h_model, x, v_frame, h_step=1e-5):
    return _covariant_fd_operator(
        g_model, h_model, x, v_frame, h_step,
        lambda fp: sym_pow(_calA_at(g_model, h_model, fp), 0.5))


def grad_calA_all_directions(g_model, h_model, x, h_step=1e-5):
    """Stack of nabla_{e_a} calA over frame directions, (..., m, 2^m, 2^m)."""
    m = g_model.m
    return np.stack(
        [grad_calA(g_model, h_model, x, np.eye(m)[a], h_step) for a in range(m)],
        axis=-3)


def jacobi_dlogrho(g_model, h_model, x, X, h_step=1e-5, c_m=None):
    """Differential of det A and of log rho along the chart vector X,
    with the Radon-Nikodym gradient estimate as a one-sided check.

    Returns d(det A)(X), d log rho(X), and the bound right-hand side
    C(m) |calA^{-1}| |nabla^g calA|_g |X|_g.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    if np.allclose(X, 0):
        raise ValueError("direction X must be nonzero")
    m = g_model.m
    G = g_model.metric(x)
    fp = g_model.orthonormal_frame(x)
    v = np.einsum("...aj,...j->...a", np.einsum("...ia,...ij->...aj", fp.E, G), X)
    norm_X = np.linalg.norm(v, axis=-1)
    v_unit = v / norm_X

    A = _A_frame_at(h_model, fp)
    dA = grad_A_frame(g_model, h_model, x, v_unit, h_step) * norm_X
    detA = np.linalg.det(A)
    tr = np.trace(np.linalg.inv(A) @ dA)
    d_det = detA * tr
    d_logrho = 0.5 * tr

    if c_m is None:
        c_m = 0.5 * 2 ** (m / 2.0)   # HS-to-operator conversion on Lambda
    calA = lambda_ext(m, np.linalg.inv(A))
    opn_inv = np.max(np.abs(np.linalg.eigvalsh(np.linalg.inv(calA))))
    DcalA = grad_calA_all_directions(g_model, h_model, x, h_step)
    grad_norm = float(tensor_opnorm_sup(DcalA))
    rhs = c_m * opn_inv * grad_norm * norm_X
    return {
        "d_detA": float(d_det),
        "d_logrho": float(d_logrho),
        "bound_rhs": float(rhs),
        "holds": bool(abs(d_logrho) <= rhs + 1e-12),
    }


def identification_apply(pair: MetricPair, alpha, direction="I"):
    """Identification operator I = calA^{-1/2} or its adjoint
    I* = rho calA^{1/2}, acting on orthonormal-frame coefficients."""
    from .exterior import FormValue
    if isinstance(alpha, FormValue):
        if alpha.frame != "orthonormal":
            raise ValueError("identification operators act on orthonormal-frame "
                             "coefficients")
        coeffs = alpha.coeffs
        wrap = lambda c: FormValue(pair.m, c, "orthonormal")
    else:
        coeffs = np.asarray(alpha)
        wrap = lambda c: c
    if direction == "I":
        return wrap(pair.calA_isqrt @ coeffs)
    if direction in ("I*", "Istar"):
        return wrap(pair.rho * (pair.calA_sqrt @ coeffs))
    raise ValueError(f"direction must be 'I' or 'I*', got {direction!r}")
