"""Exterior algebra over a single cotangent fiber.

Coefficients of an element of the full exterior bundle fiber are stored as a
complex vector of length 2^m.  Basis elements are indexed by increasing
multi-indices, ordered first by degree and lexicographically within a degree,
e.g. for m = 3:

    (), (0,), (1,), (2,), (0,1), (0,2), (1,2), (0,1,2)

All structural operators (wedge, interior product, degree-preserving
extensions of endomorphisms) are precomputed once per dimension as dense
tensors and applied with einsum, so every operation broadcasts over leading
batch axes.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

__all__ = [
    "FormValue",
    "fiber_tables",
    "wedge_coeffs",
    "interior_coeffs",
    "lambda_ext",
    "lambda_gram",
    "derivation_ext",
    "weitzenboeck_from_riemann",
    "wedge",
    "interior",
]


def _sorted_sign(seq):
    """Sign of the permutation sorting seq, 0 if it has repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    # insertion sort, counting swaps
    for i in range(1, len(seq)):
        j = i
        while j > 0 and seq[j - 1] > seq[j]:
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    return sign


@dataclass(frozen=True)
class FiberTables:
    """Combinatorial structure of Lambda(R^m)* in the fixed basis order."""

    m: int
    dim: int                      # 2^m
    indices: tuple                # tuple of multi-indices (sorted tuples)
    position: dict                # multi-index -> flat position
    degree_slices: tuple          # slice per degree k
    degrees: np.ndarray           # degree of each basis element
    wedge_tensor: np.ndarray      # (dim, dim, dim): out, a, b
    interior_tensor: np.ndarray   # (m, dim, dim): direction, out, in
    wedge1: np.ndarray            # (m, dim, dim): eps^a wedge .
    deriv_tensor: np.ndarray      # (dim, dim, m, m): dLambda(B) = einsum('JIbj,bj->JI')
    weitz_tensor: np.ndarray      # (m, m, m, m, dim, dim): contraction with R_frame

    def block(self, k):
        return self.degree_slices[k]


@lru_cache(maxsize=None)
def fiber_tables(m: int) -> FiberTables:
    if m < 1:
        raise ValueError("fiber dimension must be >= 1")
    indices = []
    for k in range(m + 1):
        indices.extend(combinations(range(m), k))
    position = {idx: p for p, idx in enumerate(indices)}
    dim = 2 ** m
    assert len(indices) == dim

    offs, slices = 0, []
    for k in range(m + 1):
        slices.append(slice(offs, offs + comb(m, k)))
        offs += comb(m, k)
    degrees = np.array([len(idx) for idx in indices])

    wedge_t = np.zeros((dim, dim, dim))
    for ia, a in enumerate(indices):
        for ib, b in enumerate(indices):
            sign = _sorted_sign(a + b)
            if sign:
                out = tuple(sorted(a + b))
                wedge_t[position[out], ia, ib] = sign

    interior_t = np.zeros((m, dim, dim))
    for iS, S in enumerate(indices):
        for pos, s in enumerate(S):
            rest = S[:pos] + S[pos + 1:]
            interior_t[s, position[rest], iS] = (-1) ** pos

    wedge1 = np.zeros((m, dim, dim))
    for a in range(m):
        ia = position[(a,)]
        wedge1[a] = wedge_t[:, ia, :]

    # dLambda(B): derivation extension of B acting on 1-form coefficients
    deriv_t = np.zeros((dim, dim, m, m))
    for iI, I in enumerate(indices):
        for pos, j in enumerate(I):
            for b in range(m):
                seq = I[:pos] + (b,) + I[pos + 1:]
                sign = _sorted_sign(seq)
                if sign:
                    out = tuple(sorted(seq))
                    deriv_t[position[out], iI, b, j] += sign

    # Weitzenboeck assembly tensor:
    #   R_op = einsum('abdl,abdlJK->JK', R_frame, weitz_t)
    # encodes  - sum_{a,b} (eps^a ^)(e_b .) dLambda(-R_frame[a,b,:,:])
    weitz_t = np.zeros((m, m, m, m, dim, dim))
    for a in range(m):
        for b in range(m):
            head = wedge1[a] @ interior_t[b]
            # dLambda(E_{dl}) as slice of deriv_t
            weitz_t[a, b] = np.einsum("JK,KIdl->dlJI", head, deriv_t)
    # two minus signs cancel: -(eps^a^)(e_b.) dLambda(-N) = +(...)dLambda(N)
    return FiberTables(
        m=m,
        dim=dim,
        indices=tuple(indices),
        position=position,
        degree_slices=tuple(slices),
        degrees=degrees,
        wedge_tensor=wedge_t,
        interior_tensor=interior_t,
        wedge1=wedge1,
        deriv_tensor=deriv_t,
        weitz_tensor=weitz_t,
    )


def wedge_coeffs(m, a, b):
    """Coefficients of a ^ b; broadcasts over leading axes."""
    t = fiber_tables(m)
    return np.einsum("oab,...a,...b->...o", t.wedge_tensor, a, b)


def interior_coeffs(m, X, a):
    """Contraction X . a for X in frame coordinates (length m)."""
    t = fiber_tables(m)
    return np.einsum("soi,...s,...i->...o", t.interior_tensor, X, a)


def lambda_ext(m, M):
    """Coefficient matrix of the Lambda-extension of precomposition with M.

    For a form written in a basis, precomposition of every slot with the
    endomorphism M acts on coefficients by c_J -> sum_I det(M[I, J]) c_I.
    Returns the block-diagonal (2^m, 2^m) matrix; batched over leading axes
    of M.
    """
    t = fiber_tables(m)
    M = np.asarray(M)
    batch = M.shape[:-2]
    out = np.zeros(batch + (t.dim, t.dim), dtype=M.dtype)
    out[..., 0, 0] = 1.0
    for k in range(1, m + 1):
        blk = t.degree_slices[k]
        idxs = t.indices[blk.start:blk.stop]
        for jj, J in enumerate(idxs):
            for ii, I in enumerate(idxs):
                sub = M[..., list(I), :][..., :, list(J)]
                out[..., blk.start + jj, blk.start + ii] = np.linalg.det(sub)
    return out


def lambda_gram(gx, k):
    """Gram matrix on degree-k elements induced by the metric matrix gx.

    Entries are determinants of cometric minors, det[(dx^I_a, dx^J_b)_g].
    For k = 0 this is the 1x1 matrix [1].
    """
    gx = np.asarray(gx, dtype=float)
    m = gx.shape[-1]
    if not np.allclose(gx, np.swapaxes(gx, -1, -2)):
        raise ValueError("metric matrix must be symmetric")
    if np.any(np.linalg.eigvalsh(gx) <= 0):
        raise ValueError("metric matrix must be positive definite")
    if k == 0:
        return np.ones(gx.shape[:-2] + (1, 1))
    ginv = np.linalg.inv(gx)
    idxs = list(combinations(range(m), k))
    n = len(idxs)
    out = np.empty(gx.shape[:-2] + (n, n))
    for a, I in enumerate(idxs):
        for b, J in enumerate(idxs):
            out[..., a, b] = np.linalg.det(ginv[..., list(I), :][..., :, list(J)])
    return out


def derivation_ext(m, B):
    """Extend an operator B on 1-form coefficients to Lambda as a derivation."""
    t = fiber_tables(m)
    return np.einsum("JIbj,...bj->...JI", t.deriv_tensor, np.asarray(B))


def weitzenboeck_from_riemann(R_frame):
    """Assemble the curvature endomorphism of the form Laplacian.

    R_frame[..., a, b, c, d] = (R(e_a, e_b) e_c, e_d) in an orthonormal
    frame.  Returns the (2^m, 2^m) symmetric block-diagonal matrix whose
    degree-1 block equals the Ricci matrix in the frame and whose degree-0
    and top-degree blocks vanish.
    """
    R_frame = np.asarray(R_frame)
    m = R_frame.shape[-1]
    t = fiber_tables(m)
    return np.einsum("abdlJK,...abdl->...JK", t.weitz_tensor, R_frame)


# ---------------------------------------------------------------------------
# user-facing form values


@dataclass
class FormValue:
    """Coefficients of an element of the full exterior fiber at a point.

    frame is either "coordinate" (coefficients in the chart coframe dx^i) or
    "orthonormal" (coefficients in the coframe dual to a declared orthonormal
    frame at the point).  Binary operations require matching frames.
    """

    m: int
    coeffs: np.ndarray
    frame: str = "orthonormal"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 ** self.m,):
            raise ValueError(
                f"expected {2 ** self.m} coefficients for m={self.m}, "
                f"got shape {self.coeffs.shape}"
            )

    @classmethod
    def zero(cls, m, frame="orthonormal"):
        return cls(m, np.zeros(2 ** m, dtype=complex), frame)

    @classmethod
    def from_blocks(cls, m, blocks, frame="orthonormal"):
        """Build from {degree: coefficient block} with lexicographic order."""
        t = fiber_tables(m)
        c = np.zeros(t.dim, dtype=complex)
        for k, blk in blocks.items():
            blk = np.asarray(blk, dtype=complex)
            if blk.shape != (comb(m, k),):
                raise ValueError(f"degree-{k} block must have length {comb(m, k)}")
            c[t.degree_slices[k]] = blk
        return cls(m, c, frame)

    def block(self, k):
        return self.coeffs[fiber_tables(self.m).degree_slices[k]]

    @property
    def degree_mask(self):
        t = fiber_tables(self.m)
        return tuple(
            k for k in range(self.m + 1)
            if np.any(self.coeffs[t.degree_slices[k]] != 0)
        )

    def _check(self, other):
        if self.m != other.m:
            raise ValueError("dimension mismatch")
        if self.frame != other.frame:
            raise ValueError(f"frame mismatch: {self.frame} vs {other.frame}")

    def __add__(self, other):
        self._check(other)
        return FormValue(self.m, self.coeffs + other.coeffs, self.frame)

    def __sub__(self, other):
        self._check(other)
        return FormValue(self.m, self.coeffs - other.coeffs, self.frame)

    def __mul__(self, scalar):
        return FormValue(self.m, self.coeffs * scalar, self.frame)

    __rmul__ = __mul__


def wedge(alpha: FormValue, beta: FormValue) -> FormValue:
    """Graded-antisymmetric exterior product."""
    alpha._check(beta)
    return FormValue(alpha.m, wedge_coeffs(alpha.m, alpha.coeffs, beta.coeffs),
                     alpha.frame)


def interior(gx, X, alpha: FormValue) -> FormValue:
    """Contraction of the vector X into alpha: (X . a)(...) = a(X, ...).

    X is given in the same frame as alpha's coefficients; for an orthonormal
    frame the metric pairing is the plain dot product, for a coordinate frame
    pass the vector's contravariant chart components.  gx is accepted for
    interface symmetry with the metric-dependent sharp operations and is only
    used to validate shape.  Degree-0 input returns the zero form.
    """
    X = np.asarray(X, dtype=complex)
    if gx is not None and np.shape(gx)[-1] != alpha.m:
        raise ValueError("metric dimension mismatch")
    if X.shape != (alpha.m,):
        raise ValueError("vector length must equal m")
    return FormValue(alpha.m, interior_coeffs(alpha.m, X, alpha.coeffs),
                     alpha.frame)
