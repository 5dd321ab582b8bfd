"""Differential form fields evaluated in orthonormal frames.

A field only needs to produce frame coefficients at a FramePoint: that is
the single representation every estimator and numeric operator consumes.
Coordinate-coframe fields are pulled back through the frame matrix, ambient
covector fields (sphere) through the tangent basis.
"""

import numpy as np

from .exterior import fiber_tables, lambda_ext

__all__ = [
    "ScalarField",
    "CoordField",
    "AmbientCovectorField",
    "FrameField",
    "TransformedField",
]


class ScalarField:
    """Degree-0 field from a batched callable on points."""

    def __init__(self, fn):
        self.fn = fn
        self.degrees = (0,)

    def frame_coeffs(self, model, fp):
        val = np.asarray(self.fn(fp.x), dtype=complex)
        out = np.zeros(val.shape + (2 ** model.m,), dtype=complex)
        out[..., 0] = val
        return out


class CoordField:
    """Field given by chart-coframe coefficients x -> (..., 2^m)."""

    def __init__(self, coeff_fn, degrees=None):
        self.coeff_fn = coeff_fn
        self.degrees = degrees

    def frame_coeffs(self, model, fp):
        coord = np.asarray(self.coeff_fn(fp.x), dtype=complex)
        P = lambda_ext(model.m, fp.E)
        return np.einsum("...JI,...I->...J", P, coord)


class AmbientCovectorField:
    """Degree-1 field on the embedded sphere: pullback of a constant
    ambient covector c, coefficients E^T c."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=complex)
        self.degrees = (1,)

    def frame_coeffs(self, model, fp):
        t = fiber_tables(model.m)
        blk = np.einsum("...ia,...i->...a", fp.E, self.c)
        out = np.zeros(fp.batch_shape + (t.dim,), dtype=complex)
        out[..., t.degree_slices[1]] = blk
        return out


class FrameField:
    """Field from a raw callable (model, fp) -> frame coefficients."""

    def __init__(self, fn, degrees=None):
        self.fn = fn
        self.degrees = degrees

    def frame_coeffs(self, model, fp):
        return np.asarray(self.fn(model, fp), dtype=complex)


class TransformedField:
    """Pointwise operator applied to another field: x -> Op(x) alpha(x).

    op_fn maps a FramePoint to a (..., 2^m, 2^m) frame-coefficient operator.
    """

    def __init__(self, base_field, op_fn):
        self.base = base_field
        self.op_fn = op_fn
        self.degrees = None

    def frame_coeffs(self, model, fp):
        c = self.base.frame_coeffs(model, fp)
        Op = np.asarray(self.op_fn(fp))
        return np.einsum("...JK,...K->...J", Op, c)
