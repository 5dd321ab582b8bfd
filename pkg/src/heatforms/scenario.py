"""Scenario configuration: TOML schema, validation, model/field builders.

The config is a single TOML file; unknown keys are rejected so that typos
fail loudly.  Everything built here is picklable, which the worker pool
needs.
"""

import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fields import AmbientCovectorField, CoordField, ScalarField
from .manifold import (ConformalFactor, ConformalModel, EuclideanModel,
                       FlatTorusModel, HyperbolicModel, ModelError,
                       SphereModel)

__all__ = ["ConfigError", "Scenario", "load_scenario", "build_model",
           "build_field", "build_potential"]


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""


_MODEL_KEYS = {
    "euclidean": {"kind", "dim", "derivative_mode", "h_fd"},
    "flat_torus": {"kind", "dim", "periods", "derivative_mode", "h_fd"},
    "sphere": {"kind", "dim", "radius", "derivative_mode", "h_fd"},
    "hyperbolic": {"kind", "dim", "kappa", "derivative_mode", "h_fd"},
    "conformal": {"kind", "psi"},
}
_PSI_KEYS = {"family", "amplitude", "sigma", "center", "support_radius"}
_TOP_KEYS = {"id", "seed", "workers", "g_model", "h_model", "pipeline",
             "field", "estimator", "quadrature", "kato", "output"}
_PIPELINES = {"paths", "semigroup", "bismut", "bounds", "criterion", "kato"}


def _check_keys(table, allowed, where):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{where}]")


def build_model(spec, base=None, where="g_model"):
    _check_keys(spec, _MODEL_KEYS.get(spec.get("kind", ""), {"kind"}), where)
    kind = spec.get("kind")
    if kind is None:
        raise ConfigError(f"[{where}] needs a 'kind'")
    kw = {}
    if "derivative_mode" in spec:
        kw["deriv_mode"] = spec["derivative_mode"]
    if "h_fd" in spec:
        kw["h_fd"] = float(spec["h_fd"])
    try:
        if kind == "euclidean":
            return EuclideanModel(int(spec.get("dim", 2)), **kw)
        if kind == "flat_torus":
            if "periods" not in spec:
                raise ConfigError(f"[{where}] flat_torus needs 'periods'")
            return FlatTorusModel(int(spec.get("dim", len(spec["periods"]))),
                                  spec["periods"], **kw)
        if kind == "sphere":
            return SphereModel(int(spec.get("dim", 2)),
                               radius=float(spec.get("radius", 1.0)), **kw)
        if kind == "hyperbolic":
            return HyperbolicModel(int(spec.get("dim", 2)),
                                   kappa=float(spec.get("kappa", 1.0)), **kw)
        if kind == "conformal":
            if base is None:
                raise ConfigError("conformal h_model needs a g_model base")
            psi_spec = spec.get("psi")
            if psi_spec is None:
                raise ConfigError(f"[{where}] conformal model needs [.psi]")
            _check_keys(psi_spec, _PSI_KEYS, where + ".psi")
            periods = base.periods if isinstance(base, FlatTorusModel) else None
            psi = ConformalFactor(
                psi_spec.get("family", "constant"),
                amplitude=float(psi_spec.get("amplitude", 0.0)),
                sigma=float(psi_spec.get("sigma", 1.0)),
                center=psi_spec.get("center"),
                support_radius=float(psi_spec.get("support_radius", 1.0)),
                periods=periods)
            return ConformalModel(base, psi)
    except ModelError as e:
        raise ConfigError(f"[{where}] {e}") from e
    raise ConfigError(f"[{where}] unknown model kind {kind!r}")


class GaussianScalar:
    """exp(-|x - c|^2 / (2 w^2)), picklable."""

    def __init__(self, center, width=1.0):
        self.center = np.asarray(center, dtype=float)
        self.width = float(width)

    def __call__(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.exp(-np.sum(d ** 2, axis=-1) / (2 * self.width ** 2))


class TrigScalar:
    """Product of cosines with per-axis integer frequencies and phases."""

    def __init__(self, freqs, phases=None, periods=None):
        self.freqs = np.asarray(freqs, dtype=float)
        self.phases = (np.zeros_like(self.freqs) if phases is None
                       else np.asarray(phases, dtype=float))
        self.periods = (np.ones_like(self.freqs) if periods is None
                        else np.asarray(periods, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod(np.cos(2 * np.pi * self.freqs * x / self.periods
                              + self.phases), axis=-1)


class TrigOneForm:
    """Chart one-form with trigonometric coefficient functions."""

    def __init__(self, m, freqs, amps, periods=None):
        self.m = int(m)
        self.freqs = np.asarray(freqs, dtype=float)
        self.amps = np.asarray(amps, dtype=float)
        self.periods = (np.ones(self.m) if periods is None
                        else np.asarray(periods, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (2 ** self.m,), dtype=complex)
        for i in range(self.m):
            out[..., 1 + i] = self.amps[i] * np.sin(
                2 * np.pi * self.freqs[i] * x[..., i] / self.periods[i])
        return out


class CoulombPotential:
    def __init__(self, center=None, eps=0.0):
        self.center = center
        self.eps = float(eps)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        c = self.center if self.center is not None else np.zeros(x.shape[-1])
        r = np.linalg.norm(x - c, axis=-1)
        return 1.0 / np.maximum(r, 1e-12)


class ConstantPotential:
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, x):
        return np.full(np.asarray(x).shape[:-1], self.value)


_FIELD_KEYS = {"type", "center", "width", "freqs", "phases", "amps",
               "covector"}


def build_field(spec, model, where="field"):
    _check_keys(spec, _FIELD_KEYS, where)
    ftype = spec.get("type")
    periods = getattr(model, "periods", None)
    if isinstance(model, ConformalModel):
        periods = getattr(model.base, "periods", None)
    if ftype == "scalar_gaussian":
        return ScalarField(GaussianScalar(spec.get("center", [0.0] * model.m),
                                          spec.get("width", 1.0)))
    if ftype == "scalar_trig":
        return ScalarField(TrigScalar(spec.get("freqs", [1] * model.m),
                                      spec.get("phases"), periods))
    if ftype == "oneform_trig":
        fn = TrigOneForm(model.m, spec.get("freqs", [1] * model.m),
                         spec.get("amps", [1.0] * model.m), periods)
        return CoordField(fn, degrees=(1,))
    if ftype == "ambient_covector":
        if not isinstance(model, SphereModel):
            raise ConfigError("ambient_covector fields need a sphere model")
        return AmbientCovectorField(spec.get("covector", [1.0, 0.0, 0.0]))
    raise ConfigError(f"[{where}] unknown field type {ftype!r}")


_KATO_KEYS = {"potential", "center", "value", "t_grid", "n_paths",
              "x_samples", "dt"}


def build_potential(spec, model, where="kato"):
    name = spec.get("potential", "weitzenboeck_neg")
    if name == "coulomb":
        return CoulombPotential(spec.get("center"))
    if name == "constant":
        return ConstantPotential(spec.get("value", 0.0))
    if name == "weitzenboeck_neg":
        return _NegEigPotential(model)
    raise ConfigError(f"[{where}] unknown potential {name!r}")


class _NegEigPotential:
    """Negative part of the smallest curvature eigenvalue, picklable."""

    def __init__(self, model):
        self.model = model

    def __call__(self, x):
        fp = self.model.orthonormal_frame(np.asarray(x, dtype=float))
        W = self.model.weitzenboeck_frame(fp)
        return np.maximum(0.0, -np.linalg.eigvalsh(W)[..., 0])


@dataclass
class Scenario:
    id: str
    seed: int
    workers: int
    g_model: object
    h_model: object
    pipelines: tuple
    s_values: tuple
    field: object
    field_spec: dict
    estimator: dict
    quadrature: dict
    kato: dict
    output: dict
    raw: dict


def load_scenario(path) -> Scenario:
    with open(path, "rb") as f:
        try:
            raw = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"TOML parse error: {e}") from e
    _check_keys(raw, _TOP_KEYS, "top level")
    if "seed" not in raw:
        raise ConfigError("missing required key 'seed' (no entropy default)")
    if "id" not in raw:
        raise ConfigError("missing required key 'id'")
    seed = int(raw["seed"])
    workers = int(raw.get("workers", 1))

    g_model = build_model(raw.get("g_model", {"kind": "euclidean", "dim": 2}),
                          where="g_model")
    h_model = None
    if "h_model" in raw:
        h_model = build_model(raw["h_model"], base=g_model, where="h_model")

    pipe = raw.get("pipeline", {})
    _check_keys(pipe, {"run", "s_values"}, "pipeline")
    pipelines = tuple(pipe.get("run", []))
    bad = set(pipelines) - _PIPELINES
    if bad:
        raise ConfigError(f"unknown pipeline(s) {sorted(bad)}")
    s_values = tuple(float(s) for s in pipe.get("s_values", [0.5]))
    if any(s <= 0 for s in s_values):
        raise ConfigError("s_values must be positive")

    est = dict(raw.get("estimator", {}))
    _check_keys(est, {"n_paths", "dt", "mode", "x0", "stream"}, "estimator")
    est.setdefault("n_paths", 10000)
    est.setdefault("dt", 1e-3)
    est.setdefault("mode", "auto")
    if int(est["n_paths"]) < 1:
        raise ConfigError("estimator n_paths must be >= 1")

    quad = dict(raw.get("quadrature", {}))
    _check_keys(quad, {"n_per_dim", "refine_levels", "truncation_threshold",
                       "radius", "require_finite", "n_ball"}, "quadrature")

    kato = dict(raw.get("kato", {}))
    _check_keys(kato, _KATO_KEYS, "kato")

    fld = None
    fld_spec = raw.get("field")
    needs_field = {"semigroup", "bismut", "bounds"} & set(pipelines)
    if fld_spec is not None:
        fld = build_field(fld_spec, g_model)
    elif needs_field:
        raise ConfigError(f"pipelines {sorted(needs_field)} need a [field]")

    out = dict(raw.get("output", {}))
    _check_keys(out, {"directory", "paths_dump", "dump_format"}, "output")

    return Scenario(
        id=str(raw["id"]), seed=seed, workers=workers,
        g_model=g_model, h_model=h_model, pipelines=pipelines,
        s_values=s_values, field=fld, field_spec=fld_spec or {},
        estimator=est, quadrature=quad, kato=kato, output=out, raw=raw)
