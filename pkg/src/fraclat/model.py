"""Variational problem data for (-Lap)^a u + h u = f(x, u).

Ships power-type nonlinearities f(x, u) = a(x) |u|^(p-2) u with p > 2,
which satisfy the superlinearity, oddness and strict monotonicity
hypotheses the solver relies on.  The energy is

    I(u) = 1/2 (u, u)_a - sum_x F(x, u(x)),

whose l^2 gradient (-Lap)^a u + h u - f(x, u) is the pointwise residual of
the equation: it vanishes exactly at solutions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import Boundary, Field, LatticeGeometry
from .spectral import (Kernel, SpectralConfig, check_alpha, kernel_matrix,
                       kernel_table, torus_kernel)

__all__ = [
    "Potential",
    "Nonlinearity",
    "Model",
    "f_eval",
    "F_eval",
    "energy",
    "gradient",
    "nehari_residual",
    "mountain_gap",
    "make_model",
    "model_from_config",
    "model_config_dict",
    "load_model",
]


@dataclass(frozen=True)
class Potential:
    """Positive bounded lattice function, periodic with integer period.

    A constant is the special case of period 1 per axis.  Construction
    checks 0 < c1 <= h(x) <= c2 over one period.
    """

    table: np.ndarray
    period: tuple

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        period = tuple(int(p) for p in self.period)
        if t.shape != period:
            raise ValueError(f"table shape {t.shape} does not match period {period}")
        if any(p < 1 for p in period):
            raise ValueError("periods must be positive integers")
        if not np.all(np.isfinite(t)) or not np.all(t > 0.0):
            raise ValueError("potential values must be finite and strictly positive")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "period", period)

    @classmethod
    def constant(cls, c: float, d: int) -> "Potential":
        return cls(np.full((1,) * d, float(c)), (1,) * d)

    @classmethod
    def periodic(cls, table, period=None) -> "Potential":
        t = np.asarray(table, dtype=np.float64)
        return cls(t, period or t.shape)

    @property
    def c1(self) -> float:
        return float(self.table.min())

    @property
    def c2(self) -> float:
        return float(self.table.max())

    def is_constant(self) -> bool:
        return all(p == 1 for p in self.period)

    def at(self, site) -> float:
        idx = tuple(int(x) % p for x, p in zip(site, self.period))
        return float(self.table[idx])

    def values_on(self, geom: LatticeGeometry) -> np.ndarray:
        axes = [np.arange(-geom.L, geom.L + 1) % p for p in self.period]
        grid = np.meshgrid(*axes, indexing="ij")
        return self.table[tuple(grid)]


@dataclass(frozen=True)
class Nonlinearity:
    """f(x, u) = a(x) |u|^(p-2) u with p > 2 and positive periodic weight a.

    Odd in u; f(x, u)/|u| is strictly increasing on each half-line, and
    f(x, u) u = p F(x, u) > 2 F(x, u) for u != 0.
    """

    p: float
    weight: Optional[Potential] = None

    def __post_init__(self):
        if not self.p > 2.0:
            raise ValueError(f"power must satisfy p > 2, got {self.p}")
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def pure_power(cls, p: float) -> "Nonlinearity":
        return cls(p=p)

    @classmethod
    def weighted_power(cls, p: float, weight: Potential) -> "Nonlinearity":
        return cls(p=p, weight=weight)

    def weight_values(self, geom: LatticeGeometry) -> np.ndarray:
        if self.weight is None:
            return np.ones(geom.shape)
        return self.weight.values_on(geom)

    def f(self, u, a=1.0):
        u = np.asarray(u, dtype=np.float64)
        return a * np.abs(u) ** (self.p - 2.0) * u

    def F(self, u, a=1.0):
        u = np.asarray(u, dtype=np.float64)
        return a * np.abs(u) ** self.p / self.p

    def df(self, u, a=1.0):
        """du derivative of f; used by curvature-aware scale root-solving."""
        u = np.asarray(u, dtype=np.float64)
        return a * (self.p - 1.0) * np.abs(u) ** (self.p - 2.0)

    def F_diff(self, u, v, a=1.0):
        """F(x, v) - F(x, u) without cancellation.

        |v|^p - |u|^p evaluated through expm1/log1p of the exactly
        representable gap between the two magnitudes, so the difference keeps
        full relative accuracy even when u and v agree to many digits.  The
        descent line search leans on this to certify decreases far below one
        ulp of the total energy.
        """
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        au, av = np.abs(u), np.abs(v)
        hi = np.maximum(au, av)
        lo = np.minimum(au, av)
        sign = np.where(av >= au, 1.0, -1.0)
        graded = lo > 0.0
        safe_hi = np.where(hi > 0.0, hi, 1.0)
        gap = np.where(graded, (lo - hi) / safe_hi, 0.0)
        with np.errstate(divide="ignore"):
            # gap == -1 (magnitudes apart by > 16 digits) hits the exact limit
            diff = np.where(graded,
                            -np.expm1(self.p * np.log1p(gap)),
                            np.where(hi > 0.0, 1.0, 0.0))
        return a * sign * safe_hi**self.p * np.where(hi > 0.0, diff, 0.0) / self.p


class Model:
    """Everything defining I and I': order, potential, nonlinearity, operator.

    The kernel's convolution on the box is materialized once as a dense
    matrix (site-lexicographic order) so the solver's inner loop is a
    matvec; fields and tables stay immutable.
    """

    def __init__(self, geom: LatticeGeometry, alpha: float, h: Potential,
                 nl: Nonlinearity, kernel: Kernel):
        self.geom = geom
        self.alpha = check_alpha(alpha)
        self.h = h
        self.nl = nl
        self.kernel = kernel
        if kernel.d != geom.d:
            raise ValueError(f"kernel dimension {kernel.d} != lattice dimension {geom.d}")
        if kernel.alpha != self.alpha:
            raise ValueError(f"kernel order {kernel.alpha} != model order {alpha}")
        if geom.is_periodic():
            n = geom.n_per_axis
            for p in h.period:
                if n % p != 0:
                    raise ValueError(f"periodic wrap needs the box (={n} sites per axis) "
                                     f"commensurate with the potential period {h.period}")
            if nl.weight is not None:
                for p in nl.weight.period:
                    if n % p != 0:
                        raise ValueError("periodic wrap needs the box commensurate with the weight period")
        self.h_arr = h.values_on(geom).ravel(order="C")
        self.a_arr = nl.weight_values(geom).ravel(order="C")
        self.op = kernel_matrix(kernel, geom)

    # -- internal flat-array forms (site-lexicographic) --

    def apply_op(self, arr: np.ndarray) -> np.ndarray:
        return self.op @ arr

    def quad_alpha(self, arr: np.ndarray) -> float:
        """(u, u)_alpha = u.(-Lap)^a u + sum h u^2."""
        return float(arr @ self.apply_op(arr) + self.h_arr @ (arr * arr))

    def inner_alpha(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ self.apply_op(y) + self.h_arr @ (x * y))

    def norm_alpha_arr(self, arr: np.ndarray) -> float:
        return math.sqrt(max(self.quad_alpha(arr), 0.0))

    def energy_arr(self, arr: np.ndarray) -> float:
        return 0.5 * self.quad_alpha(arr) - float(np.sum(self.nl.F(arr, self.a_arr)))

    def gradient_arr(self, arr: np.ndarray) -> np.ndarray:
        return self.apply_op(arr) + self.h_arr * arr - self.nl.f(arr, self.a_arr)

    def energy_decrease(self, arr: np.ndarray, trial: np.ndarray) -> float:
        """I(trial) - I(arr) evaluated cancellation-free.

        With delta = trial - arr (exact in floats), the quadratic part is the
        identity (u, delta)_a + (delta, delta)_a / 2 and the potential part
        sums the stable per-site F differences, so decreases of order
        ||delta|| ||I'(u)|| are resolved even when both energies round to the
        same double.
        """
        delta = trial - arr
        op_delta = self.apply_op(delta)
        quad = float(arr @ op_delta + self.h_arr @ (arr * delta))
        quad += 0.5 * float(delta @ op_delta + self.h_arr @ (delta * delta))
        return quad - float(np.sum(self.nl.F_diff(arr, trial, self.a_arr)))

    def norm_alpha(self, u: Field) -> float:
        return self.norm_alpha_arr(u.flat())

    def field(self, arr: np.ndarray) -> Field:
        return Field(self.geom, arr.reshape(self.geom.shape))


def f_eval(model: Model, site, u: float) -> float:
    """Nonlinearity value f(x, u) at one site."""
    a = model.nl.weight.at(site) if model.nl.weight is not None else 1.0
    return float(model.nl.f(u, a))


def F_eval(model: Model, site, u: float) -> float:
    """Primitive F(x, u) = int_0^u f(x, t) dt at one site."""
    a = model.nl.weight.at(site) if model.nl.weight is not None else 1.0
    return float(model.nl.F(u, a))


def energy(model: Model, u: Field) -> float:
    """I(u) = 1/2 (u, u)_alpha - sum_x F(x, u(x))."""
    return model.energy_arr(u.flat())


def gradient(model: Model, u: Field) -> Field:
    """Pointwise residual (-Lap)^a u + h u - f(x, u), the l^2 form of I'(u).

    Pairing it against any test field reproduces the directional derivative:
    <I'(u), v> = sum_x g(x) v(x).
    """
    return model.field(model.gradient_arr(u.flat()))


def nehari_residual(model: Model, u: Field) -> float:
    """<I'(u), u> = ||u||_alpha^2 - sum_x f(x, u) u; zero exactly on the manifold."""
    arr = u.flat()
    if not np.any(arr):
        raise ValueError("the Nehari manifold excludes the zero field")
    return float(model.quad_alpha(arr) - np.sum(model.nl.f(arr, model.a_arr) * arr))


def mountain_gap(model: Model, u: Field) -> float:
    """sum_x (f(x,u) u / 2 - F(x,u)); nonnegative, equal to I at critical points."""
    arr = u.flat()
    return float(np.sum(0.5 * model.nl.f(arr, model.a_arr) * arr - model.nl.F(arr, model.a_arr)))


def make_model(d: int = 1, L: int = 32, boundary=Boundary.ZERO_EXTENDED,
               alpha: float = 0.5, p: float = 4.0, h: Potential | float = 1.0,
               weight: Potential | None = None,
               spectral: SpectralConfig | None = None) -> Model:
    """Convenience builder.

    Periodic boxes get the exact torus kernel (no quadrature error, exact
    translation covariance); zero-extended boxes get a quadrature table
    with the configured resolution and radius.
    """
    geom = LatticeGeometry(d, L, boundary)
    if not isinstance(h, Potential):
        h = Potential.constant(float(h), d)
    nl = Nonlinearity(p=p, weight=weight)
    if geom.is_periodic():
        kernel = torus_kernel(alpha, geom)
    else:
        cfg = spectral or SpectralConfig.default(d)
        kernel = kernel_table(alpha, d, cfg.radius_for(L), cfg, doubling_check=False)
    return Model(geom, alpha, h, nl, kernel)


# ---------------------------------------------------------------------------
# JSON config:
# {d, L, boundary, alpha, h: {kind, c | values+period}, f: {kind, p, weight?},
#  spectral: {M, R}}


def _potential_from_config(cfg: dict, d: int) -> Potential:
    kind = cfg.get("kind", "constant")
    if kind == "constant":
        return Potential.constant(float(cfg["c"]), d)
    if kind == "periodic_table":
        values = np.asarray(cfg["values"], dtype=np.float64)
        period = tuple(cfg.get("period", values.shape))
        return Potential.periodic(values.reshape(period), period)
    raise ValueError(f"unknown potential kind {kind!r}")


def _potential_to_config(pot: Potential) -> dict:
    if pot.is_constant():
        return {"kind": "constant", "c": float(pot.table.ravel()[0])}
    return {"kind": "periodic_table", "values": pot.table.tolist(), "period": list(pot.period)}


def model_from_config(cfg: dict) -> Model:
    d = int(cfg["d"])
    h = _potential_from_config(cfg.get("h", {"kind": "constant", "c": 1.0}), d)
    f_cfg = cfg.get("f", {"kind": "pure_power", "p": 4.0})
    weight = None
    if f_cfg.get("kind") == "weighted_power":
        weight = _potential_from_config(f_cfg["weight"], d)
    sp_cfg = None
    if "spectral" in cfg:
        sp_cfg = SpectralConfig(M=int(cfg["spectral"]["M"]), R=cfg["spectral"].get("R"))
    return make_model(d=d, L=int(cfg["L"]), boundary=cfg.get("boundary", "zero_extended"),
                      alpha=float(cfg["alpha"]), p=float(f_cfg["p"]), h=h, weight=weight,
                      spectral=sp_cfg)


def model_config_dict(model: Model) -> dict:
    f_cfg = {"kind": "pure_power" if model.nl.weight is None else "weighted_power",
             "p": model.nl.p}
    if model.nl.weight is not None:
        f_cfg["weight"] = _potential_to_config(model.nl.weight)
    cfg = {
        "d": model.geom.d,
        "L": model.geom.L,
        "boundary": model.geom.boundary.value,
        "alpha": model.alpha,
        "h": _potential_to_config(model.h),
        "f": f_cfg,
    }
    if not model.kernel.exact_torus:
        cfg["spectral"] = {"M": model.kernel.M, "R": model.kernel.R}
    return cfg


def load_model(path) -> Model:
    with open(path) as fh:
        return model_from_config(json.load(fh))
