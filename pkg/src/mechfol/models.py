"""Mechanical Hamiltonians H = |y|^2/2 + V(x) and the built-in potential family.

Every potential is evaluated on arrays of positions with a trailing axis of
length two, so ``model.V(x)`` works for a single point ``x = (x1, x2)`` as
well as for an ``(n, 2)`` batch.  Zoo models carry closed-form gradients and
Hessians; custom models may supply callbacks or fall back to central finite
differences.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "PhaseState",
    "Symmetry",
    "Factor",
    "MechanicalModel",
    "Evaluation",
    "CapParams",
    "ModelError",
    "DomainError",
    "build_model",
    "product_model",
    "evaluate",
    "cut_function",
    "cap_potential",
    "cap_profile_critical_points",
    "principal_axes",
    "rescale",
    "euler_regularized",
    "euler_hamiltonian",
    "elliptic_to_cartesian",
    "antipodal_quotient",
    "model_to_config",
    "model_from_config",
    "load_model",
    "save_model",
    "ZOO_NAMES",
]


class ModelError(ValueError):
    """Invalid model name or parameters."""


class DomainError(ValueError):
    """A position lies outside the domain of validity of a model."""


@dataclass(frozen=True)
class PhaseState:
    """Point (x1, x2, y1, y2) of the phase space."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(2)
        y = np.asarray(self.y, dtype=float).reshape(2)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("phase state components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def w(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_vector(cls, w) -> "PhaseState":
        w = np.asarray(w, dtype=float).reshape(4)
        return cls(w[:2], w[2:])


@dataclass(frozen=True)
class Symmetry:
    """Linear symmetry x -> A x of the potential (lifted to y -> A y)."""

    name: str
    matrix: np.ndarray

    def apply(self, x):
        return np.asarray(x, dtype=float) @ np.asarray(self.matrix).T


@dataclass(frozen=True)
class Factor:
    """One-degree-of-freedom potential V_i(t) of a decoupled model."""

    V: Callable
    dV: Callable
    d2V: Callable
    interval: tuple
    periodic: bool = False
    label: str = ""


Evaluation = tuple  # (energy, gradient or None, hessian or None)


@dataclass(frozen=True)
class MechanicalModel:
    """Mechanical Hamiltonian with potential evaluators.

    Attributes
    ----------
    name : str
        Zoo identifier or ``"custom"``.
    params : mapping
        Named scalar parameters.
    potential, gradient, hessian : callable
        Functions of ``x`` with shape ``(..., 2)`` returning arrays of shape
        ``(...)``, ``(..., 2)`` and ``(..., 2, 2)``.
    domain : ((x1min, x1max), (x2min, x2max))
        Rectangle of validity.
    periodic : (bool, bool)
        Axes that are angles (their domain bounds give the period).
    symmetries : tuple of Symmetry
    decoupled : (Factor, Factor) or None
    region : callable or None
        Extra validity predicate on positions (used by capped models).
    """

    name: str
    params: Mapping[str, float]
    potential: Callable
    gradient: Callable
    hessian: Callable
    domain: tuple
    periodic: tuple = (False, False)
    symmetries: tuple = ()
    decoupled: Optional[tuple] = None
    region: Optional[Callable] = None
    extras: Mapping = field(default_factory=dict)

    # evaluation -------------------------------------------------------
    def V(self, x):
        return self.potential(np.asarray(x, dtype=float))

    def grad(self, x):
        return self.gradient(np.asarray(x, dtype=float))

    def hess(self, x):
        return self.hessian(np.asarray(x, dtype=float))

    def energy(self, w):
        w = np.asarray(w, dtype=float)
        return 0.5 * np.sum(w[..., 2:4] ** 2, axis=-1) + self.V(w[..., 0:2])

    def vector_field(self, w):
        """Hamiltonian vector field (y, -grad V)."""
        w = np.asarray(w, dtype=float)
        return np.concatenate([w[..., 2:4], -self.grad(w[..., 0:2])], axis=-1)

    def contains(self, x):
        """Boolean mask of positions inside the domain of validity."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for k in range(2):
            if self.periodic[k]:
                continue
            lo, hi = self.domain[k]
            ok &= (x[..., k] >= lo) & (x[..., k] <= hi)
        if self.region is not None:
            ok &= np.asarray(self.region(x), dtype=bool)
        return ok

    def check_domain(self, x):
        if not np.all(self.contains(x)):
            raise DomainError(f"position outside the domain of model {self.name!r}")

    def wrap(self, x):
        """Reduce periodic coordinates to their fundamental interval."""
        x = np.array(x, dtype=float)
        for k in range(2):
            if self.periodic[k]:
                lo, hi = self.domain[k]
                x[..., k] = lo + np.mod(x[..., k] - lo, hi - lo)
        return x


def evaluate(model: MechanicalModel, state: PhaseState, order: int = 0):
    """Energy and, on request, the derivatives of V at a phase state.

    Returns
    -------
    (H, gradV, hessV)
        Entries beyond ``order`` are ``None``.
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    model.check_domain(state.x)
    H = float(model.energy(state.w))
    g = model.grad(state.x) if order >= 1 else None
    h = model.hess(state.x) if order == 2 else None
    return H, g, h


# ---------------------------------------------------------------------------
# closed-form potentials

def _stack_grad(g1, g2):
    return np.stack(np.broadcast_arrays(g1, g2), axis=-1)


def _stack_hess(h11, h12, h22):
    h11, h12, h22 = np.broadcast_arrays(h11, h12, h22)
    return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)


def _rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


_REFLECT_X1 = Symmetry("x1 -> -x1", np.diag([-1.0, 1.0]))
_REFLECT_X2 = Symmetry("x2 -> -x2", np.diag([1.0, -1.0]))


def _henon_heiles(params):
    def V(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * (x1**2 + x2**2) + x1**2 * x2 - x2**3 / 3.0

    def grad(x):
        x1, x2 = x[..., 0], x[..., 1]
        return _stack_grad(x1 + 2 * x1 * x2, x2 + x1**2 - x2**2)

    def hess(x):
        x1, x2 = x[..., 0], x[..., 1]
        return _stack_hess(1 + 2 * x2, 2 * x1, 1 - 2 * x2)

    syms = (_REFLECT_X1,
            Symmetry("rotation 2pi/3", _rotation(2 * math.pi / 3)),
            Symmetry("rotation 4pi/3", _rotation(4 * math.pi / 3)))
    return dict(potential=V, gradient=grad, hessian=hess,
                domain=((-1.5, 1.5), (-1.5, 1.5)), symmetries=syms)


def _decoupled(f1: Factor, f2: Factor, **kw):
    def V(x):
        return f1.V(x[..., 0]) + f2.V(x[..., 1])

    def grad(x):
        return _stack_grad(f1.dV(x[..., 0]), f2.dV(x[..., 1]))

    def hess(x):
        h11 = f1.d2V(x[..., 0])
        h22 = f2.d2V(x[..., 1])
        return _stack_hess(h11, np.zeros_like(h11 + h22), h22)

    return dict(potential=V, gradient=grad, hessian=hess,
                domain=(tuple(f1.interval), tuple(f2.interval)),
                periodic=(f1.periodic, f2.periodic), decoupled=(f1, f2), **kw)


def _poly_factor(c2, c4, c6, interval, label):
    """Factor V(t) = c2 t^2 + c4 t^4 + c6 t^6."""
    return Factor(
        V=lambda t: c2 * t**2 + c4 * t**4 + c6 * t**6,
        dV=lambda t: 2 * c2 * t + 4 * c4 * t**3 + 6 * c6 * t**5,
        d2V=lambda t: 2 * c2 + 12 * c4 * t**2 + 30 * c6 * t**4,
        interval=interval, label=label)


def _frozen_hill(params):
    f = _poly_factor(4.0, 0.0, -8.0, (-1.0, 1.0), "4t^2 - 8t^6")
    swap = Symmetry("x1 <-> x2", np.array([[0.0, 1.0], [1.0, 0.0]]))
    return _decoupled(f, f, symmetries=(_REFLECT_X1, _REFLECT_X2, swap))


def _stark(params):
    eps = _positive(params, "eps")
    L = 1.5 / math.sqrt(2 * eps)
    f1 = _poly_factor(4.0, -4.0 * eps, 0.0, (-L, L), "4(t^2 - eps t^4)")
    f2 = _poly_factor(4.0, 4.0 * eps, 0.0, (-L, L), "4(t^2 + eps t^4)")
    return _decoupled(f1, f2, symmetries=(_REFLECT_X1, _REFLECT_X2))


def _chemical(params):
    alpha = _finite(params, "alpha")
    beta = _finite(params, "beta")
    if not alpha * beta > 0:
        raise ModelError("chemical model requires alpha*beta > 0")
    L1 = 2.0 * math.sqrt(alpha / beta)
    L2 = max(2.0, L1)
    f1 = _poly_factor(-0.5 * alpha, 0.25 * beta, 0.0, (-L1, L1),
                      "-alpha t^2/2 + beta t^4/4")
    f2 = _poly_factor(0.5, 0.0, 0.0, (-L2, L2), "t^2/2")
    return _decoupled(f1, f2, symmetries=(_REFLECT_X1, _REFLECT_X2))


def _saddle_center(params):
    a = _finite(params, "a")
    b = _finite(params, "b")
    if not a < 0 < b:
        raise ModelError("saddle-center model requires a < 0 < b")
    f1 = _poly_factor(0.5 * a, 0.0, 0.0, (-4.0, 4.0), "a t^2/2")
    f2 = _poly_factor(0.5 * b, 0.0, 0.0, (-4.0, 4.0), "b t^2/2")
    return _decoupled(f1, f2, symmetries=(_REFLECT_X1, _REFLECT_X2))


def _harmonic(params):
    w1 = _positive(params, "w1")
    w2 = _positive(params, "w2")
    f1 = _poly_factor(0.5 * w1**2, 0.0, 0.0, (-4.0, 4.0), "w1^2 t^2/2")
    f2 = _poly_factor(0.5 * w2**2, 0.0, 0.0, (-4.0, 4.0), "w2^2 t^2/2")
    return _decoupled(f1, f2, symmetries=(_REFLECT_X1, _REFLECT_X2))


def _euler(params):
    mu = _finite(params, "mu")
    c = _finite(params, "c")
    if not 0.0 < mu < 1.0:
        raise ModelError("Euler mass ratio mu must lie in (0, 1)")
    k = 2 * mu - 1
    f1 = Factor(
        V=lambda u: -np.cosh(u) - c * np.cosh(u) ** 2,
        dV=lambda u: -np.sinh(u) - c * np.sinh(2 * u),
        d2V=lambda u: -np.cosh(u) - 2 * c * np.cosh(2 * u),
        interval=(-3.0, 3.0), label="-cosh u - c cosh^2 u")
    f2 = Factor(
        V=lambda v: k * np.cos(v) + c * np.cos(v) ** 2,
        dV=lambda v: -k * np.sin(v) - c * np.sin(2 * v),
        d2V=lambda v: -k * np.cos(v) - 2 * c * np.cos(2 * v),
        interval=(0.0, 2 * math.pi), periodic=True,
        label="(2mu-1) cos v + c cos^2 v")
    syms = (Symmetry("u -> -u", np.diag([-1.0, 1.0])),
            Symmetry("v -> -v", np.diag([1.0, -1.0])))
    return _decoupled(f1, f2, symmetries=syms)


def _custom(params):
    V = params.get("potential")
    if not callable(V):
        raise ModelError("custom model needs a callable 'potential'")
    grad = params.get("gradient")
    hess = params.get("hessian")
    h = float(params.get("fd_step", 1e-5))
    e = np.eye(2)

    if grad is None:
        def grad(x):
            x = np.asarray(x, dtype=float)
            cols = [(V(x + h * e[k]) - V(x - h * e[k])) / (2 * h) for k in range(2)]
            return np.stack(cols, axis=-1)
    if hess is None:
        g = grad

        def hess(x):
            x = np.asarray(x, dtype=float)
            rows = [(g(x + h * e[k]) - g(x - h * e[k])) / (2 * h) for k in range(2)]
            H = np.stack(rows, axis=-2)
            return 0.5 * (H + np.swapaxes(H, -1, -2))
    domain = params.get("domain", ((-10.0, 10.0), (-10.0, 10.0)))
    return dict(potential=V, gradient=grad, hessian=hess,
                domain=tuple(map(tuple, domain)),
                symmetries=tuple(params.get("symmetries", ())),
                decoupled=params.get("decoupled"))


_BUILDERS = {
    "henon-heiles": _henon_heiles,
    "frozen-hill": _frozen_hill,
    "stark": _stark,
    "euler-regularized": _euler,
    "chemical": _chemical,
    "saddle-center": _saddle_center,
    "harmonic": _harmonic,
    "custom": _custom,
}
ZOO_NAMES = tuple(_BUILDERS)

_DEFAULT_PARAMS = {
    "henon-heiles": {},
    "frozen-hill": {},
    "stark": {"eps": 0.5},
    "euler-regularized": {"mu": 0.25, "c": -0.5},
    "chemical": {"alpha": 1.0, "beta": 1.0},
    "saddle-center": {"a": -1.0, "b": 1.0},
    "harmonic": {"w1": 1.0, "w2": 1.0},
}


def _finite(params, key):
    if key not in params:
        raise ModelError(f"missing parameter {key!r}")
    try:
        val = float(params[key])
    except (TypeError, ValueError):
        raise ModelError(f"parameter {key!r} must be a number") from None
    if not math.isfinite(val):
        raise ModelError(f"parameter {key!r} must be finite")
    return val


def _positive(params, key):
    val = _finite(params, key)
    if val <= 0:
        raise ModelError(f"parameter {key!r} must be positive")
    return val


def build_model(name: str, params: Optional[Mapping] = None, domain=None) -> MechanicalModel:
    """Construct a model of the built-in family.

    Parameters
    ----------
    name : str
        One of ``henon-heiles``, ``frozen-hill``, ``stark`` (``eps``),
        ``euler-regularized`` (``mu``, ``c``), ``chemical`` (``alpha``,
        ``beta``), ``saddle-center`` (``a``, ``b``), ``harmonic`` (``w1``,
        ``w2``) or ``custom`` (``potential`` and optional ``gradient``,
        ``hessian`` callables).
    params : mapping, optional
        Missing parameters of the named zoo models take their defaults.
    domain : ((x1min, x1max), (x2min, x2max)), optional
        Override of the rectangle of validity.
    """
    if name not in _BUILDERS:
        raise ModelError(f"unknown model {name!r}; choose from {', '.join(ZOO_NAMES)}")
    merged = dict(_DEFAULT_PARAMS.get(name, {}))
    merged.update(params or {})
    parts = _BUILDERS[name](merged)
    if domain is not None:
        parts["domain"] = tuple(tuple(float(v) for v in d) for d in domain)
    stored = {k: v for k, v in merged.items() if name != "custom" or not callable(v)}
    return MechanicalModel(name=name, params=stored, **parts)


def product_model(f1: Factor, f2: Factor, name: str = "custom", params: Optional[Mapping] = None,
                  symmetries=()) -> MechanicalModel:
    """Decoupled model V(x1, x2) = V1(x1) + V2(x2) from two factors."""
    parts = _decoupled(f1, f2, symmetries=tuple(symmetries))
    return MechanicalModel(name=name, params=dict(params or {}), **parts)


# ---------------------------------------------------------------------------
# config files

def model_to_config(model: MechanicalModel) -> dict:
    if model.name not in _DEFAULT_PARAMS:
        raise ModelError(f"model {model.name!r} cannot be serialised")
    return {"name": model.name,
            "params": {k: float(v) for k, v in sorted(model.params.items())},
            "domain": [[float(a), float(b)] for a, b in model.domain]}


def model_from_config(config: Mapping) -> MechanicalModel:
    try:
        name = config["name"]
    except (KeyError, TypeError):
        raise ModelError("model config needs a 'name'") from None
    return build_model(name, config.get("params", {}), config.get("domain"))


def save_model(model: MechanicalModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_config(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> MechanicalModel:
    with open(path) as fh:
        return model_from_config(json.load(fh))


# ---------------------------------------------------------------------------
# capping and rescaling near a saddle

def cut_function(t, order: int = 0):
    """Cut function f and its derivatives.

    f vanishes on (-inf, 1], equals exp(-1/(t-1)) / (2-t)^2 on (1, 2) and is
    +inf from 2 on.  ``order`` selects f, f', f'' or f'''.
    """
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 1.0) & (t < 2.0)
    u = t[inside] - 1.0
    s = 2.0 - t[inside]
    f = np.exp(-1.0 / u) / s**2
    # f'/f = A with A = 1/u^2 + 2/s
    A = 1.0 / u**2 + 2.0 / s
    A1 = -2.0 / u**3 + 2.0 / s**2
    A2 = 6.0 / u**4 + 4.0 / s**3
    if order == 0:
        val = f
    elif order == 1:
        val = f * A
    elif order == 2:
        val = f * (A**2 + A1)
    elif order == 3:
        val = f * (A**3 + 3 * A * A1 + A2)
    else:
        raise ValueError("order must be 0..3")
    out[inside] = val
    if order == 0:
        out[t >= 2.0] = np.inf
    else:
        out[t >= 2.0] = np.nan
    return out


def check_cut_function(n: int = 10_000) -> dict:
    """Sampled verification of the cut-function invariants."""
    t = np.linspace(1.0, 2.0, n + 2)[1:-1]
    f3 = cut_function(t, 3)
    # exp(-1/u) underflows close to t = 1; positivity is checked where f > 0
    live = cut_function(t) > 0
    left = cut_function(np.linspace(-3.0, 1.0, 101))
    blow = float(cut_function(2.0 - 1e-6))
    ok = bool(np.all(f3[live] > 0) and np.all(f3 >= 0) and np.all(left == 0.0) and blow > 1e6)
    return {"ok": ok, "min_f3": float(f3[live].min()), "f_near_2": blow}


@dataclass(frozen=True)
class CapParams:
    """Capping data: saddle, rescale factor and capped side.

    ``side`` is +1 or -1 and selects the half-line of the hyperbolic
    principal axis on which the cap is placed.  Use
    :meth:`away_from` to orient it away from an interior point of K0.
    """

    saddle: object
    eps: float
    side: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ModelError("cap rescale factor eps must be positive")
        if self.side not in (1, -1):
            raise ModelError("cap side must be +1 or -1")

    @classmethod
    def away_from(cls, model, saddle, eps, point):
        R, _ = principal_axes(model.hess(saddle.location))
        s = float(np.dot(R[:, 0], np.asarray(point, dtype=float) - saddle.location))
        return cls(saddle, eps, -1 if s > 0 else 1)


def principal_axes(hess):
    """Orthonormal principal axes of a saddle Hessian.

    Returns
    -------
    R : (2, 2) ndarray
        Rotation (det +1) whose first column is the hyperbolic direction
        and second column the elliptic direction.
    (a, b) : tuple of float
        Principal curvatures with a < 0 < b.
    """
    evals, evecs = np.linalg.eigh(np.asarray(hess, dtype=float))
    if not evals[0] < 0 < evals[1]:
        raise ModelError("Hessian is not of saddle type")
    R = evecs.copy()
    # deterministic orientation
    for k in range(2):
        j = np.argmax(np.abs(R[:, k]))
        if R[j, k] < 0:
            R[:, k] *= -1
    if np.linalg.det(R) < 0:
        R[:, 1] *= -1
    return R, (float(evals[0]), float(evals[1]))


def _check_saddle(model, saddle, tol=1e-8):
    loc = np.asarray(saddle.location, dtype=float)
    g = np.linalg.norm(model.grad(loc))
    if g > tol:
        raise ModelError(f"point is not a critical point (|grad V| = {g:.2e})")
    if abs(float(model.V(loc)) - float(saddle.value)) > tol * max(1.0, abs(saddle.value)):
        raise ModelError("saddle value does not match the potential level")
    return principal_axes(model.hess(loc))


def cap_potential(model: MechanicalModel, cap: CapParams) -> MechanicalModel:
    """Add a cut-function wall beyond a saddle.

    In principal coordinates xi = R^T (x - v) the capped potential is
    V(x) + eps * f(side * xi_1 / sqrt(eps)).  It agrees with V on the side
    ``side * xi_1 <= sqrt(eps)`` and is +inf from ``2 sqrt(eps)`` on, so the
    sub-level set at the saddle value gains a small compact component.
    """
    check = check_cut_function()
    if not check["ok"]:
        raise ModelError("cut function fails its invariants")
    R, _ = _check_saddle(model, cap.saddle)
    v = np.asarray(cap.saddle.location, dtype=float)
    e = cap.side * R[:, 0]
    eps = float(cap.eps)
    r = math.sqrt(eps)
    V0, G0, H0 = model.potential, model.gradient, model.hessian

    def xi(x):
        return (np.asarray(x, dtype=float) - v) @ e / r

    def V(x):
        return V0(x) + eps * cut_function(xi(x))

    def grad(x):
        return G0(x) + r * cut_function(xi(x), 1)[..., None] * e

    def hess(x):
        return H0(x) + cut_function(xi(x), 2)[..., None, None] * np.outer(e, e)

    def region(x):
        inner = xi(x) < 2.0
        return inner if model.region is None else inner & model.region(x)

    return MechanicalModel(
        name=model.name + "+cap", params=dict(model.params, cap_eps=eps),
        potential=V, gradient=grad, hessian=hess, domain=model.domain,
        periodic=model.periodic, symmetries=(), decoupled=None, region=region,
        extras={"cap_axis": e, "cap_origin": v})


def cap_profile_critical_points(a: float, n: int = 20_001):
    """Critical points of t -> a t^2/2 + f(t) on (0, 2), with their kind.

    For a < 0 there is exactly one, a nondegenerate minimum beyond t = 1.
    """
    from scipy.optimize import brentq

    def d(t):
        return a * t + cut_function(t, 1)

    t = np.linspace(1e-9, 2.0 - 1e-9, n)
    dv = d(t)
    out = []
    for i in np.nonzero(np.sign(dv[:-1]) * np.sign(dv[1:]) < 0)[0]:
        root = brentq(lambda s: float(d(np.array(s))), t[i], t[i + 1], xtol=1e-15)
        curv = a + float(cut_function(np.array(root), 2))
        out.append((root, "minimum" if curv > 0 else "maximum" if curv < 0 else "degenerate"))
    return out


def rescale(model: MechanicalModel, saddle, eps: float) -> MechanicalModel:
    """Blow up a saddle neighbourhood by sqrt(eps).

    The returned model lives in principal coordinates xhat centred at the
    saddle, with x = v + sqrt(eps) R xhat, y = sqrt(eps) R yhat, and
    potential (V(x) - V(v)) / eps.  Hence eps * Hhat = H - V(v) pointwise
    and Hhat converges to |yhat|^2/2 + a xhat1^2/2 + b xhat2^2/2.
    """
    if not eps > 0:
        raise ModelError("rescale factor eps must be positive")
    R, (a, b) = _check_saddle(model, saddle)
    v = np.asarray(saddle.location, dtype=float)
    V0 = float(model.V(v))
    r = math.sqrt(eps)

    def to_x(xh):
        return v + r * np.asarray(xh, dtype=float) @ R.T

    def V(xh):
        return (model.potential(to_x(xh)) - V0) / eps

    def grad(xh):
        return model.gradient(to_x(xh)) @ R / r

    def hess(xh):
        return R.T @ model.hessian(to_x(xh)) @ R

    (l1, h1), (l2, h2) = model.domain
    half = max(h1 - l1, h2 - l2) / r
    return MechanicalModel(
        name=model.name + "~rescaled", params=dict(model.params, rescale_eps=eps),
        potential=V, gradient=grad, hessian=hess, domain=((-half, half), (-half, half)),
        symmetries=(), region=lambda xh: model.contains(to_x(xh)),
        extras={"origin": v, "axes": R, "sqrt_eps": r, "a": a, "b": b, "level": V0})


def to_rescaled(model_hat: MechanicalModel, w):
    """Map an original phase point to the rescaled coordinates of ``rescale``."""
    ex = model_hat.extras
    w = np.asarray(w, dtype=float)
    R, v, r = ex["axes"], ex["origin"], ex["sqrt_eps"]
    return np.concatenate([(w[..., :2] - v) @ R, w[..., 2:] @ R], axis=-1) / r


def from_rescaled(model_hat: MechanicalModel, wh):
    ex = model_hat.extras
    wh = np.asarray(wh, dtype=float)
    R, v, r = ex["axes"], ex["origin"], ex["sqrt_eps"]
    return np.concatenate([v + r * wh[..., :2] @ R.T, r * wh[..., 2:] @ R.T], axis=-1)


# ---------------------------------------------------------------------------
# Euler two-centre problem

def euler_regularized(mu: float, c: float) -> MechanicalModel:
    """Regularised Euler problem K = K1(u, p_u) + K2(v, p_v) at H_mu = c."""
    return build_model("euler-regularized", {"mu": mu, "c": c})


def elliptic_to_cartesian(u, v, p_u=None, p_v=None) -> PhaseState:
    """Elliptic coordinates to x = (cosh u cos v, sinh u sin v) and momenta.

    Without momenta only the position is meaningful (y is returned as zero).
    """
    x = np.array([math.cosh(u) * math.cos(v), math.sinh(u) * math.sin(v)])
    if p_u is None and p_v is None:
        return PhaseState(x, np.zeros(2))
    D = math.cosh(u) ** 2 - math.cos(v) ** 2
    if abs(D) < 1e-14:
        raise DomainError("collision point: momenta undefined")
    p_u = 0.0 if p_u is None else float(p_u)
    p_v = 0.0 if p_v is None else float(p_v)
    y1 = (p_u * math.sinh(u) * math.cos(v) - p_v * math.cosh(u) * math.sin(v)) / D
    y2 = (p_u * math.cosh(u) * math.sin(v) + p_v * math.sinh(u) * math.cos(v)) / D
    return PhaseState(x, np.array([y1, y2]))


def euler_hamiltonian(mu: float, state: PhaseState) -> float:
    """Cartesian two-centre energy with mass mu at (-1, 0) and 1-mu at (1, 0)."""
    x1, x2 = state.x
    rE = math.hypot(x1 + 1.0, x2)
    rS = math.hypot(x1 - 1.0, x2)
    return 0.5 * float(state.y @ state.y) - mu / rE - (1.0 - mu) / rS


def antipodal_quotient(w):
    """Representative of (u, v, p_u, p_v) ~ -(u, v, p_u, p_v) with v in [0, pi)."""
    w = np.array(w, dtype=float)
    w[1] = np.mod(w[1], 2 * math.pi)
    if w[1] >= math.pi:
        w = -w
        w[1] = np.mod(w[1], 2 * math.pi)
    return w
