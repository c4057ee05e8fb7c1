"""Vector fields, periodic orbits, and translated systems about a cycle.

The built-in model systems used throughout the package live here, together
with the machinery to shift coordinates onto a known periodic orbit and the
JSON problem-file ingestion.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "VectorField",
    "CycleOrbit",
    "TranslatedSystem",
    "ProblemSpec",
    "SchemaError",
    "UnknownSystemError",
    "MissingParameterError",
    "CycleResidualError",
    "builtin",
    "builtin_names",
    "translate_about_cycle",
    "parse_problem",
    "serialize_problem",
]

# Step for central-difference Jacobians: cbrt(eps) scaling is optimal for
# second-order differences of a smooth map.
_FD_CBRT_EPS = float(np.cbrt(np.finfo(float).eps))


class UnknownSystemError(KeyError):
    """Raised when a system id is not in the built-in registry."""


class MissingParameterError(ValueError):
    """Raised when a built-in system lacks a required parameter."""


class CycleResidualError(ValueError):
    """Raised when a claimed periodic orbit does not solve the field."""


class SchemaError(ValueError):
    """Problem-file validation failure, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class VectorField:
    """Right-hand side of an ODE with dimension, periodicity and Jacobian.

    Parameters
    ----------
    dim : int
        State-space dimension n.
    func : callable
        Map ``(t, x) -> ndarray`` of shape (n,).  Autonomous fields must
        still accept ``t`` and ignore it.
    jac : callable, optional
        Analytic Jacobian ``(t, x) -> ndarray`` of shape (n, n).  When
        omitted, central finite differences of ``func`` are used.
    period : float or None
        Period of the explicit time dependence; ``None`` marks an
        autonomous field.
    name : str
        Identifier for diagnostics.
    smoothness_order : int or None
        Recorded differentiability order of the field (metadata only; it
        is not machine-checkable).
    """

    dim: int
    func: Callable[[float, np.ndarray], np.ndarray]
    jac: Callable[[float, np.ndarray], np.ndarray] | None = None
    period: float | None = None
    name: str = "custom"
    smoothness_order: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.period is not None and self.period <= 0:
            raise ValueError("period must be positive")

    def eval(self, t: float, x) -> np.ndarray:
        return np.asarray(self.func(t, np.asarray(x, dtype=float)), dtype=float)

    def jacobian(self, t: float, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(t, x), dtype=float)
        return self.fd_jacobian(t, x)

    def fd_jacobian(self, t: float, x) -> np.ndarray:
        """Central-difference Jacobian with step cbrt(eps)*max(1, |x|)."""
        x = np.asarray(x, dtype=float)
        h = _FD_CBRT_EPS * max(1.0, float(np.linalg.norm(x)))
        cols = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = h
            cols.append((self.eval(t, x + e) - self.eval(t, x - e)) / (2 * h))
        return np.column_stack(cols)


@dataclass(frozen=True)
class CycleOrbit:
    """A periodic solution t -> gamma(t) with its time derivative."""

    period: float
    gamma: Callable[[float], np.ndarray]
    gamma_dot: Callable[[float], np.ndarray]

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")

    @staticmethod
    def from_samples(ts: Sequence[float], xs: np.ndarray, period: float) -> "CycleOrbit":
        """Build a cycle from one period of samples via periodic cubic splines.

        ``ts`` must be increasing and span exactly one period; the first and
        last state must agree (they are averaged to close the loop).
        """
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.diff(ts) > 0):
            raise ValueError("sample times must be strictly increasing")
        if abs((ts[-1] - ts[0]) - period) > 1e-9 * period:
            raise ValueError("samples must span exactly one period")
        closed = xs.copy()
        endpoint = 0.5 * (xs[0] + xs[-1])
        closed[0] = endpoint
        closed[-1] = endpoint
        spline = CubicSpline(ts, closed, axis=0, bc_type="periodic")
        dspline = spline.derivative()
        t0 = float(ts[0])

        def wrap(t):
            return t0 + (t - t0) % period

        return CycleOrbit(
            period=period,
            gamma=lambda t: np.asarray(spline(wrap(t)), dtype=float),
            gamma_dot=lambda t: np.asarray(dspline(wrap(t)), dtype=float),
        )

    def residual(self, field: VectorField, nsamples: int = 64) -> float:
        """Max defect ||gamma_dot(t) - f(t, gamma(t))|| over one period."""
        ts = np.linspace(0.0, self.period, nsamples, endpoint=False)
        return max(
            float(np.linalg.norm(self.gamma_dot(t) - field.eval(t, self.gamma(t))))
            for t in ts
        )


@dataclass(frozen=True)
class TranslatedSystem:
    """The system in coordinates y = x - gamma(t) about a cycle.

    ``A(t)`` is the linearization along the orbit and ``R(t, y)`` collects
    the purely nonlinear remainder, so R(t, 0) = 0 and D_y R(t, 0) = 0.
    """

    dim: int
    period: float
    A: Callable[[float], np.ndarray]
    R: Callable[[float, np.ndarray], np.ndarray]
    field: VectorField | None = None
    cycle: CycleOrbit | None = None


def translate_about_cycle(
    field: VectorField, cycle: CycleOrbit, tol: float = 1e-8
) -> TranslatedSystem:
    """Shift coordinates onto ``cycle`` and split off the linear part.

    Raises
    ------
    CycleResidualError
        If ``cycle`` fails to solve ``field`` within ``tol`` on a sample
        grid (the translation would then be meaningless).
    """
    res = cycle.residual(field, nsamples=64)
    if res > tol:
        raise CycleResidualError(
            f"orbit residual {res:.3e} exceeds {tol:.1e}; not a solution of the field"
        )

    def A(t: float) -> np.ndarray:
        return field.jacobian(t, cycle.gamma(t))

    def R(t: float, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        g = cycle.gamma(t)
        return field.eval(t, g + y) - field.eval(t, g) - A(t) @ y

    return TranslatedSystem(
        dim=field.dim, period=cycle.period, A=A, R=R, field=field, cycle=cycle
    )


# ----------------------------------------------------------------------------
# Built-in model systems
# ----------------------------------------------------------------------------

TWO_PI = 2.0 * math.pi


def _cylinder_field() -> VectorField:
    def f(t, x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array(
            [x[0] - x[1] - x[0] * r2, x[0] + x[1] - x[1] * r2, 0.0]
        )

    def jac(t, x):
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array(
            [
                [1.0 - r2 - 2.0 * x[0] * x[0], -1.0 - 2.0 * x[0] * x[1], 0.0],
                [1.0 - 2.0 * x[0] * x[1], 1.0 - r2 - 2.0 * x[1] * x[1], 0.0],
                [0.0, 0.0, 0.0],
            ]
        )

    return VectorField(dim=3, func=f, jac=jac, period=None, name="cylinder")


def _cylinder_cycle() -> CycleOrbit:
    return CycleOrbit(
        period=TWO_PI,
        gamma=lambda t: np.array([math.cos(t), math.sin(t), 0.0]),
        gamma_dot=lambda t: np.array([-math.sin(t), math.cos(t), 0.0]),
    )


def _mobius_field(sigma: float) -> VectorField:
    s = float(sigma)

    def f(t, x):
        x1, x2, x3 = x
        P = x1 * x1 + x2 * x2 - 1.0
        phi = 0.25 * s * (1.0 - x1) * P - 0.5 * x3 * (1.0 + s * x2)
        return np.array(
            [
                -x2 + x1 * phi,
                x1 + x2 * phi,
                0.25 * (1.0 - s * x2) * P + 0.5 * s * x3 * (1.0 + x1),
            ]
        )

    def jac(t, x):
        x1, x2, x3 = x
        P = x1 * x1 + x2 * x2 - 1.0
        phi = 0.25 * s * (1.0 - x1) * P - 0.5 * x3 * (1.0 + s * x2)
        phi1 = 0.25 * s * (-P + (1.0 - x1) * 2.0 * x1)
        phi2 = 0.25 * s * (1.0 - x1) * 2.0 * x2 - 0.5 * x3 * s
        phi3 = -0.5 * (1.0 + s * x2)
        return np.array(
            [
                [phi + x1 * phi1, -1.0 + x1 * phi2, x1 * phi3],
                [1.0 + x2 * phi1, phi + x2 * phi2, x2 * phi3],
                [
                    0.5 * (1.0 - s * x2) * x1 + 0.5 * s * x3,
                    -0.25 * s * P + 0.5 * (1.0 - s * x2) * x2,
                    0.5 * s * (1.0 + x1),
                ],
            ]
        )

    return VectorField(dim=3, func=f, jac=jac, period=None, name="mobius")


def _driven2d_field() -> VectorField:
    def f(t, x):
        return np.array([-x[0] ** 2, -x[1] + math.sin(t) * x[0] ** 2])

    def jac(t, x):
        return np.array([[-2.0 * x[0], 0.0], [2.0 * math.sin(t) * x[0], -1.0]])

    return VectorField(dim=2, func=f, jac=jac, period=TWO_PI, name="driven2d")


def _driven3d_field() -> VectorField:
    def f(t, x):
        return np.array(
            [
                x[0] * x[2] - x[0] ** 3,
                x[1] + (1.0 + math.sin(t)) * x[0] ** 2,
                0.0,
            ]
        )

    def jac(t, x):
        return np.array(
            [
                [x[2] - 3.0 * x[0] ** 2, 0.0, x[0]],
                [2.0 * (1.0 + math.sin(t)) * x[0], 1.0, 0.0],
                [0.0, 0.0, 0.0],
            ]
        )

    return VectorField(dim=3, func=f, jac=jac, period=TWO_PI, name="driven3d")


def _translated_cylinder_field() -> VectorField:
    # The cylinder system rewritten in coordinates about its unit-circle
    # orbit; kept as an explicit closed form so translate_about_cycle has an
    # independent oracle.
    def f(t, y):
        y1, y2, _ = y
        ct, st = math.cos(t), math.sin(t)
        f1 = (
            -2.0 * ct * ct * y1
            - (1.0 + 2.0 * st * ct) * y2
            - 3.0 * ct * ct * y1 * y1
            - 2.0 * st * y1 * y2
            - ct * y2 * y2
            - y1 ** 3
            - y1 * y2 * y2
        )
        f2 = (
            (1.0 - 2.0 * st * ct) * y1
            - 2.0 * st * st * y2
            - st * y1 * y1
            - 2.0 * ct * y1 * y2
            - 3.0 * st * st * y2 * y2
            - y1 * y1 * y2
            - y2 ** 3
        )
        return np.array([f1, f2, 0.0])

    def jac(t, y):
        y1, y2, _ = y
        ct, st = math.cos(t), math.sin(t)
        return np.array(
            [
                [
                    -2.0 * ct * ct - 6.0 * ct * ct * y1 - 2.0 * st * y2
                    - 3.0 * y1 * y1 - y2 * y2,
                    -(1.0 + 2.0 * st * ct) - 2.0 * st * y1 - 2.0 * ct * y2
                    - 2.0 * y1 * y2,
                    0.0,
                ],
                [
                    (1.0 - 2.0 * st * ct) - 2.0 * st * y1 - 2.0 * ct * y2
                    - 2.0 * y1 * y2,
                    -2.0 * st * st - 2.0 * ct * y1 - 6.0 * st * st * y2
                    - y1 * y1 - 3.0 * y2 * y2,
                    0.0,
                ],
                [0.0, 0.0, 0.0],
            ]
        )

    return VectorField(dim=3, func=f, jac=jac, period=TWO_PI, name="translated-cylinder")


def _cylinder_eigenbasis_field() -> VectorField:
    # Cylinder dynamics in the rotating eigenbasis; autonomous cubic field.
    def f(t, z):
        g = z[0] * z[0] + z[1] * z[1] + 2.0 * z[1]
        return np.array([-z[0] * g, -(z[1] + 1.0) * g, 0.0])

    def jac(t, z):
        g = z[0] * z[0] + z[1] * z[1] + 2.0 * z[1]
        return np.array(
            [
                [-g - 2.0 * z[0] * z[0], -z[0] * (2.0 * z[1] + 2.0), 0.0],
                [-(z[1] + 1.0) * 2.0 * z[0], -g - (z[1] + 1.0) * (2.0 * z[1] + 2.0), 0.0],
                [0.0, 0.0, 0.0],
            ]
        )

    return VectorField(dim=3, func=f, jac=jac, period=None, name="cylinder-eigenbasis")


def _zero_cycle(dim: int) -> CycleOrbit:
    zero = np.zeros(dim)
    return CycleOrbit(
        period=TWO_PI, gamma=lambda t: zero.copy(), gamma_dot=lambda t: zero.copy()
    )


_BUILTIN_PARAMS: dict[str, tuple[str, ...]] = {
    "cylinder": (),
    "mobius": ("sigma",),
    "driven2d": (),
    "driven3d": (),
    "translated-cylinder": (),
    "cylinder-eigenbasis": (),
}


def builtin_names() -> list[str]:
    return sorted(_BUILTIN_PARAMS)


def builtin(name: str, params: dict | None = None) -> tuple[VectorField, CycleOrbit | None]:
    """Return a built-in system and its known periodic orbit.

    The cylinder and Moebius systems carry the explicit unit-circle orbit;
    the driven systems and the eigenbasis form are already written about
    their orbit, so they return the zero solution as the attached cycle.
    """
    params = dict(params or {})
    if name not in _BUILTIN_PARAMS:
        raise UnknownSystemError(name)
    for key in _BUILTIN_PARAMS[name]:
        if key not in params:
            raise MissingParameterError(f"system '{name}' requires parameter '{key}'")
    for key in params:
        if key not in _BUILTIN_PARAMS[name]:
            raise SchemaError(f"params.{key}", f"unknown parameter for system '{name}'")

    if name == "cylinder":
        return _cylinder_field(), _cylinder_cycle()
    if name == "mobius":
        return _mobius_field(params["sigma"]), _cylinder_cycle()
    if name == "driven2d":
        return _driven2d_field(), _zero_cycle(2)
    if name == "driven3d":
        return _driven3d_field(), _zero_cycle(3)
    if name == "translated-cylinder":
        return _translated_cylinder_field(), _zero_cycle(3)
    if name == "cylinder-eigenbasis":
        return _cylinder_eigenbasis_field(), _zero_cycle(3)
    raise UnknownSystemError(name)  # pragma: no cover


# ----------------------------------------------------------------------------
# Problem files
# ----------------------------------------------------------------------------

_INTEGRATOR_DEFAULTS = {
    "method": "adaptive-dp54",
    "h": 1e-3,
    "atol": 1e-10,
    "rtol": 1e-10,
}
_TIME_MODES = ("const", "sin", "cos")


@dataclass(frozen=True)
class InlineTerm:
    """One monomial term c * x^powers * {1, sin(k w t), cos(k w t)}."""

    coef: float
    powers: tuple[int, ...]
    time: str = "const"
    freq: int = 1


@dataclass(frozen=True)
class InlineField:
    """Polynomial/trigonometric field given as per-component term lists."""

    dim: int
    period: float | None
    components: tuple[tuple[InlineTerm, ...], ...]

    def to_vector_field(self) -> VectorField:
        omega = TWO_PI / self.period if self.period else 0.0

        def tfactor(term: InlineTerm, t: float) -> float:
            if term.time == "sin":
                return math.sin(term.freq * omega * t)
            if term.time == "cos":
                return math.cos(term.freq * omega * t)
            return 1.0

        def f(t, x):
            out = np.zeros(self.dim)
            for i, terms in enumerate(self.components):
                acc = 0.0
                for term in terms:
                    mono = tfactor(term, t) * term.coef
                    for xv, p in zip(x, term.powers):
                        if p:
                            mono *= xv ** p
                    acc += mono
                out[i] = acc
            return out

        def jac(t, x):
            J = np.zeros((self.dim, self.dim))
            for i, terms in enumerate(self.components):
                for term in terms:
                    base = tfactor(term, t) * term.coef
                    for j, pj in enumerate(term.powers):
                        if pj == 0:
                            continue
                        d = base * pj
                        for k, (xv, p) in enumerate(zip(x, term.powers)):
                            if k == j:
                                if p > 1:
                                    d *= xv ** (p - 1)
                            elif p:
                                d *= xv ** p
                        J[i, j] += d
            return J

        return VectorField(
            dim=self.dim, func=f, jac=jac, period=self.period, name="inline"
        )


@dataclass(frozen=True)
class ProblemSpec:
    """Validated analysis request: a system plus integrator/analysis settings."""

    system: str | InlineField
    params: dict = dc_field(default_factory=dict)
    integrator: dict = dc_field(default_factory=lambda: dict(_INTEGRATOR_DEFAULTS))
    analyses: tuple[str, ...] = ()

    def build(self) -> tuple[VectorField, CycleOrbit | None]:
        if isinstance(self.system, InlineField):
            return self.system.to_vector_field(), None
        return builtin(self.system, self.params)

    def canonical_dict(self) -> dict:
        if isinstance(self.system, InlineField):
            system: object = {
                "dim": self.system.dim,
                "period": self.system.period,
                "components": [
                    [
                        {
                            "coef": t.coef,
                            "powers": list(t.powers),
                            "time": t.time,
                            "freq": t.freq,
                        }
                        for t in comp
                    ]
                    for comp in self.system.components
                ],
            }
        else:
            system = self.system
        return {
            "system": system,
            "params": dict(sorted(self.params.items())),
            "integrator": {k: self.integrator[k] for k in sorted(self.integrator)},
            "analyses": list(self.analyses),
        }


def _require_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else key, "unknown key")


def _parse_inline(obj: dict, path: str) -> InlineField:
    _require_keys(obj, {"dim", "period", "components"}, path)
    for key in ("dim", "components"):
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "required for inline systems")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"{path}.dim", "must be a positive integer")
    period = obj.get("period")
    if period is not None:
        if not isinstance(period, (int, float)) or period <= 0:
            raise SchemaError(f"{path}.period", "must be a positive number or null")
        period = float(period)
    comps = obj["components"]
    if not isinstance(comps, list) or len(comps) != dim:
        raise SchemaError(f"{path}.components", f"must list exactly {dim} components")
    parsed = []
    for i, comp in enumerate(comps):
        if not isinstance(comp, list):
            raise SchemaError(f"{path}.components[{i}]", "must be a list of terms")
        terms = []
        for j, term in enumerate(comp):
            tpath = f"{path}.components[{i}][{j}]"
            if not isinstance(term, dict):
                raise SchemaError(tpath, "must be an object")
            _require_keys(term, {"coef", "powers", "time", "freq"}, tpath)
            if "coef" not in term or "powers" not in term:
                raise SchemaError(tpath, "needs 'coef' and 'powers'")
            powers = term["powers"]
            if (
                not isinstance(powers, list)
                or len(powers) != dim
                or any(not isinstance(p, int) or p < 0 for p in powers)
            ):
                raise SchemaError(
                    f"{tpath}.powers", f"must list {dim} nonnegative integers"
                )
            time = term.get("time", "const")
            if time not in _TIME_MODES:
                raise SchemaError(f"{tpath}.time", f"must be one of {_TIME_MODES}")
            if time != "const" and period is None:
                raise SchemaError(f"{tpath}.time", "time dependence needs a period")
            freq = term.get("freq", 1)
            if not isinstance(freq, int) or freq < 1:
                raise SchemaError(f"{tpath}.freq", "must be a positive integer")
            terms.append(
                InlineTerm(
                    coef=float(term["coef"]),
                    powers=tuple(powers),
                    time=time,
                    freq=freq,
                )
            )
        parsed.append(tuple(terms))
    return InlineField(dim=dim, period=period, components=tuple(parsed))


def parse_problem(text: str | dict) -> ProblemSpec:
    """Parse and validate a JSON problem document.

    Unknown keys are rejected with the offending field path; omitted
    integrator settings receive defaults.
    """
    if isinstance(text, str):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc
    else:
        obj = text
    if not isinstance(obj, dict):
        raise SchemaError("$", "document must be a JSON object")
    _require_keys(obj, {"system", "params", "integrator", "analyses"}, "")
    if "system" not in obj:
        raise SchemaError("system", "required")

    system = obj["system"]
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params", "must be an object")

    if isinstance(system, dict):
        system_val: str | InlineField = _parse_inline(system, "system")
    elif isinstance(system, str):
        if system not in _BUILTIN_PARAMS:
            raise UnknownSystemError(system)
        for key in _BUILTIN_PARAMS[system]:
            if key not in params:
                raise MissingParameterError(
                    f"system '{system}' requires parameter '{key}'"
                )
        for key in params:
            if key not in _BUILTIN_PARAMS[system]:
                raise SchemaError(f"params.{key}", f"unknown parameter for '{system}'")
        system_val = system
    else:
        raise SchemaError("system", "must be a system id or inline definition")

    integ = dict(_INTEGRATOR_DEFAULTS)
    if "integrator" in obj:
        user = obj["integrator"]
        if not isinstance(user, dict):
            raise SchemaError("integrator", "must be an object")
        _require_keys(user, set(_INTEGRATOR_DEFAULTS), "integrator")
        integ.update(user)
    if integ["method"] not in ("adaptive-dp54", "fixed-rk4"):
        raise SchemaError("integrator.method", "must be adaptive-dp54 or fixed-rk4")
    for key in ("h", "atol", "rtol"):
        if not isinstance(integ[key], (int, float)) or integ[key] <= 0:
            raise SchemaError(f"integrator.{key}", "must be positive")
        integ[key] = float(integ[key])

    analyses = obj.get("analyses", [])
    if not isinstance(analyses, list) or any(not isinstance(a, str) for a in analyses):
        raise SchemaError("analyses", "must be a list of strings")

    return ProblemSpec(
        system=system_val,
        params={k: float(v) for k, v in params.items()},
        integrator=integ,
        analyses=tuple(analyses),
    )


def serialize_problem(spec: ProblemSpec) -> str:
    """Canonical JSON form; parse(serialize(spec)) == spec."""
    return json.dumps(spec.canonical_dict(), indent=2, sort_keys=False)
