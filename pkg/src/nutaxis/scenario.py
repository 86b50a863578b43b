"""Scenario definitions: closed-form data families, validation and parsing.

A scenario pins everything a run needs: domain, mesh, horizon, the initial
density u0, a separable nutrient source f(x, t) = g(x) * s(t), the epsilon
schedule for the regularized family, the snapshot cadence and the tracked
Lebesgue exponents.  Every family has a closed form, so suprema and masses
used by the estimate checks are computable exactly rather than sampled.

Scenario files are JSON documents whose keys match the field names here;
parse errors name the offending key.  Runs are fully deterministic: nothing
below draws random numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import Tuple

import numpy as np

from .grid import Grid


class ScenarioError(ValueError):
    """A scenario document is malformed or violates a model hypothesis."""


# ---------------------------------------------------------------------------
# initial-density families (all nonnegative and Lipschitz by construction)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantInitial:
    amplitude: float

    def values(self, grid: Grid) -> np.ndarray:
        return np.full(grid.n, self.amplitude)


@dataclass(frozen=True)
class PlateauInitial:
    """Compactly supported plateau with cosine ramps inside [x_left, x_right].

    The ramps occupy a quarter of the plateau width on each side, keeping the
    profile Lipschitz (the model's regularity assumption on u0) while the
    support stays exactly [x_left, x_right].
    """

    amplitude: float
    x_left: float
    x_right: float

    def values(self, grid: Grid) -> np.ndarray:
        x = grid.centers
        ramp = 0.25 * (self.x_right - self.x_left)
        y = np.minimum(x - self.x_left, self.x_right - x) / ramp
        y = np.clip(y, 0.0, 1.0)
        return self.amplitude * 0.5 * (1.0 - np.cos(np.pi * y))


@dataclass(frozen=True)
class ClippedGaussianInitial:
    """Gaussian bump shifted and clipped to vanish beyond three widths."""

    amplitude: float
    center: float
    width: float

    def values(self, grid: Grid) -> np.ndarray:
        y = (grid.centers - self.center) / self.width
        floor = np.exp(-9.0)
        raw = np.exp(-np.clip(y * y, 0.0, 9.0)) - floor
        return self.amplitude * np.maximum(raw, 0.0) / (1.0 - floor)


# ---------------------------------------------------------------------------
# separable source f(x, t) = g(x) * s(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    amplitude: float

    def values(self, grid: Grid) -> np.ndarray:
        return np.full(grid.n, self.amplitude)

    def supremum(self, length: float) -> float:
        return self.amplitude

    @property
    def vanishes(self) -> bool:
        return self.amplitude == 0.0


@dataclass(frozen=True)
class OnePlusCosineProfile:
    """g(x) = amplitude * (1 + cos(mode * pi * x / L)), nonnegative for any mode."""

    amplitude: float
    mode: int = 1

    def values(self, grid: Grid) -> np.ndarray:
        k = self.mode * np.pi / grid.length
        return self.amplitude * (1.0 + np.cos(k * grid.centers))

    def supremum(self, length: float) -> float:
        return 2.0 * self.amplitude

    @property
    def vanishes(self) -> bool:
        return self.amplitude == 0.0


@dataclass(frozen=True)
class BumpProfile:
    """Smooth Gaussian bump g(x) = amplitude * exp(-((x - center)/width)^2)."""

    amplitude: float
    center: float
    width: float

    def values(self, grid: Grid) -> np.ndarray:
        y = (grid.centers - self.center) / self.width
        return self.amplitude * np.exp(-y * y)

    def supremum(self, length: float) -> float:
        return self.amplitude

    @property
    def vanishes(self) -> bool:
        return self.amplitude == 0.0


@dataclass(frozen=True)
class ConstantEnvelope:
    value: float

    def at(self, t: float) -> float:
        return self.value

    def supremum_to(self, t: float) -> float:
        return self.value

    def kernel_encoding(self) -> Tuple[int, float, float]:
        return 0, self.value, 0.0

    @property
    def vanishes(self) -> bool:
        return self.value == 0.0


@dataclass(frozen=True)
class LinearRampEnvelope:
    start: float
    rate: float

    def at(self, t: float) -> float:
        return self.start + self.rate * t

    def supremum_to(self, t: float) -> float:
        return max(self.start, self.start + self.rate * t)

    def kernel_encoding(self) -> Tuple[int, float, float]:
        return 1, self.start, self.rate

    @property
    def vanishes(self) -> bool:
        return self.start == 0.0 and self.rate == 0.0


@dataclass(frozen=True)
class ExponentialDecayEnvelope:
    rate: float

    def at(self, t: float) -> float:
        return float(np.exp(-self.rate * t))

    def supremum_to(self, t: float) -> float:
        return 1.0

    def kernel_encoding(self) -> Tuple[int, float, float]:
        return 2, 1.0, self.rate

    @property
    def vanishes(self) -> bool:
        return False


@dataclass(frozen=True)
class SeparableSource:
    """Nutrient source f(x, t) = g(x) * s(t) with closed-form suprema."""

    space: object
    time: object

    def values(self, grid: Grid, t: float) -> np.ndarray:
        return self.space.values(grid) * self.time.at(t)

    def space_values(self, grid: Grid) -> np.ndarray:
        return self.space.values(grid)

    def kernel_envelope(self) -> Tuple[int, float, float]:
        return self.time.kernel_encoding()

    def supremum_to(self, t: float, length: float) -> float:
        """Exact sup of f over the space-time slab up to time t."""
        return self.space.supremum(length) * self.time.supremum_to(t)

    @property
    def vanishes(self) -> bool:
        return self.space.vanishes or self.time.vanishes


# ---------------------------------------------------------------------------
# the scenario itself
# ---------------------------------------------------------------------------

_U0_KINDS = {
    "constant": (ConstantInitial, ("amplitude",)),
    "plateau": (PlateauInitial, ("amplitude", "x_left", "x_right")),
    "gaussian_clipped": (ClippedGaussianInitial, ("amplitude", "center", "width")),
}

_SPACE_KINDS = {
    "constant": (ConstantProfile, ("amplitude",)),
    "one_plus_cosine": (OnePlusCosineProfile, ("amplitude", "mode")),
    "bump": (BumpProfile, ("amplitude", "center", "width")),
}

_TIME_KINDS = {
    "constant": (ConstantEnvelope, ("value",)),
    "linear_ramp": (LinearRampEnvelope, ("start", "rate")),
    "exponential_decay": (ExponentialDecayEnvelope, ("rate",)),
}


@dataclass(frozen=True)
class Scenario:
    L: float
    n: int
    t_end: float
    u0_spec: object
    f_spec: SeparableSource
    eps_schedule: Tuple[float, int, float] = (0.4, 4, 0.5)
    snapshot_count: int = 65
    lp_exponents: Tuple[float, ...] = (2.0, 3.0)

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0.0):
            raise ScenarioError(f"'L' must be positive, got {self.L}")
        if int(self.n) != self.n or self.n < 4:
            raise ScenarioError(f"'n' must be an integer >= 4, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not (np.isfinite(self.t_end) and self.t_end > 0.0):
            raise ScenarioError(f"'t_end' must be positive, got {self.t_end}")
        self._validate_u0()
        self._validate_source()
        eps0, count, ratio = self.eps_schedule
        if not (0.0 < eps0 < 1.0):
            raise ScenarioError(
                f"'eps_schedule' start must lie in (0, 1), got {eps0}"
            )
        if int(count) != count or count < 1:
            raise ScenarioError(
                f"'eps_schedule' count must be a positive integer, got {count}"
            )
        if not (0.0 < ratio < 1.0):
            raise ScenarioError(
                "'eps_schedule' ratio must lie in (0, 1) so the schedule "
                f"strictly decreases, got {ratio}"
            )
        object.__setattr__(
            self, "eps_schedule", (float(eps0), int(count), float(ratio))
        )
        if int(self.snapshot_count) != self.snapshot_count or self.snapshot_count < 2:
            raise ScenarioError(
                f"'snapshot_count' must be an integer >= 2, got {self.snapshot_count}"
            )
        object.__setattr__(self, "snapshot_count", int(self.snapshot_count))
        exps = tuple(float(p) for p in self.lp_exponents)
        if not exps or any(not np.isfinite(p) or p <= 1.0 for p in exps):
            raise ScenarioError(
                f"'lp_exponents' must all exceed 1, got {self.lp_exponents}"
            )
        object.__setattr__(self, "lp_exponents", exps)

    def _validate_u0(self):
        spec = self.u0_spec
        if isinstance(spec, (ConstantInitial, PlateauInitial, ClippedGaussianInitial)):
            if spec.amplitude < 0.0:
                raise ScenarioError(
                    "'u0_spec' amplitude must be nonnegative: the model assumes "
                    f"a nonnegative initial density, got {spec.amplitude}"
                )
        else:
            raise ScenarioError(f"'u0_spec' has unknown type {type(spec).__name__}")
        if isinstance(spec, PlateauInitial):
            if not (0.0 <= spec.x_left < spec.x_right <= self.L):
                raise ScenarioError(
                    "'u0_spec' plateau needs 0 <= x_left < x_right <= L, got "
                    f"[{spec.x_left}, {spec.x_right}] on L={self.L}"
                )
        if isinstance(spec, ClippedGaussianInitial) and spec.width <= 0.0:
            raise ScenarioError("'u0_spec' width must be positive")

    def _validate_source(self):
        src = self.f_spec
        if not isinstance(src, SeparableSource):
            raise ScenarioError("'f_spec' must be a separable source g(x)*s(t)")
        if isinstance(src.space, BumpProfile) and src.space.width <= 0.0:
            raise ScenarioError("'f_spec' bump width must be positive")
        if isinstance(src.space, OnePlusCosineProfile):
            if int(src.space.mode) != src.space.mode or src.space.mode < 1:
                raise ScenarioError("'f_spec' cosine mode must be a positive integer")
        amp = getattr(src.space, "amplitude", None)
        if amp is not None and amp < 0.0:
            raise ScenarioError("'f_spec' amplitude must be nonnegative")
        if isinstance(src.time, ConstantEnvelope) and src.time.value < 0.0:
            raise ScenarioError("'f_spec' time value must be nonnegative")
        if isinstance(src.time, ExponentialDecayEnvelope) and src.time.rate < 0.0:
            raise ScenarioError("'f_spec' decay rate must be nonnegative")
        if isinstance(src.time, LinearRampEnvelope):
            lo = min(src.time.at(0.0), src.time.at(self.t_end))
            if lo < 0.0:
                raise ScenarioError(
                    "'f_spec' ramp goes negative on [0, t_end]; the model "
                    "assumes a nonnegative source"
                )
        if src.vanishes:
            raise ScenarioError(
                "'f_spec' must not be identically zero: the model assumes a "
                "nonnegative nutrient source with positive supply"
            )

    # -- derived accessors ---------------------------------------------------

    def grid(self) -> Grid:
        return Grid(self.L, self.n)

    def eps_values(self) -> Tuple[float, ...]:
        eps0, count, ratio = self.eps_schedule
        return tuple(eps0 * ratio**j for j in range(count))

    def initial_values(self, grid: Grid) -> np.ndarray:
        return np.asarray(self.u0_spec.values(grid), dtype=float)

    def source_supremum_to(self, t: float) -> float:
        return self.f_spec.supremum_to(t, self.L)


# ---------------------------------------------------------------------------
# parsing and serialization
# ---------------------------------------------------------------------------

def _build_spec(table, entry, key):
    if not isinstance(entry, dict):
        raise ScenarioError(f"'{key}' must be an object, got {type(entry).__name__}")
    kind = entry.get("kind")
    if kind not in table:
        raise ScenarioError(
            f"'{key}' kind must be one of {sorted(table)}, got {kind!r}"
        )
    cls, fields = table[kind]
    extra = set(entry) - {"kind", *fields}
    if extra:
        raise ScenarioError(f"'{key}' has unknown keys {sorted(extra)}")
    missing = [f for f in fields if f not in entry]
    if missing:
        raise ScenarioError(f"'{key}' ({kind}) is missing keys {missing}")
    return cls(**{f: entry[f] for f in fields})


_REQUIRED = ("L", "n", "t_end", "u0_spec", "f_spec")
_OPTIONAL = ("eps_schedule", "snapshot_count", "lp_exponents")


def parse_scenario(text: str) -> Scenario:
    """Parse a JSON scenario document; errors name the offending key."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"scenario document is not valid JSON: {err}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a JSON object")
    unknown = set(doc) - set(_REQUIRED) - set(_OPTIONAL)
    if unknown:
        raise ScenarioError(f"scenario has unknown keys {sorted(unknown)}")
    for key in _REQUIRED:
        if key not in doc:
            raise ScenarioError(f"scenario is missing required key '{key}'")

    u0 = _build_spec(_U0_KINDS, doc["u0_spec"], "u0_spec")

    f_entry = doc["f_spec"]
    if not isinstance(f_entry, dict) or "space" not in f_entry or "time" not in f_entry:
        raise ScenarioError("'f_spec' must be an object with 'space' and 'time'")
    extra = set(f_entry) - {"space", "time"}
    if extra:
        raise ScenarioError(f"'f_spec' has unknown keys {sorted(extra)}")
    f_spec = SeparableSource(
        space=_build_spec(_SPACE_KINDS, f_entry["space"], "f_spec.space"),
        time=_build_spec(_TIME_KINDS, f_entry["time"], "f_spec.time"),
    )

    kwargs = {}
    if "eps_schedule" in doc:
        sched = doc["eps_schedule"]
        if not isinstance(sched, dict):
            raise ScenarioError("'eps_schedule' must be an object")
        extra = set(sched) - {"eps0", "count", "ratio"}
        if extra:
            raise ScenarioError(f"'eps_schedule' has unknown keys {sorted(extra)}")
        missing = [k for k in ("eps0", "count", "ratio") if k not in sched]
        if missing:
            raise ScenarioError(f"'eps_schedule' is missing keys {missing}")
        kwargs["eps_schedule"] = (sched["eps0"], sched["count"], sched["ratio"])
    if "snapshot_count" in doc:
        kwargs["snapshot_count"] = doc["snapshot_count"]
    if "lp_exponents" in doc:
        exps = doc["lp_exponents"]
        if not isinstance(exps, list) or not exps:
            raise ScenarioError("'lp_exponents' must be a nonempty list")
        kwargs["lp_exponents"] = tuple(exps)

    return Scenario(
        L=doc["L"],
        n=doc["n"],
        t_end=doc["t_end"],
        u0_spec=u0,
        f_spec=f_spec,
        **kwargs,
    )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _spec_to_dict(spec, table) -> dict:
    for kind, (cls, fields) in table.items():
        if isinstance(spec, cls):
            out = {"kind": kind}
            out.update({f: getattr(spec, f) for f in fields})
            return out
    raise ScenarioError(f"cannot serialize spec of type {type(spec).__name__}")


def scenario_to_dict(s: Scenario) -> dict:
    eps0, count, ratio = s.eps_schedule
    return {
        "L": s.L,
        "n": s.n,
        "t_end": s.t_end,
        "u0_spec": _spec_to_dict(s.u0_spec, _U0_KINDS),
        "f_spec": {
            "space": _spec_to_dict(s.f_spec.space, _SPACE_KINDS),
            "time": _spec_to_dict(s.f_spec.time, _TIME_KINDS),
        },
        "eps_schedule": {"eps0": eps0, "count": count, "ratio": ratio},
        "snapshot_count": s.snapshot_count,
        "lp_exponents": list(s.lp_exponents),
    }


def scenario_to_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True)
