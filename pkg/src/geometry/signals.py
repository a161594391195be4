"""
Time signals used as constraint offsets h(t), references and external forcing

Every signal is vector-valued, right-continuous, and can report the times in an
interval where it jumps so the integrator can place its jump map exactly there.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import List, Literal, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# relative snap used when a grid time lands on a breakpoint up to round-off
SNAP_RTOL = 1e-10

TermFn = Literal["const", "sin", "floor", "ramp"]


def _snap(s: float) -> float:
    return SNAP_RTOL * max(1.0, abs(s))


class Signal(ABC):
    """A right-continuous vector signal of time"""

    dim: int

    @abstractmethod
    def __call__(self, t: float) -> np.ndarray:
        ...

    def left_limit(self, t: float) -> np.ndarray:
        """Value just before t (equal to the value when t is not a breakpoint)"""
        return self(t)

    def derivative(self, t: float) -> np.ndarray:
        """Right derivative, zero across jumps"""
        return np.zeros(self.dim)

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        """Jump times in the half-open interval (t0, t1]"""
        return []

    @property
    def is_continuous(self) -> bool:
        return True


@dataclass(frozen=True)
class ConstantSignal(Signal):
    value: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "value", np.atleast_1d(np.asarray(self.value, dtype=float)))

    @property
    def dim(self) -> int:
        return self.value.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.value.copy()


@dataclass(frozen=True)
class PiecewiseLinearSignal(Signal):
    """Linear interpolation between breakpoints, held constant outside them"""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if times.ndim != 1 or len(times) < 1 or len(times) != values.shape[0]:
            raise ValueError("piecewise_linear needs one value row per breakpoint time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("piecewise_linear times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __call__(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.values[:, j]) for j in range(self.dim)])

    def derivative(self, t: float) -> np.ndarray:
        if len(self.times) < 2 or t < self.times[0] or t >= self.times[-1]:
            return np.zeros(self.dim)
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        dt = self.times[i + 1] - self.times[i]
        return (self.values[i + 1] - self.values[i]) / dt


@dataclass(frozen=True)
class StaircaseSignal(Signal):
    """Piecewise constant: values[i] on [times[i], times[i+1]), values[0] before times[0]"""
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if times.ndim != 1 or len(times) < 1 or len(times) != values.shape[0]:
            raise ValueError("staircase needs one value row per breakpoint time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("staircase times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def _index(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t + _snap(t), side="right")) - 1
        return max(i, 0)

    def __call__(self, t: float) -> np.ndarray:
        return self.values[self._index(t)].copy()

    def left_limit(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.times, t - _snap(t), side="right")) - 1
        return self.values[max(i, 0)].copy()

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        jumps = []
        for i in range(1, len(self.times)):
            if t0 < self.times[i] <= t1 and not np.array_equal(self.values[i], self.values[i - 1]):
                jumps.append(float(self.times[i]))
        return jumps

    @property
    def is_continuous(self) -> bool:
        return len(self.times) < 2 or bool(np.all(np.diff(self.values, axis=0) == 0))


@dataclass(frozen=True)
class Term:
    """One summand gain * fn(rate * t + phase)"""
    fn: TermFn
    gain: float = 1.0
    rate: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if self.fn not in ("const", "sin", "floor", "ramp"):
            raise ValueError(f"Unknown builtin signal: {self.fn}")
        if self.fn == "floor" and self.rate <= 0:
            # a decreasing argument would make floor left-continuous
            raise ValueError("floor terms need a positive rate")

    def _arg(self, t: float) -> float:
        return self.rate * t + self.phase

    def value(self, t: float) -> float:
        s = self._arg(t)
        if self.fn == "const":
            return self.gain
        if self.fn == "sin":
            return self.gain * math.sin(s)
        if self.fn == "ramp":
            return self.gain * max(s, 0.0)
        return self.gain * math.floor(s + _snap(s))

    def left_value(self, t: float) -> float:
        if self.fn != "floor":
            return self.value(t)
        s = self._arg(t)
        k = round(s)
        if abs(s - k) <= _snap(s):
            return self.gain * (k - 1)
        return self.gain * math.floor(s)

    def slope(self, t: float) -> float:
        s = self._arg(t)
        if self.fn == "sin":
            return self.gain * self.rate * math.cos(s)
        if self.fn == "ramp":
            return self.gain * self.rate if s >= 0 else 0.0
        return 0.0

    def jumps(self, t0: float, t1: float) -> List[float]:
        if self.fn != "floor" or self.gain == 0:
            return []
        s0, s1 = self._arg(t0), self._arg(t1)
        first = math.floor(s0 + _snap(s0)) + 1
        last = math.floor(s1 + _snap(s1))
        return [(k - self.phase) / self.rate for k in range(first, last + 1)]


@dataclass(frozen=True)
class ExpressionSignal(Signal):
    """Each component is a sum of builtin terms (sin, floor, ramp, const)"""
    components: Sequence[Sequence[Term]]

    def __post_init__(self):
        comps = tuple(tuple(c) for c in self.components)
        if not comps:
            raise ValueError("expression signal needs at least one component")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, t: float) -> np.ndarray:
        return np.array([sum(term.value(t) for term in comp) for comp in self.components])

    def left_limit(self, t: float) -> np.ndarray:
        return np.array([sum(term.left_value(t) for term in comp) for comp in self.components])

    def derivative(self, t: float) -> np.ndarray:
        return np.array([sum(term.slope(t) for term in comp) for comp in self.components])

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        times = set()
        for comp in self.components:
            for term in comp:
                times.update(term.jumps(t0, t1))
        return sorted(times)

    @property
    def is_continuous(self) -> bool:
        return not any(term.fn == "floor" and term.gain != 0 for comp in self.components for term in comp)


@dataclass(frozen=True)
class StackedSignal(Signal):
    """Concatenation of several signals"""
    parts: Sequence[Signal] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def __call__(self, t: float) -> np.ndarray:
        return np.concatenate([p(t) for p in self.parts]) if self.parts else np.zeros(0)

    def left_limit(self, t: float) -> np.ndarray:
        return np.concatenate([p.left_limit(t) for p in self.parts]) if self.parts else np.zeros(0)

    def derivative(self, t: float) -> np.ndarray:
        return np.concatenate([p.derivative(t) for p in self.parts]) if self.parts else np.zeros(0)

    def breakpoints(self, t0: float, t1: float) -> List[float]:
        times = set()
        for p in self.parts:
            times.update(p.breakpoints(t0, t1))
        return sorted(times)

    @property
    def is_continuous(self) -> bool:
        return all(p.is_continuous for p in self.parts)


def stack_signals(*signals: Signal) -> Signal:
    """Concatenate signals, collapsing to a constant when all parts are constant"""
    if all(isinstance(s, ConstantSignal) for s in signals):
        return ConstantSignal(np.concatenate([s.value for s in signals]))
    return StackedSignal(signals)


def signal_from_dict(spec) -> Signal:
    """
    Build a signal from its JSON-compatible description

    Args:
        spec: A number or list (constant) or a dict with "kind" one of
            constant, piecewise_linear, staircase, expression, stack

    Returns:
        Signal instance
    """
    if isinstance(spec, (int, float, list)):
        return ConstantSignal(spec)
    if not isinstance(spec, dict):
        raise ValueError(f"Cannot build a signal from {type(spec).__name__}")

    kind = spec.get("kind", "constant")

    if kind == "constant":
        return ConstantSignal(spec["value"])
    if kind == "piecewise_linear":
        return PiecewiseLinearSignal(spec["times"], spec["values"])
    if kind == "staircase":
        return StaircaseSignal(spec["times"], spec["values"])
    if kind == "expression":
        components = []
        for comp in spec["components"]:
            components.append([
                Term(
                    fn=term["fn"],
                    gain=float(term.get("gain", 1.0)),
                    rate=float(term.get("rate", 1.0)),
                    phase=float(term.get("phase", 0.0)),
                )
                for term in comp
            ])
        return ExpressionSignal(components)
    if kind == "stack":
        return stack_signals(*[signal_from_dict(p) for p in spec["parts"]])

    raise ValueError(f"Unknown signal kind: {kind}")


