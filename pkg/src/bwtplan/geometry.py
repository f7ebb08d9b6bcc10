"""Configurations and axis-aligned boxes."""
import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(psi):
    """Normalize an angle to (-pi, pi]."""
    psi = math.remainder(float(psi), 2.0 * math.pi)
    if psi <= -math.pi:
        psi += 2.0 * math.pi
    return psi


@dataclass(frozen=True)
class Configuration:
    """Robot configuration ``[x, y, z, psi]`` (meters, radians)."""

    x: float
    y: float
    z: float
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "psi", wrap_angle(self.psi))

    @classmethod
    def at(cls, position, psi=0.0):
        return cls(position[0], position[1], position[2], psi)

    @property
    def position(self):
        return np.array([self.x, self.y, self.z])

    def with_yaw(self, psi):
        return Configuration(self.x, self.y, self.z, psi)

    def distance_to(self, other):
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


def heading(a, b, default=0.0):
    """Yaw of the horizontal displacement from ``a`` to ``b``."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    if dx * dx + dy * dy < 1e-12:
        return default
    return math.atan2(dy, dx)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("box corners must be 3-vectors")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError(f"inverted box {lo} -> {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def around(cls, center, extents):
        c = np.asarray(center, dtype=float)
        h = np.asarray(extents, dtype=float) / 2.0
        return cls(tuple(c - h), tuple(c + h))

    @property
    def center(self):
        return (np.array(self.lo) + np.array(self.hi)) / 2.0

    @property
    def extents(self):
        return np.array(self.hi) - np.array(self.lo)

    def scaled(self, factor):
        return Box.around(self.center, self.extents * np.asarray(factor, dtype=float))

    def contains(self, p):
        return all(l <= v <= h for l, v, h in zip(self.lo, p, self.hi))

    def intersect(self, other):
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(h < l for l, h in zip(lo, hi)):
            return None
        return Box(lo, hi)
