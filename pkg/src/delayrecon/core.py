"""Observables on sampled phase spaces.

An observable is a continuous map from the ambient state space into [0, 1].
All built-in variants are Lipschitz with a constant computable from their
parameters, and every variant round-trips through a JSON dict with a
``variant`` discriminator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Observable",
    "Constant",
    "Coordinate",
    "TrigPolynomial",
    "PiecewiseAnchor",
    "SumObservable",
    "evaluate",
    "sup_distance",
    "sup_distance_report",
    "observable_to_dict",
    "observable_from_dict",
]


def _as_points(x) -> np.ndarray:
    """Coerce a single state or an (n, k) batch to a 2-D float array."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise ValueError(f"expected state vector(s), got array of ndim {pts.ndim}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("state coordinates must be finite")
    return pts


class Observable:
    """Base class; subclasses implement `_values` on (n, k) batches."""

    def _values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, x) -> np.ndarray:
        """Evaluate on one state (1-D input) or a batch (2-D input)."""
        pts = _as_points(x)
        vals = self._values(pts)
        return vals

    def __call__(self, x) -> float:
        pts = _as_points(x)
        if pts.shape[0] != 1:
            raise ValueError("use evaluate() for batches")
        return float(self._values(pts)[0])

    def lipschitz(self) -> float:
        """Upper bound on the Lipschitz constant w.r.t. the Euclidean metric."""
        raise NotImplementedError

    def expected_dim(self) -> int | None:
        """Ambient dimension this observable requires, or None if any."""
        return None

    def _check_dim(self, pts: np.ndarray) -> None:
        k = self.expected_dim()
        if k is not None and pts.shape[1] < k:
            raise ValueError(
                f"observable needs ambient dimension >= {k}, got {pts.shape[1]}"
            )


@dataclass(frozen=True)
class Constant(Observable):
    """h(x) = value."""

    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("constant observable value must lie in [0, 1]")

    def _values(self, pts):
        return np.full(pts.shape[0], self.value)

    def lipschitz(self):
        return 0.0


@dataclass(frozen=True)
class Coordinate(Observable):
    """Affine rescale of one coordinate from [lo, hi] onto [0, 1]."""

    index: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ValueError("coordinate rescale needs hi > lo")

    def expected_dim(self):
        return self.index + 1

    def _values(self, pts):
        self._check_dim(pts)
        vals = (pts[:, self.index] - self.lo) / (self.hi - self.lo)
        return np.clip(vals, 0.0, 1.0)

    def lipschitz(self):
        return 1.0 / (self.hi - self.lo)


@dataclass(frozen=True)
class TrigPolynomial(Observable):
    """Trigonometric polynomial rescaled into [1/2 - A, 1/2 + A] with A <= 1/2.

    Each term is (coefficient, frequency, axis, phase) contributing
    coefficient * cos(2*pi*frequency*x[axis] + phase).  The raw sum is
    normalized by the total absolute coefficient mass and scaled by
    ``amplitude`` so the range stays inside [0, 1].
    """

    terms: tuple[tuple[float, float, int, float], ...]
    amplitude: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 0.5:
            raise ValueError("amplitude must lie in [0, 0.5]")
        object.__setattr__(self, "terms", tuple(tuple(t) for t in self.terms))

    def expected_dim(self):
        if not self.terms:
            return None
        return max(int(t[2]) for t in self.terms) + 1

    def _mass(self) -> float:
        return sum(abs(t[0]) for t in self.terms)

    def _values(self, pts):
        self._check_dim(pts)
        mass = self._mass()
        if mass == 0.0 or self.amplitude == 0.0:
            return np.full(pts.shape[0], 0.5)
        raw = np.zeros(pts.shape[0])
        for coef, freq, axis, phase in self.terms:
            raw += coef * np.cos(2.0 * math.pi * freq * pts[:, int(axis)] + phase)
        return 0.5 + self.amplitude * raw / mass

    def lipschitz(self):
        mass = self._mass()
        if mass == 0.0 or self.amplitude == 0.0:
            return 0.0
        deriv = sum(abs(t[0]) * 2.0 * math.pi * abs(t[1]) for t in self.terms)
        return self.amplitude * deriv / mass


@dataclass(frozen=True)
class PiecewiseAnchor(Observable):
    """Partition-of-unity blend of anchor values over a constant background.

    Each anchor (q_i, v_i) contributes a tent bump w_i(x) = max(0, 1 - |x-q_i|/r).
    Where the total bump weight W exceeds 1 the value is the renormalized
    weighted mean of anchor values; as W falls to 0 the value blends
    continuously back to ``base``:

        h(x) = (sum_i w_i v_i + max(0, 1 - W) * base) / (W + max(0, 1 - W))

    The denominator is always >= 1, so h is a convex combination of anchor
    values and the base, hence stays in [0, 1].
    """

    points: tuple[tuple[float, ...], ...]
    values: tuple[float, ...]
    radius: float
    base: float = 0.5

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.points) != len(self.values):
            raise ValueError("anchor points and values must have equal length")
        if self.radius <= 0.0:
            raise ValueError("blending radius must be positive")
        if any(not 0.0 <= v <= 1.0 for v in self.values):
            raise ValueError("anchor values must lie in [0, 1]")
        if not 0.0 <= self.base <= 1.0:
            raise ValueError("base value must lie in [0, 1]")

    def expected_dim(self):
        if not self.points:
            return None
        return len(self.points[0])

    def _values(self, pts):
        if not self.points:
            return np.full(pts.shape[0], self.base)
        q = np.asarray(self.points)  # (a, k)
        if pts.shape[1] != q.shape[1]:
            raise ValueError(
                f"anchor dimension {q.shape[1]} != state dimension {pts.shape[1]}"
            )
        v = np.asarray(self.values)
        # (n, a) pairwise distances; anchors counts are desk-scale so a dense
        # matrix is fine.
        d = np.sqrt(np.maximum(
            ((pts ** 2).sum(1)[:, None] - 2.0 * pts @ q.T + (q ** 2).sum(1)[None, :]),
            0.0,
        ))
        w = np.maximum(0.0, 1.0 - d / self.radius)
        total = w.sum(1)
        bg = np.maximum(0.0, 1.0 - total)
        num = w @ v + bg * self.base
        den = total + bg
        return num / den

    def lipschitz(self):
        # Crude but safe: numerator and denominator are each at most
        # 2*n/r-Lipschitz and the denominator is bounded below by 1.
        n = len(self.points)
        return 4.0 * n / self.radius if n else 0.0


@dataclass(frozen=True)
class SumObservable(Observable):
    """Clamped sum: h(x) = clip(base(x) + bump(x) - offset, 0, 1).

    With offset 0 this is a plain clamped additive bump; with offset 1/2 a
    bump centered at 1/2 acts as a signed perturbation of the base.
    """

    base: Observable
    bump: Observable
    offset: float = 0.0

    def _values(self, pts):
        return np.clip(
            self.base._values(pts) + self.bump._values(pts) - self.offset, 0.0, 1.0
        )

    def expected_dim(self):
        dims = [d for d in (self.base.expected_dim(), self.bump.expected_dim()) if d]
        return max(dims) if dims else None

    def lipschitz(self):
        return self.base.lipschitz() + self.bump.lipschitz()


def evaluate(obs: Observable, x) -> float:
    """Evaluate an observable at a single state vector."""
    return obs(x)


def sup_distance(a: Observable, b: Observable, samples) -> float:
    """Max of |a - b| over a nonempty finite sample of the space.

    This is a lower bound on the true sup-norm distance; see
    `sup_distance_report` for a Lipschitz-padded upper bound.
    """
    pts = _as_points(samples)
    if pts.shape[0] == 0:
        raise ValueError("sup_distance needs a nonempty sample set")
    return float(np.max(np.abs(a._values(pts) - b._values(pts))))


def sup_distance_report(a: Observable, b: Observable, samples, mesh: float) -> dict:
    """Sampled sup-distance with a Lipschitz pad for the unsampled gaps.

    ``mesh`` is the covering radius of the sample set in the region of
    interest; any point is within ``mesh`` of a sample, so the true sup-norm
    is at most lower + (L_a + L_b) * mesh.
    """
    lower = sup_distance(a, b, samples)
    pad = (a.lipschitz() + b.lipschitz()) * mesh
    return {"lower": lower, "pad": pad, "upper": lower + pad}


# --- JSON round-tripping -------------------------------------------------

def observable_to_dict(obs: Observable) -> dict:
    if isinstance(obs, Constant):
        return {"variant": "constant", "value": obs.value}
    if isinstance(obs, Coordinate):
        return {"variant": "coordinate", "index": obs.index, "lo": obs.lo, "hi": obs.hi}
    if isinstance(obs, TrigPolynomial):
        return {
            "variant": "trig",
            "terms": [list(t) for t in obs.terms],
            "amplitude": obs.amplitude,
        }
    if isinstance(obs, PiecewiseAnchor):
        return {
            "variant": "anchors",
            "points": [list(p) for p in obs.points],
            "values": list(obs.values),
            "radius": obs.radius,
            "base": obs.base,
        }
    if isinstance(obs, SumObservable):
        return {
            "variant": "sum",
            "base": observable_to_dict(obs.base),
            "bump": observable_to_dict(obs.bump),
            "offset": obs.offset,
        }
    raise TypeError(f"unknown observable type {type(obs).__name__}")


def observable_from_dict(payload: dict) -> Observable:
    try:
        variant = payload["variant"]
    except (KeyError, TypeError):
        raise ValueError("observable payload must be an object with a 'variant' key")
    if variant == "constant":
        return Constant(value=float(payload["value"]))
    if variant == "coordinate":
        return Coordinate(
            index=int(payload["index"]),
            lo=float(payload.get("lo", 0.0)),
            hi=float(payload.get("hi", 1.0)),
        )
    if variant == "trig":
        return TrigPolynomial(
            terms=tuple(tuple(t) for t in payload["terms"]),
            amplitude=float(payload.get("amplitude", 0.5)),
        )
    if variant == "anchors":
        return PiecewiseAnchor(
            points=tuple(tuple(p) for p in payload["points"]),
            values=tuple(payload["values"]),
            radius=float(payload["radius"]),
            base=float(payload.get("base", 0.5)),
        )
    if variant == "sum":
        return SumObservable(
            base=observable_from_dict(payload["base"]),
            bump=observable_from_dict(payload["bump"]),
            offset=float(payload.get("offset", 0.0)),
        )
    raise ValueError(f"unknown observable variant {variant!r}")
