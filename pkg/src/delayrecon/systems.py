"""Built-in injective dynamical systems and periodic-point machinery.

Maps are exposed through a uniform step interface; flows appear only as
their fixed-step time-t maps (RK4 with a fixed substep).  Periodic points
are located by seeded Newton refinement of the displacement T^p(x) - x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "System",
    "Henon",
    "CatMap",
    "CircleRotation",
    "Odometer",
    "SampledFlow",
    "Trajectory",
    "iterate",
    "find_periodic",
    "periodic_return_scan",
    "yorke_threshold",
    "yorke_certificate",
    "system_to_dict",
    "system_from_dict",
    "VECTOR_FIELDS",
]


class DomainError(ValueError):
    """State outside the system's declared domain box."""


def _as_batch(x) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


class System:
    """Base class for discrete-time systems on a box in R^k."""

    ambient_dim: int
    injective: bool = True
    known_dim: int | None = None
    lipschitz_L: float | None = None
    torus: bool = False

    @property
    def domain(self) -> np.ndarray:
        """(k, 2) array of per-axis [lo, hi] bounds."""
        raise NotImplementedError

    @property
    def system_id(self) -> str:
        raise NotImplementedError

    def _step_batch(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_domain(self, pts: np.ndarray, slack: float = 1e-9) -> None:
        box = self.domain
        if pts.shape[1] != self.ambient_dim:
            raise DomainError(
                f"{self.system_id}: state dimension {pts.shape[1]} != {self.ambient_dim}"
            )
        lo = box[:, 0] - slack
        hi = box[:, 1] + slack
        if np.any(pts < lo) or np.any(pts > hi):
            raise DomainError(f"{self.system_id}: state outside domain box")

    def step_many(self, pts, check: bool = True) -> np.ndarray:
        pts = _as_batch(pts)
        if check:
            self.check_domain(pts)
        return self._step_batch(pts)

    def step(self, x) -> np.ndarray:
        """One application of the system map to a single state."""
        return self.step_many(x)[0]

    def step_n(self, pts, n: int, check: bool = True) -> np.ndarray:
        out = _as_batch(pts)
        for _ in range(n):
            out = self.step_many(out, check=check)
        return out

    def wrap_displacement(self, disp: np.ndarray) -> np.ndarray:
        """Shortest displacement; reduced mod 1 on torus systems."""
        if self.torus:
            return (disp + 0.5) % 1.0 - 0.5
        return disp

    def distance(self, a, b) -> float:
        d = self.wrap_displacement(np.asarray(a, float) - np.asarray(b, float))
        return float(np.linalg.norm(d))


@dataclass(frozen=True)
class Henon(System):
    """Henon map (x, y) -> (1 - a x^2 + y, b x); injective for b != 0."""

    a: float = 1.4
    b: float = 0.3

    ambient_dim = 2
    known_dim = 1

    @property
    def injective(self):
        return self.b != 0.0

    @property
    def domain(self):
        return np.array([[-3.0, 3.0], [-3.0, 3.0]])

    @property
    def system_id(self):
        return f"henon(a={self.a},b={self.b})"

    def _step_batch(self, pts):
        out = np.empty_like(pts)
        out[:, 0] = 1.0 - self.a * pts[:, 0] ** 2 + pts[:, 1]
        out[:, 1] = self.b * pts[:, 0]
        return out

    def fixed_points(self) -> np.ndarray:
        """The two solutions of the fixed-point quadratic, in closed form."""
        disc = (1.0 - self.b) ** 2 + 4.0 * self.a
        roots = [((self.b - 1.0) + s * math.sqrt(disc)) / (2.0 * self.a) for s in (1, -1)]
        return np.array([[x, self.b * x] for x in roots])


@dataclass(frozen=True)
class CatMap(System):
    """Arnold cat map on the 2-torus: (x, y) -> (x + y, x + 2y) mod 1."""

    ambient_dim = 2
    known_dim = 2
    torus = True

    @property
    def domain(self):
        return np.array([[0.0, 1.0], [0.0, 1.0]])

    @property
    def system_id(self):
        return "catmap"

    def _step_batch(self, pts):
        out = np.empty_like(pts)
        out[:, 0] = (pts[:, 0] + pts[:, 1]) % 1.0
        out[:, 1] = (pts[:, 0] + 2.0 * pts[:, 1]) % 1.0
        return out


@dataclass(frozen=True)
class CircleRotation(System):
    """Rotation of the circle [0, 1) by alpha."""

    alpha: float

    ambient_dim = 1
    known_dim = 1
    torus = True

    @property
    def domain(self):
        return np.array([[0.0, 1.0]])

    @property
    def system_id(self):
        return f"rotation(alpha={self.alpha})"

    def _step_batch(self, pts):
        return (pts + self.alpha) % 1.0


@dataclass(frozen=True)
class Odometer(System):
    """Add-one-with-carry on a fixed number of digits in a given base.

    Digit vectors are scaled into [0, 1]^digits via digit / (base - 1).
    The state set is finite and totally disconnected, so the ground-truth
    covering dimension is 0; the cycle length is base**digits, so no
    small-period points exist for large digit counts.
    """

    base: int = 3
    digits: int = 6

    known_dim = 0

    def __post_init__(self):
        if self.base < 2 or self.digits < 1:
            raise ValueError("odometer needs base >= 2 and digits >= 1")

    @property
    def ambient_dim(self):
        return self.digits

    @property
    def domain(self):
        return np.array([[0.0, 1.0]] * self.digits)

    @property
    def system_id(self):
        return f"odometer(base={self.base},digits={self.digits})"

    def encode(self, digit_rows: np.ndarray) -> np.ndarray:
        return digit_rows.astype(float) / (self.base - 1)

    def decode(self, pts: np.ndarray) -> np.ndarray:
        return np.rint(pts * (self.base - 1)).astype(int)

    def _step_batch(self, pts):
        digits = self.decode(pts)
        for i in range(digits.shape[0]):
            for j in range(self.digits):
                digits[i, j] += 1
                if digits[i, j] < self.base:
                    break
                digits[i, j] = 0
        return self.encode(digits)


def _harmonic(pts: np.ndarray) -> np.ndarray:
    out = np.empty_like(pts)
    out[:, 0] = pts[:, 1]
    out[:, 1] = -pts[:, 0]
    return out


def _lorenz(pts: np.ndarray) -> np.ndarray:
    sigma, rho, beta = 10.0, 28.0, 8.0 / 3.0
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    return np.stack([sigma * (y - x), x * (rho - z) - y, x * y - beta * z], axis=1)


VECTOR_FIELDS: dict[str, dict] = {
    "harmonic": {
        "field": _harmonic,
        "dim": 2,
        "domain": [[-2.0, 2.0], [-2.0, 2.0]],
        "lipschitz_L": 1.0,
    },
    "lorenz": {
        "field": _lorenz,
        "dim": 3,
        "domain": [[-30.0, 30.0], [-40.0, 40.0], [-10.0, 80.0]],
        # Rough bound for the Jacobian norm on the trapping box.
        "lipschitz_L": 120.0,
    },
}


@dataclass(frozen=True)
class SampledFlow(System):
    """Time-t map of an ODE flow, advanced by classical RK4 with fixed substep."""

    field_id: str
    dt: float
    substep: float = 0.01

    def __post_init__(self):
        if self.field_id not in VECTOR_FIELDS:
            raise ValueError(f"unknown vector field {self.field_id!r}")
        if self.dt <= 0.0 or self.substep <= 0.0:
            raise ValueError("dt and substep must be positive")

    @property
    def ambient_dim(self):
        return VECTOR_FIELDS[self.field_id]["dim"]

    @property
    def lipschitz_L(self):
        return VECTOR_FIELDS[self.field_id]["lipschitz_L"]

    @property
    def domain(self):
        return np.array(VECTOR_FIELDS[self.field_id]["domain"])

    @property
    def system_id(self):
        return f"flow({self.field_id},dt={self.dt})"

    def _step_batch(self, pts):
        f = VECTOR_FIELDS[self.field_id]["field"]
        n_sub = max(1, math.ceil(self.dt / self.substep))
        h = self.dt / n_sub
        out = pts.copy()
        for _ in range(n_sub):
            k1 = f(out)
            k2 = f(out + 0.5 * h * k1)
            k3 = f(out + 0.5 * h * k2)
            k4 = f(out + h * k3)
            out = out + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return out


@dataclass(frozen=True)
class Trajectory:
    """A finite forward orbit: states[i+1] = step(states[i])."""

    states: np.ndarray  # (n, k)
    system_id: str

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 1:
            raise ValueError("trajectory needs a nonempty (n, k) state array")
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.states.shape[0]


def iterate(sys: System, x0, n: int) -> Trajectory:
    """Forward orbit of length n starting at x0 (n >= 1, includes x0)."""
    if n < 1:
        raise ValueError("orbit length must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    states = np.empty((n, sys.ambient_dim))
    states[0] = x0
    cur = x0[None, :]
    sys.check_domain(cur)
    for i in range(1, n):
        cur = sys.step_many(cur)
        states[i] = cur[0]
    return Trajectory(states=states, system_id=sys.system_id)


# --- periodic points ------------------------------------------------------

def _displacement(sys: System, pts: np.ndarray, p: int) -> np.ndarray:
    return sys.wrap_displacement(sys.step_n(pts, p, check=False) - pts)


def _newton_refine(sys: System, x0: np.ndarray, p: int, tol: float,
                   maxiter: int = 40) -> np.ndarray | None:
    """Newton on T^p(x) - x with a finite-difference Jacobian."""
    k = sys.ambient_dim
    x = x0.copy()
    fd = max(1e-7, tol)
    for _ in range(maxiter):
        g = _displacement(sys, x[None, :], p)[0]
        if not np.all(np.isfinite(g)):
            return None
        if np.linalg.norm(g) <= 0.1 * tol:
            return x
        # Jacobian of the displacement by forward differences.
        probe = np.repeat(x[None, :], k, axis=0) + fd * np.eye(k)
        gp = _displacement(sys, probe, p)
        jac = (gp - g[None, :]).T / fd
        try:
            delta = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) > 1.0:
            return None
        x = x + delta
        if sys.torus:
            x = x % 1.0
        else:
            box = sys.domain
            if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
                return None
    g = _displacement(sys, x[None, :], p)[0]
    return x if np.linalg.norm(g) <= tol else None


def _minimal_period(sys: System, x: np.ndarray, p: int, tol: float) -> int | None:
    cur = x[None, :]
    for q in range(1, p + 1):
        cur = sys.step_n(cur, 1, check=False)
        if sys.distance(cur[0], x) <= tol:
            return q
    return None


def find_periodic(sys: System, n_max: int, tol: float, seeds) -> list[tuple[np.ndarray, int]]:
    """Periodic points of minimal period <= n_max, refined from the seeds.

    Returns deduplicated (point, period) tuples, sorted by coordinates so
    the result is deterministic regardless of seed order.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    seeds = _as_batch(seeds)
    found: list[tuple[np.ndarray, int]] = []
    for p in range(1, n_max + 1):
        for seed in seeds:
            # Cheap direct hit first; Newton refinement otherwise.
            if np.linalg.norm(_displacement(sys, seed[None, :], p)[0]) <= tol:
                x = seed.copy()
            else:
                x = _newton_refine(sys, seed, p, tol)
                if x is None:
                    continue
            q = _minimal_period(sys, x, p, tol)
            if q is None:
                continue
            if any(q == per and sys.distance(x, y) <= 10 * tol for y, per in found):
                continue
            found.append((x, q))
    found.sort(key=lambda item: (item[1],) + tuple(np.round(item[0], 12)))
    return found


def periodic_return_scan(sys: System, n_max: int, tol: float, seeds) -> list[tuple[np.ndarray, int]]:
    """Brute-force scan: seeds whose orbit returns within tol in <= n_max steps."""
    seeds = _as_batch(seeds)
    hits = []
    cur = seeds.copy()
    for p in range(1, n_max + 1):
        cur = sys.step_many(cur, check=False)
        disp = sys.wrap_displacement(cur - seeds)
        close = np.linalg.norm(disp, axis=1) <= tol
        for i in np.nonzero(close)[0]:
            hits.append((seeds[i].copy(), p))
    return hits


# --- Yorke sampling bound -------------------------------------------------

def yorke_threshold(L: float, d: int) -> float:
    """Sampling-step threshold pi / (L d) below which the time-t map of an
    L-Lipschitz flow has no periodic points of order < 2d + 1."""
    if L <= 0.0:
        raise ValueError("Lipschitz constant must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    return math.pi / (L * d)


def yorke_certificate(sys: SampledFlow, d: int, equilibrium_seeds=None,
                      tol: float = 1e-6) -> dict:
    """Certify that a sampled flow has no periodic orbits of order <= 2d.

    Equilibria of the vector field are period-1 points of every time-t map
    and are excluded by an explicit scan: seeds where the field nearly
    vanishes are reported separately rather than silently certified.
    """
    if not isinstance(sys, SampledFlow):
        raise TypeError("yorke_certificate applies to sampled flows only")
    threshold = yorke_threshold(sys.lipschitz_L, d)
    certified = sys.dt < threshold
    equilibria: list[list[float]] = []
    if equilibrium_seeds is not None:
        f = VECTOR_FIELDS[sys.field_id]["field"]
        box = sys.domain
        k = sys.ambient_dim
        seeds = _as_batch(equilibrium_seeds)
        zeros: list[np.ndarray] = []
        for seed in seeds:
            x = seed.copy()
            # Newton on the vector field so equilibria between grid seeds
            # are found, not just seeds that happen to land on one.
            for _ in range(30):
                g = f(x[None, :])[0]
                if not np.all(np.isfinite(g)):
                    x = None
                    break
                if np.linalg.norm(g) <= tol:
                    break
                probe = np.repeat(x[None, :], k, axis=0) + 1e-7 * np.eye(k)
                jac = (f(probe) - g[None, :]).T / 1e-7
                try:
                    delta = np.linalg.solve(jac, -g)
                except np.linalg.LinAlgError:
                    x = None
                    break
                if not np.all(np.isfinite(delta)) or np.linalg.norm(delta) > 1e3:
                    x = None
                    break
                x = x + delta
            if x is None or np.linalg.norm(f(x[None, :])[0]) > tol:
                continue
            if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
                continue
            if any(np.linalg.norm(x - z) <= 100 * tol for z in zeros):
                continue
            zeros.append(x)
        zeros.sort(key=lambda z: tuple(np.round(z, 9)))
        equilibria = [[float(c) for c in z] for z in zeros]
    return {
        "threshold": threshold,
        "step": sys.dt,
        "certified": bool(certified),
        "max_excluded_order": 2 * d if certified else 0,
        "equilibria": equilibria,
    }


# --- JSON round-tripping --------------------------------------------------

def system_to_dict(sys: System) -> dict:
    if isinstance(sys, Henon):
        return {"kind": "henon", "a": sys.a, "b": sys.b}
    if isinstance(sys, CatMap):
        return {"kind": "catmap"}
    if isinstance(sys, CircleRotation):
        return {"kind": "rotation", "alpha": sys.alpha}
    if isinstance(sys, Odometer):
        return {"kind": "odometer", "base": sys.base, "digits": sys.digits}
    if isinstance(sys, SampledFlow):
        return {"kind": "flow", "field": sys.field_id, "dt": sys.dt,
                "substep": sys.substep}
    raise TypeError(f"unknown system type {type(sys).__name__}")


def system_from_dict(payload: dict) -> System:
    try:
        kind = payload["kind"]
    except (KeyError, TypeError):
        raise ValueError("system payload must be an object with a 'kind' key")
    if kind == "henon":
        return Henon(a=float(payload.get("a", 1.4)), b=float(payload.get("b", 0.3)))
    if kind == "catmap":
        return CatMap()
    if kind == "rotation":
        return CircleRotation(alpha=float(payload["alpha"]))
    if kind == "odometer":
        return Odometer(base=int(payload.get("base", 3)), digits=int(payload.get("digits", 6)))
    if kind == "flow":
        return SampledFlow(field_id=payload["field"], dt=float(payload["dt"]),
                           substep=float(payload.get("substep", 0.01)))
    raise ValueError(f"unknown system kind {kind!r}")
