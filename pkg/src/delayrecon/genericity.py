"""Pair-separation margins and perturbations that restore injectivity.

A finite, delta-separated set of off-diagonal state pairs stands in for a
compact set bounded away from the diagonal.  The margin of an observable
on such a pair set is the min over pairs of the max per-delay-coordinate
gap; a positive margin certifies that the delay map separates every pair,
with quantitative slack that is stable under small sup-norm perturbations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    Constant,
    Observable,
    PiecewiseAnchor,
    SumObservable,
    TrigPolynomial,
    sup_distance,
)
from .delay import delay_vectors, periodic_extension
from .systems import System
from .topology import mesh_cover, refine_order

__all__ = [
    "PairSet",
    "CompatibilityReport",
    "PerturbationError",
    "sample_pairs",
    "compatibility_margin",
    "openness_radius",
    "perturb_to_compatible",
    "genericity_monte_carlo",
]

MARGIN_TOL = 1e-6  # below this, separation is indistinguishable from noise


class PerturbationError(RuntimeError):
    """The perturbation construction could not be completed; the message
    names the offending pairs or the period class whose cover-order bound
    failed."""


@dataclass(frozen=True)
class PairSet:
    """Finite surrogate for a compact off-diagonal pair set.

    Every pair is separated by at least ``delta``; each pair carries a
    class tag: C1 (both aperiodic), C2 (both periodic), C3 (mixed).
    """

    xs: np.ndarray  # (n, k)
    ys: np.ndarray  # (n, k)
    delta: float
    tags: tuple[str, ...]
    complete: bool = True  # False when fewer pairs than requested exist

    def __post_init__(self):
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        ys = np.atleast_2d(np.asarray(self.ys, dtype=float))
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if xs.shape != ys.shape:
            raise ValueError("pair sides must have matching shapes")
        if len(self.tags) != xs.shape[0]:
            raise ValueError("one class tag per pair required")
        if any(t not in ("C1", "C2", "C3") for t in self.tags):
            raise ValueError("tags must be C1, C2 or C3")
        if self.delta <= 0.0:
            raise ValueError("separation delta must be positive")
        sep = np.linalg.norm(xs - ys, axis=1)
        if np.any(sep < self.delta - 1e-12):
            raise ValueError("some pair is closer than the declared delta")

    def __len__(self):
        return self.xs.shape[0]

    def subset(self, idx) -> "PairSet":
        idx = np.asarray(idx)
        return PairSet(self.xs[idx], self.ys[idx], self.delta,
                       tuple(self.tags[i] for i in idx), self.complete)

    def write_csv(self, path) -> None:
        k = self.xs.shape[1]
        header = ",".join([f"x{j}" for j in range(k)] + [f"y{j}" for j in range(k)]
                          + ["tag"])
        with open(path, "w", newline="\n") as fh:
            fh.write(header + "\n")
            for x, y, tag in zip(self.xs, self.ys, self.tags):
                row = [format(v, ".17g") for v in x] + [format(v, ".17g") for v in y]
                fh.write(",".join(row + [tag]) + "\n")

    @classmethod
    def read_csv(cls, path, delta: float) -> "PairSet":
        rows = []
        tags = []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            k = sum(1 for name in header if name.startswith("x"))
            for line in fh:
                parts = line.strip().split(",")
                rows.append([float(v) for v in parts[:2 * k]])
                tags.append(parts[2 * k])
        arr = np.asarray(rows)
        return cls(arr[:, :k], arr[:, k:], delta, tuple(tags))


@dataclass
class CompatibilityReport:
    """Margin of an observable's delay map on a pair set."""

    margin: float
    argmin_index: int
    per_pair: np.ndarray  # (n,) max-coordinate gap per pair
    m: int
    tolerance: float = MARGIN_TOL

    @property
    def compatible(self) -> bool:
        return self.margin > self.tolerance

    def to_dict(self) -> dict:
        return {
            "margin": self.margin,
            "argmin_pair": self.argmin_index,
            "m": self.m,
            "tolerance": self.tolerance,
            "compatible": self.compatible,
        }


def detect_period(sys: System, x, n_max: int, tol: float) -> int | None:
    """Minimal p <= n_max with T^p(x) within tol of x, by direct return."""
    x = np.asarray(x, dtype=float)
    cur = x[None, :]
    for p in range(1, n_max + 1):
        cur = sys.step_many(cur, check=False)
        if sys.distance(cur[0], x) <= tol:
            return p
    return None


def sample_pairs(samples, delta: float, count: int, sys: System | None = None,
                 periodic_points=None, seed: int = 0,
                 period_tol: float = 1e-6, max_tries: int = 200,
                 min_index_gap: int = 0) -> PairSet:
    """Uniformly sample delta-separated pairs from a point cloud.

    Pairs are tagged C1/C2/C3 by matching members against the supplied
    periodic points (from `find_periodic`) at ``period_tol``.  Deterministic
    for a fixed seed.  If ``count`` pairs cannot be realized the result is
    shorter and flagged incomplete.

    When the samples are consecutive trajectory states, members drawn at
    nearby indices share forward orbit points exactly; ``min_index_gap``
    rejects draws within that index distance of any already-used index so
    short orbit segments of distinct members stay disjoint.
    """
    pts = np.atleast_2d(np.asarray(samples, dtype=float))
    n = pts.shape[0]
    if n < 2:
        raise ValueError("need at least two samples to form pairs")
    rng = np.random.default_rng(seed)
    ptree = None
    if periodic_points is not None and len(periodic_points):
        ptree = cKDTree(np.atleast_2d(np.asarray(
            [p for p, _ in periodic_points], dtype=float)))

    def is_periodic(x) -> bool:
        if ptree is None:
            return False
        dist, _ = ptree.query(x)
        return bool(dist <= period_tol)

    xs, ys, tags = [], [], []
    used: list[int] = []
    for _ in range(max_tries * count):
        if len(xs) >= count:
            break
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        if np.linalg.norm(pts[i] - pts[j]) < delta:
            continue
        if min_index_gap > 0:
            if abs(int(i) - int(j)) <= min_index_gap:
                continue
            if any(abs(int(i) - u) <= min_index_gap
                   or abs(int(j) - u) <= min_index_gap for u in used):
                continue
            used.extend((int(i), int(j)))
        xs.append(pts[i])
        ys.append(pts[j])
        px, py = is_periodic(pts[i]), is_periodic(pts[j])
        tags.append("C2" if px and py else ("C1" if not px and not py else "C3"))
    if not xs:
        raise ValueError(f"no pair at separation {delta} could be sampled")
    return PairSet(np.asarray(xs), np.asarray(ys), delta, tuple(tags),
                   complete=len(xs) >= count)


def compatibility_margin(h: Observable, sys: System, K: PairSet, m: int,
                         tolerance: float = MARGIN_TOL) -> CompatibilityReport:
    """Min over pairs of the max over the m delay coordinates of
    |h(T^n x) - h(T^n y)|."""
    if m < 1:
        raise ValueError("delay count must be >= 1")
    vx = delay_vectors(h, sys, K.xs, m)
    vy = delay_vectors(h, sys, K.ys, m)
    per_pair = np.max(np.abs(vx - vy), axis=1)
    argmin = int(np.argmin(per_pair))
    return CompatibilityReport(margin=float(per_pair[argmin]),
                               argmin_index=argmin, per_pair=per_pair, m=m,
                               tolerance=tolerance)


def openness_radius(report: CompatibilityReport) -> float:
    """Sup-norm radius within which every perturbation stays compatible.

    Any g with sup-distance below margin/3 of the measured observable has
    margin at least margin/3 on the same pairs, by the triangle inequality.
    """
    if report.margin <= 0.0:
        raise ValueError("openness radius requires a positive margin")
    return report.margin / 3.0


# --- perturbation construction -------------------------------------------

def _dedup_members(pts: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy dedup: returns (unique points, index of each input point)."""
    reps: list[np.ndarray] = []
    assign = np.empty(pts.shape[0], dtype=int)
    for i, p in enumerate(pts):
        for j, r in enumerate(reps):
            if np.linalg.norm(p - r) <= tol:
                assign[i] = j
                break
        else:
            assign[i] = len(reps)
            reps.append(p)
    return np.asarray(reps), assign


def _check_cover_bound(class_pts: np.ndarray, t: int, n_label: int,
                       scale: float) -> None:
    """Desk-scale analogue of the cover-order requirement ord < (t+1)/2 for
    the period class: the class sample must admit a refinement of small
    enough order at the working scale."""
    if class_pts.shape[0] < 2:
        return
    parent = mesh_cover(class_pts, scale)
    _, order = refine_order(parent, class_pts)
    if not order < (t + 1) / 2.0:
        raise PerturbationError(
            f"cover-order bound fails for period class n={n_label}: achieved "
            f"order {order} >= {(t + 1) / 2.0:g} (periodic-set dimension too large)"
        )


def perturb_to_compatible(h_base: Observable, eps: float, K: PairSet,
                          sys: System, d: int, seed: int = 0,
                          tol: float = MARGIN_TOL,
                          period_tol: float = 1e-9,
                          class_samples: dict[int, np.ndarray] | None = None,
                          max_rounds: int = 60) -> SumObservable:
    """Construct f within eps of ``h_base`` whose (2d+1)-delay map separates
    every pair of K.

    Each distinct pair member becomes an anchor; its forward orbit segment
    (full for aperiodic members, one cycle for periodic ones) carries target
    delay values drawn within eps/2 of the base observable's values, redrawn
    until every pair's target vectors differ by a workable gap, with the
    periodic side compared through its periodic extension.  The targets are
    realized exactly at the orbit points by a compactly supported
    partition-of-unity bump added to the base.  The result is re-verified
    before being returned.

    ``class_samples`` optionally maps a period (0 for the aperiodic class)
    to a sampled neighborhood of that class, on which the cover-order
    smallness requirement is checked; without it the anchors are finitely
    many separated points, which always admit a disjoint cover.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if d < 0:
        raise ValueError("d must be nonnegative")
    m = 2 * d + 1
    members = np.concatenate([K.xs, K.ys], axis=0)
    reps, assign = _dedup_members(members, period_tol)
    n_pairs = len(K)

    # Orbit segment length per anchor: one cycle for periodic members.
    periods = []
    for q in reps:
        p = detect_period(sys, q, 2 * d if d > 0 else 1, period_tol)
        periods.append(p)
    t_of = [min(p - 1, 2 * d) if p is not None else 2 * d for p in periods]

    # Cover-order smallness check per class.  The anchors themselves are
    # finitely many separated points and always admit a disjoint cover, so
    # the refinement heuristic only runs on classes for which the caller
    # supplied a sampled neighborhood of the underlying periodic set.
    if class_samples:
        by_class: dict[int, list[np.ndarray]] = {}
        for q, p in zip(reps, periods):
            by_class.setdefault(0 if p is None else p, []).append(q)
        for label, sample in sorted(class_samples.items()):
            pts = np.atleast_2d(np.asarray(sample, dtype=float))
            if label in by_class:
                pts = np.concatenate([np.asarray(by_class[label]), pts], axis=0)
            t = 2 * d if label == 0 else min(label - 1, 2 * d)
            _check_cover_bound(pts, t, label if label else 2 * d + 1,
                               scale=max(K.delta, 8.0 * _spacing_or(pts, K.delta)))

    # Orbit points, with cross-anchor disjointness at the working tolerance.
    orbit_pts = []
    orbit_owner = []
    for ai, (q, t) in enumerate(zip(reps, t_of)):
        cur = q[None, :]
        for k in range(t + 1):
            orbit_pts.append(cur[0].copy())
            orbit_owner.append((ai, k))
            if k < t:
                cur = sys.step_many(cur, check=False)
    orbit_pts = np.asarray(orbit_pts)
    tree = cKDTree(orbit_pts)
    close = tree.query_pairs(r=max(period_tol, 1e-12), output_type="ndarray")
    conflicts = [(orbit_owner[i], orbit_owner[j]) for i, j in close
                 if orbit_owner[i][0] != orbit_owner[j][0]]
    if conflicts:
        raise PerturbationError(
            "orbit segments of distinct pair members are not disjoint at the "
            f"working tolerance: {conflicts[:5]}"
        )

    # Bump radius: keep supports disjoint and the base's variation small.
    dists, _ = tree.query(orbit_pts, k=2)
    min_sep = float(dists[:, 1].min()) if orbit_pts.shape[0] > 1 else 1.0
    radius = min_sep / 3.0
    L = h_base.lipschitz()
    if L > 0.0:
        radius = min(radius, 0.05 * eps / L)
    if radius <= 0.0:
        raise PerturbationError("degenerate bump radius; orbit points coincide")

    base_along = [np.array([h_base(sys.step_n(q[None, :], k, check=False)[0])
                            for k in range(t + 1)])
                  for q, t in zip(reps, t_of)]

    gp_margin = min(1e-3, 0.1 * eps)
    amp = 0.45 * eps
    rng = np.random.default_rng(seed)
    x_anchor = assign[:n_pairs]
    y_anchor = assign[n_pairs:]
    for ai, bi in zip(x_anchor, y_anchor):
        if ai == bi:
            raise PerturbationError(
                "a pair's members coincide at the working tolerance")

    for _ in range(max_rounds):
        targets = [np.clip(b + rng.uniform(-amp, amp, size=b.size), 0.0, 1.0)
                   for b in base_along]
        ok = all(
            np.max(np.abs(periodic_extension(targets[ai], m)
                          - periodic_extension(targets[bi], m))) >= gp_margin
            for ai, bi in zip(x_anchor, y_anchor)
        )
        if not ok:
            continue
        bump_pts = []
        bump_vals = []
        for ai, (q, t) in enumerate(zip(reps, t_of)):
            cur = q[None, :]
            for k in range(t + 1):
                bump_pts.append(tuple(cur[0]))
                bump_vals.append(0.5 + targets[ai][k] - base_along[ai][k])
                if k < t:
                    cur = sys.step_many(cur, check=False)
        bump = PiecewiseAnchor(points=tuple(bump_pts), values=tuple(bump_vals),
                               radius=radius, base=0.5)
        f = SumObservable(base=h_base, bump=bump, offset=0.5)

        # Mandatory self-verification on the actual observable.
        report = compatibility_margin(f, sys, K, m, tolerance=tol)
        probe = np.concatenate([orbit_pts, np.concatenate([K.xs, K.ys], axis=0)])
        dist = sup_distance(f, h_base, probe)
        if report.margin > tol and dist < eps:
            return f
    raise PerturbationError(
        f"general-position retries exhausted after {max_rounds} rounds")


def _spacing_or(pts: np.ndarray, default: float) -> float:
    from .topology import nn_spacing
    s = nn_spacing(pts)
    return s if s > 0.0 else default


# --- empirical density ----------------------------------------------------

def random_trig_bump(rng: np.random.Generator, ambient_dim: int,
                     bump_scale: float, n_terms: int = 4,
                     max_freq: int = 3) -> TrigPolynomial:
    """Random trigonometric bump with sup-norm at most ``bump_scale``,
    centered at 1/2 so it acts as a signed perturbation under SumObservable
    with offset 1/2."""
    terms = []
    for _ in range(n_terms):
        coef = float(rng.normal())
        freq = int(rng.integers(1, max_freq + 1))
        axis = int(rng.integers(0, ambient_dim))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        terms.append((coef, freq, axis, phase))
    return TrigPolynomial(terms=tuple(terms), amplitude=min(bump_scale, 0.5))


def genericity_monte_carlo(sys: System, K: PairSet, m: int, trials: int,
                           bump_scale: float, seed: int = 0,
                           base: Observable | None = None,
                           tol: float = MARGIN_TOL) -> float:
    """Fraction of random bump perturbations of the base observable whose
    delay map separates every pair of K at the working tolerance."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if base is None:
        base = Constant(0.5)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        bump = random_trig_bump(rng, sys.ambient_dim, bump_scale)
        g = SumObservable(base=base, bump=bump, offset=0.5)
        if compatibility_margin(g, sys, K, m).margin > tol:
            hits += 1
    return hits / trials
