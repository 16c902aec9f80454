"""Equal-force distances of two beads, their stability, and parameter scans."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .chain import Injection, _solve_batch, _split, to_transfer
from .exceptions import DomainError, SingularTransferError
from .force import _balance
from .scatter import ModePair, ScatterMatrix, SimpleFourPortParams, as_scatter_matrix

SAMPLES_PER_BEAT = 4000
SAMPLES_PER_FAST = 40
DERIV_STEP = 1e-4
MERGE_DISTANCE = 1e-6
DEGENERATE_FORCE = 1e-13
FLAT_DERIVATIVE = 1e-9
ROOT_TOL = 1e-14
_CHUNK = 16384


@dataclass(frozen=True)
class EquilibriumPoint:
    d_star: float
    F_common: float
    stable: bool
    dF1: float
    dF2: float


class ForceCurve(NamedTuple):
    d: np.ndarray
    F1: np.ndarray
    F2: np.ndarray


class PairForces:
    """Power-normalized forces on two beads as a vectorized function of
    their distance.

    ``beads`` is one bead description (used for both) or a pair.
    """

    def __init__(self, beads, modes: ModePair | None = None, inj: Injection | None = None):
        if isinstance(beads, (SimpleFourPortParams, ScatterMatrix)) or not isinstance(beads, Sequence):
            beads = (beads, beads)
        if len(beads) != 2:
            raise DomainError("PairForces needs exactly two beads")
        self.modes = modes or ModePair()
        self.inj = inj or Injection()
        self.transfers = np.stack([to_transfer(as_scatter_matrix(b)) for b in beads])

    def __call__(self, d) -> tuple[np.ndarray, np.ndarray]:
        d = np.atleast_1d(np.asarray(d, dtype=float))
        F = np.empty((d.size, 2))
        k = self.modes.k
        for lo in range(0, d.size, _CHUNK):
            sl = slice(lo, lo + _CHUNK)
            x, y = _solve_batch(self.transfers, d[sl, None], k, self.inj.left, self.inj.right)
            F[sl] = _balance(*_split(x, y), k)
        F /= self.inj.power
        return F[:, 0], F[:, 1]

    def gap(self, d) -> np.ndarray:
        F1, F2 = self(d)
        return F1 - F2


def default_d_range(modes: ModePair) -> tuple[float, float]:
    """Two beat periods, starting just above contact."""
    return 0.05 / modes.k1, 2 * modes.beat_period


def default_samples(modes: ModePair, d_range) -> int:
    span = d_range[1] - d_range[0]
    return max(
        math.ceil(SAMPLES_PER_BEAT * span / modes.beat_period),
        math.ceil(SAMPLES_PER_FAST * span / modes.fast_period),
        2,
    )


def _resolve(modes, d_range, samples):
    modes = modes or ModePair()
    d_range = tuple(d_range) if d_range is not None else default_d_range(modes)
    if not (0 < d_range[0] < d_range[1]):
        raise DomainError(f"distance range must be positive and increasing, got {d_range}")
    samples = samples or default_samples(modes, d_range)
    if samples < 2:
        raise DomainError("need at least two samples")
    return modes, d_range, samples


def force_vs_distance(beads, modes: ModePair | None = None, inj: Injection | None = None,
                      d_range=None, samples: int | None = None) -> ForceCurve:
    """Sample both forces on a uniform distance grid (endpoints included)."""
    modes, d_range, samples = _resolve(modes, d_range, samples)
    d = np.linspace(d_range[0], d_range[1], samples)
    F1, F2 = PairForces(beads, modes, inj)(d)
    return ForceCurve(d, F1, F2)


def _refine_roots(fn, lo, hi, glo, ghi, max_iter=200):
    """Vectorized Illinois (modified regula falsi) on sign-changing brackets.

    Keeps a valid bracket at every step, so it converges like bisection in
    the worst case and superlinearly near simple roots.
    """
    lo, hi, glo, ghi = lo.copy(), hi.copy(), glo.copy(), ghi.copy()
    x = 0.5 * (lo + hi)
    side = np.zeros(lo.shape, dtype=int)
    for _ in range(max_iter):
        x = (lo * ghi - hi * glo) / (ghi - glo)
        x = np.where(np.isfinite(x) & (x > lo) & (x < hi), x, 0.5 * (lo + hi))
        gx = fn(x)
        done = (np.abs(gx) < ROOT_TOL) | (hi - lo <= 4 * np.finfo(float).eps * np.abs(hi))
        same = np.sign(gx) == np.sign(glo)
        # replace the endpoint on gx's side; halve the stale endpoint value
        # when the same side is replaced twice in a row
        lo, glo, ghi = (np.where(same, x, lo), np.where(same, gx, glo),
                        np.where(same & (side == 1), 0.5 * ghi, ghi))
        hi, ghi, glo = (np.where(same, hi, x), np.where(same, ghi, gx),
                        np.where(~same & (side == -1), 0.5 * glo, glo))
        side = np.where(same, 1, -1)
        if np.all(done):
            break
    return x


def _classify(dF1, dF2):
    # a flat derivative (exactly constant force, e.g. the first bead without
    # backscattering) is accepted as non-violating
    f1_ok = dF1 > -FLAT_DERIVATIVE
    f2_ok = dF2 < FLAT_DERIVATIVE
    restoring = (dF1 - dF2) > FLAT_DERIVATIVE
    return f1_ok & f2_ok & restoring


def find_equilibria(beads, modes: ModePair | None = None, inj: Injection | None = None,
                    d_range=None, samples: int | None = None) -> list[EquilibriumPoint]:
    """All distances in ``d_range`` where both beads feel the same force.

    Roots of ``F1 - F2`` are bracketed by sign changes on a dense grid and
    refined by Illinois regula falsi.  A root is stable when ``dF1/dd >= 0``,
    ``dF2/dd <= 0`` and the difference is strictly restoring, with
    derivatives from central differences.
    """
    modes, d_range, samples = _resolve(modes, d_range, samples)
    pf = PairForces(beads, modes, inj)
    d = np.linspace(d_range[0], d_range[1], samples)
    g = pf.gap(d)
    if np.abs(g).max() < DEGENERATE_FORCE:
        return []

    s = np.sign(g)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
    exact = np.nonzero(s == 0)[0]
    roots = [d[exact]] if exact.size else []
    if idx.size:
        roots.append(_refine_roots(pf.gap, d[idx], d[idx + 1], g[idx], g[idx + 1]))
    if not roots:
        return []
    roots = np.sort(np.concatenate(roots))
    keep = np.concatenate([[True], np.diff(roots) > MERGE_DISTANCE])
    roots = roots[keep]

    h = DERIV_STEP / modes.k1
    F1, F2 = pf(roots)
    F1p, F2p = pf(roots + h)
    F1m, F2m = pf(roots - h)
    dF1 = (F1p - F1m) / (2 * h)
    dF2 = (F2p - F2m) / (2 * h)
    stable = _classify(dF1, dF2)
    return [
        EquilibriumPoint(float(r), float(0.5 * (a + b)), bool(st), float(p), float(q))
        for r, a, b, st, p, q in zip(roots, F1, F2, stable, dF1, dF2)
    ]


def stable_tractor_distances(beads, modes=None, inj=None, d_range=None, samples=None) -> np.ndarray:
    eq = find_equilibria(beads, modes, inj, d_range, samples)
    return np.array([e.d_star for e in eq if e.stable and e.F_common < 0])


def binding_distance_curve(t_values, modes: ModePair | None = None, inj: Injection | None = None,
                           d_range=None, samples: int | None = None) -> list[tuple[float, np.ndarray]]:
    """Stable tractor distances of two forward-only beads for each ``t``."""
    out = []
    for t in t_values:
        bead = SimpleFourPortParams.from_transmission(float(t))
        out.append((float(t), stable_tractor_distances(bead, modes, inj, d_range, samples)))
    return out


def binding_cutoff(modes: ModePair | None = None, inj: Injection | None = None,
                   lo: float = 0.0, hi: float = 0.99, tol: float = 1e-7,
                   d_range=None, samples: int | None = None) -> float:
    """Smallest forward-only transmission ``t`` for which a stable tractor
    distance exists, by bisection on that predicate."""
    def feasible(t):
        bead = SimpleFourPortParams.from_transmission(t)
        return stable_tractor_distances(bead, modes, inj, d_range, samples).size > 0

    if feasible(lo) or not feasible(hi):
        raise DomainError(f"predicate does not change between t={lo} and t={hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# status codes of StabilityMap cells
INFEASIBLE, NO_STABLE, STABLE, FAILED = 0, 1, 2, 3


@dataclass(frozen=True)
class StabilityMap:
    """Minimum force at a stable distance on a (r12, t12) grid.

    Arrays are indexed ``[i_r12, j_t12]``.  ``min_force`` is NaN wherever no
    stable distance exists.
    """

    t12: np.ndarray
    r12: np.ndarray
    status: np.ndarray
    min_force: np.ndarray

    @property
    def feasible(self) -> np.ndarray:
        return self.status != INFEASIBLE

    @property
    def has_stable(self) -> np.ndarray:
        return self.status == STABLE

    def zero_contour(self) -> list[tuple[float, float]]:
        """Points ``(t12, r12)`` where the minimum stable force changes sign
        between neighbouring cells along t12, linearly interpolated."""
        pts = []
        for i, r in enumerate(self.r12):
            row = self.min_force[i]
            for j in range(len(self.t12) - 1):
                a, b = row[j], row[j + 1]
                if np.isfinite(a) and np.isfinite(b) and (a < 0) != (b < 0):
                    w = a / (a - b)
                    pts.append((float(self.t12[j] + w * (self.t12[j + 1] - self.t12[j])), float(r)))
        return pts


def _scan_row(args):
    r12, t12_values, modes, inj, d_range, samples = args
    status = np.full(len(t12_values), INFEASIBLE, dtype=int)
    fmin = np.full(len(t12_values), np.nan)
    for j, t12 in enumerate(t12_values):
        if t12 * t12 + r12 * r12 > 1.0:
            continue
        try:
            bead = SimpleFourPortParams(float(t12), float(r12))
            eq = find_equilibria(bead, modes, inj, d_range, samples)
        except SingularTransferError:
            status[j] = FAILED
            continue
        stable = [e.F_common for e in eq if e.stable]
        if stable:
            status[j], fmin[j] = STABLE, min(stable)
        else:
            status[j] = NO_STABLE
    return status, fmin


def scan_stability_region(t12_values, r12_values, modes: ModePair | None = None,
                          inj: Injection | None = None, d_range=None,
                          samples: int | None = None, n_jobs: int = 1) -> StabilityMap:
    """Run :func:`find_equilibria` on every feasible grid cell.

    Rows (fixed r12) are distributed over ``n_jobs`` worker processes;
    ``n_jobs <= 0`` uses all cores.  Output order does not depend on
    ``n_jobs``.
    """
    t12_values = np.asarray(t12_values, dtype=float)
    r12_values = np.asarray(r12_values, dtype=float)
    if t12_values.min() < 0 or t12_values.max() > 1 or r12_values.min() < 0 or r12_values.max() > 1:
        raise DomainError("grid must lie within [0, 1] x [0, 1]")
    modes, d_range, samples = _resolve(modes, d_range, samples)
    inj = inj or Injection()
    tasks = [(float(r), t12_values, modes, inj, d_range, samples) for r in r12_values]
    if n_jobs <= 0:
        import os
        n_jobs = os.cpu_count() or 1
    if n_jobs == 1:
        rows = list(map(_scan_row, tasks))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_scan_row, tasks))
    status = np.stack([r[0] for r in rows])
    fmin = np.stack([r[1] for r in rows])
    return StabilityMap(t12_values, r12_values, status, fmin)
