"""Total extractable randomness: evaluation, sweeps, maximization, thresholds.

The per-step certificates use the ideal protocol angle of that step, and the
per-history values are aggregated (probability-weighted by default) before
summing over steps.

Maximization is a deterministic two-stage search: a coarse grid with extra
logarithmic resolution near zero, then golden-section refinement along each
coordinate.  Near-equal candidates (within ``TIE_ATOL``) resolve to the
lexicographically smallest strengths vector: a strength of pi/4 makes a step
non-interactive, so e.g. (pi/4, x) replays the shorter protocol one step
later with exactly the same total, and the tie rule keeps "the optimal
strength is zero" well defined for the threshold criteria.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .bell import _certificate
from .errors import BracketingError, CertificationUndefinedError, DomainError
from .noise import NoiseParams
from .protocol import ProtocolConfig, _evolve_levels

PI4 = np.pi / 4

# "optimal strength is zero" test margin: optima below this are treated as 0
DEADBAND = 1e-4

# value margin under which two candidate optima count as tied
TIE_ATOL = 1e-9

# strengths within this band of pi/4 count as non-interactive when picking
# refinement candidates; the band separates the replay ridge (a step that
# measures almost nothing) from genuinely interior optima
NONINTERACTIVE_BAND = 0.05

GOLDEN_TOL = 1e-6

THREADS_ENV = "SEQBELL_THREADS"


class Aggregation(Enum):
    PROBABILITY_WEIGHTED = "probability_weighted"
    WORST_CASE = "worst_case"


@dataclass(frozen=True)
class StepEntropy:
    """History-aggregated certified bits of one step."""

    step: int
    h_min: float
    degenerate: bool = False


@dataclass(frozen=True)
class ExtractionSummary:
    per_step: tuple[StepEntropy, ...]
    total_bits: float
    aggregation: Aggregation


@dataclass(frozen=True)
class MaximizeResult:
    strengths: tuple[float, ...]
    total_bits: float


@dataclass(frozen=True)
class ThresholdQuery:
    """What to bisect for: a strength collapsing to zero, or a bit target.

    criterion "xi1" tests the two-step optimum, "xi2" the three-step one;
    "bits" finds where the best protocol in which every step still
    contributes reaches ``bits`` certified bits.
    """

    criterion: str
    bits: float | None = None
    steps: int | None = None
    bracket: tuple[float, float] = (1e-10, 1e-1)
    rel_tol: float = 1e-3
    c: float = 0.0

    def __post_init__(self):
        if self.criterion not in ("xi1", "xi2", "bits"):
            raise DomainError(f"unknown threshold criterion {self.criterion!r}")
        if self.criterion == "bits" and self.bits is None:
            raise DomainError("criterion 'bits' needs a target bit count")
        lo, hi = self.bracket
        if not (0.0 < lo < hi):
            raise DomainError(f"bracket must satisfy 0 < low < high, got {self.bracket}")
        if self.rel_tol <= 0.0:
            raise DomainError("rel_tol must be positive")

    def n_steps(self) -> int:
        if self.steps is not None:
            if self.steps not in (1, 2, 3):
                raise DomainError(f"steps must be 1, 2 or 3, got {self.steps}")
            if self.criterion == "xi2" and self.steps != 3:
                raise DomainError("criterion 'xi2' needs a three-step protocol")
            return self.steps
        return {"xi1": 2, "xi2": 3, "bits": 3}[self.criterion]


@dataclass(frozen=True)
class ThresholdResult:
    criterion: str
    p_thr: float
    iterations: int


def total_entropy(
    config: ProtocolConfig,
    aggregation: Aggregation = Aggregation.PROBABILITY_WEIGHTED,
) -> ExtractionSummary:
    """Certified bits summed over all steps of the protocol.

    Step k is certified on every depth-(k-1) branch with that step's ideal
    angle and strength; the per-history values are aggregated and the steps
    summed.  A step whose ideal angle has collapsed to zero (no entanglement
    left to certify) contributes 0 bits and is flagged ``degenerate``.
    """
    per_step = _per_step_entropies(config, aggregation)
    return ExtractionSummary(
        per_step=per_step,
        total_bits=float(sum(e.h_min for e in per_step)),
        aggregation=aggregation,
    )


def _per_step_entropies(
    config: ProtocolConfig, aggregation: Aggregation
) -> tuple[StepEntropy, ...]:
    n = config.n_steps
    levels = _evolve_levels(config, max_depth=n - 1) if n else []
    entries = []
    for k in range(n):
        nodes, theta = levels[k]
        xi = float(config.strengths[k])
        try:
            hs = [_certificate(rho, theta, xi).h_min for _, _, rho in nodes]
        except CertificationUndefinedError:
            entries.append(StepEntropy(step=k + 1, h_min=0.0, degenerate=True))
            continue
        if aggregation is Aggregation.WORST_CASE:
            value = min(hs)
        else:
            value = float(sum(p * h for (_, p, _), h in zip(nodes, hs)))
        entries.append(StepEntropy(step=k + 1, h_min=value))
    return tuple(entries)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    xi1: float
    h1: float
    h2: float
    total: float


@dataclass(frozen=True)
class SurfacePoint:
    xi1: float
    xi2: float
    h1: float
    h2: float
    h3: float
    total: float


def _two_step_total(args) -> SweepPoint:
    p, c, x1 = args
    summary = total_entropy(ProtocolConfig(PI4, (x1, 0.0), NoiseParams(p, c)))
    h1, h2 = (e.h_min for e in summary.per_step)
    return SweepPoint(x1, h1, h2, summary.total_bits)


def _three_step_total(args) -> SurfacePoint:
    p, c, x1, x2 = args
    summary = total_entropy(ProtocolConfig(PI4, (x1, x2, 0.0), NoiseParams(p, c)))
    h1, h2, h3 = (e.h_min for e in summary.per_step)
    return SurfacePoint(x1, x2, h1, h2, h3, summary.total_bits)


def worker_count() -> int:
    """Worker processes for grid evaluation (env ``SEQBELL_THREADS``, default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _map_ordered(fn, items):
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) < 32:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * n))
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def sweep_one(p: float, c: float, xi1_grid) -> list[SweepPoint]:
    """Two-step totals (second step projective) over a grid of xi1."""
    grid = sorted(float(x) for x in xi1_grid)
    return _map_ordered(_two_step_total, [(p, c, x) for x in grid])


def sweep_two(p: float, c: float, xi1_grid, xi2_grid) -> list[SurfacePoint]:
    """Three-step totals (third step projective) over a xi1 x xi2 grid."""
    g1 = sorted(float(x) for x in xi1_grid)
    g2 = sorted(float(x) for x in xi2_grid)
    return _map_ordered(_three_step_total, [(p, c, x1, x2) for x1 in g1 for x2 in g2])


# ---------------------------------------------------------------------------
# maximization
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def coarse_grid() -> np.ndarray:
    """Strength grid: linear coverage plus logarithmic refinement near zero."""
    g = np.unique(
        np.concatenate(
            [
                [0.0],
                np.logspace(-7, np.log10(0.2), 80),
                np.linspace(0.0, PI4, 121),
                [PI4],
            ]
        )
    )
    g.setflags(write=False)
    return g


def _golden_max(f, lo: float, hi: float, tol: float = GOLDEN_TOL):
    """Golden-section maximization of f on [lo, hi]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _neighbor_window(grid: np.ndarray, v: float) -> tuple[float, float]:
    i = int(np.searchsorted(grid, v))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    if hi - lo < 1e-12:
        lo, hi = max(0.0, v - 1e-3), min(PI4, v + 1e-3)
    return float(lo), float(hi)


def _refine(f, grid: np.ndarray, point: tuple[float, ...], rounds: int = 4):
    """Per-coordinate golden-section polish around a grid candidate."""
    point = list(point)
    value = f(tuple(point))
    for _ in range(rounds):
        improved = False
        for axis in range(len(point)):
            def along(v, axis=axis):
                trial = list(point)
                trial[axis] = v
                return f(tuple(trial))

            lo, hi = _neighbor_window(grid, point[axis])
            x, fx = _golden_max(along, lo, hi)
            if fx > value + 1e-12:
                point[axis], value = x, fx
                improved = True
        if not improved:
            break
    return tuple(point), value


def _pick_best(candidates: list[tuple[tuple[float, ...], float]]):
    """Highest value; near-ties resolve to the fewest active steps.

    A non-interactive strength (pi/4) replays the shorter protocol at the
    same total, so among tied candidates the one engaging fewer steps is
    the canonical optimum; remaining ties fall back to lexicographic order.
    """
    best_value = max(v for _, v in candidates)
    tied = [pt for pt, v in candidates if v >= best_value - TIE_ATOL]
    chosen = min(tied, key=lambda pt: (sum(x > DEADBAND for x in pt), pt))
    return chosen, best_value


def _bucket(x: float) -> int:
    if x <= DEADBAND:
        return 0
    if x >= PI4 - NONINTERACTIVE_BAND:
        return 2
    return 1


def _grid_classes(points_values):
    """Best grid point per coordinate-bucket class (zero/interior/inactive).

    Refining the best representative of every class keeps basin competition
    fair near a threshold, where coarse sampling error can exceed the gap
    between the competing optima; bucketing the near-pi/4 band separately
    stops the replay ridge from shadowing a genuinely interior basin.
    """
    best: dict[tuple[int, ...], tuple[tuple[float, ...], float]] = {}
    for pt, v in points_values:
        key = tuple(_bucket(x) for x in pt)
        if key not in best or v > best[key][1]:
            best[key] = (pt, v)
    return list(best.values())


def _local_maxima(points_values, top: int = 8):
    """Top grid points that beat all their grid neighbors.

    A basin narrower than the grid spacing can sample below a broad ridge
    everywhere except at its own local maximum; refining the strongest
    local maxima guarantees such basins still get polished.
    """
    points = [pt for pt, _ in points_values]
    values = np.array([v for _, v in points_values])
    dim = len(points[0])
    if dim == 1:
        n = len(values)
        padded = np.concatenate([[-np.inf], values, [-np.inf]])
        mask = (values >= padded[:n]) & (values >= padded[2:])
    else:
        side = int(round(np.sqrt(len(values))))
        grid = values.reshape(side, side)
        padded = np.pad(grid, 1, constant_values=-np.inf)
        mask = np.ones_like(grid, dtype=bool)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                mask &= grid >= padded[1 + di:1 + di + side, 1 + dj:1 + dj + side]
        mask = mask.ravel()
    ranked = sorted(
        ((points[i], float(values[i])) for i in np.flatnonzero(mask)),
        key=lambda pv: -pv[1],
    )
    return ranked[:top]


def _grid_summaries(p: float, c: float, n_steps: int):
    """(point, per-step entropies, total) over the coarse grid."""
    grid = coarse_grid()
    if n_steps == 2:
        rows = _map_ordered(_two_step_total, [(p, c, float(x)) for x in grid])
        return [((row.xi1,), (row.h1, row.h2), row.total) for row in rows]
    rows = _map_ordered(
        _three_step_total,
        [(p, c, float(x1), float(x2)) for x1 in grid for x2 in grid],
    )
    return [((row.xi1, row.xi2), (row.h1, row.h2, row.h3), row.total) for row in rows]


def maximize(p: float, c: float, n_steps: int) -> MaximizeResult:
    """Best strengths (last fixed projective) and the total they certify."""
    if n_steps not in (1, 2, 3):
        raise DomainError(f"n_steps must be 1, 2 or 3, got {n_steps}")
    if n_steps == 1:
        return MaximizeResult(strengths=(0.0,), total_bits=_point_value(p, c, ()))

    def f(pt: tuple[float, ...]) -> float:
        return _point_value(p, c, pt)

    grid = coarse_grid()
    scored = [(pt, total) for pt, _, total in _grid_summaries(p, c, n_steps)]
    candidates = _grid_classes(scored) + _local_maxima(scored)
    refined = [_refine(f, grid, pt) for pt, _ in candidates]
    point, value = _pick_best(candidates + refined)
    strengths = tuple(float(x) for x in point) + (0.0,)
    return MaximizeResult(strengths=strengths, total_bits=float(value))


def _point_value(p: float, c: float, pt: tuple[float, ...]) -> float:
    config = ProtocolConfig(PI4, pt + (0.0,), NoiseParams(p, c))
    return total_entropy(config).total_bits


def _constrained_best(p: float, c: float, n_steps: int) -> float:
    """Best total among strengths where every step still contributes bits.

    This is the quantity behind the "reach N bits with all steps useful"
    threshold; without the constraint the search collapses onto shorter
    protocols through non-interactive (pi/4) steps.
    """

    def value(pt: tuple[float, ...]) -> float:
        config = ProtocolConfig(PI4, pt + (0.0,), NoiseParams(p, c))
        summary = total_entropy(config)
        if any(e.h_min <= 0.0 for e in summary.per_step):
            return -np.inf
        return summary.total_bits

    if n_steps == 1:
        return value(())
    grid = coarse_grid()
    feasible = [
        (pt, total)
        for pt, per_step, total in _grid_summaries(p, c, n_steps)
        if min(per_step) > 0.0
    ]
    if not feasible:
        return -np.inf
    # feasibility already excludes the replay ridges (some step idle there),
    # so the strongest feasible samples sit in genuine basins
    candidates = sorted(feasible, key=lambda pv: -pv[1])[:3]
    best = max(v for _, v in candidates)
    for pt, _ in candidates:
        _, refined_value = _refine(value, grid, pt)
        best = max(best, refined_value)
    return float(best)


# ---------------------------------------------------------------------------
# thresholds
# ---------------------------------------------------------------------------


def find_threshold(query: ThresholdQuery) -> ThresholdResult:
    """Bisect log10(p) for the noise level where the criterion flips.

    Raises :class:`BracketingError` when the criterion has the same truth
    value at both bracket ends.
    """
    n_steps = query.n_steps()

    def crit(p: float) -> bool:
        if query.criterion == "xi1":
            return maximize(p, query.c, n_steps).strengths[0] > DEADBAND
        if query.criterion == "xi2":
            return maximize(p, query.c, n_steps).strengths[1] > DEADBAND
        return _constrained_best(p, query.c, n_steps) >= float(query.bits)

    lo, hi = (float(x) for x in query.bracket)
    c_lo, c_hi = crit(lo), crit(hi)
    if c_lo == c_hi:
        raise BracketingError(
            f"criterion {query.criterion!r} is {c_lo} at both bracket ends "
            f"({lo:g}, {hi:g}); widen the bracket"
        )
    log_lo, log_hi = np.log10(lo), np.log10(hi)
    iterations = 0
    while 10.0 ** (log_hi - log_lo) - 1.0 > query.rel_tol:
        mid = 0.5 * (log_lo + log_hi)
        if crit(10.0 ** mid) == c_lo:
            log_lo = mid
        else:
            log_hi = mid
        iterations += 1
    p_thr = float(10.0 ** (0.5 * (log_lo + log_hi)))
    return ThresholdResult(criterion=query.criterion, p_thr=p_thr, iterations=iterations)
