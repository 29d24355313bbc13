"""Genetic search over joint (price, allocation) decisions for selected products.

A chromosome interleaves one price and one allocation per product.  Repair
projects prices onto the band where the weekly demand implied by the fitted
curve stays inside the bootstrap sales interval, and clamps allocations into
the same interval.  Fitness is expected weekly profit with unsold allocation
written off at wholesale cost.  Tournament selection, per-gene blend crossover,
Gaussian mutation with a geometrically decaying step, and one-elite survivor
selection drive the search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .demand import DemandCurve
from .errors import InputError, InvariantError
from .intervals import SalesInterval

EPSILON = 1e-6
WEEK_DAYS = 7.0
PRICE_CAP_MARKUP = 5.0  # price box upper bound, as a multiple of unit cost,
                        # for products whose demand curve is not downward-sloping


@dataclass
class ProductContext:
    product_id: str
    unit_cost: float
    demand: DemandCurve
    interval: SalesInterval

    def __post_init__(self):
        if self.unit_cost <= 0.0:
            raise InputError(f"{self.product_id}: unit cost must be positive")
        if self.interval.lower < 0.0:
            raise InputError(f"{self.product_id}: interval lower bound must be >= 0")


def weekly_demand(ctx: ProductContext, price: float) -> float:
    """Weekly sales volume a price induces.

    Downward-sloping curves scale the daily fit to a week; flat or anomalous
    (non-negative slope) curves are treated as price-insensitive at the fitted
    mean volume, clamped into the sales interval.
    """
    curve = ctx.demand
    if curve.slope < 0.0:
        return WEEK_DAYS * max(0.0, curve.intercept + curve.slope * price)
    pinned = WEEK_DAYS * max(0.0, curve.mean_volume)
    return float(np.clip(pinned, ctx.interval.lower, ctx.interval.upper))


@dataclass
class GeneBoxes:
    """Per-gene feasible intervals: [2N] lows and highs, price/alloc interleaved."""

    low: np.ndarray
    high: np.ndarray

    @property
    def width(self) -> np.ndarray:
        return self.high - self.low


def gene_boxes(contexts: list[ProductContext]) -> GeneBoxes:
    """Feasible boxes used for initialization, repair, and mutation scale.

    For a downward-sloping curve the price band is the preimage of the sales
    interval under the weekly demand line (empty preimages collapse toward the
    closest achievable price); otherwise price is bounded by a markup cap.
    Allocation is bounded by the sales interval.
    """
    lows, highs = [], []
    for ctx in contexts:
        curve, interval = ctx.demand, ctx.interval
        if curve.slope < 0.0:
            p_at_upper = (interval.upper / WEEK_DAYS - curve.intercept) / curve.slope
            p_at_lower = (interval.lower / WEEK_DAYS - curve.intercept) / curve.slope
            p_lo = max(EPSILON, p_at_upper)
            p_hi = max(p_lo, p_at_lower)
        else:
            p_lo = EPSILON
            p_hi = max(PRICE_CAP_MARKUP * ctx.unit_cost, 2.0 * EPSILON)
        a_hi = max(interval.upper, EPSILON)
        a_lo = min(max(interval.lower, EPSILON), a_hi)
        lows.extend([p_lo, a_lo])
        highs.extend([p_hi, a_hi])
    return GeneBoxes(np.array(lows), np.array(highs))


def repair(chromosome: np.ndarray, boxes: GeneBoxes) -> np.ndarray:
    """Project every gene into its feasible box (total, idempotent)."""
    return np.clip(np.asarray(chromosome, dtype=np.float64), boxes.low, boxes.high)


def fitness(chromosome: np.ndarray, contexts: list[ProductContext],
            boxes: GeneBoxes | None = None) -> float:
    """Expected weekly profit: sum of price * min(alloc, demand) - cost * alloc."""
    c = np.asarray(chromosome, dtype=np.float64)
    if c.shape != (2 * len(contexts),):
        raise InputError(f"chromosome length {c.shape} does not match {len(contexts)} products")
    if boxes is not None and (np.any(c < boxes.low - 1e-9) or np.any(c > boxes.high + 1e-9)):
        raise InvariantError("fitness called on an unrepaired chromosome")
    if np.any(c[::2] <= 0.0) or np.any(c[1::2] <= 0.0):
        raise InvariantError("prices and allocations must be positive")
    total = 0.0
    for i, ctx in enumerate(contexts):
        price, alloc = c[2 * i], c[2 * i + 1]
        sold = min(alloc, weekly_demand(ctx, price))
        total += price * sold - ctx.unit_cost * alloc
    return total


@dataclass
class MutationConfig:
    prob: float = 0.1            # per-gene mutation probability
    sigma_fraction: float = 0.1  # Gaussian sigma as a fraction of the gene's box width
    decay: float = 0.995         # multiplicative sigma decay per generation

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise InputError(f"mutation probability must be in [0, 1], got {self.prob}")
        if self.sigma_fraction < 0.0:
            raise InputError(f"sigma_fraction must be >= 0, got {self.sigma_fraction}")
        if not 0.0 < self.decay <= 1.0:
            raise InputError(f"decay must be in (0, 1], got {self.decay}")


def gaussian_mutate(chromosome: np.ndarray, boxes: GeneBoxes, cfg: MutationConfig,
                    rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Add zero-mean Gaussian noise to randomly selected genes; sigma is
    `scale * sigma_fraction * box width` per gene."""
    c = np.array(chromosome, dtype=np.float64)
    mask = rng.random(c.shape) < cfg.prob
    sigma = scale * cfg.sigma_fraction * boxes.width
    noise = rng.normal(0.0, 1.0, size=c.shape) * sigma
    c[mask] += noise[mask]
    return c


def crossover(parent_a: np.ndarray, parent_b: np.ndarray,
              rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-gene blend crossover: u ~ U[-0.5, 1.5], children from complementary draws."""
    a = np.asarray(parent_a, dtype=np.float64)
    b = np.asarray(parent_b, dtype=np.float64)
    if a.shape != b.shape:
        raise InputError(f"parent length mismatch: {a.shape} vs {b.shape}")
    u = rng.uniform(-0.5, 1.5, size=a.shape)
    return u * a + (1.0 - u) * b, (1.0 - u) * a + u * b


@dataclass
class GenerationStats:
    generation: int
    max_fitness: float
    min_fitness: float
    avg_fitness: float


@dataclass
class GaConfig:
    pop: int = 200
    gens: int = 500
    tournament: int = 3
    elitism: int = 1
    crossover_rate: float = 0.9
    mutation: MutationConfig = field(default_factory=MutationConfig)
    seed: int = 0


@dataclass
class GaResult:
    best: np.ndarray
    best_fitness: float
    trace: list[GenerationStats]
    evaluations: int


def _tournament_pick(fits: np.ndarray, size: int, rng: np.random.Generator) -> int:
    contenders = rng.integers(0, len(fits), size=size)
    return int(contenders[np.argmax(fits[contenders])])


def evolve(contexts: list[ProductContext], config: GaConfig | None = None) -> GaResult:
    """Run the GA; the best individual is carried over unconditionally, so the
    best fitness in the trace is non-decreasing."""
    if not contexts:
        raise InputError("no product contexts")
    if all(ctx.interval.upper <= 0.0 for ctx in contexts):
        raise InputError("no feasible plan")
    config = config if config is not None else GaConfig()
    boxes = gene_boxes(contexts)
    rng = np.random.default_rng(config.seed)

    pop = rng.uniform(boxes.low, boxes.high, size=(config.pop, boxes.low.size))
    fits = np.array([fitness(ind, contexts, boxes) for ind in pop])
    evaluations = config.pop

    best_idx = int(np.argmax(fits))
    best = pop[best_idx].copy()
    best_fit = float(fits[best_idx])

    trace: list[GenerationStats] = []
    scale = 1.0
    for gen in range(config.gens):
        children = np.empty_like(pop)
        for i in range(0, config.pop, 2):
            pa = pop[_tournament_pick(fits, config.tournament, rng)]
            pb = pop[_tournament_pick(fits, config.tournament, rng)]
            if rng.random() < config.crossover_rate:
                ca, cb = crossover(pa, pb, rng)
            else:
                ca, cb = pa.copy(), pb.copy()
            children[i] = ca
            if i + 1 < config.pop:
                children[i + 1] = cb
        for i in range(config.pop):
            children[i] = repair(
                gaussian_mutate(children[i], boxes, config.mutation, rng, scale), boxes)
        child_fits = np.array([fitness(ind, contexts, boxes) for ind in children])
        evaluations += config.pop

        gen_best = int(np.argmax(child_fits))
        if child_fits[gen_best] > best_fit:
            best = children[gen_best].copy()
            best_fit = float(child_fits[gen_best])
        if config.elitism >= 1:
            worst = int(np.argmin(child_fits))
            children[worst] = best
            child_fits[worst] = best_fit
        pop, fits = children, child_fits
        scale *= config.mutation.decay

        trace.append(GenerationStats(
            generation=gen,
            max_fitness=float(fits.max()),
            min_fitness=float(fits.min()),
            avg_fitness=float(fits.mean()),
        ))
    return GaResult(best=best, best_fitness=best_fit, trace=trace, evaluations=evaluations)


def random_search(contexts: list[ProductContext], evaluations: int, seed: int = 0) -> tuple[np.ndarray, float]:
    """Equal-budget baseline: best of `evaluations` uniform draws from the boxes."""
    if not contexts:
        raise InputError("no product contexts")
    boxes = gene_boxes(contexts)
    rng = np.random.default_rng(seed)
    best, best_fit = None, -np.inf
    for _ in range(evaluations):
        candidate = repair(rng.uniform(boxes.low, boxes.high, size=boxes.low.size), boxes)
        f = fitness(candidate, contexts, boxes)
        if f > best_fit:
            best, best_fit = candidate, f
    return best, float(best_fit)


def decode_plan(chromosome: np.ndarray, contexts: list[ProductContext]) -> list[dict]:
    """Decode a chromosome into per-product plan rows."""
    rows = []
    for i, ctx in enumerate(contexts):
        price = float(chromosome[2 * i])
        alloc = float(chromosome[2 * i + 1])
        sold = min(alloc, weekly_demand(ctx, price))
        rows.append({
            "product_id": ctx.product_id,
            "price": price,
            "allocation": alloc,
            "expected_sales": sold,
            "expected_profit": price * sold - ctx.unit_cost * alloc,
        })
    return rows
