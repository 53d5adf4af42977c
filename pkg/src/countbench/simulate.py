"""Simulators for the matching upper-bound algorithms, with exact query accounting.

Three classical samplers and four quantum procedures.  The quantum ones
never touch an n-dimensional statevector: their dynamics provably stay
in a two-dimensional invariant subspace (rotation picture), and the
phase-estimation subroutine is sampled from its exact closed-form
outcome distribution, so desk-scale n up to 1e6 costs nothing while the
query tallies stay exact.

Determinism contract: every procedure takes an ``rng_seed``; batches
derive one child generator per trial from (seed, trial index), so equal
seeds reproduce equal outcome streams bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

DECIDE_SMALL = "k"
DECIDE_LARGE = "k_prime"

PROCEDURES = (
    "coupon",
    "collision",
    "overlap",
    "qcount",
    "subset",
    "sample-count",
    "bootstrap",
)


@dataclass
class QueryTally:
    """Oracle-call counters; fractional weighting happens at report time."""

    copies: int = 0
    state_generation: int = 0
    reflections: int = 0
    membership: int = 0

    def charge(self, counter: str, amount: int) -> None:
        if amount < 0:
            raise ValueError("tallies only increase")
        setattr(self, counter, getattr(self, counter) + amount)

    def merged(self, other: "QueryTally") -> "QueryTally":
        return QueryTally(
            copies=self.copies + other.copies,
            state_generation=self.state_generation + other.state_generation,
            reflections=self.reflections + other.reflections,
            membership=self.membership + other.membership,
        )


@dataclass
class TrialOutcome:
    decision: str
    correct: bool
    tally: QueryTally
    true_size: int
    statistic: float
    failed: bool = False
    in_regime: bool = True


@dataclass(frozen=True)
class OracleInstance:
    """Hidden input: a subset x of {1..n} of size k or k'."""

    n: int
    x: frozenset

    def __post_init__(self):
        if not self.x:
            raise ValueError("hidden set must be nonempty")
        if not all(1 <= e <= self.n for e in self.x):
            raise ValueError("hidden set must lie inside the ground set")

    @property
    def size(self) -> int:
        return len(self.x)


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _k_prime(k: int, eps: float) -> int:
    value = (1.0 + eps) * k
    rounded = round(value)
    if abs(value - rounded) > 1e-9 or rounded <= 0:
        raise ValueError(f"(1+eps)k = {value} is not a positive integer")
    return int(rounded)


def _choose_size(k: int, k_prime: int, rng: np.random.Generator, true_size) -> int:
    if true_size is None:
        return k if rng.integers(2) == 0 else k_prime
    if true_size not in (k, k_prime):
        raise ValueError(f"true_size must be {k} or {k_prime}, got {true_size}")
    return int(true_size)


def _truth_label(size: int, k: int) -> str:
    return DECIDE_SMALL if size == k else DECIDE_LARGE


# ---------------------------------------------------------------------------
# Classical samplers.
# ---------------------------------------------------------------------------


def coupon_test(
    k: int,
    eps: float,
    sample_budget: int,
    rng_seed,
    true_size: int | None = None,
    repetitions: int = 1,
) -> TrialOutcome:
    """Distinct-element counting from classical samples.

    Draws the whole budget uniformly from the hidden set and reports the
    small size iff at most k distinct elements were seen.  Never errs on
    the small hypothesis (one-sided).
    """
    if sample_budget < 0:
        raise ValueError("sample budget must be nonnegative")
    k_prime = _k_prime(k, eps)
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)

    def single(rng: np.random.Generator) -> TrialOutcome:
        if sample_budget:
            distinct = int(np.unique(rng.integers(0, size, sample_budget)).size)
        else:
            distinct = 0
        decision = DECIDE_SMALL if distinct <= k else DECIDE_LARGE
        tally = QueryTally(copies=sample_budget)
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, float(distinct)
        )

    return _repeat_majority(single, repetitions, rng)


def collision_test(
    k: int,
    eps: float,
    sample_count: int,
    rng_seed,
    true_size: int | None = None,
    repetitions: int = 1,
) -> TrialOutcome:
    """Equal-pair counting from classical samples.

    Counts coinciding pairs among the samples; the expected count is
    binom(count, 2)/|x|, so the decision threshold sits midway between
    the two hypothesis expectations: more collisions means the small set.
    """
    if sample_count < 2:
        raise ValueError("need at least two samples")
    k_prime = _k_prime(k, eps)
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)
    total_pairs = sample_count * (sample_count - 1) / 2.0
    midpoint = total_pairs * (1.0 / k + 1.0 / k_prime) / 2.0

    def single(rng: np.random.Generator) -> TrialOutcome:
        counts = np.bincount(rng.integers(0, size, sample_count))
        pairs = float(np.sum(counts * (counts - 1)) / 2.0)
        decision = DECIDE_SMALL if pairs > midpoint else DECIDE_LARGE
        tally = QueryTally(copies=sample_count)
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, pairs
        )

    return _repeat_majority(single, repetitions, rng)


def overlap_test(
    n: int,
    k: int,
    eps: float,
    copy_count: int,
    rng_seed,
    true_size: int | None = None,
    repetitions: int = 1,
) -> TrialOutcome:
    """Measure copies against the uniform superposition over the ground set.

    Each consumed copy succeeds independently with probability |x|/n;
    the success fraction is thresholded midway between k/n and k'/n.
    """
    if copy_count < 1:
        raise ValueError("need at least one copy")
    k_prime = _k_prime(k, eps)
    if k_prime > n:
        raise ValueError("hidden set cannot exceed the ground set")
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)
    midpoint = (k + k_prime) / (2.0 * n)

    def single(rng: np.random.Generator) -> TrialOutcome:
        successes = int(rng.binomial(copy_count, size / n))
        fraction = successes / copy_count
        decision = DECIDE_LARGE if fraction > midpoint else DECIDE_SMALL
        tally = QueryTally(copies=copy_count)
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, fraction
        )

    return _repeat_majority(single, repetitions, rng)


# ---------------------------------------------------------------------------
# Two-dimensional rotation simulator.
# ---------------------------------------------------------------------------


class GroverState:
    """Exact state in the plane spanned by the marked and unmarked components.

    The state is tracked as its angle from the unmarked axis; reflections
    about the marked state and about the source compose to the textbook
    rotation, so after j iterations the marked amplitude is
    sin((2j+1) theta) with sin(theta) = marked_amplitude.  Each reflection
    charges its designated tally counter (None leaves it untallied).
    """

    def __init__(
        self,
        marked_amplitude: float,
        tally: QueryTally | None = None,
        marked_counter: str | None = "reflections",
        source_counter: str | None = None,
    ):
        if not 0.0 < marked_amplitude < 1.0:
            raise ValueError("marked amplitude must lie strictly between 0 and 1")
        self.theta = math.asin(marked_amplitude)
        self.angle = self.theta
        self.tally = tally if tally is not None else QueryTally()
        self.marked_counter = marked_counter
        self.source_counter = source_counter

    def _charge(self, counter: str | None) -> None:
        if counter is not None:
            self.tally.charge(counter, 1)

    def reflect_about_marked(self) -> None:
        self.angle = -self.angle
        self._charge(self.marked_counter)

    def reflect_about_source(self) -> None:
        self.angle = 2.0 * self.theta - self.angle
        self._charge(self.source_counter)

    def iterate(self, count: int = 1) -> None:
        for _ in range(count):
            self.reflect_about_marked()
            self.reflect_about_source()

    @property
    def marked_amplitude(self) -> float:
        return math.sin(self.angle)

    @property
    def marked_probability(self) -> float:
        return math.sin(self.angle) ** 2

    def measure_marked(self, rng: np.random.Generator) -> bool:
        return bool(rng.random() < self.marked_probability)


def grover_state(n: int, marked_amplitude: float, **kwargs) -> GroverState:
    """Rotation simulator for an n-element search space (n is bookkeeping only)."""
    if n < 2:
        raise ValueError("need n >= 2")
    return GroverState(marked_amplitude, **kwargs)


# ---------------------------------------------------------------------------
# Phase estimation, sampled from the exact outcome distribution.
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def phase_estimation_distribution(theta: float, m_points: int) -> np.ndarray:
    """Outcome distribution of M-point phase estimation on the rotation by 2 theta.

    The rotation's eigenphases are +/- 2 theta; the estimation register
    lands on outcome m (measured phase 2 pi m / M) with the squared
    Dirichlet-kernel weight around each branch, each branch carrying
    half the mass.
    """
    if m_points < 2:
        raise ValueError("need at least a two-point grid")
    if not 0.0 <= theta <= math.pi / 2:
        raise ValueError("theta must lie in [0, pi/2]")
    m = np.arange(m_points)
    omega = theta / math.pi  # eigenphase as a fraction of a full turn
    probs = 0.5 * (
        _kernel(m / m_points - omega, m_points) + _kernel(m / m_points + omega, m_points)
    )
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-9:
        raise ArithmeticError(f"outcome distribution sums to {total}")
    out = probs / total
    out.setflags(write=False)
    return out


def _kernel(offsets: np.ndarray, m_points: int) -> np.ndarray:
    s = np.sin(np.pi * offsets)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = (np.sin(np.pi * m_points * offsets) / (m_points * s)) ** 2
    return np.where(s == 0.0, 1.0, value)


def _sample_phase(theta: float, m_points: int, rng: np.random.Generator) -> int:
    return int(rng.choice(m_points, p=phase_estimation_distribution(theta, m_points)))


def _grid_points(theta_a: float, theta_b: float, margin: float = 2.0) -> int:
    """Smallest grid size resolving the two eigenphases with the given margin."""
    gap = 2.0 * abs(theta_b - theta_a)
    if gap <= 0.0:
        raise ValueError("hypotheses have identical phases")
    return max(2, int(math.floor(margin * 2.0 * math.pi / gap)) + 1)


def amplitude_estimate(
    a_true: float, precision_bits: int, rng_seed
) -> tuple[float, QueryTally]:
    """Textbook amplitude estimation with a 2^precision_bits-point register.

    Returns the estimate sin^2(pi m / M) for the sampled outcome m and a
    tally charging M - 1 reflections (the controlled rotation powers).
    """
    if not 0.0 < a_true < 1.0:
        raise ValueError("amplitude must lie strictly between 0 and 1")
    if not 1 <= precision_bits <= 20:
        raise ValueError("precision_bits must lie in 1..20")
    m_points = 1 << precision_bits
    rng = _rng(rng_seed)
    outcome = _sample_phase(math.asin(math.sqrt(a_true)), m_points, rng)
    estimate = math.sin(math.pi * outcome / m_points) ** 2
    return float(estimate), QueryTally(reflections=m_points - 1)


def _estimate_and_decide(
    a_small_hyp: float,
    a_large_hyp: float,
    a_truth: float,
    rng: np.random.Generator,
    margin: float = 2.0,
) -> tuple[str, float, int]:
    """Pick the smallest separating grid, sample once, decide the nearest hypothesis.

    ``a_small_hyp``/``a_large_hyp`` are the success probabilities under
    the small/large size hypotheses (either may be the numerically
    larger one); ties go to the small hypothesis.
    """
    theta_small = math.asin(math.sqrt(a_small_hyp))
    theta_large = math.asin(math.sqrt(a_large_hyp))
    m_points = _grid_points(theta_small, theta_large, margin)
    outcome = _sample_phase(math.asin(math.sqrt(a_truth)), m_points, rng)
    estimate = math.sin(math.pi * outcome / m_points) ** 2
    if abs(estimate - a_large_hyp) < abs(estimate - a_small_hyp):
        return DECIDE_LARGE, float(estimate), m_points
    return DECIDE_SMALL, float(estimate), m_points


# ---------------------------------------------------------------------------
# Quantum procedures.
# ---------------------------------------------------------------------------


def quantum_counting(
    n: int,
    k: int,
    eps: float,
    rng_seed,
    true_size: int | None = None,
    oracle: str = "reflections",
    repetitions: int = 1,
) -> TrialOutcome:
    """Amplitude estimation of |x|/n on the smallest grid separating the hypotheses.

    The counted resource is one controlled rotation per grid step; the
    caller selects whether the rotation is implemented from the
    reflecting oracle or from membership queries.
    """
    if oracle not in ("reflections", "membership"):
        raise ValueError("oracle must be 'reflections' or 'membership'")
    k_prime = _k_prime(k, eps)
    if k_prime >= n:
        raise ValueError("need k' < n")
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)  # one hidden set per trial

    def single(rng: np.random.Generator) -> TrialOutcome:
        decision, estimate, m_points = _estimate_and_decide(
            k / n, k_prime / n, size / n, rng
        )
        tally = QueryTally()
        tally.charge(oracle, m_points - 1)
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, estimate
        )

    return _repeat_majority(single, repetitions, rng)


def known_subset_counting(
    n: int,
    k: int,
    eps: float,
    ell: int,
    rng_seed,
    true_size: int | None = None,
    oracle: str = "reflections",
    repetitions: int = 1,
) -> TrialOutcome:
    """Amplitude estimation of ell/|x| when ell distinct elements are given.

    Consumes no copies; tallies the grid rotations on the selected oracle
    (two state-generation calls implement one reflection).  ell beyond
    k/2 is flagged out of regime but still simulated.
    """
    if not 1 <= ell <= k:
        raise ValueError(f"need 1 <= ell <= k, got ell={ell}")
    if oracle not in ("reflections", "state_generation"):
        raise ValueError("oracle must be 'reflections' or 'state_generation'")
    k_prime = _k_prime(k, eps)
    if k_prime >= n:
        raise ValueError("need k' < n")
    rng = _rng(rng_seed)
    in_regime = ell <= k / 2
    size = _choose_size(k, k_prime, rng, true_size)

    def single(rng: np.random.Generator) -> TrialOutcome:
        decision, estimate, m_points = _estimate_and_decide(
            ell / k, ell / k_prime, ell / size, rng
        )
        tally = QueryTally()
        if oracle == "reflections":
            tally.charge("reflections", m_points - 1)
        else:
            tally.charge("state_generation", 2 * (m_points - 1))
        return TrialOutcome(
            decision,
            decision == _truth_label(size, k),
            tally,
            size,
            estimate,
            in_regime=in_regime,
        )

    return _repeat_majority(single, repetitions, rng)


def _collect_distinct(
    target: int, size: int, budget: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Sample uniformly until ``target`` distinct elements are seen or the budget ends.

    Returns (distinct found, samples consumed).
    """
    seen: set = set()
    consumed = 0
    while len(seen) < target and consumed < budget:
        seen.add(int(rng.integers(0, size)))
        consumed += 1
    return len(seen), consumed


def sample_then_count(
    n: int,
    k: int,
    eps: float,
    rng_seed,
    true_size: int | None = None,
    repetitions: int = 1,
) -> TrialOutcome:
    """Obtain ceil(k^(1/3) / (2 eps^(2/3))) samples, then count against them.

    Every sample costs one state-generation call (duplicates are
    discarded; the resampling budget is 10x the target, exhaustion fails
    the trial), and each estimation rotation costs two more.
    """
    k_prime = _k_prime(k, eps)
    if k_prime >= n:
        raise ValueError("need k' < n")
    ell = math.ceil(k ** (1.0 / 3.0) / (2.0 * eps ** (2.0 / 3.0)))
    if ell > k / 2:
        raise ValueError(f"sampling stage needs ell <= k/2, got ell={ell}, k={k}")
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)

    def single(rng: np.random.Generator) -> TrialOutcome:
        found, consumed = _collect_distinct(ell, size, 10 * ell, rng)
        tally = QueryTally(state_generation=consumed)
        if found < ell:
            return TrialOutcome(
                DECIDE_SMALL, False, tally, size, float(found), failed=True
            )
        decision, estimate, m_points = _estimate_and_decide(
            ell / k, ell / k_prime, ell / size, rng
        )
        tally.charge("state_generation", 2 * (m_points - 1))
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, estimate
        )

    return _repeat_majority(single, repetitions, rng)


def bootstrap_reflection_counting(
    n: int,
    k: int,
    eps: float,
    rng_seed,
    true_size: int | None = None,
    retries: int = 3,
    repetitions: int = 1,
) -> TrialOutcome:
    """Grow a known subset by reflection-driven search, then count against it.

    One element of the hidden set comes free.  Each growth stage rotates
    the known-subset state toward the hidden-set state (overlap
    sqrt(s/|x|)) for ceil(pi/4 sqrt(|x|/s)) oracle reflections and then
    measures; the rotated state has no support outside the hidden set,
    so landing outside the known subset always yields a fresh element.
    Failed stages retry up to ``retries`` extra times.  The grown subset
    of size ceil(1/eps) then feeds the known-subset counter.
    """
    if retries < 0:
        raise ValueError("retries must be nonnegative")
    k_prime = _k_prime(k, eps)
    if k_prime >= n:
        raise ValueError("need k' < n")
    target = math.ceil(1.0 / eps)
    if target > k / 2:
        raise ValueError(f"growth target {target} exceeds k/2")
    rng = _rng(rng_seed)
    size = _choose_size(k, k_prime, rng, true_size)

    def single(rng: np.random.Generator) -> TrialOutcome:
        tally = QueryTally()
        known = 1
        while known < target:
            theta = math.asin(math.sqrt(known / size))
            iterations = math.ceil(math.pi / 4.0 * math.sqrt(size / known))
            success_probability = math.sin(2.0 * iterations * theta) ** 2
            succeeded = False
            for _ in range(1 + retries):
                tally.charge("reflections", iterations)
                if rng.random() < success_probability:
                    succeeded = True
                    break
            if not succeeded:
                return TrialOutcome(
                    DECIDE_SMALL, False, tally, size, float(known), failed=True
                )
            known += 1
        decision, estimate, m_points = _estimate_and_decide(
            target / k, target / k_prime, target / size, rng
        )
        tally.charge("reflections", m_points - 1)
        return TrialOutcome(
            decision, decision == _truth_label(size, k), tally, size, estimate
        )

    return _repeat_majority(single, repetitions, rng)


def _repeat_majority(single, repetitions: int, rng: np.random.Generator) -> TrialOutcome:
    """Majority vote over independent repetitions; tallies accumulate.

    All repetitions run against the same hidden set (drawn by the caller
    before building ``single``); ties and all-failed votes resolve to the
    small hypothesis and a failed trial, respectively.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    first = single(rng)
    if repetitions == 1:
        return first
    outcomes = [first] + [single(rng) for _ in range(repetitions - 1)]
    tally = QueryTally()
    for out in outcomes:
        tally = tally.merged(out.tally)
    decided = [out for out in outcomes if not out.failed]
    if not decided:
        return replace(first, tally=tally, failed=True, correct=False)
    # Failed runs carry a placeholder decision, so read the truth off the
    # first run that actually decided (correct <=> decision == truth there).
    reference = decided[0]
    truth = reference.decision if reference.correct else (
        DECIDE_SMALL if reference.decision == DECIDE_LARGE else DECIDE_LARGE
    )
    large_votes = sum(out.decision == DECIDE_LARGE for out in decided)
    decision = DECIDE_LARGE if 2 * large_votes > len(decided) else DECIDE_SMALL
    return TrialOutcome(
        decision=decision,
        correct=decision == truth,
        tally=tally,
        true_size=first.true_size,
        statistic=float(np.mean([out.statistic for out in outcomes])),
        failed=False,
        in_regime=first.in_regime,
    )


# ---------------------------------------------------------------------------
# Batch driver.
# ---------------------------------------------------------------------------

_PROCEDURE_FUNCS = {
    "coupon": coupon_test,
    "collision": collision_test,
    "overlap": overlap_test,
    "qcount": quantum_counting,
    "subset": known_subset_counting,
    "sample-count": sample_then_count,
    "bootstrap": bootstrap_reflection_counting,
}


def run_trial(procedure: str, params: dict, rng_seed) -> TrialOutcome:
    """Dispatch one trial of a named procedure with keyword parameters."""
    try:
        func = _PROCEDURE_FUNCS[procedure]
    except KeyError:
        raise ValueError(
            f"unknown procedure {procedure!r}; known: {PROCEDURES}"
        ) from None
    return func(rng_seed=rng_seed, **params)


def run_batch(procedure: str, params: dict, trials: int, seed: int) -> list[TrialOutcome]:
    """Independent trials with per-trial child seeds (master seed, index)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    return [run_trial(procedure, params, (seed, i)) for i in range(trials)]


def aggregate(outcomes) -> dict:
    """Success rate with binomial standard error, plus mean tallies."""
    outcomes = list(outcomes)
    trials = len(outcomes)
    if trials == 0:
        raise ValueError("nothing to aggregate")
    rate = sum(out.correct for out in outcomes) / trials
    return {
        "trials": trials,
        "success_rate": rate,
        "standard_error": math.sqrt(rate * (1.0 - rate) / trials),
        "failure_rate": sum(out.failed for out in outcomes) / trials,
        "mean_copies": float(np.mean([out.tally.copies for out in outcomes])),
        "mean_state_generation": float(
            np.mean([out.tally.state_generation for out in outcomes])
        ),
        "mean_reflections": float(np.mean([out.tally.reflections for out in outcomes])),
        "mean_membership": float(np.mean([out.tally.membership for out in outcomes])),
    }
