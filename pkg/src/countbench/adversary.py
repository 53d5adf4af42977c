"""Closed-form side of the certificate: coefficients, schedules, norms.

The certificate matrix is Gamma = sum_j gamma_j Phi_j with the weight
schedule gamma_j = max(1 - j/t, 0).  Its interplay with the oracle
difference operators reduces to arithmetic on a table of 4-dimensional
unit vectors phi_j (one per block index j, plus a primed copy with k'
in place of k); this module owns all of that arithmetic, together with
the feasibility report and the headline trade-off evaluator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import johnson


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemInstance:
    """One counting instance: distinguish |x| = k from |x| = k' inside {1..n}.

    k' = (1 + eps) k with eps = (k' - k)/k; n >= 2k' + 1 keeps every
    coefficient denominator positive and both level decompositions valid.
    The degenerate case k' = k is accepted for closed-form testing only
    (transporters and brute-force checks need k < k').
    """

    n: int
    k: int
    k_prime: int

    def __post_init__(self):
        for name in ("n", "k", "k_prime"):
            value = getattr(self, name)
            if not isinstance(value, int):
                raise ValueError(f"{name} must be an integer, got {value!r}")
        if not (1 <= self.k <= self.k_prime):
            raise ValueError(f"need 1 <= k <= k', got k={self.k}, k'={self.k_prime}")
        if self.n < 2 * self.k_prime + 1:
            raise ValueError(
                f"need n >= 2k'+1, got n={self.n}, k'={self.k_prime}"
            )

    @classmethod
    def from_eps(cls, n: int, k: int, eps: float) -> "ProblemInstance":
        k_prime = (1.0 + eps) * k
        rounded = round(k_prime)
        if abs(k_prime - rounded) > 1e-9:
            raise ValueError(f"(1+eps)k = {k_prime} is not an integer")
        return cls(n=n, k=k, k_prime=int(rounded))

    @property
    def eps(self) -> float:
        return (self.k_prime - self.k) / self.k

    @property
    def theorem_regime(self) -> bool:
        """Whether (n, k, eps) sits in the headline-statement regime."""
        return self.n >= 5 * self.k and 1.0 / self.k <= self.eps <= 1.0


def phi_components(n: int, size: int, j: int) -> np.ndarray:
    """The four coefficients attached to block j on the level of `size`-subsets.

    Component i is the weight of channel i in the decomposition of the
    superposition isometry of that level:

        c0 = sqrt( j (size-j+1) (n-size-j+1) / ((n-2j+2)(n-2j+1) size) )
        c1 = sqrt( size / n )
        c2 = (n-2 size)/sqrt(n size) * sqrt( j (n-j+1) / ((n-2j+2)(n-2j)) )
        c3 = sqrt( (n-j+1) (size-j) (n-size-j) / ((n-2j+1)(n-2j) size) )

    The vector (c0, c1, c2, c3) has unit norm whenever 0 <= j <= size
    and n > 2 size.
    """
    if not (0 <= j <= size):
        raise ValueError(f"need 0 <= j <= size, got j={j}, size={size}")
    if n <= 2 * size:
        raise ValueError(f"need n > 2*size, got n={n}, size={size}")
    s = size
    c0 = math.sqrt(
        j * (s - j + 1) * (n - s - j + 1) / ((n - 2 * j + 2) * (n - 2 * j + 1) * s)
    )
    c1 = math.sqrt(s / n)
    c2 = (n - 2 * s) / math.sqrt(n * s) * math.sqrt(
        j * (n - j + 1) / ((n - 2 * j + 2) * (n - 2 * j))
    )
    c3 = math.sqrt(
        (n - j + 1) * (s - j) * (n - s - j) / ((n - 2 * j + 1) * (n - 2 * j) * s)
    )
    return np.array([c0, c1, c2, c3])


@dataclass(frozen=True)
class PhiTable:
    """Rows j = 0..k of the coefficient 4-vectors for levels k and k'."""

    instance: ProblemInstance
    phi: np.ndarray        # shape (k+1, 4)
    phi_prime: np.ndarray  # shape (k+1, 4)

    def unit_norm_error(self) -> float:
        norms = np.concatenate(
            [np.linalg.norm(self.phi, axis=1), np.linalg.norm(self.phi_prime, axis=1)]
        )
        return float(np.max(np.abs(norms - 1.0)))


@lru_cache(maxsize=None)
def phi_table(inst: ProblemInstance) -> PhiTable:
    rows = range(inst.k + 1)
    phi = np.array([phi_components(inst.n, inst.k, j) for j in rows])
    phi_prime = np.array([phi_components(inst.n, inst.k_prime, j) for j in rows])
    return PhiTable(instance=inst, phi=_freeze(phi), phi_prime=_freeze(phi_prime))


@dataclass(frozen=True)
class GammaSchedule:
    """Weights gamma_j = max(1 - j/t, 0) for j = 0..k; gamma_{k+1} is 0."""

    t: float
    k: int
    gammas: np.ndarray

    def gamma(self, j: int) -> float:
        # Out-of-range indices read as 0; j = -1 only ever multiplies a
        # vanishing coefficient.
        if j < 0 or j > self.k:
            return 0.0
        return float(self.gammas[j])


def gamma_schedule(t: float, k: int) -> GammaSchedule:
    if t < 1:
        raise ValueError(f"cutoff parameter must satisfy t >= 1, got {t}")
    gammas = np.array([max(1.0 - j / t, 0.0) for j in range(k + 1)])
    return GammaSchedule(t=float(t), k=k, gammas=_freeze(gammas))


def tilde_tables(sched: GammaSchedule, table: PhiTable) -> tuple[np.ndarray, np.ndarray]:
    """Gamma-weighted coefficient vectors.

    Row j of each output is (g_{j-1} c0, g_j c1, g_j c2, g_{j+1} c3) for
    the corresponding row of the plain table; index overflow reads as 0.
    """
    k = table.instance.k
    if sched.k != k:
        raise ValueError(f"schedule built for k={sched.k}, table for k={k}")
    weights = np.array(
        [
            [sched.gamma(j - 1), sched.gamma(j), sched.gamma(j), sched.gamma(j + 1)]
            for j in range(k + 1)
        ]
    )
    return weights * table.phi, weights * table.phi_prime


def assemble_adversary(sched: GammaSchedule, transporters) -> np.ndarray:
    """Gamma = sum_j gamma_j Phi_j over the transporters for j = 0..k."""
    transporters = list(transporters)
    if len(transporters) != sched.k + 1:
        raise ValueError(
            f"need transporters for j = 0..{sched.k}, got {len(transporters)}"
        )
    shape = transporters[0].matrix.shape
    out = np.zeros(shape)
    for j, tr in enumerate(transporters):
        if tr.j != j or tr.matrix.shape != shape:
            raise ValueError("transporter list is inconsistent")
        out += sched.gamma(j) * tr.matrix
    return out


def hadamard_psi_step(coeffs, inst: ProblemInstance) -> np.ndarray:
    """One entrywise product with the overlap Gram matrix, on coefficients.

    If M = sum_j c_j Phi_j then M had-product Psi = sum_j c'_j Phi_j with

        c'_j = c_{j-1} p_{j,0} q_{j,0} + c_j (p_{j,1} q_{j,1} + p_{j,2} q_{j,2})
               + c_{j+1} p_{j,3} q_{j,3},

    where p/q are the plain and primed coefficient rows and out-of-range
    c read as 0.  Iterating ell times yields the coefficients of the
    ell-fold entrywise power.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    table = phi_table(inst)
    k = inst.k
    if coeffs.shape != (k + 1,):
        raise ValueError(f"need {k + 1} coefficients, got shape {coeffs.shape}")
    prod = table.phi * table.phi_prime  # entrywise p_{j,i} q_{j,i}
    out = np.zeros(k + 1)
    for j in range(k + 1):
        acc = coeffs[j] * (prod[j, 1] + prod[j, 2])
        if j - 1 >= 0:
            acc += coeffs[j - 1] * prod[j, 0]
        if j + 1 <= k:
            acc += coeffs[j + 1] * prod[j, 3]
        out[j] = acc
    return out


def overlap_D(inst: ProblemInstance, j: int) -> float:
    """Inner product of the plain and primed coefficient vectors at block j."""
    if not (0 <= j <= inst.k):
        raise ValueError(f"need 0 <= j <= k, got j={j}")
    table = phi_table(inst)
    return float(table.phi[j] @ table.phi_prime[j])


def psi_power_lower_bound(inst: ProblemInstance, t: float, ell: int) -> float:
    """Certified lower bound D^ell / 2 for the ell-fold entrywise Gram power.

    Valid for schedules with t >= 2 ell; D is the smallest block overlap
    among j = 0..min(ell, k).
    """
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if t < 2 * ell:
        raise ValueError(f"bound needs t >= 2*ell, got t={t}, ell={ell}")
    d = min(overlap_D(inst, j) for j in range(min(ell, inst.k) + 1))
    return d**ell / 2.0


def norm_delta_state_gen(sched: GammaSchedule, inst: ProblemInstance) -> tuple[float, float]:
    """Norms of Gamma against the state-generation difference pair.

    Returns (max_j ||tilde_prime_j - g_j phi_j||, max_j ||g_j phi_prime_j - tilde_j||).
    """
    table = phi_table(inst)
    tilde, tilde_prime = tilde_tables(sched, table)
    g = np.array([sched.gamma(j) for j in range(inst.k + 1)])[:, None]
    forward = float(np.max(np.linalg.norm(tilde_prime - g * table.phi, axis=1)))
    reverse = float(np.max(np.linalg.norm(g * table.phi_prime - tilde, axis=1)))
    return forward, reverse


def norm_delta_reflection(sched: GammaSchedule, inst: ProblemInstance) -> float:
    """Norm of Gamma against the reflection difference operator.

    max over j of the spectral norm of the 4x4 matrix
    phi'_j tilde'_j^T - tilde_j phi_j^T.
    """
    table = phi_table(inst)
    tilde, tilde_prime = tilde_tables(sched, table)
    best = 0.0
    for j in range(inst.k + 1):
        m = np.outer(table.phi_prime[j], tilde_prime[j]) - np.outer(tilde[j], table.phi[j])
        best = max(best, float(np.linalg.svd(m, compute_uv=False)[0]))
    return best


def norm_delta_membership(sched: GammaSchedule, inst: ProblemInstance) -> float:
    """Norm of Gamma against any single-element membership difference.

    max over j of the larger of
      | sqrt((k-j)(n-k'-j)) g_j - sqrt((k'-j)(n-k-j)) g_{j+1} | / (n-2j)
      | sqrt((k'-j)(n-k-j)) g_j - sqrt((k-j)(n-k'-j)) g_{j+1} | / (n-2j);
    the value does not depend on which element is singled out.
    """
    n, k, kp = inst.n, inst.k, inst.k_prime
    best = 0.0
    for j in range(k + 1):
        small = math.sqrt((k - j) * (n - kp - j))
        large = math.sqrt((kp - j) * (n - k - j))
        g0, g1 = sched.gamma(j), sched.gamma(j + 1)
        value = max(abs(small * g0 - large * g1), abs(large * g0 - small * g1))
        best = max(best, value / (n - 2 * j))
    return best


@dataclass(frozen=True)
class DualFeasibilityReport:
    """The five certificate quantities for one (instance, t, ell)."""

    instance: ProblemInstance
    t: float
    ell: int
    gamma_norm: float
    psi_power_bound: float
    membership_norm: float      # 1/T1
    state_gen_norm: float       # 1/T2 (max of the pair)
    state_gen_pair: tuple
    reflection_norm: float      # 1/T3
    feasibility_threshold: float
    feasible: bool
    theorem_regime: bool

    @property
    def t1(self) -> float:
        return _safe_inverse(self.membership_norm)

    @property
    def t2(self) -> float:
        return _safe_inverse(self.state_gen_norm)

    @property
    def t3(self) -> float:
        return _safe_inverse(self.reflection_norm)

    def as_dict(self) -> dict:
        return {
            "n": self.instance.n,
            "k": self.instance.k,
            "k_prime": self.instance.k_prime,
            "eps": self.instance.eps,
            "t": self.t,
            "ell": self.ell,
            "gamma_norm": self.gamma_norm,
            "psi_power_bound": self.psi_power_bound,
            "membership_norm": self.membership_norm,
            "state_gen_norm": self.state_gen_norm,
            "state_gen_pair": list(self.state_gen_pair),
            "reflection_norm": self.reflection_norm,
            "T1": _json_number(self.t1),
            "T2": _json_number(self.t2),
            "T3": _json_number(self.t3),
            "feasibility_threshold": self.feasibility_threshold,
            "feasible": self.feasible,
            "theorem_regime": self.theorem_regime,
        }


def _safe_inverse(x: float) -> float:
    return math.inf if x == 0.0 else 1.0 / x


def _json_number(x: float):
    return x if math.isfinite(x) else None


def dual_feasibility_report(
    inst: ProblemInstance,
    t: float,
    ell: int,
    feasibility_threshold: float = 0.25,
) -> DualFeasibilityReport:
    """Assemble the closed-form certificate quantities and the feasibility flag.

    The constant-size requirement on the Gram-power norm is operationalised
    as D^ell/2 >= feasibility_threshold (default 0.25); out-of-regime
    instances are flagged, not rejected.
    """
    sched = gamma_schedule(t, inst.k)
    bound = psi_power_lower_bound(inst, t, ell)
    gen_pair = norm_delta_state_gen(sched, inst)
    return DualFeasibilityReport(
        instance=inst,
        t=float(t),
        ell=ell,
        gamma_norm=float(np.max(np.abs(sched.gammas))),
        psi_power_bound=bound,
        membership_norm=norm_delta_membership(sched, inst),
        state_gen_norm=max(gen_pair),
        state_gen_pair=gen_pair,
        reflection_norm=norm_delta_reflection(sched, inst),
        feasibility_threshold=feasibility_threshold,
        feasible=bound >= feasibility_threshold,
        theorem_regime=inst.theorem_regime,
    )


@dataclass(frozen=True)
class BoundReport:
    """Branch values of the resource trade-off for one parameter point."""

    n: float
    k: float
    eps: float
    ell: float
    ell_prime: float
    cprime: float
    copies_terms: dict
    copies_bound: float
    state_generation_terms: dict
    state_generation_bound: float
    reflection_terms: dict
    reflection_bound: float
    membership_bound: float
    fifth_case_threshold: float
    fifth_case_reflection: float
    t_choice: float
    regime_n: bool
    regime_eps: bool
    weights: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        clean = lambda d: {key: _json_number(val) for key, val in d.items()}
        return {
            "n": self.n,
            "k": self.k,
            "eps": self.eps,
            "ell": self.ell,
            "ell_prime": self.ell_prime,
            "cprime": self.cprime,
            "copies_terms": clean(self.copies_terms),
            "copies_bound": self.copies_bound,
            "state_generation_terms": clean(self.state_generation_terms),
            "state_generation_bound": self.state_generation_bound,
            "reflection_terms": clean(self.reflection_terms),
            "reflection_bound": self.reflection_bound,
            "membership_bound": self.membership_bound,
            "fifth_case_threshold": self.fifth_case_threshold,
            "fifth_case_reflection": self.fifth_case_reflection,
            "t_choice": self.t_choice,
            "regime_n": self.regime_n,
            "regime_eps": self.regime_eps,
            "weights": clean(self.weights),
        }


def theorem_tradeoff(
    n: float,
    k: float,
    eps: float,
    ell: float = 0,
    ell_prime: float = 0,
    cprime: float = 8.0,
) -> BoundReport:
    """Evaluate every branch of the headline trade-off at one parameter point.

    Scale factors hidden in the asymptotic statement are not modelled:
    each branch reports the bare min of its closed expressions.  The
    regime conditions n >= 5k and 1/k <= eps <= 1 are recorded as flags.
    An ell of 0 drops the copy-assisted state-generation term; ell +
    ell_prime = 0 likewise drops the assisted reflection term.
    """
    if n <= 0 or k <= 0 or eps <= 0:
        raise ValueError("n, k, eps must be positive")
    if ell < 0 or ell_prime < 0:
        raise ValueError("ell and ell_prime must be nonnegative")
    if cprime <= 0:
        raise ValueError("cprime must be positive")

    root_nk = math.sqrt(n / k)
    copies_terms = {
        "k": float(k),
        "sqrt_k_over_eps": math.sqrt(k) / eps,
        "n_over_k_eps2": n / (k * eps * eps),
    }
    state_terms = {
        "sqrt_n_over_k_over_eps": root_nk / eps,
        "sqrt_k_over_ell_over_eps": math.sqrt(k / ell) / eps if ell > 0 else math.inf,
        "k_third_over_eps_two_thirds": k ** (1.0 / 3.0) / eps ** (2.0 / 3.0),
    }
    refl_terms = {
        "sqrt_n_over_k_over_eps": root_nk / eps,
        "sqrt_k_over_copies_over_eps": (
            math.sqrt(k / (ell + ell_prime)) / eps if ell + ell_prime > 0 else math.inf
        ),
    }
    membership = root_nk / eps
    t_choice = max(2.0 * ell, cprime * ell_prime, 1.0 / (5.0 * eps))
    report = BoundReport(
        n=float(n),
        k=float(k),
        eps=float(eps),
        ell=float(ell),
        ell_prime=float(ell_prime),
        cprime=float(cprime),
        copies_terms=copies_terms,
        copies_bound=min(copies_terms.values()),
        state_generation_terms=state_terms,
        state_generation_bound=min(state_terms.values()),
        reflection_terms=refl_terms,
        reflection_bound=min(refl_terms.values()),
        membership_bound=membership,
        fifth_case_threshold=root_nk,
        fifth_case_reflection=math.sqrt(k / eps),
        t_choice=t_choice,
        regime_n=n >= 5 * k,
        regime_eps=(1.0 / k) <= eps <= 1.0,
        weights={
            "membership": 1.0 / membership,
            "state_generation": 1.0 / min(state_terms.values()),
            "reflection": 1.0 / min(refl_terms.values()),
        },
    )
    return report


def adversary_matrix(inst: ProblemInstance, t: float) -> np.ndarray:
    """Explicit Gamma for one instance and cutoff, via the cached transporters."""
    if inst.k_prime <= inst.k:
        raise ValueError("explicit assembly needs k < k'")
    sched = gamma_schedule(t, inst.k)
    transporters = [
        johnson.transporter(inst.n, inst.k, inst.k_prime, j) for j in range(inst.k + 1)
    ]
    return assemble_adversary(sched, transporters)
