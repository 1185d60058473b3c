"""Work-extraction protocol synthesis and simulation.

Classical state-aware plans (shift search + type-block feasibility), quantum
state-aware (pinch-then-classical), the fully state-agnostic protocol
(Schur pinch / type measurement / budgeted shift choice), measure-and-prepare,
and the tomography-based variant.  Work storage is a classical ledger: the
extracted work W = sum h(i) E_i plus the success mass 1 - xi.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from thermoflux.core import (
    DensityMatrix,
    HamiltonianOperator,
    ThermalContext,
    _check_cap,
    _entries,
    relative_entropy,
    tensor_power,
    thermal_state,
)
from thermoflux.estimation import (
    EmpiricalDistribution,
    SamplingOracle,
    classical_relative_entropy,
    sample_types,
)
from thermoflux.pinching import apply as pinch_apply
from thermoflux.pinching import energy_pinching, schur_pinched_distribution
from thermoflux.schur import build_schur_basis
from thermoflux.typeclass import (
    FreqVector,
    ShiftFunction,
    exact_freq_count,
    injection_feasible,
    log_freq_count,
)

PROTOCOL_VERSION = "1"
CONVERSE_TOL = 1e-8
DEFAULT_GRID_CAP = 4_000_000
DEFAULT_SAMPLES = 400


class ConverseViolationError(AssertionError):
    """A simulated outcome exceeded the free-energy converse bound."""


@dataclass(frozen=True)
class WorkAlphabet:
    """Classical letters with exact energies: the alphabet the type machinery runs on.

    For a k-copy Schur-pinched block the letters are the d^k Schur basis states;
    for plain classical protocols they are the d energy eigenstates.
    """

    energies: tuple  # Fractions
    beta: float

    def __post_init__(self):
        object.__setattr__(
            self, "energies", tuple(Fraction(e) for e in self.energies)
        )

    @property
    def d(self) -> int:
        return len(self.energies)

    @property
    def thermal(self) -> np.ndarray:
        w = np.exp(-self.beta * np.array([float(e) for e in self.energies]))
        return w / w.sum()

    @classmethod
    def from_context(cls, ctx: ThermalContext) -> "WorkAlphabet":
        return cls(energies=ctx.levels, beta=ctx.beta)


@dataclass(frozen=True)
class ExtractionPlan:
    alphabet: WorkAlphabet
    n: int  # system letters entering the plan
    l: int  # bath letters
    h: ShiftFunction
    p: tuple  # source distribution the plan is evaluated against
    xi: float
    xi_mode: str  # exact | shell | sampled
    xi_stderr: float = 0.0

    @property
    def work(self) -> Fraction:
        return self.h.work(self.alphabet.energies)

    def feasible(self, f, g) -> bool:
        return injection_feasible(f, g, self.h)


@dataclass(frozen=True)
class ProtocolOutcome:
    extracted_work: float
    rate_nats: float
    fidelity: float
    target_rate: float
    xi: float
    copies_consumed: dict
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (-1e-12 <= self.fidelity <= 1 + 1e-12):
            raise ValueError(f"fidelity out of range: {self.fidelity}")


def _round_counts(total: int, weights: np.ndarray) -> tuple:
    """Deterministic largest-remainder rounding of total*weights to integer counts."""
    raw = total * np.asarray(weights, dtype=float)
    base = np.floor(raw).astype(int)
    short = total - int(base.sum())
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return tuple(int(x) for x in base)


def _shell_widths(total: int, weights: np.ndarray, sigmas: float = 3.0) -> np.ndarray:
    """Per-coordinate multinomial 3-sigma widths (in counts)."""
    w = np.asarray(weights, dtype=float)
    return np.ceil(sigmas * np.sqrt(total * w * (1.0 - w))).astype(int)


def _checkpoint_blocks(n_eff: int, p_est: np.ndarray, l: int, t: np.ndarray):
    """Deterministic typical-shell corner blocks used to gate the shift search."""
    d = len(t)
    f0 = np.array(_round_counts(n_eff, p_est))
    g0 = np.array(_round_counts(l, t))
    fw = _shell_widths(n_eff, p_est)
    gw = _shell_widths(l, t)
    f_corners = [tuple(f0)]
    for i in range(d):
        for j in range(d):
            if i == j or fw[i] == 0:
                continue
            move = min(int(fw[i]), int(f0[i]))
            if move == 0:
                continue
            f = f0.copy()
            f[i] -= move
            f[j] += move
            f_corners.append(tuple(f))
    g_corners = [tuple(g0)]
    for i in range(d):
        for j in range(d):
            if i == j or gw[i] == 0:
                continue
            move = min(int(gw[i]), int(g0[i]))
            if move == 0:
                continue
            g = g0.copy()
            g[i] -= move
            g[j] += move
            g_corners.append(tuple(g))
    blocks = [(f, tuple(g0)) for f in f_corners]
    blocks += [(tuple(f0), g) for g in g_corners[1:]]
    return blocks


def choose_shift(
    p_est,
    alphabet: WorkAlphabet,
    n_eff: int,
    margin_nats: float,
    l: int = None,
) -> ShiftFunction:
    """Pick the zero-sum shift h maximizing W = sum h(i) E_i under the budget
    beta W / n_eff <= D(p_est || t) - margin_nats, gated by exact injection
    feasibility on deterministic typical-shell checkpoint blocks.

    Search: greedy level transfers over letter pairs in decreasing energy-gap
    order (ties by lexicographic pair index), binary-searching the largest
    feasible transfer amount for each pair.  Returns h = 0 when the budget is
    exhausted or no positive-work transfer is feasible.
    """
    p_est = np.asarray(p_est, dtype=float)
    t = alphabet.thermal
    d = alphabet.d
    if margin_nats < 0:
        raise ValueError("margin_nats must be >= 0")
    if l is None:
        l = math.ceil(n_eff ** 1.5)
    d_est = classical_relative_entropy(p_est, t)
    budget_nats = d_est - margin_nats
    zero = ShiftFunction((0,) * d)
    if budget_nats <= 1e-12:
        return zero
    budget_w = budget_nats * n_eff / alphabet.beta if alphabet.beta > 0 else 0.0
    if budget_w <= 0:
        return zero

    checkpoints = _checkpoint_blocks(n_eff, p_est, l, t)

    def feasible(shift_counts) -> bool:
        return all(injection_feasible(f, g, shift_counts) for f, g in checkpoints)

    energies = [float(e) for e in alphabet.energies]
    pairs = []
    for i in range(d):
        for j in range(d):
            gap = energies[j] - energies[i]
            if gap > 0:
                pairs.append((gap, i, j))
    pairs.sort(key=lambda x: (-x[0], x[1], x[2]))

    h = [0] * d
    spent = 0.0
    for gap, i, j in pairs:
        amax = int((budget_w - spent) / gap + 1e-12)
        amax = min(amax, n_eff)
        if amax <= 0:
            continue

        def with_amount(a):
            cand = list(h)
            cand[i] -= a
            cand[j] += a
            return tuple(cand)

        if feasible(with_amount(amax)):
            best = amax
        else:
            lo, hi = 0, amax  # feasible(lo) holds (current h passed before)
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if feasible(with_amount(mid)):
                    lo = mid
                else:
                    hi = mid
            best = lo
        if best > 0:
            h = list(with_amount(best))
            spent += best * gap
    return ShiftFunction(tuple(h))


def _log_multinomial(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=-1)


def _log_type_prob(counts: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Row-wise ln P[type = counts] under i.i.d. p; -inf outside support."""
    counts = np.atleast_2d(counts)
    logp = np.full(len(p), -np.inf)
    pos = p > 0
    logp[pos] = np.log(p[pos])
    out = _log_multinomial(counts).astype(float)
    bad = (counts[:, ~pos] > 0).any(axis=1)
    contrib = counts[:, pos] @ logp[pos]
    out = out + contrib
    out[bad] = -np.inf
    return out


def _enumerate_count_rows(n: int, d: int) -> np.ndarray:
    """(N, d) array of all occupation vectors of n into d bins."""
    if d == 1:
        return np.array([[n]])
    rows = []

    def rec(remaining, prefix):
        if len(prefix) == d - 1:
            rows.append(prefix + [remaining])
            return
        for c in range(remaining + 1):
            rec(remaining - c, prefix + [c])

    rec(n, [])
    return np.array(rows, dtype=np.int64)


def _grid_size(n: int, d: int) -> int:
    return math.comb(n + d - 1, d - 1)


def build_classical_plan(
    p,
    alphabet: WorkAlphabet,
    n: int,
    l: int,
    h: ShiftFunction,
    mode: str = "auto",
    seed: int = None,
    samples: int = DEFAULT_SAMPLES,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> ExtractionPlan:
    """Evaluate the atypical mass xi = 1 - sum_{feasible (f,g)} P_p(f) P_t(g).

    mode "exact" enumerates the full (f, g) grid (support-restricted for f);
    "sampled" draws blocks i.i.d. and reports the infeasible fraction with a
    standard error; "auto" picks exact when the grid fits under grid_cap.
    """
    p = np.asarray(p, dtype=float)
    t = alphabet.thermal
    d = alphabet.d
    if len(p) != d:
        raise ValueError("distribution length does not match alphabet")
    support = np.flatnonzero(p > 0)
    ds = len(support)
    grid = _grid_size(n, ds) * _grid_size(l, d)
    if mode == "auto":
        mode = "exact" if grid <= grid_cap else "sampled"
    if mode == "exact":
        if grid > grid_cap:
            raise ValueError(
                f"(f,g) grid has {grid} blocks > cap {grid_cap}; "
                "use sampled mode (pass seed) or raise grid_cap"
            )
        xi = _xi_exact(p, t, n, l, h, support)
        return ExtractionPlan(
            alphabet=alphabet, n=n, l=l, h=h, p=tuple(p), xi=xi, xi_mode="exact"
        )
    if mode == "sampled":
        if seed is None:
            raise ValueError("sampled mode requires a seed")
        xi, stderr = _xi_sampled(p, t, n, l, h, seed, samples)
        return ExtractionPlan(
            alphabet=alphabet,
            n=n,
            l=l,
            h=h,
            p=tuple(p),
            xi=xi,
            xi_mode="sampled",
            xi_stderr=stderr,
        )
    raise ValueError(f"unknown mode {mode!r}")


def _xi_exact(p, t, n, l, h, support) -> float:
    d = len(t)
    hc = np.array(h.shifts)
    # f rows restricted to the support of p, embedded into d coordinates
    f_sub = _enumerate_count_rows(n, len(support))
    f_rows = np.zeros((len(f_sub), d), dtype=np.int64)
    f_rows[:, support] = f_sub
    g_rows = _enumerate_count_rows(l, d)
    log_pf = _log_type_prob(f_rows, p)
    log_pg = _log_type_prob(g_rows, t)
    log_mf = _log_multinomial(f_rows)
    log_mg = _log_multinomial(g_rows)
    success = 0.0
    for fi in range(len(f_rows)):
        if log_pf[fi] == -np.inf:
            continue
        target = f_rows[fi][None, :] + g_rows - hc[None, :]
        ok = (target >= 0).all(axis=1)
        lhs = log_mf[fi] + log_mg
        rhs = np.full(len(g_rows), -np.inf)
        rhs[ok] = _log_multinomial(target[ok])
        scale = 1.0 + np.abs(lhs) + np.abs(np.where(np.isfinite(rhs), rhs, 0.0))
        feas = ok & (lhs <= rhs + 1e-9 * scale)
        # exact recheck on borderline blocks so rounding never flips the predicate
        border = ok & (np.abs(lhs - rhs) <= 1e-9 * scale)
        for gi in np.flatnonzero(border):
            feas[gi] = injection_feasible(
                tuple(f_rows[fi]), tuple(g_rows[gi]), h
            )
        mass = np.exp(log_pf[fi] + log_pg[feas]).sum()
        success += mass
    return float(min(max(1.0 - success, 0.0), 1.0))


def _xi_sampled(p, t, n, l, h, seed, samples):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 977]))
    fs = rng.multinomial(n, p, size=samples)
    gs = rng.multinomial(l, t, size=samples)
    bad = 0
    for f, g in zip(fs, gs):
        if not injection_feasible(tuple(int(x) for x in f), tuple(int(x) for x in g), h):
            bad += 1
    xi = bad / samples
    stderr = math.sqrt(max(xi * (1 - xi), 1.0 / samples) / samples)
    return xi, stderr


def run_classical_plan(plan: ExtractionPlan, enforce_converse: bool = True) -> ProtocolOutcome:
    """Distribution-level outcome: fidelity = 1 - xi, rate = beta W / n."""
    w = float(plan.work)
    rate = plan.alphabet.beta * w / plan.n
    target = classical_relative_entropy(np.asarray(plan.p), plan.alphabet.thermal)
    if enforce_converse and rate > target + CONVERSE_TOL:
        raise ConverseViolationError(
            f"rate {rate:.6g} exceeds target D = {target:.6g}"
        )
    return ProtocolOutcome(
        extracted_work=w,
        rate_nats=rate,
        fidelity=1.0 - plan.xi,
        target_rate=target,
        xi=plan.xi,
        copies_consumed={"system": plan.n, "bath": plan.l},
        details={"h": plan.h.shifts, "xi_mode": plan.xi_mode, "xi_stderr": plan.xi_stderr},
    )


def _incoherent_spectrum(sigma: np.ndarray, ctx: ThermalContext, k: int):
    """Eigen-spectrum of an energy-incoherent k-copy state, per energy subspace.

    Returns (probs, energies, vectors): probabilities, the exact subspace energy
    of each eigenvector, and the eigenvectors as columns.
    """
    ham = HamiltonianOperator(ctx, k)
    groups = ham.energy_groups()
    probs, energies, vecs = [], [], []
    dim = sigma.shape[0]
    for e in sorted(groups):
        idx = groups[e]
        sub = sigma[np.ix_(idx, idx)]
        vals, v = np.linalg.eigh(sub)
        for r in range(len(idx)):
            probs.append(max(float(vals[r]), 0.0))
            energies.append(e)
            full = np.zeros(dim, dtype=complex)
            full[idx] = v[:, r]
            vecs.append(full)
    probs = np.array(probs)
    probs = probs / probs.sum()
    return probs, tuple(energies), np.column_stack(vecs)


def state_aware_protocol(
    rho: DensityMatrix,
    ctx: ThermalContext,
    n: int,
    k: int = 1,
    seed: int = 0,
    plan_mode: str = "auto",
    l_coeff: float = 1.0,
) -> ProtocolOutcome:
    """Energy-pinch k-copy blocks, diagonalize in the known eigenbasis, then run
    the classical plan on q = n // k super-letters (remainder discarded)."""
    channel = energy_pinching(ctx, k)
    rk = _entries(tensor_power(rho, k))
    sigma = pinch_apply(channel, rk)
    probs, energies, _ = _incoherent_spectrum(sigma, ctx, k)
    alphabet = WorkAlphabet(energies=energies, beta=ctx.beta)
    q = n // k
    if q < 1:
        raise ValueError("need n >= k")
    l = math.ceil(l_coeff * q ** 1.5)
    h = choose_shift(probs, alphabet, q, margin_nats=0.0, l=l)
    plan = build_classical_plan(probs, alphabet, q, l, h, mode=plan_mode, seed=seed)
    outcome = run_classical_plan(plan, enforce_converse=False)
    w = outcome.extracted_work
    rate = ctx.beta * w / n
    tau_k = _entries(tensor_power(thermal_state(ctx), k))
    pinned_target = relative_entropy(sigma, tau_k) / k
    target = relative_entropy(rho, thermal_state(ctx))
    if rate > target + CONVERSE_TOL:
        raise ConverseViolationError(f"rate {rate:.6g} > D(rho||tau) = {target:.6g}")
    return ProtocolOutcome(
        extracted_work=w,
        rate_nats=rate,
        fidelity=outcome.fidelity,
        target_rate=target,
        xi=plan.xi,
        copies_consumed={"pinched": k * q, "measured": 0, "discarded": n - k * q, "bath": l},
        details={
            "k": k,
            "q": q,
            "l": l,
            "h": h.shifts,
            "pinned_target": pinned_target,
            "xi_mode": plan.xi_mode,
        },
    )


@dataclass(frozen=True)
class UniversalParams:
    """Parameter schedule of the state-agnostic protocol."""

    n: int
    k: int
    m: int
    eps: float
    delta_prime: float
    r: float
    c: float = 1.0
    margin_factor: float = 2.0

    @property
    def q(self) -> int:
        return self.n // self.k

    @classmethod
    def from_schedule(cls, n: int, ctx: ThermalContext, c: float = 1.0,
                      margin_factor: float = 2.0) -> "UniversalParams":
        """Default schedule: k = floor(ln n / 3 ln d), eps = e^{-n^{1/3}},
        delta' = n^{-1/6}, m from the Hoeffding bound with the factor-3 margin
        split.  When the Hoeffding m exceeds q/2 the protocol cannot afford it;
        m is capped at ceil(q/2) and the confidence radius r is recomputed from
        the actual m (honest degradation: larger error bar, smaller budget).
        """
        d = ctx.dim
        k = max(1, int(math.log(n) / (3 * math.log(d))))
        q = n // k
        eps = math.exp(-n ** (1.0 / 3.0))
        delta_prime = n ** (-1.0 / 6.0)
        alpha_k = ctx.continuity_constant(k)
        r_sched = delta_prime / (3.0 * alpha_k)
        budget_logs = d ** k * math.log(2) + math.log(2.0 / eps)
        m_hoeffding = math.ceil(budget_logs / (2 * r_sched ** 2))
        m_cap = max(1, math.ceil(q / 2))
        if m_hoeffding <= m_cap:
            m, r = m_hoeffding, r_sched
        else:
            m = m_cap
            r = math.sqrt(budget_logs / (2 * m))
        return cls(n=n, k=k, m=m, eps=eps, delta_prime=delta_prime, r=r, c=c,
                   margin_factor=margin_factor)


def protocol_description_hash(ctx: ThermalContext, params: UniversalParams) -> str:
    """Hash of the full synthesized protocol description.

    Depends only on (context, parameters) — never on the input state — which is
    what makes the protocol state-agnostic: the measurement family and the
    branch rule (shift table as a function of measured type) are fixed here.
    """
    desc = {
        "version": PROTOCOL_VERSION,
        "levels": [str(e) for e in ctx.levels],
        "beta": ctx.beta,
        "n": params.n,
        "k": params.k,
        "m": params.m,
        "eps": params.eps,
        "r": params.r,
        "c": params.c,
        "margin_factor": params.margin_factor,
        "branch_rule": "greedy-pair-transfer/shell-checkpoints/exact-counting",
    }
    return hashlib.sha256(json.dumps(desc, sort_keys=True).encode()).hexdigest()


def universal_protocol(
    source,
    ctx: ThermalContext,
    params: UniversalParams,
    seed: int = 0,
    mode: str = "sampled",
    samples: int = DEFAULT_SAMPLES,
) -> ProtocolOutcome:
    """State-agnostic pipeline: Schur-pinch k-copy blocks, type-measure m of
    them, estimate the pinched relative entropy, choose the shift with the
    continuity-bound margin, and run the classical plan on the q - m remaining
    blocks.

    source: DensityMatrix (its description is used only to produce measurement
    statistics and to evaluate the realized performance — the protocol itself
    is fixed by (ctx, params); see protocol_description_hash).
    """
    proto_hash = protocol_description_hash(ctx, params)
    k, m, q = params.k, params.m, params.q
    if m >= q:
        raise ValueError("schedule leaves no execution blocks (m >= q)")
    basis = build_schur_basis(k, ctx.dim)
    p_k, energies = schur_pinched_distribution(ctx, k, source, basis)
    alphabet = WorkAlphabet(energies=energies, beta=ctx.beta)

    if mode == "exact":
        p_hat = p_k
        m_used = 0
        margin = 0.0
        eps_meas = 0.0
        n_eff = q
    elif mode == "sampled":
        oracle = SamplingOracle(distribution=tuple(p_k), seed=seed, mode="sampled")
        emp = sample_types(oracle, m, seed=1)
        p_hat = emp.p_hat
        m_used = m
        margin = params.margin_factor * ctx.continuity_constant(k) * params.r
        eps_meas = params.eps / 2.0
        n_eff = q - m
    else:
        raise ValueError(f"unknown mode {mode!r}")

    d_hat = classical_relative_entropy(
        np.where(p_hat > 0, p_hat, 0.0), alphabet.thermal
    )
    l = math.ceil(params.c * n_eff ** 1.5)
    h = choose_shift(p_hat, alphabet, n_eff, margin_nats=max(margin, 0.0), l=l)
    plan_mode = "auto" if mode == "exact" else "sampled"
    plan = build_classical_plan(
        p_k, alphabet, n_eff, l, h,
        mode="sampled" if _grid_size(n_eff, int((np.asarray(p_k) > 0).sum())) * _grid_size(l, alphabet.d) > DEFAULT_GRID_CAP else plan_mode,
        seed=seed,
        samples=samples,
    )
    w = float(plan.work)
    rate = ctx.beta * w / params.n
    fidelity = (1.0 - eps_meas) * (1.0 - plan.xi)
    target = relative_entropy(source, thermal_state(ctx))
    if rate > target + CONVERSE_TOL:
        raise ConverseViolationError(f"rate {rate:.6g} > D(rho||tau) = {target:.6g}")
    return ProtocolOutcome(
        extracted_work=w,
        rate_nats=rate,
        fidelity=fidelity,
        target_rate=target,
        xi=plan.xi,
        copies_consumed={
            "pinched": k * q,
            "measured": k * m_used,
            "executed": k * n_eff,
            "discarded": params.n - k * q,
            "bath": l,
        },
        details={
            "k": k,
            "m": m_used,
            "l": l,
            "r": params.r,
            "eps": params.eps,
            "margin": margin,
            "d_hat": d_hat,
            "h": h.shifts,
            "eps_meas": eps_meas,
            "protocol_hash": proto_hash,
            "mode": mode,
            "seed": seed,
            "xi_mode": plan.xi_mode,
            "xi_stderr": plan.xi_stderr,
        },
    )


# ---------------------------------------------------------------------------
# measure-and-prepare (block measurement + battery)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockPartition:
    """Simplex grid of resolution M; each distribution is assigned the nearest
    grid point l/M in total variation (ties broken lexicographically)."""

    M: int
    d: int

    @property
    def grid(self) -> list:
        return [f.counts for f in _freq_list(self.M, self.d)]

    def assign(self, p) -> tuple:
        vec, _ = self._assign_with_flag(p)
        return vec

    def is_boundary(self, p, tol: float = 1e-12) -> bool:
        _, boundary = self._assign_with_flag(p, tol)
        return boundary

    def _assign_with_flag(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        best, best_d = None, None
        second = None
        for vec in self.grid:
            dist = 0.5 * float(np.abs(np.array(vec) / self.M - p).sum())
            if best_d is None or dist < best_d - tol:
                best, best_d, second = vec, dist, None
            elif abs(dist - best_d) <= tol and vec != best:
                second = vec
                if vec < best:
                    best = vec
        return tuple(best), second is not None


def _freq_list(n, d):
    from thermoflux.typeclass import enumerate_freqs

    return list(enumerate_freqs(n, d))


@dataclass(frozen=True)
class BatterySpec:
    levels: dict  # block grid point -> W_l (float, energy units)
    beta: float

    def gibbs_weight_sum(self) -> float:
        return float(sum(math.exp(-self.beta * w) for w in self.levels.values()))


def measure_and_prepare_protocol(M: int, ctx: ThermalContext, n: int, p):
    """Type measurement coarse-grained into simplex blocks, then battery charge
    W_l = (1/beta) ln(1 / Tr[P_B tau^n]).  Returns (summary, ProtocolOutcome)."""
    p = np.asarray(p, dtype=float)
    d = ctx.dim
    t = ctx.gibbs_probabilities()
    partition = BlockPartition(M=M, d=d)
    boundary = partition.is_boundary(p)

    mass_p: dict = {}
    mass_t: dict = {}
    for f in _freq_list(n, d):
        block = partition.assign(np.array(f.counts) / n)
        lp = _log_type_prob(np.array([f.counts]), p)[0]
        lt = _log_type_prob(np.array([f.counts]), t)[0]
        if lp > -np.inf:
            mass_p[block] = mass_p.get(block, 0.0) + math.exp(lp)
        mass_t[block] = mass_t.get(block, 0.0) + math.exp(lt)

    beta = ctx.beta
    levels = {blk: -math.log(mt) / beta for blk, mt in mass_t.items() if mt > 0}
    battery = BatterySpec(levels=levels, beta=beta)
    gibbs_dev = abs(battery.gibbs_weight_sum() - 1.0)

    dominant = partition.assign(p)
    w_dom = levels.get(dominant, 0.0)
    mean_w = sum(mass_p.get(blk, 0.0) * w for blk, w in levels.items())
    sanov = _sanov_exponent(partition, dominant, t) if d == 2 else None

    outcome = ProtocolOutcome(
        extracted_work=w_dom,
        rate_nats=beta * w_dom / n,
        fidelity=mass_p.get(dominant, 0.0),
        target_rate=classical_relative_entropy(p, t),
        xi=1.0 - mass_p.get(dominant, 0.0),
        copies_consumed={"measured": n},
        details={
            "M": M,
            "dominant_block": dominant,
            "mean_rate": beta * mean_w / n,
            "sanov_exponent": sanov,
            "boundary": boundary,
        },
    )
    summary = {
        "partition": partition,
        "battery": battery,
        "gibbs_deviation": gibbs_dev,
        "block_mass_p": mass_p,
        "block_mass_t": mass_t,
        "boundary": boundary,
    }
    return summary, outcome


def _sanov_exponent(partition: BlockPartition, block: tuple, t: np.ndarray) -> float:
    """min_{p in block} D(p || t) over the block's interval of the 1-simplex (d=2)."""
    centers = sorted(v[0] / partition.M for v in partition.grid)
    c = block[0] / partition.M
    idx = centers.index(c)
    lo = 0.0 if idx == 0 else (centers[idx - 1] + c) / 2.0
    hi = 1.0 if idx == len(centers) - 1 else (c + centers[idx + 1]) / 2.0

    def obj(x):
        return classical_relative_entropy(np.array([x, 1.0 - x]), t)

    if lo <= t[0] <= hi:
        return 0.0
    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded")
    return float(res.fun)


# ---------------------------------------------------------------------------
# tomography-based variant
# ---------------------------------------------------------------------------


def tomographic_universal_protocol(
    rho: DensityMatrix,
    ctx: ThermalContext,
    n: int,
    k: int = 1,
    eta: float = 0.0,
    seed: int = 0,
    plan_mode: str = "auto",
) -> ProtocolOutcome:
    """Energy-pinch k copies, simulate per-energy-subspace tomography with
    error magnitude eta, dephase the pinched state in the estimated eigenbasis,
    and run the budgeted classical plan.  eta = 0 reproduces the state-aware
    protocol exactly."""
    channel = energy_pinching(ctx, k)
    sigma = pinch_apply(channel, _entries(tensor_power(rho, k)))
    estimate = sigma
    if eta > 0:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
        ham = HamiltonianOperator(ctx, k)
        pert = np.zeros_like(sigma)
        for e, idx in sorted(ham.energy_groups().items()):
            block = rng.normal(size=(len(idx), len(idx)))
            block = block + block.T
            pert[np.ix_(idx, idx)] = block
        pert = pert / np.abs(np.linalg.eigvalsh(pert)).sum() * eta
        est = sigma + pert
        vals, vecs = np.linalg.eigh(est)
        vals = np.clip(vals, 0.0, None)
        estimate = (vecs * vals) @ vecs.conj().T
        estimate = estimate / estimate.trace().real
    # eigenbasis of the estimate, refined within each energy subspace
    est_probs, energies, vecs = _incoherent_spectrum(estimate, ctx, k)
    # dephasing the true pinched state in that basis
    true_probs = np.clip(
        np.einsum("ij,jk,ki->i", vecs.conj().T, sigma, vecs).real, 0.0, None
    )
    true_probs = true_probs / true_probs.sum()
    alphabet = WorkAlphabet(energies=energies, beta=ctx.beta)
    q = n // k
    l = math.ceil(q ** 1.5)
    margin = 0.0
    h = choose_shift(est_probs, alphabet, q, margin_nats=margin, l=l)
    plan = build_classical_plan(true_probs, alphabet, q, l, h, mode=plan_mode, seed=seed)
    w = float(plan.work)
    rate = ctx.beta * w / n
    target = relative_entropy(rho, thermal_state(ctx))
    budget = classical_relative_entropy(np.asarray(est_probs), alphabet.thermal)
    return ProtocolOutcome(
        extracted_work=w,
        rate_nats=rate,
        fidelity=1.0 - plan.xi,
        target_rate=target,
        xi=plan.xi,
        copies_consumed={"pinched": k * q, "discarded": n - k * q, "bath": l},
        details={
            "k": k,
            "eta": eta,
            "h": h.shifts,
            "budget_nats": budget,
            "xi_mode": plan.xi_mode,
        },
    )


# ---------------------------------------------------------------------------
# conditioned protocols (measure, then thermally operate per branch)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionedProtocol:
    """Incoherent measurement on the first subsystem, then a branch channel on
    the second; the composite must stay Gibbs-preserving."""

    measurement: object  # ProjectorFamily on H_A
    branches: tuple  # callables rho_B -> rho_B (matrices in/out)
    ctx: ThermalContext
    copies_measured: int
    copies_remaining: int


def verify_conditioned_protocol(cp: ConditionedProtocol, tol: float = 1e-9) -> dict:
    """Check measurement incoherence, per-branch Gibbs preservation, and
    Gibbs preservation of the measure-then-branch composite."""
    violations = []
    ctx = cp.ctx
    ham_a = HamiltonianOperator(ctx, cp.copies_measured).matrix()
    for a, proj in enumerate(cp.measurement.projectors):
        dev = np.max(np.abs(proj @ ham_a - ham_a @ proj))
        if dev > 1e-10:
            violations.append(f"measurement element {a} not incoherent (dev {dev:g})")
    tau_b = _entries(tensor_power(thermal_state(ctx), cp.copies_remaining))
    for a, branch in enumerate(cp.branches):
        out = branch(tau_b)
        dev = np.max(np.abs(out - tau_b))
        if dev > tol:
            violations.append(f"branch {a} not Gibbs-preserving (dev {dev:g})")
    # composite on tau_A (x) tau_B
    tau_a = _entries(tensor_power(thermal_state(ctx), cp.copies_measured))
    composite = np.zeros_like(tau_b)
    for proj, branch in zip(cp.measurement.projectors, cp.branches):
        weight = float(np.trace(proj @ tau_a).real)
        composite += weight * branch(tau_b)
    dev = np.max(np.abs(composite - tau_b))
    if dev > tol:
        violations.append(f"composite not Gibbs-preserving (dev {dev:g})")
    return {"passes": not violations, "violations": violations}


# ---------------------------------------------------------------------------
# string-level oracle (full diagonal simulation at tiny n)
# ---------------------------------------------------------------------------


def simulate_plan_stringwise(plan: ExtractionPlan) -> dict:
    """Full string-level simulation of a classical plan.

    Enumerates every basis string of the system (x) bath diagonal state, groups
    strings into (f, g) blocks, builds the per-block injection explicitly
    (verifying injectivity and exact energy bookkeeping), and accumulates the
    work-storage masses.  Agrees with the distribution-level xi by construction;
    used as the oracle for the type-level accounting.
    """
    d = plan.alphabet.d
    n, l = plan.n, plan.l
    _check_cap(d ** (n + l))
    p = np.asarray(plan.p, dtype=float)
    t = plan.alphabet.thermal
    energies = plan.alphabet.energies
    h = plan.h

    import itertools

    # group strings by type
    sys_types: dict = {}
    for s in itertools.product(range(d), repeat=n):
        counts = tuple(s.count(i) for i in range(d))
        sys_types.setdefault(counts, []).append(s)
    bath_types: dict = {}
    for s in itertools.product(range(d), repeat=l):
        counts = tuple(s.count(i) for i in range(d))
        bath_types.setdefault(counts, []).append(s)

    def string_prob(s, dist):
        out = 1.0
        for sym in s:
            out *= dist[sym]
        return out

    def string_energy(s):
        return sum((energies[sym] for sym in s), Fraction(0))

    success_mass = 0.0
    total_mass = 0.0
    work = plan.work
    for f, sys_strings in sys_types.items():
        pf = sum(string_prob(s, p) for s in sys_strings)
        if pf == 0.0:
            continue
        for g, bath_strings in bath_types.items():
            pg = sum(string_prob(s, t) for s in bath_strings)
            mass = pf * pg
            total_mass += mass
            target = tuple(a + b - c for a, b, c in zip(f, g, h.shifts))
            if any(x < 0 for x in target):
                continue
            if exact_freq_count(f) * exact_freq_count(g) > exact_freq_count(target):
                continue
            # explicit injection: i-th source pair -> i-th target string
            sources = [s1 + s2 for s1 in sys_strings for s2 in bath_strings]
            targets = sorted(itertools_type_strings(target, n + l, d))
            assert len(set(sources)) == len(sources)
            assert len(sources) <= len(targets)
            for src, dst in zip(sorted(sources), targets):
                # energy conservation: source energy = target energy + W
                assert string_energy(src) == string_energy(dst) + work
            success_mass += mass
    xi = 1.0 - success_mass / total_mass
    return {
        "work": float(work),
        "xi": xi,
        "fidelity": 1.0 - xi,
    }


def itertools_type_strings(counts: tuple, length: int, d: int):
    import itertools

    symbols = []
    for sym, c in enumerate(counts):
        symbols.extend([sym] * c)
    return set(itertools.permutations(symbols))
