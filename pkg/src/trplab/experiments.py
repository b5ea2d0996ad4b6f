"""Monte Carlo harnesses around the triangle removal process.

Every harness takes a master seed; trial ``t`` draws from its own
generator seeded with :func:`trplab.seeding.trial_seed`, and per-trial
rows come back ordered by trial index whatever ``jobs`` is.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .core import Part, PartialLatinSquare, Triple, validate
from .engine import LeaveGraph, RunOutcome, history_q_sequence, history_probability, leave_from, run
from .quasirand import _label, check, density, random_subsets
from .seeding import RNG_ID, make_rng, map_trials, trial_seeds


def steps_for(alpha: float, n: int) -> int:
    """floor(alpha * N), tolerant of alpha * N landing a hair under an integer."""
    return int(math.floor(alpha * n * n + 1e-9))


def checkpoint_grid(limit: int, points: int = 12) -> list[int]:
    """0, a geometric grid on [1, limit], and ``limit`` itself."""
    if limit <= 0:
        return [0]
    grid = {0, limit}
    grid.update(int(round(x)) for x in np.geomspace(1, limit, max(points, 2)))
    return sorted(grid)


@dataclass
class TrialSummary:
    experiment: str
    params: dict
    master_seed: int
    rows: list[dict]
    tallies: dict[str, int]
    stats: dict = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    rng_id: str = RNG_ID

    @property
    def trials(self) -> int:
        return len(self.rows)

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "master_seed": self.master_seed,
            "rng_id": self.rng_id,
            "trials": self.trials,
            "tallies": self.tallies,
            "stats": self.stats,
        }


def _quantiles(values: Sequence[float]) -> dict:
    if not values:
        return {}
    arr = np.asarray(values, dtype=float)
    return {f"q{int(p * 100)}": float(np.quantile(arr, p)) for p in (0.5, 0.9, 0.99)} | {"max": float(arr.max())}


# -- random orderings of a fixed square ---------------------------------------


def _profile_trial(t, seed, L, checkpoints, eps, h):
    rng = make_rng(seed)
    order = rng.permutation(len(L))
    g = LeaveGraph(L.n)
    done = 0
    worst, worst_at, records = Fraction(0), 0, []
    for cp in checkpoints:
        while done < cp:
            g.remove(L.triples[order[done]], check=False)
            done += 1
        dev = check(g, h, seed=rng).worst()
        records.append({"trial": t, "i": cp, "worst_dev": float(dev), "passed": dev <= Fraction(eps)})
        if dev > worst:
            worst, worst_at = dev, cp
    row = {
        "trial": t,
        "seed": seed,
        "max_dev": float(worst),
        "worst_checkpoint": worst_at,
        "passed": worst <= Fraction(eps),
    }
    return row, records


def random_order_profile(
    L: PartialLatinSquare,
    alpha: float,
    eps: float,
    h: int = 2,
    checkpoints: Sequence[int] | None = None,
    trials: int = 100,
    seed: int = 0,
    jobs: int = 1,
) -> TrialSummary:
    """Quasirandomness of prefixes of uniformly random orderings of ``L``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if len(L) != L.N or validate(L) is not None:
        raise ValueError("random_order_profile needs a full Latin square")
    limit = steps_for(alpha, L.n)
    cps = sorted(set(checkpoints)) if checkpoints is not None else checkpoint_grid(limit)
    if cps and (cps[0] < 0 or cps[-1] > limit):
        raise ValueError(f"checkpoints must lie in [0, {limit}]")
    seeds = trial_seeds(seed, trials)
    out = map_trials(_profile_trial, [(t, s, L, cps, eps, h) for t, s in enumerate(seeds)], jobs)
    rows = [r for r, _ in out]
    passed = sum(r["passed"] for r in rows)
    return TrialSummary(
        "order-profile",
        {"n": L.n, "alpha": alpha, "epsilon": eps, "h": h, "checkpoints": cps, "trials": trials},
        seed,
        rows,
        {"quasirandom": passed, "not_quasirandom": trials - passed},
        {"pass_rate": passed / trials if trials else 0.0, "max_dev": _quantiles([r["max_dev"] for r in rows])},
        {"checkpoints": [rec for _, recs in out for rec in recs]},
    )


# -- binomial model and the coupling ------------------------------------------


def binomial_sample(n: int, p: float, seed=None) -> list[Triple]:
    """Each of the n^3 part-respecting triples independently with probability p."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = make_rng(seed)
    keep = np.flatnonzero(rng.random(n ** 3) < p)
    return [_decode_index(int(k), n) for k in keep]


def _decode_index(k: int, n: int) -> Triple:
    r, rest = divmod(k, n * n)
    c, s = divmod(rest, n)
    return Triple(r, c, s)


def conflict_delete(H: Sequence[Triple], n: int) -> PartialLatinSquare:
    """Drop, all at once, every triple sharing a vertex pair with another triple."""
    H = list(dict.fromkeys(Triple(*t) for t in H))  # a hypergraph is a set
    uses = Counter(p for t in H for p in t.pairs())
    kept = [t for t in H if all(uses[p] == 1 for p in t.pairs())]
    return PartialLatinSquare(n, tuple(kept))


def greedy_from_order(order: Iterable[Triple], accept_limit: int, n: int) -> RunOutcome:
    """Scan ``order`` and keep each triple that is edge-disjoint from those kept.

    Stops once ``accept_limit`` triples are kept; if the order runs out
    first the outcome is frozen at the number kept.
    """
    rc, rs, cs = [0] * n, [0] * n, [0] * n
    accepted: list[Triple] = []
    for t in order:
        if len(accepted) >= accept_limit:
            break
        r, c, s = t
        if (rc[r] >> c) & 1 or (rs[r] >> s) & 1 or (cs[c] >> s) & 1:
            continue
        rc[r] |= 1 << c
        rs[r] |= 1 << s
        cs[c] |= 1 << s
        accepted.append(Triple(r, c, s))
    frozen = len(accepted) if len(accepted) < accept_limit else None
    return RunOutcome(PartialLatinSquare(n, tuple(accepted)), frozen)


@dataclass
class CoupledOutcome:
    l_star: PartialLatinSquare
    outcome: RunOutcome
    b: int
    accept_limit: int

    @property
    def applicable(self) -> bool:
        return self.b <= self.accept_limit and not self.outcome.frozen

    @property
    def contained(self) -> bool:
        return self.l_star.as_set() <= self.outcome.square.as_set()


def coupled_run(n: int, alpha: float, seed=None) -> CoupledOutcome:
    """Deletion model and greedy process driven by one random ordering of all triples."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    rng = make_rng(seed)
    perm = rng.permutation(n ** 3).tolist()
    b = int(rng.binomial(n ** 3, alpha / n))
    limit = steps_for(alpha, n)
    # the greedy scan usually stops long before the end; decode lazily
    order = (_decode_index(k, n) for k in perm)
    l_star = conflict_delete([_decode_index(k, n) for k in perm[:b]], n)
    return CoupledOutcome(l_star, greedy_from_order(order, limit, n), b, limit)


def _coupling_trial(t, seed, n, alpha):
    o = coupled_run(n, alpha, seed)
    return {
        "trial": t,
        "seed": seed,
        "B": o.b,
        "l_star_size": len(o.l_star),
        "frozen": o.outcome.frozen,
        "applicable": o.applicable,
        "contained": o.contained,
        "violation": o.applicable and not o.contained,
    }


def coupling_study(n: int, alpha: float, trials: int, seed: int = 0, jobs: int = 1) -> TrialSummary:
    seeds = trial_seeds(seed, trials)
    rows = map_trials(_coupling_trial, [(t, s, n, alpha) for t, s in enumerate(seeds)], jobs)
    applicable = sum(r["applicable"] for r in rows)
    violations = sum(r["violation"] for r in rows)
    frozen = sum(r["frozen"] for r in rows)
    return TrialSummary(
        "couple",
        {"n": n, "alpha": alpha, "trials": trials},
        seed,
        rows,
        {"frozen": frozen, "applicable": applicable, "inapplicable": trials - applicable - frozen},
        {
            "violations": violations,
            "applicable_rate": applicable / trials if trials else 0.0,
            "mean_l_star": float(np.mean([r["l_star_size"] for r in rows])) if rows else 0.0,
        },
    )


def _transfer_trial(seed, n, alpha, row):
    rng = make_rng(seed)
    o = run(n, steps_for(alpha, n), rng)
    star = conflict_delete(binomial_sample(n, alpha / n, rng), n)
    in_row = sum(1 for t in o.square.triples if t.r == row)
    return o.frozen, in_row, sum(1 for t in star.triples if t.r == row)


def monotone_transfer(
    n: int, alpha: float, thresholds: Sequence[int], trials: int, seed: int = 0, row: int = 0, jobs: int = 1
) -> list[dict]:
    """Compare Pr(not P, not frozen) under the process with Pr(not P) under deletion.

    P_t is the monotone property "at least t triples in ``row``".  The
    fitted constant is the ratio of the two probabilities (None when the
    deletion-model probability is 0).
    """
    seeds = trial_seeds(seed, trials)
    out = map_trials(_transfer_trial, [(s, n, alpha, row) for s in seeds], jobs)
    result = []
    for t in thresholds:
        p_proc = sum(1 for frozen, k, _ in out if not frozen and k < t) / trials
        p_star = sum(1 for _, _, k in out if k < t) / trials
        result.append({"t": t, "p_process": p_proc, "p_deletion": p_star, "K": p_proc / p_star if p_star else None})
    return result


# -- process trials with trajectories -----------------------------------------


@dataclass
class TrajectoryRecord:
    trial: int
    a_id: int
    q: Part
    vertices: tuple[int, ...]  # global labels
    steps: list[int] = field(default_factory=list)
    values: list[int] = field(default_factory=list)
    predicted: list[float] = field(default_factory=list)
    envelope: list[float] = field(default_factory=list)
    breach_step: int | None = None

    @property
    def k(self) -> int:
        return len(self.vertices)

    def rows(self) -> list[dict]:
        return [
            {
                "trial": self.trial,
                "A_id": self.a_id,
                "q": self.q.short,
                "k": self.k,
                "i": i,
                "Y": y,
                "predicted": p,
                "envelope": e,
                "breached": abs(y - p) > e * p,
            }
            for i, y, p, e in zip(self.steps, self.values, self.predicted, self.envelope)
        ]


@dataclass(frozen=True)
class CheckpointRecord:
    trial: int
    i: int
    density: Fraction
    q_count: int
    predicted: Fraction
    worst: Fraction
    worst_by_k: tuple[Fraction, ...]

    def row(self) -> dict:
        rel = float(abs(self.q_count - self.predicted) / self.predicted) if self.predicted else 0.0
        out = {
            "trial": self.trial,
            "i": self.i,
            "density": float(self.density),
            "Q": self.q_count,
            "predicted_Q": float(self.predicted),
            "rel_error": rel,
            "worst_dev": float(self.worst),
        }
        out.update({f"worst_dev_k{k + 1}": float(v) for k, v in enumerate(self.worst_by_k)})
        return out


def envelope(i: int, N: int, C: float, c: float, eps: float) -> float:
    p = 1 - i / N
    return math.inf if p <= 0 else p ** (-C) * eps ** c


def tracked_sets(n: int, h: int, per_qk: int, rng: np.random.Generator) -> list[tuple[Part, tuple[int, ...]]]:
    """Sets A to follow, as positions in the 2n-vertex list outside q."""
    out = []
    for q in Part:
        for k in range(1, h + 1):
            if per_qk <= 0 or k > 2 * n:
                continue
            if n <= 10:
                sets = list(combinations(range(2 * n), k))
            else:
                sets = [tuple(sorted(int(x) for x in row)) for row in random_subsets(rng, 2 * n, k, per_qk)]
            out.extend((q, A) for A in sets)
    return out


def _trp_trial_one(t, seed, start, n, target, checkpoints, eps, h, C, c, track, stride):
    rng = make_rng(seed)
    g = LeaveGraph(n) if start is None else leave_from(start)
    N = n * n
    sets = tracked_sets(n, h, track, rng)
    trajs = [
        TrajectoryRecord(t, a, q, tuple(_label(q, v, n) for v in A)) for a, (q, A) in enumerate(sets)
    ]
    cps = set(checkpoints)
    records: list[CheckpointRecord] = []
    frozen_at = None
    i = g.removed
    while True:
        if trajs:
            p = 1 - i / N
            env = envelope(i, N, C, c, eps)
            keep = i % stride == 0 or i in cps or i == target
            for rec, (q, A) in zip(trajs, sets):
                rows = g.neighbour_rows(q)
                common = rows[A[0]]
                for v in A[1:]:
                    common &= rows[v]
                y = common.bit_count()
                pred = p ** len(A) * n
                if rec.breach_step is None and abs(y - pred) > env * pred:
                    rec.breach_step = i
                if keep:
                    rec.steps.append(i)
                    rec.values.append(y)
                    rec.predicted.append(pred)
                    rec.envelope.append(env)
        if i in cps:
            rep = check(g, h, seed=rng)
            d = density(g)
            records.append(
                CheckpointRecord(t, i, d, g.q, n ** 3 * d ** 3, rep.worst(), tuple(rep.worst(k) for k in range(1, h + 1)))
            )
        if i >= target:
            break
        tri = g.sample(rng)
        if tri is None:
            frozen_at = i
            break
        g.remove(tri, check=False)
        i += 1
    worst = max((r.worst for r in records), default=Fraction(0))
    breach = min((r.breach_step for r in trajs if r.breach_step is not None), default=None)
    return {
        "trial": t,
        "seed": seed,
        "frozen_at": frozen_at,
        "reached": i,
        "max_dev": float(worst),
        "passed": worst <= Fraction(eps),
        "breach_step": breach,
    }, records, trajs


@dataclass
class TrpTrialResult:
    summary: TrialSummary
    checkpoints: list[CheckpointRecord]
    trajectories: list[TrajectoryRecord]


def trp_trial(
    n: int,
    alpha: float,
    eps: float,
    h: int = 2,
    C: float = 10.0,
    c: float = 0.5,
    checkpoints: Sequence[int] | None = None,
    trials: int = 100,
    seed: int = 0,
    track: int = 20,
    deep: bool = False,
    horizon: float = 0.9,
    start: PartialLatinSquare | None = None,
    traj_points: int = 200,
    jobs: int = 1,
) -> TrpTrialResult:
    """Run the process ``trials`` times, checking quasirandomness at checkpoints.

    The run length is alpha*N, or horizon*N when ``deep``.  Checkpoints
    default to a geometric grid on [0, alpha*N] (beyond the initial size of
    ``start``).  ``track`` random sets A per (q, k) are followed step by
    step against the envelope p(i)^-C eps^c; trajectory samples are kept
    every N/traj_points steps.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    N = n * n
    base = len(start) if start is not None else 0
    limit = steps_for(alpha, n)
    target = max(limit, steps_for(horizon, n)) if deep else limit
    if target < base:
        raise ValueError(f"start already has {base} triples, beyond the target {target}")
    if checkpoints is None:
        checkpoints = [base + x for x in checkpoint_grid(limit - base)]
    stride = max(1, N // max(traj_points, 1))
    seeds = trial_seeds(seed, trials)
    args = [(t, s, start, n, target, list(checkpoints), eps, h, C, c, track, stride) for t, s in enumerate(seeds)]
    out = map_trials(_trp_trial_one, args, jobs)
    rows = [r for r, _, _ in out]
    tallies = Counter()
    for r in rows:
        if r["frozen_at"] is not None:
            r["outcome"] = "frozen"
        elif r["breach_step"] is not None:
            r["outcome"] = "breached"
        elif r["passed"]:
            r["outcome"] = "quasirandom"
        else:
            r["outcome"] = "deviant"
        tallies[r["outcome"]] += 1
    frozen_before_limit = sum(1 for r in rows if r["frozen_at"] is not None and r["frozen_at"] < limit)
    cp_records = [rec for _, recs, _ in out for rec in recs]
    trajs = [tr for _, _, trs in out for tr in trs]
    summary = TrialSummary(
        "trp-run",
        {
            "n": n,
            "alpha": alpha,
            "epsilon": eps,
            "h": h,
            "C": C,
            "c": c,
            "checkpoints": list(checkpoints),
            "trials": trials,
            "track": track,
            "deep": deep,
            "horizon": horizon,
            "target_steps": target,
            "start_size": base,
        },
        seed,
        rows,
        {k: tallies.get(k, 0) for k in ("frozen", "breached", "quasirandom", "deviant")},
        {
            "freeze_rate": tallies.get("frozen", 0) / trials if trials else 0.0,
            "frozen_before_alpha_N": frozen_before_limit,
            "max_dev": _quantiles([r["max_dev"] for r in rows]),
        },
        {
            "checkpoints": [rec.row() for rec in cp_records],
            "trajectories": [row for tr in trajs for row in tr.rows()],
        },
    )
    return TrpTrialResult(summary, cp_records, trajs)


# -- history probability ratios -----------------------------------------------


def _quasi_history(seed, n, steps):
    """A non-frozen history of ``steps`` removals with its per-step h=2 deviation."""
    rng = make_rng(seed)
    discards = 0
    while True:
        g = LeaveGraph(n)
        hist, devs = [], []
        for _ in range(steps):
            devs.append(check(g, 2).worst())
            t = g.sample(rng)
            if t is None:
                break
            g.remove(t, check=False)
            hist.append(t)
        if len(hist) == steps:
            return PartialLatinSquare(n, tuple(hist)), devs, discards
        discards += 1


def _ratio_pair(p, seed, n, steps):
    rng = make_rng(seed)
    s1, s2 = (int(x) for x in rng.integers(2 ** 63, size=2))
    L, dev_l, d1 = _quasi_history(s1, n, steps)
    M, dev_m, d2 = _quasi_history(s2, n, steps)
    q_l, q_m = history_q_sequence(L), history_q_sequence(M)
    log_ratio = history_probability(L) - history_probability(M)
    bound = 0.0
    worst_slack = math.inf
    term_violations = 0
    for ql, qm, a, b in zip(q_l, q_m, dev_l, dev_m):
        dev = float(max(a, b))
        term = qm / ql  # factor of Pr(L) / Pr(L') contributed by this step
        if abs(term - 1) > 4 * dev:
            term_violations += 1
        worst_slack = min(worst_slack, 4 * dev - abs(term - 1))
        bound += 4 * dev
    return {
        "pair": p,
        "seed": seed,
        "discards": d1 + d2,
        "log_pr_L": history_probability(L),
        "log_pr_Lprime": history_probability(M),
        "abs_log_ratio": abs(log_ratio),
        "dev_sum_bound": bound,
        "term_violations": term_violations,
        "min_term_slack": worst_slack,
        "sum_ok": abs(log_ratio) <= bound,
    }


def history_ratio_study(n: int, alpha: float, pairs: int, seed: int = 0, jobs: int = 1) -> TrialSummary:
    """Compare exact log-probabilities of independent process histories.

    Each step's ratio Q_L'(i) / Q_L(i) is checked against 1 +- 4 dev_i with
    dev_i the larger measured h=2 deviation of the two leave graphs.
    """
    if n > 64:
        raise ValueError("history ratio study limited to n <= 64")
    steps = steps_for(alpha, n)
    seeds = trial_seeds(seed, pairs)
    rows = map_trials(_ratio_pair, [(p, s, n, steps) for p, s in enumerate(seeds)], jobs)
    ratios = [r["abs_log_ratio"] for r in rows]
    return TrialSummary(
        "ratio-study",
        {"kind": "history", "n": n, "alpha": alpha, "pairs": pairs, "steps": steps},
        seed,
        rows,
        {
            "within_bound": sum(1 for r in rows if r["sum_ok"] and not r["term_violations"]),
            "outside_bound": sum(1 for r in rows if not (r["sum_ok"] and not r["term_violations"])),
        },
        {
            "discards": sum(r["discards"] for r in rows),
            "abs_log_ratio": _quantiles(ratios),
            "term_violations": sum(r["term_violations"] for r in rows),
        },
    )
