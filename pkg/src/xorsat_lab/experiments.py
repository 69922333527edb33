"""Seeded Monte Carlo experiment harness: simulation columns next to their
analytic predictions, deterministic under any thread budget.

Every trial's randomness derives from (master seed, purpose, global trial
index), results merge in trial order, and serialized outputs carry no
volatile fields, so a fixed config and seed produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .algorithms import Outcome, run_bpgd, shared_bits
from .analytic import ModelParams, solve_fixed_points
from .formula import XorsatFormula, generate_random, substitute
from .gf2 import build_check_system, rref_of, sparse_null_variables, sparse_rank, sparse_solve
from .message_passing import BpEngine, WpEngine, WP_FROZEN, WP_NULL
from .rng import derive_child_seed, derive_rng


@dataclass
class ExperimentConfig:
    k: int = 3
    n: int = 1000
    trials: int = 10
    seed: int = 1
    d: float | None = None
    d_grid: list | None = None
    theta_grid: list | None = None
    threads: int = 1
    ell: int = 60
    mode: str = "fast"
    scale_cap: int = 5000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.threads < 1:
            raise ValueError("thread budget must be >= 1")

    def to_dict(self) -> dict:
        out = {
            "k": self.k, "n": self.n, "trials": self.trials, "seed": self.seed,
            "ell": self.ell, "mode": self.mode,
        }
        if self.d is not None:
            out["d"] = self.d
        if self.d_grid is not None:
            out["d_grid"] = list(self.d_grid)
        if self.theta_grid is not None:
            out["theta_grid"] = list(self.theta_grid)
        return out


@dataclass
class ExperimentResult:
    name: str
    config: dict
    rows: list
    columns: list
    per_trial: dict = field(default_factory=dict, repr=False)
    wall_time_s: float | None = None   # in-memory only, never serialized

    def to_json_text(self) -> str:
        payload = {
            "config": dict(self.config, experiment=self.name),
            "rows": self.rows,
            "meta": {"columns": self.columns, "row_count": len(self.rows)},
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv_text(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                val = row[col]
                cells.append(f"{val:.10g}" if isinstance(val, float) else str(val))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write(self, path: str, fmt: str = "csv") -> None:
        text = self.to_csv_text() if fmt == "csv" else self.to_json_text()
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)


def _map_trials(worker, args_list, threads: int) -> list:
    if threads <= 1 or len(args_list) <= 1:
        return [worker(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, args_list, chunksize=4))


def _mean_stderr(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size > 1:
        se = float(arr.std(ddof=1) / math.sqrt(arr.size))
    else:
        se = 0.0
    return mean, se


def satisfiable_instance(n: int, d: float, k: int, seed: int,
                         max_attempts: int = 64) -> tuple[XorsatFormula, np.ndarray]:
    """A random instance conditioned on satisfiability, with one exactly
    uniform solution sampled alongside."""
    for attempt in range(max_attempts):
        f = generate_random(n, d, k, derive_child_seed(seed, "resample", attempt))
        sol = sparse_solve(f, derive_rng(seed, "solution", attempt))
        if sol is not None:
            return f, sol
    raise RuntimeError(f"no satisfiable instance within {max_attempts} attempts")


def decimated_prefix(formula: XorsatFormula, solution: np.ndarray, t: int):
    """The formula after the decimation process has pinned x_1..x_t.

    The decimation process reveals a uniform random solution one variable at
    a time, so substituting a sampled solution's prefix reproduces its state
    exactly in distribution.
    """
    sigma = {x: int(solution[x]) for x in range(1, t + 1)}
    sub, status = substitute(formula, sigma)
    return sub, status


# ---------------------------------------------------------------------------
# success curve
# ---------------------------------------------------------------------------

def _success_trial(args) -> int:
    n, d, k, mode, trial_seed = args
    f = generate_random(n, d, k, derive_child_seed(trial_seed, "instance"))
    tau = shared_bits(n, trial_seed)
    trace = run_bpgd(f, tau, mode=mode)
    return 1 if trace.outcome is Outcome.SAT else 0


def run_success_curve(cfg: ExperimentConfig) -> ExperimentResult:
    """Empirical guided-decimation success rate over a d grid, against the
    limiting success probability (0 above the algorithmic threshold)."""
    if not cfg.d_grid:
        raise ValueError("success curve needs a d grid")
    dm = analytic.d_min(cfg.k)
    rows = []
    per_trial = {}
    for gi, d in enumerate(cfg.d_grid):
        args = []
        for trial in range(cfg.trials):
            idx = gi * cfg.trials + trial
            args.append((cfg.n, d, cfg.k, cfg.mode, derive_child_seed(cfg.seed, "trial", idx)))
        outcomes = _map_trials(_success_trial, args, cfg.threads)
        mean, se = _mean_stderr(outcomes)
        if d == 0:
            pred = 1.0
        elif d < dm - 1e-9:
            pred = analytic.success_probability(d, cfg.k)
        else:
            pred = 0.0
        rows.append({"d": float(d), "success_rate": mean, "stderr": se,
                     "prediction": pred, "trials": cfg.trials})
        per_trial[float(d)] = outcomes
    return ExperimentResult(
        name="success_curve", config=cfg.to_dict(), rows=rows,
        columns=["d", "success_rate", "stderr", "prediction", "trials"],
        per_trial=per_trial)


# ---------------------------------------------------------------------------
# nullity of the decimated system
# ---------------------------------------------------------------------------

def _nullity_trial(args) -> list:
    n, d, k, thetas, trial_seed = args
    f, sol = satisfiable_instance(n, d, k, trial_seed)
    out = []
    for theta in thetas:
        t = int(theta * n)
        sub, _ = decimated_prefix(f, sol, t)
        live = np.zeros(n + 1, dtype=np.uint8)
        live[t + 1:] = 1
        rank, consistent = sparse_rank(sub, live)
        assert consistent
        out.append(((n - t) - rank) / n)
    return out


def run_nullity_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Nullity density of the decimated system against the free-entropy
    height at the maximizing fixed point."""
    if cfg.d is None or not cfg.theta_grid:
        raise ValueError("nullity experiment needs d and a theta grid")
    args = [(cfg.n, cfg.d, cfg.k, tuple(cfg.theta_grid),
             derive_child_seed(cfg.seed, "trial", i)) for i in range(cfg.trials)]
    samples = _map_trials(_nullity_trial, args, cfg.threads)
    rows = []
    per_trial = {}
    for j, theta in enumerate(cfg.theta_grid):
        vals = [s[j] for s in samples]
        mean, se = _mean_stderr(vals)
        pred = analytic.nullity_prediction(cfg.d, cfg.k, theta)
        rows.append({"theta": float(theta), "nullity_frac": mean, "stderr": se,
                     "prediction": pred, "trials": cfg.trials})
        per_trial[float(theta)] = vals
    return ExperimentResult(
        name="nullity", config=cfg.to_dict(), rows=rows,
        columns=["theta", "nullity_frac", "stderr", "prediction", "trials"],
        per_trial=per_trial)


# ---------------------------------------------------------------------------
# null variables vs message-passing nulls
# ---------------------------------------------------------------------------

def _null_variable_trial(args) -> list:
    n, d, k, thetas, trial_seed = args
    f, sol = satisfiable_instance(n, d, k, trial_seed)
    out = []
    for theta in thetas:
        t = int(theta * n)
        sub, _ = decimated_prefix(f, sol, t)
        live = np.zeros(n + 1, dtype=np.uint8)
        live[t + 1:] = 1
        null_mask = sparse_null_variables(sub, live)
        null_mask[:t + 1] = False
        engine = WpEngine(sub)
        engine.run()
        marks = engine.marks_array()
        wp_null = np.zeros(n + 1, dtype=bool)
        wp_null[1:] = marks[1:] == WP_NULL
        wp_null[:t + 1] = False
        v0_frac = (t + int(null_mask.sum())) / n
        sym_diff = int((null_mask ^ wp_null).sum()) / n
        out.append((v0_frac, sym_diff))
    return out


def run_null_variable_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Counts of frozen-solution variables against the maximizing fixed
    point, plus their symmetric difference with the message-passing nulls.

    The pinned prefix counts toward the frozen total, matching the unit-row
    matrix picture behind the prediction.
    """
    if cfg.d is None or not cfg.theta_grid:
        raise ValueError("null-variable experiment needs d and a theta grid")
    ths = analytic.thresholds_at(cfg.d, cfg.k) if cfg.d > analytic.d_min(cfg.k) else None
    if ths is not None:
        for theta in cfg.theta_grid:
            if abs(theta - ths.theta_cond) < 0.02:
                raise ValueError(
                    f"theta={theta} within 0.02 of the condensation point "
                    f"{ths.theta_cond:.4f}; the frozen count is discontinuous there")
    args = [(cfg.n, cfg.d, cfg.k, tuple(cfg.theta_grid),
             derive_child_seed(cfg.seed, "trial", i)) for i in range(cfg.trials)]
    samples = _map_trials(_null_variable_trial, args, cfg.threads)
    rows = []
    per_trial = {}
    for j, theta in enumerate(cfg.theta_grid):
        v0 = [s[j][0] for s in samples]
        sd = [s[j][1] for s in samples]
        mean_v0, se_v0 = _mean_stderr(v0)
        mean_sd, se_sd = _mean_stderr(sd)
        p = ModelParams.from_theta(cfg.d, cfg.k, theta)
        pred = solve_fixed_points(p).alpha_max
        rows.append({
            "theta": float(theta),
            "null_frac": mean_v0, "null_frac_stderr": se_v0,
            "null_frac_prediction": pred,
            "wp_mismatch_frac": mean_sd, "wp_mismatch_stderr": se_sd,
            "trials": cfg.trials,
        })
        per_trial[float(theta)] = list(zip(v0, sd))
    return ExperimentResult(
        name="null_variables", config=cfg.to_dict(), rows=rows,
        columns=["theta", "null_frac", "null_frac_stderr", "null_frac_prediction",
                 "wp_mismatch_frac", "wp_mismatch_stderr", "trials"],
        per_trial=per_trial)


# ---------------------------------------------------------------------------
# warning-propagation mark fractions
# ---------------------------------------------------------------------------

def _wp_mark_trial(args) -> list:
    n, d, k, thetas, ell, trial_seed = args
    f, sol = satisfiable_instance(n, d, k, trial_seed)
    out = []
    for theta in thetas:
        t = int(theta * n)
        sub, _ = decimated_prefix(f, sol, t)
        engine = WpEngine(sub)
        for _ in range(ell):
            if engine.step() == 0:
                break
        marks_ell = engine.marks_array()
        engine.run()
        marks_lim = engine.marks_array()
        null_ell = marks_ell[t + 1:] == WP_NULL
        frozen_ell = marks_ell[t + 1:] == WP_FROZEN
        null_lim = marks_lim[t + 1:] == WP_NULL
        out.append((
            (t + int(null_ell.sum())) / n,
            int(frozen_ell.sum()) / n,
            int((null_ell ^ null_lim).sum()) / n,
        ))
    return out


def run_wp_mark_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Mark fractions of depth-ell warning propagation on the decimated
    formula against the extremal fixed points."""
    if cfg.d is None or not cfg.theta_grid:
        raise ValueError("mark experiment needs d and a theta grid")
    if cfg.d > analytic.d_min(cfg.k):
        ths = analytic.thresholds_at(cfg.d, cfg.k)
        for theta in cfg.theta_grid:
            if min(abs(theta - ths.theta_lo), abs(theta - ths.theta_hi)) < 0.02:
                raise ValueError(
                    f"theta={theta} within 0.02 of a fixed-point bifurcation")
    args = [(cfg.n, cfg.d, cfg.k, tuple(cfg.theta_grid), cfg.ell,
             derive_child_seed(cfg.seed, "trial", i)) for i in range(cfg.trials)]
    samples = _map_trials(_wp_mark_trial, args, cfg.threads)
    rows = []
    per_trial = {}
    for j, theta in enumerate(cfg.theta_grid):
        nulls = [s[j][0] for s in samples]
        frozens = [s[j][1] for s in samples]
        drift = [s[j][2] for s in samples]
        p = ModelParams.from_theta(cfg.d, cfg.k, theta)
        fp = solve_fixed_points(p)
        mean_n, se_n = _mean_stderr(nulls)
        mean_f, se_f = _mean_stderr(frozens)
        mean_dr, _ = _mean_stderr(drift)
        rows.append({
            "theta": float(theta),
            "null_frac": mean_n, "null_frac_stderr": se_n,
            "null_frac_prediction": fp.alpha_lo,
            "frozen_frac": mean_f, "frozen_frac_stderr": se_f,
            "frozen_frac_prediction": fp.alpha_hi - fp.alpha_lo,
            "depth_drift": mean_dr,
            "trials": cfg.trials,
        })
        per_trial[float(theta)] = list(zip(nulls, frozens, drift))
    return ExperimentResult(
        name="wp_marks", config=cfg.to_dict(), rows=rows,
        columns=["theta", "null_frac", "null_frac_stderr", "null_frac_prediction",
                 "frozen_frac", "frozen_frac_stderr", "frozen_frac_prediction",
                 "depth_drift", "trials"],
        per_trial=per_trial)


# ---------------------------------------------------------------------------
# BP marginal vs exact marginal along the decimation process
# ---------------------------------------------------------------------------

def _marginal_trial(args) -> list:
    n, d, k, thetas, trial_seed = args
    f, _ = satisfiable_instance(n, d, k, trial_seed)
    rng = derive_rng(trial_seed, "decimation-coins")
    basis = rref_of(build_check_system(f))
    assert not basis.inconsistent
    targets = sorted(set(int(theta * n) for theta in thetas))
    assignment = np.zeros(n + 1, dtype=np.uint8)
    results = {}
    t = 0
    for target in targets:
        while t < target:
            x = t + 1
            forced = basis.forced_value(x - 1)
            bit = forced if forced is not None else int(rng.integers(0, 2))
            basis.push_unit(x - 1, bit)
            assignment[x] = bit
            t += 1
        x = t + 1
        forced = basis.forced_value(x - 1)
        pi = 0.5 if forced is None else float(forced)
        sub, _ = substitute(f, {v: int(assignment[v]) for v in range(1, t + 1)})
        engine = BpEngine(sub)
        engine.run()
        mu = engine.marginal_value(x)
        results[target] = (mu, pi)
    return [results[int(theta * n)] for theta in thetas]


def run_marginal_agreement(cfg: ExperimentConfig) -> ExperimentResult:
    """Frequency of disagreement between the BP marginal and the exact
    marginal of the next variable along the decimation process.

    One decimation trajectory per trial serves every theta on the grid.
    """
    if cfg.d is None or not cfg.theta_grid:
        raise ValueError("marginal agreement needs d and a theta grid")
    if cfg.n > cfg.scale_cap:
        raise ValueError(f"n={cfg.n} above the decimation scale cap {cfg.scale_cap}")
    args = [(cfg.n, cfg.d, cfg.k, tuple(cfg.theta_grid),
             derive_child_seed(cfg.seed, "trial", i)) for i in range(cfg.trials)]
    samples = _map_trials(_marginal_trial, args, cfg.threads)
    rows = []
    per_trial = {}
    for j, theta in enumerate(cfg.theta_grid):
        disagrees = [1 if s[j][0] != s[j][1] else 0 for s in samples]
        mean, se = _mean_stderr(disagrees)
        pred = _marginal_disagreement_prediction(cfg.d, cfg.k, theta)
        rows.append({"theta": float(theta), "disagree_rate": mean, "stderr": se,
                     "prediction": pred, "trials": cfg.trials})
        per_trial[float(theta)] = disagrees
    return ExperimentResult(
        name="marginal_agreement", config=cfg.to_dict(), rows=rows,
        columns=["theta", "disagree_rate", "stderr", "prediction", "trials"],
        per_trial=per_trial)


def _marginal_disagreement_prediction(d: float, k: int, theta: float) -> float:
    """Limiting disagreement rate: zero outside the condensation window,
    the frozen-but-undetected density inside it."""
    if d <= analytic.d_min(k):
        return 0.0
    ths = analytic.thresholds_at(d, k)
    if ths.theta_cond < theta < ths.theta_hi:
        p = ModelParams.from_theta(d, k, theta)
        fp = solve_fixed_points(p)
        return (fp.alpha_hi - fp.alpha_lo) / (1.0 - theta)
    return 0.0


# ---------------------------------------------------------------------------
# phase diagram
# ---------------------------------------------------------------------------

def emit_phase_diagram(k: int, d_grid) -> ExperimentResult:
    """The three decimation-time boundary curves over a d grid."""
    rows = []
    for d in d_grid:
        ths = analytic.thresholds_at(float(d), k)
        if not (ths.theta_lo <= ths.theta_cond <= ths.theta_hi):
            raise AssertionError("phase boundaries out of order")
        rows.append({
            "d": float(d),
            "theta_lo": ths.theta_lo,
            "theta_cond": ths.theta_cond,
            "theta_hi": ths.theta_hi,
        })
    return ExperimentResult(
        name="phase_diagram", config={"k": k, "d_grid": [float(d) for d in d_grid]},
        rows=rows, columns=["d", "theta_lo", "theta_cond", "theta_hi"])
