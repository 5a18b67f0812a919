"""Annealing over beta: bifurcation detection, column splitting, corrected beta.

A group ``j`` of a converged solution becomes unstable when the matrix

    M_j(beta) = diag(sum_i u_ij pi_i / theta_j**2)
                - beta * sum_i u_ij (pi_i / theta_j)(pi_i / theta_j)^T

(``u_ij = gamma_i psi_ij / alpha_j``, divisions elementwise) loses positive
definiteness on the zero-sum subspace.  ``alpha_j M_j`` is exactly the
second variation of the free energy when group ``j`` is duplicated and the
two copies are pushed apart along ``+q`` and ``-q``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh, null_space
from scipy.special import logsumexp

from .chain import TransitionModel, _as_gamma
from .distortion import LN2, MUTUAL_INFORMATION, divergence_matrix
from .errors import (
    EmptyGroupCollapse,
    FixedPointDivergence,
    NoCriticalPointInBracket,
    SingularTheta,
)
from .partition import ProbabilisticPartition, harden
from .solver import SolveReport, SolverConfig, _derive, solve

log = logging.getLogger(__name__)

SINGULAR_THETA = 1e-300

MULTIPLIER = "multiplier"
TEMPERATURE = "temperature"


# ---------------------------------------------------------------------------
# stability matrix


def _zero_sum_basis(k: int) -> np.ndarray:
    return null_space(np.ones((1, k)))


def group_stability_matrix(pi: np.ndarray, u_col: np.ndarray, theta_row: np.ndarray, beta: float):
    """Pieces ``(A, B, support)`` of ``M_j(beta) = A - beta * B`` restricted to ``theta_j > 0``.

    ``u_col`` holds the conditional weights ``u_ij`` of the group.
    """
    support = theta_row > SINGULAR_THETA
    active = u_col > 0
    leak = np.argwhere((pi[np.ix_(active, ~support)] > 0))
    if len(leak):
        raise SingularTheta(-1, int(np.flatnonzero(~support)[leak[0][1]]))
    p = pi[:, support]
    t = theta_row[support]
    x = p / t
    a = np.diag((u_col[:, None] * p).sum(axis=0) / t**2)
    b = (u_col[:, None] * x).T @ x
    return a, b, support


def _group_pieces(model: TransitionModel, gamma, psi: np.ndarray):
    state = _derive(model.pi, _as_gamma(gamma), psi)
    u = _as_gamma(gamma)[:, None] * psi / state.alpha
    pieces = []
    for j in range(psi.shape[1]):
        try:
            a, b, support = group_stability_matrix(model.pi, u[:, j], state.theta[j], 1.0)
        except SingularTheta as exc:
            raise SingularTheta(j, exc.column) from None
        v = _zero_sum_basis(int(support.sum()))
        pieces.append((v.T @ a @ v, v.T @ b @ v))
    return state, pieces


def stability_matrices(model: TransitionModel, gamma, psi, beta: float) -> list:
    """``M_j(beta)`` for every group, each on the zero-sum subspace of its support."""
    psi = psi.psi if isinstance(psi, ProbabilisticPartition) else np.asarray(psi, float)
    _, pieces = _group_pieces(model, gamma, psi)
    return [a - beta * b for a, b in pieces]


def stability_min_eig(model: TransitionModel, gamma, report, beta: float | None = None):
    """Smallest eigenvalue over groups of ``M_j(beta)`` and the group attaining it."""
    psi = report.final_partition.psi if isinstance(report, SolveReport) else np.asarray(report)
    if beta is None:
        beta = report.beta
    best, arg = math.inf, -1
    for j, mat in enumerate(stability_matrices(model, gamma, psi, beta)):
        if mat.shape[0] == 0:
            continue
        lam = float(np.linalg.eigvalsh(mat)[0])
        if lam < best:
            best, arg = lam, j
    return best, arg


def local_critical_estimate(model: TransitionModel, gamma, report: SolveReport):
    """Beta at which ``M_j`` would turn singular if the solution were frozen.

    Returns ``(beta_hat, group)``; ``beta_hat`` is ``inf`` when no group has
    spread to split.
    """
    _, pieces = _group_pieces(model, gamma, report.final_partition.psi)
    best, arg = math.inf, -1
    for j, (a, b) in enumerate(pieces):
        if a.shape[0] == 0:
            continue
        lam = float(eigh(b, a, eigvals_only=True)[-1])
        if lam > 1e-14 and 1.0 / lam < best:
            best, arg = 1.0 / lam, j
    return best, arg


def reduced_free_energy(model: TransitionModel, gamma, alpha, theta, beta: float) -> float:
    """``-(1/beta) sum_i gamma_i log sum_j alpha_j exp(-beta g(pi_i, theta_j))``.

    The free energy after the partition has been optimised out for fixed
    ``alpha`` and ``theta``.
    """
    g = _as_gamma(gamma)
    div = divergence_matrix(model.pi, np.asarray(theta, float))
    lse = logsumexp(np.log(np.asarray(alpha, float))[None, :] - beta * div, axis=1)
    return -math.fsum(g * lse) / beta


def stability_quadratic_form(model: TransitionModel, gamma, alpha, theta, beta: float, q) -> float:
    """Second derivative of :func:`reduced_free_energy` along ``theta + eps * q``.

    Sum of the per-group forms ``q_j^T (alpha_j M_j) q_j`` plus the coupling
    term ``beta sum_i gamma_i (sum_j psi_ij (pi_i / theta_j) . q_j)^2``,
    where ``psi`` is the Gibbs partition of ``(alpha, theta)``.
    """
    g = _as_gamma(gamma)
    pi = model.pi
    theta = np.asarray(theta, float)
    alpha = np.asarray(alpha, float)
    q = np.asarray(q, float)
    logits = np.log(alpha)[None, :] - beta * divergence_matrix(pi, theta)
    psi = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    u = g[:, None] * psi / alpha
    total = 0.0
    proj = np.zeros_like(psi)
    for j in range(theta.shape[0]):
        a, b, support = group_stability_matrix(pi, u[:, j], theta[j], beta)
        qj = q[j, support]
        total += alpha[j] * float(qj @ (a - beta * b) @ qj)
        proj[:, j] = (pi[:, support] / theta[j, support]) @ qj
    total += beta * float(np.sum(g * np.sum(psi * proj, axis=1) ** 2))
    return float(total)


# ---------------------------------------------------------------------------
# critical beta


@dataclass(frozen=True)
class CriticalBetaResult:
    beta_c: float
    group_index: int
    #: (beta, min eigenvalue) probes in evaluation order
    samples: list
    #: converged solution just below beta_c (stable side)
    below: SolveReport
    #: converged solution at beta_c (unstable side)
    above: SolveReport

    def min_eigenvalue_at(self, beta: float) -> float:
        for b, lam in self.samples:
            if b == beta:
                return lam
        raise KeyError(beta)


@dataclass(frozen=True)
class SweepConfig:
    seed: int = 0
    #: relative bracketing tolerance on the critical beta
    rel_tol: float = 1e-8
    #: post-split solves run at beta_c * (1 + split_margin); the margin is
    #: shrunk down to min_margin when the new branch is already unstable there
    split_margin: float = 1e-2
    min_margin: float = 1e-3
    #: stall tolerance and sweep cap for the solves made by the annealer
    stall_tol: float = 1e-13
    max_iters: int = 5_000
    #: sweeps tried before switching to Newton polishing of the fixed point
    quick_iters: int = 300
    max_groups: int | None = None
    max_march: int = 200
    corrected_scale: str = TEMPERATURE
    corrected_tol: float = 1e-6
    corrected_rounds: int = 100
    #: minimum sup-norm gap between a new theta row and its parent
    separation_tol: float = 1e-7

    def solver(self, beta: float) -> SolverConfig:
        return SolverConfig(
            beta=beta, max_iters=self.max_iters, stall_tol=self.stall_tol, seed=self.seed, accelerate=True
        )


def _fixed_point_map(pi, g, alpha, theta, beta):
    with np.errstate(divide="ignore"):
        logits = np.log(alpha)[None, :] - beta * divergence_matrix(pi, theta)
    psi = np.exp(logits - logits.max(axis=1, keepdims=True))
    psi /= psi.sum(axis=1, keepdims=True)
    w = g[:, None] * psi
    a = w.sum(axis=0)
    return psi, a, (w / a).T @ pi


def _newton_polish(model, gamma, psi, beta, steps: int = 30, tol: float = 1e-14):
    """Newton iterations on ``x = T(x)`` for ``x = (alpha, theta)``, ``T`` one EM sweep.

    Near a bifurcation the sweep contracts at a rate close to one, so plain
    iteration crawls; the Jacobian of ``T`` is taken by forward differences.
    Returns the partition at the polished point, or ``None`` when the
    iteration leaves the feasible set or fails to reduce the residual.
    """
    pi = model.pi
    g = _as_gamma(gamma)
    state = _derive(pi, g, psi)
    alpha, theta = state.alpha.copy(), state.theta.copy()
    m = alpha.shape[0]
    support = theta > 0

    def pack(a, t):
        return np.concatenate([a, t[support]])

    def unpack(x):
        t = np.zeros_like(theta)
        t[support] = x[m:]
        return x[:m], t

    def residual(x):
        a, t = unpack(x)
        if np.any(a <= 0) or np.any(t[support] <= 0):
            return None
        _, a2, t2 = _fixed_point_map(pi, g, a, t, beta)
        return pack(a2, t2) - x

    x = pack(alpha, theta)
    r = residual(x)
    for _ in range(steps):
        norm = np.max(np.abs(r))
        if norm < tol:
            break
        jac = np.empty((x.size, x.size))
        for k in range(x.size):
            h = 1e-7 * max(abs(x[k]), 1e-8)
            xk = x.copy()
            xk[k] += h
            rk = residual(xk)
            if rk is None:
                xk[k] -= 2 * h
                rk = residual(xk)
                if rk is None:
                    return None
                h = -h
            jac[:, k] = (rk - r) / h
        dx = np.linalg.lstsq(jac, -r, rcond=None)[0]
        step = 1.0
        while step > 1e-4:
            cand = x + step * dx
            rc = residual(cand)
            if rc is not None and np.max(np.abs(rc)) < norm:
                x, r = cand, rc
                break
            step /= 2
        else:
            return None
    a, t = unpack(x)
    return _fixed_point_map(pi, g, a, t, beta)[0]


def _resolve(model, gamma, psi, beta, cfg: SweepConfig) -> SolveReport:
    quick = replace(cfg.solver(beta), max_iters=min(cfg.quick_iters, cfg.max_iters))
    rep = solve(model, gamma, ProbabilisticPartition(psi), quick)
    if rep.stalled:
        return rep
    polished = _newton_polish(model, gamma, rep.final_partition.psi, beta)
    if polished is not None and polished.shape == rep.final_partition.psi.shape:
        try:
            fin = solve(model, gamma, ProbabilisticPartition(polished), quick)
        except EmptyGroupCollapse:
            fin = None
        if fin is not None and fin.m == rep.m and fin.energy.free_energy <= rep.energy.free_energy + 1e-12:
            return fin
    return solve(model, gamma, rep.final_partition, cfg.solver(beta))


def find_critical_beta(
    model: TransitionModel,
    gamma,
    current: SolveReport,
    bracket,
    config: SweepConfig | None = None,
    allow_unstable_start: bool = False,
):
    """Locate the first beta in ``bracket`` where the converged branch loses stability.

    The branch is followed upward from ``bracket[0]`` (guided by the
    frozen-solution estimate) until the minimum eigenvalue changes sign,
    then bisected with warm-started re-solves to ``rel_tol``.
    """
    cfg = config or SweepConfig()
    lo, hi = float(bracket[0]), float(bracket[1])
    samples = []
    stable = _resolve(model, gamma, current.final_partition.psi, lo, cfg)
    lam, group = stability_min_eig(model, gamma, stable, lo)
    samples.append((lo, lam))
    if not lam > 0:
        if allow_unstable_start:
            # the next split lies closer than the settle margin
            return CriticalBetaResult(lo, group, samples, stable, stable)
        raise NoCriticalPointInBracket(f"branch is already unstable at beta={lo:.6g} (min eig {lam:.3e})")
    b = lo
    unstable = None
    for _ in range(cfg.max_march):
        est, _ = local_critical_estimate(model, gamma, stable)
        target = est * (1 + 1e-9) if np.isfinite(est) else b * 2.0
        nxt = min(hi, max(b * (1 + 1e-4), min(target, b * 2.0)))
        trial = _resolve(model, gamma, stable.final_partition.psi, nxt, cfg)
        lam, _ = stability_min_eig(model, gamma, trial, nxt)
        samples.append((nxt, lam))
        if lam <= 0:
            unstable = trial
            lo_b, hi_b = b, nxt
            break
        stable, b = trial, nxt
        if b >= hi:
            break
    if unstable is None:
        raise NoCriticalPointInBracket(f"no loss of stability in [{bracket[0]:.6g}, {hi:.6g}]")
    while (hi_b - lo_b) > cfg.rel_tol * lo_b:
        mid = 0.5 * (lo_b + hi_b)
        trial = _resolve(model, gamma, stable.final_partition.psi, mid, cfg)
        lam, _ = stability_min_eig(model, gamma, trial, mid)
        samples.append((mid, lam))
        if lam > 0:
            stable, lo_b = trial, mid
        else:
            unstable, hi_b = trial, mid
    _, group = stability_min_eig(model, gamma, unstable, hi_b)
    return CriticalBetaResult(hi_b, group, samples, stable, unstable)


# ---------------------------------------------------------------------------
# splitting


def split_bootstrap(report, group: int, seed: int) -> ProbabilisticPartition:
    """Duplicate column ``group`` and share each state's mass about 50/50 (+-10%).

    The new column is guaranteed to be the larger half for at least one
    state; if the draw leaves it empty, the state with the largest share of
    the split column is given 60% to the new column.
    """
    psi = report.final_partition.psi if isinstance(report, SolveReport) else report.psi
    rng = np.random.default_rng(seed)
    share = 0.5 + rng.uniform(-0.1, 0.1, size=psi.shape[0])
    col = psi[:, group]
    if not np.any((share > 0.5) & (col > 0)):
        i = int(np.argmax(col * share))
        share[i] = 0.6
    out = np.column_stack([psi, col * share])
    out[:, group] = col * (1.0 - share)
    return ProbabilisticPartition(out / out.sum(axis=1, keepdims=True))


def _separated(report: SolveReport, parent: int, child: int, tol: float) -> bool:
    theta = report.final_theta.theta
    return bool(np.max(np.abs(theta[parent] - theta[child])) > tol)


# ---------------------------------------------------------------------------
# corrected beta


def corrected_beta(report: SolveReport, n: int, base: float = 2.0) -> float:
    """``base ** I / (2 n)`` with ``I`` the mutual information in units of ``log(base)``."""
    info = report.energy.mutual_information / math.log(base)
    return base**info / (2.0 * n)


def corrected_objective(report: SolveReport, gamma, n: int) -> float:
    """Mutual information in bits plus the second-order finite-size penalty."""
    g = _as_gamma(gamma)
    psi = report.final_partition.psi
    alpha = report.final_alpha.alpha
    penalty = math.fsum((g[:, None] * psi**2 / (2 * n * LN2 * alpha[None, :])).ravel())
    return report.energy.mutual_information / LN2 + penalty


def rescaled_slope_bound(report: SolveReport, n: int, beta: float) -> float:
    """``log(2)/beta - log(2) 2**I / (2 beta n)`` with ``I`` in bits."""
    info = report.energy.mutual_information / LN2
    return LN2 / beta - LN2 * 2.0**info / (2 * beta * n)


def solver_beta(corrected: float, scale: str) -> float:
    """Inverse temperature used by the solver for a corrected multiplier."""
    if scale == TEMPERATURE:
        return 1.0 / corrected
    if scale == MULTIPLIER:
        return corrected
    raise ValueError(f"unknown scale {scale!r}")


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRow:
    beta: float
    m: int
    distortion: float
    mutual_information: float
    free_energy: float
    is_critical: bool = False
    is_corrected: bool = False
    report: SolveReport | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class CorrectedResult:
    corrected_beta: float
    solver_beta: float
    report: SolveReport
    rounds: int
    history: list
    objective: float
    slope_bound: float


@dataclass
class SweepReport:
    rows: list
    criticals: list
    #: (beta from which the stage holds, converged report) per group count
    stages: list
    beta_max: float
    config: SweepConfig
    corrected: CorrectedResult | None = None

    @property
    def corrected_beta(self) -> float | None:
        return None if self.corrected is None else self.corrected.corrected_beta

    @property
    def knee_m(self) -> int | None:
        return None if self.corrected is None else harden(self.corrected.report.final_partition).m

    def critical_betas(self) -> list:
        return [c.beta_c for c in self.criticals]

    def stage_for(self, beta: float):
        chosen = self.stages[0]
        for start, rep in self.stages:
            if start <= beta:
                chosen = (start, rep)
        return chosen

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: (r.beta, r.m, r.is_corrected))


def _row(report: SolveReport, **flags) -> SweepRow:
    e = report.energy
    return SweepRow(report.beta, report.m, e.expected_distortion, e.mutual_information, e.free_energy, report=report, **flags)


def solve_at(model: TransitionModel, gamma, sweep: SweepReport, beta: float) -> SolveReport:
    """Solve at ``beta`` warm-started from the sweep stage whose plateau contains it."""
    _, stage = sweep.stage_for(beta)
    return _resolve(model, gamma, stage.final_partition.psi, beta, sweep.config)


def _split_and_settle(model, gamma, crit: CriticalBetaResult, m: int, cfg: SweepConfig, seed: int):
    """Split the flagged group and converge just above ``beta_c``.

    Returns the (m+1)-group solution at the largest margin not exceeding
    ``split_margin`` for which it is stable, or the one at ``min_margin``
    when the next split is closer than that.
    """
    new = None
    for attempt in range(4):
        init = split_bootstrap(crit.above, crit.group_index, seed + attempt)
        try:
            trial = _resolve(model, gamma, init.psi, crit.beta_c * (1 + cfg.split_margin * 4**attempt), cfg)
        except EmptyGroupCollapse:
            continue
        if trial.m == m + 1 and _separated(trial, crit.group_index, m, cfg.separation_tol):
            new = trial
            break
    if new is None:
        return None
    margin = new.beta / crit.beta_c - 1.0
    while stability_min_eig(model, gamma, new)[0] <= 0 and margin > cfg.min_margin:
        margin = max(margin / 10.0, cfg.min_margin)
        try:
            trial = _resolve(model, gamma, new.final_partition.psi, crit.beta_c * (1 + margin), cfg)
        except EmptyGroupCollapse:
            break
        if trial.m != m + 1:
            break
        new = trial
    return new


def sweep(model: TransitionModel, gamma, beta_max: float, config: SweepConfig | None = None, beta_min: float = 1e-3) -> SweepReport:
    """Anneal from one group upward, splitting at every critical beta up to ``beta_max``."""
    cfg = config or SweepConfig()
    n = model.n
    max_groups = cfg.max_groups or n
    report = _resolve(model, gamma, np.ones((n, 1)), beta_min, cfg)
    rows = [_row(report)]
    stages = [(0.0, report)]
    criticals: list[CriticalBetaResult] = []
    beta = beta_min
    split_seed = cfg.seed
    while report.m < max_groups and beta < beta_max:
        try:
            crit = find_critical_beta(model, gamma, report, (beta, beta_max), cfg, allow_unstable_start=len(stages) > 1)
        except NoCriticalPointInBracket:
            break
        rows.append(_row(crit.below))
        new = _split_and_settle(model, gamma, crit, report.m, cfg, split_seed)
        split_seed += 8
        if new is None:
            log.warning("split at beta=%.6g did not separate; stopping sweep", crit.beta_c)
            break
        criticals.append(crit)
        report = new
        rows.append(_row(report, is_critical=True))
        stages.append((crit.beta_c, report))
        beta = report.beta
    out = SweepReport(rows, criticals, stages, beta_max, cfg)
    return out


def self_consistent_corrected(model: TransitionModel, gamma, sweep_report: SweepReport, scale: str | None = None) -> CorrectedResult:
    """Iterate ``solve at beta -> mutual information -> corrected beta`` to a fixed point."""
    cfg = sweep_report.config
    scale = scale or cfg.corrected_scale
    n = model.n
    value = 1.0 / (2.0 * n)
    history = [value]
    for rounds in range(1, cfg.corrected_rounds + 1):
        rep = solve_at(model, gamma, sweep_report, solver_beta(value, scale))
        new = corrected_beta(rep, n)
        history.append(new)
        if abs(new - value) <= cfg.corrected_tol * value:
            rep = solve_at(model, gamma, sweep_report, solver_beta(new, scale))
            return CorrectedResult(
                corrected_beta=new,
                solver_beta=solver_beta(new, scale),
                report=rep,
                rounds=rounds,
                history=history,
                objective=corrected_objective(rep, gamma, n),
                slope_bound=rescaled_slope_bound(rep, n, new),
            )
        value = new
    tail = history[-10:]
    raise FixedPointDivergence(min(tail), max(tail), cfg.corrected_rounds)


def anneal(model: TransitionModel, gamma, beta_max: float, config: SweepConfig | None = None) -> SweepReport:
    """Full sweep plus the self-consistent corrected beta, recorded as an extra row."""
    rep = sweep(model, gamma, beta_max, config)
    rep.corrected = self_consistent_corrected(model, gamma, rep)
    rep.rows.append(_row(rep.corrected.report, is_corrected=True))
    return rep


def anneal_to_groups(model: TransitionModel, gamma, m: int, beta: float, config: SweepConfig | None = None) -> SolveReport:
    """Anneal until ``m`` groups exist, then solve at ``beta`` from that stage."""
    cfg = replace(config or SweepConfig(), max_groups=m)
    rep = sweep(model, gamma, max(beta, 1e6), cfg)
    _, stage = rep.stages[-1]
    return _resolve(model, gamma, stage.final_partition.psi, beta, cfg)


__all__ = [
    "CriticalBetaResult",
    "CorrectedResult",
    "SweepConfig",
    "SweepReport",
    "SweepRow",
    "anneal",
    "anneal_to_groups",
    "corrected_beta",
    "corrected_objective",
    "find_critical_beta",
    "local_critical_estimate",
    "reduced_free_energy",
    "rescaled_slope_bound",
    "self_consistent_corrected",
    "solve_at",
    "split_bootstrap",
    "stability_matrices",
    "stability_min_eig",
    "stability_quadratic_form",
    "sweep",
]
