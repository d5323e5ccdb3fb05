"""Monte Carlo risk experiments over the blocked sequence model.

Replicate r of an experiment draws from a counter-based generator keyed
by (master seed, r), so results are bit-identical no matter how many
worker processes share the replicates, and two experiments that differ
only in the estimator see exactly the same truths and noise (paired
comparisons).  Per-replicate results are always reduced in replicate
order.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.random import Generator, Philox

from .blocks import TuningConfig, james_stein, threshold, tuning
from .errors import NumericFailure
from .mixture import (
    MixingDistribution,
    bayes_risk,
    empirical_mixing,
    mixture_summaries,
    signal_rate_bound,
    sparse_rate_bound,
)
from .sequence import BlockedSequence, BlockReport, RiskReport, estimate_sequence
from .signals import test_signal
from .wavelets import dwt, wavelet_basis

ESTIMATORS = (
    "geb-hybrid",
    "soft-universal",
    "hard-universal",
    "james-stein",
    "mle",
    "oracle-truth",
)

_TRUTH_KINDS = ("explicit", "zero", "besov", "signal", "gaussian-prior", "atom-prior")


# ---------------------------------------------------------------------------
# Besov norms


def besov_norm(levels, alpha, p, q) -> float:
    """Sequence-space Besov norm of dyadically organized coefficients.

    [| beta_{-1,1} |^q + sum_j (2^{j (alpha + 1/2 - 1/p)} ||beta_j||_p)^q]^(1/q)
    with the usual supremum modifications when p or q is infinite.
    """
    p = float(p)
    q = float(q)
    if not p > 0 or not q > 0:
        raise ValueError("p and q must be positive (possibly inf)")
    table = {int(j): np.asarray(v, dtype=float).ravel() for j, v in dict(levels).items()}
    terms = []
    for j in sorted(table):
        block = table[j]
        if j == -1:
            terms.append(abs(float(block[0])))
            continue
        if math.isinf(p):
            level_norm = float(np.abs(block).max()) if block.size else 0.0
        else:
            level_norm = float(np.sum(np.abs(block) ** p) ** (1.0 / p))
        terms.append(2.0 ** (j * (alpha + 0.5 - (0.0 if math.isinf(p) else 1.0 / p))) * level_norm)
    arr = np.array(terms)
    if math.isinf(q):
        return float(arr.max()) if arr.size else 0.0
    return float(np.sum(arr**q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# truth sources


@dataclass(frozen=True, eq=False)
class TruthSource:
    """Where the true means come from.

    Deterministic kinds (explicit, zero, besov, signal) fix beta once;
    prior kinds (gaussian-prior, atom-prior) redraw theta i.i.d. from the
    prior on every replicate and set beta = epsilon * theta, which is the
    compound-estimation regime.
    """

    kind: str
    blocks: tuple = ()
    alpha: float = math.nan
    j_max: int = -1
    name: str = ""
    n: int = 0
    snr: float = math.nan
    basis_name: str = "s8"
    tau: float = math.nan
    size: int = 0
    prior: MixingDistribution | None = None

    def __post_init__(self):
        if self.kind not in _TRUTH_KINDS:
            raise ValueError(f"unknown truth kind {self.kind!r}")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def explicit(blocks) -> "TruthSource":
        pairs = blocks.items() if isinstance(blocks, dict) else blocks
        cleaned = tuple(
            (int(j), np.asarray(v, dtype=float).ravel()) for j, v in pairs
        )
        if not cleaned:
            raise ValueError("explicit truth needs at least one block")
        return TruthSource(kind="explicit", blocks=cleaned)

    @staticmethod
    def zero(j_max) -> "TruthSource":
        j_max = int(j_max)
        if j_max < -1:
            raise ValueError("j_max must be at least -1")
        return TruthSource(kind="zero", j_max=j_max)

    @staticmethod
    def besov_extremal(alpha, j_max) -> "TruthSource":
        """One coefficient per level: beta_{j,1} = 2^{-j (alpha + 1/2)}."""
        alpha = float(alpha)
        j_max = int(j_max)
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if j_max < 0:
            raise ValueError("j_max must be nonnegative")
        return TruthSource(kind="besov", alpha=alpha, j_max=j_max)

    @staticmethod
    def signal(name, n, snr, basis_name="s8") -> "TruthSource":
        n = int(n)
        if n < 2 or n & (n - 1):
            raise ValueError(f"signal length must be a power of two, got {n}")
        return TruthSource(kind="signal", name=name, n=n, snr=float(snr), basis_name=basis_name)

    @staticmethod
    def gaussian_prior(tau, size) -> "TruthSource":
        tau = float(tau)
        size = int(size)
        if not tau > 0:
            raise ValueError(f"tau must be positive, got {tau}")
        if size < 1:
            raise ValueError("size must be positive")
        return TruthSource(kind="gaussian-prior", tau=tau, size=size)

    @staticmethod
    def atom_prior(prior: MixingDistribution, size) -> "TruthSource":
        size = int(size)
        if size < 1:
            raise ValueError("size must be positive")
        return TruthSource(kind="atom-prior", prior=prior, size=size)

    # -- structure ---------------------------------------------------------

    def is_random(self) -> bool:
        return self.kind in ("gaussian-prior", "atom-prior")

    def block_ids_and_sizes(self):
        if self.kind == "explicit":
            return tuple((j, arr.size) for j, arr in self.blocks)
        if self.kind in ("zero", "besov"):
            return tuple((j, 2 ** max(j, 0)) for j in range(-1, self.j_max + 1))
        if self.kind == "signal":
            j_top = int(math.log2(self.n)) - 1
            return tuple((j, 2 ** max(j, 0)) for j in range(-1, j_top + 1))
        return ((0, self.size),)

    def fixed_blocks(self):
        """The beta arrays for deterministic kinds, None for prior kinds."""
        if self.kind == "explicit":
            return tuple(arr for _, arr in self.blocks)
        if self.kind == "zero":
            return tuple(np.zeros(s) for _, s in self.block_ids_and_sizes())
        if self.kind == "besov":
            out = []
            for j, size in self.block_ids_and_sizes():
                beta = np.zeros(size)
                if j >= 0:
                    beta[0] = 2.0 ** (-j * (self.alpha + 0.5))
                out.append(beta)
            return tuple(out)
        if self.kind == "signal":
            samples, _ = test_signal(self.name, self.n, self.snr)
            levels = dwt(samples, wavelet_basis(self.basis_name))
            return tuple(levels[j] for j, _ in self.block_ids_and_sizes())
        return None

    def implied_epsilon(self):
        """Signal truths carry their own noise scale; others return None."""
        if self.kind != "signal":
            return None
        _, sigma = test_signal(self.name, self.n, self.snr)
        return sigma / math.sqrt(self.n)

    def draw_blocks(self, epsilon, rng):
        """Per-replicate beta arrays (prior kinds sample theta here)."""
        fixed = self.fixed_blocks()
        if fixed is not None:
            return fixed
        if self.kind == "gaussian-prior":
            theta = self.tau * rng.standard_normal(self.size)
        else:
            atoms = self.prior.locations
            theta = atoms[rng.choice(atoms.size, size=self.size, p=self.prior.weights)]
        return (epsilon * theta,)


# ---------------------------------------------------------------------------
# experiment descriptions


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    """A reproducible Monte Carlo risk experiment.

    epsilons is the noise grid (exactly one entry for monte_carlo_risk,
    at least four for rate_fit); signal truths derive their own epsilon
    and take an empty grid.  compute_ideal toggles the per-replicate
    posterior-mean benchmark for random truths, which costs one
    quadrature per replicate.
    """

    estimator: str
    truth: TruthSource
    epsilons: tuple = ()
    replicates: int = 1
    seed: int = 0
    cfg: TuningConfig = TuningConfig()
    bound_p: float = 2.0
    compute_ideal: bool = True
    kde_mode: str = "direct"

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if int(self.replicates) < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "seed", int(self.seed))
        eps = tuple(float(e) for e in self.epsilons)
        if self.truth.kind == "signal":
            if eps:
                raise ValueError("signal truths size their own noise; leave epsilons empty")
        else:
            if not eps:
                raise ValueError("need at least one epsilon")
            if any(e <= 0 for e in eps):
                raise ValueError("epsilons must be positive")
        object.__setattr__(self, "epsilons", eps)
        if not float(self.bound_p) > 0:
            raise ValueError("bound_p must be positive")
        if self.kde_mode not in ("direct", "fourier"):
            raise ValueError(f"unknown kde mode {self.kde_mode!r}")


def replicate_rng(seed, r) -> Generator:
    """Counter-based stream for replicate r of an experiment."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(r)], dtype=np.uint64)
    return Generator(Philox(key=key))


# ---------------------------------------------------------------------------
# estimators


def _apply_estimator(spec: ExperimentSpec, epsilon, y_blocks, beta_blocks):
    """Run the chosen estimator; returns (estimate arrays, branch labels)."""
    cfg = spec.cfg
    name = spec.estimator
    if name == "geb-hybrid":
        seq = BlockedSequence(
            epsilon=epsilon,
            blocks=tuple((j, y) for (j, _), y in zip(spec.truth.block_ids_and_sizes(), y_blocks)),
        )
        estimates, fits = estimate_sequence(seq, cfg, kde_mode=spec.kde_mode)
        return estimates, [fit.branch for fit in fits]
    estimates = []
    branches = []
    for y, beta in zip(y_blocks, beta_blocks):
        if name == "oracle-truth":
            estimates.append(beta.copy())
            branches.append("oracle")
        elif name == "mle":
            estimates.append(y.copy())
            branches.append("mle")
        elif name == "james-stein":
            estimates.append(james_stein(y, epsilon))
            branches.append("james_stein")
        elif name in ("soft-universal", "hard-universal"):
            mode = "soft" if name == "soft-universal" else "hard"
            if y.size >= cfg.n_star:
                lam = tuning(y.size, cfg).lam
                estimates.append(epsilon * threshold(y / epsilon, lam, mode))
                branches.append("threshold")
            elif cfg.small_block_policy == "james_stein":
                estimates.append(james_stein(y, epsilon))
                branches.append("james_stein")
            else:
                estimates.append(y.copy())
                branches.append("mle")
        else:  # pragma: no cover - guarded by ExperimentSpec
            raise ValueError(name)
    return estimates, branches


def _run_replicate(spec: ExperimentSpec, epsilon, r):
    """One replicate: returns (per-block sq errors, branches, per-block ideal)."""
    rng = replicate_rng(spec.seed, r)
    beta_blocks = spec.truth.draw_blocks(epsilon, rng)
    y_blocks = [beta + epsilon * rng.standard_normal(beta.size) for beta in beta_blocks]
    estimates, branches = _apply_estimator(spec, epsilon, y_blocks, beta_blocks)
    sq = np.array(
        [float(np.sum((est - beta) ** 2)) for est, beta in zip(estimates, beta_blocks)]
    )
    ideal = None
    if spec.truth.is_random() and spec.compute_ideal:
        ideal = np.array(
            [
                epsilon * epsilon * beta.size * bayes_risk(empirical_mixing(beta, epsilon))
                for beta in beta_blocks
            ]
        )
    return sq, branches, ideal


def _replicate_payload(args):
    spec, epsilon, r = args
    return _run_replicate(spec, epsilon, r)


def _resolve_epsilon(spec: ExperimentSpec) -> float:
    implied = spec.truth.implied_epsilon()
    if implied is not None:
        return implied
    if len(spec.epsilons) != 1:
        raise ValueError(
            f"monte_carlo_risk needs exactly one epsilon, got {len(spec.epsilons)}; "
            "use rate_fit for grids"
        )
    return spec.epsilons[0]


def _deterministic_ideal(spec, epsilon, ids_sizes):
    fixed = spec.truth.fixed_blocks()
    if fixed is None:
        return None
    return [
        epsilon * epsilon * beta.size * bayes_risk(empirical_mixing(beta, epsilon))
        for beta in fixed
    ]


def _bounds_for_blocks(spec, ids_sizes):
    """Per-block (r_p, r0) for deterministic or atom-prior truths."""
    fixed = spec.truth.fixed_blocks()
    out = []
    p_eff = min(float(spec.bound_p), 2.0)
    if fixed is not None:
        eps = _resolve_epsilon(spec)
        for beta, (_, size) in zip(fixed, ids_sizes):
            if size < 3:
                out.append((None, None))
                continue
            prior = empirical_mixing(beta, eps)
            magnitude = mixture_summaries(prior, p_eff, 1.0).mu_p
            out.append(
                (sparse_rate_bound(size, magnitude, p_eff), signal_rate_bound(size, prior))
            )
        return out
    if spec.truth.kind == "atom-prior":
        prior = spec.truth.prior
        for _, size in ids_sizes:
            if size < 3:
                out.append((None, None))
                continue
            magnitude = mixture_summaries(prior, p_eff, 1.0).mu_p
            out.append(
                (sparse_rate_bound(size, magnitude, p_eff), signal_rate_bound(size, prior))
            )
        return out
    return [(None, None) for _ in ids_sizes]


def monte_carlo_risk(spec: ExperimentSpec, jobs=1) -> RiskReport:
    """Replicate-averaged risk of the configured estimator.

    Deterministic function of (spec, nothing else): the worker count only
    changes wall time, never a bit of the report.
    """
    epsilon = _resolve_epsilon(spec)
    ids_sizes = spec.truth.block_ids_and_sizes()
    reps = spec.replicates
    jobs = max(1, int(jobs))

    tasks = [(spec, epsilon, r) for r in range(reps)]
    if jobs == 1 or reps == 1:
        results = [_replicate_payload(t) for t in tasks]
    else:
        chunk = max(1, reps // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate_payload, tasks, chunksize=chunk))

    n_blocks = len(ids_sizes)
    sq_matrix = np.zeros((reps, n_blocks))
    ideal_matrix = np.zeros((reps, n_blocks))
    have_random_ideal = spec.truth.is_random() and spec.compute_ideal
    branch_counts = [dict() for _ in range(n_blocks)]
    for r, (sq, branches, ideal) in enumerate(results):
        sq_matrix[r] = sq
        if have_random_ideal:
            ideal_matrix[r] = ideal
        for b, label in enumerate(branches):
            branch_counts[b][label] = branch_counts[b].get(label, 0) + 1

    block_mse = sq_matrix.mean(axis=0)
    totals = sq_matrix.sum(axis=1)
    total_mse = float(block_mse.sum())
    total_se = float(totals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0

    if have_random_ideal:
        block_ideal = list(ideal_matrix.mean(axis=0))
    else:
        block_ideal = _deterministic_ideal(spec, epsilon, ids_sizes)
    bounds = _bounds_for_blocks(spec, ids_sizes)

    rows = []
    for b, (block_id, size) in enumerate(ids_sizes):
        modal = min(
            branch_counts[b].items(), key=lambda kv: (-kv[1], kv[0])
        )[0]
        rows.append(
            BlockReport(
                block_id=block_id,
                size=size,
                branch=modal,
                empirical_mse=float(block_mse[b]),
                ideal_risk=None if block_ideal is None else float(block_ideal[b]),
                bound_r_p=bounds[b][0],
                bound_r0=bounds[b][1],
            )
        )
    total_ideal = None if block_ideal is None else float(np.sum(block_ideal))
    regret = None if total_ideal is None else total_mse - total_ideal
    return RiskReport(
        per_block=tuple(rows),
        total_mse=total_mse,
        total_ideal=total_ideal,
        regret=regret,
        total_se=total_se,
        replicates=reps,
        epsilon=epsilon,
        estimator=spec.estimator,
        seed=spec.seed,
    )


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log risk against log epsilon."""

    slope: float
    intercept: float
    points: tuple  # (epsilon, total_mse, total_se) triples


def rate_fit(spec: ExperimentSpec, jobs=1) -> RateFit:
    """Fit the risk-versus-noise rate over spec.epsilons."""
    if len(spec.epsilons) < 4:
        raise ValueError(f"rate fits need at least 4 epsilons, got {len(spec.epsilons)}")
    points = []
    for eps in spec.epsilons:
        sub = replace(spec, epsilons=(eps,))
        report = monte_carlo_risk(sub, jobs=jobs)
        points.append((eps, report.total_mse, report.total_se))
    risks = np.array([p[1] for p in points])
    if np.any(risks <= 0) or not np.all(np.isfinite(risks)):
        raise NumericFailure(
            f"rate fit needs strictly positive finite risks, got {risks.tolist()}"
        )
    log_eps = np.log([p[0] for p in points])
    slope, intercept = np.polyfit(log_eps, np.log(risks), 1)
    return RateFit(slope=float(slope), intercept=float(intercept), points=tuple(points))


# ---------------------------------------------------------------------------
# serialization


def _clean(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def report_to_dict(report: RiskReport) -> dict:
    return {
        "estimator": report.estimator,
        "epsilon": report.epsilon,
        "replicates": report.replicates,
        "seed": report.seed,
        "total_mse": _clean(report.total_mse),
        "total_ideal": _clean(report.total_ideal),
        "regret": _clean(report.regret),
        "total_se": _clean(report.total_se),
        "per_block": [
            {
                "block_id": row.block_id,
                "size": row.size,
                "branch": row.branch,
                "empirical_mse": _clean(row.empirical_mse),
                "ideal_risk": _clean(row.ideal_risk),
                "bound_r_p": _clean(row.bound_r_p),
                "bound_r0": _clean(row.bound_r0),
            }
            for row in report.per_block
        ],
    }


def report_to_json(report: RiskReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True, allow_nan=False)


def report_to_csv(report: RiskReport) -> str:
    buffer = _io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(
        ["block_id", "size", "branch", "empirical_mse", "ideal_risk", "bound_r_p", "bound_r0"]
    )

    def fmt(v):
        return "" if v is None else f"{float(v):.17g}"

    for row in report.per_block:
        writer.writerow(
            [
                row.block_id,
                row.size,
                row.branch,
                fmt(row.empirical_mse),
                fmt(row.ideal_risk),
                fmt(row.bound_r_p),
                fmt(row.bound_r0),
            ]
        )
    writer.writerow(
        ["total", sum(r.size for r in report.per_block), "", fmt(report.total_mse), fmt(report.total_ideal), "", ""]
    )
    return buffer.getvalue()
