"""Experiment orchestration: seeded drops, scheme comparison and CSV output."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import assign_pilots, draw_realizations, estimate_channels, pilot_observations
from .combining import estimate_effective_stats, fixed_power_solution, lmmse_combiners, mr_combiners, se_from_sinr
from .exceptions import DropError, InvalidConfig
from .geometry import NetworkConfig, channel_correlations, generate_layout
from .optimizer import IterationTrace, alternating_maxmin

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "fixed_power")
COMBINERS = ("lmmse", "mr")

# seed-sequence stream identifiers
_LAYOUT, _SHADOW, _PILOTS, _CHANNELS = range(4)


@dataclass(frozen=True)
class ExperimentSpec:
    cfg: NetworkConfig = field(default_factory=NetworkConfig)
    n_drops: int = 20
    schemes: tuple = SCHEMES
    combiners: tuple = COMBINERS
    output_dir: str = "results"
    max_iters: int = 10
    tol: float = 1e-3
    freeze_stats: bool = False

    def validate(self):
        self.cfg.validate()
        if self.n_drops < 1:
            raise InvalidConfig("n_drops must be at least 1")
        if not self.schemes or not set(self.schemes) <= set(SCHEMES):
            raise InvalidConfig(f"schemes must be a non-empty subset of {SCHEMES}, got {self.schemes}")
        if not self.combiners or not set(self.combiners) <= set(COMBINERS):
            raise InvalidConfig(f"combiners must be a non-empty subset of {COMBINERS}, got {self.combiners}")
        if self.max_iters < 1 or not self.tol > 0:
            raise InvalidConfig("max_iters must be >= 1 and tol > 0")
        return self


@dataclass
class DropResult:
    drop_index: int
    scheme: str
    combiner: str
    min_se: float
    per_ue_se: np.ndarray
    iterations_used: int
    powers: np.ndarray
    trace: IterationTrace = None


@dataclass
class DropSetup:
    """Everything about one drop that does not depend on the data powers."""

    cfg: NetworkConfig
    layout: object
    R: np.ndarray
    assignment: object
    h: np.ndarray
    estimates: object

    @property
    def pmax(self):
        return self.layout.pmax_w


def _rng(seed, drop_index, stream):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(drop_index, stream)))


def build_drop(cfg, drop_index):
    """Layout, correlations, pilots, channels and estimates for one drop.

    Each random ingredient has its own seed stream, so for instance the
    layout and channels of a drop are identical across pilot reuse factors.
    """
    layout = generate_layout(cfg, _rng(cfg.seed, drop_index, _LAYOUT))
    _, R = channel_correlations(cfg, layout, _rng(cfg.seed, drop_index, _SHADOW))
    assignment = assign_pilots(cfg, _rng(cfg.seed, drop_index, _PILOTS))
    h, w = draw_realizations(R, cfg.mc_realizations, cfg.tau_p, cfg.seed, key=(drop_index, _CHANNELS))
    sigma2 = cfg.noise_power_w
    p_pilot = layout.pmax_w
    z = pilot_observations(h, w, assignment, p_pilot, sigma2)
    estimates = estimate_channels(z, assignment, p_pilot, R, sigma2)
    return DropSetup(cfg, layout, R, assignment, h, estimates)


def stats_provider(setup, combiner):
    """Callable mapping data powers to effective-channel statistics.

    MR combiners do not depend on the powers, so their statistics are
    computed once; L-MMSE statistics are recomputed for each new power
    vector over the same cached realizations.
    """
    sigma2 = setup.cfg.noise_power_w
    est = setup.estimates
    if combiner == "mr":
        stats = estimate_effective_stats(setup.h, mr_combiners(est.h_hat), sigma2)
        return lambda p: stats
    if combiner != "lmmse":
        raise InvalidConfig(f"unknown combiner {combiner!r}")
    cache = {}

    def provider(p):
        key = np.asarray(p, dtype=float).tobytes()
        if key not in cache:
            cache.clear()
            v = lmmse_combiners(est.h_hat, est.C, p, sigma2)
            cache[key] = estimate_effective_stats(setup.h, v, sigma2)
        return cache[key]

    return provider


def run_drop(spec, drop_index, setup=None):
    """All requested (scheme, combiner) results for one drop.

    Both schemes see the same channel realizations. The proposed scheme
    starts from full power, which is exactly the fixed-power operating point.
    """
    cfg = spec.cfg
    setup = setup or build_drop(cfg, drop_index)
    pmax = setup.pmax
    results = []
    for combiner in spec.combiners:
        provider = stats_provider(setup, combiner)
        for scheme in spec.schemes:
            if scheme == "fixed_power":
                _, sinr = fixed_power_solution(provider(pmax), pmax)
                p, trace, iters = pmax.copy(), None, 0
            else:
                p, _, trace = alternating_maxmin(
                    provider, pmax, p0=pmax, max_iters=spec.max_iters, tol=spec.tol, freeze_stats=spec.freeze_stats
                )
                sinr = trace[-1].sinr_exact
                iters = len(trace) - 1
            report = se_from_sinr(np.maximum(sinr, 0.0), cfg.tau_p, cfg.tau_c)
            results.append(DropResult(drop_index, scheme, combiner, report.min_se, report.se, iters, p, trace))
    return results


def _run_drop_args(args):
    spec, drop_index = args
    try:
        return run_drop(spec, drop_index)
    except InvalidConfig:
        raise
    except Exception as exc:
        raise DropError(drop_index, exc) from exc


def run_experiment(spec, jobs=1, progress=None):
    """Run every drop; results are ordered by drop index whatever ``jobs`` is."""
    spec.validate()
    indices = range(spec.n_drops)
    out = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, res in zip(indices, pool.map(_run_drop_args, [(spec, i) for i in indices])):
                out.extend(res)
                if progress:
                    progress(i, spec.n_drops)
    else:
        for i in indices:
            out.extend(_run_drop_args((spec, i)))
            if progress:
                progress(i, spec.n_drops)
    return sorted(out, key=lambda r: r.drop_index)


def fmt(x):
    return f"{x:.9g}"


def emit_cdf(results, path):
    """Empirical CDF of min-user SE per (scheme, combiner) group."""
    groups = {}
    for r in results:
        groups.setdefault((r.scheme, r.combiner), []).append(r.min_se)
    lines = ["scheme,combiner,min_se_sorted,cdf"]
    for (scheme, combiner), values in sorted(groups.items()):
        values = sorted(values)
        n = len(values)
        for rank, v in enumerate(values, start=1):
            lines.append(f"{scheme},{combiner},{fmt(v)},{fmt(rank / n)}")
    Path(path).write_text("\n".join(lines) + "\n")
    return path


def emit_convergence(results, path, tau_p, tau_c):
    """Per-iteration min-user SE and power-subproblem optimum of the proposed scheme."""
    lines = ["drop_index,iteration,min_se_exact,t_approx"]
    prelog = 1.0 - tau_p / tau_c
    for r in sorted((r for r in results if r.trace is not None), key=lambda r: r.drop_index):
        t = r.trace.t_approx
        drops = np.flatnonzero(np.diff(t) < -1e-9 * np.abs(t[:-1]))
        if drops.size:
            log.warning("drop %d: t_approx decreases after iteration(s) %s", r.drop_index, drops.tolist())
        for rec in r.trace:
            se = prelog * math.log2(1.0 + max(rec.min_sinr_exact, 0.0))
            lines.append(f"{r.drop_index},{rec.iteration},{fmt(se)},{fmt(rec.t_approx)}")
    Path(path).write_text("\n".join(lines) + "\n")
    return path


def write_outputs(spec, results):
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [emit_cdf(results, out / "cdf.csv")]
    if "proposed" in spec.schemes:
        for combiner in spec.combiners:
            subset = [r for r in results if r.scheme == "proposed" and r.combiner == combiner]
            paths.append(emit_convergence(subset, out / f"convergence_{combiner}.csv", spec.cfg.tau_p, spec.cfg.tau_c))
    return paths


def with_overrides(spec, **kw):
    cfg_fields = {k: v for k, v in kw.items() if k in NetworkConfig.__dataclass_fields__}
    rest = {k: v for k, v in kw.items() if k not in cfg_fields}
    return replace(spec, cfg=replace(spec.cfg, **cfg_fields), **rest)
