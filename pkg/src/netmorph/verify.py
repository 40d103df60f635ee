"""Equivalence checks: Monte Carlo mismatch measure, exact 1D comparison,
structural audits and the width/depth estimator.

Sampling uses the counter-based Philox generator.  Shard ``s`` of a run
with seed ``seed`` draws from ``Philox(key=seed + (s << 64))``; shard
results are merged in shard order, so a report depends only on
(seed, samples, shard count) and not on how many threads ran.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from netmorph.errors import InputError, UnsupportedNetworkError
from netmorph.netcore import evaluate, evaluate_with_bound, structure_metrics

N_SHARDS = 64
DEFAULT_SAMPLES = 1_000_000
DEFAULT_TOL = 1e-6
_BATCH = 1 << 16


def shard_generator(seed, shard):
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(shard) << 64)))


def _thread_count():
    raw = os.environ.get("NETMORPH_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise InputError("NETMORPH_THREADS must be an integer") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class MismatchReport:
    estimate: float
    stderr: float
    samples: int
    seed: int
    value_tolerance: float
    lo: tuple
    hi: tuple

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def absolute_measure(self):
        return self.estimate * self.volume

    @property
    def absolute_stderr(self):
        return self.stderr * self.volume

    def below(self, budget, sigmas=3.0):
        """True when measure < budget + sigmas * stderr (both absolute)."""
        return self.absolute_measure < budget + sigmas * self.absolute_stderr

    def to_document(self):
        doc = asdict(self)
        doc["lo"] = list(self.lo)
        doc["hi"] = list(self.hi)
        doc["tol"] = doc.pop("value_tolerance")
        doc["absolute_measure"] = self.absolute_measure
        return doc


def _box(domain, D):
    """Domain given as B (for [-B, B]^D) or as a (lo, hi) pair."""
    if np.isscalar(domain):
        if not domain > 0:
            raise InputError("B must be positive")
        lo, hi = -np.full(D, float(domain)), np.full(D, float(domain))
    else:
        lo, hi = (np.asarray(v, dtype=float).reshape(-1) for v in domain)
    if lo.size != D or hi.size != D or not np.all(lo < hi):
        raise InputError("domain must be a box with lo < hi in every coordinate")
    return lo, hi


def mc_fraction(predicate, D, domain, samples=DEFAULT_SAMPLES, seed=0, tol=0.0):
    """Fraction of uniform points in the box for which ``predicate`` holds."""
    samples = int(samples)
    if samples < 1:
        raise InputError("samples must be positive")
    lo, hi = _box(domain, D)
    counts = np.full(N_SHARDS, samples // N_SHARDS)
    counts[: samples % N_SHARDS] += 1

    def run(shard):
        gen = shard_generator(seed, shard)
        hits = 0
        left = int(counts[shard])
        while left > 0:
            n = min(left, _BATCH)
            pts = lo + (hi - lo) * gen.random((n, D))
            hits += int(np.count_nonzero(predicate(pts)))
            left -= n
        return hits

    workers = min(_thread_count(), N_SHARDS)
    if workers == 1:
        hits = [run(s) for s in range(N_SHARDS)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = list(pool.map(run, range(N_SHARDS)))
    p = sum(hits) / samples
    return MismatchReport(
        p,
        math.sqrt(p * (1 - p) / samples),
        samples,
        int(seed),
        float(tol),
        tuple(lo.tolist()),
        tuple(hi.tolist()),
    )


def mismatch_measure(a, b, domain, samples=DEFAULT_SAMPLES, seed=0, tol=DEFAULT_TOL,
                     labels=False, rounding_aware=False):
    """Estimated fraction of ``domain`` where ``a`` and ``b`` disagree.

    Regression: ``|a(x) - b(x)| > tol``.  With ``labels=True`` both outputs
    are thresholded at 0.5 and compared as labels.

    With ``rounding_aware=True`` the regression test becomes
    ``|a - b| > tol + e_a + e_b`` where ``e`` is the float64 rounding-error
    bound from :func:`evaluate_with_bound`.  Transformed networks with very
    large gate weights amplify roundoff far above 1e-6, so the strict test
    measures evaluation noise rather than disagreement of the exact maps.
    """
    if a.input_dim != b.input_dim:
        raise InputError("networks differ in input dimension")
    if samples < 1:
        raise InputError("samples must be positive")
    if labels:
        def differs(x):
            return (evaluate(a, x) >= 0.5) != (evaluate(b, x) >= 0.5)
    elif rounding_aware:
        def differs(x):
            va, ea = evaluate_with_bound(a, x)
            vb, eb = evaluate_with_bound(b, x)
            return np.abs(va - vb) > tol + ea + eb
    else:
        def differs(x):
            return np.abs(evaluate(a, x) - evaluate(b, x)) > tol
    return mc_fraction(differs, a.input_dim, domain, samples, seed, tol)


def fan_slack_measure(spec, net, domain, samples=DEFAULT_SAMPLES, seed=0):
    """Fraction of ``domain`` where the fan network differs from its limit.

    ``domain`` may be a sub-box that contains the slack region; the
    absolute measure is then still exact in expectation.
    """
    def differs(x):
        return evaluate(net, x) != spec.ideal(x)
    return mc_fraction(differs, spec.dim, domain, samples, seed)


def exact_compare_1d(a, b, B, grid_points=10_001):
    """max |a - b| on a uniform grid of [-B, B] plus both nets' breakpoints."""
    from netmorph.pwl1d import extract_pwl

    if a.input_dim != 1 or b.input_dim != 1:
        raise InputError("exact_compare_1d needs univariate networks")
    pts = [np.linspace(-B, B, int(grid_points))]
    for net in (a, b):
        try:
            pts.append(extract_pwl(net, B).breakpoints)
        except UnsupportedNetworkError:
            pass
    x = np.concatenate(pts)[:, None]
    return float(np.max(np.abs(evaluate(a, x) - evaluate(b, x))))


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    actual: dict
    expected: dict
    diffs: dict


def structural_audit(net, expected):
    """Compare width and depth (and any other non-None expected field)."""
    actual = asdict(structure_metrics(net))
    want = {k: v for k, v in asdict(expected).items() if v is not None}
    diffs = {k: actual[k] - v for k, v in want.items() if actual[k] != v}
    return AuditResult(not diffs, actual, want, diffs)


def width_depth_estimate(n_sigma, L, n, alpha=1.0):
    """Width = max(N, L n) and Depth = alpha log2 N + log2 n."""
    for name, v in (("n_sigma", n_sigma), ("L", L), ("n", n), ("alpha", alpha)):
        if not v > 0:
            raise InputError(f"{name} must be positive")
    return max(n_sigma, L * n), alpha * math.log2(n_sigma) + math.log2(n)
