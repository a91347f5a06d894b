"""Seeded empirical estimation of family-level growth and diffusion constants.

Each estimator draws (vertex, radius) samples on members of a generator
family, runs the engine or the potential solver, and reduces the samples to
a named constant: the volume-growth exponent, the flooding ratio, the
mean-value ratio of harmonic fields, the local-superposition ratio, and the
uniform overlap thresholds.  Reports are deterministic functions of
(family, sizes, samples, seed) down to the CSV bytes.

Sampling prefers vertices whose largest sink-free ball has radius at least
2.  Families where no such vertex exists (the line: every vertex touches
the sink) fall back to measuring ball room by the distance to the least
internally connected vertices, which plays the same role the sink boundary
plays elsewhere.  Threshold-based estimators need true interior balls and
refuse the fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    _search_threshold,
    flood_count,
    min_to_topple,
    min_to_topple_uniform,
    stabilize,
    uniform_config,
)
from .errors import PreconditionError
from .graph_core import gen_family
from .potentials import solve_potential

__all__ = [
    "SampleRow",
    "EstimateReport",
    "estimate_alpha",
    "estimate_hlc",
    "estimate_mv",
    "estimate_ls",
    "estimate_op",
    "CSV_HEADER",
]

CSV_HEADER = "family,n,seed,property,sample_id,v,r,R,value"

# rng stream tags so the properties draw independent, reproducible samples
_PROP_CODES = {"alpha": 1, "hlc": 2, "mv": 3, "ls": 4, "op": 5}


@dataclass(frozen=True)
class SampleRow:
    """One CSV detail row; ``outer`` fills the R column when the sample
    has an outer radius, and ``aux`` holds off-schema context (poles)."""

    family: str
    n: int
    sample_id: object
    v: object
    r: object
    outer: object
    value: object
    aux: dict = field(default_factory=dict, compare=False)


@dataclass
class EstimateReport:
    property_name: str
    family: str
    sizes: list[int]
    samples_per_size: int
    seed: int
    estimates: dict
    flags: dict
    witness: dict
    excluded: int
    rows: list[SampleRow]
    table: tuple = ()

    def summary_value(self, n: int):
        """Per-size aggregate written to the summary CSV row."""
        values = [row.value for row in self.rows if row.n == n]
        if not values:
            return ""
        if self.property_name == "mv":
            return min(values)
        return max(values)

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(
                ",".join(
                    [
                        row.family,
                        str(row.n),
                        str(self.seed),
                        self.property_name,
                        str(row.sample_id),
                        _fmt(row.v),
                        _fmt(row.r),
                        _fmt(row.outer),
                        _fmt(row.value),
                    ]
                )
            )
        for n in self.sizes:
            lines.append(
                ",".join(
                    [
                        self.family,
                        str(n),
                        str(self.seed),
                        self.property_name,
                        "summary",
                        "",
                        "",
                        "",
                        _fmt(self.summary_value(n)),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv())


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# sampling plumbing


def _sample_pool(g):
    """Eligible sample sites and their per-site radius caps.

    Returns (sites, caps, interior) where ``interior`` tells whether caps
    came from sink distance (true interior balls) or from the thin-family
    fallback.
    """
    eta = g.eta()
    sites = np.flatnonzero(eta >= 2)
    if len(sites):
        return sites, eta, True
    internal = g.degree - g.sink_mult
    ends = np.flatnonzero(internal == internal.min())
    caps = g.ordinary_distances(ends)
    sites = np.flatnonzero(caps >= 2)
    if len(sites) == 0:
        raise PreconditionError("family too thin")
    return sites, caps, False


def _rng_for(seed, prop, n):
    return np.random.default_rng([int(seed), _PROP_CODES[prop], int(n)])


def _draw_site_radius(rng, sites, caps):
    v = int(sites[rng.integers(len(sites))])
    r = int(rng.integers(1, caps[v] + 1))
    return v, r


def _report(prop, family, sizes, samples, seed, rows, estimates, flags,
            witness, excluded, table=()):
    return EstimateReport(
        property_name=prop,
        family=family,
        sizes=list(sizes),
        samples_per_size=int(samples),
        seed=int(seed),
        estimates=estimates,
        flags=flags,
        witness=witness,
        excluded=int(excluded),
        rows=rows,
        table=table,
    )


# ---------------------------------------------------------------------------
# estimators


def estimate_alpha(family, sizes, samples, seed) -> EstimateReport:
    """Fit the volume-growth exponent of ball volume against radius.

    Pools log(vol) on log(r) across sizes by least squares; the bracketing
    constants are the min and max of vol / r^alpha over the same samples.
    """
    _check_args(sizes, samples)
    rows = []
    points = []
    for n in sizes:
        g = gen_family(family, n)
        sites, caps, _ = _sample_pool(g)
        rng = _rng_for(seed, "alpha", n)
        for i in range(samples):
            v, r = _draw_site_radius(rng, sites, caps)
            vol = g.ball_volume(g.ordinary_ball(v, r))
            rows.append(SampleRow(family, n, i, v, r, None, int(vol)))
            if vol > 0:
                points.append((n, v, r, vol))
    radii = sorted(set(p[2] for p in points))
    if len(radii) < 2:
        raise PreconditionError("degenerate fit: need at least two radii")
    logs_r = np.log([p[2] for p in points])
    logs_v = np.log([p[3] for p in points])
    alpha, _ = np.polyfit(logs_r, logs_v, 1)
    alpha = float(alpha)
    ratios = [(vol / r**alpha, n, v, r) for n, v, r, vol in points]
    lo = min(ratios)
    up = max(ratios)
    witness = {"n": up[1], "v": up[2], "r": up[3], "extreme": "delta_up"}
    estimates = {
        "alpha": alpha,
        "delta_lo": float(lo[0]),
        "delta_up": float(up[0]),
    }
    return _report("alpha", family, sizes, samples, seed, rows, estimates,
                   {}, witness, 0)


def estimate_hlc(family, sizes, samples, seed, growth_factor=2.0) -> EstimateReport:
    """Worst ratio of single-site flood count to ball volume.

    A family with uniformly bounded ratio diffuses isotropically; the
    report flags the family when the per-size worst ratio climbs strictly
    with size and the climb exceeds ``growth_factor`` overall.
    """
    _check_args(sizes, samples)
    rows = []
    per_size_max = []
    worst = None
    for n in sizes:
        g = gen_family(family, n)
        sites, caps, _ = _sample_pool(g)
        rng = _rng_for(seed, "hlc", n)
        size_max = 0.0
        for i in range(samples):
            v, r = _draw_site_radius(rng, sites, caps)
            ball = g.ordinary_ball(v, r)
            vol = g.ball_volume(ball)
            ratio = flood_count(g, v, ball) / vol
            rows.append(SampleRow(family, n, i, v, r, None, float(ratio)))
            size_max = max(size_max, ratio)
            if worst is None or ratio > worst[0]:
                worst = (ratio, n, v, r)
        per_size_max.append(size_max)
    climbing = all(a < b for a, b in zip(per_size_max, per_size_max[1:]))
    no_uniform = (
        len(per_size_max) >= 2
        and climbing
        and per_size_max[-1] > growth_factor * per_size_max[0]
    )
    estimates = {"c_sigma": float(worst[0])}
    flags = {"no_uniform_c_sigma": bool(no_uniform)}
    witness = {"n": worst[1], "v": worst[2], "r": worst[3]}
    return _report("hlc", family, sizes, samples, seed, rows, estimates,
                   flags, witness, 0)


def estimate_mv(family, sizes, samples, seed) -> EstimateReport:
    """Smallest ball-averaged mass of a harmonic field relative to its center.

    For each sampled ball and a pole outside the ball and its neighborhood,
    the ratio is sum of the field over the ball divided by field-at-center
    times ball volume.  Samples whose ball leaves no room for a pole are
    excluded and counted.
    """
    _check_args(sizes, samples)
    rows = []
    excluded = 0
    worst = None
    radius1_err = 0.0
    for n in sizes:
        g = gen_family(family, n)
        sites, caps, _ = _sample_pool(g)
        rng = _rng_for(seed, "mv", n)
        for i in range(samples):
            v, r = _draw_site_radius(rng, sites, caps)
            ball = g.ordinary_ball(v, r)
            vol = g.ball_volume(ball)
            forbidden = set(int(b) for b in ball)
            for b in ball:
                forbidden.update(u for u, _ in g.ordinary_neighbors(int(b)))
            pool = [u for u in range(g.n_ordinary) if u not in forbidden]
            if not pool or vol == 0:
                excluded += 1
                continue
            w = pool[int(rng.integers(len(pool)))]
            pi = solve_potential(g, w).values
            ratio = float(pi[ball].sum() / (pi[v] * vol))
            rows.append(SampleRow(family, n, i, v, r, None, ratio,
                                  aux={"pole": int(w)}))
            if r == 1:
                ideal = (1 + int(g.degree[v])) / vol
                radius1_err = max(radius1_err, abs(ratio - ideal))
            if worst is None or ratio < worst[0]:
                worst = (ratio, n, v, r, int(w))
    if worst is None:
        raise PreconditionError("no admissible pole for any sampled ball")
    estimates = {"c_h": float(worst[0]), "radius1_worst_err": float(radius1_err)}
    witness = {"n": worst[1], "v": worst[2], "r": worst[3], "pole": worst[4]}
    return _report("mv", family, sizes, samples, seed, rows, estimates,
                   {}, witness, excluded)


def estimate_ls(family, sizes, samples, seed, mv_report=None) -> EstimateReport:
    """Uniform-ball thresholds against single-site thresholds.

    Samples (v, r, R, w) with w on the inner boundary of the outer ball,
    measures the single-site threshold H at v and the least uniform
    per-site count h on the inner ball that topples w, and reports the
    largest h * Vol / H.  Each sample is also checked against the
    mean-value bound h <= ((D + 1) / C_h) * H / Vol + 1, D the largest
    degree seen; violations make the report unusable and are counted.
    """
    _check_args(sizes, samples)
    if mv_report is None:
        mv_report = estimate_mv(family, sizes, samples, seed)
    c_h = mv_report.estimates["c_h"]
    rows = []
    excluded = 0
    worst = None
    violations = 0
    dmax = 0
    triples = []
    for n in sizes:
        g = gen_family(family, n)
        sites, caps, interior = _sample_pool(g)
        if not interior:
            raise PreconditionError("family too thin")
        dmax = max(dmax, int(g.degree.max()))
        rng = _rng_for(seed, "ls", n)
        for i in range(samples):
            v, r = _draw_site_radius(rng, sites, caps)
            outer = int(rng.integers(r, caps[v] + 1))
            boundary = _inner_boundary(g, g.ordinary_ball(v, outer))
            if not boundary:
                excluded += 1
                continue
            w = boundary[int(rng.integers(len(boundary)))]
            ball = g.ordinary_ball(v, r)
            vol = g.ball_volume(ball)
            big = min_to_topple(g, v, w)
            h = min_to_topple_uniform(g, ball, w).h_topple
            ratio = h * vol / big
            rows.append(SampleRow(family, n, i, v, r, outer, float(ratio),
                                  aux={"target": int(w), "H": big, "h": h}))
            triples.append((h, big, vol))
            if worst is None or ratio > worst[0]:
                worst = (ratio, n, v, r, outer, int(w))
    if worst is None:
        raise PreconditionError("no usable threshold samples")
    for h, big, vol in triples:
        if h > (dmax + 1) / c_h * big / vol + 1:
            violations += 1
    c_l = float(worst[0])
    theorem_cap = (dmax + 1) / c_h * 1.05 + 1
    estimates = {"c_l": c_l, "c_h_used": float(c_h)}
    flags = {
        "superposition_violations": violations,
        "c_l_within_theorem": bool(c_l <= theorem_cap),
    }
    witness = {"n": worst[1], "v": worst[2], "r": worst[3],
               "R": worst[4], "target": worst[5]}
    return _report("ls", family, sizes, samples, seed, rows, estimates,
                   flags, witness, excluded)


def estimate_op(family, sizes, samples, seed, alpha_report=None,
                hlc_report=None, mv_report=None) -> EstimateReport:
    """Uniform inner-ball count needed to topple a whole outer ball.

    Tabulates the threshold against the radius ratio R / r and checks each
    sample against the closed-form overlap bound built from the run's own
    estimated constants.
    """
    _check_args(sizes, samples)
    if alpha_report is None:
        alpha_report = estimate_alpha(family, sizes, samples, seed)
    if hlc_report is None:
        hlc_report = estimate_hlc(family, sizes, samples, seed)
    if mv_report is None:
        mv_report = estimate_mv(family, sizes, samples, seed)
    alpha = alpha_report.estimates["alpha"]
    delta_lo = alpha_report.estimates["delta_lo"]
    c_sigma = hlc_report.estimates["c_sigma"]
    c_h = mv_report.estimates["c_h"]
    rows = []
    excluded = 0
    worst = None
    violations = 0
    by_ratio: dict[float, int] = {}
    for n in sizes:
        g = gen_family(family, n)
        sites, caps, interior = _sample_pool(g)
        if not interior:
            raise PreconditionError("family too thin")
        dmax = int(g.degree.max())
        rng = _rng_for(seed, "op", n)
        for i in range(samples):
            v, r = _draw_site_radius(rng, sites, caps)
            outer = int(rng.integers(r, caps[v] + 1))
            sources = g.ordinary_ball(v, r)
            targets = g.ordinary_ball(v, outer)

            def all_topple(h):
                score = stabilize(g, uniform_config(g, sources, h)).score
                return all(score[int(t)] >= 1 for t in targets)

            fhat = _search_threshold(all_topple, dmax)
            ratio = outer / r
            rows.append(SampleRow(family, n, i, v, r, outer, int(fhat)))
            key = round(ratio, 9)
            by_ratio[key] = max(by_ratio.get(key, 0), fhat)
            bound = (c_sigma / c_h) * (dmax * (dmax + 1) / delta_lo) * ratio**alpha
            if fhat > bound:
                violations += 1
            if worst is None or fhat > worst[0]:
                worst = (fhat, n, v, r, outer)
    if worst is None:
        raise PreconditionError("no usable overlap samples")
    table = tuple(sorted(by_ratio.items()))
    estimates = {
        "fhat_max": int(worst[0]),
        "alpha_used": float(alpha),
        "c_sigma_used": float(c_sigma),
        "c_h_used": float(c_h),
        "delta_lo_used": float(delta_lo),
    }
    flags = {"formula_violations": violations}
    witness = {"n": worst[1], "v": worst[2], "r": worst[3], "R": worst[4]}
    return _report("op", family, sizes, samples, seed, rows, estimates,
                   flags, witness, excluded, table=table)


def _inner_boundary(g, ball):
    """Ball vertices with a neighbor (sink included) outside the ball."""
    inside = np.zeros(g.n_ordinary + 1, dtype=bool)
    inside[np.asarray(ball, dtype=np.int64)] = True
    out = []
    for b in ball:
        for u, _ in g.neighbors(int(b)):
            if not inside[u]:
                out.append(int(b))
                break
    return out


def _check_args(sizes, samples):
    if not sizes:
        raise PreconditionError("need at least one family size")
    if samples < 1:
        raise PreconditionError("need at least one sample per size")
