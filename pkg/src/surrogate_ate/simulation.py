"""Monte Carlo study harness for the two-sample estimators.

Four study designs stress the estimators on synthetic data.  All of them
draw surrogates as independent standard normals in both samples, assign
treatment with probability ``expit(a0 + alpha's)`` in the experimental
sample, and draw a binary outcome with probability ``expit(g0 + gamma's)``
in the observational sample, so surrogacy and comparability hold by
construction:

* ``dimension``: surrogate count M sweeps 1..200 with coefficients drawn
  once from N(0, 1/M) and shared between the two models.
* ``misspecification``: 250 surrogates with fixed coefficients
  ``(1/3) k^{-1/2}``; the analyst uses only the first K of them.
* ``sample_size``: M = 10 with the shared coefficient direction rescaled so
  the true effect is 0.5, sweeping the experimental fraction q at N = 1000.
* ``explanatory``: M = 10 with a shared draw z ~ N(0, 1/M); the treatment
  and outcome coefficient vectors are z scaled by 1 or 2 (variance 1/M or
  4/M), one design row per combination.

Each replication fits the surrogate score by ridge-stabilized logistic
regression of treatment on the analyst's surrogates and the surrogate index
by logistic regression of the binary outcome on the same surrogates, then
computes the normalized score-weighted and index-imputation estimates with
constant propensity and sampling scores.  A standing ridge of 1e-6 keeps
the replication fits defined under (quasi-)separation, which small
experimental samples and wide designs produce routinely; fits that still
fail are counted, never imputed.

Seed contract: coefficients for a study seeded ``s`` are drawn from the
stream ``(s, 1, tag)`` (tag = M for the dimension study, 0 otherwise), and
replication ``k`` of grid point ``i`` draws from ``(s, 2, i, k)``.  Studies
are therefore bit-reproducible for any worker count and any execution
order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from ._version import __version__ as _version
from .data import ExperimentalSample, ObservationalSample
from .errors import CalibrationError, ConfigurationError, StudyError, SurrogateError
from .estimators import estimate_index, estimate_score
from .nuisance import ConstantScore, NuisanceFits, NuisanceOptions, fit_logistic
from .parallel import ordered_map

HARNESS_RIDGE = 1e-6

STUDY_NAMES = ("dimension", "misspecification", "sample_size", "explanatory")

DEFAULT_GRIDS = {
    "dimension": (1, 10, 50, 100, 200),
    "misspecification": (1, 5, 25, 100, 250),
    "sample_size": (0.05, 0.25, 0.5, 0.75, 0.95),
    "explanatory": (1, 2, 3, 4),
}

_EXPLANATORY_MULTIPLIERS = {1: (1.0, 1.0), 2: (2.0, 1.0), 3: (1.0, 2.0), 4: (2.0, 2.0)}

_HERMITE_NODES = 128


@dataclass(frozen=True)
class DgpSpec:
    """A fully-specified data-generating process for one grid point."""

    study: str
    m_surrogates: int
    n_exp: int
    n_obs: int
    alpha: np.ndarray
    gamma: np.ndarray
    alpha0: float = 0.0
    gamma0: float = 0.0
    coef_rule: str = ""
    k_used: int | None = None
    seed: int = 0

    def __post_init__(self):
        # copy before freezing so the caller's arrays stay writeable
        alpha = np.array(self.alpha, dtype=float, copy=True).ravel()
        gamma = np.array(self.gamma, dtype=float, copy=True).ravel()
        if len(alpha) != self.m_surrogates or len(gamma) != self.m_surrogates:
            raise ConfigurationError("coefficient lengths must equal the number of surrogates")
        if self.k_used is not None and not 1 <= self.k_used <= self.m_surrogates:
            raise ConfigurationError("k_used must lie in [1, m_surrogates]")
        alpha.flags.writeable = False
        gamma.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", gamma)

    def to_dict(self) -> dict:
        return {
            "study": self.study,
            "m_surrogates": self.m_surrogates,
            "n_exp": self.n_exp,
            "n_obs": self.n_obs,
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "alpha0": self.alpha0,
            "gamma0": self.gamma0,
            "coef_rule": self.coef_rule,
            "k_used": self.k_used,
            "seed": self.seed,
        }


def _hermite():
    nodes, weights = np.polynomial.hermite_e.hermegauss(_HERMITE_NODES)
    return nodes, weights / np.sqrt(2.0 * np.pi)


_NODES, _WEIGHTS = _hermite()


def _tau_from_moments(e_r: float, e_h: float, e_rh: float) -> float:
    return e_rh / e_r - (e_h - e_rh) / (1.0 - e_r)


def true_tau(spec: DgpSpec) -> float:
    """True effect targeted by the estimators, by Gauss-Hermite quadrature.

    The estimand is ``E[h(S) | W=1] - E[h(S) | W=0]`` with
    ``h(s) = expit(g0 + gamma's)``.  Both scores depend on the surrogates
    only through the Gaussian pair ``(alpha'S, gamma'S)``, so the integral
    collapses to one dimension when the coefficient vectors are parallel
    and to two dimensions otherwise.
    """
    a, g = spec.alpha, spec.gamma
    na, ng = float(np.linalg.norm(a)), float(np.linalg.norm(g))
    if ng == 0.0:
        return 0.0  # constant index: identical arm means
    if na == 0.0:
        return 0.0  # constant score: arms are identical tilts
    cross = float(a @ g)
    if abs(abs(cross) - na * ng) <= 1e-12 * na * ng:
        u = na * _NODES
        r = expit(spec.alpha0 + u)
        h = expit(spec.gamma0 + (cross / na**2) * u)
        e_r = float(_WEIGHTS @ r)
        e_h = float(_WEIGHTS @ h)
        e_rh = float(_WEIGHTS @ (r * h))
        return _tau_from_moments(e_r, e_h, e_rh)
    cov = np.array([[na**2, cross], [cross, ng**2]])
    chol = np.linalg.cholesky(cov)
    z1 = _NODES[:, None]
    z2 = _NODES[None, :]
    u = chol[0, 0] * z1 + 0.0 * z2
    v = chol[1, 0] * z1 + chol[1, 1] * z2
    wgrid = _WEIGHTS[:, None] * _WEIGHTS[None, :]
    r = expit(spec.alpha0 + u)
    h = expit(spec.gamma0 + v)
    e_r = float(np.sum(wgrid * r))
    e_h = float(np.sum(wgrid * h))
    e_rh = float(np.sum(wgrid * r * h))
    return _tau_from_moments(e_r, e_h, e_rh)


def true_tau_mc(spec: DgpSpec, n_draws: int = 1_000_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo version of :func:`true_tau`; returns (estimate, standard error).

    Simulates the actual assignment mechanism, so it is an independent
    check on the quadrature path.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    chunk = 250_000
    n1 = n0 = 0
    sum1 = sum0 = sumsq1 = sumsq0 = 0.0
    remaining = n_draws
    while remaining > 0:
        size = min(chunk, remaining)
        remaining -= size
        s = rng.standard_normal((size, spec.m_surrogates))
        w = rng.random(size) < expit(spec.alpha0 + s @ spec.alpha)
        h = expit(spec.gamma0 + s @ spec.gamma)
        h1, h0 = h[w], h[~w]
        n1 += len(h1)
        n0 += len(h0)
        sum1 += float(h1.sum())
        sum0 += float(h0.sum())
        sumsq1 += float((h1**2).sum())
        sumsq0 += float((h0**2).sum())
    m1, m0 = sum1 / n1, sum0 / n0
    v1 = sumsq1 / n1 - m1**2
    v0 = sumsq0 / n0 - m0**2
    return m1 - m0, float(np.sqrt(v1 / n1 + v0 / n0))


def calibrate_tau(
    target: float,
    direction: np.ndarray,
    tolerance: float = 1e-3,
) -> tuple[float, tuple[float, float]]:
    """Scale a shared coefficient direction so the true effect hits ``target``.

    Bisection on the common scale ``c`` with ``alpha = gamma = c * direction``
    and intercepts fixed at zero; the effect is zero at ``c = 0`` and
    increases toward its supremum as ``c`` grows.  Raises
    :class:`CalibrationError` when the target is out of reach, reporting the
    achieved supremum.
    """
    if not abs(target) < 1.0:
        raise CalibrationError(f"targets must satisfy |target| < 1 for binary outcomes, got {target}")
    direction = np.asarray(direction, dtype=float).ravel()
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise CalibrationError("direction must be a non-zero vector")
    unit = direction / norm
    if target == 0.0:
        return 0.0, (0.0, 0.0)

    def tau_of(scale: float) -> float:
        spec = DgpSpec(
            study="calibration", m_surrogates=len(unit), n_exp=1, n_obs=1,
            alpha=scale * unit, gamma=scale * unit,
        )
        return true_tau(spec)

    sign = 1.0 if target > 0 else -1.0
    goal = abs(target)
    hi = 1.0
    while tau_of(hi) < goal:
        hi *= 2.0
        if hi > 2.0**20:
            raise CalibrationError(
                f"target {target} unattainable; achieved supremum ~ {tau_of(2.0**20):.6f}"
            )
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = tau_of(mid)
        if abs(value - goal) < tolerance:
            return sign * mid, (0.0, 0.0)
        if value < goal:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(f"bisection failed to reach target {target} within tolerance {tolerance}")


def make_spec(
    study: str,
    seed: int,
    m: int | None = None,
    k_used: int | None = None,
    q: float | None = None,
    design_row: int | None = None,
    n_total: int = 1000,
    target_tau: float = 0.5,
) -> DgpSpec:
    """Build the generating process for one grid point of a named study."""
    if study == "dimension":
        if m is None or not 1 <= m <= 200:
            raise ConfigurationError("dimension study needs m in [1, 200]")
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, m)))
        alpha = rng.normal(0.0, np.sqrt(1.0 / m), m)
        return DgpSpec(
            study=study, m_surrogates=m, n_exp=500, n_obs=500,
            alpha=alpha, gamma=alpha.copy(),
            coef_rule="alpha ~ N(0, 1/M) drawn once; gamma = alpha", seed=seed,
        )
    if study == "misspecification":
        m = 250
        if k_used is None or not 1 <= k_used <= m:
            raise ConfigurationError("misspecification study needs k_used in [1, 250]")
        k = np.arange(1, m + 1, dtype=float)
        alpha = (1.0 / 3.0) * k**-0.5
        return DgpSpec(
            study=study, m_surrogates=m, n_exp=500, n_obs=500,
            alpha=alpha, gamma=alpha.copy(), k_used=k_used,
            coef_rule="alpha_k = gamma_k = (1/3) k^(-1/2); analyst uses first K columns",
            seed=seed,
        )
    if study == "sample_size":
        if q is None or not 0.0 < q < 1.0:
            raise ConfigurationError("sample_size study needs q in (0, 1)")
        n_exp = round(q * n_total)
        n_obs = n_total - n_exp
        if n_exp < 2 or n_obs < 2:
            raise ConfigurationError(f"q={q} leaves a sample with fewer than 2 rows")
        m = 10
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, 0)))
        direction = rng.normal(0.0, np.sqrt(1.0 / m), m)
        scale, (a0, g0) = calibrate_tau(target_tau, direction)
        unit = direction / np.linalg.norm(direction)
        alpha = scale * unit
        return DgpSpec(
            study=study, m_surrogates=m, n_exp=n_exp, n_obs=n_obs,
            alpha=alpha, gamma=alpha.copy(), alpha0=a0, gamma0=g0,
            coef_rule=f"shared direction drawn once, rescaled so the true effect is {target_tau}",
            seed=seed,
        )
    if study == "explanatory":
        if design_row not in _EXPLANATORY_MULTIPLIERS:
            raise ConfigurationError("explanatory study needs design_row in {1, 2, 3, 4}")
        m = 10
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1, 0)))
        z = rng.normal(0.0, np.sqrt(1.0 / m), m)
        am, gm = _EXPLANATORY_MULTIPLIERS[design_row]
        return DgpSpec(
            study=study, m_surrogates=m, n_exp=500, n_obs=500,
            alpha=am * z, gamma=gm * z,
            coef_rule=(
                f"shared z ~ N(0, 1/M); alpha = {am} z (var {am**2}/M), gamma = {gm} z (var {gm**2}/M)"
            ),
            seed=seed,
        )
    raise ConfigurationError(f"unknown study {study!r}; expected one of {STUDY_NAMES}")


def draw_dataset(spec: DgpSpec, rep_seed) -> tuple[ExperimentalSample, ObservationalSample]:
    """Draw one replication's dataset; deterministic in ``(spec, rep_seed)``.

    The generator stream is consumed in a fixed order: experimental
    surrogates, treatments, observational surrogates, outcomes.
    """
    rng = np.random.default_rng(rep_seed)
    s_exp = rng.standard_normal((spec.n_exp, spec.m_surrogates))
    w = (rng.random(spec.n_exp) < expit(spec.alpha0 + s_exp @ spec.alpha)).astype(float)
    s_obs = rng.standard_normal((spec.n_obs, spec.m_surrogates))
    y = (rng.random(spec.n_obs) < expit(spec.gamma0 + s_obs @ spec.gamma)).astype(float)
    return ExperimentalSample(w=w, s=s_exp), ObservationalSample(y=y, s=s_obs)


@dataclass(frozen=True)
class EstimatorStats:
    """Monte Carlo summary for one estimator."""

    abs_bias: float
    sd: float
    reps: int
    true_tau: float
    mean_estimate: float
    failures: int

    def to_dict(self) -> dict:
        return {
            "abs_bias": self.abs_bias,
            "sd": self.sd,
            "reps": self.reps,
            "true_tau": self.true_tau,
            "mean_estimate": self.mean_estimate,
            "failures": self.failures,
        }


@dataclass(frozen=True)
class McResult:
    """Per-estimator Monte Carlo summaries for one grid point."""

    score: EstimatorStats
    index: EstimatorStats
    scaled_by_100: bool = False

    def to_dict(self) -> dict:
        return {
            "score": self.score.to_dict(),
            "index": self.index.to_dict(),
            "scaled_by_100": self.scaled_by_100,
        }


def _replicate(spec: DgpSpec, rep_seed) -> tuple[float | None, float | None]:
    """One replication: returns (score estimate, index estimate), None on failure."""
    try:
        exp, obs = draw_dataset(spec, rep_seed)
    except SurrogateError:
        return None, None
    k = spec.k_used
    if k is not None and k < spec.m_surrogates:
        exp = ExperimentalSample(w=exp.w, s=exp.s[:, :k])
        obs = ObservationalSample(y=obs.y, s=obs.s[:, :k])
    q = spec.n_exp / (spec.n_exp + spec.n_obs)
    options = NuisanceOptions(
        ridge_surrogate_score=HARNESS_RIDGE, ridge_index=HARNESS_RIDGE,
        constant_sampling_score=True,
    )
    e_model = ConstantScore(float(exp.w.mean()))
    t_model = ConstantScore(q)

    tau_o: float | None = None
    tau_e: float | None = None
    try:
        r_model = fit_logistic(exp.s, exp.w, ridge=HARNESS_RIDGE)
        fits = NuisanceFits(e_model=e_model, r_model=r_model, t_model=t_model, h_model=None, options=options)
        tau_o = estimate_score(obs, fits, q).tau_hat
    except SurrogateError:
        tau_o = None
    try:
        # the outcomes are binary, so the index is itself a logistic mean
        h_model = fit_logistic(obs.s, obs.y, ridge=HARNESS_RIDGE)
        fits = NuisanceFits(e_model=e_model, r_model=None, t_model=t_model, h_model=h_model, options=options)
        tau_e = estimate_index(exp, fits).tau_hat
    except SurrogateError:
        tau_e = None
    return tau_o, tau_e


def _stats(values: list[float | None], reps: int, tt: float) -> EstimatorStats:
    ok = np.array([v for v in values if v is not None], dtype=float)
    failures = reps - len(ok)
    if len(ok) == 0:
        raise StudyError("every replication failed")
    return EstimatorStats(
        abs_bias=float(abs(ok.mean() - tt)),
        sd=float(ok.std(ddof=1)) if len(ok) > 1 else 0.0,
        reps=reps,
        true_tau=tt,
        mean_estimate=float(ok.mean()),
        failures=failures,
    )


def run_monte_carlo(spec: DgpSpec, reps: int, seed: int, grid_index: int = 0) -> McResult:
    """Run ``reps`` replications of one grid point.

    Replication ``k`` uses the seed stream ``(seed, 2, grid_index, k)``;
    results are aggregated in replication order, so the outcome is
    independent of worker count and execution order.
    """
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    tt = true_tau(spec)

    def one(rep: int):
        return _replicate(spec, np.random.SeedSequence((seed, 2, grid_index, rep)))

    outcomes = ordered_map(one, range(reps))
    return McResult(
        score=_stats([o[0] for o in outcomes], reps, tt),
        index=_stats([o[1] for o in outcomes], reps, tt),
    )


def run_study(
    study: str,
    reps: int,
    seed: int,
    out_path=None,
    grid=None,
) -> list[dict]:
    """Run a full study over its grid and optionally write CSV plus manifest.

    The CSV carries one row per (grid point, estimator) with bias and
    standard deviation multiplied by 100 for readability; the manifest
    records every generating process, the seed contract, and the package
    version.
    """
    if study not in STUDY_NAMES:
        raise ConfigurationError(f"unknown study {study!r}; expected one of {STUDY_NAMES}")
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    grid = tuple(grid) if grid is not None else DEFAULT_GRIDS[study]

    rows: list[dict] = []
    specs: list[DgpSpec] = []
    for i, value in enumerate(grid):
        if study == "dimension":
            spec = make_spec(study, seed=seed, m=int(value))
        elif study == "misspecification":
            spec = make_spec(study, seed=seed, k_used=int(value))
        elif study == "sample_size":
            spec = make_spec(study, seed=seed, q=float(value))
        else:
            spec = make_spec(study, seed=seed, design_row=int(value))
        specs.append(spec)
        result = run_monte_carlo(spec, reps=reps, seed=seed, grid_index=i)
        for name, stats in (("score", result.score), ("index", result.index)):
            rows.append(
                {
                    "grid_value": value,
                    "estimator": name,
                    "abs_bias_x100": stats.abs_bias * 100.0,
                    "sd_x100": stats.sd * 100.0,
                    "reps": stats.reps,
                    "failures": stats.failures,
                    "true_tau": stats.true_tau,
                }
            )

    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["grid_value", "estimator", "abs_bias_x100", "sd_x100", "reps", "failures", "true_tau"])
            for row in rows:
                writer.writerow(
                    [
                        repr(row["grid_value"]) if isinstance(row["grid_value"], float) else row["grid_value"],
                        row["estimator"],
                        repr(row["abs_bias_x100"]),
                        repr(row["sd_x100"]),
                        row["reps"],
                        row["failures"],
                        repr(row["true_tau"]),
                    ]
                )
        manifest = {
            "study": study,
            "grid": list(grid),
            "reps": reps,
            "seed": seed,
            "seed_contract": "coefficients: (seed, 1, tag); replication k of grid point i: (seed, 2, i, k)",
            "harness_ridge": HARNESS_RIDGE,
            "specs": [s.to_dict() for s in specs],
            "version": _version,
        }
        manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return rows
