"""Treatment-effect estimators for the two-sample and single-sample designs.

Two complementary strategies estimate the average treatment effect on the
unobserved long-term outcome:

* the **surrogate index estimator** imputes each experimental unit's
  outcome with the fitted index ``h(s, x)`` and takes the normalized
  inverse-propensity contrast between arms;
* the **surrogate score estimator** reweights the observational outcomes,
  with weights built from the surrogate score ``r(s, x)``, the propensity
  ``e(x)``, and the sampling score ``t(s, x)``:
  ``w=1``:  ``r * t * (1-q) / (e * (1-t) * q)`` and
  ``w=0``:  ``(1-r) * t * (1-q) / ((1-e) * (1-t) * q)``.

Weights are always normalized to sum to one within each arm, which markedly
improves finite-sample behavior over unnormalized weighting.  A nearest
neighbor matching estimator and two single-sample baselines round out the
menu, plus a within-sample bootstrap for standard errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import ExperimentalSample, ObservationalSample, PooledDataset, SingleSample
from .errors import (
    DegenerateArmError,
    OverlapError,
    SurrogateError,
    UnstableBootstrapError,
    UnsupportedConfigurationError,
    ValidationError,
)
from .nuisance import LinearModel, NuisanceFits, fit_least_squares
from .parallel import ordered_map

DEFAULT_TRIM = 1e-6


@dataclass(frozen=True)
class ArmWeights:
    """Diagnostics for one arm's normalized weights."""

    n: int
    min: float
    max: float
    ess: float

    def to_dict(self) -> dict:
        return {"n": self.n, "min": self.min, "max": self.max, "ess": self.ess}


@dataclass(frozen=True)
class WeightSummary:
    """Per-arm weight diagnostics plus the applied score trim."""

    treated: ArmWeights
    control: ArmWeights
    trim_epsilon: float | None = None
    n_trimmed: int = 0

    def to_dict(self) -> dict:
        return {
            "treated": self.treated.to_dict(),
            "control": self.control.to_dict(),
            "trim_epsilon": self.trim_epsilon,
            "n_trimmed": self.n_trimmed,
        }


@dataclass(frozen=True)
class EstimateReport:
    """A point estimate with its method tag and weight diagnostics."""

    tau_hat: float
    method: str
    weight_summary: WeightSummary | None = None
    se_bootstrap: float | None = None
    n_used: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "tau_hat": self.tau_hat,
            "method": self.method,
            "se_bootstrap": self.se_bootstrap,
            "n_used": self.n_used,
            "weight_summary": self.weight_summary.to_dict() if self.weight_summary else None,
        }
        return json.dumps(payload, sort_keys=True)


@dataclass(frozen=True)
class TauSurrogates:
    """Estimated average treatment effect on each surrogate."""

    tau_s: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau_s", np.asarray(self.tau_s, dtype=float))


def _trim_scores(p: np.ndarray, eps: float | None):
    """Clamp scores to [eps, 1-eps]; returns the clipped array and the clip count."""
    if eps is None or eps == 0.0:
        return p, 0
    clipped = np.clip(p, eps, 1.0 - eps)
    return clipped, int(np.sum(clipped != p))


def _hajek(values: np.ndarray, weights: np.ndarray, arm: str):
    total = weights.sum()
    if not np.isfinite(total) or not np.isfinite(values @ weights if len(values) else 0.0):
        raise OverlapError(f"{arm} arm weights are not finite; a score reached its boundary")
    if total <= 0.0:
        raise DegenerateArmError(f"{arm} arm has zero total weight")
    normalized = weights / total
    mean = float(values @ normalized)
    positive = normalized[normalized > 0]
    summary = ArmWeights(
        n=int((weights > 0).sum()),
        min=float(positive.min()) if positive.size else 0.0,
        max=float(normalized.max()),
        ess=float(1.0 / np.sum(normalized**2)),
    )
    return mean, summary


def _check_open_unit_interval(p: np.ndarray, name: str) -> None:
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise OverlapError(f"fitted {name} left the open interval (0, 1); trimming is the usual remedy")


def estimate_index(
    exp: ExperimentalSample, fits: NuisanceFits, trim: float | None = DEFAULT_TRIM
) -> EstimateReport:
    """Surrogate index estimator: normalized IPW contrast of the fitted index.

    Treated units carry raw weight ``w / e(x)`` and controls
    ``(1 - w) / (1 - e(x))``; each arm's weights are normalized to sum to
    one before averaging the imputed index values.
    """
    e, n_trimmed = _trim_scores(fits.propensity(exp.x), trim)
    _check_open_unit_interval(e, "propensity score")
    h = fits.surrogate_index(exp.s, exp.x)
    treated_mean, treated = _hajek(h, exp.w / e, "treated")
    control_mean, control = _hajek(h, (1.0 - exp.w) / (1.0 - e), "control")
    return EstimateReport(
        tau_hat=treated_mean - control_mean,
        method="index",
        weight_summary=WeightSummary(treated, control, trim, n_trimmed),
        n_used={"treated": exp.n_treated, "control": exp.n_control},
    )


def estimate_tau_surrogates(
    exp: ExperimentalSample, fits: NuisanceFits, trim: float | None = DEFAULT_TRIM
) -> TauSurrogates:
    """Per-surrogate normalized IPW contrasts, one component per column of ``s``."""
    e, _ = _trim_scores(fits.propensity(exp.x), trim)
    _check_open_unit_interval(e, "propensity score")
    w1 = exp.w / e
    w0 = (1.0 - exp.w) / (1.0 - e)
    taus = np.empty(exp.n_surrogates)
    for j in range(exp.n_surrogates):
        t_mean, _ = _hajek(exp.s[:, j], w1, "treated")
        c_mean, _ = _hajek(exp.s[:, j], w0, "control")
        taus[j] = t_mean - c_mean
    return TauSurrogates(tau_s=taus)


def estimate_linear_shortcut(
    exp: ExperimentalSample, fits: NuisanceFits, trim: float | None = DEFAULT_TRIM
) -> EstimateReport:
    """Shortcut for a linear index: surrogate coefficients dotted with per-surrogate effects.

    Requires an index that is linear in ``(s, x)`` with no interaction
    terms.  Without covariates this reproduces the index estimator exactly;
    with covariates the two differ by the weighted covariate contrast,
    which the shortcut drops.
    """
    h = fits.h_model
    if not isinstance(h, LinearModel):
        raise UnsupportedConfigurationError("the linear shortcut needs a linear (least squares) index model")
    if h.uses_interactions:
        raise UnsupportedConfigurationError(
            "the linear shortcut needs an index that is linear in (s, x) without interactions"
        )
    taus = estimate_tau_surrogates(exp, fits, trim)
    e, n_trimmed = _trim_scores(fits.propensity(exp.x), trim)
    _, treated = _hajek(np.zeros(exp.n), exp.w / e, "treated")
    _, control = _hajek(np.zeros(exp.n), (1.0 - exp.w) / (1.0 - e), "control")
    return EstimateReport(
        tau_hat=float(h.coef_s @ taus.tau_s),
        method="linear_shortcut",
        weight_summary=WeightSummary(treated, control, trim, n_trimmed),
        n_used={"treated": exp.n_treated, "control": exp.n_control},
    )


def estimate_score(
    obs: ObservationalSample,
    fits: NuisanceFits,
    q: float,
    trim: float | None = DEFAULT_TRIM,
) -> EstimateReport:
    """Surrogate score estimator: normalized weighted contrast of observational outcomes."""
    if not 0.0 < q < 1.0:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    r_raw = fits.surrogate_score(obs.s, obs.x)
    e_raw = fits.propensity(obs.x)
    t_raw = fits.sampling_score(obs.s, obs.x)
    r, n_tr = _trim_scores(r_raw, trim)
    e, n_te = _trim_scores(e_raw, trim)
    t, n_tt = _trim_scores(t_raw, trim)
    if np.any(t >= 1.0 - 1e-12):
        raise OverlapError("sampling score reached 1 on an observational row; no weight is defined")
    _check_open_unit_interval(e, "propensity score")
    base = t * (1.0 - q) / ((1.0 - t) * q)
    w1 = r / e * base
    w0 = (1.0 - r) / (1.0 - e) * base
    treated_mean, treated = _hajek(obs.y, w1, "treated")
    control_mean, control = _hajek(obs.y, w0, "control")
    return EstimateReport(
        tau_hat=treated_mean - control_mean,
        method="score",
        weight_summary=WeightSummary(treated, control, trim, n_tr + n_te + n_tt),
        n_used={"treated": treated.n, "control": control.n},
    )


@dataclass(frozen=True)
class MatchOptions:
    """Options for the matching estimator.

    ``both_directions`` also builds matched contrasts for control units
    (nearest treated neighbor plays the role of the opposite-arm match)
    and averages over the whole experimental sample.
    """

    both_directions: bool = False


def _standardize_columns(reference: np.ndarray):
    mean = reference.mean(axis=0)
    sd = reference.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return mean, sd


def _nearest(queries: np.ndarray, pool_rows: np.ndarray) -> np.ndarray:
    """Index of the closest pool row for each query; ties go to the lowest index."""
    if queries.shape[1] == 0:
        return np.zeros(len(queries), dtype=int)
    d2 = ((queries[:, None, :] - pool_rows[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def estimate_matching(
    exp: ExperimentalSample,
    obs: ObservationalSample,
    options: MatchOptions | None = None,
) -> EstimateReport:
    """Nearest neighbor matching across the two samples.

    For each treated unit: find the nearest opposite-arm unit within the
    experimental sample by covariate distance, then give both units their
    nearest observational neighbor by (surrogate, covariate) distance; the
    difference of those two observational outcomes is the unit-level effect,
    and the estimate averages it over treated units.  Distances are
    Euclidean on per-column standardized values (statistics taken over the
    pool being matched into, together with the query sample); all matching
    is with replacement, and ties go to the lowest row index.  With no
    covariates the within-experimental match is degenerate: every
    opposite-arm unit ties at distance zero and the first one is used.
    """
    options = options or MatchOptions()
    if exp.n_surrogates != obs.n_surrogates or exp.n_covariates != obs.n_covariates:
        raise ValidationError("experimental and observational samples have mismatched dimensions")

    treated_idx = np.flatnonzero(exp.w == 1.0)
    control_idx = np.flatnonzero(exp.w == 0.0)
    if len(treated_idx) == 0 or len(control_idx) == 0 or obs.n == 0:
        raise DegenerateArmError("matching needs both experimental arms and a non-empty observational sample")

    x_mean, x_sd = _standardize_columns(exp.x)
    x_std = (exp.x - x_mean) / x_sd

    sx_exp = np.hstack([exp.s, exp.x])
    sx_obs = np.hstack([obs.s, obs.x])
    sx_mean, sx_sd = _standardize_columns(np.vstack([sx_exp, sx_obs]))
    sx_exp_std = (sx_exp - sx_mean) / sx_sd
    sx_obs_std = (sx_obs - sx_mean) / sx_sd

    obs_match = _nearest(sx_exp_std, sx_obs_std)  # i -> i' for every experimental unit

    def _contrasts(own_idx, opposite_idx):
        within = _nearest(x_std[own_idx], x_std[opposite_idx])
        partner = opposite_idx[within]
        return obs.y[obs_match[own_idx]] - obs.y[obs_match[partner]]

    effects = _contrasts(treated_idx, control_idx)
    if options.both_directions:
        effects = np.concatenate([effects, -_contrasts(control_idx, treated_idx)])
    return EstimateReport(
        tau_hat=float(effects.mean()),
        method="matching",
        weight_summary=None,
        n_used={"treated": len(treated_idx), "control": len(control_idx)},
    )


def estimate_single_sample(
    sample: SingleSample, mode: str = "difference_in_means", ridge: float = 0.0
) -> EstimateReport:
    """Single-sample baselines.

    ``difference_in_means`` contrasts raw arm means of the outcome.
    ``surrogate_index`` first regresses the outcome on ``(s, x)`` using all
    rows pooled across arms, then contrasts arm means of the fitted values;
    pooling is what the surrogacy condition buys, since the outcome-given-
    surrogates relationship does not depend on the arm.
    """
    treated = sample.w == 1.0
    if mode == "difference_in_means":
        values = sample.y
        method = "single_sample_dim"
    elif mode == "surrogate_index":
        features = np.hstack([sample.s, sample.x])
        model = fit_least_squares(features, sample.y, ridge=ridge, n_surrogates=sample.n_surrogates)
        values = model.predict(sample.s, sample.x)
        method = "single_sample_index"
    else:
        raise UnsupportedConfigurationError(f"unknown mode {mode!r}")
    t_mean, t_summary = _hajek(values[treated], np.ones(int(treated.sum())), "treated")
    c_mean, c_summary = _hajek(values[~treated], np.ones(int((~treated).sum())), "control")
    return EstimateReport(
        tau_hat=t_mean - c_mean,
        method=method,
        weight_summary=WeightSummary(t_summary, c_summary, None, 0),
        n_used={"treated": int(treated.sum()), "control": int((~treated).sum())},
    )


def _resample(sample, rng: np.random.Generator):
    """Draw a bootstrap copy of one sample, preserving its size.

    Experimental and observational samples are resampled as plain i.i.d.
    rows.  Single samples are resampled within each treatment arm so the
    arm sizes (and hence the validity of arm contrasts) are preserved.
    """
    if isinstance(sample, ExperimentalSample):
        idx = rng.integers(0, sample.n, sample.n)
        return ExperimentalSample(w=sample.w[idx], s=sample.s[idx], x=sample.x[idx])
    if isinstance(sample, ObservationalSample):
        idx = rng.integers(0, sample.n, sample.n)
        return ObservationalSample(y=sample.y[idx], s=sample.s[idx], x=sample.x[idx])
    if isinstance(sample, SingleSample):
        treated = np.flatnonzero(sample.w == 1.0)
        control = np.flatnonzero(sample.w == 0.0)
        idx = np.concatenate([
            treated[rng.integers(0, len(treated), len(treated))],
            control[rng.integers(0, len(control), len(control))],
        ])
        return SingleSample(w=sample.w[idx], y=sample.y[idx], s=sample.s[idx], x=sample.x[idx])
    if isinstance(sample, PooledDataset):
        return PooledDataset(_resample(sample.exp, rng), _resample(sample.obs, rng))
    raise UnsupportedConfigurationError(f"cannot resample object of type {type(sample).__name__}")


def bootstrap_se(
    estimator: Callable[..., float],
    data: Sequence,
    reps: int,
    seed: int,
    max_failure_rate: float = 0.2,
) -> float:
    """Bootstrap standard error with within-sample resampling.

    ``data`` is a sequence of samples resampled independently (sizes
    preserved); ``estimator(*resampled)`` must return a float.  Replicate
    ``k`` uses the seed stream ``(seed, k)``, so results are deterministic
    for any worker count.  Replicates whose estimator raises a package
    error are dropped; more than ``max_failure_rate`` of them aborts with
    :class:`UnstableBootstrapError`.
    """
    if reps < 2:
        raise ValidationError("bootstrap needs at least 2 replicates")
    data = tuple(data)

    def one(rep: int):
        rng = np.random.default_rng(np.random.SeedSequence((seed, rep)))
        try:
            resampled = [_resample(s, rng) for s in data]
            return float(estimator(*resampled))
        except SurrogateError:
            # a resample that cannot even be constructed (e.g. one arm lost)
            # counts as a failed replicate, same as an estimator failure
            return None

    results = ordered_map(one, range(reps))
    values = np.array([v for v in results if v is not None])
    failures = reps - len(values)
    if failures > max_failure_rate * reps:
        raise UnstableBootstrapError(
            f"{failures} of {reps} bootstrap replicates failed", failures=failures, reps=reps
        )
    if np.ptp(values) == 0.0:  # exactly constant: avoid mean round-off noise
        return 0.0
    return float(np.std(values, ddof=1))
