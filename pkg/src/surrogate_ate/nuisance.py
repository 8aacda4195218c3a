"""Nuisance-function fitting: least squares and logistic maximum likelihood.

Four conditional expectations drive every estimator in this package:

* the propensity score ``e(x)``, the probability of treatment given
  covariates, fit on the experimental sample;
* the surrogate score ``r(s, x)``, the probability of having received the
  treatment given surrogates and covariates, fit on the experimental sample;
* the sampling score ``t(s, x)``, the probability of belonging to the
  experimental sample, fit on the pooled sample;
* the surrogate index ``h(s, x)``, the expected outcome given surrogates
  and covariates, fit on the observational sample.

Linear models are solved by ridge-regularized normal equations and logistic
models by iteratively reweighted least squares (IRLS) with step-halving.
Design columns are centered and scaled internally for conditioning; the
ridge penalty applies to the coefficients on the original scale and the
intercept is never penalized.  Fitting is deterministic: identical inputs
produce bit-identical models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.special import expit

from .data import PooledDataset
from .errors import (
    DegenerateLabelsError,
    SeparationError,
    SingularDesignError,
    ValidationError,
)

# expit saturates to exactly 0.0 / 1.0 beyond |eta| ~ 37; clipping the linear
# predictor keeps every predicted probability strictly inside (0, 1).
_ETA_MAX = 36.0

_GRAD_TOL = 1e-8
_MAX_ITER = 100
_SEPARATION_NORM = 30.0


def _interaction_columns(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """All pairwise surrogate-by-covariate products, surrogate-major order."""
    n = s.shape[0]
    if s.shape[1] == 0 or x.shape[1] == 0:
        return np.empty((n, 0))
    return (s[:, :, None] * x[:, None, :]).reshape(n, -1)


def build_design(s: np.ndarray, x: np.ndarray, interactions: bool = False):
    """Assemble ``[s | x | s*x]`` and return the block widths.

    Returns
    -------
    (features, n_s, n_x, n_sx)
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    blocks = [s, x]
    n_sx = 0
    if interactions:
        sx = _interaction_columns(s, x)
        blocks.append(sx)
        n_sx = sx.shape[1]
    return np.hstack(blocks), s.shape[1], x.shape[1], n_sx


@dataclass(frozen=True)
class LinearModel:
    """Linear surrogate index ``h(s, x) = intercept + coef_s's + coef_x'x [+ coef_sx'(s*x)]``.

    ``residual_variance`` is the mean squared training residual, used as the
    homoskedastic plug-in for conditional outcome variance.
    """

    intercept: float
    coef_s: np.ndarray
    coef_x: np.ndarray
    coef_sx: np.ndarray = field(default_factory=lambda: np.empty(0))
    residual_variance: float = 0.0

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.coef_s, self.coef_x, self.coef_sx])

    @property
    def uses_interactions(self) -> bool:
        return self.coef_sx.size > 0

    def predict(self, s, x=None) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float)) if x is not None else np.empty((s.shape[0], 0))
        features, n_s, n_x, _ = build_design(s, x, self.uses_interactions)
        if n_s != len(self.coef_s) or n_x != len(self.coef_x):
            raise ValueError(
                f"feature dimensions (s={n_s}, x={n_x}) do not match model "
                f"(s={len(self.coef_s)}, x={len(self.coef_x)})"
            )
        return self.intercept + features @ self.coef

    def to_dict(self) -> dict:
        return {
            "type": "linear",
            "intercept": self.intercept,
            "coef_s": self.coef_s.tolist(),
            "coef_x": self.coef_x.tolist(),
            "coef_sx": self.coef_sx.tolist(),
            "residual_variance": self.residual_variance,
        }


@dataclass(frozen=True)
class LogisticModel:
    """Logistic score ``p(s, x) = expit(intercept + coef_s's + coef_x'x [+ coef_sx'(s*x)])``.

    Predictions are strictly inside (0, 1) for all finite inputs.
    """

    intercept: float
    coef_s: np.ndarray
    coef_x: np.ndarray
    coef_sx: np.ndarray = field(default_factory=lambda: np.empty(0))
    converged: bool = True
    iterations: int = 0

    @property
    def coef(self) -> np.ndarray:
        return np.concatenate([self.coef_s, self.coef_x, self.coef_sx])

    @property
    def uses_interactions(self) -> bool:
        return self.coef_sx.size > 0

    def predict(self, s, x=None) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        x = np.atleast_2d(np.asarray(x, dtype=float)) if x is not None else np.empty((s.shape[0], 0))
        features, n_s, n_x, _ = build_design(s, x, self.uses_interactions)
        if n_s != len(self.coef_s) or n_x != len(self.coef_x):
            raise ValueError(
                f"feature dimensions (s={n_s}, x={n_x}) do not match model "
                f"(s={len(self.coef_s)}, x={len(self.coef_x)})"
            )
        eta = self.intercept + features @ self.coef
        return expit(np.clip(eta, -_ETA_MAX, _ETA_MAX))

    def to_dict(self) -> dict:
        return {
            "type": "logistic",
            "intercept": self.intercept,
            "coef_s": self.coef_s.tolist(),
            "coef_x": self.coef_x.tolist(),
            "coef_sx": self.coef_sx.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class ConstantScore:
    """A score that is the same known probability for every unit."""

    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValidationError(f"constant score must lie in (0, 1), got {self.p}")

    def predict(self, s, x=None) -> np.ndarray:
        s = np.atleast_2d(np.asarray(s, dtype=float))
        return np.full(s.shape[0], self.p)

    def to_dict(self) -> dict:
        return {"type": "constant", "p": self.p}


ScoreModel = Union[LogisticModel, ConstantScore]
IndexModel = Union[LinearModel, LogisticModel]


def _standardize(features: np.ndarray):
    mean = features.mean(axis=0) if features.size else np.zeros(features.shape[1])
    sd = features.std(axis=0) if features.size else np.ones(features.shape[1])
    sd = np.where(sd == 0.0, 1.0, sd)
    return (features - mean) / sd, mean, sd


def _check_rank(z: np.ndarray, n_rows: int) -> None:
    """Rank check for an intercept-augmented standardized design (ridge = 0 path)."""
    d = z.shape[1]
    if n_rows < d + 1:
        raise SingularDesignError(
            f"{n_rows} rows cannot identify {d + 1} coefficients; add rows or use a positive ridge"
        )
    if d == 0:
        return
    sv = np.linalg.svd(np.hstack([np.ones((n_rows, 1)), z]), compute_uv=False)
    if sv[-1] <= sv[0] * 1e-10:
        raise SingularDesignError(
            "design matrix is rank deficient; a positive ridge penalty makes the fit well defined"
        )


def _split(coefs: np.ndarray, n_s: int, n_x: int):
    return coefs[:n_s], coefs[n_s : n_s + n_x], coefs[n_s + n_x :]


def fit_least_squares(
    features: np.ndarray,
    targets: np.ndarray,
    ridge: float = 0.0,
    n_surrogates: int | None = None,
    n_interactions: int = 0,
) -> LinearModel:
    """Least squares with an unpenalized intercept and optional ridge penalty.

    Minimizes ``sum((y - intercept - features @ b)^2) + ridge * ||b||^2``.
    ``n_surrogates`` gives the number of leading feature columns that are
    surrogates (defaults to all of them); remaining columns are covariates,
    with the final ``n_interactions`` columns treated as interaction terms.

    Raises
    ------
    SingularDesignError
        If ``ridge == 0`` and the design is rank deficient.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if features.shape[0] != len(y):
        raise ValidationError("features and targets have different row counts")
    if not (np.isfinite(features).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite values in the training data")
    if ridge < 0:
        raise ValidationError("ridge penalty must be non-negative")
    n, d = features.shape
    if n == 0:
        raise ValidationError("cannot fit on an empty sample")

    z, mean, sd = _standardize(features)
    if ridge == 0.0:
        _check_rank(z, n)

    y_bar = y.mean()
    yc = y - y_bar
    if d > 0:
        gram = z.T @ z
        # ridge * S^-2 in standardized space == ridge * I on the original scale
        gram[np.diag_indices(d)] += ridge / sd**2
        b_std = np.linalg.solve(gram, z.T @ yc)
        b = b_std / sd
    else:
        b = np.empty(0)
    intercept = float(y_bar - mean @ b)
    resid = y - intercept - features @ b
    n_s = d if n_surrogates is None else n_surrogates
    coef_s, coef_x, coef_sx = _split(b, n_s, d - n_s - n_interactions)
    return LinearModel(
        intercept=intercept,
        coef_s=coef_s,
        coef_x=coef_x,
        coef_sx=coef_sx,
        residual_variance=float(np.mean(resid**2)),
    )


def bernoulli_loglik(intercept: float, coef: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
    """Log-likelihood of a logistic model, stable for large linear predictors."""
    eta = intercept + features @ np.asarray(coef, dtype=float)
    return float(np.sum(labels * eta - np.logaddexp(0.0, eta)))


def bernoulli_loglik_gradient(
    intercept: float, coef: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Gradient of :func:`bernoulli_loglik` in ``(intercept, coef)``."""
    eta = intercept + features @ np.asarray(coef, dtype=float)
    resid = labels - expit(eta)
    return np.concatenate([[resid.sum()], features.T @ resid])


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    ridge: float = 0.0,
    n_surrogates: int | None = None,
    n_interactions: int = 0,
    tol: float = _GRAD_TOL,
    max_iter: int = _MAX_ITER,
) -> LogisticModel:
    """Penalized Bernoulli maximum likelihood by IRLS with step-halving.

    The fit maximizes ``loglik - (ridge / 2) * ||b||^2`` (intercept
    unpenalized, penalty on original-scale coefficients) and stops when the
    max-norm of the penalized score falls below ``tol`` or after
    ``max_iter`` Newton steps, whichever comes first; the ``converged``
    flag records which.

    Raises
    ------
    DegenerateLabelsError
        If the labels contain a single class.
    SeparationError
        If ``ridge == 0`` and the coefficient norm diverges, the signature
        of complete separation; a positive ridge makes the optimum finite.
    SingularDesignError
        If ``ridge == 0`` and the design is rank deficient.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    if features.shape[0] != len(y):
        raise ValidationError("features and labels have different row counts")
    if not (np.isfinite(features).all() and np.isfinite(y).all()):
        raise ValidationError("non-finite values in the training data")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("labels must be 0 or 1")
    if ridge < 0:
        raise ValidationError("ridge penalty must be non-negative")
    if y.sum() == 0 or y.sum() == len(y):
        raise DegenerateLabelsError("labels contain a single class; no model can be fit")

    n, d = features.shape
    z, mean, sd = _standardize(features)
    if ridge == 0.0:
        _check_rank(z, n)
    z1 = np.hstack([np.ones((n, 1)), z])
    penalty = np.concatenate([[0.0], ridge / sd**2])

    def objective(beta):
        eta = z1 @ beta
        loglik = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        return loglik - 0.5 * float(penalty @ beta**2)

    beta = np.zeros(d + 1)
    obj = objective(beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = z1 @ beta
        p = expit(np.clip(eta, -_ETA_MAX, _ETA_MAX))
        grad = z1.T @ (y - p) - penalty * beta
        if np.max(np.abs(grad)) < tol:
            converged = True
            iterations -= 1
            break
        weights = p * (1.0 - p)
        hess = (z1 * weights[:, None]).T @ z1
        hess[np.diag_indices(d + 1)] += penalty
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            if ridge == 0.0:
                raise SeparationError(
                    "logistic likelihood is flat at the boundary; data may be separated, "
                    "consider a positive ridge penalty"
                ) from None
            raise
        scale = 1.0
        candidate = beta + step
        cand_obj = objective(candidate)
        halvings = 0
        # accept float-noise ties; only genuine decreases trigger halving
        floor = obj - 1e-12 * (1.0 + abs(obj))
        while cand_obj < floor and halvings < 30:
            scale *= 0.5
            candidate = beta + scale * step
            cand_obj = objective(candidate)
            halvings += 1
        beta, obj = candidate, cand_obj
        if ridge == 0.0 and np.linalg.norm(beta[1:]) > _SEPARATION_NORM:
            raise SeparationError(
                "coefficient norm diverged: data are (quasi-)separated and the "
                "unpenalized MLE does not exist; use a positive ridge penalty"
            )

    # a perfect fit (log-likelihood at its supremum of 0) is only possible
    # under complete separation, even if the gradient plateaued before the
    # coefficient norm tripped the divergence threshold
    if ridge == 0.0 and d > 0 and objective(beta) > -1e-6:
        raise SeparationError(
            "data are perfectly separated and the unpenalized MLE does not exist; "
            "use a positive ridge penalty"
        )

    b = beta[1:] / sd
    intercept = float(beta[0] - np.sum(beta[1:] * mean / sd))
    n_s = d if n_surrogates is None else n_surrogates
    coef_s, coef_x, coef_sx = _split(b, n_s, d - n_s - n_interactions)
    return LogisticModel(
        intercept=intercept,
        coef_s=coef_s,
        coef_x=coef_x,
        coef_sx=coef_sx,
        converged=converged,
        iterations=iterations,
    )


def predict_score(model: ScoreModel, row) -> float:
    """Evaluate a fitted score on one feature row; strictly inside (0, 1)."""
    row = np.asarray(row, dtype=float).ravel()
    if isinstance(model, ConstantScore):
        return model.p
    n_s = len(model.coef_s)
    n_x = len(model.coef_x)
    if len(row) != n_s + n_x:
        raise ValueError(f"expected a row of length {n_s + n_x}, got {len(row)}")
    return float(model.predict(row[:n_s].reshape(1, -1), row[n_s:].reshape(1, -1))[0])


def predict_index(model: LinearModel, row) -> float:
    """Evaluate a fitted surrogate index on one feature row."""
    row = np.asarray(row, dtype=float).ravel()
    n_s = len(model.coef_s)
    n_x = len(model.coef_x)
    if len(row) != n_s + n_x:
        raise ValueError(f"expected a row of length {n_s + n_x}, got {len(row)}")
    return float(model.predict(row[:n_s].reshape(1, -1), row[n_s:].reshape(1, -1))[0])


@dataclass(frozen=True)
class NuisanceOptions:
    """Fitting configuration for :func:`fit_all`.

    ``constant_propensity`` fixes ``e(x)`` to a known randomization
    probability instead of fitting it.  ``constant_sampling_score`` fixes
    ``t(s, x)`` to the realized experimental fraction ``q``, the right
    choice when pooled membership carries no information beyond sample
    sizes.  ``interactions`` augments the ``(s, x)`` designs with all
    pairwise surrogate-by-covariate products.
    """

    ridge_propensity: float = 0.0
    ridge_surrogate_score: float = 0.0
    ridge_sampling_score: float = 0.0
    ridge_index: float = 0.0
    constant_propensity: float | None = None
    constant_sampling_score: bool = False
    interactions: bool = False


@dataclass(frozen=True)
class NuisanceFits:
    """The four fitted nuisance functions plus the options that produced them.

    :func:`fit_all` always populates all four models; callers assembling a
    fits object by hand may leave slots they do not use as ``None``, and the
    corresponding accessor will refuse to predict.
    """

    e_model: ScoreModel | None
    r_model: ScoreModel | None
    t_model: ScoreModel | None
    h_model: IndexModel | None
    options: NuisanceOptions = field(default_factory=NuisanceOptions)

    def _require(self, name: str):
        model = getattr(self, name)
        if model is None:
            raise ValidationError(f"no {name} was fitted")
        return model

    def propensity(self, x: np.ndarray) -> np.ndarray:
        model = self._require("e_model")
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if isinstance(model, ConstantScore):
            return np.full(x.shape[0], model.p)
        return model.predict(np.empty((x.shape[0], 0)), x)

    def surrogate_score(self, s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._require("r_model").predict(s, x)

    def sampling_score(self, s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._require("t_model").predict(s, x)

    def surrogate_index(self, s: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self._require("h_model").predict(s, x)

    def to_json(self) -> str:
        payload = {
            "e_model": self.e_model.to_dict() if self.e_model else None,
            "r_model": self.r_model.to_dict() if self.r_model else None,
            "t_model": self.t_model.to_dict() if self.t_model else None,
            "h_model": self.h_model.to_dict() if self.h_model else None,
            "options": {
                "ridge_propensity": self.options.ridge_propensity,
                "ridge_surrogate_score": self.options.ridge_surrogate_score,
                "ridge_sampling_score": self.options.ridge_sampling_score,
                "ridge_index": self.options.ridge_index,
                "constant_propensity": self.options.constant_propensity,
                "constant_sampling_score": self.options.constant_sampling_score,
                "interactions": self.options.interactions,
            },
        }
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "NuisanceFits":
        payload = json.loads(text)

        def _model(d):
            if d is None:
                return None
            if d["type"] == "constant":
                return ConstantScore(p=d["p"])
            common = dict(
                intercept=d["intercept"],
                coef_s=np.asarray(d["coef_s"], dtype=float),
                coef_x=np.asarray(d["coef_x"], dtype=float),
                coef_sx=np.asarray(d["coef_sx"], dtype=float),
            )
            if d["type"] == "linear":
                return LinearModel(residual_variance=d["residual_variance"], **common)
            return LogisticModel(converged=d["converged"], iterations=d["iterations"], **common)

        opts = NuisanceOptions(**payload["options"])
        return NuisanceFits(
            e_model=_model(payload["e_model"]),
            r_model=_model(payload["r_model"]),
            t_model=_model(payload["t_model"]),
            h_model=_model(payload["h_model"]),
            options=opts,
        )


def _tagged(label: str):
    """Re-raise fit errors tagged with the nuisance that failed."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, (ValidationError, DegenerateLabelsError, SeparationError, SingularDesignError)):
                raise type(exc)(f"{label}: {exc}") from exc
            return False

    return _Ctx()


def fit_all(pooled: PooledDataset, options: NuisanceOptions | None = None) -> NuisanceFits:
    """Fit propensity, surrogate score, sampling score, and surrogate index.

    With no covariates the propensity collapses to the treated fraction,
    and the model is stored as an exact :class:`ConstantScore`.
    """
    options = options or NuisanceOptions()
    exp, obs = pooled.exp, pooled.obs

    if options.constant_propensity is not None:
        e_model: ScoreModel = ConstantScore(options.constant_propensity)
    elif exp.n_covariates == 0:
        e_model = ConstantScore(float(exp.w.mean()))
    else:
        with _tagged("propensity score"):
            e_model = fit_logistic(exp.x, exp.w, ridge=options.ridge_propensity, n_surrogates=0)

    design_exp, n_s, _, n_sx = build_design(exp.s, exp.x, options.interactions)
    with _tagged("surrogate score"):
        r_model = fit_logistic(
            design_exp, exp.w, ridge=options.ridge_surrogate_score,
            n_surrogates=n_s, n_interactions=n_sx,
        )

    if options.constant_sampling_score:
        t_model: ScoreModel = ConstantScore(pooled.q)
    else:
        design_pooled, n_s_p, _, n_sx_p = build_design(pooled.s_pooled, pooled.x_pooled, options.interactions)
        with _tagged("sampling score"):
            t_model = fit_logistic(
                design_pooled, pooled.is_experimental.astype(float),
                ridge=options.ridge_sampling_score, n_surrogates=n_s_p, n_interactions=n_sx_p,
            )

    design_obs, n_s_o, _, n_sx_o = build_design(obs.s, obs.x, options.interactions)
    with _tagged("surrogate index"):
        h_model = fit_least_squares(
            design_obs, obs.y, ridge=options.ridge_index,
            n_surrogates=n_s_o, n_interactions=n_sx_o,
        )

    return NuisanceFits(e_model=e_model, r_model=r_model, t_model=t_model, h_model=h_model, options=options)


def with_index_model(fits: NuisanceFits, h_model: IndexModel) -> NuisanceFits:
    """Return a copy of ``fits`` with the surrogate index replaced."""
    return replace(fits, h_model=h_model)
