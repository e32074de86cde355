"""Three-alternative multinomial logit with a no-reaction baseline.

The log-odds of each non-baseline reaction are linear in the predictors:
the utility of the baseline is fixed at 0 and each alternative k gets an
intercept plus a coefficient vector.  Estimation is straight maximum
likelihood by damped Newton ascent (no regularization); standard errors come
from the inverse observed information at the optimum.  Deviance is measured
against the saturated model, so it equals -2 times the log-likelihood.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats as scipy_stats

from .errors import DegenerateFit, InvalidInput, NotConverged
from .labeling import CLASS_ORDER, ReactionClass
from .predictors import PredictorVector
from .trajectory import UserKind

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1

#: Non-baseline alternatives, in parameter order.
ALTERNATIVES = (ReactionClass.PRUDENT, ReactionClass.AGGRESSIVE)

#: Full predictor sets per user kind; only the pedestrian model carries the
#: pedestrian-against-vehicles simultaneous-conflict count.
DEFAULT_PREDICTORS = {
    UserKind.VEHICLE: (
        "MinDist", "TimeMinDist", "ActDist", "OrtDist", "TimeDelayXP",
        "SpeedVeh", "AccVeh", "SpeedPed", "AccPed", "CPConfNr", "CarAhead",
    ),
    UserKind.PEDESTRIAN: (
        "MinDist", "TimeMinDist", "ActDist", "OrtDist", "TimeDelayXP",
        "SpeedVeh", "AccVeh", "SpeedPed", "AccPed", "CPConfNr", "CarAhead",
        "PCConfNr",
    ),
}

_MAX_ABS_PARAM = 1e4  # beyond this the likelihood is considered separated
_MAX_HALVINGS = 50


@dataclass(frozen=True)
class ModelSpec:
    """Which predictors enter the model for which user kind."""

    user_kind: UserKind
    predictor_names: tuple[str, ...]
    baseline: ReactionClass = ReactionClass.NO_REACTION

    def __post_init__(self):
        object.__setattr__(self, "predictor_names", tuple(self.predictor_names))
        if not self.predictor_names:
            raise InvalidInput("a model spec needs at least one predictor")
        if len(set(self.predictor_names)) != len(self.predictor_names):
            raise InvalidInput("duplicate predictor names in model spec")
        if self.baseline is not ReactionClass.NO_REACTION:
            raise InvalidInput("the baseline alternative is fixed to no_reaction")


@dataclass(eq=False)
class LabeledDataset:
    """Predictor rows with observed reaction classes.

    ``X`` holds one row per labeled conflict instant in the order of
    ``predictor_names``; ``y`` holds class indices into CLASS_ORDER.  Keys
    and k values are optional row metadata used for joins and timelines.
    """

    predictor_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    user_kind: UserKind | None = None
    keys: tuple | None = None          # (ts, ped_id, veh_id) per row
    k_values: np.ndarray | None = None

    def __post_init__(self):
        self.predictor_names = tuple(self.predictor_names)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.predictor_names):
            raise InvalidInput("X must be (n rows, n predictors)")
        if self.y.shape != (self.X.shape[0],):
            raise InvalidInput("y must hold one class index per row")
        if not np.all(np.isfinite(self.X)):
            raise InvalidInput("dataset rows must be finite")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(CLASS_ORDER)):
            raise InvalidInput("class indices out of range")
        if self.keys is not None and len(self.keys) != len(self.y):
            raise InvalidInput("keys must match the number of rows")
        if self.k_values is not None:
            self.k_values = np.asarray(self.k_values, dtype=float)
            if self.k_values.shape != self.y.shape:
                raise InvalidInput("k_values must match the number of rows")

    def __len__(self) -> int:
        return len(self.y)

    def columns(self, names) -> np.ndarray:
        """Design columns in the requested order."""
        idx = []
        for name in names:
            if name not in self.predictor_names:
                raise InvalidInput(f"dataset has no predictor column {name!r}")
            idx.append(self.predictor_names.index(name))
        return self.X[:, idx]

    def take(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=int)
        return LabeledDataset(
            predictor_names=self.predictor_names,
            X=self.X[rows],
            y=self.y[rows],
            user_kind=self.user_kind,
            keys=tuple(self.keys[r] for r in rows) if self.keys is not None else None,
            k_values=self.k_values[rows] if self.k_values is not None else None,
        )


@dataclass(eq=False)
class FittedModel:
    """Estimated multinomial logit.

    ``params`` and ``se`` are (2, 1 + p) arrays: one row per non-baseline
    alternative (prudent, aggressive), the first column being the intercept.
    ``se`` may be None for models built from external coefficients.
    """

    spec: ModelSpec
    params: np.ndarray
    se: np.ndarray | None
    deviance: float
    null_deviance: float
    n_obs: int
    converged: bool
    iterations: int

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        p = len(self.spec.predictor_names)
        if self.params.shape != (2, p + 1):
            raise InvalidInput(f"params must have shape (2, {p + 1})")
        if self.se is not None:
            self.se = np.asarray(self.se, dtype=float)
            if self.se.shape != self.params.shape:
                raise InvalidInput("standard errors must match the parameter shape")
            if self.converged and not np.all(self.se > 0):
                raise InvalidInput("standard errors must be positive for a converged fit")
        if self.deviance > self.null_deviance + 1e-8:
            raise InvalidInput("deviance cannot exceed the null deviance")

    @property
    def intercepts(self) -> np.ndarray:
        return self.params[:, 0]

    @property
    def coefficients(self) -> np.ndarray:
        return self.params[:, 1:]


def _design(data: LabeledDataset, spec: ModelSpec) -> np.ndarray:
    X = data.columns(spec.predictor_names)
    return np.column_stack([np.ones(len(X)), X])


def loglik_grad_hess(theta: np.ndarray, design: np.ndarray, y: np.ndarray):
    """Log-likelihood, gradient and Hessian of the 3-class logit.

    ``theta`` is (2, m) (one row per non-baseline alternative over the design
    columns); the flattened gradient and Hessian follow theta.ravel() order.
    """
    theta = np.asarray(theta, dtype=float).reshape(2, design.shape[1])
    util = design @ theta.T                       # (n, 2)
    full = np.column_stack([np.zeros(len(util)), util])
    shift = full.max(axis=1, keepdims=True)
    expu = np.exp(full - shift)
    denom = expu.sum(axis=1, keepdims=True)
    log_p = full - shift - np.log(denom)
    ll = float(log_p[np.arange(len(y)), y].sum())

    probs = expu / denom                           # (n, 3)
    indic = np.zeros_like(probs)
    indic[np.arange(len(y)), y] = 1.0
    resid = indic[:, 1:] - probs[:, 1:]            # (n, 2)
    grad = (resid.T @ design).ravel()              # (2 m,)

    m = design.shape[1]
    hess = np.empty((2 * m, 2 * m))
    for a in range(2):
        for b in range(2):
            w = probs[:, a + 1] * ((1.0 if a == b else 0.0) - probs[:, b + 1])
            block = -(design * w[:, None]).T @ design
            hess[a * m:(a + 1) * m, b * m:(b + 1) * m] = block
    return ll, grad, hess


def _null_loglik(y: np.ndarray) -> float:
    counts = np.bincount(y, minlength=len(CLASS_ORDER)).astype(float)
    n = counts.sum()
    present = counts > 0
    return float((counts[present] * np.log(counts[present] / n)).sum())


def _rank_check(design: np.ndarray, names) -> None:
    """Reject rank-deficient designs, naming the offending columns."""
    sd = design.std(axis=0)
    zero_var = [names[j - 1] for j in range(1, design.shape[1]) if sd[j] == 0]
    if zero_var:
        raise DegenerateFit(
            f"constant predictor column(s): {', '.join(zero_var)}", columns=zero_var
        )
    scaled = design / np.where(sd == 0, 1.0, np.maximum(sd, 1e-300))
    if np.linalg.matrix_rank(scaled) == design.shape[1]:
        return
    offending = []
    rank = 0
    for j in range(design.shape[1]):
        new_rank = np.linalg.matrix_rank(scaled[:, : j + 1])
        if new_rank == rank:
            offending.append(names[j - 1] if j >= 1 else "intercept")
        rank = new_rank
    raise DegenerateFit(
        f"design matrix is rank deficient; collinear column(s): {', '.join(offending)}",
        columns=offending,
    )


def fit(
    data: LabeledDataset,
    spec: ModelSpec,
    tol: float = 1e-8,
    max_iter: int = 100,
    *,
    standardize: bool = False,
) -> FittedModel:
    """Maximum-likelihood fit of the reaction-choice logit.

    Damped Newton ascent on the joint parameter vector of both alternatives,
    started at the intercept-only optimum; when the Hessian is not usable the
    step falls back to gradient ascent with backtracking.  Convergence is a
    gradient max-norm below ``tol``; on samples large enough that no
    representable likelihood improvement remains before that point, the fit
    stops at the float64 optimum and still counts as converged.
    ``standardize`` only affects the inner conditioning; reported
    coefficients are always on the original scale.
    """
    if len(data) == 0:
        raise InvalidInput("cannot fit on an empty dataset")
    counts = np.bincount(data.y, minlength=len(CLASS_ORDER))
    if np.any(counts == 0):
        missing = [CLASS_ORDER[j].value for j in np.nonzero(counts == 0)[0]]
        raise DegenerateFit(
            f"class(es) absent from the data: {', '.join(missing)}"
        )
    design = _design(data, spec)
    _rank_check(design, spec.predictor_names)
    y = data.y

    mu = np.zeros(design.shape[1])
    sd = np.ones(design.shape[1])
    if standardize:
        mu[1:] = design[:, 1:].mean(axis=0)
        sd[1:] = design[:, 1:].std(axis=0)
        design = (design - mu) / sd
        design[:, 0] = 1.0

    theta = np.zeros((2, design.shape[1]))
    theta[:, 0] = [np.log(counts[1] / counts[0]), np.log(counts[2] / counts[0])]

    ll, grad, hess = loglik_grad_hess(theta, design, y)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad_norm = float(np.abs(grad).max())
        if grad_norm < tol:
            converged = True
            iterations -= 1
            break
        direction = _ascent_direction(hess, grad)
        step = 1.0
        flat = theta.ravel()
        for _ in range(_MAX_HALVINGS):
            candidate = flat + step * direction
            new_ll, new_grad, new_hess = loglik_grad_hess(candidate, design, y)
            # equality is fine near the optimum: the step still sharpens the
            # gradient even when the improvement is no longer representable
            if new_ll >= ll:
                break
            step *= 0.5
        else:
            raise NotConverged(
                "line search failed to improve the log-likelihood",
                iterations=iterations, grad_norm=grad_norm, loglik=ll,
            )
        if np.array_equal(candidate, flat):
            # the accepted step underflowed against the parameters: on large
            # samples this happens before the gradient tolerance is met, and
            # the optimum is then reached as precisely as float64 allows
            if grad @ direction <= 1e-6 * max(1.0, abs(ll)):
                converged = True
                break
            raise NotConverged(
                "no representable parameter update improves the log-likelihood",
                iterations=iterations, grad_norm=grad_norm, loglik=ll,
            )
        theta = candidate.reshape(2, -1)
        ll, grad, hess = new_ll, new_grad, new_hess
        if np.abs(theta).max() > _MAX_ABS_PARAM:
            worst = _largest_effects(theta, spec.predictor_names)
            raise DegenerateFit(
                "parameters diverged (separation suspected); largest effects: "
                + ", ".join(worst),
                columns=worst,
            )
    else:
        raise NotConverged(
            f"no convergence within {max_iter} iterations",
            iterations=max_iter, grad_norm=float(np.abs(grad).max()), loglik=ll,
        )

    if -2.0 * ll < 1e-6:
        # the sample is completely separated: probabilities of the observed
        # classes all reach 1 and the likelihood has no interior maximum
        worst = _largest_effects(theta, spec.predictor_names)
        raise DegenerateFit(
            "complete separation: every observation is fitted perfectly, the "
            "maximum-likelihood estimate does not exist; largest effects: "
            + ", ".join(worst),
            columns=worst,
        )

    info = -hess
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFit(f"observed information is singular at the optimum: {exc}")
    diag = np.diag(cov)
    if np.any(diag <= 0):
        raise DegenerateFit("observed information is not positive definite at the optimum")

    if standardize:
        theta, cov = _unstandardize(theta, cov, mu, sd)
        diag = np.diag(cov)
    se = np.sqrt(diag).reshape(2, -1)

    deviance = -2.0 * (ll if not standardize else _loglik_original(theta, data, spec))
    null_deviance = -2.0 * _null_loglik(y)
    model = FittedModel(
        spec=spec,
        params=theta,
        se=se,
        deviance=float(deviance),
        null_deviance=float(null_deviance),
        n_obs=len(y),
        converged=converged,
        iterations=iterations,
    )
    log.info(
        "fit %s: n=%d, deviance=%.2f (null %.2f), %d iterations",
        spec.user_kind.value if spec.user_kind else "?",
        len(y), model.deviance, model.null_deviance, iterations,
    )
    return model


def _loglik_original(theta, data, spec):
    design = _design(data, spec)
    ll, _, _ = loglik_grad_hess(theta, design, data.y)
    return ll


def _ascent_direction(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Newton direction when the negated Hessian is positive definite,
    otherwise a normalized gradient-ascent direction."""
    try:
        direction = np.linalg.solve(-hess, grad)
        if np.isfinite(direction).all() and grad @ direction > 0:
            return direction
    except np.linalg.LinAlgError:
        pass
    norm = float(np.linalg.norm(grad))
    return grad / max(norm, 1.0)


def _largest_effects(theta: np.ndarray, names) -> list[str]:
    cols = ("intercept", *names)
    magnitude = np.abs(theta).max(axis=0)
    order = np.argsort(-magnitude)
    return [cols[j] for j in order[:3]]


def _unstandardize(theta: np.ndarray, cov: np.ndarray, mu: np.ndarray, sd: np.ndarray):
    """Map standardized-scale parameters and covariance back to raw scale."""
    m = theta.shape[1]
    transform = np.zeros((2 * m, 2 * m))
    for a in range(2):
        block = np.zeros((m, m))
        block[0, 0] = 1.0
        for j in range(1, m):
            block[j, j] = 1.0 / sd[j]
            block[0, j] = -mu[j] / sd[j]
        transform[a * m:(a + 1) * m, a * m:(a + 1) * m] = block
    flat = transform @ theta.ravel()
    cov = transform @ cov @ transform.T
    return flat.reshape(2, m), cov


def predict_proba(model: FittedModel, x) -> np.ndarray:
    """Class probabilities (no_reaction, prudent, aggressive) for one row."""
    if not model.converged:
        raise InvalidInput("cannot predict from a non-converged model")
    if isinstance(x, PredictorVector):
        x = x.to_row(model.spec.predictor_names)
    x = np.asarray(x, dtype=float)
    if x.shape != (len(model.spec.predictor_names),):
        raise InvalidInput(
            f"expected {len(model.spec.predictor_names)} predictor values, got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInput("predictor values must be finite")
    return predict_proba_matrix(model, x[None, :])[0]


def predict_proba_matrix(model: FittedModel, X: np.ndarray) -> np.ndarray:
    """Class probabilities for an (n, p) predictor matrix."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise InvalidInput("predictor values must be finite")
    design = np.column_stack([np.ones(len(X)), X])
    util = design @ model.params.T
    full = np.column_stack([np.zeros(len(util)), util])
    shift = full.max(axis=1, keepdims=True)
    expu = np.exp(full - shift)
    return expu / expu.sum(axis=1, keepdims=True)


def z_tests(model: FittedModel):
    """Wald z statistics and two-sided normal p-values, shaped like params."""
    if not model.converged:
        raise InvalidInput("z tests require a converged fit")
    if model.se is None:
        raise InvalidInput("model carries no standard errors")
    z = model.params / model.se
    p = 2.0 * scipy_stats.norm.sf(np.abs(z))
    return z, p


def goodness_of_fit(model: FittedModel):
    """Likelihood-ratio test against the intercept-only model.

    Returns (chi2, degrees of freedom, upper-tail p-value); df counts the
    slope coefficients across both alternatives.
    """
    if not model.converged:
        raise InvalidInput("goodness of fit requires a converged fit")
    chi2 = model.null_deviance - model.deviance
    df = 2 * len(model.spec.predictor_names)
    p = float(scipy_stats.chi2.sf(chi2, df))
    return float(chi2), df, p


def backward_select(
    data: LabeledDataset,
    full_spec: ModelSpec,
    criterion: float = 0.985,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> ModelSpec:
    """Backward predictor elimination against the full-model chi-square.

    Repeatedly drops the predictor whose removal costs the least deviance, as
    long as the reduced model keeps at least ``criterion`` times the full
    model's likelihood-ratio chi-square.  Ties break toward the earliest
    column.
    """
    spec, _ = backward_select_path(data, full_spec, criterion, tol=tol, max_iter=max_iter)
    return spec


def backward_select_path(
    data: LabeledDataset,
    full_spec: ModelSpec,
    criterion: float = 0.985,
    *,
    tol: float = 1e-8,
    max_iter: int = 100,
):
    """Like :func:`backward_select` but also returns the drop order."""
    if not 0 < criterion <= 1:
        raise InvalidInput("criterion must lie in (0, 1]")
    full_model = fit(data, full_spec, tol, max_iter)
    chi2_full, _, _ = goodness_of_fit(full_model)
    floor = criterion * chi2_full

    current = list(full_spec.predictor_names)
    dropped: list[str] = []
    while len(current) > 1:
        best = None  # (chi2, position, name)
        for pos, name in enumerate(current):
            reduced = [c for c in current if c != name]
            reduced_spec = ModelSpec(full_spec.user_kind, tuple(reduced))
            try:
                reduced_model = fit(data, reduced_spec, tol, max_iter)
            except (DegenerateFit, NotConverged):
                continue
            chi2_r, _, _ = goodness_of_fit(reduced_model)
            if best is None or chi2_r > best[0]:
                best = (chi2_r, pos, name)
        if best is None or best[0] < floor:
            break
        dropped.append(best[2])
        current.remove(best[2])
    return ModelSpec(full_spec.user_kind, tuple(current)), dropped


def model_to_dict(model: FittedModel) -> dict:
    """Serializable document with every fitted quantity."""
    names = ("intercept", *model.spec.predictor_names)
    coeffs = {
        alt.value: dict(zip(names, (float(v) for v in model.params[a])))
        for a, alt in enumerate(ALTERNATIVES)
    }
    errors = None
    if model.se is not None:
        errors = {
            alt.value: dict(zip(names, (float(v) for v in model.se[a])))
            for a, alt in enumerate(ALTERNATIVES)
        }
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "user_kind": model.spec.user_kind.value,
        "baseline": model.spec.baseline.value,
        "alternatives": [alt.value for alt in ALTERNATIVES],
        "predictors": list(model.spec.predictor_names),
        "coefficients": coeffs,
        "standard_errors": errors,
        "deviance": model.deviance,
        "null_deviance": model.null_deviance,
        "n_obs": model.n_obs,
        "converged": model.converged,
        "iterations": model.iterations,
    }


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise InvalidInput(f"unsupported model format_version {doc.get('format_version')!r}")
    spec = ModelSpec(
        user_kind=UserKind.from_tag(doc["user_kind"]),
        predictor_names=tuple(doc["predictors"]),
        baseline=ReactionClass.from_tag(doc["baseline"]),
    )
    names = ("intercept", *spec.predictor_names)
    params = np.array(
        [[doc["coefficients"][alt.value][n] for n in names] for alt in ALTERNATIVES]
    )
    se = None
    if doc.get("standard_errors") is not None:
        se = np.array(
            [[doc["standard_errors"][alt.value][n] for n in names] for alt in ALTERNATIVES]
        )
    return FittedModel(
        spec=spec,
        params=params,
        se=se,
        deviance=float(doc["deviance"]),
        null_deviance=float(doc["null_deviance"]),
        n_obs=int(doc["n_obs"]),
        converged=bool(doc["converged"]),
        iterations=int(doc["iterations"]),
    )


def save_model(model: FittedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> FittedModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read model {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvalidInput(f"model file {path} must contain a JSON object")
    try:
        return model_from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed model file {path}: {exc}") from exc
