"""Human-readable fit and evaluation reports.

The coefficient table lists, per non-baseline alternative, the estimate, its
standard error, the Wald z statistic and the two-sided p-value; the footer
carries observation count, deviances and the likelihood-ratio test.  The
resolved configuration is appended for provenance.
"""

from __future__ import annotations

from .config import PipelineConfig
from .evaluation import ConfusionMatrix, misclassification_rate
from .labeling import CLASS_ORDER
from .mnl import ALTERNATIVES, FittedModel, goodness_of_fit, z_tests


def format_fit_report(model: FittedModel, config: PipelineConfig | None = None) -> str:
    z, p = z_tests(model)
    chi2, df, chi2_p = goodness_of_fit(model)
    kind = model.spec.user_kind.value
    baseline = model.spec.baseline.value

    lines = []
    title = f"Reaction-choice model: {kind} (baseline = {baseline})"
    lines.append(title)
    lines.append("=" * len(title))
    lines.append("")
    names = ("Intercept", *model.spec.predictor_names)
    col_head = f"{'beta':>12}{'std.err':>12}{'z':>9}{'p':>9}"
    header = f"{'Variable':<14}" + "".join(
        f"{baseline + ' -> ' + alt.value:>42}" for alt in ALTERNATIVES
    )
    lines.append(header)
    lines.append(f"{'':<14}" + col_head * len(ALTERNATIVES))
    lines.append("-" * len(lines[-1]))
    for j, name in enumerate(names):
        cells = ""
        for a in range(len(ALTERNATIVES)):
            cells += (
                f"{model.params[a, j]:>12.4g}{model.se[a, j]:>12.4g}"
                f"{z[a, j]:>9.2f}{p[a, j]:>9.3f}"
            )
        lines.append(f"{name:<14}" + cells)
    lines.append("")
    lines.append(
        f"Number of observations = {model.n_obs}; Dev = {model.deviance:.2f}; "
        f"Constant-only model: Dev. = {model.null_deviance:.2f}"
    )
    lines.append(
        f"Goodness of Fit: chi2 = {chi2:.2f} with d.f. = {df}. "
        f"Prob >= chi2 = {chi2_p:.4f}"
    )
    lines.append(
        f"Converged: {model.converged} after {model.iterations} iterations"
    )
    if config is not None:
        lines.append("")
        lines.append("Resolved configuration:")
        for key, value in sorted(config.to_dict().items()):
            lines.append(f"  {key} = {value}")
    lines.append("")
    return "\n".join(lines)


def format_confusion_report(cm: ConfusionMatrix, kind: str) -> str:
    names = [c.value for c in CLASS_ORDER]
    width = max(len(n) for n in names) + 2
    lines = [f"Confusion matrix ({kind}): observed rows, predicted columns", ""]
    lines.append(" " * width + "".join(f"{n:>{width}}" for n in names))
    for i, name in enumerate(names):
        lines.append(
            f"{name:>{width}}" + "".join(f"{int(v):>{width}}" for v in cm.counts[i])
        )
    lines.append("")
    rate = misclassification_rate(cm)
    lines.append(f"Test-set size: {cm.total}")
    lines.append(f"Misclassification rate: {rate:.3f} ({100 * rate:.1f}%)")
    lines.append("")
    return "\n".join(lines)
