"""Pipeline configuration: every numeric assumption in one place.

The resolved configuration is the single source of truth for a run; the CLI
loads it from a versioned JSON document and applies command-line overrides on
top (flags win over the file, the file wins over the defaults below).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import InvalidInput

CONFIG_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    """Numeric knobs of the full pipeline, with their default values."""

    step: float = 0.5                 # tracking time step [s]
    horizon: float = 8.0              # prediction horizon [s]
    n_history: int = 4                # observed points used per prediction fit
    conflict_threshold: float = 5.0   # predicted-distance threshold [m]
    reaction_delay_steps: int = 3     # stimulus-to-reaction delay [steps]
    k_threshold: float = 0.25         # reaction classification threshold [s]
    subgrid: float = 0.1              # predicted-path sampling interval [s]
    group_max_gap: int = 2            # max step gap inside one conflict situation
    car_ahead_mode: str = "ahead"     # "ahead" or "behind"
    car_ahead_range: float = 15.0     # longitudinal search range [m]
    car_ahead_lateral_tol: float = 2.0  # max offset from the path to count [m]
    prediction_smoothing: float = 0.0   # spline penalty for prediction fits
    labeling_smoothing: float = 1e-3    # spline penalty for labeling fits
    train_frac: float = 0.7           # training share of the labeled sample
    split_seed: int = 0               # RNG seed for the train/test split
    mle_tol: float = 1e-8             # gradient max-norm convergence tolerance
    mle_max_iter: int = 100           # Newton iteration cap

    def __post_init__(self):
        positive = (
            "step", "horizon", "conflict_threshold", "k_threshold",
            "subgrid", "car_ahead_range", "car_ahead_lateral_tol",
            "mle_tol",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidInput(f"config field {name!r} must be positive")
        for name in ("n_history", "reaction_delay_steps", "mle_max_iter"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"config field {name!r} must be >= 1")
        if self.n_history < 2:
            raise InvalidInput("n_history must be >= 2")
        if self.group_max_gap < 0:
            raise InvalidInput("group_max_gap must be >= 0")
        if self.prediction_smoothing < 0 or self.labeling_smoothing < 0:
            raise InvalidInput("spline smoothing must be >= 0")
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidInput("train_frac must lie strictly between 0 and 1")
        if self.car_ahead_mode not in ("ahead", "behind"):
            raise InvalidInput("car_ahead_mode must be 'ahead' or 'behind'")

    def to_dict(self) -> dict:
        out = {"config_version": CONFIG_VERSION}
        out.update(dataclasses.asdict(self))
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        version = data.pop("config_version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise InvalidInput(f"unsupported config_version {version!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidInput(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidInput(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidInput(f"config {path} must contain a JSON object")
        return cls.from_dict(data)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def replace(self, **overrides) -> "PipelineConfig":
        """Return a copy with the given fields overridden."""
        return dataclasses.replace(self, **overrides)
