"""File formats of the pipeline: trajectory, conflict, dataset and report CSVs.

All writers emit headers, sort rows deterministically and format floats with
their shortest round-trip representation, so a rerun with identical inputs
reproduces every artifact byte for byte.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .conflict import ConflictInstant
from .errors import InvalidInput
from .evaluation import ConfusionMatrix
from .labeling import CLASS_ORDER
from .mnl import LabeledDataset
from .predictors import PREDICTOR_COLUMNS
from .trajectory import TrackPoint, Trajectory, UserKind

TRAJECTORY_HEADER = ("user_id", "kind", "t", "x", "y")
CI_HEADER = ("ts", "ped_id", "veh_id", "min_dist", "time_min_dist")
DATASET_HEADER = ("ts", "ped_id", "veh_id", "user_kind") + PREDICTOR_COLUMNS + ("k", "reaction")


def _fmt(value) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(value))


def _open_writer(path):
    return open(path, "w", encoding="utf-8", newline="")


def read_trajectories(path, expected_step: float | None = None) -> list[Trajectory]:
    """Parse the trajectory CSV (header user_id,kind,t,x,y).

    Rows must be grouped per user and sorted by time; the per-user step is
    inferred from the first two rows and, when ``expected_step`` is given,
    checked against it.  Malformed rows report their line number.
    """
    rows_by_user: dict[str, list] = {}
    kind_by_user: dict[str, str] = {}
    order: list[str] = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_HEADER:
            raise InvalidInput(
                f"{path}: expected header {','.join(TRAJECTORY_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise InvalidInput(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            user_id, kind, t_s, x_s, y_s = (field.strip() for field in row)
            try:
                t, x, y = float(t_s), float(x_s), float(y_s)
            except ValueError as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
            if kind not in ("ped", "veh"):
                raise InvalidInput(f"{path}:{lineno}: unknown kind {kind!r}")
            if user_id not in rows_by_user:
                rows_by_user[user_id] = []
                kind_by_user[user_id] = kind
                order.append(user_id)
            elif kind_by_user[user_id] != kind:
                raise InvalidInput(f"{path}:{lineno}: user {user_id!r} changes kind")
            prev = rows_by_user[user_id]
            if prev and t <= prev[-1][0]:
                raise InvalidInput(
                    f"{path}:{lineno}: user {user_id!r} times must increase"
                )
            prev.append((t, x, y, lineno))

    out = []
    for user_id in order:
        rows = rows_by_user[user_id]
        if len(rows) < 2:
            raise InvalidInput(
                f"{path}:{rows[0][3]}: user {user_id!r} has fewer than 2 points"
            )
        step = rows[1][0] - rows[0][0]
        if expected_step is not None and abs(step - expected_step) > 1e-6:
            raise InvalidInput(
                f"{path}:{rows[1][3]}: user {user_id!r} steps by {step} "
                f"instead of the configured {expected_step}"
            )
        try:
            traj = Trajectory(
                user_id=user_id,
                kind=UserKind.from_tag(kind_by_user[user_id]),
                points=tuple(TrackPoint(t=t, x=x, y=y) for t, x, y, _ in rows),
                step=step,
            )
        except InvalidInput as exc:
            raise InvalidInput(f"{path}: user {user_id!r}: {exc}") from exc
        out.append(traj)
    return out


def write_trajectories(path, trajs) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_HEADER)
        for traj in trajs:
            for p in traj.points:
                writer.writerow([traj.user_id, traj.kind.value, _fmt(p.t), _fmt(p.x), _fmt(p.y)])


def write_conflict_instants(path, cis) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CI_HEADER)
        for ci in sorted(cis, key=lambda c: c.key):
            writer.writerow(
                [ci.ts, ci.ped_id, ci.veh_id, _fmt(ci.min_dist), _fmt(ci.time_min_dist)]
            )


def read_conflict_instants(path) -> list[ConflictInstant]:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CI_HEADER:
            raise InvalidInput(f"{path}: expected header {','.join(CI_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise InvalidInput(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                out.append(
                    ConflictInstant(
                        ts=int(row[0]),
                        ped_id=row[1].strip(),
                        veh_id=row[2].strip(),
                        min_dist=float(row[3]),
                        time_min_dist=float(row[4]),
                    )
                )
            except (ValueError, InvalidInput) as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
    return out


def write_dataset(path, rows) -> None:
    """Write labeled predictor rows: (ConflictInstant, PredictorVector,
    ReactionLabel) triples of one user kind."""
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for ci, vec, label in rows:
            numeric = vec.to_row(PREDICTOR_COLUMNS)
            writer.writerow(
                [ci.ts, ci.ped_id, ci.veh_id, label.user_kind.value]
                + [_int_or_float(col, v) for col, v in zip(PREDICTOR_COLUMNS, numeric)]
                + [_fmt(label.k), label.reaction.value]
            )


def _int_or_float(column: str, value: float) -> str:
    if column in ("CPConfNr", "PCConfNr", "CarAhead"):
        return str(int(value))
    return _fmt(value)


def read_dataset(path) -> LabeledDataset:
    """Load a labeled dataset CSV into matrix form (all predictor columns)."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    class_index = {c.value: i for i, c in enumerate(CLASS_ORDER)}
    X, y, keys, ks = [], [], [], []
    kind = None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DATASET_HEADER:
            raise InvalidInput(f"{path}: expected header {','.join(DATASET_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DATASET_HEADER):
                raise InvalidInput(
                    f"{path}:{lineno}: expected {len(DATASET_HEADER)} fields, got {len(row)}"
                )
            try:
                ts = int(row[0])
                row_kind = UserKind.from_tag(row[3].strip())
                values = [float(v) for v in row[4:4 + len(PREDICTOR_COLUMNS)]]
                k = float(row[-2])
                cls = class_index[row[-1].strip()]
            except (ValueError, KeyError, InvalidInput) as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from exc
            if kind is None:
                kind = row_kind
            elif kind is not row_kind:
                raise InvalidInput(f"{path}:{lineno}: mixed user kinds in one dataset")
            X.append(values)
            y.append(cls)
            keys.append((ts, row[1].strip(), row[2].strip()))
            ks.append(k)
    if not X:
        raise InvalidInput(f"{path}: dataset holds no rows")
    return LabeledDataset(
        predictor_names=PREDICTOR_COLUMNS,
        X=np.array(X),
        y=np.array(y),
        user_kind=kind,
        keys=tuple(keys),
        k_values=np.array(ks),
    )


def write_confusion(path, cm: ConfusionMatrix) -> None:
    names = [c.value for c in CLASS_ORDER]
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["observed\\predicted"] + names)
        for i, name in enumerate(names):
            writer.writerow([name] + [int(v) for v in cm.counts[i]])


def read_confusion(path) -> ConfusionMatrix:
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        next(reader, None)
        counts = [[int(v) for v in row[1:]] for row in reader if row]
    return ConfusionMatrix(np.array(counts))


def write_timelines_csv(path, timelines, step: float) -> None:
    with _open_writer(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["ped_id", "veh_id", "ts", "t", "p_no_reaction", "p_prudent",
             "p_aggressive", "observed", "k"]
        )
        for tl in timelines:
            for i, ts in enumerate(tl.steps):
                writer.writerow([
                    tl.ped_id, tl.veh_id, int(ts), _fmt(ts * step),
                    _fmt(tl.probabilities[i, 0]),
                    _fmt(tl.probabilities[i, 1]),
                    _fmt(tl.probabilities[i, 2]),
                    tl.observed[i].value,
                    _fmt(tl.k_values[i]),
                ])


def write_timelines_json(path, timelines, step: float) -> None:
    doc = []
    for tl in timelines:
        doc.append({
            "ped_id": tl.ped_id,
            "veh_id": tl.veh_id,
            "series": [
                {
                    "t": float(ts * step),
                    "p_no_reaction": float(tl.probabilities[i, 0]),
                    "p_prudent": float(tl.probabilities[i, 1]),
                    "p_aggressive": float(tl.probabilities[i, 2]),
                    "observed": tl.observed[i].value,
                }
                for i, ts in enumerate(tl.steps)
            ],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
