"""Dataset (JSONL) and model (JSON) files.

Dataset records look like::

    {"id": "seq0", "T": 5.0, "C": 2, "events": [[0.41, 1], [2.7, 0]], "label": 1, "origin": "observed"}

``label`` and ``origin`` are optional. ``C`` is optional on input; when it is
missing the type count is inferred as one plus the largest type in the file.
Floats are written with ``repr`` precision, so reading a written file gives
back exactly the same values.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataFormatError, HawkesError
from .model import EventSequence, HawkesParams, MixtureModel


def sequence_record(seq: EventSequence, label=None) -> dict:
    rec = {
        "id": seq.id,
        "T": seq.T,
        "C": seq.n_types,
        "events": [[t, c] for t, c in seq.events],
        "origin": seq.origin,
    }
    if label is not None:
        rec["label"] = int(label)
    return rec


def write_dataset(path, sequences, labels=None) -> None:
    sequences = list(sequences)
    if labels is not None and len(labels) != len(sequences):
        raise ValueError("labels and sequences differ in length")
    with open(path, "w") as fh:
        for n, s in enumerate(sequences):
            rec = sequence_record(s, None if labels is None else labels[n])
            fh.write(json.dumps(rec, allow_nan=False) + "\n")


def read_dataset(path, n_types: int | None = None):
    """Read a JSONL dataset.

    Returns
    -------
    sequences : list of EventSequence
    labels : list of int, or None when no record carries a label
    """
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise DataFormatError(f"{path}:{lineno}: invalid JSON ({err.msg})") from err
            if not isinstance(rec, dict) or "T" not in rec or "events" not in rec:
                raise DataFormatError(f"{path}:{lineno}: record needs 'T' and 'events'")
            records.append((lineno, rec))
    if n_types is None:
        declared = {int(r["C"]) for _, r in records if "C" in r}
        if len(declared) > 1:
            raise DataFormatError(f"{path}: records disagree on C: {sorted(declared)}")
        if declared:
            n_types = declared.pop()
        else:
            top = [int(e[1]) for _, r in records for e in r["events"]]
            n_types = max(top) + 1 if top else 1
    sequences, labels = [], []
    for lineno, rec in records:
        try:
            seq = EventSequence.from_events(
                rec["events"], rec["T"], int(rec.get("C", n_types)),
                id=str(rec.get("id", f"seq{lineno - 1}")), origin=rec.get("origin", "observed"),
            )
        except (HawkesError, ValueError, TypeError, IndexError) as err:
            raise DataFormatError(f"{path}:{lineno}: {err}") from err
        sequences.append(seq)
        labels.append(rec.get("label"))
    have = [lab is not None for lab in labels]
    if not any(have):
        return sequences, None
    if not all(have):
        raise DataFormatError(f"{path}: labels present on some records but not all")
    return sequences, [int(lab) for lab in labels]


def model_to_dict(model: MixtureModel, meta: dict | None = None) -> dict:
    return {
        "K": model.K,
        "C": model.n_types,
        "beta": model.beta,
        "pi": model.pi.tolist(),
        "components": [{"mu": p.mu.tolist(), "A": p.A.tolist()} for p in model.components],
        "meta": {"version": __version__, **(meta or {})},
    }


def model_from_dict(d: dict) -> MixtureModel:
    try:
        K, C, beta = int(d["K"]), int(d["C"]), float(d["beta"])
        comps = tuple(HawkesParams(c["mu"], c["A"], beta) for c in d["components"])
        model = MixtureModel(comps, np.array(d["pi"], dtype=np.float64))
    except (KeyError, TypeError, ValueError, HawkesError) as err:
        raise DataFormatError(f"invalid model document: {err}") from err
    if model.K != K or model.n_types != C:
        raise DataFormatError(f"model declares K={K}, C={C} but has K={model.K}, C={model.n_types}")
    return model


def write_model(path, model: MixtureModel, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, meta), indent=2, allow_nan=False) + "\n")


def read_model(path):
    """Return ``(model, meta)`` from a model file."""
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise DataFormatError(f"{path}: invalid JSON ({err.msg})") from err
    if not isinstance(d, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    return model_from_dict(d), d.get("meta", {})
