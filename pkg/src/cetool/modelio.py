"""JSON model files (schema ``cetool-model/1``).

A model document looks like::

    {
      "schema": "cetool-model/1",
      "horizon": 3,
      "state_space": {"labels": [...], "dist": [[...], ...]},
      "observations": [...],                      # labels, |Y| entries
      "actions": [...],                           # labels, |A| entries
      "initial": [[...]],                         # xi[s][y]
      "kernel": [[[[[...]]]]],                    # P[t][s][a][s'][y'], t = 1..T-1
      "cost": [[[...]]],                          # c[t][s][a], t = 1..T
      "abstraction": {...},                       # optional, default identity
      "estimator": {...}                          # optional, default map-posterior
    }

``abstraction`` is one of ``{"kind": "identity"}``,
``{"kind": "partition", "phi": [...], "representatives": [...],
"lifting": "dirac" | "uniform"}`` or ``{"kind": "explicit", "target":
{"labels", "dist"}, "phi": [...], "lambda_p": [[...]], "lambda_c": [[...]]}``.

``estimator`` is ``{"rule": "last-observation", "map": [...]}``,
``{"rule": "quantized-last-observation", "obs_to_state": [...]}``,
``{"rule": "map-posterior"}``, ``{"rule": "posterior-mean-representative"}``
or ``{"rule": "table", "table": {"y1,a1,y2": k, ...}}``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import estimators as est
from .abstraction import Abstraction
from .pomdp import HistoryTree, Pomdp
from .spaces import MetricSpace, StructureError

SCHEMA = "cetool-model/1"


class ModelFormatError(ValueError):
    """A model document is malformed; the message names the offending field."""


def _labels(xs):
    return [list(x) if isinstance(x, tuple) else x for x in xs]


def _relabel(xs):
    return tuple(tuple(x) if isinstance(x, list) else x for x in xs)


def space_to_dict(space: MetricSpace) -> dict:
    return {"labels": _labels(space.labels), "dist": space.dist.tolist()}


def space_from_dict(d: dict, where: str = "state_space") -> MetricSpace:
    try:
        return MetricSpace(_relabel(d["labels"]), np.asarray(d["dist"], dtype=float))
    except KeyError as exc:
        raise ModelFormatError(f"{where}: missing field {exc.args[0]!r}") from None
    except (StructureError, ValueError) as exc:
        raise ModelFormatError(f"{where}: {exc}") from None


def pomdp_to_dict(p: Pomdp) -> dict:
    return {
        "schema": SCHEMA,
        "horizon": p.T,
        "state_space": space_to_dict(p.space),
        "observations": _labels(p.obs_labels),
        "actions": _labels(p.action_labels),
        "initial": p.xi.tolist(),
        "kernel": p.P.tolist(),
        "cost": p.c.tolist(),
    }


def abstraction_to_dict(ab: Abstraction) -> dict:
    if ab.is_identity and np.array_equal(ab.lambda_p, np.eye(len(ab.source))):
        return {"kind": "identity"}
    return {"kind": "explicit", "target": space_to_dict(ab.target), "phi": ab.phi.tolist(),
            "lambda_p": ab.lambda_p.tolist(), "lambda_c": ab.lambda_c.tolist()}


def instance_to_dict(p: Pomdp, ab: Abstraction, g: est.Estimator, tree: HistoryTree | None = None) -> dict:
    """Full document; the estimator is tabulated over the reachable tree."""
    doc = pomdp_to_dict(p)
    doc["abstraction"] = abstraction_to_dict(ab)
    tree = tree or HistoryTree.build(p)
    doc["estimator"] = {"rule": "table", "name": g.name, "table": est.materialize(g, tree)}
    return doc


def _field(doc, key, where="model"):
    if key not in doc:
        raise ModelFormatError(f"{where}: missing field {key!r}")
    return doc[key]


def pomdp_from_dict(doc: dict) -> Pomdp:
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise ModelFormatError(f"unsupported schema {doc.get('schema')!r}")
    space = space_from_dict(_field(doc, "state_space"))
    T = int(_field(doc, "horizon"))
    try:
        xi = np.asarray(_field(doc, "initial"), dtype=float)
        P = np.asarray(_field(doc, "kernel"), dtype=float)
        c = np.asarray(_field(doc, "cost"), dtype=float)
    except ValueError as exc:
        raise ModelFormatError(f"ragged numeric array: {exc}") from None
    if c.shape[:1] != (T,):
        raise ModelFormatError(f"cost: expected {T} time steps, got shape {c.shape}")
    try:
        return Pomdp(space, xi, P, c, _relabel(doc.get("observations", ())),
                     _relabel(doc.get("actions", ())))
    except StructureError as exc:
        raise ModelFormatError(str(exc)) from None


def abstraction_from_dict(d: dict | None, space: MetricSpace) -> Abstraction:
    d = d or {"kind": "identity"}
    kind = d.get("kind", "identity")
    try:
        if kind == "identity":
            return Abstraction.identity(space)
        if kind == "partition":
            return Abstraction.from_partition(space, _field(d, "phi", "abstraction"),
                                              _field(d, "representatives", "abstraction"),
                                              d.get("lifting", "dirac"))
        if kind == "explicit":
            return Abstraction(space, space_from_dict(_field(d, "target", "abstraction"), "abstraction.target"),
                               np.asarray(_field(d, "phi", "abstraction")),
                               np.asarray(_field(d, "lambda_p", "abstraction"), dtype=float),
                               np.asarray(_field(d, "lambda_c", "abstraction"), dtype=float))
    except StructureError as exc:
        raise ModelFormatError(f"abstraction: {exc}") from None
    raise ModelFormatError(f"abstraction: unknown kind {kind!r}")


def estimator_from_dict(d: dict | None, p: Pomdp, ab: Abstraction) -> est.Estimator:
    d = d or {"rule": "map-posterior"}
    rule = _field(d, "rule", "estimator")
    if rule == "last-observation":
        return est.last_observation(_field(d, "map", "estimator"))
    if rule == "quantized-last-observation":
        return est.quantized_last_observation(ab, _field(d, "obs_to_state", "estimator"))
    if rule == "map-posterior":
        return est.map_posterior(p, ab)
    if rule == "posterior-mean-representative":
        return est.posterior_mean_representative(p, ab)
    if rule == "table":
        return est.from_table(_field(d, "table", "estimator"), d.get("name", "table"))
    raise ModelFormatError(f"estimator: unknown rule {rule!r}")


def load_model(path) -> tuple[Pomdp, Abstraction, est.Estimator]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ModelFormatError(f"model file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    p = pomdp_from_dict(doc)
    ab = abstraction_from_dict(doc.get("abstraction"), p.space)
    return p, ab, estimator_from_dict(doc.get("estimator"), p, ab)


def dumps(doc: dict) -> str:
    """Canonical serialisation: sorted keys, shortest round-trip floats."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
