"""File formats: instances, mixture specs, populations, campaign reports.

Instances and populations are JSON; floats are serialized with Python's
shortest-round-trip repr, so every file round-trips losslessly. Mixture
specs and verify configs are flat `key = value` text. Writers are
deterministic byte-for-byte given identical inputs (the campaign JSON
summary carries the only timestamp, confined to its header).
"""
from __future__ import annotations

import csv
import io as _io
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import Instance, Schedule, StaticJobs, ValidationError
from .distributions import CubeMixture, build_cube_mixture
from .eda import CounterIndividual, FinalIndividual, Population
from .analysis import CAMPAIGN_COLUMNS, CampaignResult

PathLike = Union[str, Path]


class ParseError(ValidationError):
    """A file exists but its content is malformed."""


def _load_json(path: PathLike) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    return doc


def _require(doc: dict, key: str, path: PathLike):
    if key not in doc:
        raise ParseError(f"{path}: missing field {key!r}")
    return doc[key]


def _dump_json(doc: dict, path: PathLike) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# -- instances --------------------------------------------------------------

def write_instance(instance: Instance, path: PathLike) -> None:
    _dump_json(
        {
            "n": instance.n,
            "releases": instance.releases.tolist(),
            "processings": instance.processings.tolist(),
            "delivery": instance.delivery.tolist(),
        },
        path,
    )


def read_instance(path: PathLike) -> Instance:
    doc = _load_json(path)
    n = _require(doc, "n", path)
    arrays = {k: _require(doc, k, path) for k in ("releases", "processings", "delivery")}
    for k, v in arrays.items():
        if not isinstance(v, list) or len(v) != n:
            raise ParseError(f"{path}: field {k!r} must be an array of length n={n}")
    try:
        statics = StaticJobs(arrays["releases"], arrays["processings"])
        return Instance(statics, np.asarray(arrays["delivery"], dtype=np.float64))
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_statics(statics: StaticJobs, path: PathLike) -> None:
    _dump_json(
        {
            "n": statics.n,
            "releases": statics.releases.tolist(),
            "processings": statics.processings.tolist(),
        },
        path,
    )


def read_statics(path: PathLike) -> StaticJobs:
    """Read shared statics; accepts instance files too (delivery ignored)."""
    doc = _load_json(path)
    try:
        return StaticJobs(_require(doc, "releases", path), _require(doc, "processings", path))
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from None


# -- flat key=value files ----------------------------------------------------

def _format_flat_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_flat_config(entries: dict, path: PathLike) -> None:
    lines = [f"{k} = {_format_flat_value(v)}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_flat_value(raw: str):
    s = raw.strip()
    low = s.lower()
    if low in ("none", "null"):
        return None
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def read_flat_config(path: PathLike) -> dict:
    entries: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if "=" not in s:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = s.partition("=")
        entries[key.strip()] = parse_flat_value(raw)
    return entries


# -- mixture specs -----------------------------------------------------------

_MIXTURE_KEYS = ("n", "f", "eps", "M", "const", "tail_mass", "law", "grid",
                 "seed", "separated", "sigma")


def write_mixture_spec(mixture: CubeMixture, path: PathLike) -> None:
    """Persist the parameters that fully determine a mixture (grid and sigma
    are written resolved, so rebuilding reproduces it exactly)."""
    write_flat_config(
        {
            "n": mixture.n,
            "f": mixture.f,
            "eps": mixture.eps,
            "M": mixture.bound,
            "const": mixture.const,
            "tail_mass": mixture.tail_mass,
            "law": mixture.law,
            "grid": mixture.grid,
            "seed": mixture.seed,
            "separated": mixture.separated,
            "sigma": mixture.sigma,
        },
        path,
    )


def read_mixture_spec(path: PathLike) -> CubeMixture:
    doc = read_flat_config(path)
    missing = [k for k in _MIXTURE_KEYS if k not in doc]
    if missing:
        raise ParseError(f"{path}: missing mixture fields {missing}")
    return build_cube_mixture(
        n=doc["n"], f=doc["f"], eps=doc["eps"], M=doc["M"], const=doc["const"],
        tail_mass=doc["tail_mass"], law=doc["law"], grid=doc["grid"],
        seed=doc["seed"], separated=doc["separated"], sigma=doc["sigma"],
    )


# -- populations -------------------------------------------------------------

def write_population(pop: Population, path: PathLike) -> None:
    if not pop.finalized:
        raise ValidationError("only finalized populations are persisted")
    doc = {
        "format": "edasched-population",
        "version": 1,
        "n": pop.counter.n,
        "eps": pop.eps,
        "generation": pop.generation,
        "statics": None if pop.statics is None else {
            "releases": pop.statics.releases.tolist(),
            "processings": pop.statics.processings.tolist(),
        },
        "counter": {
            "vectors": [v.tolist() for v in pop.counter.vectors],
            "counts": list(pop.counter.counts),
            "total": pop.counter.total,
        },
        "finals": [
            {
                "members": fi.members.tolist(),
                "counts": fi.counts.tolist(),
                "weights": fi.weights.tolist(),
                "mean": fi.mean.tolist(),
                "perm": fi.schedule.perm.tolist(),
                "start_times": fi.schedule.start_times.tolist(),
                "max_lateness": fi.schedule.max_lateness,
                "critical_index": fi.schedule.critical_index,
                "value": fi.value,
                "certified_ratio": fi.certified_ratio,
                "exact": fi.exact,
                "n_samples": fi.n_samples,
                "total": fi.total,
                "event_prob": fi.event_prob,
            }
            for fi in pop.finals
        ],
    }
    _dump_json(doc, path)


def read_population(path: PathLike) -> Population:
    doc = _load_json(path)
    if doc.get("format") != "edasched-population":
        raise ParseError(f"{path}: not a population file")
    counter_doc = _require(doc, "counter", path)
    vectors = [np.asarray(v, dtype=np.float64) for v in counter_doc["vectors"]]
    if not vectors:
        raise ParseError(f"{path}: empty counter")
    counter = CounterIndividual(vectors[0])
    counter.counts[0] = int(counter_doc["counts"][0])
    for vec, cnt in zip(vectors[1:], counter_doc["counts"][1:]):
        counter._index[vec.tobytes()] = len(counter.vectors)
        counter.vectors.append(vec)
        counter.counts.append(int(cnt))
    counter.total = int(counter_doc["total"])

    statics = None
    if doc.get("statics") is not None:
        statics = StaticJobs(doc["statics"]["releases"], doc["statics"]["processings"])

    finals = []
    for fd in _require(doc, "finals", path):
        schedule = Schedule(
            perm=np.asarray(fd["perm"], dtype=np.int64),
            start_times=np.asarray(fd["start_times"], dtype=np.float64),
            max_lateness=fd["max_lateness"],
            critical_index=fd["critical_index"],
        )
        finals.append(
            FinalIndividual(
                members=np.asarray(fd["members"], dtype=np.float64),
                counts=np.asarray(fd["counts"], dtype=np.int64),
                weights=np.asarray(fd["weights"], dtype=np.float64),
                mean=np.asarray(fd["mean"], dtype=np.float64),
                schedule=schedule,
                value=fd["value"],
                certified_ratio=fd["certified_ratio"],
                exact=fd["exact"],
                n_samples=int(fd["n_samples"]),
                total=int(fd["total"]),
                event_prob=fd["event_prob"],
            )
        )
    return Population(
        counter=counter,
        regulars=[],
        eps=float(_require(doc, "eps", path)),
        generation=int(doc.get("generation", 0)),
        finals=finals,
        statics=statics,
    )


# -- campaign reports --------------------------------------------------------

def campaign_csv_text(result: CampaignResult) -> str:
    buf = _io.StringIO()
    buf.write(f"# note: {result.note}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CAMPAIGN_COLUMNS)
    for row in result.rows:
        writer.writerow([_format_flat_value(v) if isinstance(v, (float, bool)) else v
                         for v in row.as_tuple()])
    return buf.getvalue()


def write_campaign_csv(result: CampaignResult, path: PathLike) -> None:
    Path(path).write_text(campaign_csv_text(result), encoding="utf-8")


def write_campaign_summary(
    result: CampaignResult, config_doc: dict, path: PathLike, timestamp: Optional[str] = None
) -> None:
    created = timestamp if timestamp is not None else datetime.now(timezone.utc).isoformat()
    _dump_json(
        {
            "created": created,
            "note": result.note,
            "config": config_doc,
            "aggregate": result.aggregate,
        },
        path,
    )


def read_campaign_csv(path: PathLike) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    for rec in reader:
        rows.append({k: parse_flat_value(v) for k, v in rec.items()})
    return rows
