"""Experiment configs: validation and execution.

A config is one JSON document::

    {
      "schema_version": 1,
      "task": "scan",
      "system": "bernoulli_cyclic(k=2, L=10)",
      "family": {"kind": "coordinate", "coords": [0, 1]},
      "functional": "phi",
      "N": 4,
      "j_range": {"start": 1, "stop": 8},
      "output": {"dir": "out", "name": "mixing"}
    }

Tasks and their fields are listed in ``TASKS``.  Every task writes
``<name>.csv`` (data), ``<name>.summary.json`` (deterministic report),
``<name>.dat`` (two plot columns with a ``#`` header) and
``<name>.meta.json`` (timestamp, versions, thread count).  Only the meta file
depends on when and how the run happened.  Relative paths resolve against the
config file's directory.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import scan as scan_functional
from .asymptotics import triple_correlation
from .cellsys import CellCapError, CellFunction, CellSet, get_cell_cap
from .extlab import SAMPLERS, SELECTORS, EnsembleSpec, lift_experiment
from .seqentropy import SequenceFamily, partition_entropy, refine
from .spectral import CorrelationSequence, classify_singular, correlation_sequence
from .zoo import (
    DescriptorError,
    block_partition,
    build,
    canonical_family,
    coordinate_family,
    coordinate_partition,
    parse_descriptor,
    random_partition,
)

SCHEMA_VERSION = 1

TASKS = {
    "scan": {"system", "functional", "N", "j_range", "family", "a"},
    "entropy": {"system", "partition", "sequence", "j_range"},
    "ensemble": {"ensemble", "selector", "params"},
    "spectral": {"system", "vector", "s_max", "correlation_csv", "N_schedule", "P_schedule"},
    "triple": {"system", "set", "m_range"},
}
COMMON = {"schema_version", "task", "output", "threads", "description", "cell_cap"}


class ConfigError(ValueError):
    """Validation failure; ``where`` names the line or field at fault."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def default_threads() -> int:
    raw = os.environ.get("ERGOLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError("ERGOLAB_THREADS", f"not an integer: {raw!r}") from None
    return 1


def load_config(path) -> tuple[dict, Path]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1", "config must be a JSON object")
    return doc, path.parent


def _need(doc: dict, key: str, kind, where: str = ""):
    field = f"{where}{key}"
    if key not in doc:
        raise ConfigError(field, "missing required field")
    val = doc[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ConfigError(field, f"expected an integer, got {val!r}")
    if kind is not int and not isinstance(val, kind):
        raise ConfigError(field, f"expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _int_list(val, field: str) -> list[int]:
    if isinstance(val, dict):
        start = _need(val, "start", int, field + ".")
        stop = _need(val, "stop", int, field + ".")
        step = val.get("step", 1)
        if not isinstance(step, int) or step < 1:
            raise ConfigError(field + ".step", "must be a positive integer")
        if stop < start:
            raise ConfigError(field, "stop < start")
        return list(range(start, stop + 1, step))
    if isinstance(val, list) and val and all(isinstance(v, int) and not isinstance(v, bool) for v in val):
        return list(val)
    raise ConfigError(field, "expected a nonempty integer list or {start, stop[, step]}")


def _descriptor(doc: dict, key: str):
    text = _need(doc, key, str)
    try:
        d = parse_descriptor(text)
    except DescriptorError as exc:
        raise ConfigError(key, str(exc)) from None
    return d


def _cap_check(n: int, what: str) -> None:
    if n > get_cell_cap():
        raise CellCapError(f"{what} needs {n} cells, above the cap of {get_cell_cap()}")


@dataclass
class Outputs:
    directory: Path
    name: str

    def paths(self) -> dict:
        return {
            ext: self.directory / f"{self.name}{ext}"
            for ext in (".csv", ".summary.json", ".dat", ".meta.json")
        }


def validate(doc: dict, base_dir: Path = Path(".")) -> dict:
    """Check fields and resource needs; returns a normalized plan.

    Raises ``ConfigError`` or ``CellCapError`` before anything is computed.
    """
    version = _need(doc, "schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}; expected {SCHEMA_VERSION}")
    task = _need(doc, "task", str)
    if task not in TASKS:
        raise ConfigError("task", f"unknown task {task!r}; expected one of {sorted(TASKS)}")
    extra = set(doc) - TASKS[task] - COMMON
    if extra:
        raise ConfigError(sorted(extra)[0], f"unknown field for task {task!r}")
    if "cell_cap" in doc:
        cap = _need(doc, "cell_cap", int)
        if cap < 1:
            raise ConfigError("cell_cap", "must be positive")
    out = _need(doc, "output", dict)
    name = _need(out, "name", str, "output.")
    if not name or "/" in name:
        raise ConfigError("output.name", "must be a plain file stem")
    outputs = Outputs((base_dir / out.get("dir", ".")).resolve(), name)
    threads = doc.get("threads")
    if threads is not None and (not isinstance(threads, int) or threads < 1):
        raise ConfigError("threads", "must be a positive integer")
    plan = {"task": task, "outputs": outputs, "threads": threads, "doc": doc, "base_dir": base_dir}
    plan.update(_VALIDATORS[task](doc, base_dir))
    return plan


def _validate_scan(doc, base_dir):
    d = _descriptor(doc, "system")
    _cap_check(d.cell_count(), "system")
    functional = _need(doc, "functional", str)
    if functional not in ("phi", "psi", "psi_a"):
        raise ConfigError("functional", "expected phi, psi or psi_a")
    N = _need(doc, "N", int)
    js = _int_list(_need(doc, "j_range", (list, dict)), "j_range")
    if min(js) < 0:
        raise ConfigError("j_range", "lags must be non-negative")
    a = doc.get("a")
    if functional == "psi_a":
        if a is None:
            raise ConfigError("a", "psi_a needs a")
        try:
            a = Fraction(str(a))
        except ValueError:
            raise ConfigError("a", f"not a number: {a!r}") from None
        if not 0 < a <= 1:
            raise ConfigError("a", "must lie in (0, 1]")
    fam = doc.get("family", {"kind": "canonical"})
    if not isinstance(fam, dict) or fam.get("kind") not in ("canonical", "coordinate"):
        raise ConfigError("family.kind", "expected canonical or coordinate")
    if fam["kind"] == "coordinate" and d.kind != "bernoulli_cyclic":
        raise ConfigError("family.kind", "coordinate families need a bernoulli_cyclic system")
    size = fam.get("i_max", 16) if fam["kind"] == "canonical" else len(fam.get("coords", [0])) * d.param_dict.get("k", 2)
    if not 1 <= N <= size:
        raise ConfigError("N", f"must lie in [1, {size}] for this family")
    return {"system": d, "functional": functional, "N": N, "j": js, "a": a, "family": fam}


def _validate_entropy(doc, base_dir):
    d = _descriptor(doc, "system")
    _cap_check(d.cell_count(), "system")
    part = _need(doc, "partition", dict)
    kind = part.get("kind")
    if kind not in ("coordinate", "blocks", "random"):
        raise ConfigError("partition.kind", "expected coordinate, blocks or random")
    if kind == "coordinate" and d.kind != "bernoulli_cyclic":
        raise ConfigError("partition.kind", "coordinate partitions need a bernoulli_cyclic system")
    seq = _need(doc, "sequence", dict)
    skind = seq.get("kind")
    if skind == "progression":
        _need(seq, "L", int, "sequence.")
    elif skind == "geometric":
        _need(seq, "step", int, "sequence.")
    elif skind == "explicit":
        table = _need(seq, "table", dict, "sequence.")
        for k, v in table.items():
            _int_list(v, f"sequence.table.{k}")
    else:
        raise ConfigError("sequence.kind", "expected progression, geometric or explicit")
    js = _int_list(_need(doc, "j_range", (list, dict)), "j_range")
    if min(js) < 1:
        raise ConfigError("j_range", "j must be positive")
    return {"system": d, "partition": part, "sequence": seq, "j": js}


def _validate_ensemble(doc, base_dir):
    ens = _need(doc, "ensemble", dict)
    allowed = {"base", "fiber_size", "sampler", "transpositions", "trials", "master_seed", "fiber"}
    extra = set(ens) - allowed
    if extra:
        raise ConfigError(f"ensemble.{sorted(extra)[0]}", "unknown field")
    base = _descriptor(ens, "base")
    m = _need(ens, "fiber_size", int, "ensemble.")
    if m < 1:
        raise ConfigError("ensemble.fiber_size", "must be positive")
    sampler = ens.get("sampler", "uniform_permutations")
    if sampler not in SAMPLERS:
        raise ConfigError("ensemble.sampler", f"expected one of {SAMPLERS}")
    trials = _need(ens, "trials", int, "ensemble.")
    if trials < 1:
        raise ConfigError("ensemble.trials", "must be positive")
    seed = _need(ens, "master_seed", int, "ensemble.")
    fiber = ens.get("fiber")
    if fiber is not None:
        fd = _descriptor(ens, "fiber")
        if fd.cell_count() != m:
            raise ConfigError("ensemble.fiber", f"fiber system has {fd.cell_count()} cells, fiber_size is {m}")
    _cap_check(base.cell_count() * m, "ensemble product")
    selector = _need(doc, "selector", str)
    if selector not in SELECTORS:
        raise ConfigError("selector", f"expected one of {SELECTORS}")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("params", "expected an object")
    if selector in ("a_rigidity", "weak_mixing_phi"):
        params = dict(params, lags=_int_list(_need(params, "lags", (list, dict), "params."), "params.lags"))
    if selector == "hp_blowup" and fiber is None:
        raise ConfigError("ensemble.fiber", "hp_blowup needs a fiber system")
    spec = EnsembleSpec(
        base=str(base),
        fiber_size=m,
        sampler=sampler,
        transpositions=int(ens.get("transpositions", 0)),
        trials=trials,
        master_seed=seed,
        fiber=fiber,
    )
    return {"spec": spec, "selector": selector, "params": params}


def _validate_spectral(doc, base_dir):
    Ns = _int_list(_need(doc, "N_schedule", list), "N_schedule")
    Ps = _int_list(_need(doc, "P_schedule", (list, dict)), "P_schedule")
    if min(Ns) < 1:
        raise ConfigError("N_schedule", "N must be positive")
    if min(Ps) < 3:
        raise ConfigError("P_schedule", "P must be at least 3")
    if "correlation_csv" in doc:
        if "system" in doc:
            raise ConfigError("system", "give either system or correlation_csv, not both")
        path = base_dir / _need(doc, "correlation_csv", str)
        if not path.exists():
            raise ConfigError("correlation_csv", f"file not found: {path}")
        return {"csv": path, "N": Ns, "P": Ps}
    d = _descriptor(doc, "system")
    _cap_check(d.cell_count(), "system")
    s_max = _need(doc, "s_max", int)
    vec = _need(doc, "vector", dict)
    if vec.get("kind") not in ("indicator", "random"):
        raise ConfigError("vector.kind", "expected indicator or random")
    if vec["kind"] == "indicator":
        cells = _int_list(_need(vec, "cells", list, "vector."), "vector.cells")
        if min(cells) < 0 or max(cells) >= d.cell_count():
            raise ConfigError("vector.cells", "cell index out of range")
    else:
        _need(vec, "seed", int, "vector.")
    return {"system": d, "s_max": s_max, "vector": vec, "N": Ns, "P": Ps}


def _validate_triple(doc, base_dir):
    d = _descriptor(doc, "system")
    _cap_check(d.cell_count(), "system")
    cells = _int_list(_need(doc, "set", (list, dict)), "set")
    if min(cells) < 0 or max(cells) >= d.cell_count():
        raise ConfigError("set", "cell index out of range")
    ms = _int_list(_need(doc, "m_range", (list, dict)), "m_range")
    if min(ms) < 1:
        raise ConfigError("m_range", "m must be at least 1")
    return {"system": d, "cells": cells, "m": ms}


_VALIDATORS = {
    "scan": _validate_scan,
    "entropy": _validate_entropy,
    "ensemble": _validate_ensemble,
    "spectral": _validate_spectral,
    "triple": _validate_triple,
}


@dataclass
class Result:
    csv: str
    summary: dict
    plot_header: str
    plot: list


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _run_scan(plan, threads) -> Result:
    t = build(plan["system"])
    fam_doc = plan["family"]
    if fam_doc["kind"] == "canonical":
        fam = canonical_family(t.space, int(fam_doc.get("i_max", 16)))
    else:
        fam = coordinate_family(t, fam_doc.get("coords", [0]), fam_doc.get("symbols"))
    rep = scan_functional(t, fam, plan["N"], plan["j"], plan["functional"], plan["a"], workers=threads)
    summary = rep.summary()
    summary["system"] = str(plan["system"])
    summary["family"] = fam_doc
    rows = [(j, float(v)) for j, v in sorted(rep.values.items())]
    return Result(rep.to_csv(), summary, f"j {plan['functional']}", rows)


def _partition(t, desc, doc):
    kind = doc["kind"]
    if kind == "coordinate":
        return coordinate_partition(t, int(doc.get("coord", 0)))
    if kind == "blocks":
        return block_partition(t.space, int(doc.get("blocks", 2)))
    return random_partition(t.space, int(doc.get("classes", 2)), int(doc.get("seed", 0)))


def _sequence(doc) -> SequenceFamily:
    if doc["kind"] == "progression":
        return SequenceFamily.progression(int(doc["L"]))
    if doc["kind"] == "geometric":
        step = int(doc["step"])
        return SequenceFamily.geometric(lambda j: step * j)
    return SequenceFamily.explicit({int(k): _int_list(v, "sequence.table") for k, v in doc["table"].items()})


def _run_entropy(plan, threads) -> Result:
    t = build(plan["system"])
    xi = _partition(t, plan["system"], plan["partition"])
    fam = _sequence(plan["sequence"])
    rows = []
    for j in plan["j"]:
        lags = fam.lags(j)
        H = partition_entropy(refine(t, xi, lags))
        rows.append((j, len(lags), repr(H), repr(H / len(lags))))
    best = max(rows, key=lambda r: float(r[3]))
    summary = {
        "system": str(plan["system"]),
        "partition": plan["partition"],
        "H_xi": partition_entropy(xi),
        "sequence": plan["sequence"],
        "hp_estimate": float(best[3]),
        "argmax_j": best[0],
        "horizon": max(plan["j"]),
        "note": "maximum of h_j over the scanned j; a lower estimate of the limsup at this horizon",
    }
    csv_text = _csv(["j", "size", "H", "h_j"], rows)
    return Result(csv_text, summary, "j h_j", [(r[0], float(r[3])) for r in rows])


def _run_ensemble(plan, threads) -> Result:
    rep = lift_experiment(plan["spec"], plan["selector"], plan["params"], workers=threads)
    return Result(rep.to_csv(), rep.summary(), "trial value", [(i, float(v)) for i, v in enumerate(rep.values)])


def _run_spectral(plan, threads) -> Result:
    if "csv" in plan:
        corr = CorrelationSequence.from_csv(plan["csv"], source=plan["csv"].name)
        source = plan["csv"].name
    else:
        t = build(plan["system"])
        vec = plan["vector"]
        if vec["kind"] == "indicator":
            f = CellSet.from_members(t.space, vec["cells"]).indicator().normalized()
        else:
            vals = np.random.default_rng(int(vec["seed"])).standard_normal(t.n)
            f = CellFunction(t.space, vals).normalized()
        corr = correlation_sequence(t, f, plan["s_max"])
        source = str(plan["system"])
    verdict = classify_singular(corr, plan["N"], plan["P"])
    rows = []
    for rec in verdict.records:
        for c in rec.tried:
            rows.append((rec.N, c.P, c.d, c.count, c.upper, int(c.certified), repr(c.bound)))
    summary = verdict.to_dict()
    summary["source"] = source
    summary["note"] = (
        "every finite cell system has a purely atomic spectrum, so sufficiently long schedules "
        "end in singular_witnessed for internal systems"
    )
    header = ["N", "P", "d", "count", "upper", "certified", "bound"]
    return Result(_csv(header, rows), summary, "P count", [(r[1], r[3]) for r in rows])


def _run_triple(plan, threads) -> Result:
    t = build(plan["system"])
    a = CellSet.from_members(t.space, plan["cells"])
    rows = []
    for m in plan["m"]:
        fw = triple_correlation(t, a, m, "forward")
        bw = triple_correlation(t, a, m, "backward")
        rows.append((m, str(fw), str(bw), str(fw - bw)))
    summary = {"system": str(plan["system"]), "mu": str(a.measure), "m": plan["m"]}
    return Result(
        _csv(["m", "forward", "backward", "gap"], rows),
        summary,
        "m gap",
        [(r[0], float(Fraction(r[3]))) for r in rows],
    )


_RUNNERS = {
    "scan": _run_scan,
    "entropy": _run_entropy,
    "ensemble": _run_ensemble,
    "spectral": _run_spectral,
    "triple": _run_triple,
}


def execute(plan: dict, threads: int | None = None) -> Result:
    threads = threads or plan["threads"] or default_threads()
    return _RUNNERS[plan["task"]](plan, threads)


def _dat(header: str, rows) -> str:
    lines = [f"# {header}"]
    lines += [" ".join(repr(float(v)) if isinstance(v, float) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def write_outputs(plan: dict, res: Result, threads: int) -> dict:
    """Write all four files atomically: either every file appears or none does."""
    paths = plan["outputs"].paths()
    out_dir = plan["outputs"].directory
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "created": datetime.now(timezone.utc).isoformat(),
        "ergolab_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": threads,
        "cell_cap": get_cell_cap(),
    }
    bodies = {
        ".csv": res.csv,
        ".summary.json": json.dumps(res.summary, indent=2, sort_keys=True, default=str) + "\n",
        ".dat": _dat(res.plot_header, res.plot),
        ".meta.json": json.dumps(meta, indent=2, sort_keys=True) + "\n",
    }
    staged = {}
    try:
        for ext, body in bodies.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".ergolab-")
            with os.fdopen(fd, "w") as fh:
                fh.write(body)
            staged[ext] = tmp
        for ext, tmp in staged.items():
            os.replace(tmp, paths[ext])
    finally:
        for tmp in staged.values():
            if os.path.exists(tmp):
                os.unlink(tmp)
    return paths


def run_config(path, threads: int | None = None) -> dict:
    """Validate, execute and write a config; returns the written paths."""
    from . import cellsys

    doc, base_dir = load_config(path)
    old_cap = cellsys._cell_cap_override
    try:
        if "cell_cap" in doc and isinstance(doc["cell_cap"], int):
            cellsys.set_cell_cap(doc["cell_cap"])
        plan = validate(doc, base_dir)
        threads = threads or plan["threads"] or default_threads()
        res = execute(plan, threads)
        return write_outputs(plan, res, threads)
    finally:
        cellsys.set_cell_cap(old_cap)
