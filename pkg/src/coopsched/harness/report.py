"""CSV / JSON outputs.

Per-slot CSV columns, in this order::

    slot,candidate_count,scheduled_cov,observed_gain,optimal_gain,regret_increment,recall_standalone,recall_cp

Empty cells stand for "not applicable" (no candidate, or recall in the
synthetic environment). Sweep CSV columns::

    policy,beta,window_len,epoch_len,n_seeds,mean_regret,std_regret,mean_gain,std_gain,mean_recall

Every writer validates its input first and writes through a temporary file
that is renamed into place, so a failure never leaves a partial file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from typing import Dict, List, Sequence

import numpy as np

from .. import __version__
from ..env import SLOT_COLUMNS, SlotMetrics
from .config import ExperimentConfig
from .sweep import SweepResult

SWEEP_COLUMNS = ("policy", "beta", "window_len", "epoch_len", "n_seeds", "mean_regret", "std_regret",
                 "mean_gain", "std_gain", "mean_recall")


class EmptyResultsError(ValueError):
    pass


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def slot_csv_text(metrics: Sequence[SlotMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SLOT_COLUMNS)
    for m in metrics:
        w.writerow([_cell(v) for v in m.row()])
    return buf.getvalue()


def write_slot_csv(path, metrics: Sequence[SlotMetrics]) -> None:
    if not metrics:
        raise EmptyResultsError("no slot metrics to write")
    _atomic_write(path, slot_csv_text(metrics))


def read_slot_csv(path) -> List[SlotMetrics]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SLOT_COLUMNS:
            raise ValueError(f"unexpected slot CSV header {header}")
        for row in reader:
            opt = [None if c == "" else c for c in row]
            out.append(SlotMetrics(
                int(opt[0]), int(opt[1]), None if opt[2] is None else int(opt[2]),
                float(opt[3]), float(opt[4]), float(opt[5]),
                None if opt[6] is None else float(opt[6]),
                None if opt[7] is None else float(opt[7]),
            ))
    return out


def aggregate(summaries: Sequence[dict]) -> Dict[str, object]:
    """Mean and sample std of every numeric summary field across seeds."""
    out = {}
    keys = [k for k, v in summaries[0].items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    for k in keys:
        vals = [s[k] for s in summaries if s.get(k) is not None]
        if not vals:
            continue
        out[k] = {"mean": float(np.mean(vals)),
                  "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0}
    return out


def summary_document(config: ExperimentConfig, policy: str, params: dict,
                     per_seed: Dict[int, dict]) -> dict:
    if not per_seed:
        raise EmptyResultsError("no runs to summarize")
    seeds = sorted(per_seed)
    return {
        "version": __version__,
        "config": config.to_dict(),
        "policy": policy,
        "params": dict(params),
        "seeds": seeds,
        "per_seed": {str(s): per_seed[s] for s in seeds},
        "aggregate": aggregate([per_seed[s] for s in seeds]),
    }


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps_summary(doc: dict) -> str:
    # infinity (e.g. mean_lifetime) is kept as the non-standard token Infinity, which json reads back
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_summary_json(path, doc: dict) -> None:
    if not doc or not doc.get("seeds"):
        raise EmptyResultsError("summary has no runs")
    _atomic_write(path, dumps_summary(doc))


def read_summary_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("version", "config", "seeds", "aggregate"):
        if key not in doc:
            raise ValueError(f"summary JSON lacks {key!r}")
    return doc


def sweep_rows(result: SweepResult) -> List[list]:
    rows = []
    for p in result.points:
        rows.append([
            p.policy,
            p.params.get("beta"),
            p.params.get("window_len"),
            p.params.get("epoch_len"),
            len(p.seeds),
            p.mean_regret,
            p.std_regret,
            p.gain,
            p.std_gain,
            p.recall,
        ])
    return rows


def write_sweep_csv(path, result: SweepResult) -> None:
    if result is None or not result.points or not result.points[0].seeds:
        raise EmptyResultsError("sweep has no results")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in sweep_rows(result):
        w.writerow([_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())


def format_table(doc: dict) -> str:
    """Plain-text rendering of a summary document."""
    lines = [f"policy {doc.get('policy')} {doc.get('params')} on {doc['config'].get('env')}, "
             f"seeds {doc['seeds'][0]}..{doc['seeds'][-1]} ({len(doc['seeds'])})"]
    for k, v in sorted(doc["aggregate"].items()):
        lines.append(f"  {k:<24} {v['mean']:.6g} +/- {v['std']:.3g}")
    return "\n".join(lines)
