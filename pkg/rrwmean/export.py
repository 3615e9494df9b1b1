"""Plot-ready output files and the run manifest that ties them together.

Every number is written with 12 significant digits. JSON documents carry a
``manifest_hash`` field; CSV files start with a ``# manifest_hash=<hash>``
comment line ahead of the header.
"""

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from xxhash import xxh64

from rrwmean import __version__, logger

from .common import ExtendedReal, fmt
from .dp_oracle import CompareReport, DpSolution
from .increments import IncrementModel
from .mc_engine import ExtremeComparison, SimOutcome, TailReport
from .mlp_solver import MostLikelyPath, RateCurve


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any]
    version: str = __version__
    seed: Optional[int] = None
    started: datetime = Field(default_factory=_utcnow)
    finished: Optional[datetime] = None
    outputs: List[str] = []

    @property
    def manifest_hash(self) -> str:
        """Hash of everything except the timestamps."""
        payload = {
            "command": self.command,
            "config": self.config,
            "version": self.version,
            "seed": self.seed,
            "outputs": sorted(self.outputs),
        }
        return xxh64(json.dumps(clean(payload), sort_keys=True, separators=(",", ":"))).hexdigest()

    def write(self, out_dir: Path) -> Path:
        self.finished = _utcnow()
        dest = Path(out_dir) / "manifest.json"
        doc = self.model_dump(mode="json")
        doc["manifest_hash"] = self.manifest_hash
        doc["config"] = clean(self.config)
        dest.write_text(json.dumps(doc, indent=2) + "\n")
        logger.info("Wrote manifest %s (%s)", dest, self.manifest_hash)
        return dest


def clean(obj: Any) -> Any:
    """JSON-safe copy with floats rounded to 12 significant digits and inf as "inf"."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, ExtendedReal):
        return obj.to_json() if obj.is_inf else clean(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return float(f"{x:.12g}")
    if isinstance(obj, Path):
        return str(obj)
    return obj


def to_json(doc: Dict[str, Any], manifest_hash: Optional[str] = None) -> str:
    doc = clean(doc)
    if manifest_hash is not None:
        doc["manifest_hash"] = manifest_hash
    return json.dumps(doc, indent=2) + "\n"


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], manifest_hash: Optional[str] = None) -> str:
    buf = io.StringIO()
    if manifest_hash is not None:
        buf.write(f"# manifest_hash={manifest_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def model_record(model: IncrementModel) -> Dict[str, Any]:
    return model.to_json()


# ---- paths ----


def path_record(path: MostLikelyPath, samples: int) -> Dict[str, Any]:
    t, psi = path.samples(samples)
    return {
        "model": model_record(path.model),
        "z": path.z,
        "t0": path.t0,
        "t00": path.t00,
        "t1": path.t1,
        "jump": path.jump,
        "lambda_star": path.lambda_star,
        "endpoint": path.endpoint,
        "rate": path.rate_value,
        "branch": path.branch,
        "feasible_start": list(path.feasible_start),
        "flat_t00": path.flat_t00,
        "method": "analytic",
        "samples": [{"t": a, "psi": b} for a, b in zip(t, psi)],
    }


def dp_record(model: IncrementModel, solution: DpSolution) -> Dict[str, Any]:
    return {
        "model": model_record(model),
        "z": solution.z,
        "t0": None,
        "t00": None,
        "t1": None,
        "jump": None,
        "lambda_star": None,
        "endpoint": solution.path[-1],
        "rate": solution.cost,
        "area": solution.area,
        "grid": solution.grid.model_dump(),
        "concavity_defect": solution.concavity_defect,
        "terminal_slope": solution.terminal_slope,
        "method": "dp",
        "samples": [{"t": a, "psi": b} for a, b in zip(solution.times, solution.path)],
    }


def path_csv(record: Dict[str, Any], manifest_hash: Optional[str] = None) -> str:
    return to_csv(("t", "psi"), ((s["t"], s["psi"]) for s in record["samples"]), manifest_hash)


def render_path(record: Dict[str, Any], dest: Optional[Path], manifest_hash: Optional[str] = None) -> str:
    """JSON when ``dest`` ends in .json, CSV otherwise."""
    if dest is not None and Path(dest).suffix.lower() == ".json":
        return to_json(record, manifest_hash)
    return path_csv(record, manifest_hash)


# ---- rate curves ----

CURVE_HEADER = ("z", "rate", "t0", "t00", "t1", "jump", "lambda_star", "endpoint", "branch", "error")


def curve_csv(curve: RateCurve, manifest_hash: Optional[str] = None) -> str:
    rows = []
    for p in curve.points:
        s = p.path
        rows.append(
            (
                p.z,
                p.rate_value,
                *(
                    (s.t0, s.t00, s.t1, s.jump, s.lambda_star, s.endpoint, s.branch)
                    if s is not None
                    else (None,) * 6 + ("",)
                ),
                p.error or "",
            )
        )
    return to_csv(CURVE_HEADER, rows, manifest_hash)


def transitions_csv(curve: RateCurve, manifest_hash: Optional[str] = None) -> str:
    return to_csv(
        ("kind", "z_lo", "z_hi", "z_est"),
        ((tr.kind, tr.z_lo, tr.z_hi, tr.z_est) for tr in curve.transitions),
        manifest_hash,
    )


# ---- simulation ----


def outcome_record(outcome: SimOutcome, comparison: Optional[ExtremeComparison] = None) -> Dict[str, Any]:
    cfg = outcome.config
    doc = {
        "model": model_record(cfg.model),
        "n": cfg.n,
        "replications": outcome.replications,
        "seed": cfg.seed,
        "exhaustive": cfg.exhaustive,
        "block_size": cfg.block_size,
        "tail_counts": [tc.model_dump() for tc in outcome.tail_counts],
        "extreme_mean": outcome.extreme_mean,
        "extreme_index": outcome.extreme_index,
        "wbar_mean": outcome.wbar_mean,
        "wbar_var": outcome.wbar_var,
    }
    if outcome.up_step_counts is not None:
        doc["exact_tail_probabilities"] = [
            {
                "r": c.r,
                "lower": str(outcome.exact_tail_probability(c.r, "lower")),
                "upper": str(outcome.exact_tail_probability(c.r, "upper")),
            }
            for c in outcome.up_step_counts
        ]
    if comparison is not None:
        doc["extreme_vs_theory"] = comparison.model_dump()
    return doc


def extreme_path_csv(outcome: SimOutcome, manifest_hash: Optional[str] = None) -> str:
    return to_csv(("k", "W_k"), enumerate(outcome.extreme_path or []), manifest_hash)


TAIL_HEADER = ("n", "r", "side", "count", "R", "log_freq_over_n", "lo", "hi", "censored")


def tail_csv(report: TailReport, manifest_hash: Optional[str] = None) -> str:
    rows = (
        (row.n, row.r, row.side, row.count, row.R, row.log_freq_over_n, row.lo, row.hi, row.censored)
        for row in report.rows
    )
    return to_csv(TAIL_HEADER, rows, manifest_hash)


def compare_record(model: IncrementModel, report: CompareReport) -> Dict[str, Any]:
    return {"model": model_record(model), **report.model_dump()}
