"""Deterministic serialization: canonical JSON, CSV tables, run manifests.

Every artifact that carries numbers is written through this module so that a
fixed seed produces byte-identical files regardless of worker count or
platform. Floats rely on Python's shortest round-trip ``repr``; non-finite
values map to ``null`` in JSON and to ``inf``/``-inf``/``nan`` tokens in CSV.
Wall-clock timestamps appear only in ``manifest.json``, which is excluded
from the byte-determinism contract.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, is_dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "canonical_json",
    "config_hash",
    "write_json",
    "format_csv",
    "write_csv",
    "measure_header",
    "measure_csv",
    "RunManifest",
]


def _clean(obj: Any) -> Any:
    """Recursively coerce to plain JSON types; non-finite floats become None."""
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if is_dataclass(obj) and not isinstance(obj, type):
        return _clean(asdict(obj))
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [_clean(v) for v in items]
    raise TypeError(f"cannot serialize value of type {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Stable-key, UTF-8 JSON text with shortest round-trip numbers."""
    return json.dumps(_clean(obj), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def config_hash(config: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a configuration mapping."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(canonical_json(obj), encoding="utf-8")
    return path


def _cell(v: Any) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    """Header row, unquoted numerics, '.' decimal, '\\n' line terminators."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path = Path(path)
    path.write_text(format_csv(header, rows), encoding="utf-8", newline="")
    return path


def measure_header(measure, config: Mapping[str, Any]) -> dict:
    """JSON header for an exit-measure table: pole, seed, masses, config hash."""
    return {
        "pole": {"x": list(measure.pole.x), "t": measure.pole.t},
        "seed": measure.seed,
        "n_paths": measure.n_paths,
        "masses": {
            "boundary": measure.mass_boundary,
            "infinity": measure.mass_infinity,
            "truncated": measure.mass_truncated,
            "budget": measure.mass_budget,
        },
        "boundary_tol": measure.boundary_tol,
        "flagged": measure.flagged,
        "config_hash": config_hash(config),
    }


def measure_csv(measure) -> str:
    """Hit-cloud table with columns ``x0..x{n-1}, t, weight``."""
    n = measure.hits_x.shape[1] if measure.count_boundary else len(measure.pole.x)
    header = [f"x{i}" for i in range(n)] + ["t", "weight"]
    rows = [
        list(measure.hits_x[i]) + [measure.hits_t[i], measure.weights[i]]
        for i in range(measure.count_boundary)
    ]
    return format_csv(header, rows)


@dataclass(frozen=True)
class RunManifest:
    """Provenance record for one CLI run.

    The hash covers every input that affects numbers; the timestamp is
    informational only and lives solely in this manifest.
    """

    command: str
    config_hash: str
    seed: int | None
    tool_version: str
    created_utc: str
    outputs: tuple[str, ...]

    @staticmethod
    def create(
        command: str, config: Mapping[str, Any], seed: int | None, version: str, outputs: Sequence[str]
    ) -> "RunManifest":
        return RunManifest(
            command=command,
            config_hash=config_hash(config),
            seed=seed,
            tool_version=version,
            created_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            outputs=tuple(str(o) for o in outputs),
        )

    def write(self, out_dir: str | Path) -> Path:
        return write_json(Path(out_dir) / "manifest.json", asdict(self))
