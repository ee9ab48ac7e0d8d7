import csv
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from src.harness.schemas import ConvergenceReport, ScenarioConfig
from src.logger import get_logger
from src.scattering.schemas import FieldObservation

logger = get_logger()

MANIFEST_NAME = "manifest.json"


def write_csv(path: Path, rows: Iterable[dict[str, Any]], fields: list[str] | None = None) -> Path:
    rows = list(rows)
    fields = fields or (list(rows[0]) if rows else [])
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def write_convergence(directory: Path, report: ConvergenceReport) -> Path:
    rows = [
        {"parameter": row.parameter, "error": f"{row.error:.16e}", "order": "" if row.order is None else f"{row.order:.6f}"}
        for row in report.rows
    ]
    return write_csv(directory / f"{report.study}.csv", rows, ["parameter", "error", "order"])


def write_observation(path: Path, observation: FieldObservation) -> Path:
    rows = []
    for n, t in enumerate(observation.times):
        for p, point in enumerate(observation.points):
            row = {"time": f"{t:.12g}", "x": point[0], "y": point[1], "z": point[2]}
            for label, field in (("E", observation.electric), ("H", observation.magnetic)):
                for axis, value in zip("xyz", field[n, p]):
                    row[f"{label}{axis}"] = f"{value:.16e}"
            rows.append(row)
    return write_csv(path, rows)


def write_manifest(directory: Path, study: str, outputs: list[Path], config: ScenarioConfig) -> Path:
    """Record outputs and the resolved config; entries from earlier studies in the same directory are kept."""
    path = directory / MANIFEST_NAME
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {"studies": {}}
    manifest["studies"][study] = {
        "outputs": sorted(str(output.relative_to(directory)) for output in outputs),
        "config": config.model_dump(mode="json"),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


class ReferenceCache:
    """Content-addressed store of field observations keyed by the resolved run config."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    def load(self, key: str) -> FieldObservation | None:
        path = self.path(key)
        if not path.exists():
            return None
        with np.load(path) as archive:
            logger.info(f"Reference {key[:12]} loaded from cache")
            return FieldObservation(**{name: archive[name] for name in archive.files})

    def store(self, key: str, observation: FieldObservation) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        np.savez(
            self.path(key),
            points=observation.points,
            distances=observation.distances,
            times=observation.times,
            electric=observation.electric,
            magnetic=observation.magnetic,
        )
