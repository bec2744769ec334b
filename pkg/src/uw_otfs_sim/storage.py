from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Protocol

import numpy as np

from .ce_operator import CeOperator
from .models import ResultRow, SimulationPlan

if TYPE_CHECKING:
    from . import OtfsSimulatorApp

CSV_COLUMNS = ("system", "ebn0_db", "velocity", "realizations", "ber", "nmse_db", "seed", "wall_time_s")


class ResultStorage(Protocol):
    def write(self, rows: Iterable[ResultRow], plan: SimulationPlan) -> None:
        ...

    def close(self) -> None:
        ...


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvResultStorage:
    def __init__(self, data_file: Path, record_wall_time: bool = True) -> None:
        self.data_file = data_file
        self.record_wall_time = record_wall_time

    def _render(self, rows: Iterable[ResultRow], plan: SimulationPlan, with_header: bool) -> str:
        buffer = io.StringIO()
        header = json.dumps({"plan": plan.to_dict(), "seed": plan.master_seed}, sort_keys=True, ensure_ascii=True)
        buffer.write(f"# {header}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        if with_header:
            writer.writerow(CSV_COLUMNS)
        for row in rows:
            payload = row.to_dict()
            if not self.record_wall_time:
                payload["wall_time_s"] = 0.0
            writer.writerow([_format_value(payload[column]) for column in CSV_COLUMNS])
        return buffer.getvalue()

    def write(self, rows: Iterable[ResultRow], plan: SimulationPlan) -> None:
        self.data_file.parent.mkdir(parents=True, exist_ok=True)

        if self.data_file.exists():
            with self.data_file.open("a", encoding="utf-8", newline="") as handle:
                handle.write(self._render(rows, plan, with_header=False))
            return

        temp_file = self.data_file.with_name(self.data_file.name + ".tmp")
        with temp_file.open("w", encoding="utf-8", newline="") as handle:
            handle.write(self._render(rows, plan, with_header=True))
        temp_file.replace(self.data_file)

    def read(self) -> list[ResultRow]:
        if not self.data_file.exists():
            return []
        with self.data_file.open("r", encoding="utf-8", newline="") as handle:
            lines = [line for line in handle if not line.startswith("#")]
        return [ResultRow.from_dict(entry) for entry in csv.DictReader(lines)]

    def close(self) -> None:
        return None


def content_key(*parts: dict[str, Any]) -> str:
    """SHA-256 over the canonical JSON of the given parameter dicts."""
    canonical = json.dumps(list(parts), sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class OperatorCache:
    def __init__(self, directory: Path, logger: Any = None) -> None:
        self.directory = directory
        self.logger = logger

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.npz"

    def load(self, key: str, operator_type: type[CeOperator]) -> CeOperator | None:
        path = self.path_for(key)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as archive:
                return operator_type.from_arrays({name: archive[name] for name in archive.files})
        except Exception as exc:
            if self.logger is not None:
                self.logger.error(f"Ignoring unreadable operator cache file {path.name} ({exc})")
            return None

    def save(self, key: str, operator: CeOperator) -> None:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            temp_file = self.directory / f"{key}.npz.tmp"
            with temp_file.open("wb") as handle:
                np.savez(handle, **operator.to_arrays())
            temp_file.replace(self.path_for(key))
        except Exception as exc:
            # Cache failures never abort a run.
            if self.logger is not None:
                self.logger.error(f"Failed to write operator cache {key[:12]} ({exc})")


def _resolve_path(app: "OtfsSimulatorApp", key: str, default: str) -> Path:
    configured_path = str(app.get_config(key, default)).strip() or default
    path = Path(configured_path)
    if not path.is_absolute():
        path = Path(app.data_folder) / path
    return path


def create_storage(app: "OtfsSimulatorApp", path: str | Path | None = None) -> ResultStorage:
    csv_path = Path(path) if path is not None else _resolve_path(app, "storage.results-file", "results.csv")
    record_wall_time = bool(app.get_config("storage.record-wall-time", False))
    app.logger.info(f"Using CSV result storage: {csv_path.name}")
    return CsvResultStorage(csv_path, record_wall_time=record_wall_time)


def create_operator_cache(app: "OtfsSimulatorApp") -> OperatorCache | None:
    if not bool(app.get_config("storage.operator-cache", True)):
        app.logger.info("Operator cache disabled")
        return None
    directory = _resolve_path(app, "storage.cache-dir", ".otfs-cache")
    app.logger.info(f"Using operator cache: {directory}")
    return OperatorCache(directory, logger=app.logger)


__all__ = [
    "CSV_COLUMNS",
    "ResultStorage",
    "CsvResultStorage",
    "OperatorCache",
    "content_key",
    "create_storage",
    "create_operator_cache",
]
