"""Ingestion and validation of the experimental datasets.

Each dataset is a CSV with a JSON sidecar (same path + ".json") declaring
the schema version, experimental condition, units and provenance.  Exact
CSV headers per condition:

    equilibrium   quantity,value_um,std_um
    stretching    F_ext_pN,D_ax_um,D_tr_um[,std_ax_um,std_tr_um]
    relaxation    t_s,z

Times are converted to internal milliseconds on load.  Seven files are
bundled (1 equilibrium, 2 stretching, 4 relaxation), digitized from the
cited publications; the sidecars record the digitization provenance.
"""

import csv
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import DataError
from .units import SECONDS_TO_MS

SCHEMA_VERSION = 1
CONDITIONS = ("equilibrium", "stretching", "relaxation")

EQUILIBRIUM_QUANTITIES = ("D", "h_min", "h_max")

_HEADERS = {
    "equilibrium": ["quantity", "value_um", "std_um"],
    "stretching": ["F_ext_pN", "D_ax_um", "D_tr_um"],
    "relaxation": ["t_s", "z"],
}

BUNDLED_FILES = (
    "evans1972_equilibrium.csv",
    "mills2004_stretching.csv",
    "suresh2005_stretching.csv",
    "hochmuth1979_relaxation_cell1.csv",
    "hochmuth1979_relaxation_cell2.csv",
    "hochmuth1979_relaxation_cell3.csv",
    "hochmuth1979_relaxation_cell4.csv",
)


@dataclass
class Dataset:
    condition: str
    values: Dict[str, np.ndarray]
    citation: str
    units: Dict[str, str]
    provenance: Dict[str, str] = field(default_factory=dict)
    checksum: str = ""
    name: str = ""

    @property
    def n_rows(self) -> int:
        key = {"equilibrium": "value_um", "stretching": "F_ext_pN",
               "relaxation": "t_ms"}[self.condition]
        return int(self.values[key].size)


def _sha256(*payloads: bytes) -> str:
    h = hashlib.sha256()
    for p in payloads:
        h.update(p)
    return h.hexdigest()


def load_dataset(path) -> Dataset:
    """Load and validate one dataset; raises DataError with row/column
    diagnostics on schema or value violations."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise DataError(f"missing sidecar: {sidecar}")
    meta = json.loads(sidecar.read_text())
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DataError(f"{path}: unsupported schema version {version}")
    condition = meta.get("condition")
    if condition not in CONDITIONS:
        raise DataError(f"{path}: unknown condition {condition!r}")

    csv_bytes = path.read_bytes()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    expected = _HEADERS[condition]
    if condition == "stretching" and len(header) == 5:
        expected = expected + ["std_ax_um", "std_tr_um"]
    if header != expected:
        raise DataError(f"{path}: header {header} != expected {expected}")

    values = _parse_rows(path, condition, header, rows)
    return Dataset(
        condition=condition,
        values=values,
        citation=meta.get("citation", ""),
        units=meta.get("units", {}),
        provenance=meta.get("provenance", {}),
        checksum=_sha256(csv_bytes, sidecar.read_bytes()),
        name=path.stem,
    )


def _parse_rows(path, condition, header, rows) -> Dict[str, np.ndarray]:
    def fail(i, msg):
        raise DataError(f"{path}: row {i + 2}: {msg}")  # +2: header is line 1

    if condition == "equilibrium":
        quantities, vals, stds = [], [], []
        for i, row in enumerate(rows):
            if len(row) != 3:
                fail(i, f"expected 3 columns, got {len(row)}")
            q, v, s = row[0], float(row[1]), float(row[2])
            if q not in EQUILIBRIUM_QUANTITIES:
                fail(i, f"unknown quantity {q!r}")
            if not np.isfinite(v) or v <= 0.0:
                fail(i, f"non-positive value_um {v}")
            if not np.isfinite(s) or s <= 0.0:
                fail(i, f"non-positive std_um {s}")
            quantities.append(q)
            vals.append(v)
            stds.append(s)
        if sorted(quantities) != sorted(EQUILIBRIUM_QUANTITIES):
            raise DataError(f"{path}: needs exactly one row per quantity "
                            f"{EQUILIBRIUM_QUANTITIES}")
        order = [quantities.index(q) for q in EQUILIBRIUM_QUANTITIES]
        return {
            "quantity": np.array(EQUILIBRIUM_QUANTITIES),
            "value_um": np.array(vals)[order],
            "std_um": np.array(stds)[order],
        }

    if condition == "stretching":
        data = np.empty((len(rows), len(header)))
        for i, row in enumerate(rows):
            if len(row) != len(header):
                fail(i, f"expected {len(header)} columns, got {len(row)}")
            for j, cell in enumerate(row):
                data[i, j] = float(cell)
            if not np.all(np.isfinite(data[i])):
                fail(i, "non-finite value")
            if data[i, 0] < 0.0:
                fail(i, f"negative force {data[i, 0]}")
            if data[i, 1] <= 0.0 or data[i, 2] <= 0.0:
                fail(i, "non-positive diameter")
        if np.any(np.diff(data[:, 0]) <= 0.0):
            k = int(np.nonzero(np.diff(data[:, 0]) <= 0.0)[0][0])
            fail(k + 1, "F_ext_pN not strictly increasing")
        out = {"F_ext_pN": data[:, 0], "D_ax_um": data[:, 1], "D_tr_um": data[:, 2]}
        if len(header) == 5:
            if np.any(data[:, 3] <= 0.0) or np.any(data[:, 4] <= 0.0):
                raise DataError(f"{path}: non-positive std column")
            out["std_ax_um"] = data[:, 3]
            out["std_tr_um"] = data[:, 4]
        return out

    # relaxation
    data = np.empty((len(rows), 2))
    for i, row in enumerate(rows):
        if len(row) != 2:
            fail(i, f"expected 2 columns, got {len(row)}")
        data[i] = [float(row[0]), float(row[1])]
        if not np.all(np.isfinite(data[i])):
            fail(i, "non-finite value")
        if data[i, 1] <= 0.0:
            fail(i, f"non-positive ratio z {data[i, 1]}")
    if np.any(np.diff(data[:, 0]) <= 0.0):
        k = int(np.nonzero(np.diff(data[:, 0]) <= 0.0)[0][0])
        fail(k + 1, "t_s not strictly increasing")
    return {"t_ms": data[:, 0] * SECONDS_TO_MS, "z": data[:, 1]}


def save_dataset(dataset: Dataset, path, meta_extra: Optional[dict] = None) -> None:
    """Write a dataset back to CSV + sidecar (times restored to seconds)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if dataset.condition == "equilibrium":
            writer.writerow(_HEADERS["equilibrium"])
            for q, v, s in zip(dataset.values["quantity"],
                               dataset.values["value_um"],
                               dataset.values["std_um"]):
                writer.writerow([q, f"{v:.12g}", f"{s:.12g}"])
        elif dataset.condition == "stretching":
            header = list(_HEADERS["stretching"])
            has_std = "std_ax_um" in dataset.values
            if has_std:
                header += ["std_ax_um", "std_tr_um"]
            writer.writerow(header)
            v = dataset.values
            for i in range(v["F_ext_pN"].size):
                row = [f"{v['F_ext_pN'][i]:.12g}", f"{v['D_ax_um'][i]:.12g}",
                       f"{v['D_tr_um'][i]:.12g}"]
                if has_std:
                    row += [f"{v['std_ax_um'][i]:.12g}", f"{v['std_tr_um'][i]:.12g}"]
                writer.writerow(row)
        else:
            writer.writerow(_HEADERS["relaxation"])
            for t, z in zip(dataset.values["t_ms"], dataset.values["z"]):
                writer.writerow([f"{t / SECONDS_TO_MS:.12g}", f"{z:.12g}"])
    meta = {
        "schema_version": SCHEMA_VERSION,
        "condition": dataset.condition,
        "citation": dataset.citation,
        "units": dataset.units,
        "provenance": dataset.provenance,
    }
    if meta_extra:
        meta.update(meta_extra)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def bundled_dataset_paths() -> List[Path]:
    base = resources.files("rbcmech.data")
    return [Path(str(base / name)) for name in BUNDLED_FILES]


def bundled_datasets() -> List[Dataset]:
    """The seven datasets shipped with the package (1/2/4 by condition)."""
    return [load_dataset(p) for p in bundled_dataset_paths()]
