"""Training-table generation: one simulation chain per design row."""

import csv
import logging
import multiprocessing as mp
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .. import protocols
from ..errors import DataError, RbcmechError
from ..membrane import MembraneParams
from .design import DesignMatrix, THETA_NAMES

logger = logging.getLogger(__name__)

OUTPUT_COLUMNS = {
    "equilibrium": ("D_um", "h_min_um", "h_max_um"),
    "stretching": ("D_ax_um", "D_tr_um"),
    "relaxation": ("t_c_ms",),
    "all": ("D_um", "h_min_um", "h_max_um", "D_ax_um", "D_tr_um", "t_c_ms"),
}

INPUT_HEADER = {
    "v": "v",
    "mu": "mu_uN_per_m",
    "kappa_b": "kappa_b_1e19J",
    "b2": "b2",
    "eta_m": "eta_m_Pa_s_um",
    "F_ext": "F_ext_pN",
}

MIN_SUCCESS_RATE = 0.9


@dataclass
class TrainingTable:
    """Design inputs with simulated observables; failed rows flagged."""

    kind: str
    columns: Tuple[str, ...]     # input column names (design order)
    inputs: np.ndarray           # (n, n_in)
    output_names: Tuple[str, ...]
    outputs: np.ndarray          # (n, n_out), NaN on failed rows
    ok: np.ndarray               # (n,) bool
    mesh_level: int
    seed: int
    bounds: Optional[dict] = None  # design bounds per input column

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def success_rate(self) -> float:
        return float(self.ok.mean()) if self.n else 1.0

    def usable(self):
        """Input/output matrices of the successful rows only."""
        return self.inputs[self.ok], self.outputs[self.ok]


def _evaluate_row(args):
    index, values, columns, kind, mesh_level = args
    row = dict(zip(columns, values))
    f_ext = row.get("F_ext", np.nan)
    try:
        params = MembraneParams(**{k: row[k] for k in THETA_NAMES})
        obs = protocols.run_pipeline(params, kind, F_ext=f_ext, mesh_level=mesh_level)
        out = {
            "D_um": obs.D, "h_min_um": obs.h_min, "h_max_um": obs.h_max,
            "D_ax_um": obs.D_ax, "D_tr_um": obs.D_tr, "t_c_ms": obs.t_c,
        }
        return index, out, ""
    except (RbcmechError, ValueError) as exc:
        return index, None, f"{type(exc).__name__}: {exc}"


def build_training_table(design: DesignMatrix, experiment_kind: str,
                         parallelism: int = 1, mesh_level: int = 2,
                         progress_every: int = 0,
                         min_success_rate: float = MIN_SUCCESS_RATE) -> TrainingTable:
    """Run the simulation chain for every design row.

    Row evaluations are pure functions, so results are bit-identical for any
    ``parallelism``; failures are flagged, and an overall success rate below
    90% aborts with diagnostics.
    """
    if experiment_kind not in OUTPUT_COLUMNS:
        raise ValueError(f"unknown experiment kind: {experiment_kind}")
    if experiment_kind in ("stretching", "all") and "F_ext" not in design.columns:
        raise ValueError(f"{experiment_kind} table needs an F_ext design column")
    out_names = OUTPUT_COLUMNS[experiment_kind]
    n = design.n
    outputs = np.full((n, len(out_names)), np.nan)
    ok = np.zeros(n, dtype=bool)
    messages = {}

    tasks = [
        (i, tuple(design.rows[i]), design.columns, experiment_kind, mesh_level)
        for i in range(n)
    ]
    if parallelism > 1 and n > 1:
        # fork: children inherit the compiled kernels and never re-import
        # __main__ (POSIX-only, which is this package's target)
        with mp.get_context("fork").Pool(processes=parallelism) as pool:
            results = pool.imap_unordered(_evaluate_row, tasks, chunksize=4)
            results = _collect(results, outputs, out_names, ok, messages,
                               progress_every, n)
    else:
        results = _collect(map(_evaluate_row, tasks), outputs, out_names, ok,
                           messages, progress_every, n)

    table = TrainingTable(
        kind=experiment_kind, columns=design.columns, inputs=design.rows.copy(),
        output_names=out_names, outputs=outputs, ok=ok,
        mesh_level=mesh_level, seed=design.seed,
        bounds={c: list(design.bounds[c]) for c in design.columns},
    )
    if n > 0 and table.success_rate < min_success_rate:
        examples = "; ".join(f"row {i}: {m}" for i, m in list(messages.items())[:5])
        raise DataError(
            f"sweep success rate {table.success_rate:.1%} < {min_success_rate:.0%} "
            f"({len(messages)} failures; first: {examples})"
        )
    return table


def _collect(results, outputs, out_names, ok, messages, progress_every, n):
    done = 0
    for index, out, message in results:
        if out is not None:
            outputs[index] = [out[name] for name in out_names]
            ok[index] = True
        else:
            messages[index] = message
            logger.warning("sweep row %d failed: %s", index, message)
        done += 1
        if progress_every and done % progress_every == 0:
            logger.info("sweep progress: %d / %d rows", done, n)
    return None


def condition_table(table: TrainingTable, condition: str) -> TrainingTable:
    """Project a combined 'all' sweep onto one condition.

    Keeps the five parameter inputs (plus F_ext for stretching) and the
    condition's output channels; rows with non-finite outputs are dropped
    from the usable set.
    """
    if condition not in ("equilibrium", "stretching", "relaxation"):
        raise ValueError(f"unknown condition {condition}")
    if table.kind == condition:
        return table
    if table.kind != "all":
        raise ValueError(f"cannot project a {table.kind!r} table onto {condition!r}")
    in_cols = list(THETA_NAMES) + (["F_ext"] if condition == "stretching" else [])
    in_idx = [table.columns.index(c) for c in in_cols]
    out_names = OUTPUT_COLUMNS[condition]
    out_idx = [table.output_names.index(c) for c in out_names]
    outputs = table.outputs[:, out_idx]
    ok = table.ok & np.all(np.isfinite(outputs), axis=1)
    bounds = None
    if table.bounds:
        bounds = {c: table.bounds[c] for c in in_cols}
    return TrainingTable(
        kind=condition, columns=tuple(in_cols), inputs=table.inputs[:, in_idx].copy(),
        output_names=out_names, outputs=outputs.copy(), ok=ok,
        mesh_level=table.mesh_level, seed=table.seed, bounds=bounds,
    )


def save_table(table: TrainingTable, path) -> None:
    """Write the table as CSV with unit-annotated headers."""
    path = Path(path)
    in_header = [INPUT_HEADER.get(c, c) for c in table.columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", *in_header, *table.output_names, "status", "message"])
        for i in range(table.n):
            row = [i]
            row.extend(f"{x:.17g}" for x in table.inputs[i])
            row.extend("" if np.isnan(x) else f"{x:.17g}" for x in table.outputs[i])
            row.append("ok" if table.ok[i] else "failed")
            row.append("")
            writer.writerow(row)
    meta = {
        "kind": table.kind, "mesh_level": table.mesh_level, "seed": table.seed,
        "columns": list(table.columns), "output_names": list(table.output_names),
        "bounds": table.bounds,
    }
    Path(str(path) + ".json").write_text(_json_dumps(meta))


def load_table(path) -> TrainingTable:
    path = Path(path)
    meta_path = Path(str(path) + ".json")
    if not path.exists() or not meta_path.exists():
        raise DataError(f"table files not found: {path}(.json)")
    import json

    meta = json.loads(meta_path.read_text())
    columns = tuple(meta["columns"])
    out_names = tuple(meta["output_names"])
    inputs, outputs, ok = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["index", *[INPUT_HEADER.get(c, c) for c in columns],
                    *out_names, "status", "message"]
        if header != expected:
            raise DataError(f"{path}: header mismatch: {header} != {expected}")
        for row in reader:
            inputs.append([float(x) for x in row[1 : 1 + len(columns)]])
            raw = row[1 + len(columns) : 1 + len(columns) + len(out_names)]
            outputs.append([float(x) if x else np.nan for x in raw])
            ok.append(row[1 + len(columns) + len(out_names)] == "ok")
    return TrainingTable(
        kind=meta["kind"], columns=columns,
        inputs=np.array(inputs, dtype=float).reshape(len(ok), len(columns)),
        output_names=out_names,
        outputs=np.array(outputs, dtype=float).reshape(len(ok), len(out_names)),
        ok=np.array(ok, dtype=bool),
        mesh_level=meta["mesh_level"], seed=meta["seed"],
        bounds=meta.get("bounds"),
    )


def _json_dumps(obj) -> str:
    import json

    return json.dumps(obj, indent=2, sort_keys=True)
