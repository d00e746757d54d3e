"""Run manifests and posterior-sample file I/O shared by the CLI."""

import csv
import hashlib
import json
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from . import __version__
from .errors import DataError
from .inference.basis import PosteriorSamples


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def normalized_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(normalized_config(config).encode()).hexdigest()


def write_manifest(run_dir: Path, subcommand: str, config: dict,
                   inputs: Sequence[Path], outputs: Sequence[Path]) -> Path:
    """Provenance record: normalized config, package version, file hashes.

    Contains no timestamps, so identical runs produce identical manifests.
    """
    manifest = {
        "subcommand": subcommand,
        "package_version": __version__,
        "config": json.loads(normalized_config(config)),
        "config_hash": config_hash(config),
        "inputs": {str(p): sha256_file(p) for p in sorted(map(Path, inputs))},
        "outputs": {str(p.relative_to(run_dir)): sha256_file(p)
                    for p in sorted(map(Path, outputs))},
    }
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def save_samples(samples: PosteriorSamples, path,
                 extra_meta: Optional[dict] = None) -> None:
    """Posterior samples as CSV (named columns + log densities) + sidecar."""
    path = Path(path)
    names = list(samples.names) if samples.names else [
        f"x{j}" for j in range(samples.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["log_likelihood", "log_prior"])
        for i in range(samples.n):
            row = [f"{x:.12g}" for x in samples.samples[i]]
            row.append(f"{samples.log_likelihood[i]:.12g}")
            row.append(f"{samples.log_prior[i]:.12g}")
            writer.writerow(row)
    meta = {
        "betas": [float(b) for b in samples.betas],
        "log_evidence": float(samples.log_evidence),
        "acceptance_rates": [float(a) for a in samples.acceptance_rates],
        "names": names,
    }
    if extra_meta:
        meta.update(extra_meta)
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n")


def load_samples(path) -> PosteriorSamples:
    path = Path(path)
    if not path.exists():
        raise DataError(f"samples file not found: {path}")
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if header[-2:] != ["log_likelihood", "log_prior"]:
        raise DataError(f"{path}: expected log_likelihood/log_prior columns")
    names = header[:-2]
    data = np.array([[float(x) for x in row] for row in rows])
    if data.size == 0:
        raise DataError(f"{path}: no sample rows")
    return PosteriorSamples(
        samples=data[:, : len(names)],
        log_likelihood=data[:, -2],
        log_prior=data[:, -1],
        betas=meta.get("betas", [0.0, 1.0]),
        log_evidence=meta.get("log_evidence", np.nan),
        acceptance_rates=meta.get("acceptance_rates", []),
        names=names,
    )


def save_bands_csv(bands: Dict, path, channel_names: Optional[Sequence[str]] = None) -> None:
    """Long-format credible-band table: grid, output, level, lo, hi, median."""
    names = channel_names or bands["output_names"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid", "output", "level", "lo", "hi", "median"])
        for gi, g in enumerate(bands["grid"]):
            for ci, cname in enumerate(names):
                for li, level in enumerate(bands["levels"]):
                    writer.writerow([
                        f"{g:.12g}", cname, f"{level:g}",
                        f"{bands['lo'][li, gi, ci]:.12g}",
                        f"{bands['hi'][li, gi, ci]:.12g}",
                        f"{bands['median'][gi, ci]:.12g}",
                    ])
