"""Command-line pipeline orchestration.

Subcommands: sfs, simulate, sweep, train, infer, predict, sensitivity,
report, plot-data.  Each run writes its artifacts plus a manifest
(normalized config, package version, input/output hashes) into a run
directory named by the config hash, so identical configs and seeds
reproduce identical artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 data error.  RBCMECH_WORKERS overrides the worker count.
"""

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import protocols
from .artifacts import (
    config_hash,
    load_samples,
    save_bands_csv,
    save_samples,
    sha256_file,
    write_manifest,
)
from .datasets import bundled_dataset_paths, load_dataset
from .errors import ConfigError, DataError, RbcmechError
from .geometry import geometry_summary, read_mesh, write_mesh
from .inference import (
    HierarchicalOptions,
    PriorSpec,
    infer_hierarchical,
    inert_mask,
    posterior_summary,
    predictive_bands,
    sobol_sensitivity,
)
from .membrane import MembraneParams
from .surrogate import (
    SurrogateModel,
    build_training_table,
    load_table,
    sample_design,
    save_table,
    surrogate_predict,
    train_mlp,
    validate_surrogate,
)
from .surrogate.design import DESIGN_BOUNDS, THETA_NAMES
from .surrogate.mlp import subset_table, train_val_split
from .surrogate.table import condition_table

WORKERS_ENV = "RBCMECH_WORKERS"

# Reduced budgets for desk-scale runs; flags/config override.
DESK_PRESET = {
    "sweep": {"n": 5000, "mesh_level": 2, "kind": "all", "seed": 20240810},
    "train": {"split_seed": 7, "max_epochs": 2000, "patience": 50},
    "infer": {"population": 2048, "target_cov": 1.0, "chain_multiplier": 1,
              "seed": 11},
    "sensitivity": {"n": 4096, "seed": 3},
    "predict": {"levels": [0.5, 0.75, 0.9, 0.99], "seed": 5},
}

CONDITIONS = ("equilibrium", "stretching", "relaxation")


def _load_config_file(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        return json.loads(path.read_text())
    if path.suffix == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    raise ConfigError(f"unsupported config format: {path.suffix} (.toml or .json)")


def _merge_config(subcommand: str, args) -> dict:
    config = {}
    if args.preset == "desk":
        config.update(DESK_PRESET.get(subcommand, {}))
    elif args.preset is not None:
        raise ConfigError(f"unknown preset {args.preset!r}")
    if args.config is not None:
        config.update(_load_config_file(Path(args.config)))
    for key, value in vars(args).items():
        if key in ("command", "config", "preset", "out") or value is None:
            continue
        config[key] = value
    workers = os.environ.get(WORKERS_ENV)
    if workers is not None:
        try:
            config["parallelism"] = int(workers)
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc
    return config


def _require(config: dict, key: str, kind=None):
    if key not in config:
        raise ConfigError(f"missing required config key: {key!r}")
    value = config[key]
    if kind is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return value


def _run_dir(args, subcommand: str, config: dict) -> Path:
    base = Path(args.out) if args.out else Path("runs") / (
        f"{subcommand}-{config_hash(config)[:12]}")
    base.mkdir(parents=True, exist_ok=True)
    return base


def _params_from_config(config: dict) -> MembraneParams:
    p = _require(config, "params", dict)
    missing = [k for k in THETA_NAMES if k not in p]
    if missing:
        raise ConfigError(f"params block missing {missing}")
    try:
        return MembraneParams(**{k: float(p[k]) for k in THETA_NAMES})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --------------------------------------------------------------------------
# subcommand implementations; each returns (inputs, outputs)

def _cmd_sfs(config, run_dir):
    v = _require(config, "v", float)
    level = int(config.get("mesh_level", 3))
    mesh = protocols.generate_sfs(v, mesh_level=level)
    mesh_path = run_dir / "sfs.ply"
    write_mesh(mesh, mesh_path)
    summary = geometry_summary(mesh)
    metrics = protocols.shape_metrics(mesh)
    (run_dir / "metrics.json").write_text(json.dumps({
        "v_target": v, "mesh_level": level,
        "area_um2": summary["area"], "volume_um3": summary["volume"],
        "reduced_volume": summary["reduced_volume"],
        "D_um": metrics.D, "h_min_um": metrics.h_min, "h_max_um": metrics.h_max,
    }, indent=2) + "\n")
    prof_path = run_dir / "profile.csv"
    r, z_top, z_bot = _cross_section(mesh)
    _write_profile_csv(prof_path, r, z_top, z_bot)
    from . import plots
    fig_path = plots.profile_figure(r, z_top, z_bot, run_dir / "profile.png",
                                    title=f"v = {v:g}")
    return [], [mesh_path, run_dir / "metrics.json", prof_path, fig_path]


def _cross_section(mesh, bins: int = 48):
    pts = np.vstack([mesh.vertices, mesh.vertices[mesh.faces].mean(axis=1)])
    center = pts.mean(axis=0)
    pts = pts - center
    rho = np.hypot(pts[:, 0], pts[:, 1])
    z = pts[:, 2]
    edges = np.linspace(0.0, rho.max() * (1 + 1e-9), bins + 1)
    idx = np.digitize(rho, edges) - 1
    r, z_top, z_bot = [], [], []
    for b in range(bins):
        sel = idx == b
        if not np.any(sel):
            continue
        r.append(0.5 * (edges[b] + edges[b + 1]))
        z_top.append(z[sel].max())
        z_bot.append(z[sel].min())
    return np.array(r), np.array(z_top), np.array(z_bot)


def _write_profile_csv(path, r, z_top, z_bot):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["r_um", "z_top_um", "z_bot_um"])
        for vals in zip(r, z_top, z_bot):
            writer.writerow([f"{x:.8g}" for x in vals])


def _cmd_simulate(config, run_dir):
    kind = _require(config, "kind", str)
    if kind not in CONDITIONS and kind != "all":
        raise ConfigError(f"kind must be one of {CONDITIONS + ('all',)}")
    params = _params_from_config(config)
    level = int(config.get("mesh_level", 3))
    f_ext = float(config.get("F_ext", np.nan))
    outputs = []
    obs = {"kind": kind, "params": json.loads(params.to_json()),
           "mesh_level": level}
    eq = protocols.equilibrate(params, mesh_level=level)
    if kind in ("equilibrium", "all"):
        obs.update({"D_um": eq.metrics.D, "h_min_um": eq.metrics.h_min,
                    "h_max_um": eq.metrics.h_max})
        mesh_path = run_dir / "equilibrium.ply"
        write_mesh(eq.mesh, mesh_path)
        outputs.append(mesh_path)
    if kind in ("stretching", "all"):
        if not np.isfinite(f_ext):
            raise ConfigError("stretching simulation needs F_ext")
        st = protocols.stretch(params, f_ext, base=eq, mesh_level=level)
        obs.update({"F_ext_pN": f_ext, "D_ax_um": st.D_ax, "D_tr_um": st.D_tr})
    if kind in ("relaxation", "all"):
        pre = protocols.stretch(params, float(config.get("prestretch_pN", 120.0)),
                                base=eq, mesh_level=level)
        rx = protocols.relax(params, base=pre, mesh_level=level)
        obs.update({"t_c_ms": rx.fit.t_c, "z0": rx.fit.z0, "z_inf": rx.fit.z_inf,
                    "fit_rms": rx.fit.rms})
        series_path = run_dir / "relax_series.csv"
        with open(series_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_ms", "z"])
            for t, z in zip(rx.times, rx.z):
                writer.writerow([f"{t:.8g}", f"{z:.8g}"])
        outputs.append(series_path)
        from . import plots
        outputs.append(plots.series_figure(
            rx.times, rx.z, {"t_c": rx.fit.t_c, "z0": rx.fit.z0,
                             "z_inf": rx.fit.z_inf}, run_dir / "relax_series.png"))
    obs_path = run_dir / "observables.json"
    obs_path.write_text(json.dumps(obs, indent=2) + "\n")
    outputs.append(obs_path)
    return [], outputs


def _cmd_sweep(config, run_dir):
    n = _require(config, "n", int)
    seed = _require(config, "seed", int)
    kind = config.get("kind", "all")
    level = int(config.get("mesh_level", 2))
    parallelism = int(config.get("parallelism", 1))
    design = sample_design(n, seed=seed, with_force=kind in ("stretching", "all"))
    table = build_training_table(design, kind, parallelism=parallelism,
                                 mesh_level=level, progress_every=100)
    table_path = run_dir / "table.csv"
    save_table(table, table_path)
    return [], [table_path, Path(str(table_path) + ".json")]


def _cmd_train(config, run_dir):
    table_path = Path(_require(config, "table", str))
    table = load_table(table_path)
    conditions = config.get("conditions", list(CONDITIONS))
    split_seed = int(config.get("split_seed", 7))
    outputs = []
    for cond in conditions:
        sub = condition_table(table, cond)
        model = train_mlp(sub, split_seed=split_seed,
                          max_epochs=int(config.get("max_epochs", 2000)),
                          patience=int(config.get("patience", 50)))
        model_path = run_dir / f"surrogate_{cond}.json"
        model.save(model_path)
        _, val_idx = train_val_split(sub, split_seed)
        report = validate_surrogate(model, subset_table(sub, val_idx))
        report_path = run_dir / f"validation_{cond}.json"
        report_path.write_text(json.dumps(report, indent=2) + "\n")
        outputs += [model_path, report_path]
    return [table_path, Path(str(table_path) + ".json")], outputs


def _load_surrogates(config) -> dict:
    spec = _require(config, "surrogates", dict)
    out = {}
    for cond, path in spec.items():
        if cond not in CONDITIONS:
            raise ConfigError(f"unknown condition {cond!r} in surrogates map")
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"surrogate file not found: {p}")
        out[cond] = SurrogateModel.load(p)
    return out


def _cmd_infer(config, run_dir):
    surrogates = _load_surrogates(config)
    if sorted(surrogates) != sorted(CONDITIONS):
        raise ConfigError(f"surrogates map must cover {CONDITIONS}")
    ds_spec = config.get("datasets", "bundled")
    if ds_spec == "bundled":
        paths = bundled_dataset_paths()
    else:
        base = Path(ds_spec)
        if not base.is_dir():
            raise ConfigError(f"datasets must be 'bundled' or a directory: {base}")
        paths = sorted(base.glob("*.csv"))
        paths = [p for p in paths if not p.name.endswith(".csv.json")]
    datasets = [load_dataset(p) for p in paths]
    prior = PriorSpec(parameter_bounds={k: DESIGN_BOUNDS[k] for k in THETA_NAMES})
    opts = HierarchicalOptions(
        population=int(config.get("population", 2048)),
        target_cov=float(config.get("target_cov", 1.0)),
        chain_multiplier=int(config.get("chain_multiplier", 1)),
        seed=int(_require(config, "seed", int)),
    )
    result = infer_hierarchical(datasets, surrogates, prior, opts)

    outputs = []
    for i, (ds, res, model) in enumerate(zip(datasets, result.per_dataset,
                                             result.models)):
        path = run_dir / f"dataset_{i}_{ds.name}_samples.csv"
        frozen = {name: float(model.parameter_prior.midpoint()[j])
                  for j, name in enumerate(THETA_NAMES) if name not in model.active}
        save_samples(res, path, extra_meta={
            "condition": ds.condition, "dataset": ds.name,
            "dataset_checksum": ds.checksum, "frozen_parameters": frozen,
        })
        outputs += [path, Path(str(path) + ".json")]
    psi_path = run_dir / "psi_samples.csv"
    save_samples(result.psi, psi_path)
    new_path = run_dir / "theta_new_samples.csv"
    save_samples(result.theta_new, new_path)
    outputs += [psi_path, Path(str(psi_path) + ".json"),
                new_path, Path(str(new_path) + ".json")]

    summary = posterior_summary(result.theta_new)
    summary_path = run_dir / "summary.csv"
    _write_summary_csv(summary, summary_path)
    outputs.append(summary_path)
    return list(paths) + [Path(str(p) + ".json") for p in paths], outputs


def _write_summary_csv(summary, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "mean", "median", "ML", "MAP", "std"])
        for row in summary.rows():
            writer.writerow([row["parameter"], f"{row['mean']:.6g}",
                             f"{row['median']:.6g}", f"{row['ML']:.6g}",
                             f"{row['MAP']:.6g}", f"{row['std']:.6g}"])


def _cmd_predict(config, run_dir):
    samples_path = Path(_require(config, "samples", str))
    samples = load_samples(samples_path)
    surrogate = SurrogateModel.load(Path(_require(config, "surrogate", str)))
    meta = {}
    meta_path = Path(str(samples_path) + ".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())

    needed = [n for n in surrogate.input_names if n != "F_ext"]
    frozen = meta.get("frozen_parameters", {})
    cols = []
    for name in needed:
        if samples.names and name in samples.names:
            cols.append(samples.samples[:, list(samples.names).index(name)])
        elif name in frozen:
            cols.append(np.full(samples.n, float(frozen[name])))
        else:
            raise ConfigError(f"sample file lacks column {name!r} and no frozen value")
    theta = np.column_stack(cols)

    sigma = None
    sig_col = config.get("sigma_column", "log10_sigma")
    if samples.names and sig_col in samples.names:
        sigma = 10.0 ** samples.samples[:, list(samples.names).index(sig_col)]

    grid = None
    if "F_ext" in surrogate.input_names:
        g = config.get("grid", {"start": 0.0, "stop": 200.0, "num": 21})
        if isinstance(g, dict):
            grid = np.linspace(float(g["start"]), float(g["stop"]), int(g["num"]))
        else:
            grid = np.asarray(g, dtype=float)
    levels = config.get("levels", [0.5, 0.75, 0.9, 0.99])
    bands = predictive_bands(theta, surrogate, grid=grid, levels=levels,
                             sigma_samples=sigma,
                             seed=int(config.get("seed", 5)))
    bands_path = run_dir / "bands.csv"
    save_bands_csv(bands, bands_path)

    overlay = None
    inputs = [samples_path, Path(_require(config, "surrogate", str))]
    if "dataset" in config:
        ds = load_dataset(Path(config["dataset"]))
        inputs += [Path(config["dataset"]), Path(str(config["dataset"]) + ".json")]
        if ds.condition == "stretching":
            overlay = {
                "D_ax_um": (ds.values["F_ext_pN"], ds.values["D_ax_um"],
                            ds.values.get("std_ax_um")),
                "D_tr_um": (ds.values["F_ext_pN"], ds.values["D_tr_um"],
                            ds.values.get("std_tr_um")),
            }
    from . import plots
    fig_path = plots.band_figure(bands, run_dir / "bands.png", data=overlay)
    return inputs, [bands_path, fig_path]


def _cmd_sensitivity(config, run_dir):
    sur_path = Path(_require(config, "surrogate", str))
    surrogate = SurrogateModel.load(sur_path)
    n = int(config.get("n", 4096))
    seed = int(config.get("seed", 3))
    bounds = list(zip(surrogate.input_low, surrogate.input_high))

    def fn(x):
        y, _ = surrogate_predict(surrogate, x, warn_extrapolation=False)
        return y

    result = sobol_sensitivity(fn, bounds, n=n, seed=seed)
    s1 = np.atleast_2d(result["S1"].T).T
    st = np.atleast_2d(result["ST"].T).T
    csv_path = run_dir / "sobol.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["input", "output", "S1", "ST"])
        for i, iname in enumerate(surrogate.input_names):
            for j, oname in enumerate(surrogate.output_names):
                writer.writerow([iname, oname, f"{s1[i, j]:.6g}", f"{st[i, j]:.6g}"])
    theta_rows = [i for i, n_ in enumerate(surrogate.input_names)
                  if n_ in THETA_NAMES]
    mask = inert_mask(st[theta_rows], [surrogate.input_names[i] for i in theta_rows])
    mask_path = run_dir / "inert_mask.json"
    mask_path.write_text(json.dumps({"inert": mask, "n": n, "seed": seed},
                                    indent=2) + "\n")
    return [sur_path], [csv_path, mask_path]


def _cmd_report(config, run_dir):
    samples_path = Path(_require(config, "samples", str))
    samples = load_samples(samples_path)
    summary = posterior_summary(samples)
    report_path = run_dir / "report.csv"
    _write_summary_csv(summary, report_path)
    from . import plots
    fig_path = plots.posterior_histograms(
        samples.samples, list(summary.names), run_dir / "posterior.png")
    return [samples_path], [report_path, fig_path]


def _cmd_plot_data(config, run_dir):
    kind = _require(config, "kind", str)
    artifact = Path(_require(config, "artifact", str))
    if not artifact.exists():
        raise ConfigError(f"artifact not found: {artifact}")
    out_path = run_dir / "plot_data.csv"
    if kind == "sfs-profile":
        mesh = read_mesh(artifact)
        r, z_top, z_bot = _cross_section(mesh)
        _write_profile_csv(out_path, r, z_top, z_bot)
    elif kind == "posterior-hist":
        samples = load_samples(artifact)
        names = list(samples.names)
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "bin_lo", "bin_hi", "count"])
            for j, name in enumerate(names):
                counts, edges = np.histogram(samples.samples[:, j], bins=40)
                for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
                    writer.writerow([name, f"{lo:.8g}", f"{hi:.8g}", int(c)])
    elif kind == "bands":
        text = artifact.read_text()
        out_path.write_text(text)
    else:
        raise ConfigError(f"unknown plot-data kind {kind!r}")
    return [artifact], [out_path]


_COMMANDS = {
    "sfs": _cmd_sfs,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "train": _cmd_train,
    "infer": _cmd_infer,
    "predict": _cmd_predict,
    "sensitivity": _cmd_sensitivity,
    "report": _cmd_report,
    "plot-data": _cmd_plot_data,
}


def run(subcommand: str, config: dict, out: str = None) -> int:
    """Execute one subcommand; returns the process exit code."""

    class _Args:
        pass

    args = _Args()
    args.out = out
    try:
        if subcommand not in _COMMANDS:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
        run_dir = Path(out) if out else Path("runs") / (
            f"{subcommand}-{config_hash(config)[:12]}")
        run_dir.mkdir(parents=True, exist_ok=True)
        inputs, outputs = _COMMANDS[subcommand](config, run_dir)
        write_manifest(run_dir, subcommand, config, inputs, outputs)
        return 0
    except ConfigError as exc:
        _emit_error("config", exc)
        return 2
    except DataError as exc:
        _emit_error("data", exc)
        return 4
    except (RbcmechError, ValueError, np.linalg.LinAlgError) as exc:
        _emit_error("numerical", exc)
        return 3


def _emit_error(kind: str, exc: Exception) -> None:
    sys.stderr.write(json.dumps({
        "error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbcmech",
        description="Membrane-mechanics simulation and Bayesian calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, flags=()):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="TOML or JSON config file")
        p.add_argument("--preset", help="configuration preset (desk)")
        p.add_argument("--out", help="run directory (default: runs/<cmd>-<hash>)")
        for flag, kind, help2 in flags:
            p.add_argument(f"--{flag}", type=kind, help=help2)
        return p

    add("sfs", "generate a stress-free-state mesh",
        [("v", float, "reduced volume"), ("mesh_level", int, "icosphere level")])
    add("simulate", "run one experiment chain",
        [("kind", str, "equilibrium|stretching|relaxation|all"),
         ("F_ext", float, "stretching force (pN)"),
         ("mesh_level", int, "icosphere level")])
    add("sweep", "build a training table",
        [("n", int, "number of design rows"), ("seed", int, "design seed"),
         ("kind", str, "experiment kind"), ("mesh_level", int, "icosphere level"),
         ("parallelism", int, "worker processes")])
    add("train", "train surrogates from a table",
        [("table", str, "table CSV path"), ("split_seed", int, "split seed"),
         ("max_epochs", int, "epoch cap"), ("patience", int, "early stopping")])
    add("infer", "hierarchical Bayesian calibration",
        [("seed", int, "sampler seed"), ("population", int, "BASIS population"),
         ("target_cov", float, "weight-COV target"),
         ("chain_multiplier", int, "chain steps per record")])
    add("predict", "posterior-predictive bands",
        [("samples", str, "posterior samples CSV"),
         ("surrogate", str, "surrogate JSON"),
         ("dataset", str, "dataset CSV to overlay"), ("seed", int, "noise seed")])
    add("sensitivity", "variance-based sensitivity of a surrogate",
        [("surrogate", str, "surrogate JSON"), ("n", int, "base sample count"),
         ("seed", int, "sampling seed")])
    add("report", "posterior summary table and histograms",
        [("samples", str, "posterior samples CSV")])
    add("plot-data", "tidy CSV series for external plotting",
        [("artifact", str, "input artifact"), ("kind", str,
         "sfs-profile|posterior-hist|bands")])
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _merge_config(args.command, args)
    except ConfigError as exc:
        _emit_error("config", exc)
        return 2
    return run(args.command, config, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
