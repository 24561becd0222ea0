"""Command-line front end: ``finsurrogate <subcommand> [options]``.

Every run writes its artifacts plus ``manifest.json`` into ``--out``. The
manifest records the effective configuration, so ``--config manifest.json``
repeats the run and reproduces the artifacts byte for byte.

Exit codes: 0 success, 1 internal error, 2 usage or unreadable input,
3 validation failure (malformed shape, dataset, model or config values).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import AxisFrame, InvalidShapeError, builtin_shape, load_shape, rotate_points, segment_fin
from .harness import GEN_TESTS, REFERENCE_SCOPES, HarnessError, Workspace, compare_variants, evaluate_model, \
    run_gen_test
from .kinematics import SKELETON_FIELDS, KinematicSetting, SchemaError, Variant, generate_cycle
from .nn import DENSE_SPACE, LSTM_SPACE, TrainingError, config_from_dict, preset, random_search
from .reduction import PcaReducer
from .surrogate import ShapeLookup, SurrogateModel
from .synthdata import DatasetFormatError, DatasetGrid, NoiseConfig, dataset_frame, dataset_rho, \
    generate_dataset, load_dataset, noise_summary, save_dataset

log = logging.getLogger("finsurrogate")

EXIT_INTERNAL, EXIT_USAGE, EXIT_VALIDATION = 1, 2, 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


# -- option tables -----------------------------------------------------------------------
# name -> (default, argparse kwargs). Defaults live here rather than in argparse so a
# config file can sit between them and the flags.

COMMON = {
    "seed": (0, dict(type=int, help="master seed")),
    "out": ("out", dict(help="output directory")),
    "jobs": (1, dict(type=int, help="worker cap for parallel steps")),
}

HYPER = {
    "preset": ("desk", dict(choices=["desk", "full"], help="hyperparameter preset")),
    "hyper": (None, None),  # config-file only: {"dense": {...}, "recurrent": {...}}
    "layers": (None, dict(type=int)),
    "nodes": (None, dict(type=int)),
    "hidden_units": (None, dict(type=int)),
    "dropout": (None, dict(type=float)),
    "learning_rate": (None, dict(type=float)),
    "batch_size": (None, dict(type=int)),
    "epochs": (None, dict(type=int)),
    "weight_decay": (None, dict(type=float)),
}

DATA = {
    "data": (None, dict(help="dataset CSV")),
    "stride": (8, dict(type=int, help="keep every n-th sample of each cycle")),
}

MODEL = {
    "variant": ("FP", dict(choices=[v.value for v in Variant])),
    "arch": ("dense", dict(choices=["dense", "recurrent"])),
    "components": (4, dict(type=int, help="PCA components (WFP)")),
    "pca_mode": ("weighted", dict(choices=["weighted", "unweighted"])),
}

EVAL = {
    "weighting": ("setting", dict(choices=["setting", "cycle"])),
    "reference_scope": ("universe", dict(choices=list(REFERENCE_SCOPES))),
}

COMMANDS = {
    "featurize": {
        "shape": (None, dict(help="outline JSON file")),
        "builtin": (None, dict(choices=["rect", "bio", "pt4"], help="use a shipped outline")),
        "stroke": (None, dict(type=float, help="stroke angle (deg) for a single pose")),
        "pitch": (None, dict(type=float, help="pitch angle (deg) for a single pose")),
        "stroke_amp": (None, dict(type=float)),
        "pitch_amp": (None, dict(type=float)),
        "freq": (None, dict(type=float)),
        "steps": (400, dict(type=int)),
        "phase": (90.0, dict(type=float, help="pitch phase lead (deg)")),
        "stroke_offset": (3.175, dict(type=float)),
        "pitch_offset": (1.25, dict(type=float)),
    },
    "gen-data": {
        "grid": (None, None),  # config-file only: DatasetGrid fields
        "steps": (400, dict(type=int)),
        "runs": (16, dict(type=int)),
        "cycles": (5, dict(type=int)),
        "across_dev": (0.2588, dict(type=float)),
        "within_dev": (0.103, dict(type=float)),
        "no_noise": (False, dict(action="store_true")),
    },
    "fit-pca": {**DATA, "mode": ("weighted", dict(choices=["weighted", "unweighted"])),
                "components": (4, dict(type=int))},
    "train": {**DATA, **MODEL, **HYPER,
              "search": (0, dict(type=int, help="random-search trials before the final fit"))},
    "eval": {**DATA, "model": (None, dict(help="model checkpoint JSON")),
             "weighting": EVAL["weighting"]},
    "gen-test": {**DATA, **MODEL, **HYPER, **EVAL, "spec": ("GT1", dict(choices=sorted(GEN_TESTS)))},
    "compare": {**DATA, **HYPER, **EVAL,
                "specs": (",".join(GEN_TESTS), dict(help="comma-separated test names")),
                "variants": ("FP,RFP,WFP,BASELINE", dict()),
                "archs": ("dense,recurrent", dict()),
                "components": MODEL["components"], "pca_mode": MODEL["pca_mode"]},
    "noise": {"data": DATA["data"], "bins": (100, dict(type=int))},
}


def build_parser():
    p = argparse.ArgumentParser(prog="finsurrogate", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON options file or a previous manifest.json")
        sp.add_argument("-v", "--verbose", action="store_true")
        for key, (_, kw) in {**COMMON, **opts}.items():
            if kw is None:
                continue
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS, **kw)
    return p


def effective_config(command, args):
    """Defaults, then the config file, then explicit flags."""
    table = {**COMMON, **COMMANDS[command]}
    cfg = {k: d for k, (d, _) in table.items()}
    if args.config:
        doc = _read_json(args.config)
        if isinstance(doc, dict) and "command" in doc and "config" in doc:
            if doc["command"] != command:
                raise UsageError(f"{args.config} is a manifest for '{doc['command']}', not '{command}'")
            doc = doc["config"]
        if not isinstance(doc, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        unknown = sorted(set(doc) - set(table))
        if unknown:
            raise UsageError(f"{args.config}: unknown options for {command}: {', '.join(unknown)}")
        cfg.update(doc)
    for k in table:
        if k in vars(args):
            cfg[k] = getattr(args, k)
    return cfg


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc


def _require(cfg, *names):
    for n in names:
        if cfg.get(n) in (None, ""):
            raise UsageError(f"--{n.replace('_', '-')} is required")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _fmt(v):
    return repr(float(v) + 0.0)  # +0.0 folds -0.0 into 0.0


def _load_data(cfg):
    _require(cfg, "data")
    path = Path(cfg["data"])
    if not path.is_file():
        raise FileNotFoundError(path)
    log.info("loading %s", path)
    return load_dataset(path)


def _configs(cfg, archs):
    """Resolve per-architecture hyperparameters: preset, then ``hyper``, then flags."""
    base = preset(cfg["preset"])
    out = {}
    for arch in archs:
        d = base[arch].to_dict()
        d.update((cfg.get("hyper") or {}).get(arch, {}))
        for k in ("dropout", "learning_rate", "batch_size", "epochs", "weight_decay"):
            if cfg.get(k) is not None:
                d[k] = cfg[k]
        keys = ("layers", "nodes") if arch == "dense" else ("hidden_units",)
        for k in keys:
            if cfg.get(k) is not None:
                d[k] = cfg[k]
        d["seed"] = cfg["seed"]
        out[arch] = config_from_dict(arch, d)
    return out


# -- subcommands ---------------------------------------------------------------------------


def cmd_featurize(cfg, out):
    if bool(cfg["shape"]) == bool(cfg["builtin"]):
        raise UsageError("give exactly one of --shape FILE or --builtin NAME")
    if cfg["shape"]:
        path = Path(cfg["shape"])
        if not path.is_file():
            raise FileNotFoundError(path)
        shape = load_shape(path)
    else:
        shape = builtin_shape(cfg["builtin"])
    frame = AxisFrame(cfg["stroke_offset"], cfg["pitch_offset"])
    flat = segment_fin(shape, frame)
    files = ["skeleton_flat.csv"]
    with open(out / "skeleton_flat.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["strip", "x_cm", "z_cm", "area_cm2"])
        for i, ((x, z), a) in enumerate(zip(flat.coms, flat.strip_areas), 1):
            w.writerow([i, _fmt(x), _fmt(z), _fmt(a)])

    pose = cfg["stroke"] is not None or cfg["pitch"] is not None
    setting = [cfg[k] is not None for k in ("stroke_amp", "pitch_amp", "freq")]
    if any(setting) and not all(setting):
        raise UsageError("a setting needs --stroke-amp, --pitch-amp and --freq together")
    if pose:
        pts = rotate_points(flat.coms, cfg["stroke"] or 0.0, cfg["pitch"] or 0.0).reshape(-1)
        with open(out / "skeleton_pose.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["stroke_deg", "pitch_deg", *SKELETON_FIELDS])
            w.writerow([_fmt(cfg["stroke"] or 0.0), _fmt(cfg["pitch"] or 0.0), *map(_fmt, pts)])
        files.append("skeleton_pose.csv")
    if all(setting):
        s = KinematicSetting(cfg["stroke_amp"], cfg["pitch_amp"], cfg["freq"], cfg["steps"])
        series = generate_cycle(s, cfg["phase"])
        pts = rotate_points(flat.coms, series.stroke_angle, series.pitch_angle).reshape(len(series.t), -1)
        with open(out / "skeleton_series.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "stroke_deg", "pitch_deg", "stroke_state", *SKELETON_FIELDS])
            for i in range(len(series.t)):
                w.writerow([_fmt(series.t[i]), _fmt(series.stroke_angle[i]), _fmt(series.pitch_angle[i]),
                            int(series.stroke_state[i]), *map(_fmt, pts[i])])
        files.append("skeleton_series.csv")
    return files


def cmd_gen_data(cfg, out):
    grid = DatasetGrid.from_dict(cfg["grid"]) if cfg["grid"] else DatasetGrid()
    grid.n_steps_per_cycle = cfg["steps"]
    grid.runs_per_setting = cfg["runs"]
    grid.cycles_per_run = cfg["cycles"]
    grid.__post_init__()
    noise = NoiseConfig.off() if cfg["no_noise"] else NoiseConfig(cfg["across_dev"], cfg["within_dev"])
    log.info("generating %d settings", len(grid.settings()))
    ds = generate_dataset(grid, noise, cfg["seed"])
    save_dataset(ds, out / "dataset.csv")
    log.info("wrote %d cycles", len(ds))
    return ["dataset.csv", "dataset.csv.meta.json"]


def cmd_fit_pca(cfg, out):
    ds = _load_data(cfg).decimate(cfg["stride"])
    lk = ShapeLookup(frame=dataset_frame(ds), rho=dataset_rho(ds))
    skel = np.vstack([lk.skeleton_series(c) for c in ds.cycles])
    coeff = np.concatenate([lk.coefficients(c) for c in ds.cycles])
    y = coeff / (coeff.std() or 1.0)
    red = PcaReducer(cfg["mode"], cfg["components"]).fit(skel, y if cfg["mode"] == "weighted" else None)
    red.save(out / "pca.json")
    std = red.component_std_
    summary = {
        "mode": cfg["mode"], "n_components": cfg["components"], "n_samples": int(len(skel)),
        "explained_ratio": red.explained_ratio(),
        "component_std": std.tolist(),
        "std_ratio_first_to_kth": float(std[0] / std[cfg["components"] - 1]) if std[cfg["components"] - 1] > 0
        else None,
    }
    _dump(summary, out / "pca_summary.json")
    return ["pca.json", "pca_summary.json"]


def cmd_train(cfg, out):
    ds = _load_data(cfg)
    ws = Workspace.build(ds, cfg["seed"], cfg["stride"])
    arch = cfg["arch"]
    config = _configs(cfg, [arch])[arch]
    files = []

    def make(c):
        return SurrogateModel(cfg["variant"], arch, c, n_components=cfg["components"], pca_mode=cfg["pca_mode"],
                              frame=dataset_frame(ds), rho=dataset_rho(ds), thrust_scale=ws.thrust_scale)

    if cfg["search"]:
        def fit_fn(c):
            m = make(c).fit(ws.reduced.train, ws.reduced.val)
            return m.history_["train_mse"][-1], m.history_["val_mse"][-1]

        space = DENSE_SPACE if arch == "dense" else LSTM_SPACE
        base = {k: v for k, v in config.to_dict().items() if k not in space and k != "seed"}
        log.info("random search: %d trials", cfg["search"])
        trials = random_search(fit_fn, arch, space, cfg["search"], cfg["seed"], base, cfg["jobs"])
        _dump([t.__dict__ for t in trials], out / "search.json")
        files.append("search.json")
        best = trials[0]
        config = config_from_dict(arch, {**config.to_dict(), **best.params})
    log.info("training %s %s", cfg["variant"], arch)
    model = make(config).fit(ws.reduced.train, ws.reduced.val)
    model.save(out / "model.json")
    _dump({"config": config.to_dict(), "thrust_scale": ws.thrust_scale, "n_train": len(ws.reduced.train),
           "n_val": len(ws.reduced.val), **model.history_}, out / "history.json")
    log.info("final val MSE %.5f", model.history_["val_mse"][-1])
    return files + ["model.json", "history.json"]


def cmd_eval(cfg, out):
    _require(cfg, "model")
    mpath = Path(cfg["model"])
    if not mpath.is_file():
        raise FileNotFoundError(mpath)
    model = SurrogateModel.load(mpath)
    ds = _load_data(cfg).decimate(cfg["stride"])
    result = evaluate_model(model, ds, cfg["weighting"])
    _dump(result, out / "eval.json")
    log.info("overall MSE %.5f over %d cycles", result["overall_mse"], result["n_cycles"])
    return ["eval.json"]


def cmd_gen_test(cfg, out):
    ds = _load_data(cfg)
    ws = Workspace.build(ds, cfg["seed"], cfg["stride"])
    configs = _configs(cfg, [cfg["arch"]])
    log.info("%s: %s %s", cfg["spec"], cfg["variant"], cfg["arch"])
    rep = run_gen_test(GEN_TESTS[cfg["spec"]], cfg["variant"], cfg["arch"], configs=configs, workspace=ws,
                       weighting=cfg["weighting"], reference_scope=cfg["reference_scope"])
    rep.save(out / "report.json")
    rep.save_profiles(out / "profiles.csv")
    log.info("excluded MSE %.5f, reference %.5f", rep.excluded_mse, rep.reference_mse)
    return ["report.json", "profiles.csv"]


def cmd_compare(cfg, out):
    ds = _load_data(cfg)
    specs = [s.strip() for s in cfg["specs"].split(",") if s.strip()]
    bad = [s for s in specs if s not in GEN_TESTS]
    if bad:
        raise UsageError(f"unknown tests: {', '.join(bad)}")
    archs = [a.strip() for a in cfg["archs"].split(",") if a.strip()]
    if any(a not in ("dense", "recurrent") for a in archs):
        raise UsageError("--archs takes dense and/or recurrent")
    variants = [Variant(v.strip()).value for v in cfg["variants"].split(",") if v.strip()]
    ws = Workspace.build(ds, cfg["seed"], cfg["stride"])
    table = compare_variants(ds, specs, cfg["seed"], _configs(cfg, archs), variants, archs, cfg["weighting"],
                             cfg["stride"], cfg["jobs"], ws, cfg["reference_scope"])
    table.save(out / "comparison.json", out / "comparison.csv")
    for d in table.to_dict()["averages"]:
        log.info("%s/%s %s", d["variant"], d["architecture"],
                 ", ".join(f"{k} {v:.4f}" for k, v in d.items() if k not in ("variant", "architecture")))
    return ["comparison.json", "comparison.csv"]


def cmd_noise(cfg, out):
    ds = _load_data(cfg)
    summary = noise_summary(ds, cfg["bins"])
    _dump(summary, out / "noise.json")
    for s in summary["settings"]:
        within = "nan" if s["within_run_dev"] is None else repr(s["within_run_dev"])
        across = "nan" if s["across_run_dev"] is None else repr(s["across_run_dev"])
        print(f"{s['setting']}\twithin {within}\tacross {across}")
    return ["noise.json"]


HANDLERS = {
    "featurize": cmd_featurize, "gen-data": cmd_gen_data, "fit-pca": cmd_fit_pca, "train": cmd_train,
    "eval": cmd_eval, "gen-test": cmd_gen_test, "compare": cmd_compare, "noise": cmd_noise,
}

VALIDATION_ERRORS = (InvalidShapeError, SchemaError, DatasetFormatError, HarnessError, ValueError, KeyError)


def _input_paths(cfg):
    return {k: cfg[k] for k in ("data", "model", "shape") if cfg.get(k)}


def run(argv=None):
    """Parse ``argv`` and execute; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s", force=True)
    try:
        cfg = effective_config(args.command, args)
        if cfg["jobs"] < 1:
            raise UsageError("--jobs must be >= 1")
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        inputs = {k: {"path": str(p), "sha256": _sha256(p)} for k, p in _input_paths(cfg).items()
                  if Path(p).is_file()}
        files = HANDLERS[args.command](cfg, out)
        manifest = {
            "tool": "finsurrogate",
            "version": __version__,
            "command": args.command,
            "seed": cfg["seed"],
            "config": {k: v for k, v in cfg.items() if k != "out"},
            "inputs": inputs,
            "artifacts": {f: _sha256(out / f) for f in files},
        }
        _dump(manifest, out / MANIFEST)
        log.info("wrote %s", ", ".join(files + [MANIFEST]))
        return 0
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"error: training failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except VALIDATION_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
