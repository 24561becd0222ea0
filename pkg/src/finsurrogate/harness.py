"""Reduced-data assembly, generalizability tests and variant comparison."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .kinematics import Variant
from .nn import DenseConfig, LstmConfig
from .rng import derive_seed, substream
from .surrogate import ShapeLookup, SurrogateModel
from .synthdata import dataset_frame, dataset_rho, setting_label

log = logging.getLogger(__name__)

DEFAULT_STRIDE = 8


class HarnessError(ValueError):
    pass


# -- reduced data ----------------------------------------------------------------------


@dataclass
class ReducedData:
    train: list
    val: list

    @property
    def cycles(self):
        return self.train + self.val


def assemble_reduced(dataset, seed, val_fraction=0.2):
    """One seeded cycle per run per setting, split by cycle into train/val.

    The validation count is ``floor(val_fraction * n)``; the rest trains.
    """
    picked = []
    for key, cycles in dataset.groups().items():
        runs = {}
        for c in cycles:
            runs.setdefault(c.run, []).append(c)
        if not runs:
            raise HarnessError(f"setting {setting_label(key)} has no runs")
        rng = substream(seed, "reduced", *key)
        for run in sorted(runs):
            choices = sorted(runs[run], key=lambda c: c.cycle)
            picked.append(choices[int(rng.integers(len(choices)))])
    order = substream(seed, "split").permutation(len(picked))
    n_val = int(math.floor(val_fraction * len(picked)))
    val = [picked[i] for i in sorted(order[:n_val])]
    train = [picked[i] for i in sorted(order[n_val:])]
    return ReducedData(train, val)


# -- test specifications -----------------------------------------------------------------


def _matches(rule, shape, freq, pitch):
    return ("shape" not in rule or rule["shape"] == shape) and \
           ("freq" not in rule or float(rule["freq"]) == freq) and \
           ("pitch" not in rule or float(rule["pitch"]) == pitch)


@dataclass(frozen=True)
class GenTestSpec:
    """A generalizability test.

    ``shapes`` and ``frequencies`` bound the data the test works with (its
    universe; ``None`` means every frequency). Settings in the universe that
    match any ``exclude`` rule are withheld from training and evaluated.
    """

    name: str
    shapes: tuple
    exclude: tuple
    frequencies: tuple = None

    def in_universe(self, shape, freq, pitch):
        return shape in self.shapes and (self.frequencies is None or freq in self.frequencies)

    def is_excluded(self, shape, freq, pitch):
        return self.in_universe(shape, freq, pitch) and any(_matches(r, shape, freq, pitch) for r in self.exclude)

    @property
    def universe_key(self):
        return (tuple(sorted(self.shapes)), None if self.frequencies is None else tuple(sorted(self.frequencies)))

    def to_dict(self):
        return {"name": self.name, "shapes": list(self.shapes), "exclude": [dict(r) for r in self.exclude],
                "frequencies": None if self.frequencies is None else list(self.frequencies)}


GEN_TESTS = {
    "GT1": GenTestSpec("GT1", ("rect", "bio"), ({"shape": "rect", "freq": 2.0, "pitch": 40.0},
                                                {"shape": "bio", "freq": 1.0, "pitch": 15.0})),
    "GT2": GenTestSpec("GT2", ("rect", "bio"), ({"pitch": 15.0},)),
    "GT3": GenTestSpec("GT3", ("rect", "bio"), ({"pitch": 25.0},)),
    "GT4": GenTestSpec("GT4", ("rect", "bio"), ({"pitch": 40.0},)),
    "GT5": GenTestSpec("GT5", ("rect", "bio", "pt4"), ({"shape": "rect"},), (1.0,)),
    "GT6": GenTestSpec("GT6", ("rect", "bio", "pt4"), ({"shape": "bio"},), (1.0,)),
}
KINEMATIC_TESTS = ("GT1", "GT2", "GT3", "GT4")
GEOMETRY_TESTS = ("GT5", "GT6")


# -- evaluation ----------------------------------------------------------------------------


@dataclass
class EvalReport:
    spec: dict
    variant: str
    architecture: str
    per_setting_mse: dict
    excluded_mse: float
    reference_mse: float
    reference_excluded_mse: float
    weighting: str = "setting"
    n_train: int = 0
    n_val: int = 0
    best_cycle: dict = None
    worst_cycle: dict = None
    profiles: list = field(default_factory=list)
    history: dict = None
    flags: list = field(default_factory=list)
    reference_scope: str = "universe"

    def to_dict(self):
        d = asdict(self)
        for k in ("excluded_mse", "reference_mse", "reference_excluded_mse"):
            if d[k] is not None and not math.isfinite(d[k]):
                d[k] = None
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    def save_profiles(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["which", "setting", "run", "cycle", "t_s", "reference", "predicted"])
            for p in self.profiles:
                for t, ref, pred in zip(p["t"], p["reference"], p["predicted"]):
                    w.writerow([p["which"], p["setting"], p["run"], p["cycle"], repr(t), repr(ref), repr(pred)])


def evaluate_settings(model, cycles_by_key, weighting="setting"):
    """Per-setting MSE, their aggregate and per-cycle scores.

    ``weighting="setting"`` averages settings equally; ``"cycle"`` pools
    every cycle.
    """
    per_setting, per_cycle = {}, []
    for key, cycles in cycles_by_key.items():
        mses = model.cycle_mse(cycles)
        per_setting[setting_label(key)] = float(np.mean(mses))
        per_cycle.extend(zip(mses.tolist(), cycles))
    if not per_setting:
        return per_setting, math.nan, per_cycle
    if weighting == "setting":
        overall = float(np.mean(list(per_setting.values())))
    elif weighting == "cycle":
        overall = float(np.mean([m for m, _ in per_cycle]))
    else:
        raise HarnessError(f"unknown weighting {weighting!r}")
    return per_setting, overall, per_cycle


def _profile(model, which, mse, cycle):
    pred = model.predict([cycle])[0]
    return {"which": which, "setting": setting_label(cycle.key), "run": cycle.run, "cycle": cycle.cycle,
            "mse": mse, "t": cycle.t.tolist(), "reference": model.targets(cycle).tolist(),
            "predicted": pred.tolist()}


def _config_for(configs, architecture):
    if configs and architecture in configs:
        return configs[architecture]
    return LstmConfig() if architecture == "recurrent" else DenseConfig()


@dataclass
class Workspace:
    """Decimated dataset, its reduced split and the shared thrust scale."""

    dataset: object
    reduced: ReducedData
    thrust_scale: float
    seed: int

    @classmethod
    def build(cls, dataset, seed, stride=DEFAULT_STRIDE):
        data = dataset.decimate(stride)
        reduced = assemble_reduced(data, seed)
        lk = ShapeLookup(frame=dataset_frame(data), rho=dataset_rho(data))
        coeffs = np.concatenate([lk.coefficients(c) for c in reduced.cycles])
        scale = float(coeffs.std()) or 1.0
        return cls(data, reduced, scale, seed)

    def model(self, variant, architecture, config, model_seed):
        cfg = config.__class__(**{**config.to_dict(), "seed": model_seed})
        return SurrogateModel(variant, architecture, cfg, frame=dataset_frame(self.dataset),
                              rho=dataset_rho(self.dataset), thrust_scale=self.thrust_scale)


REFERENCE_SCOPES = ("universe", "all")


def _reference_key(spec, scope):
    if scope not in REFERENCE_SCOPES:
        raise HarnessError(f"reference scope must be one of {REFERENCE_SCOPES}")
    return spec.universe_key if scope == "universe" else ("all",)


def _fit_reference(ws, spec, variant, architecture, config, scope="universe"):
    """Model trained without exclusions, on the test universe or on every setting."""
    keep = (lambda c: True) if scope == "all" else (lambda c: spec.in_universe(c.shape, c.key[1], c.key[3]))
    train = [c for c in ws.reduced.train if keep(c)]
    val = [c for c in ws.reduced.val if keep(c)]
    seed = derive_seed(ws.seed, "reference", variant, architecture, *_reference_key(spec, scope))
    return ws.model(variant, architecture, config, seed).fit(train, val)


def run_gen_test(spec, variant, architecture, dataset=None, configs=None, seed=0, workspace=None,
                 reference=None, weighting="setting", stride=DEFAULT_STRIDE, reference_scope="universe"):
    """Train without the excluded settings, then score every cycle of them.

    A reference model trained without exclusions supplies the comparison
    MSEs. ``reference_scope="universe"`` trains it on the test's shapes and
    frequencies; ``"all"`` on every setting in the dataset. Pass
    ``reference`` to reuse an already fitted one.
    """
    ws = workspace or Workspace.build(dataset, seed, stride)
    variant = Variant(variant).value
    config = _config_for(configs, architecture)
    flags = []

    groups = ws.dataset.groups()
    universe = {k: v for k, v in groups.items() if spec.in_universe(k[0], k[1], k[3])}
    excluded = {k: v for k, v in universe.items() if spec.is_excluded(k[0], k[1], k[3])}
    if not excluded:
        flags.append("no excluded settings")

    train = [c for c in ws.reduced.train if c.key in universe and c.key not in excluded]
    val = [c for c in ws.reduced.val if c.key in universe and c.key not in excluded]
    if not train:
        raise HarnessError(f"{spec.name}: exclusions remove all training data")

    model = ws.model(variant, architecture, config, derive_seed(ws.seed, "model", spec.name, variant, architecture))
    model.fit(train, val)

    if reference is None:
        reference = _fit_reference(ws, spec, variant, architecture, config, reference_scope)
    _, ref_mse, _ = evaluate_settings(reference, universe, weighting)
    _, ref_excl, _ = evaluate_settings(reference, excluded, weighting)

    per_setting, overall, per_cycle = evaluate_settings(model, excluded, weighting)
    report = EvalReport(spec.to_dict(), variant, architecture, per_setting, overall, ref_mse, ref_excl,
                        weighting, len(train), len(val), history=model.history_, flags=flags,
                        reference_scope=reference_scope)
    if per_cycle:
        best = min(per_cycle, key=lambda mc: mc[0])
        worst = max(per_cycle, key=lambda mc: mc[0])
        for which, (mse, c) in (("best", best), ("worst", worst)):
            ident = {"setting": setting_label(c.key), "run": c.run, "cycle": c.cycle, "mse": mse}
            setattr(report, f"{which}_cycle", ident)
            report.profiles.append(_profile(model, which, mse, c))
    return report


def evaluate_model(model, dataset, weighting="setting"):
    """Score a trained model on every cycle of ``dataset``."""
    per_setting, overall, per_cycle = evaluate_settings(model, dataset.groups(), weighting)
    return {"per_setting_mse": per_setting, "overall_mse": overall, "weighting": weighting,
            "n_cycles": len(per_cycle)}


# -- comparison ------------------------------------------------------------------------------


@dataclass
class ComparisonTable:
    rows: list
    references: dict

    def averages(self, variant, architecture):
        vals = {r["test"]: r["excluded_mse"] for r in self.rows
                if r["variant"] == variant and r["architecture"] == architecture}
        out = {}
        for label, names in (("Gen Test 1-4 Avg", KINEMATIC_TESTS), ("Gen Test 5-6 Avg", GEOMETRY_TESTS)):
            got = [vals[n] for n in names if n in vals]
            if got:
                out[label] = float(np.mean(got))
        return out

    def to_dict(self):
        combos = sorted({(r["variant"], r["architecture"]) for r in self.rows})
        return {
            "references": self.references,
            "rows": self.rows,
            "averages": [{"variant": v, "architecture": a, **self.averages(v, a)} for v, a in combos],
        }

    def save(self, json_path=None, csv_path=None):
        if json_path:
            Path(json_path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")
        if csv_path:
            with open(csv_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["variant", "architecture", "test", "excluded_mse", "reference_mse"])
                for v, a in sorted({(r["variant"], r["architecture"]) for r in self.rows}):
                    for r in self.rows:
                        if r["variant"] == v and r["architecture"] == a:
                            w.writerow([v, a, r["test"], repr(r["excluded_mse"]), repr(r["reference_mse"])])
                    for label, val in self.averages(v, a).items():
                        w.writerow([v, a, label, repr(val), ""])


def _compare_job(ws, spec, variant, arch, configs, weighting, scope):
    return run_gen_test(spec, variant, arch, configs=configs, workspace=ws, weighting=weighting,
                        reference_scope=scope)


def compare_variants(dataset, specs=None, seed=0, configs=None, variants=None, architectures=None,
                     weighting="setting", stride=DEFAULT_STRIDE, n_jobs=1, workspace=None,
                     reference_scope="universe"):
    """Run every (variant, architecture, test) and tabulate excluded-setting MSEs.

    Serial runs fit one reference per (variant, architecture, universe);
    parallel runs refit it in every job, which gives the same weights because
    the reference seed depends only on that triple.
    """
    specs = [GEN_TESTS[s] if isinstance(s, str) else s for s in (specs or list(GEN_TESTS))]
    variants = [Variant(v).value for v in (variants or [v.value for v in Variant])]
    architectures = architectures or ["dense", "recurrent"]
    ws = workspace or Workspace.build(dataset, seed, stride)

    # one reference per (variant, architecture, universe); tests sharing a universe share it
    ref_cache = {}
    jobs = [(spec, v, a) for v in variants for a in architectures for spec in specs]

    def run(spec, v, a):
        key = (v, a, _reference_key(spec, reference_scope))
        if key not in ref_cache:
            ref_cache[key] = _fit_reference(ws, spec, v, a, _config_for(configs, a), reference_scope)
        return run_gen_test(spec, v, a, configs=configs, workspace=ws, reference=ref_cache[key],
                            weighting=weighting, reference_scope=reference_scope)

    if n_jobs == 1:
        reports = [run(*j) for j in jobs]
    else:
        reports = Parallel(n_jobs=n_jobs)(
            delayed(_compare_job)(ws, s, v, a, configs, weighting, reference_scope) for s, v, a in jobs)

    rows, refs = [], {}
    for (spec, v, a), rep in zip(jobs, reports):
        rows.append({"variant": v, "architecture": a, "test": spec.name, "excluded_mse": rep.excluded_mse,
                     "reference_mse": rep.reference_mse, "reference_excluded_mse": rep.reference_excluded_mse,
                     "per_setting_mse": rep.per_setting_mse})
        refs[f"{v}/{a}/{_universe_label(spec, reference_scope)}"] = rep.reference_mse
    return ComparisonTable(rows, refs)


def _universe_label(spec, scope):
    if scope == "all":
        return "all-data"
    shapes, freqs = spec.universe_key
    return "+".join(shapes) + "/" + ("all-freq" if freqs is None else "+".join(f"{f:g}Hz" for f in freqs))
