"""Config-driven pipeline: preprocessing, feature selection, CASH and drift-adaptive updating.

Offline mode ends with the tuned learner's cross-validated metrics. Online
mode selects a learner on a stream prefix and then evaluates it
prequentially on the remainder. Everything random is derived from the
config's master seed, and the report holds no wall-clock values, so a rerun
produces an identical ``report.json``; timings go to ``timing.json``.
"""

from __future__ import annotations

import csv
import json
import os
import platform
import time
import zlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .cash import Candidate, SearchSpace, adaptive_model_select, cash_optimize, get_algorithm
from .cash.optimizers import evaluate, run_optimizer
from .cash.space import TrialHistory
from .drift import make_detector
from .errors import ConfigError, DriftMLError, SpecError, StageError
from .evaluation import prequential_eval
from .features import auto_feature_selection, parse_ig_policy
from .preprocess import (BalancePolicy, FittedPreprocessor, ImputeMethod, ImputePolicy,
                         Imputer, NormalizerParams, fit_encoder, fit_normalizer,
                         imbalance_ratio, missing_report, smote_balance)
from .stream import Dataset, DriftStreamSpec, generate_stream, load_csv, stream_to_dataset

OUTPUT_ENV = "DRIFTML_OUTPUT_DIR"
DEFAULT_OUTPUT = "driftml-runs"
LEAKAGE_NOTE = ("normalization and SMOTE are fitted inside each training split and applied "
                "to its validation split; imputation, encoding and feature selection are "
                "fitted once on the full offline dataset (online: on the prefix)")


def config_schema() -> dict:
    text = resources.files("driftml").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def derive_seed(master: int, stage: str) -> int:
    """Stable per-stage seed from the master seed and a stage name."""
    ss = np.random.SeedSequence([int(master), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


# -- config ------------------------------------------------------------------


@dataclass
class PipelineConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def mode(self) -> str:
        return self.raw["mode"]

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def block(self, name: str) -> dict:
        return self.raw.get(name) or {}

    @property
    def csv_path(self) -> Path | None:
        p = self.raw["input"].get("csv")
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def candidate_items(self) -> list[dict]:
        default = ["NB", "KNN", "CART", "RF"] if self.mode == "Offline" else ["HT", "EFDT", "ARF", "SRP"]
        items = self.raw.get("candidates") or default
        return [{"algorithm": c} if isinstance(c, str) else dict(c) for c in items]

    def output_dir(self, override=None) -> Path:
        if override is not None:
            return Path(override)
        d = self.block("output").get("dir")
        if d is not None:
            d = Path(d)
            return d if d.is_absolute() else self.base_dir / d
        return Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT))


def load_config(source, seed: int | None = None) -> PipelineConfig:
    """Parse and validate a config from a path or a dict.

    Raises
    ------
    ConfigError
        Schema violations, mode-inconsistent algorithm ids, unreadable or
        missing input files, or an invalid stream spec.
    """
    if isinstance(source, dict):
        raw, base = json.loads(json.dumps(source)), Path.cwd()
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
        base = path.resolve().parent
    if seed is not None:
        raw["seed"] = int(seed)
    validator = jsonschema.Draft202012Validator(config_schema())
    problems = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if problems:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in problems]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    cfg = PipelineConfig(raw, base)
    for item in cfg.candidate_items():
        alg = get_algorithm(item["algorithm"], cfg.mode)
        if "space" in item:
            try:
                SearchSpace.from_list(item["space"])
            except DriftMLError as exc:
                raise ConfigError(f"candidate {alg.id}: {exc}") from None
    if cfg.csv_path is not None and not cfg.csv_path.is_file():
        raise ConfigError(f"input csv not found: {cfg.csv_path}")
    if "stream" in raw["input"]:
        spec = dict(raw["input"]["stream"])
        spec.setdefault("seed", derive_seed(cfg.seed, "stream"))
        try:
            s = DriftStreamSpec.from_dict(spec)
            s.validate()
        except (SpecError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid stream spec: {exc}") from None
        if s.n_instances is None:
            raise ConfigError("input stream needs a finite n_instances")
    return cfg


# -- split-wise preprocessing ------------------------------------------------


class SplitwiseModel:
    """Fits normalization, then SMOTE, on the training split only, then the learner."""

    def __init__(self, model, normalization: str | None = "auto",
                 balance: BalancePolicy | None = None):
        self.model = model
        self.normalization = normalization
        self.balance = balance
        self.normalizer: NormalizerParams | None = None

    def fit(self, d: Dataset) -> "SplitwiseModel":
        if self.normalization and self.normalization != "none":
            self.normalizer = fit_normalizer(d, self.normalization)
            d = self.normalizer.transform(d)
        if self.balance is not None:
            d = smote_balance(d, self.balance)
        self.model.fit(d)
        self.n_classes = d.schema.n_classes
        self._schema = d.schema
        return self

    def _prep(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.normalizer is None:
            return X
        d = Dataset(self._schema, X, np.zeros(len(X), dtype=np.int64))
        return self.normalizer.transform(d).X

    def predict_many(self, X) -> np.ndarray:
        return self.model.predict_many(self._prep(X))

    def predict_proba_many(self, X) -> np.ndarray:
        return self.model.predict_proba_many(self._prep(X))


# -- report ------------------------------------------------------------------


@dataclass
class RunReport:
    mode: str
    seed: int
    stages: list[dict] = field(default_factory=list)
    status: str = "ok"
    failed_at_stage: str | None = None
    error: str | None = None
    timing: dict = field(default_factory=lambda: {"stages": []})
    artifacts: dict = field(default_factory=dict)

    def stage(self, name: str) -> dict:
        for s in self.stages:
            if s["name"] == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "failed_at_stage": self.failed_at_stage,
            "error": self.error,
            "mode": self.mode,
            "environment": {
                "seed": self.seed,
                "driftml": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "leakage_policy": LEAKAGE_NOTE,
            "stages": self.stages,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


class _Runner:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.report = RunReport(cfg.mode, cfg.seed)
        self.t0 = time.perf_counter()
        self.outputs: dict = {}

    def run_stage(self, name: str, fn, *args):
        start = time.perf_counter()
        try:
            record, value = fn(*args)
        except Exception as exc:
            self.report.status = "failed"
            self.report.failed_at_stage = name
            self.report.error = f"{type(exc).__name__}: {exc}"
            self.report.timing["stages"].append({"name": name, "start": start - self.t0,
                                                 "end": time.perf_counter() - self.t0})
            raise StageError(name, exc, self.report) from exc
        end = time.perf_counter()
        record = dict(record)
        timing = record.pop("_timing", None)
        self.report.stages.append({"name": name, "order": len(self.report.stages) + 1, **record})
        entry = {"name": name, "start": start - self.t0, "end": end - self.t0}
        if timing:
            entry["detail"] = timing
        self.report.timing["stages"].append(entry)
        return value

    # -- stages --------------------------------------------------------------
    def ingest(self):
        cfg = self.cfg
        inp = cfg.raw["input"]
        if "csv" in inp:
            d = load_csv(cfg.csv_path, label_column=cfg.raw.get("label_column"))
            source = {"csv": str(inp["csv"])}
        else:
            spec = dict(inp["stream"])
            spec.setdefault("seed", derive_seed(cfg.seed, "stream"))
            s = DriftStreamSpec.from_dict(spec)
            d = stream_to_dataset(generate_stream(s))
            source = {"stream": s.to_dict()}
        if not d.is_labeled:
            raise DriftMLError("input has no label column")
        rec = {"source": source, "n_rows": len(d), "n_features": d.schema.n_features,
               "classes": list(d.schema.class_labels),
               "class_counts": d.class_counts().tolist()}
        return rec, d

    def preprocess(self, d: Dataset, fit_rows: Dataset):
        block = self.cfg.block("preprocessing")
        imp = block.get("imputation") or {}
        policy = ImputePolicy(
            method=ImputeMethod.parse(imp.get("method", "Mean")),
            overrides=dict(imp.get("overrides", {})),
            categorical_method=ImputeMethod.parse(imp.get("categorical_method", "Mode")),
        )
        missing = {k: {"count": c, "percent": p} for k, (c, p) in missing_report(d).items()}
        imputer = Imputer(policy).fit(fit_rows)
        d_imp = imputer.transform(d)
        encoder = fit_encoder(d_imp)
        d_enc = encoder.transform(d_imp)
        norm = block.get("normalization", "auto")
        fit_enc = encoder.transform(imputer.transform(fit_rows))
        chosen = None if norm == "none" else fit_normalizer(fit_enc, norm)
        bal = block.get("balancing") or {}
        balance = None
        ratio_before = imbalance_ratio(fit_enc)
        ratio_after = ratio_before
        if bal.get("enabled", True) and self.cfg.mode == "Offline":
            balance = BalancePolicy(trigger_ratio=float(bal.get("trigger_ratio", 0.5)),
                                    smote_k=int(bal.get("smote_k", 5)),
                                    seed=derive_seed(self.cfg.seed, "smote"))
            if ratio_before < balance.trigger_ratio:
                ratio_after = imbalance_ratio(smote_balance(fit_enc, balance))
        self.outputs["preprocessor"] = FittedPreprocessor(imputer, encoder, chosen)
        rec = {
            "missing": missing,
            "imputation": {c.name: imputer.methods[c.name].name for c in d.schema.feature_columns
                           if c.name in imputer.methods},
            "rows_after_imputation": len(d_imp),
            "encoded_columns": sorted(encoder.codes),
            "normalizer": None if chosen is None else chosen.method,
            "balance_ratio_before": ratio_before,
            "balance_ratio_after": ratio_after,
            "balancing_applied": balance is not None and ratio_before < balance.trigger_ratio,
        }
        return rec, (d_enc, norm, balance)

    def autofe(self, d: Dataset, fit_rows: Dataset):
        block = self.cfg.block("autofe")
        before = list(d.schema.feature_names)
        # relevance ranked on a pre-drift prefix can discard features a later
        # concept depends on, so online runs opt in explicitly
        if not block.get("enabled", self.cfg.mode == "Offline"):
            return {"enabled": False, "features_before": before, "features_after": before}, d
        report, scores = auto_feature_selection(
            fit_rows, parse_ig_policy(block.get("ig_policy")), float(block.get("r_threshold", 0.9)),
            use_ig=block.get("use_ig", True), use_pearson=block.get("use_pearson", True))
        rec = {"enabled": True, "features_before": before, "features_after": report.kept,
               "scores": dict(scores.items), **report.to_dict()}
        return rec, d.select_features(report.kept)

    def offline_cash(self, d: Dataset, norm: str, balance):
        hpo = self.cfg.block("hpo")
        seed = derive_seed(self.cfg.seed, "cash")

        def wrap(model):
            return SplitwiseModel(model, norm, balance)

        cands = []
        for item in self.cfg.candidate_items():
            space = SearchSpace.from_list(item["space"]) if "space" in item else None
            cands.append(Candidate.from_registry(item["algorithm"], seed, space,
                                                 item.get("default"), wrap))
        res = cash_optimize(cands, d, cv_k=int(hpo.get("cv_k", 5)), metric=hpo.get("metric", "f1"),
                            budget=int(hpo.get("budget", 20)), optimizer=hpo.get("optimizer", "tpe"),
                            seed=seed, top_n=int(hpo.get("top_n", 2)),
                            resolution=hpo.get("grid_resolution"))
        rec = res.to_dict(include_timing=False)
        rec["_timing"] = res.timing()
        return rec, res

    def final_offline(self, res):
        best = res.best
        rec = {"algorithm": best.algorithm, "config": best.config,
               "cv_metrics": {k: v for k, v in best.metrics.items() if k != "learn_seconds"}}
        return rec, None

    def prefix_length(self, n: int) -> int:
        p = self.cfg.block("online").get("prefix_length")
        if p is None:
            p = min(5000, int(0.2 * n))
        if p < 100:
            raise DriftMLError(f"prefix of {p} instances is shorter than 100")
        if p >= n:
            raise DriftMLError(f"prefix length {p} leaves no instances to evaluate (n={n})")
        return int(p)

    def online_select(self, d: Dataset, prefix_n: int):
        online = self.cfg.block("online")
        metric = online.get("selection_metric", "f1")
        seed = derive_seed(self.cfg.seed, "online")
        prefix = d.subset(np.arange(prefix_n))
        learners = []
        for i, item in enumerate(self.cfg.candidate_items()):
            alg = get_algorithm(item["algorithm"], "Online")
            learners.append((alg.id, alg.build(item.get("default"), seed + i, d.schema)))
        sel = adaptive_model_select(learners, prefix, metric)
        winner_id, model = sel.best, sel.models[sel.best]
        config = dict(get_algorithm(winner_id).default)
        hpo = self.cfg.block("hpo")
        budget = int(hpo.get("budget", 0))
        trials = []
        if budget > 0:
            alg = get_algorithm(winner_id)
            idx = [i for i, (a, _) in enumerate(learners) if a == winner_id][0]
            cfg_default = dict(alg.default)
            cfg_default.update(self.cfg.candidate_items()[idx].get("default") or {})
            rows = [prefix.row(i) for i in range(len(prefix))]

            def objective(c):
                m = alg.build(c, seed + idx, d.schema)
                s = prequential_eval(rows, m).summary()
                return 1.0 - s[metric], {k: s[k] for k in ("accuracy", "precision", "recall", "f1")}

            history = TrialHistory()
            history.add(evaluate(objective, cfg_default, winner_id))
            best, history = run_optimizer(hpo.get("optimizer", "tpe"), alg.space, objective, budget,
                                          seed=seed, algorithm=winner_id, history=history,
                                          resolution=hpo.get("grid_resolution"))
            trials = [t.to_dict(include_timing=False) for t in history.trials]
            config = best.config
            if best is not history.trials[0]:
                model = alg.build(config, seed + idx, d.schema)
                for r in rows:
                    model.learn_one(r)
        rec = {"prefix_length": prefix_n, "metric": metric, "scores": sel.scores,
               "summaries": sel.summaries, "winner": winner_id, "config": config,
               "hpo_trials": trials}
        return rec, (winner_id, model)

    def online_eval(self, d: Dataset, prefix_n: int, winner_id: str, model):
        online = self.cfg.block("online")
        det_cfg = online.get("detector")
        detectors = {}
        if det_cfg:
            kwargs = {"delta": det_cfg["delta"]} if "delta" in det_cfg else {}
            detectors[det_cfg["name"]] = make_detector(det_cfg["name"], **kwargs)
        rows = (d.row(i) for i in range(prefix_n, len(d)))
        trace = prequential_eval(rows, model, detectors=detectors,
                                 on_drift=online.get("on_drift", "none"), start_index=prefix_n)
        self.outputs["trace"] = trace
        events = [e.to_dict() for e in trace.events]
        rec = {"model": winner_id, "start_index": prefix_n, "summary": trace.summary(),
               "n_drift_events": sum(e["status"] == "Drift" for e in events),
               "n_warning_events": sum(e["status"] == "Warning" for e in events),
               "drift_events": [e for e in events if e["status"] == "Drift"],
               "_timing": {"learn_seconds": trace.learn_seconds,
                           "predict_seconds": trace.predict_seconds}}
        return rec, trace


def run_pipeline(config, seed: int | None = None, out_dir=None, write: bool = True) -> RunReport:
    """Execute the configured pipeline; optionally write its artifacts.

    Raises
    ------
    ConfigError
        Before any stage runs.
    StageError
        A stage failed; ``exc.report`` holds the partial report, which is
        also written to disk when ``write`` is set.
    """
    cfg = config if isinstance(config, PipelineConfig) else load_config(config, seed)
    if seed is not None and isinstance(config, PipelineConfig):
        cfg.raw["seed"] = int(seed)
        cfg.__init__(cfg.raw, cfg.base_dir)
    r = _Runner(cfg)
    out = cfg.output_dir(out_dir) if write else None
    try:
        d = r.run_stage("ingest", r.ingest)
        if cfg.mode == "Offline":
            d, norm, balance = r.run_stage("preprocess", r.preprocess, d, d)
            d = r.run_stage("autofe", r.autofe, d, d)
            res = r.run_stage("cash", r.offline_cash, d, norm, balance)
            r.run_stage("final", r.final_offline, res)
        else:
            n_prefix = r.run_stage("split", lambda: ({"prefix_length": r.prefix_length(len(d)),
                                                      "n_rows": len(d)}, r.prefix_length(len(d))))
            prefix = d.subset(np.arange(n_prefix))
            d, _, _ = r.run_stage("preprocess", r.preprocess, d, prefix)
            if len(d) <= n_prefix:
                raise StageError("preprocess", DriftMLError("imputation removed the evaluation rows"), r.report)
            d = r.run_stage("autofe", r.autofe, d, d.subset(np.arange(n_prefix)))
            winner, model = r.run_stage("select", r.online_select, d, n_prefix)
            r.run_stage("prequential", r.online_eval, d, n_prefix, winner, model)
    except StageError:
        if write:
            write_outputs(r, out)
        raise
    r.report.timing["total_seconds"] = time.perf_counter() - r.t0
    if write:
        write_outputs(r, out)
    return r.report


def write_outputs(r: _Runner, out: Path) -> dict:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"report": out / "report.json", "timing": out / "timing.json"}
    paths["report"].write_text(r.report.to_json(), encoding="utf-8")
    paths["timing"].write_text(json.dumps(_clean(r.report.timing), indent=2, sort_keys=True) + "\n",
                               encoding="utf-8")
    pre = r.outputs.get("preprocessor")
    if pre is not None:
        paths["preprocessor"] = out / "preprocessor.json"
        paths["preprocessor"].write_text(pre.to_json() + "\n", encoding="utf-8")
    trace = r.outputs.get("trace")
    if trace is not None:
        start = r.report.stage("prequential")["start_index"]
        paths["timeline"] = out / "timeline.csv"
        with open(paths["timeline"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "cum_accuracy", "event"])
            marks: dict[int, list[str]] = {}
            for e in trace.events:
                marks.setdefault(e.index, []).append(f"{e.detector}:{e.status}")
            for i, acc in enumerate(trace.cumulative_accuracy):
                w.writerow([start + i, repr(float(acc)), ";".join(marks.get(start + i, []))])
        paths["drift_events"] = out / "drift_events.csv"
        with open(paths["drift_events"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "detector", "status"])
            for e in trace.events:
                w.writerow([e.index, e.detector, e.status])
    r.report.artifacts = {k: str(v) for k, v in paths.items()}
    return paths


# -- re-emitting summaries -----------------------------------------------------


def load_report(run_dir) -> dict:
    path = Path(run_dir) / "report.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"no report.json in run directory: {path.parent}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"corrupt report {path}: {exc}") from None


def summary_rows(report: dict) -> list[dict]:
    """Flat rows: the stage-1 table offline, per-candidate selection scores online."""
    rows = []
    stages = {s["name"]: s for s in report.get("stages", [])}
    if "cash" in stages:
        for row in stages["cash"]["stage1"]:
            rows.append({"stage": "stage1", **row})
        best = stages["cash"]["best"]
        rows.append({"stage": "final", "algorithm": best["algorithm"], "status": best["status"],
                     **{k: best["metrics"].get(k) for k in ("accuracy", "precision", "recall", "f1")}})
    if "select" in stages:
        for alg, s in stages["select"]["summaries"].items():
            rows.append({"stage": "select", "algorithm": alg,
                         **{k: s.get(k) for k in ("accuracy", "precision", "recall", "f1")}})
    if "prequential" in stages:
        s = stages["prequential"]["summary"]
        rows.append({"stage": "prequential", "algorithm": stages["prequential"]["model"],
                     **{k: s.get(k) for k in ("accuracy", "precision", "recall", "f1")}})
    order = ["stage", "algorithm", "status", "accuracy", "precision", "recall", "f1"]
    return [{k: r[k] for k in order if k in r} for r in rows]


def summary(report: dict) -> dict:
    stages = {s["name"]: s for s in report.get("stages", [])}
    out = {"status": report.get("status"), "mode": report.get("mode"),
           "failed_at_stage": report.get("failed_at_stage")}
    if "final" in stages:
        out["final"] = stages["final"]
    if "prequential" in stages:
        p = stages["prequential"]
        out["prequential"] = {"model": p["model"], "summary": p["summary"],
                              "n_drift_events": p["n_drift_events"]}
    out["rows"] = summary_rows(report)
    return out
