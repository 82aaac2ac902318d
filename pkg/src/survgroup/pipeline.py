"""End-to-end runs: discovery, pruning and validation with file outputs.

``subgroups.json`` is written with sorted keys and no timestamps so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import cache
from .dataset import SurvivalDataset, load_csv
from .learner import (LearnerConfig, SubgroupResult, discover, exceptionality_vector,
                      hard_exceptionality, summarize)
from .pruner import PruneConfig, prune_rule
from .rsf import ForestConfig, population_curve
from .softrule import HardRule, SoftRuleParams, membership
from .survival import kaplan_meier, logrank_statistic, mean_shift
from .validator import NullModel, bonferroni, build_dfd, p_value

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


def derive_seeds(seed: int):
    """Independent sub-seeds for the forest, the learner and the permutations."""
    return tuple(int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(3))


@dataclass
class RunConfig:
    input: str
    time_col: str
    event_col: str
    one_hot: bool = False
    seed: int = 0
    forest: ForestConfig = field(default_factory=ForestConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    prune: Optional[PruneConfig] = None
    validate: bool = False
    null_runs: int = 1000
    fast_null: bool = False
    out_dir: str = "."
    threads: int = 1
    use_cache: bool = True

    def seeded(self):
        fseed, lseed, _ = derive_seeds(self.seed)
        return (replace(self.forest, seed=fseed, n_jobs=self.threads),
                replace(self.learner, seed=lseed))


def subgroup_stats(dataset: SurvivalDataset, mask) -> dict:
    """Logrank against the complement and RMST mean-shift; None where undefined."""
    mask = np.asarray(mask, dtype=bool)
    out = {"logrank": None, "mean_shift": None}
    if 0 < mask.sum() < dataset.n:
        out["logrank"] = logrank_statistic(mask, dataset.times, dataset.events)
    if mask.any() and dataset.events[mask].any():
        out["mean_shift"] = mean_shift(dataset.times, dataset.events, mask)
    return out


def subgroup_record(dataset, result: SubgroupResult, index: int) -> dict:
    names = dataset.feature_names
    rec = {
        "index": index,
        "rule": result.rule.to_dict(names),
        "rule_text": result.rule.render(names),
        "soft_params": result.soft_params.to_dict(),
        "size": result.size,
        "exceptionality": result.exceptionality,
    }
    rec.update(subgroup_stats(dataset, result.mask))
    return rec


def _prune_record(dataset, result, pruned: SubgroupResult) -> dict:
    names = dataset.feature_names
    return {
        "rule": pruned.rule.to_dict(names),
        "rule_text": pruned.rule.render(names),
        "soft_params": pruned.soft_params.to_dict(),
        "size": pruned.size,
        "exceptionality": pruned.exceptionality,
        "size_change": [result.size, pruned.size],
        "exceptionality_change": [result.exceptionality, pruned.exceptionality],
    }


def prune_results(dataset, results, exc, config: PruneConfig):
    out = []
    for r in results:
        params = prune_rule(dataset, r.soft_params, config)
        out.append(summarize(dataset, params, exc))
    return out


def null_model(dataset, forest: ForestConfig, learner: LearnerConfig, runs, m, seed,
               threads=1, fast=False, use_cache=True) -> NullModel:
    """Build (or load from cache) the permutation null for this data and configuration."""
    key = cache.cache_key(dataset, forest.to_dict(), learner.to_dict(),
                          {"runs": runs, "m": m, "seed": seed, "fast": fast})
    name = f"null-{key}.json"
    if use_cache:
        hit = cache.load_json(name)
        if hit is not None:
            return NullModel.from_dict(hit)
    null = build_dfd(dataset, forest, learner, runs=runs, m=m, seed=seed, n_jobs=threads, fast=fast)
    if use_cache:
        cache.save_json(name, null.to_dict())
    return null


def attach_p_values(records: list, null: NullModel, alpha: float = 0.05) -> None:
    ps = [p_value(rec["exceptionality"], null) for rec in records]
    for rec, p, (adj, sig) in zip(records, ps, bonferroni(ps, alpha)):
        rec["p_value"] = p
        rec["adjusted_p_value"] = adj
        rec["significant"] = sig


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def render_report(dataset, records, population_km) -> str:
    lines = [f"subjects: {dataset.n}   features: {dataset.p}   events: {int(dataset.events.sum())}", ""]
    for rec in records:
        lines.append(f"subgroup {rec['index']}: {rec['rule_text']}")
        lines.append(f"  size {rec['size']}   exceptionality {rec['exceptionality']:.4f}")
        if rec["logrank"] is not None:
            lines.append(f"  logrank {rec['logrank']:.3f}   mean-shift {rec['mean_shift']:.3f}")
        if "p_value" in rec:
            flag = "significant" if rec["significant"] else "not significant"
            lines.append(f"  p {rec['p_value']:.4g}   adjusted {rec['adjusted_p_value']:.4g} ({flag})")
        if "pruned" in rec:
            pr = rec["pruned"]
            lines.append(f"  pruned: {pr['rule_text']}")
            lines.append(f"    size {pr['size_change'][0]} -> {pr['size_change'][1]}   "
                         f"exceptionality {pr['exceptionality_change'][0]:.4f} -> "
                         f"{pr['exceptionality_change'][1]:.4f}")
        lines.append("")
    return "\n".join(lines)


def run_discover(rc: RunConfig, progress=None) -> dict:
    """Discover subgroups and write ``subgroups.json``, KM TSVs and ``report.txt``."""
    dataset = load_csv(rc.input, rc.time_col, rc.event_col, rc.one_hot)
    forest_cfg, learner_cfg = rc.seeded()
    matrix, fitted = cache.load_or_fit_matrix(dataset, forest_cfg, rc.use_cache)
    log.info("population model %s", "fitted" if fitted else "loaded from cache")
    exc = exceptionality_vector(matrix, population_curve(matrix))
    results = discover(dataset, learner_cfg, forest_cfg, matrix=matrix, callback=progress)

    out = Path(rc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for k, r in enumerate(results):
        rec = subgroup_record(dataset, r, k)
        if r.km_curve is not None:
            r.km_curve.to_tsv(out / f"subgroup_{k}_km.tsv")
            rec["km_tsv"] = f"subgroup_{k}_km.tsv"
        records.append(rec)
    population_km = kaplan_meier(dataset.times, dataset.events)
    population_km.to_tsv(out / "population_km.tsv")

    if rc.prune is not None:
        for rec, r, pr in zip(records, results, prune_results(dataset, results, exc, rc.prune)):
            rec["pruned"] = _prune_record(dataset, r, pr)

    payload = {
        "format_version": FORMAT_VERSION,
        "input": {"path": str(rc.input), "time_col": rc.time_col, "event_col": rc.event_col,
                  "one_hot": rc.one_hot},
        "dataset": {"n": dataset.n, "p": dataset.p, "events": int(dataset.events.sum()),
                    "hash": dataset.content_hash(), "feature_names": list(dataset.feature_names)},
        "config": {"seed": rc.seed, "forest": forest_cfg.to_dict(), "learner": learner_cfg.to_dict(),
                   "prune_threshold": None if rc.prune is None else rc.prune.threshold},
        "population_km_tsv": "population_km.tsv",
        "subgroups": records,
    }
    if rc.validate:
        _, _, null_seed = derive_seeds(rc.seed)
        null = null_model(dataset, forest_cfg, learner_cfg, rc.null_runs, learner_cfg.n_subgroups,
                          null_seed, rc.threads, rc.fast_null, rc.use_cache)
        attach_p_values(records, null)
        payload["null_model"] = null.to_dict(with_scores=False) | {"fast": rc.fast_null}

    write_json(out / "subgroups.json", payload)
    (out / "report.txt").write_text(render_report(dataset, records, population_km), encoding="utf-8")
    return payload


def load_payload(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dataset_for(payload, input_override=None) -> SurvivalDataset:
    inp = payload["input"]
    return load_csv(input_override or inp["path"], inp["time_col"], inp["event_col"], inp["one_hot"])


def payload_rules(payload, dataset):
    """``(HardRule, SoftRuleParams)`` for every stored subgroup."""
    return [(HardRule.from_dict(rec["rule"], dataset.feature_names),
             SoftRuleParams.from_dict(rec["soft_params"])) for rec in payload["subgroups"]]


def run_prune(payload: dict, threshold: float, input_override=None, use_cache=True) -> dict:
    """Prune every stored rule; returns a new payload with ``pruned`` entries."""
    dataset = dataset_for(payload, input_override)
    forest_cfg = ForestConfig(**payload["config"]["forest"])
    matrix, _ = cache.load_or_fit_matrix(dataset, forest_cfg, use_cache)
    exc = exceptionality_vector(matrix, population_curve(matrix))
    config = PruneConfig(threshold)
    new = json.loads(json.dumps(payload))
    new["config"]["prune_threshold"] = threshold
    for rec, (rule, params) in zip(new["subgroups"], payload_rules(payload, dataset)):
        mask = membership(rule, dataset.features)
        original = SubgroupResult(params, rule, mask, hard_exceptionality(mask, exc), None)
        pruned = summarize(dataset, prune_rule(dataset, params, config), exc)
        rec["pruned"] = _prune_record(dataset, original, pruned)
    return new


def run_validate(payload: dict, null_runs: int, fast: bool = False, threads: int = 1,
                 input_override=None, use_cache=True) -> dict:
    dataset = dataset_for(payload, input_override)
    forest_cfg = ForestConfig(**payload["config"]["forest"])
    learner_cfg = LearnerConfig(**payload["config"]["learner"])
    _, _, null_seed = derive_seeds(payload["config"]["seed"])
    null = null_model(dataset, forest_cfg, learner_cfg, null_runs, len(payload["subgroups"]),
                      null_seed, threads, fast, use_cache)
    new = json.loads(json.dumps(payload))
    attach_p_values(new["subgroups"], null)
    new["null_model"] = null.to_dict(with_scores=False) | {"fast": fast}
    return new
