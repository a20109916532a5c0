"""Batch front-end.

    cetool run --config CONFIG.json [--moduli linear|envelope] [--budget N]
               [--out DIR] [--seed N] [--families a,b] [--workers N]
    cetool explain REPORT.json --t N

Exit status of ``run``: 0 when every scenario passes, 1 on any bound
violation or failed invariant, 2 on a malformed config, 3 when an instance
does not fit the enumeration budget.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import (BoundReport, abstract_lipschitz, ce_policy, explain, format_float,
                     reports_to_csv, solve, theorem_bound, verify_theorem)
from .abstraction import build_abstract_mdp
from .mdp import backward_induction
from .modelio import ModelFormatError, dumps, instance_to_dict, load_model
from .moduli import ModulusError, fit_moduli
from .pomdp import BudgetExceeded, HistoryTree, budget_from_env, simulate
from .scenarios import Instance, ScenarioSpec, SpecError, generate, suite_sizes

log = logging.getLogger("cetool")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class Job:
    index: int
    label: str
    family: str
    spec: ScenarioSpec | None = None
    model: str | None = None
    sweep: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    jobs: list
    moduli: str = "linear"
    tolerance: float = 1e-9
    budget: int = 200_000
    out: str = "cetool-out"
    seed: int = 0
    workers: int = 1
    mc_samples: int = 2000


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("_")[:80]


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse a run config; errors name the offending line or field."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    seed = int(ov.get("seed", doc.get("seed", 0)))
    entries = doc.get("scenarios")
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: field 'scenarios' must be a non-empty list")
    jobs = []
    for i, entry in enumerate(entries):
        where = f"{path}: scenarios[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be an object")
        if "model" in entry:
            model = Path(entry["model"])
            if not model.is_absolute():
                model = path.parent / model
            jobs.append(Job(len(jobs), entry.get("name", model.stem), "model", model=str(model)))
            continue
        if "family" not in entry:
            raise ConfigError(f"{where}: needs 'family' or 'model'")
        params = dict(entry.get("params", {}))
        sweep = entry.get("sweep", {})
        count = int(entry.get("count", 1))
        if not isinstance(sweep, dict) or any(not isinstance(v, list) for v in sweep.values()):
            raise ConfigError(f"{where}: 'sweep' must map parameter names to lists")
        keys = sorted(sweep)
        for combo in itertools.product(*(sweep[k] for k in keys)) if keys else [()]:
            for c in range(count):
                p = dict(params, **dict(zip(keys, combo)))
                if entry["family"] == "random":
                    p.setdefault("seed", seed + c)
                    if entry.get("sizes") == "suite":
                        s = suite_sizes(p["seed"])
                        for k, v in zip(("n_states", "n_obs", "n_actions", "T"), s):
                            p.setdefault(k, v)
                spec = ScenarioSpec(entry["family"], p, entry.get("name"))
                try:
                    spec.config()
                except (SpecError, TypeError) as exc:
                    raise ConfigError(f"{where}: {exc}") from None
                label = entry.get("name") or entry["family"]
                tag = ",".join(f"{k}={v}" for k, v in sorted(p.items()) if k in keys or k == "seed")
                jobs.append(Job(len(jobs), f"{label}({tag})" if tag else label, entry["family"],
                                spec=spec, sweep=dict(zip(keys, combo))))
    moduli = ov.get("moduli", doc.get("moduli", "linear"))
    if moduli not in ("linear", "envelope"):
        raise ConfigError(f"{path}: field 'moduli' must be 'linear' or 'envelope'")
    # precedence: command line, then CETOOL_BUDGET, then the config file
    budget = int(ov["budget"]) if "budget" in ov else budget_from_env(int(doc.get("budget", 200_000)))
    if budget <= 0:
        raise ConfigError(f"{path}: field 'budget' must be positive")
    families = ov.get("families")
    if families:
        jobs = [j for j in jobs if j.family in families]
        for k, j in enumerate(jobs):
            j.index = k
        if not jobs:
            raise ConfigError(f"no scenarios left after filtering by {sorted(families)}")
    return RunConfig(jobs, moduli, float(doc.get("tolerance", 1e-9)), budget,
                     ov.get("out", doc.get("out", "cetool-out")), seed,
                     int(ov.get("workers", doc.get("workers", 1))),
                     int(doc.get("mc_samples", 2000)))


def _instance(job: Job) -> Instance:
    if job.model:
        p, ab, g = load_model(job.model)
        return Instance(job.label, "model", p, ab, g)
    return generate(job.spec)


def bound_only_report(inst: Instance, kind: str, samples: int, seed: int) -> BoundReport:
    """Bound from the family's estimation-error ceiling; CE cost by simulation."""
    p, ab, g = inst.pomdp, inst.abstraction, inst.estimator
    mt = build_abstract_mdp(p.mdp(), ab)
    pi, V = backward_induction(mt)
    lipV = abstract_lipschitz(mt, V)
    Fc, FP = fit_moduli(p.mdp(), ab, kind)
    eta = np.full(p.T, inst.closed_form["eta_ceiling"])
    core = theorem_bound(eta, Fc, FP, lipV)
    _, _, _, cost = simulate(p, ce_policy(pi, g), samples, np.random.default_rng(seed))
    nan = np.full(p.T, np.nan)
    return BoundReport(inst.name, p.T, eta, core.eps, core.delta, lipV[:p.T], core.alpha,
                       core.bound, nan, nan, moduli_kind=kind, Fc=Fc, FP=FP,
                       notes=["bound-only mode: eta is the closed-form ceiling, no exact oracle"],
                       extra={"mc_ce_cost_mean": float(cost.mean()),
                              "mc_ce_cost_stderr": float(cost.std(ddof=1) / np.sqrt(samples)),
                              "abstract_value_mean": float(V[0][ab.phi] @ p.xi.sum(axis=1))})


def run_job(job: Job, cfg: RunConfig) -> dict:
    """Run one scenario and write its artifacts; returns a summary record."""
    rec = {"index": job.index, "label": job.label, "family": job.family, "sweep": job.sweep}
    outdir = Path(cfg.out) / f"{job.index:04d}-{_slug(job.label)}"
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        inst = _instance(job)
        if inst.bound_only:
            rep = bound_only_report(inst, cfg.moduli, cfg.mc_samples, cfg.seed + job.index)
            tree = None
        else:
            tree = HistoryTree.build(inst.pomdp, budget=cfg.budget)
            sol = solve(inst.pomdp, inst.abstraction, inst.estimator, cfg.moduli, tree=tree)
            rep = verify_theorem(inst.pomdp, inst.abstraction, inst.estimator, cfg.moduli,
                                 strict=False, instance_id=job.label, tol=cfg.tolerance,
                                 solution=sol)
        rep.instance_id = job.label
        if "eta_ceiling" in inst.closed_form and not inst.bound_only:
            rep.extra["eta_ceiling"] = inst.closed_form["eta_ceiling"]
        if "Lc_target" in inst.closed_form:
            rep.extra.update(
                Lc_target=inst.closed_form["Lc_target"], LP_target=inst.closed_form["LP_target"],
                Lc_fitted=max((F.slopes()[-1] for F in rep.Fc if F.slopes()), default=0.0),
                LP_fitted=max((F.slopes()[-1] for F in rep.FP if F.slopes()), default=0.0))
    except BudgetExceeded as exc:
        rec.update(status="budget", error=f"{job.label}: {exc}")
        return rec
    except (ModelFormatError, SpecError) as exc:
        rec.update(status="config", error=f"{job.label}: {exc}")
        return rec
    except ModulusError as exc:
        rec.update(status="fail", error=f"{job.label}: {exc}")
        return rec
    (outdir / "report.json").write_text(json.dumps(rep.to_dict(), indent=1, sort_keys=True))
    (outdir / "report.csv").write_text(reports_to_csv([rep]))
    if tree is not None:
        (outdir / "instance.json").write_text(
            dumps(instance_to_dict(inst.pomdp, inst.abstraction, inst.estimator, tree)))
    gap, bound = rep.gap, rep.bound
    ok = ~np.isnan(gap)
    ratio = gap[ok] / np.where(bound[ok] > 0, bound[ok], np.inf)
    rec.update(status="pass" if rep.passed else "fail", report=rep.to_dict(),
               worst_slack=float(np.nanmin(rep.slack)) if ok.any() else None,
               max_ratio=float(ratio.max()) if ratio.size else None,
               violations=len(rep.violations), csv=reports_to_csv([rep]))
    return rec


def _summary_table(records) -> str:
    fams: dict = {}
    for r in records:
        f = fams.setdefault(r["family"], {"n": 0, "fail": 0, "slack": None, "ratio": None})
        f["n"] += 1
        f["fail"] += r["status"] != "pass"
        for key, pick in (("slack", min), ("ratio", max)):
            v = r.get("worst_slack" if key == "slack" else "max_ratio")
            if v is not None:
                f[key] = v if f[key] is None else pick(f[key], v)
    lines = [f"{'family':<18}{'runs':>6}{'failed':>8}{'worst slack':>24}{'max gap/bound':>24}"]
    for name in sorted(fams):
        f = fams[name]
        lines.append(f"{name:<18}{f['n']:>6}{f['fail']:>8}"
                     f"{format_float(f['slack']) or '-':>24}{format_float(f['ratio']) or '-':>24}")
    return "\n".join(lines) + "\n"


def _sweep_files(records, out: Path):
    groups: dict = {}
    for r in records:
        if r.get("sweep") and r["status"] in ("pass", "fail") and len(r["sweep"]) == 1:
            (k, v), = r["sweep"].items()
            base = re.sub(r"\(.*", "", r["label"])
            groups.setdefault((base, k), []).append((v, r["report"]))
    for (base, k), rows in groups.items():
        rows.sort(key=lambda kv: kv[0])
        T = rows[0][1]["T"]
        head = [k] + [f"bound_t{t}" for t in range(1, T + 1)] + [f"gap_t{t}" for t in range(1, T + 1)]
        lines = ["# " + " ".join(head)]
        for v, rep in rows:
            vals = [format_float(float(v))] + [format_float(x) for x in rep["bound"]] + \
                   [format_float(x) for x in rep["gap"]]
            lines.append(" ".join(x or "nan" for x in vals))
        (out / f"sweep-{_slug(base)}-{_slug(k)}.dat").write_text("\n".join(lines) + "\n")


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(run_job, cfg.jobs, itertools.repeat(cfg)))
    else:
        records = [run_job(j, cfg) for j in cfg.jobs]
    records.sort(key=lambda r: r["index"])
    (out / "bounds.csv").write_text(
        "instance_id,t,eta,eps,delta,lipV,alpha,bound,gap,slack\n"
        + "".join(r["csv"].split("\n", 1)[1] for r in records if "csv" in r))
    (out / "summary.txt").write_text(_summary_table(records))
    _sweep_files(records, out)
    verdict = {
        "passed": all(r["status"] == "pass" for r in records),
        "scenarios": [{k: r.get(k) for k in ("index", "label", "family", "status", "worst_slack",
                                              "max_ratio", "violations", "error")} for r in records],
    }
    (out / "verdict.json").write_text(json.dumps(verdict, indent=1, sort_keys=True))
    for r in records:
        if r["status"] != "pass":
            log.error("%s: %s", r["label"], r.get("error") or f"{r['violations']} bound violation(s)")
    sys.stdout.write(_summary_table(records))
    statuses = {r["status"] for r in records}
    if "fail" in statuses:
        return EXIT_FAIL
    if "config" in statuses:
        return EXIT_CONFIG
    if "budget" in statuses:
        return EXIT_BUDGET
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    ap = argparse.ArgumentParser(prog="cetool", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run scenarios from a config file")
    r.add_argument("--config", required=True, help="JSON run configuration")
    r.add_argument("--moduli", choices=("linear", "envelope"), help="modulus fit (default: config, else linear)")
    r.add_argument("--budget", type=int, help="max history-tree nodes per scenario (beats CETOOL_BUDGET)")
    r.add_argument("--out", help="output directory (default: config, else cetool-out)")
    r.add_argument("--seed", type=int, help="base seed for random families and Monte Carlo")
    r.add_argument("--families", type=lambda s: [x for x in s.split(",") if x],
                   help="comma-separated family filter")
    r.add_argument("--workers", type=int, help="parallel worker processes")
    e = sub.add_parser("explain", help="decompose alpha_t of a saved report")
    e.add_argument("report", help="report.json written by run")
    e.add_argument("--t", type=int, required=True, help="1-based step")
    args = ap.parse_args(argv)

    if args.cmd == "explain":
        try:
            rep = BoundReport.from_dict(json.loads(Path(args.report).read_text()))
            print(explain(rep, args.t))
        except (OSError, ValueError, KeyError) as exc:
            log.error("%s", exc)
            return EXIT_CONFIG
        return EXIT_OK

    try:
        cfg = load_config(args.config, {"moduli": args.moduli, "budget": args.budget, "out": args.out,
                                        "seed": args.seed, "families": args.families,
                                        "workers": args.workers})
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
