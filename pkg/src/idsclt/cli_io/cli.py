"""Command-line entry point: ``idsclt <subcommand> [--config PATH] [--out DIR] ...``.

Every flag has an environment override ``IDSCLT_<FLAG>`` (for example
``IDSCLT_SEED``); flags win over the environment, which wins over the config.

Exit codes: 0 success, 1 failed invariants, 2 invalid configuration,
3 numerical or runtime error, 4 incompatible shards, 5 interrupted run.
Failures print a one-line JSON summary on stderr.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from pathlib import Path

from ..errors import ConfigError, ShardMismatchError
from ..experiments import (bc_difference, combes_thomas_profile, decomposition_residual, fixed_operator, ids_estimate,
                           interior_trace_gap, moment_scan, normality_test, positivity_check, variance_estimate,
                           variance_formula)
from ..geometry import annuli_plan
from .config import RunConfig, apply_overrides, load_config
from .export import decay_plot, export_csv, export_json, qq_plot, scaling_plot
from .invariants import run_checks
from .persist import ChunkBudget, Interrupted, code_version, environment_fingerprint, run_sharded

ENV_PREFIX = "IDSCLT_"
COMMANDS = ("check", "ensemble", "clt", "bc-compare", "variance-formula", "decay", "decompose", "lln")


class Runner:
    def __init__(self, cfg: RunConfig, out: Path, args):
        self.cfg = cfg
        self.out = out
        self.args = args
        self.budget = ChunkBudget(args.max_chunks)
        self.outputs = []
        out.mkdir(parents=True, exist_ok=True)

    def log(self, msg: str) -> None:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        with open(self.out / "run.log", "a") as fh:
            fh.write(f"{stamp} {self.args.command} {msg}\n")

    def ensemble(self, L: int, bc: str, samples: int | None = None):
        spec = self.cfg.spec(L, bc, samples)
        chunk = self.args.chunk or self.cfg["chunk"]
        try:
            res = run_sharded(spec, self.out / "shards" / f"L{L}_{bc}", chunk, self.args.resume, self.budget,
                              self.cfg["threads"] or os.cpu_count() or 1)
        finally:
            self.log(f"ensemble L={L} bc={bc} n={spec.n_samples}")
        return res

    def emit(self, name: str, record) -> None:
        export_json(record, self.out / name)
        self.outputs.append(name)

    def manifest(self) -> None:
        cfg = self.cfg
        seeds = {str(L): {"ensemble_seed": cfg.ensemble_seed(L), "rule": "derive_seed(seed, L)",
                          "sample_stream": "(j,)"} for L in sorted(set(cfg["L"]) | set(cfg["plan"]["L"]))}
        export_json({
            "command": self.args.command, "config_hash": cfg.hash(), "code_version": code_version(),
            "environment": environment_fingerprint(), "config": cfg.to_manifest(), "seeds": seeds,
            "outputs": sorted(self.outputs),
        }, self.out / "manifest.json")


def _ensembles(r: Runner, bc: str | None = None) -> dict:
    bc = bc or r.cfg["bc"]
    out = {}
    for L in sorted(r.cfg["L"]):
        res = r.ensemble(L, bc)
        export_csv(res, r.out / f"ensemble_L{L}_{bc}.csv")
        r.outputs.append(f"ensemble_L{L}_{bc}.csv")
        out[L] = res
    return out


def cmd_ensemble(r: Runner) -> int:
    res = _ensembles(r)
    est = [variance_estimate(x, r.cfg["bootstrap"], r.cfg["seed"]) for x in res.values()]
    r.emit("stats.json", {"ensembles": [{"L": x.L, "bc": x.bc, "n": x.n, "mean": x.mean, "variance": x.variance}
                                        for x in res.values()],
                          "variance": [e.to_dict() for e in est]})
    return 0


def cmd_clt(r: Runner) -> int:
    res = _ensembles(r)
    nb, seed = r.cfg["bootstrap"], r.cfg["seed"]
    est = [variance_estimate(x, nb, seed) for x in res.values()]
    norm = {L: normality_test(x.z, nb, seed) for L, x in res.items()}
    record = {"normality": [{"L": L, **n.to_dict()} for L, n in norm.items()],
              "variance": [e.to_dict() for e in est]}
    if len(res) >= 2:
        rows, spread = moment_scan(res.values())
        record["moments"] = {"rows": [row.__dict__ for row in rows], "spread": spread}
    record["positivity"] = positivity_check(est[-1]).positive
    r.emit("stats.json", record)
    largest = res[max(res)]
    qq_plot(largest, r.out / "qq.svg")
    scaling_plot(est, r.out / "scaling.svg")
    r.outputs += ["qq.svg", "scaling.svg"]
    return 0


def cmd_bc_compare(r: Runner) -> int:
    rd = _ensembles(r, "dirichlet")
    rn = _ensembles(r, "neumann")
    rows = []
    for L in rd:
        c = bc_difference(rd[L], rn[L], r.cfg["bootstrap"], r.cfg["seed"])
        rows.append({"L": L, "value": c.value, "se": c.se, "n": c.n,
                     "dirichlet": c.var_dirichlet.to_dict(), "neumann": c.var_neumann.to_dict()})
    r.emit("bc_compare.json", {"rows": rows})
    return 0


def cmd_variance_formula(r: Runner) -> int:
    p = r.cfg["formula"]
    spec = r.cfg.spec(max(r.cfg["L"]))
    est = variance_formula(spec, p["L_p"], p["N_out"], p["N_in"], p["Q"], seed=r.cfg["seed"], replicas=p["replicas"])
    r.log(f"variance-formula L_p={p['L_p']} N_out={p['N_out']}")
    r.emit("formula.json", est.to_dict())
    return 0


def cmd_decay(r: Runner) -> int:
    p = r.cfg["decay"]
    spec = r.cfg.spec(p["L"], "dirichlet", 2)
    gaps = interior_trace_gap(spec, tuple(p["ells"]), p["inner_L"], p["sample"])
    record = {"gaps": {k: {"ells": list(g.ells), "gaps": list(g.gaps), **(g.fit.to_dict() if g.fit else {})}
                       for k, g in gaps.items()}}
    profiles = [(k, g.fit) for k, g in gaps.items() if g.fit is not None]
    f = spec.f.laurent
    if f is not None:
        H = fixed_operator(spec, p["sample"])
        ct = combes_thomas_profile(H, f.E, f.m, p["distances"])
        record["combes_thomas"] = ct.to_dict()
        profiles.append(("resolvent block norm", ct))
    r.emit("decay.json", record)
    if profiles:
        decay_plot(profiles, r.out / "decay.svg")
        r.outputs.append("decay.svg")
    return 0


def cmd_decompose(r: Runner) -> int:
    p = r.cfg["plan"]
    rows = []
    for L in sorted(p["L"]):
        plan = annuli_plan(r.cfg.d, L, p["eps"], p["delta"], p["gamma"], p["alpha"], p["R"])
        res = decomposition_residual(r.cfg.spec(L, "dirichlet", p["samples"]), plan)
        r.log(f"decompose L={L}")
        rows.append(res.to_dict())
    r.emit("decompose.json", {"rows": rows})
    return 0


def cmd_lln(r: Runner) -> int:
    rd = _ensembles(r, "dirichlet")
    rn = _ensembles(r, "neumann")
    out = {}
    for bc, res in (("dirichlet", rd), ("neumann", rn)):
        rows, changes = ids_estimate(res.values())
        out[bc] = {"rows": [row.__dict__ for row in rows], "relative_changes": changes}
    L = max(rd)
    a, b = rd[L].mean / rd[L].volume, rn[L].mean / rn[L].volume
    out["bc_relative_difference"] = abs(a - b) / abs(a)
    r.emit("lln.json", out)
    return 0


def cmd_check(r: Runner) -> int:
    results = run_checks()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    r.emit("check.json", {"checks": [{"name": n, "passed": ok, "detail": d} for n, ok, d in results]})
    failed = [n for n, ok, _ in results if not ok]
    if failed:
        _fail(1, "invariants", f"{len(failed)} invariant(s) failed", failed=failed)
    return 1 if failed else 0


HANDLERS = {
    "check": cmd_check, "ensemble": cmd_ensemble, "clt": cmd_clt, "bc-compare": cmd_bc_compare,
    "variance-formula": cmd_variance_formula, "decay": cmd_decay, "decompose": cmd_decompose, "lln": cmd_lln,
}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    print(json.dumps({"status": "error" if code != 5 else "incomplete", "exit_code": code, "kind": kind,
                      "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idsclt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration (default: bundled d=1 scenario)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int, help="master seed (u64)")
    ap.add_argument("--samples", type=int, help="ensemble size N_s")
    ap.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU")
    ap.add_argument("--resume", action="store_true", help="reuse shards and compute only missing samples")
    ap.add_argument("--chunk", type=int, help="samples per persisted shard")
    ap.add_argument("--max-chunks", type=int, help="stop after this many chunks (simulates an interruption)")
    return ap


def _env(args) -> None:
    for name in ("config", "out", "seed", "samples", "threads", "chunk", "max_chunks"):
        if getattr(args, name) is None:
            val = os.environ.get(ENV_PREFIX + name.upper())
            if val is not None:
                setattr(args, name, val if name in ("config", "out") else int(val))
    if not args.resume and os.environ.get(ENV_PREFIX + "RESUME", "").lower() in ("1", "true", "yes"):
        args.resume = True


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _env(args)
        cfg = load_config(args.config)
        cfg = apply_overrides(cfg, seed=args.seed, samples=args.samples, threads=args.threads, out=args.out)
    except ConfigError as exc:
        return _fail(2, "config", "invalid configuration", violations=exc.violations)
    except (OSError, ValueError) as exc:
        return _fail(2, "config", str(exc))
    runner = Runner(cfg, Path(cfg["out"]), args)
    try:
        code = HANDLERS[args.command](runner)
    except Interrupted as exc:
        runner.log(f"interrupted: {exc}")
        return _fail(5, "interrupted", str(exc), resume_hint="rerun with --resume")
    except ShardMismatchError as exc:
        return _fail(4, "shards", str(exc), expected=exc.expected, found=exc.found)
    except ConfigError as exc:
        return _fail(2, "config", "invalid configuration", violations=exc.violations)
    except Exception as exc:
        return _fail(3, type(exc).__name__, str(exc))
    runner.manifest()
    runner.log(f"done exit={code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
