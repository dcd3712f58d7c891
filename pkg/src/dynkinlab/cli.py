"""Command-line experiment runner.

Every subcommand reads one JSON config, writes CSV artifacts plus
``summary.json`` into the output directory and exits with 0 (all checks
passed), 1 (a verification failed) or 2 (configuration error). CSV bodies
depend only on the config and seed; timestamps go to the summary alone.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, acceptance, backend, bounds, dynkin_hunt, estimate, oracles, scale
from .config import SUBCOMMANDS, ConfigValidationError, RunConfig, load, validate
from .process import sample_paths, write_paths
from .space import ConfigError, Line, OpenSetSpec

OUT_ENV = "DYNKINLAB_OUT"
DEFAULT_OUT = "dynkinlab_out"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return "" if v is None else v


class _Run:
    """Collects artifacts and checks for one subcommand invocation."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        self.checks: dict = {}

    def csv(self, name: str, header: list, rows) -> None:
        with open(self.out / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
        self.files.append(name)

    def writer(self, name: str, fn) -> None:
        with open(self.out / name, "w", newline="", encoding="utf-8") as fh:
            fn(fh)
        self.files.append(name)

    def check(self, name: str, passed: bool, **info) -> None:
        self.checks[name] = {"passed": bool(passed), **info}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())


def _jsonable(o):
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    return o


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _write_summary(out: Path, payload: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------ subcommands


def _phi(cfg: RunConfig, run: _Run, threads: int) -> None:
    g = cfg.phi
    R = np.logspace(math.log10(g["R"][0]), math.log10(g["R"][1]), int(g["R"][2]))
    t = np.logspace(math.log10(g["t"][0]), math.log10(g["t"][1]), int(g["t"][2]))
    RR, TT = np.meshgrid(R, t, indexing="ij")
    fns = [(f"power_{b!r}", scale.ScaleFunction.power(b), b) for b in g.get("betas", [])]
    if cfg.scale_function is not None:
        sf = cfg.scale_function
        beta = sf.beta1 if sf.kind == "power" else None
        fns.append((sf.kind, sf, beta))
    rows = []
    for name, sf, beta in fns:
        num = scale.phi_eval(sf, RR, TT)
        if beta is not None:
            closed = scale.phi_power_closed_form(beta, RR, TT)
            rel = np.abs(num - closed) / np.maximum(np.abs(closed), 1e-300)
            worst = float(np.max(rel))
            run.check(f"closed_form[{name}]", worst <= 1e-6, max_rel_error=worst)
        else:
            closed = np.full_like(num, np.nan)
            rel = np.full_like(num, np.nan)
            rep = scale.phi_sandwich_check(sf, R, t)
            run.check(f"sandwich[{name}]", rep.passed, summary=rep.summary())
        for i in range(RR.size):
            c = closed.flat[i]
            rows.append([name, RR.flat[i], TT.flat[i], num.flat[i], None if np.isnan(c) else c,
                         None if np.isnan(rel.flat[i]) else rel.flat[i]])
    run.csv("phi.csv", ["scale_function", "R", "t", "phi_numeric", "phi_closed", "rel_error"], rows)


def _x0(cfg: RunConfig, x):
    return int(x) if cfg.model.kind == "gasket_walk" else float(x)


def _simulate(cfg: RunConfig, run: _Run, threads: int) -> None:
    e = cfg.estimator
    x0 = _x0(cfg, e.xs[0])
    batch = sample_paths(cfg.model, x0, e.horizon, e.dt, cfg.seed, 0, e.n_paths, e.bridge, threads)
    write_paths(str(run.out / "paths.bin"), batch)
    run.files.append("paths.bin")
    st = batch.states
    if cfg.model.kind == "gasket_walk":
        alive = st >= 0
    else:
        alive = np.isfinite(st)
    revived = int(np.sum(np.any(~alive[:, :-1] & alive[:, 1:], axis=1)))
    run.check("cemetery_absorbing", revived == 0, violations=revived)
    rows = [[i, st[i, -1] if alive[i, -1] else None, int(batch.kill_steps[i])] for i in range(st.shape[0])]
    run.csv("endpoints.csv", ["path", "x_end", "kill_step"], rows)


def _estimate(cfg: RunConfig, run: _Run, threads: int) -> None:
    e, m = cfg.estimator, cfg.model
    U, A = cfg.sets["U"], cfg.sets["A"]
    rows, bad = [], 0
    for x in e.xs:
        for t in e.times:
            pe, fe, part, full = estimate.part_and_full(m, _x0(cfg, x), t, U, A, e.n_paths, cfg.seed, e.dt,
                                                        e.bridge, threads)
            bad += int(np.sum(part & ~full))
            rows.append([x, t, pe.value, pe.se, fe.value, fe.se, e.n_paths])
    run.csv("estimate.csv", ["x", "t", "part", "part_se", "full", "full_se", "n_paths"], rows)
    run.check("part_le_full", bad == 0, violations=bad)
    if cfg.window is not None and m.kind != "gasket_walk":
        tele = True
        for i, x in enumerate(e.xs):
            for j, t in enumerate(e.times):
                ke = estimate.density_extract(m, float(x), t, U, cfg.window, e.depth, e.n_paths, cfg.seed,
                                              e.dt, e.bridge, threads)
                tele &= ke.telescoping_exact()
                run.writer(f"density_x{i}_t{j}.csv", ke.write_csv)
        run.check("telescoping_exact", tele)


_LEDGER_HEADER = ["x", "t", "lhs", "lhs_se", "part", "rhs", "n_terms", "remainder", "diff", "combined_se",
                  "oracle", "oracle_ok", "passed"]


def _ledger_rows(run: _Run, ledgers, prefix: str) -> list:
    rows = []
    for led in ledgers:
        rows.append([led.x, led.t, led.lhs.value, led.lhs.se, led.part.value, led.rhs, led.n_used,
                     led.remainder, led.diff.value, led.combined_se, led.oracle, led.oracle_ok, led.passed])
        key = f"{prefix}[x={led.x!r},t={led.t!r}]"
        run.check(key, led.passed and led.oracle_ok is not False, diff=led.diff.value, se=led.combined_se)
    return rows


def _terms_rows(ledgers) -> list:
    rows = []
    for led in ledgers:
        rows.append([led.x, led.t, 0, led.part.value, led.part.se, 1.0])
        for n, p in enumerate(led.p_sigma, start=1):
            e = led.terms[n - 1] if n <= len(led.terms) else None
            rows.append([led.x, led.t, n, None if e is None else e.value, None if e is None else e.se, p])
    return rows


def _verify_mdh(cfg: RunConfig, run: _Run, threads: int) -> None:
    e = cfg.estimator
    U, B = cfg.sets["U"], cfg.sets["B"]
    A = cfg.sets.get("A", B)
    leds = []
    for x in e.xs:
        leds += dynkin_hunt.verify_multiple_dh(cfg.model, U, B, A, e.times, x, e.n_paths, cfg.seed, e.dt,
                                               e.bridge, e.n_max, e.m_inner, threads=threads)
    run.csv("mdh.csv", _LEDGER_HEADER, _ledger_rows(run, leds, "mdh"))
    run.csv("mdh_terms.csv", ["x", "t", "n", "e_n", "se_n", "p_sigma_n_le_t"], _terms_rows(leds))


def _verify_dh(cfg: RunConfig, run: _Run, threads: int) -> None:
    e = cfg.estimator
    leds = []
    for x in e.xs:
        leds += dynkin_hunt.verify_single_dh(cfg.model, cfg.sets["U"], cfg.sets["A"], e.times, x, e.n_paths,
                                             cfg.seed, e.dt, e.bridge, e.m_inner, threads=threads)
    run.csv("dh.csv", _LEDGER_HEADER, _ledger_rows(run, leds, "dh"))


def _exit_prob(cfg: RunConfig, run: _Run, threads: int) -> None:
    e, m = cfg.estimator, cfg.model
    c, g, sf = cfg.constants.get("c"), cfg.constants.get("gamma"), cfg.scale_function
    rows = []
    for x in e.xs:
        grid = estimate.exit_prob_grid(m, _x0(cfg, x), e.radii, e.times, e.n_paths, cfg.seed, e.dt,
                                       e.bridge, threads)
        for (r, t), est in sorted(grid.items()):
            ref = None
            if m.kind == "brownian_line":
                ref = oracles.interval_exit_prob(float(x), t, x - r, x + r, m.scale)
                z = (est.value - ref) / est.se if est.se > 0 else (0.0 if est.value == ref else math.inf)
                run.check(f"oracle[x={x!r},r={r!r},t={t!r}]", abs(z) <= 3.0, z=z)
            bound = None
            if c is not None and g is not None and sf is not None:
                bound = bounds.exit_bound(sf, c, g, r, t)
                run.check(f"bound[x={x!r},r={r!r},t={t!r}]", est.value <= bound + 3.0 * est.se)
            rows.append([x, r, t, est.value, est.se, ref, bound])
    run.csv("exit_prob.csv", ["x", "r", "t", "estimate", "se", "oracle", "bound"], rows)


def _verify_chain(cfg: RunConfig, run: _Run, threads: int) -> None:
    e, m, sf = cfg.estimator, cfg.model, cfg.scale_function
    x = e.xs[0] if e.xs else 0.0
    consts = cfg.constants
    if "eps" in consts:
        eps3, witness = consts["eps"], None
    else:
        r = consts.get("R", max(e.radii))
        cap = float(scale.psi_eval(sf, r))
        w = estimate.mean_exit_time(m, x, r, cap, e.n_paths, cfg.seed, e.dt, bridge=e.bridge, threads=threads)
        eps3 = (w.value - 3.0 * w.se) / cap
        witness = {"r": r, "cap": cap, "mean": w.value, "se": w.se}
    inputs = {"eps": eps3, "delta": consts.get("delta", 1.0), "c_psi": sf.c_psi, "beta1": sf.beta1,
              "beta2": sf.beta2}
    steps = bounds.compose_chain(["3->4", "4->5", "5->6"], inputs)
    c, g = steps[-1]["c"], steps[-1]["gamma"]
    rows = [[s["step"], k, v] for s in steps for k, v in s.items() if k != "step"]
    run.csv("chain.csv", ["step", "name", "value"], [["3", "eps", eps3]] + rows)
    samples = [(float(x), r) for r in e.radii]
    rep = bounds.verify_p_condition(m, OpenSetSpec.whole(), math.inf, sf, c, g, samples, e.times, e.n_paths,
                                    cfg.seed, e.dt, e.bridge, threads)
    neg = bounds.verify_p_condition(m, OpenSetSpec.whole(), math.inf, sf, c, 100.0 * g, samples, e.times,
                                    e.n_paths, cfg.seed, e.dt, e.bridge, threads)
    run.writer("chain_check.csv", rep.write_csv)
    run.writer("chain_negative_control.csv", neg.write_csv)
    run.check("condition_6_dominates", rep.passed, worst_slack=rep.worst_slack, c=c, gamma=g, eps3=eps3,
              witness=witness)
    run.check("negative_control_fails", not neg.passed, worst_slack=neg.worst_slack)


def _bound_function(cfg: RunConfig, space):
    b = cfg.bound_function
    if b["kind"] == "power":
        return bounds.BoundFunction.power(b["c3"], b["alpha1"], b.get("alpha2", 0.0), b.get("alpha3", 0.0),
                                          b.get("c_F"), b.get("alpha_F"))
    return bounds.BoundFunction.volume(b["c4"], space, cfg.scale_function, b["c_vd"], b.get("c_F"),
                                       b.get("alpha_F"), cfg.constants.get("R"))


def _verify_du(cfg: RunConfig, run: _Run, threads: int) -> None:
    e = cfg.estimator
    F = _bound_function(cfg, cfg.model.space)
    rep = bounds.verify_du_condition(F, cfg.model, cfg.sets["U"], cfg.constants["R"], cfg.scale_function,
                                     e.samples, e.depth, e.n_paths, cfg.seed, e.dt, e.bridge, threads)
    run.writer("du_condition.csv", rep.write_csv)
    run.check("du_condition", rep.passed, worst_slack=rep.worst_slack)


def _verify_p(cfg: RunConfig, run: _Run, threads: int) -> None:
    e, k = cfg.estimator, cfg.constants
    rep = bounds.verify_p_condition(cfg.model, cfg.sets["U"], k["R"], cfg.scale_function, k["c"], k["gamma"],
                                    e.samples, e.times, e.n_paths, cfg.seed, e.dt, e.bridge, threads)
    run.writer("p_condition.csv", rep.write_csv)
    run.check("p_condition", rep.passed, worst_slack=rep.worst_slack)


def _bound_profile(cfg: RunConfig, run: _Run, threads: int) -> None:
    sf, k, e = cfg.scale_function, cfg.constants, cfg.estimator
    space = cfg.model.space if cfg.model is not None else Line()
    F = _bound_function(cfg, space)
    inputs = {"c_psi": sf.c_psi, "beta1": sf.beta1, "beta2": sf.beta2, "c_F": F.c_F, "alpha_F": F.alpha_F,
              "c": k["c"], "gamma": k["gamma"], "eps": k["eps"]}
    if "delta" in k:
        inputs["delta"] = k["delta"]
    led = bounds.derive_constants(inputs, k["mode"], k["overrides"] or None)
    run.writer("constants.csv", led.write_csv)
    run.check("ledger_complete", led.complete, flags=list(led.flags))
    if not led.complete:
        return
    glob = "delta" in inputs and led.global_complete
    rows, finite = [], True
    for x in e.xs:
        for t in e.times:
            for y in e.ys:
                r52 = bounds.theorem52_rhs(led, F, sf, k["R"], cfg.sets["U"], space, t, x, y)
                r54 = bounds.theorem54_rhs(led, F, sf, k["R"], space, t, x, y) if glob else None
                finite &= math.isfinite(r52) and (r54 is None or math.isfinite(r54))
                rows.append([x, t, y, r52, r54])
    run.csv("bound_profile.csv", ["x", "t", "y", "local_bound", "global_bound"], rows)
    run.check("finite", finite)


def _acceptance(cfg: RunConfig, run: _Run, threads: int) -> None:
    quick = bool(cfg.acceptance.get("quick", False))
    only = cfg.acceptance.get("criteria")
    if only is not None and not set(only) <= set(acceptance.CRITERIA):
        raise ConfigValidationError([f"acceptance.criteria: must be a subset of {sorted(acceptance.CRITERIA)}"])

    def report(res):
        print(res.line(), flush=True)

    results = acceptance.run_all(quick, cfg.seed, threads, only, report)
    run.csv("acceptance.csv", ["criterion", "name", "passed"], [[r.number, r.name, r.passed] for r in results])
    for r in results:
        run.check(f"criterion_{r.number:02d}", r.passed, name=r.name, runtime_s=r.runtime, details=r.details)


HANDLERS = {
    "phi": _phi, "simulate": _simulate, "estimate": _estimate, "verify-mdh": _verify_mdh,
    "verify-dh": _verify_dh, "exit-prob": _exit_prob, "verify-chain": _verify_chain, "verify-du": _verify_du,
    "verify-p": _verify_p, "bound-profile": _bound_profile, "acceptance": _acceptance,
}


# ----------------------------------------------------------------- driver


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dynkinlab", description="Monte Carlo exit-time and heat-kernel experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "acceptance", help="JSON run configuration")
        s.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
        s.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
        s.add_argument("--out", help=f"output directory (else ${OUT_ENV}, then config 'out')")
        if name == "acceptance":
            s.add_argument("--quick", action="store_true", help="reduced sample sizes, same tolerances")
            s.add_argument("--only", type=int, nargs="+", help="run only these criteria")
    return p


def _out_dir(args, raw: dict | None) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if raw and isinstance(raw.get("out"), str):
        return Path(raw["out"])
    return Path(DEFAULT_OUT)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = _now()
    base = {"subcommand": args.subcommand, "config": args.config, "version": __version__,
            "backend": backend.name(), "threads": args.threads, "started": started}
    raw = None
    try:
        if args.threads < 1:
            raise ConfigValidationError(["--threads: must be at least 1"])
        raw = load(args.config) if args.config else {}
        if args.subcommand == "acceptance":
            raw.setdefault("seed", acceptance.ACCEPTANCE_SEED)
            acc = raw.setdefault("acceptance", {})
            if args.quick:
                acc["quick"] = True
            if args.only:
                acc["criteria"] = args.only
        cfg = validate(raw, args.subcommand, args.seed, None)
    except ConfigValidationError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        _write_summary(_out_dir(args, raw), {**base, "status": "config_error", "passed": False,
                                             "errors": exc.errors, "finished": _now()})
        return EXIT_CONFIG
    out = _out_dir(args, raw)
    out.mkdir(parents=True, exist_ok=True)
    base["seed"] = cfg.seed
    # placeholder first, so an interrupted run is never mistaken for a finished one
    _write_summary(out, {**base, "status": "incomplete", "passed": False})
    r = _Run(out)
    try:
        HANDLERS[args.subcommand](cfg, r, args.threads)
    except ConfigValidationError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        _write_summary(out, {**base, "status": "config_error", "passed": False, "errors": exc.errors,
                             "files": r.files, "finished": _now()})
        return EXIT_CONFIG
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _write_summary(out, {**base, "status": "config_error", "passed": False, "errors": [str(exc)],
                             "files": r.files, "finished": _now()})
        return EXIT_CONFIG
    status = "pass" if r.passed else "fail"
    _write_summary(out, {**base, "status": status, "passed": r.passed, "checks": r.checks, "files": r.files,
                         "finished": _now()})
    failed = [k for k, v in r.checks.items() if not v["passed"]]
    print(f"{args.subcommand}: {status.upper()} ({len(r.checks) - len(failed)}/{len(r.checks)} checks) -> {out}")
    for k in failed:
        print(f"  failed: {k}")
    return EXIT_PASS if r.passed else EXIT_FAIL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
