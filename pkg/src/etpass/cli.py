"""Command-line interface.

Four subcommands operate on run configs, given as a path or the name of a
bundled fixture:

- ``certify``: closed-form QSR certificate, L2-stability verdict, index
  budgets, and the largest admissible trigger levels.
- ``simulate``: run the event-triggered loop, verify the certified supply
  integrals along the trace, and export ``trace.csv``.
- ``sweep``: rerun the scenario over ``sweep.delta_grid``, tabulating the
  communication load against the per-level stability verdict.
- ``list-models``: the built-in model registry.

Reports print to stdout; ``--out DIR`` additionally writes ``report.txt``
and ``report.json`` (plus the CSV artifacts) with atomic replace, so a
half-written file is never observed.  Non-finite numbers become ``null``
in JSON.  Exit status: 0 when every requested check passed, 1 when a
check failed or a run diverged, 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

from .certificates import (
    Condition,
    Topology,
    interconnection_index_bounds,
    l2_stable,
    max_trigger_level,
    qsr_certificate,
    validate_trigger_level,
    w1_yp_index_bounds,
    w1_yp_passive,
)
from .config import (
    ConfigError,
    RunConfig,
    fixture_names,
    fixture_path,
    flatten_config,
    load_config,
)
from .dynamics import default_registry
from .eventsim import (
    CommStats,
    Scenario,
    _select_engine,
    comm_stats,
    scenario_with,
    simulate,
    trace_to_csv,
    validate_scenario,
)
from .signals import WhiteNoise, Zero
from .verify import (
    check_dissipation,
    io_passivity_series,
    l2_gain_estimate,
    qsr_supply_series,
)

__all__ = ["main"]

_SWEEP_FIELDS = (
    "delta",
    "stable",
    "diverged",
    "plant_events",
    "plant_ratio",
    "plant_min_interval",
    "controller_events",
    "controller_ratio",
    "controller_min_interval",
)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def _json_safe(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {key: _json_safe(val) for key, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(val) for val in obj]
    return obj


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _emit(args, text: str, payload: dict, extra_files: dict[str, str] | None = None) -> None:
    sys.stdout.write(text)
    if args.out is None:
        return
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_atomic(outdir / "report.txt", text)
    _write_atomic(outdir / "report.json", json.dumps(_json_safe(payload), indent=2) + "\n")
    written = ["report.txt", "report.json"]
    for name, content in (extra_files or {}).items():
        _write_atomic(outdir / name, content)
        written.append(name)
    print(f"wrote {', '.join(written)} to {outdir}", file=sys.stderr)


def _resolve_config(arg: str) -> Path:
    path = Path(arg)
    if path.is_file():
        return path
    if os.sep not in arg:
        return fixture_path(arg)
    raise ConfigError(f"config file not found: {arg}")


def _condition_lines(conds: tuple[Condition, ...]) -> list[str]:
    width = max(len(c.name) for c in conds)
    return [
        f"    {c.name:<{width}}  {_fmt(c.value):>14}  {'ok' if c.satisfied else 'VIOLATED'}"
        for c in conds
    ]


def _cert_dict(cert) -> dict:
    return {
        "topology": cert.topology.value,
        "q_p": cert.q_p,
        "q_c": cert.q_c,
        "r_p": cert.r_p,
        "r_c": cert.r_c,
        "s11": cert.s11,
        "s12": cert.s12,
        "s21": cert.s21,
        "s22": cert.s22,
        "beta_nu_c": cert.beta_c,
        "beta_nu_p": cert.beta_p,
    }


def _header_lines(cfg: RunConfig) -> list[str]:
    scn = cfg.scenario
    p, c = cfg.plant_indices, cfg.controller_indices
    lines = [
        f"topology    {scn.topology.value}",
        f"plant       {scn.plant}  (nu={_fmt(p.nu)}, rho={_fmt(p.rho)})",
        f"controller  {scn.controller}  (nu={_fmt(c.nu)}, rho={_fmt(c.rho)})",
    ]
    trigger = []
    if scn.delta_p is not None:
        trigger.append(f"delta_p={_fmt(scn.delta_p)}")
    if scn.delta_c is not None:
        trigger.append(f"delta_c={_fmt(scn.delta_c)}")
    lines.append(f"trigger     {', '.join(trigger) if trigger else '-'}")
    return lines


def _cmd_certify(args) -> int:
    cfg = load_config(_resolve_config(args.config))
    scn = cfg.scenario
    validate_scenario(scn)
    p, c = cfg.plant_indices, cfg.controller_indices

    cert = qsr_certificate(scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c)
    stab = l2_stable(cert)
    inter = interconnection_index_bounds(
        scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c
    )
    passive, channel_conds = w1_yp_passive(
        scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c
    )
    channel = w1_yp_index_bounds(scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c)
    budget = max_trigger_level(scn.topology, p, c)

    lines = _header_lines(cfg)
    lines += [
        "",
        "certificate  (V_dot <= w'Rw + 2w'Sy + y'Qy)",
        f"    Q = diag({_fmt(cert.q_p)}, {_fmt(cert.q_c)})",
        f"    R = diag({_fmt(cert.r_p)}, {_fmt(cert.r_c)})",
        f"    S = [[{_fmt(cert.s11)}, {_fmt(cert.s12)}], [{_fmt(cert.s21)}, {_fmt(cert.s22)}]]",
    ]
    if cert.beta_c is not None:
        lines.append(f"    beta(nu_c) = {_fmt(cert.beta_c)}")
    if cert.beta_p is not None:
        lines.append(f"    beta(nu_p) = {_fmt(cert.beta_p)}")
    lines += ["", f"L2 stability: {'STABLE' if stab.stable else 'NOT CERTIFIED'}"]
    lines += _condition_lines(stab.conditions)
    lines += [
        "",
        "interconnection (w1, w2) -> (y_p, y_c) index budget (strict)",
        f"    eps0   < {_fmt(inter.eps_sup)}",
        f"    delta0 < {_fmt(inter.delta_sup)}  (at eps0 = {_fmt(inter.eps0)})",
        f"    feasible: {_fmt(inter.feasible)}",
        "",
        f"channel w1 -> y_p with w2 = 0: {'passive' if passive else 'not certified'}",
    ]
    lines += _condition_lines(channel_conds)
    lines += [
        (
            "    eps0   = 0 exactly"
            if channel.eps_sup == 0.0
            else f"    eps0   < {_fmt(channel.eps_sup)}"
        ),
        f"    delta0 <= {_fmt(channel.delta_sup)}",
        f"    feasible: {_fmt(channel.feasible)}",
        "",
        "largest trigger levels keeping the stability certificate",
    ]
    if budget.delta_p_max is not None:
        lines.append(f"    delta_p < {_fmt(budget.delta_p_max)}")
    if budget.delta_c_max is not None:
        lines.append(f"    delta_c < {_fmt(budget.delta_c_max)}")
    lines.append(f"    feasible: {_fmt(budget.feasible)}")
    lines += ["", f"verdict: {'PASS' if stab.stable else 'FAIL'}", ""]

    payload = {
        "command": "certify",
        "config": flatten_config(cfg),
        "certificate": _cert_dict(cert),
        "stability": {
            "stable": stab.stable,
            "q_negative_definite": stab.q_negative_definite,
            "conditions": [asdict(cond) for cond in stab.conditions],
        },
        "interconnection_bounds": asdict(inter),
        "channel": {
            "passive": passive,
            "conditions": [asdict(cond) for cond in channel_conds],
            "bounds": asdict(channel),
        },
        "trigger_budget": asdict(budget),
        "verdict": "pass" if stab.stable else "fail",
    }
    _emit(args, "\n".join(lines), payload)
    return 0 if stab.stable else 1


def _starts_at_rest(scn: Scenario) -> bool:
    for x0 in (scn.x0_plant, scn.x0_controller):
        if x0 is not None and any(v != 0.0 for v in x0):
            return False
    return True


def _comm_lines(stats: CommStats) -> list[str]:
    lines = ["communication"]
    for label, side in (("plant", stats.plant), ("controller", stats.controller)):
        if side is None:
            lines.append(f"    {label:<10}  -")
            continue
        lines.append(
            f"    {label:<10}  events {side.count}  ratio {_fmt(side.ratio)}"
            f"  min gap {_fmt(side.min_interval)}  mean gap {_fmt(side.mean_interval)}"
        )
    return lines


def _cmd_simulate(args) -> int:
    cfg = load_config(_resolve_config(args.config))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.tol is not None:
        cfg = replace(cfg, tolerance=args.tol)
    scn = cfg.scenario

    plant, controller = validate_scenario(scn)
    engine = _select_engine(args.engine, plant, controller)
    trace, log = simulate(scn, engine=engine)
    stats = comm_stats(log, trace.n_samples, trace.dt)
    p, c = cfg.plant_indices, cfg.controller_indices

    checks = []
    skipped = []
    if _starts_at_rest(scn):
        cert = qsr_certificate(scn.topology, p, c, delta_p=scn.delta_p, delta_c=scn.delta_c)
        checks.append(check_dissipation(qsr_supply_series(trace, cert), cfg.tolerance))
    else:
        skipped.append("qsr-supply: initial state is not at rest")
    if cfg.delta0 is not None:
        if isinstance(scn.w2, Zero):
            eps0 = cfg.eps0 if cfg.eps0 is not None else 0.0
            series = io_passivity_series(trace, eps0, cfg.delta0)
            checks.append(check_dissipation(series, cfg.tolerance))
        else:
            skipped.append("w1-to-yp-supply: requires w2 identically zero")

    try:
        gain = l2_gain_estimate(trace)
    except ValueError:
        gain = None

    ok = not trace.diverged and all(chk.passed for chk in checks)

    lines = _header_lines(cfg)
    lines += [
        "",
        f"engine      {engine}",
        f"samples     {trace.n_samples}  (dt={_fmt(trace.dt)})",
    ]
    if trace.diverged:
        lines.append(
            f"DIVERGED    trajectory left the finite range near t={_fmt(float(trace.t[-1]))}"
        )
    lines += [""] + _comm_lines(stats)
    lines += ["", f"checks  (tolerance {_fmt(cfg.tolerance)})"]
    for chk in checks:
        lines.append(
            f"    {chk.name:<18}  {'PASS' if chk.passed else 'FAIL'}"
            f"  min cumulative {_fmt(chk.min_cumulative)}"
            + (
                f"  first violation t={_fmt(chk.first_violation_time)}"
                if chk.first_violation_time is not None
                else ""
            )
        )
    for note in skipped:
        lines.append(f"    skipped: {note}")
    if not checks and not skipped:
        lines.append("    none requested")
    if gain is not None:
        lines += ["", f"L2 gain estimate over the horizon: {_fmt(gain)}"]
    lines += ["", f"verdict: {'PASS' if ok else 'FAIL'}", ""]

    payload = {
        "command": "simulate",
        "config": flatten_config(cfg),
        "engine": engine,
        "n_samples": trace.n_samples,
        "diverged": trace.diverged,
        "comm": asdict(stats),
        "checks": [asdict(chk) for chk in checks],
        "skipped": skipped,
        "l2_gain_estimate": gain,
        "verdict": "pass" if ok else "fail",
    }

    extra = {}
    if trace.y_p.ndim == 1:
        buf = io.StringIO()
        trace_to_csv(trace, buf)
        extra["trace.csv"] = buf.getvalue()
    _emit(args, "\n".join(lines), payload, extra_files=extra)
    return 0 if ok else 1


def _apply_delta(scn: Scenario, delta: float) -> Scenario:
    changes = {}
    if scn.topology.has_plant_detector:
        changes["delta_p"] = delta
    if scn.topology.has_controller_detector:
        changes["delta_c"] = delta
    return scenario_with(scn, **changes)


def _sweep_worker(scn: Scenario) -> tuple[bool, CommStats]:
    trace, log = simulate(scn)
    return trace.diverged, comm_stats(log, trace.n_samples, trace.dt)


def _sweep_row(delta: float, stable: bool, diverged: bool, stats: CommStats) -> dict:
    row = {"delta": delta, "stable": stable, "diverged": diverged}
    for label, side in (("plant", stats.plant), ("controller", stats.controller)):
        row[f"{label}_events"] = side.count if side else None
        row[f"{label}_ratio"] = side.ratio if side else None
        row[f"{label}_min_interval"] = side.min_interval if side else None
    return row


def _sweep_csv(rows: list[dict]) -> str:
    out = [",".join(_SWEEP_FIELDS)]
    for row in rows:
        cells = []
        for field in _SWEEP_FIELDS:
            value = row[field]
            if value is None:
                cells.append("")
            elif isinstance(value, bool):
                cells.append(str(int(value)))
            elif isinstance(value, float):
                cells.append(repr(value))
            else:
                cells.append(str(value))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def _cmd_sweep(args) -> int:
    cfg = load_config(_resolve_config(args.config))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    scn = cfg.scenario
    if cfg.delta_grid is None:
        raise ConfigError("sweep requires sweep.delta_grid in the config")
    for delta in cfg.delta_grid:
        validate_trigger_level(delta, "sweep.delta_grid entry")
    if isinstance(scn.w1, WhiteNoise) or isinstance(scn.w2, WhiteNoise):
        print(
            "note: stochastic inputs; event counts depend on the noise seed",
            file=sys.stderr,
        )

    p, c = cfg.plant_indices, cfg.controller_indices
    scenarios = [_apply_delta(scn, delta) for delta in cfg.delta_grid]
    for variant in scenarios:
        validate_scenario(variant)
    stables = [
        l2_stable(
            qsr_certificate(scn.topology, p, c, delta_p=v.delta_p, delta_c=v.delta_c)
        ).stable
        for v in scenarios
    ]

    jobs = max(1, args.jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, scenarios))
    else:
        results = [_sweep_worker(v) for v in scenarios]

    rows = [
        _sweep_row(delta, stable, diverged, stats)
        for delta, stable, (diverged, stats) in zip(cfg.delta_grid, stables, results)
    ]
    any_diverged = any(row["diverged"] for row in rows)

    lines = _header_lines(cfg)
    lines += [
        "",
        f"sweep over {len(rows)} trigger levels"
        + (" (both detectors share the level)" if scn.topology is Topology.BOTH_SIDES else ""),
        "",
        f"    {'delta':>8}  {'stable':>6}  {'events_p':>8}  {'ratio_p':>9}"
        f"  {'events_c':>8}  {'ratio_c':>9}  {'diverged':>8}",
    ]
    for row in rows:
        lines.append(
            f"    {_fmt(row['delta']):>8}  {_fmt(row['stable']):>6}"
            f"  {_fmt(row['plant_events']):>8}  {_fmt(row['plant_ratio']):>9}"
            f"  {_fmt(row['controller_events']):>8}  {_fmt(row['controller_ratio']):>9}"
            f"  {_fmt(row['diverged']):>8}"
        )
    lines += ["", f"verdict: {'PASS' if not any_diverged else 'FAIL'}", ""]

    payload = {
        "command": "sweep",
        "config": flatten_config(cfg),
        "rows": rows,
        "any_diverged": any_diverged,
        "verdict": "pass" if not any_diverged else "fail",
    }
    _emit(args, "\n".join(lines), payload, extra_files={"sweep.csv": _sweep_csv(rows)})
    return 0 if not any_diverged else 1


def _cmd_list_models(args) -> int:
    registry = default_registry()
    width = max(len(name) for name in registry)
    lines = []
    for name in sorted(registry):
        sys_ = registry[name]
        shape = f"{sys_.state_dim} states, {sys_.input_dim}->{sys_.output_dim}"
        ft = "feedthrough" if sys_.has_feedthrough else "strictly proper"
        lines.append(f"{name:<{width}}  {shape}, {ft}.  {sys_.description}")
    lines.append("")
    lines.append(f"bundled configs: {', '.join(fixture_names())}")
    print("\n".join(lines))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etpass",
        description=(
            "Certify and simulate event-triggered feedback loops of "
            "IF-OFP subsystems."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", "-c", required=True, help="config path or bundled name")
        sp.add_argument("--out", "-o", default=None, help="directory for report artifacts")

    sp = sub.add_parser("certify", help="closed-form certificate and stability verdict")
    add_common(sp)
    sp.set_defaults(func=_cmd_certify)

    sp = sub.add_parser("simulate", help="run the loop and verify supply integrals")
    add_common(sp)
    sp.add_argument("--seed", type=int, default=None, help="override every noise seed")
    sp.add_argument("--tol", type=float, default=None, help="override verify.tolerance")
    sp.add_argument(
        "--engine", choices=("compiled", "pure"), default=None, help="force an engine"
    )
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("sweep", help="rerun over sweep.delta_grid")
    add_common(sp)
    sp.add_argument("--seed", type=int, default=None, help="override every noise seed")
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("list-models", help="show the built-in model registry")
    sp.set_defaults(func=_cmd_list_models)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
