"""Command-line front end: experiment configs, runs, sweeps and verification.

Configs are plain key = value files with sections (one file per experiment);
see configs/ for the checked-in defaults.  Commands write CSV files and
structured-text summaries under the configured output directory and nothing
anywhere else.

Exit codes: 0 success, 1 config/validation error, 2 runtime error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
from dataclasses import dataclass, replace

from . import analysis
from .channel import RadioConfig, TrajectoryConfig
from .engine import SimConfig, TraceLog, run
from .schedulers import SCHEDULER_POLICIES
from .traffic import DEFAULT_TAIL_EPS, ServiceSpec

log = logging.getLogger("hsrsched")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3

EXPERIMENT_KINDS = ("single", "fig2", "fig3", "verify")
FIG2_PLOT_FRAMES = 1000


class ConfigError(ValueError):
    """Bad experiment configuration or config file."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    output_dir: str
    sim: SimConfig
    sweep_deadlines: tuple[int, ...] = ()
    sweep_rates: tuple[float, ...] = ()
    seeds_per_point: int = 5
    oracle_instances: int = 200
    inject_fault: str | None = None


def _section(parser: configparser.ConfigParser, name: str) -> configparser.SectionProxy:
    if not parser.has_section(name):
        raise ConfigError(f"missing [{name}] section")
    return parser[name]


def _get(section, key, conv, *, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing key {key!r} in [{section.name}]")
        return default
    raw = section[key]
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def parse_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    exp = _section(parser, "experiment")
    kind = _get(exp, "kind", str, default="single")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    scheduler = _get(exp, "scheduler", str, default="dcsa")
    if scheduler not in SCHEDULER_POLICIES:
        raise ConfigError(f"unknown scheduler {scheduler!r}")

    traj_sec = _section(parser, "trajectory")
    radio_sec = _section(parser, "radio")
    try:
        trajectory = TrajectoryConfig(
            speed=_get(traj_sec, "speed", float, required=True),
            cell_radius=_get(traj_sec, "cell_radius", float, required=True),
            track_offset=_get(traj_sec, "track_offset", float, required=True),
            trip_duration=_get(traj_sec, "trip_duration", float, required=True),
            frame_length=_get(traj_sec, "frame_length", float, required=True),
        )
        radio = RadioConfig(
            carrier_freq=_get(radio_sec, "carrier_freq", float, required=True),
            bs_antenna_height=_get(radio_sec, "bs_antenna_height", float, required=True),
            rs_antenna_height=_get(radio_sec, "rs_antenna_height", float, required=True),
            tx_power_over_noise=_get(radio_sec, "tx_power_over_noise", float, required=True),
            bandwidth=_get(radio_sec, "bandwidth", float, required=True),
            packet_size=_get(radio_sec, "packet_size", float, required=True),
        )
        services = []
        for name in sorted(s for s in parser.sections() if s.startswith("service.")):
            sec = parser[name]
            try:
                sid = int(name.split(".", 1)[1])
            except ValueError:
                raise ConfigError(f"bad service section name [{name}]") from None
            services.append(
                ServiceSpec(
                    service_id=sid,
                    arrival_rate=_get(sec, "lambda", float, required=True),
                    deadline=_get(sec, "deadline", int, required=True),
                    delivery_ratio=_get(sec, "delivery_ratio", float, required=True),
                    tail_eps=_get(sec, "tail_eps", float, default=DEFAULT_TAIL_EPS),
                )
            )
        sim = SimConfig(
            trajectory=trajectory,
            radio=radio,
            services=tuple(services),
            scheduler=scheduler,
            seed=_get(exp, "seed", int, default=0),
            num_frames=_get(exp, "num_frames", int),
            capacity_override=_get(exp, "capacity_override", int),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    sweep_deadlines = ()
    sweep_rates = ()
    seeds_per_point = 5
    if parser.has_section("sweep"):
        sw = parser["sweep"]
        sweep_deadlines = tuple(
            _get(sw, "deadlines", lambda v: [int(x) for x in v.split(",") if x.strip()], default=())
        )
        sweep_rates = tuple(
            _get(sw, "lambdas", lambda v: [float(x) for x in v.split(",") if x.strip()], default=())
        )
        seeds_per_point = _get(sw, "seeds_per_point", int, default=5)
        if seeds_per_point < 1:
            raise ConfigError("seeds_per_point must be at least 1")

    oracle_instances = 200
    inject_fault = None
    if parser.has_section("verify"):
        vf = parser["verify"]
        oracle_instances = _get(vf, "oracle_instances", int, default=200)
        inject_fault = _get(vf, "inject_fault", str)
        if inject_fault not in (None, "none", "deficit"):
            raise ConfigError(f"unknown inject_fault {inject_fault!r}")
        if inject_fault == "none":
            inject_fault = None

    if kind == "fig2" and len(services) != 2:
        raise ConfigError("fig2 experiments need exactly two services")
    if kind == "fig3":
        if len(services) != 1:
            raise ConfigError("fig3 experiments need exactly one service")
        if not sweep_deadlines or not sweep_rates:
            raise ConfigError("fig3 experiments need a non-empty [sweep] grid")

    return ExperimentConfig(
        kind=kind,
        output_dir=_get(exp, "output_dir", str, default="out"),
        sim=sim,
        sweep_deadlines=sweep_deadlines,
        sweep_rates=sweep_rates,
        seeds_per_point=seeds_per_point,
        oracle_instances=oracle_instances,
        inject_fault=inject_fault,
    )


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; parse(serialize(parse(f))) == parse(f)."""
    sim = cfg.sim
    lines = [
        "[experiment]",
        f"kind = {cfg.kind}",
        f"scheduler = {sim.scheduler}",
        f"seed = {sim.seed}",
        f"output_dir = {cfg.output_dir}",
    ]
    if sim.num_frames is not None:
        lines.append(f"num_frames = {sim.num_frames}")
    if sim.capacity_override is not None:
        lines.append(f"capacity_override = {sim.capacity_override}")
    t = sim.trajectory
    lines += [
        "",
        "[trajectory]",
        f"speed = {t.speed!r}",
        f"cell_radius = {t.cell_radius!r}",
        f"track_offset = {t.track_offset!r}",
        f"trip_duration = {t.trip_duration!r}",
        f"frame_length = {t.frame_length!r}",
    ]
    r = sim.radio
    lines += [
        "",
        "[radio]",
        f"carrier_freq = {r.carrier_freq!r}",
        f"bs_antenna_height = {r.bs_antenna_height!r}",
        f"rs_antenna_height = {r.rs_antenna_height!r}",
        f"tx_power_over_noise = {r.tx_power_over_noise!r}",
        f"bandwidth = {r.bandwidth!r}",
        f"packet_size = {r.packet_size!r}",
    ]
    for s in sim.services:
        lines += [
            "",
            f"[service.{s.service_id}]",
            f"lambda = {s.arrival_rate!r}",
            f"deadline = {s.deadline}",
            f"delivery_ratio = {s.delivery_ratio!r}",
            f"tail_eps = {s.tail_eps!r}",
        ]
    if cfg.sweep_deadlines or cfg.sweep_rates:
        lines += [
            "",
            "[sweep]",
            f"deadlines = {','.join(str(m) for m in cfg.sweep_deadlines)}",
            f"lambdas = {','.join(repr(x) for x in cfg.sweep_rates)}",
            f"seeds_per_point = {cfg.seeds_per_point}",
        ]
    lines += [
        "",
        "[verify]",
        f"oracle_instances = {cfg.oracle_instances}",
    ]
    if cfg.inject_fault is not None:
        lines.append(f"inject_fault = {cfg.inject_fault}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    sim = cfg.sim
    try:
        if args.seed is not None:
            sim = replace(sim, seed=args.seed)
        if args.frames is not None:
            sim = replace(sim, num_frames=args.frames)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out_dir = args.out if args.out is not None else cfg.output_dir
    return replace(cfg, sim=sim, output_dir=out_dir)


def _write_deficit_csv(path: str, trace: TraceLog, frames: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        cols = ["frame"] + [f"deficit_s{sid}" for sid in trace.service_ids]
        fh.write(",".join(cols) + "\n")
        for k in range(min(frames, trace.num_frames)):
            row = [str(k)] + [f"{trace.deficit[k, j]:.9g}" for j in range(len(trace.service_ids))]
            fh.write(",".join(row) + "\n")


def cmd_run(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    trace = run(cfg.sim)
    trace.to_csv(os.path.join(cfg.output_dir, "trace.csv"))
    with open(os.path.join(cfg.output_dir, "summary.txt"), "w") as fh:
        fh.write(trace.summary().to_text())
    log.info("run complete: %d frames, outputs in %s", trace.num_frames, cfg.output_dir)
    return EXIT_OK


def cmd_fig2(cfg: ExperimentConfig) -> int:
    if len(cfg.sim.services) != 2:
        raise ConfigError("fig2 needs exactly two services")
    os.makedirs(cfg.output_dir, exist_ok=True)
    finals = {}
    for policy in SCHEDULER_POLICIES:
        trace = run(replace(cfg.sim, scheduler=policy))
        _write_deficit_csv(
            os.path.join(cfg.output_dir, f"fig2_{policy}.csv"), trace, FIG2_PLOT_FRAMES
        )
        with open(os.path.join(cfg.output_dir, f"summary_{policy}.txt"), "w") as fh:
            fh.write(trace.summary().to_text())
        finals[policy] = {
            f"final_deficit_s{sid}": float(trace.deficit[-1, j])
            for j, sid in enumerate(trace.service_ids)
        }
        gap = abs(trace.deficit[:, 0] - trace.deficit[:, 1])
        finals[policy]["max_deficit_gap"] = float(gap.max()) if trace.num_frames else 0.0
    with open(os.path.join(cfg.output_dir, "fig2_summary.json"), "w") as fh:
        json.dump(finals, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("fig2 outputs in %s", cfg.output_dir)
    return EXIT_OK


def fig3_rows(cfg: ExperimentConfig) -> list[tuple[int, float, float]]:
    """Delivery ratio per (deadline, rate) grid point.

    Ratios are averaged over ``seeds_per_point`` replicates.  Within one
    replicate every deadline value reuses the same seed (arrivals do not
    depend on the deadline), so the deadline axis is compared under common
    random numbers; seeds vary across rates and replicates.
    """
    if len(cfg.sim.services) != 1:
        raise ConfigError("fig3 needs exactly one service")
    if not cfg.sweep_deadlines or not cfg.sweep_rates:
        raise ConfigError("fig3 needs a non-empty sweep grid")
    base = cfg.sim.services[0]
    rows = []
    for p, rate in enumerate(cfg.sweep_rates):
        for m in cfg.sweep_deadlines:
            total = 0.0
            for rep in range(cfg.seeds_per_point):
                seed = (cfg.sim.seed ^ p) + rep
                spec = ServiceSpec(
                    service_id=base.service_id,
                    arrival_rate=float(rate),
                    deadline=int(m),
                    delivery_ratio=base.delivery_ratio,
                    tail_eps=base.tail_eps,
                )
                trace = run(replace(cfg.sim, services=(spec,), seed=seed))
                ratio = trace.summary().services[0].delivery_ratio
                if ratio is None:
                    raise RuntimeError("no arrivals in fig3 run; grid point unusable")
                total += ratio
            rows.append((int(m), float(rate), total / cfg.seeds_per_point))
    return rows


def cmd_fig3(cfg: ExperimentConfig) -> int:
    rows = fig3_rows(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "fig3.csv"), "w", newline="") as fh:
        fh.write("# schema=1\n")
        fh.write("m,lambda,delivery_ratio\n")
        for m, rate, ratio in rows:
            fh.write(f"{m},{rate:.9g},{ratio:.9g}\n")
    log.info("fig3 outputs in %s", cfg.output_dir)
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig) -> int:
    os.makedirs(cfg.output_dir, exist_ok=True)
    reports = []
    ok = True
    for policy in SCHEDULER_POLICIES:
        trace = run(replace(cfg.sim, scheduler=policy))
        if cfg.inject_fault == "deficit" and trace.num_frames > 1:
            # test hook: corrupt the counter state mid-run so checks must trip;
            # the jump has to clear the allowance-squared slack of the bound
            mid = trace.num_frames // 2
            bump = 1000 + 10 * int(max(trace.loss_allowances))
            trace.deficit_state[mid, 0, 0] += bump
            trace.deficit[mid, 0] += float(bump)
        drift = analysis.check_sample_drift(trace)
        lemma1 = analysis.check_lemma1(trace)
        for rep in (drift, lemma1):
            d = rep.to_dict()
            d["scheduler"] = policy
            reports.append(d)
            ok = ok and rep.passed
            print(f"{'PASS' if rep.passed else 'FAIL'} {d['check']} [{policy}]")
    oracle = analysis.oracle_agreement(cfg.sim.seed, cfg.oracle_instances)
    reports.append(oracle.to_dict())
    ok = ok and oracle.passed
    print(
        f"{'PASS' if oracle.passed else 'FAIL'} oracle_agreement "
        f"({oracle.lex_agreed}/{oracle.total} lexicographic, "
        f"{oracle.weighted_agreed}/{oracle.total} weighted-optimal)"
    )
    with open(os.path.join(cfg.output_dir, "verify_report.json"), "w") as fh:
        json.dump({"passed": ok, "checks": reports}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {
    "run": cmd_run,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsrsched",
        description="Deadline-constrained downlink scheduling simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="experiment config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--frames", type=int, default=None, help="override the frame count")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("HSRSCHED_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(parse_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything past validation is a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
