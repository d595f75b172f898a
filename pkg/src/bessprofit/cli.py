"""Command-line front end.

Subcommands: ``evaluate`` one battery on one scenario, ``sweep`` a whole
catalog over one or more scenarios, ``tune`` the friction coefficient of
one battery, ``fixtures`` to (re)generate the bundled synthetic cases.

Exit codes: 0 success, 1 usage/config/parse problems, 2 when a dispatch
cannot be solved (peak target infeasible or the solver's certificate
fails). Output files are byte-identical across reruns with the same
inputs; each embeds a config hash plus the conventions in force.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .battery import BatterySpec, catalog_by_name, default_catalog, load_catalog
from .cycles import DamageModel
from .errors import ConfigError, InfeasibleDispatchError, ScenarioError, SolverError
from .fixtures import DEFAULT_SEED, gen_fixtures
from .optimizer import DEFAULT_EPSILON, DispatchSolution, PpcSelection
from .profitability import ProfitabilityReport, evaluate_candidate, tune_friction
from .report import ReportHeader, render_table, write_report
from .timeseries import (
    DEFAULT_PPC_SCHEDULE,
    DEFAULT_TOU_TARIFF,
    PpcSchedule,
    ScenarioSeries,
    TariffSchedule,
    baseline_metrics,
    load_ppc,
    load_scenario,
    load_tariff,
)

__all__ = ["main", "Conventions", "SweepConfig"]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


@dataclass(frozen=True)
class Conventions:
    """Knobs that change reported numbers; echoed into every output."""

    step_minutes: float | None = None
    months_12: bool = False
    damage_exp: float = 1.0
    epsilon: float = DEFAULT_EPSILON
    eta_fric: float = 1.0
    contracted_kva: float | None = None
    terminal_soc: bool = False

    def lines(self) -> tuple[str, ...]:
        return (
            f"step_minutes: {'auto' if self.step_minutes is None else f'{self.step_minutes:g}'}",
            f"expb_convention: {'months-12' if self.months_12 else 'calendar'}",
            f"damage_exp: {self.damage_exp:g}",
            f"epsilon: {self.epsilon:g}",
            f"eta_fric: {self.eta_fric:g}",
            f"contracted_kva: {'auto' if self.contracted_kva is None else f'{self.contracted_kva:g}'}",
            f"terminal_soc: {'yes' if self.terminal_soc else 'no'}",
        )


@dataclass(frozen=True)
class SweepConfig:
    """Resolved inputs for one run."""

    scenario_paths: tuple[str, ...]
    tariff_path: str | None
    ppc_path: str | None
    catalog_path: str | None
    conventions: Conventions
    out_dir: Path
    jobs: int = 1

    tariff: TariffSchedule = field(default=DEFAULT_TOU_TARIFF, compare=False)
    ppc: PpcSchedule = field(default=DEFAULT_PPC_SCHEDULE, compare=False)
    catalog: tuple[BatterySpec, ...] = field(default=(), compare=False)


def _build_config(args, scenario_paths: tuple[str, ...]) -> SweepConfig:
    conventions = Conventions(
        step_minutes=args.step_minutes,
        months_12=args.months_12,
        damage_exp=args.damage_exp,
        epsilon=args.epsilon,
        eta_fric=getattr(args, "eta_fric", 1.0),
        contracted_kva=args.contracted_kva,
        terminal_soc=args.terminal_soc,
    )
    tariff = load_tariff(args.tariff) if args.tariff else DEFAULT_TOU_TARIFF
    ppc = load_ppc(args.ppc) if args.ppc else DEFAULT_PPC_SCHEDULE
    catalog = tuple(load_catalog(args.catalog) if args.catalog else default_catalog())
    if not catalog:
        raise ConfigError("battery catalog is empty")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return SweepConfig(
        scenario_paths=scenario_paths,
        tariff_path=args.tariff,
        ppc_path=args.ppc,
        catalog_path=args.catalog,
        conventions=conventions,
        out_dir=out_dir,
        jobs=getattr(args, "jobs", 1),
        tariff=tariff,
        ppc=ppc,
        catalog=catalog,
    )


def _config_hash(config: SweepConfig, *extra: str) -> str:
    digest = hashlib.sha256()
    digest.update(f"bessprofit {__version__}".encode())
    for path in config.scenario_paths:
        digest.update(Path(path).read_bytes())
    for blob in (config.tariff_path, config.ppc_path, config.catalog_path):
        if blob:
            digest.update(Path(blob).read_bytes())
        else:
            digest.update(b"<default>")
    for line in config.conventions.lines():
        digest.update(line.encode())
    for item in extra:
        digest.update(item.encode())
    return digest.hexdigest()[:12]


def _load(config: SweepConfig, path: str) -> ScenarioSeries:
    if not Path(path).exists():
        raise ConfigError(f"scenario file not found: {path}")
    h = None if config.conventions.step_minutes is None else config.conventions.step_minutes / 60.0
    return load_scenario(path, h=h, tariff=config.tariff)


def _battery(config: SweepConfig, name: str) -> BatterySpec:
    by_name = catalog_by_name(config.catalog)
    if name not in by_name:
        known = ", ".join(spec.name for spec in config.catalog)
        raise ConfigError(f"unknown battery {name!r}; catalog has: {known}")
    return by_name[name]


def _write_dispatch_csv(
    path: Path,
    header: ReportHeader,
    scenario: ScenarioSeries,
    spec: BatterySpec,
    dispatch: DispatchSolution,
) -> None:
    z = scenario.load - scenario.pv
    b = dispatch.soc_trajectory(spec.b_0)
    lines = header.lines()
    lines.append("timestamp,z_kwh,x_kwh,s_kwh,b_kwh,theta_kwh,price")
    for i, stamp in enumerate(scenario.step_times()):
        lines.append(
            f"{stamp.isoformat()},{z[i]:.6f},{dispatch.x[i]:.6f},{dispatch.s[i]:.6f},"
            f"{b[i + 1]:.6f},{dispatch.theta[i]:.6f},{scenario.price[i]:.4f}"
        )
    path.write_text("\n".join(lines) + "\n", newline="")


def _evaluate_one(
    config: SweepConfig,
    scenario: ScenarioSeries,
    spec: BatterySpec,
    eta_fric: float = 1.0,
) -> tuple[ProfitabilityReport, DispatchSolution, PpcSelection | None]:
    conv = config.conventions
    return evaluate_candidate(
        scenario,
        spec,
        ppc=config.ppc,
        old_level_kva=conv.contracted_kva,
        model=DamageModel(kp=conv.damage_exp),
        months_12=conv.months_12,
        epsilon=conv.epsilon,
        eta_fric=eta_fric,
        terminal_soc=conv.terminal_soc,
    )


def cmd_evaluate(args) -> int:
    config = _build_config(args, (args.scenario,))
    scenario = _load(config, args.scenario)
    spec = _battery(config, args.battery)
    report, dispatch, _ = _evaluate_one(config, scenario, spec, config.conventions.eta_fric)

    header = ReportHeader(
        scenario=scenario.name,
        config_hash=_config_hash(config, "evaluate", spec.name),
        conventions=config.conventions.lines(),
    )
    base = baseline_metrics(scenario)
    stem = f"{scenario.name}-{spec.name}"
    _write_dispatch_csv(config.out_dir / f"{stem}-dispatch.csv", header, scenario, spec, dispatch)
    write_report(config.out_dir / f"{stem}-report.txt", header, base, [report])
    write_report(config.out_dir / f"{stem}-report.csv", header, base, [report])
    print(render_table(header, base, [report]), end="")
    return 0


def _sweep_scenario(config: SweepConfig, path: str) -> str:
    scenario = _load(config, path)
    base = baseline_metrics(scenario)
    reports: dict[str, ProfitabilityReport] = {}
    failures: dict[str, str] = {}

    def run(spec: BatterySpec):
        return _evaluate_one(config, scenario, spec)[0]

    if config.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futures = {pool.submit(run, spec): spec.name for spec in config.catalog}
            for fut in concurrent.futures.as_completed(futures):
                name = futures[fut]
                try:
                    reports[name] = fut.result()
                except (InfeasibleDispatchError, SolverError) as exc:
                    failures[name] = str(exc)
    else:
        for spec in config.catalog:
            try:
                reports[spec.name] = run(spec)
            except (InfeasibleDispatchError, SolverError) as exc:
                failures[spec.name] = str(exc)

    header = ReportHeader(
        scenario=scenario.name,
        config_hash=_config_hash(config, "sweep", path),
        conventions=config.conventions.lines(),
    )
    ordered = [reports[s.name] for s in config.catalog if s.name in reports]
    text = render_table(header, base, ordered)
    if failures:
        text += "".join(
            f"# failed: {name}: {msg}\n" for name, msg in sorted(failures.items())
        )
    write_report(config.out_dir / f"{scenario.name}-sweep.csv", header, base, ordered)
    (config.out_dir / f"{scenario.name}-sweep.txt").write_text(text, newline="")
    return text


def cmd_sweep(args) -> int:
    config = _build_config(args, tuple(args.scenarios))
    for path in config.scenario_paths:
        print(_sweep_scenario(config, path), end="")
    return 0


def cmd_tune(args) -> int:
    if args.target is not None and args.target <= 0:
        raise _UsageError("--target must be > 0")
    config = _build_config(args, (args.scenario,))
    scenario = _load(config, args.scenario)
    spec = _battery(config, args.battery)
    conv = config.conventions

    result = tune_friction(
        scenario,
        spec,
        target_cycles=args.target,
        ppc=config.ppc,
        old_level_kva=conv.contracted_kva,
        model=DamageModel(kp=conv.damage_exp),
        months_12=conv.months_12,
        epsilon=conv.epsilon,
    )

    header = ReportHeader(
        scenario=scenario.name,
        config_hash=_config_hash(config, "tune", spec.name, f"{result.target_cycles:.6f}"),
        conventions=conv.lines(),
    )
    base = baseline_metrics(scenario)
    stem = f"{scenario.name}-{spec.name}"
    write_report(config.out_dir / f"{stem}-tuned-report.txt", header, base, [result.report])
    write_report(config.out_dir / f"{stem}-tuned-report.csv", header, base, [result.report])
    _write_dispatch_csv(
        config.out_dir / f"{stem}-tuned-dispatch.csv", header, scenario, spec, result.dispatch
    )

    if result.eta_fric == 1.0:
        print("eta_fric = 1 (no tuning needed)")
    rows = [
        ("battery", spec.name),
        ("target_cycles", f"{result.target_cycles:.2f}"),
        ("eta_fric", f"{result.eta_fric:.6f}"),
        ("cycles_before", f"{result.untuned_report.n_cyc_100:.2f}"),
        ("cycles_after", f"{result.report.n_cyc_100:.2f}"),
        ("p_cyc_before", f"{result.untuned_report.p_cyc:.4f}"),
        ("p_cyc_after", f"{result.report.p_cyc:.4f}"),
        ("expb_before", "inf" if result.untuned_report.expb_years == float("inf")
         else f"{result.untuned_report.expb_years:.2f}"),
        ("expb_after", "inf" if result.report.expb_years == float("inf")
         else f"{result.report.expb_years:.2f}"),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        print(f"{key.ljust(width)}  {value}")
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    return 0


def cmd_fixtures(args) -> int:
    paths = gen_fixtures(seed=args.seed, out_dir=args.out)
    for path in paths:
        print(path)
    return 0


def _add_common(sub: argparse.ArgumentParser, *, jobs: bool = False, eta: bool = False) -> None:
    sub.add_argument("--tariff", help="tariff schedule JSON (default: built-in two-period ToU)")
    sub.add_argument("--ppc", help="peak-power-contract level table JSON (default: built-in)")
    sub.add_argument("--catalog", help="battery catalog JSON (default: built-in 3x3 grid)")
    sub.add_argument("--step-minutes", type=float, default=None,
                     help="expected sample spacing; must match the file")
    sub.add_argument("--months-12", action="store_true",
                     help="payback = cost / (12 * monthly gain) instead of calendar-exact")
    sub.add_argument("--damage-exp", type=float, default=1.0,
                     help="cycle damage exponent kp (default 1)")
    sub.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                     help="movement-suppression weight in the dispatch objective")
    sub.add_argument("--contracted-kva", type=float, default=None,
                     help="current contract level; default: smallest level covering the baseline peak")
    sub.add_argument("--terminal-soc", action="store_true",
                     help="require the final state of charge to return to the initial one")
    sub.add_argument("--out", default=".", help="output directory (default: current)")
    if eta:
        sub.add_argument("--eta-fric", type=float, default=1.0,
                         help="friction coefficient in (0, 1] (default 1: no friction)")
    if jobs:
        sub.add_argument("--jobs", type=int, default=1,
                         help="parallel (scenario x battery) solves (default 1)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="bessprofit",
                     description="Battery dispatch and profitability for ToU prosumers")
    parser.add_argument("--version", action="version", version=f"bessprofit {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_eval = subs.add_parser("evaluate", help="score one battery on one scenario")
    p_eval.add_argument("scenario", help="scenario CSV (timestamp,load_w,pv_w)")
    p_eval.add_argument("--battery", required=True, help="catalog entry name")
    _add_common(p_eval, eta=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_sweep = subs.add_parser("sweep", help="score the whole catalog on scenarios")
    p_sweep.add_argument("scenarios", nargs="+", help="scenario CSV files")
    _add_common(p_sweep, jobs=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_tune = subs.add_parser("tune", help="throttle an over-cycling battery via friction")
    p_tune.add_argument("scenario", help="scenario CSV")
    p_tune.add_argument("--battery", required=True, help="catalog entry name")
    p_tune.add_argument("--target", type=float, default=None,
                        help="cycle budget for the window (default: break-even count)")
    _add_common(p_tune)
    p_tune.set_defaults(func=cmd_tune)

    p_fix = subs.add_parser("fixtures", help="write the four synthetic scenario files")
    p_fix.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_fix.add_argument("--out", default=".", help="output directory")
    p_fix.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InfeasibleDispatchError as exc:
        print(f"error: dispatch infeasible: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: solver: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
