import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style, init as colorama_init

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, FlowBreakdownError, IntegrityError, PoleError, UnsupportedBoundaryError
from .experiments import run_checks
from .hierarchy import spectral_drift, warn_on_short_buffer
from .lattice import norm_regime, spectrum
from .reports import build_summary_text, write_drift, write_flow_state, write_manifest, write_mfunc, write_spectrum
from .storage import RunLog
from .weyl import m_sweep

colorama_init(autoreset=True)

PREFIX = "[todaflow]"
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

logger = logging.getLogger("todaflow")


class ConsoleFormatter(logging.Formatter):
    COLORS = {
        logging.DEBUG: Fore.CYAN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED,
    }

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        color = self.COLORS.get(record.levelno)
        return color + text + Style.RESET_ALL if color else text


def configure_logging(verbose: bool = False) -> None:
    if not any(isinstance(h.formatter, ConsoleFormatter) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(ConsoleFormatter(f"{PREFIX} %(levelname)s %(name)s: %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def colorize_status(passed: bool) -> str:
    if passed:
        return Fore.GREEN + "PASS" + Style.RESET_ALL
    return Fore.RED + "FAIL" + Style.RESET_ALL


def run_header(cfg: RunConfig) -> dict:
    J = cfg.operator()
    return {
        "version": __version__,
        "regime": norm_regime(J),
        "boundary": J.boundary.value,
        "sites": J.sites,
        "polynomial": cfg.polynomial().to_list(),
        "t_final": cfg.t_final,
        "dt": cfg.dt,
        "seed": cfg.seed,
    }


def cmd_evolve(args: argparse.Namespace, cfg: RunConfig, log: RunLog) -> int:
    J0, poly = cfg.operator(), cfg.polynomial()
    warn_on_short_buffer(J0, poly.degree, cfg.t_final, float(cfg.flow["buffer_per_unit_time"]))
    samples, final = spectral_drift(J0, poly, cfg.t_final, cfg.dt, every=int(cfg.flow["drift_every"]))
    out = cfg.output_dir
    flow_path = write_flow_state(out / "flow.yaml", final)
    drift_path = write_drift(out / "drift.csv", samples)
    worst = max(max(s.trace1_drift, s.trace2_drift) for s in samples)
    log.log_json("flow", {"t": final.t, "steps": final.steps, "trace_drift": worst})
    print(f"{PREFIX} evolved {final.steps} steps to t={final.t:g}; wrote {flow_path} and {drift_path}")
    if J0.periodic:
        eig = max(s.eig_drift for s in samples)
        print(f"{PREFIX} max eigenvalue drift {eig:.3g}, max trace drift {worst:.3g}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, cfg: RunConfig, log: RunLog) -> int:
    records = run_checks(cfg)
    manifest_path = write_manifest(cfg.output_dir / "manifest.yaml", records, run_header(cfg))
    for record in records:
        log.log_check(record.to_dict())
        print(
            f"{PREFIX} {colorize_status(record.passed)} {record.check_name} "
            f"residual={record.residual:.3g} tolerance={record.tolerance:.3g} {record.parameters}"
        )
    print(build_summary_text(records))
    print(f"{PREFIX} manifest written to {manifest_path}")
    return EXIT_OK if all(record.passed for record in records) else EXIT_FAILED


def cmd_mfunc(args: argparse.Namespace, cfg: RunConfig, log: RunLog) -> int:
    J0 = cfg.operator()
    if J0.periodic:
        raise UnsupportedBoundaryError("mfunc needs an eventually free operator")
    times = cfg.mfunc.get("times") or [0.0, cfg.t_final]
    site = cfg.mfunc.get("site")
    rows = m_sweep(J0, cfg.polynomial(), cfg.z_grid(), [float(t) for t in times], cfg.dt,
                   None if site is None else int(site))
    path = write_mfunc(cfg.output_dir / "mfunc.csv", rows)
    herglotz = all(row.m.imag > 0.0 for row in rows)
    log.log_json("mfunc", {"rows": len(rows), "herglotz": herglotz})
    print(f"{PREFIX} {colorize_status(herglotz)} Herglotz on {len(rows)} samples; wrote {path}")
    return EXIT_OK if herglotz else EXIT_FAILED


def cmd_spectrum(args: argparse.Namespace, cfg: RunConfig, log: RunLog) -> int:
    report = spectrum(cfg.operator())
    path = write_spectrum(cfg.output_dir / "spectrum.csv", report)
    log.log_json("spectrum", {"residual": report.residual})
    print(f"{PREFIX} {len(report.eigenvalues)} eigenvalues, solver residual {report.residual:.3g}; wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="todaflow", description="Toda hierarchy: Lax flows against the transfer-matrix cocycle")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config.yaml", help="Path to the run configuration")
    common.add_argument("--out", default=None, help="Output directory (overrides the config)")
    common.add_argument("--dt", type=float, default=None, help="RK4 step size")
    common.add_argument("--t", dest="t_final", type=float, default=None, help="Final flow time")
    common.add_argument("--seed", type=int, default=None, help="Seed for random operators")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in (
        ("evolve", cmd_evolve, "Run the Lax flow and record spectral drift"),
        ("verify", cmd_verify, "Run the configured checks and write a manifest"),
        ("mfunc", cmd_mfunc, "Sweep the m-functions over the z-grid and flow times"),
        ("spectrum", cmd_spectrum, "Eigenvalues of a periodic operator"),
    ):
        command = sub.add_parser(name, parents=[common], help=text)
        command.set_defaults(func=func)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    overrides = {"dt": args.dt, "t_final": args.t_final, "seed": args.seed, "output": args.out}
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(Fore.RED + f"{PREFIX} config error: {exc}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_USAGE

    out: Path = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    log = RunLog(str(out / "runlog.db"))
    try:
        log.log_json("run", {"command": args.command, "config": str(args.config), "version": __version__})
        return args.func(args, cfg, log)
    except (ConfigError, UnsupportedBoundaryError) as exc:
        log.log_error(exc, args.command)
        print(Fore.RED + f"{PREFIX} {exc}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_USAGE
    except (FlowBreakdownError, IntegrityError, PoleError) as exc:
        log.log_error(exc, args.command)
        print(Fore.RED + f"{PREFIX} {exc}" + Style.RESET_ALL, file=sys.stderr)
        return EXIT_FAILED
    finally:
        log.close()


if __name__ == "__main__":
    sys.exit(main())
