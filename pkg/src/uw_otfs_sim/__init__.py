from __future__ import annotations

import argparse
import logging
import math
from pathlib import Path
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, TextIO

from .errors import ConfigurationError, OtfsError
from .models import METRICS, CsiMode, PilotKind, SimulationPlan
from .report_manager import ReportManager
from .simulation_manager import SWEEP_FIELDS, SimulationManager, default_pilot_kind
from .storage import create_storage

__version__ = "0.1.0"

DEFAULT_CONFIG_TOML = """
[simulation]
system = "UW"
ebn0 = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0]
velocity = 400.0
realizations = 400
seed = 1
csi = "estimated"
pilot = ""
pilot-cancellation = false
metrics = ["BER", "NMSE"]
paths = 16
qam-order = 16
workers = 1
bootstrap-resamples = 2000

[numerology]
carrier-hz = 10e9
delay-spread-s = 2.5e-6
detection-bins = 0
uw-detection-bins = 64

[pilot]
sigma-u-sq = 0.5

[bem]
rate = 0.0

[analysis]
frames = 200
seed = 1
ccdf-probability = 0.01

[storage]
results-file = "results.csv"
record-wall-time = false
operator-cache = true
cache-dir = ".otfs-cache"

[logging]
level = "INFO"
""".strip()


def _merge(base: dict[str, Any], override: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigurationError(f"Unknown configuration key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigurationError(f"Configuration key '{dotted}' must be a table")
            merged[key] = _merge(base[key], value, prefix=f"{dotted}.")
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None) -> dict[str, Any]:
    config = tomllib.loads(DEFAULT_CONFIG_TOML)
    if path is None:
        return config
    config_path = Path(path)
    try:
        with config_path.open("rb") as handle:
            user = tomllib.load(handle)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"Configuration file not found: {config_path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"Invalid TOML in {config_path}: {exc}") from exc
    return _merge(config, user)


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0,4,8"`` or ``"0:4:28"`` (start:step:stop, inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(part) for part in text.split(":"))
            if step <= 0:
                raise ConfigurationError(f"Grid step must be > 0, got {step}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(start + index * step for index in range(max(count, 0)))
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigurationError(f"Cannot parse grid '{text}'") from exc


class OtfsSimulatorApp:
    name = "uw-otfs-sim"
    version = __version__

    def __init__(
        self,
        config: dict[str, Any] | None = None,
        data_folder: str | Path = ".",
        out: TextIO | None = None,
        verbose: bool = False,
    ) -> None:
        self.config = config if config is not None else load_config()
        self.data_folder = Path(data_folder)
        self.out = out if out is not None else sys.stdout
        self.logger = logging.getLogger("uw_otfs_sim")
        self._configure_logging(verbose)

    def _configure_logging(self, verbose: bool) -> None:
        level_name = "DEBUG" if verbose else str(self.get_config("logging.level", "INFO")).upper()
        level = logging.getLevelName(level_name)
        if not isinstance(level, int):
            raise ConfigurationError(f"Unknown logging level '{level_name}'")
        self.logger.setLevel(level)
        if not self.logger.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
            self.logger.addHandler(handler)

    def on_enable(self) -> None:
        self.simulation_manager = SimulationManager(self)
        self.report_manager = ReportManager(self)
        self.logger.debug(f"{self.name} {self.version} enabled")

    def get_config(self, path: str, default: Any = None) -> Any:
        cursor: Any = self.config
        for segment in path.split("."):
            try:
                if segment not in cursor:
                    return default
                cursor = cursor[segment]
            except Exception:
                return default
        return cursor

    def emit(self, text: str) -> None:
        self.out.write(text + "\n")

    def on_command(self, command: str, args: argparse.Namespace) -> bool:
        command_name = command.lower()
        if command_name == "numerology":
            return self._handle_numerology_command(args)
        if command_name == "complexity":
            return self._handle_complexity_command(args)
        if command_name == "leakage":
            return self._handle_leakage_command(args)
        if command_name == "psd":
            return self._handle_psd_command(args)
        if command_name == "papr":
            return self._handle_papr_command(args)
        if command_name == "simulate":
            return self._handle_simulate_command(args)
        return False

    def _option(self, args: argparse.Namespace, attribute: str, path: str, default: Any) -> Any:
        value = getattr(args, attribute, None)
        return self.get_config(path, default) if value is None else value

    def _pilot_kind(self, args: argparse.Namespace, system: str, csi_mode: CsiMode = CsiMode.ESTIMATED) -> PilotKind:
        raw = self._option(args, "pilot", "simulation.pilot", "")
        kind = PilotKind.parse(raw)
        if not str(raw).strip():
            return default_pilot_kind(system, csi_mode)
        return kind

    def _handle_numerology_command(self, args: argparse.Namespace) -> bool:
        velocity = float(self._option(args, "velocity", "simulation.velocity", 400.0))
        self.emit(self.report_manager.numerology_report(velocity))
        return True

    def _handle_complexity_command(self, args: argparse.Namespace) -> bool:
        bins = int(self._option(args, "uw_detection_bins", "numerology.uw-detection-bins", 64))
        self.emit(self.report_manager.complexity_report(args.system, bins))
        return True

    def _handle_leakage_command(self, args: argparse.Namespace) -> bool:
        alphas = parse_grid(args.alpha)
        self.emit(self.report_manager.leakage_report(args.M, args.Q, args.p0, args.k_tau, alphas))
        return True

    def _analysis_inputs(self, args: argparse.Namespace) -> dict[str, Any]:
        system = str(self._option(args, "system", "simulation.system", "UW"))
        return {
            "system": system,
            "kind": self._pilot_kind(args, system),
            "sigma_u_sq": float(self._option(args, "sigma_u_sq", "pilot.sigma-u-sq", 0.5)),
            "frames": int(self._option(args, "frames", "analysis.frames", 200)),
            "seed": int(self._option(args, "seed", "analysis.seed", 1)),
            "pilot_only": bool(args.pilot_only),
        }

    def _handle_psd_command(self, args: argparse.Namespace) -> bool:
        self.emit(self.report_manager.psd_report(**self._analysis_inputs(args)))
        return True

    def _handle_papr_command(self, args: argparse.Namespace) -> bool:
        probability = float(self._option(args, "probability", "analysis.ccdf-probability", 0.01))
        self.emit(self.report_manager.papr_report(probability=probability, profile=args.profile, **self._analysis_inputs(args)))
        return True

    def build_plan(self, args: argparse.Namespace) -> SimulationPlan:
        system = str(self._option(args, "system", "simulation.system", "UW")).upper()
        grid = parse_grid(args.ebn0) if args.ebn0 else tuple(float(v) for v in self.get_config("simulation.ebn0", []))
        metrics = args.metrics.split(",") if args.metrics else list(self.get_config("simulation.metrics", ["BER", "NMSE"]))
        bem_rate = float(self._option(args, "bem_rate", "bem.rate", 0.0))
        detection_bins = int(self._option(args, "detection_bins", "numerology.detection-bins", 0))
        cancellation = args.pilot_cancellation or bool(self.get_config("simulation.pilot-cancellation", False))
        csi_mode = CsiMode.parse(self._option(args, "csi", "simulation.csi", "estimated"))
        return SimulationPlan(
            system=system,
            ebn0_grid=grid,
            velocity=float(self._option(args, "velocity", "simulation.velocity", 400.0)),
            realizations=int(self._option(args, "realizations", "simulation.realizations", 400)),
            master_seed=int(self._option(args, "seed", "simulation.seed", 1)),
            pilot_kind=self._pilot_kind(args, system, csi_mode),
            sigma_u_sq=float(self._option(args, "sigma_u_sq", "pilot.sigma-u-sq", 0.5)),
            bem_rate=bem_rate if bem_rate > 0 else None,
            csi_mode=csi_mode,
            pilot_cancellation=cancellation,
            metrics=tuple(metric.strip().upper() for metric in metrics if metric.strip()),
            paths=int(self._option(args, "paths", "simulation.paths", 16)),
            qam_order=int(self._option(args, "qam", "simulation.qam-order", 16)),
            workers=int(self._option(args, "workers", "simulation.workers", 1)),
            detection_bins=detection_bins if detection_bins > 0 else None,
            alpha_bins=args.alpha_bins,
        )

    def _handle_simulate_command(self, args: argparse.Namespace) -> bool:
        plan = self.build_plan(args)
        storage = create_storage(self, args.out)
        try:
            if args.sweep:
                if not args.values:
                    raise ConfigurationError("--sweep needs --values")
                for point in self.simulation_manager.sweep(plan, args.sweep, parse_grid(args.values)):
                    storage.write(point.rows, point.plan)
                    for row in point.rows:
                        self.emit(f"{args.sweep}={point.value:g}\t{row.ebn0_db:g}\t{row.ber:.6e}\t{row.nmse_db:.3f}")
                return True

            rows = self.simulation_manager.run_plan(plan)
            storage.write(rows, plan)
            for row in rows:
                self.emit(f"{row.system}\t{row.ebn0_db:g}\t{row.ber:.6e}\t{row.nmse_db:.3f}")
            return True
        finally:
            storage.close()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otfs-sim", description="CP-OTFS / UW-OTFS baseband simulator")
    parser.add_argument("--config", help="TOML file merged over the defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    numerology = commands.add_parser("numerology", help="print the numerology table")
    numerology.add_argument("--velocity", type=float)

    complexity = commands.add_parser("complexity", help="print multiplication and memory counts")
    complexity.add_argument("--system")
    complexity.add_argument("--uw-detection-bins", type=int)

    leakage = commands.add_parser("leakage", help="delay-domain leakage of one embedded symbol")
    leakage.add_argument("--M", type=int, default=32)
    leakage.add_argument("--Q", type=int, default=4)
    leakage.add_argument("--p0", type=int, default=16)
    leakage.add_argument("--k-tau", type=int, default=1)
    leakage.add_argument("--alpha", default="0,0.2,0.4,0.6,0.8")

    for name, help_text in (("psd", "Welch PSD of transmit frames"), ("papr", "PAPR CCDF of transmit blocks")):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--system")
        sub.add_argument("--pilot", choices=[kind.value for kind in PilotKind])
        sub.add_argument("--sigma-u-sq", type=float)
        sub.add_argument("--frames", type=int)
        sub.add_argument("--seed", type=int)
        sub.add_argument("--pilot-only", action="store_true")
        if name == "papr":
            sub.add_argument("--probability", type=float)
            sub.add_argument("--profile", action="store_true", help="also print the per-sample energy profile")

    simulate = commands.add_parser("simulate", help="run a Monte Carlo plan")
    simulate.add_argument("--system")
    simulate.add_argument("--ebn0", help="comma list or start:step:stop in dB")
    simulate.add_argument("--velocity", type=float)
    simulate.add_argument("--realizations", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--csi", choices=[mode.value for mode in CsiMode])
    simulate.add_argument("--pilot", choices=[kind.value for kind in PilotKind])
    simulate.add_argument("--sigma-u-sq", type=float)
    simulate.add_argument("--bem-rate", type=float)
    simulate.add_argument("--out")
    simulate.add_argument("--workers", type=int)
    simulate.add_argument("--paths", type=int)
    simulate.add_argument("--qam", type=int, choices=[4, 16, 64])
    simulate.add_argument("--metrics", help=f"comma list from {','.join(METRICS)}")
    simulate.add_argument("--pilot-cancellation", action="store_true")
    simulate.add_argument("--detection-bins", type=int)
    simulate.add_argument("--alpha-bins", type=int)
    simulate.add_argument("--sweep", choices=SWEEP_FIELDS)
    simulate.add_argument("--values", help="sweep values, comma list or start:step:stop")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        app = OtfsSimulatorApp(load_config(args.config), data_folder=Path.cwd(), verbose=args.verbose)
        app.on_enable()
        return 0 if app.on_command(args.command, args) else 1
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OtfsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


__all__ = [
    "DEFAULT_CONFIG_TOML",
    "OtfsSimulatorApp",
    "build_parser",
    "load_config",
    "main",
    "parse_grid",
]
