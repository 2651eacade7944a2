"""``kvnsim`` command line: simulate, compile, verify."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import __version__, verify
from .errors import (
    BlowUpError,
    ConfigError,
    ImaginaryFrequencyError,
    ScheduleError,
    TruncationOverflowError,
    UnsupportedHamiltonianError,
)
from .fock import DEFAULT_LEAKAGE_THRESHOLD
from .problems import PROBLEMS, make_problem
from .simulate import BACKENDS, TROTTER_MODES, simulate
from .trotter import OpoParams, dump_json, opo_params_from_oscillator, oscillator_from_opo, trotterize

log = logging.getLogger("kvnsim")

OUTPUT_ENV = "KVN_OUTPUT_DIR"
EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_LEAKAGE, EXIT_BLOWUP = 0, 1, 2, 3, 4

_PROBLEM_KEYS = {
    "ho": ("m", "omega"),
    "coupled": ("masses", "springs", "couplings", "variant"),
    "kdv": ("n", "dx", "variant"),
}


@dataclass
class RunConfig:
    problem: str = "ho"
    m: float = 1.0
    omega: float = 1.0
    masses: list | None = None
    springs: list | None = None
    couplings: list | None = None
    n: int = 4
    dx: float = 1.0
    variant: str | None = None
    u0: list | None = None
    backend: str | None = None
    trotter: str = "exact"
    p: int = 1
    t_end: float = 1.0
    samples: int = 11
    cutoff: int = 8
    squeeze: float = 0.0
    leakage_threshold: float | None = DEFAULT_LEAKAGE_THRESHOLD
    expand_cubic: bool = False
    output: str | None = None

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.backend is not None and self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}")
        if self.trotter not in TROTTER_MODES:
            raise ConfigError(f"trotter must be one of {TROTTER_MODES}")
        if self.p < 1:
            raise ConfigError("p must be >= 1")
        if not (math.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError("t_end must be a finite non-negative number")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.cutoff < 2:
            raise ConfigError("cutoff must be >= 2")
        if self.problem == "coupled" and (self.masses is None or self.springs is None):
            raise ConfigError("the coupled problem needs masses and springs")
        return self

    def problem_params(self):
        params = {k: getattr(self, k) for k in _PROBLEM_KEYS[self.problem]}
        return {k: v for k, v in params.items() if v is not None}

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def load_config(path):
    text = Path(path).read_text()
    try:
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    return data


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _matrix(text):
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"expected a JSON matrix, got {text!r}") from exc
    return value


def _add_problem_args(p):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", choices=sorted(PROBLEMS))
    g.add_argument("--m", type=float, help="oscillator mass")
    g.add_argument("--omega", type=float, help="oscillator angular frequency")
    g.add_argument("--masses", type=_floats, help="comma-separated masses")
    g.add_argument("--springs", type=_floats, help="comma-separated spring constants")
    g.add_argument("--couplings", type=_matrix, help="symmetric coupling matrix as JSON")
    g.add_argument("--n", type=int, help="KdV grid points")
    g.add_argument("--dx", type=float, help="KdV grid spacing")
    g.add_argument("--variant", help="coupled: direct|energy; kdv: corrected|paper")
    g.add_argument("--config", help="JSON or YAML file with RunConfig keys; flags override it")
    g.add_argument("--save-config", help="write the effective config to this file")


def build_parser():
    parser = argparse.ArgumentParser(prog="kvnsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kvnsim {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a problem and export the trajectory CSV")
    _add_problem_args(sim)
    sim.add_argument("--u0", type=_floats, help="comma-separated initial condition")
    sim.add_argument("--backend", choices=BACKENDS)
    sim.add_argument("--trotter", choices=TROTTER_MODES)
    sim.add_argument("--p", type=int, help="Trotter steps per sample time")
    sim.add_argument("--t-end", type=float)
    sim.add_argument("--samples", type=int, help="number of equally spaced sample times")
    sim.add_argument("--cutoff", type=int, help="Fock cutoff per mode")
    sim.add_argument("--squeeze", type=float, help="position squeezing s of the input state")
    sim.add_argument("--leakage-threshold", type=float)
    sim.add_argument("--output", "-o", help="CSV path ('-' for stdout)")

    comp = sub.add_parser("compile", help="compile a problem into a gate schedule JSON")
    _add_problem_args(comp)
    comp.add_argument("--trotter", choices=TROTTER_MODES[1:])
    comp.add_argument("--p", type=int)
    comp.add_argument("--tau", type=float, help="total evolution time (default: t_end)")
    comp.add_argument("--expand-cubic", action="store_true", default=None)
    comp.add_argument("--opo", action="store_true", help="emit OPO parameters for the oscillator")
    comp.add_argument("--theta", type=float, help="with --opo: beamsplitter angle (inverse map)")
    comp.add_argument("--r", type=float, help="with --opo: accumulated squeezing (inverse map)")
    comp.add_argument("--output", "-o")

    ver = sub.add_parser("verify", help="run invariant suites and write a JSON report")
    ver.add_argument("suite", nargs="*", default=["all"],
                     help=f"one or more of {sorted(verify.SUITES)} or 'all'")
    ver.add_argument("--output", "-o")
    return parser


def config_from_args(args):
    data = load_config(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig.from_dict(data)
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names and value is not None:
            setattr(cfg, key, value)
    if getattr(args, "tau", None) is not None:
        cfg.t_end = args.tau
    return cfg.validate()


def resolve_output(path, default_name):
    """``None`` or ``'-'`` means stdout unless ``KVN_OUTPUT_DIR`` is set."""
    env = os.environ.get(OUTPUT_ENV)
    if path == "-":
        return None
    if path is None:
        return Path(env) / default_name if env else None
    p = Path(path)
    return Path(env) / p if env and not p.is_absolute() else p


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def cmd_simulate(cfg):
    bundle = make_problem(cfg.problem, **cfg.problem_params())
    backend = cfg.backend or bundle.recommended_backend
    results = simulate(
        bundle, backend=backend, trotter=cfg.trotter, p=cfg.p, t_end=cfg.t_end,
        samples=cfg.samples, cutoff=cfg.cutoff, squeezing=cfg.squeeze,
        leakage_threshold=cfg.leakage_threshold, u0=cfg.u0,
    )
    target = resolve_output(cfg.output, f"{cfg.problem}_{backend}.csv")
    for res in results:
        path = target
        if len(results) > 1:
            if target is None:
                raise ConfigError("--backend both needs --output or KVN_OUTPUT_DIR")
            path = target.with_name(f"{target.stem}.{res.backend}{target.suffix}")
        _emit(res.to_csv(), path)
        print(f"{res.backend}: max |<Q> - u_classical| = {res.max_deviation:.6e}, "
              f"max leakage = {res.max_leakage:.3e}", file=sys.stderr)
    return EXIT_OK


def opo_report(cfg, args):
    if args.theta is not None or args.r is not None:
        if args.theta is None or args.r is None or args.tau is None:
            raise ConfigError("the inverse OPO map needs --tau, --theta and --r")
        params = OpoParams(tau=args.tau, r=args.r, theta=args.theta, p=cfg.p)
        m, omega = oscillator_from_opo(params)
    else:
        if cfg.problem != "ho":
            raise ConfigError("--opo without --theta/--r needs the ho problem")
        tau = args.tau if args.tau is not None else cfg.t_end
        m, omega = cfg.m, cfg.omega
        params = opo_params_from_oscillator(m, omega, tau, cfg.p)
    return {
        **params.to_dict(),
        "reflectivity": params.reflectivity,
        "squeezing_db": params.squeezing_db,
        "m": m,
        "omega": omega,
        "frequency_hz": omega / (2.0 * math.pi),
    }


def cmd_compile(cfg, args):
    out = {}
    inverse_only = args.opo and args.theta is not None
    if not inverse_only:
        bundle = make_problem(cfg.problem, **cfg.problem_params())
        dec = cfg.trotter if cfg.trotter != "exact" else {
            "ho": "tms_bs", "coupled": "coupled", "kdv": "kdv"}[cfg.problem]
        sched = trotterize(bundle.hamiltonian, dec, cfg.t_end, cfg.p, bool(cfg.expand_cubic))
        out = sched.to_dict()
    if args.opo:
        out["opo"] = opo_report(cfg, args)
    _emit(dump_json(out) + "\n", resolve_output(cfg.output, f"{cfg.problem}_schedule.json"))
    return EXIT_OK


def cmd_verify(args):
    report = verify.run(args.suite)
    _emit(json.dumps(report, indent=2) + "\n", resolve_output(args.output, "verify_report.json"))
    for suite in report["suites"]:
        for check in suite["checks"]:
            status = "PASS" if check["passed"] else "FAIL"
            print(f"[{status}] {suite['suite']}.{check['name']} = {check['value']:.3e}", file=sys.stderr)
    return EXIT_OK if report["all_passed"] else EXIT_VERIFY


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = config_from_args(args)
        if args.save_config:
            Path(args.save_config).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_compile(cfg, args)
    except TruncationOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LEAKAGE
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ConfigError, ScheduleError, UnsupportedHamiltonianError, ImaginaryFrequencyError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
