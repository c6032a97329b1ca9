"""Command-line entry point: ``lagflow simulate|verify|relation|presets``.

Exit status: 0 success, 1 verification failure or no relation, 2 configuration
error, 3 numerical failure (pole hit or quadrature breakdown).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as cfg
from . import presets
from .errors import ExprError, FlowSpecError, LagflowError, NumericalError, OrientationError, RelationError
from .flows import Flow, build_flow
from .harmonic import HarmonicMap
from .parallel import map_ordered
from .relation import LinearDependent, fit_residual, recover_relation
from .verify import DEFAULT_HS, TamperedFlow, verify_flow

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CSV_HEADER = ["t", "label_re", "label_im", "x", "y", "u", "v", "jacobian"]


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def dumps(obj) -> str:
    return json.dumps(_json_value(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _flow(conf: cfg.Config) -> Flow:
    flow = build_flow(conf.spec())
    if conf.tamper:
        flow = TamperedFlow(flow, conf.tamper["kind"], conf.tamper["amount"])
    return flow


# -- subcommands -------------------------------------------------------------------

def simulate_rows(flow: Flow, times: Sequence[float]) -> list:
    z = flow.domain.labels()

    def at(t):
        jet = flow.field_jet(t, z)
        w = jet.F[0] + np.conj(jet.G[0])
        vel = jet.F[1] + np.conj(jet.G[1])
        J = np.abs(jet.f[0]) ** 2 - np.abs(jet.g[0]) ** 2
        return [
            [float(t), float(zz.real), float(zz.imag), float(ww.real), float(ww.imag), float(vv.real), float(vv.imag), float(jj)]
            for zz, ww, vv, jj in zip(z, w, vel, J)
        ]

    return [row for block in map_ordered(at, list(times)) for row in block]


def run_simulate(conf: cfg.Config) -> int:
    flow = _flow(conf)
    rows = simulate_rows(flow, conf.times)
    if "csv" in conf.formats:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
        _write(conf.out_dir / "trajectory.csv", buf.getvalue())
    if "json" in conf.formats:
        _write(conf.out_dir / "trajectory.json", dumps({"config_hash": conf.hash, "columns": CSV_HEADER, "rows": rows}))
    print(f"simulate: {len(rows)} rows written to {conf.out_dir}")
    return EXIT_OK


def verify_report(conf: cfg.Config) -> tuple[dict, list]:
    flow = _flow(conf)
    result = verify_flow(flow, conf.times, conf.tolerances)
    r = result.report
    report = {
        "config_hash": conf.hash,
        "passed": result.passed,
        "failures": result.failures,
        "mass_conservation": r.mass_conservation,
        "governing_re": r.governing_re,
        "governing_im_drift": r.governing_im_drift,
        "euler_fd": r.euler_fd,
        "pressure_loop": r.pressure_loop,
        "euler_fd_h": list(DEFAULT_HS),
        "euler_fd_residuals": r.euler_fd_residuals,
        "euler_fd_orders": r.euler_fd_orders,
        "euler_fd_floors": r.euler_fd_floors,
        "pressure_loop_residuals": r.pressure_loop_residuals,
        "pressure_loop_orders": r.pressure_loop_orders,
        "q_scale": r.q_scale,
        "grid": cfg.domain_to_dict(r.grid),
        "times": r.times,
        "tolerances": vars(conf.tolerances),
    }
    return report, result.failures


def run_verify(conf: cfg.Config) -> int:
    if 0.0 not in conf.times:
        raise cfg.ConfigError("verification times must include 0")
    report, failures = verify_report(conf)
    text = dumps(report)
    if "json" in conf.formats:
        _write(conf.out_dir / "verify.json", text)
    sys.stdout.write(text)
    if failures:
        print(f"verify: FAILED residuals: {', '.join(failures)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def relation_report(m1: HarmonicMap, m2: HarmonicMap) -> dict:
    p = recover_relation(m1, m2)
    out = {
        "branch": "LinearDependent" if isinstance(p, LinearDependent) else "General",
        "alpha": cfg.complex_json(p.alpha),
        "beta": cfg.complex_json(p.beta),
        "xi": None if isinstance(p, LinearDependent) else p.xi,
        "fit_residual": fit_residual(m1, m2, p),
    }
    return out


def run_relation(conf: cfg.Config) -> int:
    m1, m2 = conf.relation_maps()
    report = relation_report(m1, m2)
    report["config_hash"] = conf.hash
    text = dumps(report)
    if "json" in conf.formats:
        _write(conf.out_dir / "relation.json", text)
    sys.stdout.write(text)
    return EXIT_OK


def preset_description(preset_id: str) -> dict:
    obj = presets.resolve(preset_id)
    if isinstance(obj, HarmonicMap):
        out = {"kind": "HarmonicMap", **cfg.map_to_dict(obj), "domain": cfg.domain_to_dict(obj.domain)}
    else:
        out = {"kind": "FlowSpec", **cfg.spec_to_dict(obj)}
    return {"id": preset_id, **out}


def run_presets(args) -> int:
    if args.action == "list":
        for name in presets.PRESETS:
            print(name)
        return EXIT_OK
    if args.id is None:
        raise cfg.ConfigError("presets show needs a preset id")
    try:
        sys.stdout.write(dumps(preset_description(args.id)))
    except KeyError as err:
        raise cfg.ConfigError(str(err.args[0])) from None
    return EXIT_OK


# -- argument handling ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lagflow", description="Euler flows with harmonic Lagrangian labellings.")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p):
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--grid", help="label grid NxM (N along a, M along b)")
        p.add_argument("--times", help="comma-separated times, e.g. 0,0.5,1")
        p.add_argument("--tol", type=float, help="tolerance for mass and governing residuals")

    run_options(sub.add_parser("simulate", help="write particle trajectories"))
    run_options(sub.add_parser("verify", help="check the governing equations"))
    run_options(sub.add_parser("relation", help="recover the relation between two maps"))
    p = sub.add_parser("presets", help="list or show built-in presets")
    p.add_argument("action", choices=["list", "show"])
    p.add_argument("id", nargs="?")
    return parser


RUNNERS = {"simulate": run_simulate, "verify": run_verify, "relation": run_relation}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            return run_presets(args)
        conf = cfg.load(args.config, out=args.out, grid=args.grid, times=args.times, tol=args.tol)
        return RUNNERS[args.command](conf)
    except NumericalError as err:
        print(f"lagflow: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except RelationError as err:
        print(f"lagflow: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_VERIFY
    except (cfg.ConfigError, FlowSpecError, ExprError, OrientationError, ValueError) as err:
        print(f"lagflow: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"lagflow: I/O error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except LagflowError as err:
        print(f"lagflow: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
