"""Command-line front end: ``solve``, ``oracle``, ``sweep`` and ``check``."""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import shutil
import sys
import warnings
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigurationError, DomainError, DuctPinnError
from .media import air_ntp, validity_check
from .metrics import error_report, evaluation_grid, gradient_histogram
from .network import save_params
from .oracle import meanflow_analytic, narrow_analytic, uniform_analytic, webster_bvp
from .physics import AreaProfile, DuctProblem
from .trainer import (TrainingConfig, train_lagrange, train_pressure, train_velocity_transfer,
                      write_loss_history)
from .trial import BoundaryConditions, DuctGeometry

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
SWEEP_KINDS = ("activation", "collocation", "bias")


class CommandError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _schema(name: str) -> dict:
    return json.loads(resources.files("ductpinn").joinpath("schemas", name).read_text("utf-8"))


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CommandError(f"cannot read config {path}: {exc}", EXIT_INVALID) from exc
    try:
        jsonschema.validate(cfg, _schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise CommandError(f"config invalid at {where}: {exc.message}", EXIT_INVALID) from exc
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Config -> domain objects
# ---------------------------------------------------------------------------

def _bc_value(v):
    return complex(v["re"], v["im"]) if isinstance(v, dict) else float(v)


def build_problems(cfg: dict) -> list[DuctProblem]:
    """One problem per configured frequency; raises on semantic errors."""
    pc = cfg["problem"]
    geometry = DuctGeometry(**pc.get("geometry", {}))
    bcs = pc.get("bc", {})
    bc = BoundaryConditions(_bc_value(bcs.get("p1", 1.0)), _bc_value(bcs.get("p2", -1.0)))
    medium = air_ntp(**pc.get("medium", {}))
    area = None
    if "area" in pc:
        a = pc["area"]
        area = (AreaProfile.rectangular(a["h1"], a["w1"], a["h2"], a["w2"], geometry) if "h1" in a
                else AreaProfile(a["S0"], a.get("S1", 0.0), a.get("S2", 0.0)))
    return [DuctProblem(pc["kind"], float(f), geometry, bc, medium, area, pc.get("radius"),
                        pc.get("mach"), pc.get("paper_literal_phi", False))
            for f in pc["frequencies"]]


def build_training(cfg: dict) -> tuple[TrainingConfig, bool]:
    tc = dict(cfg.get("training", {}))
    preset = tc.pop("preset", "full")
    velocity = tc.pop("velocity", False)
    base = TrainingConfig.desk() if preset == "desk" else TrainingConfig()
    return base.with_overrides(**tc), velocity


def oracle_for(problem: DuctProblem, webster_grid: int = 4096):
    """Reference solution object with ``p`` (and ``u`` where defined) methods."""
    g, bc, c = problem.geometry, problem.bc, problem.medium.c
    if problem.kind == "uniform":
        return uniform_analytic(g, bc, problem.k, problem.medium.impedance, c)
    if problem.kind == "webster":
        return webster_bvp(g, bc, problem.area, problem.k, webster_grid)
    if problem.kind == "narrow":
        return narrow_analytic(g, bc, problem.visco_thermal(), c)
    return meanflow_analytic(g, bc, problem.k, problem.mach, problem.medium.impedance, c)


def _label(f: float) -> str:
    return format(f, "g")


# ---------------------------------------------------------------------------
# Output bookkeeping
# ---------------------------------------------------------------------------

class OutputDir:
    """Tracks written files so a failed run leaves nothing behind."""

    def __init__(self, path):
        self.path = Path(path)
        self.created_dir = not self.path.exists()
        self.files: list[Path] = []

    def __enter__(self):
        self.path.mkdir(parents=True, exist_ok=True)
        return self

    def file(self, name: str) -> Path:
        p = self.path / name
        self.files.append(p)
        return p

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.files:
                p.unlink(missing_ok=True)
            if self.created_dir:
                shutil.rmtree(self.path, ignore_errors=True)
        return False


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_field(path, x, p_pred, p_true, u_pred=None, u_true=None) -> None:
    """Field CSV; ``p_pred`` may be ``None`` for oracle-only exports."""
    header = ["x", "p_pred_re", "p_pred_im", "p_true_re", "p_true_im"]
    cols = [x, *_split(p_pred, len(x)), *_split(p_true, len(x))]
    if u_true is not None:
        header += ["u_pred_re", "u_pred_im", "u_true_re", "u_true_im"]
        cols += [*_split(u_pred, len(x)), *_split(u_true, len(x))]
    write_table(path, header, zip(*cols))


def _split(values, n):
    if values is None:
        return [[None] * n, [None] * n]
    values = np.asarray(values, dtype=complex)
    return [values.real, values.imag]


def write_report(path, cfg, command, results, notes=()) -> None:
    report = {
        "tool": "ductpinn",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "notes": list(notes),
        "results": results,
    }
    jsonschema.validate(report, _schema("report.schema.json"))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


RESIDUAL_NOTE = "losses are in raw equation units and are not comparable across frequencies"


def _validity(problem: DuctProblem):
    if problem.kind != "narrow":
        return None, []
    report = validity_check(problem.visco_thermal(), problem.k, problem.radius,
                            problem.geometry.length)
    return report.as_dict(), [f"narrow-tube validity check failed: {n}" for n in report.failures()]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_check(cfg: dict, out, args) -> int:
    build_problems(cfg)
    build_training(cfg)
    print("config OK")
    return EXIT_OK


def cmd_oracle(cfg: dict, out: OutputDir, args) -> int:
    n_t = cfg.get("output", {}).get("n_t", 500)
    grid = cfg.get("output", {}).get("webster_grid", 4096)
    results = []
    for problem in build_problems(cfg):
        truth = oracle_for(problem, grid)
        x = evaluation_grid(problem.geometry, n_t)
        name = f"field_{_label(problem.frequency)}.csv"
        u_true = truth.u(x) if hasattr(truth, "u") else None
        write_field(out.file(name), x, None, truth.p(x), None, u_true)
        validity, warns = _validity(problem)
        entry = {"frequency": problem.frequency, "label": _label(problem.frequency), "files": [name]}
        if validity is not None:
            entry.update(validity=validity, warnings=warns)
        results.append(entry)
    write_report(out.file("report.json"), cfg, "oracle", results)
    return EXIT_OK


def cmd_solve(cfg: dict, out: OutputDir, args) -> int:
    n_t = cfg.get("output", {}).get("n_t", 500)
    grid = cfg.get("output", {}).get("webster_grid", 4096)
    keep_params = cfg.get("output", {}).get("save_params", False)
    training, velocity = build_training(cfg)
    problems = build_problems(cfg)
    if velocity and problems[0].kind not in ("uniform", "meanflow"):
        raise ConfigurationError("velocity transfer needs a uniform or mean-flow problem")
    results = []
    for problem in problems:
        label = _label(problem.frequency)
        truth = oracle_for(problem, grid)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            field, report = train_pressure(problem, training)
        x = evaluation_grid(problem.geometry, n_t)
        errs = error_report(field.pressure, truth.p, problem.geometry, n_t,
                            split_parts=problem.outputs == 2)
        files = [f"field_{label}.csv", f"loss_{label}.csv"]
        write_loss_history(report, out.file(files[1]))
        entry = {"frequency": problem.frequency, "label": label, "delta_p": errs.delta,
                 "delta_p_real": errs.delta_real, "delta_p_imag": errs.delta_imag,
                 "loss": report.summary(), "termination": report.reason,
                 "warnings": [str(w.message) for w in caught]}
        u_pred = u_true = None
        if velocity:
            vel, vreport = train_velocity_transfer(field, problem, training)
            uerr = error_report(vel.velocity, truth.u, problem.geometry, n_t, split_parts=True)
            u_pred, u_true = vel.velocity(x), truth.u(x)
            files.append(f"loss_u_{label}.csv")
            write_loss_history(vreport, out.file(files[-1]))
            entry.update(delta_u=uerr.delta, delta_u_real=uerr.delta_real,
                         delta_u_imag=uerr.delta_imag, velocity_loss=vreport.summary())
        write_field(out.file(files[0]), x, field.pressure(x), truth.p(x), u_pred, u_true)
        if keep_params:
            files.append(f"params_{label}.dpnn")
            save_params(field.net, out.file(files[-1]))
        validity, warns = _validity(problem)
        if validity is not None:
            entry["validity"] = validity
            entry["warnings"] += warns
        entry["files"] = files
        results.append(entry)
    write_report(out.file("report.json"), cfg, "solve", results, [RESIDUAL_NOTE])
    return EXIT_OK


def _sweep_activation(cfg, out, training, problems, n_t):
    sc = cfg.get("sweep", {})
    rows, results = [], []
    for problem in problems:
        truth = oracle_for(problem)
        label = _label(problem.frequency)
        files = []
        for act in sc.get("activations", ["sin", "cos", "tanh"]):
            field, rep = train_pressure(problem, training.with_overrides(activation=act))
            err = error_report(field.pressure, truth.p, problem.geometry, n_t).delta
            files.append(f"loss_{act}_{label}.csv")
            write_loss_history(rep, out.file(files[-1]))
            rows.append((act, problem.frequency, err, rep.final_loss, str(rep.iterations),
                         rep.reason))
        results.append({"frequency": problem.frequency, "label": label, "files": files})
    write_table(out.file("activation.csv"),
                ["activation", "frequency", "delta_p", "final_loss", "iterations", "termination"],
                rows)
    return results, ["activation.csv"]


def _sweep_collocation(cfg, out, training, problems, n_t):
    sc = cfg.get("sweep", {})
    rows, results = [], []
    for problem in problems:
        truth = oracle_for(problem)
        label = _label(problem.frequency)
        files = []
        for n in sc.get("N_d_values", [training.N_d]):
            field, rep = train_pressure(problem, training.with_overrides(N_d=n))
            err = error_report(field.pressure, truth.p, problem.geometry, n_t).delta
            files.append(f"loss_N{n}_{label}.csv")
            write_loss_history(rep, out.file(files[-1]))
            rows.append((str(n), problem.frequency, err, rep.final_loss, str(rep.iterations),
                         rep.reason))
        results.append({"frequency": problem.frequency, "label": label, "files": files})
    write_table(out.file("collocation.csv"),
                ["N_d", "frequency", "delta_p", "final_loss", "iterations", "termination"], rows)
    return results, ["collocation.csv"]


def _write_histograms(path, hists):
    rows = []
    for term, h in hists.items():
        rows += [(term, lo, hi, str(c)) for lo, hi, c in h.as_rows()]
    write_table(path, ["term", "bin_lo", "bin_hi", "count"], rows)


def _sweep_bias(cfg, out, training, problems, n_t):
    sc = cfg.get("sweep", {})
    threshold = sc.get("histogram_threshold", 1e-6)
    lam = sc.get("lambda", [1.0, 1.0])
    runs = [("fixed", None)]
    if "alpha" in sc:
        runs.append(("adaptive", sc["alpha"]))
    rows, results = [], []
    for problem in problems:
        if problem.kind not in ("uniform", "webster"):
            raise ConfigurationError("bias sweep needs a uniform or webster problem")
        truth = oracle_for(problem)
        label = _label(problem.frequency)
        files = [f"loss_trial_{label}.csv"]
        field, rep = train_pressure(problem, training)
        write_loss_history(rep, out.file(files[0]))
        err = error_report(field.pressure, truth.p, problem.geometry, n_t).delta
        rows.append(("trial", problem.frequency, err, rep.history[-1].parts[0], None, None, None))
        for name, alpha in runs:
            res = train_lagrange(problem, training, lam, alpha, sc.get("update_every", 100))
            err = error_report(res.pressure, truth.p, problem.geometry, n_t).delta
            hists = gradient_histogram({k: res.gradients[k] for k in ("L_d", "L_b")}, res.arch,
                                       threshold=threshold)
            files += [f"loss_{name}_{label}.csv", f"gradhist_{name}_{label}.csv"]
            write_loss_history(res.report, out.file(files[-2]))
            _write_histograms(out.file(files[-1]), hists)
            L_d, L_b = res.report.history[-1].parts
            rows.append((name, problem.frequency, err, L_d, L_b,
                         hists["L_d"].fraction_small, hists["L_b"].fraction_small))
        results.append({"frequency": problem.frequency, "label": label, "files": files})
    write_table(out.file("bias.csv"),
                ["method", "frequency", "delta_p", "L_d", "L_b", "small_frac_L_d", "small_frac_L_b"],
                rows)
    return results, ["bias.csv"]


def cmd_sweep(cfg: dict, out: OutputDir, args) -> int:
    n_t = cfg.get("output", {}).get("n_t", 500)
    training, _ = build_training(cfg)
    problems = build_problems(cfg)
    run = {"activation": _sweep_activation, "collocation": _sweep_collocation,
           "bias": _sweep_bias}[args.kind]
    results, _ = run(cfg, out, training, problems, n_t)
    write_report(out.file("report.json"), cfg, f"sweep {args.kind}", results, [RESIDUAL_NOTE])
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ductpinn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ductpinn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override training.seed")
        p.add_argument("--threads", type=int, default=1, help="BLAS thread limit (default 1)")

    common(sub.add_parser("solve", help="train and compare against the oracle"))
    common(sub.add_parser("oracle", help="export reference fields only"))
    sweep = sub.add_parser("sweep", help="activation, collocation or bias study")
    sweep.add_argument("kind", choices=SWEEP_KINDS)
    common(sweep)
    common(sub.add_parser("check", help="validate a configuration"), needs_out=False)
    return parser


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "sweep": cmd_sweep, "check": cmd_check}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = copy.deepcopy(cfg)
            cfg.setdefault("training", {})["seed"] = args.seed
        if args.threads < 1:
            raise CommandError("--threads must be at least 1", EXIT_INVALID)
        command = COMMANDS[args.command]
        with threadpool_limits(limits=args.threads):
            if args.command == "check":
                return command(cfg, None, args)
            build_problems(cfg)  # validate before creating any output
            build_training(cfg)
            with OutputDir(args.out) as out:
                return command(cfg, out, args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigurationError, DomainError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DuctPinnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
