"""Command-line front end: ``aqcdyn <subcommand> [--config PATH] [--out DIR] ...``.

Every computing run writes into ``<out>/<mode>-<hash12>/`` a set of CSV
files (optionally SVG charts) plus ``manifest.json``.  Exit codes: 0 ok,
2 schema or parse error, 3 numerical failure, 4 I/O failure.  Errors are
reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .baths import ResonanceError, LorentzDrude, bath_from_dict, markov_rate, timedep_rate_ohmic
from .codes import (
    CodeError, InconsistentDecoder, StabilizerCode, Syndrome, classify, code_from_config, get_code,
    model_from_config, registry_entry, registry_names,
)
from .config import ConfigError
from .correction import CorrectionConfig, NumericalFailure, build_rate_matrix, decay_constant, integrate
from .graph import build_graph, export_graph
from .pauli import PauliParseError
from .stability import ConcatenatedCodeParams, StabilityError, crossover_alpha, scan
from .suppression import (
    DDModulation, DDSchedule, EGPModulation, NoModulation, QuadratureError, StepRejected, leakage_rates,
    p0_dynamics,
)

EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 2, 3, 4
MARKOV_RATIO = 0.1  # E_R / gamma at or above this draws a warning
DEFAULT_MAX_WEIGHT = 2


class RunError(Exception):
    def __init__(self, category: str, code: int, exc: BaseException):
        super().__init__(str(exc))
        self.category, self.code, self.exc = category, code, exc


# --- small helpers -----------------------------------------------------------


def _code_and_model(cfg):
    code = code_from_config(cfg["code"])
    model = model_from_config(code, cfg.get("error_model"))
    model.check_detectable(code)
    return code, model


def _table(cfg):
    code, model = _code_and_model(cfg)
    return code, model, classify(code, model, cfg.get("max_weight", DEFAULT_MAX_WEIGHT))


def _alphas_for_correct(cfg):
    T = cfg["bath"]["T"]
    if "alpha_over_T" in cfg:
        return [(float(r), float(r) * T) for r in cfg["alpha_over_T"]]
    return [(float(a) / T, float(a)) for a in cfg["alphas"]]


def _n_l_grid(spec):
    return [int(x) for x in np.unique(np.round(np.geomspace(spec["min"], spec["max"], spec["points"])))]


def _stability_params(cfg):
    return ConcatenatedCodeParams(**cfg.get("code", {}))


# --- mode runners: each returns {filename: text} and an svg list ------------


def run_codes(cfg, ctx):
    code, model, table = _table(cfg)
    g = code.num_generators
    rows = []
    for s in range(code.num_syndromes):
        r = table.records[s]
        rows.append([s, str(Syndrome.from_index(s, g)), r.correctable, r.weight,
                     r.representative.label() if r.representative is not None else "",
                     " ".join(str(j) for j in r.factors) if r.factors else ""])
    files = {"syndromes.csv": cfgmod.csv_text(
        ["syndrome", "bits", "correctable", "weight", "representative", "factors"], rows)}
    lv = [[w, c, t] for w, (c, t) in sorted(table.level_counts.items())]
    files["levels.csv"] = cfgmod.csv_text(["weight", "correctable", "total"], lv)
    return files, []


def run_graph(cfg, ctx):
    code, model, table = _table(cfg)
    graph = build_graph(code, model, table)
    fmt = cfg.get("graph_format", "dot")
    labels = model.labels()
    rows = [[e.source, e.error, labels[e.error], e.target, e.cls, e.varpi] for e in graph.edges]
    files = {
        f"graph.{fmt}": export_graph(graph, fmt),
        "edges.csv": cfgmod.csv_text(["source", "error", "label", "target", "class", "varpi"], rows),
    }
    return files, []


def run_rates(cfg, ctx):
    b = cfg["bath"]
    E_R, gamma, T, K_max = b["E_R"], b["gamma"], b["T"], b.get("K_max")
    w = cfg.get("w", 1)
    ts = np.linspace(0.0, cfg["t_max"], cfg.get("points", 401))
    J = LorentzDrude(E_R, gamma)
    rows, series = [], {}
    for a in cfg["alphas"]:
        om = 2.0 * a * w
        rp = timedep_rate_ohmic(E_R, gamma, T, om, ts, +1, K_max)
        rm = timedep_rate_ohmic(E_R, gamma, T, om, ts, -1, K_max)
        lp, lm = markov_rate(J, T, om), markov_rate(J, T, -om)
        for t, x, y in zip(ts, rp, rm):
            rows.append([float(a), om, float(t), float(x), float(y), lp, lm])
        series[f"r+ alpha={a:g}"] = (ts, rp)
        series[f"r- alpha={a:g}"] = (ts, rm)
    files = {"rates.csv": cfgmod.csv_text(
        ["alpha", "omega", "t", "r_plus", "r_minus", "r_plus_markov", "r_minus_markov"], rows)}

    def svg(d):
        from .plotting import line_chart
        line_chart(series, d / "rates.svg", "t (us)", "rate (1/us)", "time-dependent transition rates")
        return ["rates.svg"]

    return files, [svg]


def run_suppress(cfg, ctx):
    bath_cfg = dict(cfg["bath"])
    bath = bath_from_dict(bath_cfg)
    horizon = cfg["horizon"]
    npts = cfg.get("rate_points", 101)
    grid = np.linspace(0.0, horizon, npts)
    step = horizon / (npts - 1)
    dt_req = cfg.get("dt", horizon / 1000)
    sub = max(1, math.ceil(step / dt_req - 1e-12))
    dt = step / sub
    n_err = cfg.get("n_errors", 1)
    P0 = cfg.get("P0", 1.0)
    scheme = cfg["scheme"]
    if scheme == "egp":
        if "alphas" not in cfg:
            raise ConfigError("scheme 'egp' needs 'alphas'")
        mods = [(float(a), EGPModulation(float(a), cfg.get("w", 1))) for a in cfg["alphas"]]
    elif scheme == "dd":
        if "dd_period" not in cfg:
            raise ConfigError("scheme 'dd' needs 'dd_period'")
        mods = [(0.0, DDModulation(DDSchedule.periodic(cfg["dd_period"], horizon)))]
    else:
        mods = [(0.0, NoModulation())]

    rows, rate_series, pop_series = [], {}, {}
    for a, mod in mods:
        rp = np.array([leakage_rates(bath, mod, float(t))[0] for t in grid])
        rm = np.array([leakage_rates(bath, mod, float(t))[1] for t in grid])
        Rp, Rm = n_err * rp, n_err * rm
        ts, p0, p1 = p0_dynamics(lambda t: np.interp(t, grid, Rp), lambda t: np.interp(t, grid, Rm),
                                 P0, 1.0 - P0, horizon, dt, clamp=cfg.get("clamp", False))
        p0, p1 = p0[::sub], p1[::sub]
        for i, t in enumerate(grid):
            rows.append([scheme, a, float(t), float(rp[i]), float(rm[i]), float(p0[i]), float(p1[i])])
        tag = f"{scheme} alpha={a:g}" if scheme == "egp" else scheme
        rate_series[f"r+ {tag}"] = (grid, rp)
        rate_series[f"r- {tag}"] = (grid, rm)
        pop_series[f"P0 {tag}"] = (grid, p0)
    files = {"suppress.csv": cfgmod.csv_text(["scheme", "alpha", "t", "r_plus", "r_minus", "P0", "P1"], rows)}

    def svg(d):
        from .plotting import line_chart
        line_chart(rate_series, d / "suppress_rates.svg", "t (us)", "rate (1/us)", "leakage rates")
        line_chart(pop_series, d / "suppress_P0.svg", "t (us)", "P0", "codespace population")
        return ["suppress_P0.svg", "suppress_rates.svg"]

    return files, [svg]


def run_correct(cfg, ctx):
    if ("alphas" in cfg) == ("alpha_over_T" in cfg):
        raise ConfigError("give exactly one of 'alphas' or 'alpha_over_T'")
    code, model, table = _table(cfg)
    graph = build_graph(code, model, table)
    b = cfg["bath"]
    J = LorentzDrude(b["E_R"], b["gamma"])
    res = cfg.get("reservoir")
    reservoir = (LorentzDrude(res["E_R"], res["gamma"]), res["T"]) if res else None
    mode = cfg.get("rate_mode", "second_markov")
    method = cfg.get("method", "expm" if mode == "second_markov" else "rk4")
    horizon = cfg["horizon"]
    samples = np.linspace(0.0, horizon, cfg.get("samples", 201))
    per = cfg.get("per_syndrome", False)
    rows, decay_rows, series = [], [], {}
    states = None
    for ratio, a in _alphas_for_correct(cfg):
        cc = CorrectionConfig(graph, a, cfg.get("eps_bar", 0.0), J=J, T=b["T"], reservoir=reservoir,
                              rate_mode=mode, conservation=cfg.get("conservation", False), K_max=b.get("K_max"))
        rm = build_rate_matrix(cc)
        traj = integrate(rm, horizon=horizon, dt=cfg.get("dt"), method=method, samples=samples,
                         clamp=cfg.get("clamp", False))
        states = traj.states
        pc = traj.P_corr
        for i, t in enumerate(traj.t):
            row = [ratio, a, float(t), float(pc[i])]
            if per:
                row += [float(x) for x in traj.P[i]]
            rows.append(row)
        try:
            k = decay_constant(traj.t, pc)
        except ValueError:
            k = math.nan
        decay_rows.append([ratio, a, k])
        series[f"alpha/T={ratio:g}"] = (traj.t, pc)
    header = ["alpha_over_T", "alpha", "t", "P_corr"] + ([f"P_{s}" for s in states] if per else [])
    files = {
        "correct.csv": cfgmod.csv_text(header, rows),
        "decay.csv": cfgmod.csv_text(["alpha_over_T", "alpha", "decay_constant"], decay_rows),
    }

    def svg(d):
        from .plotting import line_chart
        line_chart(series, d / "correct.svg", "t (us)", "P_corr", f"{code.name}: correctable population")
        return ["correct.svg"]

    return files, [svg]


def run_stability(cfg, ctx):
    params = _stability_params(cfg)
    b = cfg["bath"]
    J = LorentzDrude(b["E_R"], b["gamma"])
    n_l = _n_l_grid(cfg["n_l"])
    keys = ["n_l", "alpha", "T", "Delta_bar", "lambda", "N_e", "n_c",
            "log_eta0", "log_eta_bound", "log_eta_bound_derived", "log_approx"]
    rows, by_scaling = [], {}
    for sc in cfg["scalings"]:
        res = scan(params, sc, cfg["alphas"], cfg["temperatures"], n_l, J, threads=ctx["threads"])
        by_scaling[sc] = res
        rows += [[sc] + [r[k] for k in keys] for r in res]
    files = {"stability.csv": cfgmod.csv_text(["scaling"] + keys, rows)}
    if "crossover" in cfg:
        c = cfg["crossover"]
        alphas = list(np.linspace(c.get("alpha_min", 0.1), c.get("alpha_max", 3.0), c.get("points", 30)))
        win = (c.get("n_l_min", 10), c.get("n_l_max", 100))
        xr = []
        for sc in cfg["scalings"]:
            for T in cfg["temperatures"]:
                xr.append([sc, float(T), crossover_alpha(params, T, alphas, win, J, sc)])
        files["crossover.csv"] = cfgmod.csv_text(["scaling", "T", "alpha_crossover"], xr)

    def svg(d):
        from .plotting import line_chart
        names = []
        multi_a = len(cfg["alphas"]) > 1
        for sc, res in by_scaling.items():
            series = {}
            for r in res:
                lab = f"T={r['T']:g}" + (f" alpha={r['alpha']:g}" if multi_a else "")
                xs, ys = series.setdefault(lab, ([], []))
                xs.append(r["n_l"])
                ys.append(r["log_eta0"])
            name = f"stability_{sc}.svg"
            line_chart(series, d / name, "n_l", "log eta0", f"hitting time, barrier ~ {sc}(n_l)")
            names.append(name)
        return names

    return files, [svg]


RUNNERS = {"codes": run_codes, "graph": run_graph, "rates": run_rates, "suppress": run_suppress,
           "correct": run_correct, "stability": run_stability}


def execute(cfg: dict, out: Path, fmt: str = "csv", threads: int = 1) -> Path:
    """Run a validated config, write its run directory, return the directory path."""
    errs = cfgmod.validate_schema(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    ctx = {"threads": threads}
    files, svg_makers = RUNNERS[cfg["mode"]](cfg, ctx)
    hashed = {k: v for k, v in cfg.items() if k != "threads"}
    run_dir = Path(out) / f"{cfg['mode']}-{cfgmod.content_hash(hashed)[:12]}"
    # everything is computed before the first write
    for name, text in sorted(files.items()):
        cfgmod.atomic_write(run_dir / name, text)
    emitted = list(files)
    if fmt == "csv+svg":
        for make in svg_makers:
            emitted += make(run_dir)
    man = cfgmod.manifest(cfg, emitted, __version__)
    cfgmod.atomic_write(run_dir / "manifest.json", json.dumps(man, indent=1, sort_keys=True) + "\n")
    return run_dir


# --- validate ----------------------------------------------------------------


def validate_config(cfg) -> dict:
    """Schema and physics sanity checks without running anything."""
    errors = cfgmod.validate_schema(cfg)
    warnings = []
    if errors:
        return {"valid": False, "errors": errors, "warnings": warnings}
    mode = cfg["mode"]
    try:
        if "code" in cfg and mode != "stability":
            _code_and_model(cfg)
    except (CodeError, PauliParseError, ValueError) as exc:
        errors.append(f"code: {exc}")
    for key in ("bath", "reservoir"):
        b = cfg.get(key)
        if not b or "E_R" not in b:
            continue
        if b["E_R"] >= MARKOV_RATIO * b["gamma"]:
            warnings.append(f"{key}: Markovianity condition E_R << gamma not met (E_R/gamma = {b['E_R'] / b['gamma']:.3g})")
        if "T" in b and b.get("K_max") is None:
            x = b["gamma"] / (2 * math.pi * b["T"])
            if abs(x - round(x)) < 1e-9 and round(x) >= 1:
                errors.append(f"{key}: gamma coincides with a Matsubara frequency (gamma/(2 pi T) = {round(x)})")
    if mode == "correct":
        if ("alphas" in cfg) == ("alpha_over_T" in cfg):
            errors.append("give exactly one of 'alphas' or 'alpha_over_T'")
        if cfg.get("method") == "expm" and cfg.get("rate_mode") == "time_dependent":
            errors.append("method 'expm' needs rate_mode 'second_markov'")
    if mode == "suppress":
        if cfg["scheme"] == "egp" and "alphas" not in cfg:
            errors.append("scheme 'egp' needs 'alphas'")
        if cfg["scheme"] == "dd" and "dd_period" not in cfg:
            errors.append("scheme 'dd' needs 'dd_period'")
    if mode == "stability":
        try:
            p = _stability_params(cfg)
        except StabilityError as exc:
            errors.append(str(exc))
        else:
            if p.N_e(cfg["n_l"]["min"]) < 10 * p.n_c:
                warnings.append("N_e < 10 n_c at the smallest n_l: the analytic bound does not apply there")
        if cfg["n_l"]["min"] > cfg["n_l"]["max"]:
            errors.append("n_l: min exceeds max")
    return {"valid": not errors, "errors": errors, "warnings": warnings}


# --- argument handling -----------------------------------------------------------


def _globals_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="JSON run configuration (path or shipped name such as fig3.json)")
    g.add_argument("--out", help="output directory (default: runs)")
    g.add_argument("--seed", type=int, help="random seed recorded in the manifest")
    g.add_argument("--threads", type=int, help="worker threads for scan grids")
    g.add_argument("--format", choices=["csv", "csv+svg"], help="csv only, or csv plus SVG charts")
    return p


def build_parser() -> argparse.ArgumentParser:
    glob = _globals_parser()
    ap = argparse.ArgumentParser(prog="aqcdyn", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"aqcdyn {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("codes", parents=[glob], help="list, show or classify stabilizer codes")
    c.add_argument("action", nargs="?", choices=["list", "show", "classify"], default="list")
    c.add_argument("name", nargs="?", help="registry name")
    c.add_argument("--generators", nargs="+", metavar="PAULI", help="ad-hoc generator strings")
    c.add_argument("--k", type=int, default=None, help="logical qubits for --generators (default n - g)")
    c.add_argument("--model", help="error kinds, e.g. xz")
    c.add_argument("--max-weight", type=int, default=DEFAULT_MAX_WEIGHT)

    g = sub.add_parser("graph", parents=[glob], help="export a syndrome transition graph")
    g.add_argument("--code", help="registry name")
    g.add_argument("--model", help="error kinds, e.g. xz")
    g.add_argument("--max-weight", type=int, default=DEFAULT_MAX_WEIGHT)
    g.add_argument("--graph-format", choices=["dot", "json"], default="dot")

    for name, text in (("rates", "time-dependent Ohmic transition rates"),
                       ("suppress", "leakage rates and codespace population under EGP or DD"),
                       ("correct", "correction dynamics in the syndrome graph"),
                       ("stability", "hitting-time scans of the lumped weight chain")):
        sub.add_parser(name, parents=[glob], help=text)

    v = sub.add_parser("validate", parents=[glob], help="dry-run schema and sanity checks")
    v.add_argument("path", nargs="?", help="configuration to check (alternative to --config)")
    v.add_argument("--strict", action="store_true", help="exit 2 when the report has errors")
    return ap


def _emit_error(err: RunError) -> int:
    rec = {"error": type(err.exc).__name__, "category": err.category, "message": str(err.exc),
           "exit_code": err.code}
    print(json.dumps(rec), file=sys.stderr)
    return err.code


def _classify_exc(exc: BaseException) -> RunError:
    numeric = (NumericalFailure, StepRejected, QuadratureError, ResonanceError, StabilityError,
               InconsistentDecoder, FloatingPointError, ZeroDivisionError, OverflowError)
    if isinstance(exc, numeric):
        return RunError("numerical", EXIT_NUMERIC, exc)
    if isinstance(exc, OSError):
        return RunError("io", EXIT_IO, exc)
    return RunError("schema", EXIT_SCHEMA, exc)


def _codes_interactive(args) -> int:
    if args.generators:
        n = len(args.generators[0])
        k = args.k if args.k is not None else n - len(args.generators)
        code = StabilizerCode("custom", n, k, args.generators)
    elif args.action == "list":
        rows = []
        for nm in registry_names():
            e = registry_entry(nm)
            rows.append([nm, e["n"], e["k"], e.get("distance", ""), " ".join(e["generators"]),
                         e["default_model"], e["description"]])
        sys.stdout.write(cfgmod.csv_text(["name", "n", "k", "d", "generators", "default_model", "description"],
                                         rows))
        return 0
    else:
        if not args.name:
            raise ConfigError(f"'codes {args.action}' needs a code name")
        code = get_code(args.name)
    model = model_from_config(code, args.model)
    info = code.to_dict()
    info["num_syndromes"] = code.num_syndromes
    info["errors"] = model.labels()
    if args.action == "classify":
        model.check_detectable(code)
        table = classify(code, model, args.max_weight)
        info["correctable_syndromes"] = len(table.correctable_syndromes())
        info["level_counts"] = {str(w): list(v) for w, v in sorted(table.level_counts.items())}
        info["ambiguous"] = len(table.ambiguous)
    print(json.dumps(info, indent=1))
    return 0


def _graph_interactive(args) -> int:
    code = get_code(args.code)
    model = model_from_config(code, args.model)
    model.check_detectable(code)
    table = classify(code, model, args.max_weight)
    sys.stdout.write(export_graph(build_graph(code, model, table), args.graph_format))
    return 0


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "validate":
            path = args.path or args.config
            if not path:
                raise ConfigError("validate needs a configuration path")
            p = cfgmod.resolve_config_path(path)
            text = p.read_text(encoding="utf-8")
            try:
                cfg = json.loads(text) if text.strip() else None
                report = validate_config(cfg) if cfg is not None else {
                    "valid": False, "errors": ["configuration file is empty"], "warnings": []}
            except json.JSONDecodeError as exc:
                report = {"valid": False, "errors": [f"invalid JSON: {exc}"], "warnings": []}
            report = {"config": str(path), **report}
            print(json.dumps(report, indent=1))
            return EXIT_SCHEMA if args.strict and not report["valid"] else 0

        config_path = cfgmod.env_override("config", args.config)
        if config_path is None:
            if args.command == "codes":
                return _codes_interactive(args)
            if args.command == "graph" and args.code:
                return _graph_interactive(args)
            raise ConfigError(f"'{args.command}' needs --config")

        cfg = cfgmod.load_config(config_path)
        if cfg["mode"] != args.command:
            raise ConfigError(f"config mode {cfg['mode']!r} does not match subcommand {args.command!r}")
        seed = cfgmod.env_override("seed", args.seed, int)
        threads = cfgmod.env_override("threads", args.threads, int)
        fmt = cfgmod.env_override("format", args.format)
        out = cfgmod.env_override("out", args.out) or "runs"
        if seed is not None:
            cfg["seed"] = seed
        if fmt is not None:
            cfg["format"] = fmt
        fmt = cfg.get("format", "csv")
        threads = threads or cfg.get("threads", 1)
        run_dir = execute(cfg, Path(out), fmt, threads)
        print(json.dumps({"run_dir": str(run_dir),
                          "files": json.loads((run_dir / "manifest.json").read_text())["files"]}))
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        return _emit_error(_classify_exc(exc))


if __name__ == "__main__":
    sys.exit(main())
