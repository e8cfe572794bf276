"""Command-line entry point: ``approxgpdm {train,simulate,analyze,bench,casestudy}``.

Each subcommand reads an optional JSON config (``--config``); flags override
config values. Exit status is 0 on success, 2 for bad input and 3 when the
numerics break down.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import __version__, analysis, bench, casestudies, io, systems
from .exceptions import InputError, NumericalError
from .gp_core import fit_hyperparameters
from .gpdm import GpdmModel, RegressorLayout, format_max_len, normalize_max_len, simulate_many
from .kernels import SE_ARD, MeanSpec

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def parse_mbar_list(text):
    """``"0,10,inf"`` -> ``[0, 10, None]``."""
    if isinstance(text, (list, tuple)):
        items = list(text)
    else:
        items = [s for s in str(text).split(",") if s.strip()]
    if not items:
        raise InputError("memory list is empty")
    try:
        return [normalize_max_len(s.strip() if isinstance(s, str) else s) for s in items]
    except ValueError as exc:
        raise InputError(f"bad memory length in {text!r}") from exc


def load_config(args):
    cfg = {}
    if args.config:
        cfg = io.read_json(args.config)
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
    for key in ("seed", "out", "mbar", "samples", "steps"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg.setdefault("seed", 0)
    cfg.setdefault("out", ".")
    return cfg


def _require(cfg, key):
    if key not in cfg:
        raise InputError(f"config needs {key!r}")
    return cfg[key]


def _resolve(cfg, path):
    base = cfg.get("_base", ".")
    return path if os.path.isabs(path) else os.path.join(base, path)


def build_policy(spec, T, n_u):
    """Policy from a config object.

    Kinds: ``zero``, ``pp_input`` (periodic two-channel input),
    ``open_loop`` with ``inputs`` (one row per step) and ``linear_feedback``
    with ``gain`` (``u = gain @ x``).
    """
    kind = (spec or {"kind": "zero"}).get("kind", "zero")
    if kind == "zero":
        return None
    if kind == "pp_input":
        if n_u != 2:
            raise InputError("pp_input needs a two-input model")
        return np.array([systems.pp_input(t) for t in range(T)]).reshape(T, 2)
    if kind == "open_loop":
        U = np.asarray(_require(spec, "inputs"), dtype=float).reshape(-1, n_u)
        if U.shape[0] < T:
            raise InputError(f"open-loop inputs cover {U.shape[0]} steps, need {T}")
        return U
    if kind == "linear_feedback":
        G = np.atleast_2d(np.asarray(_require(spec, "gain"), dtype=float))
        if G.shape[0] != n_u:
            raise InputError(f"feedback gain needs {n_u} rows")
        return lambda x: G @ x
    raise InputError(f"unknown policy kind {kind!r}")


def _parse_init(model, init):
    if model.layout.kind == "ssm":
        return np.asarray(init, dtype=float)
    if not isinstance(init, dict):
        raise InputError("output-error models need init {'outputs': ..., 'inputs': ...}")
    return (np.asarray(init["outputs"], dtype=float), init.get("inputs"))


def cmd_train(cfg):
    ds_path = _resolve(cfg, _require(cfg, "dataset"))
    if not os.path.exists(ds_path):
        raise InputError(f"dataset not found: {ds_path}")
    layout = RegressorLayout.from_dict(_require(cfg, "layout"))
    noise_var = float(cfg.get("noise_var", 0.01))
    ds, _ = io.read_dataset_csv(ds_path, noise_var)
    md = cfg.get("mean", {"family": "zero"})
    mean = MeanSpec(md.get("family", "zero"), float(md.get("c", 0.0)))
    seed = int(cfg["seed"])
    hp = fit_hyperparameters(
        ds,
        cfg.get("kernel_family", SE_ARD),
        mean,
        restarts=int(cfg.get("restarts", 5)),
        seed=seed,
        fit_noise=bool(cfg.get("fit_noise", True)),
    )
    model = GpdmModel(layout, hp.training_set(ds), hp.kernel(), mean)
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], cfg.get("model_name", "model.json"))
    extra = {"fit": {"log_likelihood": hp.log_likelihood, "improved": hp.improved, "seed": seed}}
    io.save_model(path, model, extra=extra)
    print(f"log_likelihood {hp.log_likelihood!r}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_simulate(cfg):
    model = io.load_model(_resolve(cfg, _require(cfg, "model")))
    T = int(cfg.get("steps", 100))
    n = int(cfg.get("samples", 1))
    m_bars = parse_mbar_list(cfg.get("mbar", "inf"))
    init = _parse_init(model, _require(cfg, "init"))
    policy = build_policy(cfg.get("policy"), T, model.layout.n_u)
    mode = cfg.get("mode", "sample")
    seed = int(cfg["seed"])
    runs = {m: simulate_many(model, [init] * n, policy, T, m, seed, mode, int(cfg.get("n_jobs", 1)))
            for m in m_bars}
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "trajectories.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        io.write_trajectories_csv(fh, runs)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_analyze(cfg):
    model = io.load_model(_resolve(cfg, _require(cfg, "model")))
    hist, _ = io.read_dataset_csv(_resolve(cfg, _require(cfg, "history")))
    m_bars = parse_mbar_list(cfg.get("mbar", "0,1,inf"))
    report = analysis.compare_memories(model, hist.X.T, hist.Y, m_bars, seed=cfg.get("seed"))
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "error_report.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        report.write_csv(fh)
    if not report.distinct.all():
        print("warning: history regressors are not pairwise distinct; see 'distinct' column",
              file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_bench(cfg):
    rows = bench.run(
        sizes=tuple(cfg.get("sizes", (50, 200, 800))),
        sim_steps=int(cfg.get("steps", 200)),
        repeats=int(cfg.get("repeats", 3)),
        seed=int(cfg["seed"]),
    )
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "bench.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        bench.write_csv(fh, rows)
    for r in rows:
        print(f"{r[0]:<9}{r[1]:>6} {r[2]:<9}{r[3]:.6f}s")
    print(f"wrote {path}")
    return EXIT_OK


def _write(out, name, writer, *args):
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer(fh, *args)
    return path


def cmd_casestudy(cfg):
    which = cfg["which"]
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    seed = int(cfg["seed"])
    n_jobs = int(cfg.get("n_jobs", 1))
    if which == "pp":
        kw = {}
        if "steps" in cfg:
            kw["T"] = int(cfg["steps"])
        if "samples" in cfg:
            kw["n_samples"] = int(cfg["samples"])
        if "mbar" in cfg:
            kw["m_bars"] = parse_mbar_list(cfg["mbar"])
        run = casestudies.run_predator_prey(seed, n_jobs=n_jobs, **kw)
        _write(out, "boundedness.csv", io.write_trajectories_csv, run.sweep)
        _write(out, "error_report.csv", run.report.write_csv)
    elif which == "thomas":
        kw = {}
        if "steps" in cfg:
            kw["T"] = int(cfg["steps"])
            kw["timing_T"] = max(100, int(cfg["steps"]))
        if "samples" in cfg:
            kw["n_samples"] = int(cfg["samples"])
        if "mbar" in cfg:
            mb = parse_mbar_list(cfg["mbar"])
            if len(mb) != 1:
                raise InputError("the closed-loop study takes a single memory length")
            kw["m_bar"] = mb[0]
        run = casestudies.run_thomas(seed, n_jobs=n_jobs, **kw)
    else:
        raise InputError(f"unknown case study {which!r}")
    io.write_dataset_csv(os.path.join(out, "training.csv"), run.model.ds)
    io.save_model(os.path.join(out, "model.json"), run.model, csv_path="training.csv")
    _write(out, "trajectories.csv", io.write_trajectories_csv, run.samples)
    _write(out, "truth.csv", io.write_states_csv, run.truth)
    _write(out, "timing.csv", run.timing.write_csv)
    summary = {
        "case_study": which,
        "seed": seed,
        "version": __version__,
        "memory_lengths": [format_max_len(m) for m in run.samples],
        "metrics": run.metrics,
    }
    io.write_json(os.path.join(out, "summary.json"), summary)
    print(json.dumps(summary["metrics"], indent=1, default=str))
    print(f"wrote bundle to {out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "bench": cmd_bench,
    "casestudy": cmd_casestudy,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="approxgpdm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "casestudy":
            p.add_argument("which", choices=("pp", "thomas"))
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--mbar", help="comma-separated memory lengths, 'inf' for unbounded")
        p.add_argument("--samples", type=int)
        p.add_argument("--steps", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.config:
            cfg["_base"] = os.path.dirname(os.path.abspath(args.config))
        if args.command == "casestudy":
            cfg["which"] = args.which
        return COMMANDS[args.command](cfg)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, OSError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
