"""File formats: model JSON, dataset CSV, trajectory CSV.

Floats in JSON are written with 17 significant digits so a load/save cycle
is exact; CSV files are UTF-8 with LF line endings.
"""
import csv
import json
import math
import os

import numpy as np

from .exceptions import InputError
from .gp_core import TrainingSet
from .gpdm import MEMORY_JITTER, SSM, GpdmModel, OutputMap, RegressorLayout, format_max_len
from .kernels import KernelSpec, MeanSpec

FLOAT_FORMAT = ".17g"


def _dump(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise InputError("cannot serialize a non-finite number")
        text = format(v, FLOAT_FORMAT)
        # keep floats recognizable as floats
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        return _dump(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise InputError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with fixed 17-digit floats."""
    return _dump(obj, indent, 0) + "\n"


def write_json(path, obj):
    text = dumps(obj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def regressor_prefix(layout):
    return "x" if layout.kind == SSM else "zeta"


def write_dataset_csv(path, ds, prefix="x"):
    """One row per training point: regressor columns then target columns."""
    header = [f"{prefix}_{i + 1}" for i in range(ds.input_dim)]
    header += [f"y_{i + 1}" for i in range(ds.output_dim)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j in range(ds.n_points):
            w.writerow([format(float(v), FLOAT_FORMAT) for v in ds.X[:, j]]
                       + [format(float(v), FLOAT_FORMAT) for v in ds.Y[j]])


def read_dataset_csv(path, noise_var=0.0):
    """Load a dataset CSV; returns ``(TrainingSet, prefix)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty dataset")
    header = rows[0]
    reg = [h for h in header if h.startswith(("x_", "zeta_"))]
    tgt = [h for h in header if h.startswith("y_")]
    if not reg or not tgt or len(reg) + len(tgt) != len(header) or header != reg + tgt:
        raise InputError(f"{path}: header must be regressor columns then y_ columns")
    prefixes = {h.split("_")[0] for h in reg}
    if len(prefixes) != 1:
        raise InputError(f"{path}: mixed regressor prefixes")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise InputError(f"{path}: rows must have {len(header)} values")
    n = len(reg)
    return TrainingSet(data[:, :n].T, data[:, n:], noise_var), prefixes.pop()


def model_to_dict(model, csv_path=None, extra=None):
    d = {
        "layout": model.layout.to_dict(),
        "kernel": model.kernel.to_dict(),
        "mean": model.mean.to_dict(),
        "noise_log_var": float(np.log(model.ds.noise_var)) if model.ds.noise_var > 0 else None,
        "data": (
            {"csv_path": csv_path}
            if csv_path is not None
            else {"inline": {"X": model.ds.X.tolist(), "Y": model.ds.Y.tolist()}}
        ),
        "output_map": model.output_map.to_dict(),
        "memory_jitter": model.memory_jitter,
    }
    if extra:
        d.update(extra)
    return d


def model_from_dict(d, base_dir="."):
    try:
        layout = RegressorLayout.from_dict(d["layout"])
        kd = d["kernel"]
        kernel = KernelSpec(kd["family"], layout.regressor_dim, kd.get("log_params") or None)
        md = d.get("mean", {"family": "zero"})
        mean = MeanSpec(md["family"], float(md.get("c", 0.0)))
        nlv = d.get("noise_log_var")
        noise_var = 0.0 if nlv is None else float(np.exp(nlv))
        data = d["data"]
        if "inline" in data:
            ds = TrainingSet(np.array(data["inline"]["X"], dtype=float),
                             np.array(data["inline"]["Y"], dtype=float), noise_var)
        else:
            path = data["csv_path"]
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            ds, _ = read_dataset_csv(path, noise_var)
        omap = OutputMap.from_dict(d.get("output_map", {"kind": "identity"}))
        jitter = float(d.get("memory_jitter", MEMORY_JITTER))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed model description: missing or invalid {exc}") from exc
    return GpdmModel(layout, ds, kernel, mean, omap, jitter)


def save_model(path, model, csv_path=None, extra=None):
    write_json(path, model_to_dict(model, csv_path, extra))


def load_model(path):
    return model_from_dict(read_json(path), os.path.dirname(os.path.abspath(path)))


def trajectory_header(n):
    return (["sample_id", "m_bar", "t"] + [f"x_{i + 1}" for i in range(n)]
            + [f"mean_{i + 1}" for i in range(n)] + [f"var_{i + 1}" for i in range(n)]
            + ["step_seconds"])


def write_trajectories_csv(fh, runs):
    """``runs`` maps a memory length to a list of trajectories."""
    w = csv.writer(fh, lineterminator="\n")
    header_written = False
    for m, trs in runs.items():
        for sid, tr in enumerate(trs):
            n = tr.states.shape[1]
            if not header_written:
                w.writerow(trajectory_header(n))
                header_written = True
            for t in range(tr.T + 1):
                w.writerow([sid, format_max_len(m), t]
                           + [repr(float(v)) for v in tr.states[t]]
                           + [repr(float(v)) for v in tr.means[t]]
                           + [repr(float(v)) for v in tr.variances[t]]
                           + [repr(float(tr.step_seconds[t]))])


def write_states_csv(fh, states, prefix="x"):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"{prefix}_{i + 1}" for i in range(states.shape[1])])
    for t, row in enumerate(states):
        w.writerow([t] + [repr(float(v)) for v in row])
