"""Dataset CSV files and JSON model documents."""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .baseline import CircularSmoother
from .core import Basis, Dataset, ParametricAgmm
from .em_nonparametric import Kernel, NonparametricAgmm
from .errors import InvalidArgumentError

log = logging.getLogger(__name__)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dataset_to_csv(data: Dataset) -> str:
    import io as _io
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(data.p)] + ["theta"])
    for x, t in zip(data.xs, data.thetas):
        w.writerow([repr(float(v)) for v in x] + [repr(float(t))])
    return buf.getvalue()


def write_dataset(data: Dataset, path) -> None:
    atomic_write(path, dataset_to_csv(data))


def read_dataset(path):
    """Parse a ``x1,...,xp,theta`` CSV; returns ``(dataset, n_wrapped)``.

    Out-of-range angles are reduced to ``[-pi, pi)`` and counted.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "theta" or any(h != f"x{j + 1}" for j, h in enumerate(header[:-1])) \
            or len(header) < 2:
        raise InvalidArgumentError(f"{path}: header must be x1,...,xp,theta")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise InvalidArgumentError(f"{path}: no data rows")
    data, n_wrapped = Dataset.from_raw(body[:, :-1], body[:, -1])
    if n_wrapped:
        log.warning("%s: wrapped %d theta values into [-pi, pi)", path, n_wrapped)
    return data, n_wrapped


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _floats(a):
    return [float(v) for v in np.ravel(a)]


def model_to_dict(model) -> dict:
    if isinstance(model, ParametricAgmm):
        if model.basis.kind != "polynomial":
            raise InvalidArgumentError("only polynomial bases can be serialised")
        return {
            "type": "parametric",
            "basis": {"kind": "polynomial", "degree": model.basis.degree, "p": model.basis.p},
            "beta": _floats(model.beta),
            "sigma2": float(model.sigma2),
            "r": _floats(model.r),
            "K": model.K,
        }
    if isinstance(model, NonparametricAgmm):
        return {
            "type": "nonparametric",
            "grid": model.grid.tolist(),
            "mu": _floats(model.mu),
            "sigma2": _floats(model.sigma2),
            "r": model.r.tolist(),
            "K": model.K,
        }
    if isinstance(model, CircularSmoother):
        return {
            "type": "smoothing",
            "kernel": {"shape": model.kernel.shape, "h": model.kernel.h},
            "degenerate": model.degenerate,
            "xs": model.data.xs.tolist(),
            "thetas": _floats(model.data.thetas),
        }
    raise InvalidArgumentError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("type", "parametric")
    if kind == "parametric":
        b = d["basis"]
        if b.get("kind", "polynomial") != "polynomial":
            raise InvalidArgumentError("only polynomial bases can be loaded")
        model = ParametricAgmm(Basis(int(b["degree"]), int(b.get("p", 1))),
                               np.array(d["beta"]), d["sigma2"], np.array(d["r"]))
    elif kind == "nonparametric":
        model = NonparametricAgmm(np.array(d["grid"]), np.array(d["mu"]),
                                  np.array(d["sigma2"]), np.array(d["r"]))
    elif kind == "smoothing":
        k = d["kernel"]
        return CircularSmoother(Dataset(np.array(d["xs"]), np.array(d["thetas"])),
                                Kernel(k["shape"], float(k["h"])), d.get("degenerate", "error"))
    else:
        raise InvalidArgumentError(f"unknown model type {kind!r}")
    if "K" in d and int(d["K"]) != model.K:
        raise InvalidArgumentError("K does not match the stored mixture weights")
    return model


def save_model(model, path) -> None:
    atomic_write(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
