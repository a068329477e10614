"""File formats written into run directories.

* ``snapshot_NNNNNN.csv``: one row per site with columns
  ``site,x,p_plus,p_minus,rho,u`` (PDE snapshots write ``nan`` for p_+-);
* ``provenance.toml``: flat ``key = value`` lines, loadable as a config;
* ``plot_snapshots.py``: a matplotlib script plotting every snapshot;
* ``ensemble_NNNNNN.qlg``: packed occupancy bits of a microscopic ensemble.
"""

import csv
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lattice import Trajectory
from utils.errors import ConfigError, ParameterError

logger = logging.getLogger("Export")

SNAPSHOT_COLUMNS = ("site", "x", "p_plus", "p_minus", "rho", "u")
SNAPSHOT_PATTERN = re.compile(r"snapshot_(\d{6})\.csv$")
PROVENANCE_FILE = "provenance.toml"
PLOT_SCRIPT = "plot_snapshots.py"
DUMP_MAGIC = b"QLG1"


def snapshot_filename(step):
    return f"snapshot_{step:06d}.csv"


def write_snapshot(path, grid, rho, plus=None, minus=None):
    """Write one density snapshot in the shared CSV schema."""
    rho = np.asarray(rho, dtype=float)
    nan = np.full_like(rho, math.nan)
    plus = nan if plus is None else np.asarray(plus, dtype=float)
    minus = nan if minus is None else np.asarray(minus, dtype=float)
    u = grid.c * (rho - 1.0)

    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SNAPSHOT_COLUMNS)
        for site in range(len(rho)):
            writer.writerow([
                site,
                repr(float(grid.x[site])),
                repr(float(plus[site])),
                repr(float(minus[site])),
                repr(float(rho[site])),
                repr(float(u[site])),
            ])
    return Path(path)


def write_trajectory(directory, trajectory, grid):
    """Write every snapshot of ``trajectory`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, step in enumerate(trajectory.steps):
        plus = trajectory.plus[i] if trajectory.plus is not None else None
        minus = trajectory.minus[i] if trajectory.minus is not None else None
        paths.append(
            write_snapshot(directory / snapshot_filename(int(step)), grid, trajectory.rho[i],
                           plus, minus)
        )
    logger.info(f"Wrote {len(paths)} snapshots to {directory}")
    return paths


def read_snapshot(path):
    """Read a snapshot CSV into a dict of numpy arrays keyed by column."""
    columns = {name: [] for name in SNAPSHOT_COLUMNS}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != SNAPSHOT_COLUMNS:
            raise ParameterError(f"{path} does not have the snapshot header {SNAPSHOT_COLUMNS}")
        for row in reader:
            for name in SNAPSHOT_COLUMNS:
                columns[name].append(float(row[name]))
    data = {name: np.array(values) for name, values in columns.items()}
    data["site"] = data["site"].astype(np.int64)
    return data


def load_trajectory(directory, dt=1.0):
    """Rebuild a Trajectory from the snapshot files of a run directory."""
    directory = Path(directory)
    found = sorted(
        (int(match.group(1)), path)
        for path in directory.iterdir()
        if (match := SNAPSHOT_PATTERN.search(path.name))
    )
    if not found:
        raise ConfigError(f"no snapshots in {directory}", field="run")
    snapshots = [read_snapshot(path) for _, path in found]
    plus = np.array([s["p_plus"] for s in snapshots])
    minus = np.array([s["p_minus"] for s in snapshots])
    has_components = not np.all(np.isnan(plus))
    return Trajectory(
        steps=np.array([step for step, _ in found]),
        rho=np.array([s["rho"] for s in snapshots]),
        dt=dt,
        plus=plus if has_components else None,
        minus=minus if has_components else None,
    )


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return json.dumps(str(value))


def write_provenance(path, flat):
    """Write a flat ``{dotted.key: value}`` mapping as ``key = value`` lines."""
    lines = [f"{key} = {_toml_value(value)}" for key, value in flat.items() if value is not None]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def write_rows(path, rows, columns=None):
    """Write a list of dicts as CSV (sweep summaries, coefficient tables, reports)."""
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([
                repr(float(row[c])) if isinstance(row.get(c), (float, np.floating)) else row.get(c, "")
                for c in columns
            ])
    return Path(path)


_PLOT_TEMPLATE = '''\
"""Plot the density snapshots of this directory."""

import csv
import glob
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
paths = sorted(glob.glob(os.path.join(here, "{pattern}snapshot_*.csv")))
fig, axes = plt.subplots(len(paths), 1, figsize=(6, 1.8 * max(len(paths), 1)), sharex=True, squeeze=False)
for ax, path in zip(axes[:, 0], paths):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    ax.plot([float(r["x"]) for r in rows], [float(r["rho"]) for r in rows], lw=1.2)
    ax.set_ylim(0.5, 1.5)
    step = int(os.path.basename(path)[-10:-4])
    ax.text(0.02, 0.85, f"t = {{step}}", transform=ax.transAxes)
    ax.set_ylabel("rho")
axes[-1, 0].set_xlabel("x")
fig.suptitle({title!r})
fig.tight_layout()
fig.savefig(os.path.join(here, "snapshots.png"), dpi=150)
'''


def write_plot_script(directory, title="", pattern=""):
    """Emit ``plot_snapshots.py`` for the snapshots under ``directory``.

    ``pattern`` is a glob prefix such as ``"*/"`` for preset directories that
    hold one sub-directory per run.
    """
    path = Path(directory) / PLOT_SCRIPT
    path.write_text(_PLOT_TEMPLATE.format(pattern=pattern, title=title), encoding="utf-8")
    return path


@dataclass(frozen=True)
class EnsembleDump:
    n_realizations: int
    n_sites: int
    step: int
    plus: np.ndarray
    minus: np.ndarray


def write_ensemble_dump(path, ensemble):
    """Header ``QLG1`` + little-endian uint64 (N, n_sites, step), then one packed row per realization.

    Each row packs the realization's plus bits followed by its minus bits.
    """
    header = np.array(
        [ensemble.spec.n_realizations, ensemble.n_sites, ensemble.step], dtype="<u8"
    ).tobytes()
    bits = np.concatenate([ensemble.plus, ensemble.minus], axis=1)
    with open(path, "wb") as f:
        f.write(DUMP_MAGIC)
        f.write(header)
        f.write(np.packbits(bits, axis=1).tobytes())
    return Path(path)


def read_ensemble_dump(path):
    data = Path(path).read_bytes()
    if data[:4] != DUMP_MAGIC:
        raise ParameterError(f"{path} is not an ensemble dump")
    n_realizations, n_sites, step = (int(v) for v in np.frombuffer(data[4:28], dtype="<u8"))
    row_bytes = (2 * n_sites + 7) // 8
    packed = np.frombuffer(data[28:], dtype=np.uint8)
    if packed.size != n_realizations * row_bytes:
        raise ParameterError(f"{path} is truncated")
    bits = np.unpackbits(packed.reshape(n_realizations, row_bytes), axis=1)[:, : 2 * n_sites]
    return EnsembleDump(n_realizations, n_sites, step, bits[:, :n_sites], bits[:, n_sites:])
