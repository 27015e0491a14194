"""On-disk format for chain output.

A run directory holds ``draws.csv`` (one row per retained draw), ``atoms.csv``
(one row per occupied cluster per draw), ``trace.csv`` (lambda L2 norm at
every sweep) and ``manifest.txt``. Floats are written with ``repr`` so that
files round-trip exactly.
"""

from __future__ import annotations

import contextlib
import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from .sampler import ChainResult, DrawRecord
from .var import CoefficientLayout

DRAWS = "draws.csv"
ATOMS = "atoms.csv"
TRACE = "trace.csv"
MANIFEST = "manifest.txt"


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary sibling of ``path``; it replaces ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _r(v) -> str:
    return repr(float(v))


def draw_header(n: int, q: int, n_blocks: int) -> list[str]:
    head = ["iteration", "lambda_norm", "gamma0", "tau0", "edge_count"]
    head += [f"pi_{b + 1}" for b in range(n_blocks)]
    head += [f"beta_{k}" for k in range(n)]
    head += [f"xi_{k}" for k in range(n)]
    head += [f"d_{k}" for k in range(n)]
    head += [f"sigma_{i}_{j}" for i in range(q) for j in range(i, q)]
    return head


def write_draws(directory, result: ChainResult, layout: CoefficientLayout) -> None:
    directory = Path(directory)
    n, q, nb = layout.n, layout.q, len(layout.blocks)
    iu = np.triu_indices(q)
    with atomic_path(directory / DRAWS) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(draw_header(n, q, nb))
        for r in result.draws:
            row = [r.iteration, _r(r.lambda_norm), _r(r.gamma0), _r(r.tau0), r.edge_count]
            row += [_r(v) for v in r.pi]
            row += [_r(v) for v in r.beta]
            row += [int(v) for v in r.xi]
            row += [int(v) for v in r.d]
            row += [_r(v) for v in r.sigma[iu]]
            w.writerow(row)
    with atomic_path(directory / ATOMS) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "block", "cluster", "mu", "gamma", "tau"])
        for r in result.draws:
            for b, atoms in enumerate(r.atoms):
                for cid, mu, gam, tau in atoms:
                    w.writerow([r.iteration, b + 1, int(cid), _r(mu), _r(gam), _r(tau)])
    with atomic_path(directory / TRACE) as tmp, open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "lambda_norm", "burn_in"])
        for it, v in enumerate(result.trace):
            w.writerow([it, _r(v), int(it < result.burn_in)])


def resolve_run(path) -> Path:
    """Run directory from either the directory or its draws file."""
    path = Path(path)
    if path.is_dir():
        return path
    if path.exists():
        return path.parent
    raise FileNotFoundError(f"{path}: no such file or directory")


def read_draws(path, layout: CoefficientLayout) -> list[DrawRecord]:
    path = Path(path)
    draws_path = path / DRAWS if path.is_dir() else path
    with open(draws_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{draws_path}: no draws")
    n, q, nb = layout.n, layout.q, len(layout.blocks)
    head = draw_header(n, q, nb)
    if rows[0] != head:
        raise ValueError(f"{draws_path}: header does not match the panel layout")
    atoms_path = draws_path.parent / ATOMS
    atoms: dict[int, list[list]] = {}
    if atoms_path.exists():
        with open(atoms_path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for it, b, cid, mu, gam, tau in reader:
                atoms.setdefault(int(it), [[] for _ in range(nb)])[int(b) - 1].append(
                    (int(cid), float(mu), float(gam), float(tau))
                )
    iu = np.triu_indices(q)
    out = []
    for row in rows[1:]:
        if len(row) != len(head):
            raise ValueError(f"{draws_path}: ragged row")
        it = int(row[0])
        pos = 5
        pi = np.array([float(v) for v in row[pos : pos + nb]])
        pos += nb
        beta = np.array([float(v) for v in row[pos : pos + n]])
        pos += n
        xi = np.array([int(v) for v in row[pos : pos + n]], dtype=np.int8)
        pos += n
        d = np.array([int(v) for v in row[pos : pos + n]], dtype=np.int64)
        pos += n
        sigma = np.zeros((q, q))
        sigma[iu] = [float(v) for v in row[pos:]]
        sigma = sigma + np.triu(sigma, 1).T
        blk = atoms.get(it, [[] for _ in range(nb)])
        out.append(
            DrawRecord(
                iteration=it,
                beta=beta,
                xi=xi,
                d=d,
                pi=pi,
                gamma0=float(row[2]),
                tau0=float(row[3]),
                atoms=[np.array(a, dtype=float).reshape(-1, 4) for a in blk],
                sigma=sigma,
                edge_count=int(row[4]),
                lambda_norm=float(row[1]),
            )
        )
    return out


def read_trace(path) -> np.ndarray:
    """Post-burn-in lambda-norm trace at every sweep.

    Falls back to the retained draws when no trace file exists.
    """
    path = Path(path)
    run = resolve_run(path)
    trace_path = run / TRACE
    if path.is_file() and path.name != DRAWS:
        trace_path = path
    if not trace_path.exists():
        trace_path = run / DRAWS
    with open(trace_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{trace_path}: empty draws file")
    col = rows[0].index("lambda_norm") if "lambda_norm" in rows[0] else None
    if col is None:
        raise ValueError(f"{trace_path}: no lambda_norm column")
    burn = rows[0].index("burn_in") if "burn_in" in rows[0] else None
    return np.array([float(r[col]) for r in rows[1:] if r and (burn is None or r[burn] == "0")])
