"""Bundled benchmark netlists and lookup of user-supplied originals."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .netlist import RawCircuit, parse_bench

BUNDLED = ("c17", "fa", "c880", "c1355", "c7552")
ENV_DIR = "CSMSIM_BENCH_DIR"


def _candidate_dirs(search_dirs) -> list:
    dirs = [Path(d) for d in (search_dirs or [])]
    if os.environ.get(ENV_DIR):
        dirs.append(Path(os.environ[ENV_DIR]))
    return dirs


def benchmark_source(name: str, search_dirs=None) -> tuple:
    """``(text, origin)`` for benchmark ``name``.

    Directories in ``search_dirs`` (then ``$CSMSIM_BENCH_DIR``) are tried
    first, so original distributions can replace the bundled copies.
    """
    for d in _candidate_dirs(search_dirs):
        p = d / f"{name}.bench"
        if p.is_file():
            return p.read_text(), str(p)
    if name in BUNDLED:
        res = resources.files("csmsim") / "data" / f"{name}.bench"
        return res.read_text(), f"bundled:{name}"
    raise ConfigError(f"unknown benchmark {name!r}; bundled: {', '.join(BUNDLED)}")


def load_benchmark(name: str, search_dirs=None) -> RawCircuit:
    text, _ = benchmark_source(name, search_dirs)
    return parse_bench(text, name)


def load_netlist(spec: str, search_dirs=None) -> RawCircuit:
    """Parse a ``.bench`` path, or fall back to a benchmark name."""
    p = Path(spec)
    if p.suffix == ".bench" or p.exists():
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read netlist {p}: {exc.strerror}") from None
        return parse_bench(text, p.stem)
    return load_benchmark(spec, search_dirs)
