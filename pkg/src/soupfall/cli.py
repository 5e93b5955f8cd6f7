"""Command line front end: ``soupfall <command> --config run.json --out DIR``.

A run is described by one JSON object. Flags override it: ``--seed`` beats the
``SOUPFALL_SEED`` environment variable, which beats the file; ``-p key=value``
sets or replaces single fields. Each run writes its tables, a ``summary.json``
with the fitted values and an input hash, and finally ``manifest.json``.

Exit status is 0 on success, 2 for configuration errors (the message names
the field) and 1 when the operation itself fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .carpet import remaining_raster
from .cluster import beta_star_run
from .estimate import (
    PTable,
    SmallCRow,
    cle_values,
    fit_alpha,
    phase_scan,
    remaining_fraction,
    remaining_set_dimension,
    run_crossings,
    rw_area_check,
    small_c_report,
)
from .exceptions import (
    DomainError,
    GeometryError,
    InvalidSpecError,
    ResolutionError,
    SoupfallError,
)
from .geom import Rect, domain_from_record
from .io import csv_text, load_soup, save_soup, soup_lines
from .soup import ShapeMeasure, SoupSpec, sample_soup

COMMANDS = ("sample", "carpet-prob", "fit-alpha", "remaining-dim", "phase-scan", "beta-star",
            "small-c", "cle", "rw-area")


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# -- field parsers ------------------------------------------------------------------------

def _number(field, v, lo=None, hi=None, lo_open=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(field, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(field, f"expected an integer, got {v!r}")
    v = int(v) if integer else float(v)
    if not math.isfinite(v):
        raise ConfigError(field, f"must be finite, got {v}")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(field, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(field, f"must be <= {hi}, got {v}")
    return v


def positive(field, v):
    return _number(field, v, 0, lo_open=True)


def unit_open(field, v):
    v = _number(field, v, 0, lo_open=True)
    if v >= 1:
        raise ConfigError(field, f"must lie in (0, 1), got {v}")
    return v


def int_at_least(k):
    def parse(field, v):
        return _number(field, v, k, integer=True)
    return parse


def number_list(item, increasing=False, min_len=1):
    def parse(field, v):
        if not isinstance(v, list) or len(v) < min_len:
            raise ConfigError(field, f"expected a list of at least {min_len} numbers")
        out = [item(f"{field}[{k}]", x) for k, x in enumerate(v)]
        if increasing and any(b <= a for a, b in zip(out, out[1:])):
            raise ConfigError(field, "must be strictly increasing")
        return out
    return parse


def shape_field(field, v):
    try:
        return ShapeMeasure.from_record(v)
    except (InvalidSpecError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(field, str(exc)) from exc


def domain_field(field, v):
    try:
        return domain_from_record(v)
    except (GeometryError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(field, str(exc)) from exc


def choice(*options):
    def parse(field, v):
        if v not in options:
            raise ConfigError(field, f"must be one of {list(options)}, got {v!r}")
        return v
    return parse


def text(field, v):
    if not isinstance(v, str):
        raise ConfigError(field, f"expected a string, got {v!r}")
    return v


def optional(parse):
    def inner(field, v):
        return None if v is None else parse(field, v)
    return inner


def flag(field, v):
    if not isinstance(v, bool):
        raise ConfigError(field, f"expected true or false, got {v!r}")
    return v


_REQUIRED = object()

_CROSSING = {
    "shape": (shape_field, "circle"),
    "c": (positive, _REQUIRED),
    "eps_list": (number_list(unit_open), _REQUIRED),
    "replicas": (int_at_least(100), 1000),
    "pitch_rule": (positive, 8.0),
    "grid": (choice("cartesian", "logpolar"), "cartesian"),
    "n_theta": (int_at_least(8), 128),
    "eps_min": (optional(positive), None),
}

# per command: field -> (parser, default)
FIELDS = {
    "sample": {
        "shape": (shape_field, "circle"),
        "c": (positive, _REQUIRED),
        "domain": (domain_field, "unit_disk"),
        "eps_min": (positive, _REQUIRED),
        "rho_max": (optional(positive), None),
        "marks": (flag, False),
        "pitch": (optional(positive), None),
    },
    "carpet-prob": dict(_CROSSING),
    "fit-alpha": dict(_CROSSING, c=(optional(positive), None),
                      eps_list=(optional(number_list(unit_open, min_len=3)), None),
                      table=(optional(text), None)),
    "remaining-dim": {
        "shape": (shape_field, "circle"),
        "c": (positive, _REQUIRED),
        "eps_min": (positive, _REQUIRED),
        "rho_max": (positive, 2.0),
        "domain": (domain_field, "unit_square"),
        "pitch": (positive, 1 / 1024),
        "factors": (number_list(int_at_least(1), increasing=True, min_len=3),
                    [4, 8, 16, 32, 64, 128]),
        "replicas": (int_at_least(1), 100),
    },
    "phase-scan": {
        "shape": (shape_field, "circle"),
        "c_grid": (number_list(positive, increasing=True, min_len=2), _REQUIRED),
        "eps_fixed": (unit_open, 0.05),
        "replicas": (int_at_least(1), 1000),
        "pitch_rule": (positive, 8.0),
    },
    "beta-star": {
        "shape": (shape_field, "circle"),
        "c": (_number, _REQUIRED),
        "W": (lambda f, v: _number(f, v, 4), 8.0),
        "eps_min": (unit_open, 0.05),
        "pitch": (positive, 1 / 256),
        "replicas": (int_at_least(100), 1000),
    },
    "small-c": {
        "shape": (shape_field, "circle"),
        "c_list": (number_list(positive), _REQUIRED),
        "eps_list": (number_list(unit_open, min_len=3), [0.02, 0.01, 0.005, 0.0025]),
        "replicas": (int_at_least(100), 10000),
        "grid": (choice("cartesian", "logpolar"), "logpolar"),
        "n_theta": (int_at_least(8), 128),
        "pitch_rule": (positive, 8.0),
    },
    "cle": {
        "c": (_number, _REQUIRED),
        "beta": (optional(_number), None),
    },
    "rw-area": {
        "n": (int_at_least(50), 200),
        "replicas": (int_at_least(1), 2000),
    },
}
COMMON = {"command", "seed", "threads", "out_dir"}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict
    seed: int
    threads: int
    out_dir: str | None
    raw: dict

    def echo(self) -> dict:
        # threads and out_dir do not affect results, so they stay out of the hash
        out = {k: v for k, v in self.raw.items() if k not in ("threads", "out_dir")}
        out.update(command=self.command, seed=self.seed)
        return out


def parse_config(raw: dict, command: str | None = None, seed_flag: int | None = None,
                 threads_flag: int | None = None, out_flag: str | None = None,
                 env: dict | None = None) -> RunConfig:
    """Validate a raw config mapping; every problem raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be a JSON object")
    cmd = command or raw.get("command")
    if cmd is None:
        raise ConfigError("command", "missing")
    if cmd not in COMMANDS:
        raise ConfigError("command", f"must be one of {list(COMMANDS)}, got {cmd!r}")
    if command and raw.get("command") not in (None, command):
        raise ConfigError("command", f"config says {raw['command']!r} but {command!r} was requested")
    spec = FIELDS[cmd]
    unknown = sorted(set(raw) - set(spec) - COMMON)
    if unknown:
        raise ConfigError(unknown[0], f"unknown field for command {cmd!r}")
    params = {}
    for name, (parse, default) in spec.items():
        if name in raw:
            params[name] = parse(name, raw[name])
        elif default is _REQUIRED:
            raise ConfigError(name, f"required by command {cmd!r}")
        else:
            params[name] = parse(name, default) if default is not None else None
    env = os.environ if env is None else env
    if seed_flag is not None:
        seed, src = seed_flag, "seed"
    elif env.get("SOUPFALL_SEED") not in (None, ""):
        try:
            seed, src = int(env["SOUPFALL_SEED"]), "SOUPFALL_SEED"
        except ValueError as exc:
            raise ConfigError("SOUPFALL_SEED", f"not an integer: {env['SOUPFALL_SEED']!r}") from exc
    else:
        seed, src = raw.get("seed", 0), "seed"
    seed = int(_number(src, seed, 0, integer=True))
    if seed >= 1 << 64:
        raise ConfigError(src, "must fit in 64 bits")
    threads = threads_flag if threads_flag is not None else raw.get("threads", 1)
    threads = int(_number("threads", threads, 1, integer=True))
    out = out_flag if out_flag is not None else raw.get("out_dir")
    if out is not None:
        text("out_dir", out)
    _cross_checks(cmd, params)
    return RunConfig(cmd, params, seed, threads, out, dict(raw))


def _cross_checks(cmd, p):
    if cmd == "sample":
        rho = p["rho_max"] if p["rho_max"] is not None else p["domain"].diameter()
        if p["eps_min"] >= rho:
            raise ConfigError("eps_min", f"must be below rho_max ({rho})")
        if p["rho_max"] is not None and p["rho_max"] > p["domain"].diameter():
            raise ConfigError("rho_max", "exceeds the domain diameter")
    if cmd == "remaining-dim" and p["eps_min"] >= p["rho_max"]:
        raise ConfigError("eps_min", "must be below rho_max")
    if cmd == "fit-alpha":
        if p["table"] is None and (p["c"] is None or p["eps_list"] is None):
            raise ConfigError("table", "give a table path or both c and eps_list")
    if cmd == "cle" and not 0 < p["c"] <= 1:
        raise ConfigError("c", f"must lie in (0, 1], got {p['c']}")
    if cmd == "beta-star":
        if p["c"] < 0:
            raise ConfigError("c", f"must be >= 0, got {p['c']}")
        if p["pitch"] >= p["eps_min"]:
            raise ConfigError("pitch", "must be finer than eps_min")


# -- hashing and output ------------------------------------------------------------------

def blob_sha1(data: bytes) -> str:
    """Content hash in the format git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Outputs:
    """Collects output files in memory; written by one writer at the end."""

    def __init__(self):
        self.files: dict[str, bytes] = {}

    def add(self, name: str, data):
        self.files[name] = data.encode("utf-8") if isinstance(data, str) else bytes(data)

    def csv(self, name, header, rows):
        self.add(name, csv_text(header, rows))

    def write(self, out_dir: Path, manifest: dict) -> dict:
        out_dir.mkdir(parents=True, exist_ok=True)
        listing = []
        for name in sorted(self.files):
            data = self.files[name]
            _write_atomic(out_dir / name, data)
            listing.append({"name": name, "bytes": len(data),
                            "sha256": hashlib.sha256(data).hexdigest()})
        manifest = dict(manifest, files=listing)
        _write_atomic(out_dir / "manifest.json", dumps(manifest).encode("utf-8"))
        return manifest


def _write_atomic(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# -- commands ------------------------------------------------------------------------------

def _cmd_sample(cfg, p, out):
    spec = SoupSpec(p["c"], p["shape"], p["domain"], p["eps_min"], p["rho_max"])
    soup = sample_soup(spec, cfg.seed, marks=p["marks"])
    out.add("soup.jsonl", "".join(line + "\n" for line in soup_lines(soup)))
    if p["pitch"] is not None:
        out.add("interiors.pgm", remaining_raster(soup, spec.eps_min, spec.domain, p["pitch"]).to_pgm())
    return {"count": len(soup), "expected_candidates": spec.expected_candidates(),
            "n_candidates": soup.n_candidates, "acceptance": soup.acceptance}


def _crossing_run(cfg, p, out):
    run = run_crossings(p["c"], p["shape"], p["eps_list"], p["replicas"], cfg.seed,
                        p["pitch_rule"], p["grid"], p["eps_min"], p["n_theta"], cfg.threads)
    out.csv("ptable.csv", PTable.HEADER, run.table.rows())
    out.csv("trials.csv", run.TRIAL_HEADER, run.trial_rows())
    return run.table


def _cmd_carpet_prob(cfg, p, out):
    table = _crossing_run(cfg, p, out)
    return {"eps": table.eps, "p_hat": table.p_hat, "ci_lo": table.ci_lo, "ci_hi": table.ci_hi}


def read_ptable(path) -> PTable:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise InvalidSpecError(f"table {path} is empty")
    head = lines[0].split(",")
    try:
        ie, it, isx = head.index("eps"), head.index("trials"), head.index("successes")
        rows = [ln.split(",") for ln in lines[1:]]
        return PTable(np.array([float(r[ie]) for r in rows]),
                      np.array([int(r[it]) for r in rows]),
                      np.array([int(r[isx]) for r in rows]))
    except (ValueError, IndexError) as exc:
        raise InvalidSpecError(f"table {path}: {exc}") from exc


def _cmd_fit_alpha(cfg, p, out):
    if p["table"] is not None:
        try:
            table = read_ptable(p["table"])
        except OSError as exc:
            raise ConfigError("table", str(exc)) from exc
        out.csv("ptable.csv", PTable.HEADER, table.rows())
    else:
        table = _crossing_run(cfg, p, out)
    rep = fit_alpha(table)
    d = rep.as_dict()
    out.csv("fit.csv", tuple(d), [tuple(d.values())])
    return d


def _cmd_remaining_dim(cfg, p, out):
    window = p["domain"]
    if not isinstance(window, Rect):
        raise ConfigError("domain", "remaining-dim needs a rect window")
    rep, scales, counts = remaining_set_dimension(
        p["c"], p["shape"], p["eps_min"], p["rho_max"], window, p["pitch"], p["factors"],
        p["replicas"], cfg.seed, cfg.threads)
    frac = remaining_fraction(p["c"], p["shape"], p["eps_min"], p["rho_max"], window, p["pitch"],
                              p["replicas"], cfg.seed, cfg.threads)
    out.csv("boxcounts.csv", ("factor", "scale", "mean_count"),
            zip(p["factors"], scales.tolist(), counts.tolist()))
    x0, y0, x1, y1 = window.bbox()
    r = p["rho_max"]
    soup = sample_soup(SoupSpec(p["c"], p["shape"], Rect(x0 - r, y0 - r, x1 + r, y1 + r),
                                p["eps_min"], r), cfg.seed, 0)
    out.add("remaining.pgm", remaining_raster(soup, p["eps_min"], window, p["pitch"]).to_pgm())
    res = rep.as_dict()
    res.update(fraction=frac.fraction, fraction_stderr=frac.stderr,
               fraction_expected=frac.expected, samples=frac.samples)
    return res


def _cmd_phase_scan(cfg, p, out):
    ps = phase_scan(p["shape"], p["c_grid"], p["eps_fixed"], p["replicas"], cfg.seed,
                    p["pitch_rule"], cfg.threads)
    out.csv("phase.csv", ps.HEADER, ps.rows())
    return {"bracket": list(ps.bracket) if ps.bracket else None, "p_hat": ps.p_hat}


def _cmd_beta_star(cfg, p, out):
    rep = beta_star_run(p["c"], p["shape"], p["W"], p["eps_min"], p["pitch"], p["replicas"],
                        cfg.seed, cfg.threads)
    out.csv("gamma_star.csv", ("sample", "filled_area", "diameter"),
            zip(range(len(rep.areas)), rep.areas.tolist(), rep.diameters.tolist()))
    tail = rep.tail()
    out.csv("tail.csv", ("x", "survival", "exceed"),
            zip(tail.x.tolist(), tail.survival.tolist(), tail.exceed.tolist()))
    return {"beta_star": rep.estimate.mean, "half_width": rep.estimate.half_width,
            "n": rep.estimate.n, "truncated": rep.truncated,
            "truncation_rate": rep.truncation_rate, "tail_slope": tail.slope,
            "tail_upper_bound": tail.upper_bound}


def _cmd_small_c(cfg, p, out):
    rows, tables = small_c_report(p["shape"], p["c_list"], p["eps_list"], p["replicas"],
                                  cfg.seed, p["grid"], p["n_theta"], p["pitch_rule"], cfg.threads)
    out.csv("small_c.csv", SmallCRow.HEADER, [r.row() for r in rows])
    out.csv("ptables.csv", ("c",) + PTable.HEADER,
            [(r.c,) + row for r, t in zip(rows, tables) for row in t.rows()])
    return {"rows": [dict(zip(SmallCRow.HEADER, r.row())) for r in rows]}


def _cmd_cle(cfg, p, out):
    vals = cle_values(p["c"], p["beta"]).as_dict()
    sys.stdout.write(json.dumps(vals) + "\n")
    return vals


def _cmd_rw_area(cfg, p, out):
    rep = rw_area_check(p["n"], p["replicas"], cfg.seed)
    d = dataclasses.asdict(rep)
    out.csv("rw_area.csv", tuple(d), [tuple(d.values())])
    return d


DISPATCH = {
    "sample": _cmd_sample, "carpet-prob": _cmd_carpet_prob, "fit-alpha": _cmd_fit_alpha,
    "remaining-dim": _cmd_remaining_dim, "phase-scan": _cmd_phase_scan,
    "beta-star": _cmd_beta_star, "small-c": _cmd_small_c, "cle": _cmd_cle,
    "rw-area": _cmd_rw_area,
}


def run(cfg: RunConfig) -> dict | None:
    """Execute a validated config; returns the manifest (None if nothing was written)."""
    t0 = time.perf_counter()
    out = Outputs()
    results = DISPATCH[cfg.command](cfg, cfg.params, out)
    echo = cfg.echo()
    inputs = dumps(echo).encode("utf-8")
    if cfg.command == "fit-alpha" and cfg.params["table"] is not None:
        inputs += Path(cfg.params["table"]).read_bytes()
    summary = {"command": cfg.command, "config": echo, "seed": cfg.seed,
               "input_hash": blob_sha1(inputs), "version": __version__, "results": results}
    if cfg.out_dir is None:
        return None
    out.add("summary.json", dumps(summary))
    manifest = {"config": echo, "version": __version__,
                "wall_time_s": round(time.perf_counter() - t0, 3)}
    return out.write(Path(cfg.out_dir), manifest)


def _parse_override(s: str):
    if "=" not in s:
        raise ConfigError(s, "override must look like key=value")
    k, v = s.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="soupfall", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--seed", type=int, help="master seed (overrides SOUPFALL_SEED and the file)")
    ap.add_argument("--threads", type=int, help="worker processes")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-p", "--param", action="append", default=[], metavar="KEY=VALUE",
                    help="set one config field (value parsed as JSON when possible)")
    ap.add_argument("--version", action="version", version=f"soupfall {__version__}")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            try:
                raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError("config", str(exc)) from exc
            if not isinstance(raw, dict):
                raise ConfigError("config", "must be a JSON object")
        for item in args.param:
            k, v = _parse_override(item)
            raw[k] = v
        out = args.out
        if out is None and args.command != "cle" and "out_dir" not in raw:
            out = f"soupfall-{args.command}"
        cfg = parse_config(raw, args.command, args.seed, args.threads, out)
    except ConfigError as exc:
        print(f"soupfall: config error: {exc}", file=sys.stderr)
        return 2
    try:
        run(cfg)
    except ConfigError as exc:
        print(f"soupfall: config error: {exc}", file=sys.stderr)
        return 2
    except (InvalidSpecError, GeometryError, ResolutionError, DomainError) as exc:
        # library precondition failures that the config checks did not catch
        print(f"soupfall: config error: {exc}", file=sys.stderr)
        return 2
    except SoupfallError as exc:
        print(f"soupfall: error: {exc}", file=sys.stderr)
        return 1
    return 0


__all__ = ["ConfigError", "RunConfig", "blob_sha1", "load_soup", "main", "parse_config",
           "read_ptable", "run", "save_soup"]

if __name__ == "__main__":
    sys.exit(main())
