"""Command-line front end: ``verify``, ``curvature``, ``reduce``, ``scan`` and ``catalog``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors.  Reports are deterministic functions of the
configuration and seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import catalog as C
from . import verification as V
from .expr import ExprError
from .flatness import format_float, reports_to_csv
from .kk import oracle_pairs
from .sampling import SamplingError, sample_box
from .tensors import curvature_at
from .kk import assemble, lift_point

SCHEMA = "kkflat.report"
SCHEMA_VERSION = 1
COMMANDS = ("verify", "curvature", "reduce", "scan", "catalog")
BACKENDS = {"jets": "jets", "fd": "fd", "finite-diff": "fd"}
FORMATS = ("json", "csv")
MAX_SCAN_CELLS = 10_000
RANDOM_FAMILY = "random"
CONFIG_KEYS = ("command", "solution", "points", "seed", "tol", "backend", "out", "format", "jobs")
DEFAULT_POINTS = 15
DEFAULT_SCAN_POINTS = 5

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """One run of the tool.  ``params`` holds raw strings or numbers."""

    command: str
    solution: str | None = None
    params: dict[str, object] = field(default_factory=dict)
    points: int | None = None
    seed: int = 0
    tol: float | None = None
    backend: str = "jets"
    out: str | None = None
    format: str | None = None
    jobs: int = 1

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.tol is not None and not (isinstance(self.tol, (int, float)) and self.tol > 0 and math.isfinite(self.tol)):
            raise ConfigError(f"tolerance must be a positive number, got {self.tol!r}")
        if self.points is not None and (not isinstance(self.points, int) or self.points < 1):
            raise ConfigError(f"points must be a positive integer, got {self.points!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {sorted(BACKENDS)}, got {self.backend!r}")
        if self.format is not None and self.format not in FORMATS:
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {self.jobs!r}")
        if self.command == "catalog":
            return self
        if self.solution is None:
            raise ConfigError(f"command {self.command} needs --solution")
        if self.solution == RANDOM_FAMILY:
            if self.command != "reduce":
                raise ConfigError("the random background is available for reduce only")
            n = self.params.get("n", 4)
            try:
                n = int(float(n))
            except (TypeError, ValueError):
                raise ConfigError(f"n must be an integer, got {n!r}") from None
            extra = set(self.params) - {"n"}
            if extra or not 3 <= n <= 6:
                raise ConfigError("random background takes only n with 3 <= n <= 6")
            return self
        if self.solution not in C.SPECS:
            raise ConfigError(f"unknown solution family {self.solution!r}; choose from {', '.join(C.FAMILIES)}")
        if self.command == "scan":
            grid = scan_grid(self.params)
            if len(grid[1]) > MAX_SCAN_CELLS:
                raise ConfigError(f"scan grid has {len(grid[1])} cells, the limit is {MAX_SCAN_CELLS}")
            for cell in grid[1][:1]:
                C.family_params(self.solution, dict(zip(grid[0], cell)))
        else:
            C.family_params(self.solution, self.numeric_params())
        return self

    @property
    def backend_name(self) -> str:
        return BACKENDS[self.backend]

    @property
    def output_format(self) -> str:
        if self.format:
            return self.format
        return "csv" if self.command == "scan" else "json"

    def point_count(self) -> int:
        if self.points is not None:
            return self.points
        return DEFAULT_SCAN_POINTS if self.command == "scan" else DEFAULT_POINTS

    def numeric_params(self) -> dict[str, object]:
        out = {}
        for k, v in self.params.items():
            out[k] = v if k == "model" else _number(k, v)
        return out

    def to_dict(self) -> dict:
        """Flat key-value form; parameters sit next to the run keys."""
        out: dict[str, object] = {"command": self.command}
        for key in CONFIG_KEYS[1:]:
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        for k, v in self.params.items():
            out[k] = v
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, object], command: str | None = None) -> "RunConfig":
        data = dict(data)
        cmd = command or data.pop("command", None)
        data.pop("command", None)
        if cmd is None:
            raise ConfigError("configuration has no command")
        kwargs = {k: data.pop(k) for k in CONFIG_KEYS[1:] if k in data}
        return cls(command=str(cmd), params=data, **kwargs)


def _number(name: str, value) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"parameter {name} must be numeric, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(str(value))
    except ValueError:
        raise ConfigError(f"parameter {name} must be numeric, got {value!r}") from None


def parse_grid(name: str, value) -> list[float]:
    """``lo:hi:count`` (inclusive, evenly spaced) or a single number."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [float(value)]
    text = str(value)
    if ":" not in text:
        return [_number(name, text)]
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid for {name} must read lo:hi:count, got {text!r}")
    lo, hi = _number(name, parts[0]), _number(name, parts[1])
    try:
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"grid count for {name} must be an integer, got {parts[2]!r}") from None
    if count < 1:
        raise ConfigError(f"grid count for {name} must be at least 1")
    if count > MAX_SCAN_CELLS:
        raise ConfigError(f"grid for {name} has {count} values, the limit is {MAX_SCAN_CELLS}")
    if count == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, count)]


def scan_grid(params: Mapping[str, object]) -> tuple[list[str], list[tuple]]:
    """Parameter names and the cells in row-major order (first name slowest)."""
    names = [k for k in params if k != "model"]
    axes = [parse_grid(k, params[k]) for k in names]
    total = math.prod(len(a) for a in axes) if axes else 1
    if total > MAX_SCAN_CELLS:
        raise ConfigError(f"scan grid has {total} cells, the limit is {MAX_SCAN_CELLS}")
    return names, list(itertools.product(*axes))


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _csv_text(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(x) for x in row])
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _document(config: RunConfig, passed: bool, body: dict) -> str:
    doc = {"schema": SCHEMA, "schema_version": SCHEMA_VERSION, "command": config.command,
           "config": config.to_dict(), "passed": passed}
    doc.update(body)
    return json.dumps(_json_safe(doc), indent=2, sort_keys=True) + "\n"


def _emit(config: RunConfig, text: str, stdout) -> None:
    if config.out:
        with open(config.out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_verify(config: RunConfig, stdout=sys.stdout) -> int:
    inst = C.instantiate(config.solution, config.numeric_params())
    reports = V.verify_instance(inst, config.point_count(), config.seed, config.tol, config.backend_name)
    passed = V.all_passed(reports)
    if config.output_format == "csv":
        text = reports_to_csv(reports)
    else:
        entries = []
        for r in reports:
            d = r.to_dict()
            d["reference"] = r.description
            entries.append(d)
        text = _document(config, passed, {"family": inst.family, "params": dict(inst.params), "reports": entries})
    _emit(config, text, stdout)
    return EXIT_OK if passed else EXIT_FAIL


CURVATURE_COLUMNS = ("point", "coords", "ricci_scalar", "closed_form", "abs_diff", "lift_ricci_scalar",
                     "lift_weyl_max_abs", "kretschmann")


def curvature_rows(inst: C.SolutionInstance, count: int, seed: int, backend: str) -> list[dict]:
    rows = []
    for i, p in enumerate(inst.sample(count, seed)):
        b = curvature_at(inst.base, p, backend)
        try:
            ref = inst.closed_form_ricci(p)
        except C.CatalogError:
            ref = math.nan
        row = {"point": i, "coords": [float(x) for x in p], "ricci_scalar": b.ricci_scalar, "closed_form": ref,
               "abs_diff": abs(b.ricci_scalar - ref), "lift_ricci_scalar": math.nan, "lift_weyl_max_abs": math.nan,
               "kretschmann": float(np.einsum("klmn,klmn->", b.riemann_down, b.riemann_up))}
        if inst.lift is not None:
            bl = curvature_at(assemble(inst.lift), lift_point(p, inst.lift.n), backend)
            row["lift_ricci_scalar"] = bl.ricci_scalar
            row["lift_weyl_max_abs"] = float(np.max(np.abs(bl.weyl)))
        rows.append(row)
    return rows


def cmd_curvature(config: RunConfig, stdout=sys.stdout) -> int:
    inst = C.instantiate(config.solution, config.numeric_params())
    rows = curvature_rows(inst, config.point_count(), config.seed, config.backend_name)
    tol = V.CLOSED_FORM_TOL if config.tol is None else config.tol
    passed = all(not (r["abs_diff"] > tol * (1 + abs(r["closed_form"]))) for r in rows)
    if config.output_format == "csv":
        text = _csv_text(CURVATURE_COLUMNS, [
            [r["point"], " ".join(format_float(x) for x in r["coords"])] + [r[k] for k in CURVATURE_COLUMNS[2:]]
            for r in rows])
    else:
        text = _document(config, passed, {"family": inst.family, "coords": list(inst.base.coords),
                                          "tolerance": tol, "rows": rows})
    _emit(config, text, stdout)
    return EXIT_OK if passed else EXIT_FAIL


def _reduce_target(config: RunConfig):
    if config.solution == RANDOM_FAMILY:
        n = int(float(config.params.get("n", 4)))
        kk = C.random_background(n - 1, config.seed)
        pts = sample_box([(-0.5, 0.5)] * (n - 1), config.point_count(), config.seed)
        return kk, pts
    inst = C.instantiate(config.solution, config.numeric_params())
    if inst.lift is None:
        raise ConfigError(f"family {config.solution} has no Kaluza-Klein lift to reduce")
    return inst.lift, inst.sample(config.point_count(), config.seed)


def cmd_reduce(config: RunConfig, stdout=sys.stdout) -> int:
    kk, pts = _reduce_target(config)
    tol = 1e-8 if config.tol is None else config.tol
    dumps = []
    csv_rows = []
    passed = True
    for i, p in enumerate(pts):
        blocks = {}
        for name, (red, direct) in oracle_pairs(kk, p, config.backend_name).items():
            delta = float(np.max(np.abs(red - direct))) if red.size else 0.0
            scale = float(np.max(np.abs(direct))) if direct.size else 0.0
            rel = delta / (1 + scale)
            passed &= rel <= tol
            blocks[name] = {"reduced": red, "max_abs_delta": delta, "max_rel_delta": rel}
            for idx in np.ndindex(red.shape):
                csv_rows.append([i, name, "_".join(map(str, idx)), red[idx], direct[idx], red[idx] - direct[idx]])
        dumps.append({"point": [float(x) for x in p], "blocks": blocks})
    if config.output_format == "csv":
        text = _csv_text(("point", "block", "index", "reduced", "direct", "delta"), csv_rows)
    else:
        text = _document(config, bool(passed), {"n": kk.n, "coords": list(kk.base.coords), "tolerance": tol,
                                                "points": dumps})
    _emit(config, text, stdout)
    return EXIT_OK if passed else EXIT_FAIL


def _scan_cell(args):
    family, params, count, seed, tol, backend = args
    inst = C.instantiate(family, params)
    horizons = V.scan_horizons(inst)
    const = V.scan_constant(inst, count, seed)
    reports = V.verify_instance(inst, count, seed, tol, backend)
    return horizons, const, V.all_passed(reports)


def cmd_scan(config: RunConfig, stdout=sys.stdout) -> int:
    names, cells = scan_grid(config.params)
    fixed = {"model": config.params["model"]} if "model" in config.params else {}
    jobs = [(config.solution, dict(fixed, **dict(zip(names, cell))), config.point_count(), config.seed,
             config.tol, config.backend_name) for cell in cells]
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_scan_cell, jobs, chunksize=max(1, len(jobs) // (4 * config.jobs))))
    else:
        results = [_scan_cell(j) for j in jobs]
    header = ["cell"] + names + ["horizon_count", "horizon_locations", "curvature_constant", "verify_pass"]
    rows = []
    for i, (cell, (hz, const, ok)) in enumerate(zip(cells, results)):
        rows.append([i, *cell, len(hz), ";".join(format_float(x) for x in hz), const, ok])
    passed = all(r[-1] for r in rows)
    if config.output_format == "csv":
        text = _csv_text(header, rows)
    else:
        text = _document(config, passed, {"columns": header, "rows": rows})
    _emit(config, text, stdout)
    return EXIT_OK if passed else EXIT_FAIL


def cmd_catalog(config: RunConfig | None = None, stdout=sys.stdout) -> int:
    config = config or RunConfig("catalog")
    listing = C.catalog_listing()
    for entry in listing:
        entry["config"] = RunConfig("verify", entry["family"], params=dict(entry["defaults"])).to_dict()
    if config.output_format == "csv":
        rows = [[e["family"], " ".join(e["coords"]), json.dumps(e["defaults"], sort_keys=True), e["gauge"],
                 e["killing_vector"], e["description"]] for e in listing]
        text = _csv_text(("family", "coords", "defaults", "gauge", "killing_vector", "description"), rows)
    else:
        text = _document(config, True, {"families": listing})
    _emit(config, text, stdout)
    return EXIT_OK


HANDLERS = {"verify": cmd_verify, "curvature": cmd_curvature, "reduce": cmd_reduce,
            "scan": cmd_scan, "catalog": cmd_catalog}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kkflat", description="Conformal flatness of Kaluza-Klein reductions")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--solution", help="catalog family name (or 'random' for reduce)")
    p.add_argument("--param", action="append", default=[], metavar="K=V",
                   help="family parameter; scan accepts lo:hi:count grids")
    p.add_argument("--points", type=int, help="number of sample points")
    p.add_argument("--seed", type=int, help="seed of the splitmix64 point sequence")
    p.add_argument("--tol", type=float, help="tolerance applied to every check")
    p.add_argument("--backend", help="derivative backend: jets or fd")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", help="json or csv")
    p.add_argument("--jobs", type=int, help="worker processes for scan")
    p.add_argument("--config", help="flat JSON document with run keys and parameters")
    return p


def config_from_args(argv: Sequence[str]) -> RunConfig:
    args = build_parser().parse_args(list(argv))
    data: dict[str, object] = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict) or any(isinstance(v, (dict, list)) for v in loaded.values()):
            raise ConfigError("config must be a flat JSON object")
        data.update(loaded)
    data.pop("command", None)
    for key in ("solution", "points", "seed", "tol", "backend", "out", "format", "jobs"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects K=V, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if not k or k in CONFIG_KEYS:
            raise ConfigError(f"invalid parameter name {k!r}")
        data[k] = v.strip()
    return RunConfig.from_dict(data, command=args.command)


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        config = config_from_args(sys.argv[1:] if argv is None else argv).validate()
    except (ConfigError, C.CatalogError, ExprError) as exc:
        stderr.write(f"kkflat: error: {exc}\n")
        return EXIT_USAGE
    try:
        return HANDLERS[config.command](config, stdout=stdout)
    except (ConfigError, C.CatalogError, SamplingError) as exc:
        stderr.write(f"kkflat: error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, ValueError) as exc:
        stderr.write(f"kkflat: evaluation failed: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
