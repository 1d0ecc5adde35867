"""Command-line entry point: ``porobound validate|stats|bounds``.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BC_FAMILIES,
    BOTH,
    effective_biot,
    lower_bound,
    ordering_check,
    saddle_gap,
    reuss_estimate,
    upper_bound,
    voigt_estimate,
)
from .core import MaterialError, NumericalError, validate_material
from .fem import DISPLACEMENT_PRESSURE, TRACTION_FLUID_CONTENT
from .microstructure import (
    Microstructure,
    RVEFormatError,
    homogeneity_score,
    parse_document,
    two_point_probability,
    volume_fractions,
)
from .report import SCHEMA, dumps, file_digest, matrix_entry

log = logging.getLogger("porobound")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

DEFAULT_SHIFTS = ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1))


@dataclass
class RunConfig:
    input_path: str
    command: str
    bc_family: str = BOTH
    solver_tol: float = 1e-10
    max_iter_factor: float = 50.0
    shifts: tuple = DEFAULT_SHIFTS
    subdivisions: int = 2
    output_path: str | None = None
    timings: bool = False

    def check(self):
        if not self.input_path:
            raise ValueError("input path must be non-empty")
        if self.output_path is not None and not self.output_path:
            raise ValueError("output path must be non-empty")
        if not (np.isfinite(self.solver_tol) and self.solver_tol > 0):
            raise ValueError(f"--tol must be positive, got {self.solver_tol}")
        if not self.max_iter_factor > 0:
            raise ValueError(f"--max-iter-factor must be positive, got {self.max_iter_factor}")
        if self.bc_family not in BC_FAMILIES:
            raise ValueError(f"--bc must be one of {BC_FAMILIES}")

    def as_dict(self):
        # the destination is not part of the computation; leaving it out keeps
        # reports identical no matter where they are written
        d = asdict(self)
        del d["output_path"]
        d["shifts"] = [list(s) for s in self.shifts]
        return d


class InputError(ValueError):
    pass


def parse_shifts(text: str):
    shifts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"shift {chunk!r} needs three comma-separated integers")
        try:
            shifts.append(tuple(int(p) for p in parts))
        except ValueError:
            raise argparse.ArgumentTypeError(f"shift {chunk!r} is not integer") from None
    if not shifts:
        raise argparse.ArgumentTypeError("no shifts given")
    return tuple(shifts)


def _read_input(path: str):
    """Return (document, digest, base_dir); raises InputError."""
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"parse error in {path}: {exc}") from None
    digest_input = raw
    if isinstance(doc, dict) and isinstance(doc.get("voxels"), str):
        payload = p.parent / doc["voxels"]
        if payload.is_file():
            digest_input = raw + payload.read_bytes()
    return doc, file_digest(digest_input), p.parent


def _base_report(config: RunConfig, digest):
    return {
        "schema": SCHEMA,
        "version": __version__,
        "command": config.command,
        "config": config.as_dict(),
        "input_sha256": digest,
        "status": "ok",
        "error": None,
    }


def _load(doc, base_dir) -> Microstructure:
    try:
        _, spacing, ids, materials = parse_document(doc, base_dir)
        return Microstructure(ids, tuple(materials), spacing)
    except (RVEFormatError, MaterialError) as exc:
        raise InputError(str(exc)) from None


def _cmd_validate(config, doc, base_dir, report):
    try:
        dims, spacing, ids, materials = parse_document(doc, base_dir)
    except RVEFormatError as exc:
        raise InputError(str(exc)) from None
    phases = []
    failures = []
    for n, mat in enumerate(materials):
        rep = validate_material(mat)
        phases.append(rep.as_dict())
        failures += [f"phase {n}: {f}" for f in rep.failures]
    if not all(h > 0 for h in spacing):
        failures.append(f"spacing must be positive, got {list(spacing)}")
    report["dims"] = list(dims)
    report["phases"] = phases
    report["failures"] = failures
    report["valid"] = not failures
    if failures:
        report["status"] = "input-error"
        report["error"] = "; ".join(failures)
        return EXIT_INPUT
    report["volume_fractions"] = np.bincount(ids.ravel(), minlength=len(materials)) / ids.size
    return EXIT_OK


def _homogeneity(m, config):
    try:
        return homogeneity_score(m, config.subdivisions, config.shifts).as_dict()
    except ValueError as exc:
        return {"score": None, "reason": str(exc)}


def _cmd_stats(config, doc, base_dir, report):
    m = _load(doc, base_dir)
    report["dims"] = list(m.dims)
    report["volume_fractions"] = volume_fractions(m)
    report["two_point"] = [two_point_probability(m, r).as_dict() for r in config.shifts]
    try:
        report["homogeneity"] = homogeneity_score(m, config.subdivisions, config.shifts).as_dict()
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return EXIT_OK


def _cmd_bounds(config, doc, base_dir, report):
    m = _load(doc, base_dir)
    timings = {}
    report.update({
        "dims": list(m.dims),
        "volume_fractions": volume_fractions(m),
        "homogeneity": _homogeneity(m, config),
        "a_upper": None, "a_lower": None, "a_voigt": None, "a_reuss": None,
        "compliance_lower": None,
        "effective_biot": {"upper": None, "lower": None},
        "cases": [],
        "ordering": {},
        "saddle_ordering": {},
        "timings": None,
    })
    t0 = time.perf_counter()
    voigt = voigt_estimate(m)
    report["a_voigt"] = matrix_entry(voigt)
    mats = {"voigt": voigt}
    if config.bc_family in (TRACTION_FLUID_CONTENT, BOTH):
        reuss = reuss_estimate(m)
        report["a_reuss"] = matrix_entry(reuss)
        mats["reuss"] = reuss
    timings["estimates"] = time.perf_counter() - t0

    code = EXIT_OK
    try:
        if config.bc_family in (DISPLACEMENT_PRESSURE, BOTH):
            t0 = time.perf_counter()
            upper, diag = upper_bound(m, config.solver_tol, config.max_iter_factor)
            timings["upper"] = time.perf_counter() - t0
            mats["upper"] = upper
            report["a_upper"] = matrix_entry(upper)
            alpha, mismatch = effective_biot(upper)
            report["effective_biot"]["upper"] = {"alpha": alpha, "coupling_mismatch": mismatch}
            report["cases"] += [d.as_dict() for d in diag]
        if config.bc_family in (TRACTION_FLUID_CONTENT, BOTH):
            t0 = time.perf_counter()
            lower, compliance, diag = lower_bound(m, config.solver_tol, config.max_iter_factor)
            timings["lower"] = time.perf_counter() - t0
            mats["lower"] = lower
            report["a_lower"] = matrix_entry(lower)
            report["compliance_lower"] = matrix_entry(compliance)
            alpha, mismatch = effective_biot(lower)
            report["effective_biot"]["lower"] = {"alpha": alpha, "coupling_mismatch": mismatch}
            report["cases"] += [d.as_dict() for d in diag]
    except NumericalError as exc:
        report["status"] = "numerical-failure"
        report["error"] = str(exc)
        history = getattr(exc, "residual_history", None)
        if history:
            report["residual_history"] = history
        code = EXIT_NUMERICAL

    pairs = (("voigt_vs_upper", "voigt", "upper"), ("upper_vs_lower", "upper", "lower"),
             ("lower_vs_reuss", "lower", "reuss"), ("voigt_vs_reuss", "voigt", "reuss"))
    for name, hi, lo in pairs:
        if hi in mats and lo in mats:
            report["ordering"][name] = ordering_check(mats[hi], mats[lo]).as_dict()
    report["saddle_ordering"] = {}
    if "upper" in mats:
        report["saddle_ordering"]["voigt_vs_upper"] = saddle_gap(mats["voigt"], mats["upper"])
    if "lower" in mats and "reuss" in mats:
        report["saddle_ordering"]["lower_vs_reuss"] = saddle_gap(mats["lower"], mats["reuss"], compliance=True)
    if "upper" in mats and "lower" in mats:
        rel = np.linalg.norm(mats["upper"] - mats["lower"]) / np.linalg.norm(mats["upper"])
        report["relative_bound_gap"] = float(rel)
    if config.timings:
        report["timings"] = timings
    return code


_COMMANDS = {"validate": _cmd_validate, "stats": _cmd_stats, "bounds": _cmd_bounds}


def run(config: RunConfig):
    """Execute one command; returns ``(exit code, report dict)``."""
    report = _base_report(config, None)
    try:
        config.check()
        doc, digest, base_dir = _read_input(config.input_path)
        report["input_sha256"] = digest
        code = _COMMANDS[config.command](config, doc, base_dir, report)
    except (InputError, ValueError) as exc:
        report["status"] = "input-error"
        report["error"] = str(exc)
        code = EXIT_INPUT
    except NumericalError as exc:
        report["status"] = "numerical-failure"
        report["error"] = str(exc)
        code = EXIT_NUMERICAL
    return code, report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="porobound", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an RVE file and its phase materials")
    p.add_argument("rve")
    p.add_argument("--out")

    p = sub.add_parser("stats", help="two-point statistics and homogeneity score")
    p.add_argument("rve")
    p.add_argument("--shifts", type=parse_shifts, default=DEFAULT_SHIFTS,
                   help='voxel shifts as "x,y,z;x,y,z"')
    p.add_argument("--subdiv", type=int, default=2)
    p.add_argument("--out")

    p = sub.add_parser("bounds", help="upper/lower bounds on the effective moduli")
    p.add_argument("rve")
    p.add_argument("--bc", choices=BC_FAMILIES, default=BOTH)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter-factor", type=float, default=50.0)
    p.add_argument("--shifts", type=parse_shifts, default=DEFAULT_SHIFTS)
    p.add_argument("--subdiv", type=int, default=2)
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings (makes the report non-reproducible)")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = RunConfig(
        input_path=args.rve,
        command=args.command,
        bc_family=getattr(args, "bc", BOTH),
        solver_tol=getattr(args, "tol", 1e-10),
        max_iter_factor=getattr(args, "max_iter_factor", 50.0),
        shifts=getattr(args, "shifts", DEFAULT_SHIFTS),
        subdivisions=getattr(args, "subdiv", 2),
        output_path=args.out,
        timings=getattr(args, "timings", False),
    )
    code, report = run(config)
    text = dumps(report)
    if report["error"]:
        print(f"porobound {config.command}: {report['error']}", file=sys.stderr)
    if config.output_path:
        Path(config.output_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
