"""Command-line front end.

Exit codes: 0 success, 1 validation or verification failure, 2 solver
failure, 3 exhausted perturbation budget.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from billiard_security import __version__
from billiard_security.core.config import settings
from billiard_security.core.exceptions import BilliardError, DomainError, InvalidTableError, WitnessError
from billiard_security.core.logging import configure_logging
from billiard_security.schemas.table import TableDocument, TableResponse, TableSpec, ValidationReportDocument
from billiard_security.schemas.witness import WitnessBundleDocument
from billiard_security.services.curve import Table, require_valid, validate

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """Validated invocation: global options plus the command's own parameters"""
    model_config = ConfigDict(extra="forbid")

    command: Literal["table", "trace", "path", "conjugate", "witness", "verify", "plot"]
    seed: int = 0
    gp_tol: Optional[float] = Field(None, gt=0)
    residual_tol: Optional[float] = Field(None, gt=0)
    output: Optional[str] = None
    format: Literal["json", "svg"] = "json"
    log_level: str = "WARNING"
    options: Dict[str, Any] = {}

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        values = vars(args).copy()
        fields = {name: values.pop(name) for name in ("command", "seed", "gp_tol", "residual_tol",
                                                      "output", "format", "log_level")}
        return cls(**fields, options=values)

    def apply(self):
        """Install tolerance overrides as absolute values"""
        if self.gp_tol is not None or self.residual_tol is not None:
            settings.TOLERANCE_PROFILE = "default"
        if self.gp_tol is not None:
            settings.GP_TOLERANCE = self.gp_tol
        if self.residual_tol is not None:
            settings.CERTIFICATE_RESIDUAL = self.residual_tol


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Seed for every random choice (default: 0)")
    common.add_argument("--gp-tol", type=float, default=None, dest="gp_tol", help="General-position tolerance")
    common.add_argument("--residual-tol", type=float, default=None, dest="residual_tol",
                        help="Certification residual tolerance")
    common.add_argument("--output", "-o", default=None, help="Write the result here instead of stdout")
    common.add_argument("--format", choices=["json", "svg"], default="json")
    common.add_argument("--log-level", default="WARNING", dest="log_level", help="Logging level for stderr")
    return common


def _table_parser() -> argparse.ArgumentParser:
    table = argparse.ArgumentParser(add_help=False)
    table.add_argument("--preset", choices=["circle", "ellipse"], default="circle")
    table.add_argument("--radius", type=float, default=1.0)
    table.add_argument("--a", type=float, default=2.0)
    table.add_argument("--b", type=float, default=1.0)
    table.add_argument("--file", default=None, help="Table document (JSON) instead of a preset")
    table.add_argument("--noise", type=float, default=0.0, help="Seeded Fourier noise amplitude")
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="billiard-security",
                                     description="Billiard paths, conjugacy and insecurity witnesses")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, table = _common_parser(), _table_parser()

    sub.add_parser("table", parents=[common, table], help="Build and validate a table")

    p = sub.add_parser("trace", parents=[common, table], help="Follow a ray through reflections")
    p.add_argument("--point", type=float, nargs=2, required=True)
    p.add_argument("--angle", type=float, required=True)
    p.add_argument("--bounces", type=int, default=1)

    p = sub.add_parser("path", parents=[common, table], help="Solve for billiard paths from x to y")
    p.add_argument("--x", type=float, nargs=2, required=True)
    p.add_argument("--y", type=float, nargs=2, required=True)
    p.add_argument("--m", type=int, default=1, help="Bounce count (maximum for enumerate)")
    p.add_argument("--method", choices=["variational", "shooting", "enumerate"], default="variational")
    p.add_argument("--theta0", type=float, default=None, help="Initial angle for shooting")
    p.add_argument("--starts", type=int, default=None)

    p = sub.add_parser("conjugate", parents=[common, table], help="Conjugacy of x and y along a path")
    p.add_argument("--x", type=float, nargs=2, required=True)
    p.add_argument("--y", type=float, nargs=2, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--bounces", type=int, default=None)
    group.add_argument("--vertices", type=float, nargs="+", default=None)
    p.add_argument("--chain", action="store_true", help="Include the per-bounce focusing chain")

    p = sub.add_parser("witness", parents=[common, table], help="Construct an insecurity witness bundle")
    p.add_argument("--x", type=float, nargs=2, required=True)
    p.add_argument("--y", type=float, nargs=2, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps-budget", type=float, default=None, dest="eps_budget")

    p = sub.add_parser("verify", parents=[common], help="Re-check a witness bundle file")
    p.add_argument("bundle")

    p = sub.add_parser("plot", parents=[common], help="Render a witness bundle as SVG")
    p.add_argument("bundle")
    p.add_argument("--chain", action="store_true", help="Annotate focusing distances")
    return parser


def load_table(options: Dict[str, Any], rng: np.random.Generator) -> Table:
    if options.get("file"):
        data = json.loads(Path(options["file"]).read_text())
        if "fourier_x" not in data:
            data = data["table"]
        document = TableDocument.model_validate(data)
        spec = TableSpec(table=document, noise=options["noise"])
    else:
        spec = TableSpec(preset=options["preset"], radius=options["radius"], a=options["a"], b=options["b"],
                         noise=options["noise"])
    return spec.build(rng)


def load_bundle(path: str) -> WitnessBundleDocument:
    return WitnessBundleDocument.model_validate_json(Path(path).read_text())


def emit(config: RunConfig, text: str):
    if config.output:
        Path(config.output).write_text(text)
        logger.info(f"Wrote {config.output}")
    else:
        sys.stdout.write(text)


def emit_model(config: RunConfig, model: BaseModel):
    emit(config, model.model_dump_json(indent=2) + "\n")


def _svg(table: Table, paths=(), x=None, y=None, chains=()) -> str:
    from billiard_security.services.plotting import render_svg
    return render_svg(table, paths, x, y, chains)


def cmd_table(config: RunConfig, rng: np.random.Generator) -> int:
    table = load_table(config.options, rng)
    report = validate(table)
    if config.format == "svg":
        emit(config, _svg(table))
    else:
        emit_model(config, TableResponse(table=TableDocument.from_table(table),
                                         report=ValidationReportDocument.from_report(report)))
    if not report.valid:
        worst = report.failures[0]
        logger.error(f"Table invalid: {worst.invariant} fails at s={worst.s:.6f}")
        return InvalidTableError.exit_code
    return 0


def cmd_trace(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.queries import trace_ray
    options = config.options
    table = load_table(options, rng)
    require_valid(table)
    if config.format == "svg":
        raise DomainError("trace has no SVG rendering; use path or plot")
    emit_model(config, trace_ray(table, options["point"], options["angle"], options["bounces"]))
    return 0


def cmd_path(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.queries import solve_paths
    options = config.options
    table = load_table(options, rng)
    require_valid(table)
    response = solve_paths(table, options["x"], options["y"], options["m"], options["method"],
                           options["theta0"], options["starts"], rng)
    if config.format == "svg":
        paths = [record.to_path(table) for record in response.paths]
        emit(config, _svg(table, paths, options["x"], options["y"]))
    else:
        emit_model(config, response)
    return 0


def cmd_conjugate(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.beams import focus_chain
    from billiard_security.services.queries import conjugacy_report
    options = config.options
    table = load_table(options, rng)
    require_valid(table)
    report = conjugacy_report(table, options["x"], options["y"], options["vertices"], options["bounces"],
                              options["chain"], rng)
    if config.format == "svg":
        path = report.path.to_path(table)
        chains = [focus_chain(table, path)] if options["chain"] else []
        emit(config, _svg(table, [path], options["x"], options["y"], chains))
    else:
        emit_model(config, report)
    return 0


def cmd_witness(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.witness import construct_witness
    options = config.options
    table = load_table(options, rng)
    require_valid(table)
    try:
        bundle = construct_witness(table, options["x"], options["y"], options["n"], options["eps_budget"], rng)
    except WitnessError as e:
        logger.error(f"Witness construction failed at stage {e.stage}: {e}")
        if e.partial is not None:
            emit_model(config, WitnessBundleDocument.from_bundle(e.partial, e.stage, str(e)))
        return e.exit_code
    if config.format == "svg":
        emit(config, _svg(bundle.table, bundle.paths, bundle.x, bundle.y))
    else:
        emit_model(config, WitnessBundleDocument.from_bundle(bundle))
    return 0


def cmd_verify(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.verification import verify_bundle
    report = verify_bundle(load_bundle(config.options["bundle"]))
    emit_model(config, report)
    for message in report.messages:
        logger.warning(message)
    return 0 if report.passed else 1


def cmd_plot(config: RunConfig, rng: np.random.Generator) -> int:
    from billiard_security.services.beams import focus_chain
    document = load_bundle(config.options["bundle"])
    table = document.table.to_table()
    paths = [record.to_path(table) for record in document.paths]
    chains = [focus_chain(table, p) for p in paths if p.m > 0] if config.options["chain"] else []
    emit(config, _svg(table, paths, document.x, document.y, chains))
    return 0


HANDLERS = {
    "table": cmd_table,
    "trace": cmd_trace,
    "path": cmd_path,
    "conjugate": cmd_conjugate,
    "witness": cmd_witness,
    "verify": cmd_verify,
    "plot": cmd_plot,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.from_args(args)
    except ValidationError as e:
        print(f"Invalid arguments: {e}", file=sys.stderr)
        return 1

    configure_logging(config.log_level, settings.LOG_FILE)
    config.apply()
    rng = np.random.default_rng(config.seed)
    try:
        return HANDLERS[config.command](config, rng)
    except BilliardError as e:
        logger.error(f"{config.command} failed: {type(e).__name__}: {e}")
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"{config.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
