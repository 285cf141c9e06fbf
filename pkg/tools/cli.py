"""
Command-Line Interface for Mercer Lab

Batch front end for decompositions, Mercer reports, probes, compositions and
heat-semigroup checks. Reports go to stdout (or --out FILE) as CSV or JSON;
logs go to stderr.

Exit codes: 0 success, 1 invalid configuration or argument, 2 numerical failure.
"""

import io
import logging
import sys
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import click
import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

from app.diagnostics import (
    ProbeReport,
    c_criterion_probe,
    continuity_probe_product,
    diagonal_growth_probe,
    modulus_probe,
    psd_probe,
    trace_power_probe,
)
from app.errors import InvalidArgumentError, NumericalFailureError
from app.kernels import KernelSpec
from app.main import MercerLab
from app.nystrom import (
    DISCRETIZATIONS,
    DiscreteOperator,
    adjoint,
    compose,
    save_operator,
    to_spec,
)
from app.quadrature import RULE_KINDS, EvalGrid
from app.reporting import canonical_json, frame_to_csv
from app.semigroup import (
    HeatSemigroupSpec,
    gaussian_bound_fit,
    heat_trace,
    semigroup_check,
)
from app.spectral import export_eigenvalues, fractional_power, mercer_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

FORMATS = ("csv", "json")
PROBES = ("continuity", "diag-growth", "c-criterion", "psd", "trace-power", "modulus")
RICH_FORMAT = "%(name)s - %(message)s"

T = TypeVar("T")


@dataclass
class RunConfig:
    """Validated parameters of one command run."""

    command: str
    kernels: Tuple[str, ...]
    rule: str
    nodes: int
    grid: int
    fmt: str
    out: str
    discretization: str = "sampled"
    params: Dict[str, Any] = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        """
        Check every field before any computation.

        Raises:
            InvalidArgumentError: On the first invalid field
        """
        if not self.kernels and self.command != "semigroup":
            raise InvalidArgumentError(f"{self.command} needs --kernel")
        if self.rule not in RULE_KINDS:
            raise InvalidArgumentError(
                f"Unknown rule {self.rule!r}. Must be one of: {list(RULE_KINDS)}"
            )
        if self.nodes < 2:
            raise InvalidArgumentError(f"--nodes must be at least 2, got {self.nodes}")
        if self.grid < 2:
            raise InvalidArgumentError(f"--grid must be at least 2, got {self.grid}")
        if self.fmt not in FORMATS:
            raise InvalidArgumentError(
                f"Unknown format {self.fmt!r}. Must be one of: {list(FORMATS)}"
            )
        if self.discretization not in DISCRETIZATIONS:
            raise InvalidArgumentError(
                f"Unknown discretization {self.discretization!r}. "
                f"Must be one of: {list(DISCRETIZATIONS)}"
            )
        return self


def parse_list(
    text: Optional[str], cast: Callable[[str], T], what: str
) -> Optional[List[T]]:
    """Comma-separated values, e.g. '100,1000' or '0.2,0.5,0.8'."""
    if text is None:
        return None
    try:
        return [cast(item.strip()) for item in str(text).split(",") if item.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"Bad value in {what}: {text!r}") from e


def emit(text: str, out: str) -> None:
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
        logger.info(f"Wrote {out}")


def check_run_defaults(
    group: click.Group, run_defaults: Dict[str, Any]
) -> Dict[str, Any]:
    """Reject run defaults that name unknown commands or options."""
    for command, options in run_defaults.items():
        if command not in group.commands:
            raise InvalidArgumentError(
                f"Unknown command in run configuration: {command}"
            )
        if not isinstance(options, dict):
            raise InvalidArgumentError(
                f"Run configuration for {command} must be a mapping"
            )
        known = {param.name for param in group.commands[command].params}
        unknown = sorted(set(options) - known)
        if unknown:
            raise InvalidArgumentError(f"Unknown keys for {command}: {unknown}")
    return run_defaults


class LabGroup(click.Group):
    """Click group that maps lab errors onto the documented exit codes."""

    def main(
        self,
        args: Optional[Sequence[str]] = None,
        prog_name: Optional[str] = None,
        complete_var: Optional[str] = None,
        standalone_mode: bool = True,
        **extra: Any,
    ) -> Any:
        try:
            result = super().main(
                args, prog_name, complete_var, standalone_mode=False, **extra
            )
            code = result if isinstance(result, int) else EXIT_OK
        except click.ClickException as e:
            e.show()
            code = EXIT_INVALID
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_INVALID
        except (InvalidArgumentError, OSError) as e:
            logger.error(f"Invalid argument: {e}")
            click.echo(f"Error: {e}", err=True)
            code = EXIT_INVALID
        except NumericalFailureError as e:
            logger.error(f"Numerical failure: {e}")
            click.echo(f"Error: {e}", err=True)
            code = EXIT_NUMERICAL
        if standalone_mode:
            sys.exit(code)
        return code


def common_options(command: Callable[..., Any]) -> Callable[..., Any]:
    options = [
        click.option(
            "--rule", default=None, help="gauss-legendre | trapezoid | midpoint"
        ),
        click.option("--nodes", type=int, default=None, help="Quadrature node count"),
        click.option("--grid", type=int, default=None, help="Evaluation grid size"),
        click.option(
            "--out",
            default="-",
            show_default=True,
            help="Output file, '-' for stdout",
        ),
        click.option("--format", "fmt", default=None, help="csv | json"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


discretization_option = click.option(
    "--discretization",
    default=None,
    help="sampled | galerkin (galerkin needs the gauss-legendre rule)",
)


def build_run(
    lab: MercerLab,
    command: str,
    kernels: Sequence[str],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    fmt: Optional[str],
    out: str,
    default_fmt: Optional[str] = None,
    discretization: Optional[str] = None,
    **params: Any,
) -> RunConfig:
    settings = lab.config
    return RunConfig(
        command=command,
        kernels=tuple(kernels),
        rule=rule or settings["quadrature"]["rule"],
        nodes=settings["quadrature"]["nodes"] if nodes is None else nodes,
        grid=settings["grid"]["size"] if grid is None else grid,
        fmt=fmt or default_fmt or settings["output"]["format"],
        out=out,
        discretization=discretization or settings["quadrature"]["discretization"],
        params=params,
    ).validate()


def discretize_run(
    lab: MercerLab, spec: KernelSpec, run: RunConfig
) -> DiscreteOperator:
    rule = lab.rule(spec.interval, run.rule, run.nodes)
    return lab.discretize(spec, rule, run.discretization)


@click.group(cls=LabGroup)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="YAML configuration (numeric defaults and per-command run options)",
)
@click.option("--log-level", default=None, help="DEBUG | INFO | WARNING | ERROR")
@click.pass_context
def cli(
    ctx: click.Context, config_path: Optional[str], log_level: Optional[str]
) -> None:
    """Mercer Lab: numerical experiments with integral operators."""
    lab = MercerLab(config_path)
    handler = RichHandler(console=Console(stderr=True), show_path=False)
    lab.setup_logging(handler=handler, level=log_level, fmt=RICH_FORMAT)
    ctx.default_map = check_run_defaults(cli, lab.run_defaults)
    ctx.obj = lab


@cli.command()
@click.option("--kernel", required=True, help="Inline kernel spec or JSON file")
@click.option("--top", type=int, default=None, help="Number of eigenvalues to report")
@discretization_option
@common_options
@click.pass_obj
def decompose(
    lab: MercerLab,
    kernel: str,
    top: Optional[int],
    discretization: Optional[str],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    out: str,
    fmt: Optional[str],
) -> None:
    """Eigenvalues of a symmetric kernel, descending."""
    run = build_run(
        lab,
        "decompose",
        [kernel],
        rule,
        nodes,
        grid,
        fmt,
        out,
        default_fmt="csv",
        discretization=discretization,
        top=top,
    )
    spec = lab.kernel(kernel)
    if not spec.symmetric:
        raise InvalidArgumentError(
            f"decompose needs a symmetric kernel, {spec.kind} is not symmetric"
        )
    dec = lab.decompose(discretize_run(lab, spec, run))
    if run.fmt == "csv":
        text = export_eigenvalues(dec, top=top)
    else:
        count = dec.dimension if top is None else min(top, dec.dimension)
        text = canonical_json({"eigenvalues": dec.eigenvalues[:count]})
    emit(text, run.out)


@cli.command()
@click.option("--kernel", required=True, help="Inline kernel spec or JSON file")
@click.option(
    "--terms", type=int, default=None, help="Expansion terms N (default: all)"
)
@discretization_option
@common_options
@click.pass_obj
def mercer(
    lab: MercerLab,
    kernel: str,
    terms: Optional[int],
    discretization: Optional[str],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    out: str,
    fmt: Optional[str],
) -> None:
    """Mercer reconstruction report for a truncated expansion."""
    run = build_run(
        lab,
        "mercer",
        [kernel],
        rule,
        nodes,
        grid,
        fmt,
        out,
        discretization=discretization,
        terms=terms,
    )
    spec = lab.kernel(kernel)
    dec = lab.decompose(discretize_run(lab, spec, run))
    count = dec.dimension if terms is None else terms
    report = mercer_report(dec, count, lab.grid(spec.interval, run.grid))
    if run.fmt == "json":
        emit(report.to_json(), run.out)
    else:
        emit(frame_to_csv(pd.DataFrame([report.to_dict()])), run.out)


def run_probe(
    lab: MercerLab, kind: str, spec: KernelSpec, run: RunConfig
) -> ProbeReport:
    settings = lab.config["diagnostics"]
    params = run.params
    rule = lab.rule(spec.interval, run.rule, run.nodes)
    schedule = parse_list(params["schedule"], int, "--schedule")
    points = parse_list(params["points"], float, "--points")
    growth = settings["growth_per_decade"]

    if kind == "continuity":
        depth = params["depth"]
        if depth is None:
            depth = settings["depth"]
            if spec.kind == "pathological" and spec.truncation is not None:
                depth = min(depth, spec.truncation)
        return continuity_probe_product(
            spec, depth, rule, threshold=settings["jump_threshold"]
        )
    if kind == "diag-growth":
        if not schedule:
            raise InvalidArgumentError("diag-growth needs --schedule")
        grid = lab.grid(spec.interval, run.grid)
        return diagonal_growth_probe(spec, schedule, grid, growth)
    if kind == "c-criterion":
        if points:
            F = EvalGrid.from_points(spec.interval, points)
        else:
            F = lab.grid(spec.interval, run.grid)
        return c_criterion_probe(
            spec, F, rule, schedule, settings["refinement_ratio"], growth
        )
    if kind == "psd":
        if not points:
            raise InvalidArgumentError("psd needs --points")
        return psd_probe(spec, points, settings["psd_relative_tol"])
    if kind == "trace-power":
        if not schedule or params["alpha"] is None:
            raise InvalidArgumentError("trace-power needs --alpha and --schedule")
        return trace_power_probe(spec, params["alpha"], schedule, growth)
    grid = lab.grid(spec.interval, run.grid)
    return modulus_probe(spec, grid, rule, settings["row_jump_threshold"])


@cli.command()
@click.argument("kind", type=click.Choice(PROBES))
@click.option("--kernel", required=True, help="Inline kernel spec or JSON file")
@click.option("--depth", type=int, default=None, help="Continuity probe depth")
@click.option(
    "--schedule", default=None, help="Comma-separated term counts, e.g. 100,1000"
)
@click.option("--points", default=None, help="Comma-separated points, e.g. 0.2,0.5,0.8")
@click.option("--alpha", type=float, default=None, help="Power for trace-power")
@common_options
@click.pass_obj
def probe(
    lab: MercerLab,
    kind: str,
    kernel: str,
    depth: Optional[int],
    schedule: Optional[str],
    points: Optional[str],
    alpha: Optional[float],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    out: str,
    fmt: Optional[str],
) -> None:
    """Run a diagnostic probe and report its verdict."""
    run = build_run(
        lab,
        "probe",
        [kernel],
        rule,
        nodes,
        grid,
        fmt,
        out,
        depth=depth,
        schedule=schedule,
        points=points,
        alpha=alpha,
    )
    report = run_probe(lab, kind, lab.kernel(kernel), run)
    if run.fmt == "json":
        emit(report.to_json(), run.out)
    else:
        frame = pd.DataFrame(report.points, columns=["point", "value"])
        emit(frame_to_csv(frame), run.out)


@cli.command(name="compose")
@click.option(
    "--kernel",
    "kernels",
    multiple=True,
    required=True,
    help="Factor, left to right (repeatable)",
)
@click.option(
    "--adjoint-last",
    is_flag=True,
    default=False,
    help="Use the adjoint of the last factor",
)
@click.option(
    "--power", type=float, default=None, help="Fractional power of the product"
)
@discretization_option
@common_options
@click.pass_obj
def compose_command(
    lab: MercerLab,
    kernels: Tuple[str, ...],
    adjoint_last: bool,
    power: Optional[float],
    discretization: Optional[str],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    out: str,
    fmt: Optional[str],
) -> None:
    """Kernel of a product of operators (optionally a fractional power) as a table."""
    run = build_run(
        lab,
        "compose",
        kernels,
        rule,
        nodes,
        grid,
        fmt,
        out,
        default_fmt="csv",
        discretization=discretization,
        adjoint_last=adjoint_last,
        power=power,
    )
    specs = [lab.kernel(text) for text in kernels]
    interval = specs[0].interval
    if any(not spec.interval.same_as(interval) for spec in specs):
        raise InvalidArgumentError(
            "All factors of a composition must live on the same interval"
        )
    factors = [discretize_run(lab, spec, run) for spec in specs]
    if adjoint_last:
        factors[-1] = adjoint(factors[-1])
    product: DiscreteOperator = reduce(compose, factors)
    if power is not None:
        product = fractional_power(lab.decompose(product), power)

    if run.fmt == "csv":
        buffer = io.StringIO()
        save_operator(product, buffer)
        text = buffer.getvalue()
    else:
        text = canonical_json(to_spec(product).to_mapping())
    emit(text, run.out)


@cli.command()
@click.option("--boundary", default=None, help="dirichlet | neumann")
@click.option("--t", "t", type=float, default=1.0, show_default=True, help="Time t > 0")
@click.option(
    "--modes",
    type=int,
    default=None,
    help="Retained modes (default max(100, ceil(8/sqrt(t))))",
)
@click.option(
    "--times", default=None, help="Comma-separated times for the Gaussian bound fit"
)
@click.option("--b", "b", type=float, default=None, help="Gaussian exponent b > 0")
@click.option("--omega", type=float, default=None, help="Exponential growth omega >= 0")
@common_options
@click.pass_obj
def semigroup(
    lab: MercerLab,
    boundary: Optional[str],
    t: float,
    modes: Optional[int],
    times: Optional[str],
    b: Optional[float],
    omega: Optional[float],
    rule: Optional[str],
    nodes: Optional[int],
    grid: Optional[int],
    out: str,
    fmt: Optional[str],
) -> None:
    """Semigroup residual, trace and fitted Gaussian-bound constant of a heat kernel."""
    settings = lab.config["semigroup"]
    run = build_run(
        lab, "semigroup", [], rule, nodes, grid, fmt, out, default_fmt="json"
    )
    spec = HeatSemigroupSpec(boundary or settings["boundary"], t, modes)
    fit_times = parse_list(times, float, "--times") or settings["times"]
    interval = spec.kernel().interval
    eval_grid = lab.grid(interval, run.grid)
    rule_used = lab.rule(interval, run.rule, run.nodes)

    fit = gaussian_bound_fit(
        spec,
        fit_times,
        eval_grid,
        b=settings["gaussian_b"] if b is None else b,
        omega=settings["gaussian_omega"] if omega is None else omega,
    )
    payload = {
        "semigroup_residual": semigroup_check(spec, rule_used, eval_grid),
        "trace": heat_trace(spec),
        "gaussian_c": fit.c,
    }
    if run.fmt == "json":
        emit(canonical_json(payload), run.out)
    else:
        emit(frame_to_csv(pd.DataFrame([payload])), run.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; returns the exit code."""
    return int(cli.main(args=argv, prog_name="mercerlab", standalone_mode=False))


if __name__ == "__main__":
    sys.exit(main())
