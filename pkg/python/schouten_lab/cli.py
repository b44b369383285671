"""Command-line front end.

``schouten-lab <subcommand>`` runs a named check suite and writes the
reports as sorted-key JSON to ``--out`` (or stdout). A one-line summary per
check goes to stderr. Exit codes: 0 when every check passes, 1 when any
check fails, 2 on an infrastructure error (unreadable problem file, bad
flags, an unexpected exception).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from schouten_lab.cases import (
    DiracInstance,
    EulerInstance,
    as_eta,
    dirac_demo_instance,
)
from schouten_lab.checks import (
    AXIOMS,
    DIRAC_CHECKS,
    EULER_CHECKS,
    poisson_checks,
    run_axiom_suite,
    run_dirac_checks,
    run_euler_checks,
    run_kv_manufactured,
    run_slope_checks,
)
from schouten_lab.config import DEFAULT_TOLERANCES, Tolerances
from schouten_lab.errors import ParseError, SchoutenLabError, UnknownKey
from schouten_lab.homological import (
    DeformationSeries,
    FoliationData,
    homological_residual,
    solve_order,
)
from schouten_lab.multivector import Multivector, parse_key, to_json
from schouten_lab.poisson import PoissonTensor
from schouten_lab.report import CheckReport, dump_reports, timed
from schouten_lab.sampling import sample_points
from schouten_lab.scalar import Chart, ScalarField

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INFRA = 2


# --------------------------------------------------------------------------
# Problem files


class TensorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    degree: int = Field(ge=0)
    components: dict[str, str] = Field(default_factory=dict)


class FoliationSpec(BaseModel):
    """Names refer to ``tensors``; Casimirs are function names or expressions."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    poisson: str
    casimirs: list[str] = Field(default_factory=list)
    duals: list[str] = Field(default_factory=list)
    leaf_indices: list[int]
    star_center: list[float] | None = None


class CaseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["euler", "dirac"]
    eta: list[float | str] = Field(default_factory=lambda: [1, 1, 1])
    eps: float = 0.1
    eps_radius: float = Field(default=0.2, gt=0)
    hamiltonian: str | None = None
    preset: str | None = None


class ProblemFile(BaseModel):
    """Schema of a JSON problem file; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    chart: list[str] = Field(default_factory=list)
    box: tuple[float, float] = (-2.0, 2.0)
    tensors: dict[str, TensorSpec] = Field(default_factory=dict)
    functions: dict[str, str] = Field(default_factory=dict)
    # function name -> tensor name it should be a Casimir of
    casimirs: dict[str, str] = Field(default_factory=dict)
    foliation: FoliationSpec | None = None
    case: CaseSpec | None = None
    checks: list[str] = Field(default_factory=list)
    tolerances: Tolerances = DEFAULT_TOLERANCES
    eps_grid: list[float] | None = None
    samples: int = Field(default=50, ge=1)
    seed: int = Field(default=0, ge=0)
    series: list[str] = Field(default_factory=list)
    order: int = Field(default=1, ge=1)
    trials: int = Field(default=200, ge=1)
    dims: list[int] = Field(default_factory=lambda: [3, 4, 5, 6])


@dataclass(frozen=True)
class Problem:
    """A validated problem file with every expression parsed on its chart."""

    source: ProblemFile
    chart: Chart | None
    tensors: dict[str, Multivector]
    functions: dict[str, ScalarField]
    foliation: FoliationData | None

    def points(self, n: int | None = None) -> np.ndarray | None:
        if self.chart is None:
            return None
        low, high = self.source.box
        count = n or self.source.samples
        return sample_points(self.chart, count, seed=self.source.seed, low=low, high=high)


def _position(text: str, index: int) -> tuple[int, int]:
    line = text.count("\n", 0, index) + 1
    col = index - (text.rfind("\n", 0, index) + 1) + 1
    return line, col


def _locate(text: str, literal: str) -> tuple[int, int]:
    """1-based position of the first character inside the JSON string ``literal``."""
    index = text.find(json.dumps(literal))
    if index < 0:
        return 1, 1
    return _position(text, index + 1)


@contextmanager
def _located(text: str, literal: str) -> Iterator[None]:
    """Re-raise expression errors with their position in the file."""
    try:
        yield
    except ParseError as exc:
        line, col = _locate(text, literal)
        raise type(exc)(exc.message, line=line, col=col + exc.col - 1) from exc


def _validation_error(text: str, exc: ValidationError) -> ParseError:
    first = exc.errors()[0]
    path = ".".join(str(p) for p in first["loc"])
    if first["type"] == "extra_forbidden":
        key = str(first["loc"][-1])
        line, col = _locate(text, key)
        return UnknownKey(f"unknown key {path!r}", line=line, col=col)
    return ParseError(f"{path}: {first['msg']}")


def parse_problem_text(text: str) -> Problem:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, col=exc.colno) from exc
    try:
        source = ProblemFile.model_validate(raw)
    except ValidationError as exc:
        raise _validation_error(text, exc) from exc
    chart = Chart(tuple(source.chart)) if source.chart else None
    if chart is None and (source.tensors or source.functions or source.foliation):
        raise ParseError("tensors and functions need a declared chart")
    tensors: dict[str, Multivector] = {}
    functions: dict[str, ScalarField] = {}
    if chart is not None:
        for name, tensor in source.tensors.items():
            components: dict[tuple[int, ...], ScalarField] = {}
            for key, expr in tensor.components.items():
                with _located(text, expr):
                    components[parse_key(key)] = ScalarField.parse(chart, expr)
            tensors[name] = Multivector(chart, tensor.degree, components)
        for name, expr in source.functions.items():
            with _located(text, expr):
                functions[name] = ScalarField.parse(chart, expr)
    for fn, tensor_name in source.casimirs.items():
        if fn not in functions:
            raise ParseError(f"casimir entry names unknown function {fn!r}")
        if tensor_name not in tensors:
            raise ParseError(f"casimir entry names unknown tensor {tensor_name!r}")
    for name in source.series:
        if name not in tensors:
            raise ParseError(f"series names unknown tensor {name!r}")
    foliation = None
    if source.foliation is not None and chart is not None:
        foliation = _build_foliation(text, source.foliation, chart, tensors, functions)
    logger.debug("parsed problem with %d tensors on %s", len(tensors), source.chart)
    return Problem(source, chart, tensors, functions, foliation)


def _build_foliation(
    text: str,
    source: FoliationSpec,
    chart: Chart,
    tensors: dict[str, Multivector],
    functions: dict[str, ScalarField],
) -> FoliationData:
    for name in (source.poisson, *source.duals):
        if name not in tensors:
            raise ParseError(f"foliation names unknown tensor {name!r}")
    casimirs = []
    for entry in source.casimirs:
        if entry in functions:
            casimirs.append(functions[entry])
            continue
        with _located(text, entry):
            casimirs.append(ScalarField.parse(chart, entry))
    return FoliationData(
        poisson=PoissonTensor.verify(tensors[source.poisson]),
        casimirs=tuple(casimirs),
        duals=tuple(tensors[name] for name in source.duals),
        leaf_indices=tuple(source.leaf_indices),
        star_center=tuple(source.star_center) if source.star_center is not None else None,
    )


def parse_problem(path: str | Path) -> Problem:
    """Read and validate a problem file.

    Raises:
        ParseError: malformed JSON, schema violation or bad expression
            (carries ``line`` and ``col``).
        UnknownCoordinate: an expression uses an undeclared coordinate.
        UnknownKey: a key outside the schema.
    """
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"problem file is not valid utf-8 at byte {exc.start}") from exc
    return parse_problem_text(text)


# --------------------------------------------------------------------------
# Suites


Task = Callable[[], list[CheckReport]]


@dataclass(frozen=True)
class Settings:
    seed: int
    samples: int
    trials: int
    dims: tuple[int, ...]
    tol: float | None
    eps_grid: tuple[float, ...] | None
    checks: tuple[str, ...]
    tolerances: Tolerances


def _guard(name: str, task: Task) -> Task:
    def run() -> list[CheckReport]:
        try:
            return task()
        except SchoutenLabError as exc:
            logger.info("%s raised %s", name, type(exc).__name__)
            return [CheckReport.failure(name, f"{type(exc).__name__}: {exc}")]

    return run


def _split_csv(text: str | None) -> list[str]:
    if not text:
        return []
    return [part.strip() for part in text.split(",") if part.strip()]


def _floats(text: str | None) -> tuple[float, ...] | None:
    parts = _split_csv(text)
    return tuple(float(p) for p in parts) if parts else None


def _euler_instance(
    args: argparse.Namespace, problem: Problem | None
) -> tuple[EulerInstance, float]:
    case = problem.source.case if problem is not None else None
    if case is not None and case.kind != "euler":
        raise ParseError(f"problem case is {case.kind!r}, expected 'euler'")
    preset = args.preset or (case.preset if case else None)
    if preset:
        inst, eps = EulerInstance.preset(preset)
        return inst, float(args.eps if args.eps is not None else eps)
    eta = _split_csv(args.eta) or (list(case.eta) if case else ["1", "1", "1"])
    radius = case.eps_radius if case else 0.2
    hamiltonian = args.hamiltonian or (case.hamiltonian if case else None)
    eps = args.eps if args.eps is not None else (case.eps if case else 0.1)
    return EulerInstance.create(as_eta(eta), radius, hamiltonian), float(eps)


def _dirac_instance(problem: Problem | None) -> DiracInstance:
    case = problem.source.case if problem is not None else None
    if case is not None and case.kind != "dirac":
        raise ParseError(f"problem case is {case.kind!r}, expected 'dirac'")
    return dirac_demo_instance()


def _selected(settings: Settings, available: Sequence[str]) -> list[str]:
    chosen = list(settings.checks) or list(available)
    unknown = [c for c in chosen if c not in available]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {list(available)}")
    return chosen


def axiom_tasks(settings: Settings) -> list[Task]:
    return [
        _guard(
            f"axioms.{name}",
            lambda name=name: run_axiom_suite(
                settings.trials, settings.seed, settings.dims, checks=(name,)
            ),
        )
        for name in _selected(settings, AXIOMS)
    ]


def poisson_tasks(problem: Problem, settings: Settings) -> list[Task]:
    pairs = {
        fn: (tensor, problem.functions[fn]) for fn, tensor in problem.source.casimirs.items()
    }

    def run() -> list[CheckReport]:
        points = problem.points(settings.samples)
        return poisson_checks(problem.tensors, pairs, points, settings.tolerances)

    return [_guard("poisson", run)]


def homological_tasks(problem: Problem | None, settings: Settings) -> list[Task]:
    if problem is None or problem.foliation is None:
        return [
            _guard(
                "kv",
                lambda: run_kv_manufactured(min(settings.trials, 20), settings.seed),
            )
        ]
    fol = problem.foliation
    series = DeformationSeries(tuple(problem.tensors[n] for n in problem.source.series))
    order = problem.source.order

    def run() -> list[CheckReport]:
        with timed() as elapsed:
            padded = series.padded(order)
            gens = solve_order(fol, padded, order, problem.points(), settings.tolerances)
            residuals = homological_residual(gens, padded, order)
        generators = [to_json(x) if x.is_exact else str(x) for x in gens.coefficients]
        return [
            CheckReport.from_residuals(
                "homological.solve",
                [float(len(r.components)) for r in residuals],
                0.0,
                exact=True,
                parameters={"order": order, "generators": generators},
            ).model_copy(update={"wall_time": elapsed()})
        ]

    return [_guard("homological.solve", run)]


def euler_tasks(
    args: argparse.Namespace, problem: Problem | None, settings: Settings
) -> list[Task]:
    inst, eps = _euler_instance(args, problem)
    available = (*EULER_CHECKS, "table")
    return [
        _guard(
            f"euler.{name}",
            lambda name=name: run_euler_checks(
                inst,
                eps,
                (name,),
                eps_grid=settings.eps_grid,
                samples=settings.samples,
                seed=settings.seed,
                tol=settings.tol,
                tolerances=settings.tolerances,
            ),
        )
        for name in _selected(settings, available)
    ]


def dirac_tasks(problem: Problem | None, settings: Settings) -> list[Task]:
    inst = _dirac_instance(problem)
    return [
        _guard(
            f"dirac.{name}",
            lambda name=name: run_dirac_checks(
                inst,
                (name,),
                eps_grid=settings.eps_grid,
                samples=settings.samples,
                seed=settings.seed,
                tol=settings.tol,
                tolerances=settings.tolerances,
            ),
        )
        for name in _selected(settings, DIRAC_CHECKS)
    ]


def slope_tasks(
    args: argparse.Namespace, problem: Problem | None, settings: Settings
) -> list[Task]:
    inst, _ = _euler_instance(args, problem)
    orders = [int(k) for k in _split_csv(args.orders)] or [1, 2]
    return [
        _guard(
            f"slope.order-{k}",
            lambda k=k: run_slope_checks(inst, (k,), samples=settings.samples, seed=settings.seed),
        )
        for k in orders
    ]


def triviality_tasks(
    args: argparse.Namespace, problem: Problem | None, settings: Settings
) -> list[Task]:
    narrowed = replace(settings, checks=("triviality",))
    if args.case == "dirac":
        return dirac_tasks(problem, narrowed)
    return euler_tasks(args, problem, narrowed)


def build_tasks(
    command: str, args: argparse.Namespace, problem: Problem | None, settings: Settings
) -> list[Task]:
    if command == "check-axioms":
        return axiom_tasks(settings)
    if command == "poisson-verify":
        if problem is None:
            raise ValueError("poisson-verify needs --problem")
        return poisson_tasks(problem, settings)
    if command == "homological-solve":
        return homological_tasks(problem, settings)
    if command == "euler":
        return euler_tasks(args, problem, settings)
    if command == "dirac":
        if problem is None and not args.demo:
            raise ValueError("dirac needs --demo or a problem file with a dirac case")
        return dirac_tasks(problem, settings)
    if command == "slope":
        return slope_tasks(args, problem, settings)
    if command == "triviality":
        return triviality_tasks(args, problem, settings)
    raise ValueError(f"unknown command {command!r}")


def run_suite(tasks: Sequence[Task], jobs: int = 1) -> tuple[list[CheckReport], int]:
    """Run every task, ``jobs`` at a time; reports come back sorted by check name."""
    if jobs <= 1:
        batches = [task() for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(lambda task: task(), tasks))
    reports = sorted((r for batch in batches for r in batch), key=lambda r: r.check)
    code = EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED
    return reports, code


def summary_lines(reports: Sequence[CheckReport]) -> list[str]:
    width = max((len(r.check) for r in reports), default=0)
    return [
        f"{'PASS' if r.passed else 'FAIL'}  {r.check:<{width}}  "
        f"max={r.max_residual:.3e}  tol={r.tolerance:.1e}  {r.wall_time:.2f}s"
        for r in reports
    ]


# --------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", type=Path, help="JSON problem file")
    common.add_argument("--out", type=Path, help="write the JSON report here instead of stdout")
    common.add_argument("--seed", type=int, help="sampling seed")
    common.add_argument("--tol", type=float, help="override the check tolerance")
    common.add_argument("--eps-grid", help="comma-separated eps values")
    common.add_argument("--jobs", type=int, default=1, help="checks run concurrently")
    common.add_argument("--samples", type=int, help="sample points per check")
    common.add_argument("--checks", help="comma-separated subset of checks")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    euler = argparse.ArgumentParser(add_help=False)
    euler.add_argument("--eta", help="diagonal of eta, e.g. 1,1,-1")
    euler.add_argument("--eps", type=float, help="deformation parameter")
    euler.add_argument("--preset", help="table row such as 'so(4)' or 'l(3)'")
    euler.add_argument("--hamiltonian", help="hamiltonian expression in y1..y3, z1..z3")

    parser = argparse.ArgumentParser(
        prog="schouten-lab", description="Schouten bracket and Poisson deformation checks."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    axioms = sub.add_parser("check-axioms", parents=[common], help="bracket identities")
    axioms.add_argument("--dim", type=int, action="append", help="chart dimension (repeatable)")
    axioms.add_argument("--trials", type=int, help="random inputs per identity")
    sub.add_parser("poisson-verify", parents=[common], help="jacobi and casimir checks")
    homological = sub.add_parser(
        "homological-solve", parents=[common], help="solve the homological recursion"
    )
    homological.add_argument("--trials", type=int, help="manufactured instances")
    sub.add_parser("euler", parents=[common, euler], help="euler family checks")
    dirac = sub.add_parser("dirac", parents=[common], help="dirac bracket checks")
    dirac.add_argument("--demo", action="store_true", help="use the built-in demo instance")
    slope = sub.add_parser("slope", parents=[common, euler], help="order-k convergence test")
    slope.add_argument("--orders", help="comma-separated orders (1 and/or 2)")
    triviality = sub.add_parser("triviality", parents=[common, euler], help="flow straightening")
    triviality.add_argument("--case", choices=("euler", "dirac"), default="euler")
    return parser


def _settings(args: argparse.Namespace, problem: Problem | None) -> Settings:
    source = problem.source if problem is not None else ProblemFile()
    trials = getattr(args, "trials", None)
    dims = getattr(args, "dim", None)
    return Settings(
        seed=args.seed if args.seed is not None else source.seed,
        samples=args.samples or source.samples,
        trials=trials or source.trials,
        dims=tuple(dims or source.dims),
        tol=args.tol,
        eps_grid=_floats(args.eps_grid) or (tuple(source.eps_grid) if source.eps_grid else None),
        checks=tuple(_split_csv(args.checks) or source.checks),
        tolerances=source.tolerances,
    )


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        problem = parse_problem(args.problem) if args.problem is not None else None
        settings = _settings(args, problem)
        tasks = build_tasks(args.command, args, problem, settings)
        reports, code = run_suite(tasks, max(args.jobs, 1))
    except (OSError, ValueError, SchoutenLabError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_INFRA
    except Exception:
        logger.exception("unexpected failure running %s", args.command)
        return EXIT_INFRA
    payload = dump_reports(reports)
    if args.out is not None:
        args.out.write_text(payload + "\n", encoding="utf-8")
    else:
        sys.stdout.write(payload + "\n")
    for line in summary_lines(reports):
        sys.stderr.write(line + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
