#!/usr/bin/env python3
"""Command-line interface for rdnet."""

import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .certify import ProblemKind, bootstrap_sequence, check_global_existence, classify_network
from .config import Config
from .config_overrides import ConfigOverrideManager
from .constants import (
    BOOTSTRAP_CAP,
    BOOTSTRAP_MAX_STEPS,
    EXIT_DOMAIN_FAILURE,
    EXIT_OK,
    EXIT_USAGE,
    BootstrapOutcome,
    DiffusivityClass,
    ProblemKindName,
)
from .errors import DomainError, LinearSolveFailure, NonFiniteState, ParseError, ValidationError
from .monitors import MonitorSet
from .netparse import load_network
from .schemas import (
    SCHEMAS,
    AnalysisReport,
    BootstrapTraceModel,
    CertificateModel,
    ConservationModel,
    QuasiPositivityModel,
    SortModel,
)
from .solver import Grid, Uniform, parse_initial_condition, run_simulation
from .stoich import (
    ConservationVector,
    build_matrix,
    check_quasi_positivity,
    find_conservation_vector,
    sort_block_triangular,
)

logger = logging.getLogger(__name__)


def _emit(model) -> None:
    print(model.model_dump_json(indent=2))


def _parse_extent(text: str, cast) -> tuple:
    """'64' or '32x32' style per-axis values."""
    try:
        return tuple(cast(part) for part in text.lower().split("x"))
    except ValueError:
        raise ValidationError(f"malformed extent '{text}'") from None


def _load(args, config: Config):
    """Parse and validate the network file, honouring --validation-seed."""
    analysis = config.analysis
    seed = args.validation_seed if args.validation_seed is not None else analysis.validation_seed
    return load_network(args.file, samples=analysis.validation_samples, seed=seed)


def cmd_analyze(args, config: Config) -> int:
    """Stoichiometry, conservation, quasi-positivity and sorting of a network file."""
    analysis = config.analysis
    spec = _load(args, config)
    matrix = build_matrix(spec)
    conservation = find_conservation_vector(matrix)
    seed = args.seed if args.seed is not None else analysis.quasi_positivity_seed
    positivity = check_quasi_positivity(spec, analysis.quasi_positivity_samples, seed)
    sort = sort_block_triangular(matrix)

    kind = cls = None
    try:
        problem, diffusivity_class = classify_network(spec)
        kind, cls = problem.name.value, diffusivity_class.value
    except DomainError as e:
        logger.warning(f"Network not classified: {e}")

    report = AnalysisReport(
        species=list(spec.species),
        matrix=matrix.to_json(),
        structure_problems=matrix.check_structure(),
        conservation=ConservationModel.from_result(conservation),
        quasi_positivity=QuasiPositivityModel.from_report(positivity),
        sort=SortModel.from_result(sort),
        kind=kind,
        diffusivity_class=cls,
    )
    _emit(report)
    ok = report.conservation.feasible and report.sort.sortable and report.quasi_positivity.passed
    return EXIT_OK if ok else EXIT_DOMAIN_FAILURE


def _kind_from_args(args) -> ProblemKind:
    name = ProblemKindName(args.kind)
    if name is ProblemKindName.GENERALIZED_ROTHE:
        return ProblemKind.generalized(Fraction(args.alpha), Fraction(args.beta), Fraction(args.gamma))
    if (args.alpha, args.beta, args.gamma) != ("1", "1", "1"):
        raise ValidationError("--alpha/--beta/--gamma apply to --kind generalized only")
    return ProblemKind(name)


def cmd_certify(args, config: Config) -> int:
    """Global-existence certificate for a network file or an explicit system."""
    dim: Optional[int] = args.dim
    if args.file:
        spec = _load(args, config)
        kind, cls = classify_network(spec)
        if args.diffusivity_class:
            cls = DiffusivityClass(args.diffusivity_class)
        dim = dim if dim is not None else spec.dim_hint
    else:
        if not args.kind:
            raise ValidationError("certify needs a network FILE or --kind")
        kind = _kind_from_args(args)
        cls = DiffusivityClass(args.diffusivity_class or DiffusivityClass.GENERAL.value)
    if dim is None:
        raise ValidationError("certify needs --dim (or a 'dim' statement in the network file)")

    certificate = check_global_existence(kind, cls, dim)
    _emit(CertificateModel.from_certificate(certificate))
    if args.strict and not certificate.certified:
        return EXIT_DOMAIN_FAILURE
    return EXIT_OK


def cmd_bootstrap(args, config: Config) -> int:
    """Trace the integrability bootstrap from r0."""
    kind = _kind_from_args(args) if args.kind else None
    epsilon = Fraction(args.epsilon) if args.epsilon is not None else None
    trace = bootstrap_sequence(Fraction(args.r0), args.dim, epsilon, Fraction(args.cap), args.max_steps, kind=kind)
    _emit(BootstrapTraceModel.from_trace(trace))
    if args.strict and trace.outcome is not BootstrapOutcome.DIVERGED:
        return EXIT_DOMAIN_FAILURE
    return EXIT_OK


def cmd_simulate(args, config: Config) -> int:
    """Integrate a network on a box grid and report norms."""
    if args.config:
        ConfigOverrideManager.apply_file(config.solver, args.config)
    solver_config = config.solver
    if args.t_end is not None:
        solver_config.t_end = args.t_end
    solver_config.validate()

    spec = _load(args, config)
    cells = _parse_extent(args.grid, int)
    lengths = _parse_extent(args.lengths, float)
    if len(lengths) == 1:
        lengths = lengths * len(cells)
    grid = Grid(cells, lengths)
    ic = parse_initial_condition(args.ic, spec.species) if args.ic else Uniform((1.0,) * spec.n_species)

    conservation = None
    if spec.n_reactions == 0:
        conservation = [1.0] * spec.n_species
    else:
        found = find_conservation_vector(build_matrix(spec))
        if isinstance(found, ConservationVector):
            conservation = found
    pairs = tuple(tuple(Fraction(part) for part in pair.split(",")) for pair in args.pair)
    monitors = MonitorSet(
        q_values=tuple(float(q) for q in args.q) if args.q else MonitorSet().q_values,
        levels=tuple(args.level),
        pairs=pairs,
        conservation=conservation,
        threads=config.runtime.threads,
    )

    trajectory, report = run_simulation(spec, grid, solver_config, ic, monitors)
    if args.out:
        trajectory.to_csv(args.out, per_cell=args.per_cell)
        logger.info(f"Wrote {len(trajectory)} samples to {args.out}")
    if args.norms_csv:
        report.to_csv(args.norms_csv)
    _emit(report)
    return EXIT_OK


def cmd_version(args, config: Config) -> int:
    print(__version__)
    return EXIT_OK


def cmd_schema(args, config: Config) -> int:
    """Print the JSON schema of a report model."""
    print(json.dumps(SCHEMAS[args.name].model_json_schema(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='rdnet',
        description='Reaction network analysis, existence certificates and reaction-diffusion simulation'
    )
    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    analyze_parser = subparsers.add_parser('analyze', help='Analyze a network file')
    analyze_parser.add_argument('file', help='Network file')
    analyze_parser.add_argument('--seed', type=int, help='Seed of the quasi-positivity sampler')
    analyze_parser.add_argument('--validation-seed', type=int, help='Seed of the diffusivity validation sampler')

    def add_kind_options(sub):
        sub.add_argument('--kind', choices=[k.value for k in ProblemKindName], help='Reaction system')
        sub.add_argument('--alpha', default='1', help='Forward exponent of the first reactant (generalized)')
        sub.add_argument('--beta', default='1', help='Forward exponent of the second reactant (generalized)')
        sub.add_argument('--gamma', default='1', help='Backward exponent (generalized)')

    certify_parser = subparsers.add_parser('certify', help='Check global existence')
    certify_parser.add_argument('file', nargs='?', help='Network file (classified automatically)')
    add_kind_options(certify_parser)
    certify_parser.add_argument('--class', dest='diffusivity_class', choices=[c.value for c in DiffusivityClass],
                                help='Diffusivity regime')
    certify_parser.add_argument('--dim', type=int, help='Spatial dimension')
    certify_parser.add_argument('--strict', action='store_true', help='Exit 1 when not certified')
    certify_parser.add_argument('--validation-seed', type=int, help='Seed of the diffusivity validation sampler')

    bootstrap_parser = subparsers.add_parser('bootstrap', help='Trace the exponent bootstrap')
    bootstrap_parser.add_argument('--r0', required=True, help='Initial exponent (rational)')
    bootstrap_parser.add_argument('--dim', type=int, required=True, help='Spatial dimension')
    bootstrap_parser.add_argument('--epsilon', help='Recursion slack (default: half the admissible gap)')
    bootstrap_parser.add_argument('--cap', default=str(BOOTSTRAP_CAP), help='Stop after exceeding this exponent')
    bootstrap_parser.add_argument('--max-steps', type=int, default=BOOTSTRAP_MAX_STEPS, help='Step limit')
    add_kind_options(bootstrap_parser)
    bootstrap_parser.add_argument('--strict', action='store_true', help='Exit 1 unless the sequence diverges')

    simulate_parser = subparsers.add_parser('simulate', help='Run a reaction-diffusion simulation')
    simulate_parser.add_argument('file', help='Network file')
    simulate_parser.add_argument('--grid', default='64', help="Cells per axis, e.g. '64' or '32x32'")
    simulate_parser.add_argument('--lengths', default='1', help="Domain lengths, e.g. '1' or '1x2'")
    simulate_parser.add_argument('--t-end', type=float, help='Final time (overrides config)')
    simulate_parser.add_argument('--config', help='Solver settings file (key=value)')
    simulate_parser.add_argument('--ic', help="Initial condition, e.g. 'uniform:1,1,1' or 'checkerboard:0,2'")
    simulate_parser.add_argument('--out', help='Trajectory CSV path')
    simulate_parser.add_argument('--per-cell', action='store_true', help='Write per-cell values to the CSV')
    simulate_parser.add_argument('--norms-csv', help='Norm report CSV path')
    simulate_parser.add_argument('--q', action='append', default=[], help='Space-time norm exponent (repeatable)')
    simulate_parser.add_argument('--level', action='append', type=float, default=[],
                                 help='Level-set threshold (repeatable)')
    simulate_parser.add_argument('--pair', action='append', default=[],
                                 help="Level-set exponent pair 'r,q' (repeatable)")
    simulate_parser.add_argument('--validation-seed', type=int, help='Seed of the diffusivity validation sampler')

    subparsers.add_parser('version', help='Show version')

    schema_parser = subparsers.add_parser('schema', help='Print the JSON schema of a report')
    schema_parser.add_argument('name', choices=sorted(SCHEMAS), help='Report name')

    return parser


COMMANDS = {
    'analyze': cmd_analyze,
    'certify': cmd_certify,
    'bootstrap': cmd_bootstrap,
    'simulate': cmd_simulate,
    'version': cmd_version,
    'schema': cmd_schema,
}


def run_command(argv: Sequence[str]) -> int:
    """Run one subcommand; returns 0 on success, 1 on domain failure, 2 on usage or input errors."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    try:
        config = Config.from_environment()
        return COMMANDS[args.command](args, config)
    except (ParseError, ValidationError, FileNotFoundError, ValueError, ZeroDivisionError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except (DomainError, LinearSolveFailure, NonFiniteState) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_DOMAIN_FAILURE


if __name__ == '__main__':
    sys.exit(run_command(sys.argv[1:]))
