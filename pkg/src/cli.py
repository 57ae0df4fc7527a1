"""
Command-line interface

Usage:
    python main.py content --gauge '{"kind":"power","beta":1}' --set E.json
    python main.py integral --capacity power.json --function f.json --p 2
    python main.py maximal --op dyadic --capacity power.json --function f.json
    python main.py cz --capacity power.json --function f.json --height 2
    python main.py pack --gauge power.json --family family.json
    python main.py verify packing --capacity power-0.5 --samples 500 --seed 7
    python main.py experiment jn --capacity power-1 --config '{"finest_level":-10}' --csv tails.csv
    python main.py config

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 on bad input.
"""
import argparse
import json
import logging
import math
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from tabulate import tabulate

from src.core.choquet import choquet_integral, content, content_cover, linf_norm, lp_norm
from src.core.decompositions import (
    PACKING_CONSTANT,
    check_packing_selection,
    cz_decompose,
    packing_integral_check,
    packing_select,
)
from src.core.equivalence import (
    capacity_zoo,
    doubling_constants,
    equivalence_check,
    packing_condition_test,
    triple_cover_check,
    verification_sets,
)
from src.core.experiments import (
    differentiation_experiment,
    function_battery,
    jn_experiment,
    leading_zero_bits,
    maximal_comparison_experiment,
    strong_type_experiment,
    weak_type_experiment,
    write_tail_csv,
)
from src.core.grid import GridFunction, LatticeConfig
from src.core.maximal import ball_maximal, bmo_norm, dyadic_maximal, sharp_maximal
from src.core.parallel_processor import TaskError
from src.core.reports import clean_value, dump_report, verdict
from src.core.schemas import (
    CubeFamilyModel,
    LatticeConfigModel,
    build_cube_gauge,
    build_gauge,
    build_handle,
    load_cube,
    load_function,
    load_set,
    parse_gauge,
    read_document,
    resolve_config,
)
from src.core.set_functions import (
    SetFunctionHandle,
    check_monotone,
    check_strong_subadditivity,
    check_subadditivity,
)
from src.utils.config import (
    APP_NAME,
    APP_VERSION,
    DEFAULT_DIMENSION,
    DEFAULT_FINEST_LEVEL,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    LOG_LEVEL,
    describe_config,
    validate_config,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

# Lipschitz profiles for the differentiation experiment: name -> (function, Lipschitz constant)
PROFILES: Dict[str, Tuple[Callable, float]] = {
    "constant": (lambda *xs: 0.0 * xs[0] + 1.0, 0.0),
    "linear": (lambda *xs: xs[0], 1.0),
    "quadratic": (lambda *xs: xs[0] ** 2, 2.0),
    "sine": (lambda *xs: np.sin(2 * math.pi * xs[0]), 2 * math.pi),
}

Result = Tuple[Any, bool]


def window_config(args) -> LatticeConfig:
    """Window from --config, falling back to the configured defaults"""
    if getattr(args, "config", None):
        return LatticeConfigModel.model_validate(read_document(args.config)).build()
    return LatticeConfig(dimension=DEFAULT_DIMENSION, finest_level=DEFAULT_FINEST_LEVEL)


def resolve_handle(source: str, config: LatticeConfig) -> SetFunctionHandle:
    """A gauge/capacity document, or the name of a shipped capacity"""
    zoo_names = capacity_zoo(config)
    if source in zoo_names:
        return zoo_names[source]
    return build_handle(parse_gauge(read_document(source)), config)


def capacity_source(args) -> str:
    source = getattr(args, "capacity", None) or getattr(args, "gauge", None)
    if not source:
        raise ValueError("a --capacity (or --gauge) document is required")
    return source


def input_function(args, config: LatticeConfig) -> GridFunction:
    if not getattr(args, "function", None):
        raise ValueError("a --function document is required")
    return load_function(args.function, config)


def experiment_functions(args, config: LatticeConfig):
    if getattr(args, "function", None):
        return [("input", load_function(args.function, config))]
    return function_battery(config, seed=args.seed, count=args.trials)


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------

def cmd_content(args) -> Result:
    """Dyadic content of a set"""
    window = window_config(args)
    grid_set = load_set(args.set, window)
    spec = parse_gauge(read_document(capacity_source(args)))
    config = resolve_config(spec.config, grid_set.config)
    gauge = build_cube_gauge(spec, config)
    data: Dict[str, Any] = {"content": content(grid_set, gauge)}
    if args.witness:
        data["cover"] = [cube.to_dict() for cube in content_cover(grid_set, gauge)]
    return data, True


def cmd_integral(args) -> Result:
    """Choquet integral and norms of a nonnegative function"""
    window = window_config(args)
    f = input_function(args, window)
    handle = resolve_handle(capacity_source(args), f.config)
    region = load_set(args.region, f.config) if args.region else None
    data: Dict[str, Any] = {"integral": choquet_integral(f, handle, region)}
    if args.p is not None:
        data["p"] = args.p
        data["lp_norm"] = lp_norm(f, handle, region, args.p)
        data["linf_norm"] = linf_norm(f, handle, region)
    return data, True


def cmd_maximal(args) -> Result:
    window = window_config(args)
    f = input_function(args, window)
    handle = resolve_handle(capacity_source(args), f.config)
    g = f.abs()
    data: Dict[str, Any] = {"operator": args.op}
    if args.op == "sharp":
        root = load_cube(args.cube) if args.cube else handle.lattice.root
        result = sharp_maximal(f, handle, root)
        data["bmo_norm"] = bmo_norm(f, handle, root)
    elif args.op == "dyadic":
        result = dyadic_maximal(g, handle)
    else:
        result = ball_maximal(g, handle, centered=(args.op == "ball"))
    data.update(result.to_dict())
    if args.p is not None:
        denominator = choquet_integral(g.power(args.p), handle)
        numerator = choquet_integral(result.values.power(args.p), handle)
        data["p"] = args.p
        data["lp_ratio"] = numerator / denominator if denominator > 0 else 0.0
    return data, True


def cmd_cz(args) -> Result:
    """Calderon-Zygmund stopping cubes with certificates"""
    window = window_config(args)
    f = input_function(args, window)
    handle = resolve_handle(capacity_source(args), f.config)
    cube = load_cube(args.cube) if args.cube else handle.lattice.root
    decomposition = cz_decompose(f, cube, args.height, handle)
    ok = decomposition.certificate_ok()
    data = decomposition.to_dict()
    data["verdict"] = verdict(ok)
    return data, ok


def cmd_pack(args) -> Result:
    """Greedy packing selection with its exhaustive certificate"""
    window = window_config(args)
    model = CubeFamilyModel.model_validate(read_document(args.family))
    config = resolve_config(model.config, window)
    family = model.build()
    spec = parse_gauge(read_document(capacity_source(args)))
    gauge = build_cube_gauge(spec, resolve_config(spec.config, config))
    selection = packing_select(family, gauge, constant=args.constant)
    certificate = check_packing_selection(selection, family, gauge)
    data = selection.to_dict()
    data["certificate"] = certificate
    passed = certificate.passed
    if args.function:
        handle = build_handle(spec, gauge.config)
        f = load_function(args.function, gauge.config)
        integral = packing_integral_check(selection, f.abs(), handle, constant=args.constant)
        data["integral_check"] = integral
        passed = passed and integral.passed
    data["verdict"] = verdict(passed)
    return data, passed


def cmd_verify(args) -> Result:
    config = window_config(args)
    handle = resolve_handle(capacity_source(args), config)
    if args.target == "equivalence":
        report = equivalence_check(handle, samples=args.samples, seed=args.seed)
        return report, report.verdict == "pass"
    if args.target == "packing":
        report = packing_condition_test(handle, trials=args.samples, seed=args.seed)
        return report, report.verdict == "pass"
    if args.target == "doubling":
        report = doubling_constants(handle, max_radius_cells=args.max_radius)
        return report, math.isfinite(report.D) and math.isfinite(report.D0)
    if args.target == "monotone":
        report = check_monotone(handle, trials=args.samples, seed=args.seed)
        return report, report.passed
    if args.target == "subadditive":
        report = check_subadditivity(handle, trials=args.samples, seed=args.seed)
        return report, report.passed
    if args.target == "triple":
        report = triple_cover_check(handle, verification_sets(handle.config, args.samples, args.seed))
        return report, report["verdict"] == "pass"
    report = check_strong_subadditivity(handle, trials=args.samples, seed=args.seed)
    return report, report.passed


def cmd_experiment(args) -> Result:
    config = window_config(args)
    if args.target == "differentiation":
        spec = parse_gauge(read_document(capacity_source(args)))
        gauge = build_gauge(spec)
        if gauge is None:
            raise ValueError("the differentiation experiment needs a power, log or side_table gauge")
        func, lipschitz = PROFILES[args.profile]
        levels = args.levels or list(range(-2, config.finest_level - 1, -1))
        report = differentiation_experiment(func, gauge, levels, dimension=config.dimension,
                                            lipschitz=lipschitz, family=args.family)
        return report, report.passed

    if args.target == "jn":
        f = load_function(args.function, config) if args.function else leading_zero_bits(config)
        handle = resolve_handle(capacity_source(args), f.config)
        root = load_cube(args.cube) if args.cube else None
        report = jn_experiment(f, handle, root=root, seed=args.seed)
        if args.csv:
            path = write_tail_csv(report, args.csv)
            logger.info(f"Tail table written to {path}")
        return report, report.passed

    functions = experiment_functions(args, config)
    handle = resolve_handle(capacity_source(args), functions[0][1].config)
    if args.target == "weak":
        report = weak_type_experiment(functions, handle, operator=args.op, detail=args.detail)
    elif args.target == "strong":
        report = strong_type_experiment(functions, handle, p=args.p if args.p is not None else 2.0)
    else:
        report = maximal_comparison_experiment(functions, handle)
    return report, report.passed


def cmd_config(args) -> Result:
    """Show the active configuration"""
    messages = validate_config()
    data = {name: value for name, value in describe_config()}
    data["messages"] = messages
    return data, not any(not m.startswith("WARNING") for m in messages)


COMMANDS = {
    "content": cmd_content,
    "integral": cmd_integral,
    "maximal": cmd_maximal,
    "cz": cmd_cz,
    "pack": cmd_pack,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
    "config": cmd_config,
}


# ----------------------------------------------------------------------------
# Output
# ----------------------------------------------------------------------------

def _summarize(value: Any) -> Any:
    if isinstance(value, list):
        return f"<{len(value)} items>"
    if isinstance(value, dict):
        return ", ".join(f"{k}={_summarize(v)}" for k, v in value.items())
    return value


def render(data: Dict[str, Any], fmt: str) -> str:
    if fmt == "table":
        rows = [[key, _summarize(value)] for key, value in data.items()]
        return tabulate(rows, headers=["Field", "Value"], tablefmt="grid")
    return json.dumps(data, separators=(",", ":"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Window as JSON text or path")
    common.add_argument("--format", choices=["json", "table"], default="json")
    common.add_argument("--timing", action="store_true", help="Include runtime_ms in reports")
    common.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)

    def capacity_options(sub):
        sub.add_argument("--capacity", help="Capacity/gauge JSON, path, '-' or shipped name")
        sub.add_argument("--gauge", help="Alias of --capacity")

    parser = argparse.ArgumentParser(prog=APP_NAME, description="Dyadic contents, Choquet integrals and capacitary maximal operators")
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    content_parser = subparsers.add_parser("content", parents=[common], help="Dyadic content of a set")
    capacity_options(content_parser)
    content_parser.add_argument("--set", required=True, help="Grid set JSON")
    content_parser.add_argument("--witness", action="store_true", help="Include the optimal cover")

    integral = subparsers.add_parser("integral", parents=[common], help="Choquet integral of a function")
    capacity_options(integral)
    integral.add_argument("--function", required=True)
    integral.add_argument("--region", help="Grid set JSON restricting the integral")
    integral.add_argument("--p", type=float)

    maximal = subparsers.add_parser("maximal", parents=[common], help="Maximal functions")
    capacity_options(maximal)
    maximal.add_argument("--function", required=True)
    maximal.add_argument("--op", choices=["dyadic", "ball", "ball-uncentered", "sharp"], default="dyadic")
    maximal.add_argument("--cube", help="Root cube JSON for the sharp operator")
    maximal.add_argument("--p", type=float)

    cz = subparsers.add_parser("cz", parents=[common], help="Calderon-Zygmund decomposition")
    capacity_options(cz)
    cz.add_argument("--function", required=True)
    cz.add_argument("--height", type=float, required=True)
    cz.add_argument("--cube", help="Cube JSON (default: root)")

    pack = subparsers.add_parser("pack", parents=[common], help="Packing selection")
    capacity_options(pack)
    pack.add_argument("--family", required=True, help="Cube family JSON")
    pack.add_argument("--constant", type=float, default=PACKING_CONSTANT)
    pack.add_argument("--function", help="Also check the packing integral inequality")

    verify = subparsers.add_parser("verify", parents=[common], help="Verify capacity properties")
    verify.add_argument("target", choices=["equivalence", "packing", "doubling", "monotone",
                                           "subadditive", "submodular", "triple"])
    capacity_options(verify)
    verify.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    verify.add_argument("--max-radius", dest="max_radius", type=int, help="Ball radius cap in cells")

    experiment = subparsers.add_parser("experiment", parents=[common], help="Run a verification experiment")
    experiment.add_argument("target", choices=["weak", "strong", "differentiation", "jn", "comparison"])
    capacity_options(experiment)
    experiment.add_argument("--function", help="Function JSON (default: shipped battery)")
    experiment.add_argument("--trials", type=int, default=20, help="Random battery members")
    experiment.add_argument("--op", choices=["dyadic", "ball", "ball-uncentered"], default="dyadic")
    experiment.add_argument("--detail", action="store_true", help="Include every threshold row")
    experiment.add_argument("--p", type=float)
    experiment.add_argument("--profile", choices=sorted(PROFILES), default="linear")
    experiment.add_argument("--levels", type=int, nargs="+")
    experiment.add_argument("--family", choices=["dyadic", "ball"], default="dyadic")
    experiment.add_argument("--cube", help="Root cube JSON for the John-Nirenberg run")
    experiment.add_argument("--csv", help="Write the tail table to this CSV path")

    subparsers.add_parser("config", parents=[common], help="Show configuration")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command != "config":
        for message in validate_config():
            logger.warning(f"Config: {message}")

    try:
        result, passed = COMMANDS[args.command](args)
    except json.JSONDecodeError as e:
        print(f"error: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}", file=sys.stderr)
        return EXIT_INPUT
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        print(f"error: invalid document at {location or '<root>'}: {first['msg']}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except TaskError as e:
        # a pooled trial rejected its input
        if not isinstance(e.__cause__, ValueError):
            raise
        print(f"error: {e.__cause__}", file=sys.stderr)
        return EXIT_INPUT

    data = dump_report(result, timing=args.timing) if hasattr(result, "model_dump") else clean_value(result)
    print(render(data, args.format))
    if not passed:
        logger.warning(f"{args.command}: verdict failed")
    return EXIT_OK if passed else EXIT_FAILED
