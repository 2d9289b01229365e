"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .beliefs import EmptySupport, ZeroLikelihood
from .config import EXAMPLES, ConfigError, RunConfig, example_config
from .evaluation import RolloutConfig, rollout, solve, sweep
from .finite_mdp import NonStochasticRow, build_grid
from .models import ModelError, validate_assumptions
from .solver import IterationCap, extend_policy, load_solution, solution_json

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

NUMERIC_ERRORS = (NonStochasticRow, IterationCap, ZeroLikelihood, EmptySupport, ArithmeticError,
                  RuntimeError)

log = logging.getLogger("pomdpquant")


class UsageError(Exception):
    pass


def _n_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    over = {}
    if getattr(args, "tolerance", None) is not None:
        over["solver__tolerance"] = args.tolerance
    if getattr(args, "seed", None) is not None:
        over["eval__seed"] = args.seed
    if getattr(args, "out", None) is not None:
        over["output__dir"] = args.out
    n = getattr(args, "n", None)
    if n is not None:
        if len(n) == 1 and args.command != "sweep":
            over["quantization__n"] = n[0]
        else:
            over["quantization__n_list"] = n
    return cfg.with_overrides(**over)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(path)


def cmd_solve(args) -> int:
    cfg = _load(args)
    model = cfg.model()
    s = solve(model, cfg.n, cfg.tolerance, cfg.max_iterations, cfg.nu, cfg.metric)
    out = _out_dir(cfg)
    bound = model.discount * s.values.residual / (1 - model.discount)
    _write(out / "solution.json", solution_json(
        s.values, s.policy, cfg.data, n=cfg.n, grid_size=s.grid.size, error_bound=bound,
        value_at_init=s.value_at_init, first_action=s.first_action) + "\n")
    _write(out / "model.json", s.gm.dumps(s.grid.records()) + "\n")
    print(f"n={cfg.n} grid={s.grid.size} iterations={s.values.iterations} "
          f"value_at_init={s.value_at_init!r}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    n_list = cfg.n_list
    res = sweep(cfg.model(), n_list, cfg.tolerance, cfg.max_iterations, cfg.nu, jobs=args.jobs)
    out = _out_dir(cfg)
    _write(out / "sweep.csv", res.to_csv(timing=cfg.timing))
    _write(out / "sweep.dat", res.to_gnuplot())
    for n, err in res.errors.items():
        print(f"n={n} failed: {err}", file=sys.stderr)
    return EXIT_NUMERIC if res.errors else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    try:
        text = Path(args.solution).read_text(encoding="utf-8")
        vf, policy, doc = load_solution(text)
    except OSError as exc:
        raise UsageError(f"cannot read solution {args.solution}: {exc.strerror}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"malformed solution {args.solution}: {exc}") from None
    saved = (doc.get("config") or {}).get("model")
    if saved is not None and saved != cfg.data["model"]:
        raise UsageError("solution was computed for a different model section")
    model = cfg.model()
    n = int(doc.get("n", cfg.n))
    grid = build_grid(model, n, cfg.metric)
    if policy.actions.size != grid.size:
        raise UsageError(f"solution has {policy.actions.size} policy entries, grid at n={n} has {grid.size}")
    rc = RolloutConfig(cfg.replications, cfg.seed, cfg.horizon)
    res = rollout(model, extend_policy(policy, grid), rc, doc.get("first_action"))
    _write(_out_dir(cfg) / "rollout.json", res.to_json() + "\n")
    print(f"mean={res.mean!r} stderr={res.stderr!r} truncation_bound={res.truncation_bound!r}")
    return EXIT_OK


def cmd_example(args) -> int:
    cfg = example_config(args.name)
    text = cfg.dumps()
    if args.out is None:
        sys.stdout.write(text)
    else:
        path = Path(args.out)
        if path.suffix != ".toml":
            path.mkdir(parents=True, exist_ok=True)
            path = path / f"{args.name}.toml"
        _write(path, text)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = validate_assumptions(cfg.model())
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pomdpquant", description="Quantized belief-MDP solver for POMDPs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=False, n=True, tol=True):
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
        if n:
            sp.add_argument("--n", type=_n_list, help="resolution, or comma-separated list for sweep")
        if tol:
            sp.add_argument("--tolerance", type=float, help="value iteration error bound")
        if seed:
            sp.add_argument("--seed", type=int, help="rollout seed (overrides eval.seed)")

    common(sub.add_parser("solve", help="solve the finite model at one resolution"))
    sp = sub.add_parser("sweep", help="solve over a list of resolutions")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp = sub.add_parser("simulate", help="Monte Carlo evaluation of a saved solution")
    common(sp, seed=True, tol=False, n=False)
    sp.add_argument("--solution", required=True, help="solution.json from solve")
    sp = sub.add_parser("example", help="write a built-in example configuration")
    sp.add_argument("name", choices=sorted(EXAMPLES))
    sp.add_argument("--out", help="file (.toml) or directory; stdout if omitted")
    sp = sub.add_parser("validate", help="check the model assumptions")
    common(sp, n=False, tol=False)
    return p


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate,
            "example": cmd_example, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return COMMANDS[args.command](args)
    except (ConfigError, UsageError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
