"""Command-line interface over JSON scenario files.

A scenario file describes one finite probability space, one partition, and
any number of named positions::

    {
      "states": [{"name": "up", "prob": 0.5}, {"name": "down", "prob": 0.5}],
      "atoms": [["up", "down"]],
      "positions": {"payoff": [0.0, 1.386294]}
    }

Commands: ``oce`` and ``dual`` (primal / dual certainty equivalents),
``gap`` (their difference, the built-in self check), ``entropic`` (closed
form for the relative-entropy generator), ``divergence`` (conditional
phi-divergence of a measure supplied as a positions-style weight vector)
and ``check`` (niveloid axiom sampling for a named operator).

Exit codes: 0 success, 2 input or usage errors, 3 a solver missed its
tolerance, 4 the duality gap exceeded its threshold.  Reports go to stdout
as an aligned table, JSON, or CSV; identical invocations produce
byte-identical output.  The ``CONDRISK_TOL`` environment variable replaces
the default ``--tol`` when the flag is not given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .divergence import (
    EquivalentConditionalMeasure,
    builtin_generator,
    cond_divergence,
)
from .dual import oce_dual
from .niveloid import (
    atom_min_operator,
    check_niveloid_axioms,
    entropic_operator,
    expectation_operator,
    iphi_operator,
    squared_expectation_operator,
)
from .oce import entropic_risk, oce_primal
from .probspace import FiniteProbabilitySpace, Partition, RandomVariable
from .scalar_opt import SolverError

__all__ = ["ScenarioError", "Scenario", "load_scenario", "main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESIDUAL = 3
EXIT_GAP = 4

DEFAULT_SOLVER_TOL = 1e-10
DEFAULT_GAP_TOL = 1e-6

COLUMNS = ("atom", "quantity", "value", "residual", "iterations", "note")

OPERATOR_NAMES = "expectation, entropic, min, sq-expectation, iphi:<generator>"


class ScenarioError(ValueError):
    """The scenario file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class Scenario:
    space: FiniteProbabilitySpace
    partition: Partition
    positions: dict
    raw: dict


def load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; raises ScenarioError with the
    offending field spelled out."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario file {path!r}: {e}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file {path!r} is not valid JSON: {e}") from None
    return parse_scenario(raw)


def parse_scenario(raw) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    states = raw.get("states")
    if not isinstance(states, list) or not states:
        raise ScenarioError("'states' must be a nonempty list of {name, prob} objects")
    names = []
    probs = []
    for pos, entry in enumerate(states):
        if not isinstance(entry, dict) or "name" not in entry or "prob" not in entry:
            raise ScenarioError(f"states[{pos}] must be an object with 'name' and 'prob'")
        name = entry["name"]
        prob = entry["prob"]
        if not isinstance(name, str) or not name:
            raise ScenarioError(f"states[{pos}].name must be a nonempty string")
        if not isinstance(prob, (int, float)) or isinstance(prob, bool):
            raise ScenarioError(f"states[{pos}].prob must be a number, got {prob!r}")
        names.append(name)
        probs.append(float(prob))
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ScenarioError(f"duplicate state names: {dupes}")
    try:
        space = FiniteProbabilitySpace(names, probs)
    except ValueError as e:
        raise ScenarioError(f"bad state probabilities: {e}") from None

    atoms_raw = raw.get("atoms")
    if not isinstance(atoms_raw, list) or not atoms_raw:
        raise ScenarioError("'atoms' must be a nonempty list of state-name lists")
    index = {n: i for i, n in enumerate(names)}
    atoms = []
    for pos, atom in enumerate(atoms_raw):
        if not isinstance(atom, list) or not atom:
            raise ScenarioError(f"atoms[{pos}] must be a nonempty list of state names")
        members = []
        for member in atom:
            if member not in index:
                raise ScenarioError(f"atoms[{pos}] names unknown state {member!r}")
            members.append(index[member])
        atoms.append(members)
    try:
        partition = Partition(atoms)
    except ValueError as e:
        raise ScenarioError(f"bad atoms: {e}") from None
    if partition.num_states != space.num_states:
        raise ScenarioError(
            f"bad atoms: they cover {partition.num_states} of {space.num_states} states; "
            "every state must appear in exactly one atom"
        )

    positions_raw = raw.get("positions", {})
    if not isinstance(positions_raw, dict):
        raise ScenarioError("'positions' must be an object mapping labels to value lists")
    positions = {}
    for label, values in positions_raw.items():
        if not isinstance(values, list) or len(values) != len(names):
            raise ScenarioError(
                f"position {label!r} must list one value per state ({len(names)} values)"
            )
        for j, v in enumerate(values):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ScenarioError(f"position {label!r} entry {j} must be a number, got {v!r}")
        try:
            positions[label] = RandomVariable([float(v) for v in values])
        except ValueError as e:
            raise ScenarioError(f"position {label!r}: {e}") from None
    return Scenario(space=space, partition=partition, positions=positions, raw=raw)


def _get_position(scenario: Scenario, label: str) -> RandomVariable:
    if label not in scenario.positions:
        known = ", ".join(sorted(scenario.positions)) or "(none)"
        raise ScenarioError(f"unknown position {label!r}; scenario defines: {known}")
    return scenario.positions[label]


def _atom_label(i: int) -> str:
    return f"A{i}"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(rows, fmt: str, echo, command: str) -> str:
    if fmt == "json":
        doc = {"command": command, "rows": rows}
        if echo is not None:
            doc["scenario"] = echo
        return json.dumps(doc, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in COLUMNS])
        return buf.getvalue()
    # aligned table
    cells = [[str(c) for c in COLUMNS]]
    for row in rows:
        cells.append([_fmt(row[c]) for c in COLUMNS])
    widths = [max(len(r[j]) for r in cells) for j in range(len(COLUMNS))]
    lines = ["  ".join(cell.ljust(widths[j]) for j, cell in enumerate(r)).rstrip() for r in cells]
    return "\n".join(lines) + "\n"


def _row(atom, quantity, value, residual, iterations, note=""):
    return {
        "atom": atom,
        "quantity": quantity,
        "value": float(value),
        "residual": float(residual),
        "iterations": int(iterations),
        "note": note,
    }


def _operator_from_name(name: str, scenario: Scenario):
    space, g = scenario.space, scenario.partition
    if name == "expectation":
        return expectation_operator(space, g)
    if name == "entropic":
        return entropic_operator(space, g)
    if name == "min":
        return atom_min_operator(space, g)
    if name == "sq-expectation":
        return squared_expectation_operator(space, g)
    if name.startswith("iphi:"):
        gen = builtin_generator(name.split(":", 1)[1])
        return iphi_operator(space, g, gen)
    raise ScenarioError(f"unknown operator {name!r}; valid operators are: {OPERATOR_NAMES}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condrisk",
        description="Conditional divergence risk measures on finite probability spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, position=True, divergence=True):
        p.add_argument("file", help="scenario JSON file")
        if position:
            p.add_argument("--position", required=True, help="position label from the scenario")
        if divergence:
            p.add_argument(
                "--divergence",
                default="kl",
                help="divergence generator: kl, chi2, or power:<alpha> (default kl)",
            )
        p.add_argument("--tol", type=float, default=None, help="tolerance override")
        p.add_argument(
            "--format", choices=("table", "json", "csv"), default="table", help="output format"
        )
        p.add_argument(
            "--echo-input",
            action="store_true",
            help="embed the input scenario in the report (JSON format only)",
        )

    common(sub.add_parser("oce", help="primal optimized certainty equivalent per atom"))
    common(sub.add_parser("dual", help="dual (penalized expectation) value per atom"))
    common(sub.add_parser("gap", help="duality gap self-check per atom"))
    common(sub.add_parser("entropic", help="entropic risk per atom"), divergence=False)
    p_div = sub.add_parser("divergence", help="conditional divergence of a measure per atom")
    common(p_div, position=False)
    p_div.add_argument(
        "--measure", required=True, help="positions-style label holding the measure weights"
    )
    p_check = sub.add_parser("check", help="sample niveloid axioms for an operator")
    common(p_check, position=False, divergence=False)
    p_check.add_argument(
        "--operator", required=True, help=f"operator to test: {OPERATOR_NAMES}"
    )
    p_check.add_argument("--samples", type=int, default=50, help="sample count (default 50)")
    p_check.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    return parser


def _resolve_tol(args, default: float) -> float:
    if args.tol is not None:
        tol = args.tol
    else:
        env = os.environ.get("CONDRISK_TOL")
        if env is not None:
            try:
                tol = float(env)
            except ValueError:
                raise ScenarioError(f"CONDRISK_TOL must be a number, got {env!r}") from None
        else:
            tol = default
    if not (tol > 0.0) or not np.isfinite(tol):
        raise ScenarioError(f"tolerance must be a positive finite number, got {tol!r}")
    return float(tol)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK

    try:
        if args.echo_input and args.format != "json":
            raise ScenarioError("--echo-input requires --format json")
        scenario = load_scenario(args.file)
        rows, code = _dispatch(args, scenario)
    except (ScenarioError, ValueError) as e:
        print(f"condrisk: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SolverError as e:
        print(f"condrisk: solver error: {e}", file=sys.stderr)
        return EXIT_RESIDUAL

    echo = scenario.raw if args.echo_input else None
    sys.stdout.write(_emit(rows, args.format, echo, args.command))
    return code


def _dispatch(args, scenario: Scenario):
    space, g = scenario.space, scenario.partition
    command = args.command

    if command == "oce":
        gen = builtin_generator(args.divergence)
        x = _get_position(scenario, args.position)
        tol = _resolve_tol(args, DEFAULT_SOLVER_TOL)
        sol = oce_primal(space, g, gen, x, tol=tol)
        rows = [
            _row(
                _atom_label(i),
                f"oce:{gen.name}",
                sol.value.values[i],
                sol.residuals[i],
                sol.iterations[i],
                note=f"optimal_a={float(sol.optimal_a.values[i])!r}",
            )
            for i in range(g.num_atoms)
        ]
        code = EXIT_RESIDUAL if np.any(sol.residuals > tol) else EXIT_OK
        return rows, code

    if command == "dual":
        gen = builtin_generator(args.divergence)
        x = _get_position(scenario, args.position)
        tol = _resolve_tol(args, DEFAULT_SOLVER_TOL)
        sol = oce_dual(space, g, gen, x, tol=tol)
        rows = [
            _row(
                _atom_label(i),
                f"dual:{gen.name}",
                sol.value.values[i],
                sol.residuals[i],
                sol.iterations[i],
                note=f"multiplier={float(sol.multiplier.values[i])!r}",
            )
            for i in range(g.num_atoms)
        ]
        code = EXIT_RESIDUAL if np.any(sol.residuals > tol) else EXIT_OK
        return rows, code

    if command == "gap":
        gen = builtin_generator(args.divergence)
        x = _get_position(scenario, args.position)
        threshold = _resolve_tol(args, DEFAULT_GAP_TOL)
        solver_tol = min(DEFAULT_SOLVER_TOL, threshold / 10.0)
        primal = oce_primal(space, g, gen, x, tol=solver_tol)
        dual = oce_dual(space, g, gen, x, tol=solver_tol)
        gaps = np.abs(primal.value.values - dual.value.values)
        rows = [
            _row(
                _atom_label(i),
                f"gap:{gen.name}",
                gaps[i],
                max(primal.residuals[i], dual.residuals[i]),
                primal.iterations[i] + dual.iterations[i],
                note=f"threshold={threshold!r}",
            )
            for i in range(g.num_atoms)
        ]
        code = EXIT_GAP if np.any(gaps > threshold) else EXIT_OK
        return rows, code

    if command == "entropic":
        x = _get_position(scenario, args.position)
        value = entropic_risk(space, g, x)
        rows = [
            _row(_atom_label(i), "entropic", value.values[i], 0.0, 0)
            for i in range(g.num_atoms)
        ]
        return rows, EXIT_OK

    if command == "divergence":
        gen = builtin_generator(args.divergence)
        weights = _get_position_like_measure(scenario, args.measure)
        value = cond_divergence(space, g, gen, weights)
        rows = [
            _row(_atom_label(i), f"divergence:{gen.name}", value.values[i], 0.0, 0)
            for i in range(g.num_atoms)
        ]
        return rows, EXIT_OK

    if command == "check":
        op = _operator_from_name(args.operator, scenario)
        if args.samples < 1:
            raise ScenarioError(f"--samples must be at least 1, got {args.samples}")
        report = check_niveloid_axioms(space, g, op, samples=args.samples, seed=args.seed)
        rows = []
        for c in report.checks:
            note = "pass" if c.passed else "fail"
            row = _row("*", f"axiom:{c.name}", c.max_violation, 0.0, args.samples, note=note)
            if c.counterexample is not None:
                row["counterexample"] = c.counterexample
            rows.append(row)
        return rows, EXIT_OK

    raise ScenarioError(f"unknown command {command!r}")


def _get_position_like_measure(scenario: Scenario, label: str) -> EquivalentConditionalMeasure:
    rv = _get_position(scenario, label)
    try:
        return EquivalentConditionalMeasure(rv.values)
    except ValueError as e:
        raise ScenarioError(f"measure {label!r}: {e}") from None


if __name__ == "__main__":
    sys.exit(main())
