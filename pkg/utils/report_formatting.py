import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import networkx as nx

from config import OUTPUT_DIR
from services.dbn import StudyRow
from services.dscm import CommutationReport, Dscm, StructuralEquation
from services.integrator import SimulationResult
from services.ode_model import edge_list
from services.stability import StabilityReport, StructuralStabilityReport
from services.trajectory import TrajectoryBundle
from utils.signal_literal import format_signal

PathLike = Union[str, Path]


def output_path(out: Optional[PathLike], name: str, suffix: str) -> Path:
    """Explicit --out path, or <OUTPUT_DIR>/<name><suffix>."""
    if out:
        return Path(out)
    return Path(OUTPUT_DIR) / f"{name}{suffix}"


def _finite(value: float) -> Optional[float]:
    """JSON has no infinities; unknown or unbounded quantities become null."""
    return float(value) if math.isfinite(value) else None


def format_edges(graph: nx.DiGraph) -> str:
    """
    Edge list as `parent->child` tokens in sorted order.

    Args:
        graph: Causal graph with integer nodes

    Returns:
        e.g. "1->1 1->2 2->1 2->2"
    """
    return " ".join(f"{parent}->{child}" for parent, child in edge_list(graph))


def bundle_to_document(bundle: TrajectoryBundle) -> Dict[str, str]:
    return {str(label): format_signal(signal) for label, signal in sorted(bundle.items())}


def format_bundle(bundle: TrajectoryBundle) -> str:
    return "\n".join(f"X{label} = {format_signal(signal)}" for label, signal in sorted(bundle.items()))


def _equation_document(equation: StructuralEquation) -> Dict[str, Any]:
    return {
        "kind": "structural_equation",
        "mass": equation.mass,
        "damping": equation.damping,
        "stiffness": equation.stiffness,
        "parents": {str(p): w for p, w in equation.parent_weights.items()},
        "constant": equation.constant,
        "forcing": format_signal(equation.forcing),
        "dc_offset": equation.dc_offset,
        "dc_gains": {str(p): equation.dc_gain(p) for p in equation.parents},
    }


def dscm_to_document(dscm: Dscm) -> Dict[str, Any]:
    """Serializable DSCM: coefficient records for equations, literals for clamps."""
    variables: Dict[str, Any] = {}
    for label, entry in dscm.entries.items():
        if isinstance(entry, StructuralEquation):
            variables[str(label)] = _equation_document(entry)
        else:
            variables[str(label)] = {"kind": "clamp", "signal": format_signal(entry.signal)}
    return {"variables": variables}


def format_dscm(dscm: Dscm) -> str:
    lines = []
    for label, entry in dscm.entries.items():
        if isinstance(entry, StructuralEquation):
            parents = ", ".join(f"X{p}" for p in entry.parents) or "-"
            terms = [f"m={entry.mass:g}", f"b={entry.damping:g}", f"a={entry.stiffness:g}"]
            terms.extend(f"w{label},{p}={w:g}" for p, w in entry.parent_weights.items())
            terms.append(f"c={entry.constant:g}")
            if not entry.forcing.is_constant or entry.forcing.offset:
                terms.append(f"forcing={format_signal(entry.forcing)}")
            lines.append(f"X{label} := F{label}({parents})  " + " ".join(terms))
        else:
            lines.append(f"X{label} := {format_signal(entry.signal)}  (clamped)")
    return "\n".join(lines)


def stability_report_to_document(report: StabilityReport) -> Dict[str, Any]:
    return {
        "verdict": report.verdict.value,
        "trajectory": bundle_to_document(report.trajectory) if report.trajectory else None,
        "discrepancy": _finite(report.discrepancy),
        "residual": _finite(report.residual),
        "horizon": report.horizon,
        "decay_rate": _finite(report.decay_rate),
        "horizon_adequate": report.horizon_adequate,
        "message": report.message,
    }


def format_stability_report(report: StabilityReport) -> str:
    lines = [
        f"verdict      {report.verdict.value}",
        f"discrepancy  {report.discrepancy:.3e}",
        f"residual     {report.residual:.3e}",
        f"horizon      {report.horizon:g}{'' if report.horizon_adequate else ' (too short)'}",
        f"decay rate   {report.decay_rate:.4g}",
    ]
    if report.message:
        lines.append(f"note         {report.message}")
    if report.trajectory:
        lines.append(format_bundle(report.trajectory))
    return "\n".join(lines)


def structural_report_to_document(report: StructuralStabilityReport) -> Dict[str, Any]:
    return {
        "passed": report.passed,
        "trials": [
            {
                "label": outcome.label,
                "trial": outcome.trial,
                "intervention": bundle_to_document(outcome.intervention),
                "verdict": outcome.report.verdict.value,
                "in_family": outcome.in_family,
                "discrepancy": _finite(outcome.report.discrepancy),
                "residual": _finite(outcome.report.residual),
            }
            for outcome in report.outcomes
        ],
    }


def format_structural_report(report: StructuralStabilityReport) -> str:
    header = f"{'var':>4} {'trial':>5} {'verdict':<10} {'in family':<9} {'discrepancy':>12} {'residual':>12}"
    lines = [header, "-" * len(header)]
    for o in report.outcomes:
        lines.append(
            f"{'X' + str(o.label):>4} {o.trial:>5} {o.report.verdict.value:<10} "
            f"{'yes' if o.in_family else 'no':<9} {o.report.discrepancy:>12.3e} "
            f"{o.report.residual:>12.3e}"
        )
    lines.append("PASS" if report.passed else "FAIL")
    return "\n".join(lines)


def commutation_report_to_document(report: CommutationReport) -> Dict[str, Any]:
    return {
        "passed": report.passed,
        "coefficient_discrepancy": _finite(report.coefficient_discrepancy),
        "solution_discrepancy": _finite(report.solution_discrepancy),
        "coefficient_tol": report.coefficient_tol,
        "solution_tol": report.solution_tol,
        "derive_then_intervene": dscm_to_document(report.path_a),
        "intervene_then_derive": dscm_to_document(report.path_b),
        "solution_a": bundle_to_document(report.solution_a),
        "solution_b": bundle_to_document(report.solution_b),
        "simulated": bundle_to_document(report.simulated),
    }


def format_commutation_report(report: CommutationReport) -> str:
    lines = [
        f"coefficient discrepancy  {report.coefficient_discrepancy:.3e} (tol {report.coefficient_tol:g})",
        f"solution vs simulation   {report.solution_discrepancy:.3e} (tol {report.solution_tol:g})",
        "derive then intervene:",
        format_bundle(report.solution_a),
        "simulated:",
        format_bundle(report.simulated),
        "PASS" if report.passed else "FAIL",
    ]
    return "\n".join(lines)


def study_to_document(rows: Sequence[StudyRow], order: Optional[float]) -> Dict[str, Any]:
    return {
        "rows": [
            {"delta": r.delta, "steps": r.steps, "sup_error": _finite(r.sup_error), "error": r.error}
            for r in rows
        ],
        "observed_order": order,
    }


def format_study(rows: Sequence[StudyRow], order: Optional[float]) -> str:
    header = f"{'delta':>12} {'steps':>8} {'sup_error':>12}"
    lines = [header, "-" * len(header)]
    for r in rows:
        error = "diverged" if r.error else f"{r.sup_error:.4e}"
        lines.append(f"{r.delta:>12g} {r.steps:>8d} {error:>12}")
    if order is not None:
        lines.append(f"observed order {order:.3f}")
    return "\n".join(lines)


def write_json(document: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return path


def write_trajectory_csv(result: SimulationResult, path: PathLike) -> Path:
    """
    Write `t,x1,...,xD`, one row per sample. Values use repr so every
    double reads back exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = result.labels
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t"] + [f"x{label}" for label in labels])
        columns: List = [result.times] + [result.positions[label] for label in labels]
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])
    return path


def write_study_csv(rows: Sequence[StudyRow], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["delta", "steps", "sup_error"])
        for r in rows:
            writer.writerow([repr(r.delta), r.steps, repr(r.sup_error)])
    return path
