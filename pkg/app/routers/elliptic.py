import asyncio
import logging
from typing import List

from lib import env_loader
from lib.elliptic import (
    INCLUSION_TOLERANCE,
    WeightSweepReport,
    excluded_weights,
    formal_adjoint,
    indicial_roots,
    kernel_inclusion,
    require_elliptic,
    solve_weighted,
    weight_sweep,
)
from lib.errors import DomainError, ManifestError, NotElliptic, NotFredholm

from .common import Outcome, Settings, command

logger = logging.getLogger(__name__)


def _operator_entry(P) -> dict:
    entry = P.as_dict()
    try:
        require_elliptic(P, env_loader.BCALC_ORDER)
    except (NotElliptic, DomainError) as err:
        entry.update({"elliptic": False, "error": err.detail()})
        return entry
    entry.update(
        {
            "elliptic": True,
            "indicial_roots": {str(face): indicial_roots(P, face) for face in (0, 1)},
            "excluded_weights": excluded_weights(P),
            "adjoint": formal_adjoint(P).as_dict(),
        }
    )
    return entry


def _duality(P, report: WeightSweepReport, grid, trunc) -> dict:
    adjoint = formal_adjoint(P)
    failures: List[float] = []
    for point in report.fredholm_points:
        dual = solve_weighted(adjoint, (-point.lam, -point.lam), grid, trunc)
        if dual.index != -point.index:
            failures.append(point.lam)
    if failures:
        logger.warning("index of %s is not antisymmetric under duality at %s", P.id, failures)
    return {"holds": not failures, "failures": failures}


def _monotonicity(P, report: WeightSweepReport, grid, trunc) -> dict:
    points = report.fredholm_points
    worst, dims_ok = 0.0, True
    for low, high in zip(points, points[1:]):
        dims_ok = dims_ok and high.ker <= low.ker
        worst = max(worst, kernel_inclusion(P, high.lam, low.lam, grid, trunc))
    holds = dims_ok and worst < INCLUSION_TOLERANCE
    if not holds:
        logger.warning("kernel of %s does not shrink monotonically (residual %.3g)", P.id, worst)
    return {"holds": holds, "dims_monotone": dims_ok, "worst_residual": worst}


def _sweep_entry(manifest, spec, n: int, settings: Settings) -> dict:
    P = manifest.operator(spec.operator)
    grid, trunc = env_loader.BCALC_GRID, settings.flags.get("trunc")
    report = asyncio.run(weight_sweep(P, spec.lo, spec.hi, spec.steps, grid, trunc))
    entry = report.as_dict()
    path = settings.csv_path(f"sweep_{spec.operator}_{n}")
    if path is not None:
        entry["csv"] = str(report.to_csv(path))
    if spec.duality:
        entry["duality"] = _duality(P, report, grid, trunc)
    if spec.monotonicity:
        entry["monotonicity"] = _monotonicity(P, report, grid, trunc)
    return entry


@command("elliptic", help="Indicial data, weighted Fredholm solves and weight sweeps of b-operators.")
def router(manifest, settings: Settings) -> Outcome:
    if not manifest.operators:
        raise ManifestError("no operators", manifest=manifest.name)
    results = {"operators": [_operator_entry(spec.operator) for spec in manifest.operators], "solves": []}
    trunc = settings.flags.get("trunc")
    for spec in manifest.solves:
        P = manifest.operator(spec.operator)
        try:
            results["solves"].append(solve_weighted(P, spec.weights, env_loader.BCALC_GRID, trunc).as_dict())
        except NotFredholm as err:
            results["solves"].append({"operator": P.id, "weights": list(spec.weights), "error": err.detail()})
    results["sweeps"] = [_sweep_entry(manifest, spec, n, settings) for n, spec in enumerate(manifest.sweeps)]
    return Outcome(results)
