import logging
from fractions import Fraction

from lib.atlas import exponent_matrix
from lib.errors import FactorizationFailure, ManifestError, NotBNormal, NotInterior, PositivityViolated
from lib.phg import (
    ORACLE_TOLERANCE,
    IndexSet,
    best_weight,
    phg_to_weight_bound,
    pullback_index,
    pushforward_index,
    pushforward_oracle,
)

from .common import Outcome, Settings, command

logger = logging.getLogger(__name__)

# (x, y) -> xy with both faces landing on the single target face
_PRODUCT_MATRIX = ((Fraction(1),), (Fraction(1),))


def _mapped(manifest, spec, operation) -> dict:
    entry = {"map": spec.map, "sets": spec.sets}
    sets = [manifest.index_set(s) for s in spec.sets]
    try:
        matrix = exponent_matrix(manifest.map(spec.map))
        expected = len(matrix) if operation is pushforward_index else (len(matrix[0]) if matrix else 0)
        if len(sets) != expected:
            raise ManifestError(f"map {spec.map} needs {expected} index sets, got {len(sets)}")
        alpha_max = min((s.alpha_max for s in sets), default=Fraction(10))
        entry["result"] = [s.as_json() for s in operation(matrix, sets, alpha_max)]
    except (NotBNormal, PositivityViolated, NotInterior, FactorizationFailure) as err:
        entry["error"] = err.detail()
    return entry


def _oracle_entry(spec) -> dict:
    fit = pushforward_oracle(spec.alpha, spec.beta)
    predicted = pushforward_index(_PRODUCT_MATRIX, [IndexSet.of([(spec.alpha, 0)]), IndexSet.of([(spec.beta, 0)])])[0]
    alpha, b = predicted.leading()
    agrees = abs(fit.exponent - float(alpha)) < ORACLE_TOLERANCE and fit.has_log == (b > 0)
    if not agrees:
        logger.warning("oracle for (%s, %s) disagrees with the extended union", spec.alpha, spec.beta)
    return {**fit.as_dict(), "predicted": predicted.as_json(), "agrees": agrees}


@command("phg", help="Index set calculus: pullback, pushforward, weight bounds and the pushforward oracle.")
def router(manifest, settings: Settings) -> Outcome:
    if not (manifest.index_sets or manifest.oracles):
        raise ManifestError("no index sets or oracles", manifest=manifest.name)
    results = {
        "index_sets": {s.id: s.build().as_json() for s in manifest.index_sets},
        "pullbacks": [_mapped(manifest, s, pullback_index) for s in manifest.pullbacks],
        "pushforwards": [_mapped(manifest, s, pushforward_index) for s in manifest.pushforwards],
        "bounds": [],
        "oracles": [_oracle_entry(s) for s in manifest.oracles],
    }
    for spec in manifest.bounds:
        index_set = manifest.index_set(spec.set)
        weight, attained = best_weight(index_set)
        results["bounds"].append(
            {
                "set": spec.set,
                "weight": spec.weight,
                "bounded": phg_to_weight_bound(index_set, spec.weight),
                "best_weight": weight,
                "attained": attained,
            }
        )
    return Outcome(results)
