import logging

from lib.errors import ManifestError, NotBNormal, NotInterior, PositivityViolated, WeightInconsistent
from lib.weights import (
    Weight,
    boundary_holonomy,
    check_l_lambda_cocycle,
    check_weight,
    l_lambda_transitions,
    pullback_weight,
    pushforward_weight,
    weight_space,
)

from .common import Outcome, Settings, command

logger = logging.getLogger(__name__)


def _weight_entry(manifest, spec) -> dict:
    atlas = manifest.atlas
    try:
        weight = manifest.weight(spec)
        check_weight(atlas, weight)
        transitions = l_lambda_transitions(atlas, weight)
        defect = check_l_lambda_cocycle(atlas, weight)
    except WeightInconsistent as err:
        return {"id": spec.id, "consistent": False, "error": err.detail()}
    if weight.notes:
        for note in weight.notes:
            logger.warning("weight %s: %s", spec.id, note)
    return {
        "id": spec.id,
        "consistent": True,
        "local": weight.as_dict(),
        "notes": list(weight.notes),
        "transitions": [t.as_dict() for t in transitions],
        "cocycle_defect": defect,
    }


def _mapped(manifest, spec, operation) -> dict:
    entry = {"map": spec.map, "weight": dict(spec.weight)}
    try:
        entry["result"] = operation(manifest.map(spec.map), Weight.of(spec.weight)).as_dict()
    except (WeightInconsistent, NotInterior, NotBNormal, PositivityViolated) as err:
        entry["error"] = err.detail()
    return entry


@command("weights", help="Boundary holonomy, weight space and the line bundles of weights.")
def router(manifest, settings: Settings) -> Outcome:
    atlas = manifest.atlas
    if atlas is None and not (manifest.weight_pullbacks or manifest.weight_pushforwards):
        raise ManifestError("weights need an atlas or a model space", manifest=manifest.name)
    results = {}
    if atlas is not None:
        results["holonomy"] = boundary_holonomy(atlas).as_dict()
        results["weight_space"] = weight_space(atlas).as_dict()
        results["weights"] = [_weight_entry(manifest, spec) for spec in manifest.weights]
    elif manifest.weights:
        raise ManifestError("weights need an atlas or a model space", manifest=manifest.name)
    results["pullbacks"] = [_mapped(manifest, s, pullback_weight) for s in manifest.weight_pullbacks]
    results["pushforwards"] = [_mapped(manifest, s, pushforward_weight) for s in manifest.weight_pushforwards]
    return Outcome(results)
