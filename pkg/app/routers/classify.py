import logging

from lib.atlas import classify_map, factor_components
from lib.btangent import b_jacobian, b_lie_bracket, is_b_submersion
from lib.errors import FactorizationFailure, ManifestError, NotInterior
from lib.expr import classify_function

from .common import Outcome, Settings, command

logger = logging.getLogger(__name__)


def _function_entry(spec) -> dict:
    report = classify_function(spec.bexpr)
    entry = {
        "id": spec.id,
        "expr": spec.bexpr.to_sexpr(),
        "verdict": report.verdict.value,
        "log_decay": report.log_decay,
        "witnesses": [w.as_dict() for w in report.witnesses if not (w.continuous and w.decays)],
    }
    if spec.expected is not None:
        entry["expected"] = spec.expected
        entry["matches"] = spec.expected == report.verdict.value
    return entry


def _map_entry(manifest, spec) -> dict:
    f = manifest.map(spec.id)
    entry = {"id": spec.id, "components": f.to_sexprs()}
    try:
        flags = classify_map(f, manifest.inverse_of(spec.id))
    except FactorizationFailure as err:
        entry.update({"smooth": False, "error": err.detail()})
        return entry
    entry.update(flags.as_dict())
    entry["factors"] = [c.as_dict() for c in factor_components(f)]
    if not flags.interior:
        entry.update({"b_submersion": False, "b_fibration": False})
        return entry
    try:
        entry["b_jacobian"] = b_jacobian(f).as_lists()
        rank = is_b_submersion(f)
    except (FactorizationFailure, NotInterior) as err:
        entry["error"] = err.detail()
        return entry
    entry["b_submersion"] = rank.as_dict()
    entry["b_fibration"] = flags.b_normal and rank.surjective
    return entry


@command("classify", help="Smoothness verdicts for functions, flags and b-Jacobians for maps.")
def router(manifest, settings: Settings) -> Outcome:
    if not (manifest.functions or manifest.maps or manifest.vector_fields):
        raise ManifestError("no functions", manifest=manifest.name)
    results = {
        "functions": [_function_entry(spec) for spec in manifest.functions],
        "maps": [_map_entry(manifest, spec) for spec in manifest.maps],
    }
    if manifest.vector_fields:
        results["vector_fields"] = [
            {**manifest.vector_field(s.id).as_dict(), "id": s.id, "not_a_smooth": manifest.vector_field(s.id).certify()}
            for s in manifest.vector_fields
        ]
    if manifest.brackets:
        results["brackets"] = []
        for a, b in manifest.brackets:
            bracket = b_lie_bracket(manifest.vector_field(a), manifest.vector_field(b))
            results["brackets"].append({"pair": [a, b], **bracket.as_dict(), "zero": bracket.is_zero()})
    mismatched = [e["id"] for e in results["functions"] if e.get("matches") is False]
    if mismatched:
        logger.warning("verdicts differ from the expected ones for %s", ", ".join(mismatched))
    return Outcome(results)
