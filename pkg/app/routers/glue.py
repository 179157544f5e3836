import logging

from lib.errors import ManifestError, NotStronglySmooth
from lib.glue import smoothness_probe, transform_map

from .common import Outcome, Settings, command

logger = logging.getLogger(__name__)


def _transform(manifest, spec):
    """GlueTransform of the entry's map, or the refusal detail when a strict entry is not strongly smooth"""
    try:
        return transform_map(manifest.map(spec.map), strongly_smooth_required=spec.strict), None
    except NotStronglySmooth as err:
        return None, err.detail()


@command("glue", help="Transform maps through the gluing profile and probe smoothness at the boundary.")
def router(manifest, settings: Settings) -> Outcome:
    if not (manifest.probes or manifest.evaluations):
        raise ManifestError("no probes or evaluations", manifest=manifest.name)
    probes = []
    for n, spec in enumerate(manifest.probes):
        transform, refused = _transform(manifest, spec)
        if refused is not None:
            probes.append({"map": spec.map, "point": spec.point, "error": refused})
            continue
        report = smoothness_probe(transform, spec.point, spec.order)
        entry = {"map": spec.map, "strongly_smooth": transform.strongly_smooth, **report.as_dict()}
        path = settings.csv_path(f"probe_{spec.map}_{n}")
        if path is not None:
            entry["csv"] = str(report.to_csv(path))
        probes.append(entry)

    evaluations = []
    for spec in manifest.evaluations:
        transform, refused = _transform(manifest, spec)
        if refused is not None:
            evaluations.append({"map": spec.map, "error": refused})
            continue
        evaluations.append({"map": spec.map, "points": spec.points, "values": transform.evaluate_many(spec.points)})
    return Outcome({"probes": probes, "evaluations": evaluations})
