import itertools
from typing import Dict, List

from lib.atlas import (
    Atlas,
    boundary_atlas,
    boundary_components,
    boundary_counts,
    check_transitions,
    compose,
    corner_at,
    corner_counts,
    corner_map,
    faces_embedded,
    product_atlas,
)
from lib.errors import ManifestError

from .common import Outcome, Settings, command


def _local_corners(chart):
    for size in range(chart.k + 1):
        for faces in itertools.combinations(chart.boundary, size):
            yield corner_at(chart, faces)


def _counts(atlas: Atlas) -> dict:
    return {
        "corner_counts": corner_counts(atlas),
        "boundary_counts": {k: boundary_counts(atlas, k) for k in range(atlas.dimension + 1)},
    }


def _convolution(left: Dict[int, int], right: Dict[int, int]) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for i, a in left.items():
        for j, b in right.items():
            out[i + j] = out.get(i + j, 0) + a * b
    return out


@command("corners", help="Corner strata of atlases and the corner maps of charted maps.")
def router(manifest, settings: Settings) -> Outcome:
    if not (manifest.maps or manifest.atlas or manifest.products):
        raise ManifestError("no maps or atlas to analyse", manifest=manifest.name)
    results: Dict[str, object] = {}
    if manifest.maps:
        results["maps"] = []
        for spec in manifest.maps:
            f = manifest.map(spec.id)
            images = []
            for gamma in _local_corners(f.source):
                image = corner_map(f, gamma)
                images.append({"source": gamma.as_dict(), "depth": gamma.depth, "image": image.as_dict(), "image_depth": image.depth})
            results["maps"].append({"id": spec.id, "corners": images})
    if manifest.compositions:
        checks: List[dict] = []
        for first, second in manifest.compositions:
            f, g = manifest.map(first), manifest.map(second)
            gf = compose(f, g)
            agree = all(
                corner_map(gf, gamma).faces == corner_map(g, corner_map(f, gamma)).faces
                for gamma in _local_corners(f.source)
            )
            checks.append({"first": first, "second": second, "functorial": agree})
        results["compositions"] = checks
    atlas = manifest.atlas
    if atlas is not None:
        boundary = boundary_atlas(atlas)
        results["atlas"] = {
            "name": atlas.name,
            "transitions": check_transitions(atlas).as_dict(),
            "faces_embedded": faces_embedded(atlas),
            "boundary_components": [c.as_dict() for c in boundary_components(atlas)],
            "boundary_charts": [c.id for c in boundary.charts],
            **_counts(atlas),
        }
    if manifest.products:
        results["products"] = []
        for spec in manifest.products:
            left, right = spec.left.build(), spec.right.build()
            product = product_atlas(left, right)
            counts = _counts(product)
            predicted = _convolution(corner_counts(left), corner_counts(right))
            results["products"].append(
                {
                    "name": product.name,
                    **counts,
                    "convolution": predicted,
                    "convolution_holds": predicted == counts["corner_counts"],
                }
            )
    return Outcome(results)
