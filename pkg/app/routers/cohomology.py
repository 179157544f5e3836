from lib import env_loader
from lib.elliptic import bdr_interval, predicted_quotient_cohomology, twisted_circle_cohomology
from lib.errors import ManifestError
from lib.weights import boundary_holonomy
from models import quotient_cylinder

from .common import Outcome, Settings, command


@command("cohomology", help="b-de Rham cohomology of the interval, twisted circles and the quotient cylinders.")
def router(manifest, settings: Settings) -> Outcome:
    spec = manifest.cohomology
    if spec is None:
        raise ManifestError("no cohomology section", manifest=manifest.name)
    results, predictions = {}, []
    if spec.interval:
        results["interval"] = list(bdr_interval(env_loader.BCALC_GRID))
    results["circles"] = [twisted_circle_cohomology(h).as_dict() for h in spec.holonomies]
    results["quotients"] = []
    for alpha in spec.alphas:
        holonomy = boundary_holonomy(quotient_cylinder(alpha))["x=0"].holonomy
        quotient = predicted_quotient_cohomology(holonomy)
        results["quotients"].append({**quotient.as_dict(), "alpha": alpha, "boundary_holonomy": holonomy})
        predictions.append(f"quotients.alpha={alpha}")
    return Outcome(results, predictions)
