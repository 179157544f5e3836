from .classify import router as ClassifyRouter
from .corners import router as CornersRouter
from .weights import router as WeightsRouter
from .glue import router as GlueRouter
from .phg import router as PhgRouter
from .elliptic import router as EllipticRouter
from .cohomology import router as CohomologyRouter
