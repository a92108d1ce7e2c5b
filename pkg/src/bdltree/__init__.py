"""Batch-dynamic k-d trees.

A BDL-tree keeps a small heap-layout buffer tree plus a log-structured set of
static k-d trees stored in van Emde Boas order.  Batches of insertions cascade
through the static trees like a binary counter; batches of deletions tombstone
points and rebuild any tree that falls below half of its capacity.  Two
baselines (rebuild-always and never-rebuild) share the same interface.
"""

import os
import warnings

import numba

# The TBB shipped in some images is too old for numba; go straight to OpenMP so
# parallel kernels may be entered from several Python threads at once.
if "NUMBA_THREADING_LAYER" not in os.environ:
    numba.config.THREADING_LAYER = "omp"
warnings.filterwarnings("ignore", message=".*TBB.*", category=numba.NumbaWarning)

from .geometry import BoundingBox, Point, Relation, box_sphere_relation, squared_distance  # noqa: E402
from .knnbuf import KnnBuffer, KnnBuffers, KnnResult  # noqa: E402
from .bloom import BloomFilter  # noqa: E402
from .static_tree import LEAF_CAP, Heuristic, StaticTree, build_heap, build_veb  # noqa: E402
from .bdl_tree import BdlStats, BdlTree  # noqa: E402
from .baselines import B1Tree, B2Tree  # noqa: E402
from .parprim import get_num_threads, set_num_threads  # noqa: E402

__all__ = [
    "B1Tree",
    "B2Tree",
    "BdlStats",
    "BdlTree",
    "BloomFilter",
    "BoundingBox",
    "Heuristic",
    "KnnBuffer",
    "KnnBuffers",
    "KnnResult",
    "LEAF_CAP",
    "Point",
    "Relation",
    "StaticTree",
    "box_sphere_relation",
    "build_heap",
    "build_veb",
    "get_num_threads",
    "set_num_threads",
    "squared_distance",
]

__version__ = "0.1.0"
