"""Journal maps from aggregated citation data, with overlays and Rao-Stirling diversity."""

import os

# the bundled TBB is too old for numba, skip straight to the working layers
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp workqueue tbb")

__version__ = "0.1.0"
