"""Process-wide switches read from the environment."""
import os

#: Set ``CUEPAIR_PURE_NUMPY=1`` to route every hot kernel through the numpy
#: implementations instead of the numba-compiled ones.
PURE_NUMPY = os.environ.get("CUEPAIR_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes", "on"}

#: Default directory for CLI outputs.
OUTPUT_DIR_VAR = "CUEPAIR_OUTPUT_DIR"


def default_output_dir():
    return os.environ.get(OUTPUT_DIR_VAR, ".")
