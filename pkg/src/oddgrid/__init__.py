"""Odd-one-out grid stimulus toolkit.

Generates grid images where exactly one cell differs from the rest in
color, size, rotation and/or position, assigns curriculum difficulty
scores, computes distance-aware rewards for predicted cells, and scores
model or human answers with the full metric suite.
"""

# Bumping this string invalidates pixel-level reproducibility guarantees:
# it pins the rasterization policy (supersampling factor, winding rule,
# compositing arithmetic) and the rng draw order used during generation.
GENERATOR_VERSION = "oddgrid-gen-1.0.0"

__version__ = "0.1.0"
