"""Sketch-guided scene image pipeline.

Object-level generation from box-cropped sketches, identity capture via
masked-noise-prediction training, and scene-level synthesis with a
two-phase blended sampling loop.
"""

__version__ = "0.1.0"
