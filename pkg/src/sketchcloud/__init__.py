"""Sketch- and text-conditioned staged diffusion for colored point clouds.

Subpackages and modules:

- ``data``: procedural shapes, edge sketches, templated prompts, file IO
- ``encoder``: capsule-attention sketch encoder with ISS/ISC diagnostics
- ``textenc``: closed-vocabulary text encoder
- ``fusion``: sketch-text fusion into geometry/appearance conditions
- ``diffusion``: schedules, noise nets, staged training, sampling
- ``metrics``: Chamfer/EMD point-set distances, MMD/COV set metrics
- ``segmentation``: color-diffusion part segmentation and mIoU
- ``probe``: linear probing of condition embeddings
- ``cli``: the ``sketchcloud`` command
"""

__version__ = "0.1.0"
