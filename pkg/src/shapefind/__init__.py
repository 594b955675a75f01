"""Search engine for 3D-printable model repositories.

Models are ranked against coarse spatial sketches by rigid alignment and
voxel-overlap scoring, optionally narrowed by a weighted text search over
their metadata.
"""

__version__ = "0.1.0"
