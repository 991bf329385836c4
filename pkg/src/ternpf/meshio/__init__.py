"""Checkpoints, interface meshes and metrics output."""
from .checkpoint import (HEADER_SIZE, MAGIC, CheckpointFormatError, CheckpointHeader, CheckpointIOError,
                         ScrollbackWriter, checkpoint_size, load_checkpoint, read_checkpoint, read_header,
                         read_scrollback, write_checkpoint)
from .mesh import TriMesh, block_mesh, grid_domain_box, marching_cubes, merge_meshes
from .metrics import METRIC_COLUMNS, MetricsIOError, MetricsWriter, metrics_row, read_metrics, write_metrics
from .pipeline import phase_mesh
from .ply import MeshIOError, read_mesh, write_mesh
from .simplify import border_vertices, coarsen_mesh
from .stitch import StitchingError, exposed, hierarchical_reduce, reduce_pairwise, reduce_tree

__all__ = [
    "HEADER_SIZE", "MAGIC", "CheckpointFormatError", "CheckpointHeader", "CheckpointIOError",
    "ScrollbackWriter", "checkpoint_size", "load_checkpoint", "read_checkpoint", "read_header",
    "read_scrollback", "write_checkpoint", "TriMesh", "block_mesh", "grid_domain_box", "marching_cubes",
    "merge_meshes", "METRIC_COLUMNS", "MetricsIOError", "MetricsWriter", "metrics_row", "read_metrics",
    "write_metrics", "phase_mesh", "MeshIOError", "read_mesh", "write_mesh", "border_vertices",
    "coarsen_mesh", "StitchingError", "exposed", "hierarchical_reduce", "reduce_pairwise", "reduce_tree",
]
