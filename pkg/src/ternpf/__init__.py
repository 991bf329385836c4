"""Grand-potential phase-field solver for directional solidification of ternary eutectics."""

__version__ = "0.1.0"
