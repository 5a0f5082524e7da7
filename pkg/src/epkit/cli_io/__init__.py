"""Data formats, system generators, exporters, and the command line."""

from .formats import load_system, save_system, result_to_dict  # noqa: F401
from .sysgen import generate_system  # noqa: F401
