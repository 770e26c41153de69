"""Configuration, experiment matrix execution and result emission."""
from .config import ExperimentConfig, dump_config, load_config, parse_config
from .output import (read_csv, render_convergence_svg, write_aggregate, write_csv, write_index,
                     write_outputs)
from .presets import PRESET_NAMES, preset, preset_text
from .runner import RunResult, Variant, execute, expand_variants, run_id_for, run_matrix

__all__ = [
    "ExperimentConfig", "parse_config", "load_config", "dump_config", "preset", "preset_text",
    "PRESET_NAMES", "run_matrix", "execute", "expand_variants", "run_id_for", "RunResult",
    "Variant", "write_csv", "read_csv", "write_aggregate", "write_index", "write_outputs",
    "render_convergence_svg",
]
