"""acclab: a configurable performance laboratory for a load-compute-store
tensor inference accelerator.

The pipeline is: describe the machine (AccelConfig) and a workload
(ConvLayer list), pick a tiling (search / fallback_schedule), generate an
instruction stream (gen_conv_stream / gen_alu_layer_stream), simulate it
(run), and report (analysis / floorplan modules, or the `acclab` CLI).
"""

__version__ = "0.1.0"

from .errors import (AcclabError, AnalysisError, CodegenError, ConfigError,
                     FloorplanError, TilingError, WorkloadError)
from .config import (AccelConfig, InstructionLayout, MemKind,
                     derive_instruction_layout, load_config, load_config_file,
                     serialize_config)
from .workload import (ConvLayer, load_workload, load_workload_file,
                       pad_channels, serialize_workload)
from .tps import (THREAD_CHOICES, TilingParams, TpsResult, dram_cost,
                  enumerate_candidates, evaluate, fallback_schedule, rank,
                  ranking_csv, scratchpad_usage, search)
from .codegen import (AluOp, GenOptions, Instruction, InstructionStream,
                      Opcode, PadKind, Uop, decode_stream, decode_uops,
                      eliminate_redundant_loads, encode_stream, encode_uops,
                      extract_output, gen_alu_layer_stream, gen_conv_stream,
                      insert_tokens, load_stream, save_stream, stage_alu_data,
                      stage_conv_data, static_dram_bytes, stream_from_jsonl,
                      stream_to_jsonl, validate_tokens)
from .engine import Engine, SimReport, Vme, hazard_log, run, scan_hazards
from .analysis import (RooflinePoint, area_proxy, attainable, bandwidth_roof,
                       compute_roof, design_space_table, roofline_chart,
                       roofline_csv, roofline_point, utilization_timeline)
from .floorplan import (ORIENTATIONS, FpNode, PlacedRect, Violation, array,
                        buffer_tree_depth, check, compose_orientations,
                        flatten, fp_from_json, load_floorplan, pipe_stages,
                        render_svg)

__all__ = [
    "AcclabError", "AnalysisError", "CodegenError", "ConfigError",
    "FloorplanError", "TilingError", "WorkloadError",
    "AccelConfig", "InstructionLayout", "MemKind",
    "derive_instruction_layout", "load_config", "load_config_file",
    "serialize_config",
    "ConvLayer", "load_workload", "load_workload_file", "pad_channels",
    "serialize_workload",
    "THREAD_CHOICES", "TilingParams", "TpsResult", "dram_cost",
    "enumerate_candidates", "evaluate", "fallback_schedule", "rank",
    "ranking_csv", "scratchpad_usage", "search",
    "AluOp", "GenOptions", "Instruction", "InstructionStream", "Opcode",
    "PadKind", "Uop", "decode_stream", "decode_uops",
    "eliminate_redundant_loads", "encode_stream", "encode_uops",
    "extract_output", "gen_alu_layer_stream", "gen_conv_stream",
    "insert_tokens", "load_stream", "save_stream", "stage_alu_data",
    "stage_conv_data", "static_dram_bytes", "stream_from_jsonl",
    "stream_to_jsonl", "validate_tokens",
    "Engine", "SimReport", "Vme", "hazard_log", "run", "scan_hazards",
    "RooflinePoint", "area_proxy", "attainable", "bandwidth_roof",
    "compute_roof", "design_space_table", "roofline_chart", "roofline_csv",
    "roofline_point", "utilization_timeline",
    "ORIENTATIONS", "FpNode", "PlacedRect", "Violation", "array",
    "buffer_tree_depth", "check", "compose_orientations", "flatten",
    "fp_from_json", "load_floorplan", "pipe_stages", "render_svg",
]
