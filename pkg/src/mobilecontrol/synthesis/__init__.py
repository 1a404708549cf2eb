"""Control synthesis: damping sweep, additive correction, lifting and the
quasilinear fixed-point loop."""
from .additive import (AdditivePlan, TargetDecomposition, additive_sequence, additive_to_multiplicative,
                       decompose_target, nonneg_additive_control)
from .nnls import nnls_bb, nnls_enumerate
from .picard import PicardConfig, PicardResult, picard_quasilinear
from .pipeline import PipelineResult, synthesize_pipeline
from .sweep import SweepPlan, run_sweep, sweep_stage

__all__ = [
    "AdditivePlan", "TargetDecomposition", "additive_sequence", "additive_to_multiplicative",
    "decompose_target", "nonneg_additive_control", "nnls_bb", "nnls_enumerate", "PicardConfig",
    "PicardResult", "picard_quasilinear", "PipelineResult", "synthesize_pipeline", "SweepPlan",
    "run_sweep", "sweep_stage",
]
