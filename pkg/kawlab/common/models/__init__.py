"""
Validated option and configuration models.

Every model forbids unknown fields so that typos in configuration files
surface as errors instead of silently using defaults.
"""

from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from kawlab.common.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    ADAM_LR,
    DUALITY_GAP_TOL,
    FEASIBILITY_REL_TOL,
    OBJECTIVE_TOLERANCE,
    PDHG_MAX_ITER,
    PDHG_TOLERANCE,
    POWER_ITERATIONS,
    STEP_SAFETY,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class SolverOptions(StrictModel):
    """Primal-dual QCBP / proximal-gradient LASSO options."""

    tol: float = Field(PDHG_TOLERANCE, gt=0)
    max_iter: int = Field(PDHG_MAX_ITER, ge=1)
    power_iterations: int = Field(POWER_ITERATIONS, ge=1)
    step_safety: float = Field(STEP_SAFETY, gt=0, le=1)
    feasibility_rel_tol: float = Field(FEASIBILITY_REL_TOL, gt=0)
    gap_tol: float = Field(DUALITY_GAP_TOL, gt=0)
    objective_tol: float = Field(OBJECTIVE_TOLERANCE, gt=0)
    check_every: int = Field(10, ge=1)


class AdamConfig(StrictModel):
    lr: float = Field(ADAM_LR, gt=0)
    beta1: float = Field(ADAM_BETA1, ge=0, lt=1)
    beta2: float = Field(ADAM_BETA2, ge=0, lt=1)
    eps: float = Field(ADAM_EPS, gt=0)


class TrainConfig(StrictModel):
    """Training run settings; ``batch_size = 0`` means full batch."""

    adam: AdamConfig = Field(default_factory=AdamConfig)
    epochs: int = Field(1000, ge=1)
    batch_size: int = Field(0, ge=0)
    seed: int = 0
    target_error: Optional[float] = Field(None, gt=0)
    log_every: int = Field(500, ge=1)


class OperatorSpec(StrictModel):
    """How to build a measurement operator for an experiment."""

    kind: Literal["fourier", "walsh", "identity", "dense"] = "walsh"
    r: int = Field(6, ge=1, le=13)
    budgets: Optional[List[int]] = None
    omega: Optional[List[int]] = None
    budget_constant: float = Field(1.0, gt=0)
    nu: float = Field(0.5, gt=0, lt=1)
    scaled: bool = True
    allow_repeats: bool = False
    rows: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _explicit_sources(self):
        if self.budgets is not None and self.omega is not None:
            raise ValueError("give either budgets or omega, not both")
        if self.kind == "dense" and self.rows is None:
            raise ValueError("dense operators need 'rows'")
        return self


class LevelSpec(StrictModel):
    local_sparsities: Optional[List[int]] = None
    empty_level_weight: Optional[float] = Field(None, gt=0)


class OutputSpec(StrictModel):
    directory: str = "kawlab-out"
    binary_signals: bool = False
    stamp: bool = False


ParamValue = Union[int, float, str, bool]


class ExperimentConfig(StrictModel):
    """Everything needed to reproduce one experiment run."""

    experiment: str
    seed: int = 0
    operator: OperatorSpec = Field(default_factory=OperatorSpec)
    levels: LevelSpec = Field(default_factory=LevelSpec)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    train: TrainConfig = Field(default_factory=TrainConfig)
    output: OutputSpec = Field(default_factory=OutputSpec)
    params: Dict[str, ParamValue] = Field(default_factory=dict)


__all__ = [
    'StrictModel',
    'SolverOptions',
    'AdamConfig',
    'TrainConfig',
    'OperatorSpec',
    'LevelSpec',
    'OutputSpec',
    'ExperimentConfig',
]
