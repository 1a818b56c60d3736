"""Request and response bodies for the HTTP service."""
from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class KernelModel(BaseModel):
    kind: Literal["rbf", "laplace", "linear"] = "rbf"
    bandwidth: float = Field(0.25, gt=0)


class SessionConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    payoff: Literal["hsic", "coco", "kcc", "sym_odd", "sym_rank", "sym_pred"] = "hsic"
    bettor: str = "ons"
    alpha: float = Field(0.05, gt=0, lt=1)
    kernel_x: KernelModel = KernelModel()
    kernel_y: KernelModel = KernelModel()
    minibatch: int = Field(2, ge=2)
    threshold: float | None = None
    agrapa_c: float = 0.9
    mixture_grid: list[float] | None = None
    kappa1: float = 0.1
    kappa2: float = 0.1
    delta0: float = 1e-6
    quantile_lo: float = 0.1
    quantile_hi: float = 0.9
    eta: float = 0.1
    record_trajectory: bool = False
    seed: int = 0


class CreateSessionRequest(BaseModel):
    config: SessionConfigModel = SessionConfigModel()


class ObservationsRequest(BaseModel):
    xs: list[float | list[float]]
    ys: list[float | list[float]]


class RoundReportModel(BaseModel):
    t: int
    f: float
    lam: float
    wealth: float
    log_wealth: float
    stopped: bool


class VerdictModel(BaseModel):
    rejected: bool
    stopping_time: int | None
    final_wealth: float
    rounds_processed: int
    final_log_wealth: float


class SessionStatus(BaseModel):
    session_id: str
    observations: int
    verdict: VerdictModel


class FeedResponse(SessionStatus):
    reports: list[RoundReportModel]


class SnapshotModel(BaseModel):
    snapshot: str


class BatchHsicRequest(BaseModel):
    xs: list[float | list[float]]
    ys: list[float | list[float]]
    checkpoints: list[int] | None = None
    alpha: float = Field(0.05, gt=0, lt=1)
    permutations: int = Field(1000, ge=1)
    bonferroni: bool = False
    seed: int = 0
    kernel_x: KernelModel = KernelModel()
    kernel_y: KernelModel = KernelModel()


class BatchHsicResponse(BaseModel):
    checkpoints: list[int]
    p_values: list[float]
    thresholds: list[float]
    rejected_at: list[bool]
    first_rejection: int | None


class ExperimentRequest(BaseModel):
    config: dict[str, Any]


class ExperimentResponse(BaseModel):
    rows: list[dict[str, Any]]
