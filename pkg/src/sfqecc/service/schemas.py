"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..codec import DecodeMode, DecodeStatus
from ..montecarlo import Arm

Bits = str


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_bits(v: str) -> str:
    if not v or set(v) - {"0", "1"}:
        raise ValueError(f"not a bit string: {v!r}")
    return v


class EncodeRequest(_Strict):
    message: Bits
    rm: tuple[int, int] = (1, 3)

    _bits = field_validator("message")(_check_bits)


class EncodeResponse(BaseModel):
    codeword: Bits
    r: int
    m: int


class DecodeRequest(_Strict):
    codeword: Bits
    mode: DecodeMode = DecodeMode.CORRECT
    rm: tuple[int, int] = (1, 3)

    _bits = field_validator("codeword")(_check_bits)


class DecodeResponse(BaseModel):
    message: Optional[Bits]
    status: DecodeStatus
    corrected_positions: list[int] = []


class FaultPlanModel(_Strict):
    seed: Optional[int] = None
    realization_index: int = 0
    open_cells: list[str] = []
    failed_cells: list[str] = []


class SimConfigModel(_Strict):
    clock_freq: float = 5e9
    cycles_per_message: int = 1
    samples_per_cycle: int = 8
    noise_sigma: float = 0.0


class SimulateRequest(_Strict):
    netlist: Optional[str] = Field(None, description="netlist source text; overrides builtin")
    builtin: Literal["rm13", "no_encoder"] = "rm13"
    messages: list[Bits] = []
    faults: Optional[FaultPlanModel] = None
    sim: SimConfigModel = SimConfigModel()
    seed: int = 0
    trace: bool = False


class MessageResult(BaseModel):
    message: Bits
    transmitted: Bits
    received: Bits
    differs: list[int]


class SimulateResponse(BaseModel):
    latency: int
    outputs: list[str]
    results: list[MessageResult]
    trace_csv: Optional[str] = None


class MonteCarloRequest(_Strict):
    arms: list[Arm] = [Arm.AFTER_ECC]
    realizations: int = Field(1000, ge=1)
    messages: int = Field(100, ge=1)
    fault_probs: list[float] = [0.0]
    ppv: Optional[float] = Field(None, ge=0.0, le=0.5, description="spread fraction, e.g. 0.2 for +-20 %")
    seed: int = 0
    workers: int = Field(1, ge=1)


class CdfRun(BaseModel):
    arm: Arm
    fault_prob: float
    p_zero: float
    points: list[tuple[int, float]]
    meta: dict
    csv: str
    json_text: str


class MonteCarloResponse(BaseModel):
    runs: list[CdfRun]
    dominance: dict[str, Optional[bool]] = {}
    ordered: Optional[bool] = None


class CensusRequest(_Strict):
    max_size: int = Field(1, ge=0)
    netlist: Optional[str] = None


class CensusResponse(BaseModel):
    cell_count: int
    summary: dict[int, dict[str, int]]
    csv: str
    json_text: str


class ValidateRequest(_Strict):
    netlist: str


class ValidateResponse(BaseModel):
    cells: int
    census: dict[str, int]
    inputs: list[str]
    outputs: list[str]
    faultable: int
    balanced: bool
    latency: Optional[int]
    open: list[str]
