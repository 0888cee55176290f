"""Behavioral surrogate for process parameter variation (PPV).

Each cell gets one uniform deviation in [-spread, +spread]; a cell fails
(becomes permanently silent) when the deviation exceeds the margin of its
kind. The margins are calibration knobs, not electrical models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .netlist import CellKind, Netlist, faultable_cells

#: per-cell failure probability at +-20 % used for the default margins.
#: converters: (1 - q)^4 = 0.80 for a bare 4-channel link;
#: logic: chosen so the 49-cell encoder is fault free ~55 % of the time.
DEFAULT_FAIL_AT_20 = {
    CellKind.SFQ2DC: 0.0543,
    CellKind.XOR: 0.0035,
    CellKind.DFF: 0.0035,
    CellKind.SPLITTER: 0.0035,
}


def margins_for(spread_pct: float, fail_probs: Mapping[CellKind, float]) -> dict[CellKind, float]:
    """Margins giving P(|U(-s, s)| > margin) == p for each kind."""
    return {kind: spread_pct * (1.0 - p) for kind, p in fail_probs.items()}


def calibrate_fail_probs(
    net: Netlist, target_clean: float, converter_clean: float = 0.80, converters: int = 4
) -> dict[CellKind, float]:
    """Per-kind failure probabilities hitting two yield targets.

    Converters get the probability q that leaves a ``converters``-channel
    bare link fault free with probability ``converter_clean``. All other
    faultable cells share one probability chosen so that ``net`` is fault
    free with probability ``target_clean``.
    """
    if not 0.0 < target_clean < 1.0 or not 0.0 < converter_clean <= 1.0:
        raise ValueError("yield targets must lie in (0, 1)")
    q = 1.0 - converter_clean ** (1.0 / converters)
    kinds = [net.cells[c].kind for c in faultable_cells(net)]
    n_conv = sum(k is CellKind.SFQ2DC for k in kinds)
    n_logic = len(kinds) - n_conv
    rest = target_clean / (1.0 - q) ** n_conv
    if not 0.0 < rest <= 1.0 or n_logic == 0:
        raise ValueError("converter failures alone already miss the target")
    p = 1.0 - rest ** (1.0 / n_logic)
    probs = {k: p for k in (CellKind.XOR, CellKind.DFF, CellKind.SPLITTER)}
    probs[CellKind.SFQ2DC] = q
    return probs


@dataclass(frozen=True)
class SpreadModel:
    spread_pct: float = 0.20
    margins: Mapping[CellKind, float] = field(default_factory=lambda: margins_for(0.20, DEFAULT_FAIL_AT_20))

    def __post_init__(self):
        if not 0.0 <= self.spread_pct <= 0.5:
            raise ValueError(f"spread_pct must be in [0, 0.5], got {self.spread_pct}")
        for kind, margin in self.margins.items():
            if not 0.0 < margin <= 0.5:
                raise ValueError(f"margin for {kind} must be in (0, 0.5], got {margin}")
        object.__setattr__(self, "margins", {CellKind(k): float(v) for k, v in self.margins.items()})

    def fail_probability(self, kind: CellKind) -> float:
        margin = self.margins.get(kind)
        if margin is None or self.spread_pct <= margin:
            return 0.0
        return 1.0 - margin / self.spread_pct


def spread_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 1]))


def apply_spread(net: Netlist, model: SpreadModel | None, seed: int) -> frozenset[str]:
    """Cells whose sampled deviation falls outside their margin."""
    if model is None:
        return frozenset()
    cells = faultable_cells(net)
    dev = spread_rng(seed).uniform(-model.spread_pct, model.spread_pct, size=len(cells))
    failed = set()
    for cid, d in zip(cells, dev):
        margin = model.margins.get(net.cells[cid].kind)
        if margin is not None and abs(d) > margin:
            failed.add(cid)
    return frozenset(failed)
