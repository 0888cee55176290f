"""Monte-Carlo fault experiments and the exhaustive fault-tolerance census.

A realization is one sampled chip: a fault plan (open cells plus spread
failures) and a stream of random 4-bit messages. All random streams are
derived from ``(seed, realization, stream)``, so realizations can run in
any order or process and the result is the same. Arms that are compared
see the same messages and, for the two RM(1,3) arms, the same chip.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from .codec import RM13, rm13_decode_table
from .gatesim import SimConfig, transmit, transmit_fast
from .netlist import Netlist, build_no_encoder, build_rm13_reference, faultable_cells, sample_fault_plan
from .spread import SpreadModel

log = logging.getLogger(__name__)


class Arm(str, enum.Enum):
    AFTER_ECC = "rm13_after_ecc"
    BEFORE_ECC = "rm13_before_ecc"
    NO_ENCODER = "no_encoder"


ALL_ARMS = (Arm.AFTER_ECC, Arm.BEFORE_ECC, Arm.NO_ENCODER)

_FAULT_STREAM, _MESSAGE_STREAM, _NOISE_STREAM = 0, 1, 2


def derive_seed(seed: int, realization: int, stream: int) -> int:
    state = np.random.SeedSequence([seed, realization, stream]).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


@dataclass(frozen=True)
class ExperimentSpec:
    arm: Arm = Arm.AFTER_ECC
    realizations: int = 1000
    messages_per_realization: int = 100
    fault_prob: float = 0.0
    spread: SpreadModel | None = None
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        object.__setattr__(self, "arm", Arm(self.arm))
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.messages_per_realization < 1:
            raise ValueError("messages_per_realization must be >= 1")
        if not 0.0 <= self.fault_prob <= 1.0:
            raise ValueError("fault_prob must be in [0, 1]")

    def meta(self) -> dict:
        return {
            "arm": self.arm.value,
            "seed": self.seed,
            "fault_prob": self.fault_prob,
            "spread_pct": self.spread.spread_pct if self.spread else None,
            "realizations": self.realizations,
            "messages": self.messages_per_realization,
        }


@dataclass(frozen=True)
class CdfTable:
    """Empirical CDF of N_err, stored at its jump points only."""

    points: tuple[tuple[int, float], ...]
    meta: Mapping = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CdfTable) and self.points == other.points and dict(self.meta) == dict(other.meta)

    @classmethod
    def from_counts(cls, n_err: Sequence[int], meta: Mapping | None = None) -> "CdfTable":
        values, counts = np.unique(np.asarray(n_err, dtype=np.int64), return_counts=True)
        cum = np.cumsum(counts)
        total = int(cum[-1])
        points = tuple((int(v), float(c) / total) for v, c in zip(values, cum))
        return cls(points, dict(meta or {}))

    def at(self, x: int) -> float:
        """P(N_err <= x)."""
        p = 0.0
        for n, c in self.points:
            if n > x:
                break
            p = c
        return p

    @property
    def p_zero(self) -> float:
        return self.at(0)


def dominates(a: CdfTable, b: CdfTable) -> bool:
    """True if P_a(N_err <= x) >= P_b(N_err <= x) at every x."""
    xs = sorted({n for n, _ in a.points} | {n for n, _ in b.points})
    return all(a.at(x) >= b.at(x) for x in xs)


# ------------------------------------------------------------ realizations


@functools.lru_cache(maxsize=None)
def _netlists() -> dict[str, Netlist]:
    return {"rm13": build_rm13_reference(), "bare": build_no_encoder(4)}


@functools.lru_cache(maxsize=None)
def _decoder_arrays() -> tuple[np.ndarray, np.ndarray]:
    table = rm13_decode_table()
    ok = np.zeros(256, dtype=bool)
    msg = np.zeros((256, 4), dtype=np.uint8)
    for key, decoded in table.items():
        if decoded is not None:
            ok[key] = True
            msg[key] = decoded
    return ok, msg


def realization_messages(spec: ExperimentSpec, r: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(spec.seed, r, _MESSAGE_STREAM))
    return rng.integers(0, 2, size=(spec.messages_per_realization, 4), dtype=np.uint8)


def realization_errors(
    spec: ExperimentSpec, r: int, arms: Iterable[Arm], fault_probs: Sequence[float] | None = None
) -> dict[tuple[Arm, float], int]:
    """N_err of realization ``r`` for each arm (and each fault probability)."""
    arms = tuple(Arm(a) for a in arms)
    probs = tuple(fault_probs) if fault_probs is not None else (spec.fault_prob,)
    nets = _netlists()
    msgs = realization_messages(spec, r)
    fault_seed = derive_seed(spec.seed, r, _FAULT_STREAM)
    noise_seed = derive_seed(spec.seed, r, _NOISE_STREAM)
    out = {}
    for p in probs:
        if Arm.AFTER_ECC in arms or Arm.BEFORE_ECC in arms:
            plan = sample_fault_plan(nets["rm13"], p, spec.spread, fault_seed, r)
            rx = transmit(nets["rm13"], plan, msgs, spec.sim, noise_seed)
            tx = (msgs.astype(np.int64) @ RM13.G % 2).astype(np.uint8)
            if Arm.BEFORE_ECC in arms:
                out[Arm.BEFORE_ECC, p] = int((rx != tx).any(axis=1).sum())
            if Arm.AFTER_ECC in arms:
                ok, decoded = _decoder_arrays()
                keys = rx.astype(np.int64) @ (1 << np.arange(7, -1, -1))
                wrong = ~ok[keys] | (decoded[keys] != msgs).any(axis=1)
                out[Arm.AFTER_ECC, p] = int(wrong.sum())
        if Arm.NO_ENCODER in arms:
            plan = sample_fault_plan(nets["bare"], p, spec.spread, fault_seed, r)
            rx = transmit(nets["bare"], plan, msgs, spec.sim, noise_seed)
            out[Arm.NO_ENCODER, p] = int((rx != msgs).any(axis=1).sum())
    return out


def _chunk(args):
    spec, indices, arms, probs = args
    return [realization_errors(spec, r, arms, probs) for r in indices]


def run_realizations(
    spec: ExperimentSpec,
    arms: Iterable[Arm] | None = None,
    fault_probs: Sequence[float] | None = None,
    workers: int = 1,
) -> dict[tuple[Arm, float], np.ndarray]:
    """Per-realization N_err arrays keyed by (arm, fault_prob)."""
    arms = tuple(Arm(a) for a in (arms or (spec.arm,)))
    probs = tuple(fault_probs) if fault_probs is not None else (spec.fault_prob,)
    indices = list(range(spec.realizations))
    if workers > 1:
        size = -(-len(indices) // (workers * 4))
        chunks = [(spec, indices[i : i + size], arms, probs) for i in range(0, len(indices), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_chunk, chunks) for row in part]
    else:
        rows = _chunk((spec, indices, arms, probs))
    return {key: np.array([row[key] for row in rows], dtype=np.int64) for key in rows[0]}


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> CdfTable:
    n_err = run_realizations(spec, workers=workers)[spec.arm, spec.fault_prob]
    return CdfTable.from_counts(n_err, spec.meta())


@dataclass(frozen=True)
class ArmComparison:
    tables: dict[Arm, CdfTable]
    n_err: dict[Arm, np.ndarray]
    dominance: bool | None  # after_ecc <= before_ecc on every realization
    violations: tuple[int, ...] = ()

    @property
    def p_zero(self) -> dict[Arm, float]:
        return {arm: t.p_zero for arm, t in self.tables.items()}


def compare_arms(specs: Sequence[ExperimentSpec], workers: int = 1) -> ArmComparison:
    """Run several arms under common random numbers."""
    if not specs:
        raise ValueError("no specs to compare")
    base = replace(specs[0], arm=Arm.AFTER_ECC)
    for s in specs:
        if replace(s, arm=Arm.AFTER_ECC) != base:
            raise ValueError("specs must differ only in arm")
    arms = tuple(dict.fromkeys(s.arm for s in specs))
    results = run_realizations(specs[0], arms, workers=workers)
    n_err = {arm: results[arm, base.fault_prob] for arm in arms}
    tables = {s.arm: CdfTable.from_counts(n_err[s.arm], s.meta()) for s in specs}

    dominance, violations = None, ()
    if Arm.AFTER_ECC in n_err and Arm.BEFORE_ECC in n_err:
        bad = np.flatnonzero(n_err[Arm.AFTER_ECC] > n_err[Arm.BEFORE_ECC])
        dominance, violations = bad.size == 0, tuple(int(i) for i in bad)
    return ArmComparison(tables, n_err, dominance, violations)


def fault_sweep(spec: ExperimentSpec, fault_probs: Sequence[float], workers: int = 1) -> dict[float, CdfTable]:
    """Same chips and messages at several fault probabilities (nested fault sets)."""
    results = run_realizations(spec, (spec.arm,), fault_probs, workers)
    return {
        p: CdfTable.from_counts(results[spec.arm, p], replace(spec, fault_prob=p).meta()) for p in fault_probs
    }


def paired_gap_interval(
    better: np.ndarray, worse: np.ndarray, confidence: float = 0.95, seed: int = 0, n_resamples: int = 9999
) -> tuple[float, float, float]:
    """Gap in P(N_err = 0) between two paired arms, with a bootstrap interval."""
    from scipy import stats

    a = (np.asarray(better) == 0).astype(float)
    b = (np.asarray(worse) == 0).astype(float)
    res = stats.bootstrap(
        (a, b),
        lambda x, y, axis=-1: np.mean(x, axis=axis) - np.mean(y, axis=axis),
        paired=True,
        vectorized=True,
        confidence_level=confidence,
        n_resamples=n_resamples,
        method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return float(a.mean() - b.mean()), float(res.confidence_interval.low), float(res.confidence_interval.high)


# ------------------------------------------------------------------ census

HARMLESS, CORRECTABLE, UNCORRECTABLE = "harmless", "correctable", "uncorrectable"


@dataclass(frozen=True)
class CensusRow:
    size: int
    fault_set: tuple[str, ...]
    worst_bit_errors: int

    @property
    def cls(self) -> str:
        if self.worst_bit_errors == 0:
            return HARMLESS
        return CORRECTABLE if self.worst_bit_errors == 1 else UNCORRECTABLE


@dataclass(frozen=True)
class CensusReport:
    rows: tuple[CensusRow, ...]
    cell_count: int

    def summary(self) -> dict[int, dict[str, int]]:
        out: dict[int, dict[str, int]] = {}
        for row in self.rows:
            bins = out.setdefault(row.size, {HARMLESS: 0, CORRECTABLE: 0, UNCORRECTABLE: 0})
            bins[row.cls] += 1
        return out

    def worst(self, cells: Iterable[str]) -> int:
        key = tuple(sorted(cells))
        for row in self.rows:
            if row.fault_set == key:
                return row.worst_bit_errors
        raise KeyError(key)


MAX_CENSUS_SIZE = 3


def worst_bit_errors(net: Netlist, dead: Iterable[str], reference: np.ndarray | None = None) -> int:
    """Largest number of wrong output bits over all 2^k messages."""
    k = len(net.inputs)
    msgs = ((np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    if reference is None:
        reference = transmit_fast(net, frozenset(), msgs)
    rx = transmit_fast(net, frozenset(dead), msgs)
    return int((rx != reference).sum(axis=1).max())


def census_of_sets(net: Netlist, fault_sets: Iterable[Iterable[str]]) -> CensusReport:
    k = len(net.inputs)
    msgs = ((np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    reference = transmit_fast(net, frozenset(), msgs)
    rows = []
    for fs in fault_sets:
        key = tuple(sorted(fs))
        rows.append(CensusRow(len(key), key, worst_bit_errors(net, key, reference)))
    return CensusReport(tuple(rows), len(faultable_cells(net)))


def fault_tolerance_census(net: Netlist, max_size: int) -> CensusReport:
    """Every set of up to ``max_size`` faultable cells, worst case over all messages."""
    if max_size > MAX_CENSUS_SIZE:
        raise ValueError(f"census is limited to fault sets of size <= {MAX_CENSUS_SIZE}")
    cells = faultable_cells(net)
    sets = itertools.chain.from_iterable(itertools.combinations(cells, s) for s in range(1, max_size + 1))
    report = census_of_sets(net, sets)
    for s in range(1, max_size + 1):
        assert sum(report.summary().get(s, {}).values()) == comb(len(cells), s)
    return report


# ------------------------------------------------------------------ export


def cdf_to_csv(table: CdfTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_err", "cum_prob"])
    for n, p in table.points:
        w.writerow([n, repr(p)])
    return buf.getvalue()


def cdf_to_json(table: CdfTable) -> str:
    return json.dumps({"meta": dict(table.meta), "points": [list(p) for p in table.points]}, indent=2, sort_keys=True) + "\n"


def cdf_from_csv(text: str) -> CdfTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["n_err", "cum_prob"]:
        raise ValueError("expected header n_err,cum_prob")
    return CdfTable(tuple((int(n), float(p)) for n, p in rows[1:]))


def cdf_from_json(text: str) -> CdfTable:
    data = json.loads(text)
    return CdfTable(tuple((int(n), float(p)) for n, p in data["points"]), data.get("meta", {}))


def census_to_csv(report: CensusReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["size", "fault_set", "worst_bit_errors", "class"])
    for row in report.rows:
        w.writerow([row.size, "+".join(row.fault_set), row.worst_bit_errors, row.cls])
    return buf.getvalue()


def census_to_json(report: CensusReport) -> str:
    data = {
        "cell_count": report.cell_count,
        "summary": {str(s): bins for s, bins in report.summary().items()},
        "rows": [
            {"size": r.size, "fault_set": list(r.fault_set), "worst_bit_errors": r.worst_bit_errors, "class": r.cls}
            for r in report.rows
        ],
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def census_from_csv(text: str, cell_count: int) -> CensusReport:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["size", "fault_set", "worst_bit_errors", "class"]:
        raise ValueError("expected header size,fault_set,worst_bit_errors,class")
    out = []
    for size, fs, worst, cls in rows[1:]:
        row = CensusRow(int(size), tuple(fs.split("+")) if fs else (), int(worst))
        if row.cls != cls:
            raise ValueError(f"class {cls!r} disagrees with worst_bit_errors={worst}")
        out.append(row)
    return CensusReport(tuple(out), cell_count)


def census_from_json(text: str) -> CensusReport:
    data = json.loads(text)
    rows = tuple(CensusRow(r["size"], tuple(r["fault_set"]), r["worst_bit_errors"]) for r in data["rows"])
    return CensusReport(rows, data["cell_count"])


def export_results(table: CdfTable | CensusReport, fmt: str, path=None) -> str:
    """Serialize to ``csv`` or ``json``; also write to ``path`` when given."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(table, CdfTable):
        text = cdf_to_csv(table) if fmt == "csv" else cdf_to_json(table)
    else:
        text = census_to_csv(table) if fmt == "csv" else census_to_json(table)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text
