"""Cycle-level simulation of clocked SFQ netlists.

Time is counted in clock cycles. Within a cycle the clock fires first, so a
clocked cell emits what it collected since its previous clock edge; pulses
then ripple through splitters and converters in the same cycle. A message
applied at cycle t therefore reaches the outputs of a two-stage design at
t + 2.

Each net carries a boolean pulse train over all cycles and cells are
evaluated in topological order, one numpy expression per cell.
"""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, replace
from typing import Sequence, TextIO

import numpy as np

from .netlist import (
    CLOCK_NET,
    CellKind,
    FaultPlan,
    Netlist,
    inject_faults,
    latency,
    topological_order,
)
from .spread import SpreadModel, apply_spread  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class SimConfig:
    clock_freq: float = 5e9
    cycles_per_message: int = 1
    samples_per_cycle: int = 8
    noise_sigma: float = 0.0
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.clock_freq <= 0:
            raise ValueError("clock_freq must be positive")
        if self.cycles_per_message < 1:
            raise ValueError("cycles_per_message must be >= 1")
        if self.samples_per_cycle < 4 or self.samples_per_cycle % 2:
            raise ValueError("samples_per_cycle must be even and >= 4")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.high <= self.low:
            raise ValueError("high level must exceed low level")

    @property
    def period_ns(self) -> float:
        return 1e9 / self.clock_freq

    @property
    def threshold(self) -> float:
        return (self.low + self.high) / 2


@dataclass(frozen=True, eq=False)
class ChannelTrace:
    channel: str
    levels: np.ndarray  # sampled DC level, samples_per_cycle per cycle
    bits: np.ndarray  # per-cycle transition bits recovered from levels


# -------------------------------------------------------------- waveforms


def bits_to_waveform(bits, cfg: SimConfig, nrz: bool = False, seed: int | None = None) -> np.ndarray:
    """One plateau per cycle.

    With ``nrz=False`` the plateau is high for a 1 (the drive for a DC-to-SFQ
    converter). With ``nrz=True`` a 1 toggles the level instead, which is what
    an SFQ-to-DC converter emits. The level before the first cycle is low.
    """
    b = np.asarray(bits, dtype=bool).ravel()
    state = np.cumsum(b) % 2 == 1 if nrz else b
    wave = np.where(state, cfg.high, cfg.low).repeat(cfg.samples_per_cycle)
    if cfg.noise_sigma > 0 and wave.size:
        rng = np.random.default_rng(seed)
        wave = wave + rng.normal(0.0, cfg.noise_sigma * (cfg.high - cfg.low), wave.size)
    return wave


def waveform_to_bits(samples, cfg: SimConfig, nrz: bool = True) -> np.ndarray:
    """Average each cycle window, threshold at mid-level, then undo NRZ."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size % cfg.samples_per_cycle:
        raise ValueError(f"{s.size} samples is not a whole number of {cfg.samples_per_cycle}-sample cycles")
    level = s.reshape(-1, cfg.samples_per_cycle).mean(axis=1) > cfg.threshold
    if not nrz:
        return level.astype(np.uint8)
    prev = np.concatenate(([False], level[:-1]))
    return (level != prev).astype(np.uint8)


# ------------------------------------------------------------- simulation


@dataclass(frozen=True)
class _Schedule:
    clock_order: tuple[str, ...]
    data_order: tuple[str, ...]
    latency: int


@functools.lru_cache(maxsize=128)
def _schedule(net: Netlist) -> _Schedule:
    tree = net.clock_tree
    order, frontier = [], [CLOCK_NET]
    while frontier:
        cid = net.receiver.get(frontier.pop(0))
        if cid in tree:
            order.append(cid)
            frontier.extend(net.cells[cid].outputs)
    return _Schedule(tuple(order), tuple(topological_order(net)), latency(net))


def _structure_key(net: Netlist) -> Netlist:
    return Netlist(net.cells) if net.dead else net


def _clocked(data: list[np.ndarray], clock: np.ndarray, parity: bool) -> np.ndarray:
    out = np.zeros_like(clock)
    edges = np.flatnonzero(clock)
    if edges.size == 0:
        return out
    total = np.zeros(clock.size + 1, dtype=np.int64)
    for d in data:
        total[1:] += np.cumsum(d)
    # pulses that arrived between the previous edge and this one
    counts = np.diff(total[edges], prepend=0)
    out[edges] = counts % 2 == 1 if parity else counts > 0
    return out


def run_pulses(net: Netlist, stimulus: dict[str, np.ndarray], cycles: int) -> dict[str, np.ndarray]:
    """Pulse train on every net; ``stimulus`` maps input nets to per-cycle bits.

    Cells in ``net.dead`` never emit.
    """
    sched = _schedule(_structure_key(net))
    zeros = np.zeros(cycles, dtype=bool)
    pulses: dict[str, np.ndarray] = {CLOCK_NET: np.ones(cycles, dtype=bool)}
    for n in net.inputs:
        pulses[n] = np.asarray(stimulus.get(n, zeros), dtype=bool)

    for cid in sched.clock_order + sched.data_order:
        c = net.cells[cid]
        if cid in net.dead:
            for n in c.outputs:
                pulses[n] = zeros
            continue
        ins = [pulses[n] for n in c.inputs]
        if c.kind is CellKind.XOR:
            out = _clocked(ins, pulses[c.clock], parity=True)
        elif c.kind is CellKind.DFF:
            out = _clocked(ins, pulses[c.clock], parity=False)
        elif c.kind is CellKind.SOURCE:
            out = zeros
        else:
            out = ins[0] if ins else zeros
        for n in c.outputs:
            pulses[n] = out
    return pulses


def output_levels(net: Netlist, pulses: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Per-cycle DC level of each output port (SFQ-to-DC converters toggle)."""
    levels = {}
    for port in net.outputs:
        c = net.cells[net.driver[port]]
        if c.kind is CellKind.SFQ2DC:
            if c.id in net.dead:
                levels[port] = np.zeros_like(pulses[port])
            else:
                levels[port] = np.cumsum(pulses[c.inputs[0]]) % 2 == 1
        else:
            levels[port] = pulses[port]
    return levels


def _message_array(messages, width: int) -> np.ndarray:
    if isinstance(messages, np.ndarray) and messages.ndim == 2:
        arr = messages.astype(np.uint8)
    else:
        rows = [[int(ch) for ch in m] if isinstance(m, str) else list(m) for m in messages]
        arr = np.array(rows, dtype=np.uint8).reshape(len(rows), -1) if rows else np.zeros((0, width), np.uint8)
    if arr.shape[1] != width:
        raise ValueError(f"messages must have {width} bits, got {arr.shape[1]}")
    if arr.size and arr.max() > 1:
        raise ValueError("messages must be binary")
    return arr


def _stimulus(net: Netlist, msgs: np.ndarray, cfg: SimConfig, cycles: int) -> dict[str, np.ndarray]:
    stim = {}
    for j, port in enumerate(net.inputs):
        bits = np.zeros(cycles, dtype=np.uint8)
        bits[: msgs.shape[0] * cfg.cycles_per_message : cfg.cycles_per_message] = msgs[:, j]
        # drive waveform -> DC-to-SFQ input threshold, one pulse per high cycle
        drive = bits_to_waveform(bits, replace(cfg, noise_sigma=0.0))
        stim[port] = waveform_to_bits(drive, cfg, nrz=False).astype(bool)
    return stim


def simulate(
    net: Netlist,
    plan: FaultPlan | None,
    messages,
    cfg: SimConfig | None = None,
    seed: int = 0,
) -> list[ChannelTrace]:
    """Stream ``messages`` through the netlist, one every ``cycles_per_message`` cycles.

    Returns one trace per output port, ``latency(net)`` extra cycles long so
    the last codeword is included. Output noise (``cfg.noise_sigma``) is
    drawn from ``seed``.
    """
    cfg = cfg or SimConfig()
    if plan is not None:
        net = inject_faults(net, plan)
    sched = _schedule(_structure_key(net))
    msgs = _message_array(messages, len(net.inputs))
    cycles = msgs.shape[0] * cfg.cycles_per_message + sched.latency if msgs.shape[0] else 0

    pulses = run_pulses(net, _stimulus(net, msgs, cfg, cycles), cycles)
    levels = output_levels(net, pulses)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    traces = []
    for port in net.outputs:
        wave = np.where(levels[port], cfg.high, cfg.low).repeat(cfg.samples_per_cycle).astype(float)
        if cfg.noise_sigma > 0 and wave.size:
            wave += rng.normal(0.0, cfg.noise_sigma * (cfg.high - cfg.low), wave.size)
        traces.append(ChannelTrace(port, wave, waveform_to_bits(wave, cfg, nrz=True)))
    return traces


def received_codewords(traces: Sequence[ChannelTrace], n_messages: int, lat: int, cfg: SimConfig | None = None) -> np.ndarray:
    """(n_messages, n_channels) bits read ``lat`` cycles after each message."""
    cfg = cfg or SimConfig()
    idx = np.arange(n_messages) * cfg.cycles_per_message + lat
    if not traces:
        return np.zeros((n_messages, 0), dtype=np.uint8)
    return np.stack([t.bits[idx] for t in traces], axis=1).astype(np.uint8)


def transmit(net: Netlist, plan: FaultPlan | None, messages, cfg: SimConfig | None = None, seed: int = 0) -> np.ndarray:
    """simulate() followed by reading one received word per message."""
    cfg = cfg or SimConfig()
    msgs = _message_array(messages, len(net.inputs))
    traces = simulate(net, plan, msgs, cfg, seed)
    return received_codewords(traces, msgs.shape[0], _schedule(_structure_key(net)).latency, cfg)


def transmit_fast(net: Netlist, dead: frozenset[str], messages: np.ndarray) -> np.ndarray:
    """Noiseless transmit() at pulse level, skipping the sampled waveforms."""
    sched = _schedule(_structure_key(net))
    net = Netlist(net.cells, frozenset(dead) | net.dead)
    msgs = np.asarray(messages, dtype=bool)
    cycles = msgs.shape[0] + sched.latency
    stim = {}
    for j, port in enumerate(net.inputs):
        s = np.zeros(cycles, dtype=bool)
        s[: msgs.shape[0]] = msgs[:, j]
        stim[port] = s
    levels = output_levels(net, run_pulses(net, stim, cycles))
    out = []
    for port in net.outputs:
        lv = levels[port]
        prev = np.concatenate(([False], lv[:-1]))
        out.append((lv != prev)[sched.latency :])
    return np.stack(out, axis=1).astype(np.uint8)


def dead_channels(net: Netlist, dead: frozenset[str]) -> frozenset[str]:
    """Output ports that carry no transition for any of the 2^k messages."""
    k = len(net.inputs)
    msgs = ((np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(bool)
    rx = transmit_fast(net, dead, msgs)
    return frozenset(p for j, p in enumerate(net.outputs) if not rx[:, j].any())


def netlist_latency(net: Netlist) -> int:
    return _schedule(_structure_key(net)).latency


def write_trace_csv(traces: Sequence[ChannelTrace], cfg: SimConfig, fh: TextIO) -> None:
    """``time_ns,channel,level`` rows, time-major."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["time_ns", "channel", "level"])
    if not traces:
        return
    dt = cfg.period_ns / cfg.samples_per_cycle
    for i in range(traces[0].levels.size):
        t = f"{i * dt:.4f}"
        for tr in traces:
            w.writerow([t, tr.channel, f"{tr.levels[i]:.6g}"])


def trace_csv(traces: Sequence[ChannelTrace], cfg: SimConfig) -> str:
    buf = io.StringIO()
    write_trace_csv(traces, cfg, buf)
    return buf.getvalue()
