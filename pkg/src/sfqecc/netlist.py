"""Line-oriented netlists of clocked SFQ cells.

One cell per line::

    <id> <KIND> in=<net,...> [clk=<net>] out=<net,...> [state=open]

``#`` starts a comment. Nets ``M<i>`` and ``CLK`` are driven from outside,
nets ``C<i>`` are read from outside. Every other net must have exactly one
driver and exactly one receiver; fan-out goes through SPLITTER cells.

A fault removes a whole cell, the same way deleting its line from a circuit
netlist would. Removed cells stay in the graph but never emit a pulse.
"""

from __future__ import annotations

import enum
import functools
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

import numpy as np


class CellKind(str, enum.Enum):
    XOR = "XOR"
    DFF = "DFF"
    SPLITTER = "SPLITTER"
    DC2SFQ = "DC2SFQ"
    SFQ2DC = "SFQ2DC"
    SOURCE = "SOURCE"
    SINK = "SINK"


CLOCKED = frozenset({CellKind.XOR, CellKind.DFF})
#: kinds that can fail; DC2SFQ/SOURCE/SINK model the stimulus side
FAULTABLE = frozenset({CellKind.XOR, CellKind.DFF, CellKind.SPLITTER, CellKind.SFQ2DC})

# kind -> (data inputs, outputs, clocked)
ARITY = {
    CellKind.XOR: (2, 1, True),
    CellKind.DFF: (1, 1, True),
    CellKind.SPLITTER: (1, 2, False),
    CellKind.DC2SFQ: (1, 1, False),
    CellKind.SFQ2DC: (1, 1, False),
    CellKind.SOURCE: (0, 1, False),
    CellKind.SINK: (1, 0, False),
}

CLOCK_NET = "CLK"
_INPUT_NET = re.compile(r"M\d+$")
_OUTPUT_NET = re.compile(r"C\d+$")
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")


class NetlistError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def is_input_net(net: str) -> bool:
    return bool(_INPUT_NET.match(net))


def is_output_net(net: str) -> bool:
    return bool(_OUTPUT_NET.match(net))


def _port_order(net: str) -> int:
    return int(net[1:])


@dataclass(frozen=True)
class Cell:
    id: str
    kind: CellKind
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    clock: str | None = None
    line: int | None = field(default=None, compare=False)

    def to_line(self, open_: bool = False) -> str:
        parts = [self.id, self.kind.value]
        if self.inputs:
            parts.append("in=" + ",".join(self.inputs))
        if self.clock:
            parts.append("clk=" + self.clock)
        if self.outputs:
            parts.append("out=" + ",".join(self.outputs))
        if open_:
            parts.append("state=open")
        return " ".join(parts)


@dataclass(frozen=True, eq=False)
class Netlist:
    cells: Mapping[str, Cell]
    dead: frozenset[str] = frozenset()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Netlist) and dict(self.cells) == dict(other.cells) and self.dead == other.dead

    def __hash__(self) -> int:
        return hash((frozenset(self.cells.values()), self.dead))

    def __len__(self) -> int:
        return len(self.cells)

    @functools.cached_property
    def driver(self) -> dict[str, str]:
        return {net: c.id for c in self.cells.values() for net in c.outputs}

    @functools.cached_property
    def receiver(self) -> dict[str, str]:
        out = {}
        for c in self.cells.values():
            for net in c.inputs + ((c.clock,) if c.clock else ()):
                out[net] = c.id
        return out

    @functools.cached_property
    def inputs(self) -> tuple[str, ...]:
        nets = {n for c in self.cells.values() for n in c.inputs if is_input_net(n)}
        return tuple(sorted(nets, key=_port_order))

    @functools.cached_property
    def outputs(self) -> tuple[str, ...]:
        nets = {n for c in self.cells.values() for n in c.outputs if is_output_net(n)}
        return tuple(sorted(nets, key=_port_order))

    @functools.cached_property
    def clock_tree(self) -> frozenset[str]:
        """Splitters reachable from ``CLK`` through splitters only."""
        tree, frontier = set(), [CLOCK_NET]
        while frontier:
            cid = self.receiver.get(frontier.pop())
            if cid is None:
                continue
            cell = self.cells[cid]
            if cell.kind is CellKind.SPLITTER and cid not in tree:
                tree.add(cid)
                frontier.extend(cell.outputs)
        return frozenset(tree)

    @functools.cached_property
    def clock_nets(self) -> frozenset[str]:
        nets = {CLOCK_NET}
        for cid in self.clock_tree:
            nets.update(self.cells[cid].outputs)
        return frozenset(nets)

    def count(self, kind: CellKind) -> int:
        return sum(1 for c in self.cells.values() if c.kind is kind)

    def census(self) -> dict[str, int]:
        counts = {k.value: self.count(k) for k in CellKind if self.count(k)}
        counts["CLOCK_SPLITTER"] = len(self.clock_tree)
        return counts


def faultable_cells(net: Netlist) -> list[str]:
    """Cell ids eligible for faults, sorted (fixes the RNG draw order)."""
    return sorted(cid for cid, c in net.cells.items() if c.kind in FAULTABLE)


# ---------------------------------------------------------------- parsing


def _parse_line(text: str, lineno: int) -> Cell:
    tokens = text.split()
    if len(tokens) < 2:
        raise NetlistError(f"expected '<id> <KIND> ...', got {text!r}", lineno)
    cid, kind_name, *fields = tokens
    if not _NAME.match(cid):
        raise NetlistError(f"bad cell id {cid!r}", lineno)
    try:
        kind = CellKind(kind_name.upper())
    except ValueError:
        raise NetlistError(f"unknown cell kind {kind_name!r}", lineno) from None

    values: dict[str, str] = {}
    for f in fields:
        key, sep, value = f.partition("=")
        if not sep or key not in ("in", "clk", "out", "state"):
            raise NetlistError(f"bad field {f!r}", lineno)
        if key in values:
            raise NetlistError(f"duplicate field {key!r}", lineno)
        values[key] = value
    if values.get("state", "open") != "open":
        raise NetlistError(f"unknown state {values['state']!r}", lineno)

    def nets(key):
        raw = values.get(key, "")
        names = tuple(n for n in raw.split(",") if n)
        for n in names:
            if not _NAME.match(n):
                raise NetlistError(f"bad net name {n!r}", lineno)
        return names

    ins, outs = nets("in"), nets("out")
    clk = values.get("clk") or None
    n_in, n_out, clocked = ARITY[kind]
    if len(ins) != n_in or len(outs) != n_out:
        raise NetlistError(f"{kind.value} {cid} needs {n_in} input(s) and {n_out} output(s)", lineno)
    if clocked and clk is None:
        raise NetlistError(f"unclocked {kind.value} {cid}", lineno)
    if not clocked and clk is not None:
        raise NetlistError(f"{kind.value} {cid} takes no clock", lineno)
    return Cell(cid, kind, ins, outs, clk, lineno)


def parse_netlist(text: str) -> Netlist:
    cells: dict[str, Cell] = {}
    dead = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cell = _parse_line(line, lineno)
        if cell.id in cells:
            raise NetlistError(f"duplicate cell id {cell.id!r}", lineno)
        cells[cell.id] = cell
        if "state=open" in line.split():
            dead.add(cell.id)
    net = Netlist(cells, frozenset(dead))
    validate(net)
    return net


def serialize_netlist(net: Netlist, header: str | None = None) -> str:
    lines = [f"# {h}" if h else "#" for h in header.splitlines()] if header else []
    lines += [net.cells[cid].to_line(cid in net.dead) for cid in sorted(net.cells)]
    return "\n".join(lines) + "\n"


def load_netlist(path) -> Netlist:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


def bundled_netlist_text(name: str = "rm13.net") -> str:
    return resources.files("sfqecc.data").joinpath(name).read_text(encoding="utf-8")


# ------------------------------------------------------------- validation


def validate(net: Netlist) -> None:
    """Raise NetlistError on the first structural rule that is broken."""
    if not net.cells:
        raise NetlistError("netlist has no cells")

    drivers: dict[str, list[Cell]] = defaultdict(list)
    receivers: dict[str, list[Cell]] = defaultdict(list)
    for c in net.cells.values():
        for n in c.outputs:
            drivers[n].append(c)
        for n in c.inputs + ((c.clock,) if c.clock else ()):
            receivers[n].append(c)

    for n, ds in drivers.items():
        if len(ds) > 1 or is_input_net(n) or n == CLOCK_NET:
            raise NetlistError(f"net {n} has multiple drivers", ds[-1].line)
        if is_output_net(n) and n in receivers:
            raise NetlistError(f"output port {n} is also read inside the netlist", receivers[n][0].line)
    for n, rs in receivers.items():
        if len(rs) > 1:
            raise NetlistError(f"net {n} has fan-out {len(rs)}; insert a SPLITTER", rs[-1].line)
    for n, rs in receivers.items():
        if n not in drivers and not (is_input_net(n) or n == CLOCK_NET):
            raise NetlistError(f"net {n} is read but never driven", rs[0].line)
    for n, ds in drivers.items():
        if n not in receivers and not is_output_net(n):
            raise NetlistError(f"net {n} is driven but never read (dangling)", ds[0].line)

    clock_nets = net.clock_nets
    for c in net.cells.values():
        if c.kind in CLOCKED and c.clock not in clock_nets:
            raise NetlistError(f"{c.kind.value} {c.id} is not clocked from the clock tree", c.line)
        if c.id not in net.clock_tree and any(n in clock_nets for n in c.inputs):
            raise NetlistError(f"{c.id} uses a clock net as data", c.line)

    topological_order(net)


def topological_order(net: Netlist) -> list[str]:
    """Data-path order of the non-clock-tree cells (clock tree excluded)."""
    tree = net.clock_tree
    preds = {}
    for cid, c in net.cells.items():
        if cid in tree:
            continue
        preds[cid] = {net.driver[n] for n in c.inputs if n in net.driver}
    order, state = [], {}

    for start in sorted(preds):
        stack = [(start, iter(sorted(preds[start])))]
        if state.get(start):
            continue
        state[start] = 1
        while stack:
            cid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                state[cid] = 2
                order.append(cid)
            elif state.get(nxt) == 1:
                raise NetlistError(f"combinational loop through {nxt}", net.cells[nxt].line)
            elif not state.get(nxt):
                state[nxt] = 1
                stack.append((nxt, iter(sorted(preds[nxt]))))
    return order


def stage_depths(net: Netlist) -> dict[str, set[int]]:
    """For each cell: the set of clocked-stage counts on paths reaching its output."""
    depth: dict[str, set[int]] = {}
    for cid in topological_order(net):
        c = net.cells[cid]
        incoming = set()
        for n in c.inputs:
            incoming |= depth[net.driver[n]] if n in net.driver else {0}
        if not c.inputs:
            incoming = {0}
        depth[cid] = {d + 1 for d in incoming} if c.kind in CLOCKED else incoming
    return depth


def latency(net: Netlist) -> int:
    """Clocked stages between inputs and outputs; raises if unbalanced."""
    depth = stage_depths(net)
    seen = set()
    for cid, ds in depth.items():
        c = net.cells[cid]
        if len(ds) > 1:
            raise NetlistError(f"unbalanced paths into {cid}: {sorted(ds)} clocked stages", c.line)
        if any(is_output_net(n) for n in c.outputs):
            seen |= ds
    if len(seen) > 1:
        raise NetlistError(f"outputs sit at different depths {sorted(seen)}")
    return seen.pop() if seen else 0


def structure_report(net: Netlist) -> dict:
    validate(net)
    try:
        lat, balanced = latency(net), True
    except NetlistError:
        lat, balanced = None, False
    return {
        "cells": len(net),
        "census": net.census(),
        "inputs": list(net.inputs),
        "outputs": list(net.outputs),
        "faultable": len(faultable_cells(net)),
        "balanced": balanced,
        "latency": lat,
        "open": sorted(net.dead),
    }


def fanin_cone(net: Netlist, output: str) -> set[str]:
    """Data-path cells feeding an output net (clock tree excluded)."""
    cone, frontier = set(), [output]
    while frontier:
        cid = net.driver.get(frontier.pop())
        if cid is None or cid in cone:
            continue
        cone.add(cid)
        frontier.extend(net.cells[cid].inputs)
    return cone


def fanout_outputs(net: Netlist, cid: str) -> set[str]:
    """Output ports a cell can influence, through data or clock."""
    reached, seen, frontier = set(), set(), [cid]
    while frontier:
        cur = frontier.pop()
        if cur in seen:
            continue
        seen.add(cur)
        for n in net.cells[cur].outputs:
            if is_output_net(n):
                reached.add(n)
            elif n in net.receiver:
                frontier.append(net.receiver[n])
    return reached


def shared_clock_groups(net: Netlist) -> list[tuple[str, str, str]]:
    """(cell_a, cell_b, splitter) for clock splitters driving two clocked cells."""
    groups = []
    for sid in sorted(net.clock_tree):
        targets = [net.receiver.get(n) for n in net.cells[sid].outputs]
        if all(t is not None and net.cells[t].kind in CLOCKED for t in targets):
            groups.append((targets[0], targets[1], sid))
    return groups


# ---------------------------------------------------------------- builders


class _Builder:
    def __init__(self):
        self.cells: dict[str, Cell] = {}

    def add(self, cid, kind, inputs=(), outputs=(), clock=None):
        self.cells[cid] = Cell(cid, CellKind(kind), tuple(inputs), tuple(outputs), clock)

    def fanout(self, net: str, k: int) -> list[str]:
        """Split ``net`` into ``k`` single-receiver nets with a balanced splitter tree."""
        if k == 1:
            return [net]
        a, b = f"{net}a", f"{net}b"
        self.add(f"spl_{net}", CellKind.SPLITTER, [net], [a, b])
        half = (k + 1) // 2
        return self.fanout(a, half) + self.fanout(b, k - half)

    def build(self) -> Netlist:
        net = Netlist(dict(sorted(self.cells.items())))
        validate(net)
        return net


# stage-1 cells: name -> (kind, sources)
_RM13_STAGE1 = {
    "xor_m1m2": ("XOR", ["m1", "m2"]),
    "xor_m1m3": ("XOR", ["m1", "m3"]),
    "xor_m2m4": ("XOR", ["m2", "m4"]),
    "dff_m1": ("DFF", ["m1"]),
    "dff_c8_1": ("DFF", ["m1"]),
    "dff_m2": ("DFF", ["m2"]),
    "dff_m4": ("DFF", ["m4"]),
}
# stage-2 cells, one per codeword bit
_RM13_STAGE2 = {
    "xor_c1": ("XOR", ["xor_m1m3", "xor_m2m4"]),
    "xor_c2": ("XOR", ["xor_m1m3", "dff_m2"]),
    "xor_c3": ("XOR", ["xor_m1m2", "dff_m4"]),
    "dff_c4": ("DFF", ["xor_m1m2"]),
    "xor_c5": ("XOR", ["xor_m1m3", "dff_m4"]),
    "dff_c6": ("DFF", ["xor_m1m3"]),
    "xor_c7": ("XOR", ["dff_m1", "dff_m4"]),
    "dff_c8_2": ("DFF", ["dff_c8_1"]),
}
# clock splitter -> two children (clocked cells or other splitters)
_RM13_CLOCK = {
    "clk_root": ("clk_top_a", "clk_top_b"),
    "clk_top_a": ("clk_c12", "clk_c78"),
    "clk_top_b": ("clk_sa", "clk_sb"),
    "clk_c12": ("clk_c1", "clk_c2"),
    "clk_c78": ("clk_c7", "clk_c8"),
    "clk_sa": ("clk_s1a", "clk_s1b"),
    "clk_sb": ("clk_s2", "dff_c6"),
    "clk_c1": ("xor_c1", "xor_m2m4"),
    "clk_c2": ("xor_c2", "dff_m2"),
    "clk_c7": ("xor_c7", "dff_m1"),
    "clk_c8": ("dff_c8_1", "dff_c8_2"),
    "clk_s1a": ("xor_m1m2", "xor_m1m3"),
    "clk_s1b": ("dff_m4", "dff_c4"),
    "clk_s2": ("xor_c3", "xor_c5"),
}


def _place_clock_tree(b: _Builder, tree: dict[str, tuple[str, str]], root: str) -> dict[str, str]:
    clock_of = {}

    def walk(sid, in_net):
        outs = [f"k_{child}" for child in tree[sid]]
        b.add(sid, CellKind.SPLITTER, [in_net], outs)
        for child, net in zip(tree[sid], outs):
            if child in tree:
                walk(child, net)
            else:
                clock_of[child] = net

    walk(root, CLOCK_NET)
    return clock_of


def _consumers(stages: Iterable[dict]) -> dict[str, list[str]]:
    uses = defaultdict(list)
    for stage in stages:
        for cid, (_, srcs) in stage.items():
            for s in srcs:
                uses[s].append(cid)
    return uses


def build_rm13_reference() -> Netlist:
    """Two-stage RM(1,3) encoder: 8 XOR, 7 DFF, 12 data + 14 clock splitters.

    Every path crosses exactly two clocked cells. c8 runs through a private
    DFF pair; c1, c2 and c7 each end in a private (stage-2, stage-1) pair,
    and every private pair shares one leaf splitter of the clock tree.
    """
    b = _Builder()
    clock_of = _place_clock_tree(b, _RM13_CLOCK, "clk_root")
    stages = (_RM13_STAGE1, _RM13_STAGE2)
    uses = _consumers(stages)

    # net feeding (consumer, source) after splitter insertion
    feed: dict[tuple[str, str], str] = {}
    for i in range(1, 5):
        b.add(f"dc_m{i}", CellKind.DC2SFQ, [f"M{i}"], [f"m{i}"])
    for src, consumers in uses.items():
        for consumer, net in zip(consumers, b.fanout(src, len(consumers))):
            feed[consumer, src] = net
    for stage in stages:
        for cid, (kind, srcs) in stage.items():
            b.add(cid, kind, [feed[cid, s] for s in srcs], [cid], clock_of[cid])
    for i, cid in enumerate(_RM13_STAGE2, start=1):
        b.add(f"out_c{i}", CellKind.SFQ2DC, [cid], [f"C{i}"])
    return b.build()


def build_no_encoder(channels: int = 4) -> Netlist:
    """Bare link: each message bit drives its own SFQ-to-DC converter."""
    b = _Builder()
    for i in range(1, channels + 1):
        b.add(f"dc_m{i}", CellKind.DC2SFQ, [f"M{i}"], [f"m{i}"])
        b.add(f"out_c{i}", CellKind.SFQ2DC, [f"m{i}"], [f"C{i}"])
    return b.build()


# ----------------------------------------------------------------- faults


@dataclass(frozen=True)
class FaultPlan:
    open_cells: frozenset[str] = frozenset()
    failed_cells: frozenset[str] = frozenset()
    seed: int | None = None
    realization_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "open_cells", frozenset(self.open_cells))
        object.__setattr__(self, "failed_cells", frozenset(self.failed_cells))

    @property
    def dead(self) -> frozenset[str]:
        return self.open_cells | self.failed_cells

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "realization_index": self.realization_index,
            "open_cells": sorted(self.open_cells),
            "failed_cells": sorted(self.failed_cells),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "FaultPlan":
        unknown = set(data) - {"seed", "realization_index", "open_cells", "failed_cells"}
        if unknown:
            raise ValueError(f"unknown fault plan keys: {sorted(unknown)}")
        return cls(
            frozenset(data.get("open_cells", ())),
            frozenset(data.get("failed_cells", ())),
            data.get("seed"),
            int(data.get("realization_index", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "FaultPlan":
        return cls.from_dict(json.loads(text))


def inject_faults(net: Netlist, plan: FaultPlan) -> Netlist:
    unknown = sorted(plan.dead - set(net.cells))
    if unknown:
        raise NetlistError(f"fault plan names unknown cells: {', '.join(unknown)}")
    if plan.dead <= net.dead:
        return net
    return Netlist(net.cells, net.dead | plan.dead)


def fault_uniforms(net: Netlist, seed: int) -> np.ndarray:
    """One U[0, 1) draw per faultable cell; a cell is open at p iff draw < p."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    return rng.random(len(faultable_cells(net)))


def sample_fault_plan(net: Netlist, fault_prob: float, ppv=None, seed: int = 0, realization_index: int = 0) -> FaultPlan:
    """Independent open faults per cell plus spread-induced failures.

    The open-fault draws for a given seed do not depend on ``fault_prob``,
    so plans at a smaller probability are subsets of plans at a larger one.
    """
    from .spread import apply_spread

    if not 0.0 <= fault_prob <= 1.0:
        raise ValueError(f"fault_prob must be in [0, 1], got {fault_prob}")
    cells = faultable_cells(net)
    u = fault_uniforms(net, seed)
    opened = frozenset(cid for cid, x in zip(cells, u) if x < fault_prob)
    failed = apply_spread(net, ppv, seed)
    return FaultPlan(opened, failed, seed, realization_index)
