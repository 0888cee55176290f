"""FastAPI app exposing the codec, simulator, Monte-Carlo engine and census.

The endpoint functions are plain functions as well; the CLI calls them
in-process unless it is pointed at a running server.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import codec, gatesim, montecarlo as mc
from ..netlist import (
    FaultPlan,
    Netlist,
    build_no_encoder,
    build_rm13_reference,
    parse_netlist,
    structure_report,
)
from ..spread import SpreadModel
from . import schemas as s

app = FastAPI(title="sfqecc", version="0.1.0")

BUILTINS = {"rm13": build_rm13_reference, "no_encoder": build_no_encoder}


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    # CodecError and NetlistError are ValueErrors too
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/encode", response_model=s.EncodeResponse)
def encode(req: s.EncodeRequest) -> s.EncodeResponse:
    code = codec.build_rm_code(*req.rm)
    cw = codec.encode(code, codec.parse_bits(req.message))
    return s.EncodeResponse(codeword=codec.format_bits(cw), r=code.r, m=code.m)


@app.post("/decode", response_model=s.DecodeResponse)
def decode(req: s.DecodeRequest) -> s.DecodeResponse:
    code = codec.build_rm_code(*req.rm)
    out = codec.decode(code, codec.parse_bits(req.codeword), req.mode)
    return s.DecodeResponse(
        message=codec.format_bits(out.decoded) if out.decoded is not None and out.ok else None,
        status=out.status,
        corrected_positions=list(out.corrected_positions),
    )


def _netlist(text: str | None, builtin: str = "rm13") -> Netlist:
    return parse_netlist(text) if text is not None else BUILTINS[builtin]()


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    net = _netlist(req.netlist, req.builtin)
    cfg = gatesim.SimConfig(**req.sim.model_dump())
    plan = FaultPlan.from_dict(req.faults.model_dump()) if req.faults else None
    msgs = [codec.parse_bits(m) for m in req.messages]
    lat = gatesim.netlist_latency(net)

    traces = gatesim.simulate(net, plan, msgs, cfg, req.seed)
    received = gatesim.received_codewords(traces, len(msgs), lat, cfg)
    expected = gatesim.transmit(net, None, msgs, replace(cfg, noise_sigma=0.0)) if msgs else received
    results = [
        s.MessageResult(
            message=codec.format_bits(m),
            transmitted=codec.format_bits(tx),
            received=codec.format_bits(rx),
            differs=[int(i) + 1 for i in np.flatnonzero(tx != rx)],
        )
        for m, tx, rx in zip(msgs, expected, received)
    ]
    return s.SimulateResponse(
        latency=lat,
        outputs=list(net.outputs),
        results=results,
        trace_csv=gatesim.trace_csv(traces, cfg) if req.trace else None,
    )


@app.post("/montecarlo", response_model=s.MonteCarloResponse)
def montecarlo(req: s.MonteCarloRequest) -> s.MonteCarloResponse:
    spread = SpreadModel(spread_pct=req.ppv) if req.ppv is not None else None
    arms = list(dict.fromkeys(req.arms))
    probs = list(dict.fromkeys(req.fault_probs))
    base = mc.ExperimentSpec(
        arm=arms[0],
        realizations=req.realizations,
        messages_per_realization=req.messages,
        fault_prob=probs[0],
        spread=spread,
        seed=req.seed,
    )
    results = mc.run_realizations(base, arms, probs, workers=req.workers)

    runs, tables = [], {}
    for arm in arms:
        for p in probs:
            table = mc.CdfTable.from_counts(results[arm, p], replace(base, arm=arm, fault_prob=p).meta())
            tables[arm, p] = table
            runs.append(
                s.CdfRun(
                    arm=arm,
                    fault_prob=p,
                    p_zero=table.p_zero,
                    points=list(table.points),
                    meta=dict(table.meta),
                    csv=mc.cdf_to_csv(table),
                    json_text=mc.cdf_to_json(table),
                )
            )

    dominance = {}
    if mc.Arm.AFTER_ECC in arms and mc.Arm.BEFORE_ECC in arms:
        for p in probs:
            ok = bool((results[mc.Arm.AFTER_ECC, p] <= results[mc.Arm.BEFORE_ECC, p]).all())
            dominance[repr(p)] = ok
    ordered = None
    if len(probs) > 1:
        by_p = sorted(probs)
        ordered = all(
            mc.dominates(tables[arm, lo], tables[arm, hi]) for arm in arms for lo, hi in zip(by_p, by_p[1:])
        )
    return s.MonteCarloResponse(runs=runs, dominance=dominance, ordered=ordered)


@app.post("/census", response_model=s.CensusResponse)
def census(req: s.CensusRequest) -> s.CensusResponse:
    net = _netlist(req.netlist)
    report = mc.fault_tolerance_census(net, req.max_size)
    return s.CensusResponse(
        cell_count=report.cell_count,
        summary=report.summary(),
        csv=mc.census_to_csv(report),
        json_text=mc.census_to_json(report),
    )


@app.post("/validate", response_model=s.ValidateResponse)
def validate(req: s.ValidateRequest) -> s.ValidateResponse:
    return s.ValidateResponse(**structure_report(parse_netlist(req.netlist)))

