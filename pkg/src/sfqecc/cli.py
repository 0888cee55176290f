"""Command-line front end.

Every subcommand builds a service request and prints the response. By
default the request is handled in-process; ``--server URL`` sends it to a
running ``sfqecc serve`` instead.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Callable, Sequence

import pydantic

from .montecarlo import ALL_ARMS, Arm
from .service import schemas as s
from .service import app as api

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ------------------------------------------------------------------ backends

ENDPOINTS: dict[str, tuple[Callable, type[pydantic.BaseModel]]] = {
    "encode": (api.encode, s.EncodeResponse),
    "decode": (api.decode, s.DecodeResponse),
    "simulate": (api.simulate, s.SimulateResponse),
    "montecarlo": (api.montecarlo, s.MonteCarloResponse),
    "census": (api.census, s.CensusResponse),
    "validate": (api.validate, s.ValidateResponse),
}


class LocalBackend:
    def call(self, name: str, req: pydantic.BaseModel):
        try:
            return ENDPOINTS[name][0](req)
        except ValueError as exc:
            raise DataError(str(exc)) from exc


class RemoteBackend:
    def __init__(self, url: str | None = None, client=None):
        import httpx

        self._httpx = httpx
        self.client = client or httpx.Client(base_url=url, timeout=None)

    def call(self, name: str, req: pydantic.BaseModel):
        try:
            resp = self.client.post(f"/{name}", json=req.model_dump(mode="json"))
        except self._httpx.TransportError as exc:
            raise OSError(f"cannot reach server: {exc}") from exc
        if resp.status_code == 422:
            raise DataError(str(resp.json().get("detail")))
        resp.raise_for_status()
        return ENDPOINTS[name][1].model_validate(resp.json())


# ------------------------------------------------------------------- parsing


def _bits(text: str) -> str:
    if not text or set(text) - {"0", "1"}:
        raise argparse.ArgumentTypeError(f"not a bit string: {text!r}")
    return text


def _rm(text: str) -> tuple[int, int]:
    try:
        r, m = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected r,m, got {text!r}") from None
    return r, m


def _bit_list(text: str) -> list[str]:
    return [_bits(t) for t in text.split(",") if t]


def _prob_list(text: str) -> list[float]:
    try:
        probs = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad probability list {text!r}") from None
    if not probs or any(not 0.0 <= p <= 1.0 for p in probs):
        raise argparse.ArgumentTypeError(f"probabilities must be in [0, 1]: {text!r}")
    return probs


def _arms(text: str) -> list[Arm]:
    if text == "all":
        return list(ALL_ARMS)
    try:
        return [Arm(t) for t in text.split(",")]
    except ValueError:
        choices = ", ".join(a.value for a in ALL_ARMS)
        raise argparse.ArgumentTypeError(f"arms are 'all' or a list of: {choices}") from None


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--out", default=".", help="output directory for files")
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--server", help="send requests to a running service at this URL")

    parser = _Parser(
        prog="sfqecc",
        description="RM(1,3) SFQ encoder workbench",
        epilog="--seed, --out, --config and --server may be given before or after the subcommand.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = subs["encode"] = sub.add_parser("encode", parents=[common], help="encode a message")
    p.add_argument("bits", type=_bits)
    p.add_argument("--rm", type=_rm, default=(1, 3), help="code parameters r,m (default 1,3)")

    p = subs["decode"] = sub.add_parser("decode", parents=[common], help="decode a received word")
    p.add_argument("bits", type=_bits)
    p.add_argument("--mode", choices=["correct", "detect_only"], default="correct")
    p.add_argument("--rm", type=_rm, default=(1, 3))

    p = subs["simulate"] = sub.add_parser("simulate", parents=[common], help="run messages through a netlist")
    p.add_argument("--netlist", help="netlist file (default: --builtin)")
    p.add_argument("--builtin", choices=["rm13", "no_encoder"], default="rm13")
    p.add_argument("--messages", type=_bit_list, default=[], help="comma-separated messages, e.g. 1010,0110")
    p.add_argument("--faults", help="fault plan JSON, or @file")
    p.add_argument("--trace", help="write a time_ns,channel,level CSV to this file (under --out)")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--samples-per-cycle", type=int, default=8)

    p = subs["montecarlo"] = sub.add_parser("montecarlo", parents=[common], help="CDF of erroneous messages")
    p.add_argument("--arm", type=_arms, default=[Arm.AFTER_ECC], help="arm list or 'all'")
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--messages", type=int, default=100, help="messages per realization")
    p.add_argument("--fault-prob", type=_prob_list, default=[0.0], help="comma-separated open-fault probabilities")
    p.add_argument("--ppv", type=float, help="parameter spread fraction, e.g. 0.2")
    p.add_argument("--workers", type=int, default=1)

    p = subs["census"] = sub.add_parser("census", parents=[common], help="exhaustive fault-tolerance census")
    p.add_argument("--max-size", type=int, default=1)
    p.add_argument("--netlist", help="netlist file (default: built-in RM(1,3) encoder)")

    p = subs["validate"] = sub.add_parser("validate", parents=[common], help="lint a netlist file")
    p.add_argument("netlist")

    p = subs["serve"] = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser, subs


GLOBAL_FLAGS = ("--seed", "--out", "--config", "--server")


def _move_globals(argv: list[str], commands) -> list[str]:
    """Allow ``sfqecc --seed 7 montecarlo ...`` by moving leading global flags after the subcommand."""
    head, i = [], 0
    while i < len(argv) and argv[i].split("=", 1)[0] in GLOBAL_FLAGS:
        step = 1 if "=" in argv[i] else 2
        head += argv[i : i + step]
        i += step
    if head and i < len(argv) and argv[i] in commands:
        return [argv[i], *head, *argv[i + 1 :]]
    return argv


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    argv = _move_globals(list(argv), subs)
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        sub = subs[args.command]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        # config values go through the same converters as command-line text
        for action in sub._actions:
            if action.dest in config and action.type and isinstance(config[action.dest], str):
                config[action.dest] = action.type(config[action.dest])
        sub.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------------ commands


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(out_dir: str, name: str, text: str) -> Path:
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def cmd_encode(args, backend, out) -> None:
    resp = backend.call("encode", s.EncodeRequest(message=args.bits, rm=args.rm))
    print(resp.codeword, file=out)


def cmd_decode(args, backend, out) -> None:
    resp = backend.call("decode", s.DecodeRequest(codeword=args.bits, mode=args.mode, rm=args.rm))
    if resp.status.value == "detected_uncorrectable":
        print(resp.status.value, file=out)
    elif resp.corrected_positions:
        print(f"{resp.message} {resp.status.value} @{','.join(map(str, resp.corrected_positions))}", file=out)
    else:
        print(f"{resp.message} {resp.status.value}", file=out)


def _fault_plan(text: str | None) -> s.FaultPlanModel | None:
    if not text:
        return None
    if text.startswith("@"):
        text = _read(text[1:])
    try:
        return s.FaultPlanModel.model_validate_json(text)
    except pydantic.ValidationError as exc:
        raise DataError(f"bad fault plan: {exc}") from exc


def cmd_simulate(args, backend, out) -> None:
    req = s.SimulateRequest(
        netlist=_read(args.netlist) if args.netlist else None,
        builtin=args.builtin,
        messages=args.messages,
        faults=_fault_plan(args.faults),
        sim=s.SimConfigModel(noise_sigma=args.noise_sigma, samples_per_cycle=args.samples_per_cycle),
        seed=args.seed,
        trace=bool(args.trace),
    )
    resp = backend.call("simulate", req)
    if resp.results:
        print("message transmitted received", file=out)
    for r in resp.results:
        extra = f" differs=@{','.join(map(str, r.differs))}" if r.differs else ""
        print(f"{r.message} {r.transmitted} {r.received}{extra}", file=out)
    if args.trace:
        _write(args.out, args.trace, resp.trace_csv or "")


def cmd_montecarlo(args, backend, out) -> None:
    req = s.MonteCarloRequest(
        arms=args.arm,
        realizations=args.realizations,
        messages=args.messages,
        fault_probs=args.fault_prob,
        ppv=args.ppv,
        seed=args.seed,
        workers=args.workers,
    )
    resp = backend.call("montecarlo", req)
    for run in resp.runs:
        stem = f"cdf_{run.arm.value}_p{run.fault_prob!r}"
        _write(args.out, stem + ".csv", run.csv)
        _write(args.out, stem + ".json", run.json_text)
        print(f"{run.arm.value} fault_prob={run.fault_prob!r} P(N_err=0)={run.p_zero:.4f}", file=out)
    for p, ok in resp.dominance.items():
        print(f"ecc dominance at fault_prob={p}: {'yes' if ok else 'NO'}", file=out)
    if resp.ordered is not None:
        print(f"CDFs ordered by fault_prob: {'yes' if resp.ordered else 'NO'}", file=out)


def cmd_census(args, backend, out) -> None:
    req = s.CensusRequest(max_size=args.max_size, netlist=_read(args.netlist) if args.netlist else None)
    resp = backend.call("census", req)
    _write(args.out, f"census_max{args.max_size}.csv", resp.csv)
    _write(args.out, f"census_max{args.max_size}.json", resp.json_text)
    for size, bins in sorted(resp.summary.items()):
        total = sum(bins.values())
        parts = " ".join(f"{k}={v}" for k, v in bins.items())
        print(f"size {size}: {parts} total={total}", file=out)


def cmd_validate(args, backend, out) -> None:
    resp = backend.call("validate", s.ValidateRequest(netlist=_read(args.netlist)))
    print(json.dumps(resp.model_dump(), indent=2, sort_keys=True), file=out)


def cmd_serve(args, backend, out) -> None:
    import uvicorn

    uvicorn.run(api.app, host=args.host, port=args.port)


COMMANDS = {
    "encode": cmd_encode,
    "decode": cmd_decode,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "census": cmd_census,
    "validate": cmd_validate,
    "serve": cmd_serve,
}


def main(argv: Sequence[str] | None = None, out=None, backend=None) -> int:
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        if backend is None:
            backend = RemoteBackend(args.server) if args.server else LocalBackend()
        COMMANDS[args.command](args, backend, out)
    except (UsageError, argparse.ArgumentTypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
