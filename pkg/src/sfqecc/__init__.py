"""RM(1,3) error-correcting encoder for SFQ links: codec, netlist, pulse simulator and Monte-Carlo fault analysis."""

from .codec import RM13, DecodeMode, DecodeStatus, RmCode, build_rm_code, decode, encode
from .netlist import Netlist, build_no_encoder, build_rm13_reference, parse_netlist, serialize_netlist

__version__ = "0.1.0"

__all__ = [
    "RM13",
    "DecodeMode",
    "DecodeStatus",
    "Netlist",
    "RmCode",
    "build_no_encoder",
    "build_rm13_reference",
    "build_rm_code",
    "decode",
    "encode",
    "parse_netlist",
    "serialize_netlist",
]
