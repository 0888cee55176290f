"""Reed-Muller RM(r, m) codes over GF(2).

Bit vectors are 1-D ``numpy.uint8`` arrays (or anything array-like of 0/1).
Index 0 is bit 1 in the usual m1..m4 / c1..c8 notation, i.e. the leftmost,
first transmitted bit.
"""

from __future__ import annotations

import enum
import functools
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

import numpy as np

MAX_M = 16


class CodecError(ValueError):
    """Bad code parameters or a bit vector of the wrong shape."""


class DecodeStatus(str, enum.Enum):
    CLEAN = "clean"
    CORRECTED = "corrected"
    DETECTED = "detected_uncorrectable"


class DecodeMode(str, enum.Enum):
    CORRECT = "correct"
    DETECT_ONLY = "detect_only"


def parse_bits(text: str) -> np.ndarray:
    """``"1010"`` -> ``array([1, 0, 1, 0], dtype=uint8)``."""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise CodecError(f"not a bit string: {text!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


def format_bits(bits: Iterable[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def _as_bits(bits, length: int, what: str) -> np.ndarray:
    if isinstance(bits, str):
        bits = parse_bits(bits)
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1 or arr.shape[0] != length:
        raise CodecError(f"{what} must have {length} bits, got shape {arr.shape}")
    if arr.size and arr.max() > 1:
        raise CodecError(f"{what} contains non-binary values")
    return arr


def _coordinate_rows(m: int) -> np.ndarray:
    # x_i is 1 on the first half of each block of length 2^(m-i), so that
    # RM(1,3) rows come out as 11110000, 11001100, 10101010.
    j = np.arange(2**m)
    return np.array([1 - ((j >> (m - 1 - i)) & 1) for i in range(m)], dtype=np.uint8).reshape(m, 2**m)


def _monomials(r: int, m: int) -> list[tuple[int, ...]]:
    return [s for d in range(r + 1) for s in itertools.combinations(range(m), d)]


def _generator(r: int, m: int) -> np.ndarray:
    x = _coordinate_rows(m)
    rows = []
    for s in _monomials(r, m):
        row = np.ones(2**m, dtype=np.uint8)
        for i in s:
            row &= x[i]
        rows.append(row)
    return np.array(rows, dtype=np.uint8).reshape(len(rows), 2**m)


@dataclass(frozen=True, eq=False)
class RmCode:
    """RM(r, m): length 2^m, dimension sum_{i<=r} C(m, i), distance 2^(m-r).

    Rows of ``G`` are evaluation vectors of the monomials of degree <= r,
    grouped by degree and ordered lexicographically within a degree.
    """

    r: int
    m: int
    G: np.ndarray = field(repr=False)
    monomials: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def n(self) -> int:
        return 2**self.m

    @property
    def k(self) -> int:
        return self.G.shape[0]

    @property
    def d_min(self) -> int:
        return 2 ** (self.m - self.r)

    @property
    def t(self) -> int:
        """Number of errors the decoder is allowed to correct."""
        return (self.d_min - 1) // 2

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RmCode) and (self.r, self.m) == (other.r, other.m)

    def __hash__(self) -> int:
        return hash((self.r, self.m))


@functools.lru_cache(maxsize=None)
def build_rm_code(r: int, m: int) -> RmCode:
    if not isinstance(r, int) or not isinstance(m, int):
        raise CodecError("r and m must be integers")
    if m < 1 or m > MAX_M or r < 0 or r > m:
        raise CodecError(f"need 0 <= r <= m and 1 <= m <= {MAX_M}, got r={r}, m={m}")
    G = _generator(r, m)
    G.setflags(write=False)
    code = RmCode(r, m, G, tuple(_monomials(r, m)))
    assert code.k == sum(comb(m, i) for i in range(r + 1))
    return code


RM13 = build_rm_code(1, 3)


def encode(code: RmCode, message) -> np.ndarray:
    """codeword = message @ G (mod 2)."""
    msg = _as_bits(message, code.k, "message")
    return (msg.astype(np.int64) @ code.G % 2).astype(np.uint8)


def encode_xor_oracle(message) -> np.ndarray:
    """RM(1,3) encoder written out bit by bit as XOR expressions."""
    m1, m2, m3, m4 = (int(b) for b in _as_bits(message, 4, "message"))
    return np.array(
        [
            m1 ^ m2 ^ m3 ^ m4,
            m1 ^ m2 ^ m3,
            m1 ^ m2 ^ m4,
            m1 ^ m2,
            m1 ^ m3 ^ m4,
            m1 ^ m3,
            m1 ^ m4,
            m1,
        ],
        dtype=np.uint8,
    )


@dataclass(frozen=True)
class DecodeOutcome:
    decoded: np.ndarray | None
    status: DecodeStatus
    corrected_positions: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status is not DecodeStatus.DETECTED


@functools.lru_cache(maxsize=None)
def _vote_groups(r: int, m: int) -> tuple[np.ndarray, ...]:
    """Position index arrays for the majority votes of each monomial.

    For monomial x_S the votes are parities over the 2^(m-|S|) cosets
    obtained by fixing every variable outside S; each coset has 2^|S| points.
    """
    n = 2**m
    groups = []
    for s in _monomials(r, m):
        rest = [i for i in range(m) if i not in s]
        # key identifying the coset: bits of j on the variables outside S
        key = np.zeros(n, dtype=np.int64)
        j = np.arange(n)
        for i in rest:
            key = (key << 1) | ((j >> (m - 1 - i)) & 1)
        order = np.argsort(key, kind="stable")
        groups.append(order.reshape(2 ** len(rest), 2 ** len(s)))
    return tuple(groups)


@functools.lru_cache(maxsize=None)
def _parity_check(r: int, m: int) -> np.ndarray | None:
    if r >= m:
        return None
    return build_rm_code(m - r - 1, m).G


def is_codeword(code: RmCode, word) -> bool:
    w = _as_bits(word, code.n, "received word")
    H = _parity_check(code.r, code.m)
    return H is None or not (H.astype(np.int64) @ w % 2).any()


def _majority_message(code: RmCode, received: np.ndarray) -> np.ndarray | None:
    residual = received.astype(np.int64)
    message = np.zeros(code.k, dtype=np.uint8)
    groups = _vote_groups(code.r, code.m)
    for degree in range(code.r, -1, -1):
        rows = [i for i, s in enumerate(code.monomials) if len(s) == degree]
        for i in rows:
            votes = residual[groups[i]].sum(axis=1) % 2
            ones = int(votes.sum())
            zeros = votes.size - ones
            if ones == zeros:
                return None
            message[i] = ones > zeros
        for i in rows:
            if message[i]:
                residual ^= code.G[i]
    return message


def decode(code: RmCode, received, mode: DecodeMode | str = DecodeMode.CORRECT) -> DecodeOutcome:
    """Majority-logic (Reed) decoding.

    ``correct`` mode accepts the decoded message only if its codeword lies
    within ``code.t`` of the received word; a tied vote or a larger residual
    is reported as ``detected_uncorrectable``. ``detect_only`` never corrects.
    """
    try:
        mode = DecodeMode(mode)
    except ValueError:
        raise CodecError(f"unknown decode mode {mode!r}") from None
    word = _as_bits(received, code.n, "received word")
    if mode is DecodeMode.DETECT_ONLY:
        if not is_codeword(code, word):
            return DecodeOutcome(None, DecodeStatus.DETECTED)
        return DecodeOutcome(_majority_message(code, word), DecodeStatus.CLEAN)

    message = _majority_message(code, word)
    if message is None:
        return DecodeOutcome(None, DecodeStatus.DETECTED)
    diff = np.flatnonzero(encode(code, message) ^ word)
    if diff.size == 0:
        return DecodeOutcome(message, DecodeStatus.CLEAN)
    if diff.size <= code.t:
        return DecodeOutcome(message, DecodeStatus.CORRECTED, tuple(int(i) + 1 for i in diff))
    return DecodeOutcome(None, DecodeStatus.DETECTED)


@dataclass(frozen=True)
class PatternCounts:
    corrected_ok: int = 0
    miscorrected: int = 0
    detected: int = 0

    @property
    def total(self) -> int:
        return self.corrected_ok + self.miscorrected + self.detected


CENSUS_LIMIT = 5_000_000


def all_messages(k: int) -> np.ndarray:
    """All 2^k messages in counting order, m1 most significant."""
    return np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.uint8).reshape(2**k, k)


def error_pattern_census(code: RmCode, max_weight: int) -> dict[int, PatternCounts]:
    """Decode every (codeword, error pattern) pair with weight <= max_weight."""
    if code.n > 16:
        raise CodecError("census needs n <= 16")
    max_weight = min(max_weight, code.n)
    cases = 2**code.k * sum(comb(code.n, w) for w in range(max_weight + 1))
    if cases > CENSUS_LIMIT:
        raise CodecError(f"census would decode {cases} words (limit {CENSUS_LIMIT})")

    messages = all_messages(code.k)
    codewords = [encode(code, msg) for msg in messages]
    table = {}
    for w in range(max_weight + 1):
        ok = bad = det = 0
        for positions in itertools.combinations(range(code.n), w):
            err = np.zeros(code.n, dtype=np.uint8)
            err[list(positions)] = 1
            for msg, cw in zip(messages, codewords):
                out = decode(code, cw ^ err)
                if not out.ok:
                    det += 1
                elif np.array_equal(out.decoded, msg):
                    ok += 1
                else:
                    bad += 1
        table[w] = PatternCounts(ok, bad, det)
    return table


@functools.lru_cache(maxsize=None)
def rm13_decode_table() -> dict[int, tuple[int, ...] | None]:
    """Decoded RM(1,3) message for each of the 256 received words.

    Keys are the received word read as an integer with c1 as the MSB; values
    are the decoded message bits, or ``None`` when the decoder gives up.
    """
    table = {}
    for word in itertools.product((0, 1), repeat=8):
        out = decode(RM13, np.array(word, dtype=np.uint8))
        key = int("".join(map(str, word)), 2)
        table[key] = tuple(int(b) for b in out.decoded) if out.ok else None
    return table


def hamming_weight(bits: Sequence[int]) -> int:
    return int(np.count_nonzero(np.asarray(bits)))
