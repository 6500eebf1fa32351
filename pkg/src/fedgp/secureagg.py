"""Pairwise-masked fixed-point secure summation (simulation grade).

Real vectors are encoded round-to-nearest into a mod-2^64 ring at scale 2^16.
Client i adds sum_{j>i} PRG(seed,i,j) - sum_{j<i} PRG(seed,j,i) to its encoded
vector; the masks telescope to zero word-exactly over the full participant
set, so the server can decode only the sum. Dropouts are handled by a
simplified seed escrow: the server subtracts the dropped clients' residual
mask words recomputed from the escrowed pair seeds.

PRG (pinned for fixture stability): numpy's Philox counter generator keyed
with the first 128 bits of SHA-256("fedgp-mask|{round_seed}|{i}|{j}") for the
ordered pair i < j; mask words are the generator's raw byte stream read as
little-endian u64.

Range contract: encode accepts |v| < 2^40 per coordinate. Decoding recovers
the signed sum exactly (up to the 2^-16 per-contributor quantization) whenever
|sum of true values| < 2^47 per coordinate, e.g. up to 2^20 contributors of
magnitude below ~2^27 each. A sum of 2^20 contributors each at the encode
limit would exceed the ring and is NOT recoverable; decode validates the
declared contributor count against this bound.

This exercises the aggregate-only server property for the federation
simulation. It is NOT a hardened cryptographic implementation: there is no key
agreement, no authentication, and a single participant's share (K=1) is just
its encoded plaintext.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NumericalError

SCALE = 2 ** 16
ENCODE_LIMIT = 2.0 ** 40
# |sum| below this decodes exactly: 2^63 / SCALE.
SUM_LIMIT = 2.0 ** 47
MAX_CONTRIBUTORS = 2 ** 20


@dataclass(frozen=True)
class FixedPointVector:
    """Ring elements (u64, mod 2^64) at fixed scale 2^16."""

    words: np.ndarray

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.uint64).copy()
        if words.ndim != 1:
            raise ArgumentError(f"words must be a vector, got shape {words.shape}")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @property
    def scale(self) -> int:
        return SCALE

    def __len__(self) -> int:
        return self.words.shape[0]


@dataclass(frozen=True)
class MaskedShare:
    client_id: int
    round_index: int
    words: np.ndarray

    def __post_init__(self):
        words = np.asarray(self.words, dtype=np.uint64).copy()
        if words.ndim != 1:
            raise ArgumentError(f"share words must be a vector, got shape {words.shape}")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)
        if not (0 <= int(self.client_id) < 2 ** 32):
            raise ArgumentError("client_id must fit in u32")
        if not (0 <= int(self.round_index) < 2 ** 32):
            raise ArgumentError("round_index must fit in u32")


def encode(v) -> FixedPointVector:
    """Round-to-nearest fixed-point encoding; |v_i| < 2^40 required."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ArgumentError(f"encode takes a vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ArgumentError("cannot encode non-finite values")
    if np.any(np.abs(v) >= ENCODE_LIMIT):
        raise ArgumentError(f"values must satisfy |v| < 2^40, got max {np.max(np.abs(v)):.3e}")
    signed = np.rint(v * SCALE).astype(np.int64)
    return FixedPointVector(signed.astype(np.uint64))


def decode(fp: FixedPointVector, n_contributors: int = 1) -> np.ndarray:
    """Signed decode of an (aggregated) fixed-point vector.

    Exact for |true sum| < 2^47 per coordinate; n_contributors documents (and
    bounds) how many encoded vectors were summed into fp.
    """
    if not isinstance(fp, FixedPointVector):
        fp = FixedPointVector(fp)
    if not (1 <= int(n_contributors) <= MAX_CONTRIBUTORS):
        raise ArgumentError(f"n_contributors must be in [1, 2^20], got {n_contributors}")
    return fp.words.astype(np.int64) / SCALE


def _pair_words(round_seed: int, low: int, high: int, dim: int) -> np.ndarray:
    key = hashlib.sha256(f"fedgp-mask|{round_seed}|{low}|{high}".encode()).digest()[:16]
    rng = np.random.Generator(np.random.Philox(key=int.from_bytes(key, "little")))
    return np.frombuffer(rng.bytes(dim * 8), dtype="<u8").copy()


def derive_pairwise_masks(round_seed: int, my_id: int, peer_ids, dim: int) -> np.ndarray:
    """mask(i) = sum_{j>i} PRG(seed,i,j) - sum_{j<i} PRG(seed,j,i), mod 2^64."""
    peer_ids = [int(j) for j in peer_ids]
    ids = [int(my_id)] + peer_ids
    if len(set(ids)) != len(ids):
        raise ArgumentError("participant ids must be distinct")
    if dim < 1:
        raise ArgumentError("dim must be >= 1")
    mask = np.zeros(dim, dtype=np.uint64)
    me = int(my_id)
    for j in peer_ids:
        if me < j:
            mask += _pair_words(round_seed, me, j, dim)
        else:
            mask -= _pair_words(round_seed, j, me, dim)
    return mask


def masked_upload(v, masks, *, client_id: int = 0, round_index: int = 0) -> MaskedShare:
    """Encode a client vector and add its pairwise mask words."""
    fp = encode(v)
    masks = np.asarray(masks, dtype=np.uint64)
    if masks.shape != fp.words.shape:
        raise ArgumentError(f"mask shape {masks.shape} != vector shape {fp.words.shape}")
    return MaskedShare(client_id=client_id, round_index=round_index,
                       words=fp.words + masks)


def aggregate(shares) -> np.ndarray:
    """Sum masked shares (masks cancel) and decode the total."""
    shares = list(shares)
    if not shares:
        raise ArgumentError("aggregate needs at least one share")
    rounds = {s.round_index for s in shares}
    if len(rounds) != 1:
        raise ArgumentError(f"shares span multiple rounds: {sorted(rounds)}")
    dims = {len(s.words) for s in shares}
    if len(dims) != 1:
        raise ArgumentError(f"shares disagree on dimension: {sorted(dims)}")
    ids = [s.client_id for s in shares]
    if len(set(ids)) != len(ids):
        raise ArgumentError("duplicate client ids in shares")
    total = np.zeros(dims.pop(), dtype=np.uint64)
    for s in shares:
        total += s.words
    return decode(FixedPointVector(total), n_contributors=len(shares))


@dataclass(frozen=True)
class SeedEscrow:
    """Server-side escrow of the round seed, enough to rebuild any pair's mask."""

    round_seed: int

    def pair_words(self, id_a: int, id_b: int, dim: int) -> np.ndarray:
        low, high = (id_a, id_b) if id_a < id_b else (id_b, id_a)
        if low == high:
            raise ArgumentError("a pair needs two distinct ids")
        return _pair_words(self.round_seed, low, high, dim)


def handle_dropout(round_index: int, dropped_ids, surviving_shares,
                   escrow: SeedEscrow) -> np.ndarray:
    """Recover the survivors' sum after dropouts by subtracting residual masks."""
    dropped = [int(d) for d in dropped_ids]
    shares = list(surviving_shares)
    if not shares:
        raise ArgumentError("all clients dropped; nothing to aggregate")
    survivor_ids = {s.client_id for s in shares}
    if survivor_ids & set(dropped):
        raise ArgumentError("a client cannot both drop and survive")
    if escrow is None:
        raise NumericalError("missing seed escrow; round unrecoverable")
    rounds = {s.round_index for s in shares}
    if rounds != {round_index}:
        raise ArgumentError(f"shares are not all from round {round_index}")
    dim = len(shares[0].words)
    total = np.zeros(dim, dtype=np.uint64)
    for s in shares:
        total += s.words
    # Survivor s's mask holds +words(s, d) when s < d and -words(d, s) when
    # d < s for every dropped d; remove those residuals.
    for s in shares:
        for d in dropped:
            w = escrow.pair_words(s.client_id, d, dim)
            if s.client_id < d:
                total -= w
            else:
                total += w
    return decode(FixedPointVector(total), n_contributors=len(shares))


def share_to_bytes(share: MaskedShare) -> bytes:
    """Wire format, little-endian: u32 round, u32 client_id, u32 dim, u64[dim]."""
    return (struct.pack("<III", share.round_index, share.client_id, len(share.words))
            + share.words.astype("<u8").tobytes())


def share_from_bytes(buf: bytes) -> MaskedShare:
    if len(buf) < 12:
        raise ArgumentError(f"share buffer too short ({len(buf)} bytes)")
    round_index, client_id, dim = struct.unpack("<III", buf[:12])
    expected = 12 + 8 * dim
    if len(buf) != expected:
        raise ArgumentError(f"share buffer length {len(buf)} != expected {expected}")
    words = np.frombuffer(buf[12:], dtype="<u8").copy()
    return MaskedShare(client_id=client_id, round_index=round_index, words=words)
