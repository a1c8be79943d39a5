"""Honest-dealer share generators and k-of-k XOR secret sharing.

Three dealers are provided:

* ``two_share_gen`` deals weighted coins plus, for each party, one defense bit
  per round drawn independently from the current game value.
* ``hid_two_share_gen`` derives every defense of a party from one hidden ±1
  vector and fresh random subsets, so leaked defenses say little about the
  underlying value.
* ``three_share_gen`` deals fair weighted coins to three parties together with,
  for every pair and round, a 3-way shared ``hid_two_share_gen`` output.

Dealer randomness is consumed in a fixed order: coins, then per-party defense
randomness (party 0 first), then the XOR splits (coins, then the defenses of
party 0, then of party 1). Three-party pair rows are generated from child
generators keyed by ``(round, pair)`` so they can be materialised lazily
without changing any value.

Bundles serialise to a fixed byte layout: a little-endian header
``magic(4) version(u8) kind(u8) m(u16) delta(f64) party(u8)`` followed by the
bit-packed (big-endian bit order) fields, matrices row by row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .numerics import ber_tail, ml, ms, sbias

MAGIC = b"FFLP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHdB")

PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 2))
ORDERED_PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))


# ----------------------------------------------------------------------------
# encoding and XOR sharing


@dataclass(frozen=True)
class CoinEncoding:
    """Fixed-width unsigned encoding ``c + m`` of a coin value in ``[-m, m]``."""

    m: int

    @property
    def width(self) -> int:
        return (2 * self.m).bit_length()

    def encode(self, c):
        c = np.asarray(c)
        if np.any(np.abs(c) > self.m):
            raise ValueError("coin value outside [-m, m]")
        return c + self.m

    def decode(self, u):
        u = np.asarray(u)
        if np.any((u < 0) | (u > 2 * self.m)):
            raise ValueError("encoded coin outside [0, 2m]")
        return u - self.m

    def to_bits(self, u) -> np.ndarray:
        """Big-endian bit expansion along a new last axis."""
        u = np.asarray(u, dtype=np.int64)
        shifts = np.arange(self.width - 1, -1, -1)
        return ((u[..., None] >> shifts) & 1).astype(np.uint8)

    def from_bits(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return bits @ (1 << np.arange(self.width - 1, -1, -1))


def xor_split(secret, k: int, rng: np.random.Generator, width: int = 1) -> np.ndarray:
    """Split an integer array into ``k`` XOR shares of ``width`` bits each.

    The first ``k - 1`` shares are uniform; the last one completes the XOR.
    Returns an array of shape ``(k, *secret.shape)``.
    """
    if k < 2:
        raise ValueError("need at least two shares")
    secret = np.asarray(secret, dtype=np.int64)
    if np.any((secret < 0) | (secret >= 1 << width)):
        raise ValueError(f"secret does not fit in {width} bits")
    rand = rng.integers(0, 1 << width, size=(k - 1, *secret.shape), dtype=np.int64)
    last = secret ^ np.bitwise_xor.reduce(rand, axis=0)
    return np.concatenate([rand, last[None]], axis=0)


def xor_reconstruct(shares: Sequence) -> np.ndarray:
    """XOR a sequence of equally shaped share arrays."""
    arrays = [np.asarray(s, dtype=np.int64) for s in shares]
    if len(arrays) < 1:
        raise ValueError("no shares given")
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError("share shapes differ")
    return np.bitwise_xor.reduce(np.stack(arrays), axis=0)


# ----------------------------------------------------------------------------
# two-party bundles


@dataclass
class TwoShareBundle:
    """One party's shares: coin shares ``C``, defense shares for party 0 and party 1."""

    m: int
    delta: float
    party: int
    coins: np.ndarray   # (m,) encoded coin shares
    d0: np.ndarray      # (m+1,) shares of party 0's defenses
    d1: np.ndarray      # (m+1,) shares of party 1's defenses

    def defense(self, owner: int) -> np.ndarray:
        return self.d0 if owner == 0 else self.d1

    def validate(self) -> None:
        enc = CoinEncoding(self.m)
        if self.party not in (0, 1):
            raise ValueError("party id must be 0 or 1")
        if self.coins.shape != (self.m,) or np.any((self.coins < 0) | (self.coins >= 1 << enc.width)):
            raise ValueError("malformed coin shares")
        for d in (self.d0, self.d1):
            if d.shape != (self.m + 1,) or np.any((d != 0) & (d != 1)):
                raise ValueError("malformed defense shares")

    def to_bits(self) -> np.ndarray:
        enc = CoinEncoding(self.m)
        return np.concatenate([enc.to_bits(self.coins).ravel(), self.d0, self.d1]).astype(np.uint8)

    @classmethod
    def from_bits(cls, bits, m: int, party: int, delta: float = float("nan")) -> "TwoShareBundle":
        enc = CoinEncoding(m)
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape != (bundle_bits(m),):
            raise ValueError("wrong bundle length")
        cw = m * enc.width
        coins = enc.from_bits(bits[:cw].reshape(m, enc.width))
        return cls(m, delta, party, coins, bits[cw:cw + m + 1].copy(), bits[cw + m + 1:].copy())

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(MAGIC, FORMAT_VERSION, 2, self.m, float(self.delta), self.party)
        return head + np.packbits(self.to_bits()).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "TwoShareBundle":
        magic, version, kind, m, delta, party = _HEADER.unpack_from(data)
        if magic != MAGIC or version != FORMAT_VERSION or kind != 2:
            raise ValueError("not a two-party bundle")
        n = bundle_bits(m)
        bits = np.unpackbits(np.frombuffer(data[_HEADER.size:], dtype=np.uint8))[:n]
        out = cls.from_bits(bits, m, party, delta)
        out.validate()
        return out


def bundle_bits(m: int) -> int:
    """Length in bits of a serialised two-party bundle."""
    return m * CoinEncoding(m).width + 2 * (m + 1)


def reconstruct_two(b0: TwoShareBundle, b1: TwoShareBundle):
    """Return ``(coins, defenses)`` with ``defenses[z]`` of length ``m + 1``."""
    enc = CoinEncoding(b0.m)
    coins = enc.decode(xor_reconstruct([b0.coins, b1.coins]))
    d = np.stack([xor_reconstruct([b0.d0, b1.d0]), xor_reconstruct([b0.d1, b1.d1])])
    return coins, d


@dataclass
class TwoShareBatch:
    """A batch of two-party deals, with the dealer's secrets kept for oracles."""

    m: int
    delta: float
    eps: float
    coins: np.ndarray         # (n, m) coin values
    defenses: np.ndarray      # (n, 2, m+1) defense values; column m is the terminal defense
    coin_shares: np.ndarray   # (2, n, m) encoded shares by holder
    def_shares: np.ndarray    # (2 holders, 2 owners, n, m+1)
    vectors: np.ndarray | None = None  # (n, 2, 2 ms(1)) hidden vectors, hiding dealer only

    @property
    def size(self) -> int:
        return self.coins.shape[0]

    def bundles(self, t: int = 0) -> tuple[TwoShareBundle, TwoShareBundle]:
        return tuple(
            TwoShareBundle(self.m, self.delta, z, self.coin_shares[z, t].copy(),
                           self.def_shares[z, 0, t].astype(np.int64), self.def_shares[z, 1, t].astype(np.int64))
            for z in (0, 1))


def round_values(m: int, eps: float, sums: np.ndarray, i: int) -> np.ndarray:
    """``ber_tail(ms(i+1), eps, -sum)`` evaluated elementwise on an integer array."""
    uniq, inv = np.unique(sums, return_inverse=True)
    vals = np.array([ber_tail(ms(m, i + 1), eps, -int(s)) for s in uniq])
    return vals[inv].reshape(np.shape(sums))


def _sample_coins(m: int, eps: float, rng: np.random.Generator, n: int) -> np.ndarray:
    p = (1.0 + eps) / 2.0
    cols = [2 * rng.binomial(ml(m, i), p, size=n) - ml(m, i) for i in range(1, m + 1)]
    return np.stack(cols, axis=1).astype(np.int64)


def _split_all(m: int, coins: np.ndarray, defenses: np.ndarray, rng: np.random.Generator):
    enc = CoinEncoding(m)
    coin_shares = xor_split(enc.encode(coins), 2, rng, enc.width)
    n = coins.shape[0]
    def_shares = np.zeros((2, 2, n, m + 1), dtype=np.uint8)
    for owner in (0, 1):
        split = xor_split(defenses[:, owner, :m], 2, rng)
        def_shares[:, owner, :, :m] = split
        # terminal defense lives entirely with its owner; the other copy is 0
        def_shares[owner, owner, :, m] = defenses[:, owner, m]
    return coin_shares, def_shares


def two_share_gen_batch(m: int, delta: float, rng: np.random.Generator, size: int) -> TwoShareBatch:
    """Deal ``size`` independent two-party bundle pairs with independent defenses."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    eps = sbias(ms(m, 1), delta)
    coins = _sample_coins(m, eps, rng, size)
    sums = np.cumsum(coins, axis=1)
    defenses = np.zeros((size, 2, m + 1), dtype=np.uint8)
    for z in (0, 1):
        for i in range(1, m + 1):
            defenses[:, z, i - 1] = rng.random(size) < round_values(m, eps, sums[:, i - 1], i)
        defenses[:, z, m] = rng.random(size) < delta
    coin_shares, def_shares = _split_all(m, coins, defenses, rng)
    return TwoShareBatch(m, delta, eps, coins, defenses, coin_shares, def_shares)


def two_share_gen(m: int, delta: float, rng: np.random.Generator) -> tuple[TwoShareBundle, TwoShareBundle]:
    """One two-party deal: ``(bundle for party 0, bundle for party 1)``."""
    return two_share_gen_batch(m, delta, rng, 1).bundles(0)


@dataclass
class HiddenVectors:
    """The hiding dealer's internal ±1 vectors (exposed for test oracles only)."""

    v0: np.ndarray
    v1: np.ndarray


def subset_weights(vectors: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Weight of a fresh uniform ``size``-subset of each row, by partial Fisher-Yates."""
    n, big = vectors.shape
    perm = np.tile(np.arange(big), (n, 1))
    rows = np.arange(n)
    for t in range(size):
        j = rng.integers(t, big, size=n)
        a, b = perm[rows, t].copy(), perm[rows, j]
        perm[rows, t], perm[rows, j] = b, a
    return np.take_along_axis(vectors, perm[:, :size], axis=1).sum(1)


def hid_two_share_gen_batch(m: int, delta: float, rng: np.random.Generator, size: int,
                            vectors: np.ndarray | None = None,
                            coins: np.ndarray | None = None) -> TwoShareBatch:
    """Deal ``size`` hiding two-party bundle pairs.

    ``vectors`` (shape ``(size, 2, 2 ms(1))``) and ``coins`` (shape
    ``(size, m)``) may be supplied to plant the dealer's internal randomness;
    this is how the game emulators embed a hint into a protocol view.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    total = ms(m, 1)
    eps = sbias(total, delta)
    if coins is None:
        coins = _sample_coins(m, eps, rng, size)
    if vectors is None:
        vectors = np.where(rng.random((size, 2, 2 * total)) < (1.0 + eps) / 2.0, 1, -1)
    sums = np.cumsum(coins, axis=1)
    defenses = np.zeros((size, 2, m + 1), dtype=np.uint8)
    for z in (0, 1):
        defenses[:, z, m] = subset_weights(vectors[:, z], total, rng) >= 0
        for i in range(1, m + 1):
            w = subset_weights(vectors[:, z], ms(m, i + 1), rng)
            defenses[:, z, i - 1] = sums[:, i - 1] + w >= 0
    coin_shares, def_shares = _split_all(m, coins, defenses, rng)
    return TwoShareBatch(m, delta, eps, coins, defenses, coin_shares, def_shares, vectors)


def hid_two_share_gen(m: int, delta: float, rng: np.random.Generator
                      ) -> tuple[tuple[TwoShareBundle, TwoShareBundle], HiddenVectors]:
    """One hiding deal: ``((bundle 0, bundle 1), hidden vectors)``."""
    batch = hid_two_share_gen_batch(m, delta, rng, 1)
    return batch.bundles(0), HiddenVectors(batch.vectors[0, 0].copy(), batch.vectors[0, 1].copy())


# ----------------------------------------------------------------------------
# three-party dealer


@dataclass
class PairRow:
    """Round-``i`` hiding deal for one unordered pair, with its 3-way shares."""

    i: int
    pair: tuple[int, int]
    delta: float
    batch: TwoShareBatch
    shares: np.ndarray   # (2 roles, 3 holders, row bits); role 0 is the lower party id

    def secret(self, role: int) -> TwoShareBundle:
        return self.batch.bundles(0)[role]


@dataclass
class ThreeShareDeal:
    """Output of the three-party dealer; pair rows are built on first access."""

    m: int
    coins: np.ndarray          # (m,)
    coin_shares: np.ndarray    # (3, m) encoded
    deltas: np.ndarray         # (m,) value after each round
    row_seed: tuple[int, ...]
    _rows: dict = field(default_factory=dict, repr=False)

    def row(self, i: int, pair: tuple[int, int]) -> PairRow:
        pair = tuple(sorted(pair))
        key = (i, pair)
        if key not in self._rows:
            rng = np.random.default_rng([*self.row_seed, i, PAIRS.index(pair)])
            batch = hid_two_share_gen_batch(self.m, float(self.deltas[i - 1]), rng, 1)
            bits = np.stack([b.to_bits() for b in batch.bundles(0)])
            shares = np.stack([xor_split(bits[r], 3, rng) for r in (0, 1)]).astype(np.uint8)
            self._rows[key] = PairRow(i, pair, float(self.deltas[i - 1]), batch, shares)
        return self._rows[key]

    def share(self, holder: int, owner: int, partner: int, i: int) -> np.ndarray:
        """Row ``i`` of the matrix ``D^{(owner, partner), #holder}``."""
        r = self.row(i, (owner, partner))
        role = 0 if owner < partner else 1
        return r.shares[role, holder]

    def bundle(self, party: int) -> "ThreeShareBundle":
        return ThreeShareBundle(self, party)

    def bundles(self) -> tuple["ThreeShareBundle", ...]:
        return tuple(self.bundle(z) for z in range(3))


@dataclass
class ThreeShareBundle:
    """Party ``party``'s view of a three-party deal."""

    deal: ThreeShareDeal
    party: int

    @property
    def m(self) -> int:
        return self.deal.m

    @property
    def coins(self) -> np.ndarray:
        return self.deal.coin_shares[self.party]

    def defense_row(self, owner: int, partner: int, i: int) -> np.ndarray:
        return self.deal.share(self.party, owner, partner, i)

    def matrix(self, owner: int, partner: int) -> np.ndarray:
        return np.stack([self.defense_row(owner, partner, i) for i in range(1, self.m + 1)])

    def to_bytes(self) -> bytes:
        enc = CoinEncoding(self.m)
        head = _HEADER.pack(MAGIC, FORMAT_VERSION, 3, self.m, float("nan"), self.party)
        parts = [enc.to_bits(self.coins).ravel()]
        parts += [self.matrix(a, b).ravel() for a, b in ORDERED_PAIRS]
        return head + np.packbits(np.concatenate(parts).astype(np.uint8)).tobytes()


def parse_three_bundle(data: bytes) -> dict:
    """Decode a serialised three-party bundle into its coin shares and matrices."""
    magic, version, kind, m, _, party = _HEADER.unpack_from(data)
    if magic != MAGIC or version != FORMAT_VERSION or kind != 3:
        raise ValueError("not a three-party bundle")
    enc = CoinEncoding(m)
    row = bundle_bits(m)
    n = m * enc.width + 6 * m * row
    bits = np.unpackbits(np.frombuffer(data[_HEADER.size:], dtype=np.uint8))[:n].astype(np.int64)
    cw = m * enc.width
    out = {"m": m, "party": party, "coins": enc.from_bits(bits[:cw].reshape(m, enc.width))}
    for k, pair in enumerate(ORDERED_PAIRS):
        out[pair] = bits[cw + k * m * row: cw + (k + 1) * m * row].reshape(m, row)
    return out


def three_share_gen(m: int, rng: np.random.Generator) -> ThreeShareDeal:
    """Deal fair weighted coins and per-pair hiding rows to three parties."""
    coins = _sample_coins(m, 0.0, rng, 1)[0]
    enc = CoinEncoding(m)
    coin_shares = xor_split(enc.encode(coins), 3, rng, enc.width)
    sums = np.cumsum(coins)
    deltas = np.array([ber_tail(ms(m, i + 1), 0.0, -int(sums[i - 1])) for i in range(1, m + 1)])
    row_seed = tuple(int(v) for v in rng.integers(0, 2**63, size=4))
    return ThreeShareDeal(m, coins, coin_shares, deltas, row_seed)
