"""Code-offset fuzzy extractor: repetition ECC, Toeplitz key hashing, leak accounting.

generate(w) masks a random codeword with the noisy secret w and publishes the
offset; reproduce(w') majority-decodes the offset against a fresh reading and
re-derives the key with a seeded Toeplitz hash.  A 32-bit checksum of w rides
along in the helper data so decoding failures are detected instead of silently
yielding a wrong key.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bitstring import BitString
from .errors import InfeasibleDesignError
from .jsonio import read_json, write_json

MAX_REPETITION = 1023
DEFAULT_EPSILON = 2.0**-40


@dataclass(frozen=True)
class RepetitionParams:
    n_rep: int
    n_blocks: int

    def __post_init__(self):
        if self.n_rep < 1 or self.n_rep % 2 == 0:
            raise ValueError("n_rep must be odd and >= 1")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")

    @property
    def code_len(self) -> int:
        return self.n_rep * self.n_blocks


@dataclass(frozen=True)
class HelperData:
    sketch: BitString
    toeplitz_seed: BitString
    key_len: int
    params: RepetitionParams
    checksum: bytes  # 32-bit digest of the enrolled secret

    def __post_init__(self):
        if len(self.sketch) != self.params.code_len:
            raise ValueError("sketch length != n_rep * n_blocks")
        if len(self.toeplitz_seed) != self.params.code_len + self.key_len - 1:
            raise ValueError("toeplitz seed length != input_len + key_len - 1")
        if len(self.checksum) != 4:
            raise ValueError("checksum must be 4 bytes")


@dataclass(frozen=True)
class ExtractedKey:
    key: BitString


@dataclass(frozen=True)
class ReproduceResult:
    key: BitString
    corrected_fraction: float  # fraction of input bits the decoder had to flip


def binomial_tail_gt_half(n: int, p: float) -> Fraction:
    """Exact P[Bin(n, p) > n/2] as a rational number."""
    pf = Fraction(p)
    qf = 1 - pf
    return sum(
        math.comb(n, k) * pf**k * qf ** (n - k) for k in range(n // 2 + 1, n + 1)
    )


def _tail_gt_half_float(n: int, p: float) -> float:
    """Log-space float estimate of the same tail, used to prescreen candidates."""
    log_p, log_q, log_n = math.log(p), math.log1p(-p), math.lgamma(n + 1)
    total = 0.0
    for k in range(n // 2 + 1, n + 1):
        log_pmf = (
            log_n - math.lgamma(k + 1) - math.lgamma(n - k + 1) + k * log_p + (n - k) * log_q
        )
        total += math.exp(log_pmf)
    return total


def design_repetition(ber: float, fail_target: float, n_blocks: int) -> RepetitionParams:
    """Smallest odd repetition length whose exact block-failure union bound meets the target.

    Candidates are prescreened with a float tail; the returned length is always
    certified by the exact rational tail.
    """
    if not 0 <= ber < 0.5:
        raise ValueError("ber must be in [0, 0.5)")
    if not 0 < fail_target < 1:
        raise ValueError("fail_target must be in (0, 1)")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    if ber == 0:
        return RepetitionParams(1, n_blocks)
    target = Fraction(fail_target)
    for n_rep in range(1, MAX_REPETITION + 1, 2):
        if n_blocks * _tail_gt_half_float(n_rep, ber) > fail_target * (1 + 1e-6):
            continue
        if n_blocks * binomial_tail_gt_half(n_rep, ber) <= target:
            return RepetitionParams(n_rep, n_blocks)
    raise InfeasibleDesignError(
        f"no odd n_rep <= {MAX_REPETITION} reaches {fail_target} at ber {ber}"
    )


# --------------------------------------------------------------------------- codec
def repeat_encode(block_bits: np.ndarray, n_rep: int) -> np.ndarray:
    return np.repeat(np.asarray(block_bits, dtype=np.uint8), n_rep)


def majority_decode(coded: np.ndarray, params: RepetitionParams) -> np.ndarray:
    votes = np.asarray(coded, dtype=np.uint8).reshape(params.n_blocks, params.n_rep)
    return (votes.sum(axis=1) > params.n_rep // 2).astype(np.uint8)


def toeplitz_hash(seed: BitString, data: BitString, out_len: int) -> BitString:
    """GF(2) Toeplitz matrix-vector product; out bit i = XOR_j data_j & seed_{i+n-1-j}.

    Row i of the matrix is seed[i : i+n] reversed, so the product reduces to a
    windowed dot with the reversed input (exact in float64: sums stay < 2^53).
    """
    n = len(data)
    if out_len < 1:
        raise ValueError("out_len must be >= 1")
    if len(seed) != n + out_len - 1:
        raise ValueError(f"seed length {len(seed)} != {n + out_len - 1}")
    windows = np.lib.stride_tricks.sliding_window_view(seed.bits, n)
    acc = windows.astype(np.float64) @ data.bits[::-1].astype(np.float64)
    return BitString((acc.astype(np.int64) & 1).astype(np.uint8))


def _checksum(bits: np.ndarray) -> bytes:
    return hashlib.sha256(np.packbits(bits).tobytes()).digest()[:4]


def fe_generate(w: BitString, params: RepetitionParams, key_len: int, rng) -> tuple:
    """Enroll a noisy secret; returns (ExtractedKey, HelperData)."""
    if len(w) != params.code_len:
        raise ValueError(f"input length {len(w)} != {params.code_len}")
    if key_len < 1:
        raise ValueError("key_len must be >= 1")
    secret_blocks = rng.integers(0, 2, params.n_blocks, dtype=np.uint8)
    sketch = BitString(w.bits ^ repeat_encode(secret_blocks, params.n_rep))
    seed = BitString.random(params.code_len + key_len - 1, rng)
    key = toeplitz_hash(seed, w, key_len)
    helper = HelperData(sketch, seed, key_len, params, _checksum(w.bits))
    return ExtractedKey(key), helper


def fe_reproduce_detail(w_noisy: BitString, helper: HelperData):
    """Reproduce with decode statistics; returns ReproduceResult or None on checksum FAIL."""
    if len(w_noisy) != len(helper.sketch):
        raise ValueError(f"input length {len(w_noisy)} != {len(helper.sketch)}")
    offset = w_noisy.bits ^ helper.sketch.bits
    blocks = majority_decode(offset, helper.params)
    w_est = helper.sketch.bits ^ repeat_encode(blocks, helper.params.n_rep)
    if _checksum(w_est) != helper.checksum:
        return None
    corrected = np.count_nonzero(w_est != w_noisy.bits) / len(w_noisy)
    key = toeplitz_hash(helper.toeplitz_seed, BitString(w_est), helper.key_len)
    return ReproduceResult(key, corrected)


def fe_reproduce(w_noisy: BitString, helper: HelperData):
    """Recover the enrolled key from a noisy re-reading, or None if decoding failed."""
    result = fe_reproduce_detail(w_noisy, helper)
    return None if result is None else ExtractedKey(result.key)


def entropy_accounting(
    minentropy_in: float, leak_bits: float, epsilon: float = DEFAULT_EPSILON
) -> int:
    """Leftover-hash key budget: floor(H_in - leak - 2 log2(1/eps)), clamped at 0.

    For the code-offset sketch, leak_bits = len(sketch) - n_blocks.
    """
    if minentropy_in <= 0:
        raise ValueError("minentropy_in must be > 0")
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must be in (0, 1]")
    return max(0, math.floor(minentropy_in - leak_bits - 2 * math.log2(1.0 / epsilon)))


def sketch_leak_bits(params: RepetitionParams) -> int:
    return params.code_len - params.n_blocks


# --------------------------------------------------------------------------- persistence
def save_helper(helper: HelperData, path) -> None:
    write_json(
        path,
        {
            "sketch_hex": helper.sketch.to_hex(),
            "seed_hex": helper.toeplitz_seed.to_hex(),
            "key_len": helper.key_len,
            "n_rep": helper.params.n_rep,
            "n_blocks": helper.params.n_blocks,
            "checksum_hex": helper.checksum.hex(),
        },
    )


def load_helper(path) -> HelperData:
    doc = read_json(path)
    params = RepetitionParams(doc["n_rep"], doc["n_blocks"])
    return HelperData(
        BitString.from_hex(doc["sketch_hex"], params.code_len),
        BitString.from_hex(doc["seed_hex"], params.code_len + doc["key_len"] - 1),
        doc["key_len"],
        params,
        bytes.fromhex(doc["checksum_hex"]),
    )
