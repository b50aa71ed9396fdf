"""Synthetic mechatronic structural identity over an ultrasonic stimulation band.

A structure is a random complex frequency response on a 30-50 kHz bin grid
(dimensionless underneath; the units are labels).  Wave-train stimulation reads
selected bins, fingerprinting thresholds the full-grid magnitude response, and
the entropy calculators quantify both the challenge space of wave trains and
the structural degrees of freedom of a fingerprint population.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstring import BitString
from .environment import NOMINAL, EnvironmentConditions
from .jsonio import read_json, write_json
from .rng import substream

FREQ_LO_HZ = 30_000.0
FREQ_HI_HZ = 50_000.0

#: |H| is Rayleigh(1) under the unit-normal re/im draw, so the population
#: median magnitude is sqrt(2 ln 2); used as the default public threshold
RAYLEIGH_MEDIAN = math.sqrt(2.0 * math.log(2.0))

#: occupancy-aware size is C(k,p) slot patterns times t^p frequency choices;
#: for t=32, k=20, p=10 that is ~2^67.50 bits, not the sometimes-quoted 2^65
SPARSE_OCCUPANCY_NOTE = (
    "sparse wave-train space counted as log2(C(k,p)) + p*log2(t); "
    "for t=32,k=20,p=10 this gives ~67.50 bits, not the sometimes-quoted 65 bits"
)


@dataclass(frozen=True, eq=False)
class StructureModel:
    freq_response: np.ndarray  # complex, one entry per bin, fixed at fabrication
    temp_coeff: float  # relative gain slope per degree C away from 25 C
    meas_noise_sigma: float  # per-component complex measurement noise
    smoothing: float
    seed: int

    @property
    def n_bins(self) -> int:
        return self.freq_response.size


@dataclass(frozen=True)
class WaveTrain:
    slots: tuple  # k frequency indices, each in 0..t-1
    t: int
    k: int

    def __post_init__(self):
        if self.t < 2 or self.k < 1:
            raise ValueError("need t >= 2 frequencies and k >= 1 slots")
        if len(self.slots) != self.k:
            raise ValueError("slot count != k")
        if any(not 0 <= s < self.t for s in self.slots):
            raise ValueError("slot index out of range")


@dataclass(frozen=True)
class ChallengeSpaceSpec:
    t: int
    k: int
    p: int | None = None

    def __post_init__(self):
        if self.t < 2 or self.k < 1:
            raise ValueError("need t >= 2 and k >= 1")
        if self.p is not None and not 1 <= self.p <= self.k:
            raise ValueError("p must satisfy 1 <= p <= k")


@dataclass(eq=False)
class Fingerprint:
    bits: BitString
    thresholds: np.ndarray
    device_id: str = ""


@dataclass(frozen=True)
class EntropyEstimate:
    mean_hd: float
    hd_variance: float
    dof_bits: float
    degenerate: bool


# --------------------------------------------------------------------------- model
def structure_new(
    seed: int,
    n_bins: int = 256,
    smoothing: float = 0.0,
    temp_coeff: float = 0.002,
    meas_noise_sigma: float = 0.15,
) -> StructureModel:
    """Draw a structure: AR(1)-correlated complex spectrum across the bin grid."""
    if n_bins < 32:
        raise ValueError("n_bins must be >= 32")
    if not 0 <= smoothing < 1:
        raise ValueError("smoothing must be in [0, 1)")
    rng = substream(seed, "structure")
    fresh = rng.standard_normal(n_bins) + 1j * rng.standard_normal(n_bins)
    response = np.empty(n_bins, dtype=complex)
    response[0] = fresh[0]
    carry = math.sqrt(1.0 - smoothing**2)
    for i in range(1, n_bins):
        response[i] = smoothing * response[i - 1] + carry * fresh[i]
    response.flags.writeable = False
    return StructureModel(response, float(temp_coeff), float(meas_noise_sigma), float(smoothing), int(seed))


def bin_frequencies_hz(n_bins: int) -> np.ndarray:
    return np.linspace(FREQ_LO_HZ, FREQ_HI_HZ, n_bins)


def _gain(model: StructureModel, env: EnvironmentConditions) -> float:
    return 1.0 + model.temp_coeff * (env.temperature_c - 25.0)


def wave_train_bins(train: WaveTrain, n_bins: int) -> np.ndarray:
    """Map slot frequency indices onto the model's bin grid."""
    if train.t > n_bins:
        raise ValueError(f"{train.t} stimulation frequencies exceed the {n_bins}-bin grid")
    return (np.asarray(train.slots, dtype=np.int64) * n_bins) // train.t


def stimulate(model: StructureModel, train: WaveTrain, env=NOMINAL, rng=None) -> np.ndarray:
    """Complex response at each wave-train slot; rng=None reads noiselessly."""
    bins = wave_train_bins(train, model.n_bins)
    y = model.freq_response[bins] * _gain(model, env)
    if rng is not None and model.meas_noise_sigma > 0:
        y = y + model.meas_noise_sigma * (
            rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size)
        )
    return y


def default_thresholds(n_bins: int) -> np.ndarray:
    return np.full(n_bins, RAYLEIGH_MEDIAN)


def reference_thresholds(n_bins: int, n_devices: int, rng) -> np.ndarray:
    """Per-bin magnitude medians over a sampled reference population (enrollment helper)."""
    mags = np.abs(
        rng.standard_normal((n_devices, n_bins)) + 1j * rng.standard_normal((n_devices, n_bins))
    )
    return np.median(mags, axis=0)


def fingerprint(model: StructureModel, env=NOMINAL, rng=None, thresholds=None) -> Fingerprint:
    """Threshold the full-grid magnitude response into identity bits."""
    thresholds = default_thresholds(model.n_bins) if thresholds is None else np.asarray(thresholds)
    if thresholds.size != model.n_bins:
        raise ValueError("threshold vector length != n_bins")
    measured = model.freq_response * _gain(model, env)
    if rng is not None and model.meas_noise_sigma > 0:
        measured = measured + model.meas_noise_sigma * (
            rng.standard_normal(model.n_bins) + 1j * rng.standard_normal(model.n_bins)
        )
    bits = BitString((np.abs(measured) > thresholds).astype(np.uint8))
    return Fingerprint(bits, thresholds, device_id=f"structure-{model.seed}")


# --------------------------------------------------------------------------- entropy
def challenge_space_size(spec: ChallengeSpaceSpec) -> int:
    """Exact challenge count: t^k, or C(k,p) * t^p under sparse occupancy."""
    if spec.p is None:
        return spec.t**spec.k
    return math.comb(spec.k, spec.p) * spec.t**spec.p


def challenge_space_bits(spec: ChallengeSpaceSpec) -> float:
    if spec.p is None:
        return spec.k * math.log2(spec.t)
    return math.log2(math.comb(spec.k, spec.p)) + spec.p * math.log2(spec.t)


def pairwise_distance_stats(bit_matrix: np.ndarray) -> tuple:
    """(mean, sample variance) of fractional Hamming distance over all device pairs."""
    mat = np.asarray(bit_matrix, dtype=np.int64)
    if mat.ndim != 2 or mat.shape[0] < 2:
        raise ValueError("need a (devices, bits) matrix with >= 2 rows")
    gram = mat @ mat.T
    ones = mat.sum(axis=1)
    dist = (ones[:, None] + ones[None, :] - 2 * gram) / mat.shape[1]
    iu = np.triu_indices(mat.shape[0], k=1)
    values = dist[iu]
    var = float(values.var(ddof=1)) if values.size > 1 else float("nan")
    return float(values.mean()), var


def dof_estimate(bit_matrix: np.ndarray) -> EntropyEstimate:
    """Binomial-fit degrees of freedom: p(1-p)/var of the pairwise distances."""
    mean, var = pairwise_distance_stats(bit_matrix)
    if var == 0.0 or math.isnan(var):
        return EntropyEstimate(mean, var, float("nan"), True)
    return EntropyEstimate(mean, var, mean * (1.0 - mean) / var, False)


def structural_entropy_estimate(population) -> EntropyEstimate:
    """Entropy of a fingerprint population; needs >= 100 fingerprints."""
    if len(population) < 100:
        raise ValueError("need at least 100 fingerprints")
    mat = np.stack([fp.bits.bits for fp in population])
    return dof_estimate(mat)


# --------------------------------------------------------------------------- persistence
def save_fingerprint(fp: Fingerprint, path) -> None:
    write_json(
        path,
        {
            "device_id": fp.device_id,
            "bits_hex": fp.bits.to_hex(),
            "thresholds": [float(t) for t in fp.thresholds],
            "n_bins": len(fp.bits),
        },
    )


def load_fingerprint(path) -> Fingerprint:
    doc = read_json(path)
    bits = BitString.from_hex(doc["bits_hex"], doc["n_bins"])
    return Fingerprint(bits, np.asarray(doc["thresholds"], dtype=float), doc.get("device_id", ""))


def save_wave_train(train: WaveTrain, path) -> None:
    write_json(path, {"t": train.t, "k": train.k, "slots": list(train.slots)})


def load_wave_train(path) -> WaveTrain:
    doc = read_json(path)
    return WaveTrain(tuple(doc["slots"]), doc["t"], doc["k"])
