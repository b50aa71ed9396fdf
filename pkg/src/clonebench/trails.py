"""Active S-box lower bounds for the 64-bit SPN over its public bit permutation.

States are 16-bit nibble-activity patterns.  One round maps each active nibble
to any nonempty subset of the nibbles its four output bits reach through the
permutation (the S-box output difference is a free nonzero 4-bit value), and
the trail cost is the total count of active nibbles across rounds.  The minimum
over all nonzero starting patterns is found by best-first search with the
admissible bound of one active box per remaining round; subset states dominate
superset states (thinning a trail never increases its cost), so single-nibble
starts suffice.
"""
from __future__ import annotations

import heapq

import numpy as np

_EXPANSION_CAP = 1 << 22


def validate_permutation(perm) -> np.ndarray:
    arr = np.asarray(perm, dtype=np.int64)
    if arr.ndim != 1 or sorted(arr.tolist()) != list(range(arr.size)):
        raise ValueError("permutation must be a bijection on 0..n-1")
    if arr.size % 4:
        raise ValueError("permutation length must be a multiple of 4")
    return arr


def nibble_reach(perm) -> list:
    """For each source nibble, the distinct activity masks of its 15 nonzero outputs."""
    arr = validate_permutation(perm)
    n_nibbles = arr.size // 4
    reach = []
    for j in range(n_nibbles):
        dest_nibble = [int(arr[4 * j + b]) // 4 for b in range(4)]
        masks = set()
        for value in range(1, 16):
            mask = 0
            for b in range(4):
                if (value >> b) & 1:
                    mask |= 1 << dest_nibble[b]
            masks.add(mask)
        reach.append(sorted(masks))
    return reach


def _successors(state: int, reach) -> set:
    options = {0}
    j = 0
    while state:
        if state & 1:
            options = {base | mask for base in options for mask in reach[j]}
        state >>= 1
        j += 1
    return options


def min_active_sboxes(perm, rounds: int) -> int:
    """Exact minimum number of active S-boxes over all nonzero truncated trails."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    reach = nibble_reach(perm)
    n_nibbles = len(reach)
    # f = cost so far + one box per remaining round (admissible), so the first
    # state popped at the final round carries the exact minimum
    frontier = [(1 + (rounds - 1), 1, 1 << j) for j in range(n_nibbles)]
    heapq.heapify(frontier)
    best = {}
    expansions = 0
    while frontier:
        f, depth, state = heapq.heappop(frontier)
        cost = f - (rounds - depth)
        if best.get((depth, state), 1 << 30) < cost:
            continue
        if depth == rounds:
            assert cost >= rounds
            return cost
        expansions += 1
        if expansions > _EXPANSION_CAP:
            raise RuntimeError("trail search exceeded its expansion cap")
        for nxt in _successors(state, reach):
            ncost = cost + bin(nxt).count("1")
            key = (depth + 1, nxt)
            if ncost < best.get(key, 1 << 30):
                best[key] = ncost
                heapq.heappush(frontier, (ncost + (rounds - depth - 1), depth + 1, nxt))
    raise RuntimeError("trail search exhausted without reaching the final round")


def ddt_compatible_outputs(sbox: np.ndarray) -> list:
    """compat[a] = nonzero output differences b with DDT[a][b] > 0, for a in 1..15."""
    compat = [[] for _ in range(16)]
    for a in range(1, 16):
        seen = set()
        for x in range(16):
            seen.add(int(sbox[x ^ a]) ^ int(sbox[x]))
        compat[a] = sorted(b for b in seen if b)
    return compat


def sample_trail_actives(sboxes: np.ndarray, perm, rounds: int, n_trails: int, rng) -> np.ndarray:
    """Active-box totals of random concrete differential trails through real S-boxes."""
    arr = validate_permutation(perm)
    sboxes = np.asarray(sboxes, dtype=np.uint8)
    if sboxes.shape[0] < rounds:
        raise ValueError("need one S-box table per round")
    compat = [ddt_compatible_outputs(sboxes[r]) for r in range(rounds)]
    n_bits = arr.size
    n_nibbles = n_bits // 4
    totals = np.zeros(n_trails, dtype=np.int64)
    for t in range(n_trails):
        delta = 0
        while delta == 0:
            delta = int.from_bytes(rng.bytes(n_bits // 8), "big")
        total = 0
        for r in range(rounds):
            out_delta = 0
            for j in range(n_nibbles):
                a = (delta >> (4 * j)) & 0xF
                if a == 0:
                    continue
                total += 1
                choices = compat[r][a]
                b = int(choices[rng.integers(0, len(choices))])
                for bit in range(4):
                    if (b >> bit) & 1:
                        out_delta |= 1 << int(arr[4 * j + bit])
            delta = out_delta
        totals[t] = total
    return totals
