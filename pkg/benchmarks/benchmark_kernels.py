#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Covers the two hot paths: batched SPN encryption/decryption and batched
4-bit S-box DDT/Walsh audits.

Usage:
    python benchmarks/benchmark_kernels.py
    python benchmarks/benchmark_kernels.py --blocks 200000 --sboxes 40000 --output results.json
"""
import argparse
import json
import time

import numpy as np

from clonebench import kernels, substream
from clonebench.suc import SucParams, personalize, sample_sbox_tables


def _time(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_spn(n_blocks, rounds):
    device = personalize(SucParams(rounds=rounds), substream(1, "bench"), "bench-dev")
    blocks = substream(2, "blocks").integers(0, 2**63, n_blocks, dtype=np.uint64)

    results = {"n_blocks": n_blocks, "rounds": rounds}
    if kernels.NUMBA_AVAILABLE:
        out_nb = kernels._spn_encrypt_numba(blocks, device._enc, device._keys)  # JIT warmup
        results["encrypt_numba_s"] = _time(
            lambda: kernels._spn_encrypt_numba(blocks, device._enc, device._keys)
        )
        kernels._spn_decrypt_numba(out_nb, device._dec_perm, device._dec_sbox, device._keys)
        results["decrypt_numba_s"] = _time(
            lambda: kernels._spn_decrypt_numba(out_nb, device._dec_perm, device._dec_sbox, device._keys)
        )
    out_np = kernels._spn_encrypt_numpy(blocks, device._enc, device._keys)
    results["encrypt_numpy_s"] = _time(
        lambda: kernels._spn_encrypt_numpy(blocks, device._enc, device._keys)
    )
    results["decrypt_numpy_s"] = _time(
        lambda: kernels._spn_decrypt_numpy(out_np, device._dec_perm, device._dec_sbox, device._keys)
    )
    if kernels.NUMBA_AVAILABLE:
        assert np.array_equal(out_nb, out_np), "backends disagree"
        results["encrypt_speedup"] = results["encrypt_numpy_s"] / results["encrypt_numba_s"]
    return results


def bench_audit(n_sboxes):
    tables = sample_sbox_tables(n_sboxes, substream(3, "tables"))
    results = {"n_sboxes": n_sboxes}
    if kernels.NUMBA_AVAILABLE:
        d_nb, w_nb = kernels._sbox_audit_numba(tables, kernels._PARITY_SIGN)  # JIT warmup
        results["audit_numba_s"] = _time(
            lambda: kernels._sbox_audit_numba(tables, kernels._PARITY_SIGN)
        )
    d_np, w_np = kernels._sbox_audit_numpy(tables, kernels._PARITY_SIGN)
    results["audit_numpy_s"] = _time(
        lambda: kernels._sbox_audit_numpy(tables, kernels._PARITY_SIGN)
    )
    if kernels.NUMBA_AVAILABLE:
        assert np.array_equal(d_nb, d_np) and np.array_equal(w_nb, w_np), "backends disagree"
        results["audit_speedup"] = results["audit_numpy_s"] / results["audit_numba_s"]
    return results


def main():
    parser = argparse.ArgumentParser(description="numba vs numpy kernel benchmark")
    parser.add_argument("--blocks", type=int, default=100_000)
    parser.add_argument("--rounds", type=int, default=40)
    parser.add_argument("--sboxes", type=int, default=20_000)
    parser.add_argument("--output", default=None, help="write results JSON here")
    args = parser.parse_args()

    print(f"numba available: {kernels.NUMBA_AVAILABLE}")
    print(f"active backend:  {kernels.active_backend()}  (override with CLONEBENCH_BACKEND)")

    spn = bench_spn(args.blocks, args.rounds)
    print(f"\nSPN over {spn['n_blocks']} blocks x {spn['rounds']} rounds")
    if "encrypt_numba_s" in spn:
        print(f"  encrypt  numba {spn['encrypt_numba_s']*1e3:9.1f} ms   numpy {spn['encrypt_numpy_s']*1e3:9.1f} ms   x{spn['encrypt_speedup']:.1f}")
        print(f"  decrypt  numba {spn['decrypt_numba_s']*1e3:9.1f} ms   numpy {spn['decrypt_numpy_s']*1e3:9.1f} ms")
    else:
        print(f"  encrypt  numpy {spn['encrypt_numpy_s']*1e3:9.1f} ms")
        print(f"  decrypt  numpy {spn['decrypt_numpy_s']*1e3:9.1f} ms")

    audit = bench_audit(args.sboxes)
    print(f"\nS-box DDT/Walsh audit over {audit['n_sboxes']} tables")
    if "audit_numba_s" in audit:
        print(f"  audit    numba {audit['audit_numba_s']*1e3:9.1f} ms   numpy {audit['audit_numpy_s']*1e3:9.1f} ms   x{audit['audit_speedup']:.1f}")
    else:
        print(f"  audit    numpy {audit['audit_numpy_s']*1e3:9.1f} ms")

    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump({"spn": spn, "audit": audit}, fh, indent=2)
        print(f"\nresults written to {args.output}")


if __name__ == "__main__":
    main()
