"""Command-line surface: every verb prints one JSON result to stdout and logs
to stderr.  Exit codes: 0 success/Accept, 1 Reject or failed experiment,
2 usage error, 3 malformed data file."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import acoustic, attacks, fuzzy, metrics, protocol, puf, repro, suc
from .bitstring import BitString
from .environment import NOMINAL, EnvironmentConditions
from .errors import DataFormatError
from .jsonio import dumps_canonical, write_json
from .rng import fresh_seed, substream

log = logging.getLogger("clonebench")

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CLONEBENCH_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValueError(f"CLONEBENCH_SEED is not an integer: {env!r}") from exc
    seed = fresh_seed()
    log.info("no seed given; drew %d from OS entropy (echoed in output)", seed)
    return seed


def _env_from_args(args) -> EnvironmentConditions:
    temp = getattr(args, "temp", None)
    volt = getattr(args, "volt", None)
    return EnvironmentConditions(
        NOMINAL.temperature_c if temp is None else temp,
        NOMINAL.voltage_v if volt is None else volt,
    )


# --------------------------------------------------------------------------- puf
def _build_puf(args, seed):
    model = args.model
    if model == "arbiter":
        return puf.arbiter_new(args.stages, seed, args.noise_sigma)
    if model == "xor":
        return puf.xor_arbiter_new(args.stages, args.k, seed, args.noise_sigma)
    if model == "ro":
        return puf.ro_new(args.oscillators, seed, args.noise_sigma)
    if model == "sram":
        return puf.sram_new(args.cells, seed)
    raise ValueError(f"unknown model {model}")


def _puf_challenges(device, n, rng):
    if isinstance(device, puf.SramPuf):
        return None
    if isinstance(device, puf.RoPuf):
        return None
    stages = device[0].n_stages if isinstance(device, tuple) else device.n_stages
    return [BitString.random(stages, rng) for _ in range(n)]


def cmd_puf_simulate(args):
    seed = _resolve_seed(args)
    device = _build_puf(args, seed)
    env = _env_from_args(args)
    rng = substream(seed, "puf-simulate")
    challenges = _puf_challenges(device, args.challenges, rng)
    noisy = metrics.noisy_response(device, env, rng, challenges)
    reference = metrics.nominal_response(device, challenges)
    result = {
        "descriptor": puf.device_descriptor(device),
        "seed": seed,
        "temperature_c": env.temperature_c,
        "voltage_v": env.voltage_v,
        "response_hex": BitString(noisy).to_hex(),
        "response_bits": int(noisy.size),
        "ber_vs_reference": float(np.mean(noisy != reference)),
    }
    if args.save:
        puf.save_puf(device, args.save)
        log.info("device descriptor written to %s", args.save)
    return result, EXIT_OK


def cmd_puf_metrics(args):
    seed = _resolve_seed(args)
    rng = substream(seed, "puf-metrics")
    devices = []
    for i in range(args.devices):
        dev_seed = int(substream(seed, "puf-metrics-device", i).integers(0, 2**63))
        devices.append(_build_puf(args, dev_seed))
    challenges = _puf_challenges(devices[0], args.challenges, rng)
    report = metrics.uniqueness(devices, challenges)
    result = report.to_json()
    result["seed"] = seed
    return result, EXIT_OK


# --------------------------------------------------------------------------- fe
def cmd_fe_design(args):
    params = fuzzy.design_repetition(args.ber, args.fail_target, args.blocks)
    return {
        "n_rep": params.n_rep,
        "n_blocks": params.n_blocks,
        "code_len": params.code_len,
        "leak_bits": fuzzy.sketch_leak_bits(params),
    }, EXIT_OK


def cmd_fe_generate(args):
    seed = _resolve_seed(args)
    params = fuzzy.RepetitionParams(args.n_rep, args.blocks)
    w = BitString.from_hex(args.input_hex, params.code_len)
    key, helper = fuzzy.fe_generate(w, params, args.key_len, substream(seed, "fe-generate"))
    if args.helper_out:
        fuzzy.save_helper(helper, args.helper_out)
        log.info("helper data written to %s", args.helper_out)
    return {"seed": seed, "key_hex": key.key.to_hex(), "key_len": args.key_len}, EXIT_OK


def cmd_fe_reproduce(args):
    helper = fuzzy.load_helper(args.helper)
    w = BitString.from_hex(args.input_hex, helper.params.code_len)
    key = fuzzy.fe_reproduce(w, helper)
    if key is None:
        return {"result": "fail"}, EXIT_REJECT
    return {"result": "ok", "key_hex": key.key.to_hex()}, EXIT_OK


# --------------------------------------------------------------------------- suc
def cmd_suc_personalize(args):
    seed = _resolve_seed(args)
    params = suc.SucParams(rounds=args.rounds)
    device = suc.personalize(params, substream(seed, "personalize"), args.device_id)
    result = {
        "device_id": device.device_id,
        "rounds": params.rounds,
        "key_bits": params.key_bits,
        "seed": seed,
    }
    if args.device_out:
        suc.save_device(device, args.device_out)
        log.info("secret device file written to %s", args.device_out)
    if args.unsafe_dump:
        result["descriptor"] = suc.descriptor_dict(device)
        log.warning("descriptor printed to stdout at your request (--unsafe-dump)")
    return result, EXIT_OK


def cmd_suc_analyze(args):
    seed = _resolve_seed(args)
    params = suc.SucParams(rounds=args.rounds)
    report = suc.security_report(params, args.samples, substream(seed, "suc-analyze"))
    return {
        "seed": seed,
        "rounds": params.rounds,
        "cardinality_bits": report.cardinality_bits,
        "min_active_sboxes": report.min_active_sboxes,
        "diff_complexity_log2": report.diff_complexity_log2,
        "lin_complexity_log2": report.lin_complexity_log2,
        "sbox_acceptance_rate": report.sbox_acceptance_rate,
        "sample_budget": report.sample_budget,
    }, EXIT_OK


def cmd_suc_encrypt(args):
    device = suc.load_device(args.device)
    block = BitString.from_hex(args.block_hex, device.params.block_bits)
    return {"device_id": device.device_id, "ciphertext_hex": device.encrypt(block).to_hex()}, EXIT_OK


# --------------------------------------------------------------------------- acoustic
def cmd_acoustic_fingerprint(args):
    seed = _resolve_seed(args)
    model = acoustic.structure_new(seed, args.bins, args.smoothing)
    rng = None if args.noiseless else substream(seed, "acoustic-measure")
    fp = acoustic.fingerprint(model, _env_from_args(args), rng)
    if args.fingerprint_out:
        acoustic.save_fingerprint(fp, args.fingerprint_out)
        log.info("fingerprint written to %s", args.fingerprint_out)
    return {
        "seed": seed,
        "device_id": fp.device_id,
        "n_bins": len(fp.bits),
        "bits_hex": fp.bits.to_hex(),
    }, EXIT_OK


def cmd_acoustic_entropy(args):
    seed = _resolve_seed(args)
    fps = [
        acoustic.fingerprint(acoustic.structure_new(int(substream(seed, "acoustic-pop", i).integers(0, 2**63)), args.bins, args.smoothing))
        for i in range(args.devices)
    ]
    estimate = acoustic.structural_entropy_estimate(fps)
    return {
        "seed": seed,
        "n_devices": args.devices,
        "mean_hd": estimate.mean_hd,
        "dof_bits": estimate.dof_bits,
        "degenerate": estimate.degenerate,
    }, EXIT_OK


def cmd_acoustic_space(args):
    spec = acoustic.ChallengeSpaceSpec(args.t, args.k, args.p)
    result = {"bits": acoustic.challenge_space_bits(spec), "t": args.t, "k": args.k}
    if args.p is not None:
        result["p"] = args.p
        result["note"] = acoustic.SPARSE_OCCUPANCY_NOTE
    return result, EXIT_OK


# --------------------------------------------------------------------------- protocol
def cmd_enroll(args):
    seed = _resolve_seed(args)
    device = suc.load_device(args.device)
    if os.path.exists(args.store):
        store = protocol.load_store(args.store)
    else:
        store = protocol.CrpStore(mode=args.mode)
    stored = protocol.enroll(device, args.pairs, substream(seed, "enroll"), store)
    protocol.save_store(store, args.store)
    log.info("stored %d CRPs for %s in %s", stored, device.device_id, args.store)
    return {"seed": seed, "device_id": device.device_id, "stored": stored, "mode": store.mode}, EXIT_OK


def _channel_from_args(args, device, seed):
    if args.impostor:
        agent = protocol.RandomAgent(substream(seed, "impostor"))
    else:
        agent = protocol.SucAgent(device)
    channel = protocol.DeviceChannel(agent)
    if args.tamper_bits:
        positions = [int(p) for p in args.tamper_bits.split(",") if p != ""]
        channel = protocol.tamper_channel(channel, positions)
    return channel


def cmd_identify(args):
    seed = _resolve_seed(args)
    device = suc.load_device(args.device)
    store = protocol.load_store(args.store)
    channel = _channel_from_args(args, device, seed)
    verdict = protocol.identify(store, channel, device.device_id)
    protocol.save_store(store, args.store)
    result = {
        "verdict": verdict.verdict,
        "reason": verdict.reason,
        "device_id": device.device_id,
        "seed": seed,
    }
    return result, EXIT_OK if verdict.accepted else EXIT_REJECT


def cmd_combined_verify(args):
    seed = _resolve_seed(args)
    device = suc.load_device(args.device)
    store = protocol.load_store(args.store)
    helper = fuzzy.load_helper(args.helper)
    fp = acoustic.load_fingerprint(args.fingerprint)
    channel = _channel_from_args(args, device, seed)
    verdict = protocol.combined_verify(
        store,
        helper,
        fp,
        channel,
        device.device_id,
        args.tau,
        structural_dof_bits=args.structural_dof,
    )
    protocol.save_store(store, args.store)
    result = {"verdict": verdict.verdict, "reason": verdict.reason, "seed": seed}
    if verdict.entropy_bits is not None:
        result["entropy_bits"] = verdict.entropy_bits
    return result, EXIT_OK if verdict.accepted else EXIT_REJECT


# --------------------------------------------------------------------------- attacks
def cmd_attack_model(args):
    seed = _resolve_seed(args)
    if args.target == "arbiter":
        target = attacks.ArbiterTarget(puf.arbiter_new(args.stages, seed))
    elif args.target == "xor":
        target = attacks.XorArbiterTarget(puf.xor_arbiter_new(args.stages, args.k, seed))
    elif args.target == "suc":
        device = suc.personalize(suc.SucParams(), substream(seed, "attack-target"), "attack-target")
        target = attacks.SucBitTarget(device)
    else:
        raise ValueError(f"unknown target {args.target}")
    data = attacks.collect_crps(target, args.train, substream(seed, "attack-train"))
    model = attacks.train_model(data, args.epochs, args.lr)
    report = attacks.eval_model(model, target, args.test, substream(seed, "attack-test"))
    result = report.to_json()
    result["seed"] = seed
    return result, EXIT_OK


def cmd_attack_readout(args):
    seed = _resolve_seed(args)
    outcome = repro.readout_clone_experiment(seed, n_cells=args.cells)
    outcome["seed"] = seed
    return outcome, EXIT_OK


# --------------------------------------------------------------------------- repro
def cmd_repro(args):
    seed = args.seed if args.seed is not None else repro.DEFAULT_SEED
    result = repro.run(args.name, seed)
    return result, EXIT_OK if result["passed"] else EXIT_REJECT


# --------------------------------------------------------------------------- wiring
def _add_common(sp):
    sp.add_argument("--seed", type=int, default=None, help="run seed (default: CLONEBENCH_SEED or OS entropy)")
    sp.add_argument("--config", default=None, help="JSON file with default values for omitted flags")
    sp.add_argument("--out", default=None, help="also write the JSON result to this path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clonebench", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("puf", help="simulate PUF devices and population metrics")
    puf_sub = p.add_subparsers(dest="action", required=True)
    ps = puf_sub.add_parser("simulate")
    ps.add_argument("--model", choices=["arbiter", "xor", "ro", "sram"], required=True)
    ps.add_argument("--stages", type=int, default=64)
    ps.add_argument("--k", type=int, default=2)
    ps.add_argument("--oscillators", type=int, default=128)
    ps.add_argument("--cells", type=int, default=256)
    ps.add_argument("--noise-sigma", type=float, default=0.0)
    ps.add_argument("--challenges", type=int, default=64)
    ps.add_argument("--temp", type=float, default=None)
    ps.add_argument("--volt", type=float, default=None)
    ps.add_argument("--save", default=None, help="write device descriptor JSON here")
    _add_common(ps)
    ps.set_defaults(handler=cmd_puf_simulate)
    pm = puf_sub.add_parser("metrics")
    pm.add_argument("--model", choices=["arbiter", "xor", "ro", "sram"], required=True)
    pm.add_argument("--devices", type=int, default=50)
    pm.add_argument("--stages", type=int, default=64)
    pm.add_argument("--k", type=int, default=2)
    pm.add_argument("--oscillators", type=int, default=128)
    pm.add_argument("--cells", type=int, default=256)
    pm.add_argument("--noise-sigma", type=float, default=0.0)
    pm.add_argument("--challenges", type=int, default=128)
    _add_common(pm)
    pm.set_defaults(handler=cmd_puf_metrics)

    f = sub.add_parser("fe", help="fuzzy extractor design, generate, reproduce")
    fe_sub = f.add_subparsers(dest="action", required=True)
    fd = fe_sub.add_parser("design")
    fd.add_argument("--ber", type=float, required=True)
    fd.add_argument("--fail-target", type=float, default=1e-6)
    fd.add_argument("--blocks", type=int, required=True)
    _add_common(fd)
    fd.set_defaults(handler=cmd_fe_design)
    fg = fe_sub.add_parser("generate")
    fg.add_argument("--input-hex", required=True)
    fg.add_argument("--n-rep", type=int, required=True)
    fg.add_argument("--blocks", type=int, required=True)
    fg.add_argument("--key-len", type=int, default=128)
    fg.add_argument("--helper-out", default=None)
    _add_common(fg)
    fg.set_defaults(handler=cmd_fe_generate)
    fr = fe_sub.add_parser("reproduce")
    fr.add_argument("--input-hex", required=True)
    fr.add_argument("--helper", required=True)
    _add_common(fr)
    fr.set_defaults(handler=cmd_fe_reproduce)

    s = sub.add_parser("suc", help="secret unknown cipher operations")
    suc_sub = s.add_subparsers(dest="action", required=True)
    sp_ = suc_sub.add_parser("personalize")
    sp_.add_argument("--device-id", required=True)
    sp_.add_argument("--rounds", type=int, default=40)
    sp_.add_argument("--device-out", default=None, help="write the secret device file here")
    sp_.add_argument("--unsafe-dump", action="store_true", help="print the descriptor to stdout")
    _add_common(sp_)
    sp_.set_defaults(handler=cmd_suc_personalize)
    sa = suc_sub.add_parser("analyze")
    sa.add_argument("--rounds", type=int, default=40)
    sa.add_argument("--samples", type=int, default=20000)
    _add_common(sa)
    sa.set_defaults(handler=cmd_suc_analyze)
    se = suc_sub.add_parser("encrypt")
    se.add_argument("--device", required=True)
    se.add_argument("--block-hex", required=True)
    _add_common(se)
    se.set_defaults(handler=cmd_suc_encrypt)

    a = sub.add_parser("acoustic", help="structural identity pipeline")
    ac_sub = a.add_subparsers(dest="action", required=True)
    af = ac_sub.add_parser("fingerprint")
    af.add_argument("--bins", type=int, default=256)
    af.add_argument("--smoothing", type=float, default=0.0)
    af.add_argument("--noiseless", action="store_true")
    af.add_argument("--fingerprint-out", default=None, help="write the fingerprint file here")
    af.add_argument("--temp", type=float, default=None)
    af.add_argument("--volt", type=float, default=None)
    _add_common(af)
    af.set_defaults(handler=cmd_acoustic_fingerprint)
    ae = ac_sub.add_parser("entropy")
    ae.add_argument("--devices", type=int, default=1000)
    ae.add_argument("--bins", type=int, default=256)
    ae.add_argument("--smoothing", type=float, default=0.0)
    _add_common(ae)
    ae.set_defaults(handler=cmd_acoustic_entropy)
    asp = ac_sub.add_parser("space")
    asp.add_argument("--t", type=int, required=True)
    asp.add_argument("--k", type=int, required=True)
    asp.add_argument("--p", type=int, default=None)
    _add_common(asp)
    asp.set_defaults(handler=cmd_acoustic_space)

    e = sub.add_parser("enroll", help="bank single-use CRPs with the trusted authority")
    e.add_argument("--device", required=True)
    e.add_argument("--pairs", type=int, required=True)
    e.add_argument("--store", required=True)
    e.add_argument("--mode", choices=[protocol.FORWARD, protocol.INVERSE], default=protocol.FORWARD)
    _add_common(e)
    e.set_defaults(handler=cmd_enroll)

    i = sub.add_parser("identify", help="run one identification round")
    i.add_argument("--device", required=True)
    i.add_argument("--store", required=True)
    i.add_argument("--tamper-bits", default=None, help="comma-separated bit positions to flip in transit")
    i.add_argument("--impostor", action="store_true", help="replace the device with a random responder")
    _add_common(i)
    i.set_defaults(handler=cmd_identify)

    cv = sub.add_parser("combined-verify", help="joint structural + cipher verification")
    cv.add_argument("--device", required=True)
    cv.add_argument("--store", required=True)
    cv.add_argument("--helper", required=True)
    cv.add_argument("--fingerprint", required=True)
    cv.add_argument("--tau", type=float, default=0.25)
    cv.add_argument("--structural-dof", type=float, default=None)
    cv.add_argument("--tamper-bits", default=None)
    cv.add_argument("--impostor", action="store_true")
    _add_common(cv)
    cv.set_defaults(handler=cmd_combined_verify)

    at = sub.add_parser("attack", help="cloning attacks")
    at_sub = at.add_subparsers(dest="action", required=True)
    am = at_sub.add_parser("model")
    am.add_argument("--target", choices=["arbiter", "xor", "suc"], required=True)
    am.add_argument("--train", type=int, default=5000)
    am.add_argument("--test", type=int, default=2000)
    am.add_argument("--stages", type=int, default=64)
    am.add_argument("--k", type=int, default=2)
    am.add_argument("--epochs", type=int, default=500)
    am.add_argument("--lr", type=float, default=0.5)
    _add_common(am)
    am.set_defaults(handler=cmd_attack_model)
    ar = at_sub.add_parser("readout")
    ar.add_argument("--cells", type=int, default=None)
    _add_common(ar)
    ar.set_defaults(handler=cmd_attack_readout)

    r = sub.add_parser("repro", help="named acceptance experiments")
    r.add_argument("name", choices=sorted(repro.EXPERIMENTS))
    _add_common(r)
    r.set_defaults(handler=cmd_repro)

    return parser


def _apply_config(args) -> None:
    if not getattr(args, "config", None):
        return
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            defaults = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(defaults, dict):
        raise DataFormatError(f"config {args.config} must be a JSON object")
    for key, value in defaults.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            setattr(args, attr, value)


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        _apply_config(args)
        result, code = args.handler(args)
    except DataFormatError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except (ValueError, TypeError, OSError) as exc:
        log.error("usage error: %s", exc)
        return EXIT_USAGE
    line = dumps_canonical(result)
    print(line)
    if getattr(args, "out", None):
        write_json(args.out, result)
    return code


if __name__ == "__main__":
    sys.exit(main())
