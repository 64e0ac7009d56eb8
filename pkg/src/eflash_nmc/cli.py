"""Command-line entry point: program | bake | infer | hist | pumptrace | selftest.

Every command is deterministic given (config, seed, inputs); reruns produce
byte-identical JSON/CSV payloads.
"""

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .analog import ChargePump
from .array import DriftParams
from .codec import ReferenceLadder, StateCodec
from .config import SimConfig
from .dataset import Dataset, load_mnist_idx, make_synthetic_anomaly
from .errors import ConfigError, SimError
from .metrics import accuracy, auc_bruteforce, auc_rank
from .model import (
    Deployment,
    EvalResult,
    assign_placement,
    deploy,
    evaluate,
    load_model,
)
from .program import ProgramJob, pattern_to_rows, program_row


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _load_config(args):
    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _require_state(path):
    if not Path(path).is_file() or not Path(path + ".json").is_file():
        raise ConfigError(f"macro state not found: {path} (+ .json sidecar)")


def cmd_program(args):
    cfg = _load_config(args)
    macro = cfg.build_macro()
    model = load_model(args.model)
    macro.power_up()
    deployment = deploy(model, macro, preset=args.preset)
    payload = {
        "model": model.name,
        "placement": deployment.placement_dict(),
        "read_mv": list(macro.ladder.read_mv),
        "verify_mv": list(macro.ladder.verify_mv),
    }
    _write_json(args.out, payload)
    if args.state_out:
        macro.save_state(args.state_out)
    return 0


def cmd_bake(args):
    cfg = _load_config(args)
    macro = cfg.build_macro()
    _require_state(args.state)
    macro.load_state(args.state)
    report = macro.apply_bake(
        DriftParams(args.loss_fraction, args.sigma_mv, hours=args.hours)
    )
    _write_json(args.out, report.to_dict())
    if args.state_out:
        macro.save_state(args.state_out)
    return 0


def _build_dataset(args, model):
    first = model.layers[0]
    if args.images or args.labels:
        if not (args.images and args.labels):
            raise ConfigError("--images and --labels come as a pair")
        return load_mnist_idx(
            args.images, args.labels, args.limit, first.input_scale, first.input_zp
        )
    if args.synth:
        return make_synthetic_anomaly(
            dim=model.input_dim,
            input_scale=first.input_scale,
            input_zp=first.input_zp,
            seed=args.synth_seed,
        )
    raise ConfigError("provide --images/--labels or --synth")


def _evaluate_sharded(deployment, dataset, jobs):
    """Shard the dataset over cloned macros and merge per-sample results."""
    if jobs <= 1 or len(dataset) < 2 * jobs:
        return evaluate(deployment, dataset)
    bounds = np.linspace(0, len(dataset), jobs + 1).astype(int)
    preds, scores = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        shard = Dataset(dataset.samples[lo:hi], dataset.labels[lo:hi], dataset.kind)
        clone = Deployment(
            deployment.model, copy.deepcopy(deployment.macro), deployment.base_rows
        )
        r = evaluate(clone, shard)
        preds.extend(r.predictions)
        scores.extend(r.scores)
    if deployment.model.task == "classify":
        preds = np.asarray(preds)
        per_class = {
            int(c): {
                "count": int(np.sum(dataset.labels == c)),
                "correct": int(np.sum(preds[dataset.labels == c] == c)),
            }
            for c in np.unique(dataset.labels)
        }
        return EvalResult(
            "classify",
            "accuracy",
            accuracy(preds, dataset.labels),
            len(dataset),
            per_class,
            predictions=preds.tolist(),
        )
    return EvalResult(
        "reconstruct",
        "auc",
        auc_rank(np.asarray(scores), dataset.labels),
        len(dataset),
        scores=list(scores),
    )


def cmd_infer(args):
    cfg = _load_config(args)
    macro = cfg.build_macro()
    model = load_model(args.model)
    if args.state:
        _require_state(args.state)
        macro.load_state(args.state)
        deployment = Deployment(model, macro, assign_placement(model, macro))
    else:
        macro.power_up()
        deployment = deploy(model, macro, preset=args.preset)
    result = _evaluate_sharded(deployment, _build_dataset(args, model), args.jobs)
    _write_json(args.out, result.to_dict())
    return 0


def cmd_hist(args):
    cfg = _load_config(args)
    macro = cfg.build_macro()
    if args.state:
        _require_state(args.state)
        macro.load_state(args.state)
    lefts, counts = macro.vt_histogram(args.bank, args.bin_mv)
    lines = ["bin_left_mv,count"]
    lines += [f"{left:.3f},{count}" for left, count in zip(lefts, counts)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_pumptrace(args):
    cfg = _load_config(args)
    pump = ChargePump(
        vpp4_target_mv=cfg.vpp4_target_mv, tau_steps=cfg.pump_tau_steps
    )
    rows = []
    step = 0

    def record():
        rows.append(
            [step, *pump.vpp_mv.round(3).tolist(), *pump.vps_mv.round(3).tolist()]
        )

    pump.enable()
    while not pump.regulated and step < 100000:
        pump.step()
        step += 1
        record()
    for _ in range(args.hold_steps):
        pump.step()
        step += 1
        record()
    pump.disable()
    while pump.vpp_mv[3] > 1.0 and step < 200000:
        pump.step()
        step += 1
        record()
    lines = ["step,vpp1,vpp2,vpp3,vpp4,vps1,vps2,vps3,vps4"]
    lines += [",".join(str(v) for v in r) for r in rows]
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_selftest(args):
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as e:  # report, keep going
            checks.append((name, False, str(e)))

    def codec_suite():
        codec = StateCodec()
        for w in range(-8, 8):
            assert codec.decode_state(codec.encode_weight(w)) == w
        for s in range(15):
            assert abs(codec.decode_state(s + 1) - codec.decode_state(s)) == 1

    def ladder_suite():
        ladder = ReferenceLadder.uniform()
        assert all(r < v for r, v in zip(ladder.read_mv, ladder.verify_mv))
        assert ladder.classify(0.0) == 0 and ladder.classify(2500.0) == 15

    def pump_suite():
        pump = ChargePump()
        pump.run_until_regulated()
        for _ in range(50):
            pump.step()
        assert abs(pump.vpp_mv[3] - 10000.0) <= 200.0
        pump.disable()
        for _ in range(500):
            pump.step()
        assert np.allclose(pump.vps_mv, 2500.0)

    def roundtrip_suite():
        cfg = SimConfig(
            banks=1, rows_per_bank=4, erased_sigma_mv=0.0, step_sigma_mv=0.0, seed=7
        )
        macro = cfg.build_macro()
        macro.power_up()
        rng = np.random.default_rng(7)
        weights = rng.integers(-8, 8, 4 * 256)
        rows = pattern_to_rows(macro, weights)
        for i, targets in enumerate(rows):
            bank, row = macro.split_row(i)
            program_row(macro, ProgramJob(bank, row, targets))
            assert np.array_equal(macro.read_row(bank, row), targets)

    def auc_suite():
        rng = np.random.default_rng(3)
        scores = rng.normal(size=60)
        labels = rng.integers(0, 2, 60)
        labels[0], labels[1] = 0, 1
        assert abs(auc_rank(scores, labels) - auc_bruteforce(scores, labels)) < 1e-12

    check("codec bijectivity and adjacency", codec_suite)
    check("reference ladder margins", ladder_suite)
    check("pump regulation and discharge", pump_suite)
    check("zero-noise program/read round trip", roundtrip_suite)
    check("rank AUC vs pairwise AUC", auc_suite)

    width = max(len(name) for name, _, _ in checks)
    ok = True
    for name, passed, msg in checks:
        status = "PASS" if passed else f"FAIL  {msg}"
        print(f"{name.ljust(width)}  {status}")
        ok = ok and passed
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eflash-nmc",
        description="4-bits/cell eflash + near-memory-compute behavioral simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, state=False):
        p.add_argument("--config", help="simulator config JSON")
        p.add_argument("--seed", type=int, help="override the config seed")
        if state:
            p.add_argument("--state", help="macro state file (flat vt binary)")

    p = sub.add_parser("program", help="deploy a model's weights into the macro")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="placement/margin report JSON")
    p.add_argument("--state-out", help="write the programmed macro state here")
    p.add_argument("--preset", action="store_true",
                   help="write VT levels directly instead of pulse programming")
    p.set_defaults(fn=cmd_program)

    p = sub.add_parser("bake", help="apply retention drift to a saved state")
    common(p)
    p.add_argument("--state", required=True)
    p.add_argument("--hours", type=float, default=160.0)
    p.add_argument("--loss-fraction", type=float, required=True)
    p.add_argument("--sigma-mv", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--state-out")
    p.set_defaults(fn=cmd_bake)

    p = sub.add_parser("infer", help="evaluate a model on a dataset")
    common(p, state=True)
    p.add_argument("--model", required=True)
    p.add_argument("--images", help="IDX images file")
    p.add_argument("--labels", help="IDX labels file")
    p.add_argument("--limit", type=int)
    p.add_argument("--synth", action="store_true", help="synthetic anomaly set")
    p.add_argument("--synth-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--preset", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("hist", help="emit a VT histogram CSV")
    common(p, state=True)
    p.add_argument("--bank", type=int)
    p.add_argument("--bin-mv", type=float, default=25.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_hist)

    p = sub.add_parser("pumptrace", help="emit a pump enable/disable ramp CSV")
    common(p)
    p.add_argument("--hold-steps", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pumptrace)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SimError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
