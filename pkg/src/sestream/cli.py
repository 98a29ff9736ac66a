"""Command-line front end.

Subcommands: enhance, probe, train, schedule, synth-data.  Exit codes: 0 ok,
2 usage/config errors, 3 data errors, 4 numeric errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .configio import load_config
from .dataset import synth_dataset
from .engine import run_stream
from .errors import ConfigError, DataError, DomainError, NumericError, ShapeError, StateError
from .metrics import delay_signal, si_sdr
from .probe import assert_block_causal, dep_to_pgm, dep_to_text, dependency_matrix
from .schedule import algorithmic_latency, inference_schedule
from .sde import BbedParams
from .spectral import StftConfig, StftAnalyzer, StftSynthesizer, Spectrogram, compress, decompress
from .training import TrainConfig, load_model_for_inference, train_toy
from .unet import BlockCausalUNet, UNetConfig
from .wavio import read_wav, write_wav


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sestream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    enh = sub.add_parser("enhance", help="enhance a WAV (or raw PCM on stdin/stdout)")
    enh.add_argument("--mode", required=True, choices=("predictive", "db-dsm", "db-dp"))
    enh.add_argument("--in", dest="infile", required=True, help="input WAV path, or - for raw PCM stdin")
    enh.add_argument("--out", dest="outfile", required=True, help="output WAV path, or - for raw PCM stdout")
    enh.add_argument("--checkpoint", required=True)
    enh.add_argument("--K", type=int, default=64)
    enh.add_argument("--B", type=int, default=16)
    enh.add_argument("--d", type=int, default=9)
    enh.add_argument("--seed", type=int, default=0)
    enh.add_argument("--report", default=None, help="append one JSON line per run")
    enh.add_argument("--reference", default=None, help="clean WAV; adds SI-SDR to the report")
    enh.add_argument("--raw-weights", action="store_true", help="use raw instead of EMA weights")

    prb = sub.add_parser("probe", help="measure the receptive field and check block causality")
    prb.add_argument("--config", default=None, help="TOML config for the probed network")
    prb.add_argument("--len", dest="length", type=int, default=43)
    prb.add_argument("--method", choices=("gradient", "perturbation"), default="gradient")
    prb.add_argument("--out", default=None, help="write the dependency matrix as a PGM image")
    prb.add_argument("--text", default=None, help="write the dependency matrix as a text grid")
    prb.add_argument("--freq-bins", type=int, default=32)
    prb.add_argument("--seed", type=int, default=0)

    trn = sub.add_parser("train", help="train on a manifest of clean/noisy WAV pairs")
    trn.add_argument("--loss", choices=("dsm", "dp", "mse"), required=True)
    trn.add_argument("--data", required=True, help="manifest CSV (clean_path, noisy_path)")
    trn.add_argument("--steps", type=int, required=True)
    trn.add_argument("--out", required=True, help="checkpoint output path")
    trn.add_argument("--config", default=None, help="TOML config for the network")
    trn.add_argument("--curve", default=None, help="loss curve CSV path")
    trn.add_argument("--resume", default=None, help="checkpoint to continue from")
    trn.add_argument("--batch", type=int, default=4)
    trn.add_argument("--lr", type=float, default=1e-4)
    trn.add_argument("--K", type=int, default=64)
    trn.add_argument("--seed", type=int, default=0)
    trn.add_argument("--log-every", type=int, default=0)

    sch = sub.add_parser("schedule", help="print the latency table and time-step schedule")
    sch.add_argument("--B", type=int, default=16)
    sch.add_argument("--config", default=None)

    syn = sub.add_parser("synth-data", help="generate synthetic clean/noisy WAV pairs")
    syn.add_argument("--n", type=int, required=True)
    syn.add_argument("--out-dir", required=True)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--duration", type=float, default=2.0)
    return parser


def _load_configs(path):
    if path is None:
        return None, BbedParams(), StftConfig()
    return load_config(path)


def _cmd_enhance(args) -> int:
    if args.mode == "db-dp" and not (0 <= args.d < args.B):
        print(f"error: db-dp needs 0 <= d < B, got d={args.d}, B={args.B}", file=sys.stderr)
        return 2
    if args.mode == "predictive" and not (0 <= args.d < args.K):
        print(f"error: predictive needs 0 <= d < K, got d={args.d}, K={args.K}", file=sys.stderr)
        return 2
    model = load_model_for_inference(args.checkpoint, use_ema=not args.raw_weights)
    stft_cfg = StftConfig()
    p = BbedParams()
    if args.infile == "-" or args.outfile == "-":
        return _enhance_raw(args, model, stft_cfg, p)
    samples, _ = read_wav(args.infile)
    enhanced, info = run_stream(
        samples, model, args.mode, stft_cfg, p, K=args.K, B=args.B, d=args.d, seed=args.seed
    )
    write_wav(args.outfile, enhanced)
    if args.reference:
        ref, _ = read_wav(args.reference)
        n = min(len(ref), len(enhanced))
        info["si_sdr"] = si_sdr(enhanced[:n], delay_signal(ref[:n], info["delay_samples"]))
    line = json.dumps(info)
    print(line)
    if args.report:
        with open(args.report, "a") as fh:
            fh.write(line + "\n")
    return 0


def _enhance_raw(args, model, stft_cfg, p) -> int:
    """Raw-frame mode: 16-bit PCM on stdin/stdout, one hop per tick."""
    from .engine import make_engine

    engine = make_engine(model, args.mode, stft_cfg, p, args.K, args.B, args.d, args.seed)
    analyzer = StftAnalyzer(stft_cfg)
    synth = StftSynthesizer(stft_cfg)
    hop_bytes = stft_cfg.hop * 2
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    while True:
        raw = stdin.read(hop_bytes)
        if not raw:
            break
        if len(raw) < hop_bytes:
            raw += b"\x00" * (hop_bytes - len(raw))
        hop = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        frame = analyzer.push_hop(hop)
        comp = _compress_frame(frame, stft_cfg)
        emitted = engine.step(comp)
        out_block = synth.push_frame(_decompress_frame(emitted, stft_cfg))
        if out_block is not None:
            stdout.write(_to_pcm(out_block))
    tail = synth.flush()
    if tail is not None:
        stdout.write(_to_pcm(tail))
    stdout.flush()
    return 0


def _compress_frame(frame, cfg):
    return compress(Spectrogram(frame[:, None]), cfg).data[:, 0]


def _decompress_frame(frame, cfg):
    return decompress(Spectrogram(frame[:, None], compressed=True), cfg).data[:, 0]


def _to_pcm(block: np.ndarray) -> bytes:
    return np.clip(np.round(block * 32768.0), -32768, 32767).astype("<i2").tobytes()


def _cmd_probe(args) -> int:
    if args.config:
        unet_cfg, _, _ = load_config(args.config)
        if unet_cfg.mode != "predictive":
            unet_cfg = UNetConfig(**{**unet_cfg.to_dict(), "mode": "predictive"})
    else:
        unet_cfg = UNetConfig(mode="predictive")
    net = BlockCausalUNet(unet_cfg, seed=args.seed)
    g = unet_cfg.global_stride
    dep = dependency_matrix(
        net.forward_array,
        (unet_cfg.in_channels, args.freq_bins, args.length),
        method=args.method,
        rng=np.random.default_rng(args.seed),
    )
    report = assert_block_causal(dep, g)
    print(report.summary())
    if args.out:
        Path(args.out).write_bytes(dep_to_pgm(dep))
    if args.text:
        Path(args.text).write_text(dep_to_text(dep) + "\n")
    return 0


def _cmd_train(args) -> int:
    unet_cfg, p, stft_cfg = _load_configs(args.config)
    if unet_cfg is None:
        mode = "predictive" if args.loss == "mse" else "diffusion"
        unet_cfg = UNetConfig(mode=mode)
    train_cfg = TrainConfig(
        loss=args.loss,
        steps=args.steps,
        batch_size=args.batch,
        lr=args.lr,
        K=args.K,
        seed=args.seed,
    )
    curve_path = args.curve or (str(args.out) + ".curve.csv")
    _, curve = train_toy(
        args.data,
        unet_cfg,
        train_cfg,
        args.out,
        stft_cfg=stft_cfg,
        p=p,
        curve_path=curve_path,
        resume=args.resume,
        log_every=args.log_every,
    )
    print(f"trained {len(curve)} steps, final loss {curve[-1][1]:.6f}, checkpoint {args.out}")
    return 0


def _cmd_schedule(args) -> int:
    _, p, stft_cfg = _load_configs(args.config)
    sched = inference_schedule(args.B, p)
    print(f"latency table (n_fft={stft_cfg.n_fft}, hop={stft_cfg.hop}, rate={stft_cfg.sample_rate})")
    print("  d   alg-latency  total-latency")
    for d in range(args.B):
        alg = algorithmic_latency(stft_cfg, d)
        total = alg + stft_cfg.hop_time
        print(f"  {d:<3d} {1e3 * alg:7.0f} ms   {1e3 * total:7.0f} ms")
    steps = " ".join(f"{t:.4f}" for t in sched.steps)
    print(f"schedule ({args.B} steps): {steps}")
    return 0


def _cmd_synth_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    manifest = synth_dataset(args.n, args.out_dir, rng, duration=args.duration)
    print(f"wrote {args.n} pairs, manifest {manifest}")
    return 0


_COMMANDS = {
    "enhance": _cmd_enhance,
    "probe": _cmd_probe,
    "train": _cmd_train,
    "schedule": _cmd_schedule,
    "synth-data": _cmd_synth_data,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, DomainError, ShapeError, StateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
