"""Command-line entry point: ``tasnet-stream <command> ...``.

Commands print ``key=value`` lines on success; failures print a single
``error=<Name> message=<text>`` line to stderr and exit with status 2.
"""
import argparse
import sys

import numpy as np

from . import losses, streaming
from .errors import EnhancementError
from .fileio import load_config, load_weights, read_wav, save_weights, write_wav
from .model import enhance_offline, init_random, param_count


def _load_model(args):
    run = load_config(args.config)
    weights = load_weights(args.weights, run.model)
    return run, weights


def _write_outputs(outputs, args):
    write_wav(args.out_speech, outputs[0])
    if args.out_noise:
        if len(outputs) < 2:
            raise SystemExit("error=NoNoiseOutput message=model estimates speech only (K=1)")
        write_wav(args.out_noise, outputs[1])
    print(f"samples={len(outputs[0])}")
    print(f"sources={len(outputs)}")


def cmd_enhance(args):
    run, weights = _load_model(args)
    signal = read_wav(args.input)
    _write_outputs(enhance_offline(signal, run.model, weights), args)


def cmd_stream(args):
    run, weights = _load_model(args)
    signal = read_wav(args.input)
    _write_outputs(streaming.stream_signal(signal, run.model, weights), args)


def cmd_latency(args):
    run = load_config(args.config)
    for line in streaming.analyze_latency(run.model).lines():
        print(line)


def cmd_probe(args):
    run, weights = _load_model(args)
    result = streaming.probe_causality(run.model, weights, num_probes=args.probes, seed=args.seed)
    declared = streaming.analyze_latency(run.model)
    print(f"measured_future_frames={result.future_frames}")
    print(f"measured_conv_frames={result.conv_frames}")
    print(f"measured_reach_samples={result.reach_samples}")
    print(f"declared_future_frames={declared.future_frames}")


def cmd_metrics(args):
    clean, est = read_wav(args.clean), read_wav(args.est)
    n = min(len(clean), len(est))
    s, e = clean.samples[:n], est.samples[:n]
    cfg = load_config(args.config).loss if args.config else None
    report = losses.compute_loss(args.loss, s, e, cfg)
    print(f"loss={args.loss}")
    print(f"value={report.value:.6f}")
    print(f"status={report.status}")
    print(f"si_snr_db={losses.si_snr_metric(s, e):.6f}")
    print(f"ssnr_db={losses.ssnr_metric(s, e):.6f}")


def cmd_bench(args):
    run, weights = _load_model(args)
    if args.input:
        x = read_wav(args.input).samples
    else:
        x = 0.1 * np.random.default_rng(args.seed).standard_normal(int(args.seconds * 16000))
    print(f"params={param_count(run.model)}")
    for line in streaming.bench_per_frame(run.model, weights, x).lines():
        print(line)


def cmd_init_weights(args):
    run = load_config(args.config)
    seed = run.seed if args.seed is None else args.seed
    weights = init_random(run.model, seed)
    save_weights(args.out, weights)
    print(f"tensors={len(weights)}")
    print(f"params={weights.num_params}")


def build_parser():
    parser = argparse.ArgumentParser(prog="tasnet-stream", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p):
        p.add_argument("--config", required=True)
        p.add_argument("--weights", required=True)

    for name, fn in (("enhance", cmd_enhance), ("stream", cmd_stream)):
        p = sub.add_parser(name)
        model_args(p)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--out-speech", required=True)
        p.add_argument("--out-noise")
        p.set_defaults(func=fn)

    p = sub.add_parser("latency")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("probe")
    model_args(p)
    p.add_argument("--probes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("metrics")
    p.add_argument("--clean", required=True)
    p.add_argument("--est", required=True)
    p.add_argument("--loss", choices=sorted(losses.LOSSES), default="sisnr")
    p.add_argument("--config")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench")
    model_args(p)
    p.add_argument("--in", dest="input")
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("init-weights")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except EnhancementError as exc:
        print(f"error={exc.code} message={_one_line(exc)}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error={type(exc).__name__} message={_one_line(exc)}", file=sys.stderr)
        return 2
    return 0


def _one_line(exc):
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
