"""Command-line entry points.

Each artifact-writing command targets an output directory and leaves
exactly one manifest.json there recording inputs, seeds, and wall time.
All randomness derives from --seed; identical inputs and seeds reproduce
identical artifacts byte for byte (manifests record wall time and are the
one exception).
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import adp, autoencoder, io, pipeline, training
from ._version import __version__
from .channel import generate_dataset
from .errors import CsilocError
from .seeding import derive_seed


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"fraction {text} outside (0, 1)")
    return value


def _fraction_list(text: str):
    return [_fraction(part) for part in text.split(",") if part]


def _int_list(text: str):
    return [int(part) for part in text.split(",") if part]


def _resolve_threads(value):
    if value is not None:
        return value
    env = os.environ.get("CSILOC_THREADS")
    return int(env) if env else 1


def _out_dir(path: str) -> Path:
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _load_json(path: Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise CsilocError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None


def _ae_config_from_file(path: Path, overrides: dict) -> autoencoder.AutoencoderConfig:
    data = _load_json(path)
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["layer_widths"] = tuple(data["layer_widths"])
    return autoencoder.AutoencoderConfig(**data)


def _budget(args) -> training.OptimizationBudget:
    return training.OptimizationBudget(
        n_restarts=args.restarts,
        max_iterations=args.max_iterations,
        rng_seed=derive_seed(args.seed, "gpr-budget"),
    )


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    scenario = io.load_scenario(args.scenario)
    if args.seed is not None:
        scenario = io.scenario_from_dict(
            {**io.scenario_to_dict(scenario), "rng_seed": args.seed}
        )
    scenario.validate()
    out = _out_dir(args.out)
    samples = generate_dataset(scenario)
    dataset_path = out / "dataset.csid"
    io.save_dataset(dataset_path, scenario, samples)
    # read-back validation: header count must match what we wrote
    _, loaded = io.load_dataset(dataset_path)
    if len(loaded) != len(samples):
        raise CsilocError("dataset validation failed: sample count mismatch")
    io.write_manifest(
        out,
        command="generate",
        input_hashes={str(args.scenario): io.file_sha256(args.scenario)},
        seeds={"scenario": scenario.rng_seed},
        outputs=[dataset_path],
        wall_time_s=time.perf_counter() - t0,
    )
    print(f"wrote {dataset_path} ({len(samples)} samples)")
    return 0


def cmd_train_ae(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args.out)
    config = _ae_config_from_file(
        Path(args.config),
        {"epochs": args.epochs, "rng_seed": args.seed, "batch_size": args.batch_size},
    )
    vectors = []
    provenance = []
    for dataset_path in args.dataset:
        scenario, samples = io.load_dataset(dataset_path)
        width = scenario.n_antennas * scenario.n_subcarriers
        if width != config.input_width:
            raise CsilocError(
                f"{dataset_path}: profile length {width} does not match the "
                f"configured input width {config.input_width}"
            )
        vectors.append(pipeline.profile_vectors(samples))
        provenance.append(f"{dataset_path}:{io.file_sha256(dataset_path)}")
    model = pipeline.offline_phase1(np.vstack(vectors), config, provenance=provenance)

    model_path = out / "model.fcae"
    history_path = out / "history.csv"
    io.save_autoencoder(model_path, model)
    io.write_history_csv(history_path, model.history)
    io.load_autoencoder(model_path)  # validation read-back
    io.write_manifest(
        out,
        command="train-ae",
        input_hashes={str(p): io.file_sha256(p) for p in [args.config, *args.dataset]},
        seeds={"autoencoder": config.rng_seed},
        outputs=[model_path, history_path],
        wall_time_s=time.perf_counter() - t0,
    )
    print(f"wrote {model_path} (final loss {model.history[-1]:.3e})")
    return 0


def cmd_train_gpr(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args.out)
    scenario, samples = io.load_dataset(args.dataset)
    ae = io.load_autoencoder(args.ae) if args.ae else None
    split = pipeline.SplitSpec(
        train_fraction=args.fraction, n_trials=1, rng_seed=derive_seed(args.seed, "split")
    )
    result = pipeline.offline_phase2(ae, samples, split, _budget(args), surface=True)

    outputs = []
    for name, model, report in (
        ("x", result.gpr_x, result.report_x),
        ("y", result.gpr_y, result.report_y),
    ):
        model_path = out / f"gpr_{name}.gprm"
        io.save_gpr_model(model_path, model)
        outputs.append(model_path)
        surface_path = out / f"surface_{name}.csv"
        io.write_surface_csv(surface_path, report.surface)
        outputs.append(surface_path)
    report_path = out / "kernel_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                name: {
                    "winner": report.winner,
                    "entries": [
                        {
                            "kind": e.kind,
                            "nlml": e.nlml,
                            "cv_loss": e.cv,
                            "of": e.of,
                            "signal_std": e.spec.signal_std,
                            "length_scale": e.spec.length_scale,
                            "noise_std": e.spec.noise_std,
                            "mixture": e.spec.mixture,
                        }
                        for e in report.entries
                    ],
                }
                for name, report in (("x", result.report_x), ("y", result.report_y))
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    outputs.append(report_path)
    inputs = {str(args.dataset): io.file_sha256(args.dataset)}
    if args.ae:
        inputs[str(args.ae)] = io.file_sha256(args.ae)
    io.write_manifest(
        out,
        command="train-gpr",
        input_hashes=inputs,
        seeds={"root": args.seed},
        outputs=outputs,
        wall_time_s=time.perf_counter() - t0,
    )
    print(
        f"wrote {out}/gpr_x.gprm (kernel {result.report_x.winner}) and "
        f"{out}/gpr_y.gprm (kernel {result.report_y.winner})"
    )
    return 0


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args.out)
    scenario, samples = io.load_dataset(args.dataset)
    ae = io.load_autoencoder(args.ae) if args.ae else None
    threads = _resolve_threads(args.threads)

    reports = []
    for fraction in args.fractions:
        split = pipeline.SplitSpec(
            train_fraction=fraction,
            n_trials=args.trials,
            rng_seed=derive_seed(args.seed, f"evaluate-{fraction}"),
        )
        report = pipeline.evaluate(
            samples, ae, split, _budget(args),
            bypass_ae=ae is None, threshold=args.threshold, threads=threads,
        )
        reports.append(report)
        print(
            f"fraction {fraction}: mean RMSE {report.mean_rmse:.3f} m over "
            f"{args.trials} trials (baseline {report.mean_baseline_rmse:.3f} m)"
        )

    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json_dict() for r in reports], fh, indent=2, sort_keys=True)
    csv_path = out / "trials.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("trial,fraction,rmse_m,kernel_x,kernel_y,reject_rate,fit_ms,predict_ms\n")
        for report in reports:
            for t in report.trials:
                fh.write(
                    f"{t.trial},{report.train_fraction},{t.rmse!r},{t.kernel_x},"
                    f"{t.kernel_y},{t.reject_rate!r},{t.fit_seconds * 1e3!r},"
                    f"{t.predict_seconds * 1e3!r}\n"
                )
    inputs = {str(args.dataset): io.file_sha256(args.dataset)}
    if args.ae:
        inputs[str(args.ae)] = io.file_sha256(args.ae)
    io.write_manifest(
        out,
        command="evaluate",
        input_hashes=inputs,
        seeds={"root": args.seed},
        outputs=[report_path, csv_path],
        wall_time_s=time.perf_counter() - t0,
    )
    return 0


def cmd_localize(args) -> int:
    _, samples = io.load_dataset(args.dataset)
    if not 0 <= args.index < len(samples):
        raise CsilocError(f"--index {args.index} outside the dataset (size {len(samples)})")
    ae = io.load_autoencoder(args.ae)
    gpr_x = io.load_gpr_model(args.gpr_x)
    gpr_y = io.load_gpr_model(args.gpr_y)
    outcome = pipeline.online_localize(
        ae, gpr_x, gpr_y, samples[args.index].csi, threshold=args.threshold
    )
    print(json.dumps(
        {
            "similarity": outcome.similarity,
            "accepted": outcome.accepted,
            "estimate": list(outcome.estimate) if outcome.accepted else None,
            "threshold": args.threshold,
            "true_position": [float(v) for v in samples[args.index].position],
        },
        indent=2,
        sort_keys=True,
    ))
    return 0


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args.out)
    budget = _budget(args)
    cells = pipeline.timing_study(
        dims=args.dims, sizes=args.sizes, budget=budget,
        repetitions=args.repetitions, rng_seed=derive_seed(args.seed, "bench"),
    )
    csv_path = out / "timing.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n,d,median_seconds,repetitions\n")
        for cell in cells:
            fh.write(f"{cell.n},{cell.d},{cell.median_seconds!r},{len(cell.seconds)}\n")
            print(f"n={cell.n} d={cell.d}: median {cell.median_seconds:.3f} s")
    io.write_manifest(
        out,
        command="bench",
        input_hashes={},
        seeds={"root": args.seed},
        outputs=[csv_path],
        wall_time_s=time.perf_counter() - t0,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csiloc",
        description="Synthetic-CSI localization experiments: generate data, train "
        "models, and evaluate positioning accuracy.",
    )
    parser.add_argument("--version", action="version", version=f"csiloc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threads=False):
        p.add_argument("--seed", type=int, default=0, help="root seed; all randomness derives from it")
        p.add_argument("--restarts", type=int, default=5, help="optimizer restarts per kernel")
        p.add_argument("--max-iterations", dest="max_iterations", type=int, default=20,
                       help="gradient-descent iterations per restart")
        if threads:
            p.add_argument("--threads", type=int, default=None,
                           help="worker cap (default: CSILOC_THREADS or 1)")

    p = sub.add_parser("generate", help="synthesize a geo-tagged CSI dataset")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario rng_seed")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-ae", help="train the profile autoencoder (offline phase one)")
    p.add_argument("--dataset", action="append", required=True,
                   help="CSI dataset file; repeat to pool scenarios")
    p.add_argument("--config", required=True, help="autoencoder config JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config rng_seed")
    p.add_argument("--epochs", type=int, default=None, help="override the config epoch count")
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.set_defaults(func=cmd_train_ae)

    p = sub.add_parser("train-gpr", help="train coordinate regressors (offline phase two)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", default=None, help="autoencoder model file (omit with --no-ae)")
    p.add_argument("--no-ae", action="store_const", dest="ae", const=None,
                   help="train on raw profiles")
    p.add_argument("--fraction", type=_fraction, default=0.10)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_train_gpr)

    p = sub.add_parser("evaluate", help="repeated-trial RMSE at one or more training fractions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--ae", default=None, help="autoencoder model file")
    p.add_argument("--no-ae", action="store_const", dest="ae", const=None,
                   help="evaluate raw-profile regression without an autoencoder")
    p.add_argument("--fractions", type=_fraction_list, default=[0.10])
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--threshold", type=float, default=pipeline.DEFAULT_SIMILARITY_THRESHOLD)
    p.add_argument("--out", required=True)
    common(p, threads=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("localize", help="run the online phase on one stored CSI sample")
    p.add_argument("--dataset", required=True, help="dataset holding the query CSI")
    p.add_argument("--index", type=int, required=True, help="record index of the query")
    p.add_argument("--ae", required=True)
    p.add_argument("--gpr-x", dest="gpr_x", required=True)
    p.add_argument("--gpr-y", dest="gpr_y", required=True)
    p.add_argument("--threshold", type=float, default=pipeline.DEFAULT_SIMILARITY_THRESHOLD)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("bench", help="fit-plus-optimize timing over sample counts and input sizes")
    p.add_argument("--sizes", type=_int_list, required=True, help="training sizes, e.g. 72,362,720")
    p.add_argument("--dims", type=_int_list, required=True, help="input dimensions, e.g. 16,64,256")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CsilocError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
