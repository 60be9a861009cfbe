"""Deterministic command-line front end for the full pipeline.

Subcommands: synth, pool, smaid, localize, gram, train-svm, predict, eval,
train-e2e, gradcheck. Every run is reproducible byte-for-byte given the same
arguments: all randomness flows from explicit --seed flags, and CSV outputs
carry a `# spdpool-config:` echo of the effective configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import classify, learning, pooling, smaid, spd, trajectory

PROG = "spdpool"


class UsageError(Exception):
    """Bad flag combinations detected after argparse; exits with status 2."""


def _config_echo(args: argparse.Namespace) -> str:
    skip = {"command", "func"}
    parts = [args.command]
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        if value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                parts.append(flag)
        else:
            parts.append(f"{flag} {value}")
    return f"# {PROG}-config: " + " ".join(parts)


def _load_labels_sorted(path) -> tuple[list[str], np.ndarray]:
    pairs = sorted(trajectory.load_labels(path))
    ids = [sid for sid, _ in pairs]
    labels = np.array([label for _, label in pairs], dtype=int)
    return ids, labels


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    dataset = trajectory.synth_coactivation(
        num_classes=args.classes,
        channels=args.channels,
        pairs_per_class=args.pairs_per_class,
        seq_len=args.seq_len,
        sequences_per_class=args.sequences_per_class,
        noise_sigma=args.noise_sigma,
        activation_prob=args.activation_prob,
        seed=args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pairs = []
    for rec in dataset.records:
        sid = rec.trajectory.sequence_id
        trajectory.save_trajectory(rec.trajectory, out / f"{sid}.trj", "trj-binary")
        pairs.append((sid, rec.label))
    trajectory.save_labels(pairs, out / "labels.csv")
    print(f"wrote {len(pairs)} sequences to {out}")
    return 0


def _pool_one(args, src: Path, dst: Path) -> None:
    t = trajectory.load_trajectory(src, args.format)
    if args.normalize != "none":
        t = trajectory.normalize_scores(t, args.normalize)
    if args.uniform_weights:
        t = trajectory.apply_weights(
            t, trajectory.WeightProfile.uniform(t.num_channels, t.num_frames)
        )
    if args.method == "tcp":
        desc = pooling.tcp(t, scale=args.scale)
    elif args.method == "kcp":
        desc = pooling.kcp(t, args.gamma)
    else:
        config = pooling.BkcpConfig(args.block_len, args.permutations, args.perm_seed)
        desc = pooling.bkcp(t, args.gamma, config)
    pooling.save_descriptor(desc, dst)


def _cmd_pool(args) -> int:
    src = Path(getattr(args, "in"))
    dst = Path(args.out)
    if src.is_dir():
        files = sorted(src.glob("*.trj"))
        if not files:
            raise UsageError(f"--in directory {src} contains no .trj files")
        dst.mkdir(parents=True, exist_ok=True)
        for f in files:
            _pool_one(args, f, dst / (f.stem + ".spd"))
        print(f"pooled {len(files)} trajectories into {dst}")
    else:
        _pool_one(args, src, dst)
        print(f"wrote {dst}")
    return 0


def _cmd_smaid(args) -> int:
    if args.preset == "zeta15":
        zeta = 15
    elif args.preset == "zeta7":
        zeta = 7
    else:
        zeta = args.zeta
    frames = smaid.read_frames_dir(args.frames_dir)
    image = smaid.smaid(frames, smaid.SmaidConfig(zeta=zeta, beta=args.beta, tau=args.tau))
    written = smaid.write_smaid(image, args.out)
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


def _cmd_localize(args) -> int:
    frames = smaid.read_frames_dir(args.frames_dir)
    box = smaid.localize(
        frames,
        diff_threshold=args.diff_threshold,
        dilate_radius=args.dilate_radius,
        dilate_iters=args.dilate_iters,
        min_component_area=args.min_area,
    )
    lines = [_config_echo(args), "x0,y0,x1,y1", f"{box.x0},{box.y0},{box.x1},{box.y1}"]
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out}: x0={box.x0} y0={box.y0} x1={box.x1} y1={box.y1}")
    return 0


def _cmd_gram(args) -> int:
    src = Path(getattr(args, "in"))
    if src.is_dir():
        files = sorted(src.glob("*.spd"))
    else:
        files = [src]
    if not files:
        raise UsageError(f"--in {src} contains no .spd descriptor files")
    descs = [pooling.load_descriptor(f) for f in files]
    measure = {
        "le": "le_kernel",
        "stein": "stein_kernel",
        "linear-logvec": "linear_on_logvec",
    }[args.measure]
    K = spd.gram(descs, measure, xi=args.xi, clamp=args.clamp)
    spd.save_gram(K, args.out, header=_config_echo(args))
    if args.ids_out:
        Path(args.ids_out).write_text(
            "\n".join([_config_echo(args)] + [f.stem for f in files]) + "\n"
        )
    print(f"wrote {args.out} ({K.shape[0]}x{K.shape[0]})")
    return 0


def _cmd_train_svm(args) -> int:
    K = spd.load_gram(args.gram)
    _, labels = _load_labels_sorted(args.labels)
    if len(labels) != K.shape[0]:
        raise UsageError(
            f"{len(labels)} labels vs {K.shape[0]} gram rows; both must follow "
            "ascending sequence_id order"
        )
    model = classify.svm_train(
        K,
        labels,
        C=args.svm_c,
        tol=args.tol,
        max_passes=args.max_passes,
        seed=args.seed,
        kernel=classify.KernelSpec(args.measure),
    )
    classify.save_model(model, args.out)
    print(f"wrote {args.out} ({model.num_classes} classes, {model.num_train} train points)")
    return 0


def _cmd_predict(args) -> int:
    model = classify.load_model(args.model)
    K = spd.load_gram(args.gram)
    scores, predicted = classify.svm_predict(model, K)
    lines = [_config_echo(args)]
    lines.append(
        "index,predicted," + ",".join(f"score_{c}" for c in range(1, model.num_classes + 1))
    )
    for i in range(len(predicted)):
        row = ",".join(repr(float(s)) for s in scores[i])
        lines.append(f"{i},{predicted[i]},{row}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out} ({len(predicted)} predictions)")
    return 0


def _read_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    scores, predicted = [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#") or line.startswith("index,"):
            continue
        cells = line.split(",")
        predicted.append(int(cells[1]))
        scores.append([float(x) for x in cells[2:]])
    if not scores:
        raise ValueError(f"{path}: no prediction rows")
    return np.array(scores), np.array(predicted, dtype=int)


def _cmd_eval(args) -> int:
    _, labels = _load_labels_sorted(args.labels)
    if args.pred is not None:
        scores, predicted = _read_predictions(args.pred)
        report = classify.evaluate(scores, predicted, labels)
    elif args.gram is not None:
        K = spd.load_gram(args.gram)
        if len(labels) != K.shape[0]:
            raise UsageError(f"{len(labels)} labels vs {K.shape[0]} gram rows")
        num_classes = int(labels.max())
        scores = np.zeros((len(labels), num_classes))
        predicted = np.zeros(len(labels), dtype=int)
        for fold, (train, test) in enumerate(classify.kfold(labels, args.folds, args.seed)):
            model = classify.svm_train(
                K[np.ix_(train, train)],
                labels[train],
                C=args.svm_c,
                tol=args.tol,
                max_passes=args.max_passes,
                seed=args.seed + fold,
                num_classes=num_classes,
            )
            s, p = classify.svm_predict(model, K[np.ix_(test, train)])
            scores[test] = s
            predicted[test] = p
        report = classify.evaluate(scores, predicted, labels)
    else:
        raise UsageError("eval needs either --pred or --gram (k-fold protocol)")
    Path(args.out).write_text(classify.report_to_csv(report, header=_config_echo(args)))
    if args.out_text:
        Path(args.out_text).write_text(classify.report_to_text(report))
    print(f"accuracy={report.accuracy:.4f} mean_ap={report.mean_ap:.4f} -> {args.out}")
    return 0


def _cmd_train_e2e(args) -> int:
    dataset = trajectory.load_dataset(args.data_dir)
    result = learning.train_linear(
        dataset,
        loss=args.loss,
        lr=args.lr,
        momentum=args.momentum,
        iters=args.iters,
        clip_len=args.clip_len,
        seed=args.seed,
        epsilon=args.epsilon,
        init_scale=args.init_scale,
    )
    learning.save_linear_map(result.linear_map, args.out_map)
    learning.save_loss_trace(result.loss_trace, args.out_trace, header=_config_echo(args))
    initial, final = result.loss_trace[0], result.loss_trace[-1]
    print(f"loss {initial:.6g} -> {final:.6g} over {args.iters} iterations")
    return 0


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    T = rng.standard_normal((args.classes, args.frames))
    label = int(rng.integers(1, args.classes + 1))
    epsilon = args.epsilon if args.epsilon is not None else (1e-5 if args.loss == "jbld" else 0.0)
    Y = learning.encode_label(label, args.classes, epsilon)
    report = learning.fd_gradient(args.loss, T, Y, h=args.step)
    lines = [_config_echo(args), "quantity,value"]
    lines.append(f"max_relative_error,{report.max_relative_error!r}")
    lines.append(f"step,{report.step!r}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(
        f"{args.loss} gradient vs central differences (h={report.step:g}): "
        f"max relative error {report.max_relative_error:.3e}"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description=__doc__,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(
            name, help=help_text, formatter_class=argparse.ArgumentDefaultsHelpFormatter
        )
        p.add_argument(
            "--threads",
            type=int,
            default=1,
            help="parallelism hint; results are identical for any value",
        )
        return p

    p = add("synth", "generate the synthetic co-activation dataset")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--pairs-per-class", type=int, default=1)
    p.add_argument("--seq-len", type=int, default=40)
    p.add_argument("--sequences-per-class", type=int, default=25)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--activation-prob", type=float, default=0.35)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = add("pool", "pool trajectories into second-order descriptors")
    p.add_argument("--method", choices=("tcp", "kcp", "bkcp"), default="kcp")
    p.add_argument("--in", required=True, help="trajectory file or directory of .trj files")
    p.add_argument("--out", required=True, help="descriptor file or output directory")
    p.add_argument("--format", choices=("csv", "trj-binary"), default=None,
                   help="input format (default: inferred from suffix)")
    p.add_argument("--normalize", choices=("none", "simplex", "minmax", "softmax"),
                   default="none")
    p.add_argument("--uniform-weights", action="store_true",
                   help="apply the uniform 1/n temporal weighting before pooling")
    p.add_argument("--scale", choices=("none", "by_n"), default="none", help="tcp scaling")
    p.add_argument("--gamma", type=float, default=1.0, help="RBF bandwidth for kcp/bkcp")
    p.add_argument("--block-len", type=int, default=16, help="bkcp block length p")
    p.add_argument("--permutations", type=int, default=3, help="bkcp permutation count")
    p.add_argument("--perm-seed", type=int, default=0, help="bkcp permutation seed")
    p.set_defaults(func=_cmd_pool)

    p = add("smaid", "summarize a frame directory into a motion image stack")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--out", required=True, help="output PNM path (P6 for 3 channels)")
    p.add_argument("--zeta", type=int, default=15, help="frames per channel")
    p.add_argument("--beta", type=int, default=3, help="channel count")
    p.add_argument("--tau", type=int, default=0, help="start offset")
    p.add_argument("--preset", choices=("none", "zeta15", "zeta7"), default="none",
                   help="zeta presets for long clips (15) or short clips (7)")
    p.set_defaults(func=_cmd_smaid)

    p = add("localize", "bounding box of motion via morphological analysis")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--diff-threshold", type=float, default=12.0)
    p.add_argument("--dilate-radius", type=int, default=1)
    p.add_argument("--dilate-iters", type=int, default=2)
    p.add_argument("--min-area", type=int, default=16)
    p.set_defaults(func=_cmd_localize)

    p = add("gram", "kernel matrix over descriptor files")
    p.add_argument("--in", required=True, help=".spd file or directory of .spd files")
    p.add_argument("--out", required=True, help="output .grm (binary) or .csv")
    p.add_argument("--measure", choices=("le", "stein", "linear-logvec"), default="le")
    p.add_argument("--xi", type=float, default=1.0, help="kernel bandwidth")
    p.add_argument("--clamp", type=float, default=1e-10, help="eigenvalue clamp for logs")
    p.add_argument("--ids-out", default=None, help="optional file listing the row order")
    p.set_defaults(func=_cmd_gram)

    p = add("train-svm", "one-vs-rest SVM on a precomputed gram matrix")
    p.add_argument("--gram", required=True)
    p.add_argument("--labels", required=True, help="labels.csv (sequence_id,label)")
    p.add_argument("--svm-c", type=float, default=1.0, help="regularization C")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--measure", default="precomputed",
                   help="kernel tag recorded in the model file")
    p.add_argument("--out", required=True, help="output .svm1 model file")
    p.set_defaults(func=_cmd_train_svm)

    p = add("predict", "decision values of gram rows against a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--gram", required=True,
                   help="kernel rows (test x train) against the training set")
    p.add_argument("--out", required=True, help="output predictions CSV")
    p.set_defaults(func=_cmd_predict)

    p = add("eval", "score predictions, or run the k-fold protocol on a gram")
    p.add_argument("--labels", required=True)
    p.add_argument("--pred", default=None, help="predictions CSV from `predict`")
    p.add_argument("--gram", default=None, help="gram matrix for the k-fold protocol")
    p.add_argument("--folds", type=int, default=5, help="fold count for --gram mode")
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report CSV path")
    p.add_argument("--out-text", default=None, help="optional human-readable report")
    p.set_defaults(func=_cmd_eval)

    p = add("train-e2e", "toy end-to-end training of a linear map + softmax")
    p.add_argument("--data-dir", required=True, help="directory with .trj files and labels.csv")
    p.add_argument("--loss", choices=("frob", "jbld"), default="frob")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--clip-len", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=None,
                   help="label smoothing (default: 1e-5 for jbld, 0 for frob)")
    p.add_argument("--init-scale", type=float, default=0.05,
                   help="std of the seeded random initial map")
    p.add_argument("--out-map", required=True, help="output linear map (.trj container)")
    p.add_argument("--out-trace", required=True, help="output loss trace CSV")
    p.set_defaults(func=_cmd_train_e2e)

    p = add("gradcheck", "verify a loss gradient against central differences")
    p.add_argument("--loss", choices=("jbld", "frob"), default="jbld")
    p.add_argument("--classes", "--M", dest="classes", type=int, default=3)
    p.add_argument("--frames", "--n", dest="frames", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", "--h", dest="step", type=float, default=1e-6)
    p.add_argument("--epsilon", type=float, default=None,
                   help="label smoothing (default: 1e-5 for jbld, 0 for frob)")
    p.add_argument("--out", default=None, help="optional report CSV")
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
