"""Command-line pipeline: generate data, mine importance, train, compare,
and report estimator variance.

Exit codes: 0 on success, 2 on usage or validation problems, 3 when a run
diverges. Every artifact written gets a ``<path>.run.json`` sidecar that
records the command, resolved configuration, input hashes, and wall time.
"""

import argparse
import hashlib
import json
import sys
import time

import numpy as np

from . import analysis, data, fim, optimizer, plotting
from .errors import DivergenceError, GradmineError
from .models import STREAM_EVAL, get_model, params_to_vector, spec_for_dataset


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_record(out_path, args, started, inputs, outputs):
    config = {k: v for k, v in vars(args).items() if k != "func"}
    blob = json.dumps(config, sort_keys=True, default=str)
    record = {
        "command": " ".join(sys.argv) if sys.argv else args.command,
        "config": config,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "seed": getattr(args, "seed", None),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": list(outputs),
        "wall_ms": (time.perf_counter() - started) * 1e3,
    }
    with open(str(out_path) + ".run.json", "w") as fh:
        json.dump(record, fh, indent=2, default=str)
        fh.write("\n")


def _add_model_args(p, default_model="lstm"):
    p.add_argument("--model", default=default_model,
                   choices=["rnn", "lstm", "rnnrbm"])
    p.add_argument("--embed-dim", type=int, default=8)
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--context", type=int, default=8)
    p.add_argument("--cd-k", type=int, default=1)


def _spec(args, dataset):
    return spec_for_dataset(
        dataset,
        args.model,
        embed=args.embed_dim,
        hidden=args.hidden,
        classes=args.classes,
        context=args.context,
        cd_k=args.cd_k,
    )


def cmd_gen(args):
    started = time.perf_counter()
    if args.task == "seqclass":
        dataset = data.gen_seqclass(
            n=args.n,
            vocab=args.vocab,
            length_range=(args.len_min, args.len_max),
            hard_fraction=args.hard,
            seed=args.seed,
        )
    else:
        dataset = data.gen_pianoroll(
            n=args.n,
            n_v=args.nv,
            length_range=(args.len_min, args.len_max),
            patterns=args.patterns,
            seed=args.seed,
        )
        if args.frames_per_sample:
            dataset = data.chunk_frames(dataset, args.frames_per_sample)
    data.save_dataset(args.out, dataset)
    _write_run_record(args.out, args, started, [], [args.out])
    print(json.dumps(dataset.manifest, indent=2))
    return 0


def cmd_mine(args):
    started = time.perf_counter()
    dataset = data.load_dataset(args.data)
    spec = _spec(args, dataset)
    epsilon = args.epsilon
    if epsilon is None:
        if args.target_loss is None:
            raise GradmineError("one of --epsilon / --target-loss is required")
        epsilon = fim.default_epsilon(args.target_loss)
    cfg = fim.FimConfig(
        epsilon=epsilon,
        lr=args.lr,
        t_max=args.t_max,
        seed=args.seed,
        base_selector=args.base_selector,
        norm_kind=args.norm_kind,
        embed_diagnostic=args.embed_diagnostic,
    )
    result = fim.mine_importance(dataset, spec, cfg, n_workers=args.workers)
    table = result.table
    fim.save_importance(args.out, table)
    _write_run_record(args.out, args, started, [args.data], [args.out])

    stalled = int(np.sum(~table.converged))
    print(
        f"mined {table.n} samples: p_i min {table.probs.min():.3e} "
        f"max {table.probs.max():.3e} mean {table.probs.mean():.3e}; "
        f"iterations mean {table.iterations.mean():.1f}; "
        f"not converged: {stalled}"
    )
    if stalled:
        print(f"warning: {stalled} samples hit the {cfg.t_max}-step cap",
              file=sys.stderr)
    if int(table.iterations.max()) == 0:
        print(
            "warning: epsilon is above every initial loss; table is uniform",
            file=sys.stderr,
        )
    if result.embedding_spread is not None:
        print(f"private-embedding mean pairwise distance: "
              f"{result.embedding_spread:.6g}")
    return 0


def _load_table_for(args, dataset):
    table = fim.load_importance(args.importance)
    if table.n != len(dataset):
        raise GradmineError(
            f"importance table covers {table.n} samples, "
            f"dataset has {len(dataset)}"
        )
    return table


# Frame-grouping presets for the generative model: grouped-frame count
# paired with the step size that works at that grouping.
RBM_PRESETS = {"50": (50, 0.3), "100": (100, 0.003)}


def cmd_train(args):
    started = time.perf_counter()
    dataset = data.load_dataset(args.data)
    if getattr(args, "rbm_preset", None):
        frames, lr = RBM_PRESETS[args.rbm_preset]
        args.lr = lr
        dataset = data.chunk_frames(dataset, frames)
    spec = _spec(args, dataset)
    table = None
    inputs = [args.data]
    if args.sampler == "importance":
        if not args.importance:
            raise GradmineError("--sampler importance requires --importance")
        table = _load_table_for(args, dataset)
        inputs.append(args.importance)
    cfg = optimizer.TrainConfig(
        spec=spec,
        lr=args.lr,
        epochs=args.epochs,
        sampler=args.sampler,
        importance=table,
        seed=args.seed,
        eval_every=args.eval_every,
        clip=args.clip,
    )
    eval_dataset = data.load_dataset(args.eval_data) if args.eval_data else None
    if eval_dataset is not None:
        inputs.append(args.eval_data)
    params0 = get_model(spec).init_params(args.seed)
    _, log = optimizer.train(dataset, params0, cfg, eval_dataset=eval_dataset)
    optimizer.save_metrics(args.out, log)
    outputs = [args.out]
    if args.svg:
        rows = log.split_rows("train")
        svg = plotting.svg_line_chart(
            [(args.sampler, [r.epoch for r in rows], [getattr(r, args.metric) for r in rows])],
            title=f"{spec.kind} training",
            xlabel="epoch",
            ylabel=args.metric,
        )
        with open(args.svg, "w") as fh:
            fh.write(svg)
        outputs.append(args.svg)
        _write_run_record(args.svg, args, started, inputs, outputs)
    _write_run_record(args.out, args, started, inputs, outputs)
    last = log.rows[-1]
    print(
        f"epoch {last.epoch}: loss {last.loss:.6f} "
        f"error {last.error_rate:.4f} grad_var {last.grad_var:.6g}"
    )
    return 0


def cmd_compare(args):
    started = time.perf_counter()
    dataset = data.load_dataset(args.data)
    spec = _spec(args, dataset)
    table = _load_table_for(args, dataset)
    params0 = get_model(spec).init_params(args.seed)

    logs = {}
    for sampler in (optimizer.UNIFORM, optimizer.IMPORTANCE):
        cfg = optimizer.TrainConfig(
            spec=spec,
            lr=args.lr,
            epochs=args.epochs,
            sampler=sampler,
            importance=table if sampler == optimizer.IMPORTANCE else None,
            seed=args.seed,
            eval_every=args.eval_every,
            clip=args.clip,
        )
        _, logs[sampler] = optimizer.train(dataset, params0, cfg)

    merged = optimizer.MetricsLog(seed=args.seed)
    for sampler, log in logs.items():
        for r in log.split_rows("train"):
            merged.rows.append(
                optimizer.MetricsRow(
                    r.epoch, sampler, r.loss, r.error_rate, r.grad_var, r.wall_ms
                )
            )
    optimizer.save_metrics(args.out, merged)
    outputs = [args.out]

    if args.svg:
        series = []
        for sampler, log in logs.items():
            rows = log.split_rows("train")
            series.append(
                (sampler, [r.epoch for r in rows],
                 [getattr(r, args.metric) for r in rows])
            )
        svg = plotting.svg_line_chart(
            series,
            title=f"{spec.kind}: uniform vs importance (lr={args.lr:g})",
            xlabel="epoch",
            ylabel=args.metric,
        )
        with open(args.svg, "w") as fh:
            fh.write(svg)
        outputs.append(args.svg)
        _write_run_record(args.svg, args, started, [args.data, args.importance],
                          outputs)
    _write_run_record(args.out, args, started, [args.data, args.importance],
                      outputs)
    for sampler, log in logs.items():
        last = log.split_rows("train")[-1]
        print(f"{sampler:>10}: epoch {last.epoch} loss {last.loss:.6f} "
              f"error {last.error_rate:.4f}")
    return 0


def cmd_variance(args):
    started = time.perf_counter()
    dataset = data.load_dataset(args.data)
    spec = _spec(args, dataset)
    model = get_model(spec)
    params = model.init_params(args.seed)
    inputs = [args.data]
    if args.warm_epochs:
        cfg = optimizer.TrainConfig(
            spec=spec, lr=args.lr, epochs=args.warm_epochs, seed=args.seed
        )
        params, _ = optimizer.train(dataset, params, cfg)

    rng = np.random.default_rng(
        np.random.SeedSequence([int(args.seed), STREAM_EVAL])
    )
    grads = np.stack(
        [
            params_to_vector(
                model.backward(params, s, model.forward(params, s, rng=rng))
            )
            for s in dataset
        ]
    )
    mined_norms = mined_probs = None
    if args.importance:
        table = _load_table_for(args, dataset)
        mined_norms, mined_probs = table.norms, table.probs
        inputs.append(args.importance)
    report = analysis.variance_report(
        grads, mined_norms=mined_norms, mined_probs=mined_probs
    )
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    _write_run_record(args.out, args, started, inputs, [args.out])
    print(json.dumps(report, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gradmine",
        description="Importance-sampled SGD for recurrent sequence models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--task", choices=["seqclass", "pianoroll"], default="seqclass")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--vocab", type=int, default=50)
    p.add_argument("--nv", type=int, default=16, help="frame width (pianoroll)")
    p.add_argument("--len-min", type=int, default=6)
    p.add_argument("--len-max", type=int, default=40)
    p.add_argument("--hard", type=float, default=0.25)
    p.add_argument("--patterns", type=int, default=4)
    p.add_argument("--frames-per-sample", type=int, default=0,
                   help="regroup pianoroll frames into chunks of this size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("mine", help="mine per-sample importance")
    p.add_argument("--data", required=True)
    _add_model_args(p, default_model="rnn")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--target-loss", type=float, default=None,
                   help="derive epsilon as 0.01 * target loss")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--t-max", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base-selector", default=None)
    p.add_argument("--norm-kind", choices=["frobenius", "spectral"],
                   default="frobenius")
    p.add_argument("--workers", type=int, default=None,
                   help="default: GRADMINE_WORKERS or all cores")
    p.add_argument("--embed-diagnostic", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--data", required=True)
    _add_model_args(p)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--sampler", choices=["uniform", "importance"],
                   default="uniform")
    p.add_argument("--importance", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--clip", type=float, default=None)
    p.add_argument("--eval-data", default=None)
    p.add_argument("--rbm-preset", choices=sorted(RBM_PRESETS), default=None,
                   help="frame grouping + step size preset (rnnrbm)")
    p.add_argument("--metric", choices=["loss", "error_rate"], default="loss")
    p.add_argument("--svg", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="uniform vs importance, same budget")
    p.add_argument("--data", required=True)
    _add_model_args(p)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--importance", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-every", type=int, default=1)
    p.add_argument("--clip", type=float, default=None)
    p.add_argument("--metric", choices=["loss", "error_rate"], default="loss")
    p.add_argument("--svg", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("variance", help="estimator variance report")
    p.add_argument("--data", required=True)
    _add_model_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--warm-epochs", type=int, default=0,
                   help="uniform-train this many epochs before measuring")
    p.add_argument("--importance", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_variance)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (GradmineError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
