"""Command-line entry points.

    leiad detect     score one series with one detector, emit timestamp,score CSV
    leiad labelmodel fit weights from a votes CSV / emit posteriors
    leiad query      print the highest-scoring annotation candidates
    leiad simulate   run the loop against the simulated oracle, emit the curve
    leiad serve      start the annotation HTTP service
    leiad synth      write the synthetic benchmark dataset to CSV
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import pipeline
from .config import dataset_params, load_config, make_config
from .data import load_dataset, split_train_test
from .detectors import DetectorConfig, fit_score
from .labelmodel import VoteMatrix, fit_generative, posterior
from .synthetic import synthetic_benchmark


def _load_cfg(args):
    return load_config(args.config) if args.config else make_config()


def _load_ds(args, cfg):
    return load_dataset(args.dataset, **dataset_params(cfg))


def _cmd_detect(args):
    cfg = _load_cfg(args)
    dataset = _load_ds(args, cfg)
    series = dataset.series_by_id(args.series) if args.series else dataset.series[0]
    det = DetectorConfig(args.detector, dict(cfg["detectors"].get(args.detector, {})))
    scores = fit_score(det, series, args.seed)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(out)
    writer.writerow(["timestamp", "score"])
    for ts, sc in zip(series.timestamps, scores.scores):
        writer.writerow([int(ts), repr(float(sc))])
    if args.out:
        out.close()
        print(f"wrote {len(series)} scores to {args.out}")


def _read_votes_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["series_id", "timestamp"]:
            raise SystemExit("votes CSV must start with series_id,timestamp columns")
        lf_ids = header[2:]
        keys, rows = [], []
        for row in reader:
            keys.append((row[0], int(row[1])))
            rows.append([int(v) for v in row[2:]])
    return keys, lf_ids, np.asarray(rows, dtype=np.int8)


def _cmd_labelmodel(args):
    cfg = _load_cfg(args)
    lm = cfg["label_model"]
    keys, lf_ids, votes = _read_votes_csv(args.votes)
    matrix = VoteMatrix(votes, lf_ids)
    prior = cfg["dataset"]["anomaly_percentage"] / 100.0
    if args.action == "fit":
        params = fit_generative(
            matrix, learning_rate=lm["learning_rate"], epochs=lm["training_epoch"],
            seed=args.seed, class_prior=prior,
            gibbs_samples_per_step=lm["gibbs_samples_per_step"],
            batch_size=lm["batch_size"])
        doc = {"lf_ids": params.lf_ids, "weights": params.weights.tolist(),
               "class_prior": params.class_prior, "trained_epochs": params.trained_epochs}
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
        print(f"wrote weights for {len(lf_ids)} labeling functions to {args.out}")
    else:
        with open(args.weights) as fh:
            doc = json.load(fh)
        from .labelmodel import LabelModelParams
        params = LabelModelParams(np.asarray(doc["weights"]), doc["class_prior"],
                                  doc["trained_epochs"], doc["lf_ids"])
        if params.lf_ids != lf_ids:
            raise SystemExit("weights file and votes CSV disagree on labeling functions")
        probs = posterior(params, matrix)
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        writer = csv.writer(out)
        writer.writerow(["series_id", "timestamp", "probability"])
        for (sid, ts), p in zip(keys, probs):
            writer.writerow([sid, ts, repr(float(p))])
        if args.out:
            out.close()


def _cmd_query(args):
    cfg = _load_cfg(args)
    dataset = _load_ds(args, cfg)
    if dataset.has_truth() and len(dataset.series) >= 2:
        train, test = split_train_test(dataset, cfg["pipeline"]["test_fraction"], args.seed)
    else:
        train, test = dataset, None
    state = pipeline.warm_up(train, cfg, args.seed, test)
    comps = pipeline.query_components(state)
    weights = pipeline._query_weights(cfg)
    q = comps.total(weights)
    order = np.argsort(-q, kind="stable")[: args.top]
    print(f"{'rank':>4} {'series':>12} {'timestamp':>12} {'Q':>8} "
          f"{'A':>7} {'H':>7} {'U':>7} {'D':>7} {'P':>7}")
    for rank, g in enumerate(order, start=1):
        series, local = train.locate(int(g))
        print(f"{rank:>4} {series.id:>12} {int(series.timestamps[local]):>12} "
              f"{q[g]:>8.4f} {comps.agreement[g]:>7.4f} {comps.abstention[g]:>7.4f} "
              f"{comps.uncertainty[g]:>7.4f} {comps.diversity[g]:>7.4f} "
              f"{comps.anomaly_prob[g]:>7.4f}")


def _cmd_simulate(args):
    cfg = _load_cfg(args)
    dataset = _load_ds(args, cfg)
    state = pipeline.simulate(dataset, args.iterations, args.seed, args.strategy, cfg)
    pipeline.write_metrics_csv(state, args.out)
    print(f"wrote metrics curve ({len(state.metrics_history)} rows) to {args.out}")
    if args.labels_out:
        pipeline.write_labeled_set_csv(state, args.labels_out)
        print(f"wrote labeled set to {args.labels_out}")
    if args.registry_out:
        pipeline.write_lf_registry(state, args.registry_out)
        print(f"wrote LF registry to {args.registry_out}")


def _cmd_serve(args):
    import uvicorn

    from .service import create_app
    cfg = load_config(args.config) if args.config else None
    app = create_app(default_dataset=args.dataset, default_config=cfg)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def _cmd_synth(args):
    from .data import export_dataset
    dataset = synthetic_benchmark(seed=args.seed, n_series=args.series,
                                  n_points=args.points)
    export_dataset(dataset, args.out)
    print(f"wrote {len(dataset.series)} series / {dataset.point_count} points to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leiad",
                                     description="label-efficient interactive anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score one series with one detector")
    p.add_argument("--dataset", required=True)
    p.add_argument("--detector", required=True,
                   choices=["iforest", "spectral_residual", "stl", "rcforest", "zscore"])
    p.add_argument("--series", default=None, help="series id (default: first)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("labelmodel", help="fit the label model or emit posteriors")
    p.add_argument("action", choices=["fit", "posterior"])
    p.add_argument("--votes", required=True, help="CSV: series_id,timestamp,<lf columns>")
    p.add_argument("--weights", default=None, help="weights JSON (posterior mode)")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_labelmodel)

    p = sub.add_parser("query", help="print the top annotation candidates after warm-up")
    p.add_argument("--dataset", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("simulate", help="run the loop with the simulated oracle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--iterations", type=int, required=True)
    p.add_argument("--strategy", default="hybrid", choices=list(pipeline.STRATEGIES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="metrics curve CSV path")
    p.add_argument("--labels-out", default=None, help="labeled set CSV path")
    p.add_argument("--registry-out", default=None, help="LF registry JSONL path")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("serve", help="start the annotation HTTP service")
    p.add_argument("--dataset", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("synth", help="write the synthetic benchmark to CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--series", type=int, default=20)
    p.add_argument("--points", type=int, default=5000)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
