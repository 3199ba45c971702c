"""Command-line front end: synth, cluster, priors, train, eval, report.

Every command reads/writes plain files (JSON configs and reports, text
labels, binary features/checkpoints) so a full experiment is a short shell
script. Config files carry a version field and unknown keys are rejected,
which catches misspelled hyperparameters early. All commands exit non-zero
with a one-line diagnostic on malformed input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import data, grouping, inference, losses, metrics, model, priors, training
from .errors import ConfigError, FormatError, GtlaError


def _check_keys(payload: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(payload) - allowed
    if unknown:
        raise ConfigError(f"{ctx}: unknown key(s) {sorted(unknown)}")


def _load_json(path: str | Path, ctx: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{ctx}: file not found: {path}")
    except json.JSONDecodeError as exc:
        raise FormatError(f"{ctx}: invalid JSON in {path}: {exc}")
    if not isinstance(payload, dict):
        raise FormatError(f"{ctx}: expected a JSON object in {path}")
    if payload.get("version") != 1:
        raise ConfigError(f"{ctx}: unsupported or missing config version")
    return payload


def _parse_groups_mode(text: str) -> grouping.ByActivity | grouping.ByClustering:
    if text == "activity":
        return grouping.ByActivity()
    if text.startswith("cluster:"):
        try:
            return grouping.ByClustering(n=int(text.split(":", 1)[1]))
        except ValueError:
            raise ConfigError(f"bad group count in --groups {text!r}")
    raise ConfigError(f"--groups must be 'activity' or 'cluster:N', got {text!r}")


def _synth_config_from_json(payload: dict, seed: int | None) -> data.SynthConfig:
    _check_keys(payload, {"version", "seed", "feature_dim", "mean_scale",
                          "noise_sigma", "similar_classes", "similar_spread",
                          "train_per_activity", "test_per_activity",
                          "durations", "activities"}, "synth config")
    activities = {}
    for name, spec in payload["activities"].items():
        _check_keys(spec, {"mandatory", "optionals"}, f"activity {name!r}")
        optionals = tuple(
            data.OptionalAction(o["name"], float(o["prob"]), tuple(o["gaps"]))
            for o in spec.get("optionals", ()))
        activities[name] = data.ActivityGrammar(tuple(spec["mandatory"]), optionals)
    durations = {}
    for name, spec in payload["durations"].items():
        _check_keys(spec, {"median", "sigma"}, f"duration {name!r}")
        durations[name] = data.DurationModel(float(spec["median"]),
                                             float(spec.get("sigma", 0.0)))
    return data.SynthConfig(
        activities=activities,
        durations=durations,
        feature_dim=int(payload.get("feature_dim", 8)),
        mean_scale=float(payload.get("mean_scale", 1.0)),
        noise_sigma=float(payload.get("noise_sigma", 1.0)),
        similar_classes=tuple(tuple(f) for f in payload.get("similar_classes", ())),
        similar_spread=float(payload.get("similar_spread", 0.3)),
        train_per_activity=int(payload.get("train_per_activity", 20)),
        test_per_activity=int(payload.get("test_per_activity", 10)),
        seed=int(payload.get("seed", 0)) if seed is None else seed,
    )


def cmd_synth(args) -> int:
    if args.preset:
        if args.preset != "longtail":
            raise ConfigError(f"unknown preset {args.preset!r}")
        cfg = data.longtail_benchmark_config(seed=args.seed or 0)
    elif args.config:
        cfg = _synth_config_from_json(_load_json(args.config, "synth config"), args.seed)
    else:
        raise ConfigError("synth needs --config or --preset")
    train, test = data.synth_generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train_manifest = data.write_corpus(train, out / "train")
    test_manifest = data.write_corpus(test, out / "test")
    print(f"wrote {len(train)} train sequences -> {train_manifest}")
    print(f"wrote {len(test)} test sequences -> {test_manifest}")
    return 0


def cmd_cluster(args) -> int:
    corpus = data.load_corpus(args.data)
    spec = grouping.build_group_spec(corpus, _parse_groups_mode(args.groups))
    grouping.save_group_spec(args.out, spec, corpus.vocab)
    sizes = [sum(1 for s in corpus.sequences if spec.group_of(s) == k)
             for k in range(spec.n)]
    print(f"built {spec.n} group(s) with sizes {sizes} -> {args.out}")
    return 0


def cmd_priors(args) -> int:
    corpus = data.load_corpus(args.data)
    spec = grouping.load_group_spec(args.spec, corpus.vocab)
    prior = priors.extract_priors(corpus, spec)
    priors.save_temporal_prior(args.out, prior, spec, corpus.vocab)
    print(f"extracted priors for {spec.n} group(s) -> {args.out}")
    return 0


_TRAIN_KEYS = {"method", "tau", "eta", "lambda", "delta", "temporal_factor",
               "epochs", "lr"}


def _train_config_from_json(payload: dict, args) -> losses.TrainConfig:
    _check_keys(payload, _TRAIN_KEYS, "train section")
    cfg = dict(
        method=payload.get("method", "gtla"),
        tau=float(payload.get("tau", 0.5)),
        eta=float(payload.get("eta", 0.5)),
        smooth_weight=float(payload.get("lambda", 0.15)),
        smooth_clip=float(payload.get("delta", 4.0)),
        temporal_factor=bool(payload.get("temporal_factor", True)),
        epochs=int(payload.get("epochs", 50)),
        lr=float(payload.get("lr", 5e-4)),
    )
    if args.method:
        cfg["method"] = args.method
    if args.tau is not None:
        cfg["tau"] = args.tau
    if args.eta is not None:
        cfg["eta"] = args.eta
    if args.smooth_weight is not None:
        cfg["smooth_weight"] = args.smooth_weight
    if args.no_temporal_factor:
        cfg["temporal_factor"] = False
    if args.epochs is not None:
        cfg["epochs"] = args.epochs
    return losses.TrainConfig(seed=args.seed if args.seed is not None else 0, **cfg)


def cmd_train(args) -> int:
    payload = _load_json(args.config, "run config")
    _check_keys(payload, {"version", "seed", "data", "groups", "backbone",
                          "train", "out"}, "run config")
    root = Path(args.config).parent
    data_section = payload.get("data", {})
    _check_keys(data_section, {"train_manifest"}, "data section")
    if "train_manifest" not in data_section:
        raise ConfigError("run config: data.train_manifest is required")
    corpus = data.load_corpus(root / data_section["train_manifest"])

    if args.seed is None and "seed" not in payload:
        raise ConfigError("run config: a seed is required (field or --seed)")
    seed = args.seed if args.seed is not None else int(payload["seed"])
    args.seed = seed
    train_cfg = _train_config_from_json(payload.get("train", {}), args)

    out = Path(args.out or payload.get("out") or "run")
    out.mkdir(parents=True, exist_ok=True)

    groups_section = payload.get("groups", {"mode": "activity"})
    _check_keys(groups_section, {"mode", "n", "linkage", "spec", "priors"},
                "groups section")
    if args.groups:
        override = _parse_groups_mode(args.groups)
        if isinstance(override, grouping.ByClustering):
            groups_section = {"mode": "cluster", "n": override.n}
        else:
            groups_section = {"mode": "activity"}
    if "spec" in groups_section:
        spec = grouping.load_group_spec(root / groups_section["spec"], corpus.vocab)
    else:
        mode_text = groups_section.get("mode", "activity")
        if mode_text == "cluster":
            mode = grouping.ByClustering(n=int(groups_section["n"]),
                                         linkage=groups_section.get("linkage", "average"))
        else:
            mode = _parse_groups_mode(mode_text)
        spec = grouping.build_group_spec(corpus, mode)
        grouping.save_group_spec(out / "group_spec.json", spec, corpus.vocab)
    if "priors" in groups_section:
        prior = priors.load_temporal_prior(root / groups_section["priors"],
                                           spec, corpus.vocab)
    else:
        prior = priors.extract_priors(corpus, spec)
        priors.save_temporal_prior(out / "priors.json", prior, spec, corpus.vocab)

    backbone_section = payload.get("backbone", {})
    _check_keys(backbone_section, {"hidden", "layers", "dropout"}, "backbone section")
    backbone = model.BackboneConfig(
        in_dim=corpus.feature_dim,
        hidden=int(backbone_section.get("hidden", 32)),
        num_layers=int(backbone_section.get("layers", 6)),
        dropout=float(backbone_section.get("dropout", 0.25)),
        head_sizes=spec.head_sizes(),
        seed=seed,
    )

    if args.resume:
        params, adam, extra = model.load_checkpoint(args.resume)
        state = training.TrainState.restore(params, adam, extra.get("train_state", {}))
    else:
        state = training.init_train_state(train_cfg, backbone)
    state = training.train_model(corpus, spec, prior, backbone, train_cfg, state)

    ckpt = out / "checkpoint.ckpt"
    model.save_checkpoint(ckpt, state.params, step=state.adam.t, adam=state.adam,
                          extra={"train_config": train_cfg.to_dict(),
                                 "train_state": state.rng_payload()})
    log_path = out / "train_log.json"
    log_path.write_text(json.dumps({"version": 1, "loss": state.history,
                                    "train_config": train_cfg.to_dict()},
                                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"trained {train_cfg.epochs} epoch(s), final loss "
          f"{state.history[-1]:.4f} -> {ckpt}")
    return 0


def cmd_eval(args) -> int:
    dataset = data.load_corpus(args.data)
    train_corpus = data.load_corpus(args.train_data)
    spec = grouping.load_group_spec(args.spec, dataset.vocab)
    prior = priors.load_temporal_prior(args.priors, spec, dataset.vocab)
    params, _, _ = model.load_checkpoint(args.checkpoint)

    predictions = inference.predict_corpus(params, dataset, spec,
                                           threads=args.threads)
    gt_groups = []
    for seq in dataset.sequences:
        if spec.mode == "activity":
            gt_groups.append(spec.group_of(seq))
        else:
            gt_groups.append(spec.nearest_group(seq, dataset.vocab))

    split = metrics.head_tail_split(train_corpus, args.head_threshold)
    excluded = tuple(dataset.vocab.id_of(name) for name in args.exclude or ())
    report = metrics.compute_report(predictions, dataset, spec, prior, split,
                                    gt_groups, exclude_classes=excluded)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inference.write_predictions(predictions, dataset.vocab, out / "predictions")
    report.save(out / "report.json")
    print(f"MoF {report.global_metrics['mof']:.1f}  "
          f"edit {report.global_metrics['edit']:.1f}  "
          f"balanced recall hmean {report.balanced['recall']['hmean']:.1f}  "
          f"-> {out / 'report.json'}")
    return 0


_REPORT_COLUMNS = [
    ("global mof", ("global", "mof")),
    ("global edit", ("global", "edit")),
    ("global f1@25", ("global", "f1@0.25")),
    ("recall head", ("balanced", "recall", "head")),
    ("recall tail", ("balanced", "recall", "tail")),
    ("recall hmean", ("balanced", "recall", "hmean")),
    ("f1@25 hmean", ("balanced", "f1@0.25", "hmean")),
]


def _dig(payload: dict, path: tuple) -> float:
    value = payload
    for key in path:
        value = value[key]
    return float(value)


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        payload = _load_json(path, "metrics report")
        reports.append((Path(path).stem, payload))
    if not reports:
        raise ConfigError("no reports given")

    rows = []
    base_name, base = reports[0]
    for name, payload in reports:
        row = {"name": name}
        for label, path in _REPORT_COLUMNS:
            value = _dig(payload, path)
            row[label] = value
            row[f"delta {label}"] = value - _dig(base, path)
        for key in ("fp1", "fp2", "fp3", "tp"):
            row[f"fp_taxonomy {key}"] = payload["fp_taxonomy"][key]
        rows.append(row)

    width = max(len(name) for name, _ in reports)
    header = "model".ljust(width) + "".join(f"{label:>16}" for label, _ in _REPORT_COLUMNS)
    lines = [header]
    for idx, row in enumerate(rows):
        cells = []
        for label, _ in _REPORT_COLUMNS:
            delta = row[f"delta {label}"]
            suffix = "" if idx == 0 else f" ({delta:+.1f})"
            cells.append(f"{row[label]:.1f}{suffix}".rjust(16))
        lines.append(row["name"].ljust(width) + "".join(cells))
    table = "\n".join(lines)
    print(table)
    if args.out:
        Path(args.out).with_suffix(".txt").write_text(table + "\n", encoding="utf-8")
        Path(args.out).with_suffix(".json").write_text(
            json.dumps({"version": 1, "baseline": base_name, "rows": rows},
                       indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtla",
        description="Long-tail temporal action segmentation with group-wise "
                    "temporal logit adjustment.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", help="synth config JSON")
    p.add_argument("--preset", help="built-in config (longtail)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cluster", help="build a group spec from a corpus")
    p.add_argument("--data", required=True, help="corpus manifest")
    p.add_argument("--groups", default="activity", help="activity or cluster:N")
    p.add_argument("--out", required=True, help="group spec JSON to write")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("priors", help="extract class and ordering priors")
    p.add_argument("--data", required=True, help="corpus manifest")
    p.add_argument("--spec", required=True, help="group spec JSON")
    p.add_argument("--out", required=True, help="priors JSON to write")
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("train", help="train a model from a run config")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--method", choices=losses.METHODS)
    p.add_argument("--tau", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--lambda", dest="smooth_weight", type=float)
    p.add_argument("--no-temporal-factor", action="store_true")
    p.add_argument("--groups", help="override grouping: activity or cluster:N")
    p.add_argument("--epochs", type=int)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="evaluation corpus manifest")
    p.add_argument("--train-data", required=True,
                   help="training corpus manifest (head/tail split source)")
    p.add_argument("--spec", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--head-threshold", type=float, required=True,
                   help="training frame count separating head from tail")
    p.add_argument("--exclude", nargs="*", help="class names to exclude "
                   "from per-class averages")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="compare metric reports")
    p.add_argument("reports", nargs="+", help="report JSONs; first is the baseline")
    p.add_argument("--out", help="prefix for comparison .txt/.json files")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GtlaError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
