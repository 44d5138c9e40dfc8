"""Command-line interface: train, score, eval, features, inspect.

Exit codes: 0 success, 1 usage errors, 2 data errors (malformed or
inconsistent inputs), 3 numeric failures (non-finite values during
training or scoring).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import corpus
from .correlations import (classify_judgments, pearson_r, ranks_from_scores,
                           spearman_rho, tau_from_counts)
from .encoders import BowEncoder, EmbeddingTable, FineTune, make_encoder, rebuild_encoder
from .errors import DataError, NumericError
from .features import BUILTIN_FEATURES, load_feature_table
from .network import OptimizerConfig, prediction_batch, train
from .scoring import empty_spec_for, score_batch, system_score

log = logging.getLogger(__name__)

TAU_FLAG_TO_POLICY = {"wmt12": "wmt12_strict",
                      "ignored": "ties_ignored",
                      "wmt14": "wmt14"}

DEV_SPLIT_FRACTION = 0.2


class UsageError(Exception):
    """Bad flag combinations discovered after argparse."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; this project reserves 2 for data
    errors, so usage failures are remapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="mtjudge",
                     description="Train and apply a pairwise neural judge "
                                 "for machine translation evaluation.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p_train = sub.add_parser("train", help="fit a judge on ranking judgments")
    p_train.add_argument("--rankings", required=True,
                         help="training rankings CSV (langpair,segid,sysid,rank)")
    p_train.add_argument("--segments", required=True,
                         help="segments TSV with references (sysid REF) and system outputs")
    p_train.add_argument("--dev-rankings",
                         help="held-out rankings CSV for early stopping; "
                              "default splits 20%% off --rankings")
    p_train.add_argument("--embeddings", help="word embedding text file")
    p_train.add_argument("--synvecs", help="per-sentence vector TSV (ids segid/sysid)")
    p_train.add_argument("--features", help="external feature TSV merged into skip features")
    p_train.add_argument("--encoder", default="bow",
                         choices=["none", "bow", "cnn", "lstm", "bilstm"],
                         help="sentence encoder for the semantic vector part")
    p_train.add_argument("--finetune", default="frozen",
                         choices=["frozen", "moderate", "full"],
                         help="embedding fine-tuning regime")
    p_train.add_argument("--dropout", type=float, default=0.0,
                         help="dropout rate on embedding/encoder outputs")
    p_train.add_argument("--seed", type=int, default=13)
    p_train.add_argument("--epochs", type=int, default=10000,
                         help="maximum training epochs")
    p_train.add_argument("--lr", type=float, default=0.01, help="adagrad learning rate")
    p_train.add_argument("--batch", type=int, default=30, help="mini-batch size")
    p_train.add_argument("--l2", type=float, default=1e-4, help="weight decay")
    p_train.add_argument("--hidden", type=int, default=4,
                         help="units per hidden block; 0 = skip features only")
    p_train.add_argument("--tau", default="wmt12", choices=sorted(TAU_FLAG_TO_POLICY),
                         help="tie policy for the dev tau")
    p_train.add_argument("--enc-filters", type=int, default=50,
                         help="cnn: number of filters")
    p_train.add_argument("--enc-window", type=int, default=3, help="cnn: filter width")
    p_train.add_argument("--enc-pool", type=int, default=2, help="cnn: pooling width")
    p_train.add_argument("--enc-hidden", type=int, default=50,
                         help="lstm/bilstm: hidden units per direction")
    p_train.add_argument("--out", required=True, help="model artifact path; the "
                         "epoch log (.log.tsv) and curves (.training.png) land next to it")
    p_train.set_defaults(func=cmd_train)

    p_score = sub.add_parser("score", help="score segments with a trained judge")
    p_score.add_argument("--model", required=True, help="model artifact from train")
    p_score.add_argument("--segments", required=True)
    p_score.add_argument("--synvecs")
    p_score.add_argument("--features")
    p_score.add_argument("--rankings",
                         help="judgments to score in pairwise mode")
    p_score.add_argument("--mode", default="absolute",
                         choices=["absolute", "pairwise"],
                         help="absolute per-segment scores or per-judgment probabilities")
    p_score.add_argument("--empty", default="zero", choices=["zero", "mean"],
                         help="empty-slot content for absolute scores")
    p_score.add_argument("--out", required=True)
    p_score.set_defaults(func=cmd_score)

    p_eval = sub.add_parser("eval", help="correlate scores with human judgments")
    p_eval.add_argument("--scores", required=True, help="segment scores TSV from score")
    p_eval.add_argument("--rankings", required=True, help="gold rankings CSV")
    p_eval.add_argument("--tau", default="wmt12", choices=sorted(TAU_FLAG_TO_POLICY))
    p_eval.add_argument("--systems",
                        help="gold system scores TSV (langpair, sysid, score) "
                             "for system-level correlations")
    p_eval.add_argument("--agg", default="mean", choices=["mean", "sign"],
                        help="segment-to-system aggregation")
    p_eval.add_argument("--out", required=True, help="report path; a bar figure "
                        "(.png) lands next to it")
    p_eval.set_defaults(func=cmd_eval)

    p_feat = sub.add_parser(
        "features", help="compute built-in skip features for all segments",
        epilog="ter_lite is a plain word edit distance (insertions, deletions, "
               "substitutions) over reference length: it has NO block-shift "
               "moves, so values are only loosely comparable to full TER.")
    p_feat.add_argument("--segments", required=True)
    p_feat.add_argument("--out", required=True, help="feature TSV path")
    p_feat.set_defaults(func=cmd_features)

    p_inspect = sub.add_parser("inspect", help="summarize a model artifact")
    p_inspect.add_argument("--model", required=True)
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def _load_tables(path):
    return [load_feature_table(path)] if path else []


def _load_synvecs(path):
    return corpus.load_sentence_vectors(path) if path else None


def cmd_train(args):
    if args.encoder != "none" and not args.embeddings:
        raise UsageError(f"--encoder {args.encoder} requires --embeddings")
    if args.encoder == "none" and args.finetune != "frozen":
        raise UsageError("--finetune needs an encoder")
    if args.encoder == "none" and not args.synvecs and args.hidden > 0:
        raise UsageError("no sentence vectors at all (no encoder, no --synvecs); "
                         "train a skip-features-only model with --hidden 0")
    if not 0.0 <= args.dropout < 1.0:
        raise UsageError("--dropout must lie in [0, 1)")

    records = corpus.load_rankings_csv(args.rankings)
    judgments, ties_dropped = corpus.expand_rankings(records)
    bundles = corpus.load_segments_tsv(args.segments)
    synvecs = _load_synvecs(args.synvecs)
    tables = _load_tables(args.features)
    names = corpus.feature_names(tables)

    finetune = FineTune(mode=args.finetune)
    static_encoder = None
    dynamic_encoder = None
    if args.encoder != "none":
        table = EmbeddingTable.load(args.embeddings)
        if args.encoder == "bow" and not finetune.trainable:
            static_encoder = BowEncoder(table)
        else:
            dynamic_encoder = make_encoder(
                args.encoder, table, hidden=args.enc_hidden,
                n_filters=args.enc_filters, window=args.enc_window,
                pool=args.enc_pool, finetune=finetune)

    if args.dev_rankings:
        dev_records = corpus.load_rankings_csv(args.dev_rankings)
        dev_judgments, _ = corpus.expand_rankings(dev_records)
        train_judgments = judgments
    else:
        train_judgments, dev_judgments = corpus.split_judgments(
            judgments, DEV_SPLIT_FRACTION, args.seed)

    attach = dynamic_encoder is not None
    train_instances, _, dropped_train = corpus.assemble_instances(
        train_judgments, bundles, synvecs=synvecs, tables=tables,
        static_encoder=static_encoder, attach_tokens=attach)
    dev_instances, _, dropped_dev = corpus.assemble_instances(
        dev_judgments, bundles, synvecs=synvecs, tables=tables,
        static_encoder=static_encoder, attach_tokens=attach)
    if not train_instances:
        raise DataError("no usable training instances after assembly")
    if not dev_instances:
        raise DataError("no usable dev instances after assembly")

    cfg = OptimizerConfig(lr=args.lr, l2=args.l2, batch_size=args.batch,
                          max_epochs=args.epochs, seed=args.seed)
    history = []

    def hook(epoch, mean_loss, dev_tau):
        history.append((epoch, mean_loss, dev_tau))

    artifact = train(
        train_instances, dev_instances, cfg, hidden=args.hidden,
        tau_policy=TAU_FLAG_TO_POLICY[args.tau], encoder=dynamic_encoder,
        dropout_rate=args.dropout, epoch_hook=hook,
        extra_config={
            "features": names,
            "use_synvecs": synvecs is not None,
            "static_encoder": static_encoder.config() if static_encoder else None,
            "judgments": {"train": len(train_judgments),
                          "dev": len(dev_judgments),
                          "ties_dropped": ties_dropped,
                          "dropped_train": dropped_train,
                          "dropped_dev": dropped_dev},
        })
    if static_encoder is not None:
        artifact.values["emb"] = static_encoder.table.matrix.copy()
        artifact.vocab = list(static_encoder.table.tokens)

    corpus.save_model(artifact, args.out)
    log_path = f"{args.out}.log.tsv"
    with open(log_path, "w", encoding="utf-8") as handle:
        handle.write("epoch\tloss\tdev_tau\n")
        for epoch, mean_loss, dev_tau in history:
            handle.write(f"{epoch}\t{mean_loss:.9f}\t{dev_tau:.9f}\n")
    figure_path = f"{args.out}.training.png"
    from .plots import render_training_curves
    render_training_curves(history, figure_path)

    print(f"trained on {len(train_instances)} judgments "
          f"({ties_dropped} tied pairs dropped)")
    print(f"selected epoch {artifact.config['selected_epoch']} "
          f"with dev tau {artifact.config['best_dev_tau']:.4f}")
    print(f"model: {args.out}")
    print(f"log: {log_path}")
    print(f"figure: {figure_path}")
    return 0


def _rebuild_encoders(artifact):
    static_cfg = artifact.config.get("static_encoder")
    dynamic_cfg = artifact.config.get("encoder")
    static_encoder = (rebuild_encoder(static_cfg, artifact.vocab, artifact.values)
                      if static_cfg else None)
    dynamic_encoder = (rebuild_encoder(dynamic_cfg, artifact.vocab, artifact.values)
                       if dynamic_cfg else None)
    return static_encoder, dynamic_encoder


def _check_scoring_inputs(artifact, args, tables):
    if artifact.config.get("use_synvecs") and not args.synvecs:
        raise DataError("model was trained with sentence vectors; pass --synvecs")
    if not artifact.config.get("use_synvecs") and args.synvecs:
        raise DataError("model was trained without sentence vectors")
    expected = artifact.config.get("features", list(BUILTIN_FEATURES))
    actual = corpus.feature_names(tables)
    if actual != expected:
        raise DataError(f"feature columns {actual} do not match the model's "
                        f"training features {expected}")


def _dynamic_parts(encoder, token_lists):
    return np.vstack([encoder.encode(tokens)[0] for tokens in token_lists])


def cmd_score(args):
    artifact = corpus.load_model(args.model)
    bundles = corpus.load_segments_tsv(args.segments)
    tables = _load_tables(args.features)
    _check_scoring_inputs(artifact, args, tables)
    synvecs = _load_synvecs(args.synvecs)
    static_encoder, dynamic_encoder = _rebuild_encoders(artifact)

    if args.mode == "pairwise":
        if not args.rankings:
            raise UsageError("--mode pairwise requires --rankings")
        judgments, _ = corpus.expand_rankings(corpus.load_rankings_csv(args.rankings))
        instances, kept_judgments, dropped = corpus.assemble_instances(
            judgments, bundles, synvecs=synvecs, tables=tables,
            static_encoder=static_encoder,
            attach_tokens=dynamic_encoder is not None)
        if not instances:
            raise DataError("no scorable judgments")
        probs = prediction_batch(artifact.values, instances, artifact.minmax,
                                 dynamic_encoder)
        with open(args.out, "w", encoding="utf-8") as handle:
            for judgment, prob in zip(kept_judgments, probs):
                handle.write(f"{judgment.segment}\t{judgment.winner}\t"
                             f"{judgment.loser}\t{prob:.9f}\n")
        print(f"wrote {len(instances)} judgment probabilities to {args.out} "
              f"({dropped} dropped)")
        return 0

    items, dropped = corpus.assemble_scoring_items(
        bundles, synvecs=synvecs, tables=tables, static_encoder=static_encoder)
    if not items:
        raise DataError("no scorable segment/system pairs")
    fixed_dim = int(artifact.config.get("fixed_dim", artifact.x_dim))
    if items[0].trans.size != fixed_dim:
        raise DataError(f"input vector width {items[0].trans.size} does not "
                        f"match the model's {fixed_dim}")
    if items[0].skip.size != artifact.skip_dim:
        raise DataError("skip feature width does not match the model")
    trans = artifact.minmax.scale_trans(np.vstack([i.trans for i in items]))
    refs = artifact.minmax.scale_ref(np.vstack([i.ref for i in items]))
    skips = artifact.minmax.scale_skip(np.vstack([i.skip for i in items]))
    if dynamic_encoder is not None:
        trans = np.hstack([trans, _dynamic_parts(dynamic_encoder,
                                                 [i.hyp_tokens for i in items])])
        refs = np.hstack([refs, _dynamic_parts(dynamic_encoder,
                                               [i.ref_tokens for i in items])])
    empty = empty_spec_for(artifact, args.empty)
    scores = score_batch(artifact.values, trans, skips, refs, empty)
    corpus.write_segment_scores(
        args.out, ((item.segid, item.sysid, score)
                   for item, score in zip(items, scores)))
    print(f"wrote {len(items)} segment scores to {args.out} ({dropped} dropped)")
    return 0


def _report_lines(policy, per_language, macro, system_rows, agg):
    lines = ["mtjudge evaluation report", f"tau policy: {policy}", "",
             "segment level",
             f"{'language':<12}{'tau':>10}{'concord':>10}{'discord':>10}"
             f"{'ties':>10}{'judgments':>11}"]
    for lang, (tau, con, dis, tie, total) in per_language.items():
        lines.append(f"{lang:<12}{tau:>10.4f}{con:>10}{dis:>10}{tie:>10}{total:>11}")
    lines.append(f"{'macro-avg':<12}{macro:>10.4f}")
    if system_rows:
        lines.append("")
        lines.append(f"system level (aggregation: {agg})")
        lines.append(f"{'language':<12}{'spearman':>10}{'pearson':>10}{'systems':>10}")
        rho_values = []
        r_values = []
        for lang, (rho, r, count) in system_rows.items():
            lines.append(f"{lang:<12}{rho:>10.4f}{r:>10.4f}{count:>10}")
            rho_values.append(rho)
            r_values.append(r)
        lines.append(f"{'macro-avg':<12}{np.mean(rho_values):>10.4f}"
                     f"{np.mean(r_values):>10.4f}")
    lines.append("")
    return lines


def cmd_eval(args):
    scores = corpus.load_segment_scores(args.scores)
    judgments, _ = corpus.expand_rankings(corpus.load_rankings_csv(args.rankings))
    policy = TAU_FLAG_TO_POLICY[args.tau]

    by_language = {}
    for judgment in judgments:
        by_language.setdefault(judgment.langpair, []).append(judgment)

    per_language = {}
    for lang, lang_judgments in by_language.items():
        con, dis, tie = classify_judgments(lang_judgments, scores)
        tau = tau_from_counts(con, dis, tie, policy)
        per_language[lang] = (tau, con, dis, tie, len(lang_judgments))
    macro = float(np.mean([row[0] for row in per_language.values()]))

    system_rows = {}
    if args.systems:
        gold = corpus.load_system_scores(args.systems)
        for lang, gold_scores in gold.items():
            if lang not in by_language:
                raise DataError(f"gold systems for {lang!r} but no judgments")
            segments = sorted({j.segment for j in by_language[lang]})
            metric_scores = {}
            for sysid in sorted(gold_scores):
                per_segment = []
                for segid in segments:
                    if (segid, sysid) not in scores:
                        raise DataError(f"no score for segment {segid!r} "
                                        f"system {sysid!r}")
                    per_segment.append(scores[(segid, sysid)])
                metric_scores[sysid] = system_score(per_segment, args.agg)
            order = sorted(gold_scores)
            gold_ranks = ranks_from_scores(gold_scores, average_ties=True)
            metric_ranks = ranks_from_scores(metric_scores, average_ties=True)
            rho = spearman_rho([gold_ranks[s] for s in order],
                               [metric_ranks[s] for s in order],
                               allow_ties=True)
            r = pearson_r([gold_scores[s] for s in order],
                          [metric_scores[s] for s in order])
            system_rows[lang] = (rho, r, len(order))

    lines = _report_lines(policy, per_language, macro, system_rows, args.agg)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines))
    from .plots import render_tau_bars
    figure_path = f"{args.out}.png"
    render_tau_bars({lang: row[0] for lang, row in per_language.items()},
                    macro, figure_path, subtitle=policy)
    print("\n".join(lines))
    print(f"report: {args.out}")
    print(f"figure: {figure_path}")
    return 0


def cmd_features(args):
    bundles = corpus.load_segments_tsv(args.segments)
    items, _ = corpus.assemble_scoring_items(bundles)
    with open(args.out, "w", encoding="utf-8") as handle:
        handle.write("segid\tsysid\t" + "\t".join(BUILTIN_FEATURES) + "\n")
        for item in items:
            values = "\t".join(f"{v:.9f}" for v in item.skip)
            handle.write(f"{item.segid}\t{item.sysid}\t{values}\n")
    print(f"wrote {len(items)} feature rows to {args.out}")
    print("note: ter_lite is plain word edit distance / reference length "
          "(no block shifts)")
    return 0


def cmd_inspect(args):
    artifact = corpus.load_model(args.model)
    config = artifact.config
    print(f"model: {args.model}")
    print(f"hidden units per block: {config.get('hidden')}")
    print(f"input vector width: {config.get('x_dim')} "
          f"(precomputed part: {config.get('fixed_dim')})")
    print(f"skip features ({config.get('skip_dim')}): "
          f"{', '.join(config.get('features', []))}")
    print(f"tau policy: {config.get('tau_policy')}")
    print(f"selected epoch: {config.get('selected_epoch')} "
          f"(dev tau {config.get('best_dev_tau', float('nan')):.4f})")
    optimizer = config.get("optimizer", {})
    print("optimizer: " + ", ".join(f"{k}={v}" for k, v in optimizer.items()))
    encoder_cfg = config.get("encoder") or config.get("static_encoder")
    if encoder_cfg:
        print("encoder: " + ", ".join(f"{k}={v}" for k, v in encoder_cfg.items()))
    if artifact.vocab is not None:
        print(f"embedding vocabulary: {len(artifact.vocab)} tokens")
    print("parameters:")
    for name, arr in artifact.values.items():
        arr = np.asarray(arr)
        print(f"  {name}: shape {tuple(arr.shape)}, {arr.size} values")
    if artifact.empty_trans is not None:
        print(f"mean-empty translation vector: {len(artifact.empty_trans)} dims, "
              f"max |coord| {np.max(np.abs(artifact.empty_trans)):.4f}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
