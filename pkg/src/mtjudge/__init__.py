"""Trainable pairwise judge for machine translation evaluation.

Train a neural preference model on human ranking judgments, turn it into an
absolute per-segment metric by comparing each translation against an empty
competitor, and measure agreement with humans via rank correlations.
"""

from .correlations import (PairJudgment, TIE_POLICIES, classify_judgments,
                           kendall_tau, pearson_r, ranks_from_scores,
                           spearman_rho, tau_from_counts)
from .corpus import (RankingRecord, SegmentBundle, assemble_instances,
                     assemble_scoring_items, expand_rankings,
                     load_model, load_rankings_csv, load_segments_tsv,
                     save_model, split_judgments)
from .encoders import (BowEncoder, CnnEncoder, EmbeddingTable, FineTune,
                       LstmEncoder, make_encoder, rebuild_encoder)
from .errors import DataError, MtJudgeError, NumericError
from .features import (BUILTIN_FEATURES, FeatureTable, MinMaxParams,
                       load_feature_table, sentence_bleu, ter_lite, tokenize)
from .network import (Batch, BestEpochTracker, ModelArtifact, PairwiseInput,
                      forward, forward_batch, init_network_params, loss,
                      prediction_batch, symmetric_expand, train)
from .numeric import (OptimizerConfig, ParamStore, adagrad_step, dropout_mask,
                      gradcheck, sigmoid, xavier_init)
from .scoring import (EmptyVectorSpec, absolute_score, build_mean_empty,
                      empty_spec_for, prefer, score_batch, system_score,
                      zero_empty)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_FEATURES", "Batch", "BestEpochTracker", "BowEncoder",
    "CnnEncoder", "DataError", "EmbeddingTable", "EmptyVectorSpec",
    "FeatureTable", "FineTune", "LstmEncoder", "MinMaxParams",
    "ModelArtifact", "MtJudgeError", "NumericError", "OptimizerConfig",
    "PairJudgment", "PairwiseInput", "ParamStore", "RankingRecord",
    "SegmentBundle", "TIE_POLICIES", "absolute_score", "adagrad_step",
    "assemble_instances", "assemble_scoring_items", "build_mean_empty",
    "classify_judgments", "dropout_mask", "empty_spec_for",
    "expand_rankings", "forward", "forward_batch", "gradcheck",
    "init_network_params", "kendall_tau", "load_feature_table", "load_model",
    "load_rankings_csv", "load_segments_tsv", "loss", "make_encoder",
    "pearson_r", "prediction_batch", "prefer", "ranks_from_scores",
    "rebuild_encoder", "save_model", "score_batch", "sentence_bleu",
    "sigmoid", "spearman_rho", "split_judgments", "symmetric_expand",
    "system_score", "tau_from_counts", "ter_lite", "tokenize", "train",
    "xavier_init", "zero_empty",
]
