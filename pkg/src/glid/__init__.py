"""Region-aware language identification.

Sixteen region-specific hashed-n-gram classifiers plus a global baseline,
selected at inference time from a country or region hint through a
geographic prior database, with evaluation tooling for macro metrics,
paired significance tests, and model-agreement analysis.
"""

from .classifier import (EmptyInput, Model, ModelConfig, load_model,
                         predict, predict_batch, save_model, train)
from .dataset import LabeledSample, SplitConfig, build_splits, restrict_to_region
from .geodb import (GeoDatabase, GeoDbError, NotCovered, REGION_IDS,
                    default_geodb_path, load_default, load_geodb)
from .metrics import (ConfusionTable, EvalReport, MacroScores, Scores,
                      TTestResult, evaluate_region, filter_local_only,
                      low_f_report, macro_average, paired_t_test, score)
from .agreement import (AgreementReport, AnnotatedPair, agreement_rate,
                        annotate_corpus, emit_map_csv, hhi)
from .router import BASELINE, GeoHint, IdentifyResult, ModelRegistry
from .textprep import (chunk_samples, char_tokenize, clean_text,
                       extract_ngrams, feature_ids, hash_feature)

__version__ = "0.1.0"

__all__ = [
    "AgreementReport", "AnnotatedPair", "BASELINE", "ConfusionTable",
    "EmptyInput", "EvalReport", "GeoDatabase", "GeoDbError", "GeoHint",
    "IdentifyResult", "LabeledSample", "MacroScores", "Model", "ModelConfig",
    "ModelRegistry", "NotCovered", "REGION_IDS", "Scores", "SplitConfig",
    "TTestResult", "agreement_rate", "annotate_corpus", "build_splits",
    "char_tokenize", "chunk_samples", "clean_text", "default_geodb_path",
    "emit_map_csv", "evaluate_region", "extract_ngrams", "feature_ids",
    "filter_local_only", "hash_feature", "hhi", "load_default", "load_geodb",
    "load_model", "low_f_report", "macro_average", "paired_t_test", "predict",
    "predict_batch", "restrict_to_region", "save_model", "score", "train",
]
