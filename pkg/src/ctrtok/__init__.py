"""Connected text recognition: spelling and segmentation repair with layered HMMs."""

from .errors import ConfigError, CtrError, DataError, TrainingError, UnknownSymbolError
from .evaluation import EvaluationKey, EvaluationReport, UtterancePair, score
from .hmm import Alphabet, Hmm, baum_welch, viterbi
from .linguistic import LinguisticDecoder, TaggedCorpus, build_ld
from .orthographic import KeyboardMap, OdSet, TrainingConfig, Vocabulary, build_od
from .pipeline import ExperimentConfig, run_experiment, run_recognize
from .tokenpass import BeamConfig, Decoding, recognize_connected, recognize_isolated

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BeamConfig",
    "ConfigError",
    "CtrError",
    "DataError",
    "Decoding",
    "EvaluationKey",
    "EvaluationReport",
    "ExperimentConfig",
    "Hmm",
    "KeyboardMap",
    "LinguisticDecoder",
    "OdSet",
    "TaggedCorpus",
    "TrainingConfig",
    "TrainingError",
    "UnknownSymbolError",
    "UtterancePair",
    "Vocabulary",
    "baum_welch",
    "build_ld",
    "build_od",
    "recognize_connected",
    "recognize_isolated",
    "run_experiment",
    "run_recognize",
    "score",
    "viterbi",
]
