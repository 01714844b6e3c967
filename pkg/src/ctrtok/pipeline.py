"""Batch recognition and cross-validated experiments."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError
from .evaluation import (
    EvaluationKey,
    EvaluationReport,
    UtterancePair,
    build_outcome,
    crossval_partitions,
    score,
)
from .linguistic import (
    KINDS,
    ClassInventory,
    LinguisticDecoder,
    TaggedCorpus,
    build_ld,
    corpus_vocabulary,
    read_corpus,
    utterance_text,
)
from .orthographic import (
    DEFAULT_ERROR_TYPES,
    ErrorTypeSet,
    KeyboardMap,
    OdSet,
    TrainingConfig,
    Vocabulary,
    build_od,
    read_vocabulary,
)
from .synth import SyntheticErrorSpec, synthesize_corpus
from .tokenpass import BeamConfig, recognize_connected

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    """Everything needed to build models, decode and score.

    ``corpus`` may be a path or an already parsed corpus.  When ``noisy``
    and ``key`` are not given, experiments synthesize them from the corpus
    with ``synthetic``, or with default rates seeded by ``seed``.
    """

    corpus: Path | TaggedCorpus | None = None
    vocabulary: Path | None = None
    ld_kind: str = "baseline"
    classes: Path | None = None
    training: TrainingConfig = field(default_factory=TrainingConfig)
    error_types: ErrorTypeSet = DEFAULT_ERROR_TYPES
    keyboard: Path | None = None
    delta: float = 1e-3
    beam: BeamConfig = field(default_factory=BeamConfig)
    folds: int = 5
    seed: int = 0
    noisy: Path | None = None
    key: Path | None = None
    synthetic: SyntheticErrorSpec | None = None
    model_dir: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.ld_kind not in KINDS:
            raise ConfigError(f"unknown LD kind {self.ld_kind!r}; choose from {', '.join(KINDS)}")
        if self.ld_kind == "biclass" and self.classes is None:
            raise ConfigError("biclass LD needs a class inventory (--classes)")
        if not self.delta > 0:
            raise ConfigError("delta must be > 0")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if (self.noisy is None) != (self.key is None):
            raise ConfigError("noisy corpus and key must be given together")
        self.beam = BeamConfig.parse(self.beam)

    def load_corpus(self) -> TaggedCorpus:
        if self.corpus is None:
            raise ConfigError("no corpus given")
        if isinstance(self.corpus, TaggedCorpus):
            return self.corpus
        return read_corpus(self.corpus)

    def load_keyboard(self) -> KeyboardMap:
        return KeyboardMap.read(self.keyboard) if self.keyboard else KeyboardMap.qwerty()

    def load_inventory(self) -> ClassInventory | None:
        return ClassInventory.read(self.classes) if self.classes else None

    def derive_vocabulary(self, corpus: TaggedCorpus | None = None) -> Vocabulary:
        """Corpus tokens plus any entries of the lexicon file."""
        extra = read_vocabulary(self.vocabulary).entries if self.vocabulary else ()
        if corpus is None and self.corpus is None:
            if not extra:
                raise ConfigError("need a corpus or a vocabulary file")
            return Vocabulary(extra)
        return corpus_vocabulary(corpus or self.load_corpus(), extra)


class Normalizer:
    """Decodes utterances with fixed models, caching repeated inputs."""

    def __init__(self, ld: LinguisticDecoder, od: OdSet, beam: BeamConfig = BeamConfig()):
        self.ld, self.od, self.beam = ld, od, beam
        self._cache: dict[str, tuple[str, str]] = {}

    def normalize(self, text: str) -> tuple[str, str]:
        """Returns ``(output, status)``; status is ok, empty, no-parse or unknown-symbol.

        Anything other than ok passes the input through unchanged.
        """
        text = text.strip()
        if not text:
            return "", "empty"
        hit = self._cache.get(text)
        if hit is None:
            try:
                d = recognize_connected(self.ld, self.od, text, self.beam)
                hit = (text, "no-parse") if d.no_parse else (d.text, "ok")
            except DataError as exc:
                log.debug("passing through %r: %s", text, exc)
                hit = (text, "unknown-symbol")
            self._cache[text] = hit
        return hit


def build_models(config: ExperimentConfig, corpus: TaggedCorpus | None = None):
    """Load models from ``config.model_dir`` when present there, else build them."""
    od = ld = None
    md = Path(config.model_dir) if config.model_dir else None
    if md and (md / "od" / "manifest.tsv").exists():
        od = OdSet.load(md / "od")
    if md and (md / "ld" / "ld.meta").exists():
        ld = LinguisticDecoder.load(md / "ld")
        if ld.kind != config.ld_kind:
            log.info("stored LD is %s, config asks for %s; rebuilding", ld.kind, config.ld_kind)
            ld = None
    if od is None:
        vocab = config.derive_vocabulary(corpus)
        od = build_od(vocab, config.error_types, config.load_keyboard(), config.training)
    if ld is None:
        if config.ld_kind != "baseline" and corpus is None:
            corpus = config.load_corpus()
        ld = build_ld(config.ld_kind, corpus, od.vocabulary, config.delta, config.load_inventory())
    return ld, od


def run_recognize(config: ExperimentConfig, input_path, output_path, pairs_path=None) -> int:
    """Normalize ``input_path`` line by line into ``output_path``.

    Utterances that cannot be decoded are copied unchanged and listed in
    ``<output>.diag.tsv`` (line number, reason, text).  Returns the number
    of lines processed.
    """
    try:
        lines = Path(input_path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {input_path}: {exc}") from exc
    corpus = None if config.corpus is None else config.load_corpus()
    ld, od = build_models(config, corpus)
    norm = Normalizer(ld, od, config.beam)
    out, diag, pairs = [], [], []
    for n, line in enumerate(lines, 1):
        text, status = norm.normalize(line)
        out.append(text)
        pairs.append((line, text))
        if status in ("no-parse", "unknown-symbol"):
            diag.append(f"{n}\t{status}\t{line}\n")
    Path(output_path).write_text("".join(s + "\n" for s in out), encoding="utf-8")
    Path(str(output_path) + ".diag.tsv").write_text("".join(diag), encoding="utf-8")
    if pairs_path:
        Path(pairs_path).write_text("".join(f"{o}\t{t}\n" for o, t in pairs), encoding="utf-8")
    if diag:
        log.warning("%d of %d utterance(s) passed through undecoded", len(diag), len(lines))
    return len(lines)


@dataclass
class ExperimentResult:
    folds: list[EvaluationReport]
    pooled: EvaluationReport
    key_counts: dict[str, int]

    def to_table(self) -> str:
        return "\n".join(r.to_table() for r in self.folds + [self.pooled])


def _noisy_and_key(config: ExperimentConfig, corpus: TaggedCorpus):
    if config.noisy is not None:
        lines = Path(config.noisy).read_text(encoding="utf-8").splitlines()
        count = sum(len(d) for d in corpus.dialogues)
        if len(lines) != count:
            raise DataError(f"{config.noisy}: {len(lines)} lines for {count} corpus utterances")
        noisy, it = [], iter(lines)
        for d in corpus.dialogues:
            noisy.append([next(it) for _ in d])
        return noisy, EvaluationKey.read(config.key)
    spec = config.synthetic or SyntheticErrorSpec(seed=config.seed)
    synth = synthesize_corpus(corpus, spec, config.load_keyboard())
    return synth.noisy, synth.key


def _run_fold(args):
    k, config, corpus, train, od, noisy, key = args
    ld = build_ld(config.ld_kind, corpus.subset(train), od.vocabulary, config.delta, config.load_inventory())
    norm = Normalizer(ld, od, config.beam)
    pairs = [UtterancePair(line, norm.normalize(line)[0]) for line in noisy]
    originals = set(noisy)
    fold_key = EvaluationKey((o, c) for o, c in key.pairs.items() if o in originals)
    return pairs, score(build_outcome(pairs, fold_key), fold_key, f"fold {k + 1}")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """k-fold rotation over dialogues: train the LD on k-1 parts, decode the
    held-out part with the shared OD and score it against the key."""
    corpus = config.load_corpus()
    if config.ld_kind == "biclass" and not corpus.tagged:
        raise DataError("biclass LD needs a fully tagged corpus")
    noisy, key = _noisy_and_key(config, corpus)
    vocab = config.derive_vocabulary(corpus)
    od = build_od(vocab, config.error_types, config.load_keyboard(), config.training)
    folds = crossval_partitions(range(len(corpus)), config.folds, config.seed)
    jobs = [
        (k, config, corpus, train, od, [u for i in test for u in noisy[i]], key)
        for k, (train, test) in enumerate(folds)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(j) for j in jobs]
    all_pairs = [p for pairs, _ in results for p in pairs]
    pooled = score(build_outcome(all_pairs, key), key, f"pooled {config.ld_kind}")
    reports = [r for _, r in results]
    return ExperimentResult(reports, pooled, key.category_counts())


def clean_lines(corpus: TaggedCorpus) -> list[str]:
    return [utterance_text(u) for u in corpus.utterances()]

