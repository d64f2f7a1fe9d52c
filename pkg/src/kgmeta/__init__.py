"""Knowledge-guided metric meta-learning for few-shot text classification.

KB embeddings condition a linear hypernetwork that generates the
parameters of a task-relevant relation network; its score fuses with a
shared task-agnostic relation network through a sigmoid, and the whole
stack trains episodically.
"""

from .encoding import (
    EncoderParams,
    Sentence,
    Vocabulary,
    class_prototype,
    encode_sentence,
    pair_representation,
)
from .episodes import (
    Corpus,
    Episode,
    LabeledExample,
    load_corpus,
    read_splits,
    read_support,
    sample_episode,
)
from .kb_embedding import (
    DistMultEmbedder,
    KbEmbeddings,
    Triple,
    TripleStore,
    hits_at_k,
    load_embeddings,
    load_triples,
    margin_loss,
    sample_negative,
    save_embeddings,
    score_triple,
    train_kb,
)
from .model import ModelParams, load_checkpoint, save_checkpoint
from .numerics import AdamState, adam_step, grad_check, mlp2_forward, sigmoid
from .relation import (
    GeneratorParams,
    RelationNetParams,
    agnostic_score,
    combined_score,
    episode_loss,
    generate_params,
    relevant_score,
)
from .retrieval import (
    KnowledgeContext,
    SurfaceIndex,
    build_knowledge_context,
    build_surface_index,
    knowledge_representation,
    retrieve_concepts,
)
from .synth import SynthConfig, generate_benchmark
from .training import (
    EvalReport,
    FewShotRelationClassifier,
    TrainConfig,
    evaluate,
    run_variant,
    train_meta,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Corpus", "DistMultEmbedder", "EncoderParams", "Episode",
    "EvalReport", "FewShotRelationClassifier", "GeneratorParams",
    "KbEmbeddings", "KnowledgeContext", "LabeledExample", "ModelParams",
    "RelationNetParams", "Sentence", "SurfaceIndex", "SynthConfig",
    "TrainConfig", "Triple", "TripleStore", "Vocabulary", "adam_step",
    "agnostic_score", "build_knowledge_context", "build_surface_index",
    "class_prototype", "combined_score", "encode_sentence", "episode_loss",
    "evaluate", "generate_benchmark", "generate_params", "grad_check",
    "hits_at_k", "knowledge_representation", "load_checkpoint", "load_corpus",
    "load_embeddings", "load_triples", "margin_loss", "mlp2_forward",
    "pair_representation", "read_splits", "read_support", "relevant_score",
    "retrieve_concepts", "run_variant", "sample_episode", "sample_negative",
    "save_checkpoint", "save_embeddings", "score_triple", "sigmoid",
    "train_kb", "train_meta",
]
