"""emofuse: multimodal speech emotion recognition.

Three input modalities (mel-spectrogram acoustics, token word embeddings,
a 768-d sentence-knowledge vector) are encoded, fused in two co-attention
rounds and classified; training combines cross-entropy with a supervised
contrastive term, optionally backed by a momentum queue.
"""

from .data import (
    FOUR_CLASS,
    FOUR_CLASS_NAMES,
    SIX_CLASS,
    SIX_CLASS_NAMES,
    DatasetSplit,
    LabelSet,
    Sample,
    SessionFold,
    filter_classes,
    load_manifest,
    make_session_folds,
    split_dataset,
)
from .audio import (
    AugmentPolicy,
    FrontendConfig,
    MelSpectrogram,
    Waveform,
    add_noise_snr,
    augment,
    compute_mel_spectrogram,
    load_wav,
    pitch_shift,
    save_wav,
    time_stretch,
)
from .text import (
    HashSentenceEncoder,
    HashTranscriptProvider,
    HashWordVectors,
    ProviderCache,
    SentenceEmbedding,
    WordEmbeddingSequence,
    WordVectorTable,
    encode_sentence,
    tokenize_and_embed,
    transcribe,
)
from .encoders import AcousticEncoder, EncoderConfig, KnowledgeAdapter, ModalityFeature, WordEncoder
from .attention import AttentionBlock, AttentionConfig, CoAttentionStack, scaled_dot_attention
from .fusion import (
    EmotionModel,
    HeadOutputs,
    PredictionHeads,
    fuse_add,
    fuse_concat_broadcast,
    masked_mean_pool,
)
from .contrastive import (
    ContrastiveBatch,
    LossBreakdown,
    MoCoQueue,
    combined_loss,
    moco_step,
    momentum_update,
    paired_views,
    supcon_loss,
)
from .metrics import MetricsReport, compute_metrics
from .training import (
    ABLATION_SUBSETS,
    Checkpoint,
    CrossValidationResult,
    FeaturePipeline,
    TrainConfig,
    ablate,
    apply_label_map,
    build_model,
    collate,
    cross_validate,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
