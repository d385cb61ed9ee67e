"""layerprobe: layer / window / pooling probing for speech embeddings."""

__version__ = "0.1.0"

from .embedding_io import (
    EmbeddingFormatError,
    EmbeddingSequence,
    EmbeddingStore,
    embedding_file_name,
    read_embedding_file,
    read_embedding_header,
    write_embedding_file,
)
from .manifest import (
    LabelDefinition,
    Manifest,
    ManifestError,
    RecordingRecord,
    ValidationReport,
    load_manifest,
    validate_manifest,
    write_manifest,
)
from .windowing import (
    WindowEmbedding,
    WindowPlan,
    middle_window,
    plan_windows,
    window_embedding,
    windows_for_recording,
)
from .pooling import PoolingStrategy, mellowmax, pool
from .probe import (
    DegenerateTrainingError,
    FeatureStandardizer,
    LogisticProbe,
    objective_and_gradient,
    sigmoid,
)
from .evaluation import (
    DegenerateFoldError,
    EvalProtocol,
    ResultRow,
    binary_f1,
    confusion_counts,
    evaluate_config,
    f1_from_counts,
    kfold_speaker_groups,
    macro_f1,
    recording_prediction,
    undersample,
)
from .runner import (
    ConfigError,
    ExperimentConfig,
    ResultTable,
    best_layer_report,
    emit_results,
    read_results,
    run_grid,
)
from .synth import SynthSpec, generate

__all__ = [name for name in dir() if not name.startswith("_")]
