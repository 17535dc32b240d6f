//! Student learning and forgetting models over skill-tagged interaction
//! logs: time-windowed feature encoding, logistic regression and
//! factorization machines, cross-validation, forgetting-curve read-outs and
//! a threshold scheduler for spaced practice.

pub mod analysis;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fm;
pub mod glm;
pub mod model;
pub mod scheduler;
pub mod synth;

pub use analysis::{forgetting_slope, forgetting_slopes, recall_probability, SlopeEntry, SlopePairing, SlopeReport};
pub use corpus::{
    dataset_stats, load_interactions, preprocess, read_interactions, read_qmatrix_pairs, student_kfold, write_generic,
    Dataset, DatasetBuilder, DatasetFormat, FoldAssignment, Interaction, QMatrix, StatsReport, TimeUnit,
};
pub use encoder::{
    encode_dataset, encode_query, encode_students, feature_layout, read_sparse, window_counts, BlockKind, DesignMatrix,
    EncodedSidecar, HistoryEvent, LayoutDescriptor, ModelFamily, ModelSpec, SparseVector, Vocabulary, WindowCounts,
    WindowSet,
};
pub use error::{Error, Result};
pub use eval::{
    ablation_suite, accuracy, auc, cross_validate, nll, AblationReport, CvConfig, CvRun, MetricsTable, ModelResult,
    Summary,
};
pub use fm::{fit_fm_gibbs, fm_predict, fm_score, FMParams, FmModel, GibbsConfig, PredictionMode};
pub use glm::{fit_logistic, loss_and_gradient, predict_proba, sigmoid, LinearParams, LogisticConfig, LogisticFit};
pub use model::{train, train_with_eval, Predictor, TrainConfig, TrainedModel};
pub use scheduler::{next_item, next_skill, simulate_policy, Policy, RetentionReport, SchedulerConfig, SimulationConfig};
pub use synth::{GeneratorParams, SyntheticConfig};
