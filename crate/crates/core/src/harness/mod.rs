//! Dataset format, synthetic generators, evaluation metrics and the
//! geometry invariant suite.

mod audit;
mod dataset;
mod evaluate;
mod generate;
mod geomcheck;

pub use audit::{
    audit_flow, flow_replay, model_rollout, observed_weights, FlowAudit, MAX_AUDIT_HALVINGS, REPLAY_STEP,
};
pub use dataset::{ingest_row, make_snapshot, TrajectoryDataset};
pub use evaluate::{
    evaluate, predict, Evaluation, MetricAccumulator, MetricReport, SequencePrediction, MAPE_EPS,
};
pub use generate::{generate, random_circulant_graph, random_connected_graph, GenerateSpec, SystemKind};
pub use geomcheck::{geomcheck, CheckResult, GeomCheckReport};
