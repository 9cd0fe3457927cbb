//! Objective evaluation: ESTOI, per-scene echo and noise measures, and
//! average-rank comparison of methods.

mod estoi;
mod rank;
mod scene_eval;

pub use estoi::{estoi, stoi};
pub use rank::{rank_methods, summarize, Direction, MethodRank, MethodScores};
pub use scene_eval::{
    evaluate_scene, merge_external, Condition, ExternalMetric, MetricRow, EXTERNAL_METRIC_SLOTS,
};
