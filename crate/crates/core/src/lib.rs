//! Robustness tooling for infrared object detection.
//!
//! * [`corruption`]: fourteen deterministic image corruptions at five severities.
//! * [`dataset`]: turns a clean COCO-format test set into a corrupted benchmark tree.
//! * [`tensor_store`] and [`weight_ensemble`]: checkpoint I/O and weight-space interpolation.
//! * [`eval`]: AP50 and mean performance under corruption.
//! * [`report`]: tables and severity curves.

pub mod coco;
pub mod corruption;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod report;
pub mod tensor_store;
pub mod weight_ensemble;

pub use coco::{BBox, CocoDataset, CocoDetection, ImageId};
pub use corruption::{
    corrupt, corrupt_encoded, corrupt_with, derive_seed, CorruptionKind, CorruptionSpec, FrostOverlays, ImageBuffer,
    NoiseMode, OutputEncoding, ParamSchedule, Severity,
};
pub use dataset::{build_corrupted_set, recommend_severity, tree_hash, BuildOptions, DatasetManifest};
pub use error::{Error, ErrorCategory, Result};
pub use eval::{ap50, evaluate_run, iou, mpc, Detection, EvalConfig, EvalResult, GroundTruthBox, SetKey};
pub use report::{lambda_table, per_corruption_table, severity_curve, CellRounding, SweepSeries, Table};
pub use tensor_store::{
    diff_keys, load_checkpoint, load_checkpoint_with, save_checkpoint, Checkpoint, DType, KeyDiff, LoadOptions,
    NamedTensor,
};
pub use weight_ensemble::{lambda_sweep, merge, MergePolicy, MergeReport, MismatchPolicy, MissingKeyPolicy};

/// Version string of this library.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
