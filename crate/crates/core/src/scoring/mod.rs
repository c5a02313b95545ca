//! Anomaly scores, GradCAM++ attribution maps, score normalisation and
//! subject-level fusion.

mod gradcam;
mod records;
mod scores;

pub use gradcam::{
    combined_map, gradcampp_map, gradcampp_saliency, target_layer_gradients, AttributionMap,
    MapSource,
};
pub use records::{
    fuse_subject, normalize_scores, read_scores_csv, write_scores_csv, ScoreRecord, ScoreType,
    SeedTag,
};
pub use scores::{
    evaluate_frames, score_attn, score_discr, score_rec, to_records, FrameEvaluation,
    MAP_NORM_EPS,
};
