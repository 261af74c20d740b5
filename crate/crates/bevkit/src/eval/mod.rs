//! Quantitative evaluation: segmentation IoU, video panoptic quality,
//! center-distance detection matching, mAP, true-positive error metrics,
//! the aggregate detection score, and BEV non-maximum suppression.

mod detection;
mod nms;
mod report;
mod seg;

pub use detection::{
    average_precision, detection_summary, match_detections, mean_average_precision, nds, tp_errors,
    DetectionBox, DetectionSummary, MatchedPair, Matching, TpErrors, DEFAULT_DISTANCE_THRESHOLDS,
    TP_ERROR_MATCH_THRESHOLD,
};
pub use nms::bev_nms;
pub use report::{MetricRow, MetricsReport};
pub use seg::{
    crop_centered, seg_iou, vpq, BinaryGrid, FrameStats, InstanceSegFrame, VPQAccumulator,
    VPQ_MATCH_IOU,
};
