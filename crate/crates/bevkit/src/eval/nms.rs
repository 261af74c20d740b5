//! Scale-aware BEV non-maximum suppression.
//!
//! Box centers are scaled per class about the ego origin before the
//! distance test; small-object classes get a factor above 1 so nearby
//! duplicates separate. Suppression is greedy by score within each class,
//! and survivors are returned unscaled in their input order.

use std::collections::HashMap;

use super::detection::{class_groups, DetectionBox};

/// Suppress boxes whose class-scaled center lies strictly within
/// `distance_threshold` of a kept same-class box. Classes missing from
/// `class_scale_factors` use a factor of 1.
pub fn bev_nms(
    boxes: &[DetectionBox],
    class_scale_factors: &HashMap<String, f64>,
    distance_threshold: f64,
) -> Vec<DetectionBox> {
    let mut keep = vec![false; boxes.len()];
    for (class, indices) in class_groups(boxes) {
        let scale = class_scale_factors.get(class).copied().unwrap_or(1.0);
        let mut order = indices.clone();
        order.sort_by(|&a, &b| {
            boxes[b]
                .score
                .partial_cmp(&boxes[a].score)
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        let mut kept: Vec<(f64, f64)> = Vec::new();
        for &k in &order {
            let scaled = (boxes[k].x * scale, boxes[k].y * scale);
            let suppressed = kept.iter().any(|&(x, y)| {
                ((scaled.0 - x).powi(2) + (scaled.1 - y).powi(2)).sqrt() < distance_threshold
            });
            if !suppressed {
                kept.push(scaled);
                keep[k] = true;
            }
        }
    }
    boxes
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(b, _)| b.clone())
        .collect()
}
