//! Brute-force reference implementations used by the test suites.
//!
//! Everything here is written as plainly as possible (nested loops,
//! exhaustive enumeration, numeric integration) and deliberately avoids
//! the operations it exists to check. Only the data types are shared.

use std::collections::HashMap;

use crate::eval::{DetectionBox, InstanceSegFrame};
use crate::geometry::{CameraRig, DepthBins, FeatureMap};
use crate::grid::{BEVGrid, GridSpec};

/// Triple-nested-loop lift-and-pool: for every camera, pixel, and depth
/// bin, unproject the pixel center, filter by z bounds and extent, and add
/// `feature * probability` straight into the target cell. Iteration order
/// matches the storage order of the lifted cloud, so the result is bitwise
/// comparable with the production path.
pub fn brute_force_lift_pool(
    features: &FeatureMap,
    bins: &DepthBins,
    rig: &CameraRig,
    stride: f64,
    spec: GridSpec,
    z_bounds: (f64, f64),
) -> BEVGrid {
    let channels = features.channels();
    let mut grid = BEVGrid::zeros(spec, channels);
    for (m, camera) in rig.cameras().iter().enumerate() {
        for v in 0..features.height() {
            let v_img = (v as f64 + 0.5) * stride;
            for u in 0..features.width() {
                let u_img = (u as f64 + 0.5) * stride;
                let pixel = features.feature(m, v, u);
                let dist = features.depth_distribution(m, v, u);
                for (k, &p) in dist.iter().enumerate() {
                    let d = bins.center(k);
                    let xc = (u_img - camera.cx) / camera.fx * d;
                    let yc = (v_img - camera.cy) / camera.fy * d;
                    let zc = d;
                    let r = &camera.rotation;
                    let t = &camera.translation;
                    let x = r[0][0] * xc + r[0][1] * yc + r[0][2] * zc + t[0];
                    let y = r[1][0] * xc + r[1][1] * yc + r[1][2] * zc + t[1];
                    let z = r[2][0] * xc + r[2][1] * yc + r[2][2] * zc + t[2];
                    if z < z_bounds.0 || z >= z_bounds.1 {
                        continue;
                    }
                    if !spec.contains(x, y) {
                        continue;
                    }
                    let j = (((x - spec.x_min()) / spec.cell_size()).floor() as usize)
                        .min(spec.nx() - 1);
                    let i = (((y - spec.y_min()) / spec.cell_size()).floor() as usize)
                        .min(spec.ny() - 1);
                    for (c, &f) in pixel.iter().enumerate() {
                        let prev = grid.get(i, j, c);
                        grid.set(i, j, c, prev + f * p);
                    }
                }
            }
        }
    }
    grid
}

/// Result of exhaustively enumerating one-to-one matchings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveMatch {
    /// Maximum achievable number of matched pairs.
    pub tp_count: usize,
    /// Minimum total center distance among maximum matchings.
    pub total_distance: f64,
    /// One matching achieving both optima, as `(pred, gt)` index pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// Enumerate every one-to-one same-class matching within the distance
/// threshold, maximizing the pair count and breaking ties by minimum total
/// distance. Exponential; intended for instances of at most ~8 boxes.
pub fn exhaustive_matching(
    preds: &[DetectionBox],
    gts: &[DetectionBox],
    threshold: f64,
) -> ExhaustiveMatch {
    fn recurse(
        p: usize,
        preds: &[DetectionBox],
        gts: &[DetectionBox],
        threshold: f64,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        best: &mut ExhaustiveMatch,
    ) {
        if p == preds.len() {
            let total: f64 = current
                .iter()
                .map(|&(pi, gi)| preds[pi].center_distance(&gts[gi]))
                .sum();
            if current.len() > best.tp_count
                || (current.len() == best.tp_count && total < best.total_distance)
            {
                best.tp_count = current.len();
                best.total_distance = total;
                best.pairs = current.clone();
            }
            return;
        }
        // Leave prediction p unmatched.
        recurse(p + 1, preds, gts, threshold, used, current, best);
        // Or match it to any free ground truth within the threshold.
        for g in 0..gts.len() {
            if used[g] || gts[g].class != preds[p].class {
                continue;
            }
            if preds[p].center_distance(&gts[g]) < threshold {
                used[g] = true;
                current.push((p, g));
                recurse(p + 1, preds, gts, threshold, used, current, best);
                current.pop();
                used[g] = false;
            }
        }
    }

    let mut best = ExhaustiveMatch {
        tp_count: 0,
        total_distance: f64::INFINITY,
        pairs: Vec::new(),
    };
    if preds.is_empty() {
        best.total_distance = 0.0;
        return best;
    }
    let mut used = vec![false; gts.len()];
    let mut current = Vec::new();
    recurse(0, preds, gts, threshold, &mut used, &mut current, &mut best);
    best
}

/// Panoptic-quality style VPQ computed by scanning masks pair by pair:
/// every (prediction id, ground-truth id) combination gets its IoU from a
/// direct cell walk, pairs above 0.5 match, and the per-frame ratios are
/// averaged.
pub fn brute_force_vpq(pred: &[InstanceSegFrame], gt: &[InstanceSegFrame]) -> f64 {
    assert_eq!(pred.len(), gt.len());
    assert!(!pred.is_empty());
    let mut total = 0.0;
    for (p_frame, g_frame) in pred.iter().zip(gt) {
        let pred_ids = p_frame.instance_ids();
        let gt_ids = g_frame.instance_ids();
        let mut iou_sum = 0.0;
        let mut matched_p = Vec::new();
        let mut matched_g = Vec::new();
        for &pid in &pred_ids {
            for &gid in &gt_ids {
                let mut inter = 0usize;
                let mut union = 0usize;
                for (&pv, &gv) in p_frame.ids().iter().zip(g_frame.ids()) {
                    let in_p = pv == pid;
                    let in_g = gv == gid;
                    inter += (in_p && in_g) as usize;
                    union += (in_p || in_g) as usize;
                }
                let iou = inter as f64 / union as f64;
                if iou > 0.5 {
                    assert!(!matched_p.contains(&pid) && !matched_g.contains(&gid));
                    iou_sum += iou;
                    matched_p.push(pid);
                    matched_g.push(gid);
                }
            }
        }
        let tp = matched_p.len() as f64;
        let fp = (pred_ids.len() - matched_p.len()) as f64;
        let fn_ = (gt_ids.len() - matched_g.len()) as f64;
        let denom = tp + 0.5 * fp + 0.5 * fn_;
        total += if denom == 0.0 { 1.0 } else { iou_sum / denom };
    }
    total / pred.len() as f64
}

/// Average precision by numeric integration: rebuild the score-sorted
/// match sequence with a plain loop, then integrate precision over a fine
/// recall grid. Accurate to roughly `1 / resolution`.
pub fn numeric_ap(
    preds: &[DetectionBox],
    gts: &[DetectionBox],
    class: &str,
    threshold: f64,
    resolution: usize,
) -> f64 {
    let n_gt = gts.iter().filter(|g| g.class == class).count();
    if n_gt == 0 {
        return 0.0;
    }
    let mut order: Vec<&DetectionBox> = preds.iter().filter(|p| p.class == class).collect();
    order.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let class_gts: Vec<&DetectionBox> = gts.iter().filter(|g| g.class == class).collect();
    let mut used = vec![false; class_gts.len()];
    // (recall, precision) after each prediction.
    let mut points = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (k, pred) in order.iter().enumerate() {
        let mut nearest: Option<(f64, usize)> = None;
        for (g, gt) in class_gts.iter().enumerate() {
            if used[g] {
                continue;
            }
            let d = pred.center_distance(gt);
            if d < threshold && nearest.is_none_or(|(bd, _)| d < bd) {
                nearest = Some((d, g));
            }
        }
        if let Some((_, g)) = nearest {
            used[g] = true;
            tp += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // Integrate the raw staircase: precision at recall r is taken from the
    // first prediction that reaches r.
    let mut area = 0.0;
    let dr = 1.0 / resolution as f64;
    for step in 0..resolution {
        let r = (step as f64 + 0.5) * dr;
        let p = points
            .iter()
            .find(|&&(recall, _)| recall >= r)
            .map_or(0.0, |&(_, precision)| precision);
        area += p * dr;
    }
    area
}

/// Dense per-channel grid resample by direct evaluation, used to
/// cross-check the sampler on affine fields: evaluates `a*x + b*y + c` at
/// destination centers, zeroing anything outside the source extent.
pub fn affine_resample_reference(
    src_spec: &GridSpec,
    dst_spec: &GridSpec,
    a: f64,
    b: f64,
    c: f64,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(dst_spec.ny() * dst_spec.nx());
    for i in 0..dst_spec.ny() {
        for j in 0..dst_spec.nx() {
            let (x, y) = dst_spec.cell_center(i, j);
            if src_spec.contains(x, y) {
                out.push((a * x + b * y + c) as f32);
            } else {
                out.push(0.0);
            }
        }
    }
    out
}

/// Map of instance id to cell count, by direct scan.
pub fn id_histogram(frame: &InstanceSegFrame) -> HashMap<u32, usize> {
    let mut histogram = HashMap::new();
    for &id in frame.ids() {
        if id != 0 {
            *histogram.entry(id).or_insert(0) += 1;
        }
    }
    histogram
}
