//! Segmentation and video panoptic quality.
//!
//! VPQ follows the future-prediction formulation: per frame, predicted and
//! ground-truth instances are matched one-to-one by mask IoU above 0.5
//! (such matches are unique by the panoptic-quality argument), and the
//! frame ratio `sum IoU / (|TP| + 0.5 |FP| + 0.5 |FN|)` is averaged over
//! the `T + 1` frames so a perfect sequence scores exactly 1.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{BEVGrid, GridSpec};

/// Instance matching threshold; matches above this IoU are unique.
pub const VPQ_MATCH_IOU: f64 = 0.5;

/// Per-cell instance ids on a BEV raster; id 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSegFrame {
    ny: usize,
    nx: usize,
    ids: Vec<u32>,
}

impl InstanceSegFrame {
    pub fn new(ny: usize, nx: usize, ids: Vec<u32>) -> Result<Self> {
        if ids.len() != ny * nx {
            return Err(Error::contract(format!(
                "instance frame wants {ny}x{nx} = {} ids, got {}",
                ny * nx,
                ids.len()
            )));
        }
        Ok(InstanceSegFrame { ny, nx, ids })
    }

    pub fn zeros(ny: usize, nx: usize) -> Self {
        InstanceSegFrame {
            ny,
            nx,
            ids: vec![0; ny * nx],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.ids[i * self.nx + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, id: u32) {
        self.ids[i * self.nx + j] = id;
    }

    /// Distinct nonzero ids present, ascending.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.ids.iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Foreground mask (any nonzero id).
    pub fn foreground(&self) -> BinaryGrid {
        BinaryGrid {
            ny: self.ny,
            nx: self.nx,
            mask: self.ids.iter().map(|&v| v != 0).collect(),
        }
    }

    /// One-channel grid carrying the ids as floats. Ids stay exact up to
    /// 2^24, far beyond any synthetic scene.
    pub fn to_grid(&self, spec: GridSpec) -> Result<BEVGrid> {
        if spec.ny() != self.ny || spec.nx() != self.nx {
            return Err(Error::contract(format!(
                "spec is {}x{} but the frame is {}x{}",
                spec.ny(),
                spec.nx(),
                self.ny,
                self.nx
            )));
        }
        BEVGrid::new(spec, 1, self.ids.iter().map(|&v| v as f32).collect())
    }

    /// Recover ids from a one-channel grid by rounding to the nearest
    /// non-negative integer.
    pub fn from_grid(grid: &BEVGrid) -> Result<Self> {
        if grid.channels() != 1 {
            return Err(Error::contract(format!(
                "instance frames are single-channel, grid has {}",
                grid.channels()
            )));
        }
        let ids = grid
            .data()
            .iter()
            .map(|&v| {
                let r = v.round();
                if r <= 0.0 {
                    0
                } else {
                    r as u32
                }
            })
            .collect();
        Ok(InstanceSegFrame {
            ny: grid.spec().ny(),
            nx: grid.spec().nx(),
            ids,
        })
    }
}

/// Boolean occupancy raster used by the segmentation IoU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryGrid {
    pub ny: usize,
    pub nx: usize,
    pub mask: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(ny: usize, nx: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != ny * nx {
            return Err(Error::contract(format!(
                "binary grid wants {ny}x{nx} = {} cells, got {}",
                ny * nx,
                mask.len()
            )));
        }
        Ok(BinaryGrid { ny, nx, mask })
    }

    /// Threshold one channel of a grid at 0.5.
    pub fn from_grid_channel(grid: &BEVGrid, channel: usize) -> Self {
        let (ny, nx) = (grid.spec().ny(), grid.spec().nx());
        let mut mask = Vec::with_capacity(ny * nx);
        for i in 0..ny {
            for j in 0..nx {
                mask.push(grid.get(i, j, channel) >= 0.5);
            }
        }
        BinaryGrid { ny, nx, mask }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Intersection over union of two masks; two empty masks score 1.
pub fn seg_iou(pred: &BinaryGrid, gt: &BinaryGrid) -> Result<f64> {
    if pred.ny != gt.ny || pred.nx != gt.nx {
        return Err(Error::contract(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            pred.ny, pred.nx, gt.ny, gt.nx
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &g) in pred.mask.iter().zip(&gt.mask) {
        inter += (p && g) as usize;
        union += (p || g) as usize;
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(inter as f64 / union as f64)
    }
}

/// Matched pair bookkeeping of one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    /// `(pred id, gt id, IoU)` of matched instances.
    pub true_positives: Vec<(u32, u32, f64)>,
    /// Prediction ids left unmatched.
    pub false_positives: Vec<u32>,
    /// Ground-truth ids left unmatched.
    pub false_negatives: Vec<u32>,
}

impl FrameStats {
    /// `sum IoU / (|TP| + 0.5 |FP| + 0.5 |FN|)`, defined as 1 when the
    /// frame holds no instances on either side.
    pub fn ratio(&self) -> f64 {
        let denom = self.true_positives.len() as f64
            + 0.5 * self.false_positives.len() as f64
            + 0.5 * self.false_negatives.len() as f64;
        if denom == 0.0 {
            return 1.0;
        }
        let iou_sum: f64 = self.true_positives.iter().map(|&(_, _, iou)| iou).sum();
        iou_sum / denom
    }
}

/// Per-frame match sets accumulated over a sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VPQAccumulator {
    pub frames: Vec<FrameStats>,
}

impl VPQAccumulator {
    /// Mean of the per-frame ratios.
    pub fn score(&self) -> f64 {
        if self.frames.is_empty() {
            return 1.0;
        }
        self.frames.iter().map(FrameStats::ratio).sum::<f64>() / self.frames.len() as f64
    }
}

/// Per-id cell areas for both rasters plus pairwise overlap counts.
type FrameOverlaps = (
    HashMap<u32, usize>,
    HashMap<u32, usize>,
    HashMap<(u32, u32), usize>,
);

fn frame_overlaps(pred: &InstanceSegFrame, gt: &InstanceSegFrame) -> FrameOverlaps {
    let mut pred_area: HashMap<u32, usize> = HashMap::new();
    let mut gt_area: HashMap<u32, usize> = HashMap::new();
    let mut inter: HashMap<(u32, u32), usize> = HashMap::new();
    for (&p, &g) in pred.ids.iter().zip(&gt.ids) {
        if p != 0 {
            *pred_area.entry(p).or_insert(0) += 1;
        }
        if g != 0 {
            *gt_area.entry(g).or_insert(0) += 1;
        }
        if p != 0 && g != 0 {
            *inter.entry((p, g)).or_insert(0) += 1;
        }
    }
    (pred_area, gt_area, inter)
}

fn frame_stats(pred: &InstanceSegFrame, gt: &InstanceSegFrame) -> FrameStats {
    let (pred_area, gt_area, inter) = frame_overlaps(pred, gt);
    let mut stats = FrameStats::default();
    let mut matched_pred: Vec<u32> = Vec::new();
    let mut matched_gt: Vec<u32> = Vec::new();
    for (&(p, g), &overlap) in &inter {
        let union = pred_area[&p] + gt_area[&g] - overlap;
        let iou = overlap as f64 / union as f64;
        if iou > VPQ_MATCH_IOU {
            stats.true_positives.push((p, g, iou));
            matched_pred.push(p);
            matched_gt.push(g);
        }
    }
    // IoU > 0.5 pairs are mutually exclusive, so each id appears at most
    // once; sort for reproducible reporting.
    stats.true_positives.sort_unstable_by_key(|a| (a.0, a.1));
    let mut fps: Vec<u32> = pred_area
        .keys()
        .copied()
        .filter(|p| !matched_pred.contains(p))
        .collect();
    let mut fns: Vec<u32> = gt_area
        .keys()
        .copied()
        .filter(|g| !matched_gt.contains(g))
        .collect();
    fps.sort_unstable();
    fns.sort_unstable();
    stats.false_positives = fps;
    stats.false_negatives = fns;
    stats
}

/// Video panoptic quality of a predicted sequence against ground truth.
/// Returns the score and the per-frame accumulator for inspection.
pub fn vpq(pred: &[InstanceSegFrame], gt: &[InstanceSegFrame]) -> Result<(f64, VPQAccumulator)> {
    if pred.len() != gt.len() {
        return Err(Error::contract(format!(
            "sequence lengths differ: {} predicted vs {} ground truth",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::contract("vpq needs at least one frame"));
    }
    let mut acc = VPQAccumulator::default();
    for (t, (p, g)) in pred.iter().zip(gt).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::contract(format!(
                "frame {t} shapes differ: {:?} vs {:?}",
                p.shape(),
                g.shape()
            )));
        }
        acc.frames.push(frame_stats(p, g));
    }
    Ok((acc.score(), acc))
}

/// Restrict a frame to a `width_m x height_m` window centered on the
/// metric origin (the ego vehicle), returning the cropped frame and its
/// spec. Cells whose centers fall inside the half-open window survive.
pub fn crop_centered(
    frame: &InstanceSegFrame,
    spec: &GridSpec,
    width_m: f64,
    height_m: f64,
) -> Result<(InstanceSegFrame, GridSpec)> {
    if spec.ny() != frame.ny || spec.nx() != frame.nx {
        return Err(Error::contract(format!(
            "spec is {}x{} but the frame is {}x{}",
            spec.ny(),
            spec.nx(),
            frame.ny,
            frame.nx
        )));
    }
    let half_w = width_m / 2.0;
    let half_h = height_m / 2.0;
    let cell = spec.cell_size();
    let mut j_range = (usize::MAX, 0usize);
    let mut i_range = (usize::MAX, 0usize);
    for j in 0..spec.nx() {
        let x = spec.x_min() + (j as f64 + 0.5) * cell;
        if x >= -half_w && x < half_w {
            j_range.0 = j_range.0.min(j);
            j_range.1 = j_range.1.max(j + 1);
        }
    }
    for i in 0..spec.ny() {
        let y = spec.y_min() + (i as f64 + 0.5) * cell;
        if y >= -half_h && y < half_h {
            i_range.0 = i_range.0.min(i);
            i_range.1 = i_range.1.max(i + 1);
        }
    }
    if j_range.0 >= j_range.1 || i_range.0 >= i_range.1 {
        return Err(Error::contract(format!(
            "crop window {width_m}x{height_m} m misses the grid extent"
        )));
    }
    let (i0, i1) = i_range;
    let (j0, j1) = j_range;
    let mut ids = Vec::with_capacity((i1 - i0) * (j1 - j0));
    for i in i0..i1 {
        for j in j0..j1 {
            ids.push(frame.get(i, j));
        }
    }
    let crop_spec = GridSpec::new(
        spec.x_min() + j0 as f64 * cell,
        spec.x_min() + j1 as f64 * cell,
        spec.y_min() + i0 as f64 * cell,
        spec.y_min() + i1 as f64 * cell,
        cell,
    )?;
    let cropped = InstanceSegFrame::new(i1 - i0, j1 - j0, ids)?;
    Ok((cropped, crop_spec))
}
