//! Iterative-flow future-state generation.
//!
//! In place of a recurrent future module, the next state is produced by
//! warping the current state with a per-cell backward flow and adding an
//! optional residual update, repeated `T` times. The flow producer is an
//! injected callable: in a trained system it is a network conditioned on a
//! per-cell latent sample; here synthetic generators (constant flow,
//! ground-truth flow from a scene) stand in so the rollout machinery is
//! fully testable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{sample_lattice, BEVGrid};

/// Per-cell Gaussian parameters of the spatial latent distribution,
/// `ny x nx x dim` row major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMap {
    ny: usize,
    nx: usize,
    dim: usize,
    mean: Vec<f32>,
    log_variance: Vec<f32>,
}

impl LatentMap {
    pub fn new(
        ny: usize,
        nx: usize,
        dim: usize,
        mean: Vec<f32>,
        log_variance: Vec<f32>,
    ) -> Result<Self> {
        let expected = ny * nx * dim;
        if mean.len() != expected || log_variance.len() != expected {
            return Err(Error::contract(format!(
                "latent map wants {ny}x{nx}x{dim} = {expected} values, got mean {} / log_variance {}",
                mean.len(),
                log_variance.len()
            )));
        }
        if mean
            .iter()
            .chain(log_variance.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::contract("latent parameters must be finite"));
        }
        Ok(LatentMap {
            ny,
            nx,
            dim,
            mean,
            log_variance,
        })
    }

    /// Zero-mean, unit-variance map.
    pub fn standard(ny: usize, nx: usize, dim: usize) -> Self {
        LatentMap {
            ny,
            nx,
            dim,
            mean: vec![0.0; ny * nx * dim],
            log_variance: vec![0.0; ny * nx * dim],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.ny, self.nx, self.dim)
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn log_variance(&self) -> &[f32] {
        &self.log_variance
    }
}

/// A concrete draw from a [`LatentMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub ny: usize,
    pub nx: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

/// How to draw the latent sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Return the mean, bitwise.
    Deterministic,
    /// Reparameterized draw from a generator seeded with the value.
    Seeded(u64),
}

/// Draw `mean + exp(0.5 * log_variance) * eps` with `eps` standard normal
/// per element; deterministic mode returns the mean unchanged.
pub fn sample_latent(map: &LatentMap, mode: SampleMode) -> LatentSample {
    match mode {
        SampleMode::Deterministic => LatentSample {
            ny: map.ny,
            nx: map.nx,
            dim: map.dim,
            data: map.mean.clone(),
        },
        SampleMode::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_latent_with(map, &mut rng)
        }
    }
}

/// Reparameterized draw using a caller-supplied generator.
pub fn sample_latent_with<R: Rng>(map: &LatentMap, rng: &mut R) -> LatentSample {
    let data = map
        .mean
        .iter()
        .zip(&map.log_variance)
        .map(|(&mu, &lv)| {
            let eps: f64 = rng.sample(StandardNormal);
            mu + ((0.5 * lv as f64).exp() * eps) as f32
        })
        .collect();
    LatentSample {
        ny: map.ny,
        nx: map.nx,
        dim: map.dim,
        data,
    }
}

/// Backward per-cell displacement field in cells: target cell `(i, j)`
/// reads the source at `(j - dx, i - dy)`. Stored `ny x nx x 2` row major
/// as `(dx, dy)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    ny: usize,
    nx: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn new(ny: usize, nx: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != ny * nx * 2 {
            return Err(Error::contract(format!(
                "flow field wants {ny}x{nx}x2 = {} values, got {}",
                ny * nx * 2,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("flow field must be finite"));
        }
        Ok(FlowField { ny, nx, data })
    }

    pub fn zeros(ny: usize, nx: usize) -> Self {
        FlowField {
            ny,
            nx,
            data: vec![0.0; ny * nx * 2],
        }
    }

    /// Uniform displacement everywhere.
    pub fn constant(ny: usize, nx: usize, dx: f32, dy: f32) -> Self {
        let mut data = Vec::with_capacity(ny * nx * 2);
        for _ in 0..ny * nx {
            data.push(dx);
            data.push(dy);
        }
        FlowField { ny, nx, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f32, f32) {
        let k = (i * self.nx + j) * 2;
        (self.data[k], self.data[k + 1])
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, dx: f32, dy: f32) {
        let k = (i * self.nx + j) * 2;
        self.data[k] = dx;
        self.data[k + 1] = dy;
    }

    /// Two-channel raw grid view for the on-disk format.
    pub fn to_raw(&self) -> crate::grid::RawGrid {
        crate::grid::RawGrid {
            ny: self.ny as u32,
            nx: self.nx as u32,
            channels: 2,
            data: self.data.clone(),
        }
    }

    /// Rebuild a flow field from a two-channel raw grid.
    pub fn from_raw(raw: &crate::grid::RawGrid) -> Result<Self> {
        if raw.channels != 2 {
            return Err(Error::contract(format!(
                "flow fields are two-channel, raw grid has {}",
                raw.channels
            )));
        }
        raw.validate()?;
        FlowField::new(raw.ny as usize, raw.nx as usize, raw.data.clone())
    }
}

/// Warp a state grid with a backward flow:
/// `out[i][j] = bilinear(state, (j - dx[i][j], i - dy[i][j]))` with reads
/// off the lattice filling 0. Zero flow returns the state bitwise.
pub fn flow_warp(state: &BEVGrid, flow: &FlowField) -> Result<BEVGrid> {
    let spec = *state.spec();
    if flow.ny != spec.ny() || flow.nx != spec.nx() {
        return Err(Error::contract(format!(
            "flow is {}x{} but the state grid is {}x{}",
            flow.ny,
            flow.nx,
            spec.ny(),
            spec.nx()
        )));
    }
    let channels = state.channels();
    let mut out = BEVGrid::zeros(spec, channels);
    for i in 0..spec.ny() {
        for j in 0..spec.nx() {
            let (dx, dy) = flow.at(i, j);
            let u = j as f64 - dx as f64;
            let v = i as f64 - dy as f64;
            let k = out.offset(i, j);
            sample_lattice(state, u, v, &mut out.data_mut()[k..k + channels]);
        }
    }
    Ok(out)
}

/// One rollout step: a flow plus an optional additive state refinement.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub flow: FlowField,
    /// Added after warping; `None` means zero update.
    pub update: Option<BEVGrid>,
}

/// States `s_t ..= s_{t+T}` on one shared grid spec.
#[derive(Debug, Clone)]
pub struct StateSequence {
    states: Vec<BEVGrid>,
}

impl StateSequence {
    pub fn states(&self) -> &[BEVGrid] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Horizon T (number of generated future states).
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn into_states(self) -> Vec<BEVGrid> {
        self.states
    }
}

/// Generate `s_{t+k+1} = flow_warp(s_{t+k}, flow_k) + update_k` for
/// `k = 0..T`, returning the full sequence including the initial state.
/// `step_fn` receives the current state, the latent sample, and the step
/// index, and returns the flow (and optional update) for that step.
pub fn rollout<F>(
    initial: &BEVGrid,
    latent: &LatentSample,
    mut step_fn: F,
    horizon: usize,
) -> Result<StateSequence>
where
    F: FnMut(&BEVGrid, &LatentSample, usize) -> Result<RolloutStep>,
{
    if horizon == 0 {
        return Err(Error::contract("rollout horizon must be at least 1"));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(initial.clone());
    for k in 0..horizon {
        let current = states.last().expect("sequence is never empty");
        let step = step_fn(current, latent, k)?;
        let mut next = flow_warp(current, &step.flow)?;
        if let Some(update) = step.update {
            if update.spec() != current.spec() || update.channels() != current.channels() {
                return Err(Error::contract(format!(
                    "step {k} update grid does not match the state shape"
                )));
            }
            for (n, u) in next.data_mut().iter_mut().zip(update.data()) {
                *n += u;
            }
        }
        states.push(next);
    }
    Ok(StateSequence { states })
}
