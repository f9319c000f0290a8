//! Sample-driven variants of the dynamics.
//!
//! Two stochastic regimes:
//!
//! * Reward noise: each iteration sees r + xi with xi ~ N(0, sigma^2) i.i.d.,
//!   drawn from a stream keyed by (seed, iteration) so that runs are
//!   reproducible and iterations are mutually independent. The transition
//!   model stays exact.
//! * Sampled transitions: a buffer of (s, a, s') transitions is collected
//!   offline (uniform (s, a), s' from the true kernel); each iteration draws
//!   a fresh batch without replacement and builds the plug-in estimate
//!   K_hat = I - gamma P_hat used in both the v and theta updates. Rewards
//!   stay exact.
//!
//! Ground truth for diagnostics is always the clean model: value and policy
//! errors measure distance to the noiseless optimum.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mdp::{DualVariable, MdpModel, Transition, ValueFunction};
use crate::oracle::OracleSolution;
use crate::solver::{
    run_loop, KOperator, RunDriver, SolverConfig, SolverState, SolverTrace, Variant,
};

/// Reward-noise parameters. sigma = 0 reproduces the exact run bit for bit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

/// r + xi for iteration `iteration`: the ChaCha stream index is the
/// iteration, the seed fixes the key, so every iteration gets an independent
/// and reproducible draw. sigma = 0 returns the exact table untouched.
pub fn noisy_reward(mdp: &MdpModel, noise: &NoiseConfig, iteration: u64) -> Result<Array2<f64>> {
    if noise.sigma < 0.0 || !noise.sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise sigma = {} must be nonnegative",
            noise.sigma
        )));
    }
    if noise.sigma == 0.0 {
        return Ok(mdp.reward().clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(iteration);
    let mut out = mdp.reward().clone();
    for x in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += noise.sigma * z;
    }
    Ok(out)
}

/// Offline transition dataset in columnar form, with per-(s, a) aggregated
/// next-state counts and the empirical rows they induce.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    num_states: usize,
    num_actions: usize,
    seed: u64,
    col_s: Vec<u32>,
    col_a: Vec<u32>,
    col_next: Vec<u32>,
    /// counts[cell][s'] for cell = s * A + a.
    counts: Vec<BTreeMap<u32, u32>>,
    /// Normalized counts per cell, sorted by s'; empty if the cell was
    /// never visited.
    rows: Vec<Vec<(u32, f64)>>,
}

impl SampleBuffer {
    pub fn len(&self) -> usize {
        self.col_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.col_s.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The raw (s, a, s') columns.
    pub fn columns(&self) -> (&[u32], &[u32], &[u32]) {
        (&self.col_s, &self.col_a, &self.col_next)
    }

    /// Number of draws that landed on (s, a).
    pub fn visit_count(&self, s: usize, a: usize) -> u64 {
        self.counts[s * self.num_actions + a]
            .values()
            .map(|&c| c as u64)
            .sum()
    }

    /// Empirical distribution over next states for (s, a); empty slice when
    /// the pair was never visited.
    pub fn empirical_row(&self, s: usize, a: usize) -> &[(u32, f64)] {
        &self.rows[s * self.num_actions + a]
    }

    /// Dense empirical transition tensor. Errors when any pair is unseen
    /// (the tensor would have a non-stochastic row).
    pub fn empirical_transition(&self) -> Result<Array3<f64>> {
        let (s_n, a_n) = (self.num_states, self.num_actions);
        let mut p = Array3::zeros((a_n, s_n, s_n));
        for s in 0..s_n {
            for a in 0..a_n {
                let row = self.empirical_row(s, a);
                if row.is_empty() {
                    return Err(Error::InsufficientSamples {
                        needed: s_n * a_n,
                        got: 0,
                    });
                }
                for &(s2, prob) in row {
                    p[[a, s, s2 as usize]] = prob;
                }
            }
        }
        Ok(p)
    }

    fn rebuild_tables(&mut self) {
        let cells = self.num_states * self.num_actions;
        let mut counts = vec![BTreeMap::new(); cells];
        for i in 0..self.col_s.len() {
            let cell = self.col_s[i] as usize * self.num_actions + self.col_a[i] as usize;
            *counts[cell].entry(self.col_next[i]).or_insert(0u32) += 1;
        }
        let rows = counts
            .iter()
            .map(|m| {
                let total: u64 = m.values().map(|&c| c as u64).sum();
                m.iter()
                    .map(|(&s2, &c)| (s2, c as f64 / total as f64))
                    .collect()
            })
            .collect();
        self.counts = counts;
        self.rows = rows;
    }

    /// Binary columnar layout, little-endian throughout:
    ///
    /// ```text
    /// magic "ERMDPBUF" | version u32 | num_states u32 | num_actions u32
    /// | num_samples u64 | seed u64 | column s (u32 * n) | column a | column s'
    /// ```
    ///
    /// A JSON manifest with the same header fields is written to
    /// `<path>.json`.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path)?;
        let mut w = BufWriter::new(file);
        w.write_all(b"ERMDPBUF")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.num_states as u32).to_le_bytes())?;
        w.write_all(&(self.num_actions as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for col in [&self.col_s, &self.col_a, &self.col_next] {
            for &x in col.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        let manifest = BufferManifest {
            num_states: self.num_states,
            num_actions: self.num_actions,
            num_samples: self.len(),
            seed: self.seed,
            data_file: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        let mut manifest_path = path.as_os_str().to_owned();
        manifest_path.push(".json");
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<SampleBuffer> {
        let file = std::fs::File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"ERMDPBUF" {
            return Err(Error::InvalidConfig("bad buffer magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unknown buffer version {version}"
            )));
        }
        r.read_exact(&mut b4)?;
        let num_states = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let num_actions = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let read_col = |r: &mut BufReader<std::fs::File>| -> Result<Vec<u32>> {
            let mut raw = vec![0u8; n * 4];
            r.read_exact(&mut raw)?;
            Ok(raw
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect())
        };
        let col_s = read_col(&mut r)?;
        let col_a = read_col(&mut r)?;
        let col_next = read_col(&mut r)?;
        for i in 0..n {
            if col_s[i] as usize >= num_states
                || col_a[i] as usize >= num_actions
                || col_next[i] as usize >= num_states
            {
                return Err(Error::DimensionMismatch(format!("sample {i} out of range")));
            }
        }
        let mut buf = SampleBuffer {
            num_states,
            num_actions,
            seed,
            col_s,
            col_a,
            col_next,
            counts: Vec::new(),
            rows: Vec::new(),
        };
        buf.rebuild_tables();
        Ok(buf)
    }
}

#[derive(Serialize, Deserialize)]
struct BufferManifest {
    num_states: usize,
    num_actions: usize,
    num_samples: usize,
    seed: u64,
    data_file: String,
}

/// Draw `num_samples` transitions: (s, a) uniform over all pairs, s' from
/// the model row. One ChaCha8 stream seeded with `seed`; per sample it draws
/// the flat cell index, then the next state. Requires at least S*A samples
/// (coverage in expectation, not a guarantee).
pub fn collect_buffer(mdp: &MdpModel, num_samples: usize, seed: u64) -> Result<SampleBuffer> {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    if num_samples < s_n * a_n {
        return Err(Error::InsufficientSamples {
            needed: s_n * a_n,
            got: num_samples,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut col_s = Vec::with_capacity(num_samples);
    let mut col_a = Vec::with_capacity(num_samples);
    let mut col_next = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let cell = rng.random_range(0..s_n * a_n);
        let (s, a) = (cell / a_n, cell % a_n);
        let s2 = match mdp.transition() {
            Transition::SparseUniform {
                support_size,
                support,
                ..
            } => {
                let k = *support_size;
                support[cell * k + rng.random_range(0..k)]
            }
            Transition::Dense(p) => {
                let x: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = s_n - 1;
                for s2 in 0..s_n {
                    acc += p[[a, s, s2]];
                    if x < acc {
                        pick = s2;
                        break;
                    }
                }
                pick as u32
            }
        };
        col_s.push(s as u32);
        col_a.push(a as u32);
        col_next.push(s2);
    }
    let mut buf = SampleBuffer {
        num_states: s_n,
        num_actions: a_n,
        seed,
        col_s,
        col_a,
        col_next,
        counts: Vec::new(),
        rows: Vec::new(),
    };
    buf.rebuild_tables();
    Ok(buf)
}

/// What to use for a (s, a) row the current batch never visited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroCoverageFallback {
    /// The full-buffer empirical row (default).
    #[default]
    FallbackBuffer,
    /// Uniform over all states.
    FallbackUniform,
    /// The previous iteration's row (buffer row on the first iteration).
    CarryPrevious,
}

/// Plug-in operator K_hat = I - gamma P_hat from one batch. Rows are stored
/// compressed (CSR over cells in row-major (s, a) order); every row with any
/// mass is a probability distribution.
#[derive(Debug, Clone)]
pub struct BatchEstimate {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    batch_size: usize,
    /// Batch visit count per cell.
    coverage: Vec<u32>,
    indptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl BatchEstimate {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn coverage(&self, s: usize, a: usize) -> u32 {
        self.coverage[s * self.num_actions + a]
    }

    /// Fraction of (s, a) cells the batch visited at least once.
    pub fn covered_fraction(&self) -> f64 {
        let covered = self.coverage.iter().filter(|&&c| c > 0).count();
        covered as f64 / self.coverage.len() as f64
    }

    /// The estimated row for (s, a) as parallel (next-state, probability)
    /// slices.
    pub fn row(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        let cell = s * self.num_actions + a;
        let range = self.indptr[cell]..self.indptr[cell + 1];
        (&self.cols[range.clone()], &self.vals[range])
    }

    /// out[s][a] = v_s - gamma (P_hat_a v)_s.
    pub fn apply_k_hat(&self, v: &ValueFunction) -> Result<Array2<f64>> {
        if v.len() != self.num_states {
            return Err(Error::DimensionMismatch("value length vs estimate".into()));
        }
        Ok(self.k_apply_impl(v))
    }

    /// out[s'] = sum_a u_{s' a} - gamma sum_{s,a} P_hat[a][s][s'] u_{s a}.
    pub fn apply_k_hat_transpose(&self, u: &DualVariable) -> Result<Array1<f64>> {
        if u.dim() != (self.num_states, self.num_actions) {
            return Err(Error::DimensionMismatch("dual shape vs estimate".into()));
        }
        Ok(self.kt_apply_impl(u))
    }

    fn k_apply_impl(&self, v: &ValueFunction) -> Array2<f64> {
        let vs = v.as_slice().expect("contiguous value");
        let mut out = Array2::zeros((self.num_states, self.num_actions));
        let o = out.as_slice_mut().expect("contiguous output");
        for cell in 0..self.num_states * self.num_actions {
            let s = cell / self.num_actions;
            let mut acc = 0.0;
            for i in self.indptr[cell]..self.indptr[cell + 1] {
                acc += self.vals[i] * vs[self.cols[i] as usize];
            }
            o[cell] = vs[s] - self.gamma * acc;
        }
        out
    }

    fn kt_apply_impl(&self, u: &DualVariable) -> Array1<f64> {
        let us = u.as_slice().expect("contiguous dual");
        let mut out = u.sum_axis(ndarray::Axis(1));
        let o = out.as_slice_mut().expect("contiguous output");
        for cell in 0..self.num_states * self.num_actions {
            let w = self.gamma * us[cell];
            for i in self.indptr[cell]..self.indptr[cell + 1] {
                o[self.cols[i] as usize] -= w * self.vals[i];
            }
        }
        out
    }
}

impl KOperator for BatchEstimate {
    fn kt_apply(&self, u: &Array2<f64>) -> Array1<f64> {
        self.kt_apply_impl(u)
    }
    fn k_apply(&self, v: &Array1<f64>) -> Array2<f64> {
        self.k_apply_impl(v)
    }
}

/// Estimate K_hat from one batch drawn without replacement, with the default
/// buffer-row fallback for unvisited cells.
pub fn estimate_k_hat(
    buffer: &SampleBuffer,
    batch_size: usize,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<BatchEstimate> {
    estimate_k_hat_with(
        buffer,
        batch_size,
        gamma,
        rng,
        ZeroCoverageFallback::FallbackBuffer,
        None,
    )
}

/// As [`estimate_k_hat`] with an explicit zero-coverage strategy;
/// `prev` feeds [`ZeroCoverageFallback::CarryPrevious`].
pub fn estimate_k_hat_with(
    buffer: &SampleBuffer,
    batch_size: usize,
    gamma: f64,
    rng: &mut ChaCha8Rng,
    fallback: ZeroCoverageFallback,
    prev: Option<&BatchEstimate>,
) -> Result<BatchEstimate> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    if batch_size == 0 || batch_size > buffer.len() {
        return Err(Error::InsufficientSamples {
            needed: batch_size.max(1),
            got: buffer.len(),
        });
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::DiscountOutOfRange(gamma));
    }
    let (s_n, a_n) = (buffer.num_states, buffer.num_actions);
    let cells = s_n * a_n;

    // (cell, s') pairs of the batch, canonicalized by sorting.
    let mut pairs: Vec<(u32, u32)> = rand::seq::index::sample(rng, buffer.len(), batch_size)
        .iter()
        .map(|i| {
            (
                buffer.col_s[i] * a_n as u32 + buffer.col_a[i],
                buffer.col_next[i],
            )
        })
        .collect();
    pairs.sort_unstable();

    let mut coverage = vec![0u32; cells];
    for &(cell, _) in &pairs {
        coverage[cell as usize] += 1;
    }

    let mut indptr = Vec::with_capacity(cells + 1);
    indptr.push(0usize);
    let mut cols: Vec<u32> = Vec::new();
    let mut vals: Vec<f64> = Vec::new();
    let mut cursor = 0usize;
    for cell in 0..cells {
        let n_cell = coverage[cell] as usize;
        if n_cell > 0 {
            // Batch empirical row: group the sorted run for this cell.
            let run = &pairs[cursor..cursor + n_cell];
            cursor += n_cell;
            let mut i = 0;
            while i < run.len() {
                let s2 = run[i].1;
                let mut cnt = 0usize;
                while i < run.len() && run[i].1 == s2 {
                    cnt += 1;
                    i += 1;
                }
                cols.push(s2);
                vals.push(cnt as f64 / n_cell as f64);
            }
        } else {
            let buffer_row = &buffer.rows[cell];
            let push_buffer_row = |cols: &mut Vec<u32>, vals: &mut Vec<f64>| {
                if buffer_row.is_empty() {
                    // The buffer itself never saw this pair; the only honest
                    // default left is uniform.
                    for s2 in 0..s_n {
                        cols.push(s2 as u32);
                        vals.push(1.0 / s_n as f64);
                    }
                } else {
                    for &(s2, p) in buffer_row {
                        cols.push(s2);
                        vals.push(p);
                    }
                }
            };
            match fallback {
                ZeroCoverageFallback::FallbackBuffer => push_buffer_row(&mut cols, &mut vals),
                ZeroCoverageFallback::FallbackUniform => {
                    for s2 in 0..s_n {
                        cols.push(s2 as u32);
                        vals.push(1.0 / s_n as f64);
                    }
                }
                ZeroCoverageFallback::CarryPrevious => match prev {
                    Some(p) => {
                        let (pc, pv) = p.row(cell / a_n, cell % a_n);
                        cols.extend_from_slice(pc);
                        vals.extend_from_slice(pv);
                    }
                    None => push_buffer_row(&mut cols, &mut vals),
                },
            }
        }
        indptr.push(cols.len());
    }

    Ok(BatchEstimate {
        num_states: s_n,
        num_actions: a_n,
        gamma,
        batch_size,
        coverage,
        indptr,
        cols,
        vals,
    })
}

struct NoisyDriver<'a> {
    mdp: &'a MdpModel,
    noise: NoiseConfig,
    current: Array2<f64>,
}

impl RunDriver for NoisyDriver<'_> {
    fn prepare(&mut self, iteration: usize) -> Result<()> {
        self.current = noisy_reward(self.mdp, &self.noise, iteration as u64)?;
        Ok(())
    }
    fn k(&self) -> &dyn KOperator {
        self.mdp
    }
    fn reward(&self) -> &Array2<f64> {
        &self.current
    }
}

struct SampledDriver<'a> {
    buffer: &'a SampleBuffer,
    reward: &'a Array2<f64>,
    gamma: f64,
    batch_size: usize,
    fallback: ZeroCoverageFallback,
    rng: ChaCha8Rng,
    current: Option<BatchEstimate>,
}

impl RunDriver for SampledDriver<'_> {
    fn prepare(&mut self, _iteration: usize) -> Result<()> {
        let prev = self.current.take();
        self.current = Some(estimate_k_hat_with(
            self.buffer,
            self.batch_size,
            self.gamma,
            &mut self.rng,
            self.fallback,
            prev.as_ref(),
        )?);
        Ok(())
    }
    fn k(&self) -> &dyn KOperator {
        self.current.as_ref().expect("prepare ran")
    }
    fn reward(&self) -> &Array2<f64> {
        self.reward
    }
}

/// INGAD with per-iteration reward noise; transitions stay exact. With
/// sigma = 0 this is bit-identical to [`crate::run_solver`] on the same
/// config.
pub fn run_noisy_reward_ingad(
    mdp: &MdpModel,
    noise: &NoiseConfig,
    config: &SolverConfig,
    init: Option<SolverState>,
    oracle: Option<&OracleSolution>,
) -> Result<SolverTrace> {
    if noise.sigma < 0.0 || !noise.sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise sigma = {} must be nonnegative",
            noise.sigma
        )));
    }
    let mut driver = NoisyDriver {
        mdp,
        noise: *noise,
        current: mdp.reward().clone(),
    };
    let mut trace = run_loop(&mut driver, mdp, Variant::Ingad, config, init, oracle)?;
    trace
        .metadata
        .insert("noise_sigma".into(), serde_json::json!(noise.sigma));
    trace
        .metadata
        .insert("noise_seed".into(), serde_json::json!(noise.seed));
    Ok(trace)
}

/// INGAD with a fresh K_hat per iteration estimated from `buffer`. The model
/// supplies the exact rewards and discount (transitions are only sampled);
/// diagnostics compare against the exact oracle.
#[allow(clippy::too_many_arguments)]
pub fn run_sample_based_ingad(
    mdp: &MdpModel,
    buffer: &SampleBuffer,
    batch_size: usize,
    sample_seed: u64,
    fallback: ZeroCoverageFallback,
    config: &SolverConfig,
    init: Option<SolverState>,
    oracle: Option<&OracleSolution>,
) -> Result<SolverTrace> {
    if buffer.num_states() != mdp.num_states() || buffer.num_actions() != mdp.num_actions() {
        return Err(Error::DimensionMismatch("buffer dims vs model".into()));
    }
    let mut driver = SampledDriver {
        buffer,
        reward: mdp.reward(),
        gamma: mdp.discount(),
        batch_size,
        fallback,
        rng: ChaCha8Rng::seed_from_u64(sample_seed),
        current: None,
    };
    let mut trace = run_loop(&mut driver, mdp, Variant::Ingad, config, init, oracle)?;
    trace
        .metadata
        .insert("buffer_seed".into(), serde_json::json!(buffer.seed()));
    trace
        .metadata
        .insert("buffer_samples".into(), serde_json::json!(buffer.len()));
    trace
        .metadata
        .insert("batch_size".into(), serde_json::json!(batch_size));
    trace
        .metadata
        .insert("sample_seed".into(), serde_json::json!(sample_seed));
    trace
        .metadata
        .insert("fallback".into(), serde_json::json!(fallback));
    Ok(trace)
}
