//! Epoch loop over set contexts.
//!
//! Workers share the two embedding matrices and update them without
//! locking. Cells are `AtomicU32` accessed with relaxed ordering, so a
//! concurrent read-modify-write may lose an update but never tears a value.
//! With one worker the run is bitwise reproducible for a fixed seed: every
//! random decision for a context (downsampling, shuffling, negatives) comes
//! from a generator seeded by `(seed, epoch, context index)`.

use std::sync::atomic::{AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Mode, TrainConfig};
use super::matrix::{Matrix, RowStore};
use super::model::EmbeddingModel;
use super::sampler::{build_sampler, subsample_keep_prob, SamplerTable};
use super::update::{cbow_kernel, sgns_kernel, Workspace};
use crate::corpus::ContextCorpus;
use crate::error::{Error, Result};

const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_loss: f64,
    pub updates: u64,
    /// Learning rate reached at the end of the epoch.
    pub lr: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub updates: u64,
    pub elapsed: Duration,
}

impl TrainReport {
    pub fn updates_per_second(&self) -> f64 {
        self.updates as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Training units scheduled for a context of `len` entities: ordered pairs
/// within the window for SGNS, focus positions for CBOW.
pub fn scheduled_units(len: usize, mode: Mode, window: Option<usize>) -> u64 {
    if len < 2 {
        return 0;
    }
    let len = len as u64;
    match mode {
        Mode::Cbow => len,
        Mode::Sgns => {
            let w = window.map_or(len - 1, |w| (w as u64).min(len - 1));
            // Σ_{d=1..w} 2 (len - d)
            2 * (w * len - w * (w + 1) / 2)
        }
    }
}

pub fn train(model: &mut EmbeddingModel, corpus: &ContextCorpus) -> Result<TrainReport> {
    train_with_progress(model, corpus, |_| {})
}

pub fn train_with_progress(
    model: &mut EmbeddingModel,
    corpus: &ContextCorpus,
    mut on_epoch: impl FnMut(&EpochSummary),
) -> Result<TrainReport> {
    let config = model.config.clone();
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("corpus has no contexts".into()));
    }
    if corpus.vocab_size() as usize != model.len() {
        return Err(Error::InvalidArgument(format!(
            "corpus built for {} entities, model has {}",
            corpus.vocab_size(),
            model.len()
        )));
    }

    let keep = keep_probabilities(corpus, config.downsample)?;
    let sampler = build_sampler(&model.vocab, config.sampling_power);
    let per_epoch: u64 = corpus
        .contexts()
        .iter()
        .map(|c| scheduled_units(c.len(), config.mode, config.window))
        .sum();
    let total = per_epoch * config.epochs as u64;
    if total == 0 {
        return Err(Error::Empty("corpus yields no training pairs".into()));
    }

    let target = SharedMatrix::from_matrix(&model.target);
    let context = SharedMatrix::from_matrix(&model.context);
    let progress = AtomicU64::new(0);
    let start = Instant::now();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut updates = 0;

    for epoch in 0..config.epochs {
        let epoch_start = Instant::now();
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(context_seed(config.seed, epoch, usize::MAX)));
        let job = EpochJob {
            config: &config,
            contexts: corpus.contexts(),
            order: &order,
            keep: &keep,
            sampler: &sampler,
            target: &target,
            context: &context,
            next: AtomicUsize::new(0),
            progress: &progress,
            total,
            epoch,
        };
        let (loss, count) = if config.workers == 1 {
            job.run_worker()
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = (0..config.workers).map(|_| s.spawn(|| job.run_worker())).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0), |(l, c), (wl, wc)| (l + wl, c + wc))
            })
        };
        let mean_loss = if count > 0 { loss / count as f64 } else { 0.0 };
        epoch_losses.push(mean_loss);
        updates += count;
        on_epoch(&EpochSummary {
            epoch,
            mean_loss,
            updates: count,
            lr: job.lr(),
            elapsed: epoch_start.elapsed(),
        });
    }

    model.target = target.into_matrix();
    model.context = context.into_matrix();
    Ok(TrainReport {
        epoch_losses,
        updates,
        elapsed: start.elapsed(),
    })
}

fn keep_probabilities(corpus: &ContextCorpus, threshold: Option<f64>) -> Result<Vec<f32>> {
    let counts = corpus.token_counts();
    let Some(t) = threshold else {
        return Ok(vec![1.0; counts.len()]);
    };
    let total = corpus.total_tokens() as f64;
    counts
        .iter()
        .map(|&c| {
            if c == 0 {
                Ok(1.0)
            } else {
                subsample_keep_prob(c as f64 / total, t).map(|p| p as f32)
            }
        })
        .collect()
}

struct EpochJob<'a> {
    config: &'a TrainConfig,
    contexts: &'a [Vec<u32>],
    /// Visiting order of `contexts` for this epoch.
    order: &'a [usize],
    keep: &'a [f32],
    sampler: &'a SamplerTable,
    target: &'a SharedMatrix,
    context: &'a SharedMatrix,
    next: AtomicUsize,
    progress: &'a AtomicU64,
    total: u64,
    epoch: usize,
}

impl EpochJob<'_> {
    fn lr(&self) -> f64 {
        let done = self.progress.load(Ordering::Relaxed).min(self.total) as f64;
        let (hi, lo) = (self.config.initial_lr, self.config.min_lr);
        (hi - (hi - lo) * done / self.total as f64).max(lo)
    }

    fn run_worker(&self) -> (f64, u64) {
        let cfg = self.config;
        let mut input = SharedRows(self.target);
        let mut output = SharedRows(self.context);
        let mut ws = Workspace::<f32>::new(cfg.dim);
        let mut kept: Vec<u32> = Vec::new();
        let mut negatives: Vec<u32> = Vec::with_capacity(cfg.negatives);
        let mut cbow_ctx: Vec<u32> = Vec::new();
        let mut loss = 0.0;
        let mut updates = 0u64;

        loop {
            let begin = self.next.fetch_add(CHUNK, Ordering::Relaxed);
            if begin >= self.contexts.len() {
                break;
            }
            let end = (begin + CHUNK).min(self.contexts.len());
            for &idx in &self.order[begin..end] {
                let ctx = &self.contexts[idx];
                let lr = self.lr() as f32;
                let mut rng = ChaCha8Rng::seed_from_u64(context_seed(cfg.seed, self.epoch, idx));

                kept.clear();
                for &id in ctx {
                    let p = self.keep[id as usize];
                    if p >= 1.0 || rng.random::<f32>() < p {
                        kept.push(id);
                    }
                }
                kept.shuffle(&mut rng);
                let len = kept.len();
                let w = cfg.window.unwrap_or(len);

                for i in 0..len {
                    let lo = i.saturating_sub(w);
                    let hi = (i + w + 1).min(len);
                    match cfg.mode {
                        Mode::Sgns => {
                            for j in lo..hi {
                                if j == i {
                                    continue;
                                }
                                let positive = kept[j];
                                self.draw_negatives(&mut rng, positive, &mut negatives);
                                loss += sgns_kernel(&mut input, &mut output, kept[i], positive, &negatives, lr, &mut ws);
                                updates += 1;
                            }
                        }
                        Mode::Cbow => {
                            cbow_ctx.clear();
                            cbow_ctx.extend((lo..hi).filter(|&j| j != i).map(|j| kept[j]));
                            if cbow_ctx.is_empty() {
                                continue;
                            }
                            let focus = kept[i];
                            self.draw_negatives(&mut rng, focus, &mut negatives);
                            loss += cbow_kernel(&mut input, &mut output, focus, &cbow_ctx, &negatives, lr, &mut ws);
                            updates += 1;
                        }
                    }
                }

                self.progress.fetch_add(
                    scheduled_units(ctx.len(), cfg.mode, cfg.window),
                    Ordering::Relaxed,
                );
            }
        }
        (loss, updates)
    }

    /// A draw equal to the positive id is redrawn once, then dropped.
    #[inline]
    fn draw_negatives(&self, rng: &mut ChaCha8Rng, positive: u32, out: &mut Vec<u32>) {
        out.clear();
        for _ in 0..self.config.negatives {
            let mut n = self.sampler.sample(rng);
            if n == positive {
                n = self.sampler.sample(rng);
                if n == positive {
                    continue;
                }
            }
            out.push(n);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn context_seed(seed: u64, epoch: usize, idx: usize) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(epoch as u64)) ^ idx as u64)
}

struct SharedMatrix {
    rows: usize,
    dim: usize,
    cells: Vec<AtomicU32>,
}

impl SharedMatrix {
    fn from_matrix(m: &Matrix<f32>) -> Self {
        SharedMatrix {
            rows: m.rows(),
            dim: m.dim(),
            cells: m.as_slice().iter().map(|x| AtomicU32::new(x.to_bits())).collect(),
        }
    }

    fn into_matrix(self) -> Matrix<f32> {
        let data = self
            .cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()))
            .collect();
        Matrix::from_vec(self.rows, self.dim, data)
    }
}

struct SharedRows<'a>(&'a SharedMatrix);

impl RowStore<f32> for SharedRows<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn num_rows(&self) -> usize {
        self.0.rows
    }

    #[inline]
    fn read_row(&self, row: usize, out: &mut [f32]) {
        let d = self.0.dim;
        let cells = &self.0.cells[row * d..(row + 1) * d];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    #[inline]
    fn add_scaled(&mut self, row: usize, scale: f32, x: &[f32]) {
        let d = self.0.dim;
        let cells = &self.0.cells[row * d..(row + 1) * d];
        for (c, &xi) in cells.iter().zip(x) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + scale * xi;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}
