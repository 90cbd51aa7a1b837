use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::checkpoint::{Checkpoint, ScheduleSpec};
use super::condition::{build_condition, toy_text_embed, TEXT_DIM};
use super::model::{masked_l1, seeded_normal, DenoiserConfig, DenoiserParams, TrainingSample};
use super::schedule::NoiseSchedule;
use super::tensor::{Normalizer, SampleTensor, SlotState, WindowLayout};
use crate::keyaction::TrainingWindow;
use crate::motion::Vec3;
use crate::rng::{indexed_substream, Rng};
use crate::{Error, Exec, Result};

/// Samples per gradient chunk; fixed so the reduction order never depends on
/// the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub blocks: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one (cosine decay).
    pub final_lr_fraction: f64,
    pub schedule_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
    /// Largest conditioned prefix seen in training (matches generation overlap).
    pub n_over: usize,
    pub waypoint_prob: f64,
    pub target_prob: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            blocks: 2,
            iterations: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            final_lr_fraction: 0.1,
            schedule_steps: 200,
            beta_start: 1e-4,
            beta_end: 2e-2,
            seed: 0,
            n_over: 2,
            waypoint_prob: 0.3,
            target_prob: 0.8,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.blocks == 0 || self.batch_size == 0 || self.n_over == 0 {
            return Err(Error::invalid(
                "hidden, blocks, batch_size and n_over must be positive",
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, p) in [
            ("waypoint_prob", self.waypoint_prob),
            ("target_prob", self.target_prob),
            ("final_lr_fraction", self.final_lr_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::invalid("grad_clip must be positive"));
        }
        ScheduleSpec {
            steps: self.schedule_steps,
            beta_start: self.beta_start,
            beta_end: self.beta_end,
        }
        .build()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub loss: f64,
    pub learning_rate: f64,
}

/// Object name → basis-point vectors (`points × 3`).
pub type GeometryTable = BTreeMap<String, Arc<Array2<f64>>>;

struct Item {
    tau: Array2<f64>,
    tensor: SampleTensor,
    window: TrainingWindow,
    geometry: usize,
    text: Vec<f64>,
}

/// Normalized windows plus their conditioning inputs.
struct Corpus {
    items: Vec<Item>,
    geometries: Vec<Arc<Array2<f64>>>,
}

fn tensors(windows: &[TrainingWindow], layout: Option<&WindowLayout>) -> Result<Vec<SampleTensor>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::invalid("no training windows"))?;
    let layout = layout
        .copied()
        .unwrap_or_else(|| WindowLayout::for_window(first));
    windows
        .iter()
        .map(|w| {
            if WindowLayout::for_window(w) != layout {
                return Err(Error::shape(format!(
                    "window with {} joints / {} slots does not match {} / {}",
                    w.skeleton.joint_count(),
                    w.keys.len() + 1,
                    layout.joint_count,
                    layout.slots
                )));
            }
            SampleTensor::from_window(w)
        })
        .collect()
}

impl Corpus {
    fn new(
        windows: &[TrainingWindow],
        geometry: &GeometryTable,
        ckpt: &Checkpoint,
    ) -> Result<Self> {
        let tensors = tensors(windows, Some(&ckpt.layout))?;
        let mut names: Vec<&str> = Vec::new();
        let mut items = Vec::with_capacity(windows.len());
        for (w, t) in windows.iter().zip(tensors) {
            if w.skeleton.as_ref() != ckpt.skeleton.as_ref() {
                return Err(Error::invalid(
                    "window skeleton differs from the model skeleton",
                ));
            }
            let g = geometry.get(&w.object_name).ok_or_else(|| {
                Error::invalid(format!("no geometry for object {:?}", w.object_name))
            })?;
            if g.dim() != (ckpt.params.config.geo_points, 3) {
                return Err(Error::shape(format!(
                    "geometry for {:?} is {:?}",
                    w.object_name,
                    g.dim()
                )));
            }
            let idx = match names.iter().position(|n| *n == w.object_name) {
                Some(i) => i,
                None => {
                    names.push(&w.object_name);
                    names.len() - 1
                }
            };
            items.push(Item {
                tau: ckpt.normalizer.normalize(t.values.view(), &t.valid),
                tensor: t,
                window: w.clone(),
                geometry: idx,
                text: toy_text_embed(&w.prompt, ckpt.params.config.text_dim),
            });
        }
        let geometries = names.iter().map(|n| geometry[*n].clone()).collect();
        Ok(Self { items, geometries })
    }

    /// Draws one noised example with a randomly masked condition.
    fn draw(
        &self,
        idx: usize,
        ckpt: &Checkpoint,
        schedule: &NoiseSchedule,
        cfg: &TrainConfig,
        rng: &mut Rng,
    ) -> Result<(TrainingSample, usize)> {
        let item = &self.items[idx];
        let w = &item.window;
        let valid_slots = item.tensor.valid.iter().filter(|v| **v).count();
        let states: Vec<SlotState> = std::iter::once(&w.initial)
            .chain(&w.keys)
            .take(valid_slots)
            .map(|e| SlotState {
                pose: e.pose.clone(),
                object: e.object,
            })
            .collect();
        let max_prefix = cfg.n_over.min(valid_slots - 1).max(1);
        let prefix = if rng.random_bool(0.5) {
            1
        } else {
            rng.random_range(1..=max_prefix)
        };
        let last = valid_slots - 1;
        let with_target = rng.random_bool(cfg.target_prob);
        let mut waypoints = Vec::new();
        for (s, st) in states.iter().enumerate().skip(prefix) {
            let take = rng.random_bool(cfg.waypoint_prob);
            if take && !(with_target && s == last) {
                waypoints.push((s, [st.object.position.x, st.object.position.y]));
            }
        }
        let target: Option<(usize, Vec3)> =
            (with_target && last >= prefix).then(|| (last, states[last].object.position));
        let bundle = build_condition(
            self.geometries[item.geometry].clone(),
            &ckpt.layout,
            &states[..prefix],
            &waypoints,
            target,
            item.text.clone(),
        )?;
        let step = rng.random_range(1..=schedule.steps());
        let noise = seeded_normal(item.tau.nrows(), item.tau.ncols(), rng);
        let sample = TrainingSample {
            tau0: item.tau.clone(),
            valid: item.tensor.valid.clone(),
            step,
            noise,
            condition: bundle.encode(&ckpt.normalizer, &ckpt.layout)?,
        };
        Ok((sample, item.geometry))
    }
}

/// Mean loss and gradient over a batch. Samples are split into fixed chunks
/// whose partial sums are reduced in order, so sequential and parallel runs
/// agree bit for bit.
fn batch_gradient(
    params: &DenoiserParams,
    schedule: &NoiseSchedule,
    batch: &[(TrainingSample, usize)],
    geometries: &[Arc<Array2<f64>>],
    exec: Exec,
) -> Result<(f64, Vec<f64>)> {
    let projections = geometries
        .iter()
        .map(|g| params.project(g))
        .collect::<Result<Vec<_>>>()?;
    let chunks: Vec<&[(TrainingSample, usize)]> = batch.chunks(CHUNK).collect();
    let parts = exec.try_map(
        &chunks,
        |chunk| -> Result<(f64, Vec<f64>, Vec<Array1<f64>>)> {
            let mut grad = vec![0.0; params.len()];
            let mut d_ghat: Vec<Array1<f64>> =
                projections.iter().map(|p| Array1::zeros(p.len())).collect();
            let mut loss = 0.0;
            for (sample, gi) in chunk.iter() {
                let ctx = params.prepare_with(&sample.condition, Some(&projections[*gi]))?;
                let x_n = schedule.forward_noise(&sample.tau0, sample.step, &sample.noise)?;
                let (out, cache) = params.forward(&ctx, &x_n, sample.step);
                if let Some(k) = out.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "denoiser output entry {k} not finite at step {} (parameter norm {:.3e})",
                        sample.step,
                        params.values.iter().map(|v| v * v).sum::<f64>().sqrt()
                    )));
                }
                let (l, d_out) = masked_l1(&out, &sample.tau0, &sample.valid);
                loss += l;
                params.backward(&ctx, &cache, &d_out, &mut grad, &mut d_ghat[*gi]);
            }
            Ok((loss, grad, d_ghat))
        },
    )?;
    let mut grad = vec![0.0; params.len()];
    let mut d_ghat: Vec<Array1<f64>> = projections.iter().map(|p| Array1::zeros(p.len())).collect();
    let mut loss = 0.0;
    for (l, g, dg) in parts {
        loss += l;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        for (acc, d) in d_ghat.iter_mut().zip(dg) {
            *acc += &d;
        }
    }
    for (g, dg) in geometries.iter().zip(&d_ghat) {
        params.backward_projection(g, dg, &mut grad);
    }
    let scale = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = Self::B1 * *m + (1.0 - Self::B1) * g;
            *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

fn clip(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Trains a fresh model: fits the normalizer, initializes parameters from
/// `cfg.seed` and runs `cfg.iterations` Adam steps.
pub fn train(
    windows: &[TrainingWindow],
    geometry: &GeometryTable,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(Checkpoint, Vec<LossRecord>)> {
    cfg.validate()?;
    let all = tensors(windows, None)?;
    let layout = WindowLayout::for_window(&windows[0]);
    let mut dcfg = DenoiserConfig::for_layout(&layout, cfg.hidden, cfg.blocks);
    dcfg.text_dim = TEXT_DIM;
    if let Some(g) = geometry.values().next() {
        dcfg.geo_points = g.nrows();
    }
    let mut ckpt = Checkpoint {
        params: DenoiserParams::init(dcfg, cfg.seed)?,
        normalizer: Normalizer::fit(&all)?,
        layout,
        schedule: ScheduleSpec {
            steps: cfg.schedule_steps,
            beta_start: cfg.beta_start,
            beta_end: cfg.beta_end,
        },
        skeleton: windows[0].skeleton.clone(),
        frame_rate: windows[0].frame_rate,
        lineage: vec![cfg.seed],
        trained_steps: 0,
    };
    let log = fine_tune(&mut ckpt, windows, geometry, cfg, exec)?;
    Ok((ckpt, log))
}

/// Continues training an existing model on new windows (normalizer, schedule
/// and architecture are kept). Appends `cfg.seed` to the seed lineage.
pub fn fine_tune(
    ckpt: &mut Checkpoint,
    windows: &[TrainingWindow],
    geometry: &GeometryTable,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<Vec<LossRecord>> {
    cfg.validate()?;
    let schedule = ckpt.schedule.build()?;
    let corpus = Corpus::new(windows, geometry, ckpt)?;
    let run = ckpt.lineage.len() as u64;
    if ckpt.trained_steps > 0 {
        ckpt.lineage.push(cfg.seed);
    }
    let mut rng = indexed_substream(cfg.seed, "train", run);
    let mut adam = Adam::new(ckpt.params.len());
    let mut log = Vec::with_capacity(cfg.iterations);
    for step in 0..cfg.iterations {
        let batch = (0..cfg.batch_size)
            .map(|_| {
                let idx = rng.random_range(0..corpus.items.len());
                corpus.draw(idx, ckpt, &schedule, cfg, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let (loss, mut grad) =
            batch_gradient(&ckpt.params, &schedule, &batch, &corpus.geometries, exec)?;
        clip(&mut grad, cfg.grad_clip);
        let progress = step as f64 / cfg.iterations.max(1) as f64;
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        let lr =
            cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cosine);
        adam.step(&mut ckpt.params.values, &grad, lr);
        ckpt.trained_steps += 1;
        if step % 100 == 0 {
            log::debug!("step {step}: loss {loss:.5}");
        }
        log.push(LossRecord {
            step,
            loss,
            learning_rate: lr,
        });
    }
    Ok(log)
}

/// Mean loss over every window using draws fixed by `seed`, so two models can
/// be compared on identical noise, steps and masks.
pub fn evaluate_windows(
    ckpt: &Checkpoint,
    windows: &[TrainingWindow],
    geometry: &GeometryTable,
    cfg: &TrainConfig,
    seed: u64,
    exec: Exec,
) -> Result<f64> {
    let schedule = ckpt.schedule.build()?;
    let corpus = Corpus::new(windows, geometry, ckpt)?;
    let mut rng = indexed_substream(seed, "evaluate", 0);
    let batch = (0..corpus.items.len())
        .map(|i| corpus.draw(i, ckpt, &schedule, cfg, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(batch_gradient(&ckpt.params, &schedule, &batch, &corpus.geometries, exec)?.0)
}
