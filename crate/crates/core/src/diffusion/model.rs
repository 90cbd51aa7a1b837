//! A small conditional sequence denoiser with hand-written backpropagation.
//!
//! Per window, the noise level goes through a sinusoidal embedding and a
//! two-layer MLP, is summed with a linear text embedding and a linear map of
//! the projected object geometry `Ĝ = P·G`, giving a conditioning vector `c`.
//! Every slot receives `[x_n | S | M | one-hot slot]` through an input layer
//! plus `c`, then `K` residual blocks alternate token mixing across slots
//! (`h += A·silu(h)·V`) with a conditioned channel MLP
//! (`h += silu(h·W1 + b1 + c·Wc)·W2 + b2`). A linear head predicts `τ̂_0`.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use super::condition::EncodedCondition;
use super::tensor::WindowLayout;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserConfig {
    pub slots: usize,
    pub feature_dim: usize,
    pub cond_dim: usize,
    pub hidden: usize,
    pub mlp: usize,
    pub blocks: usize,
    pub time_embed: usize,
    pub text_dim: usize,
    pub geo_points: usize,
    pub geo_rows: usize,
}

impl DenoiserConfig {
    pub fn for_layout(layout: &WindowLayout, hidden: usize, blocks: usize) -> Self {
        Self {
            slots: layout.slots,
            feature_dim: layout.feature_dim(),
            cond_dim: layout.cond_dim(),
            hidden,
            mlp: 2 * hidden,
            blocks,
            time_embed: 64,
            text_dim: super::condition::TEXT_DIM,
            geo_points: crate::geometry::BPS_POINTS,
            geo_rows: crate::geometry::BPS_PROJECTED,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + 2 * self.cond_dim + self.slots
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.slots,
            self.feature_dim,
            self.cond_dim,
            self.hidden,
            self.mlp,
            self.time_embed,
            self.text_dim,
            self.geo_points,
            self.geo_rows,
        ];
        if dims.contains(&0) || self.time_embed % 2 != 0 {
            return Err(Error::invalid(format!(
                "invalid denoiser dimensions {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Group {
    offset: usize,
    rows: usize,
    cols: usize,
}

impl Group {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

#[derive(Clone, Debug, PartialEq)]
struct BlockGroups {
    mix_a: Group,
    mix_v: Group,
    w1: Group,
    b1: Group,
    wc: Group,
    w2: Group,
    b2: Group,
}

/// Offsets of every parameter group inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    time_w1: Group,
    time_b1: Group,
    time_w2: Group,
    time_b2: Group,
    text_w: Group,
    text_b: Group,
    geo_proj: Group,
    geo_w: Group,
    geo_b: Group,
    in_w: Group,
    in_b: Group,
    blocks: Vec<BlockGroups>,
    out_w: Group,
    out_b: Group,
    names: Vec<(String, Group)>,
    total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &DenoiserConfig) -> Self {
        let mut names = Vec::new();
        let mut total = 0;
        let mut add = |name: String, rows: usize, cols: usize| {
            let g = Group {
                offset: total,
                rows,
                cols,
            };
            total += rows * cols;
            names.push((name, g));
            g
        };
        let h = cfg.hidden;
        let time_w1 = add("time_w1".into(), cfg.time_embed, h);
        let time_b1 = add("time_b1".into(), 1, h);
        let time_w2 = add("time_w2".into(), h, h);
        let time_b2 = add("time_b2".into(), 1, h);
        let text_w = add("text_w".into(), cfg.text_dim, h);
        let text_b = add("text_b".into(), 1, h);
        let geo_proj = add("geo_proj".into(), cfg.geo_rows, cfg.geo_points);
        let geo_w = add("geo_w".into(), 3 * cfg.geo_rows, h);
        let geo_b = add("geo_b".into(), 1, h);
        let in_w = add("in_w".into(), cfg.input_dim(), h);
        let in_b = add("in_b".into(), 1, h);
        let blocks = (0..cfg.blocks)
            .map(|k| BlockGroups {
                mix_a: add(format!("mix_a{k}"), cfg.slots, cfg.slots),
                mix_v: add(format!("mix_v{k}"), h, h),
                w1: add(format!("mlp_w1_{k}"), h, cfg.mlp),
                b1: add(format!("mlp_b1_{k}"), 1, cfg.mlp),
                wc: add(format!("mlp_c{k}"), h, cfg.mlp),
                w2: add(format!("mlp_w2_{k}"), cfg.mlp, h),
                b2: add(format!("mlp_b2_{k}"), 1, h),
            })
            .collect();
        let out_w = add("out_w".into(), h, cfg.feature_dim);
        let out_b = add("out_b".into(), 1, cfg.feature_dim);
        Self {
            time_w1,
            time_b1,
            time_w2,
            time_b2,
            text_w,
            text_b,
            geo_proj,
            geo_w,
            geo_b,
            in_w,
            in_b,
            blocks,
            out_w,
            out_b,
            names,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// `(name, flat range)` of every parameter group, in storage order.
    pub fn groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        self.names
            .iter()
            .map(|(n, g)| (n.clone(), g.offset..g.offset + g.len()))
            .collect()
    }
}

/// All learnable parameters as one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserParams {
    pub config: DenoiserConfig,
    pub values: Vec<f64>,
    layout: ParamLayout,
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Sinusoidal embedding of the step index.
pub fn step_embedding(n: usize, dim: usize) -> Array1<f64> {
    let half = dim / 2;
    let mut e = Array1::zeros(dim);
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        e[i] = (n as f64 * freq).sin();
        e[half + i] = (n as f64 * freq).cos();
    }
    e
}

/// Condition-dependent quantities shared by every step of one sample.
#[derive(Clone, Debug)]
pub struct ModelContext {
    ghat: Array1<f64>,
    z_static: Array1<f64>,
    u_rest: Array2<f64>,
    h_static: Array2<f64>,
    text: Array1<f64>,
    geometry: Arc<Array2<f64>>,
}

struct BlockCache {
    h_in: Array2<f64>,
    act: Array2<f64>,
    mixed: Array2<f64>,
    h_mid: Array2<f64>,
    pre: Array2<f64>,
    q: Array2<f64>,
}

pub(crate) struct ForwardCache {
    e: Array1<f64>,
    a1: Array1<f64>,
    u1: Array1<f64>,
    c: Array1<f64>,
    x_n: Array2<f64>,
    blocks: Vec<BlockCache>,
    h_out: Array2<f64>,
}

impl DenoiserParams {
    /// Seeded initialization: scaled Gaussian weights, zero biases, damped
    /// residual branches.
    pub fn init(config: DenoiserConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut values = vec![0.0; layout.total()];
        let mut rng = crate::rng::substream(seed, "init");
        let mut fill = |g: Group, scale: f64| {
            let normal = Normal::new(0.0, scale / (g.rows as f64).sqrt()).unwrap();
            for v in &mut values[g.offset..g.offset + g.len()] {
                *v = normal.sample(&mut rng);
            }
        };
        fill(layout.time_w1, 1.0);
        fill(layout.time_w2, 1.0);
        fill(layout.text_w, 1.0);
        fill(layout.geo_proj, 1.0);
        fill(layout.geo_w, 0.5);
        fill(layout.in_w, 1.0);
        for b in &layout.blocks {
            fill(b.mix_a, 0.3);
            fill(b.mix_v, 0.5);
            fill(b.w1, 1.0);
            fill(b.wc, 0.5);
            fill(b.w2, 0.3);
        }
        fill(layout.out_w, 0.5);
        Ok(Self {
            config,
            values,
            layout,
        })
    }

    pub fn from_values(config: DenoiserConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if values.len() != layout.total() {
            return Err(Error::shape(format!(
                "{} parameters, config needs {}",
                values.len(),
                layout.total()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(
                "parameter vector contains non-finite values".into(),
            ));
        }
        Ok(Self {
            config,
            values,
            layout,
        })
    }

    pub fn param_layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn mat(&self, g: Group) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((g.rows, g.cols), &self.values[g.offset..g.offset + g.len()])
            .unwrap()
    }

    fn row(&self, g: Group) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[g.offset..g.offset + g.len()])
    }

    /// `vec(P·G)` flattened row-major.
    pub(crate) fn project(&self, geometry: &Array2<f64>) -> Result<Array1<f64>> {
        if geometry.dim() != (self.config.geo_points, 3) {
            return Err(Error::shape(format!(
                "geometry is {:?}, denoiser expects ({}, 3)",
                geometry.dim(),
                self.config.geo_points
            )));
        }
        let g = self.mat(self.layout.geo_proj).dot(geometry);
        Ok(Array1::from_iter(g.iter().copied()))
    }

    pub fn prepare(&self, cond: &EncodedCondition) -> Result<ModelContext> {
        self.prepare_with(cond, None)
    }

    /// Context with an optional precomputed geometry projection.
    pub(crate) fn prepare_with(
        &self,
        cond: &EncodedCondition,
        ghat: Option<&Array1<f64>>,
    ) -> Result<ModelContext> {
        let cfg = &self.config;
        if cond.masked.dim() != (cfg.slots, cfg.cond_dim) || cond.mask.dim() != cond.masked.dim() {
            return Err(Error::shape(format!(
                "condition is {:?}, denoiser expects ({}, {})",
                cond.masked.dim(),
                cfg.slots,
                cfg.cond_dim
            )));
        }
        if cond.text.len() != cfg.text_dim {
            return Err(Error::shape(format!(
                "text embedding has {} values, denoiser expects {}",
                cond.text.len(),
                cfg.text_dim
            )));
        }
        let ghat = match ghat {
            Some(g) => g.clone(),
            None => self.project(&cond.geometry)?,
        };
        let l = &self.layout;
        let z_t = cond.text.dot(&self.mat(l.text_w)) + self.row(l.text_b);
        let z_g = ghat.dot(&self.mat(l.geo_w)) + self.row(l.geo_b);
        let c = cfg.cond_dim;
        let mut u_rest = Array2::zeros((cfg.slots, 2 * c + cfg.slots));
        u_rest.slice_mut(s![.., ..c]).assign(&cond.masked);
        u_rest.slice_mut(s![.., c..2 * c]).assign(&cond.mask);
        for i in 0..cfg.slots {
            u_rest[[i, 2 * c + i]] = 1.0;
        }
        let w_rest = self.mat(l.in_w).slice_move(s![cfg.feature_dim.., ..]);
        let h_static = u_rest.dot(&w_rest) + self.row(l.in_b);
        Ok(ModelContext {
            ghat,
            z_static: z_t + z_g,
            u_rest,
            h_static,
            text: cond.text.clone(),
            geometry: cond.geometry.clone(),
        })
    }

    pub(crate) fn forward(
        &self,
        ctx: &ModelContext,
        x_n: &Array2<f64>,
        n: usize,
    ) -> (Array2<f64>, ForwardCache) {
        let l = &self.layout;
        let e = step_embedding(n, self.config.time_embed);
        let a1 = e.dot(&self.mat(l.time_w1)) + self.row(l.time_b1);
        let u1 = a1.mapv(silu);
        let c = u1.dot(&self.mat(l.time_w2)) + self.row(l.time_b2) + &ctx.z_static;
        let w_x = self
            .mat(l.in_w)
            .slice_move(s![..self.config.feature_dim, ..]);
        let mut h = x_n.dot(&w_x) + &ctx.h_static + &c;
        let mut blocks = Vec::with_capacity(l.blocks.len());
        for b in &l.blocks {
            let act = h.mapv(silu);
            let mixed = self.mat(b.mix_a).dot(&act);
            let h_mid = &h + &mixed.dot(&self.mat(b.mix_v));
            let cw = c.dot(&self.mat(b.wc)) + self.row(b.b1);
            let pre = h_mid.dot(&self.mat(b.w1)) + &cw;
            let q = pre.mapv(silu);
            let h_next = &h_mid + &q.dot(&self.mat(b.w2)) + self.row(b.b2);
            blocks.push(BlockCache {
                h_in: h,
                act,
                mixed,
                h_mid,
                pre,
                q,
            });
            h = h_next;
        }
        let out = h.dot(&self.mat(l.out_w)) + self.row(l.out_b);
        (
            out,
            ForwardCache {
                e,
                a1,
                u1,
                c,
                x_n: x_n.clone(),
                blocks,
                h_out: h,
            },
        )
    }

    /// Accumulates `∂loss/∂θ` into `grad` given `∂loss/∂out`. The gradient with
    /// respect to `vec(Ĝ)` is added to `d_ghat` instead of being pushed
    /// through the projection, so callers can batch that product per object.
    pub(crate) fn backward(
        &self,
        ctx: &ModelContext,
        cache: &ForwardCache,
        d_out: &Array2<f64>,
        grad: &mut [f64],
        d_ghat: &mut Array1<f64>,
    ) {
        let l = &self.layout;
        let cfg = &self.config;
        acc(grad, l.out_w, &cache.h_out.t().dot(d_out));
        acc_row(grad, l.out_b, &d_out.sum_axis(Axis(0)));
        let mut dh = d_out.dot(&self.mat(l.out_w).t());
        let mut dc = Array1::<f64>::zeros(cfg.hidden);
        for (b, bc) in l.blocks.iter().zip(&cache.blocks).rev() {
            acc(grad, b.w2, &bc.q.t().dot(&dh));
            acc_row(grad, b.b2, &dh.sum_axis(Axis(0)));
            let dq = dh.dot(&self.mat(b.w2).t());
            let dpre = &dq * &bc.pre.mapv(silu_grad);
            acc(grad, b.w1, &bc.h_mid.t().dot(&dpre));
            let dpre_sum = dpre.sum_axis(Axis(0));
            acc_row(grad, b.b1, &dpre_sum);
            acc_outer(grad, b.wc, &cache.c, &dpre_sum);
            dc += &self.mat(b.wc).dot(&dpre_sum);
            let dh_mid = &dh + &dpre.dot(&self.mat(b.w1).t());
            acc(grad, b.mix_v, &bc.mixed.t().dot(&dh_mid));
            let dmixed = dh_mid.dot(&self.mat(b.mix_v).t());
            acc(grad, b.mix_a, &dmixed.dot(&bc.act.t()));
            let dact = self.mat(b.mix_a).t().dot(&dmixed);
            dh = &dh_mid + &(&dact * &bc.h_in.mapv(silu_grad));
        }
        // input layer: rows [0, F) see x_n, the rest see the static inputs
        let dw_x = cache.x_n.t().dot(&dh);
        let dw_rest = ctx.u_rest.t().dot(&dh);
        let f = cfg.feature_dim;
        let h = cfg.hidden;
        let off = l.in_w.offset;
        for (dst, src) in grad[off..off + f * h].iter_mut().zip(dw_x.iter()) {
            *dst += src;
        }
        for (dst, src) in grad[off + f * h..off + l.in_w.len()]
            .iter_mut()
            .zip(dw_rest.iter())
        {
            *dst += src;
        }
        let dh_sum = dh.sum_axis(Axis(0));
        acc_row(grad, l.in_b, &dh_sum);
        dc += &dh_sum;
        acc_outer(grad, l.text_w, &ctx.text, &dc);
        acc_row(grad, l.text_b, &dc);
        acc_outer(grad, l.geo_w, &ctx.ghat, &dc);
        acc_row(grad, l.geo_b, &dc);
        *d_ghat += &self.mat(l.geo_w).dot(&dc);
        acc_outer(grad, l.time_w2, &cache.u1, &dc);
        acc_row(grad, l.time_b2, &dc);
        let da1 = self.mat(l.time_w2).dot(&dc) * cache.a1.mapv(silu_grad);
        acc_outer(grad, l.time_w1, &cache.e, &da1);
        acc_row(grad, l.time_b1, &da1);
    }

    /// Adds `dĜ·Gᵀ` to the projection gradient.
    pub(crate) fn backward_projection(
        &self,
        geometry: &Array2<f64>,
        d_ghat: &Array1<f64>,
        grad: &mut [f64],
    ) {
        let r = self.config.geo_rows;
        let dg = ArrayView2::from_shape((r, 3), d_ghat.as_slice().unwrap()).unwrap();
        acc(grad, self.layout.geo_proj, &dg.dot(&geometry.t()));
    }

    pub fn context_geometry<'a>(&self, ctx: &'a ModelContext) -> &'a Arc<Array2<f64>> {
        &ctx.geometry
    }
}

fn acc(grad: &mut [f64], g: Group, m: &Array2<f64>) {
    debug_assert_eq!(m.dim(), (g.rows, g.cols));
    for (dst, src) in grad[g.offset..g.offset + g.len()].iter_mut().zip(m.iter()) {
        *dst += src;
    }
}

fn acc_row(grad: &mut [f64], g: Group, v: &Array1<f64>) {
    for (dst, src) in grad[g.offset..g.offset + g.len()].iter_mut().zip(v.iter()) {
        *dst += src;
    }
}

fn acc_outer(grad: &mut [f64], g: Group, a: &Array1<f64>, b: &Array1<f64>) {
    let dst = &mut grad[g.offset..g.offset + g.len()];
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        let row = &mut dst[i * g.cols..(i + 1) * g.cols];
        for (d, bj) in row.iter_mut().zip(b.iter()) {
            *d += ai * bj;
        }
    }
}

/// Something that predicts the clean sample from a noisy one.
pub trait Denoiser {
    type Context;
    fn prepare(&self, cond: &EncodedCondition) -> Result<Self::Context>;
    fn predict_x0(&self, ctx: &Self::Context, x_n: &Array2<f64>, n: usize) -> Result<Array2<f64>>;
}

impl Denoiser for DenoiserParams {
    type Context = ModelContext;

    fn prepare(&self, cond: &EncodedCondition) -> Result<ModelContext> {
        DenoiserParams::prepare(self, cond)
    }

    fn predict_x0(&self, ctx: &ModelContext, x_n: &Array2<f64>, n: usize) -> Result<Array2<f64>> {
        if x_n.dim() != (self.config.slots, self.config.feature_dim) {
            return Err(Error::shape(format!("noisy sample is {:?}", x_n.dim())));
        }
        let (out, _) = self.forward(ctx, x_n, n);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "denoiser output at step {n} is not finite"
            )));
        }
        Ok(out)
    }
}

/// Oracle denoiser that always returns the same clean sample.
#[derive(Clone, Debug)]
pub struct FixedDenoiser(pub Array2<f64>);

impl Denoiser for FixedDenoiser {
    type Context = ();

    fn prepare(&self, _: &EncodedCondition) -> Result<()> {
        Ok(())
    }

    fn predict_x0(&self, _: &(), _: &Array2<f64>, _: usize) -> Result<Array2<f64>> {
        Ok(self.0.clone())
    }
}

/// Mean absolute error over valid slots and its gradient with respect to the output.
pub(crate) fn masked_l1(
    out: &Array2<f64>,
    target: &Array2<f64>,
    valid: &[bool],
) -> (f64, Array2<f64>) {
    let rows = valid.iter().filter(|v| **v).count().max(1);
    let denom = (rows * out.ncols()) as f64;
    let mut loss = 0.0;
    let mut d = Array2::zeros(out.dim());
    for (s, &v) in valid.iter().enumerate() {
        if !v {
            continue;
        }
        for k in 0..out.ncols() {
            let diff = out[[s, k]] - target[[s, k]];
            loss += diff.abs();
            d[[s, k]] = if diff > 0.0 {
                1.0 / denom
            } else if diff < 0.0 {
                -1.0 / denom
            } else {
                0.0
            };
        }
    }
    (loss / denom, d)
}

/// One training example after noising: everything the loss needs.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub tau0: Array2<f64>,
    pub valid: Vec<bool>,
    pub step: usize,
    pub noise: Array2<f64>,
    pub condition: EncodedCondition,
}

/// Loss of one sample (given `x_n` already formed) and its exact gradient.
pub fn training_loss(
    params: &DenoiserParams,
    tau0: &Array2<f64>,
    x_n: &Array2<f64>,
    n: usize,
    cond: &EncodedCondition,
    valid: &[bool],
) -> Result<(f64, Vec<f64>)> {
    let ctx = params.prepare(cond)?;
    let (out, cache) = params.forward(&ctx, x_n, n);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "denoiser output at step {n} is not finite"
        )));
    }
    let (loss, d_out) = masked_l1(&out, tau0, valid);
    let mut grad = vec![0.0; params.len()];
    let mut d_ghat = Array1::zeros(ctx.ghat.len());
    params.backward(&ctx, &cache, &d_out, &mut grad, &mut d_ghat);
    params.backward_projection(&cond.geometry, &d_ghat, &mut grad);
    Ok((loss, grad))
}

/// Loss value only.
pub fn evaluate_loss(
    params: &DenoiserParams,
    tau0: &Array2<f64>,
    x_n: &Array2<f64>,
    n: usize,
    cond: &EncodedCondition,
    valid: &[bool],
) -> Result<f64> {
    let ctx = params.prepare(cond)?;
    let (out, _) = params.forward(&ctx, x_n, n);
    Ok(masked_l1(&out, tau0, valid).0)
}

pub(crate) fn seeded_normal(rows: usize, cols: usize, rng: &mut crate::rng::Rng) -> Array2<f64> {
    let normal = rand_distr::StandardNormal;
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

/// Random parameters and inputs of the right shapes, for checks.
#[doc(hidden)]
pub fn random_problem(
    cfg: &DenoiserConfig,
    seed: u64,
) -> (DenoiserParams, Array2<f64>, Array2<f64>, EncodedCondition) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut params = DenoiserParams::init(cfg.clone(), seed).unwrap();
    // biases start at zero; perturb them so their gradients are generic
    for v in params.values.iter_mut() {
        *v += 0.05
            * <rand_distr::StandardNormal as Distribution<f64>>::sample(
                &rand_distr::StandardNormal,
                &mut rng,
            );
    }
    let tau0 = seeded_normal(cfg.slots, cfg.feature_dim, &mut rng);
    let x_n = seeded_normal(cfg.slots, cfg.feature_dim, &mut rng);
    let mask = Array2::from_shape_fn((cfg.slots, cfg.cond_dim), |(i, k)| {
        ((i + k) % 3 == 0) as u8 as f64
    });
    let masked = seeded_normal(cfg.slots, cfg.cond_dim, &mut rng) * &mask;
    let text = seeded_normal(1, cfg.text_dim, &mut rng).row(0).to_owned();
    let geometry = Arc::new(seeded_normal(cfg.geo_points, 3, &mut rng) * 0.3);
    (
        params,
        tau0,
        x_n,
        EncodedCondition {
            masked,
            mask,
            text,
            geometry,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> DenoiserConfig {
        DenoiserConfig {
            slots: 4,
            feature_dim: 7,
            cond_dim: 5,
            hidden: 8,
            mlp: 12,
            blocks: 2,
            time_embed: 6,
            text_dim: 9,
            geo_points: 10,
            geo_rows: 4,
        }
    }

    #[test]
    fn loss_identities() {
        let t = ndarray::array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(masked_l1(&t, &t, &[true, true]).0, 0.0);
        assert_eq!(masked_l1(&(&t + 1.0), &t, &[true, true]).0, 1.0);
        let mut u = t.clone();
        u[[1, 0]] = 100.0;
        assert_eq!(masked_l1(&u, &t, &[true, false]).0, 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = small_config();
        let (mut params, tau0, x_n, cond) = random_problem(&cfg, 3);
        let valid = [true, true, true, false];
        let (_, grad) = training_loss(&params, &tau0, &x_n, 17, &cond, &valid).unwrap();
        let h = 1e-5;
        let mut worst = 0.0f64;
        for (name, range) in params.param_layout().groups() {
            for k in range.clone().step_by((range.len() / 5).max(1)) {
                let orig = params.values[k];
                params.values[k] = orig + h;
                let lp = evaluate_loss(&params, &tau0, &x_n, 17, &cond, &valid).unwrap();
                params.values[k] = orig - h;
                let lm = evaluate_loss(&params, &tau0, &x_n, 17, &cond, &valid).unwrap();
                params.values[k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(rel < 1e-4, "{name}[{k}]: analytic {} fd {fd}", grad[k]);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4);
    }

    #[test]
    fn from_values_validates() {
        let cfg = small_config();
        let p = DenoiserParams::init(cfg.clone(), 1).unwrap();
        assert_eq!(p, DenoiserParams::init(cfg.clone(), 1).unwrap());
        assert!(DenoiserParams::from_values(cfg.clone(), vec![0.0; 3]).is_err());
        let mut v = p.values.clone();
        v[0] = f64::NAN;
        assert!(DenoiserParams::from_values(cfg, v).is_err());
    }
}
