use std::sync::Arc;

use ndarray::Array2;

use super::condition::{build_condition, ConditionBundle, EncodedCondition};
use super::model::{seeded_normal, Denoiser};
use super::schedule::{NoiseSchedule, Variance};
use super::tensor::{unpack, GeneratedKeys, Normalizer, SlotState, WindowLayout};
use crate::motion::Vec3;
use crate::rng::{indexed_substream, Rng};
use crate::{Error, Result};

/// Runs the reverse process from `τ_N ~ N(0, I)` down to `τ_0` in normalized
/// space. One noise tensor is drawn per step, including the last, so the
/// random stream does not depend on the variance choice.
pub fn sample_normalized<D: Denoiser>(
    denoiser: &D,
    cond: &EncodedCondition,
    schedule: &NoiseSchedule,
    shape: (usize, usize),
    rng: &mut Rng,
    variance: Variance,
) -> Result<Array2<f64>> {
    let ctx = denoiser.prepare(cond)?;
    let mut x = seeded_normal(shape.0, shape.1, rng);
    for n in (1..=schedule.steps()).rev() {
        let x0 = denoiser.predict_x0(&ctx, &x, n)?;
        let noise = seeded_normal(shape.0, shape.1, rng);
        x = schedule.posterior_step(&x0, &x, n, &noise, variance)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "reverse step {n} produced non-finite values"
            )));
        }
    }
    Ok(x)
}

/// Everything needed to turn a denoiser into key actions.
pub struct Sampler<'a, D> {
    pub denoiser: &'a D,
    pub normalizer: &'a Normalizer,
    pub layout: &'a WindowLayout,
    pub schedule: &'a NoiseSchedule,
    pub variance: Variance,
}

impl<D: Denoiser> Sampler<'_, D> {
    fn sample_stream(&self, bundle: &ConditionBundle, rng: &mut Rng) -> Result<GeneratedKeys> {
        let enc = bundle.encode(self.normalizer, self.layout)?;
        let shape = (self.layout.slots, self.layout.feature_dim());
        let x = sample_normalized(
            self.denoiser,
            &enc,
            self.schedule,
            shape,
            rng,
            self.variance,
        )?;
        unpack(
            self.normalizer.denormalize(x.view()).view(),
            self.layout,
            bundle.shift,
        )
    }

    /// One window of key actions; deterministic given `seed`.
    pub fn sample(&self, bundle: &ConditionBundle, seed: u64) -> Result<GeneratedKeys> {
        self.sample_stream(bundle, &mut indexed_substream(seed, "sampling", 0))
    }

    /// Long-horizon generation over `windows` overlapping windows. Window `i`
    /// starts at global slot `i·(slots − n_over)`; its first `n_over` slots
    /// are conditioned on the last `n_over` keys generated so far and are not
    /// repeated in the output, which therefore holds
    /// `windows·(slots − n_over) + n_over` keys.
    pub fn autoregressive_generate(
        &self,
        cond: &LongCondition,
        windows: usize,
        n_over: usize,
        seed: u64,
    ) -> Result<GeneratedKeys> {
        let l = self.layout.slots;
        if windows == 0 {
            return Err(Error::invalid("horizon must cover at least one window"));
        }
        if n_over == 0 || n_over >= l {
            return Err(Error::invalid(format!(
                "n_over must be in 1..{l}, got {n_over}"
            )));
        }
        let stride = l - n_over;
        let total = windows * stride + n_over;
        if let Some((s, _)) = cond.waypoints.iter().find(|(s, _)| *s >= total) {
            return Err(Error::invalid(format!(
                "waypoint slot {s} beyond horizon of {total} keys"
            )));
        }
        if let Some((s, _)) = cond.target.filter(|(s, _)| *s >= total) {
            return Err(Error::invalid(format!(
                "target slot {s} beyond horizon of {total} keys"
            )));
        }
        let mut out = GeneratedKeys {
            frames: vec![],
            states: vec![],
            contacts: vec![],
        };
        for i in 0..windows {
            let start = i * stride;
            let prefix: Vec<SlotState> = if i == 0 {
                vec![cond.initial.clone()]
            } else {
                out.states[out.len() - n_over..].to_vec()
            };
            let local = |g: usize| (g >= start + prefix.len() && g < start + l).then(|| g - start);
            let waypoints: Vec<(usize, [f64; 2])> = cond
                .waypoints
                .iter()
                .filter_map(|(g, xy)| local(*g).map(|s| (s, *xy)))
                .collect();
            let target = cond.target.and_then(|(g, p)| local(g).map(|s| (s, p)));
            let bundle = build_condition(
                cond.geometry.clone(),
                self.layout,
                &prefix,
                &waypoints,
                target,
                cond.text.clone(),
            )?;
            let w =
                self.sample_stream(&bundle, &mut indexed_substream(seed, "sampling", i as u64))?;
            if i == 0 {
                out = w;
                continue;
            }
            let base = out.frames[out.len() - n_over];
            for s in n_over..l {
                let frame = (base + w.frames[s]).max(out.frames.last().unwrap() + 1);
                out.frames.push(frame);
                out.states.push(w.states[s].clone());
                out.contacts.push(w.contacts[s]);
            }
        }
        Ok(out)
    }
}

/// Conditions for long-horizon generation, indexed by global key slot.
#[derive(Clone, Debug)]
pub struct LongCondition {
    pub geometry: Arc<Array2<f64>>,
    pub initial: SlotState,
    pub waypoints: Vec<(usize, [f64; 2])>,
    pub target: Option<(usize, Vec3)>,
    pub text: Vec<f64>,
}
