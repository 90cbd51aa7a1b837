use ndarray::Array2;

use crate::{Error, Result};

/// Linear β schedule with the derived DDPM quantities. Step `n` runs from 1
/// to `N`; `alpha_bar(0) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// Reverse-process variance choice.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Variance {
    /// `β̃_n = (1 − ᾱ_{n−1}) / (1 − ᾱ_n) · β_n`.
    #[default]
    Posterior,
    /// No sampling noise: a deterministic sampler.
    Zero,
}

pub fn build_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::invalid("schedule needs at least one step"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::invalid(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}..{beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(steps + 1);
    alpha_bars.push(1.0);
    for b in &betas {
        let prev = *alpha_bars.last().unwrap();
        alpha_bars.push(prev * (1.0 - b));
    }
    Ok(NoiseSchedule { betas, alpha_bars })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.steps() {
            return Err(Error::invalid(format!(
                "step {n} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }

    pub fn beta(&self, n: usize) -> f64 {
        self.betas[n - 1]
    }

    pub fn alpha(&self, n: usize) -> f64 {
        1.0 - self.betas[n - 1]
    }

    pub fn alpha_bar(&self, n: usize) -> f64 {
        self.alpha_bars[n]
    }

    pub fn posterior_variance(&self, n: usize) -> f64 {
        (1.0 - self.alpha_bars[n - 1]) / (1.0 - self.alpha_bars[n]) * self.beta(n)
    }

    /// Coefficients of `τ̂_0` and `τ_n` in the posterior mean.
    pub fn posterior_coefficients(&self, n: usize) -> (f64, f64) {
        let denom = 1.0 - self.alpha_bars[n];
        (
            self.alpha_bars[n - 1].sqrt() * self.beta(n) / denom,
            self.alpha(n).sqrt() * (1.0 - self.alpha_bars[n - 1]) / denom,
        )
    }

    /// Closed-form marginal `τ_n = √ᾱ_n·τ_0 + √(1−ᾱ_n)·ε`.
    pub fn forward_noise(
        &self,
        tau0: &Array2<f64>,
        n: usize,
        noise: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        self.check(n)?;
        check_same_shape(tau0, noise)?;
        let ab = self.alpha_bars[n];
        Ok(tau0 * ab.sqrt() + noise * (1.0 - ab).sqrt())
    }

    /// One forward transition `τ_n = √α_n·τ_{n−1} + √β_n·ε`.
    pub fn forward_step(
        &self,
        prev: &Array2<f64>,
        n: usize,
        noise: &Array2<f64>,
    ) -> Result<Array2<f64>> {
        self.check(n)?;
        check_same_shape(prev, noise)?;
        Ok(prev * self.alpha(n).sqrt() + noise * self.beta(n).sqrt())
    }

    /// Posterior step from a predicted clean sample; no noise is added at `n = 1`.
    pub fn posterior_step(
        &self,
        x0_hat: &Array2<f64>,
        x_n: &Array2<f64>,
        n: usize,
        noise: &Array2<f64>,
        variance: Variance,
    ) -> Result<Array2<f64>> {
        self.check(n)?;
        check_same_shape(x0_hat, x_n)?;
        check_same_shape(x_n, noise)?;
        let (c1, c2) = self.posterior_coefficients(n);
        let mut out = x0_hat * c1 + x_n * c2;
        if n > 1 && variance == Variance::Posterior {
            out.scaled_add(self.posterior_variance(n).sqrt(), noise);
        }
        Ok(out)
    }
}

fn check_same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!(
            "tensor shapes differ: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}
