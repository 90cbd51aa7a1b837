use std::path::Path;
use std::sync::Arc;

use super::model::{DenoiserConfig, DenoiserParams};
use super::sample::Sampler;
use super::schedule::{build_schedule, NoiseSchedule, Variance};
use super::tensor::{Normalizer, WindowLayout};
use crate::format::{read_skeleton, write_skeleton, Chunk, Container, Encoding};
use crate::motion::SkeletonSpec;
use crate::{Error, Result};

/// Version of the checkpoint field layout.
pub const CHECKPOINT_VERSION: i64 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<NoiseSchedule> {
        build_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

/// A trained generator: parameters plus everything needed to interpret them.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: DenoiserParams,
    pub normalizer: Normalizer,
    pub layout: WindowLayout,
    pub schedule: ScheduleSpec,
    pub skeleton: Arc<SkeletonSpec>,
    pub frame_rate: f64,
    /// Initialization seed followed by the seed of every fine-tuning run.
    pub lineage: Vec<u64>,
    pub trained_steps: u64,
}

impl Checkpoint {
    pub fn sampler<'a>(
        &'a self,
        schedule: &'a NoiseSchedule,
        variance: Variance,
    ) -> Sampler<'a, DenoiserParams> {
        Sampler {
            denoiser: &self.params,
            normalizer: &self.normalizer,
            layout: &self.layout,
            schedule,
            variance,
        }
    }

    pub fn to_chunk(&self) -> Chunk {
        let c = &self.params.config;
        let chunk = Chunk::new("checkpoint")
            .int("checkpoint_version", CHECKPOINT_VERSION)
            .ints(
                "dims",
                [
                    c.slots,
                    c.feature_dim,
                    c.cond_dim,
                    c.hidden,
                    c.mlp,
                    c.blocks,
                    c.time_embed,
                    c.text_dim,
                    c.geo_points,
                    c.geo_rows,
                    self.layout.joint_count,
                ]
                .iter()
                .map(|&d| d as i64)
                .collect(),
            )
            .int("schedule_steps", self.schedule.steps as i64)
            .floats(
                "beta_range",
                vec![self.schedule.beta_start, self.schedule.beta_end],
            )
            .float("fps", self.frame_rate)
            .ints("lineage", self.lineage.iter().map(|&s| s as i64).collect())
            .int("trained_steps", self.trained_steps as i64)
            .floats("norm_mean", self.normalizer.mean.clone())
            .floats("norm_std", self.normalizer.std.clone());
        write_skeleton(chunk, &self.skeleton).floats("params", self.params.values.clone())
    }

    pub fn from_chunk(chunk: &Chunk) -> Result<Self> {
        if chunk.tag != "checkpoint" {
            return Err(Error::format(format!(
                "expected a `checkpoint` chunk, found `{}`",
                chunk.tag
            )));
        }
        let v = chunk.get_int("checkpoint_version")?;
        if v != CHECKPOINT_VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {v}")));
        }
        let dims: Vec<usize> = chunk
            .get_ints("dims")?
            .iter()
            .map(|&d| usize::try_from(d).map_err(|_| Error::format("negative dimension")))
            .collect::<Result<_>>()?;
        let [slots, feature_dim, cond_dim, hidden, mlp, blocks, time_embed, text_dim, geo_points, geo_rows, joints] =
            dims[..]
        else {
            return Err(Error::format("checkpoint dims must have 11 entries"));
        };
        let config = DenoiserConfig {
            slots,
            feature_dim,
            cond_dim,
            hidden,
            mlp,
            blocks,
            time_embed,
            text_dim,
            geo_points,
            geo_rows,
        };
        let layout = WindowLayout::new(joints, slots)?;
        if layout.feature_dim() != feature_dim || layout.cond_dim() != cond_dim {
            return Err(Error::format(
                "checkpoint dims disagree with the joint count",
            ));
        }
        let skeleton = read_skeleton(chunk)?;
        if skeleton.joint_count() != joints {
            return Err(Error::format("checkpoint skeleton disagrees with its dims"));
        }
        let beta = chunk.get_floats_len("beta_range", 2)?;
        let normalizer = Normalizer {
            mean: chunk.get_floats_len("norm_mean", feature_dim)?.to_vec(),
            std: chunk.get_floats_len("norm_std", feature_dim)?.to_vec(),
        };
        let ckpt = Self {
            params: DenoiserParams::from_values(config, chunk.get_floats("params")?.to_vec())?,
            normalizer,
            layout,
            schedule: ScheduleSpec {
                steps: chunk.get_usize("schedule_steps")?,
                beta_start: beta[0],
                beta_end: beta[1],
            },
            skeleton,
            frame_rate: chunk.get_float("fps")?,
            lineage: chunk
                .get_ints("lineage")?
                .iter()
                .map(|&s| s as u64)
                .collect(),
            trained_steps: chunk.get_usize("trained_steps")? as u64,
        };
        ckpt.schedule.build()?;
        Ok(ckpt)
    }

    /// Always binary: checkpoints are large and only read by this crate.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(
            path,
            Container::new(vec![self.to_chunk()]).encode(Encoding::Binary),
        )?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_chunk(Container::read_file(path)?.chunk("checkpoint")?)
    }
}
