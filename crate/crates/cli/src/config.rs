//! Run configuration: one TOML file, overridden by environment variables
//! (paths only) and then by command-line flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

/// Environment variables that override `[paths]` entries.
pub const PATH_ENV: [(&str, &str); 7] = [
    ("HOIKIT_MOTIONS", "motions"),
    ("HOIKIT_MESHES", "meshes"),
    ("HOIKIT_OUTPUT", "output"),
    ("HOIKIT_WINDOWS", "windows"),
    ("HOIKIT_GENERATED", "generated"),
    ("HOIKIT_CHECKPOINT", "checkpoint"),
    ("HOIKIT_INIT_CHECKPOINT", "init_checkpoint"),
];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Use the thread pool where the library supports it (no effect on results).
    pub parallel: bool,
    pub paths: Paths,
    pub synth: SynthSection,
    pub keys: KeySection,
    pub bps: BpsSection,
    pub diffusion: DiffusionSection,
    pub sample: SampleSection,
    pub rollout: RolloutSection,
    pub metrics: MetricsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            parallel: true,
            paths: Paths::default(),
            synth: SynthSection::default(),
            keys: KeySection::default(),
            bps: BpsSection::default(),
            diffusion: DiffusionSection::default(),
            sample: SampleSection::default(),
            rollout: RolloutSection::default(),
            metrics: MetricsSection::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory of motion containers (`.hoi` / `.hoit`).
    pub motions: PathBuf,
    /// Directory of `<object>.obj` meshes.
    pub meshes: PathBuf,
    pub output: PathBuf,
    /// Training windows file; when set, `train` uses it instead of the corpus.
    pub windows: Option<PathBuf>,
    /// Generated corpus for `metrics` (default `<output>/samples`).
    pub generated: Option<PathBuf>,
    /// Model read by `sample` / `genlong` (default `<output>/model.ckpt`).
    pub checkpoint: Option<PathBuf>,
    /// Model to fine-tune in `train`.
    pub init_checkpoint: Option<PathBuf>,
    /// Dense motions replayed by `rollout` (default: `motions`).
    pub rollout_source: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            motions: "data/motions".into(),
            meshes: "data/meshes".into(),
            output: "out".into(),
            windows: None,
            generated: None,
            checkpoint: None,
            init_checkpoint: None,
            rollout_source: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub sequences: usize,
    pub frame_rate: f64,
    pub walk_speed: f64,
    pub contact_threshold: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = hoikit::synth::SynthConfig::default();
        Self {
            sequences: 220,
            frame_rate: d.frame_rate,
            walk_speed: d.walk_speed,
            contact_threshold: d.contact_threshold,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeySection {
    pub epsilon: f64,
    /// Per-joint weights; default 2 for hands and feet, 1 elsewhere.
    pub joint_weights: Option<Vec<f64>>,
    pub object_weight: Option<f64>,
    /// Keys per training window (excluding the initial state).
    pub window_keys: usize,
    pub stride: usize,
}

impl Default for KeySection {
    fn default() -> Self {
        Self {
            epsilon: hoikit::keyaction::DEFAULT_EPSILON,
            joint_weights: None,
            object_weight: None,
            window_keys: 8,
            stride: 4,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BpsSection {
    pub seed: u64,
    pub radius: f64,
    pub points: usize,
}

impl Default for BpsSection {
    fn default() -> Self {
        Self {
            seed: 0,
            radius: 1.0,
            points: hoikit::geometry::BPS_POINTS,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub hidden: usize,
    pub blocks: usize,
    pub iterations: usize,
    /// When set, overrides `iterations` with enough steps to draw every
    /// window this many times on average.
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Initial learning rate when continuing from `paths.init_checkpoint`.
    /// Adam's first steps move every weight by about this much, so it is kept
    /// well below the rate a converged model ended its own schedule with.
    pub fine_tune_learning_rate: f64,
    pub final_lr_fraction: f64,
    pub n_over: usize,
    pub waypoint_prob: f64,
    pub target_prob: f64,
    pub grad_clip: f64,
    /// Trailing corpus sequences kept out of training and used as conditions.
    pub holdout: usize,
    /// `posterior` or `zero`.
    pub variance: String,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let t = hoikit::diffusion::TrainConfig::default();
        Self {
            steps: t.schedule_steps,
            beta_start: t.beta_start,
            beta_end: t.beta_end,
            hidden: t.hidden,
            blocks: t.blocks,
            iterations: t.iterations,
            epochs: None,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            fine_tune_learning_rate: 1e-5,
            final_lr_fraction: t.final_lr_fraction,
            n_over: t.n_over,
            waypoint_prob: t.waypoint_prob,
            target_prob: t.target_prob,
            grad_clip: t.grad_clip,
            holdout: 20,
            variance: "posterior".into(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSection {
    /// Sequences to condition on; default: the held-out tail of the corpus.
    pub sequences: Option<Vec<String>>,
    /// Windows generated per sequence by `genlong`.
    pub windows: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub start: usize,
    pub end: Option<usize>,
    /// `object-offset`, `human-offset` or `drop-contacts`.
    pub kind: String,
    #[serde(default)]
    pub offset: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RolloutSection {
    pub sigma: f64,
    pub faults: Vec<FaultSpec>,
    pub alpha: f64,
    /// `[w_jp, w_jr, w_jv, w_jω, w_jc]`
    pub human_weights: [f64; 5],
    /// `[w_op, w_or, w_ov, w_oω]`
    pub object_weights: [f64; 4],
    /// Default: the skeleton's key joints.
    pub key_joints: Option<Vec<usize>>,
    pub object_deviation: f64,
    pub missing_contact_frames: usize,
    pub humanoid_drift: f64,
    pub target_radius: f64,
}

impl Default for RolloutSection {
    fn default() -> Self {
        let t = hoikit::tracking::TerminationConfig::default();
        Self {
            sigma: 0.0,
            faults: vec![],
            alpha: 0.5,
            human_weights: [1.0; 5],
            object_weights: [1.0; 4],
            key_joints: None,
            object_deviation: t.object_deviation,
            missing_contact_frames: t.missing_contact_frames,
            humanoid_drift: t.humanoid_drift,
            target_radius: hoikit::tracking::SuccessCriteria::default().target_radius,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub h_max: f64,
    pub contact_height: f64,
    pub root_relative: bool,
    /// `table` or `csv` for `report`.
    pub format: String,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let f = hoikit::metrics::FootConfig::default();
        Self {
            h_max: f.h_max,
            contact_height: f.contact_height,
            root_relative: true,
            format: "table".into(),
        }
    }
}

/// Command-line overrides, applied last.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    /// `section.key=value` assignments; values are parsed as TOML, falling
    /// back to a plain string.
    pub set: Vec<String>,
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::validation(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::validation(format!("{p} in {key:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Loads `path` and applies environment and flag overrides. Relative paths
    /// are resolved against the config file's directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        let env: Vec<(String, String)> = PATH_ENV
            .iter()
            .filter_map(|(var, key)| std::env::var(var).ok().map(|v| (key.to_string(), v)))
            .collect();
        Self::from_parts(
            &text,
            path.parent().unwrap_or(Path::new(".")),
            &env,
            overrides,
        )
    }

    /// `env` holds `(paths key, value)` pairs.
    pub fn from_parts(
        text: &str,
        base: &Path,
        env: &[(String, String)],
        o: &Overrides,
    ) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e| CliError::validation(format!("config is not valid TOML: {e}")))?;
        for (key, v) in env {
            set_dotted(
                &mut table,
                &format!("paths.{key}"),
                toml::Value::String(v.clone()),
            )?;
        }
        for s in &o.set {
            let (k, v) = s.split_once('=').ok_or_else(|| {
                CliError::validation(format!("--set expects key=value, got {s:?}"))
            })?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        if let Some(seed) = o.seed {
            table.insert("seed".into(), toml::Value::Integer(seed as i64));
        }
        if let Some(out) = &o.output {
            set_dotted(
                &mut table,
                "paths.output",
                toml::Value::String(out.display().to_string()),
            )?;
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::validation(format!("invalid config: {e}")))?;
        cfg.paths.resolve(base);
        Ok(cfg)
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| {
            CliError::validation("this command needs `seed` in the config or --seed")
        })
    }

    pub fn output(&self, rel: &str) -> PathBuf {
        self.paths.output.join(rel)
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.output("model.ckpt"))
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.motions);
        fix(&mut self.meshes);
        fix(&mut self.output);
        for p in [
            &mut self.windows,
            &mut self.generated,
            &mut self.checkpoint,
            &mut self.init_checkpoint,
            &mut self.rollout_source,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let text = "seed = 3\n[paths]\nmotions = \"m\"\noutput = \"o\"\n[keys]\nepsilon = 0.1\n";
        let base = Path::new("/base");
        let c = RunConfig::from_parts(text, base, &[], &Overrides::default()).unwrap();
        assert_eq!((c.seed, c.keys.epsilon), (Some(3), 0.1));
        assert_eq!(c.paths.motions, PathBuf::from("/base/m"));
        assert_eq!(c.keys.window_keys, 8);

        let env = vec![("output".to_string(), "/env/out".to_string())];
        let c = RunConfig::from_parts(text, base, &env, &Overrides::default()).unwrap();
        assert_eq!(c.paths.output, PathBuf::from("/env/out"));

        let o = Overrides {
            seed: Some(9),
            output: Some("/flag".into()),
            set: vec!["keys.epsilon=0.02".into(), "metrics.format=csv".into()],
        };
        let c = RunConfig::from_parts(text, base, &env, &o).unwrap();
        assert_eq!(
            (c.seed, c.keys.epsilon, c.metrics.format.as_str()),
            (Some(9), 0.02, "csv")
        );
        assert_eq!(c.paths.output, PathBuf::from("/flag"));
    }

    #[test]
    fn rejects_unknown_keys() {
        let e = RunConfig::from_parts(
            "[keys]\nepsilonn = 1\n",
            Path::new("."),
            &[],
            &Overrides::default(),
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(
            RunConfig::from_parts("seed = \"x\"", Path::new("."), &[], &Overrides::default())
                .is_err()
        );
        assert!(
            RunConfig::from_parts("", Path::new("."), &[], &Overrides::default())
                .unwrap()
                .require_seed()
                .is_err()
        );
    }
}
