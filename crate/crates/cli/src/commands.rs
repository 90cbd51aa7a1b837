//! Subcommand implementations. Each command loads and checks every input,
//! computes its results in memory and only then writes files.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use hoikit::diffusion::{
    build_condition, evaluate_windows, fine_tune, toy_text_embed, train, Checkpoint, GeneratedKeys,
    GeometryTable, LongCondition, SlotState, TrainConfig, Variance, WindowLayout,
};
use hoikit::format::{sequence_chunk, Container};
use hoikit::geometry::{encode_bps_with, sample_basis_points, BasisPointSet, TriangleMesh};
use hoikit::keyaction::{
    build_training_windows, extract_key_actions, interpolate, reconstruction_error, windows_chunk,
    windows_from_chunk, JointWeights, KeyActionSet, TrainingWindow,
};
use hoikit::metrics::{
    emit_report, generation_metrics, parse_csv, tracking_metrics, FootConfig, GenerationInput,
    GenerationMetrics, ReportFormat, TrackingMetricConfig, TrackingMetrics,
};
use hoikit::motion::{HoiSequence, SequenceMeta, SkeletonSpec, Vec3};
use hoikit::rng::fnv1a;
use hoikit::synth::{box_catalog, synth_dataset, SynthConfig};
use hoikit::tracking::{
    filter_successful_rollouts, oracle_rollout, Fault, FaultKind, NoiseModel, RewardWeights,
    RolloutConfig, RolloutLog, SuccessCriteria, TerminationConfig, WindowSpec,
};
use hoikit::Exec;

use crate::config::RunConfig;
use crate::error::{CliError, Context};
use crate::io::{
    list_files, load_corpus, load_meshes, read_container, require_file, stem, Outputs,
};

/// What a command produced: a human-readable summary and the files written.
#[derive(Debug)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn exec(cfg: &RunConfig) -> Exec {
    if cfg.parallel {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

/// Per-item seed, independent of corpus order.
fn item_seed(seed: u64, name: &str) -> u64 {
    seed ^ fnv1a(name.as_bytes())
}

fn joint_weights(cfg: &RunConfig, skeleton: &SkeletonSpec) -> Result<JointWeights, CliError> {
    let mut w = JointWeights::default_for(skeleton);
    if let Some(j) = &cfg.keys.joint_weights {
        if j.len() != skeleton.joint_count() {
            return Err(CliError::validation(format!(
                "keys.joint_weights has {} entries for {} joints",
                j.len(),
                skeleton.joint_count()
            )));
        }
        w.joints = j.clone();
    }
    if let Some(o) = cfg.keys.object_weight {
        w.object = o;
    }
    w.validate().invalid("keys weights")?;
    Ok(w)
}

fn check_epsilon(cfg: &RunConfig) -> Result<f64, CliError> {
    let e = cfg.keys.epsilon;
    if !(e > 0.0 && e.is_finite()) {
        return Err(CliError::validation(format!(
            "keys.epsilon must be positive, got {e}"
        )));
    }
    Ok(e)
}

fn same_skeleton(corpus: &[(String, HoiSequence)]) -> Result<Arc<SkeletonSpec>, CliError> {
    let sk = corpus[0].1.skeleton().clone();
    if let Some((name, _)) = corpus.iter().find(|(_, s)| s.skeleton() != &sk) {
        return Err(CliError::validation(format!(
            "{name} uses a different skeleton from {}",
            corpus[0].0
        )));
    }
    Ok(sk)
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).failed("csv")?;
    for r in rows {
        w.write_record(r).failed("csv")?;
    }
    String::from_utf8(w.into_inner().failed("csv")?).failed("csv")
}

pub fn synth(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let s = &cfg.synth;
    let sc = SynthConfig {
        sequences: s.sequences,
        seed,
        frame_rate: s.frame_rate,
        walk_speed: s.walk_speed,
        contact_threshold: s.contact_threshold,
    };
    if sc.sequences == 0 {
        return Err(CliError::validation("synth.sequences must be at least 1"));
    }
    let data = synth_dataset(&sc, exec(cfg)).invalid("synth config")?;
    let mut out = Outputs::default();
    for seq in &data {
        seq.validate().failed(&seq.meta.name)?;
        out.container(
            cfg.paths.motions.join(format!("{}.hoi", seq.meta.name)),
            Container::new(vec![sequence_chunk(seq)]),
        );
    }
    for (name, mesh) in box_catalog() {
        out.text(
            cfg.paths.meshes.join(format!("{name}.obj")),
            mesh.to_obj_string(),
        );
    }
    let frames: usize = data.iter().map(|s| s.len()).sum();
    Ok(Report {
        summary: format!("generated {} sequences ({frames} frames)", data.len()),
        files: out.write()?,
    })
}

fn extract_all(
    cfg: &RunConfig,
    corpus: &[(String, HoiSequence)],
    weights: &JointWeights,
) -> Result<Vec<KeyActionSet>, CliError> {
    let eps = check_epsilon(cfg)?;
    exec(cfg)
        .try_map(corpus, |(_, s)| extract_key_actions(s, eps, weights))
        .failed("key extraction")
}

pub fn extract(cfg: &RunConfig) -> Result<Report, CliError> {
    let corpus = load_corpus(&cfg.paths.motions)?;
    let sk = same_skeleton(&corpus)?;
    let weights = joint_weights(cfg, &sk)?;
    let eps = check_epsilon(cfg)?;
    let keys = extract_all(cfg, &corpus, &weights)?;
    let mut out = Outputs::default();
    let mut rows = Vec::new();
    for ((name, seq), k) in corpus.iter().zip(&keys) {
        let recon = interpolate(k).failed(name)?;
        let report = reconstruction_error(seq, &recon, &weights).failed(name)?;
        if report.max_error > eps
            || k.indices.first() != Some(&0)
            || k.indices.last() != Some(&(seq.len() - 1))
        {
            return Err(CliError::runtime(format!(
                "{name}: key set misses its bound (error {} > {eps} or endpoints missing)",
                report.max_error
            )));
        }
        rows.push(vec![
            name.clone(),
            seq.len().to_string(),
            k.len().to_string(),
            report.max_error.to_string(),
        ]);
        out.container(
            cfg.output(&format!("keys/{name}.keys")),
            Container::new(vec![k.to_chunk()]),
        );
    }
    let total: usize = keys.iter().map(|k| k.len()).sum();
    out.text(
        cfg.output("keys/summary.csv"),
        csv_text(&["name", "frames", "keys", "max_error"], rows)?,
    );
    Ok(Report {
        summary: format!("extracted {total} keys from {} sequences", corpus.len()),
        files: out.write()?,
    })
}

pub fn interp(cfg: &RunConfig) -> Result<Report, CliError> {
    let dir = cfg.output("keys");
    let files = list_files(&dir, &["keys"])?;
    if files.is_empty() {
        return Err(CliError::validation(format!(
            "no key sets in {}",
            dir.display()
        )));
    }
    let mut out = Outputs::default();
    for p in &files {
        let c = read_container(p)?;
        let keys = c
            .chunk("keyset")
            .and_then(KeyActionSet::from_chunk)
            .invalid(p.display())?;
        let dense = interpolate(&keys).failed(p.display())?;
        out.container(
            cfg.output(&format!("interp/{}.hoi", stem(p))),
            Container::new(vec![sequence_chunk(&dense)]),
        );
    }
    Ok(Report {
        summary: format!("interpolated {} key sets", files.len()),
        files: out.write()?,
    })
}

fn basis(cfg: &RunConfig) -> Result<BasisPointSet, CliError> {
    sample_basis_points(cfg.bps.seed, cfg.bps.points, cfg.bps.radius).invalid("bps settings")
}

fn geometry(
    cfg: &RunConfig,
    meshes: &BTreeMap<String, TriangleMesh>,
) -> Result<(GeometryTable, Container), CliError> {
    let basis = basis(cfg)?;
    let mut table = GeometryTable::new();
    let mut chunks = Vec::new();
    for (name, mesh) in meshes {
        let f = encode_bps_with(mesh, &basis, exec(cfg)).invalid(format!("mesh {name}"))?;
        chunks.push(f.to_chunk(name, &basis));
        table.insert(name.clone(), Arc::new(f.to_array()));
    }
    Ok((table, Container::new(chunks)))
}

fn train_config(cfg: &RunConfig, seed: u64, windows: usize) -> Result<TrainConfig, CliError> {
    let d = &cfg.diffusion;
    let mut tc = TrainConfig {
        hidden: d.hidden,
        blocks: d.blocks,
        iterations: d.iterations,
        batch_size: d.batch_size,
        learning_rate: d.learning_rate,
        final_lr_fraction: d.final_lr_fraction,
        schedule_steps: d.steps,
        beta_start: d.beta_start,
        beta_end: d.beta_end,
        seed,
        n_over: d.n_over,
        waypoint_prob: d.waypoint_prob,
        target_prob: d.target_prob,
        grad_clip: d.grad_clip,
    };
    if let Some(e) = d.epochs {
        tc.iterations = e * windows.div_ceil(d.batch_size.max(1));
    }
    tc.validate().invalid("diffusion settings")?;
    Ok(tc)
}

/// Training split: all but the trailing `holdout` sequences.
fn split(cfg: &RunConfig, n: usize) -> Result<usize, CliError> {
    let h = cfg.diffusion.holdout;
    if h >= n {
        return Err(CliError::validation(format!(
            "diffusion.holdout = {h} leaves no training sequences out of {n}"
        )));
    }
    Ok(n - h)
}

fn corpus_windows(cfg: &RunConfig) -> Result<Vec<TrainingWindow>, CliError> {
    let corpus = load_corpus(&cfg.paths.motions)?;
    let sk = same_skeleton(&corpus)?;
    let weights = joint_weights(cfg, &sk)?;
    let train_part = &corpus[..split(cfg, corpus.len())?];
    let keys = extract_all(cfg, train_part, &weights)?;
    let mut windows = Vec::new();
    for ((name, seq), k) in train_part.iter().zip(&keys) {
        windows.extend(
            build_training_windows(seq, k, cfg.keys.window_keys, cfg.keys.stride).invalid(name)?,
        );
    }
    Ok(windows)
}

fn file_windows(path: &std::path::Path) -> Result<Vec<TrainingWindow>, CliError> {
    let c = read_container(path)?;
    let mut out = Vec::new();
    for chunk in c.chunks_tagged("windows") {
        out.extend(windows_from_chunk(chunk).invalid(path.display())?);
    }
    Ok(out)
}

pub fn train_cmd(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let meshes = load_meshes(&cfg.paths.meshes)?;
    let windows = match &cfg.paths.windows {
        Some(p) => {
            require_file(p)?;
            file_windows(p)?
        }
        None => corpus_windows(cfg)?,
    };
    if windows.is_empty() {
        return Err(CliError::validation("no training windows"));
    }
    let layout = WindowLayout::for_window(&windows[0]);
    for (i, w) in windows.iter().enumerate() {
        w.validate().invalid(format!("window {i}"))?;
        if WindowLayout::for_window(w) != layout || w.skeleton != windows[0].skeleton {
            return Err(CliError::validation(format!(
                "window {i} does not match the shape of window 0"
            )));
        }
        if !meshes.contains_key(&w.object_name) {
            return Err(CliError::validation(format!(
                "no mesh for object {:?}",
                w.object_name
            )));
        }
    }
    let mut tc = train_config(cfg, seed, windows.len())?;
    let init = match &cfg.paths.init_checkpoint {
        Some(p) => {
            require_file(p)?;
            let ck = Checkpoint::read_file(p).invalid(p.display())?;
            if ck.layout != layout || ck.skeleton != windows[0].skeleton {
                return Err(CliError::validation(
                    "windows do not match the initial checkpoint's layout or skeleton",
                ));
            }
            tc.learning_rate = cfg.diffusion.fine_tune_learning_rate;
            tc.validate().invalid("diffusion.fine_tune_learning_rate")?;
            Some(ck)
        }
        None => None,
    };
    let (geo, bps) = geometry(cfg, &meshes)?;
    let ex = exec(cfg);
    let mut eval = Vec::new();
    let (ckpt, log) = match init {
        Some(mut ck) => {
            eval.push((
                "before",
                evaluate_windows(&ck, &windows, &geo, &tc, seed, ex).failed("evaluation")?,
            ));
            let log = fine_tune(&mut ck, &windows, &geo, &tc, ex).failed("fine-tuning")?;
            (ck, log)
        }
        None => train(&windows, &geo, &tc, ex).failed("training")?,
    };
    eval.push((
        "after",
        evaluate_windows(&ckpt, &windows, &geo, &tc, seed, ex).failed("evaluation")?,
    ));

    let mut out = Outputs::default();
    out.container(
        cfg.output("model.ckpt"),
        Container::new(vec![ckpt.to_chunk()]),
    );
    out.container(cfg.output("geometry.bps"), bps);
    let rows = log
        .iter()
        .map(|r| {
            vec![
                r.step.to_string(),
                r.loss.to_string(),
                r.learning_rate.to_string(),
            ]
        })
        .collect();
    out.text(
        cfg.output("train_loss.csv"),
        csv_text(&["step", "loss", "learning_rate"], rows)?,
    );
    let rows = eval
        .iter()
        .map(|(p, l)| vec![p.to_string(), l.to_string()])
        .collect();
    out.text(
        cfg.output("train_eval.csv"),
        csv_text(&["phase", "loss"], rows)?,
    );
    let final_loss = log.last().map(|r| r.loss).unwrap_or(f64::NAN);
    Ok(Report {
        summary: format!(
            "trained {} steps on {} windows; last batch loss {final_loss:.5}",
            log.len(),
            windows.len()
        ),
        files: out.write()?,
    })
}

struct Model {
    ckpt: Checkpoint,
    geo: GeometryTable,
    variance: Variance,
}

fn load_model(cfg: &RunConfig) -> Result<Model, CliError> {
    let path = cfg.checkpoint();
    require_file(&path)?;
    let ckpt = Checkpoint::read_file(&path).invalid(path.display())?;
    let variance = match cfg.diffusion.variance.as_str() {
        "posterior" => Variance::Posterior,
        "zero" => Variance::Zero,
        v => {
            return Err(CliError::validation(format!(
                "diffusion.variance must be posterior or zero, got {v:?}"
            )))
        }
    };
    let (geo, _) = geometry(cfg, &load_meshes(&cfg.paths.meshes)?)?;
    Ok(Model {
        ckpt,
        geo,
        variance,
    })
}

/// Sequences to condition on: the configured names, else the held-out tail.
fn condition_sources(
    cfg: &RunConfig,
    model: &Model,
) -> Result<Vec<(String, HoiSequence)>, CliError> {
    let corpus = load_corpus(&cfg.paths.motions)?;
    let chosen: Vec<(String, HoiSequence)> = match &cfg.sample.sequences {
        Some(names) => names
            .iter()
            .map(|n| {
                corpus.iter().find(|(c, _)| c == n).cloned().ok_or_else(|| {
                    CliError::validation(format!("sample.sequences names unknown sequence {n:?}"))
                })
            })
            .collect::<Result<_, _>>()?,
        None => corpus[split(cfg, corpus.len())?..].to_vec(),
    };
    for (name, seq) in &chosen {
        if seq.skeleton() != &model.ckpt.skeleton {
            return Err(CliError::validation(format!(
                "{name} does not use the model's skeleton"
            )));
        }
        if !model.geo.contains_key(&seq.meta.object) {
            return Err(CliError::validation(format!(
                "{name}: no mesh for object {:?}",
                seq.meta.object
            )));
        }
    }
    Ok(chosen)
}

fn slot_state(seq: &HoiSequence, t: usize) -> SlotState {
    SlotState {
        pose: seq.motion.frames[t].clone(),
        object: seq.object.poses[t],
    }
}

/// Writes generated keys (first `count` slots) and their dense form.
fn emit_generated(
    out: &mut Outputs,
    dir: &str,
    model: &Model,
    seq: &HoiSequence,
    mut g: GeneratedKeys,
    count: usize,
    waypoints: &[(usize, [f64; 2])],
    target: Vec3,
    name: &str,
) -> Result<usize, CliError> {
    g.frames.truncate(count);
    g.states.truncate(count);
    g.contacts.truncate(count);
    let start = g.frames[0];
    let mut wp: Vec<(usize, [f64; 2])> = waypoints
        .iter()
        .map(|(s, xy)| (g.frames[*s] - start, *xy))
        .collect();
    wp.dedup_by_key(|(f, _)| *f);
    let meta = SequenceMeta {
        name: name.to_string(),
        object: seq.meta.object.clone(),
        prompt: seq.meta.prompt.clone(),
        waypoints: wp,
        target: Some(target),
    };
    let keys = g
        .to_key_set(model.ckpt.skeleton.clone(), model.ckpt.frame_rate, meta)
        .failed(name)?;
    let dense = interpolate(&keys).failed(name)?;
    dense.validate().failed(name)?;
    out.container(
        PathBuf::from(format!("{dir}/{name}.keys")),
        Container::new(vec![keys.to_chunk()]),
    );
    out.container(
        PathBuf::from(format!("{dir}/{name}.hoi")),
        Container::new(vec![sequence_chunk(&dense)]),
    );
    Ok(keys.len())
}

pub fn sample(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let model = load_model(cfg)?;
    let sources = condition_sources(cfg, &model)?;
    let weights = joint_weights(cfg, &model.ckpt.skeleton)?;
    let schedule = model.ckpt.schedule.build().invalid("checkpoint schedule")?;
    let sampler = model.ckpt.sampler(&schedule, model.variance);
    let layout = model.ckpt.layout;
    let eps = check_epsilon(cfg)?;
    let dir = cfg.output("samples");
    let mut out = Outputs::default();
    for (name, seq) in &sources {
        let keys = extract_key_actions(seq, eps, &weights).failed(name)?;
        let w = &build_training_windows(seq, &keys, layout.slots - 1, 1).failed(name)?[0];
        let last = w.valid.iter().filter(|v| **v).count();
        let target = w.keys[last - 1].object.position;
        let end_frame = w.keys[last - 1].frame;
        let mut waypoints: Vec<(usize, [f64; 2])> = Vec::new();
        for (f, _) in seq
            .meta
            .waypoints
            .iter()
            .filter(|(f, _)| *f > w.initial.frame && *f < end_frame)
        {
            let s = 1
                + (0..last - 1)
                    .min_by_key(|&i| w.keys[i].frame.abs_diff(*f))
                    .unwrap_or(0);
            if s < last && waypoints.last().is_none_or(|(p, _)| *p < s) {
                let o = w.keys[s - 1].object.position;
                waypoints.push((s, [o.x, o.y]));
            }
        }
        let bundle = build_condition(
            model.geo[&seq.meta.object].clone(),
            &layout,
            &[slot_state(seq, w.initial.frame)],
            &waypoints,
            Some((last, target)),
            toy_text_embed(&seq.meta.prompt, model.ckpt.params.config.text_dim),
        )
        .failed(name)?;
        let g = sampler
            .sample(&bundle, item_seed(seed, name))
            .failed(name)?;
        emit_generated(
            &mut out,
            &dir.display().to_string(),
            &model,
            seq,
            g,
            last + 1,
            &waypoints,
            target,
            name,
        )?;
    }
    Ok(Report {
        summary: format!("sampled {} windows", sources.len()),
        files: out.write()?,
    })
}

pub fn genlong(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let model = load_model(cfg)?;
    let sources = condition_sources(cfg, &model)?;
    let schedule = model.ckpt.schedule.build().invalid("checkpoint schedule")?;
    let sampler = model.ckpt.sampler(&schedule, model.variance);
    let l = model.ckpt.layout.slots;
    let n_over = cfg.diffusion.n_over;
    let windows = cfg.sample.windows.unwrap_or(3);
    if windows == 0 || n_over == 0 || n_over >= l {
        return Err(CliError::validation(format!(
            "need sample.windows >= 1 and 1 <= n_over < {l}"
        )));
    }
    let total = windows * (l - n_over) + n_over;
    let dir = cfg.output("long");
    let mut out = Outputs::default();
    let mut counts = Vec::new();
    for (name, seq) in &sources {
        let t_last = seq.len() - 1;
        let target = seq.meta.target.unwrap_or(seq.object.poses[t_last].position);
        // waypoint frames map proportionally onto the global slot range
        let mut waypoints: Vec<(usize, [f64; 2])> = Vec::new();
        for (f, xy) in &seq.meta.waypoints {
            let s = ((*f as f64 / t_last as f64) * (total - 1) as f64).round() as usize;
            if s >= 1 && s < total - 1 && waypoints.last().is_none_or(|(p, _)| *p < s) {
                waypoints.push((s, *xy));
            }
        }
        let cond = LongCondition {
            geometry: model.geo[&seq.meta.object].clone(),
            initial: slot_state(seq, 0),
            waypoints: waypoints.clone(),
            target: Some((total - 1, target)),
            text: toy_text_embed(&seq.meta.prompt, model.ckpt.params.config.text_dim),
        };
        let g = sampler
            .autoregressive_generate(&cond, windows, n_over, item_seed(seed, name))
            .failed(name)?;
        let count = g.len();
        counts.push(emit_generated(
            &mut out,
            &dir.display().to_string(),
            &model,
            seq,
            g,
            count,
            &waypoints,
            target,
            name,
        )?);
    }
    Ok(Report {
        summary: format!(
            "generated {} long sequences ({} keys each)",
            sources.len(),
            counts.first().copied().unwrap_or(0)
        ),
        files: out.write()?,
    })
}

fn faults(cfg: &RunConfig) -> Result<Vec<Fault>, CliError> {
    cfg.rollout
        .faults
        .iter()
        .map(|f| {
            let d = Vec3::from(f.offset);
            let kind = match f.kind.as_str() {
                "object-offset" => FaultKind::ObjectOffset(d),
                "human-offset" => FaultKind::HumanOffset(d),
                "drop-contacts" => FaultKind::DropContacts,
                k => return Err(CliError::validation(format!("unknown fault kind {k:?}"))),
            };
            if f.end.is_some_and(|e| e <= f.start) {
                return Err(CliError::validation(format!(
                    "fault end {:?} not after start {}",
                    f.end, f.start
                )));
            }
            Ok(Fault {
                start: f.start,
                end: f.end,
                kind,
            })
        })
        .collect()
}

pub fn rollout(cfg: &RunConfig) -> Result<Report, CliError> {
    let seed = cfg.require_seed()?;
    let r = &cfg.rollout;
    let source = cfg
        .paths
        .rollout_source
        .clone()
        .unwrap_or_else(|| cfg.paths.motions.clone());
    let corpus = load_corpus(&source)?;
    let sk = same_skeleton(&corpus)?;
    let meshes = load_meshes(&cfg.paths.meshes)?;
    for (name, seq) in &corpus {
        if !meshes.contains_key(&seq.meta.object) {
            return Err(CliError::validation(format!(
                "{name}: no mesh for object {:?}",
                seq.meta.object
            )));
        }
    }
    let key_joints = r.key_joints.clone().unwrap_or_else(|| sk.key_joints());
    let [jp, jr, jv, jw, jc] = r.human_weights;
    let [op, or, ov, ow] = r.object_weights;
    let weights = RewardWeights {
        joint_position: jp,
        joint_rotation: jr,
        joint_velocity: jv,
        joint_angular: jw,
        contact: jc,
        object_position: op,
        object_rotation: or,
        object_velocity: ov,
        object_angular: ow,
        alpha: r.alpha,
        key_joints: key_joints.clone(),
    };
    weights
        .validate(sk.joint_count())
        .invalid("rollout weights")?;
    let termination = TerminationConfig {
        object_deviation: r.object_deviation,
        missing_contact_frames: r.missing_contact_frames,
        humanoid_drift: r.humanoid_drift,
    };
    termination.validate().invalid("rollout termination")?;
    if !(r.sigma >= 0.0 && r.sigma.is_finite()) {
        return Err(CliError::validation(format!(
            "rollout.sigma must be nonnegative, got {}",
            r.sigma
        )));
    }
    if !(r.target_radius > 0.0) {
        return Err(CliError::validation(
            "rollout.target_radius must be positive",
        ));
    }
    let rc = RolloutConfig {
        weights,
        termination,
        noise: NoiseModel {
            sigma: r.sigma,
            faults: faults(cfg)?,
        },
    };
    let success = SuccessCriteria {
        target_radius: r.target_radius,
    };
    let spec = WindowSpec {
        epsilon: check_epsilon(cfg)?,
        weights: joint_weights(cfg, &sk)?,
        window_key_count: cfg.keys.window_keys,
        stride: cfg.keys.stride,
    };
    if spec.window_key_count == 0 || spec.stride == 0 {
        return Err(CliError::validation(
            "keys.window_keys and keys.stride must be positive",
        ));
    }

    let ex = exec(cfg);
    let logs: Vec<RolloutLog> = ex
        .try_map(&corpus, |(name, seq)| {
            let kp = meshes[&seq.meta.object].bbox_corners();
            oracle_rollout(seq, &kp, &rc, item_seed(seed, name))
        })
        .failed("rollout")?;
    let mcfg = TrackingMetricConfig {
        success: success.clone(),
        ..Default::default()
    };
    let metrics: Vec<TrackingMetrics> = corpus
        .iter()
        .zip(&logs)
        .map(|((name, _), log)| {
            let mut m = tracking_metrics(log, None, &key_joints, &mcfg).failed(name)?;
            m.name = name.clone();
            Ok(m)
        })
        .collect::<Result<_, CliError>>()?;
    let windows =
        filter_successful_rollouts(&logs, &success, &spec, ex).failed("fine-tune filter")?;

    let mut out = Outputs::default();
    for ((name, _), log) in corpus.iter().zip(&logs) {
        out.container(
            cfg.output(&format!("rollouts/{name}.rollout")),
            Container::new(vec![log.to_chunk()]),
        );
    }
    out.text(
        cfg.output("rollouts/tracking.csv"),
        emit_report(&metrics, ReportFormat::Csv).failed("report")?,
    );
    let chunks = if windows.is_empty() {
        vec![]
    } else {
        vec![windows_chunk(&windows).failed("windows")?]
    };
    out.container(cfg.output("finetune.windows"), Container::new(chunks));
    let terminated = logs.iter().filter(|l| l.termination.is_some()).count();
    Ok(Report {
        summary: format!(
            "{} rollouts, {terminated} terminated early; {} fine-tune windows",
            logs.len(),
            windows.len()
        ),
        files: out.write()?,
    })
}

/// First `n` frames of a sequence.
fn crop(seq: &HoiSequence, n: usize) -> Result<HoiSequence, CliError> {
    if n == seq.len() {
        return Ok(seq.clone());
    }
    let mut s = seq.clone();
    s.motion.frames.truncate(n);
    s.object.poses.truncate(n);
    s.contacts.frames.truncate(n);
    s.meta.waypoints.retain(|(f, _)| *f < n);
    s.validate().failed("crop")?;
    Ok(s)
}

pub fn metrics(cfg: &RunConfig) -> Result<Report, CliError> {
    let gen_dir = cfg
        .paths
        .generated
        .clone()
        .unwrap_or_else(|| cfg.output("samples"));
    let generated = load_corpus(&gen_dir)?;
    let truth: BTreeMap<String, HoiSequence> =
        load_corpus(&cfg.paths.motions)?.into_iter().collect();
    let meshes = load_meshes(&cfg.paths.meshes)?;
    for (name, g) in &generated {
        let t = truth.get(name).ok_or_else(|| {
            CliError::validation(format!("corpus mismatch: no ground truth for {name}"))
        })?;
        if g.skeleton().joint_count() != t.skeleton().joint_count() {
            return Err(CliError::validation(format!(
                "corpus mismatch: {name} has a different skeleton"
            )));
        }
        if !meshes
            .get(&g.meta.object)
            .is_some_and(|m| m.is_watertight())
        {
            return Err(CliError::validation(format!(
                "{name}: no closed mesh for object {:?}",
                g.meta.object
            )));
        }
    }
    let foot = FootConfig {
        h_max: cfg.metrics.h_max,
        contact_height: cfg.metrics.contact_height,
    };
    let rows: Vec<GenerationMetrics> = exec(cfg).try_map(
        &generated,
        |(name, g)| -> Result<GenerationMetrics, CliError> {
            let t = &truth[name];
            // compared over the common prefix
            let n = g.len().min(t.len());
            let (g, t) = (crop(g, n)?, crop(t, n)?);
            let input = GenerationInput {
                generated: &g,
                truth: Some(&t),
                mesh: &meshes[&g.meta.object],
                start: None,
            };
            let mut m =
                generation_metrics(&input, &foot, cfg.metrics.root_relative).failed(name)?;
            m.name = name.clone();
            Ok(m)
        },
    )?;
    let mut out = Outputs::default();
    out.text(
        cfg.output("metrics.csv"),
        emit_report(&rows, ReportFormat::Csv).failed("report")?,
    );
    out.text(
        cfg.output("metrics.txt"),
        emit_report(&rows, ReportFormat::Table).failed("report")?,
    );
    Ok(Report {
        summary: format!("evaluated {} generated sequences", rows.len()),
        files: out.write()?,
    })
}

pub fn report(
    cfg: &RunConfig,
    input: Option<PathBuf>,
    format: Option<String>,
) -> Result<Report, CliError> {
    let path = input.unwrap_or_else(|| cfg.output("metrics.csv"));
    require_file(&path)?;
    let fmt_name = format.unwrap_or_else(|| cfg.metrics.format.clone());
    let fmt: ReportFormat = fmt_name.parse().invalid("report format")?;
    let text = std::fs::read_to_string(&path).invalid(path.display())?;
    let rendered = if text.starts_with("name,T_s") {
        emit_report(
            &parse_csv::<GenerationMetrics>(&text).invalid(path.display())?,
            fmt,
        )
    } else if text.starts_with("name,Succ_cont") {
        emit_report(
            &parse_csv::<TrackingMetrics>(&text).invalid(path.display())?,
            fmt,
        )
    } else {
        return Err(CliError::validation(format!(
            "{} is not a metrics CSV",
            path.display()
        )));
    }
    .invalid("report")?;
    let ext = if fmt == ReportFormat::Csv {
        "csv"
    } else {
        "txt"
    };
    let mut out = Outputs::default();
    out.text(cfg.output(&format!("report.{ext}")), rendered.clone());
    Ok(Report {
        summary: rendered,
        files: out.write()?,
    })
}
