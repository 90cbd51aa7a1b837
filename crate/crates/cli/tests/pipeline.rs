use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Arc;

use hoikit::format::{write_sequence, Container};
use hoikit::keyaction::{windows_chunk, windows_from_chunk};
use hoikit::motion::{
    ContactChannels, HoiSequence, MotionSequence, ObjectPose, ObjectTrajectory, PoseFrame,
    SequenceMeta, SkeletonSpec, Vec3,
};
use hoikit::tracking::RolloutLog;
use hoikit_cli::{run, Command, Overrides, RunConfig};
use tempfile::TempDir;

fn config(dir: &Path, text: &str) -> RunConfig {
    fs::write(dir.join("hoikit.toml"), text).unwrap();
    RunConfig::load(&dir.join("hoikit.toml"), &Overrides::default()).unwrap()
}

fn small(dir: &Path, extra: &str) -> RunConfig {
    config(
        dir,
        &format!(
            "seed = 7\n{extra}\n[synth]\nsequences = 4\n[bps]\npoints = 64\n[diffusion]\nholdout = 1\nsteps = 20\niterations = 20\nbatch_size = 4\n"
        ),
    )
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn binary(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_hoikit"))
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn linear_sequence(name: &str) -> HoiSequence {
    let sk = Arc::new(SkeletonSpec::chain(5, 0.2).unwrap());
    let t_len = 40;
    let frames = (0..t_len)
        .map(|t| PoseFrame {
            root_translation: Vec3::new(0.02 * t as f64, 0.01 * t as f64, 0.9),
            ..PoseFrame::rest(5)
        })
        .collect();
    let objects = (0..t_len)
        .map(|t| ObjectPose::identity_at(Vec3::new(0.3 + 0.02 * t as f64, 0.0, 0.8)))
        .collect();
    HoiSequence::new(
        MotionSequence::new(frames, 30.0, sk).unwrap(),
        ObjectTrajectory {
            poses: objects,
            frame_rate: 30.0,
        },
        ContactChannels::zeros(t_len),
        SequenceMeta {
            name: name.into(),
            object: "box_0".into(),
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn linear_motion_extracts_two_keys() {
    let dir = TempDir::new().unwrap();
    let cfg = small(dir.path(), "");
    fs::create_dir_all(&cfg.paths.motions).unwrap();
    write_sequence(&linear_sequence("lin"), &cfg.paths.motions.join("lin.hoi")).unwrap();
    run(&Command::Extract, &cfg).unwrap();
    let rows = read_csv(&cfg.output("keys/summary.csv"));
    assert_eq!(
        rows,
        vec![vec![
            "lin".to_string(),
            "40".into(),
            "2".into(),
            rows[0][3].clone()
        ]]
    );
    assert!(rows[0][3].parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = small(dir.path(), "");
    fs::create_dir_all(&cfg.paths.motions).unwrap();
    fs::write(cfg.paths.motions.join("bad.hoi"), b"not a container").unwrap();
    let (code, err) = binary(dir.path(), &["extract"]);
    assert_eq!(code, 1);
    assert!(err.contains("bad.hoi"), "{err}");
    assert!(!cfg.output("keys").exists());

    fs::remove_file(cfg.paths.motions.join("bad.hoi")).unwrap();
    write_sequence(&linear_sequence("lin"), &cfg.paths.motions.join("lin.hoi")).unwrap();
    assert_eq!(
        binary(dir.path(), &["extract", "--set", "keys.epsilon=0"]).0,
        1
    );
    assert_eq!(
        binary(dir.path(), &["extract", "--set", "keys.epsilonn=1"]).0,
        1
    );
    assert_eq!(
        binary(dir.path(), &["--config", "missing.toml", "extract"]).0,
        1
    );
    assert_eq!(binary(dir.path(), &["extract"]).0, 0);
    // no mesh directory for `lin`'s object
    assert_eq!(binary(dir.path(), &["rollout"]).0, 1);
    assert!(!cfg.output("rollouts").exists());
    // a valid container without a checkpoint chunk
    fs::create_dir_all(cfg.output("")).unwrap();
    fs::write(cfg.output("model.ckpt"), Container::new(vec![]).to_binary()).unwrap();
    assert_eq!(binary(dir.path(), &["sample"]).0, 1);
}

#[test]
fn seed_required_for_generation() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("hoikit.toml"), "").unwrap();
    let (code, err) = binary(dir.path(), &["synth"]);
    assert_eq!(code, 1);
    assert!(err.contains("seed"));
    assert_eq!(
        binary(
            dir.path(),
            &["synth", "--seed", "7", "--set", "synth.sequences=2"]
        )
        .0,
        0
    );
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = vec![];
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_deterministic_and_valid() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        run(&Command::Synth, &small(d.path(), "")).unwrap();
    }
    let ta = tree(a.path());
    assert_eq!(
        ta.iter()
            .filter(|(p, _)| p.extension().is_some_and(|e| e == "hoi"))
            .count(),
        4
    );
    assert_eq!(ta, tree(b.path()));
    let cfg = small(a.path(), "");
    for (_, seq) in hoikit_cli::io::load_corpus(&cfg.paths.motions).unwrap() {
        seq.validate().unwrap();
    }
}

#[test]
fn overfits_a_single_window() {
    let dir = TempDir::new().unwrap();
    let cfg = small(dir.path(), "");
    run(&Command::Synth, &cfg).unwrap();
    let corpus = hoikit_cli::io::load_corpus(&cfg.paths.motions).unwrap();
    let seq = &corpus[0].1;
    let w = hoikit::keyaction::JointWeights::default_for(seq.skeleton());
    let keys = hoikit::keyaction::extract_key_actions(seq, cfg.keys.epsilon, &w).unwrap();
    let windows = hoikit::keyaction::build_training_windows(seq, &keys, 8, 4).unwrap();
    let path = dir.path().join("one.windows");
    Container::new(vec![windows_chunk(&windows[..1]).unwrap()])
        .write_file(&path)
        .unwrap();

    let mut cfg = small(dir.path(), "[paths]\nwindows = \"one.windows\"");
    cfg.diffusion.iterations = 600;
    cfg.diffusion.learning_rate = 3e-3;
    run(&Command::Train, &cfg).unwrap();
    let eval = read_csv(&cfg.output("train_eval.csv"));
    let after: f64 = eval.last().unwrap()[1].parse().unwrap();
    assert!(after < 0.01, "final loss {after}");
    let losses = read_csv(&cfg.output("train_loss.csv"));
    assert_eq!(losses.len(), 600);
}

#[test]
fn genlong_key_count_follows_stitching_rule() {
    let dir = TempDir::new().unwrap();
    let cfg = small(dir.path(), "");
    run(&Command::Synth, &cfg).unwrap();
    run(&Command::Train, &cfg).unwrap();
    let mut cfg = cfg;
    for (windows, n_over) in [(3, 2), (2, 1), (1, 2)] {
        cfg.sample.windows = Some(windows);
        cfg.diffusion.n_over = n_over;
        run(&Command::Genlong, &cfg).unwrap();
        let c = Container::read_file(&cfg.output("long/synth_0003.keys")).unwrap();
        let keys = hoikit::keyaction::KeyActionSet::from_chunk(c.chunk("keyset").unwrap()).unwrap();
        // 8 keys per window plus the initial slot
        assert_eq!(
            keys.len(),
            windows * (9 - n_over) + n_over,
            "{windows} windows, n_over {n_over}"
        );
    }
}

#[test]
fn zero_noise_rollout_tracks_everything() {
    let dir = TempDir::new().unwrap();
    let cfg = small(dir.path(), "");
    run(&Command::Synth, &cfg).unwrap();
    run(&Command::Rollout, &cfg).unwrap();
    let rows = read_csv(&cfg.output("rollouts/tracking.csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(
            (r[1].as_str(), r[2].as_str(), r[3].as_str()),
            ("1", "1", "1"),
            "{r:?}"
        );
    }
    // every rollout succeeded, so the filtered windows are usable for training
    let c = Container::read_file(&cfg.output("finetune.windows")).unwrap();
    let n: usize = c
        .chunks_tagged("windows")
        .map(|ch| windows_from_chunk(ch).unwrap().len())
        .sum();
    assert!(n > 0);
    let mut ft = cfg.clone();
    ft.paths.windows = Some(cfg.output("finetune.windows"));
    ft.diffusion.iterations = 5;
    run(&Command::Train, &ft).unwrap();
}

#[test]
fn scripted_faults_terminate_on_schedule() {
    let dir = TempDir::new().unwrap();
    let cfg = small(
        dir.path(),
        "[[rollout.faults]]\nstart = 30\nkind = \"object-offset\"\noffset = [0.6, 0.0, 0.0]\n",
    );
    run(&Command::Synth, &cfg).unwrap();
    run(&Command::Rollout, &cfg).unwrap();
    for i in 0..4 {
        let c =
            Container::read_file(&cfg.output(&format!("rollouts/synth_{i:04}.rollout"))).unwrap();
        let log = RolloutLog::from_chunk(c.chunk("rollout").unwrap()).unwrap();
        let t = log.termination.unwrap();
        assert_eq!((t.frame, t.reason.as_str()), (30, "object-deviation"));
        assert_eq!(log.frames.len(), 31);
    }
    let rows = read_csv(&cfg.output("rollouts/tracking.csv"));
    assert!(rows
        .iter()
        .all(|r| r[2] == "0" && r[3].parse::<f64>().unwrap() < 1.0));

    let dir = TempDir::new().unwrap();
    let cfg = small(
        dir.path(),
        "[[rollout.faults]]\nstart = 0\nkind = \"drop-contacts\"\n",
    );
    run(&Command::Synth, &cfg).unwrap();
    run(&Command::Rollout, &cfg).unwrap();
    let c = Container::read_file(&cfg.output("rollouts/synth_0000.rollout")).unwrap();
    let log = RolloutLog::from_chunk(c.chunk("rollout").unwrap()).unwrap();
    let first_expected = log
        .frames
        .iter()
        .position(|f| f.ref_object.contacts.iter().any(|c| *c))
        .unwrap();
    let t = log.termination.unwrap();
    assert_eq!(
        (t.frame, t.reason.as_str()),
        (first_expected + 10, "contact-absence")
    );
}

#[test]
fn metrics_of_ground_truth_are_zero_and_report_round_trips() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small(dir.path(), "");
    run(&Command::Synth, &cfg).unwrap();
    cfg.paths.generated = Some(cfg.paths.motions.clone());
    run(&Command::Metrics, &cfg).unwrap();
    let csv_text = fs::read_to_string(cfg.output("metrics.csv")).unwrap();
    let rows = read_csv(&cfg.output("metrics.csv"));
    let header: Vec<String> = csv_text
        .lines()
        .next()
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    for r in &rows {
        for (h, v) in header.iter().zip(r) {
            if ["MPJPE", "T_root", "T_obj", "O_obj"].contains(&h.as_str()) {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{h}");
            }
            if h == "C_F1" {
                assert_eq!(v.parse::<f64>().unwrap(), 1.0);
            }
        }
    }
    let out = run(
        &Command::Report {
            input: None,
            format: Some("csv".into()),
        },
        &cfg,
    )
    .unwrap();
    assert_eq!(out.summary, csv_text);
    let e = run(
        &Command::Report {
            input: None,
            format: Some("xml".into()),
        },
        &cfg,
    )
    .unwrap_err();
    assert_eq!(e.exit_code(), 1);

    // a generated file without ground truth is a corpus mismatch
    let gen = dir.path().join("gen");
    fs::create_dir_all(&gen).unwrap();
    write_sequence(&linear_sequence("stray"), &gen.join("stray.hoi")).unwrap();
    cfg.paths.generated = Some(gen);
    assert_eq!(run(&Command::Metrics, &cfg).unwrap_err().exit_code(), 1);
}
