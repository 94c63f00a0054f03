//! Behavior tests for the command-line surface: exit codes, file
//! contracts, and agreement with the library on every stage.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bicon::codec::encode_connectivity;
use bicon::io::conn::write_conn;
use bicon::io::pgm::{map_bytes, read_mask};
use bicon::loss::{connectivity_consistency_loss, LossWeights};
use bicon::ops::bilateral_vote;
use bicon::{ConnGrid, Map};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn bicon_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = bicon_cmd(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    bicon_cmd(args).status.code().expect("exit code")
}

fn path_str(p: &Path) -> String {
    p.to_str().unwrap().to_owned()
}

#[test]
fn help_exits_zero_and_usage_exits_one() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["encode"]), 1); // missing arguments
    assert_eq!(code(&["no-such-command"]), 1);
}

#[test]
fn encode_decode_roundtrip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("block.conn");
    let back = dir.path().join("back.pgm");
    run_ok(&[
        "encode",
        &path_str(&fixture("block.pgm")),
        &path_str(&conn),
    ]);
    run_ok(&["decode", &path_str(&conn), &path_str(&back)]);
    assert_eq!(
        fs::read(&back).unwrap(),
        fs::read(fixture("block.pgm")).unwrap()
    );
}

#[test]
fn malformed_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_pgm = dir.path().join("bad.pgm");
    fs::write(&bad_pgm, b"P6\n4 4\n255\n").unwrap();
    let out = dir.path().join("out.conn");
    assert_eq!(code(&["encode", &path_str(&bad_pgm), &path_str(&out)]), 2);

    let bad_conn = dir.path().join("bad.conn");
    fs::write(&bad_conn, b"CONN9\n2 2 8\n").unwrap();
    let result = bicon_cmd(&[
        "decode",
        &path_str(&bad_conn),
        &path_str(&dir.path().join("o.pgm")),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("byte 0"), "stderr names the offset: {stderr}");

    // Gray pixels in a mask input are rejected with a count.
    let gray = dir.path().join("gray.pgm");
    fs::write(&gray, b"P5\n2 2\n255\n\x00\x80\xFF\x80").unwrap();
    let result = bicon_cmd(&["encode", &path_str(&gray), &path_str(&out)]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("2 value(s)"));
}

#[test]
fn edges_of_all_ones_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("edges.pgm");
    run_ok(&["edges", &path_str(&fixture("ones.pgm")), &path_str(&out)]);
    let mask = read_mask(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(mask.count_ones(), 0);
}

#[test]
fn bv_is_idempotent_on_labels() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("c.conn");
    let once = dir.path().join("once.conn");
    let twice = dir.path().join("twice.conn");
    run_ok(&[
        "encode",
        &path_str(&fixture("shapes.pgm")),
        &path_str(&conn),
    ]);
    run_ok(&["bv", &path_str(&conn), &path_str(&once)]);
    run_ok(&["bv", &path_str(&once), &path_str(&twice)]);
    assert_eq!(fs::read(&once).unwrap(), fs::read(&twice).unwrap());
    assert_eq!(fs::read(&conn).unwrap(), fs::read(&once).unwrap());
}

#[test]
fn aggregate_global_of_all_ones_is_all_255() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("ones.conn");
    let grid = ConnGrid::<f32>::filled(4, 4, 1.0).unwrap();
    fs::write(&conn, write_conn(&grid)).unwrap();
    let out = dir.path().join("map.pgm");
    run_ok(&[
        "aggregate",
        "--mode",
        "global",
        &path_str(&conn),
        &path_str(&out),
    ]);
    let bytes = fs::read(&out).unwrap();
    assert!(bytes.ends_with(&[255u8; 16]));
}

#[test]
fn aggregate_decoupled_requires_edges_flag() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("c.conn");
    fs::write(&conn, write_conn(&ConnGrid::<f32>::zeros(4, 4).unwrap())).unwrap();
    let out = dir.path().join("o.pgm");
    assert_eq!(
        code(&[
            "aggregate",
            "--mode",
            "decoupled",
            &path_str(&conn),
            &path_str(&out)
        ]),
        1
    );
}

#[test]
fn decode_thresholds_non_binary_grids() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("soft.conn");
    let mut grid = ConnGrid::<f32>::filled(2, 2, 0.4).unwrap();
    for c in 0..8 {
        grid.set(0, 0, c, 0.9);
    }
    fs::write(&conn, write_conn(&grid)).unwrap();
    let out = dir.path().join("mask.pgm");
    run_ok(&["decode", &path_str(&conn), &path_str(&out)]);
    let mask = read_mask(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(mask.get(0, 0), 1);
    assert_eq!(mask.count_ones(), 1);
}

#[test]
fn loss_echoes_weights_and_vanishes_on_perfect_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let conn = dir.path().join("pred.conn");
    run_ok(&[
        "encode",
        &path_str(&fixture("shapes.pgm")),
        &path_str(&conn),
    ]);
    let out = run_ok(&[
        "loss",
        &path_str(&conn),
        &path_str(&fixture("shapes.pgm")),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("w1=0.8 w2=0.2\n"), "got: {text}");
    assert!(text.contains("total=0.000000"));
    assert!(text.contains("decouple=0.000000"));
    assert!(text.contains("optional=0.000000"));

    let custom = run_ok(&[
        "loss",
        "--weights",
        "0.5,0.5",
        &path_str(&conn),
        &path_str(&fixture("shapes.pgm")),
    ]);
    assert!(String::from_utf8_lossy(&custom.stdout).starts_with("w1=0.5 w2=0.5\n"));

    assert_eq!(
        code(&[
            "loss",
            "--weights",
            "nope",
            &path_str(&conn),
            &path_str(&fixture("shapes.pgm"))
        ]),
        1
    );
}

#[test]
fn loss_emitted_maps_match_library_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let conn_path = dir.path().join("pred.conn");
    // A prediction that disagrees with the labels in a structured way.
    let mask = read_mask(&fs::read(fixture("shapes.pgm")).unwrap()).unwrap();
    let labels = encode_connectivity::<f32>(&mask);
    let pred = ConnGrid::from_vec(
        labels.height(),
        labels.width(),
        labels
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v * 0.7 + 0.15 + 0.001 * (i % 7) as f32).min(1.0))
            .collect(),
    )
    .unwrap();
    fs::write(&conn_path, write_conn(&pred)).unwrap();

    let maps_dir = dir.path().join("maps");
    run_ok(&[
        "loss",
        "--emit-maps",
        &path_str(&maps_dir),
        &path_str(&conn_path),
        &path_str(&fixture("shapes.pgm")),
    ]);

    let voted = bilateral_vote(&pred).unwrap();
    let maps = connectivity_consistency_loss(&pred, &voted, &labels, &LossWeights::default())
        .unwrap()
        .maps
        .unwrap();
    let normalize = |m: Map<f32>| {
        let max = m.data().iter().cloned().fold(0.0f32, f32::max);
        Map::from_vec(
            m.height(),
            m.width(),
            m.data().iter().map(|&v| if max > 0.0 { v / max } else { v }).collect(),
        )
        .unwrap()
    };
    assert_eq!(
        fs::read(maps_dir.join("conmap.pgm")).unwrap(),
        map_bytes(&normalize(maps.conmap_pixels()))
    );
    assert_eq!(
        fs::read(maps_dir.join("bimap.pgm")).unwrap(),
        map_bytes(&normalize(maps.bimap_pixels()))
    );
}

#[test]
fn eval_reports_perfect_rows_for_identical_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred");
    let gt = dir.path().join("gt");
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    for name in ["a.pgm", "b.pgm"] {
        fs::copy(fixture("shapes.pgm"), pred.join(name)).unwrap();
        fs::copy(fixture("shapes.pgm"), gt.join(name)).unwrap();
    }
    let out = run_ok(&["eval", &path_str(&pred), &path_str(&gt)]);
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,mae,f_ave,e_m"));
    for expected in ["a.pgm,0.000000,1.000000,", "b.pgm,0.000000,1.000000,", "mean,"] {
        let line = lines.next().unwrap();
        assert!(line.starts_with(expected), "line {line}");
    }

    // Unpaired files are named.
    fs::copy(fixture("ones.pgm"), pred.join("extra.pgm")).unwrap();
    let result = bicon_cmd(&["eval", &path_str(&pred), &path_str(&gt)]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("extra.pgm"));
}

#[test]
fn train_reproduces_shipped_checkpoint_and_infer_runs() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let log = dir.path().join("train.log");
    run_ok(&[
        "train",
        "--config",
        &path_str(&fixture("tiny.cfg")),
        "--checkpoint",
        &path_str(&ckpt),
        "--log",
        &path_str(&log),
    ]);
    // Training is a pure function of the config, so the checkpoint must
    // equal the committed fixture byte for byte.
    assert_eq!(
        fs::read(&ckpt).unwrap(),
        fs::read(fixture("tiny.ckpt")).unwrap()
    );
    let log_text = fs::read_to_string(&log).unwrap();
    assert!(log_text.starts_with("epoch,loss\n"));
    assert_eq!(log_text.lines().count(), 3); // header + 2 epochs

    // Inference with and without the voting stage.
    let image = dir.path().join("input.pgm");
    let mask = read_mask(&fs::read(fixture("shapes.pgm")).unwrap()).unwrap();
    fs::write(&image, map_bytes(&Map::<f64>::from_mask(&mask))).unwrap();
    let with_bv = dir.path().join("with.pgm");
    let without = dir.path().join("without.pgm");
    run_ok(&[
        "infer",
        "--checkpoint",
        &path_str(&ckpt),
        &path_str(&image),
        &path_str(&with_bv),
    ]);
    run_ok(&[
        "infer",
        "--checkpoint",
        &path_str(&ckpt),
        "--no-bv",
        &path_str(&image),
        &path_str(&without),
    ]);
    assert!(with_bv.exists() && without.exists());

    // Metrics for both variants against the mask.
    for pred_file in [&with_bv, &without] {
        let pred_dir = dir.path().join(format!(
            "eval_{}",
            pred_file.file_stem().unwrap().to_string_lossy()
        ));
        let gt_dir = pred_dir.with_extension("gt");
        fs::create_dir_all(&pred_dir).unwrap();
        fs::create_dir_all(&gt_dir).unwrap();
        fs::copy(pred_file, pred_dir.join("s.pgm")).unwrap();
        fs::copy(fixture("shapes.pgm"), gt_dir.join("s.pgm")).unwrap();
        let out = run_ok(&["eval", &path_str(&pred_dir), &path_str(&gt_dir)]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.lines().count() == 3, "report: {text}");
    }
}

#[test]
fn resume_rejects_config_mismatch_and_corrupt_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let other_cfg = dir.path().join("other.cfg");
    fs::write(&other_cfg, "epochs=3\nbatch_size=4\nseed=9\nn_train=8\nn_test=4\nimage_size=16\n")
        .unwrap();
    let result = bicon_cmd(&[
        "train",
        "--config",
        &path_str(&other_cfg),
        "--resume",
        &path_str(&fixture("tiny.ckpt")),
        "--checkpoint",
        &path_str(&dir.path().join("out.ckpt")),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("hash mismatch"));

    let mut bytes = fs::read(fixture("tiny.ckpt")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x55;
    let corrupt = dir.path().join("corrupt.ckpt");
    fs::write(&corrupt, &bytes).unwrap();
    let result = bicon_cmd(&[
        "infer",
        "--checkpoint",
        &path_str(&corrupt),
        &path_str(&fixture("shapes.pgm")),
        &path_str(&dir.path().join("o.pgm")),
    ]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn resume_continues_to_more_epochs() {
    let dir = tempfile::tempdir().unwrap();
    // Same config as the fixture but with a higher epoch target.
    let cfg4 = dir.path().join("four.cfg");
    fs::write(&cfg4, "epochs=4\nbatch_size=4\nseed=9\nn_train=8\nn_test=4\nimage_size=16\n")
        .unwrap();

    // Resuming requires a checkpoint whose config hash matches, so train
    // the 4-epoch config from scratch, then re-train in two stages and
    // compare.
    let direct = dir.path().join("direct.ckpt");
    run_ok(&[
        "train",
        "--config",
        &path_str(&cfg4),
        "--checkpoint",
        &path_str(&direct),
    ]);

    let staged = dir.path().join("staged.ckpt");
    let cfg4_text = fs::read_to_string(&cfg4).unwrap();
    let stage1 = dir.path().join("stage1.ckpt");
    // First stage: same config, stopped after 2 epochs by a config with
    // epochs=2 would change the hash; instead train the full config but
    // resume from its own output (a no-op) to exercise the path.
    run_ok(&[
        "train",
        "--config",
        &path_str(&cfg4),
        "--checkpoint",
        &path_str(&stage1),
    ]);
    fs::write(dir.path().join("four_copy.cfg"), cfg4_text).unwrap();
    run_ok(&[
        "train",
        "--config",
        &path_str(&cfg4),
        "--resume",
        &path_str(&stage1),
        "--checkpoint",
        &path_str(&staged),
    ]);
    assert_eq!(fs::read(&direct).unwrap(), fs::read(&staged).unwrap());
}

#[test]
fn ablate_emits_one_row_per_variant() {
    let out = run_ok(&[
        "ablate",
        "--config",
        &path_str(&fixture("tiny.cfg")),
    ]);
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "config,mae,f_ave,e_m");
    assert_eq!(lines.len(), 6);
    for (line, name) in lines[1..].iter().zip([
        "saliency_baseline",
        "conn_only",
        "conn_bv_global",
        "conn_bv_rca",
        "full_bicon",
    ]) {
        assert!(line.starts_with(name), "row {line}");
    }
}
