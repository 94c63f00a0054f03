//! `bicon` — every pipeline stage as a scriptable subcommand.
//!
//! Stage commands (`encode`, `decode`, `edges`, `bv`, `aggregate`, `loss`)
//! compute in f32, the precision stored in `.conn` files, so shell
//! compositions are bit-identical to in-process compositions. Training,
//! inference, and evaluation run in f64.
//!
//! Exit codes: 0 success, 1 usage error, 2 malformed input file,
//! 3 numerical failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use bicon::codec::{decode_connectivity, encode_connectivity, extract_edge_mask, isolated_pixel_count};
use bicon::config::{TrainConfig, TrainVariant};
use bicon::dataset::generate_dataset;
use bicon::io::checkpoint::{load_checkpoint, save_checkpoint};
use bicon::io::conn::{read_conn, write_conn};
use bicon::io::pgm::{map_bytes, mask_bytes, read_map, read_mask};
use bicon::io::report::{ablation_report, eval_report, sweep_report};
use bicon::loss::{bicon_total_loss, connectivity_consistency_loss, LossWeights};
use bicon::metrics::{evaluate_pair, MetricReport};
use bicon::ops::{aggregate_decoupled, aggregate_global, bilateral_vote};
use bicon::pipeline::{
    evaluate_model, gradient_sanity_check, infer, run_ablation, sweep_weights, train_epochs,
    TrainState,
};
use bicon::{ConnGrid, Error, Map, Mask};

#[derive(Parser)]
#[command(name = "bicon", version, about = "Connectivity-based saliency pipeline tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregateMode {
    Global,
    Decoupled,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a binary saliency mask (PGM) to a connectivity grid (.conn).
    Encode {
        input: PathBuf,
        output: PathBuf,
    },
    /// Convert a connectivity grid back to a saliency mask. Non-binary
    /// grids are thresholded at 0.5 first (lossy).
    Decode {
        input: PathBuf,
        output: PathBuf,
    },
    /// Extract the edge mask of a binary saliency mask.
    Edges {
        input: PathBuf,
        output: PathBuf,
    },
    /// Bilateral voting on a connectivity grid.
    Bv {
        input: PathBuf,
        output: PathBuf,
    },
    /// Collapse the 8 channels to a single-channel map.
    Aggregate {
        #[arg(long, value_enum)]
        mode: AggregateMode,
        /// Ground-truth edge mask (required in decoupled mode).
        #[arg(long, required_if_eq("mode", "decoupled"))]
        edges: Option<PathBuf>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Print the loss breakdown of a predicted grid against a mask.
    Loss {
        pred: PathBuf,
        gt: PathBuf,
        /// Term weights as "w1,w2".
        #[arg(long, default_value = "0.8,0.2", value_parser = parse_weights)]
        weights: (f64, f64),
        /// Also write per-pixel conmap/bimap loss surfaces (max-normalized
        /// PGMs) into this directory.
        #[arg(long)]
        emit_maps: Option<PathBuf>,
    },
    /// Evaluate a directory of predictions against ground-truth masks.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Write the CSV report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the toy model on the synthetic dataset.
    Train(TrainArgs),
    /// Run a trained checkpoint on an image.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        input: PathBuf,
        output: PathBuf,
        /// Skip bilateral voting at inference.
        #[arg(long)]
        no_bv: bool,
    },
    /// Train and evaluate every model/loss variant under identical seeds.
    Ablate(HarnessArgs),
    /// Train across the w2 grid {0.0 .. 0.9} with w1 = 1 - w2.
    SweepWeights(HarnessArgs),
}

#[derive(Args)]
struct ConfigOverrides {
    /// key=value config file ('#' comments).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    w1: Option<f64>,
    #[arg(long)]
    w2: Option<f64>,
    #[arg(long, value_parser = TrainVariant::parse)]
    variant: Option<TrainVariant>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    image_size: Option<usize>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<TrainConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::parse(&read_text(path)?)?,
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            epochs,
            batch_size,
            learning_rate,
            momentum,
            seed,
            w1,
            w2,
            variant,
            n_train,
            n_test,
            image_size
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Where to write the checkpoint.
    #[arg(long, default_value = "model.ckpt")]
    checkpoint: PathBuf,
    /// Write per-epoch losses (CSV) here; defaults to `<checkpoint>.log`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue from an existing checkpoint (its config must match).
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct HarnessArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Write the CSV report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_weights(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'w1,w2', got '{s}'"))?;
    let w1: f64 = a.trim().parse().map_err(|_| format!("bad w1 '{a}'"))?;
    let w2: f64 = b.trim().parse().map_err(|_| format!("bad w2 '{b}'"))?;
    if !(0.0..=1.0).contains(&w1) || !(0.0..=1.0).contains(&w2) {
        return Err("weights must lie in [0, 1]".into());
    }
    Ok((w1, w2))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::NonFiniteLoss { .. } => 3,
                _ => 2,
            })
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(Error::Io)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(Error::Io)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(Error::Io)
}

fn emit_report(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => write_bytes(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Encode { input, output } => {
            let mask = read_mask(&read_bytes(&input)?)?;
            let isolated = isolated_pixel_count(&mask);
            if isolated > 0 {
                eprintln!("note: {isolated} isolated salient pixel(s) will not survive a decode round trip");
            }
            let grid = encode_connectivity::<f32>(&mask);
            write_bytes(&output, &write_conn(&grid))
        }
        Command::Decode { input, output } => {
            let grid: ConnGrid<f32> = read_conn(&read_bytes(&input)?)?;
            let binary = if grid.is_binary() {
                grid
            } else {
                let data = grid
                    .data()
                    .iter()
                    .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
                    .collect();
                ConnGrid::from_vec(grid.height(), grid.width(), data)?
            };
            let mask = decode_connectivity(&binary)?;
            write_bytes(&output, &mask_bytes(&mask))
        }
        Command::Edges { input, output } => {
            let mask = read_mask(&read_bytes(&input)?)?;
            let edges = extract_edge_mask(&encode_connectivity::<f32>(&mask))?;
            write_bytes(&output, &mask_bytes(&edges))
        }
        Command::Bv { input, output } => {
            let grid: ConnGrid<f32> = read_conn(&read_bytes(&input)?)?;
            write_bytes(&output, &write_conn(&bilateral_vote(&grid)?))
        }
        Command::Aggregate {
            mode,
            edges,
            input,
            output,
        } => {
            let grid: ConnGrid<f32> = read_conn(&read_bytes(&input)?)?;
            let map = match mode {
                AggregateMode::Global => aggregate_global(&grid),
                AggregateMode::Decoupled => {
                    let edges_path = edges.expect("clap enforces --edges");
                    let edge_mask = read_mask(&read_bytes(&edges_path)?)?;
                    aggregate_decoupled(&grid, &edge_mask)?
                }
            };
            write_bytes(&output, &map_bytes(&map))
        }
        Command::Loss {
            pred,
            gt,
            weights,
            emit_maps,
        } => cmd_loss(&pred, &gt, weights, emit_maps.as_deref()),
        Command::Eval { pred_dir, gt_dir, out } => cmd_eval(&pred_dir, &gt_dir, out.as_deref()),
        Command::Train(args) => cmd_train(args),
        Command::Infer {
            checkpoint,
            input,
            output,
            no_bv,
        } => {
            let (_, state) = load_checkpoint(&read_bytes(&checkpoint)?)?;
            let image: Map<f64> = read_map(&read_bytes(&input)?)?;
            let map = infer(&state.model, &image, !no_bv)?;
            write_bytes(&output, &map_bytes(&map))
        }
        Command::Ablate(args) => {
            let cfg = args.overrides.resolve()?;
            let rows = run_ablation::<f64>(&cfg)?;
            let rows: Vec<(String, MetricReport<f64>)> =
                rows.into_iter().map(|r| (r.name, r.report)).collect();
            emit_report(args.out.as_deref(), &ablation_report(&rows))
        }
        Command::SweepWeights(args) => {
            let cfg = args.overrides.resolve()?;
            let rows = sweep_weights::<f64>(&cfg)?;
            emit_report(args.out.as_deref(), &sweep_report(&rows))
        }
    }
}

fn cmd_loss(
    pred: &Path,
    gt: &Path,
    (w1, w2): (f64, f64),
    emit_maps: Option<&Path>,
) -> Result<(), Error> {
    let conn: ConnGrid<f32> = read_conn(&read_bytes(pred)?)?;
    let mask = read_mask(&read_bytes(gt)?)?;
    let conn_gt = encode_connectivity::<f32>(&mask);
    let weights = LossWeights {
        conmap: w1 as f32,
        bimap: w2 as f32,
    };
    let total = bicon_total_loss(&conn, &conn_gt, &mask, &weights, None)?;
    println!("w1={w1} w2={w2}");
    let b = total.breakdown;
    println!("total={:.6}", b.total);
    println!("decouple={:.6}", b.decouple);
    println!("conmap={:.6}", b.conmap);
    println!("bimap={:.6}", b.bimap);
    println!("optional={:.6}", b.optional);

    if let Some(dir) = emit_maps {
        fs::create_dir_all(dir).map_err(Error::Io)?;
        let bicon_grid = bilateral_vote(&conn)?;
        let consistency = connectivity_consistency_loss(&conn, &bicon_grid, &conn_gt, &weights)?;
        let maps = consistency.maps.expect("surfaces requested");
        write_bytes(
            &dir.join("conmap.pgm"),
            &map_bytes(&max_normalize(maps.conmap_pixels())),
        )?;
        write_bytes(
            &dir.join("bimap.pgm"),
            &map_bytes(&max_normalize(maps.bimap_pixels())),
        )?;
    }
    Ok(())
}

fn max_normalize(mut map: Map<f32>) -> Map<f32> {
    let max = map.data().iter().cloned().fold(0.0f32, f32::max);
    if max > 0.0 {
        for v in map.data_mut() {
            *v /= max;
        }
    }
    map
}

fn pgm_names(dir: &Path) -> Result<BTreeSet<String>, Error> {
    let mut names = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(Error::Io)? {
        let entry = entry.map_err(Error::Io)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".pgm") {
            names.insert(name);
        }
    }
    Ok(names)
}

fn cmd_eval(pred_dir: &Path, gt_dir: &Path, out: Option<&Path>) -> Result<(), Error> {
    let pred_names = pgm_names(pred_dir)?;
    let gt_names = pgm_names(gt_dir)?;
    let unpaired: Vec<&String> = pred_names.symmetric_difference(&gt_names).collect();
    if !unpaired.is_empty() {
        let list: Vec<&str> = unpaired.iter().map(|s| s.as_str()).collect();
        return Err(Error::Config(format!(
            "unpaired file(s): {}",
            list.join(", ")
        )));
    }
    if pred_names.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut rows = Vec::new();
    let mut sums = (0.0f64, 0.0f64, 0.0f64);
    for name in &pred_names {
        let pred: Map<f64> = read_map(&read_bytes(&pred_dir.join(name))?)?;
        let gt: Mask = read_mask(&read_bytes(&gt_dir.join(name))?)?;
        let r = evaluate_pair(&pred, &gt)?;
        sums = (sums.0 + r.mae, sums.1 + r.f_ave, sums.2 + r.e_m);
        rows.push((name.clone(), r));
    }
    let n = rows.len() as f64;
    let mean = MetricReport {
        mae: sums.0 / n,
        f_ave: sums.1 / n,
        e_m: sums.2 / n,
        n_images: rows.len(),
    };
    emit_report(out, &eval_report(&rows, &mean))
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = args.overrides.resolve()?;
    gradient_sanity_check()?;

    let mut state = match &args.resume {
        Some(path) => {
            let (stored_cfg, state) = load_checkpoint(&read_bytes(path)?)?;
            if stored_cfg.hash() != cfg.hash() {
                return Err(Error::Format {
                    offset: 0,
                    message: format!(
                        "checkpoint/config hash mismatch: checkpoint {:016x}, config {:016x}",
                        stored_cfg.hash(),
                        cfg.hash()
                    ),
                });
            }
            state
        }
        None => TrainState::fresh(&cfg),
    };

    let mut log_lines = String::from("epoch,loss\n");
    train_epochs(&cfg, &mut state, |epoch, loss| {
        println!("epoch {epoch}: loss {loss:.6}");
        log_lines.push_str(&format!("{epoch},{loss:.6}\n"));
    })?;

    write_bytes(&args.checkpoint, &save_checkpoint(&cfg, &state))?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.checkpoint.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    write_bytes(&log_path, log_lines.as_bytes())?;

    let (_, test_set) = generate_dataset::<f64>(cfg.seed, cfg.image_size, 1, cfg.n_test);
    let use_bv = cfg.variant != TrainVariant::ConnOnly;
    let report = evaluate_model(&state.model, &test_set, use_bv)?;
    println!(
        "held-out: mae={:.6} f_ave={:.6} e_m={:.6} ({} images)",
        report.mae, report.f_ave, report.e_m, report.n_images
    );
    Ok(())
}
