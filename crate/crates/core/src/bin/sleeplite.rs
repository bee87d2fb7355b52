use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use sleeplite::config::Config;
use sleeplite::energy::{
    estimate_energy, profile_ops, profile_quantized, scale_to_node, EnergyReport, Precision,
};
use sleeplite::eval::{compute_metrics, emit_hypnogram, Metrics};
use sleeplite::features::rfe::rfe_select;
use sleeplite::features::FeatureTable;
use sleeplite::ingest::{
    load_annotated, read_recording, write_annotations, write_csv, ReadOptions, RecordingFormat,
};
use sleeplite::ml::{self, serialize, tune_hyperparameters, Algo, SearchSpace};
use sleeplite::pipeline::{
    build_feature_table, cnn_hypnogram, cnn_labelled, majority_baseline, Cnn,
};
use sleeplite::qnn::fixture::{build_fixture, fixture_inputs};
use sleeplite::qnn::{
    build_sleeplitecnn, calibrate, load_model, quantize_model, save_model, ModelFile,
};
use sleeplite::windowing::{
    generate_windows, manifest_rows, split_dataset_with, write_manifest, SplitTag, WindowMode,
};
use sleeplite::{EcgRecording, Error, Result, SleepStage};

/// ECG-only four-stage sleep staging.
#[derive(Parser)]
#[command(name = "sleeplite", version)]
struct Cli {
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Input {
    /// Recording (.edf or .csv).
    #[arg(long, short)]
    input: PathBuf,
    /// One raw label per 30-s epoch.
    #[arg(long, short)]
    annotations: Option<PathBuf>,
    /// Defaults to the file extension.
    #[arg(long)]
    format: Option<RecordingFormat>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Read a recording (and labels) and write it as CSV.
    Ingest(Input),
    /// Write the window manifest of a labelled recording.
    Windows {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "ml")]
        mode: WindowMode,
    },
    /// Extract ML-window features of one or more labelled recordings.
    Features {
        /// Recordings; each needs a matching --annotations.
        #[arg(long, short, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, short, required = true)]
        annotations: Vec<PathBuf>,
    },
    /// Recursive feature elimination on the training rows.
    Select {
        #[arg(long)]
        features: PathBuf,
        /// Defaults to `rfe.target` from the config.
        #[arg(long)]
        target: Option<usize>,
    },
    /// Train a classical model on the training rows and score the test rows.
    TrainMl {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        algo: Option<Algo>,
        /// Hyperparameter override `name=value`; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Random search with k-fold CV on the training rows.
    Tune {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        algo: Option<Algo>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Write a float SleepLiteCNN (He-initialised, or the synthetic fixture).
    BuildCnn {
        #[arg(long)]
        fixture: bool,
    },
    /// Calibrate and quantise a float model to int8.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        /// Calibration recording; synthetic windows when absent.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Per-window CNN predictions with class probabilities.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
    },
    /// Per-layer energy per inference at 45 nm and the target node.
    Energy {
        /// Float or int8 model; the configured SleepLiteCNN otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        node: Option<u32>,
    },
    /// Score a classical model on a feature table or a CNN on a labelled recording.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Split of the feature table to score; all rows when absent.
        #[arg(long)]
        split: Option<String>,
    },
    /// 10-s CNN hypnogram as CSV and SVG.
    Hypnogram {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        input: Input,
    },
}

struct Stderr;

impl log::Log for Stderr {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }
    fn log(&self, r: &log::Record) {
        if self.enabled(r.metadata()) {
            eprintln!("{}: {}", r.level().as_str().to_lowercase(), r.args());
        }
    }
    fn flush(&self) {}
}

fn main() {
    let _ = log::set_logger(&Stderr).map(|_| log::set_max_level(log::LevelFilter::Warn));
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match cli.cmd {
        Cmd::Ingest(input) => {
            let rec = load(&input, &cfg)?;
            let path = out.join(format!("{}.csv", rec.subject_id));
            write_csv(&rec, &path)?;
            println!(
                "{}: {} samples at {} Hz ({:.1} min), {} epochs labelled",
                rec.subject_id,
                rec.samples.len(),
                rec.sample_rate_hz,
                rec.duration_s() / 60.0,
                rec.annotations.len()
            );
            if !rec.annotations.is_empty() {
                write_annotations(
                    &rec.annotations,
                    &out.join(format!("{}.labels.txt", rec.subject_id)),
                )?;
            }
            println!("wrote {}", path.display());
        }
        Cmd::Windows { input, mode } => {
            let rec = load(&input, &cfg)?;
            let wc = match mode {
                WindowMode::Ml => cfg.ml_window,
                WindowMode::Dl => cfg.dl_window,
            };
            let set = generate_windows(&rec, &wc)?;
            let split = split_dataset_with(&set.labels(), cfg.seed, cfg.split)?;
            let tags = split.tags(set.len());
            let path = out.join(format!("{}.{}.windows.csv", rec.subject_id, mode.as_str()));
            write_manifest(&manifest_rows(&set, Some(&tags)), &path)?;
            println!(
                "{} {} windows kept, {} dropped; train {} / validation {} / test {}",
                set.len(),
                mode.as_str(),
                set.dropped.len(),
                split.train.len(),
                split.validation.len(),
                split.test.len()
            );
            println!("wrote {}", path.display());
        }
        Cmd::Features { input, annotations } => {
            if input.len() != annotations.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} recordings but {} annotation files",
                    input.len(),
                    annotations.len()
                )));
            }
            let recs = input
                .iter()
                .zip(&annotations)
                .map(|(i, a)| {
                    let format = format_of(i, None)?;
                    load_annotated(i, a, format, &read_options(&cfg))
                })
                .collect::<Result<Vec<_>>>()?;
            let data = build_feature_table(&recs, &cfg)?;
            let path = out.join("features.csv");
            data.table.write_csv(&path)?;
            println!(
                "{} rows x {} features ({} windows skipped)",
                data.table.len(),
                data.table.names.len(),
                data.skipped
            );
            println!("wrote {}", path.display());
        }
        Cmd::Select { features, target } => {
            let table = FeatureTable::read_csv(&features)?;
            let (x, y) = table.subset(SplitTag::Train);
            let x = ml::MedianImputer::fit(&x).transform(&x);
            let target = target.unwrap_or(cfg.rfe_target);
            let sel = rfe_select(&table.names, &x, &y, target, cfg.seed, &cfg.rfe)?;
            let path = out.join("features.selected.csv");
            table.select(&sel.kept_names)?.write_csv(&path)?;
            let mut trace = String::from("round,score,dropped\n");
            for r in &sel.trace {
                trace.push_str(&format!(
                    "{},{},{}\n",
                    r.round,
                    r.score,
                    r.dropped.join(";")
                ));
            }
            fs::write(out.join("rfe_trace.csv"), trace)?;
            println!(
                "kept {} of {} features in {} rounds",
                sel.kept_names.len(),
                table.names.len(),
                sel.trace.len()
            );
            println!("wrote {}", path.display());
        }
        Cmd::TrainMl {
            features,
            algo,
            params,
        } => {
            let table = FeatureTable::read_csv(&features)?;
            let algo = algo.unwrap_or(cfg.algo);
            for p in &params {
                let (k, v) = p.split_once('=').ok_or_else(|| {
                    Error::InvalidConfig(format!("--param `{p}`: expected name=value"))
                })?;
                cfg.set(&format!("hyper.{algo}.{}", k.trim()), v.trim())?;
            }
            let run = sleeplite::pipeline::train_and_evaluate(&table, &cfg.classifier(algo))?;
            print_metrics(&run.test_metrics);
            println!(
                "majority baseline ({}) {:.4}",
                run.majority, run.majority_accuracy
            );
            let path = out.join(format!("{algo}.seml"));
            serialize::save_model(&run.model, &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::Tune {
            features,
            algo,
            budget,
        } => {
            let table = FeatureTable::read_csv(&features)?;
            let algo = algo.unwrap_or(cfg.algo);
            let (x, y) = table.subset(SplitTag::Train);
            let res = tune_hyperparameters(
                &SearchSpace::default_for(algo),
                &cfg.classifier(algo),
                &table.names,
                &x,
                &y,
                budget.unwrap_or(cfg.tune_budget),
                cfg.tune_folds,
                cfg.seed,
            )?;
            let t = &res.trace[res.best_trial];
            println!(
                "best trial {}: mean macro F1 {:.4}, accuracy {:.4}",
                t.trial, t.mean_macro_f1, t.mean_accuracy
            );
            for (k, v) in &t.params {
                println!("  {k} = {v}");
            }
            res.write_trace(&out.join(format!("{algo}.tune.csv")))?;
            let model = ml::train_classifier(&res.best, &table.names, &x, &y)?;
            let path = out.join(format!("{algo}.tuned.seml"));
            serialize::save_model(&model, &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::BuildCnn { fixture } => {
            let g = if fixture {
                let f = build_fixture(cfg.seed)?;
                println!("fixture fitted accuracy {:.4}", f.train_accuracy);
                f.graph
            } else {
                build_sleeplitecnn(&cfg.cnn)?
            };
            println!(
                "SleepLiteCNN: {} parameters, {} layers",
                g.param_count(),
                g.layers.len()
            );
            let path = out.join("sleeplitecnn.slcw");
            save_model(&g.into(), &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::Quantize { model, calibration } => {
            let ModelFile::Float(g) = load_model(&model)? else {
                return Err(Error::InvalidConfig("model is already quantised".into()));
            };
            let n = cfg.calibration_windows;
            let calib: Vec<Vec<f64>> = match calibration {
                Some(p) => {
                    let rec = read_recording(&p, format_of(&p, None)?, &read_options(&cfg))?;
                    let w = g.input_shape.size();
                    let step = cfg.dl_window.step_samples(rec.sample_rate_hz).max(1);
                    let wins: Vec<Vec<f64>> =
                        sleeplite::windowing::window_offsets(rec.samples.len(), w, step)
                            .map(|o| rec.samples[o..o + w].to_vec())
                            .collect();
                    let stride = (wins.len() / n).max(1);
                    wins.into_iter().step_by(stride).take(n).collect()
                }
                None => fixture_inputs(n, cfg.seed)
                    .into_iter()
                    .map(|(x, _)| x)
                    .collect(),
            };
            let q = quantize_model(&g, &calibrate(&g, &calib)?)?;
            println!(
                "calibrated on {} windows; input exponent {}",
                calib.len(),
                q.input_exp
            );
            let path = out.join("sleeplitecnn.int8.slcw");
            save_model(&q.into(), &path)?;
            println!("wrote {}", path.display());
        }
        Cmd::Infer { model, input } => {
            let m = load_model(&model)?;
            let cnn = Cnn::from(&m);
            let rec = load(&input, &cfg)?;
            let w = cfg.dl_window.window_samples(rec.sample_rate_hz);
            let step = cfg.dl_window.step_samples(rec.sample_rate_hz);
            let mut s = String::from("time_s,stage,p_wake,p_rem,p_light,p_deep\n");
            for o in sleeplite::windowing::window_offsets(rec.samples.len(), w, step) {
                let p = cnn.proba(&rec.samples[o..o + w])?;
                let st = SleepStage::ALL[ml::argmax(&p)];
                s.push_str(&format!("{},{}", o as f64 / rec.sample_rate_hz as f64, st));
                p.iter().for_each(|v| s.push_str(&format!(",{v:.6}")));
                s.push('\n');
            }
            let path = out.join(format!("{}.predictions.csv", rec.subject_id));
            fs::write(&path, s)?;
            println!("wrote {}", path.display());
        }
        Cmd::Energy { model, node } => {
            let table = cfg.energy_table()?;
            let node = node.unwrap_or(cfg.target_node_nm);
            let reports: Vec<EnergyReport> = match model {
                Some(p) => match load_model(&p)? {
                    ModelFile::Float(g) => vec![estimate_energy(
                        &profile_ops(&g, Precision::Float32),
                        &table,
                    )?],
                    ModelFile::Quantized(q) => {
                        vec![estimate_energy(&profile_quantized(&q), &table)?]
                    }
                },
                None => {
                    let g = build_sleeplitecnn(&cfg.cnn)?;
                    let calib: Vec<Vec<f64>> = fixture_inputs(cfg.calibration_windows, cfg.seed)
                        .into_iter()
                        .map(|(x, _)| x)
                        .collect();
                    let q = quantize_model(&g, &calibrate(&g, &calib)?)?;
                    vec![
                        estimate_energy(&profile_ops(&g, Precision::Float32), &table)?,
                        estimate_energy(&profile_quantized(&q), &table)?,
                    ]
                }
            };
            for r in &reports {
                let path = out.join(format!("energy_{}.csv", r.precision));
                r.write_csv(&path)?;
                let scaled = scale_to_node(r, node, &table)?;
                println!(
                    "{}: {:.3} uJ at {} nm, {:.4} mJ at {node} nm ({})",
                    r.precision,
                    r.total_uj,
                    r.node_nm,
                    scaled.total_uj / 1000.0,
                    path.display()
                );
            }
            if let [fp, i8] = reports.as_slice() {
                println!("fp32/int8 ratio {:.2}", fp.total_uj / i8.total_uj);
            }
        }
        Cmd::Evaluate {
            model,
            features,
            input,
            annotations,
            split,
        } => {
            if let Some(f) = features {
                let table = FeatureTable::read_csv(&f)?;
                let m = serialize::load_model(&model)?;
                let (x, y) = match split {
                    Some(s) => table.subset(s.parse()?),
                    None => (table.rows.clone(), table.labels.clone()),
                };
                let pred = m.predict(&table.names, &x)?;
                print_metrics(&compute_metrics(&y, &pred.labels)?);
                let (train_x, train_y) = table.subset(SplitTag::Train);
                if !train_x.is_empty() {
                    let (maj, acc) = majority_baseline(&train_y, &y);
                    println!("majority baseline ({maj}) {acc:.4}");
                }
            } else {
                let (Some(i), Some(a)) = (input, annotations) else {
                    return Err(Error::InvalidConfig(
                        "evaluate needs --features, or --input with --annotations".into(),
                    ));
                };
                let m = load_model(&model)?;
                let rec = load_annotated(&i, &a, format_of(&i, None)?, &read_options(&cfg))?;
                let (set, pred, _) = cnn_labelled(Cnn::from(&m), &rec, &cfg.dl_window)?;
                print_metrics(&compute_metrics(&set.labels(), &pred)?);
            }
        }
        Cmd::Hypnogram { model, input } => {
            let m = load_model(&model)?;
            let rec = load(&input, &cfg)?;
            let hyp = if rec.annotations.is_empty() {
                cnn_hypnogram(Cnn::from(&m), &rec, &cfg.dl_window)?
            } else {
                let (set, pred, _) = cnn_labelled(Cnn::from(&m), &rec, &cfg.dl_window)?;
                emit_hypnogram(&set, &pred)?
            };
            let base = out.join(format!("{}.hypnogram", rec.subject_id));
            hyp.write_csv(&out.join(format!("{}.hypnogram.csv", rec.subject_id)))?;
            hyp.write_svg(&out.join(format!("{}.hypnogram.svg", rec.subject_id)))?;
            println!(
                "{} rows at {} s, {} gaps; wrote {}.{{csv,svg}}",
                hyp.entries.len(),
                hyp.step_s,
                hyp.gaps(),
                base.display()
            );
        }
    }
    Ok(())
}

fn read_options(cfg: &Config) -> ReadOptions {
    ReadOptions {
        channel: cfg.channel.clone(),
        expected_rate_hz: None,
    }
}

fn format_of(path: &Path, given: Option<RecordingFormat>) -> Result<RecordingFormat> {
    given
        .or_else(|| RecordingFormat::from_path(path))
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "cannot tell the format of {}; pass --format",
                path.display()
            ))
        })
}

fn load(input: &Input, cfg: &Config) -> Result<EcgRecording> {
    let format = format_of(&input.input, input.format)?;
    match &input.annotations {
        Some(a) => load_annotated(&input.input, a, format, &read_options(cfg)),
        None => read_recording(&input.input, format, &read_options(cfg)),
    }
}

fn print_metrics(m: &Metrics) {
    println!(
        "accuracy {:.4}, macro F1 {:.4}, macro precision {:.4}, macro recall {:.4}",
        m.accuracy, m.macro_f1, m.macro_precision, m.macro_recall
    );
    for (s, c) in SleepStage::ALL.iter().zip(&m.per_class) {
        println!(
            "  {s:<5} P {:.3} R {:.3} F1 {:.3} n {}",
            c.precision, c.recall, c.f1, c.support
        );
    }
    if !m.absent.is_empty() {
        println!("  absent from truth: {:?}", m.absent);
    }
    print!("{}", m.confusion.to_csv());
}
