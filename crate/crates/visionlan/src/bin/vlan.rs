//! Command-line interface: dataset generation, occlusion, training,
//! evaluation, benchmarking, mask inspection and gradient verification.

use anyhow::Context;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use visionlan::config::RunConfig;
use visionlan::corpus::{build_corpus, split_corpus};
use visionlan::dataset::{read_dataset, write_dataset};
use visionlan::error::VlanError;
use visionlan::eval::{bench_latency, build_eval_set, count_eips, evaluate};
use visionlan::gradcheck::gradient_check;
use visionlan::model::mlm::predict_mask;
use visionlan::model::{Masker, Model};
use visionlan::occlude::{occlude_ost, OcclusionDegree, OcclusionSpec};
use visionlan::render::render_word;
use visionlan::rng::mix;
use visionlan::tensor::Tensor;
use visionlan::training::{checkpoint, run_training, schedule::Stage, SampleSpec};
use visionlan::vocab::sample_char_index;

#[derive(Parser)]
#[command(
    name = "vlan",
    about = "Scene-text recognizer with trained-in language capability",
    long_about = "Scene-text recognizer that acquires linguistic capability by reading \
                  through character-wise feature occlusion during training. Inference uses \
                  the vision model alone: zero extra parameters for language.\n\n\
                  Key config defaults: train.lambda1 = train.lambda2 = 0.5 (loss balance), \
                  train.ratio = 1:1 (occluded:clean per language-aware batch), \
                  model.depth = 3 (reasoning stack), model.n = 12 decode steps (desk scale; \
                  25 at full scale), train.lr = 1e-4 (Adam). Set VLAN_THREADS to cap \
                  worker parallelism."
)]
struct Cli {
    /// Path to a key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides train.seed and data.seed together.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Checkpoint file (or directory of checkpoints for eval).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,

    /// Forbid any reduction-order nondeterminism. Reductions are already
    /// fixed-order at any thread count; this flag additionally pins the
    /// worker count to one.
    #[arg(long, global = true)]
    strict_deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the train/test word corpus to dataset files.
    RenderDataset,
    /// Apply line occlusion to an existing dataset file.
    Occlude {
        /// Input dataset path.
        #[arg(long)]
        input: PathBuf,
        /// Occlusion degree: weak (one line) or heavy (two lines).
        #[arg(long, default_value = "weak")]
        degree: String,
    },
    /// Train a model; writes metrics.csv, checkpoints and config.snapshot.
    Train,
    /// Evaluate a checkpoint (or every checkpoint in a directory).
    Eval {
        /// Also write a step-vs-accuracy CSV across checkpoints.
        #[arg(long)]
        emit_curves: bool,
    },
    /// Compare inference latency and parameter counts against the
    /// vision-only baseline.
    Bench,
    /// Dump predicted character masks as PGM images.
    InspectMask {
        /// Number of held-out words to inspect.
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Verify analytic gradients against central differences (fp64).
    Gradcheck,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.strict_deterministic && std::env::var("VLAN_THREADS").is_err() {
        std::env::set_var("VLAN_THREADS", "1");
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .downcast_ref::<VlanError>()
                .map_or(1, VlanError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train_seed = seed;
        cfg.data_seed = seed;
    }
    Ok(cfg)
}

fn write_snapshot(out: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.snapshot"), cfg.snapshot())?;
    Ok(())
}

/// Rebuilds the model a checkpoint was trained with, from its embedded
/// config snapshot.
fn model_from_checkpoint(path: &Path) -> anyhow::Result<(Model<f32>, RunConfig, u64)> {
    let ck = checkpoint::load(path)?;
    let cfg = RunConfig::parse(&ck.config_snapshot)
        .with_context(|| "checkpoint carries an unreadable config snapshot")?;
    let mut model = Model::<f32>::new(cfg.model_config()?, cfg.train_seed)?;
    ck.restore_into(&mut model.params)?;
    Ok((model, cfg, ck.step))
}

fn split_words(cfg: &RunConfig) -> anyhow::Result<(Vec<String>, Vec<String>)> {
    let corpus = build_corpus(cfg.data_corpus_size, cfg.data_max_word_len, cfg.data_seed)?;
    Ok(split_corpus(&corpus, cfg.data_train_frac, cfg.data_seed))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::RenderDataset => render_dataset(&cli, &cfg),
        Command::Occlude { input, degree } => occlude_cmd(&cli, &cfg, input, degree),
        Command::Train => train_cmd(&cli, &cfg),
        Command::Eval { emit_curves } => eval_cmd(&cli, &cfg, *emit_curves),
        Command::Bench => bench_cmd(&cli, &cfg),
        Command::InspectMask { count } => inspect_mask_cmd(&cli, &cfg, *count),
        Command::Gradcheck => gradcheck_cmd(),
    }
}

fn render_dataset(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<()> {
    write_snapshot(&cli.out, cfg)?;
    let render_cfg = cfg.render_config();
    let (train, test) = split_words(cfg)?;
    for (name, words) in [("train", &train), ("test", &test)] {
        let samples: Vec<_> = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                render_word(w, &render_cfg, mix(&[cfg.data_seed, 0x6473_6574, i as u64]))
            })
            .collect::<visionlan::Result<_>>()?;
        let path = cli.out.join(format!("{name}.vlds"));
        write_dataset(&path, &samples)?;
        println!("wrote {} samples to {}", samples.len(), path.display());
    }
    Ok(())
}

fn occlude_cmd(cli: &Cli, cfg: &RunConfig, input: &Path, degree: &str) -> anyhow::Result<()> {
    let degree = match degree {
        "weak" => OcclusionDegree::Weak,
        "heavy" => OcclusionDegree::Heavy,
        other => {
            return Err(VlanError::Config(format!("unknown occlusion degree '{other}'")).into());
        }
    };
    let samples = read_dataset(input)?;
    let occluded: Vec<_> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let seed = mix(&[cfg.eval_seed, 0x6f63_6364, i as u64]);
            let p = sample_char_index(s.text.chars().count(), seed)?;
            occlude_ost(s, &OcclusionSpec::new(degree, p, seed))
        })
        .collect::<visionlan::Result<_>>()?;
    std::fs::create_dir_all(&cli.out)?;
    let name = input
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    let out = cli.out.join(format!(
        "{name}_{}.vlds",
        if degree == OcclusionDegree::Weak { "weak" } else { "heavy" }
    ));
    write_dataset(&out, &occluded)?;
    println!("wrote {} occluded samples to {}", occluded.len(), out.display());
    Ok(())
}

fn train_cmd(cli: &Cli, cfg: &RunConfig) -> anyhow::Result<()> {
    write_snapshot(&cli.out, cfg)?;
    let (train_words, _) = split_words(cfg)?;
    let mut model = Model::<f32>::new(cfg.model_config()?, cfg.train_seed)?;
    println!(
        "training {} parameters on {} words ({} steps, batch {})",
        model.params.element_count(None),
        train_words.len(),
        cfg.train_total_steps,
        cfg.train_batch_size
    );
    let history = run_training(
        &mut model,
        &cfg.train_config(),
        &cfg.render_config(),
        &train_words,
        Some(&cli.out),
        &cfg.snapshot(),
        false,
    )?;
    if let Some(last) = history.last() {
        println!("final: {}", last.csv_line());
    }
    println!("metrics: {}", cli.out.join("metrics.csv").display());
    Ok(())
}

fn checkpoints_to_eval(cli: &Cli) -> anyhow::Result<Vec<PathBuf>> {
    let path = cli
        .checkpoint
        .clone()
        .ok_or_else(|| VlanError::Config("eval requires --checkpoint".into()))?;
    if path.is_dir() {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "vlan"))
            .collect();
        found.sort();
        if found.is_empty() {
            return Err(VlanError::Config(format!(
                "no .vlan checkpoints under {}",
                path.display()
            ))
            .into());
        }
        Ok(found)
    } else {
        Ok(vec![path])
    }
}

fn eval_cmd(cli: &Cli, override_cfg: &RunConfig, emit_curves: bool) -> anyhow::Result<()> {
    let paths = checkpoints_to_eval(cli)?;
    std::fs::create_dir_all(&cli.out)?;
    let mut curve_lines = vec!["step,clean,weak,heavy,occluded".to_string()];
    let mut last_summary = String::new();
    for path in &paths {
        let (model, ck_cfg, step) = model_from_checkpoint(path)?;
        // Evaluation geometry comes from the checkpoint's own config; the
        // eval.* knobs may be overridden from the command line.
        let mut cfg = ck_cfg;
        cfg.eval_n_words = override_cfg.eval_n_words;
        cfg.eval_seed = override_cfg.eval_seed;
        let (_, test_words) = split_words(&cfg)?;
        let words: Vec<String> = if cfg.eval_n_words > 0 {
            test_words.into_iter().take(cfg.eval_n_words).collect()
        } else {
            test_words
        };
        let set = build_eval_set(&words, &cfg.render_config(), cfg.eval_seed)?;
        let report = evaluate(&model, &set, &format!("step{step}"))?;
        curve_lines.push(format!(
            "{step},{:.4},{:.4},{:.4},{:.4}",
            report.clean_accuracy,
            report.weak_accuracy,
            report.heavy_accuracy,
            report.occluded_accuracy()
        ));
        last_summary = report.summary();
        println!("{}", report.summary());
        let mut csv = String::from(visionlan::eval::EvalReport::csv_header());
        csv.push('\n');
        csv.push_str(&report.csv_line());
        csv.push('\n');
        std::fs::write(cli.out.join(format!("report_step{step}.csv")), csv)?;
    }
    std::fs::write(cli.out.join("summary.txt"), last_summary)?;
    if emit_curves {
        std::fs::write(cli.out.join("curves.csv"), curve_lines.join("\n") + "\n")?;
        println!("curves: {}", cli.out.join("curves.csv").display());
    }
    Ok(())
}

fn bench_cmd(cli: &Cli, override_cfg: &RunConfig) -> anyhow::Result<()> {
    let path = cli
        .checkpoint
        .clone()
        .ok_or_else(|| VlanError::Config("bench requires --checkpoint".into()))?;
    let (model, cfg, _) = model_from_checkpoint(&path)?;

    // Vision-only baseline with the identical architecture.
    let mut base_cfg = cfg.model_config()?;
    base_cfg.masker = Masker::None;
    let baseline = Model::<f32>::new(base_cfg, cfg.train_seed)?;

    let (_, test_words) = split_words(&cfg)?;
    let inputs: Vec<Tensor<f32>> = test_words
        .iter()
        .take(8)
        .enumerate()
        .map(|(i, w)| Ok(render_word(w, &cfg.render_config(), i as u64)?.image))
        .collect::<visionlan::Result<_>>()?;

    let warmup = override_cfg.eval_latency_warmup;
    let reps = override_cfg.eval_latency_reps;
    println!(
        "latency protocol: single image, strictly serial, {warmup} warmup + {reps} timed \
         forwards, monotonic clock"
    );
    let test_lat = bench_latency(&model, &inputs, warmup, reps)?;
    let base_lat = bench_latency(&baseline, &inputs, warmup, reps)?;
    let eips = count_eips(&model, &baseline)?;
    println!(
        "model:    mean {:.2} ms, p50 {:.2} ms, p95 {:.2} ms",
        test_lat.mean_ms, test_lat.p50_ms, test_lat.p95_ms
    );
    println!(
        "baseline: mean {:.2} ms, p50 {:.2} ms, p95 {:.2} ms",
        base_lat.mean_ms, base_lat.p50_ms, base_lat.p95_ms
    );
    println!("latency ratio (model/baseline): {:.3}", test_lat.mean_ms / base_lat.mean_ms);
    println!("extra inference parameters vs baseline: {eips}");

    std::fs::create_dir_all(&cli.out)?;
    std::fs::write(
        cli.out.join("bench.csv"),
        format!(
            "who,mean_ms,p50_ms,p95_ms,eip\nmodel,{:.3},{:.3},{:.3},{eips}\nbaseline,{:.3},{:.3},{:.3},0\n",
            test_lat.mean_ms,
            test_lat.p50_ms,
            test_lat.p95_ms,
            base_lat.mean_ms,
            base_lat.p50_ms,
            base_lat.p95_ms,
        ),
    )?;
    Ok(())
}

fn inspect_mask_cmd(cli: &Cli, override_cfg: &RunConfig, count: usize) -> anyhow::Result<()> {
    let path = cli
        .checkpoint
        .clone()
        .ok_or_else(|| VlanError::Config("inspect-mask requires --checkpoint".into()))?;
    let (model, cfg, _) = model_from_checkpoint(&path)?;
    let mlm = model
        .ids
        .mlm
        .as_ref()
        .ok_or_else(|| VlanError::Config("checkpoint has no mask module (masker = none)".into()))?;
    let (_, test_words) = split_words(&cfg)?;
    std::fs::create_dir_all(&cli.out)?;

    let render_cfg = cfg.render_config();
    let (fh, fw) = model.cfg.feature_dims();
    for (i, word) in test_words.iter().take(count).enumerate() {
        let sample = render_word(word, &render_cfg, override_cfg.eval_seed.wrapping_add(i as u64))?;
        write_pgm(&cli.out.join(format!("{i}_input.pgm")), &sample.image)?;
        let images = sample
            .image
            .clone()
            .reshaped(vec![1, cfg.render_height, cfg.render_width])?;
        let features = visionlan::model::backbone::extract_features(
            &images,
            &model.ids.backbone,
            &model.cfg.backbone,
            &model.params,
        )?;
        let v = features.reshaped(vec![fh, fw, model.cfg.c])?;
        for p in 1..=word.chars().count() {
            let mask = predict_mask(&v, p, mlm, &model.spatial_pe, &model.params)?;
            write_pgm(&cli.out.join(format!("{i}_{p}.pgm")), &mask)?;
        }
        println!("inspected '{word}' ({} masks)", word.chars().count());
    }
    Ok(())
}

fn write_pgm(path: &Path, image: &Tensor<f32>) -> anyhow::Result<()> {
    let (h, w) = image.dims2()?;
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(image.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, bytes)?;
    Ok(())
}

fn gradcheck_cmd() -> anyhow::Result<()> {
    use visionlan::model::backbone::{BackboneConfig, StageConfig};
    use visionlan::model::ModelConfig;
    use visionlan::render::RenderConfig;
    use visionlan::training::{full_loss_fn, TrainConfig};

    let cfg = ModelConfig {
        c: 8,
        n_heads: 2,
        vsr_depth: 1,
        n_max: 5,
        image_h: 16,
        image_w: 24,
        backbone: BackboneConfig {
            stages: vec![
                StageConfig { width: 4, stride: (2, 2), blocks: 1 },
                StageConfig { width: 8, stride: (2, 2), blocks: 1 },
            ],
        },
        masker: Masker::Mlm,
        mask_detached: false,
        mlm_coupled: true,
    };
    let model = Model::<f64>::new(cfg, 11)?;
    let tcfg = TrainConfig { batch_size: 1, total_steps: 2, ..TrainConfig::default() };
    let render_cfg = RenderConfig::plain(16, 24, 4);
    let spec = SampleSpec { word: "cab".into(), render_seed: 5, p: 2, occlude: true, mask_seed: 9 };

    let loss_fn = full_loss_fn(&model, &tcfg, &render_cfg, &spec, Stage::La);
    let mut params = model.params.clone();
    let err = gradient_check(&loss_fn, &mut params, 1e-5, 3, 0)?;
    println!("full objective (fp64, central differences): max relative error {err:.3e}");
    if err >= 1e-4 {
        return Err(VlanError::Numeric(format!(
            "gradient verification failed: {err:.3e} >= 1e-4"
        ))
        .into());
    }
    println!("gradients verified");
    Ok(())
}
