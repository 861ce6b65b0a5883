use std::path::{Path, PathBuf};

use aecif::assess::{
    assess_image, assess_masks, colorize_mask, render_overlay, render_report, viz_features, viz_mask,
    AssessConfig, GradeSummary, DEFECT_PALETTE, ELEMENT_PALETTE,
};
use aecif::dataset::io::{
    self, decode_mask_png, encode_gray_png, encode_image_png, encode_rgb_png, DEFECT_MASKS_DIR, ELEMENT_MASKS_DIR,
};
use aecif::dataset::{format_id, split_dataset, synth_generate, Sample, Split};
use aecif::kv::{parse_pair, KvDoc};
use aecif::metrics::{render_class_table, render_task_csv, render_task_table, task_metrics, ConfusionCounts, MetricsReport};
use aecif::model::{load_checkpoint, save_checkpoint, AecifNet, TaskId, Variant};
use aecif::trainer::{mask_for, run_ablation_on, train_on_with, TrainConfig};
use aecif::{Error, Result};

use crate::say;
use crate::rundir::{create_run_dir, write_bytes, write_text};
use crate::{AssessArgs, Cli, CliError, Command, DataArgs, EvalArgs, GenDataArgs, Preset, VizArgs};

type CliResult<T = ()> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::GenData(args) => gen_data(cli, args),
        Command::Train(args) => train(cli, args),
        Command::Eval(args) => eval(cli, args),
        Command::Ablate(args) => ablate(cli, args),
        Command::Assess(args) => assess(cli, args),
        Command::Viz(args) => viz(cli, args),
        Command::CountParams => count_params(cli),
    }
}

/// Preset, then the config file, then `--seed`, then `--set` overrides.
fn resolve_config(cli: &Cli, data: Option<&PathBuf>) -> Result<TrainConfig> {
    let base = match cli.preset {
        Preset::Desk => TrainConfig::desk(),
        Preset::Full => TrainConfig::full(),
    };
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::load(path, &base)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg = cfg.with_overrides(cli.set.iter().map(String::as_str))?;
    if let Some(dir) = data {
        cfg.data_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn require_data_dir(cfg: &TrainConfig) -> CliResult<PathBuf> {
    cfg.data_dir
        .clone()
        .ok_or_else(|| CliError::Usage("no dataset given; pass --data or set data_dir".into()))
}

fn parse_split(raw: &str) -> CliResult<Split> {
    raw.parse().map_err(CliError::Usage)
}

/// Run directory with the resolved config written into it.
fn start_run(cli: &Cli, command: &str, cfg: &TrainConfig) -> Result<PathBuf> {
    let dir = create_run_dir(&cli.out, command)?;
    cfg.save(&dir.join("train.cfg"))?;
    say!("run directory: {}", dir.display());
    Ok(dir)
}

fn load_split(root: &Path, split: Split) -> Result<Vec<Sample>> {
    let manifest = io::read_manifest(root)?;
    io::load_samples(root, manifest.ids(split))
}

fn gen_data(cli: &Cli, args: &GenDataArgs) -> CliResult {
    let size = if args.size.contains('x') {
        parse_pair(&args.size).map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        let n: usize = args
            .size
            .parse()
            .map_err(|_| CliError::Usage(format!("--size `{}` is not N or HxW", args.size)))?;
        (n, n)
    };
    if args.dir.join(io::IMAGES_DIR).exists() {
        return Err(Error::Config(format!("{} already holds a dataset", args.dir.display())).into());
    }
    let seed = cli.seed.unwrap_or(0);
    let test_count = args.test_count.unwrap_or((args.count / 10).max(1));
    let samples = synth_generate(args.count, size, seed)?;
    let ids: Vec<u32> = samples.iter().map(|s| s.id).collect();
    let manifest = split_dataset(&ids, test_count, args.train_fraction, seed)?;
    io::write_dataset(&args.dir, &samples, &manifest)?;
    let mut doc = KvDoc::new();
    doc.insert("count", args.count);
    doc.insert("size", format!("{}x{}", size.0, size.1));
    doc.insert("seed", seed);
    doc.insert("test_count", test_count);
    doc.insert("train_fraction", args.train_fraction);
    write_text(&args.dir.join("gen.cfg"), &doc.render())?;
    say!(
        "wrote {} samples ({}x{}) to {}: {} train / {} validation / {} test",
        samples.len(),
        size.0,
        size.1,
        args.dir.display(),
        manifest.train.len(),
        manifest.validation.len(),
        manifest.test.len()
    );
    Ok(())
}

fn train(cli: &Cli, args: &DataArgs) -> CliResult {
    let cfg = resolve_config(cli, args.data.as_ref())?;
    let root = require_data_dir(&cfg)?;
    let (train_set, val_set) = aecif::trainer::load_training_splits(&root)?;
    let dir = start_run(cli, "train", &cfg)?;
    let outcome = train_on_with(&train_set, &val_set, &cfg, |r| {
        say!(
            "epoch {:>4}  lr {:.3e}  loss_e {:.4}  loss_d {:.4}  lambda [{:.4}, {:.4}]  total {:.4}  val {:.4}",
            r.epoch, r.lr, r.loss_element, r.loss_defect, r.lambda_element, r.lambda_defect, r.loss_total, r.val_loss
        );
    })?;
    write_text(&dir.join("history.csv"), &outcome.history.render())?;
    save_checkpoint(&outcome.best, &dir.join("checkpoint"))?;
    if let Some(best) = outcome.history.best() {
        say!("best epoch {} (validation loss {:.6})", best.epoch, best.val_loss);
    }
    say!("checkpoint: {}", dir.join("checkpoint").display());
    Ok(())
}

fn eval(cli: &Cli, args: &EvalArgs) -> CliResult {
    let cfg = resolve_config(cli, args.data.as_ref())?;
    let root = require_data_dir(&cfg)?;
    let split = parse_split(&args.split)?;
    if args.checkpoint.is_some() == args.predictions.is_some() {
        return Err(CliError::Usage("pass exactly one of --checkpoint or --predictions".into()));
    }
    let samples = load_split(&root, split)?;
    let report = match (&args.checkpoint, &args.predictions) {
        (Some(ckpt), None) => {
            let model = load_checkpoint(ckpt)?;
            aecif::trainer::evaluate(&model, &samples, "checkpoint")?
        }
        (None, Some(pred)) => evaluate_predictions(pred, &samples)?,
        _ => unreachable!(),
    };
    let dir = start_run(cli, "eval", &cfg)?;
    let reports = [report];
    let table = format!("{}\n{}", render_task_table(&reports), render_class_table(&reports));
    write_text(&dir.join("metrics.csv"), &render_task_csv(&reports))?;
    write_text(&dir.join("metrics.txt"), &table)?;
    say!("{}", table.trim_end());
    Ok(())
}

/// Metrics of mask files stored in the dataset layout under `pred_root`.
fn evaluate_predictions(pred_root: &Path, samples: &[Sample]) -> Result<MetricsReport> {
    let mut report = MetricsReport::new("predictions");
    for task in TaskId::ALL {
        let spec = task.spec();
        let dir = match task {
            TaskId::Element => ELEMENT_MASKS_DIR,
            TaskId::Defect => DEFECT_MASKS_DIR,
        };
        let mut counts = ConfusionCounts::new(spec.class_count());
        for s in samples {
            let path = pred_root.join(dir).join(format!("{}.png", format_id(s.id)));
            let bytes = std::fs::read(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            let pred = decode_mask_png(&bytes)?;
            pred.validate(spec.class_count())?;
            counts.accumulate(&pred, mask_for(s, task))?;
        }
        report.set_task(task_metrics(&counts, &spec)?);
    }
    Ok(report)
}

fn ablate(cli: &Cli, args: &DataArgs) -> CliResult {
    let cfg = resolve_config(cli, args.data.as_ref())?;
    let root = require_data_dir(&cfg)?;
    let (train_set, val_set, test_set) = aecif::trainer::load_all_splits(&root)?;
    let dir = start_run(cli, "ablate", &cfg)?;
    let report = run_ablation_on(&train_set, &val_set, &test_set, &cfg, |variant, r| {
        let miou = |t| r.task(t).map(|m| format!("{:.4}", m.mean_iou)).unwrap_or_else(|| "-".into());
        say!(
            "trained {:<24} element mIoU {}  defect mIoU {}",
            variant.label(),
            miou(TaskId::Element),
            miou(TaskId::Defect)
        );
    })?;
    for (variant, history) in &report.histories {
        write_text(&dir.join(format!("history-{}.csv", variant.slug())), &history.render())?;
    }
    let table = render_task_table(&report.rows);
    write_text(&dir.join("ablation.csv"), &render_task_csv(&report.rows))?;
    write_text(&dir.join("ablation.txt"), &table)?;
    say!("{}", table.trim_end());
    Ok(())
}

fn assess(cli: &Cli, args: &AssessArgs) -> CliResult {
    let cfg = resolve_config(cli, args.data.as_ref())?;
    let root = require_data_dir(&cfg)?;
    let split = parse_split(&args.split)?;
    let samples = load_split(&root, split)?;
    let mut assess_cfg = match cli.preset {
        Preset::Desk => AssessConfig::desk(),
        Preset::Full => AssessConfig::full(),
    };
    if let Some(a) = args.min_area {
        assess_cfg.min_area = a;
    }
    let model = match (&args.checkpoint, args.ground_truth) {
        (Some(_), true) => return Err(CliError::Usage("--checkpoint and --ground-truth are exclusive".into())),
        (Some(ckpt), false) => Some(load_checkpoint(ckpt)?),
        (None, _) => None,
    };
    let dir = start_run(cli, "assess", &cfg)?;
    let mut summary = GradeSummary::default();
    for s in &samples {
        let (report, element, defect) = match &model {
            Some(m) => assess_image(s, m, &assess_cfg)?,
            None => (
                assess_masks(s.id, &s.element_mask, &s.defect_mask, &assess_cfg)?,
                s.element_mask.clone(),
                s.defect_mask.clone(),
            ),
        };
        let name = format_id(s.id);
        write_text(&dir.join("assess").join(format!("{name}.txt")), &render_report(&report))?;
        let overlay = render_overlay(s, &element, &defect, &report);
        write_bytes(
            &dir.join("assess").join(format!("{name}.png")),
            &encode_rgb_png(s.height(), s.width(), &overlay)?,
        )?;
        summary.add(&report);
    }
    let text = summary.render();
    write_text(&dir.join("summary.txt"), &text)?;
    say!("assessed {} images", samples.len());
    say!("{}", text.trim_end());
    Ok(())
}

fn viz(cli: &Cli, args: &VizArgs) -> CliResult {
    let cfg = resolve_config(cli, args.data.as_ref())?;
    let root = require_data_dir(&cfg)?;
    let split = parse_split(&args.split)?;
    let manifest = io::read_manifest(&root)?;
    let id = match args.id {
        Some(id) => id,
        None => *manifest
            .ids(split)
            .first()
            .ok_or_else(|| Error::Data(format!("{split} split is empty")))?,
    };
    let sample = io::load_sample(&root, id)?;
    let model: AecifNet<f32> = load_checkpoint(&args.checkpoint)?;
    let out = model.forward_eval(&sample.image)?;
    let size = (sample.height(), sample.width());
    let dir = start_run(cli, "viz", &cfg)?;
    let gray = |path: PathBuf, img: aecif::assess::GrayImage| -> Result<()> {
        write_bytes(&path, &encode_gray_png(img.height, img.width, &img.data)?)
    };
    write_bytes(&dir.join("image.png"), &encode_image_png(&sample.image)?)?;
    let inter = &out.intermediates;
    gray(dir.join("embedding.png"), viz_features(&inter.embedding, args.channel, size)?)?;
    for (k, task) in inter.tasks.iter().enumerate() {
        let name = task.name();
        gray(dir.join(format!("features-{name}.png")), viz_features(&inter.task_features[k], args.channel, size)?)?;
        gray(dir.join(format!("fused-{name}.png")), viz_features(&inter.fused[k], args.channel, size)?)?;
        if let Some(mask) = inter.masks.get(k) {
            gray(dir.join(format!("attention-{name}.png")), viz_mask(mask, args.channel, size)?)?;
        }
        let scores = out.scores.get(*task).expect("active task has scores");
        let pred = aecif::dataset::argmax_mask(scores, 0)?;
        let palette: &[[u8; 3]] = match task {
            TaskId::Element => &ELEMENT_PALETTE,
            TaskId::Defect => &DEFECT_PALETTE,
        };
        write_bytes(
            &dir.join(format!("prediction-{name}.png")),
            &encode_rgb_png(size.0, size.1, &colorize_mask(&pred, palette))?,
        )?;
        write_bytes(
            &dir.join(format!("truth-{name}.png")),
            &encode_rgb_png(size.0, size.1, &colorize_mask(mask_for(&sample, *task), palette))?,
        )?;
    }
    say!("wrote visualizations of sample {} (channel {})", format_id(id), args.channel);
    Ok(())
}

fn group(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn model_total(model: &AecifNet<f32>) -> usize {
    model.parameter_table().iter().map(|(_, n)| n).sum()
}

/// Per-module table plus add-on and single-task comparison lines.
pub fn parameter_report(cfg: &TrainConfig) -> Result<String> {
    let model = AecifNet::<f32>::uninitialized(cfg.model.clone())?;
    let rows = model.parameter_table();
    let sum_prefix = |p: &str| rows.iter().filter(|(n, _)| n.starts_with(p)).map(|(_, v)| v).sum::<usize>();
    let mut out = format!("{:<34} {:>14}\n", "module", "parameters");
    for (name, n) in &rows {
        out.push_str(&format!("{name:<34} {:>14}\n", group(*n)));
    }
    let relearn = sum_prefix("relearn.");
    let attention = sum_prefix("attention.");
    let heads = sum_prefix("head.");
    let total = model_total(&model);
    out.push_str(&format!("{:<34} {:>14}\n", "relearning subnets", group(relearn)));
    out.push_str(&format!("{:<34} {:>14}\n", "attention modules", group(attention)));
    out.push_str(&format!("{:<34} {:>14}\n", "add-on (relearning + attention)", group(relearn + attention)));
    out.push_str(&format!("{:<34} {:>14}\n", "decoder heads", group(heads)));
    out.push_str(&format!("{:<34} {:>14}\n", "total", group(total)));
    if cfg.model.tasks == aecif::model::TaskSelection::Both {
        let mut singles = 0;
        for task in TaskId::ALL {
            let single = AecifNet::<f32>::uninitialized(cfg.model.clone().with_variant(Variant::SingleTask(task)))?;
            singles += model_total(&single);
        }
        out.push_str(&format!("{:<34} {:>14}\n", "two single-task networks", group(singles)));
        let (sign, diff) = if singles >= total { ("", singles - total) } else { ("-", total - singles) };
        out.push_str(&format!(
            "{:<34} {:>14}\n",
            "saving over single-task networks",
            format!("{sign}{}", group(diff))
        ));
    }
    Ok(out)
}

fn count_params(cli: &Cli) -> CliResult {
    let cfg = resolve_config(cli, None)?;
    let text = parameter_report(&cfg)?;
    let dir = start_run(cli, "count-params", &cfg)?;
    write_text(&dir.join("params.txt"), &text)?;
    say!("{}", text.trim_end());
    Ok(())
}
