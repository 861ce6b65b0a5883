//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use aecif::assess::{assess_masks, grade_counts, grade_ratio, AssessConfig, ConditionState};
use aecif::dataset::{one_hot, synth_generate, synth_scenes, ClassIndexMask, SynthConfig};
use aecif::loss::{cross_entropy, cross_entropy_grad, dwa_weights, DwaState};
use aecif::metrics::{
    class_metrics, confusion_counts, model_delta, parse_task_csv, task_metrics, ConfusionCounts, MetricsReport,
};
use aecif::model::{
    co_interactive_fuse, param_group, AecifNet, ModelConfig, PredictionScores, TaskId, TaskSpec, Variant,
};
use aecif::nn::{count_parameters, finite_difference_check_kinked, FeatureMap, GradCheckConfig, Param, Parameterized, Shape};
use aecif::trainer::{evaluate, train_on, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

// 1 -------------------------------------------------------------------------

fn head_closed_form(width: usize, classes: usize) -> usize {
    width * width + width + 2 * width + width * classes + classes
}

fn parameter_counts() -> Outcome {
    let model = ok(AecifNet::<f32>::uninitialized(ModelConfig::full_scale()))?;
    let relearn_expected = 720 * 512 * 9 + 512 + 2 * 512;
    let attention_expected = 512 * 512 * 9 + 512;
    let mut addon = 0;
    let mut detail = Vec::new();
    for task in TaskId::ALL {
        let b = model.branch(task).ok_or("missing branch")?;
        let relearn = count_parameters(b.relearn.as_ref().ok_or("no relearning subnet")?.params());
        let attention = count_parameters(b.attention.as_ref().ok_or("no attention module")?.params());
        let head = count_parameters(b.head.params());
        let head_expected = head_closed_form(512, task.spec().class_count());
        ensure!(relearn == relearn_expected, "{task} relearn {relearn} != {relearn_expected}");
        ensure!(attention == attention_expected, "{task} attention {attention} != {attention_expected}");
        ensure!(head == head_expected, "{task} head {head} != {head_expected}");
        addon += relearn + attention;
        detail.push(format!("head.{task}={head}"));
    }
    ensure!(addon == 11_358_208, "add-on total {addon} != 11358208");
    ensure!(relearn_expected == 3_319_296 && attention_expected == 2_359_808, "closed form drifted");
    ensure!(head_closed_form(512, 7) == 267_271 && head_closed_form(512, 2) == 264_706, "head closed form");
    // Published figures, in millions. The heads are compared with the
    // three-decimal head figure; it describes the seven-class head.
    let near = |v: usize, m: f64| ((v as f64 - m * 1e6) / (m * 1e6)).abs() <= 0.005;
    ensure!(near(relearn_expected, 3.32), "relearn outside 0.5% of 3.32M");
    ensure!(near(attention_expected, 2.36), "attention outside 0.5% of 2.36M");
    ensure!(near(addon, 11.36), "add-on outside 0.5% of 11.36M");
    ensure!(near(267_271, 0.267), "element head outside 0.5% of 0.267M");
    let defect_dev = 100.0 * (267_000.0 - 264_706.0) / 267_000.0;
    Ok(format!(
        "relearn=3319296 attention=2359808 {} add-on=11358208 (defect head {defect_dev:.2}% below the 0.267M seven-class figure; exact count checked)",
        detail.join(" ")
    ))
}

// 2 -------------------------------------------------------------------------

fn dwa_suite() -> Outcome {
    let mut state = DwaState::new(2.0);
    ensure!(state.weights() == [1.0, 1.0], "epoch 1 weights {:?}", state.weights());
    ok(state.update([1.3, 0.7]))?;
    ensure!(state.weights() == [1.0, 1.0], "epoch 2 weights {:?}", state.weights());
    ok(state.update([1.1, 0.65]))?;
    ensure!(state.weights() != [1.0, 1.0], "epoch 3 weights did not move");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let mut s = DwaState::new(rng.random_range(0.5..4.0));
        for _ in 0..rng.random_range(1..12) {
            ok(s.update([rng.random_range(1e-3..5.0), rng.random_range(1e-3..5.0)]))?;
            let w = s.weights();
            ensure!((w[0] + w[1] - 2.0).abs() <= 1e-12, "weights {w:?} do not sum to 2");
        }
    }
    for r in [0.3, 1.0, 1.7] {
        let w = dwa_weights([r, r], 2.0);
        ensure!((w[0] - 1.0).abs() <= 1e-15 && (w[1] - 1.0).abs() <= 1e-15, "symmetric {r} -> {w:?}");
    }
    for _ in 0..1000 {
        let a: f64 = rng.random_range(0.05..3.0);
        let b: f64 = rng.random_range(0.05..3.0);
        let t = rng.random_range(0.5..4.0);
        let w = dwa_weights([a, b], t);
        ensure!((a > b) == (w[0] > w[1]) || a == b, "larger ratio must get larger weight: {a},{b} -> {w:?}");
        let bumped = dwa_weights([a + 0.1, b], t);
        ensure!(bumped[0] > w[0] && bumped[1] < w[1], "raising one ratio must shift weight toward it");
    }
    // Independent oracle: 2 * e^{w_i/T} / sum_j e^{w_j/T}.
    let (ea, eb) = ((1.0f64 / 2.0).exp(), (0.8f64 / 2.0).exp());
    let oracle = [2.0 * ea / (ea + eb), 2.0 * eb / (ea + eb)];
    let w = dwa_weights([1.0, 0.8], 2.0);
    let r5 = |v: f64| (v * 1e5).round() / 1e5;
    ensure!(r5(w[0]) == r5(oracle[0]) && r5(w[1]) == r5(oracle[1]), "{w:?} vs oracle {oracle:?}");
    ensure!(r5(w[0]) == 1.04996 && r5(w[1]) == 0.95004, "{w:?}");
    Ok(format!(
        "[1.0,0.8], T=2 -> [{:.5}, {:.5}] (oracle agrees; the quoted 1.04999/0.95001 is off in the 5th decimal)",
        w[0], w[1]
    ))
}

// 3 -------------------------------------------------------------------------

/// Weighted total loss and the ReLU on/off pattern of the forward pass.
fn batch_loss(
    model: &mut AecifNet<f64>,
    image: &FeatureMap<f64>,
    targets: &[(TaskId, FeatureMap<f64>)],
    lambda: [f64; 2],
) -> (f64, Vec<bool>) {
    let (scores, cache) = model.forward_train(image).expect("forward");
    let loss = targets
        .iter()
        .map(|(t, y)| lambda[t.index()] * cross_entropy(scores.get(*t).unwrap(), y).unwrap())
        .sum();
    (loss, model.relu_pattern(&cache))
}

fn gradient_check() -> Outcome {
    let cfg = ModelConfig::desk_scale_with_input(32, 32);
    ensure!(cfg.use_relearning && cfg.use_fusion, "desk config must enable relearning and fusion");
    let mut model = ok(AecifNet::<f64>::new(cfg, 11))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let image = FeatureMap::from_fn(Shape::new(2, 3, 32, 32), |_, _, _, _| rng.random_range(0.0..1.0));
    let targets: Vec<(TaskId, FeatureMap<f64>)> = TaskId::ALL
        .iter()
        .map(|&t| {
            let spec = t.spec();
            let parts: Vec<FeatureMap<f64>> = (0..2)
                .map(|_| {
                    let data = (0..32 * 32).map(|_| rng.random_range(0..spec.class_count() as u8)).collect();
                    one_hot(&ClassIndexMask::new(32, 32, data).unwrap(), &spec).unwrap()
                })
                .collect();
            (t, FeatureMap::stack(&parts).unwrap())
        })
        .collect();
    let lambda = [0.85, 1.15];

    model.zero_grad();
    let (scores, cache) = ok(model.forward_train(&image))?;
    let mut grads = PredictionScores::default();
    for (t, y) in &targets {
        let g = ok(cross_entropy_grad(scores.get(*t).unwrap(), y))?.map(|v| v * lambda[t.index()]);
        grads.set(*t, g);
    }
    ok(model.backward(&cache, &grads))?;
    let mut params: Vec<Param<f64>> = model.params().into_iter().cloned().collect();

    let mut probe = model.clone();
    let loss = |ps: &[Param<f64>]| {
        for (dst, src) in probe.params_mut().into_iter().zip(ps) {
            dst.value.copy_from_slice(&src.value);
        }
        batch_loss(&mut probe, &image, &targets, lambda)
    };
    let check = GradCheckConfig::default();
    let reports = ok(finite_difference_check_kinked(loss, &mut params, &check))?;
    if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
        for r in &reports {
            eprintln!("{r}");
        }
    }
    // (max relative error, coordinates compared, coordinates on a kink)
    let mut groups: BTreeMap<String, (f64, usize, usize)> = BTreeMap::new();
    for r in &reports {
        let e = groups.entry(param_group(&r.param).to_string()).or_insert((0.0, 0, 0));
        e.0 = e.0.max(r.max_rel_error);
        e.1 += r.checked;
        e.2 += r.skipped;
    }
    let expected = [
        "attention.defect",
        "attention.element",
        "encoder",
        "head.defect",
        "head.element",
        "relearn.defect",
        "relearn.element",
    ];
    ensure!(
        groups.keys().map(String::as_str).eq(expected.iter().copied()),
        "groups checked: {:?}",
        groups.keys().collect::<Vec<_>>()
    );
    let worst = groups.values().map(|g| g.0).fold(0.0, f64::max);
    let summary = groups
        .iter()
        .map(|(g, (e, _, _))| format!("{g}={e:.1e}"))
        .collect::<Vec<_>>()
        .join(" ");
    let (compared, kinked) = groups.values().fold((0, 0), |(c, k), g| (c + g.1, k + g.2));
    for (g, (_, c, k)) in &groups {
        // A check that skips most coordinates would prove little.
        ensure!(*k * 10 <= c + k, "{g}: {k} of {} coordinates straddle a ReLU kink", c + k);
    }
    ensure!(worst <= check.tolerance, "max relative error {worst:.3e} > {:.0e}: {summary}", check.tolerance);
    Ok(format!(
        "{} arrays, {compared} coordinates ({kinked} straddling a ReLU kink left out), max rel {worst:.2e}: {summary}",
        reports.len()
    ))
}

// 4 -------------------------------------------------------------------------

fn random_mask(rng: &mut ChaCha8Rng, classes: u8) -> ClassIndexMask {
    // Sometimes restrict the label range so some classes are absent.
    let hi = if rng.random_bool(0.3) { rng.random_range(1..=classes) } else { classes };
    let data = (0..256).map(|_| rng.random_range(0..hi)).collect();
    ClassIndexMask::new(16, 16, data).unwrap()
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    for spec in [TaskSpec::element(), TaskSpec::defect()] {
        let n = spec.class_count();
        let mut total = ConfusionCounts::new(n);
        let mut oracle = vec![[0u64; 3]; n]; // tp, fp, fn
        let mut pixels = 0u64;
        for _ in 0..200 {
            let pred = random_mask(&mut rng, n as u8);
            let truth = random_mask(&mut rng, n as u8);
            let counts = ok(confusion_counts(&pred, &truth, &spec))?;
            let mut local = vec![[0u64; 3]; n];
            for (&p, &t) in pred.data().iter().zip(truth.data()) {
                if p == t {
                    local[p as usize][0] += 1;
                } else {
                    local[p as usize][1] += 1;
                    local[t as usize][2] += 1;
                }
            }
            for j in 0..n {
                ensure!(
                    [counts.true_positive[j], counts.false_positive[j], counts.false_negative[j]] == local[j],
                    "class {j} counts differ"
                );
                for k in 0..3 {
                    oracle[j][k] += local[j][k];
                }
            }
            ensure!(counts.total == 256, "pixel total");
            pixels += 256;
            total += &counts;
            checked += 1;
        }
        let m = ok(task_metrics(&total, &spec))?;
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        let (mut ious, mut recalls) = (Vec::new(), Vec::new());
        for (j, &[tp, fp, fnn]) in oracle.iter().enumerate() {
            let c = class_metrics(&total, j);
            let (iou, prec, rec) = (ratio(tp, tp + fp + fnn), ratio(tp, tp + fp), ratio(tp, tp + fnn));
            let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            ensure!(close(c.iou, iou) && close(c.precision, prec) && close(c.recall, rec), "class {j} ratios");
            ious.extend(iou);
            recalls.extend(rec);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let pacc = oracle.iter().map(|c| c[0]).sum::<u64>() as f64 / pixels as f64;
        ensure!((m.mean_iou - mean(&ious)).abs() <= 1e-12, "mIoU");
        ensure!((m.mean_accuracy - mean(&recalls)).abs() <= 1e-12, "mAcc");
        ensure!((m.pixel_accuracy - pacc).abs() <= 1e-12, "pAcc");
    }
    // Δ from two synthetic reports.
    let mut mtl = MetricsReport::new("mtl");
    let mut base = MetricsReport::new("base");
    for task in TaskId::ALL {
        let spec = task.spec();
        let make = |rng: &mut ChaCha8Rng| {
            let mut c = ConfusionCounts::new(spec.class_count());
            for _ in 0..20 {
                c += &confusion_counts(&random_mask(rng, spec.class_count() as u8), &random_mask(rng, spec.class_count() as u8), &spec).unwrap();
            }
            task_metrics(&c, &spec).unwrap()
        };
        mtl.set_task(make(&mut rng));
        base.set_task(make(&mut rng));
    }
    let d = ok(model_delta(&mtl, &base))?;
    let (mv, bv) = (mtl.task_values().unwrap(), base.task_values().unwrap());
    let oracle = (0..6).map(|k| 100.0 * (mv[k] - bv[k]) / bv[k]).sum::<f64>() / 6.0;
    ensure!((d.mean - oracle).abs() <= 1e-12, "delta {} vs {oracle}", d.mean);
    Ok(format!("{checked} mask pairs, counts exact, ratios within 1e-12, Δ matches"))
}

// 5 -------------------------------------------------------------------------

fn fusion_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let shape = Shape::new(rng.random_range(1..3), rng.random_range(1..6), rng.random_range(1..9), rng.random_range(1..9));
        let mut rand_map = |lo: f64, hi: f64| FeatureMap::<f64>::from_fn(shape, |_, _, _, _| rng.random_range(lo..hi));
        let (fe, fd, se, sd) = (rand_map(-3.0, 3.0), rand_map(-3.0, 3.0), rand_map(0.0, 1.0), rand_map(0.0, 1.0));
        let (fe_star, fd_star) = ok(co_interactive_fuse(&fe, &fd, &se, &sd))?;
        for i in 0..fe.data().len() {
            let (a, b) = (fe.data()[i], fd.data()[i]);
            ensure!(fe_star.data()[i] == a + se.data()[i] * b, "element fusion at {i}");
            ensure!(fd_star.data()[i] == b + sd.data()[i] * a, "defect fusion at {i}");
            let diff = fe_star.data()[i] - a;
            ensure!((diff - se.data()[i] * b).abs() <= 1e-12 * (1.0 + a.abs()), "f* - f at {i}");
        }
    }

    let full_cfg = ModelConfig::desk_scale_with_input(32, 32);
    let full = ok(AecifNet::<f32>::new(full_cfg.clone(), 21))?;
    let mut plain = ok(AecifNet::<f32>::new(full_cfg.with_variant(Variant::WithoutFusion), 99))?;
    let source: BTreeMap<String, Vec<f32>> = full.params().into_iter().map(|p| (p.name.clone(), p.value.clone())).collect();
    for p in plain.params_mut() {
        p.value.clone_from(source.get(&p.name).ok_or(format!("{} missing in full model", p.name))?);
    }
    let image = FeatureMap::from_fn(Shape::new(2, 3, 32, 32), |_, _, _, _| rng.random_range(0.0f32..1.0));
    let zeroed = ok(full.forward_eval_zero_masks(&image))?;
    let unfused = ok(plain.forward_eval(&image))?;
    for t in TaskId::ALL {
        let (a, b) = (zeroed.scores.get(t).unwrap(), unfused.scores.get(t).unwrap());
        ensure!(
            a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()),
            "{t} scores differ between zero masks and use_fusion=false"
        );
    }

    let naive = ok(AecifNet::<f32>::new(ModelConfig::desk_scale().with_variant(Variant::NaiveMtl), 1))?;
    let bad: Vec<&str> = naive
        .params()
        .into_iter()
        .map(|p| p.name.as_str())
        .filter(|n| n.starts_with("relearn.") || n.starts_with("attention."))
        .collect();
    ensure!(bad.is_empty(), "naive MTL carries {bad:?}");
    Ok("fusion exact on 20 random tensors; zero-mask == no-fusion bitwise; naive MTL has no relearn/attention params".into())
}

// 6 -------------------------------------------------------------------------

fn overfit() -> Outcome {
    let data = ok(synth_generate(8, (64, 64), 1))?;
    let mut cfg = TrainConfig::desk();
    cfg.epochs = 300;
    cfg.augment = false;
    ensure!(cfg.lr_initial == 5e-4 && cfg.lr_min == 5e-6, "schedule endpoints");
    let out = ok(train_on(&data, &data, &cfg))?;
    let report = ok(evaluate(&out.last, &data, "overfit"))?;
    let e = report.element.as_ref().unwrap().mean_iou;
    let d = report.defect.as_ref().unwrap().mean_iou;
    let first = out.history.epochs.first().unwrap().loss_total;
    let last = out.history.epochs.last().unwrap().loss_total;
    let detail = format!("element mIoU {e:.4}, defect mIoU {d:.4}, loss {first:.4} -> {last:.4} ({:.1}%)", 100.0 * last / first);
    ensure!(e >= 0.95 && d >= 0.95, "{detail}");
    ensure!(last < 0.1 * first, "{detail}");
    Ok(detail)
}

// 7 -------------------------------------------------------------------------

fn assessment_exactness() -> Outcome {
    let cfg = SynthConfig::new(64, 64);
    let scenes = ok(synth_scenes(30, &cfg, 17))?;
    let mut regions = 0;
    let mut per_state = [0usize; 4];
    for scene in &scenes {
        let s = &scene.sample;
        let report = ok(assess_masks(s.id, &s.element_mask, &s.defect_mask, &AssessConfig::desk()))?;
        ensure!(report.regions.len() == scene.instances.len(), "sample {}: {} regions vs {} planted", s.id, report.regions.len(), scene.instances.len());
        for r in &report.regions {
            let inst = scene.instance_map[r.region.pixels[0]] as usize;
            ensure!(inst > 0, "region on background");
            let planted = scene.instances[inst - 1];
            ensure!(r.region.pixels.iter().all(|&i| scene.instance_map[i] as usize == inst), "region crosses instances");
            ensure!(r.region.area() == planted.area && r.corroded == planted.corroded, "counts differ from planted");
            let expected = grade_ratio(planted.ratio());
            ensure!(r.state == expected, "sample {} region {}: {} vs planted {}", s.id, r.id, r.state, expected);
            per_state[r.state.index()] += 1;
            regions += 1;
        }
    }
    ensure!(per_state.iter().all(|&c| c > 0), "not every grade exercised: {per_state:?}");
    ensure!(grade_ratio(0.0) == ConditionState::Good, "r=0");
    ensure!(grade_ratio(0.25) == ConditionState::Fair, "r=0.25");
    ensure!(grade_ratio(0.50) == ConditionState::Poor, "r=0.50");
    // 10x10 regions with exactly 0, 25, 50 and 60 corroded pixels.
    for (k, expected) in [(0, ConditionState::Good), (25, ConditionState::Fair), (50, ConditionState::Poor), (60, ConditionState::Severe)] {
        let element = ClassIndexMask::filled(10, 10, aecif::model::GIRDER);
        let mut defect = ClassIndexMask::filled(10, 10, aecif::model::NON_CORROSION);
        for i in 0..k {
            defect.set(i / 10, i % 10, aecif::model::CORROSION);
        }
        let report = ok(assess_masks(0, &element, &defect, &AssessConfig::with_min_area(1)))?;
        ensure!(report.regions.len() == 1 && report.regions[0].state == expected, "{k}/100 -> {:?}", report.regions.first().map(|r| r.state));
        ensure!(ok(grade_counts(k as u64, 100))? == expected, "grade_counts {k}/100");
    }
    Ok(format!("{regions} planted regions graded exactly (G/F/P/S = {per_state:?}); 0, 0.25, 0.50 -> Good/Fair/Poor"))
}

// 8, 9 ----------------------------------------------------------------------

fn cli(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["aecif", "--quiet"];
    argv.extend_from_slice(args);
    match aecif_cli::dispatch(&argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited with {code}", args.join(" "))),
    }
}

fn single_run(root: &Path, command: &str) -> Result<PathBuf, String> {
    let suffix = format!("-{command}");
    let mut dirs: Vec<PathBuf> = ok(fs::read_dir(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(&suffix)))
        .collect();
    ensure!(dirs.len() == 1, "expected one {command} run under {}, found {}", root.display(), dirs.len());
    Ok(dirs.pop().unwrap())
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = ok(tempfile::tempdir())?;
    let t = tmp.path();
    let (a, b) = (t.join("data-a"), t.join("data-b"));
    for dir in [&a, &b] {
        cli(&["gen-data", "--dir", dir.to_str().unwrap(), "--count", "12", "--size", "64", "--seed", "7"])?;
    }
    let (fa, fb) = (files_under(&a), files_under(&b));
    ensure!(!fa.is_empty() && fa == fb, "gen-data outputs differ");
    let data = a.to_str().unwrap();
    for out in ["runs-1", "runs-2"] {
        let out = t.join(out);
        cli(&["train", "--data", data, "--out", out.to_str().unwrap(), "--seed", "3", "--set", "epochs=6"])?;
    }
    let r1 = single_run(&t.join("runs-1"), "train")?;
    let r2 = single_run(&t.join("runs-2"), "train")?;
    let h1 = ok(fs::read(r1.join("history.csv")))?;
    ensure!(h1 == ok(fs::read(r2.join("history.csv")))?, "loss histories differ");
    let (c1, c2) = (files_under(&r1.join("checkpoint")), files_under(&r2.join("checkpoint")));
    ensure!(c1.len() > 2 && c1 == c2, "checkpoints differ");
    Ok(format!(
        "gen-data: {} identical files; train x2: identical history ({} bytes) and {} checkpoint files",
        fa.len(),
        h1.len(),
        c1.len()
    ))
}

fn cli_smoke() -> Outcome {
    let tmp = ok(tempfile::tempdir())?;
    let t = tmp.path();
    let data = t.join("data");
    let data = data.to_str().unwrap();
    let out = t.join("runs");
    let out = out.to_str().unwrap();
    cli(&["gen-data", "--dir", data, "--count", "16", "--size", "64", "--seed", "5"])?;
    cli(&["train", "--data", data, "--out", out, "--set", "epochs=5"])?;
    let run = single_run(Path::new(out), "train")?;
    let ckpt = run.join("checkpoint");
    let ckpt = ckpt.to_str().unwrap();
    cli(&["eval", "--data", data, "--out", out, "--checkpoint", ckpt])?;
    cli(&["ablate", "--data", data, "--out", out, "--set", "epochs=20"])?;
    cli(&["assess", "--data", data, "--out", out, "--checkpoint", ckpt])?;

    let eval_rows = ok(parse_task_csv(&ok(fs::read_to_string(single_run(Path::new(out), "eval")?.join("metrics.csv")))?))?;
    ensure!(eval_rows.len() == 1, "eval report rows {}", eval_rows.len());
    let ablate = single_run(Path::new(out), "ablate")?;
    let rows = ok(parse_task_csv(&ok(fs::read_to_string(ablate.join("ablation.csv")))?))?;
    ensure!(rows.len() == 6, "ablation rows {}", rows.len());
    let labels: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    let expected: Vec<&str> = Variant::ALL.iter().map(|v| v.label()).collect();
    ensure!(labels == expected, "row order {labels:?}");
    for r in &rows[2..] {
        ensure!(r.delta.is_some() && r.values.iter().all(Option::is_some), "{} lacks values or Δ", r.method);
    }
    let table = ok(fs::read_to_string(ablate.join("ablation.txt")))?;
    ensure!(table.contains('Δ') && table.contains("mIoU"), "table header");
    let assess = single_run(Path::new(out), "assess")?;
    ensure!(assess.join("summary.txt").exists(), "assessment summary missing");
    let full_delta = rows[5].delta.unwrap();
    Ok(format!("all commands exit 0; ablation table 6 rows x 6 metrics + Δ (full model Δ {full_delta:+.2})"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("Parameter-count reproduction", Duration::from_secs(1), parameter_counts),
        ("DWA suite", Duration::from_secs(1), dwa_suite),
        ("Gradient verification", Duration::from_secs(120), gradient_check),
        ("Metrics oracle equivalence", Duration::from_secs(10), metrics_oracle),
        ("Fusion/ablation identities", Duration::from_secs(10), fusion_identities),
        ("Overfit acceptance", Duration::from_secs(600), overfit),
        ("Condition-assessment exactness", Duration::from_secs(5), assessment_exactness),
        ("Determinism", Duration::from_secs(300), determinism),
        ("End-to-end CLI smoke", Duration::from_secs(900), cli_smoke),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let label = format!("{}. {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > *budget => Err(format!("over time budget {budget:?}: {detail}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("[PASS] {label} ({:.2?}): {detail}", elapsed),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {label} ({:.2?}): {why}", elapsed);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
