//! End-to-end acceptance criteria. Each prints one PASS/FAIL line; the
//! process fails if any criterion does.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{config, json, ok, tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rjcma::autodiff::{Graph, Var};
use rjcma::data::{window, SequenceRecord, WindowSpec, LABEL_MISSING};
use rjcma::fusion::{rjcma_forward, FusionConfig};
use rjcma::metrics::{ccc, ccc_loss};
use rjcma::model::{Model, ModelConfig};
use rjcma::temporal::{tcn_forward, ConvWeights, TcnBlockConfig, TcnStack, TcnWeights};
use rjcma::train::{SchedulerConfig, SchedulerState};
use rjcma::Tensor;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn bits(t: &Tensor) -> Vec<u64> {
    t.data().iter().map(|x| x.to_bits()).collect()
}

fn rand_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn forward(m: &Model, xs: &[Tensor; 3]) -> (Tensor, Tensor) {
    let mut g = Graph::new();
    let bound = m.bind(&mut g, false);
    let vars = xs.each_ref().map(|x| g.constant(x.clone()));
    let out = rjcma_forward(&mut g, vars, &bound.fusion, &m.config().fusion).unwrap();
    (g.value(out.attended).clone(), g.value(out.predictions).clone())
}

fn stack_rows(xs: &[Tensor; 3]) -> Tensor {
    Tensor::from_rows(&xs.iter().flat_map(|x| (0..x.rows()).map(|r| x.row_slice(r).to_vec())).collect::<Vec<_>>())
        .unwrap()
}

fn gradient_fidelity() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = common::rjcma(&["--threads", "1", "--out", &tmp.path().display().to_string(), "gradcheck"]);
    let elapsed = start.elapsed();
    ensure!(run.code == 0, "exit {}:\n{}", run.code, run.stdout);
    let dir = run.run_dir();
    let cfg = json(&dir.join("config.json"))["gradcheck"].clone();
    let f = &cfg["model"]["fusion"];
    ensure!(
        [&f["d_a"], &f["d_v"], &f["d_t"], &f["window"], &f["iterations"]].map(|v| v.as_u64().unwrap())
            == [8, 8, 8, 16, 3],
        "unexpected gradcheck size {f}"
    );
    ensure!(cfg["h"].as_f64() == Some(1e-5), "h = {}", cfg["h"]);
    let report = json(&dir.join("report.json"));
    let err = report["max_rel_err"].as_f64().unwrap();
    let n = report["params"].as_array().unwrap().len();
    ensure!(err < 1e-4, "max relative error {err:.3e}");
    ensure!(n == 57, "{n} parameter tensors checked");
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("max rel err {err:.2e} over {n} tensors, {:.1} s on 1 thread", elapsed.as_secs_f64()))
}

fn zero_attention_identity() -> Check {
    for l in 1..=4 {
        let cfg = FusionConfig { d_a: 5, d_v: 3, d_t: 4, window: 16, iterations: l };
        let mut m = Model::init(ModelConfig { fusion: cfg.clone(), ..Default::default() }, 40 + l as u64).unwrap();
        for step in 0..l {
            for tag in ["a", "v", "t"] {
                let i = m.store().index_of(&format!("fusion.step{step}.{tag}.w_c")).unwrap();
                let t = m.store_mut().get_mut(i);
                *t = Tensor::zeros(t.rows(), t.cols());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(l as u64);
        let xs = cfg.dims().map(|d| rand_tensor(&mut rng, d, 16));
        let (attended, _) = forward(&m, &xs);
        ensure!(bits(&attended) == bits(&stack_rows(&xs)), "l = {l}: attended features differ from inputs");
    }
    Ok("bit-exact for l = 1..4".into())
}

type Mat = Vec<Vec<f64>>;

fn mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            let mut s = 0.0;
            for q in 0..k {
                s += a[i][q] * b[q][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn tr(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn map(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    a.iter().map(|r| r.iter().map(|&x| f(x)).collect()).collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

/// `W·X + b` with the bias broadcast over columns.
fn dense(w: &Mat, b: &Mat, x: &Mat) -> Mat {
    let wx = mm(w, x);
    wx.iter().zip(b).map(|(row, bi)| row.iter().map(|v| v + bi[0]).collect()).collect()
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Single-pass joint cross-attention written directly from its definition:
/// J = FC([X_a; X_v; X_t]), C = tanh(Xᵀ W_j J / √d), H = ReLU(X W_c C),
/// X_att = H W_h + X, then the d → d/2 → 1 head.
fn plain_jca(m: &Model, xs: &[Tensor; 3]) -> (Mat, Mat) {
    let p = |name: &str| mat(m.store().get(m.store().index_of(name).unwrap()));
    let x: Vec<Mat> = xs.iter().map(mat).collect();
    let stacked: Mat = x.concat();
    let d = stacked.len();
    let joint = dense(&p("fusion.fc.weight"), &p("fusion.fc.bias"), &stacked);
    let scale = 1.0 / (d as f64).sqrt();
    let mut attended = Vec::new();
    for (xm, tag) in x.iter().zip(["a", "v", "t"]) {
        let w = |n: &str| p(&format!("fusion.step0.{tag}.{n}"));
        let c = map(&mm(&mm(&tr(xm), &w("w_j")), &joint), |v| (v * scale).tanh());
        let h = map(&mm(&mm(xm, &w("w_c")), &c), relu);
        attended.extend(add(&mm(&h, &w("w_h")), xm));
    }
    let hidden = map(&dense(&p("fusion.head0.weight"), &p("fusion.head0.bias"), &attended), relu);
    let pred = map(&dense(&p("fusion.head1.weight"), &p("fusion.head1.bias"), &hidden), f64::tanh);
    (attended, pred)
}

fn jca_reduction() -> Check {
    let mut cases = 0;
    for seed in 0..5u64 {
        let cfg = FusionConfig { d_a: 3, d_v: 4, d_t: 5, window: 8 + seed as usize, iterations: 1 };
        let m = Model::init(ModelConfig { fusion: cfg.clone(), ..Default::default() }, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let xs = cfg.dims().map(|d| rand_tensor(&mut rng, d, cfg.window));
        let (attended, pred) = forward(&m, &xs);
        let (want_att, want_pred) = plain_jca(&m, &xs);
        let flat = |a: &Mat| a.iter().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
        ensure!(bits(&attended) == flat(&want_att), "seed {seed}: attended features differ");
        ensure!(bits(&pred) == flat(&want_pred), "seed {seed}: predictions differ");
        cases += 1;
    }
    Ok(format!("attended features and predictions bit-equal on {cases} random models"))
}

fn ccc_oracle_suite() -> Check {
    let x = [0.3, -1.2, 2.5, 0.7, -0.4];
    let same = ccc(&x, &x, None).unwrap();
    ensure!((same - 1.0).abs() < 1e-12, "ccc(x, x) = {same}");
    let rev = ccc(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0], None).unwrap();
    ensure!((rev + 1.0).abs() < 1e-12, "ccc([1,2,3],[3,2,1]) = {rev}");
    // Σ(x - x̄)(y - ȳ) = 0 exactly
    let zero = ccc(&[-1.0, 0.0, 1.0], &[1.0, -2.0, 1.0], None).unwrap();
    ensure!(zero == 0.0, "zero covariance gives {zero}");

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_shift = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(2..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ab = ccc(&a, &b, None).unwrap();
        let ba = ccc(&b, &a, None).unwrap();
        ensure!(ab.to_bits() == ba.to_bits(), "case {case}: asymmetric {ab} vs {ba}");

        // masked-out frames may hold anything
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        if mask.iter().filter(|&&v| v).count() >= 2 {
            let noisy = |v: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
                v.iter().zip(&mask).map(|(&x, &keep)| if keep { x } else { rng.random_range(-1e6..1e6) }).collect()
            };
            let (na, nb) = (noisy(&a, &mut rng), noisy(&b, &mut rng));
            let keep = |v: &[f64]| v.iter().zip(&mask).filter(|(_, &k)| k).map(|(&x, _)| x).collect::<Vec<_>>();
            let masked = ccc(&na, &nb, Some(&mask)).unwrap();
            let compact = ccc(&keep(&a), &keep(&b), None).unwrap();
            ensure!(masked.to_bits() == compact.to_bits(), "case {case}: mask changes the score");
        }

        let c = rng.random_range(-2.0..2.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + c).collect();
        let mean = a.iter().sum::<f64>() / n as f64;
        let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let closed = 2.0 * var / (2.0 * var + c * c);
        let got = ccc(&a, &shifted, None).unwrap();
        worst_shift = worst_shift.max((got - closed).abs());
        ensure!((got - closed).abs() < 1e-10, "case {case}: shift gives {got}, closed form {closed}");
    }
    Ok(format!("identities exact, 1000 random cases, worst shift deviation {worst_shift:.1e}"))
}

fn tcn_causality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..100 {
        let n_blocks = rng.random_range(1..=4);
        let mut c_in = rng.random_range(1..=5);
        let mut blocks = Vec::new();
        for _ in 0..n_blocks {
            let c_out = if rng.random_bool(0.5) { c_in } else { rng.random_range(1..=5) };
            blocks.push(TcnBlockConfig {
                channels_in: c_in,
                channels_out: c_out,
                kernel_size: rng.random_range(1..=4),
                dilation: rng.random_range(1..=4),
                residual: rng.random_bool(0.5),
            });
            c_in = c_out;
        }
        let stack = TcnStack::new(blocks).unwrap();
        let weights: Vec<(Vec<Tensor>, Tensor)> = stack
            .blocks
            .iter()
            .map(|b| {
                let taps = (0..b.kernel_size).map(|_| rand_tensor(&mut rng, b.channels_out, b.channels_in)).collect();
                (taps, rand_tensor(&mut rng, b.channels_out, 1))
            })
            .collect();
        let frames = rng.random_range(4..40);
        let x = rand_tensor(&mut rng, stack.blocks[0].channels_in, frames);
        let t = rng.random_range(0..frames - 1);
        let mut perturbed = x.clone();
        for i in 0..x.rows() {
            perturbed.set(i, t + 1, x.get(i, t + 1) + rng.random_range(0.5..5.0));
        }
        let run = |input: &Tensor| {
            let mut g = Graph::new();
            let w = TcnWeights {
                blocks: weights
                    .iter()
                    .map(|(taps, bias)| ConvWeights {
                        taps: taps.iter().map(|tap| g.constant(tap.clone())).collect::<Vec<Var>>(),
                        bias: g.constant(bias.clone()),
                    })
                    .collect(),
            };
            let xv = g.constant(input.clone());
            let y = tcn_forward(&mut g, xv, &stack, &w).unwrap();
            g.value(y).clone()
        };
        let (a, b) = (run(&x), run(&perturbed));
        for j in 0..=t {
            for i in 0..a.rows() {
                ensure!(
                    a.get(i, j).to_bits() == b.get(i, j).to_bits(),
                    "case {case}: frame {j} changed after perturbing {}",
                    t + 1
                );
            }
        }
    }
    Ok("100 random stacks, no output at or before t moved".into())
}

fn windowing_and_masking() -> Check {
    let frames = 700;
    let rec = SequenceRecord {
        id: "long".into(),
        features: [2, 3, 1].map(|d| Tensor::from_fn(d, frames, |i, t| ((i + 1) * t) as f64 * 1e-3)),
        valence: vec![0.1; frames],
        arousal: vec![-0.1; frames],
        fps: 30.0,
    };
    let ws = window(&rec, &WindowSpec::new(300, 200).unwrap()).unwrap();
    let offsets: Vec<usize> = ws.iter().map(|w| w.offset).collect();
    ensure!(offsets == [0, 200, 400], "offsets {offsets:?}");
    ensure!(ws.iter().all(|w| w.padded == 0 && w.len() == 300), "unexpected padding");

    // missing labels: full loss vs the loss with those frames removed
    let cfg = ModelConfig {
        fusion: FusionConfig { d_a: 3, d_v: 2, d_t: 4, window: 16, iterations: 2 },
        ..Default::default()
    };
    let model = Model::init(cfg.clone(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs = cfg.fusion.dims().map(|d| rand_tensor(&mut rng, d, 16));
    let mut labels: Vec<f64> = (0..16).map(|_| rng.random_range(-0.9..0.9)).collect();
    let missing = [0, 3, 7, 8, 15];
    for &t in &missing {
        labels[t] = LABEL_MISSING;
    }
    let mask: Vec<bool> = (0..16).map(|t| !missing.contains(&t)).collect();
    let (_, full) = model.loss_and_grads(xs.each_ref(), &labels, &mask).unwrap();

    let keep: Vec<usize> = (0..16).filter(|&t| mask[t]).collect();
    let kept_labels: Vec<f64> = keep.iter().map(|&t| labels[t]).collect();
    let mut g = Graph::new();
    let bound = model.bind(&mut g, true);
    let inputs = xs.each_ref().map(|x| g.constant(x.clone()));
    let out = model.forward(&mut g, &bound, inputs).unwrap();
    let kept = g.select_cols(out.fusion.predictions, &keep).unwrap();
    let loss = ccc_loss(&mut g, kept, &kept_labels, &vec![true; keep.len()]).unwrap();
    let grads = g.backward(loss).unwrap();
    for (v, a) in bound.vars.iter().zip(&full) {
        ensure!(bits(a) == bits(grads.get(*v).unwrap()), "gradients differ once missing frames are removed");
    }
    Ok(format!("offsets {offsets:?}; {} parameter gradients identical with missing frames removed", full.len()))
}

fn learnability() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let desk = config("desk.json");
    let start = Instant::now();
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for target in ["valence", "arousal"] {
        let mut scores = Vec::new();
        for seed in ["0", "1", "2"] {
            let run = ok(&["--config", &desk, "--out", &out, "--seed", seed, "--target", target, "train"]).run_dir();
            let report = json(&run.join("report.json"));
            let cfg = json(&run.join("config.json"));
            ensure!(cfg["train"]["max_epochs"].as_u64().unwrap() <= 50, "more than 50 epochs allowed");
            ensure!(cfg["synthetic"]["n_sequences"] == 12, "expected 12 sequences");
            ensure!(report["epochs"].as_u64().unwrap() <= 50, "ran {} epochs", report["epochs"]);
            scores.push(report["best_val_ccc"].as_f64().unwrap());
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[1];
        summary.push(format!("{target} median {median:.3} of {scores:.3?}"));
        if median < 0.8 {
            failures.push(format!("{target} median {median:.3}"));
        }
    }
    let elapsed = start.elapsed();
    ensure!(failures.is_empty(), "{} ({})", failures.join(", "), summary.join("; "));
    ensure!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    Ok(format!("{}; {:.0} s", summary.join("; "), elapsed.as_secs_f64()))
}

fn recipe_fidelity() -> Check {
    let cfg = SchedulerConfig { lr_init: 1e-5, lr_min: 1e-8, warmup_epochs: 0, patience: 5, factor: 0.1 };
    let mut s = SchedulerState::new(cfg);
    let vals: Vec<f64> = std::iter::once(0.5).chain(std::iter::repeat_n(0.2, 30)).collect();
    let mut trace = Vec::new();
    let mut prev = s.lr;
    for (e, &v) in vals.iter().enumerate() {
        let lr = s.end_epoch(e, v);
        if lr != prev {
            trace.push((e, lr));
        }
        prev = lr;
    }
    // patience 5 then ×0.1 each time, the last step clamped to the floor
    let expected = [(5, 1e-5 * 0.1), (10, 1e-5 * 0.1 * 0.1), (15, 1e-8)];
    ensure!(trace == expected, "lr trace {trace:?}, expected {expected:?}");
    ensure!(prev == 1e-8, "final lr {prev}");

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let smoke = config("smoke.json");
    let data = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir().join("manifest.json").display().to_string();
    let run = ok(&["--config", &smoke, "--out", &out, "train", "--manifest", &data]).run_dir();
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    let val: Vec<f64> = history.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    let max = val.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reported = json(&run.join("report.json"))["ccc_valence"].as_f64().unwrap();
    let ckpt = run.join("checkpoint.bin").display().to_string();
    let rescored =
        ok(&["--config", &smoke, "--out", &out, "eval", "--checkpoint", &ckpt, "--manifest", &data]).run_dir();
    let rescored = json(&rescored.join("report.json"))["ccc_valence"].as_f64().unwrap();
    ensure!(reported == max, "reported {reported}, historical max {max}");
    ensure!(rescored == max, "checkpoint rescored {rescored}, historical max {max}");
    let dips = val.windows(2).filter(|w| w[1] < w[0]).count();
    Ok(format!(
        "lr 1e-5 → 1e-6 → 1e-7 → 1e-8 at epochs 5/10/15; best {max:.4} reloaded ({dips} dips in {} epochs)",
        val.len()
    ))
}

fn table_shape(path: &Path, key: &str, labels: &[String]) -> Result<(), String> {
    let text = std::fs::read_to_string(path.join("table.md")).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .filter(|l| l.starts_with('|') && !l.starts_with("|-"))
        .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
        .collect();
    ensure!(rows[0] == [key, "Valence", "Arousal", "Mean"], "header {:?}", rows[0]);
    let got: Vec<&String> = rows[1..].iter().map(|r| &r[0]).collect();
    ensure!(got.iter().copied().eq(labels.iter()), "row labels {got:?}");
    let report = json(&path.join("report.json"));
    for r in report["rows"].as_array().unwrap() {
        let (v, a, m) = (r["valence"].as_f64(), r["arousal"].as_f64(), r["mean"].as_f64());
        ensure!(v.is_some() && a.is_some(), "missing score in {r}");
        ensure!(m == Some((v.unwrap() + a.unwrap()) / 2.0), "mean of {r}");
    }
    Ok(())
}

fn structural_reproduction() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let smoke = config("smoke.json");
    let ablate = ok(&["--config", &smoke, "--out", &out, "ablate", "--l-values", "1,2,3,4"]).run_dir();
    let l_rows: Vec<String> = (1..=4).map(|l| format!("l = {l}")).collect();
    table_shape(&ablate, "Num. of recursions (l)", &l_rows)?;
    let cv = ok(&["--config", &smoke, "--out", &out, "cv", "--folds", "6"]).run_dir();
    let fold_rows: Vec<String> = (0..6).map(|f| format!("Fold {f}")).collect();
    table_shape(&cv, "Validation Set", &fold_rows)?;
    Ok("ablate: l = 1..4 × Valence/Arousal/Mean; cv: Fold 0..5 × Valence/Arousal/Mean".into())
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let smoke = config("smoke.json");
    let twice = |args: &[&str]| {
        let mut a = vec!["--config", smoke.as_str(), "--out", out.as_str()];
        a.extend_from_slice(args);
        let first = ok(&a).run_dir();
        // parallelism must not change results
        let mut b = vec!["--threads", "3"];
        b.extend_from_slice(&a);
        let second = ok(&b).run_dir();
        (tree(&first), tree(&second), first)
    };
    let mut compared = 0;
    let (a, b, gen) = twice(&["gen"]);
    ensure!(a == b, "gen differs");
    compared += a.len();
    let manifest = gen.join("manifest.json").display().to_string();
    let (a, b, train) = twice(&["train", "--manifest", &manifest]);
    ensure!(a == b, "train artifacts differ");
    compared += a.len();
    let ckpt = train.join("checkpoint.bin").display().to_string();
    for args in [
        vec!["eval", "--checkpoint", ckpt.as_str(), "--manifest", manifest.as_str()],
        vec!["gradcheck"],
        vec!["ablate", "--l-values", "1,2"],
        vec!["cv"],
    ] {
        let (a, b, _) = twice(&args);
        ensure!(a == b, "{} artifacts differ", args[0]);
        compared += a.len();
    }
    Ok(format!("gen/train/eval/gradcheck/ablate/cv: {compared} files byte-identical across reruns"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient fidelity", gradient_fidelity),
        ("zero-attention identity", zero_attention_identity),
        ("JCA reduction", jca_reduction),
        ("CCC oracle suite", ccc_oracle_suite),
        ("TCN causality", tcn_causality),
        ("windowing and missing labels", windowing_and_masking),
        ("learnability", learnability),
        ("recipe fidelity", recipe_fidelity),
        ("structural reproduction", structural_reproduction),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name:<30} {detail} [{secs:.1} s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<30} {why} [{secs:.1} s]");
            }
        }
    }
    println!("{} of {} criteria passed", 10 - failed, 10);
    if failed > 0 {
        std::process::exit(1);
    }
}
