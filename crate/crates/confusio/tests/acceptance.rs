//! End-to-end acceptance gate. Each test exercises one release criterion and
//! prints a single PASS/FAIL line (visible with `--nocapture`, or on failure).

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use confusio::augment::{run_pipeline, AugmentConfig};
use confusio::autodiff::{grad_check_params, ParameterStore, Tape, Tensor};
use confusio::corpus::{
    generate_synthetic, load_dataset, save_dataset, CaseDocument, DatasetSplit, FeatureKind,
    ScoreDistribution, Source, SynthConfig,
};
use confusio::curriculum::{run_curriculum, CurriculumConfig};
use confusio::eval::{ece, macro_f1, mae_mse, mean_stddev, PredictionRecord};
use confusio::model::{
    cross_entropy_loss, scaled_dot_attention, train, EncoderConfig, IntermConfig, Mode, Model,
    ModelConfig, Pooling, TokenVocab, TrainConfig,
};
use confusio::rules::{builtin, evaluate_rules, FactorVector, Outcome};

fn report(criterion: usize, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn synth_docs(n: usize, noise: f64, seed: u64, source: Source, prefix: &str) -> Vec<CaseDocument> {
    let mut docs = generate_synthetic(
        &SynthConfig {
            num_docs: n,
            noise_rate: noise,
            seed,
            score_distribution: ScoreDistribution::default(),
            vocabulary_size: 24,
        },
        &builtin::reconciled(),
    )
    .unwrap();
    for d in &mut docs {
        d.source = source;
        d.id = format!("{prefix}-{}", d.id);
    }
    docs
}

fn micro_fusion_config(vocab_size: usize, dim: usize) -> ModelConfig {
    ModelConfig {
        mode: Mode::Fusion,
        encoder: EncoderConfig {
            vocab_size,
            model_dim: dim,
            num_layers: 1,
            num_heads: 2,
            feedforward_dim: dim * 2,
            max_sequence_length: 64,
        },
        interm: IntermConfig {
            embed_dim: dim,
            num_layers: 1,
            num_heads: 2,
            feedforward_dim: dim * 2,
            output_dim: dim,
        },
        pooling: Pooling::Mean,
        teacher_forcing: false,
    }
}

fn build_vocab(docs: &[CaseDocument], cap: usize) -> TokenVocab {
    let texts: Vec<String> = docs.iter().map(|d| d.full_text()).collect();
    TokenVocab::build(texts.iter().map(|s| s.as_str()), cap)
}

fn params_snapshot(store: &ParameterStore) -> ParameterStore {
    let mut out = ParameterStore::new();
    for (name, value) in store.export() {
        out.insert(&name, value);
    }
    out
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness on the full fusion model
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_fusion_gradient_check() {
    let start = Instant::now();
    let docs = synth_docs(2, 0.0, 29, Source::Clean, "c1");
    let doc = docs[0].clone();
    let vocab = build_vocab(&docs, 64);
    let mut model = Model::new(micro_fusion_config(vocab.len(), 8), vocab, 31).unwrap();

    let loss_of = |probe: &Model| -> Result<f64, confusio::autodiff::AutodiffError> {
        let mut tape = Tape::new();
        let binding = probe.params.bind(&mut tape);
        let out = probe
            .build_forward(&mut tape, &binding, &doc, Mode::Fusion)
            .unwrap();
        let ce = cross_entropy_loss(&mut tape, out.logits, &[doc.judgment.unwrap().as_u8()])
            .map_err(|_| confusio::autodiff::AutodiffError::NonFinite { op: "loss" })?;
        let target = Tensor::matrix(1, 5, doc.factors.unwrap().as_array().to_vec()).unwrap();
        let reg = tape.smooth_l1(out.scores.unwrap(), &target, 1.0)?;
        let total = tape.add(ce, reg)?;
        Ok(tape.value(total).scalar_value())
    };

    // Populate analytic gradients once.
    {
        let mut tape = Tape::new();
        let binding = model.params.bind(&mut tape);
        let out = model
            .build_forward(&mut tape, &binding, &doc, Mode::Fusion)
            .unwrap();
        let ce = cross_entropy_loss(&mut tape, out.logits, &[doc.judgment.unwrap().as_u8()])
            .unwrap();
        let target = Tensor::matrix(1, 5, doc.factors.unwrap().as_array().to_vec()).unwrap();
        let reg = tape.smooth_l1(out.scores.unwrap(), &target, 1.0).unwrap();
        let total = tape.add(ce, reg).unwrap();
        let grads = tape.backward(total).unwrap();
        model.params.accumulate(&tape, &grads, &binding);
    }
    let config = model.config.clone();
    let vocab = model.vocab.clone();
    let err = grad_check_params(
        &mut model.params,
        |params| {
            let probe = Model {
                config: config.clone(),
                vocab: vocab.clone(),
                params: params_snapshot(params),
            };
            loss_of(&probe)
        },
        1e-5,
    )
    .unwrap();
    let elapsed = start.elapsed();
    let ok = err <= 1e-5 && elapsed.as_secs_f64() < 30.0;
    report(
        1,
        ok,
        &format!("fusion model max relative gradient error {err:.3e} in {elapsed:.2?} (limits 1e-5, 30 s)"),
    );
}

// ---------------------------------------------------------------------------
// 2. Smooth L1 loss oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_smooth_l1_oracle() {
    let eval_loss = |pred: f64, target: f64, beta: f64| -> f64 {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::matrix(1, 1, vec![pred]).unwrap());
        let t = Tensor::matrix(1, 1, vec![target]).unwrap();
        let l = tape.smooth_l1(p, &t, beta).unwrap();
        tape.value(l).scalar_value()
    };
    let mut max_err: f64 = 0.0;
    for &beta in &[0.5, 1.0, 2.0] {
        for &d in &[0.0, 0.5, 1.0 - 1e-7, 1.0 + 1e-7, 3.0] {
            let expected = if d < beta { 0.5 * d * d / beta } else { d - 0.5 * beta };
            max_err = max_err.max((eval_loss(d, 0.0, beta) - expected).abs());
        }
    }
    // Knee continuity: at |d| = beta the quadratic and linear branch formulas
    // must agree.
    let mut knee_gap: f64 = 0.0;
    for &beta in &[0.5f64, 1.0, 2.0] {
        let quadratic = 0.5 * beta * beta / beta;
        let linear = beta - 0.5 * beta;
        knee_gap = knee_gap.max((quadratic - linear).abs());
    }
    let ok = max_err <= 1e-12 && knee_gap <= 1e-9;
    report(
        2,
        ok,
        &format!("grid max error {max_err:.3e} (≤1e-12), knee branch gap {knee_gap:.3e} (≤1e-9)"),
    );
}

// ---------------------------------------------------------------------------
// 3. Attention oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_attention_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let mut max_err: f64 = 0.0;
    for _ in 0..10 {
        let rand_mat =
            |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let q = rand_mat(&mut rng);
        let k = rand_mat(&mut rng);
        let v = rand_mat(&mut rng);

        // Brute-force softmax(QKᵀ/√d)V with plain loops.
        let d = 4usize;
        let scale = 1.0 / (d as f64).sqrt();
        let mut expected = vec![0.0; 16];
        for i in 0..d {
            let mut scores = vec![0.0; d];
            for j in 0..d {
                let mut dot = 0.0;
                for c in 0..d {
                    dot += q[i * d + c] * k[j * d + c];
                }
                scores[j] = dot * scale;
            }
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            for c in 0..d {
                for j in 0..d {
                    expected[i * d + c] += exps[j] / z * v[j * d + c];
                }
            }
        }

        let mut tape = Tape::new();
        let qn = tape.leaf(Tensor::matrix(4, 4, q).unwrap());
        let kn = tape.leaf(Tensor::matrix(4, 4, k).unwrap());
        let vn = tape.leaf(Tensor::matrix(4, 4, v).unwrap());
        let out = scaled_dot_attention(&mut tape, qn, kn, vn).unwrap();
        for (a, b) in tape.value(out).data().iter().zip(&expected) {
            max_err = max_err.max((a - b).abs());
        }
    }
    let ok = max_err <= 1e-12;
    report(3, ok, &format!("10 random 4×4 instances, max abs error {max_err:.3e} (≤1e-12)"));
}

// ---------------------------------------------------------------------------
// 4. Rule engine vs brute-force predicate evaluator over the integer grid
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_rule_grid_agreement() {
    // Hand-transcribed predicates, independent of the rule DSL.
    let brute: Vec<(&str, fn(&[f64; 5]) -> (bool, bool))> = vec![
        ("annotator1", |x| {
            let c = (x[0] >= 4.0 && (x[1] >= 4.0 || x[2] >= 4.0))
                || x.iter().any(|&v| v >= 4.0)
                || x.iter().any(|&v| v < 2.0);
            let n = x[0] >= 4.0 && (x[1] < 2.0 || x[2] < 2.0);
            (c, n)
        }),
        ("annotator2", |x| {
            let c = (x[0] > 3.0 && x[4] > 3.0 && x[1] >= 3.0 && x[2] >= 3.0 && x[3] >= 3.0)
                || (x[0] >= 4.0 && x[1] <= 2.0 && x[2] <= 2.0 && x[3] <= 2.0);
            let n = x[0] >= 4.0 && x[1] <= 2.0 && x[2] <= 2.0 && x[3] <= 2.0;
            (c, n)
        }),
        ("reconciled", |x| {
            let c = (x[0] >= 4.0 && (x[1] >= 4.0 || x[2] >= 4.0)) || x.iter().any(|&v| v >= 4.0);
            let n = (x[0] >= 4.0 && (x[1] < 2.0 || x[2] < 2.0)) || x.iter().any(|&v| v < 2.0);
            (c, n)
        }),
    ];
    let start = Instant::now();
    let mut points = 0usize;
    let mut mismatches = 0usize;
    for (name, oracle) in &brute {
        let ruleset = builtin::by_name(name).unwrap();
        for x1 in 1..=5 {
            for x2 in 1..=5 {
                for x3 in 0..=5 {
                    for x4 in 0..=5 {
                        for x5 in 1..=5 {
                            let x = [x1 as f64, x2 as f64, x3 as f64, x4 as f64, x5 as f64];
                            let (c, n) = oracle(&x);
                            let expected = match (c, n) {
                                (true, false) => Outcome::Confusion,
                                (false, true) => Outcome::NoConfusion,
                                (true, true) => Outcome::Conflict,
                                (false, false) => Outcome::Undetermined,
                            };
                            let got = evaluate_rules(&ruleset, &FactorVector::new(x)).unwrap();
                            points += 1;
                            if got != expected {
                                mismatches += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = mismatches == 0 && points == 3 * 4500 && elapsed.as_secs_f64() < 1.0;
    report(
        4,
        ok,
        &format!("{points} grid points across 3 rule sets, {mismatches} mismatches, {elapsed:.2?} (<1 s)"),
    );
}

// ---------------------------------------------------------------------------
// 5. Expected calibration error oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_ece_oracle() {
    let rec = |id: usize, gold: u8, predicted: u8, confidence: f64| PredictionRecord {
        id: id.to_string(),
        gold,
        predicted,
        confidence,
    };
    let mut worst: f64 = 0.0;

    // All records confident and correct.
    let records: Vec<_> = (0..4).map(|i| rec(i, 1, 1, 1.0)).collect();
    let (e, _) = ece(&records, 5).unwrap();
    worst = worst.max(e.abs());

    // Two records at 0.95, one correct: acc 0.5, conf 0.95, ECE 0.45.
    let records = vec![rec(0, 1, 1, 0.95), rec(1, 0, 1, 0.95)];
    let (e, _) = ece(&records, 5).unwrap();
    worst = worst.max((e - 0.45).abs());

    // Two bins of equal weight: |1.0−0.9|·0.5 + |0.6−0.7|·0.5 = 0.10.
    let mut records: Vec<_> = (0..5).map(|i| rec(i, 1, 1, 0.9)).collect();
    records.extend((5..10).map(|i| rec(i, 1, if i < 8 { 1 } else { 0 }, 0.7)));
    let (e, _) = ece(&records, 5).unwrap();
    worst = worst.max((e - 0.10).abs());

    // Perfectly calibrated fixture: 4 records at 0.75, 3 correct.
    let records: Vec<_> = (0..4).map(|i| rec(i, 1, if i < 3 { 1 } else { 0 }, 0.75)).collect();
    let (calibrated, _) = ece(&records, 5).unwrap();

    // Bins partition the records.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let records: Vec<_> = (0..137)
        .map(|i| rec(i, rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0.0..1.0f64)))
        .collect();
    let (_, table) = ece(&records, 5).unwrap();
    let total: usize = table.bins.iter().map(|b| b.count).sum();

    let ok = worst <= 1e-12 && calibrated == 0.0 && total == records.len();
    report(
        5,
        ok,
        &format!(
            "worked examples max error {worst:.3e}, calibrated fixture ECE {calibrated}, bins cover {total}/{} records",
            records.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Augmentation soundness on a noise-free pool of clean copies
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_augmentation_soundness() {
    let clean = synth_docs(30, 0.0, 61, Source::Clean, "clean");
    let pool: Vec<CaseDocument> = clean
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut p = d.clone();
            p.id = format!("pool-{i:03}");
            p.factors = None;
            p.judgment = None;
            p.source = Source::Augmented;
            p
        })
        .collect();
    let ruleset = builtin::reconciled();
    let cfg = AugmentConfig::new(ruleset.clone(), 67, 200);
    let output = run_pipeline(&clean, &pool, &cfg).unwrap();

    // Scores an augmented document may legitimately carry per feature: the
    // exact values present in the clean set (no invented values).
    let mut legitimate: BTreeMap<FeatureKind, Vec<f64>> = BTreeMap::new();
    for d in &clean {
        let f = d.factors.unwrap();
        for kind in FeatureKind::ALL {
            legitimate.entry(kind).or_default().push(f.get(kind));
        }
    }

    let mut label_violations = 0usize;
    let mut score_violations = 0usize;
    for doc in &output.augmented {
        let factors = doc.factors.unwrap();
        let outcome = evaluate_rules(&ruleset, &FactorVector::new(factors.as_array())).unwrap();
        let consistent = match outcome {
            Outcome::Confusion => doc.judgment == Some(confusio::corpus::Judgment::Confusion),
            Outcome::NoConfusion => doc.judgment == Some(confusio::corpus::Judgment::NoConfusion),
            _ => false,
        };
        if !consistent {
            label_violations += 1;
        }
        for kind in FeatureKind::ALL {
            let verbatim = legitimate[&kind].iter().any(|&v| v == factors.get(kind));
            if !verbatim {
                score_violations += 1;
            }
        }
    }
    let ok = !output.augmented.is_empty() && label_violations == 0 && score_violations == 0;
    report(
        6,
        ok,
        &format!(
            "{} augmented documents, {label_violations} label inconsistencies, {score_violations} non-verbatim scores",
            output.augmented.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Directional reproduction: curriculum fusion vs naive mix, noisy corpus
// ---------------------------------------------------------------------------

fn f1_on(model: &Model, docs: &[CaseDocument]) -> f64 {
    let preds: Vec<u8> = docs.iter().map(|d| model.infer(d).unwrap().predicted.as_u8()).collect();
    let golds: Vec<u8> = docs.iter().map(|d| d.judgment.unwrap().as_u8()).collect();
    macro_f1(&preds, &golds).unwrap()
}

#[test]
fn criterion_07_directional_reproduction() {
    let start = Instant::now();
    let dim = 8usize;
    let epochs = 2usize;
    let mut successes = 0usize;
    for rep in 0..5u64 {
        let clean_all = synth_docs(400, 0.0, 1000 + rep, Source::Clean, "clean");
        let clean = DatasetSplit {
            train: clean_all[..300].to_vec(),
            validation: clean_all[300..340].to_vec(),
            test: clean_all[340..].to_vec(),
        };
        // 30% label noise correlated with the visual/phonetic scores — the
        // systematic weak-supervision failure curriculum filtering targets.
        let mut aug = synth_docs(2000, 0.0, 2000 + rep, Source::Augmented, "aug");
        for d in aug.iter_mut() {
            let f = d.factors.unwrap();
            let v = f.get(FeatureKind::Visual);
            let ph = f.get(FeatureKind::Phonetic);
            if v >= 5.0 || (v >= 4.0 && ph >= 3.0) {
                d.judgment = Some(d.judgment.unwrap().flipped());
            }
        }
        let all: Vec<CaseDocument> = clean.train.iter().chain(aug.iter()).cloned().collect();
        let vocab = build_vocab(&all, 256);

        let mut cur_f1 = vec![];
        let mut e2e_f1 = vec![];
        let mut naive_f1 = vec![];
        for seed in 1..=5u64 {
            let mut tc = TrainConfig::new(epochs, seed);
            tc.learning_rate = 3e-3;

            let cur_cfg = CurriculumConfig { epochs_per_stage: epochs, seed, ..Default::default() };
            let mc = micro_fusion_config(vocab.len(), dim);
            let vc = vocab.clone();
            let out = run_curriculum(&clean, &aug, &cur_cfg, &tc, move |s| {
                Model::new(mc.clone(), vc.clone(), s)
            })
            .unwrap();
            cur_f1.push(f1_on(&out.model, &clean.test));

            let mut mixed: Vec<CaseDocument> =
                clean.train.iter().chain(aug.iter()).cloned().collect();
            mixed.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let mix = DatasetSplit {
                train: mixed,
                validation: clean.validation.clone(),
                test: clean.test.clone(),
            };
            let mut naive =
                Model::new(micro_fusion_config(vocab.len(), dim), vocab.clone(), seed).unwrap();
            train(&mut naive, &mix, &tc).unwrap();
            naive_f1.push(f1_on(&naive, &clean.test));

            let mut e2e_cfg = micro_fusion_config(vocab.len(), dim);
            e2e_cfg.mode = Mode::EndToEnd;
            let mut e2e = Model::new(e2e_cfg, vocab.clone(), seed).unwrap();
            train(&mut e2e, &mix, &tc).unwrap();
            e2e_f1.push(f1_on(&e2e, &clean.test));
        }
        let (cur_mean, cur_std) = mean_stddev(&cur_f1);
        let (naive_mean, _) = mean_stddev(&naive_f1);
        let (e2e_mean, e2e_std) = mean_stddev(&e2e_f1);
        let gap_points = (cur_mean - naive_mean) * 100.0;
        let gap_ok = gap_points >= 5.0;
        let var_ok = cur_std <= e2e_std;
        if gap_ok && var_ok {
            successes += 1;
        }
        println!(
            "  rep {rep}: curriculum {cur_mean:.4}±{cur_std:.4}, naive mix {naive_mean:.4}, \
             end-to-end {e2e_mean:.4}±{e2e_std:.4}, gap {gap_points:.2} pts, \
             gap_ok={gap_ok}, var_ok={var_ok}"
        );
    }
    let elapsed = start.elapsed();
    let ok = successes >= 4 && elapsed.as_secs_f64() < 900.0;
    report(
        7,
        ok,
        &format!("both conditions held in {successes}/5 repetitions (need ≥4) in {elapsed:.1?} (<15 min)"),
    );
}

// ---------------------------------------------------------------------------
// 8. Random-baseline MAE/MSE vs exact enumeration
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_random_baseline_mae_mse() {
    // Uniform integer predictions and targets on 0..=5: enumerating the 36
    // pairs gives E|p−t| = 70/36 and E(p−t)² = 210/36.
    let mut sum_abs = 0.0;
    let mut sum_sq = 0.0;
    for p in 0..=5i64 {
        for t in 0..=5i64 {
            sum_abs += (p - t).abs() as f64;
            sum_sq += ((p - t) * (p - t)) as f64;
        }
    }
    let exact_mae = sum_abs / 36.0;
    let exact_mse = sum_sq / 36.0;

    let n = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(83);
    let mut preds = Vec::with_capacity(n);
    let mut golds = Vec::with_capacity(n);
    for _ in 0..n {
        let draw = |rng: &mut ChaCha8Rng| -> [f64; 5] {
            [0; 5].map(|_| rng.gen_range(0..=5) as f64)
        };
        preds.push(draw(&mut rng));
        golds.push(draw(&mut rng));
    }
    let (mae, mse) = mae_mse(&preds, &golds).unwrap();
    let mae_rel = (mae - exact_mae).abs() / exact_mae;
    let mse_rel = (mse - exact_mse).abs() / exact_mse;
    let ok = mae_rel <= 0.02 && mse_rel <= 0.02;
    report(
        8,
        ok,
        &format!(
            "MAE {mae:.4} vs exact {exact_mae:.4} ({:.2}%), MSE {mse:.4} vs exact {exact_mse:.4} ({:.2}%), limit 2%",
            mae_rel * 100.0,
            mse_rel * 100.0
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Intermediate-encoder coupling: ablation changes the fusion logits
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_intermediate_coupling() {
    let docs = synth_docs(100, 0.0, 91, Source::Clean, "c9");
    let vocab = build_vocab(&docs, 128);
    let model = Model::new(micro_fusion_config(vocab.len(), 8), vocab.clone(), 97).unwrap();

    let mut ablated = Model {
        config: model.config.clone(),
        vocab: vocab.clone(),
        params: params_snapshot(&model.params),
    };
    for name in ["interm.out.w", "interm.out.b"] {
        let t = ablated.params.get_mut(name);
        let zeros = vec![0.0; t.numel()];
        t.data_mut().copy_from_slice(&zeros);
    }

    let mut changed = 0usize;
    for doc in &docs {
        let full = model.infer(doc).unwrap().probs;
        let cut = ablated.infer(doc).unwrap().probs;
        if (full[0] - cut[0]).abs() > 1e-12 || (full[1] - cut[1]).abs() > 1e-12 {
            changed += 1;
        }
    }
    let ok = changed >= 95;
    report(
        9,
        ok,
        &format!("zeroing the intermediate projection changed logits on {changed}/100 documents (need ≥95)"),
    );
}

// ---------------------------------------------------------------------------
// 10. CLI determinism: byte-identical outputs under identical config + seed
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_confusio"))
        .args(args)
        .status()
        .expect("failed to launch the CLI");
    assert!(status.success(), "CLI command {args:?} exited with {status}");
}

fn assert_identical(a: &Path, b: &Path, label: &str, mismatches: &mut Vec<String>) {
    let ba = std::fs::read(a).unwrap_or_else(|e| panic!("read {}: {e}", a.display()));
    let bb = std::fs::read(b).unwrap_or_else(|e| panic!("read {}: {e}", b.display()));
    if ba != bb {
        mismatches.push(label.to_string());
    }
}

#[test]
fn criterion_10_cli_determinism() {
    let root = tempfile::tempdir().unwrap();
    let dir = |name: &str| root.path().join(name);
    let s = |p: std::path::PathBuf| p.to_str().unwrap().to_string();

    let data_a = dir("data-a");
    let data_b = dir("data-b");
    let pool_path = dir("pool.jsonl");
    let config_path = dir("config.json");
    let config = serde_json::json!({
        "output_dir": s(dir("unused")),
        "seeds": [1],
        "ruleset": "reconciled",
        "paths": {
            "clean_train": s(data_a.join("train.jsonl")),
            "clean_validation": s(data_a.join("validation.jsonl")),
            "clean_test": s(data_a.join("test.jsonl")),
            "augmented": s(dir("aug-a").join("augmented.jsonl")),
            "pool": s(pool_path.clone())
        },
        "synth": { "num_docs": 40, "noise_rate": 0.0, "seed": 7, "split": [24, 8, 8] },
        "augment": { "top_k": 3, "max_output": 30, "seed": 9 },
        "model": {
            "mode": "fusion",
            "model_dim": 8,
            "num_layers": 1,
            "num_heads": 2,
            "feedforward_dim": 16,
            "max_sequence_length": 64,
            "vocab_cap": 64,
            "interm": {
                "embed_dim": 8,
                "num_layers": 1,
                "num_heads": 2,
                "feedforward_dim": 16,
                "output_dim": 8
            }
        },
        "split": "mix",
        "train": { "epochs": 1 }
    });
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let cfg = config_path.to_str().unwrap();

    let mut mismatches = Vec::new();

    run_cli(&["synth", "--config", cfg, "--out", data_a.to_str().unwrap()]);
    run_cli(&["synth", "--config", cfg, "--out", data_b.to_str().unwrap()]);
    for f in ["train.jsonl", "validation.jsonl", "test.jsonl"] {
        assert_identical(&data_a.join(f), &data_b.join(f), &format!("synth {f}"), &mut mismatches);
    }

    // The pool reuses the generated clean documents with labels stripped.
    let clean = load_dataset(&data_a.join("train.jsonl"), Source::Clean).unwrap();
    let pool: Vec<CaseDocument> = clean
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut p = d.clone();
            p.id = format!("pool-{i:03}");
            p.factors = None;
            p.judgment = None;
            p.source = Source::Augmented;
            p
        })
        .collect();
    save_dataset(&pool_path, &pool).unwrap();

    let aug_a = dir("aug-a");
    let aug_b = dir("aug-b");
    run_cli(&["augment", "--config", cfg, "--out", aug_a.to_str().unwrap()]);
    run_cli(&["augment", "--config", cfg, "--out", aug_b.to_str().unwrap()]);
    for f in ["augmented.jsonl", "rejects.tsv"] {
        assert_identical(&aug_a.join(f), &aug_b.join(f), &format!("augment {f}"), &mut mismatches);
    }

    let train_a = dir("train-a");
    let train_b = dir("train-b");
    run_cli(&["train", "--config", cfg, "--out", train_a.to_str().unwrap()]);
    run_cli(&["train", "--config", cfg, "--out", train_b.to_str().unwrap()]);
    for f in ["train_report.json", "f1_by_seed.csv", "seed-1/trace.csv", "seed-1/model.ckpt"] {
        assert_identical(&train_a.join(f), &train_b.join(f), &format!("train {f}"), &mut mismatches);
    }

    let eval_a = dir("eval-a");
    let eval_b = dir("eval-b");
    let ckpt = train_a.join("seed-1").join("model.ckpt");
    run_cli(&["eval", "--config", cfg, "--checkpoint", ckpt.to_str().unwrap(), "--out", eval_a.to_str().unwrap()]);
    run_cli(&["eval", "--config", cfg, "--checkpoint", ckpt.to_str().unwrap(), "--out", eval_b.to_str().unwrap()]);
    assert_identical(
        &eval_a.join("eval_report.json"),
        &eval_b.join("eval_report.json"),
        "eval eval_report.json",
        &mut mismatches,
    );

    let ok = mismatches.is_empty();
    report(
        10,
        ok,
        &format!(
            "synth/augment/train/eval repeated with identical config+seed; differing files: {:?}",
            mismatches
        ),
    );
}
