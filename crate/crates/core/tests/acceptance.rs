//! Acceptance suite: one test per numbered release criterion. Each test
//! checks its property against an independent oracle implemented in this
//! file and prints a PASS line (visible with `--nocapture`) once every
//! assertion holds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use radclass::corpus::{synthesize_corpus, LabeledCorpus, SplitSpec, SynthSpec};
use radclass::eval::{
    binary_metrics, f1_score, micro_macro, roc_auc, welch_ttest, ConfusionMatrix,
};
use radclass::features::{count_vectorize, DocTermMatrix, Weighting};
use radclass::models::{
    train_linear_svm, train_logreg, train_tree, logistic_gradient, logistic_objective,
    svm_objective, LogRegConfig, ModelFamily, SvmConfig, TreeConfig,
};
use radclass::ngram::{fit_threshold, ClassStats, FractionStats, LimitRule};
use radclass::pipeline::{ModelParams, MulticlassStrategy, TrainOptions, TrainedPipeline};
use radclass::preprocess::{build_vocabulary, tokenize, CleanConfig, TokenStream};

/// Independent reference implementations. Everything here recomputes its
/// answer from first principles so agreement with the library is evidence,
/// not circularity.
mod oracle {
    /// Numerically stable ln(1 + e^x).
    fn softplus(x: f64) -> f64 {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    }

    /// Dense regularized logistic loss over rows of `x`, parameters laid
    /// out as `[w..., b]`. Bias unregularized.
    pub fn dense_logistic_objective(
        x: &[Vec<f64>],
        y: &[bool],
        c: f64,
        params: &[f64],
    ) -> f64 {
        let n_features = params.len() - 1;
        let (w, b) = params.split_at(n_features);
        let mut value = w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c);
        for (row, &pos) in x.iter().zip(y) {
            let z = if pos { 1.0 } else { -1.0 };
            let f: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
            value += softplus(-z * f);
        }
        value
    }

    fn dense_logistic_gradient(x: &[Vec<f64>], y: &[bool], c: f64, params: &[f64]) -> Vec<f64> {
        let n_features = params.len() - 1;
        let (w, b) = params.split_at(n_features);
        let mut grad: Vec<f64> = w.iter().map(|v| v / c).collect();
        grad.push(0.0);
        for (row, &pos) in x.iter().zip(y) {
            let z = if pos { 1.0 } else { -1.0 };
            let f: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b[0];
            // d/df softplus(-z f) = -z sigma(-z f)
            let s = -z / (1.0 + (z * f).exp());
            for (g, v) in grad.iter_mut().zip(row) {
                *g += s * v;
            }
            grad[n_features] += s;
        }
        grad
    }

    /// Steepest descent with Armijo backtracking, run to a tight gradient
    /// norm. Slow but independent of the library's quasi-Newton solver.
    pub fn slow_logreg(x: &[Vec<f64>], y: &[bool], c: f64) -> Vec<f64> {
        let n = x[0].len() + 1;
        let mut params = vec![0.0; n];
        let mut value = dense_logistic_objective(x, y, c, &params);
        for _ in 0..200_000 {
            let grad = dense_logistic_gradient(x, y, c, &params);
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm <= 1e-10 {
                break;
            }
            let mut step = 1.0;
            loop {
                let trial: Vec<f64> = params
                    .iter()
                    .zip(&grad)
                    .map(|(p, g)| p - step * g)
                    .collect();
                let trial_value = dense_logistic_objective(x, y, c, &trial);
                if trial_value <= value - 1e-4 * step * norm * norm {
                    params = trial;
                    value = trial_value;
                    break;
                }
                step *= 0.5;
                if step < 1e-18 {
                    return params;
                }
            }
        }
        params
    }

    fn dense_svm_objective(x: &[Vec<f64>], y: &[bool], c: f64, w: &[f64], b: f64) -> f64 {
        let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &pos)| {
                let z = if pos { 1.0 } else { -1.0 };
                let f: f64 = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
                (1.0 - z * f).max(0.0)
            })
            .sum();
        reg + c * hinge
    }

    /// Gaussian elimination with partial pivoting; None on a (near-)
    /// singular system.
    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        let scale = a
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
            if a[pivot][col].abs() < 1e-12 * scale {
                return None;
            }
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..n {
                let factor = a[row][col] / a[col][col];
                // Indexing touches two rows of `a` at once.
                #[allow(clippy::needless_range_loop)]
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for col in (0..n).rev() {
            let mut v = b[col];
            for k in col + 1..n {
                v -= a[col][k] * x[k];
            }
            x[col] = v / a[col][col];
        }
        Some(x)
    }

    /// Exact hinge-loss optimum by exhausting dual active-set patterns.
    ///
    /// Each document's dual weight is either 0, at its bound `c`, or free.
    /// For every assignment the free weights and the bias follow from the
    /// margin equalities plus the dual balance constraint; a candidate is
    /// kept when it satisfies the remaining KKT inequalities. KKT points of
    /// a convex problem are global optima, so the best surviving candidate
    /// is the exact solution up to linear-solve roundoff. Exponential in
    /// the document count: only for tiny instances.
    pub fn exact_svm(x: &[Vec<f64>], y: &[bool], c: f64) -> (Vec<f64>, f64) {
        let n = x.len();
        let n_features = x[0].len();
        let z: Vec<f64> = y.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        let gram: Vec<Vec<f64>> = x.iter().map(|r| x.iter().map(|s| dot(r, s)).collect()).collect();
        let margin_tol = 1e-7 * (1.0 + c);
        let weight_tol = 1e-9 * c;

        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for pattern in 0..3usize.pow(n as u32) {
            let mut digit = pattern;
            let mut alpha = vec![0.0; n];
            let mut free = Vec::new();
            let mut balance = 0.0;
            for i in 0..n {
                match digit % 3 {
                    1 => {
                        alpha[i] = c;
                        balance += c * z[i];
                    }
                    2 => free.push(i),
                    _ => {}
                }
                digit /= 3;
            }

            let m = free.len();
            let bias;
            if m > 0 {
                // Unknowns [alpha_free..., b]: margin equalities for the
                // free documents plus the balance constraint.
                let mut a = vec![vec![0.0; m + 1]; m + 1];
                let mut rhs = vec![0.0; m + 1];
                for (ri, &i) in free.iter().enumerate() {
                    for (rj, &j) in free.iter().enumerate() {
                        a[ri][rj] = z[i] * z[j] * gram[i][j];
                    }
                    a[ri][m] = z[i];
                    let bound: f64 = (0..n)
                        .filter(|&j| alpha[j] == c)
                        .map(|j| z[i] * z[j] * gram[i][j])
                        .sum();
                    rhs[ri] = 1.0 - c * bound;
                }
                for (rj, &j) in free.iter().enumerate() {
                    a[m][rj] = z[j];
                }
                rhs[m] = -balance;
                let Some(solution) = solve(a, rhs) else {
                    continue;
                };
                let mut ok = true;
                for (ri, &i) in free.iter().enumerate() {
                    alpha[i] = solution[ri];
                    if !((-weight_tol..=c + weight_tol).contains(&solution[ri])) {
                        ok = false;
                    }
                }
                if !ok {
                    continue;
                }
                bias = solution[m];
            } else {
                // No free weights: the balance constraint must already
                // hold, and the bias is only pinned by the inequalities.
                if balance.abs() > weight_tol {
                    continue;
                }
                let w: Vec<f64> = (0..n_features)
                    .map(|f| (0..n).map(|i| alpha[i] * z[i] * x[i][f]).sum())
                    .collect();
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for i in 0..n {
                    // at-bound docs need z f <= 1, zero docs need z f >= 1
                    let cut = (1.0 - z[i] * dot(&w, &x[i])) * z[i];
                    if alpha[i] == c {
                        if z[i] > 0.0 {
                            hi = hi.min(cut);
                        } else {
                            lo = lo.max(cut);
                        }
                    } else if z[i] > 0.0 {
                        lo = lo.max(cut);
                    } else {
                        hi = hi.min(cut);
                    }
                }
                if lo > hi + margin_tol {
                    continue;
                }
                bias = match (lo.is_finite(), hi.is_finite()) {
                    (true, true) => 0.5 * (lo + hi),
                    (true, false) => lo,
                    (false, true) => hi,
                    (false, false) => 0.0,
                };
            }

            let w: Vec<f64> = (0..n_features)
                .map(|f| (0..n).map(|i| alpha[i] * z[i] * x[i][f]).sum())
                .collect();
            let kkt_ok = (0..n).all(|i| {
                let margin = z[i] * (dot(&w, &x[i]) + bias);
                if alpha[i] <= weight_tol {
                    margin >= 1.0 - margin_tol
                } else if alpha[i] >= c - weight_tol {
                    margin <= 1.0 + margin_tol
                } else {
                    (margin - 1.0).abs() <= margin_tol
                }
            });
            if !kkt_ok {
                continue;
            }
            let value = dense_svm_objective(x, y, c, &w, bias);
            if best.as_ref().is_none_or(|(v, _, _)| value < *v) {
                best = Some((value, w, bias));
            }
        }
        let (_, w, b) = best.expect("some active-set pattern satisfies the KKT conditions");
        (w, b)
    }

    /// AUC as the fraction of positive-negative pairs ranked correctly,
    /// ties counting half.
    pub fn pair_counting_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let mut pairs = 0.0;
        let mut won = 0.0;
        for (sp, &tp) in scores.iter().zip(truth) {
            if !tp {
                continue;
            }
            for (sn, &tn) in scores.iter().zip(truth) {
                if tn {
                    continue;
                }
                pairs += 1.0;
                if sp > sn {
                    won += 1.0;
                } else if sp == sn {
                    won += 0.5;
                }
            }
        }
        won / pairs
    }

    pub struct BruteMetrics {
        pub counts: Vec<Vec<u64>>,
        pub per_class: Vec<(f64, f64, f64)>,
        pub micro: (f64, f64, f64),
        pub macro_avg: (f64, f64, f64),
        pub accuracy: f64,
    }

    fn prf(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fn_);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    }

    /// Confusion counts and metrics recomputed by direct enumeration.
    pub fn brute_force_metrics(truth: &[usize], preds: &[usize], k: usize) -> BruteMetrics {
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(preds) {
            counts[t][p] += 1;
        }
        let mut per_class = Vec::with_capacity(k);
        let (mut tp_sum, mut fp_sum, mut fn_sum) = (0u64, 0u64, 0u64);
        let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
        for (c, row) in counts.iter().enumerate() {
            let tp = row[c];
            let fp = counts.iter().map(|r| r[c]).sum::<u64>() - tp;
            let fn_ = row.iter().sum::<u64>() - tp;
            let m = prf(tp, fp, fn_);
            tp_sum += tp;
            fp_sum += fp;
            fn_sum += fn_;
            p_sum += m.0;
            r_sum += m.1;
            f_sum += m.2;
            per_class.push(m);
        }
        let correct = (0..k).map(|c| counts[c][c]).sum::<u64>();
        BruteMetrics {
            counts,
            per_class,
            micro: prf(tp_sum, fp_sum, fn_sum),
            macro_avg: (p_sum / k as f64, r_sum / k as f64, f_sum / k as f64),
            accuracy: correct as f64 / truth.len() as f64,
        }
    }
}

/// Tokenizes a synthetic corpus and returns its count matrix and labels.
fn vectorized(corpus: &LabeledCorpus) -> (DocTermMatrix, Vec<usize>) {
    let streams: Vec<TokenStream> = corpus
        .reports()
        .iter()
        .map(|r| tokenize(&r.text))
        .collect();
    let vocab = build_vocabulary(&streams).unwrap();
    let matrix = count_vectorize(&streams, &vocab).matrix;
    let labels = corpus.label_indices().unwrap();
    (matrix, labels)
}

/// Random sparse count rows plus labels containing both classes.
fn random_binary_instance(
    rng: &mut ChaCha8Rng,
    n_docs: usize,
    n_features: usize,
) -> (DocTermMatrix, Vec<bool>) {
    let mut rows = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let mut row = Vec::new();
        for feature in 0..n_features {
            if rng.gen_bool(0.6) {
                row.push((feature as u32, rng.gen_range(1..4) as f64));
            }
        }
        rows.push(row);
    }
    let mut y: Vec<bool> = (0..n_docs).map(|_| rng.gen_bool(0.5)).collect();
    y[0] = true;
    y[1] = false;
    let x = DocTermMatrix::from_rows(n_features, Weighting::Count, rows).unwrap();
    (x, y)
}

#[test]
fn criterion_01_logistic_gradient_matches_central_differences() {
    let corpus = synthesize_corpus(&SynthSpec {
        n_classes: 2,
        docs_per_class: 25,
        vocab_per_class: 10,
        overlap_fraction: 0.2,
        seed: 101,
    })
    .unwrap();
    let (x, labels) = vectorized(&corpus);
    let y: Vec<bool> = labels.iter().map(|&l| l == 0).collect();
    let cfg = LogRegConfig::default();
    let n = x.n_features() + 1;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-5;
    for point in 0..20 {
        let params: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let analytic = logistic_gradient(&x, &y, &cfg, &params);
        let mut numeric = vec![0.0; n];
        let mut probe = params.clone();
        for i in 0..n {
            probe[i] = params[i] + h;
            let up = logistic_objective(&x, &y, &cfg, &probe);
            probe[i] = params[i] - h;
            let down = logistic_objective(&x, &y, &cfg, &probe);
            probe[i] = params[i];
            numeric[i] = (up - down) / (2.0 * h);
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = numeric.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        assert!(
            diff / scale < 1e-5,
            "point {point}: relative gradient error {}",
            diff / scale
        );
    }
    println!("criterion 01 PASS: analytic gradient within 1e-5 of central differences at 20 points");
}

#[test]
fn criterion_02_trained_objectives_match_slow_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for instance in 0..5 {
        // Small documents counts keep the exhaustive SVM oracle tractable.
        let n_docs = rng.gen_range(8..11);
        let n_features = rng.gen_range(3..7);
        let (x, y) = random_binary_instance(&mut rng, n_docs, n_features);
        let dense = x.to_dense();
        let c = [0.5, 1.0, 2.0][instance % 3];

        let cfg = LogRegConfig {
            c,
            tol: 1e-8,
            ..LogRegConfig::default()
        };
        let model = train_logreg(&x, &y, &cfg).unwrap();
        let mut params = model.weights().to_vec();
        params.push(model.bias());
        let fast = logistic_objective(&x, &y, &cfg, &params);
        let oracle_params = oracle::slow_logreg(&dense, &y, c);
        let slow = logistic_objective(&x, &y, &cfg, &oracle_params);
        let rel = (fast - slow).abs() / slow.abs().max(1.0);
        assert!(rel < 1e-6, "instance {instance}: logreg objective gap {rel}");

        let svm_cfg = SvmConfig {
            c,
            ..SvmConfig::default()
        };
        let model = train_linear_svm(&x, &y, &svm_cfg).unwrap();
        let mut params = model.weights().to_vec();
        params.push(model.bias());
        let fast = svm_objective(&x, &y, c, &params);
        let (ow, ob) = oracle::exact_svm(&dense, &y, c);
        let mut oracle_params = ow;
        oracle_params.push(ob);
        let slow = svm_objective(&x, &y, c, &oracle_params);
        let rel = (fast - slow).abs() / slow.abs().max(1.0);
        assert!(rel < 1e-4, "instance {instance}: svm objective gap {rel}");
    }
    println!("criterion 02 PASS: logreg and svm optima match slow oracles (1e-6, 1e-4 relative)");
}

#[test]
fn criterion_03_tree_is_exact_on_conflict_free_data() {
    // Labels are a pure function of the feature row, so duplicate rows
    // always agree and pure leaves can reach every document.
    fn row_label(row: &[(u32, f64)], classes: usize) -> usize {
        let mut h = 0xcbf29ce484222325u64;
        for &(t, v) in row {
            h = (h ^ u64::from(t)).wrapping_mul(0x100000001b3);
            h = (h ^ v as u64).wrapping_mul(0x100000001b3);
        }
        (h % classes as u64) as usize
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for instance in 0..10 {
        let n_docs = rng.gen_range(20..60);
        let n_features = rng.gen_range(4..8);
        let classes = rng.gen_range(2..4);
        let mut rows = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let mut row = Vec::new();
            for feature in 0..n_features {
                if rng.gen_bool(0.5) {
                    row.push((feature as u32, rng.gen_range(1..4) as f64));
                }
            }
            rows.push(row);
        }
        let y: Vec<usize> = rows.iter().map(|r| row_label(r, classes)).collect();
        let x = DocTermMatrix::from_rows(n_features, Weighting::Count, rows).unwrap();
        let tree = train_tree(&x, &y, classes, &TreeConfig { max_depth: None }).unwrap();
        let correct = x
            .rows()
            .zip(&y)
            .filter(|(row, &label)| tree.predict(row).unwrap().class_index == label)
            .count();
        assert_eq!(
            correct,
            x.n_docs(),
            "instance {instance}: training accuracy below 100%"
        );
    }
    println!("criterion 03 PASS: tree reaches 100% training accuracy on 10 conflict-free corpora");
}

#[test]
fn criterion_04_metrics_match_brute_force_and_auc_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let k = rng.gen_range(2..6);
        let n = rng.gen_range(1..60);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let classes: Vec<String> = (0..k).map(|c| format!("k{c}")).collect();
        let cm = ConfusionMatrix::from_indices(&truth, &preds, classes).unwrap();
        let report = micro_macro(&cm);
        let brute = oracle::brute_force_metrics(&truth, &preds, k);

        for t in 0..k {
            for p in 0..k {
                assert_eq!(cm.count(t, p), brute.counts[t][p]);
            }
        }
        for c in 0..k {
            let got = &report.per_class[c];
            let want = brute.per_class[c];
            assert_eq!((got.precision, got.recall, got.f1), want);
        }
        assert_eq!(
            (report.micro.precision, report.micro.recall, report.micro.f1),
            brute.micro
        );
        assert_eq!(
            (
                report.macro_avg.precision,
                report.macro_avg.recall,
                report.macro_avg.f1
            ),
            brute.macro_avg
        );
        assert_eq!(report.accuracy, brute.accuracy);
    }

    // Scores on a coarse grid so tied scores are common.
    for _ in 0..100 {
        let n = rng.gen_range(4..200);
        let mut truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        truth[0] = true;
        truth[1] = false;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..21) as f64 / 20.0).collect();
        let trapezoid = roc_auc(&scores, &truth).unwrap().auc;
        let paired = oracle::pair_counting_auc(&scores, &truth);
        assert!(
            (trapezoid - paired).abs() < 1e-12,
            "trapezoid {trapezoid} vs pair counting {paired}"
        );
    }
    println!("criterion 04 PASS: metrics equal brute-force counting; AUC matches pair counting to 1e-12");
}

#[test]
fn criterion_05_micro_metrics_collapse_for_single_label_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let k = rng.gen_range(2..8);
        let n = rng.gen_range(1..100);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let classes: Vec<String> = (0..k).map(|c| format!("k{c}")).collect();
        let report = micro_macro(&ConfusionMatrix::from_indices(&truth, &preds, classes).unwrap());
        assert_eq!(report.micro.precision, report.micro.recall);
        assert_eq!(report.micro.precision, report.accuracy);
        // Pooled false positives equal pooled false negatives, so F1 equals
        // precision mathematically; 2pr/(p+r) only re-rounds it.
        let ulps = 4.0 * f64::EPSILON * report.micro.precision.max(1.0);
        assert!(
            (report.micro.f1 - report.micro.precision).abs() <= ulps,
            "micro F1 {} vs precision {}",
            report.micro.f1,
            report.micro.precision
        );
    }
    println!("criterion 05 PASS: micro precision = recall = F1 = accuracy on 500 random instances");
}

#[test]
fn criterion_06_reference_statistics_reproduce_the_published_threshold() {
    let test = welch_ttest(0.423, 0.103, 81, 0.0142, 0.0203, 669).unwrap();
    assert!(test.p < 1e-6, "two-tailed p = {}", test.p);
    assert!(test.t > 0.0);

    let stats = FractionStats {
        positive: ClassStats {
            mean: 0.423,
            std: 0.103,
            n: 81,
            min: 0.0,
            max: 1.0,
        },
        negative: ClassStats {
            mean: 0.0142,
            std: 0.0203,
            n: 669,
            min: 0.0,
            max: 0.12,
        },
    };
    let (midpoint, threshold) = fit_threshold(&stats, LimitRule::MeanStd).unwrap();
    assert!(
        (midpoint - 0.17725).abs() < 1e-10,
        "midpoint {midpoint} away from 0.17725"
    );
    assert_eq!(threshold, 0.2);
    println!(
        "criterion 06 PASS: p = {:.3e} < 1e-6, midpoint {:.5}, threshold {}",
        test.p, midpoint, threshold
    );
}

#[test]
fn criterion_07_f1_of_perfect_precision_and_two_thirds_recall() {
    let f1 = f1_score(1.00, 0.67);
    assert!((f1 - 0.8024).abs() < 5e-5, "f1 = {f1}");
    assert_eq!(format!("{f1:.1}"), "0.8");
    println!("criterion 07 PASS: F1(1.00, 0.67) = {f1:.4}, displayed {f1:.1}");
}

#[test]
fn criterion_08_imbalanced_binary_task_reaches_high_f1() {
    // Ten balanced source classes collapsed against one give exactly 10%
    // positive prevalence.
    let corpus = synthesize_corpus(&SynthSpec {
        n_classes: 10,
        docs_per_class: 100,
        vocab_per_class: 10,
        overlap_fraction: 0.2,
        seed: 808,
    })
    .unwrap();
    let binary = corpus.to_binary("c00").unwrap();
    let positives = binary
        .reports()
        .iter()
        .filter(|r| binary.label_of(&r.id) == Some("c00"))
        .count();
    assert_eq!(positives, 100, "prevalence should be exactly 10%");

    let spec = SplitSpec {
        train_fraction: 0.75,
        seed: 8,
        stratified: true,
    };
    let (train, test) = binary.split(&spec).unwrap();
    let clean = CleanConfig::default();
    let options = TrainOptions::default();
    let pipeline = TrainedPipeline::train(&train, &clean, &options).unwrap();
    let texts: Vec<&str> = test.reports().iter().map(|r| r.text.as_str()).collect();
    let preds: Vec<usize> = pipeline
        .predict_texts(&texts)
        .unwrap()
        .iter()
        .map(|p| p.class_index)
        .collect();
    let truth = test.label_indices().unwrap();
    let cm =
        ConfusionMatrix::from_indices(&truth, &preds, pipeline.classes().to_vec()).unwrap();
    let prf = binary_metrics(&cm).unwrap();
    assert!(prf.f1 >= 0.95, "held-out F1 = {}", prf.f1);

    let report =
        radclass::pipeline::cross_validate(&binary, &clean, &options, 10, 88).unwrap();
    assert_eq!(report.k, 10);
    assert_eq!(report.folds.len(), 10);
    println!("fold   precision  recall");
    for fold in &report.folds {
        println!("{:<6} {:>9.2} {:>7.2}", fold.fold, fold.precision, fold.recall);
    }
    let p_int = report.precision.display_interval();
    let r_int = report.recall.display_interval();
    println!("precision {p_int}   recall {r_int}");
    assert!(p_int.contains(" \u{b1} ") && r_int.contains(" \u{b1} "));
    println!(
        "criterion 08 PASS: held-out F1 {:.3} >= 0.95 with a 10-fold report",
        prf.f1
    );
}

#[test]
fn criterion_09_multiclass_strategies_agree_on_21_classes() {
    let corpus = synthesize_corpus(&SynthSpec {
        n_classes: 21,
        docs_per_class: 40,
        vocab_per_class: 10,
        overlap_fraction: 0.3,
        seed: 909,
    })
    .unwrap();
    assert_eq!(corpus.schema().classes.len(), 21);
    let spec = SplitSpec {
        train_fraction: 0.7,
        seed: 9,
        stratified: true,
    };
    let (train, test) = corpus.split(&spec).unwrap();
    let clean = CleanConfig::default();

    let ovr_options = TrainOptions::default();
    let ovr = TrainedPipeline::train(&train, &clean, &ovr_options).unwrap();
    let texts: Vec<&str> = test.reports().iter().map(|r| r.text.as_str()).collect();
    let ovr_preds: Vec<usize> = ovr
        .predict_texts(&texts)
        .unwrap()
        .iter()
        .map(|p| p.class_index)
        .collect();
    let truth = test.label_indices().unwrap();
    let cm =
        ConfusionMatrix::from_indices(&truth, &ovr_preds, ovr.classes().to_vec()).unwrap();
    let macro_f1 = micro_macro(&cm).macro_avg.f1;
    assert!(macro_f1 >= 0.9, "macro F1 = {macro_f1}");

    let ovo_options = TrainOptions {
        strategy: MulticlassStrategy::Ovo,
        ..TrainOptions::default()
    };
    let ovo = TrainedPipeline::train(&train, &clean, &ovo_options).unwrap();
    let ModelParams::Ovo { model } = ovo.parameters() else {
        panic!("expected a pairwise decomposition");
    };
    assert_eq!(model.members().len(), 21 * 20 / 2);
    let ovo_preds: Vec<usize> = ovo
        .predict_texts(&texts)
        .unwrap()
        .iter()
        .map(|p| p.class_index)
        .collect();
    let agree = ovr_preds
        .iter()
        .zip(&ovo_preds)
        .filter(|(a, b)| a == b)
        .count();
    let agreement = agree as f64 / texts.len() as f64;
    assert!(agreement >= 0.9, "agreement = {agreement}");
    println!(
        "criterion 09 PASS: macro F1 {macro_f1:.3}, 210 pairwise members, {:.1}% agreement",
        agreement * 100.0
    );
}

#[test]
fn criterion_10_artifacts_replay_predictions_bit_for_bit() {
    // Messy text so the saved cleaning configuration actually matters.
    let texts = [
        ("r0", "The LUNGS are clear; no effusion seen on [**2101-4-12**].", "a"),
        ("r1", "Heart size is NORMAL. Mediastinum unremarkable!", "a"),
        ("r2", "Clear lungs, sharp angles... stable exam [**Name**].", "a"),
        ("r3", "LIVER: no focal lesion. (Gallbladder absent.)", "b"),
        ("r4", "Bowel gas pattern NON-obstructive; no free air.", "b"),
        ("r5", "Spleen, pancreas, and kidneys are unremarkable [**2099**].", "b"),
        ("r6", "No pleural effusion or pneumothorax bilaterally.", "a"),
        ("r7", "Degenerative change of the lumbar SPINE noted.", "b"),
    ];
    let manifest: String = texts
        .iter()
        .map(|(id, text, label)| {
            format!(
                "{}\n",
                serde_json::json!({"id": id, "text": text, "label": label})
            )
        })
        .collect();
    let records =
        radclass::corpus::parse_manifest(manifest.as_bytes(), "inline").unwrap();
    let schema = radclass::corpus::LabelSchema::binary("a", "b").unwrap();
    let corpus = radclass::corpus::corpus_from_records(
        records,
        schema,
        radclass::corpus::IngestOptions::default(),
    )
    .unwrap();

    let dir = tempfile::TempDir::new().unwrap();
    let clean = CleanConfig::default();
    let probe: Vec<&str> = texts.iter().map(|(_, t, _)| *t).collect();
    for family in [ModelFamily::Logreg, ModelFamily::Svm, ModelFamily::Tree] {
        let options = TrainOptions {
            family,
            weighting: Weighting::Tfidf,
            ..TrainOptions::default()
        };
        let pipeline = TrainedPipeline::train(&corpus, &clean, &options).unwrap();
        let path = dir.path().join(format!("{family}.json"));
        pipeline.save(&path).unwrap();
        let reloaded = TrainedPipeline::load(&path).unwrap();
        let before = pipeline.predict_texts(&probe).unwrap();
        let after = reloaded.predict_texts(&probe).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert_eq!(b.class_index, a.class_index, "{family}: label changed");
            assert_eq!(b.scores, a.scores, "{family}: scores not bit-identical");
        }
    }
    println!("criterion 10 PASS: save/load/predict is bit-identical for logreg, svm, and tree");
}

#[test]
fn criterion_11_cli_pipelines_are_byte_identical_per_seed() {
    use std::process::Command;

    fn run_pipeline(dir: &std::path::Path) -> Vec<Vec<u8>> {
        let bin = env!("CARGO_BIN_EXE_radclass");
        let path = |name: &str| dir.join(name).display().to_string();
        let steps: Vec<Vec<String>> = vec![
            vec![
                "synth".into(),
                "--classes".into(),
                "3".into(),
                "--docs-per-class".into(),
                "30".into(),
                "--seed".into(),
                "77".into(),
                "--out".into(),
                path("all.jsonl"),
            ],
            vec![
                "split".into(),
                "--manifest".into(),
                path("all.jsonl"),
                "--train-out".into(),
                path("train.jsonl"),
                "--test-out".into(),
                path("test.jsonl"),
                "--seed".into(),
                "77".into(),
            ],
            vec![
                "train".into(),
                "--manifest".into(),
                path("train.jsonl"),
                "--model-out".into(),
                path("model.json"),
                "--features".into(),
                "tfidf".into(),
                "--seed".into(),
                "77".into(),
            ],
            vec![
                "predict".into(),
                "--model".into(),
                path("model.json"),
                "--input".into(),
                path("test.jsonl"),
                "--output".into(),
                path("preds.jsonl"),
            ],
        ];
        let mut outputs = Vec::new();
        for step in &steps {
            let out = Command::new(bin).args(step).output().unwrap();
            assert!(
                out.status.success(),
                "step {:?} failed: {}",
                step[0],
                String::from_utf8_lossy(&out.stderr)
            );
        }
        for name in ["all.jsonl", "train.jsonl", "test.jsonl", "model.json", "preds.jsonl"] {
            outputs.push(std::fs::read(dir.join(name)).unwrap());
        }
        let cv = Command::new(bin)
            .args([
                "cv",
                "--manifest",
                &path("all.jsonl"),
                "-k",
                "5",
                "--seed",
                "77",
                "--format",
                "json",
            ])
            .output()
            .unwrap();
        assert!(cv.status.success());
        outputs.push(cv.stdout);
        outputs
    }

    let first_dir = tempfile::TempDir::new().unwrap();
    let second_dir = tempfile::TempDir::new().unwrap();
    let first = run_pipeline(first_dir.path());
    let second = run_pipeline(second_dir.path());
    assert_eq!(first.len(), second.len());
    for (ix, (a, b)) in first.iter().zip(&second).enumerate() {
        assert_eq!(a, b, "artifact {ix} differs between reruns");
    }
    println!("criterion 11 PASS: rerunning the CLI pipeline with one seed is byte-identical");
}
