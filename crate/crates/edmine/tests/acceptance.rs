//! Acceptance suite.
//!
//! Criteria 1-6 are hard property checks on synthetic data and must pass
//! everywhere. Criteria 7-12 reproduce published study numbers and need the
//! public datasets on disk; point `EDM_DATA_DIR` at a directory holding
//! `d1/` (canonical CSVs), `oulad/` (published tables) and `canvas.csv`.
//! Without the data those checks print SKIP and pass vacuously; with it they
//! assert the pinned tolerances. Run with `--nocapture` to see one line per
//! criterion.

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use edmine::experiments::{
    run_experiment, run_selection_analysis, run_source_ablation, run_transfer_matrix,
    DatasetConfig, ExperimentConfig, ExperimentKind,
};
use edmine::features::{
    standardize, ColumnMeta, EncodedMatrix, EncodingManifest, ManifestEntry, RowTag,
    SourceCategory,
};
use edmine::learners::{
    stratified_kfold, train_tree, Averaging, ModelSpec, NodeKind, TreeNode, TreeParams,
};
use edmine::resample::{
    class_counts, rebalance, smote_convexity_residual, BalanceScope, BalanceSpec,
    BalanceTechnique,
};
use edmine::selection::{
    anova_f, backward_elimination, forward_elimination, kendall_tau, rfe, tau_b, WrapperConfig,
};
use edmine::synthgen::{generate_bundle, PlantSpec};

fn pass(criterion: &str, detail: String) {
    println!("ACCEPT {criterion}: PASS — {detail}");
}

fn matrix(rows: Vec<Vec<f64>>, labels: Option<Vec<u8>>) -> EncodedMatrix {
    let n_cols = rows.first().map(|r| r.len()).unwrap_or(0);
    let n = rows.len();
    EncodedMatrix {
        columns: (0..n_cols)
            .map(|j| ColumnMeta {
                name: format!("f{j}"),
                spec: format!("f{j}"),
                category: SourceCategory::Behavioral,
            })
            .collect(),
        rows,
        labels,
        learner_ids: (0..n).map(|i| format!("r{i}")).collect(),
        row_tags: (0..n).map(RowTag::source).collect(),
        manifest: EncodingManifest {
            version: 1,
            entries: (0..n_cols)
                .map(|j| ManifestEntry {
                    spec: format!("f{j}"),
                    category: 'B',
                    kind: "numeric".into(),
                    outputs: vec![format!("f{j}")],
                })
                .collect(),
        },
        standardized: false,
    }
}

// ── Criterion 1: CART oracle equivalence ────────────────────────────────

/// Naive reference tree, built by fresh recounting at every step. Shares
/// nothing with the production builder beyond the stated rule.
#[derive(Debug)]
enum NaiveTree {
    Leaf {
        counts: [usize; 2],
        prediction: u8,
    },
    Split {
        counts: [usize; 2],
        feature: usize,
        threshold: f64,
        left: Box<NaiveTree>,
        right: Box<NaiveTree>,
    },
}

fn naive_gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn naive_counts(y: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &i in idx {
        counts[y[i] as usize] += 1;
    }
    counts
}

fn naive_build(
    rows: &[Vec<f64>],
    y: &[u8],
    idx: &[usize],
    depth: u32,
    params: &TreeParams,
) -> NaiveTree {
    let counts = naive_counts(y, idx);
    let prediction = u8::from(counts[1] > counts[0]);
    let leaf = || NaiveTree::Leaf { counts, prediction };

    if naive_gini(counts) <= 0.0
        || params.max_depth.map(|d| depth >= d).unwrap_or(false)
        || idx.len() < params.min_samples_split
    {
        return leaf();
    }

    let p = rows[0].len();
    let mut best: Option<(f64, usize, f64)> = None;
    for feature in 0..p {
        let mut values: Vec<f64> = idx.iter().map(|&i| rows[i][feature]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for pair in values.windows(2) {
            let mut threshold = (pair[0] + pair[1]) / 2.0;
            if threshold >= pair[1] {
                threshold = pair[0];
            }
            let left: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] <= threshold)
                .collect();
            let right: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] > threshold)
                .collect();
            if left.len() < params.min_samples_leaf || right.len() < params.min_samples_leaf {
                continue;
            }
            let score = (left.len() as f64 * naive_gini(naive_counts(y, &left))
                + right.len() as f64 * naive_gini(naive_counts(y, &right)))
                / idx.len() as f64;
            if best.map(|(s, _, _)| score < s - 1e-9).unwrap_or(true) {
                best = Some((score, feature, threshold));
            }
        }
    }
    match best {
        None => leaf(),
        Some((_, feature, threshold)) => {
            let left_idx: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] <= threshold)
                .collect();
            let right_idx: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] > threshold)
                .collect();
            NaiveTree::Split {
                counts,
                feature,
                threshold,
                left: Box::new(naive_build(rows, y, &left_idx, depth + 1, params)),
                right: Box::new(naive_build(rows, y, &right_idx, depth + 1, params)),
            }
        }
    }
}

fn trees_match(nodes: &[TreeNode], idx: usize, naive: &NaiveTree) -> bool {
    match (&nodes[idx].kind, naive) {
        (NodeKind::Leaf { prediction }, NaiveTree::Leaf { counts, prediction: np }) => {
            nodes[idx].class_counts == *counts && prediction == np
        }
        (
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            },
            NaiveTree::Split {
                counts,
                feature: nf,
                threshold: nt,
                left: nl,
                right: nr,
            },
        ) => {
            nodes[idx].class_counts == *counts
                && feature == nf
                && threshold == nt
                && trees_match(nodes, *left, nl)
                && trees_match(nodes, *right, nr)
        }
        _ => false,
    }
}

#[test]
fn c1_cart_matches_naive_oracle_node_for_node() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_810);
    let cases = 500;
    for case in 0..cases {
        let n = rng.gen_range(1..=8);
        let p = rng.gen_range(1..=3);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| f64::from(rng.gen_range(0..2))).collect())
            .collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
        let params = TreeParams {
            max_depth: if rng.gen_bool(0.5) {
                Some(rng.gen_range(1..=3))
            } else {
                None
            },
            min_samples_split: 2,
            min_samples_leaf: rng.gen_range(1..=2),
        };
        let x = matrix(rows.clone(), None);
        let tree = train_tree(&x, &y, params).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let naive = naive_build(&rows, &y, &idx, 0, &params);
        assert!(
            trees_match(&tree.nodes, 0, &naive),
            "case {case}: trees diverge\nrows {rows:?}\ny {y:?}\nparams {params:?}\nbuilt {tree:?}\nnaive {naive:?}"
        );
    }
    pass("C1", format!("{cases}/{cases} random datasets node-for-node equal"));
}

// ── Criterion 2: resampling invariants ──────────────────────────────────

#[test]
fn c2_resampling_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for case in 0..100u64 {
        let n1 = rng.gen_range(4..30);
        let n0 = rng.gen_range(n1..60);
        let p = rng.gen_range(1..5);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in [(0u8, n0), (1u8, n1)] {
            for _ in 0..c.1 {
                rows.push((0..p).map(|_| rng.gen_range(-5.0..5.0)).collect());
                labels.push(c.0);
            }
        }
        let x = matrix(rows, Some(labels));
        for technique in [
            BalanceTechnique::Upsample,
            BalanceTechnique::Downsample,
            BalanceTechnique::UpAndDown,
            BalanceTechnique::Smote,
        ] {
            let mut spec = BalanceSpec::new(technique, case * 7 + 1);
            spec.smote_k = 3;
            let out = rebalance(&x, &spec).unwrap();
            let (c0, c1) = class_counts(out.labels.as_ref().unwrap());
            assert_eq!(c0, c1, "{technique:?} counts unequal in case {case}");
            let again = rebalance(&x, &spec).unwrap();
            assert_eq!(out, again, "{technique:?} not deterministic in case {case}");
            match technique {
                BalanceTechnique::Smote => {
                    let residual = smote_convexity_residual(&x, &out);
                    assert!(residual < 1e-9, "convexity residual {residual} in case {case}");
                }
                BalanceTechnique::Downsample => {
                    for row in &out.rows {
                        assert!(x.rows.contains(row), "downsample row not a subset member");
                    }
                }
                _ => {}
            }
            checked += 1;
        }
    }
    pass("C2", format!("{checked} technique runs: equal counts, convex SMOTE, subset downsample, deterministic"));
}

// ── Criterion 3: statistics oracles ─────────────────────────────────────

/// Pair-sign enumeration with run-length tie counting; written apart from
/// the production tau.
fn kendall_oracle(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da != 0.0 && db != 0.0 {
                if (da > 0.0) == (db > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    fn tied_pairs(v: &[f64]) -> i64 {
        let mut sorted = v.to_vec();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut total = 0i64;
        let mut run = 1i64;
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    }
    let n0 = (n as i64) * (n as i64 - 1) / 2;
    let d1 = n0 - tied_pairs(a);
    let d2 = n0 - tied_pairs(b);
    if d1 <= 0 || d2 <= 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((d1 as f64) * (d2 as f64)).sqrt())
}

fn anova_oracle(values: &[f64], groups: &[u8]) -> f64 {
    let g0: Vec<f64> = values
        .iter()
        .zip(groups)
        .filter(|(_, &g)| g == 0)
        .map(|(v, _)| *v)
        .collect();
    let g1: Vec<f64> = values
        .iter()
        .zip(groups)
        .filter(|(_, &g)| g == 1)
        .map(|(v, _)| *v)
        .collect();
    let n = values.len() as f64;
    let grand = values.iter().sum::<f64>() / n;
    let m0 = g0.iter().sum::<f64>() / g0.len() as f64;
    let m1 = g1.iter().sum::<f64>() / g1.len() as f64;
    let ss_between = g0.len() as f64 * (m0 - grand).powi(2) + g1.len() as f64 * (m1 - grand).powi(2);
    let ss_within: f64 = g0.iter().map(|v| (v - m0).powi(2)).sum::<f64>()
        + g1.iter().map(|v| (v - m1).powi(2)).sum::<f64>();
    (ss_between / 1.0) / (ss_within / (n - 2.0))
}

#[test]
fn c3_statistics_match_bruteforce_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(333);

    // Kendall tau-b against pair enumeration, ties included
    for case in 0..200 {
        let n = rng.gen_range(2..=12);
        let x: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..6))).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..4))).collect();
        match (tau_b(&x, &y), kendall_oracle(&x, &y)) {
            (Some(got), Some(want)) => {
                assert!((got - want).abs() < 1e-12, "case {case}: {got} vs {want}")
            }
            (None, None) => {}
            (got, want) => panic!("case {case}: definedness mismatch {got:?} vs {want:?}"),
        }
    }

    // ANOVA F against the hand formula
    for case in 0..200 {
        let n = rng.gen_range(5..=40);
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let mut groups: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
        groups[0] = 0;
        groups[1] = 0;
        groups[2] = 1;
        groups[3] = 1;
        let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
        let x = matrix(rows, None);
        let scores = anova_f(&x, &groups).unwrap();
        let got = scores[0].score.expect("defined for 2+2 groups");
        let want = anova_oracle(&values, &groups);
        assert!((got - want).abs() < 1e-9, "case {case}: {got} vs {want}");
    }

    // frozen hand fixture: group0 [1,2,3], group1 [4,5,6] → F = 13.5
    let rows: Vec<Vec<f64>> = (1..=6).map(|v| vec![v as f64]).collect();
    let x = matrix(rows, None);
    let scores = anova_f(&x, &[0, 0, 0, 1, 1, 1]).unwrap();
    assert!((scores[0].score.unwrap() - 13.5).abs() < 1e-12);

    // tau perfect orders and the single-swap fixture
    let asc: Vec<f64> = (1..=4).map(f64::from).collect();
    assert!((tau_b(&asc, &asc).unwrap() - 1.0).abs() < 1e-12);
    let desc: Vec<f64> = (1..=4).rev().map(f64::from).collect();
    assert!((tau_b(&asc, &desc).unwrap() + 1.0).abs() < 1e-12);
    assert!((tau_b(&asc, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 4.0 / 6.0).abs() < 1e-12);

    pass("C3", "200 Kendall + 200 ANOVA oracle matches, F=13.5 fixture exact".into());
}

// ── Criterion 4: stratified k-fold ──────────────────────────────────────

#[test]
fn c4_stratified_tenfold_partitions_with_unit_balance() {
    let mut rng = ChaCha8Rng::seed_from_u64(444);
    for case in 0..100u64 {
        let ones = rng.gen_range(10..60);
        let zeros = rng.gen_range(10..60);
        let mut y = vec![1u8; ones];
        y.extend(vec![0u8; zeros]);
        y.shuffle(&mut rng);
        let folds = stratified_kfold(&y, 10, case).unwrap();
        assert_eq!(folds.len(), 10);

        let mut seen = BTreeSet::new();
        for fold in &folds {
            for &i in fold {
                assert!(seen.insert(i), "case {case}: index {i} duplicated");
            }
        }
        assert_eq!(seen.len(), y.len(), "case {case}: not a partition");

        for class in [0u8, 1] {
            let per_fold: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| y[i] == class).count())
                .collect();
            let lo = per_fold.iter().min().unwrap();
            let hi = per_fold.iter().max().unwrap();
            assert!(hi - lo <= 1, "case {case}: class {class} spread {per_fold:?}");
        }
    }
    pass("C4", "100 random label vectors partitioned with per-class spread <= 1".into());
}

// ── Criterion 5: planted-feature recovery ───────────────────────────────

const PLANTED: [&str; 2] = ["ed_level", "time"];
const RECOVERY_FEATURES: [&str; 10] = [
    "ed_level",
    "time",
    "motivation",
    "nb_action",
    "visual",
    "verbal",
    "factual",
    "practical",
    "memory",
    "deduction",
];

fn planted_matrix(seed: u64) -> EncodedMatrix {
    let spec = PlantSpec {
        n_learners: 200,
        seed,
        informative: PLANTED.iter().map(|n| (n.to_string(), 1.0)).collect(),
        noise_rate: 0.05,
        class_ratio: 0.5,
        shape: Default::default(),
    };
    let (bundle, _) = generate_bundle(&spec).unwrap();
    let x = edmine::experiments::full_feature_matrix(&bundle, &Default::default()).unwrap();
    x.restrict_specs(&RECOVERY_FEATURES).unwrap()
}

fn is_recovered(selected: &[String]) -> bool {
    selected.len() == 2 && PLANTED.iter().all(|p| selected.iter().any(|s| s == p))
}

#[test]
fn c5_wrappers_recover_planted_features_across_seeds() {
    let seeds = 20u64;
    let mut fe_wins = 0;
    let mut be_wins = 0;
    let mut rfe_wins = 0;
    for seed in 0..seeds {
        let x = planted_matrix(seed);
        let cfg = WrapperConfig {
            model: ModelSpec::Tree(TreeParams {
                max_depth: Some(5),
                min_samples_split: 2,
                min_samples_leaf: 2,
            }),
            balance: BalanceSpec::new(BalanceTechnique::None, seed),
            folds: 10,
            seed: seed * 31 + 5,
            averaging: Averaging::Macro,
        };
        let fe = forward_elimination(&x, &cfg, Some(2)).unwrap();
        let be = backward_elimination(&x, &cfg, Some(2)).unwrap();
        let rf = rfe(&x, &cfg, 2).unwrap();
        fe_wins += usize::from(is_recovered(&fe.selected));
        be_wins += usize::from(is_recovered(&be.selected));
        rfe_wins += usize::from(is_recovered(&rf.selected));
    }
    assert!(fe_wins >= 18, "FE recovered {fe_wins}/{seeds}");
    assert!(be_wins >= 18, "BE recovered {be_wins}/{seeds}");
    assert!(rfe_wins >= 18, "RFE recovered {rfe_wins}/{seeds}");
    pass(
        "C5",
        format!("FE {fe_wins}/20, BE {be_wins}/20, RFE {rfe_wins}/20 exact recoveries"),
    );
}

// ── Criterion 6: leakage guard across the experiment suite ──────────────

#[test]
fn c6_no_leakage_across_full_experiment_suite() {
    let config_json = r#"{
        "seed": 5,
        "folds": 5,
        "grid_search": false,
        "balance": {"technique": "smote", "seed": null, "smote_k": 3, "scope": "train_folds"},
        "datasets": {
            "d1": {"kind": "synthetic", "n_learners": 60, "seed": 1,
                   "informative": [["verbal", 1.0]], "noise_rate": 0.05, "class_ratio": 0.55,
                   "shape": {"quizzes_per_tag_pair": 1, "questions_per_quiz": 6}},
            "d2": {"kind": "synthetic", "n_learners": 70, "seed": 2,
                   "informative": [["time", 1.0]], "noise_rate": 0.05, "class_ratio": 0.6,
                   "shape": {"quizzes_per_tag_pair": 1, "questions_per_quiz": 6}},
            "d3": {"kind": "synthetic", "n_learners": 80, "seed": 3,
                   "informative": [["nb_action", 1.0]], "noise_rate": 0.05, "class_ratio": 0.5,
                   "shape": {"quizzes_per_tag_pair": 1, "questions_per_quiz": 6}}
        }
    }"#;
    let config = ExperimentConfig::from_json(config_json).unwrap();
    assert_eq!(config.balance.scope, BalanceScope::TrainFolds);
    let dir = tempfile::tempdir().unwrap();
    // any tagged test-fold row inside a balanced training set aborts the
    // run with a Leakage error, so completing the suite is the assertion
    for kind in [
        ExperimentKind::Balancing,
        ExperimentKind::Models,
        ExperimentKind::Sources,
        ExperimentKind::Transfer,
        ExperimentKind::Selection,
        ExperimentKind::Describe,
    ] {
        let outcome = run_experiment(kind, &config, dir.path());
        assert!(outcome.is_ok(), "{kind:?} failed: {outcome:?}");
    }
    pass("C6", "balancing/models/sources/transfer/selection/describe ran with zero provenance leaks".into());
}

// ── Criteria 7-12: published-number reproduction (needs downloads) ──────

struct RealData {
    config: ExperimentConfig,
}

/// Build a config over `$EDM_DATA_DIR` when the layout is present.
fn real_data() -> Option<RealData> {
    let base = std::env::var_os("EDM_DATA_DIR").map(PathBuf::from)?;
    let d1 = base.join("d1");
    let oulad = base.join("oulad");
    let canvas = base.join("canvas.csv");
    if !d1.join("learners.csv").exists()
        || !oulad.join("studentInfo.csv").exists()
        || !canvas.exists()
    {
        return None;
    }
    let mut config = ExperimentConfig::default();
    config.datasets.insert("d1".into(), DatasetConfig::D1Dir { path: d1 });
    config
        .datasets
        .insert("d2".into(), DatasetConfig::OuladDir { path: oulad });
    config
        .datasets
        .insert("d3".into(), DatasetConfig::CanvasCsv { path: canvas });
    Some(RealData { config })
}

fn skip(criterion: &str) {
    println!(
        "ACCEPT {criterion}: SKIP — public datasets not present (set EDM_DATA_DIR with d1/, oulad/, canvas.csv)"
    );
}

fn report_check(criterion: &str, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPT {criterion}: {verdict} — {detail}");
    assert!(ok, "{criterion}: {detail}");
}

fn common_views(config: &ExperimentConfig) -> Vec<EncodedMatrix> {
    let bundles: Vec<_> = ["d1", "d2", "d3"]
        .iter()
        .map(|id| config.load_dataset(id).expect("dataset loads"))
        .collect();
    let refs: Vec<&_> = bundles.iter().collect();
    edmine::features::common_feature_view(&refs, &config.label_policy()).expect("common view")
}

/// DT accuracy on one dataset's common view under the given technique,
/// using the study protocol (whole-dataset balancing, grid-searched tree).
fn common_view_dt_accuracy(
    view: &EncodedMatrix,
    technique: BalanceTechnique,
    config: &ExperimentConfig,
    label: &str,
) -> f64 {
    let mut balance = config.balance_spec();
    balance.technique = technique;
    balance.scope = BalanceScope::WholeDataset;
    balance.seed = edmine::seed::derive_seed(config.seed, label);
    let grid = edmine::learners::default_tree_grid();
    let result = edmine::learners::grid_search(
        view,
        &grid,
        &balance,
        config.folds,
        edmine::seed::derive_seed(config.seed, &format!("{label}/cv")),
        config.averaging,
    )
    .expect("grid search");
    result.best_report.mean.accuracy
}

#[test]
fn c7_table_of_balanced_accuracies() {
    let Some(real) = real_data() else {
        skip("C7");
        return;
    };
    let views = common_views(&real.config);
    let d1 = common_view_dt_accuracy(&views[0], BalanceTechnique::UpAndDown, &real.config, "c7/d1");
    let d2 = common_view_dt_accuracy(&views[1], BalanceTechnique::UpAndDown, &real.config, "c7/d2");
    let d3 = common_view_dt_accuracy(&views[2], BalanceTechnique::UpAndDown, &real.config, "c7/d3");
    let ok = (d1 - 66.66).abs() <= 10.0 && (d2 - 69.05).abs() <= 5.0 && (d3 - 69.77).abs() <= 5.0;
    report_check(
        "C7",
        ok,
        format!("up+down accuracies D1 {d1:.2} (66.66±10), D2 {d2:.2} (69.05±5), D3 {d3:.2} (69.77±5)"),
    );
}

#[test]
fn c8_unbalanced_baseline_on_d2() {
    let Some(real) = real_data() else {
        skip("C8");
        return;
    };
    let views = common_views(&real.config);
    let d2 = common_view_dt_accuracy(&views[1], BalanceTechnique::None, &real.config, "c8/d2");
    let ok = (d2 - 77.63).abs() <= 5.0;
    report_check("C8", ok, format!("baseline D2 accuracy {d2:.2} (77.63±5)"));
}

fn ablation_accuracy(table: &edmine::experiments::ResultTable, row_label: &str) -> f64 {
    let row = table
        .row_labels
        .iter()
        .position(|l| l == row_label)
        .unwrap_or_else(|| panic!("row {row_label} missing"));
    table.cells[row][0].value
}

#[test]
fn c9_source_trend_on_d2() {
    let Some(real) = real_data() else {
        skip("C9");
        return;
    };
    let mut config = real.config;
    config.sources.dataset = "d2".into();
    config.sources.categories = "DAB".into();
    let bundle = config.load_dataset("d2").expect("d2 loads");
    let out = run_source_ablation(&bundle, &config).expect("ablation");
    let ab = ablation_accuracy(&out.table, "A+B");
    let d = ablation_accuracy(&out.table, "D");
    let ok = ab - d >= 10.0 && (ab - 75.18).abs() <= 5.0;
    report_check(
        "C9",
        ok,
        format!("D2 A+B {ab:.2} vs D {d:.2}; need gap >= 10 and A+B within 75.18±5"),
    );
}

#[test]
fn c10_importance_concentrates_outside_demographics() {
    let Some(real) = real_data() else {
        skip("C10");
        return;
    };
    let mut config = real.config;
    config.sources.dataset = "d2".into();
    config.sources.categories = "DAB".into();
    let bundle = config.load_dataset("d2").expect("d2 loads");
    let out = run_source_ablation(&bundle, &config).expect("ablation");
    let shares: Vec<(char, f64)> = out
        .importance_rows
        .iter()
        .filter(|(subset, _, _)| subset == "D+A+B")
        .map(|(_, c, v)| (*c, *v))
        .collect();
    let demographic: f64 = shares.iter().filter(|(c, _)| *c == 'D').map(|(_, v)| v).sum();
    let academic_behavioral: f64 = shares
        .iter()
        .filter(|(c, _)| *c == 'A' || *c == 'B')
        .map(|(_, v)| v)
        .sum();
    let ok = demographic <= 0.05 && academic_behavioral >= 0.90;
    report_check(
        "C10",
        ok,
        format!("D+A+B importances: D {:.3} (<=0.05), A+B {:.3} (>=0.90)", demographic, academic_behavioral),
    );
}

#[test]
fn c11_selection_on_d1() {
    let Some(real) = real_data() else {
        skip("C11");
        return;
    };
    let config = real.config;
    let bundle = config.load_dataset("d1").expect("d1 loads");
    let analysis = run_selection_analysis(&bundle, &config).expect("selection analysis");
    let k_star = analysis.rfecv.chosen_k.unwrap_or(0);
    let contains = |result: &edmine::selection::SelectionResult| {
        result.selected.iter().any(|f| f == "time") && result.selected.iter().any(|f| f == "verbal")
    };
    let hits = [&analysis.fe, &analysis.be, &analysis.rfecv]
        .iter()
        .filter(|r| contains(r))
        .count();
    let ok = (2..=4).contains(&k_star) && hits >= 2;
    report_check(
        "C11",
        ok,
        format!("RFECV k* = {k_star} (target 3, accept 2-4); time+verbal in {hits}/3 wrapper sets"),
    );
}

#[test]
fn c12_transfer_from_d2_matches_within_dataset_d1() {
    let Some(real) = real_data() else {
        skip("C12");
        return;
    };
    let config = real.config;
    let bundles: Vec<_> = ["d1", "d2", "d3"]
        .iter()
        .map(|id| config.load_dataset(id).expect("dataset loads"))
        .collect();
    let refs: Vec<&_> = bundles.iter().collect();
    let labels = vec!["D1".to_string(), "D2".into(), "D3".into()];
    let tables = run_transfer_matrix(&refs, &labels, &config).expect("transfer");
    let dt = &tables[0];
    let own = dt.cells[0][0].value;
    let from_d2 = dt.cells[1][0].value;
    let ok = (from_d2 - own).abs() <= 15.0;
    report_check(
        "C12",
        ok,
        format!("DT test-on-D1: trained-on-D1 {own:.2} vs trained-on-D2 {from_d2:.2} (|diff| <= 15)"),
    );
}
