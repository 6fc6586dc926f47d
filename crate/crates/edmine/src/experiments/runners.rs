//! The study-level experiment runners.
//!
//! Each runner maps a configuration plus loaded bundles to result tables.
//! Every cell (dataset × technique, model × dataset, matrix cell, subset
//! row) gets a pre-assigned seed derived from the root seed and the cell
//! label, so a bounded worker pool can execute cells in any order without
//! changing a single output byte.

use rayon::prelude::*;

use crate::error::{EdmError, Result};
use crate::features::{
    build_additional_features, build_minimal_features, common_feature_view, derive_labels, encode,
    standardize, EncodePolicy, EncodedMatrix, LabelPolicy, SourceCategory,
};
use crate::ingest::DatasetBundle;
use crate::learners::{
    complement, cross_validate, feature_importance, grid_search, stratified_kfold, train_model,
    ForestParams, MetricsReport, ModelFamily, ModelSpec, SvmParams, TreeParams,
};
use crate::resample::{rebalance, BalanceSpec, BalanceTechnique};
use crate::seed::derive_seed;
use crate::selection::{
    anova_f, backward_elimination, forward_elimination, rfe_cv, FilterScore, PearsonMatrix,
    RfeCvCurvePoint, SelectionMethod, SelectionResult, WrapperConfig,
};

use super::config::ExperimentConfig;
use super::report::{Cell, ResultTable};

const METRIC_ROWS: [&str; 4] = [
    "Accuracy (%)",
    "Precision (%)",
    "Recall (%)",
    "F-score (%)",
];

/// Build the complete labeled encoded matrix for one bundle: minimal
/// features, plus the preference scores when raw course data exists.
pub fn full_feature_matrix(bundle: &DatasetBundle, policy: &LabelPolicy) -> Result<EncodedMatrix> {
    let mut matrix = build_minimal_features(bundle)?;
    if bundle.has_raw_course_data() && !bundle.question_results.is_empty() {
        matrix = matrix.join(&build_additional_features(bundle)?)?;
    }
    let labels = derive_labels(bundle, policy)?;
    let (complete, _removed) = matrix.with_labels(&labels).filter_complete();
    encode(&complete, &EncodePolicy::default())
}

fn default_model(family: ModelFamily) -> ModelSpec {
    match family {
        ModelFamily::Tree => ModelSpec::Tree(TreeParams::default()),
        ModelFamily::Forest => ModelSpec::Forest(ForestParams::default()),
        ModelFamily::Svm => ModelSpec::Svm(SvmParams::default()),
    }
}

/// Largest usable fold count for this label vector, capped at `k`.
fn feasible_folds(y: &[u8], k: usize) -> Option<usize> {
    let ones = y.iter().filter(|&&l| l == 1).count();
    let smallest = ones.min(y.len() - ones);
    (smallest >= 2).then(|| k.min(smallest))
}

/// Run one experiment cell: grid search when configured, otherwise the
/// family default spec.
fn evaluate_cell(
    x: &EncodedMatrix,
    family: ModelFamily,
    balance: &BalanceSpec,
    config: &ExperimentConfig,
    cell_seed: u64,
) -> Result<(ModelSpec, MetricsReport)> {
    let y = x.labels_or_err()?;
    let k = feasible_folds(y, config.folds).ok_or_else(|| {
        EdmError::Experiment("a class has fewer than 2 members; cannot cross-validate".into())
    })?;
    if config.grid_search {
        let result = grid_search(
            x,
            &crate::learners::default_grid(family),
            balance,
            k,
            cell_seed,
            config.averaging,
        )?;
        Ok((result.best, result.best_report))
    } else {
        let spec = default_model(family);
        let report = cross_validate(x, &spec, balance, k, cell_seed, config.averaging)?;
        Ok((spec, report))
    }
}

fn metrics_column(table: &mut ResultTable, col: usize, report: &MetricsReport) {
    let values = [
        (report.mean.accuracy, report.std_dev.accuracy),
        (report.mean.precision, report.std_dev.precision),
        (report.mean.recall, report.std_dev.recall),
        (report.mean.f_score, report.std_dev.f_score),
    ];
    for (row, (mean, std)) in values.iter().enumerate() {
        table.set(row, col, Cell::with_dispersion(*mean, *std));
    }
}

/// Balancing comparison: five tables (baseline plus the four techniques),
/// each 4 metrics × datasets, decision tree on the common feature view.
pub fn run_balancing_comparison(
    bundles: &[&DatasetBundle],
    labels: &[String],
    config: &ExperimentConfig,
) -> Result<Vec<ResultTable>> {
    let views = common_feature_view(bundles, &config.label_policy())?;
    let col_labels: Vec<String> = labels.to_vec();
    let mut tables = Vec::new();
    for technique in BalanceTechnique::ALL {
        let name = match technique {
            BalanceTechnique::None => "baseline",
            other => other.as_str(),
        };
        let caption = match technique {
            BalanceTechnique::None => "Common-feature results without balancing".to_string(),
            other => format!("Common-feature results with {} balancing", other.as_str()),
        };
        let mut table = ResultTable::new(
            name,
            &caption,
            METRIC_ROWS.iter().map(|s| s.to_string()).collect(),
            col_labels.clone(),
        );
        let reports: Vec<MetricsReport> = views
            .par_iter()
            .enumerate()
            .map(|(d, x)| {
                let mut balance = config.balance_spec();
                balance.technique = technique;
                balance.seed = derive_seed(config.seed, &format!("balancing/{name}/{d}"));
                let cell_seed = derive_seed(config.seed, &format!("balancing/{name}/cv{d}"));
                evaluate_cell(x, ModelFamily::Tree, &balance, config, cell_seed)
                    .map(|(_, report)| report)
            })
            .collect::<Result<Vec<_>>>()?;
        for (d, report) in reports.iter().enumerate() {
            metrics_column(&mut table, d, report);
        }
        tables.push(table);
    }
    Ok(tables)
}

/// Model comparison output: accuracy table plus long-form plot rows
/// `(model, dataset, mean, std_dev, std_err)`.
pub struct ModelComparison {
    pub table: ResultTable,
    pub plot_rows: Vec<(String, String, f64, f64, f64)>,
}

pub fn run_model_comparison(
    bundles: &[&DatasetBundle],
    labels: &[String],
    config: &ExperimentConfig,
) -> Result<ModelComparison> {
    let views = common_feature_view(bundles, &config.label_policy())?;
    let col_labels: Vec<String> = labels.to_vec();
    let row_labels: Vec<String> = ModelFamily::ALL.iter().map(|f| f.as_str().into()).collect();
    let mut table = ResultTable::new(
        "model_comparison",
        "Mean accuracy by model and dataset (± std dev across folds)",
        row_labels,
        col_labels.clone(),
    );
    let cells: Vec<(usize, usize, MetricsReport)> = ModelFamily::ALL
        .par_iter()
        .enumerate()
        .flat_map(|(m, family)| {
            views
                .par_iter()
                .enumerate()
                .map(move |(d, x)| (m, *family, d, x))
        })
        .map(|(m, family, d, x)| {
            let mut balance = config.balance_spec();
            balance.seed = derive_seed(config.seed, &format!("models/{}/{d}", family.as_str()));
            let cell_seed = derive_seed(config.seed, &format!("models/{}/cv{d}", family.as_str()));
            evaluate_cell(x, family, &balance, config, cell_seed)
                .map(|(_, report)| (m, d, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut plot_rows = Vec::with_capacity(cells.len());
    let mut ordered = cells;
    ordered.sort_by_key(|(m, d, _)| (*m, *d));
    for (m, d, report) in &ordered {
        table.set(
            *m,
            *d,
            Cell::with_dispersion(report.mean.accuracy, report.std_dev.accuracy),
        );
        plot_rows.push((
            ModelFamily::ALL[*m].as_str().to_string(),
            col_labels[*d].clone(),
            report.mean.accuracy,
            report.std_dev.accuracy,
            report.std_err.accuracy,
        ));
    }
    Ok(ModelComparison { table, plot_rows })
}

/// Train-on-i / test-on-j accuracy matrices over the aligned common
/// features, one per model family. Every dataset is split 80/20 stratified;
/// cell (i, j) trains on i's balanced train split and evaluates on j's
/// held-out split, so the diagonal shares the off-diagonal protocol.
pub fn run_transfer_matrix(
    bundles: &[&DatasetBundle],
    labels: &[String],
    config: &ExperimentConfig,
) -> Result<Vec<ResultTable>> {
    let views = common_feature_view(bundles, &config.label_policy())?;

    struct Split {
        train: EncodedMatrix,
        test: EncodedMatrix,
    }
    let splits: Vec<Split> = views
        .iter()
        .enumerate()
        .map(|(d, x)| {
            let y = x.labels_or_err()?;
            let folds = stratified_kfold(
                y,
                5,
                derive_seed(config.seed, &format!("transfer/split{d}")),
            )?;
            let test_idx = &folds[0];
            let train_idx = complement(test_idx, y.len());
            Ok(Split {
                train: x.subset(&train_idx),
                test: x.subset(test_idx),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tables = Vec::new();
    for family in ModelFamily::ALL {
        let mut table = ResultTable::new(
            &format!("transfer_{}", family.as_str().to_lowercase()),
            &format!(
                "{}: accuracy when training on the row dataset and testing on the column dataset",
                family.as_str()
            ),
            labels.iter().map(|l| format!("train {l}")).collect(),
            labels.iter().map(|l| format!("test {l}")).collect(),
        );
        let models = splits
            .par_iter()
            .enumerate()
            .map(|(i, split)| {
                let cell_seed = derive_seed(config.seed, &format!("transfer/{}/{i}", family.as_str()));
                let mut balance = config.balance_spec();
                balance.seed = derive_seed(cell_seed, "balance");
                let y_train = split.train.labels_or_err()?;
                let spec = if config.grid_search {
                    match feasible_folds(y_train, config.folds) {
                        Some(k) => {
                            grid_search(
                                &split.train,
                                &crate::learners::default_grid(family),
                                &balance,
                                k,
                                derive_seed(cell_seed, "grid"),
                                config.averaging,
                            )?
                            .best
                        }
                        None => default_model(family),
                    }
                } else {
                    default_model(family)
                };
                let balanced = rebalance(&split.train, &balance)?;
                let y = balanced.labels_or_err()?.to_vec();
                // views are already z-scored within their own dataset
                train_model(&spec, &balanced, &y, derive_seed(cell_seed, "final"))
            })
            .collect::<Result<Vec<_>>>()?;

        for (i, model) in models.iter().enumerate() {
            for (j, split) in splits.iter().enumerate() {
                let predictions = model.predict(&split.test)?;
                let truth = split.test.labels_or_err()?;
                let hits = predictions
                    .iter()
                    .zip(truth)
                    .filter(|(p, t)| p == t)
                    .count();
                let accuracy = hits as f64 / truth.len() as f64 * 100.0;
                table.set(i, j, Cell::plain(accuracy));
            }
        }
        tables.push(table);
    }
    Ok(tables)
}

fn parse_categories(s: &str) -> Result<Vec<SourceCategory>> {
    let mut out = Vec::new();
    for c in s.chars() {
        if c == '+' || c == ' ' || c == ',' {
            continue;
        }
        let cat = SourceCategory::parse(c)
            .ok_or_else(|| EdmError::Config(format!("unknown source category `{c}`")))?;
        if !out.contains(&cat) {
            out.push(cat);
        }
    }
    if out.is_empty() {
        return Err(EdmError::Config("no source categories given".into()));
    }
    // canonical D, A, B, P, L order
    out.sort_by_key(|c| SourceCategory::ALL.iter().position(|a| a == c));
    Ok(out)
}

fn subset_label(cats: &[SourceCategory]) -> String {
    cats.iter()
        .map(|c| c.code().to_string())
        .collect::<Vec<_>>()
        .join("+")
}

/// All non-empty subsets ordered by (size, lexicographic position).
fn non_empty_subsets(cats: &[SourceCategory]) -> Vec<Vec<SourceCategory>> {
    let n = cats.len();
    let mut subsets: Vec<Vec<SourceCategory>> = (1u32..(1 << n))
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| cats[i])
                .collect()
        })
        .collect();
    subsets.sort_by_key(|s| {
        let positions: Vec<usize> = s
            .iter()
            .map(|c| cats.iter().position(|a| a == c).expect("member"))
            .collect();
        (s.len(), positions)
    });
    subsets
}

/// Source-ablation output: the metric table plus per-row category
/// importance shares.
pub struct AblationOutput {
    pub table: ResultTable,
    /// (subset label, category code, importance share)
    pub importance_rows: Vec<(String, char, f64)>,
}

pub fn run_source_ablation(
    bundle: &DatasetBundle,
    config: &ExperimentConfig,
) -> Result<AblationOutput> {
    let x = full_feature_matrix(bundle, &config.label_policy())?;
    let categories = parse_categories(&config.sources.categories)?;
    for cat in &categories {
        let present = x
            .manifest
            .entries
            .iter()
            .any(|e| e.category == cat.code());
        if !present {
            return Err(EdmError::Experiment(format!(
                "category {} absent from dataset {}",
                cat.code(),
                bundle.dataset_id
            )));
        }
    }
    let subsets = non_empty_subsets(&categories);
    let row_labels: Vec<String> = subsets.iter().map(|s| subset_label(s)).collect();
    let mut table = ResultTable::new(
        "source_ablation",
        &format!(
            "Results of source combinations on {} ({} balancing)",
            bundle.dataset_id,
            config.balance.technique.as_str()
        ),
        row_labels.clone(),
        METRIC_ROWS.iter().map(|s| s.to_string()).collect(),
    );

    let results: Vec<(MetricsReport, Vec<(char, f64)>)> = subsets
        .par_iter()
        .map(|subset| {
            let label = subset_label(subset);
            let x_s = x.project_categories(subset);
            let mut balance = config.balance_spec();
            balance.seed = derive_seed(config.seed, &format!("sources/{label}/balance"));
            let cell_seed = derive_seed(config.seed, &format!("sources/{label}/cv"));
            let (best, report) =
                evaluate_cell(&x_s, ModelFamily::Tree, &balance, config, cell_seed)?;

            // category share of importance from one model on the balanced set
            let mut final_balance = balance;
            final_balance.seed = derive_seed(config.seed, &format!("sources/{label}/final"));
            let balanced = rebalance(&x_s, &final_balance)?;
            let (scaled, _) = standardize(&balanced, None)?;
            let y = scaled.labels_or_err()?.to_vec();
            let model = train_model(&best, &scaled, &y, derive_seed(cell_seed, "final"))?;
            let per_spec = feature_importance(&model, &scaled.manifest)?;
            let mut shares: Vec<(char, f64)> = Vec::new();
            for cat in subset {
                let total: f64 = per_spec
                    .iter()
                    .filter(|(spec, _)| {
                        scaled
                            .manifest
                            .entry(spec)
                            .map(|e| e.category == cat.code())
                            .unwrap_or(false)
                    })
                    .map(|(_, v)| v)
                    .sum();
                shares.push((cat.code(), total));
            }
            Ok((report, shares))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut importance_rows = Vec::new();
    for (row, (report, shares)) in results.iter().enumerate() {
        let values = [
            report.mean.accuracy,
            report.mean.precision,
            report.mean.recall,
            report.mean.f_score,
        ];
        let stds = [
            report.std_dev.accuracy,
            report.std_dev.precision,
            report.std_dev.recall,
            report.std_dev.f_score,
        ];
        for (col, (v, s)) in values.iter().zip(&stds).enumerate() {
            table.set(row, col, Cell::with_dispersion(*v, *s));
        }
        for (code, share) in shares {
            importance_rows.push((row_labels[row].clone(), *code, *share));
        }
    }
    Ok(AblationOutput {
        table,
        importance_rows,
    })
}

/// Everything the selection analysis produces.
pub struct SelectionAnalysis {
    pub fe: SelectionResult,
    pub be: SelectionResult,
    pub rfecv: SelectionResult,
    pub curve: Vec<RfeCvCurvePoint>,
    pub anova: SelectionResult,
    pub kendall: SelectionResult,
    pub pearson: PearsonMatrix,
    /// Specs excluded up front because every encoded column had zero
    /// variance.
    pub dropped_zero_variance: Vec<String>,
    pub inner_model: ModelSpec,
}

fn filter_result(method: SelectionMethod, scores: Vec<FilterScore>) -> SelectionResult {
    let mut ranked: Vec<usize> = (0..scores.len()).collect();
    ranked.sort_by(|&a, &b| {
        let sa = scores[a].score.unwrap_or(f64::NEG_INFINITY);
        let sb = scores[b].score.unwrap_or(f64::NEG_INFINITY);
        sb.partial_cmp(&sa).expect("comparable scores").then(a.cmp(&b))
    });
    SelectionResult {
        method,
        selected: ranked.iter().map(|&i| scores[i].column.clone()).collect(),
        steps: Vec::new(),
        chosen_k: None,
        feature_scores: scores
            .iter()
            .map(|s| (s.column.clone(), s.score))
            .collect(),
        flags: scores
            .iter()
            .filter_map(|s| s.flag.as_ref().map(|f| format!("{}: {f}", s.column)))
            .collect(),
    }
}

pub fn run_selection_analysis(
    bundle: &DatasetBundle,
    config: &ExperimentConfig,
) -> Result<SelectionAnalysis> {
    let x_all = full_feature_matrix(bundle, &config.label_policy())?;
    for cat in SourceCategory::ALL {
        if !x_all.manifest.entries.iter().any(|e| e.category == cat.code()) {
            return Err(EdmError::Experiment(format!(
                "selection analysis needs all five source categories; {} is missing",
                cat.code()
            )));
        }
    }

    // null-variance features cannot inform any method; drop them with a flag
    let (_, stats) = standardize(&x_all, None)?;
    let dead_columns = stats.zero_variance_columns();
    let mut dropped = Vec::new();
    let mut alive = Vec::new();
    for entry in &x_all.manifest.entries {
        let all_dead = entry
            .outputs
            .iter()
            .all(|o| dead_columns.contains(&o.as_str()));
        if all_dead {
            dropped.push(entry.spec.clone());
        } else {
            alive.push(entry.spec.clone());
        }
    }
    let alive_refs: Vec<&str> = alive.iter().map(String::as_str).collect();
    let x = x_all.restrict_specs(&alive_refs)?;
    let y = x.labels_or_err()?.to_vec();

    let k = feasible_folds(&y, config.folds).ok_or_else(|| {
        EdmError::Experiment("a class has fewer than 2 members; cannot cross-validate".into())
    })?;
    let mut balance = config.balance_spec();
    balance.seed = derive_seed(config.seed, "selection/balance");

    let inner_model = if config.grid_search {
        grid_search(
            &x,
            &crate::learners::default_tree_grid(),
            &balance,
            k,
            derive_seed(config.seed, "selection/grid"),
            config.averaging,
        )?
        .best
    } else {
        default_model(ModelFamily::Tree)
    };

    let wrapper = WrapperConfig {
        model: inner_model.clone(),
        balance,
        folds: k,
        seed: derive_seed(config.seed, "selection/cv"),
        averaging: config.averaging,
    };
    let fe = forward_elimination(&x, &wrapper, config.selection.max_k)?;
    let be = backward_elimination(&x, &wrapper, config.selection.max_k)?;
    let (rfecv, curve) = rfe_cv(&x, &wrapper)?;

    let anova = filter_result(SelectionMethod::Anova, anova_f(&x, &y)?);
    let kendall = filter_result(SelectionMethod::Kendall, crate::selection::kendall_tau(&x, &y)?);
    let pearson = crate::selection::pearson_matrix(&x)?;

    Ok(SelectionAnalysis {
        fe,
        be,
        rfecv,
        curve,
        anova,
        kendall,
        pearson,
        dropped_zero_variance: dropped,
        inner_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_of_three_are_seven_in_size_order() {
        let cats = parse_categories("DAB").unwrap();
        let subsets = non_empty_subsets(&cats);
        assert_eq!(subsets.len(), 7);
        let labels: Vec<String> = subsets.iter().map(|s| subset_label(s)).collect();
        assert_eq!(
            labels,
            vec!["D", "A", "B", "D+A", "D+B", "A+B", "D+A+B"]
        );
    }

    #[test]
    fn subsets_of_five_are_thirty_one() {
        let cats = parse_categories("DABPL").unwrap();
        assert_eq!(non_empty_subsets(&cats).len(), 31);
    }

    #[test]
    fn category_string_is_order_insensitive() {
        assert_eq!(parse_categories("BAD").unwrap(), parse_categories("D+A+B").unwrap());
        assert!(parse_categories("DX").is_err());
        assert!(parse_categories("").is_err());
    }
}
