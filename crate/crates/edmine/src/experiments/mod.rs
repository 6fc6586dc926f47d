//! Experiment orchestration and file emission.
//!
//! [`run_experiment`] loads or generates the needed datasets, dispatches to
//! the requested runner, writes result tables (Markdown + CSV), auxiliary
//! plot data, and a `manifest.json` that pins the resolved configuration,
//! the root seed and the input digests. A manifest reproduces every output
//! byte-for-byte.

mod config;
mod describe;
mod report;
mod runners;

pub use config::{
    apply_overrides, BalanceConfig, DatasetConfig, ExperimentConfig, ExperimentKind,
    OverrideFlags, RunManifest, SelectionConfig, SourcesConfig,
};
pub use describe::{describe_bundle, FeatureSummary, HistBin};
pub use report::{emit_report, write_csv_with_provenance, Cell, Provenance, ResultTable};
pub use runners::{
    full_feature_matrix, run_balancing_comparison, run_model_comparison, run_selection_analysis,
    run_source_ablation, run_transfer_matrix, AblationOutput, ModelComparison, SelectionAnalysis,
};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{EdmError, Result};
use crate::ingest::DatasetBundle;

/// Paths written by a run, plus the manifest that reproduces them.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

fn datasets_for(kind: ExperimentKind, config: &ExperimentConfig) -> Vec<String> {
    match kind {
        ExperimentKind::Balancing | ExperimentKind::Models | ExperimentKind::Transfer => {
            vec!["d1".into(), "d2".into(), "d3".into()]
        }
        ExperimentKind::Sources => vec![config.sources.dataset.clone()],
        ExperimentKind::Selection => vec![config.selection.dataset.clone()],
        ExperimentKind::Describe => vec![config.describe_dataset.clone()],
    }
}

fn file_stem(name: &str) -> String {
    name.replace('%', "pct")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Run one experiment end to end, writing outputs under
/// `<out_dir>/<experiment>/`.
pub fn run_experiment(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<RunOutcome> {
    config.validate()?;

    let ids = datasets_for(kind, config);
    let mut bundles: BTreeMap<String, DatasetBundle> = BTreeMap::new();
    for id in &ids {
        bundles.insert(id.clone(), config.load_dataset(id)?);
    }
    let digests_before: BTreeMap<String, String> = bundles
        .iter()
        .map(|(id, b)| (id.clone(), b.content_digest()))
        .collect();

    let manifest = RunManifest::new(kind, config, digests_before.clone());
    let provenance = manifest.provenance();
    let exp_dir = out_dir.join(kind.as_str());
    std::fs::create_dir_all(&exp_dir).map_err(|e| EdmError::io(&exp_dir, e))?;

    let ordered: Vec<&DatasetBundle> = ids.iter().map(|id| &bundles[id]).collect();
    let labels: Vec<String> = ids.iter().map(|id| id.to_uppercase()).collect();
    let mut written: Vec<PathBuf> = Vec::new();

    match kind {
        ExperimentKind::Balancing => {
            let tables = run_balancing_comparison(&ordered, &labels, config)?;
            written.extend(emit_report(&tables, &exp_dir, &provenance)?);
        }
        ExperimentKind::Models => {
            let out = run_model_comparison(&ordered, &labels, config)?;
            written.extend(emit_report(
                &[out.table.clone()],
                &exp_dir,
                &provenance,
            )?);
            let mut body = String::from("model,dataset,mean_accuracy,std_dev,std_err\n");
            for (model, dataset, mean, std_dev, std_err) in &out.plot_rows {
                body.push_str(&format!("{model},{dataset},{mean},{std_dev},{std_err}\n"));
            }
            let path = exp_dir.join("accuracy_plot_data.csv");
            write_csv_with_provenance(&path, &provenance, &body)?;
            written.push(path);
        }
        ExperimentKind::Transfer => {
            let tables = run_transfer_matrix(&ordered, &labels, config)?;
            written.extend(emit_report(&tables, &exp_dir, &provenance)?);
        }
        ExperimentKind::Sources => {
            let out = run_source_ablation(ordered[0], config)?;
            written.extend(emit_report(&[out.table.clone()], &exp_dir, &provenance)?);
            let mut body = String::from("subset,category,importance_share\n");
            for (subset, category, share) in &out.importance_rows {
                body.push_str(&format!("{subset},{category},{share}\n"));
            }
            let path = exp_dir.join("importance_by_category.csv");
            write_csv_with_provenance(&path, &provenance, &body)?;
            written.push(path);
        }
        ExperimentKind::Selection => {
            let analysis = run_selection_analysis(ordered[0], config)?;
            for (name, result) in [
                ("fe", &analysis.fe),
                ("be", &analysis.be),
                ("rfecv", &analysis.rfecv),
            ] {
                let steps = exp_dir.join(format!("{name}_steps.csv"));
                write_csv_with_provenance(&steps, &provenance, &result.steps_csv())?;
                written.push(steps);
                let summary = exp_dir.join(format!("{name}_summary.json"));
                std::fs::write(&summary, result.summary_json())
                    .map_err(|e| EdmError::io(&summary, e))?;
                written.push(summary);
            }
            let mut curve = String::from("k,mean_accuracy,std_dev\n");
            for point in &analysis.curve {
                curve.push_str(&format!(
                    "{},{},{}\n",
                    point.k, point.mean_accuracy, point.std_dev
                ));
            }
            let path = exp_dir.join("rfecv_curve.csv");
            write_csv_with_provenance(&path, &provenance, &curve)?;
            written.push(path);

            for (name, result) in [("anova", &analysis.anova), ("kendall", &analysis.kendall)] {
                let path = exp_dir.join(format!("{name}.csv"));
                write_csv_with_provenance(&path, &provenance, &result.scores_csv())?;
                written.push(path);
            }
            let path = exp_dir.join("pearson.csv");
            write_csv_with_provenance(&path, &provenance, &analysis.pearson.to_csv())?;
            written.push(path);

            let mut dropped = String::from("feature,reason\n");
            for name in &analysis.dropped_zero_variance {
                dropped.push_str(&format!("{name},null variance\n"));
            }
            let path = exp_dir.join("excluded_features.csv");
            write_csv_with_provenance(&path, &provenance, &dropped)?;
            written.push(path);

            let mut chosen = ResultTable::new(
                "chosen_k",
                &format!(
                    "Wrapper-selected feature-set sizes (inner model {})",
                    analysis.inner_model.describe()
                ),
                vec!["FE".into(), "BE".into(), "RFECV".into()],
                vec!["k".into()],
            );
            chosen.set(0, 0, Cell::plain(analysis.fe.chosen_k.unwrap_or(0) as f64));
            chosen.set(1, 0, Cell::plain(analysis.be.chosen_k.unwrap_or(0) as f64));
            chosen.set(
                2,
                0,
                Cell::plain(analysis.rfecv.chosen_k.unwrap_or(0) as f64),
            );
            written.extend(emit_report(&[chosen], &exp_dir, &provenance)?);
        }
        ExperimentKind::Describe => {
            let summaries = describe_bundle(ordered[0], &config.label_policy())?;
            let mut index = String::from("feature,count,missing\n");
            for summary in &summaries {
                index.push_str(&format!(
                    "{},{},{}\n",
                    summary.feature, summary.count, summary.missing
                ));
                let path = exp_dir.join(format!("{}.csv", file_stem(&summary.feature)));
                write_csv_with_provenance(&path, &provenance, &summary.to_csv())?;
                written.push(path);
            }
            let path = exp_dir.join("summary.csv");
            write_csv_with_provenance(&path, &provenance, &index)?;
            written.push(path);
        }
    }

    // experiments must never mutate their inputs
    for (id, bundle) in &bundles {
        if bundle.content_digest() != digests_before[id] {
            return Err(EdmError::Experiment(format!(
                "input bundle `{id}` was mutated during the run"
            )));
        }
    }

    let manifest_path = exp_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest.to_json()?)
        .map_err(|e| EdmError::io(&manifest_path, e))?;
    written.push(manifest_path);

    Ok(RunOutcome {
        manifest,
        out_dir: exp_dir,
        written,
    })
}
