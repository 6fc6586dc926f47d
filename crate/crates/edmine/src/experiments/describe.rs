//! Per-feature dataset summaries: counts, missing counts, histograms and
//! class-conditional histograms, as plot-ready data.

use crate::error::Result;
use crate::features::{
    build_additional_features, build_minimal_features, derive_labels, FeatureKind, FeatureMatrix,
    FeatureSpec, FeatureValue, LabelPolicy, Quarantine, SourceCategory,
};
use crate::ingest::DatasetBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct HistBin {
    pub label: String,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub count: usize,
    pub count_fail: usize,
    pub count_pass: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    pub feature: String,
    /// Non-missing values.
    pub count: usize,
    pub missing: usize,
    pub bins: Vec<HistBin>,
}

impl FeatureSummary {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# feature: {}\n# count: {}\n# missing: {}\nbin,lo,hi,count,count_fail,count_pass\n",
            self.feature, self.count, self.missing
        );
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                b.label,
                b.lo.map(|v| v.to_string()).unwrap_or_default(),
                b.hi.map(|v| v.to_string()).unwrap_or_default(),
                b.count,
                b.count_fail,
                b.count_pass
            ));
        }
        out
    }
}

const NUMERIC_BINS: usize = 10;

/// Summarize every feature of a bundle, including fields described but never
/// modeled (native language). Quarantined rows still count; their missing
/// fields land in the missing tally. An empty bundle yields empty summaries.
pub fn describe_bundle(bundle: &DatasetBundle, policy: &LabelPolicy) -> Result<Vec<FeatureSummary>> {
    let mut matrix = build_minimal_features(bundle)?;
    if bundle.has_raw_course_data() && !bundle.question_results.is_empty() {
        let additional = build_additional_features(bundle)?;
        matrix = matrix.join(&additional)?;
    }
    matrix = append_native_lang(matrix, bundle);
    let labels = derive_labels(bundle, policy)?;
    let row_labels: Vec<Option<u8>> = matrix
        .learner_ids
        .iter()
        .map(|id| labels.labels.get(id).copied())
        .collect();

    let mut out = Vec::with_capacity(matrix.specs.len());
    for (j, spec) in matrix.specs.iter().enumerate() {
        let values: Vec<(&FeatureValue, Option<u8>)> = matrix
            .rows
            .iter()
            .zip(&row_labels)
            .map(|(row, label)| (&row[j], *label))
            .collect();
        out.push(summarize(spec, &values));
    }
    Ok(out)
}

fn append_native_lang(matrix: FeatureMatrix, bundle: &DatasetBundle) -> FeatureMatrix {
    let spec = FeatureSpec {
        name: "native_lang".into(),
        category: SourceCategory::Demographic,
        kind: FeatureKind::Categorical {
            levels: vec!["yes".into(), "no".into()],
        },
        declared_range: None,
    };
    let column: Vec<FeatureValue> = matrix
        .learner_ids
        .iter()
        .map(|id| {
            bundle
                .profiles
                .iter()
                .find(|p| &p.learner_id == id)
                .and_then(|p| p.native_lang)
                .map(|v| FeatureValue::Cat(if v { "yes".into() } else { "no".into() }))
                .unwrap_or(FeatureValue::Missing)
        })
        .collect();
    let lang = FeatureMatrix {
        specs: vec![spec],
        learner_ids: matrix.learner_ids.clone(),
        rows: column.into_iter().map(|v| vec![v]).collect(),
        labels: None,
        quarantine: Vec::<Quarantine>::new(),
    };
    matrix.join(&lang).expect("same learners by construction")
}

fn summarize(spec: &FeatureSpec, values: &[(&FeatureValue, Option<u8>)]) -> FeatureSummary {
    let missing = values.iter().filter(|(v, _)| v.is_missing()).count();
    let count = values.len() - missing;
    let bins = match &spec.kind {
        FeatureKind::Categorical { levels } | FeatureKind::Ordinal {
            levels: Some(levels),
        } => {
            let mut bins: Vec<HistBin> = levels
                .iter()
                .map(|level| HistBin {
                    label: level.clone(),
                    lo: None,
                    hi: None,
                    count: 0,
                    count_fail: 0,
                    count_pass: 0,
                })
                .collect();
            for (v, label) in values {
                if let FeatureValue::Cat(s) = v {
                    if let Some(bin) = bins.iter_mut().find(|b| &b.label == s) {
                        tally(bin, *label);
                    }
                }
            }
            bins
        }
        _ => numeric_bins(values),
    };
    FeatureSummary {
        feature: spec.name.clone(),
        count,
        missing,
        bins,
    }
}

fn numeric_bins(values: &[(&FeatureValue, Option<u8>)]) -> Vec<HistBin> {
    let numbers: Vec<(f64, Option<u8>)> = values
        .iter()
        .filter_map(|(v, label)| v.as_num().map(|n| (n, *label)))
        .collect();
    if numbers.is_empty() {
        return Vec::new();
    }
    let lo = numbers.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let hi = numbers
        .iter()
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        let mut bin = HistBin {
            label: format!("{lo}"),
            lo: Some(lo),
            hi: Some(hi),
            count: 0,
            count_fail: 0,
            count_pass: 0,
        };
        for (_, label) in &numbers {
            tally(&mut bin, *label);
        }
        return vec![bin];
    }
    let width = (hi - lo) / NUMERIC_BINS as f64;
    let mut bins: Vec<HistBin> = (0..NUMERIC_BINS)
        .map(|i| {
            let b_lo = lo + i as f64 * width;
            let b_hi = if i == NUMERIC_BINS - 1 {
                hi
            } else {
                lo + (i + 1) as f64 * width
            };
            HistBin {
                label: format!("[{b_lo:.3},{b_hi:.3}]"),
                lo: Some(b_lo),
                hi: Some(b_hi),
                count: 0,
                count_fail: 0,
                count_pass: 0,
            }
        })
        .collect();
    for (v, label) in &numbers {
        let idx = (((v - lo) / width) as usize).min(NUMERIC_BINS - 1);
        tally(&mut bins[idx], *label);
    }
    bins
}

fn tally(bin: &mut HistBin, label: Option<u8>) {
    bin.count += 1;
    match label {
        Some(0) => bin.count_fail += 1,
        Some(_) => bin.count_pass += 1,
        None => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_bundle, PlantSpec};

    #[test]
    fn histogram_counts_sum_to_non_missing_count() {
        let (bundle, _) = generate_bundle(&PlantSpec::new(60, 4)).unwrap();
        let summaries = describe_bundle(&bundle, &LabelPolicy::default()).unwrap();
        assert!(!summaries.is_empty());
        for s in &summaries {
            let total: usize = s.bins.iter().map(|b| b.count).sum();
            assert_eq!(total, s.count, "feature {}", s.feature);
            assert_eq!(s.count + s.missing, 60, "feature {}", s.feature);
        }
    }

    #[test]
    fn empty_bundle_gives_empty_summaries_without_failure() {
        let bundle = crate::ingest::DatasetBundle::new(crate::ingest::DatasetId::D1);
        let summaries = describe_bundle(&bundle, &LabelPolicy::default()).unwrap();
        for s in &summaries {
            assert_eq!(s.count, 0);
            assert_eq!(s.missing, 0);
        }
    }

    #[test]
    fn class_conditional_counts_split_the_total() {
        let (bundle, truth) = generate_bundle(&PlantSpec::new(50, 9)).unwrap();
        let summaries = describe_bundle(&bundle, &LabelPolicy::default()).unwrap();
        let age = summaries.iter().find(|s| s.feature == "age").unwrap();
        let pass: usize = age.bins.iter().map(|b| b.count_pass).sum();
        let fail: usize = age.bins.iter().map(|b| b.count_fail).sum();
        let expected_pass = truth.labels.values().filter(|&&l| l == 1).count();
        assert_eq!(pass, expected_pass);
        assert_eq!(pass + fail, 50);
    }
}
