//! Model-free per-column statistics against a binary target.

use crate::error::{EdmError, Result};
use crate::features::EncodedMatrix;

/// A per-column statistic; `None` when undefined, with the reason recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterScore {
    pub column: String,
    pub score: Option<f64>,
    pub flag: Option<String>,
}

fn split_groups(values: &[f64], y: &[u8]) -> (Vec<f64>, Vec<f64>) {
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for (&v, &label) in values.iter().zip(y) {
        if label == 0 {
            g0.push(v);
        } else {
            g1.push(v);
        }
    }
    (g0, g1)
}

/// One-way ANOVA F statistic per column over the two label groups:
/// `F = (SS_between / df_between) / (SS_within / df_within)` with
/// df_between = 1 and df_within = n − 2. A group with fewer than two
/// samples leaves the statistic undefined.
pub fn anova_f(x: &EncodedMatrix, y: &[u8]) -> Result<Vec<FilterScore>> {
    if x.n_rows() != y.len() {
        return Err(EdmError::Selection("row/label mismatch".into()));
    }
    let mut out = Vec::with_capacity(x.n_cols());
    for (j, column) in x.columns.iter().enumerate() {
        let values = x.column_values(j);
        let (g0, g1) = split_groups(&values, y);
        if g0.len() < 2 || g1.len() < 2 {
            out.push(FilterScore {
                column: column.name.clone(),
                score: None,
                flag: Some("a label group has fewer than 2 samples".into()),
            });
            continue;
        }
        let n = values.len() as f64;
        let grand = values.iter().sum::<f64>() / n;
        let mean0 = g0.iter().sum::<f64>() / g0.len() as f64;
        let mean1 = g1.iter().sum::<f64>() / g1.len() as f64;
        let ss_between =
            g0.len() as f64 * (mean0 - grand).powi(2) + g1.len() as f64 * (mean1 - grand).powi(2);
        let ss_within = g0.iter().map(|v| (v - mean0).powi(2)).sum::<f64>()
            + g1.iter().map(|v| (v - mean1).powi(2)).sum::<f64>();
        let df_within = n - 2.0;
        if ss_within <= 0.0 {
            let (score, flag) = if ss_between <= 0.0 {
                (None, Some("zero variance in both directions".into()))
            } else {
                (
                    Some(f64::INFINITY),
                    Some("perfect within-group separation (infinite F)".into()),
                )
            };
            out.push(FilterScore {
                column: column.name.clone(),
                score,
                flag,
            });
            continue;
        }
        let f = (ss_between / 1.0) / (ss_within / df_within);
        out.push(FilterScore {
            column: column.name.clone(),
            score: Some(f),
            flag: None,
        });
    }
    Ok(out)
}

/// Kendall tau-b per column against the target, with tie corrections:
/// `τ_b = (C − D) / sqrt((n0 − n1)(n0 − n2))` where n0 = n(n−1)/2 and
/// n1/n2 count tied pairs in x and y. Zero-variance columns are undefined.
pub fn kendall_tau(x: &EncodedMatrix, y: &[u8]) -> Result<Vec<FilterScore>> {
    if x.n_rows() != y.len() {
        return Err(EdmError::Selection("row/label mismatch".into()));
    }
    let target: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    let mut out = Vec::with_capacity(x.n_cols());
    for (j, column) in x.columns.iter().enumerate() {
        let values = x.column_values(j);
        match tau_b(&values, &target) {
            Some(tau) => out.push(FilterScore {
                column: column.name.clone(),
                score: Some(tau),
                flag: None,
            }),
            None => out.push(FilterScore {
                column: column.name.clone(),
                score: None,
                flag: Some("tau undefined (a variable has zero variance)".into()),
            }),
        }
    }
    Ok(out)
}

/// Tau-b of two equal-length vectors; `None` when either side has no
/// untied pairs.
pub fn tau_b(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    if n < 2 {
        return None;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    let mut ties_a = 0i64;
    let mut ties_b = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 && db == 0.0 {
                ties_a += 1;
                ties_b += 1;
            } else if da == 0.0 {
                ties_a += 1;
            } else if db == 0.0 {
                ties_b += 1;
            } else if da * db > 0.0 {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom_a = n0 - ties_a;
    let denom_b = n0 - ties_b;
    if denom_a <= 0 || denom_b <= 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((denom_a as f64) * (denom_b as f64)).sqrt())
}

/// Symmetric feature×feature Pearson correlation matrix. Cells touching a
/// zero-variance column are NaN and listed in `flags`; the diagonal is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PearsonMatrix {
    pub columns: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    pub flags: Vec<String>,
}

impl PearsonMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == a)?;
        let j = self.columns.iter().position(|c| c == b)?;
        Some(self.cells[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, c) in self.columns.iter().enumerate() {
            out.push_str(c);
            for v in &self.cells[i] {
                out.push(',');
                if v.is_nan() {
                    // leave undefined cells empty
                } else {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn pearson_matrix(x: &EncodedMatrix) -> Result<PearsonMatrix> {
    let p = x.n_cols();
    if p < 2 {
        return Err(EdmError::Selection(
            "correlation matrix needs at least two columns".into(),
        ));
    }
    let n = x.n_rows() as f64;
    let columns: Vec<Vec<f64>> = (0..p).map(|j| x.column_values(j)).collect();
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let stds: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
        .collect();

    let mut flags = Vec::new();
    for (j, s) in stds.iter().enumerate() {
        if *s <= 1e-12 {
            flags.push(format!("column {} has zero variance", x.columns[j].name));
        }
    }

    let mut cells = vec![vec![f64::NAN; p]; p];
    for i in 0..p {
        cells[i][i] = 1.0;
        for j in (i + 1)..p {
            if stds[i] <= 1e-12 || stds[j] <= 1e-12 {
                continue;
            }
            let cov = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / n;
            let r = (cov / (stds[i] * stds[j])).clamp(-1.0, 1.0);
            cells[i][j] = r;
            cells[j][i] = r;
        }
    }
    Ok(PearsonMatrix {
        columns: x.columns.iter().map(|c| c.name.clone()).collect(),
        cells,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ColumnMeta, EncodingManifest, RowTag, SourceCategory};

    fn matrix_from(rows: Vec<Vec<f64>>) -> EncodedMatrix {
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
            labels: None,
            learner_ids: (0..n).map(|i| format!("r{i}")).collect(),
            row_tags: (0..n).map(RowTag::source).collect(),
            manifest: EncodingManifest::default(),
            standardized: false,
        }
    }

    #[test]
    fn anova_hand_fixture_is_13_5() {
        // group0 = [1,2,3], group1 = [4,5,6]: SSB = 13.5, SSW = 4, df = (1, 4)
        let x = matrix_from(vec![
            vec![1.0],
            vec![2.0],
            vec![3.0],
            vec![4.0],
            vec![5.0],
            vec![6.0],
        ]);
        let scores = anova_f(&x, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((scores[0].score.unwrap() - 13.5).abs() < 1e-12);
    }

    #[test]
    fn anova_identical_group_means_is_zero() {
        let x = matrix_from(vec![vec![1.0], vec![3.0], vec![1.0], vec![3.0]]);
        let scores = anova_f(&x, &[0, 0, 1, 1]).unwrap();
        assert_eq!(scores[0].score, Some(0.0));
    }

    #[test]
    fn anova_tiny_group_is_flagged() {
        let x = matrix_from(vec![vec![1.0], vec![2.0], vec![3.0]]);
        let scores = anova_f(&x, &[0, 0, 1]).unwrap();
        assert_eq!(scores[0].score, None);
        assert!(scores[0].flag.is_some());
    }

    #[test]
    fn kendall_perfect_orders() {
        let asc = [1.0, 2.0, 3.0, 4.0];
        let desc = [4.0, 3.0, 2.0, 1.0];
        assert!((tau_b(&asc, &asc).unwrap() - 1.0).abs() < 1e-12);
        assert!((tau_b(&asc, &desc).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_single_swap_is_two_thirds() {
        // 5 concordant pairs, 1 discordant: tau = 4/6
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 2.0, 4.0];
        assert!((tau_b(&x, &y).unwrap() - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_zero_variance_is_flagged() {
        let x = matrix_from(vec![vec![2.0], vec![2.0], vec![2.0], vec![2.0]]);
        let scores = kendall_tau(&x, &[0, 1, 0, 1]).unwrap();
        assert_eq!(scores[0].score, None);
    }

    #[test]
    fn pearson_diagonal_and_negation() {
        let x = matrix_from(vec![
            vec![1.0, -1.0, 3.0],
            vec![2.0, -2.0, 1.0],
            vec![5.0, -5.0, 4.0],
        ]);
        let m = pearson_matrix(&x).unwrap();
        for i in 0..3 {
            assert_eq!(m.cells[i][i], 1.0);
        }
        assert!((m.get("f0", "f1").unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(m.get("f0", "f2"), m.get("f2", "f0"));
    }

    #[test]
    fn pearson_flags_zero_variance_cells() {
        let x = matrix_from(vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0]]);
        let m = pearson_matrix(&x).unwrap();
        assert!(m.get("f0", "f1").unwrap().is_nan());
        assert_eq!(m.cells[1][1], 1.0);
        assert!(!m.flags.is_empty());
    }
}
