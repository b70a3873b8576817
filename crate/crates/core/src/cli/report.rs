//! Confusion matrix, per-class rates and their table / CSV renderings.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub labels: Vec<String>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    pub per_class_rate: Vec<f64>,
    pub overall_rate: f64,
    pub n_samples: u64,
}

impl EvalReport {
    /// Builds the report from `(true, predicted)` class-index pairs.
    pub fn from_pairs(labels: Vec<String>, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let k = labels.len();
        let mut confusion = vec![vec![0u64; k]; k];
        for (t, p) in pairs {
            if t >= k || p >= k {
                return Err(Error::InvalidArgument(format!("class index ({t}, {p}) out of range for {k} classes")));
            }
            confusion[t][p] += 1;
        }
        Ok(Self::from_confusion(labels, confusion))
    }

    pub fn from_confusion(labels: Vec<String>, confusion: Vec<Vec<u64>>) -> Self {
        let n_samples: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..confusion.len()).map(|i| confusion[i][i]).sum();
        let per_class_rate = confusion
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    0.0
                } else {
                    row[i] as f64 / total as f64
                }
            })
            .collect();
        let overall_rate = if n_samples == 0 {
            0.0
        } else {
            trace as f64 / n_samples as f64
        };
        Self {
            labels,
            confusion,
            per_class_rate,
            overall_rate,
            n_samples,
        }
    }

    pub fn class_count(&self, i: usize) -> u64 {
        self.confusion[i].iter().sum()
    }

    /// Classes present in the data, best rate first; ties keep label order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.labels.len()).filter(|&i| self.class_count(i) > 0).collect();
        order.sort_by(|&a, &b| self.per_class_rate[b].total_cmp(&self.per_class_rate[a]).then(a.cmp(&b)));
        order
    }

    pub fn table(&self) -> String {
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        writeln!(out, "{:>4}  {:<width$}  {:>8}  {:>7}", "No", "Class", "Rate", "Samples").unwrap();
        for (rank, i) in self.ranking().into_iter().enumerate() {
            writeln!(
                out,
                "{:>4}  {:<width$}  {:>7.2}%  {:>7}",
                rank + 1,
                self.labels[i],
                100.0 * self.per_class_rate[i],
                self.class_count(i)
            )
            .unwrap();
        }
        writeln!(
            out,
            "overall: {:.2}% ({} samples)",
            100.0 * self.overall_rate,
            self.n_samples
        )
        .unwrap();
        out
    }

    /// Header row of labels, then one row of counts per true class.
    pub fn confusion_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(&self.labels).map_err(fail)?;
        for row in &self.confusion {
            w.write_record(row.iter().map(u64::to_string)).map_err(fail)?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }
}
