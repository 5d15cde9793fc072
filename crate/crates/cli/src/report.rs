//! Pass/fail matrix over several records.

use crate::record::ExperimentRecord;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub value: Option<f64>,
    /// `None` for reported values that carry no check.
    pub passed: Option<bool>,
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    /// Column labels, one per record.
    pub columns: Vec<String>,
    /// `(experiment, name)` rows, cells aligned with the columns.
    pub rows: BTreeMap<(String, String), Vec<Option<Cell>>>,
    /// Relative change between the coarsest and finest resolution, per row.
    pub drift: BTreeMap<(String, String), f64>,
    pub errors: Vec<String>,
}

fn label(r: &ExperimentRecord) -> String {
    let res: Vec<String> = r.resolution.iter().map(|n| n.to_string()).collect();
    format!("{}@N={}", r.experiment, res.join("x"))
}

pub fn build(records: &[ExperimentRecord]) -> Report {
    let mut rep = Report { columns: records.iter().map(label).collect(), ..Default::default() };
    let n = records.len();
    for (j, r) in records.iter().enumerate() {
        for c in &r.checks {
            let row = rep.rows.entry((r.experiment.clone(), c.name.clone())).or_insert_with(|| vec![None; n]);
            row[j] = Some(Cell { value: c.value, passed: Some(c.passed) });
        }
        for (k, v) in &r.values {
            let row = rep.rows.entry((r.experiment.clone(), k.clone())).or_insert_with(|| vec![None; n]);
            row[j] = Some(Cell { value: Some(*v), passed: None });
        }
        for e in &r.errors {
            rep.errors.push(format!("{}: {e}", label(r)));
        }
    }
    for (key, cells) in &rep.rows {
        // coarsest and finest record of this experiment that has the row
        let present: Vec<(usize, f64)> = cells
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.as_ref().and_then(|c| c.value).map(|v| (j, v)))
            .collect();
        let sizes: BTreeSet<usize> = present.iter().map(|&(j, _)| records[j].resolution.iter().product()).collect();
        if sizes.len() < 2 {
            continue;
        }
        let size = |j: usize| records[j].resolution.iter().product::<usize>();
        let lo = present.iter().min_by_key(|&&(j, _)| size(j)).expect("nonempty").1;
        let hi = present.iter().max_by_key(|&&(j, _)| size(j)).expect("nonempty").1;
        let d = if lo == 0.0 { (hi - lo).abs() } else { (hi - lo).abs() / lo.abs() };
        rep.drift.insert(key.clone(), d);
    }
    rep
}

impl Report {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
            || self.rows.values().flatten().flatten().any(|c| c.passed == Some(false))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.rows.is_empty() && self.errors.is_empty() {
            return out;
        }
        let _ = write!(out, "{:<18} {:<44}", "experiment", "check");
        for c in &self.columns {
            let _ = write!(out, " {c:>26}");
        }
        let _ = writeln!(out, " {:>10}", "drift");
        for ((exp, name), cells) in &self.rows {
            let _ = write!(out, "{exp:<18} {name:<44}");
            for c in cells {
                let text = match c {
                    None => "-".to_string(),
                    Some(c) => {
                        let v = c.value.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
                        match c.passed {
                            Some(true) => format!("PASS {v}"),
                            Some(false) => format!("FAIL {v}"),
                            None => v,
                        }
                    }
                };
                let _ = write!(out, " {text:>26}");
            }
            let drift = self.drift.get(&(exp.clone(), name.clone())).map_or("-".to_string(), |d| format!("{d:.2e}"));
            let _ = writeln!(out, " {drift:>10}");
        }
        for e in &self.errors {
            let _ = writeln!(out, "ERROR {e}");
        }
        out
    }
}
