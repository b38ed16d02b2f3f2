//! `theory`: tabulate the extreme recursion next to its bounds.

use std::path::Path;

use csv::{Terminator, WriterBuilder};
use mas_core::theory::{
    closed_form_e, contribution, extremes_sum_bound, majorant_table, recursion_table, total_contribution,
    tvi_bound_b1, tvi_bound_b2, uniform_bound,
};
use mas_core::{MasError, Theory64};

use crate::{fmt_real, CliError};

pub const BOUNDS_HEADER: [&str; 9] = [
    "m",
    "k",
    "E_recursion",
    "E_closed_form",
    "uniform_bound",
    "contribution",
    "partial_sum",
    "B1",
    "B2",
];

/// Relative slack for the inequalities checked before writing.
const SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsRow {
    pub m: usize,
    pub k: usize,
    pub e_recursion: f64,
    pub e_closed_form: f64,
    pub uniform_bound: f64,
    pub contribution: f64,
    /// `sum_{j <= m} E_recursion[j][k]`.
    pub partial_sum: f64,
    pub b1: f64,
    pub b2: f64,
}

impl BoundsRow {
    pub fn fields(&self) -> Vec<String> {
        let mut out = vec![self.m.to_string(), self.k.to_string()];
        out.extend(
            [
                self.e_recursion,
                self.e_closed_form,
                self.uniform_bound,
                self.contribution,
                self.partial_sum,
                self.b1,
                self.b2,
            ]
            .map(fmt_real),
        );
        out
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Check(what()))
    }
}

fn lift(e: MasError) -> CliError {
    match e {
        MasError::Coupling(msg) => CliError::Coupling(msg),
        MasError::Domain(msg) => CliError::Config(msg),
        other => CliError::Solver(other),
    }
}

/// Rows for `1 <= m <= k <= k_max` with every increase at `C M`, after
/// checking the closed form against the majorant recursion and every
/// bound against the literal recursion.
pub fn theory_rows(lambda: f64, c: f64, m_scale: f64, k_max: usize) -> Result<Vec<BoundsRow>, CliError> {
    if k_max == 0 {
        return Err(CliError::Config("kmax must be >= 1".into()));
    }
    let p = Theory64::saturated(lambda, c, m_scale, k_max).map_err(lift)?;
    p.check_coupling().map_err(lift)?;
    let rec = recursion_table(&p, k_max);
    let maj = majorant_table(&p, k_max);
    let b1 = tvi_bound_b1(&p).map_err(lift)?;
    let b2 = tvi_bound_b2(&p).map_err(lift)?;
    let sum_bound = extremes_sum_bound(&p).map_err(lift)?;
    check(b2 <= b1, || format!("B2 = {b2} exceeds B1 = {b1}"))?;

    let mut rows = Vec::with_capacity(k_max * (k_max + 1) / 2);
    for k in 1..=k_max {
        let mut partial = 0.0;
        for m in 1..=k {
            let e = rec.get(m, k);
            let closed = closed_form_e(&p, m, k).map_err(lift)?;
            let bound = uniform_bound(&p, m).map_err(lift)?;
            check((closed - maj.get(m, k)).abs() <= 1e-10 * (1.0 + closed), || {
                format!("closed form {closed} differs from majorant {} at m={m}, k={k}", maj.get(m, k))
            })?;
            check(e <= closed * (1.0 + SLACK), || {
                format!("recursion {e} exceeds closed form {closed} at m={m}, k={k}")
            })?;
            check(e <= bound * (1.0 + SLACK), || {
                format!("recursion {e} exceeds uniform bound {bound} at m={m}, k={k}")
            })?;
            partial += e;
            rows.push(BoundsRow {
                m,
                k,
                e_recursion: e,
                e_closed_form: closed,
                uniform_bound: bound,
                contribution: contribution(&p, m, k).map_err(lift)?,
                partial_sum: partial,
                b1,
                b2,
            });
        }
        check(partial <= sum_bound * (1.0 + SLACK), || {
            format!("sum of extremes {partial} exceeds {sum_bound} at k={k}")
        })?;
        let total = total_contribution(&p, k).map_err(lift)?;
        check(2.0 * total <= b2 * (1.0 + SLACK), || {
            format!("twice the total contribution {total} exceeds B2 = {b2} at k={k}")
        })?;
    }
    Ok(rows)
}

/// Writes `bounds.csv` to `path`; returns the number of rows.
pub fn write_bounds(lambda: f64, c: f64, m_scale: f64, k_max: usize, path: &Path) -> Result<usize, CliError> {
    let rows = theory_rows(lambda, c, m_scale, k_max)?;
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(BOUNDS_HEADER)?;
    for row in &rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_table() {
        let rows = theory_rows(0.1, 1.0, 1.0, 1).unwrap();
        assert_eq!(rows.len(), 1);
        // a_1 = C M = 1
        assert!((rows[0].e_recursion - 0.1).abs() < 1e-17);
        assert_eq!(rows[0].e_recursion, rows[0].e_closed_form);
    }

    #[test]
    fn uniform_bound_dominates_every_row() {
        let rows = theory_rows(0.1, 1.0, 1.0, 20).unwrap();
        assert_eq!(rows.len(), 210);
        assert!(rows.iter().all(|r| r.e_recursion <= r.uniform_bound));
        assert!((rows[0].b1 - 2.0 * 0.7 / 0.6).abs() < 1e-14);
    }

    #[test]
    fn coupling_is_gated() {
        assert!(matches!(theory_rows(0.3, 1.0, 1.0, 5), Err(CliError::Coupling(_))));
        assert_eq!(theory_rows(0.3, 1.0, 1.0, 5).unwrap_err().exit_code(), 2);
        assert!(matches!(theory_rows(0.1, 1.0, 1.0, 0), Err(CliError::Config(_))));
    }
}
