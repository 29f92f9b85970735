//! Benchmark scenarios and the embedded reference table.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensitySpec, Interval};
use crate::efficiency::{functional_domain, sampling_efficiency_on, EfficiencyReport};
use crate::error::{Error, Result};
use crate::proposals::{
    bounded_proposal, geometric_mean_proposal, kde_proposal, optimal_proposal, KdeSettings, Proposal, Scheme,
};

/// Relative tolerance on `A*` used when building the optimal proposal.
pub const OPTIMAL_TOL: f64 = 1e-7;

/// A, B tolerance: ±0.01 plus the half-width of two-decimal rounding.
pub const AB_TOLERANCE: f64 = 0.015;
pub const OMEGA_TOLERANCE: f64 = 0.05;

const REFERENCE_CSV: &str = include_str!("../data/table1_reference.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Case {
    I,
    II,
    III,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::I, Case::II, Case::III];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "I" | "1" => Some(Self::I),
            "II" | "2" => Some(Self::II),
            "III" | "3" => Some(Self::III),
            _ => None,
        }
    }

    /// Parses `I`, `II`, `III` or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Self>> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        Self::parse(s)
            .map(|c| vec![c])
            .ok_or_else(|| Error::usage(format!("unknown case {s:?}; expected I, II, III or all")))
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::I => "I",
            Self::II => "II",
            Self::III => "III",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub case: Case,
    pub name: String,
    pub posterior: DensitySpec,
    pub prior: DensitySpec,
    pub functional_domain: Interval,
    /// KDE settings that reproduce the reference KDE row for this case.
    pub kde: KdeSettings,
}

impl ScenarioSpec {
    pub fn new(case: Case) -> Result<Self> {
        let (name, posterior, prior, kde) = match case {
            Case::I => (
                "gaussian",
                DensitySpec::gaussian(0.0, 1.0)?,
                DensitySpec::gaussian(0.0, 5.0)?,
                KdeSettings::default(),
            ),
            Case::II => (
                "bimodal",
                DensitySpec::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)])?,
                DensitySpec::gaussian(0.0, 10.0)?,
                KdeSettings {
                    variance_factor: 1.0,
                    truncate_to: None,
                },
            ),
            Case::III => (
                "chi2",
                DensitySpec::chi_squared(3)?,
                DensitySpec::uniform(0.0, 30.0)?,
                KdeSettings {
                    variance_factor: 1.0,
                    truncate_to: Some(Interval::new(0.0, 30.0)?),
                },
            ),
        };
        let functional_domain = functional_domain(&posterior, &prior)?;
        Ok(Self {
            case,
            name: name.into(),
            posterior,
            prior,
            functional_domain,
            kde,
        })
    }

    pub fn proposal(&self, scheme: Scheme) -> Result<Proposal> {
        match scheme {
            Scheme::Prior => Ok(Proposal::prior(&self.prior)),
            Scheme::Posterior => Ok(Proposal::posterior(&self.posterior)),
            Scheme::BeaumontKde => kde_proposal(&self.posterior, self.kde),
            Scheme::GeometricMean => geometric_mean_proposal(&self.posterior, &self.prior),
            Scheme::Bounded => bounded_proposal(&self.posterior, &self.prior, None),
            Scheme::Optimal => optimal_proposal(&self.posterior, &self.prior, OPTIMAL_TOL),
            Scheme::Series => Err(Error::usage("series proposals need an order and A*")),
        }
    }

    pub fn efficiency(&self, q: &DensitySpec) -> Result<EfficiencyReport> {
        sampling_efficiency_on(q, &self.posterior, &self.prior, self.functional_domain)
    }
}

/// Schemes of the comparison table, in row order.
pub const TABLE_SCHEMES: [Scheme; 5] = [
    Scheme::Posterior,
    Scheme::BeaumontKde,
    Scheme::GeometricMean,
    Scheme::Bounded,
    Scheme::Optimal,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceCell {
    pub case: Case,
    pub scheme: Scheme,
    pub a: f64,
    pub b: f64,
    pub omega: f64,
}

pub fn reference_table() -> Vec<ReferenceCell> {
    REFERENCE_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| f[i].parse::<f64>().expect("embedded reference table is well formed");
            ReferenceCell {
                case: Case::parse(f[0]).expect("embedded case"),
                scheme: Scheme::parse(f[1]).expect("embedded scheme"),
                a: num(2),
                b: num(3),
                omega: num(4),
            }
        })
        .collect()
}

pub fn reference_cell(case: Case, scheme: Scheme) -> Option<ReferenceCell> {
    reference_table().into_iter().find(|c| c.case == case && c.scheme == scheme)
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub case: Case,
    pub scheme: Scheme,
    pub report: EfficiencyReport,
}

impl TableRow {
    /// Per-column deviations from the reference value, `None` when no reference exists.
    pub fn compare(&self) -> Option<CellComparison> {
        let r = reference_cell(self.case, self.scheme)?;
        Some(CellComparison {
            reference: r,
            d_a: self.report.a - r.a,
            d_b: self.report.b - r.b,
            d_omega: self.report.omega - r.omega,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellComparison {
    pub reference: ReferenceCell,
    pub d_a: f64,
    pub d_b: f64,
    pub d_omega: f64,
}

impl CellComparison {
    pub fn a_ok(&self) -> bool {
        self.d_a.abs() <= AB_TOLERANCE
    }
    pub fn b_ok(&self) -> bool {
        self.d_b.abs() <= AB_TOLERANCE
    }
    pub fn omega_ok(&self) -> bool {
        self.d_omega.abs() <= OMEGA_TOLERANCE
    }
    pub fn ok(&self) -> bool {
        self.a_ok() && self.b_ok() && self.omega_ok()
    }
}

/// Computes every (case, scheme) cell. Cells run in parallel; output order
/// follows `cases × TABLE_SCHEMES`.
pub fn compute_table(cases: &[Case]) -> Result<Vec<TableRow>> {
    let scenarios = cases.iter().map(|&c| ScenarioSpec::new(c)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(&ScenarioSpec, Scheme)> = scenarios
        .iter()
        .flat_map(|s| TABLE_SCHEMES.iter().map(move |&k| (s, k)))
        .collect();
    cells
        .par_iter()
        .map(|(s, scheme)| {
            let row = s.proposal(*scheme).and_then(|q| s.efficiency(&q.density));
            row.map(|report| TableRow {
                case: s.case,
                scheme: *scheme,
                report,
            })
            .map_err(|e| cell_error(s.case, *scheme, e))
        })
        .collect()
}

fn cell_error(case: Case, scheme: Scheme, e: Error) -> Error {
    match e {
        Error::Usage(m) => Error::Usage(format!("case {case} / {}: {m}", scheme.name())),
        other => Error::Divergent(format!("case {case} / {}: {other}", scheme.name())),
    }
}

pub const TABLE_CSV_HEADER: &str = "case,scheme,A,B,omega,est_error";

pub fn write_table_csv<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TABLE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.case,
            r.scheme.name(),
            r.report.a,
            r.report.b,
            r.report.omega,
            r.report.est_error
        )?;
    }
    Ok(())
}

/// Side-by-side text diff against the reference; cells outside tolerance are marked `!`.
pub fn write_table_diff<W: Write>(rows: &[TableRow], mut out: W) -> std::io::Result<bool> {
    let mut all_ok = true;
    writeln!(
        out,
        "{:<4} {:<15} {:>8} {:>6} {:>8} {:>6} {:>8} {:>7}",
        "case", "scheme", "A", "ref", "B", "ref", "omega", "ref"
    )?;
    for r in rows {
        let (ra, rb, ro, flags) = match r.compare() {
            Some(c) => {
                all_ok &= c.ok();
                let m = |ok: bool| if ok { ' ' } else { '!' };
                (c.reference.a, c.reference.b, c.reference.omega, [m(c.a_ok()), m(c.b_ok()), m(c.omega_ok())])
            }
            None => (f64::NAN, f64::NAN, f64::NAN, [' '; 3]),
        };
        writeln!(
            out,
            "{:<4} {:<15} {:>8.4}{} {:>5.2} {:>8.4}{} {:>5.2} {:>8.4}{} {:>6.2}",
            r.case.to_string(),
            r.scheme.name(),
            r.report.a,
            flags[0],
            ra,
            r.report.b,
            flags[1],
            rb,
            r.report.omega,
            flags[2],
            ro
        )?;
    }
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_table_is_complete() {
        let t = reference_table();
        assert_eq!(t.len(), 15);
        for case in Case::ALL {
            for scheme in TABLE_SCHEMES {
                assert!(reference_cell(case, scheme).is_some());
            }
        }
        let c = reference_cell(Case::II, Scheme::Optimal).unwrap();
        assert_eq!((c.a, c.b, c.omega), (3.52, 0.35, 9.94));
    }

    #[test]
    fn scenario_domains() {
        let s = ScenarioSpec::new(Case::III).unwrap();
        assert_eq!(s.functional_domain, Interval::new(0.0, 30.0).unwrap());
        for case in [Case::I, Case::II] {
            let s = ScenarioSpec::new(case).unwrap();
            let d = s.functional_domain;
            let inside = s.posterior.restrict_to(d).is_ok();
            assert!(inside);
            assert!(s.prior.ln_pdf(d.lo).is_finite() && s.prior.ln_pdf(d.hi).is_finite());
        }
    }

    #[test]
    fn case_selection_parsing() {
        assert_eq!(Case::parse_selection("all").unwrap().len(), 3);
        assert_eq!(Case::parse_selection("II").unwrap(), vec![Case::II]);
        assert!(matches!(Case::parse_selection("IV"), Err(Error::Usage(_))));
    }

    #[test]
    fn case_one_column_matches_reference() {
        let rows = compute_table(&[Case::I]).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows {
            assert!(r.compare().unwrap().ok(), "{r:?}");
        }
        let mut csv = Vec::new();
        write_table_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("case,scheme,A,B,omega,est_error\nI,posterior,"));
    }
}
