//! Prescribed strain paths.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::LoadError;
use crate::voigt::VoigtVector;

/// Relative slack on the domain end, so `n·dt` rounding never trips the check.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadCase {
    /// `ε(t) = rate·t·direction`.
    Proportional { direction: [f64; 6], rate: f64 },
    /// `ε(t) = amplitude·sin(2π·frequency·t)·direction`.
    Harmonic { direction: [f64; 6], amplitude: f64, frequency: f64 },
    /// Piecewise-linear triangle wave starting at zero.
    ///
    /// One-sided: `0 → A → 0` over one period. Two-sided: `0 → A → −A → 0`.
    /// The wave repeats with the given period.
    TriangularCycle { direction: [f64; 6], amplitude: f64, period: f64, two_sided: bool },
    /// Linear interpolation between breakpoints.
    Table { times: Vec<f64>, strains: Vec<[f64; 6]> },
}

impl LoadCase {
    pub fn validate(&self) -> Result<(), LoadError> {
        match self {
            LoadCase::Table { times, strains } => {
                if times.is_empty() || times.len() != strains.len() {
                    return Err(LoadError::InvalidTable(format!(
                        "{} times but {} strain rows",
                        times.len(),
                        strains.len()
                    )));
                }
                if let Some(w) = times.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(LoadError::InvalidTable(format!("times not strictly increasing at row {}", w + 1)));
                }
                if times.iter().chain(strains.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(LoadError::InvalidTable("non-finite entry".into()));
                }
                Ok(())
            }
            LoadCase::TriangularCycle { period, .. } if !(*period > 0.0) => {
                Err(LoadError::InvalidTable(format!("triangular period must be positive, got {period}")))
            }
            _ => Ok(()),
        }
    }

    /// Strain at time `t`, for `t ∈ [0, t_end]`.
    pub fn strain_at(&self, t: f64, t_end: f64) -> Result<VoigtVector, LoadError> {
        let (start, end) = match self {
            LoadCase::Table { times, .. } => (times[0].min(0.0), t_end.min(*times.last().unwrap_or(&0.0))),
            _ => (0.0, t_end),
        };
        let slack = DOMAIN_SLACK * end.abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(LoadError::OutOfDomain { t, start, end });
        }
        let t = t.clamp(start, end);
        Ok(match self {
            LoadCase::Proportional { direction, rate } => VoigtVector::from(*direction) * (rate * t),
            LoadCase::Harmonic { direction, amplitude, frequency } => {
                VoigtVector::from(*direction) * (amplitude * (2.0 * PI * frequency * t).sin())
            }
            LoadCase::TriangularCycle { direction, amplitude, period, two_sided } => {
                VoigtVector::from(*direction) * (amplitude * triangle(t / period, *two_sided))
            }
            LoadCase::Table { times, strains } => interpolate(times, strains, t),
        })
    }

    /// Reads a table load from CSV: a time column followed by 1 to 6 strain
    /// components in Voigt order. Missing components are zero. Lines starting
    /// with `#` are ignored; a non-numeric first row is treated as a header.
    pub fn table_from_csv<R: Read>(r: R) -> Result<Self, LoadError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(r);
        let mut times = Vec::new();
        let mut strains = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| LoadError::InvalidTable(e.to_string()))?;
            if !(2..=7).contains(&rec.len()) {
                return Err(LoadError::InvalidTable(format!(
                    "row {}: expected 2 to 7 columns, got {}",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            let vals = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => return Err(LoadError::InvalidTable(format!("row {}: {e}", row + 1))),
            };
            let mut eps = [0.0; 6];
            eps[..vals.len() - 1].copy_from_slice(&vals[1..]);
            times.push(vals[0]);
            strains.push(eps);
        }
        let load = LoadCase::Table { times, strains };
        load.validate()?;
        Ok(load)
    }
}

/// Unit triangle wave of phase `x` (in periods).
fn triangle(x: f64, two_sided: bool) -> f64 {
    let f = x - x.floor();
    if two_sided {
        if f <= 0.25 {
            4.0 * f
        } else if f <= 0.75 {
            2.0 - 4.0 * f
        } else {
            4.0 * f - 4.0
        }
    } else if f <= 0.5 {
        2.0 * f
    } else {
        2.0 - 2.0 * f
    }
}

fn interpolate(times: &[f64], strains: &[[f64; 6]], t: f64) -> VoigtVector {
    let k = times.partition_point(|&x| x <= t);
    if k == 0 {
        return VoigtVector::from(strains[0]);
    }
    if k == times.len() {
        return VoigtVector::from(strains[k - 1]);
    }
    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    VoigtVector::from(strains[k - 1]) * (1.0 - w) + VoigtVector::from(strains[k]) * w
}
