//! Overlap statistics between virtual and real interactions, the
//! random-placement baseline `O_avg`, and the weights derived from them.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::InteractionMatrix;
use crate::rng;

/// Denominator used for the real-overlap rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapDenominator {
    /// `|R^m ∩ R+| / |R+|`.
    #[default]
    Real,
    /// `|R^m ∩ R+| / |R^m|`.
    Virtual,
}

impl FromStr for OverlapDenominator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(OverlapDenominator::Real),
            "virtual" => Ok(OverlapDenominator::Virtual),
            _ => Err(invalid!("unknown overlap denominator {s:?}, expected real or virtual")),
        }
    }
}

impl fmt::Display for OverlapDenominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OverlapDenominator::Real => "real",
            OverlapDenominator::Virtual => "virtual",
        })
    }
}

/// `|virtual ∩ real| / |real|`.
pub fn overlap_real(virtual_matrix: &InteractionMatrix, real: &InteractionMatrix) -> Result<f64> {
    overlap_real_with(virtual_matrix, real, OverlapDenominator::Real)
}

pub fn overlap_real_with(
    virtual_matrix: &InteractionMatrix,
    real: &InteractionMatrix,
    denominator: OverlapDenominator,
) -> Result<f64> {
    if virtual_matrix.shape() != real.shape() {
        return Err(Error::ShapeMismatch(format!(
            "virtual matrix {:?} vs real matrix {:?}",
            virtual_matrix.shape(),
            real.shape()
        )));
    }
    let denom = match denominator {
        OverlapDenominator::Real => real.nnz(),
        OverlapDenominator::Virtual => virtual_matrix.nnz(),
    };
    if denom == 0 {
        return Err(invalid!("overlap rate undefined: denominator matrix is empty"));
    }
    Ok(virtual_matrix.intersection_count(real) as f64 / denom as f64)
}

/// `k·|real| / |virtual|`: how many times larger the virtual matrix would be
/// if no two proposals coincided.
pub fn overlap_self(virtual_matrix: &InteractionMatrix, real: &InteractionMatrix, k: usize) -> Result<f64> {
    if virtual_matrix.nnz() == 0 {
        return Err(invalid!("self-overlap undefined: virtual matrix is empty"));
    }
    Ok((k * real.nnz()) as f64 / virtual_matrix.nnz() as f64)
}

/// `k·|R+| / (|U|·|I|)`, capped at 1.
pub fn o_avg_analytic(user_count: usize, item_count: usize, real_count: usize, k: usize) -> f64 {
    let cells = user_count as f64 * item_count as f64;
    ((k as f64 * real_count as f64) / cells).min(1.0)
}

/// Probability that a fixed cell is hit at least once by `k·|R+|` uniform
/// placements with replacement: `1 - (1 - 1/(|U||I|))^(k|R+|)`.
pub fn o_avg_exact(user_count: usize, item_count: usize, real_count: usize, k: usize) -> f64 {
    let cells = user_count as f64 * item_count as f64;
    let placements = k as f64 * real_count as f64;
    -(placements * (-1.0 / cells).ln_1p()).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Standard error of the mean across trials.
    pub std_error: f64,
    pub trials: usize,
}

impl MonteCarloEstimate {
    /// Width of the normal-approximation 95% confidence interval.
    pub fn ci95_width(&self) -> f64 {
        2.0 * 1.96 * self.std_error
    }
}

/// Simulates `O_avg`: each trial places `k·|R+|` cells uniformly at random
/// (with replacement) and records the fraction of real interactions hit.
/// Trial `t` uses random stream `(seed, t)`.
pub fn o_avg_montecarlo(
    user_count: usize,
    item_count: usize,
    real: &InteractionMatrix,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if trials == 0 {
        return Err(invalid!("need at least one trial"));
    }
    real.ensure_shape(user_count, item_count, "real matrix")?;
    let real_count = real.nnz();
    if real_count == 0 {
        return Err(invalid!("real matrix is empty"));
    }
    let cells = user_count as u64 * item_count as u64;
    let real_cells: Vec<u64> = real
        .pairs()
        .map(|(u, i)| u as u64 * item_count as u64 + i as u64)
        .collect();
    // Dense cell -> real-entry lookup when it fits comfortably.
    let dense: Option<Vec<u32>> = (cells <= 1 << 24).then(|| {
        let mut map = vec![u32::MAX; cells as usize];
        for (idx, &c) in real_cells.iter().enumerate() {
            map[c as usize] = idx as u32;
        }
        map
    });
    let placements = k * real_count;

    let fractions: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let mut covered = vec![false; real_count];
            let mut hits = 0usize;
            for _ in 0..placements {
                let c = r.random_range(0..cells);
                let idx = match &dense {
                    Some(map) => map[c as usize],
                    None => real_cells.binary_search(&c).map_or(u32::MAX, |p| p as u32),
                };
                if idx != u32::MAX && !covered[idx as usize] {
                    covered[idx as usize] = true;
                    hits += 1;
                }
            }
            hits as f64 / real_count as f64
        })
        .collect();

    let n = trials as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let var = if trials > 1 {
        fractions.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / n).sqrt(),
        trials,
    })
}

/// Overlap statistics for one virtual matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceOverlap {
    pub name: String,
    pub o_real: f64,
    pub o_self: f64,
    pub weight: f64,
    pub virtual_count: usize,
}

/// Everything the investigation table reports for one `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub k: usize,
    pub real_count: usize,
    pub modalities: Vec<SourceOverlap>,
    pub synergistic: SourceOverlap,
    pub o_avg: f64,
}

impl OverlapReport {
    pub fn weight(&self, modality: &str) -> Option<f64> {
        self.modalities.iter().find(|m| m.name == modality).map(|m| m.weight)
    }

    /// `(name, weight)` pairs in modality order.
    pub fn modality_weights(&self) -> Vec<(String, f64)> {
        self.modalities.iter().map(|m| (m.name.clone(), m.weight)).collect()
    }
}

/// Raw overlap rates before weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapInputs {
    pub k: usize,
    pub real_count: usize,
    /// `(name, O_real, O_self, |R^m|)` per modality.
    pub modalities: Vec<(String, f64, f64, usize)>,
    /// `(O_real, O_self, |R^s|)` for the synergistic matrix.
    pub synergistic: (f64, f64, usize),
    pub o_avg: f64,
}

/// Fills in `w = O_real / O_avg` for each modality and the synergistic matrix.
pub fn modality_weights(inputs: OverlapInputs) -> Result<OverlapReport> {
    if inputs.o_avg.is_nan() || inputs.o_avg <= 0.0 {
        return Err(invalid!("O_avg must be positive, got {}", inputs.o_avg));
    }
    let o_avg = inputs.o_avg;
    let modalities = inputs
        .modalities
        .into_iter()
        .map(|(name, o_real, o_self, virtual_count)| SourceOverlap {
            name,
            o_real,
            o_self,
            weight: o_real / o_avg,
            virtual_count,
        })
        .collect();
    let (o_real, o_self, virtual_count) = inputs.synergistic;
    Ok(OverlapReport {
        k: inputs.k,
        real_count: inputs.real_count,
        modalities,
        synergistic: SourceOverlap {
            name: "synergistic".into(),
            o_real,
            o_self,
            weight: o_real / o_avg,
            virtual_count,
        },
        o_avg,
    })
}

/// Computes the full report from real and virtual matrices.
pub fn overlap_report(
    real: &InteractionMatrix,
    modality_virtuals: &[(String, &InteractionMatrix)],
    synergistic: &InteractionMatrix,
    k: usize,
    denominator: OverlapDenominator,
) -> Result<OverlapReport> {
    let source = |v: &InteractionMatrix| -> Result<(f64, f64, usize)> {
        Ok((
            overlap_real_with(v, real, denominator)?,
            overlap_self(v, real, k)?,
            v.nnz(),
        ))
    };
    let mut modalities = Vec::with_capacity(modality_virtuals.len());
    for (name, v) in modality_virtuals {
        let (o_real, o_self, n) = source(v)?;
        modalities.push((name.clone(), o_real, o_self, n));
    }
    modality_weights(OverlapInputs {
        k,
        real_count: real.nnz(),
        modalities,
        synergistic: source(synergistic)?,
        o_avg: o_avg_analytic(real.user_count(), real.item_count(), real.nnz(), k),
    })
}

/// Investigation table: one row per `k`, rates as percentages.
pub fn render_investigation_table(reports: &[OverlapReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let names: Vec<&str> = first.modalities.iter().map(|m| m.name.as_str()).collect();
    let mut header = vec!["k".to_string()];
    header.extend(names.iter().map(|n| format!("O_real[{n}]")));
    header.push("O_real[syn]".into());
    header.extend(names.iter().map(|n| format!("O_self[{n}]")));
    header.push("O_self[syn]".into());
    header.push("O_avg".into());
    header.extend(names.iter().map(|n| format!("w[{n}]")));
    header.push("w[syn]".into());

    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let pct = |x: f64| format!("{:.2}%", 100.0 * x);
            let mut row = vec![r.k.to_string()];
            row.extend(r.modalities.iter().map(|m| pct(m.o_real)));
            row.push(pct(r.synergistic.o_real));
            row.extend(r.modalities.iter().map(|m| pct(m.o_self)));
            row.push(pct(r.synergistic.o_self));
            row.push(format!("{:.4}%", 100.0 * r.o_avg));
            row.extend(r.modalities.iter().map(|m| format!("{:.4}", m.weight)));
            row.push(format!("{:.4}", r.synergistic.weight));
            row
        })
        .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", padded.join("  ")).unwrap();
    };
    line(&header);
    for r in &rows {
        line(r);
    }
    out
}
