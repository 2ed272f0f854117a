//! Two-sample comparison of edge statistics: per-coordinate KS distances and
//! Monte Carlo gaps `|E F(A) - E F(B)|` for bounded Lipschitz `F`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::samples::EdgeSampleSet;
use crate::error::{Error, Result};

/// Bounded test functions with bounded gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestFunction {
    Tanh { coord: usize },
    /// `prod_j tanh(s_j)` over all coordinates.
    ProductTanh,
    /// C^1 step from 1 (at `s <= x - width`) to 0 (at `s >= x + width`).
    SmoothIndicator { coord: usize, x: f64, width: f64 },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            TestFunction::Tanh { coord } => format!("tanh[{coord}]"),
            TestFunction::ProductTanh => "prod_tanh".into(),
            TestFunction::SmoothIndicator { coord, x, .. } => format!("indicator[{coord}]({x})"),
        }
    }

    fn max_coord(&self) -> Option<usize> {
        match self {
            TestFunction::Tanh { coord } | TestFunction::SmoothIndicator { coord, .. } => Some(*coord),
            TestFunction::ProductTanh => None,
        }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        match self {
            TestFunction::Tanh { coord } => s[*coord].tanh(),
            TestFunction::ProductTanh => s.iter().map(|x| x.tanh()).product(),
            TestFunction::SmoothIndicator { coord, x, width } => {
                let u = ((s[*coord] - (x - width)) / (2.0 * width)).clamp(0.0, 1.0);
                1.0 - u * u * (3.0 - 2.0 * u)
            }
        }
    }
}

/// Coordinatewise `tanh`, the product of `tanh`, and smoothed indicators of
/// `(-inf, x]` for the first statistic at `x = -2, -1, 0, 1`.
pub fn default_test_functions(width: usize) -> Vec<TestFunction> {
    let mut fs: Vec<TestFunction> = (0..width).map(|coord| TestFunction::Tanh { coord }).collect();
    fs.push(TestFunction::ProductTanh);
    for x in [-2.0, -1.0, 0.0, 1.0] {
        fs.push(TestFunction::SmoothIndicator { coord: 0, x, width: 0.5 });
    }
    fs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// `E F(A) - E F(B)`.
    pub difference: f64,
    pub gap: f64,
    /// `sqrt(var_A / M_A + var_B / M_B)`.
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareTolerances {
    pub ks: f64,
    pub gap: f64,
    pub se: f64,
}

impl Default for CompareTolerances {
    fn default() -> Self {
        Self { ks: 0.05, gap: 0.05, se: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub ks: Vec<f64>,
    pub fgaps: BTreeMap<String, GapEstimate>,
    pub tolerances: CompareTolerances,
    pub trials_a: usize,
    pub trials_b: usize,
    pub pass: bool,
}

/// Two-sample Kolmogorov-Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn mean_var(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    let m = v.len();
    let mean = v.iter().sum::<f64>() / m as f64;
    let var = if m > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64 } else { 0.0 };
    (mean, var, m)
}

pub fn two_sample_compare(a: &EdgeSampleSet, b: &EdgeSampleSet, fs: &[TestFunction], tol: &CompareTolerances) -> Result<ComparisonReport> {
    let width = a.width();
    if width != b.width() {
        return Err(Error::ShapeMismatch(format!("sample widths {} and {} differ", width, b.width())));
    }
    if a.trials() < 2 || b.trials() < 2 {
        return Err(Error::ShapeMismatch("each sample needs at least two trials".into()));
    }
    if let Some(f) = fs.iter().find(|f| f.max_coord().is_some_and(|c| c >= width)) {
        return Err(Error::ShapeMismatch(format!("{} reads beyond {width} statistics", f.name())));
    }
    let ks: Vec<f64> = (0..width).map(|j| ks_distance(&a.coordinate(j), &b.coordinate(j))).collect();
    let mut fgaps = BTreeMap::new();
    for f in fs {
        let (ma, va, na) = mean_var(a.samples.iter().map(|r| f.eval(r)));
        let (mb, vb, nb) = mean_var(b.samples.iter().map(|r| f.eval(r)));
        let difference = ma - mb;
        fgaps.insert(f.name(), GapEstimate { difference, gap: difference.abs(), se: (va / na as f64 + vb / nb as f64).sqrt() });
    }
    let pass = ks.iter().all(|&d| d <= tol.ks) && fgaps.values().all(|g| g.gap <= tol.gap && g.se <= tol.se);
    Ok(ComparisonReport { ks, fgaps, tolerances: *tol, trials_a: a.trials(), trials_b: b.trials(), pass })
}
