//! Rescaled edge observables and their sample sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_conv::FreeConvolutionProfile;

/// `gamma_0 N^{2/3} (lambda_{i_0 + j} - E_-)` for `j = 0..=k`, with `i_0`
/// 1-based and `N` the spectrum length.
pub fn rescaled_edge_statistics(spectrum: &[f64], profile: &FreeConvolutionProfile, i0: usize, k: usize) -> Result<Vec<f64>> {
    rescale(spectrum, profile.gamma0, profile.e_minus, i0, k)
}

pub(crate) fn rescale(spectrum: &[f64], gamma0: f64, e_minus: f64, i0: usize, k: usize) -> Result<Vec<f64>> {
    let n = spectrum.len();
    if i0 == 0 || i0 + k > n {
        return Err(Error::IndexOverflow(format!("i_0 + k = {} exceeds N = {n}", i0 + k)));
    }
    let scale = gamma0 * (n as f64).powf(2.0 / 3.0);
    Ok((0..=k).map(|j| scale * (spectrum[i0 - 1 + j] - e_minus)).collect())
}

/// Provenance of a sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: usize,
    pub t: f64,
    pub v_fingerprint: String,
    pub gamma0: f64,
    pub e_minus: f64,
    pub i0: usize,
    pub master_seed: u64,
}

/// `M` trials of `k + 1` rescaled statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSampleSet {
    pub samples: Vec<Vec<f64>>,
    pub meta: SampleMeta,
}

impl EdgeSampleSet {
    /// Validates a common row length and non-decreasing rows.
    pub fn new(samples: Vec<Vec<f64>>, meta: SampleMeta) -> Result<Self> {
        let width = samples.first().map_or(0, Vec::len);
        for (m, row) in samples.iter().enumerate() {
            if row.len() != width || width == 0 {
                return Err(Error::ShapeMismatch(format!("trial {m} has {} statistics, expected {width}", row.len())));
            }
            if row.iter().any(|x| !x.is_finite()) || row.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::ShapeMismatch(format!("trial {m} is not a finite non-decreasing row")));
            }
        }
        Ok(Self { samples, meta })
    }

    pub fn trials(&self) -> usize {
        self.samples.len()
    }

    /// Number of statistics per trial, `k + 1`.
    pub fn width(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|r| r[j]).collect()
    }

    /// CSV with header `trial,j,value`, values in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,j,value\n");
        for (m, row) in self.samples.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                s.push_str(&format!("{m},{j},{x:?}\n"));
            }
        }
        s
    }

    pub fn from_csv(text: &str, meta: SampleMeta) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("trial,j,value") {
            return Err(Error::SchemaMismatch("expected header trial,j,value".into()));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in lines {
            let bad = || Error::SchemaMismatch(format!("bad sample line {line:?}"));
            let mut f = line.split(',').map(str::trim);
            let m: usize = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let j: usize = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            let x: f64 = f.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
            if m > rows.len() || (m == rows.len() && j != 0) || (m < rows.len() && (m + 1 != rows.len() || j != rows[m].len())) {
                return Err(Error::SchemaMismatch(format!("sample line {line:?} out of order")));
            }
            if m == rows.len() {
                rows.push(Vec::new());
            }
            rows[m].push(x);
        }
        Self::new(rows, meta)
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    /// Distinct sample values, increasing.
    pub x: Vec<f64>,
    /// `F(x[i])`.
    pub f: Vec<f64>,
    pub count: usize,
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::ShapeMismatch("empty sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::ShapeMismatch("NaN in sample".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut x = Vec::new();
    let mut f = Vec::new();
    for (i, &s) in v.iter().enumerate() {
        if x.last() == Some(&s) {
            *f.last_mut().expect("paired") = (i + 1) as f64 / m;
        } else {
            x.push(s);
            f.push((i + 1) as f64 / m);
        }
    }
    Ok(Ecdf { x, f, count: v.len() })
}

impl Ecdf {
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.x.partition_point(|&s| s <= t);
        if k == 0 {
            0.0
        } else {
            self.f[k - 1]
        }
    }

    /// Smallest sample value `x` with `F(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = self.f.partition_point(|&g| g < p - 1e-15).min(self.x.len() - 1);
        self.x[k]
    }

    /// Two-column text `x F(x)` drawn as a step function.
    pub fn to_steps(&self) -> String {
        let mut s = String::new();
        let mut prev = 0.0;
        for (x, f) in self.x.iter().zip(&self.f) {
            s.push_str(&format!("{x:.10e} {prev:.10e}\n{x:.10e} {f:.10e}\n"));
            prev = *f;
        }
        s
    }
}
