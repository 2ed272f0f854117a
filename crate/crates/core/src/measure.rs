//! Deterministic initial data `V`, its empirical measure and Stieltjes
//! transform, and the grid check of square-root regularity near `0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sorted deterministic spectrum with its norm-bound exponent `C_V`
/// (`max |V_i| <= N^{C_V}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    values: Vec<f64>,
    norm_exponent: f64,
}

impl InitialData {
    /// Sorts `values` and validates finiteness and the norm bound.
    pub fn new(mut values: Vec<f64>, norm_exponent: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDensity("empty spectrum".into()));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidDensity(format!("non-finite value {x}")));
        }
        if !(norm_exponent.is_finite() && norm_exponent >= 0.0) {
            return Err(Error::InvalidDensity(format!("norm exponent {norm_exponent} must be >= 0")));
        }
        values.sort_by(f64::total_cmp);
        let data = Self { values, norm_exponent };
        if !data.norm_ok() {
            return Err(Error::InvalidDensity(format!(
                "max |V_i| = {} exceeds N^C_V = {}",
                data.max_abs(),
                data.norm_bound()
            )));
        }
        Ok(data)
    }

    /// Like [`InitialData::new`] with the smallest admissible `C_V` (at least 1).
    pub fn with_auto_norm(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1) as f64;
        let max_abs = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut c_v = 1.0f64;
        if n > 1.0 && max_abs > n {
            c_v = (max_abs.ln() / n.ln()) * (1.0 + 1e-12) + 1e-12;
        }
        Self::new(values, c_v)
    }

    /// Point mass at `at` repeated `n` times.
    pub fn point_mass(n: usize, at: f64) -> Self {
        Self::with_auto_norm(vec![at; n.max(1)]).expect("finite point mass")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_exponent(&self) -> f64 {
        self.norm_exponent
    }

    pub fn norm_bound(&self) -> f64 {
        (self.len() as f64).powf(self.norm_exponent)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn norm_ok(&self) -> bool {
        self.max_abs() <= self.norm_bound() * (1.0 + 1e-12)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// 0-based index of the first `V_i >= -1/2` (the anchor `i_0 - 1`).
    pub fn anchor_index(&self) -> Option<usize> {
        let k = self.values.partition_point(|&x| x < -0.5);
        (k < self.values.len()).then_some(k)
    }

    /// Dilation `V -> gamma V`; the norm exponent is recomputed.
    pub fn scaled(&self, gamma: f64) -> Result<Self> {
        Self::with_auto_norm(self.values.iter().map(|x| gamma * x).collect())
    }

    /// Short content hash used in report metadata.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.norm_exponent.to_le_bytes());
        for v in &self.values {
            h.update(v.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Text form: header `N C_V`, then one value per line with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {:.16e}\n", self.len(), self.norm_exponent);
        for v in &self.values {
            s.push_str(&format!("{v:.16e}\n"));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::SchemaMismatch("missing header line".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::SchemaMismatch(format!("bad header '{header}'")))?;
        let c_v: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::SchemaMismatch(format!("bad header '{header}'")))?;
        if parts.next().is_some() {
            return Err(Error::SchemaMismatch(format!("header has extra fields: '{header}'")));
        }
        let values = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::SchemaMismatch(format!("bad value line '{l}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != n {
            return Err(Error::SchemaMismatch(format!(
                "header declares {n} values, found {}",
                values.len()
            )));
        }
        Self::new(values, c_v)
    }
}

/// Relative distance below which a resolvent sum is refused.
pub const POLE_THRESHOLD: f64 = 1e-12;

fn check_pole(values: &[f64], z: Complex64) -> Result<()> {
    let threshold = POLE_THRESHOLD * (1.0 + z.norm());
    if z.im.abs() >= threshold {
        return Ok(());
    }
    // sorted values: the nearest point is adjacent to the insertion position
    let k = values.partition_point(|&x| x < z.re);
    let mut d = f64::INFINITY;
    for j in k.saturating_sub(1)..(k + 1).min(values.len()) {
        d = d.min(Complex64::new(values[j] - z.re, -z.im).norm());
    }
    if d < threshold {
        Err(Error::PoleProximity { distance: d, threshold })
    } else {
        Ok(())
    }
}

/// `(1/N) sum 1/(V_i - xi)` and `(1/N) sum 1/(V_i - xi)^2` in one pass.
#[inline]
pub(crate) fn resolvent_pair(values: &[f64], xi: Complex64) -> (Complex64, Complex64) {
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    for &v in values {
        let g = (Complex64::new(v, 0.0) - xi).inv();
        s1 += g;
        s2 += g * g;
    }
    let n = values.len() as f64;
    (s1 / n, s2 / n)
}

/// `(1/N) sum 1/(V_i - xi)^k` for k = 1..=K.
pub(crate) fn resolvent_powers<const K: usize>(values: &[f64], xi: Complex64) -> [Complex64; K] {
    let mut out = [Complex64::new(0.0, 0.0); K];
    for &v in values {
        let g = (Complex64::new(v, 0.0) - xi).inv();
        let mut p = g;
        for o in out.iter_mut() {
            *o += p;
            p *= g;
        }
    }
    let n = values.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `k`-th derivative of `m_V(z) = (1/N) sum 1/(V_i - z)`.
pub fn stieltjes_transform(v: &InitialData, z: Complex64, order: u32) -> Result<Complex64> {
    check_pole(v.values(), z)?;
    let mut s = Complex64::new(0.0, 0.0);
    for &x in v.values() {
        s += (Complex64::new(x, 0.0) - z).powi(-(order as i32 + 1));
    }
    Ok(s * (factorial(order) / v.len() as f64))
}

/// `(1/N) sum |V_i - a - i b|^{-p}`.
pub fn weighted_moment(v: &InitialData, a: f64, b: f64, p: f64) -> Result<f64> {
    let z = Complex64::new(a, b);
    check_pole(v.values(), z)?;
    let s: f64 = v
        .values()
        .iter()
        .map(|&x| Complex64::new(x - a, -b).norm().powf(-p))
        .sum();
    Ok(s / v.len() as f64)
}

/// One grid point where the observed ratio left the admissible bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowViolation {
    pub e: f64,
    pub eta: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub eta_star: f64,
    pub phi_star: f64,
    /// Smallest `C` with `1/C <= ratio <= C` over the whole grid.
    pub constant_found: f64,
    /// Bracket the constant was judged against.
    pub max_constant: f64,
    pub window_violations: Vec<WindowViolation>,
    pub gap_ok: bool,
    pub norm_ok: bool,
    pub passed: bool,
    pub grid_points: usize,
}

/// Bracket used by [`check_eta_regular`]. The `eta = 10` corner of the
/// windows forces `C ~ 10^{3/2}` even for an exact square-root profile.
pub const DEFAULT_REGULARITY_CONSTANT: f64 = 50.0;

pub fn check_eta_regular(v: &InitialData, eta_star: f64, grid_density: usize) -> RegularityReport {
    check_eta_regular_with(v, eta_star, grid_density, DEFAULT_REGULARITY_CONSTANT)
}

fn geometric_grid(lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    let steps = ((hi / lo).log2() * per_octave as f64).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|k| lo * (hi / lo).powf(k as f64 / steps as f64))
        .collect()
}

/// Evaluates `Im m_V` on log-spaced grids over the two windows
/// `{-1 <= E <= 0, eta_* <= eta <= 10}` (profile `eta / sqrt(|E| + eta)`) and
/// `{0 <= E <= 1, eta_*^{1/2} sqrt(E) + eta_* <= eta <= 10}` (profile
/// `sqrt(|E| + eta)`), plus the gap and norm assumptions.
pub fn check_eta_regular_with(
    v: &InitialData,
    eta_star: f64,
    grid_density: usize,
    max_constant: f64,
) -> RegularityReport {
    let density = grid_density.max(8);
    let n = v.len() as f64;
    let phi_star = if n > 1.0 { -eta_star.ln() / n.ln() } else { 0.0 };

    let mut energies: Vec<f64> = vec![0.0];
    energies.extend(geometric_grid(eta_star.min(1.0), 1.0, density));

    let mut constant = 1.0f64;
    let mut violations = Vec::new();
    let mut points = 0usize;
    let mut visit = |e: f64, eta: f64, profile: f64| {
        let im = resolvent_pair(v.values(), Complex64::new(e, eta)).0.im;
        let ratio = im / profile;
        let c = if ratio > 0.0 { ratio.max(1.0 / ratio) } else { f64::INFINITY };
        constant = constant.max(c);
        points += 1;
        if c > max_constant {
            violations.push(WindowViolation { e, eta, ratio });
        }
    };
    for &abs_e in &energies {
        // left window
        let e = -abs_e;
        for eta in geometric_grid(eta_star, 10.0, density) {
            visit(e, eta, eta / (abs_e + eta).sqrt());
        }
        // right window
        let e = abs_e;
        let lo = eta_star.sqrt() * abs_e.sqrt() + eta_star;
        for eta in geometric_grid(lo, 10.0, density) {
            visit(e, eta, (abs_e + eta).sqrt());
        }
    }

    let gap_ok = !v.values().iter().any(|&x| (-1.0..=-eta_star).contains(&x));
    let norm_ok = v.norm_ok();
    let passed = violations.is_empty() && gap_ok && norm_ok;
    RegularityReport {
        eta_star,
        phi_star,
        constant_found: constant,
        max_constant,
        window_violations: violations,
        gap_ok,
        norm_ok,
        passed,
        grid_points: points,
    }
}

/// Named laws used to build quantile initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensitySpec {
    /// `(3 / (2 b^{3/2})) sqrt(x)` on `[0, b]`.
    SqrtEdge { right: f64 },
    PointMass { at: f64 },
    /// Atoms at `left` (weight `left_weight`) and `right`.
    TwoPoint { left: f64, right: f64, left_weight: f64 },
    /// Piecewise-linear CDF through `(x, F(x))` knots.
    Table { knots: Vec<(f64, f64)> },
}

impl DensitySpec {
    fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::SqrtEdge { right } => {
                if !(right.is_finite() && *right > 0.0) {
                    return Err(Error::InvalidDensity(format!("support [0, {right}] is not a bounded interval")));
                }
            }
            DensitySpec::PointMass { at } => {
                if !at.is_finite() {
                    return Err(Error::InvalidDensity("unbounded atom".into()));
                }
            }
            DensitySpec::TwoPoint { left, right, left_weight } => {
                if !(left.is_finite() && right.is_finite()) {
                    return Err(Error::InvalidDensity("unbounded atom".into()));
                }
                if !(0.0..=1.0).contains(left_weight) {
                    return Err(Error::InvalidDensity(format!("weight {left_weight} outside [0,1]")));
                }
                if left > right {
                    return Err(Error::InvalidDensity("atoms out of order".into()));
                }
            }
            DensitySpec::Table { knots } => {
                if knots.len() < 2 {
                    return Err(Error::InvalidDensity("table needs at least two knots".into()));
                }
                if knots.iter().any(|(x, f)| !x.is_finite() || !f.is_finite()) {
                    return Err(Error::InvalidDensity("unbounded table".into()));
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
                    return Err(Error::InvalidDensity("table CDF is not monotone".into()));
                }
                let (f0, f1) = (knots[0].1, knots[knots.len() - 1].1);
                if f0.abs() > 1e-9 || (f1 - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDensity(format!("table mass {} != 1", f1 - f0)));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            DensitySpec::SqrtEdge { right } => (x / right).clamp(0.0, 1.0).powf(1.5),
            DensitySpec::PointMass { at } => f64::from(u8::from(x >= *at)),
            DensitySpec::TwoPoint { left, right, left_weight } => {
                if x >= *right {
                    1.0
                } else if x >= *left {
                    *left_weight
                } else {
                    0.0
                }
            }
            DensitySpec::Table { knots } => {
                if x <= knots[0].0 {
                    return 0.0;
                }
                let k = knots.partition_point(|(kx, _)| *kx < x);
                if k >= knots.len() {
                    return 1.0;
                }
                let (x0, f0) = knots[k - 1];
                let (x1, f1) = knots[k];
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            DensitySpec::SqrtEdge { right } => right * u.powf(2.0 / 3.0),
            DensitySpec::PointMass { at } => *at,
            DensitySpec::TwoPoint { left, right, left_weight } => {
                if u <= *left_weight {
                    *left
                } else {
                    *right
                }
            }
            DensitySpec::Table { knots } => {
                let k = knots.partition_point(|(_, f)| *f < u).clamp(1, knots.len() - 1);
                let (x0, f0) = knots[k - 1];
                let (x1, f1) = knots[k];
                if f1 > f0 {
                    x0 + (x1 - x0) * (u - f0) / (f1 - f0)
                } else {
                    x0
                }
            }
        }
    }
}

/// `V_i = F^{-1}((i - 1/2)/N)` for `i = 1..=N`.
pub fn quantile_initial_data(spec: &DensitySpec, n: usize) -> Result<InitialData> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidDensity("N must be positive".into()));
    }
    let values = (1..=n)
        .map(|i| spec.inverse_cdf((i as f64 - 0.5) / n as f64))
        .collect();
    InitialData::with_auto_norm(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sqrt_profile(n: usize) -> InitialData {
        quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, n).unwrap()
    }

    #[test]
    fn point_mass_transform() {
        let v = InitialData::point_mass(5, 0.0);
        let m = stieltjes_transform(&v, Complex64::new(0.0, 1.0), 0).unwrap();
        assert!((m - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let m = stieltjes_transform(&v, Complex64::new(2.0, 0.0), 0).unwrap();
        assert!((m - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn higher_orders_match_finite_differences() {
        let v = sqrt_profile(50);
        let z = Complex64::new(0.3, 0.2);
        let h = 1e-5;
        for k in 0..3u32 {
            let fd = (stieltjes_transform(&v, z + h, k).unwrap() - stieltjes_transform(&v, z - h, k).unwrap())
                / (2.0 * h);
            let d = stieltjes_transform(&v, z, k + 1).unwrap();
            assert!((fd - d).norm() < 1e-5 * d.norm().max(1.0), "order {k}: {fd} vs {d}");
        }
    }

    #[test]
    fn pole_is_refused() {
        let v = InitialData::point_mass(3, 0.0);
        assert!(matches!(
            stieltjes_transform(&v, Complex64::new(0.0, 0.0), 0),
            Err(Error::PoleProximity { .. })
        ));
        assert!(matches!(weighted_moment(&v, 0.0, 0.0, 2.0), Err(Error::PoleProximity { .. })));
        // off-axis points are always fine
        assert!(stieltjes_transform(&v, Complex64::new(0.0, 1e-6), 0).is_ok());
    }

    #[test]
    fn weighted_moment_point_mass() {
        let v = InitialData::point_mass(1, 0.0);
        assert!((weighted_moment(&v, 0.0, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((weighted_moment(&v, 3.0, 4.0, 2.0).unwrap() - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_data_examples() {
        let v = quantile_initial_data(&DensitySpec::PointMass { at: 0.0 }, 4).unwrap();
        assert_eq!(v.values(), &[0.0; 4]);
        let v = quantile_initial_data(
            &DensitySpec::TwoPoint { left: -1.0, right: 1.0, left_weight: 0.5 },
            4,
        )
        .unwrap();
        assert_eq!(v.values(), &[-1.0, -1.0, 1.0, 1.0]);
        let v = sqrt_profile(4);
        for (i, x) in v.values().iter().enumerate() {
            let expect = ((i as f64 + 0.5) / 4.0).powf(2.0 / 3.0);
            assert!((x - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_densities() {
        let bad = DensitySpec::Table { knots: vec![(0.0, 0.0), (1.0, 0.9)] };
        assert!(matches!(quantile_initial_data(&bad, 4), Err(Error::InvalidDensity(_))));
        let bad = DensitySpec::SqrtEdge { right: f64::INFINITY };
        assert!(matches!(quantile_initial_data(&bad, 4), Err(Error::InvalidDensity(_))));
        let bad = DensitySpec::TwoPoint { left: 0.0, right: 1.0, left_weight: 1.5 };
        assert!(matches!(quantile_initial_data(&bad, 4), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn table_round_trip() {
        let spec = DensitySpec::Table { knots: vec![(0.0, 0.0), (0.5, 0.25), (2.0, 1.0)] };
        let v = quantile_initial_data(&spec, 97).unwrap();
        for (i, x) in v.values().iter().enumerate() {
            let u = (i as f64 + 0.5) / 97.0;
            assert!((spec.cdf(*x) - u).abs() <= 1e-9);
        }
    }

    #[test]
    fn gap_assumption_detects_outlier() {
        let mut values = sqrt_profile(200).values().to_vec();
        values[0] = -0.5;
        let v = InitialData::with_auto_norm(values).unwrap();
        let r = check_eta_regular(&v, 0.01, 8);
        assert!(!r.gap_ok);
        assert!(!r.passed);
    }

    #[test]
    fn point_mass_is_not_regular() {
        let v = InitialData::point_mass(1000, 0.0);
        let r = check_eta_regular(&v, 1000f64.powf(-2.0 / 3.0), 8);
        assert!(!r.passed);
        // Im m = eta/(E^2+eta^2) at E = 0, eta = eta_* against sqrt(eta_*)
        assert!(r.constant_found >= 1000.0 * 0.99);
    }

    #[test]
    fn text_round_trip_and_schema_errors() {
        let v = sqrt_profile(33);
        let back = InitialData::from_text(&v.to_text()).unwrap();
        assert_eq!(v, back);
        assert!(matches!(InitialData::from_text("3 1.0\n0.1\n0.2\n"), Err(Error::SchemaMismatch(_))));
        assert!(matches!(InitialData::from_text("x\n"), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn norm_bound_enforced() {
        assert!(InitialData::new(vec![0.0, 100.0], 1.0).is_err());
        assert!(InitialData::new(vec![0.0, 1.5], 1.0).is_ok());
        let v = InitialData::with_auto_norm(vec![-3000.0, 0.0, 1.0]).unwrap();
        assert!(v.norm_ok());
    }
}
