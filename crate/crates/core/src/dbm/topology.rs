//! Short-range index set on the padded window `-N..=N` and the exponent
//! hierarchy that sizes it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale exponents `omega_1 < omega_ell < omega_A < omega_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub omega1: f64,
    pub omega_ell: f64,
    pub omega_a: f64,
    pub omega0: f64,
    /// Minimum separation enforced between consecutive exponents.
    pub margin: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Self { omega1: 0.05, omega_ell: 0.15, omega_a: 0.25, omega0: 0.28, margin: 0.02 }
    }
}

impl Exponents {
    pub fn validate(&self) -> Result<()> {
        let chain = [0.0, self.omega1, self.omega_ell, self.omega_a, self.omega0];
        let names = ["0", "omega_1", "omega_ell", "omega_A", "omega_0"];
        for k in 1..chain.len() {
            if !(chain[k] - chain[k - 1] >= self.margin) || !chain[k].is_finite() {
                return Err(Error::BadHierarchy(format!(
                    "{} = {} must exceed {} = {} by at least {}",
                    names[k],
                    chain[k],
                    names[k - 1],
                    chain[k - 1],
                    self.margin
                )));
            }
        }
        if self.omega0 >= 1.0 / 3.0 {
            return Err(Error::BadHierarchy(format!("omega_0 = {} must stay below 1/3", self.omega0)));
        }
        Ok(())
    }

    /// `t_1 = N^{omega_1 - 1/3}`.
    pub fn t1(&self, n: usize) -> f64 {
        (n as f64).powf(self.omega1 - 1.0 / 3.0)
    }

    /// `t_0 = N^{omega_0 - 1/3}`.
    pub fn t0(&self, n: usize) -> f64 {
        (n as f64).powf(self.omega0 - 1.0 / 3.0)
    }
}

/// Which drift law an index follows in the short-range dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `i <= 0`.
    Padding,
    /// `1 <= i <= N^{omega_A}`: tail integral against the `alpha = 0` law.
    Edge,
    /// `N^{omega_A} < i <= i_*/2`: tail integral over `J` plus far particles.
    Middle,
    /// `i > i_*/2`.
    Bulk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortRangeTopology {
    pub n: usize,
    pub ell: u64,
    pub omega_a_cut: i64,
    pub i_star: i64,
    /// `(j_-(i), j_+(i))` for `i = -N..=N`, stored at `i + N`.
    pub row_intervals: Vec<(i64, i64)>,
}

impl ShortRangeTopology {
    pub fn row(&self, i: i64) -> (i64, i64) {
        self.row_intervals[(i + self.n as i64) as usize]
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        let (lo, hi) = self.row(i);
        lo <= j && j <= hi
    }

    /// Membership by the defining union, independent of the stored rows.
    pub fn member_by_definition(&self, i: i64, j: i64) -> bool {
        let near = i > 0 && j > 0 && within_band(self.ell as f64, i, j);
        let bulk = 2 * i > self.i_star && 2 * j > self.i_star;
        near || bulk || (i <= 0 && j <= 0)
    }

    pub fn regime(&self, i: i64) -> Regime {
        if i <= 0 {
            Regime::Padding
        } else if 2 * i > self.i_star {
            Regime::Bulk
        } else if i <= self.omega_a_cut {
            Regime::Edge
        } else {
            Regime::Middle
        }
    }

    /// Largest quantile index any row of indices `1..=i_*/2` refers to,
    /// together with `3 i_*/4`.
    pub fn quantile_reach(&self) -> i64 {
        let half = self.i_star / 2;
        let rows = (1..=half.min(self.n as i64)).map(|i| self.row(i).1).max().unwrap_or(0);
        rows.max(3 * self.i_star / 4)
    }
}

fn within_band(ell: f64, i: i64, j: i64) -> bool {
    let (fi, fj) = (i as f64, j as f64);
    ((i - j).abs() as f64) <= ell * (10.0 * ell * ell + fi.powf(2.0 / 3.0) + fj.powf(2.0 / 3.0))
}

/// Builds `A` for window `-N..=N` with `ell = round(N^{omega_ell})` and
/// `N^{omega_A}` rounded down.
pub fn short_range_topology(n: usize, omega_ell: f64, omega_a: f64, i_star: usize, exps: &Exponents) -> Result<ShortRangeTopology> {
    let e = Exponents { omega_ell, omega_a, ..*exps };
    e.validate()?;
    if n == 0 || i_star == 0 || i_star > n {
        return Err(Error::Config(format!("i_star = {i_star} must lie in [1, N = {n}]")));
    }
    let nf = n as f64;
    let ell = nf.powf(omega_ell).round().max(1.0) as u64;
    let cut = nf.powf(omega_a).floor() as i64;
    let ni = n as i64;
    let i_star = i_star as i64;
    let ellf = ell as f64;
    // the band condition fails monotonically once j passes (2 ell / 3)^3
    let turn = (2.0 * ellf / 3.0).powi(3);
    let mut rows = Vec::with_capacity(2 * n + 1);
    for i in -ni..=ni {
        if i <= 0 {
            rows.push((-ni, 0));
            continue;
        }
        let mut hi = i;
        let mut j = i + 1;
        while j <= ni {
            if within_band(ellf, i, j) {
                hi = j;
            } else if j as f64 > turn {
                break;
            }
            j += 1;
        }
        let mut lo = i;
        while lo > 1 && within_band(ellf, i, lo - 1) {
            lo -= 1;
        }
        if 2 * i > i_star {
            hi = ni;
            lo = lo.min(i_star / 2 + 1);
        }
        rows.push((lo, hi));
    }
    Ok(ShortRangeTopology { n, ell, omega_a_cut: cut, i_star, row_intervals: rows })
}
