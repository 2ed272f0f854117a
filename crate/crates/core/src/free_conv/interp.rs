//! Interpolation between two square-root-edge densities through their
//! inverse counting functions: `phi(s, alpha) = alpha phi_x(s) + (1 - alpha) phi_y(s)`.

use serde::{Deserialize, Serialize};

use super::density::DensityTable;
use crate::error::{Error, Result};

/// Piecewise-linear density with its exact (piecewise-quadratic) counting function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingTable {
    pub e: Vec<f64>,
    pub rho: Vec<f64>,
    /// `n[k] = int_{e[0]}^{e[k]} rho`
    pub n: Vec<f64>,
}

impl CountingTable {
    pub fn new(table: &DensityTable) -> Result<Self> {
        let (e, rho) = (&table.e, &table.rho);
        if e.len() < 2 || e.len() != rho.len() {
            return Err(Error::ShapeMismatch(format!("density table with {} energies and {} values", e.len(), rho.len())));
        }
        let mut n = Vec::with_capacity(e.len());
        n.push(0.0);
        for k in 1..e.len() {
            let h = e[k] - e[k - 1];
            let mass = 0.5 * h * (rho[k - 1] + rho[k]);
            if !(h > 0.0) || !(mass > 0.0) || rho[k] < 0.0 {
                return Err(Error::NonMonotoneCdf(format!(
                    "no mass on [{}, {}] (rho = {}, {})",
                    e[k - 1],
                    e[k],
                    rho[k - 1],
                    rho[k]
                )));
            }
            n.push(n[k - 1] + mass);
        }
        Ok(Self { e: e.clone(), rho: rho.clone(), n })
    }

    pub fn total(&self) -> f64 {
        self.n[self.n.len() - 1]
    }

    pub fn edge(&self) -> f64 {
        self.e[0]
    }

    fn segment_by_mass(&self, s: f64) -> usize {
        self.n.partition_point(|&x| x < s).clamp(1, self.n.len() - 1)
    }

    fn segment_by_energy(&self, x: f64) -> usize {
        self.e.partition_point(|&v| v < x).clamp(1, self.e.len() - 1)
    }

    /// Linear interpolation of `rho` (zero outside the table).
    pub fn density(&self, x: f64) -> f64 {
        if x < self.e[0] || x > self.e[self.e.len() - 1] {
            return 0.0;
        }
        let k = self.segment_by_energy(x);
        let (x0, x1) = (self.e[k - 1], self.e[k]);
        self.rho[k - 1] + (self.rho[k] - self.rho[k - 1]) * (x - x0) / (x1 - x0)
    }

    pub fn counting(&self, x: f64) -> f64 {
        if x <= self.e[0] {
            return 0.0;
        }
        if x >= self.e[self.e.len() - 1] {
            return self.total();
        }
        let k = self.segment_by_energy(x);
        let (x0, r0) = (self.e[k - 1], self.rho[k - 1]);
        let u = x - x0;
        self.n[k - 1] + u * (r0 + 0.5 * (self.density(x) - r0))
    }

    /// The same law cut at mass `s_max` (no-op above the total).
    pub fn truncated(&self, s_max: f64) -> CountingTable {
        if s_max >= self.total() {
            return self.clone();
        }
        let k = self.segment_by_mass(s_max.max(0.0));
        let (x, r) = self.inverse(s_max);
        let mut e = self.e[..k].to_vec();
        let mut rho = self.rho[..k].to_vec();
        let mut n = self.n[..k].to_vec();
        if x > e[k - 1] {
            e.push(x);
            rho.push(r);
            n.push(s_max);
        }
        CountingTable { e, rho, n }
    }

    /// `phi(s)`: the energy with `n(phi) = s`, and `rho(phi(s))`.
    pub fn inverse(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, self.total());
        let k = self.segment_by_mass(s);
        let (x0, x1) = (self.e[k - 1], self.e[k]);
        let (r0, r1) = (self.rho[k - 1], self.rho[k]);
        let h = x1 - x0;
        let d = s - self.n[k - 1];
        let c = (r1 - r0) / (2.0 * h);
        // c u^2 + r0 u = d, stable root
        let disc = (r0 * r0 + 4.0 * c * d).max(0.0);
        let u = if d <= 0.0 { 0.0 } else { (2.0 * d / (r0 + disc.sqrt())).min(h) };
        (x0 + u, r0 + (r1 - r0) * u / h)
    }
}

/// Tabulates `rho(E, alpha)` on the union of the two inputs' mass nodes,
/// restricted to the common mass range.
pub fn interpolating_measure(rho_x: &DensityTable, rho_y: &DensityTable, alpha: f64) -> Result<CountingTable> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha = {alpha} outside [0, 1]")));
    }
    let x = CountingTable::new(rho_x)?;
    let y = CountingTable::new(rho_y)?;
    let top = x.total().min(y.total());
    let mut s: Vec<f64> = x.n.iter().chain(&y.n).copied().filter(|&v| v <= top).collect();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * top);
    let mut e = Vec::with_capacity(s.len());
    let mut rho = Vec::with_capacity(s.len());
    for &si in &s {
        let (ex, rx) = x.inverse(si);
        let (ey, ry) = y.inverse(si);
        e.push(alpha * ex + (1.0 - alpha) * ey);
        rho.push(if alpha == 1.0 {
            rx
        } else if alpha == 0.0 {
            ry
        } else if rx > 0.0 && ry > 0.0 {
            1.0 / (alpha / rx + (1.0 - alpha) / ry)
        } else {
            0.0
        });
    }
    // keep the edge node even if both densities vanish there
    let mut table = DensityTable { e, rho };
    dedup_energies(&mut table);
    CountingTable::new(&table)
}

fn dedup_energies(t: &mut DensityTable) {
    let mut k = 1;
    while k < t.e.len() {
        if t.e[k] <= t.e[k - 1] {
            t.e.remove(k);
            t.rho.remove(k);
        } else {
            k += 1;
        }
    }
}
