//! Deterministic edge data for the interpolating ensembles in shifted
//! coordinates: the initial law `mu(alpha)` (an interpolated density near the
//! edge plus point masses for the remaining particles), its free convolution
//! at sampled times, classical locations and the tail integrals that replace
//! long-range interactions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::free_conv::density::{boundary, quantiles_within, DensityTable, FreeConvolutionProfile};
use crate::free_conv::interp::{interpolating_measure, CountingTable};
use crate::measure::resolvent_pair;

/// Semicircle of variance `s` tabulated from its left edge with quadratic clustering.
pub fn semicircle_table(variance: f64, points: usize) -> DensityTable {
    let r = 2.0 * variance.sqrt();
    let mut e = Vec::with_capacity(points + 1);
    let mut rho = Vec::with_capacity(points + 1);
    for k in 0..=points {
        let s = k as f64 / points as f64;
        // cluster at both edges: x = -r cos(pi s)
        let x = -r * (PI * s).cos();
        e.push(x);
        rho.push((r * r - x * x).max(0.0).sqrt() / (2.0 * PI * variance));
    }
    e.dedup();
    rho.truncate(e.len());
    DensityTable { e, rho }
}

/// The initial law `mu(alpha)`: a density carrying mass `k_*/N` plus unit
/// atoms (weight `1/N`) at the remaining particles.
#[derive(Debug, Clone)]
pub struct InitialLaw {
    pub density: CountingTable,
    pub atoms: Vec<f64>,
    pub n: usize,
}

impl InitialLaw {
    /// `rho_x` and `rho_y` are the two initial densities counted from their
    /// left edges; `z0` holds `z_i(0, alpha)` for `i = -N..=N`.
    pub fn build(rho_x: &DensityTable, rho_y: &DensityTable, alpha: f64, z0: &[f64], k_star: usize, n: usize) -> Result<Self> {
        if z0.len() != 2 * n + 1 {
            return Err(Error::ShapeMismatch(format!("{} interpolated positions for window size {}", z0.len(), 2 * n + 1)));
        }
        let table = interpolating_measure(rho_x, rho_y, alpha)?;
        let mut s_max = k_star as f64 / n as f64;
        // tabulated masses carry trapezoid error; accept a small shortfall
        if table.total() < s_max * (1.0 - 1e-3) {
            return Err(Error::Config(format!(
                "k_* = {k_star} needs mass {s_max} but the interpolated density carries {}",
                table.total()
            )));
        }
        s_max = s_max.min(table.total());
        let density = table.truncated(s_max);
        // particle i sits at z0[i + N]; atoms are i <= 0 and i > k_*
        let mut atoms: Vec<f64> = z0[..=n].to_vec();
        atoms.extend_from_slice(&z0[n + 1 + k_star..]);
        atoms.sort_by(f64::total_cmp);
        Ok(Self { density, atoms, n })
    }

    pub fn edge(&self) -> f64 {
        self.density.edge()
    }

    /// Total mass in units where each particle weighs `1/N`.
    pub fn mass(&self) -> f64 {
        self.density.total() + self.atoms.len() as f64 / self.n as f64
    }

    /// Equal-weight atoms: `k` per unit `1/N` of density (at mass midpoints)
    /// and `k` copies of each particle atom.
    pub fn discretize(&self, k: usize) -> Vec<f64> {
        let kn = (k * self.n) as f64;
        let count = (self.density.total() * kn).round() as usize;
        let mut v = Vec::with_capacity(count + k * self.atoms.len());
        for q in 0..count {
            v.push(self.density.inverse((q as f64 + 0.5) / kn).0);
        }
        for &a in &self.atoms {
            v.extend(std::iter::repeat(a).take(k));
        }
        v.sort_by(f64::total_cmp);
        v
    }

    /// `Re m_0(x)` for `x` at or left of the density's edge, outside every atom.
    fn re_m(&self, x: f64) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| 1.0 / (a - x)).sum::<f64>() / self.n as f64;
        let mut s = 0.0;
        let d = &self.density;
        for k in 1..d.e.len() {
            s -= seg_pv(d.e[k - 1], d.e[k], d.rho[k - 1], d.rho[k], x);
        }
        atoms + s
    }

    /// Snapshot of the law itself (time 0).
    pub fn snapshot_initial(&self, q_max: usize) -> Result<ProfileSnapshot> {
        let e_minus = self.edge();
        let nf = self.n as f64;
        if q_max as f64 > self.density.total() * nf + 1e-3 {
            return Err(Error::IndexOverflow(format!("quantile {q_max} beyond the density part")));
        }
        let gamma_hat: Vec<f64> = (1..=q_max).map(|j| self.density.inverse(j as f64 / nf).0 - e_minus).collect();
        let e_top = gamma_hat.last().copied().unwrap_or(0.0);
        let d = &self.density;
        let mut e = Vec::new();
        let mut rho = Vec::new();
        let mut beyond_e = Vec::new();
        let mut beyond_rho = Vec::new();
        for k in 0..d.e.len() {
            let x = d.e[k] - e_minus;
            if x <= e_top {
                e.push(x);
                rho.push(d.rho[k]);
            }
            if x >= e_top {
                beyond_e.push(x);
                beyond_rho.push(d.rho[k]);
            }
        }
        if *e.last().unwrap() < e_top {
            let r = d.density(e_top + e_minus);
            e.push(e_top);
            rho.push(r);
            beyond_e.insert(0, e_top);
            beyond_rho.insert(0, r);
        }
        Ok(ProfileSnapshot {
            time: 0.0,
            e_minus,
            re_m_edge: self.re_m(e_minus),
            e,
            rho,
            gamma_hat,
            outside: Outside::Static {
                atoms: self.atoms.iter().map(|a| a - e_minus).collect(),
                beyond_e,
                beyond_rho,
                n: nf,
            },
        })
    }

    /// Snapshot of the free convolution at time `t > 0`, using `k` equal-weight
    /// atoms per particle and `points` density samples.
    pub fn snapshot_at(&self, t: f64, q_max: usize, k: usize, points: usize) -> Result<ProfileSnapshot> {
        let values = Arc::new(self.discretize(k));
        let mass = self.mass();
        let ts = t * mass;
        let nf = self.n as f64;
        let anchor = values.partition_point(|&x| x < self.edge());
        let prof = FreeConvolutionProfile::compute_at(&values, ts, anchor)?;
        let e_minus = prof.e_minus;
        // index j of mu(alpha) is index j k of the normalised atom list
        let idx: Vec<usize> = (1..=q_max).map(|j| j * k).collect();
        let guess_top = self.density.inverse((q_max as f64 + 1.0) / nf).0 + 3.0 * ts.sqrt() + 1e-3;
        let mut e_max = guess_top.max(e_minus + 1e-3);
        let quant = loop {
            match quantiles_within(&values, &prof, &idx, e_max) {
                Ok(q) => break q,
                Err(Error::QuadratureFailure(_)) if e_max - e_minus < 1e3 => e_max = e_minus + 2.0 * (e_max - e_minus),
                Err(e) => return Err(e),
            }
        };
        let gamma_hat: Vec<f64> = quant.iter().map(|g| g - e_minus).collect();
        let e_top = *gamma_hat.last().unwrap_or(&0.0);
        let table = DensityTable::sample_between(&values, ts, e_minus, e_minus + e_top, points)?;
        let e = table.e.iter().map(|x| x - e_minus).collect();
        let rho = table.rho.iter().map(|r| r * mass).collect();
        Ok(ProfileSnapshot {
            time: t,
            e_minus,
            re_m_edge: prof.m_at_edge() * mass,
            e,
            rho,
            gamma_hat,
            outside: Outside::Evolved { values, t_scaled: ts, mass },
        })
    }
}

/// `int_a^b rho(E)/(y - E) dE` for `rho` linear from `r0` to `r1` (principal value for `y` inside).
fn seg_pv(a: f64, b: f64, r0: f64, r1: f64, y: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = (r1 - r0) / (b - a);
    let c = r0 + s * (y - a);
    let (ya, yb) = (y - a, y - b);
    let log = if ya == 0.0 || yb == 0.0 { 0.0 } else { (ya / yb).abs().ln() };
    c * log - s * (b - a)
}

/// `d/dy` of [`seg_pv`].
fn seg_pv_dy(a: f64, b: f64, r0: f64, r1: f64, y: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = (r1 - r0) / (b - a);
    let c = r0 + s * (y - a);
    let (ya, yb) = (y - a, y - b);
    s * (ya / yb).abs().ln() + c * (1.0 / ya - 1.0 / yb)
}

/// `int_a^b rho(E)/(y - E)^2 dE` for `y` outside `(a, b)`.
fn seg_sq(a: f64, b: f64, r0: f64, r1: f64, y: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let s = (r1 - r0) / (b - a);
    let c = r0 + s * (y - a);
    let (ya, yb) = (y - a, y - b);
    c * (1.0 / yb - 1.0 / ya) - s * (ya / yb).abs().ln()
}

/// Interval set on the real line, kept sorted and disjoint.
fn subtract(pieces: &[(f64, f64)], cut: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(pieces.len() + 1);
    for &(a, b) in pieces {
        if cut.1 <= a || cut.0 >= b {
            out.push((a, b));
            continue;
        }
        if cut.0 > a {
            out.push((a, cut.0));
        }
        if cut.1 < b {
            out.push((cut.1, b));
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Outside {
    /// Time 0: explicit atoms and the density beyond the tabulated window.
    Static { atoms: Vec<f64>, beyond_e: Vec<f64>, beyond_rho: Vec<f64>, n: f64 },
    /// Time `t > 0`: read from the fixed point of the discretised law.
    Evolved { values: Arc<Vec<f64>>, t_scaled: f64, mass: f64 },
}

/// Edge data of `rho_t(. + E_-, alpha)` at one time, in shifted coordinates.
#[derive(Debug, Clone)]
pub struct ProfileSnapshot {
    pub time: f64,
    pub e_minus: f64,
    /// `Re m_t(E_-(t, alpha), alpha)`.
    pub re_m_edge: f64,
    /// Tabulated density on `[0, gamma_hat_{q_max}]`.
    pub e: Vec<f64>,
    pub rho: Vec<f64>,
    /// `gamma_hat[j - 1]` is the shifted classical location of index `j`.
    pub gamma_hat: Vec<f64>,
    outside: Outside,
}

impl ProfileSnapshot {
    /// A law with no density and no atoms, edge at `e_minus` and constant `Re m`.
    pub fn empty(time: f64, e_minus: f64, re_m_edge: f64, gamma_hat: Vec<f64>) -> Self {
        Self {
            time,
            e_minus,
            re_m_edge,
            e: vec![0.0, 1.0],
            rho: vec![0.0, 0.0],
            gamma_hat,
            outside: Outside::Static { atoms: Vec::new(), beyond_e: Vec::new(), beyond_rho: Vec::new(), n: 1.0 },
        }
    }

    pub fn gamma_hat(&self, j: i64) -> f64 {
        let q = self.gamma_hat.len() as i64;
        self.gamma_hat[(j.clamp(1, q) - 1) as usize]
    }

    pub fn q_max(&self) -> usize {
        self.gamma_hat.len()
    }

    pub fn table_top(&self) -> f64 {
        self.e[self.e.len() - 1]
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.e[0] || x > self.table_top() {
            return 0.0;
        }
        let k = self.e.partition_point(|&v| v < x).clamp(1, self.e.len() - 1);
        let (a, b) = (self.e[k - 1], self.e[k]);
        self.rho[k - 1] + (self.rho[k] - self.rho[k - 1]) * (x - a) / (b - a)
    }

    /// Sums `f(a, b, rho(a), rho(b))` over the table clipped to `pieces`.
    fn over_table<F: Fn(f64, f64, f64, f64) -> f64>(&self, pieces: &[(f64, f64)], f: F) -> f64 {
        let mut total = 0.0;
        for &(u, v) in pieces {
            let u = u.max(self.e[0]);
            let v = v.min(self.table_top());
            if v <= u {
                continue;
            }
            let k0 = self.e.partition_point(|&x| x <= u).clamp(1, self.e.len() - 1);
            let mut k = k0;
            while k < self.e.len() && self.e[k - 1] < v {
                let a = self.e[k - 1].max(u);
                let b = self.e[k].min(v);
                if b > a {
                    let s = (self.rho[k] - self.rho[k - 1]) / (self.e[k] - self.e[k - 1]);
                    let ra = self.rho[k - 1] + s * (a - self.e[k - 1]);
                    let rb = self.rho[k - 1] + s * (b - self.e[k - 1]);
                    total += f(a, b, ra, rb);
                }
                k += 1;
            }
        }
        total
    }

    /// `PV int_{pieces} rho(E)/(y - E) dE` over the tabulated window.
    pub fn table_pv(&self, pieces: &[(f64, f64)], y: f64) -> f64 {
        self.over_table(pieces, |a, b, ra, rb| seg_pv(a, b, ra, rb, y))
    }

    /// `int_{pieces} rho(E)/(y - E)^2 dE`; `y` must not lie inside a piece.
    pub fn table_sq(&self, pieces: &[(f64, f64)], y: f64) -> f64 {
        self.over_table(pieces, |a, b, ra, rb| seg_sq(a, b, ra, rb, y))
    }

    /// Contribution of everything outside the tabulated window,
    /// `int_{E outside [0, top]} rho_t(E + E_-)/(y - E) dE`, and its `y`-derivative.
    /// `guess` carries the fixed-point solution between nearby calls.
    pub fn outside(&self, y: f64, guess: &mut Option<Complex64>) -> Result<(f64, f64)> {
        match &self.outside {
            Outside::Static { atoms, beyond_e, beyond_rho, n } => {
                let mut f = 0.0;
                let mut df = 0.0;
                for a in atoms {
                    let g = 1.0 / (y - a);
                    f += g;
                    df -= g * g;
                }
                f /= n;
                df /= n;
                for k in 1..beyond_e.len() {
                    let (a, b, ra, rb) = (beyond_e[k - 1], beyond_e[k], beyond_rho[k - 1], beyond_rho[k]);
                    f += seg_pv(a, b, ra, rb, y);
                    df -= seg_sq(a, b, ra, rb, y);
                }
                Ok((f, df))
            }
            Outside::Evolved { values, t_scaled, mass } => {
                let x = y + self.e_minus;
                let b = boundary(values, *t_scaled, x, *guess)?;
                *guess = Some(b.point.m);
                let m = b.point.m;
                let (_, dmv) = resolvent_pair(values, b.point.xi);
                let dm = dmv / (1.0 - t_scaled * dmv);
                // int rho/(y - E) over the whole line is -Re m at the boundary
                let full = -mass * m.re;
                let dfull = -mass * dm.re;
                let top = self.table_top();
                let inner = self.table_pv(&[(0.0, top)], y);
                let dinner = self.over_table(&[(0.0, top)], |a, b, ra, rb| seg_pv_dy(a, b, ra, rb, y));
                Ok((full - inner, dfull - dinner))
            }
        }
    }

    /// Local excision half-width around index `i`: half the classical spacing.
    pub fn excision(&self, i: i64) -> f64 {
        let q = self.gamma_hat.len() as i64;
        let i = i.clamp(1, q - 1);
        0.5 * (self.gamma_hat(i + 1) - self.gamma_hat(i))
    }
}

/// Tail integral for the edge regime: `int_{I^c \ W} rho/(y - E) dE` over the
/// whole line, where `I = [lo, hi]` and `W` is the excision window around `y`.
pub fn edge_tail(p: &ProfileSnapshot, y: f64, interval: (f64, f64), half_width: f64, guess: &mut Option<Complex64>) -> Result<f64> {
    let (out, _) = p.outside(y, guess)?;
    let mut pieces = subtract(&[(0.0, p.table_top())], interval);
    pieces = subtract(&pieces, (y - half_width, y + half_width));
    Ok(out + p.table_pv(&pieces, y))
}

/// Tail integral for the middle regime: `int_{(J \ I) \ W} rho/(y - E) dE`
/// with `J = [-1/2, j_top]`.
pub fn middle_tail(p: &ProfileSnapshot, y: f64, interval: (f64, f64), j_top: f64, half_width: f64) -> f64 {
    let mut pieces = subtract(&[(-0.5, j_top)], interval);
    pieces = subtract(&pieces, (y - half_width, y + half_width));
    p.table_pv(&pieces, y)
}

/// Potential for the edge regime: `-int_{I^c \ W} rho/(y - E)^2 dE`.
pub fn edge_potential(p: &ProfileSnapshot, y: f64, interval: (f64, f64), half_width: f64, guess: &mut Option<Complex64>) -> Result<f64> {
    let (_, dout) = p.outside(y, guess)?;
    let mut pieces = subtract(&[(0.0, p.table_top())], interval);
    pieces = subtract(&pieces, (y - half_width, y + half_width));
    Ok(dout - p.table_sq(&pieces, y))
}

/// Potential for the middle regime: `-int_{(J \ I) \ W} rho/(y - E)^2 dE`.
pub fn middle_potential(p: &ProfileSnapshot, y: f64, interval: (f64, f64), j_top: f64, half_width: f64) -> f64 {
    let mut pieces = subtract(&[(-0.5, j_top)], interval);
    pieces = subtract(&pieces, (y - half_width, y + half_width));
    -p.table_sq(&pieces, y)
}

/// Snapshots at increasing times; densities and locations are read from the
/// nearest snapshot, `E_-` and `Re m` at the edge are interpolated linearly.
#[derive(Debug, Clone)]
pub struct ProfileSeries {
    pub snapshots: Vec<ProfileSnapshot>,
}

impl ProfileSeries {
    pub fn new(snapshots: Vec<ProfileSnapshot>) -> Result<Self> {
        if snapshots.is_empty() || snapshots.windows(2).any(|w| !(w[0].time < w[1].time)) {
            return Err(Error::Config("profile snapshots must be non-empty with increasing times".into()));
        }
        Ok(Self { snapshots })
    }

    /// Builds snapshots of `law` at `times` (a time of 0 uses the law itself).
    pub fn compute(law: &InitialLaw, times: &[f64], q_max: usize, k: usize, points: usize) -> Result<Self> {
        let snaps = times
            .iter()
            .map(|&t| if t == 0.0 { law.snapshot_initial(q_max) } else { law.snapshot_at(t, q_max, k, points) })
            .collect::<Result<Vec<_>>>()?;
        Self::new(snaps)
    }

    pub fn nearest(&self, t: f64) -> &ProfileSnapshot {
        let k = self.snapshots.partition_point(|s| s.time < t);
        if k == 0 {
            return &self.snapshots[0];
        }
        if k == self.snapshots.len() {
            return &self.snapshots[k - 1];
        }
        let (a, b) = (&self.snapshots[k - 1], &self.snapshots[k]);
        if t - a.time <= b.time - t {
            a
        } else {
            b
        }
    }

    fn lerp(&self, t: f64, f: impl Fn(&ProfileSnapshot) -> f64) -> f64 {
        let s = &self.snapshots;
        if s.len() == 1 {
            return f(&s[0]);
        }
        let k = s.partition_point(|x| x.time < t).clamp(1, s.len() - 1);
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.time) / (b.time - a.time);
        (1.0 - w) * f(a) + w * f(b)
    }

    pub fn e_minus(&self, t: f64) -> f64 {
        self.lerp(t, |s| s.e_minus)
    }

    pub fn re_m_edge(&self, t: f64) -> f64 {
        self.lerp(t, |s| s.re_m_edge)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    fn quad_pv_free(a: f64, b: f64, r0: f64, r1: f64, y: f64) -> f64 {
        let s = (r1 - r0) / (b - a);
        integrate(|x| Ok((r0 + s * (x - a)) / (y - x)), a, b, 1e-13, 2000).unwrap()
    }

    #[test]
    fn segment_formulas_match_quadrature() {
        let (a, b, r0, r1) = (0.2, 0.9, 0.3, 1.1);
        for &y in &[-0.5, 0.1, 1.0, 2.5] {
            assert!((seg_pv(a, b, r0, r1, y) - quad_pv_free(a, b, r0, r1, y)).abs() < 1e-11);
            let s = (r1 - r0) / (b - a);
            let q = integrate(|x| Ok((r0 + s * (x - a)) / (y - x).powi(2)), a, b, 1e-13, 2000).unwrap();
            assert!((seg_sq(a, b, r0, r1, y) - q).abs() < 1e-10 * q.abs().max(1.0));
            let h = 1e-6;
            let fd = (seg_pv(a, b, r0, r1, y + h) - seg_pv(a, b, r0, r1, y - h)) / (2.0 * h);
            assert!((seg_pv_dy(a, b, r0, r1, y) - fd).abs() < 1e-6);
            assert!((seg_pv_dy(a, b, r0, r1, y) + seg_sq(a, b, r0, r1, y)).abs() < 1e-9);
        }
        // symmetric principal value of a constant density vanishes
        assert!(seg_pv(-1.0, 1.0, 2.0, 2.0, 0.0).abs() < 1e-15);
    }

    #[test]
    fn interval_subtraction() {
        let p = subtract(&[(0.0, 1.0)], (0.2, 0.4));
        assert_eq!(p, vec![(0.0, 0.2), (0.4, 1.0)]);
        assert_eq!(subtract(&p, (-1.0, 0.1)), vec![(0.1, 0.2), (0.4, 1.0)]);
        assert_eq!(subtract(&p, (2.0, 3.0)), p);
    }

    fn semicircle_law(n: usize) -> InitialLaw {
        let y = semicircle_table(1.0, 2000);
        let z0: Vec<f64> = (0..=2 * n).map(|k| -3.0 * n as f64 + (k as f64 - n as f64) * n as f64).collect();
        // only the i <= 0 atoms are used when k_* = N
        InitialLaw::build(&y, &y, 0.0, &z0, n, n).unwrap()
    }

    #[test]
    fn initial_snapshot_of_semicircle() {
        let law = semicircle_law(100);
        assert!((law.edge() + 2.0).abs() < 1e-12);
        let s = law.snapshot_initial(50).unwrap();
        // Re m_sc(-2) = 1, plus the far atoms
        let atoms: f64 = law.atoms.iter().map(|a| 1.0 / (a + 2.0)).sum::<f64>() / 100.0;
        assert!((s.re_m_edge - (1.0 + atoms)).abs() < 2e-3, "{}", s.re_m_edge);
        assert!((s.gamma_hat(50) - 2.0).abs() < 1e-3);
    }

    #[test]
    fn evolved_snapshot_tracks_the_semicircle_flow() {
        let n = 100;
        let law = semicircle_law(n);
        let t = 0.2;
        let s = law.snapshot_at(t, 40, 4, 300).unwrap();
        // mass (2N+1)/N spreads the edge slightly beyond the semicircle of variance 1 + t
        let e_sc = -2.0 * (1.0 + t).sqrt();
        assert!((s.e_minus - e_sc).abs() < 0.02, "E_- = {}", s.e_minus);
        assert!((s.re_m_edge - 1.0 / (1.0 + t).sqrt()).abs() < 0.05, "Re m = {}", s.re_m_edge);
        let mut g = None;
        let (out, dout) = s.outside(0.3, &mut g).unwrap();
        let h = 1e-5;
        let (o2, _) = s.outside(0.3 + h, &mut g).unwrap();
        let (o1, _) = s.outside(0.3 - h, &mut g).unwrap();
        assert!(out.is_finite());
        assert!((dout - (o2 - o1) / (2.0 * h)).abs() < 1e-3 * (1.0 + dout.abs()));
    }
}
