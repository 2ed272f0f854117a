//! Gaussian ensembles and spectra of `V + sqrt(t) G`.

use faer::complex_native::c64;
use faer::{Mat, Side};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::measure::InitialData;
use crate::rng::StreamId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta {
    One,
    Two,
}

impl TryFrom<u8> for Beta {
    type Error = Error;
    fn try_from(b: u8) -> Result<Self> {
        match b {
            1 => Ok(Beta::One),
            2 => Ok(Beta::Two),
            _ => Err(Error::Config(format!("beta must be 1 or 2, got {b}"))),
        }
    }
}

/// A sampled Gaussian matrix with the normalisation that puts the spectrum on `[-2, 2]`.
pub enum GaussianMatrix {
    Real(Mat<f64>),
    Complex(Mat<c64>),
}

impl GaussianMatrix {
    pub fn dim(&self) -> usize {
        match self {
            GaussianMatrix::Real(m) => m.nrows(),
            GaussianMatrix::Complex(m) => m.nrows(),
        }
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        match self {
            GaussianMatrix::Real(m) => real_eigenvalues(m),
            GaussianMatrix::Complex(m) => {
                let ev = m.selfadjoint_eigenvalues(Side::Lower);
                check_finite(&ev)?;
                Ok(ev)
            }
        }
    }
}

fn check_finite(ev: &[f64]) -> Result<()> {
    if ev.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::EigenFailure("non-finite eigenvalue".into()))
    }
}

/// Ascending eigenvalues of a real symmetric matrix (lower triangle is read).
pub fn real_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>> {
    let mut ev = m.selfadjoint_eigenvalues(Side::Lower);
    check_finite(&ev)?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn fill_goe(n: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let off = (1.0 / n as f64).sqrt();
    let diag = (2.0 / n as f64).sqrt();
    let mut m = Mat::<f64>::zeros(n, n);
    // column-major fill of the lower triangle, mirrored
    for j in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m.write(j, j, diag * d);
        for i in j + 1..n {
            let x: f64 = rng.sample(StandardNormal);
            let x = off * x;
            m.write(i, j, x);
            m.write(j, i, x);
        }
    }
    m
}

fn fill_gue(n: usize, rng: &mut ChaCha8Rng) -> Mat<c64> {
    let off = (0.5 / n as f64).sqrt();
    let diag = (1.0 / n as f64).sqrt();
    let mut m = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        m.write(j, j, c64::new(diag * d, 0.0));
        for i in j + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let x = c64::new(off * re, off * im);
            m.write(i, j, x);
            m.write(j, i, x.conj());
        }
    }
    m
}

/// GOE (`beta = 1`: off-diagonal variance `1/N`, diagonal `2/N`) or GUE
/// (`beta = 2`: `E|h_ij|^2 = 1/N`).
pub fn sample_gaussian_ensemble(n: usize, beta: Beta, stream: &StreamId) -> GaussianMatrix {
    let mut rng = stream.rng();
    match beta {
        Beta::One => GaussianMatrix::Real(fill_goe(n, &mut rng)),
        Beta::Two => GaussianMatrix::Complex(fill_gue(n, &mut rng)),
    }
}

/// Sorted spectrum of `diag(V) + sqrt(t) G` with `G` from `stream`; `t = 0` returns `V`.
pub fn ensemble_eigenvalues(v: &InitialData, t: f64, stream: &StreamId) -> Result<Vec<f64>> {
    if t < 0.0 {
        return Err(Error::Config(format!("time t = {t} must be nonnegative")));
    }
    if t == 0.0 {
        return Ok(v.values().to_vec());
    }
    let mut rng = stream.rng();
    let mut m = fill_goe(v.len(), &mut rng);
    let s = t.sqrt();
    for j in 0..v.len() {
        for i in 0..v.len() {
            let x = m.read(i, j) * s;
            m.write(i, j, x);
        }
        m.write(j, j, m.read(j, j) + v.values()[j]);
    }
    real_eigenvalues(&m)
}

/// Spectra of `diag(V) + W(t_k)` at increasing times, where `W` is a
/// matrix Brownian motion with GOE-normalised increments. At each time the
/// spectrum is an exact sample of the DBM started from `V`.
pub fn matrix_path_eigenvalues(v: &InitialData, times: &[f64], stream: &StreamId) -> Result<Vec<Vec<f64>>> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Config("time grid must be nonnegative and nondecreasing".into()));
    }
    let n = v.len();
    let mut rng = stream.rng();
    let mut h = Mat::<f64>::zeros(n, n);
    for (j, &x) in v.values().iter().enumerate() {
        h.write(j, j, x);
    }
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - prev;
        if dt > 0.0 {
            let g = fill_goe(n, &mut rng);
            let s = dt.sqrt();
            for j in 0..n {
                for i in 0..n {
                    h.write(i, j, h.read(i, j) + s * g.read(i, j));
                }
            }
        }
        prev = t;
        out.push(if t == 0.0 { v.values().to_vec() } else { real_eigenvalues(&h)? });
    }
    Ok(out)
}

/// Smallest `k` eigenvalues of a GOE matrix through the tridiagonal model
/// with `N(0, 2)` diagonal and `chi_{N-1}, ..., chi_1` off-diagonal (scaled by
/// `1/sqrt(N)`), which has exactly the GOE eigenvalue law.
pub fn goe_smallest_eigenvalues(n: usize, k: usize, stream: &StreamId) -> Vec<f64> {
    let mut rng = stream.rng();
    let scale = 1.0 / (n as f64).sqrt();
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            scale * 2f64.sqrt() * z
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let dof = (n - i) as f64;
            scale * ChiSquared::new(dof).expect("positive dof").sample(&mut rng).sqrt()
        })
        .collect();
    tridiagonal_smallest(&diag, &off, k.min(n))
}

/// Number of eigenvalues below `x` (Sturm count via the `LDL^T` pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = diag[0] - x;
    if d < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let denom = if d == 0.0 { f64::EPSILON * (off[i - 1].abs() + 1e-300) } else { d };
        d = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Ascending smallest `k` eigenvalues of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_smallest(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    let n = diag.len();
    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (0..k)
        .map(|j| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if sturm_count(diag, off, mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 2.0 * f64::EPSILON * mid.abs().max(1e-300) {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}
