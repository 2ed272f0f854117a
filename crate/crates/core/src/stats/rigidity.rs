//! Rigidity of sampled spectra around the classical locations.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub n: usize,
    pub i0: usize,
    /// Indices `i = 1..=quantiles.len()` that were tested.
    pub indices: usize,
    /// Per trial: `max_i |lambda_{i_0+i-1} - gamma_i| i^{1/3} N^{2/3}`.
    pub per_trial_max: Vec<f64>,
    /// Per trial: the index attaining the maximum.
    pub per_trial_argmax: Vec<usize>,
    pub envelope: f64,
    pub fraction_below: f64,
}

/// `quantiles[i - 1] = gamma_i`; `i0` is 1-based and the spectra must hold
/// at least `i0 + quantiles.len() - 1` values (shorter spectra count as a
/// violation with an infinite deviation).
pub fn rigidity_report(spectra: &[Vec<f64>], quantiles: &[f64], i0: usize, envelope: f64) -> RigidityReport {
    let mut per_trial_max = Vec::with_capacity(spectra.len());
    let mut per_trial_argmax = Vec::with_capacity(spectra.len());
    let n = spectra.first().map_or(0, Vec::len);
    for s in spectra {
        let scale = (s.len() as f64).powf(2.0 / 3.0);
        if i0 == 0 || s.len() + 1 < i0 + quantiles.len() {
            per_trial_max.push(f64::INFINITY);
            per_trial_argmax.push(0);
            continue;
        }
        let (mut worst, mut at) = (0.0f64, 1);
        for (q, g) in quantiles.iter().enumerate() {
            let i = q + 1;
            let d = (s[i0 + q - 1] - g).abs() * (i as f64).cbrt() * scale;
            if d > worst || d.is_nan() {
                worst = d;
                at = i;
            }
        }
        per_trial_max.push(worst);
        per_trial_argmax.push(at);
    }
    let below = per_trial_max.iter().filter(|&&d| d <= envelope).count();
    let fraction_below = if spectra.is_empty() { 0.0 } else { below as f64 / spectra.len() as f64 };
    RigidityReport { n, i0, indices: quantiles.len(), per_trial_max, per_trial_argmax, envelope, fraction_below }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quantiles_have_zero_deviation() {
        let q: Vec<f64> = (1..=10).map(|i| -2.0 + 0.1 * i as f64).collect();
        let r = rigidity_report(&[q.clone(), q.clone()], &q[..5], 1, 1.0);
        assert_eq!(r.per_trial_max, vec![0.0, 0.0]);
        assert_eq!(r.fraction_below, 1.0);
    }

    #[test]
    fn deviation_is_weighted_by_index() {
        let q = vec![0.0, 1.0, 2.0, 3.0];
        let mut s = q.clone();
        s[3] += 0.5;
        let r = rigidity_report(&[s], &q, 1, 0.0);
        let expect = 0.5 * 4f64.cbrt() * 4f64.powf(2.0 / 3.0);
        assert!((r.per_trial_max[0] - expect).abs() < 1e-12);
        assert_eq!(r.per_trial_argmax[0], 4);
        assert_eq!(r.fraction_below, 0.0);
    }

    #[test]
    fn shift_invariance_and_offset_index() {
        let q = vec![0.1, 0.25, 0.4];
        let s = vec![-5.0, 0.12, 0.22, 0.43, 9.0];
        let a = rigidity_report(&[s.clone()], &q, 2, 1.0);
        let shifted: Vec<f64> = s.iter().map(|x| x + 3.0).collect();
        let qs: Vec<f64> = q.iter().map(|x| x + 3.0).collect();
        let b = rigidity_report(&[shifted], &qs, 2, 1.0);
        assert!((a.per_trial_max[0] - b.per_trial_max[0]).abs() < 1e-12);
        let short = rigidity_report(&[vec![0.0]], &q, 1, 1.0);
        assert!(short.per_trial_max[0].is_infinite());
    }
}
