//! Brownian noise ledger shared between coupled particle systems.
//!
//! Base increments over `[k dt, (k+1) dt]` are addressed by
//! `(label, k)`; finer values come from a dyadic Brownian bridge whose
//! midpoint normals are addressed by their position in the bisection tree.
//! Two systems that query the same ledger therefore see the same Brownian
//! paths, whatever substeps each of them takes.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::rng::{addressed_normal, addressed_normals, StreamId};

const MAGIC: &[u8; 8] = b"DBMNOISE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseLedger {
    key: [u8; 32],
    stream: StreamId,
    dt_base: f64,
    /// 0 for a noiseless ledger (pure drift integration).
    scale: f64,
    recorded: BTreeMap<(i64, u64), f64>,
    nodes: NodeCache,
}

/// Memoised bridge values at tree nodes, keyed by `(label, step, node)`.
/// Values are pure functions of the address, so the cache never affects results.
#[derive(Debug, Clone, Default)]
struct NodeCache(HashMap<(i64, u64, u64), f64>);

impl PartialEq for NodeCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

const NODE_CACHE_LIMIT: usize = 1 << 22;

/// Deepest bisection level of a base step.
pub const MAX_LEVEL: u32 = 48;

impl NoiseLedger {
    pub fn new(stream: StreamId, dt_base: f64) -> Result<Self> {
        if !(dt_base > 0.0 && dt_base.is_finite()) {
            return Err(Error::Config(format!("base step {dt_base} must be positive")));
        }
        Ok(Self { key: stream.subkey(), stream, dt_base, scale: 1.0, recorded: BTreeMap::new(), nodes: NodeCache::default() })
    }

    /// A ledger that returns zero increments.
    pub fn silent(stream: StreamId, dt_base: f64) -> Result<Self> {
        let mut l = Self::new(stream, dt_base)?;
        l.scale = 0.0;
        Ok(l)
    }

    pub fn dt_base(&self) -> f64 {
        self.dt_base
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn is_silent(&self) -> bool {
        self.scale == 0.0
    }

    fn address(label: i64, step: u64) -> u64 {
        let lab = (label + (1i64 << 31)) as u64;
        assert!(lab < 1 << 32 && step < 1 << 32, "ledger address out of range");
        (lab << 32) | step
    }

    fn node_normal(&self, label: i64, step: u64, node: u64) -> f64 {
        addressed_normal(&self.key, Self::address(label, step), node)
    }

    /// Standard Brownian increment over base step `step` for `label`.
    pub fn base_increment(&mut self, label: i64, step: u64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        if let Some(&x) = self.recorded.get(&(label, step)) {
            return x;
        }
        let x = self.dt_base.sqrt() * self.node_normal(label, step, 1);
        self.recorded.insert((label, step), x);
        x
    }

    /// `B(k dt + j dt / 2^level) - B(k dt)` for `0 <= j <= 2^level`.
    pub fn bridge_value(&mut self, label: i64, step: u64, level: u32, j: u64) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        assert!(level <= MAX_LEVEL && j <= 1 << level);
        let total = self.base_increment(label, step);
        if j == 0 {
            return 0.0;
        }
        if j == 1 << level {
            return total;
        }
        // descend the bisection tree keeping the bracketing dyadic points
        let (mut left, mut right) = (0.0, total);
        let mut lo = 0u64;
        let target = u128::from(j);
        for depth in 1..=level {
            let width = self.dt_base / (1u64 << (depth - 1)) as f64;
            let mid_index = 2 * lo + 1;
            let node = (1u64 << depth) + mid_index;
            let mid = match self.nodes.0.get(&(label, step, node)) {
                Some(&m) => m,
                None => {
                    let m = 0.5 * (left + right) + 0.5 * width.sqrt() * self.node_normal(label, step, node);
                    if self.nodes.0.len() >= NODE_CACHE_LIMIT {
                        self.nodes.0.clear();
                    }
                    self.nodes.0.insert((label, step, node), m);
                    m
                }
            };
            let lhs = target << depth;
            let rhs = u128::from(mid_index) << level;
            match lhs.cmp(&rhs) {
                std::cmp::Ordering::Equal => return mid,
                std::cmp::Ordering::Less => {
                    right = mid;
                    lo *= 2;
                }
                std::cmp::Ordering::Greater => {
                    left = mid;
                    lo = mid_index;
                }
            }
        }
        unreachable!("dyadic point {j}/2^{level} not reached")
    }

    /// Increment over `[j, j+1] * dt / 2^level` inside base step `step`.
    pub fn increment(&mut self, label: i64, step: u64, level: u32, j: u64) -> f64 {
        self.bridge_value(label, step, level, j + 1) - self.bridge_value(label, step, level, j)
    }

    /// Values `B(k dt + j dt / 2^level) - B(k dt)` for all `j = 0..=2^level`,
    /// identical to [`NoiseLedger::bridge_value`] but generated in one pass.
    pub fn bridge_path(&mut self, label: i64, step: u64, level: u32) -> Vec<f64> {
        assert!(level <= MAX_LEVEL);
        let len = (1usize << level) + 1;
        if self.scale == 0.0 {
            return vec![0.0; len];
        }
        let total = self.base_increment(label, step);
        let mut path = vec![0.0; len];
        path[len - 1] = total;
        if level == 0 {
            return path;
        }
        let normals = addressed_normals(&self.key, Self::address(label, step), 1usize << (level + 1));
        for depth in 1..=level {
            let stride = 1usize << (level - depth);
            let width = self.dt_base / (1u64 << (depth - 1)) as f64;
            for k in (1..1usize << depth).step_by(2) {
                let pos = k * stride;
                let mid = 0.5 * (path[pos - stride] + path[pos + stride]);
                path[pos] = mid + 0.5 * width.sqrt() * normals[(1usize << depth) + k];
            }
        }
        path
    }

    pub fn recorded_len(&self) -> usize {
        self.recorded.len()
    }

    /// Binary form: magic, version, particle count, `dt_base`, stream
    /// address, key, entry count, then `(label, step, value)` triples, little endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let labels: std::collections::BTreeSet<i64> = self.recorded.keys().map(|k| k.0).collect();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(labels.len() as u64).to_le_bytes())?;
        w.write_all(&self.dt_base.to_le_bytes())?;
        w.write_all(&self.scale.to_le_bytes())?;
        w.write_all(&self.stream.master_seed.to_le_bytes())?;
        w.write_all(&self.stream.trial.to_le_bytes())?;
        w.write_all(&[self.stream.role as u8])?;
        w.write_all(&self.key)?;
        w.write_all(&(self.recorded.len() as u64).to_le_bytes())?;
        for (&(label, step), &x) in &self.recorded {
            w.write_all(&label.to_le_bytes())?;
            w.write_all(&step.to_le_bytes())?;
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::SchemaMismatch("not a noise ledger".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != VERSION {
            return Err(Error::SchemaMismatch(format!("noise ledger version {version}, expected {VERSION}")));
        }
        let _particles = u64::from_le_bytes(read_array(&mut r)?);
        let dt_base = f64::from_le_bytes(read_array(&mut r)?);
        let scale = f64::from_le_bytes(read_array(&mut r)?);
        let master_seed = u64::from_le_bytes(read_array(&mut r)?);
        let trial = u64::from_le_bytes(read_array(&mut r)?);
        let role_byte = read_array::<1, _>(&mut r)?[0];
        let role = crate::rng::Role::from_byte(role_byte)
            .ok_or_else(|| Error::SchemaMismatch(format!("unknown stream role {role_byte}")))?;
        let key: [u8; 32] = read_array(&mut r)?;
        let count = u64::from_le_bytes(read_array(&mut r)?);
        let mut recorded = BTreeMap::new();
        for _ in 0..count {
            let label = i64::from_le_bytes(read_array(&mut r)?);
            let step = u64::from_le_bytes(read_array(&mut r)?);
            let x = f64::from_le_bytes(read_array(&mut r)?);
            recorded.insert((label, step), x);
        }
        let stream = StreamId { master_seed, trial, role };
        if stream.subkey() != key {
            return Err(Error::SchemaMismatch("ledger key does not match its stream address".into()));
        }
        Ok(Self { key, stream, dt_base, scale, recorded, nodes: NodeCache::default() })
    }
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b)?;
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, Role};

    fn ledger() -> NoiseLedger {
        NoiseLedger::new(derive_stream(11, 0, Role::Brownian), 0.01).unwrap()
    }

    #[test]
    fn refinement_is_consistent_across_levels() {
        let mut l = ledger();
        for level in 0..6u32 {
            let sum: f64 = (0..1u64 << level).map(|j| l.increment(3, 5, level, j)).sum();
            assert!((sum - l.base_increment(3, 5)).abs() < 1e-14);
        }
        // a coarse point equals the same point seen at a finer level
        assert_eq!(l.bridge_value(3, 5, 2, 1), l.bridge_value(3, 5, 5, 8));
        assert_eq!(l.bridge_value(3, 5, 1, 1), l.bridge_value(3, 5, 4, 8));
    }

    #[test]
    fn bulk_path_matches_pointwise_bridge() {
        let mut l = ledger();
        let path = l.bridge_path(-2, 7, 5);
        for (j, x) in path.iter().enumerate() {
            assert_eq!(*x, l.bridge_value(-2, 7, 5, j as u64));
        }
    }

    #[test]
    fn increments_have_brownian_variance() {
        let mut l = ledger();
        let level = 3;
        let mut s2 = 0.0;
        let mut count = 0.0;
        for label in 0..400i64 {
            for j in 0..8u64 {
                let x = l.increment(label, 0, level, j);
                s2 += x * x;
                count += 1.0;
            }
        }
        let var = s2 / count;
        let expect = 0.01 / 8.0;
        assert!((var / expect - 1.0).abs() < 0.08, "variance ratio {}", var / expect);
    }

    #[test]
    fn serialization_round_trip() {
        let mut l = ledger();
        for label in -3..4 {
            l.base_increment(label, 2);
        }
        let mut buf = Vec::new();
        l.write_to(&mut buf).unwrap();
        let back = NoiseLedger::read_from(buf.as_slice()).unwrap();
        assert_eq!(l, back);
        buf[8] = 9;
        assert!(matches!(NoiseLedger::read_from(buf.as_slice()), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn silent_ledger_is_zero() {
        let mut l = NoiseLedger::silent(derive_stream(1, 0, Role::Brownian), 0.1).unwrap();
        assert_eq!(l.increment(0, 0, 3, 2), 0.0);
    }
}
