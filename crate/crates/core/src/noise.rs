//! Seeded Brownian paths on a dyadic tree.
//!
//! Every bridge midpoint draws its Gaussian from a generator keyed by
//! `(seed, level, index)`, so a value never depends on which other values were
//! requested first. Levels up to `base_level` are stored; deeper nodes are
//! recomputed by descending from the stored level, which keeps paths immutable
//! and shareable between threads.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::scalar::{pow2_neg, Real};

/// Deepest refinement of sampled paths, capped by the scalar's dyadic resolution.
pub const DEFAULT_MAX_LEVEL: u32 = 52;

/// Largest level whose values `sample_path` will store densely.
pub const MAX_STORED_LEVEL: u32 = 26;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal variate attached to dyadic node `(level, index)` of `seed`.
///
/// The generator state is an injective function of the triple, so distinct
/// nodes never share a draw.
pub fn keyed_normal(seed: u64, level: u32, index: u64) -> f64 {
    debug_assert!(level < 64 && index < (1 << 56));
    let node = ((level as u64) << 56) | index;
    let a = splitmix(seed ^ 0x6A09_E667_F3BC_C908);
    let b = splitmix(node ^ 0xBB67_AE85_84CA_A73B);
    let words = [a, b, splitmix(a ^ b.rotate_left(17)), splitmix(b ^ a.rotate_left(41))];
    let mut bytes = [0u8; 32];
    for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    Xoshiro256PlusPlus::from_seed(bytes).sample(StandardNormal)
}

/// A continuous driving function on `[0, horizon]` seen through its dyadic tree.
///
/// Node `(level, index)` sits at time `index * horizon * 2^-level`; interval
/// `(level, index)` spans nodes `index` and `index + 1` of that level.
pub trait DrivingNoise<T: Real>: Sync {
    fn horizon(&self) -> T;

    /// Deepest level the solvers may refine to.
    fn max_level(&self) -> u32;

    fn node(&self, level: u32, index: u64) -> T;

    /// Deviation of the midpoint of interval `(level, index)` from its chord.
    fn bridge_offset(&self, level: u32, index: u64) -> T;

    /// Value at the midpoint of interval `(level, index)` given its endpoint values.
    fn midpoint(&self, level: u32, index: u64, left: T, right: T) -> T {
        (left + right) * T::lit(0.5) + self.bridge_offset(level, index)
    }

    #[inline]
    fn node_time(&self, level: u32, index: u64) -> T {
        self.horizon() * pow2_neg::<T>(level) * T::from_u64(index).unwrap()
    }

    /// Piecewise-linear value at an arbitrary time, interpolated at `max_level`.
    fn interpolate(&self, t: T) -> T {
        let level = self.max_level();
        let last = 1u64 << level;
        let step = self.horizon() * pow2_neg::<T>(level);
        let i = floor_index(t, step, last);
        let t0 = self.node_time(level, i);
        let v0 = self.node(level, i);
        if t == t0 || i == last {
            return v0;
        }
        let v1 = self.node(level, i + 1);
        v0 + (v1 - v0) * ((t - t0) / step)
    }
}

/// Largest `i <= last` with `i * step <= t`, robust to rounding in `t / step`.
pub(crate) fn floor_index<T: Real>(t: T, step: T, last: u64) -> u64 {
    let q = (t / step).round().to_u64().unwrap_or(0).min(last);
    if step * T::from_u64(q).unwrap() <= t || q == 0 {
        q
    } else {
        q - 1
    }
}

/// Brownian motion sample with lazily refined dyadic values.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath<T> {
    seed: u64,
    horizon: T,
    base_level: u32,
    max_level: u32,
    values: Vec<T>,
    bridge_sd: Vec<T>,
}

impl<T: Real> BrownianPath<T> {
    /// Samples a path on `[0, horizon]` storing the `2^base_level + 1` nodes of `base_level`.
    pub fn sample(seed: u64, horizon: T, base_level: u32) -> Result<Self> {
        Self::with_max_level(seed, horizon, base_level, DEFAULT_MAX_LEVEL.min(T::MAX_DYADIC_LEVEL))
    }

    pub fn with_max_level(seed: u64, horizon: T, base_level: u32, max_level: u32) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive and finite, got {horizon}")));
        }
        if max_level > T::MAX_DYADIC_LEVEL {
            return Err(Error::invalid(format!(
                "max_level {max_level} exceeds {} for this scalar type",
                T::MAX_DYADIC_LEVEL
            )));
        }
        if base_level > max_level || base_level > MAX_STORED_LEVEL {
            return Err(Error::invalid(format!(
                "base_level {base_level} must be <= min(max_level {max_level}, {MAX_STORED_LEVEL})"
            )));
        }
        let bridge_sd = (0..=max_level).map(|l| (horizon * pow2_neg::<T>(l)).sqrt() * T::lit(0.5)).collect();
        let mut path = BrownianPath { seed, horizon, base_level, max_level, values: Vec::new(), bridge_sd };
        path.values = path.fill_level(base_level);
        Ok(path)
    }

    fn fill_level(&self, level: u32) -> Vec<T> {
        let n = 1usize << level;
        let mut v = vec![T::zero(); n + 1];
        v[n] = self.horizon.sqrt() * T::lit(keyed_normal(self.seed, 0, 1));
        for l in 0..level {
            let stride = n >> l;
            for k in 0..(1usize << l) {
                let left = k * stride;
                v[left + stride / 2] = self.bridge(l, k as u64, v[left], v[left + stride]);
            }
        }
        v
    }

    #[inline]
    fn bridge(&self, level: u32, index: u64, left: T, right: T) -> T {
        (left + right) * T::lit(0.5)
            + self.bridge_sd[level as usize] * T::lit(keyed_normal(self.seed, level + 1, 2 * index + 1))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn base_level(&self) -> u32 {
        self.base_level
    }

    /// Stored node values of `base_level`.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Same path with a deeper stored level; every value is unchanged.
    pub fn refined(&self, level: u32) -> Result<Self> {
        if level <= self.base_level {
            return Ok(self.clone());
        }
        Self::with_max_level(self.seed, self.horizon, level, self.max_level)
    }

    /// `B` at the node of `level` nearest at or below `t`.
    pub fn value_at(&self, t: T, level: u32) -> Result<T> {
        self.check_time(t)?;
        if level > self.max_level {
            return Err(Error::invalid(format!("level {level} exceeds max_level {}", self.max_level)));
        }
        let step = self.horizon * pow2_neg::<T>(level);
        Ok(self.node(level, floor_index(t, step, 1u64 << level)))
    }

    /// `max |B_r - B_s|` over nodes `r` of `level` in `[s, t]`.
    pub fn sup_abs_increment(&self, s: T, t: T, level: u32) -> Result<T> {
        if s > t {
            return Err(Error::invalid(format!("s = {s} exceeds t = {t}")));
        }
        self.check_time(t)?;
        let b_s = self.value_at(s, level)?;
        let step = self.horizon * pow2_neg::<T>(level);
        let last = 1u64 << level;
        let hi = floor_index(t, step, last);
        let mut lo = floor_index(s, step, last);
        if self.node_time(level, lo) < s {
            lo += 1;
        }
        Ok((lo..=hi).fold(T::zero(), |m, i| m.max((self.node(level, i) - b_s).abs())))
    }

    fn check_time(&self, t: T) -> Result<()> {
        if t < T::zero() || t > self.horizon || t.is_nan() {
            return Err(Error::invalid(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    /// Writes the tree down to `level`: seed, horizon, level, then the nodes new at each level in order.
    pub fn write_dump<W: Write>(&self, mut out: W, level: u32) -> Result<()> {
        if level > self.max_level || level > MAX_STORED_LEVEL {
            return Err(Error::invalid(format!("dump level {level} too deep")));
        }
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&self.horizon.as_f64().to_le_bytes())?;
        out.write_all(&level.to_le_bytes())?;
        let dense = self.refined(level)?;
        let n = 1usize << level;
        for l in 0..=level {
            let stride = n >> l;
            let nodes: Box<dyn Iterator<Item = usize>> = if l == 0 {
                Box::new([0, n].into_iter())
            } else {
                Box::new((0..(1usize << (l - 1))).map(move |k| (2 * k + 1) * stride))
            };
            for i in nodes {
                out.write_all(&dense.values[i].as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Contents of a path dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDump {
    pub seed: u64,
    pub horizon: f64,
    pub level: u32,
    /// Level-major: both endpoints, then the odd nodes of each finer level.
    pub values: Vec<f64>,
}

pub fn read_dump<R: Read>(mut input: R) -> Result<PathDump> {
    let mut b8 = [0u8; 8];
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    input.read_exact(&mut b8)?;
    let horizon = f64::from_le_bytes(b8);
    input.read_exact(&mut b4)?;
    let level = u32::from_le_bytes(b4);
    if level > MAX_STORED_LEVEL {
        return Err(Error::invalid(format!("dump level {level} too deep")));
    }
    let count = (1usize << level) + 1;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    Ok(PathDump { seed, horizon, level, values })
}

impl<T: Real> DrivingNoise<T> for BrownianPath<T> {
    fn horizon(&self) -> T {
        self.horizon
    }

    fn max_level(&self) -> u32 {
        self.max_level
    }

    fn node(&self, mut level: u32, mut index: u64) -> T {
        while level > self.base_level && index % 2 == 0 {
            level -= 1;
            index /= 2;
        }
        if level <= self.base_level {
            return self.values[(index << (self.base_level - level)) as usize];
        }
        let mut cur = index >> (level - self.base_level);
        let (mut left, mut right) = (self.values[cur as usize], self.values[cur as usize + 1]);
        let mut l = self.base_level;
        loop {
            let mid = self.bridge(l, cur, left, right);
            l += 1;
            if l == level {
                return mid;
            }
            let child = index >> (level - l);
            if child == 2 * cur {
                right = mid;
            } else {
                left = mid;
            }
            cur = child;
        }
    }

    fn bridge_offset(&self, level: u32, index: u64) -> T {
        if level < self.base_level {
            let stride = 1usize << (self.base_level - level);
            let left = index as usize * stride;
            let v = &self.values;
            v[left + stride / 2] - (v[left] + v[left + stride]) * T::lit(0.5)
        } else {
            self.bridge_sd[level as usize] * T::lit(keyed_normal(self.seed, level + 1, 2 * index + 1))
        }
    }

    fn midpoint(&self, level: u32, index: u64, left: T, right: T) -> T {
        if level < self.base_level {
            let stride = 1usize << (self.base_level - level);
            self.values[index as usize * stride + stride / 2]
        } else {
            self.bridge(level, index, left, right)
        }
    }
}

/// Time reversal `t ↦ P(T) − P(T − t)` of a driving function, for `t ∈ [0, T]`.
#[derive(Debug, Clone)]
pub struct Reversed<'a, T, N> {
    inner: &'a N,
    span: T,
    end: T,
    /// `Some(j)` when `T = horizon * 2^-j`, so view nodes are nodes of the inner tree.
    shift: Option<u32>,
    max_level: u32,
}

/// View of `noise` reversed from time `t_rev`.
pub fn reversed<T: Real, N: DrivingNoise<T>>(noise: &N, t_rev: T) -> Result<Reversed<'_, T, N>> {
    let horizon = noise.horizon();
    if !(t_rev > T::zero()) || t_rev > horizon {
        return Err(Error::invalid(format!("reversal time {t_rev} outside (0, {horizon}]")));
    }
    let ratio = (horizon / t_rev).as_f64();
    let j = ratio.log2().round();
    let shift =
        (j >= 0.0 && (j as u32) < noise.max_level() && t_rev == horizon * pow2_neg::<T>(j as u32)).then_some(j as u32);
    let end = match shift {
        Some(j) => noise.node(j, 1),
        None => noise.interpolate(t_rev),
    };
    Ok(Reversed { inner: noise, span: t_rev, end, shift, max_level: noise.max_level() - shift.unwrap_or(0) })
}

impl<T: Real, N: DrivingNoise<T>> DrivingNoise<T> for Reversed<'_, T, N> {
    fn horizon(&self) -> T {
        self.span
    }

    fn max_level(&self) -> u32 {
        self.max_level
    }

    fn node(&self, level: u32, index: u64) -> T {
        let end = self.end;
        match self.shift {
            Some(j) => end - self.inner.node(level + j, (1u64 << level) - index),
            None => {
                let t = self.node_time(level, index);
                end - self.inner.interpolate(self.horizon() - t)
            }
        }
    }

    fn bridge_offset(&self, level: u32, index: u64) -> T {
        match self.shift {
            Some(j) => -self.inner.bridge_offset(level + j, (1u64 << level) - index - 1),
            None => {
                let mid = self.node(level + 1, 2 * index + 1);
                mid - (self.node(level, index) + self.node(level, index + 1)) * T::lit(0.5)
            }
        }
    }

    fn midpoint(&self, level: u32, index: u64, left: T, right: T) -> T {
        match self.shift {
            Some(_) => (left + right) * T::lit(0.5) + self.bridge_offset(level, index),
            None => self.node(level + 1, 2 * index + 1),
        }
    }
}

/// The driving function `−B`.
#[derive(Debug, Clone)]
pub struct Negated<'a, N>(pub &'a N);

impl<T: Real, N: DrivingNoise<T>> DrivingNoise<T> for Negated<'_, N> {
    fn horizon(&self) -> T {
        self.0.horizon()
    }

    fn max_level(&self) -> u32 {
        self.0.max_level()
    }

    fn node(&self, level: u32, index: u64) -> T {
        -self.0.node(level, index)
    }

    fn bridge_offset(&self, level: u32, index: u64) -> T {
        -self.0.bridge_offset(level, index)
    }

    fn midpoint(&self, level: u32, index: u64, left: T, right: T) -> T {
        -self.0.midpoint(level, index, -left, -right)
    }
}

/// `B ≡ 0`: the noiseless flow.
#[derive(Debug, Clone, Copy)]
pub struct ZeroNoise<T> {
    pub horizon: T,
    pub max_level: u32,
}

impl<T: Real> ZeroNoise<T> {
    pub fn new(horizon: T) -> Self {
        ZeroNoise { horizon, max_level: DEFAULT_MAX_LEVEL.min(T::MAX_DYADIC_LEVEL) }
    }
}

impl<T: Real> DrivingNoise<T> for ZeroNoise<T> {
    fn horizon(&self) -> T {
        self.horizon
    }

    fn max_level(&self) -> u32 {
        self.max_level
    }

    fn node(&self, _: u32, _: u64) -> T {
        T::zero()
    }

    fn bridge_offset(&self, _: u32, _: u64) -> T {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyed_normal_is_a_pure_function() {
        assert_eq!(keyed_normal(42, 3, 5), keyed_normal(42, 3, 5));
        assert_ne!(keyed_normal(42, 3, 5), keyed_normal(42, 3, 7));
        assert_ne!(keyed_normal(42, 3, 5), keyed_normal(43, 3, 5));
        assert_ne!(keyed_normal(42, 3, 5), keyed_normal(42, 4, 5));
    }

    #[test]
    fn stored_and_descended_values_agree() {
        let coarse = BrownianPath::<f64>::sample(9, 1.0, 2).unwrap();
        let fine = coarse.refined(9).unwrap();
        for i in 0..=512u64 {
            assert_eq!(coarse.node(9, i), fine.values()[i as usize]);
        }
    }

    #[test]
    fn midpoint_matches_node() {
        let p = BrownianPath::<f64>::sample(3, 2.0, 3).unwrap();
        for level in 0..12u32 {
            for index in [0u64, 1, (1 << level) - 1] {
                if index >= 1 << level {
                    continue;
                }
                let m = p.midpoint(level, index, p.node(level, index), p.node(level, index + 1));
                assert_eq!(m, p.node(level + 1, 2 * index + 1));
            }
        }
    }
}
