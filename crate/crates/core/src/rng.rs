//! Counter-based normal variates and recorded Brownian paths.
//!
//! Every Gaussian is a pure function of `(master_seed, sample, mode, step)`,
//! so paths are reproducible under any schedule and can be regenerated or
//! replayed by a second backend.

use crate::error::{Result, SacError};

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one 64-bit key.
pub fn hash_words(words: &[u64]) -> u64 {
    let mut h = 0x6a09_e667_f3bc_c909u64;
    for &w in words {
        h = splitmix64(h ^ splitmix64(w));
    }
    h
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1]: never zero, so the logarithm below is finite
    ((bits >> 11) as f64 + 1.0) / (1u64 << 53) as f64
}

/// Identifies one independent noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub sample: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, sample: u64) -> Self {
        StreamKey {
            master_seed,
            sample,
        }
    }

    /// Standard normal variate for `(mode, step)`.
    pub fn normal(&self, mode: u64, step: u64) -> f64 {
        let base = hash_words(&[self.master_seed, self.sample, mode, step]);
        let u1 = unit_open(splitmix64(base ^ 0x5851_f42d_4c95_7f2d));
        let u2 = unit_open(splitmix64(base ^ 0x1405_7b7e_f767_814f));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Brownian increments `ΔW_k` on a uniform time grid, stored step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    n_modes: usize,
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn generate(key: StreamKey, n_modes: usize, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SacError::Config(format!("dt must be positive, got {dt}")));
        }
        let sd = dt.sqrt();
        let mut increments = Vec::with_capacity(steps * n_modes);
        for s in 0..steps {
            for k in 0..n_modes {
                increments.push(sd * key.normal(k as u64, s as u64));
            }
        }
        Ok(BrownianPath {
            dt,
            n_modes,
            increments,
        })
    }

    pub fn from_increments(dt: f64, n_modes: usize, increments: Vec<f64>) -> Result<Self> {
        if n_modes == 0 && !increments.is_empty() {
            return Err(SacError::Contract("increments without modes".into()));
        }
        if n_modes > 0 && increments.len() % n_modes != 0 {
            return Err(SacError::Contract(format!(
                "{} increments do not split into {n_modes} modes",
                increments.len()
            )));
        }
        Ok(BrownianPath {
            dt,
            n_modes,
            increments,
        })
    }

    /// A path without modes (deterministic runs).
    pub fn silent(dt: f64) -> Self {
        BrownianPath {
            dt,
            n_modes: 0,
            increments: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Number of steps, or `None` for a mode-free path (any length).
    pub fn steps(&self) -> Option<usize> {
        (self.n_modes > 0).then(|| self.increments.len() / self.n_modes)
    }

    pub fn step(&self, s: usize) -> &[f64] {
        &self.increments[s * self.n_modes..(s + 1) * self.n_modes]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Sums consecutive blocks of `factor` steps: the same path sampled on
    /// a grid with step `factor·dt`.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(SacError::Config("coarsening factor must be positive".into()));
        }
        let Some(steps) = self.steps() else {
            return Ok(BrownianPath::silent(self.dt * factor as f64));
        };
        if steps % factor != 0 {
            return Err(SacError::Contract(format!(
                "{steps} steps are not divisible by {factor}"
            )));
        }
        let n = self.n_modes;
        let mut out = vec![0.0; (steps / factor) * n];
        for s in 0..steps {
            let c = s / factor;
            for k in 0..n {
                out[c * n + k] += self.increments[s * n + k];
            }
        }
        Ok(BrownianPath {
            dt: self.dt * factor as f64,
            n_modes: n,
            increments: out,
        })
    }

    /// Sum of increments over steps `[from, to)`, per mode.
    pub fn section_sum(&self, from: usize, to: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_modes];
        for s in from..to {
            for (o, v) in out.iter_mut().zip(self.step(s)) {
                *o += v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normals_are_pure_functions_of_the_counter() {
        let k = StreamKey::new(42, 3);
        assert_eq!(k.normal(1, 7), k.normal(1, 7));
        assert_ne!(k.normal(1, 7), k.normal(1, 8));
        assert_ne!(k.normal(1, 7), StreamKey::new(42, 4).normal(1, 7));
        assert_ne!(k.normal(0, 7), k.normal(1, 7));
    }

    #[test]
    fn increment_moments() {
        let dt = 1e-3;
        let n = 100_000;
        let path = BrownianPath::generate(StreamKey::new(7, 0), 1, dt, n).unwrap();
        let mean = path.increments().iter().sum::<f64>() / n as f64;
        let var = path.increments().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 3.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() < 0.05, "variance ratio {}", var / dt);
        let k4 = path.increments().iter().map(|x| x.powi(4)).sum::<f64>() / n as f64 / (dt * dt);
        assert!((k4 - 3.0).abs() < 0.15, "fourth moment {k4}");
    }

    #[test]
    fn coarsening_preserves_sums() {
        let path = BrownianPath::generate(StreamKey::new(1, 1), 2, 0.01, 12).unwrap();
        let c = path.coarsen(4).unwrap();
        assert_eq!(c.steps(), Some(3));
        assert!((c.dt() - 0.04).abs() < 1e-15);
        let total: f64 = path.section_sum(0, 12)[1];
        let total_c: f64 = c.section_sum(0, 3)[1];
        assert!((total - total_c).abs() < 1e-14);
        assert!(path.coarsen(5).is_err());
        assert!(BrownianPath::generate(StreamKey::new(1, 1), 1, 0.0, 3).is_err());
    }
}
