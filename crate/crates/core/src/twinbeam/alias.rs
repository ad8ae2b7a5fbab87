//! Walker/Vose alias table drawing one `u64` per sample.

use rand::Rng;

use crate::error::{QpiError, Result};

#[derive(Debug, Clone)]
pub struct AliasTable {
    /// Acceptance threshold for column i, scaled to 2^32.
    thresh: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        if n == 0 || n > u32::MAX as usize || !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0))
        {
            return Err(QpiError::Numerical(
                "alias table needs finite non-negative weights".into(),
            ));
        }
        let mut p: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| p[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            alias[s] = l as u32;
            p[l] -= 1.0 - p[s];
            if p[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for &i in small.iter().chain(&large) {
            p[i] = 1.0;
        }
        let scale = (1u64 << 32) as f64;
        let thresh = p
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * scale).round() as u64)
            .collect();
        Ok(Self { thresh, alias })
    }

    #[inline]
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let r = rng.next_u64();
        let i = (((r >> 32) * self.thresh.len() as u64) >> 32) as usize;
        if (r & 0xffff_ffff) < self.thresh[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }

    /// Exact probability of each outcome.
    #[cfg(test)]
    fn probabilities(&self) -> Vec<f64> {
        let n = self.thresh.len() as f64;
        let mut out = vec![0.0; self.thresh.len()];
        for (i, (&t, &a)) in self.thresh.iter().zip(&self.alias).enumerate() {
            let acc = t as f64 / (1u64 << 32) as f64;
            out[i] += acc / n;
            out[a as usize] += (1.0 - acc) / n;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_weights() {
        let w = [0.1, 3.0, 0.0, 2.5, 0.7, 1e-6];
        let t = AliasTable::new(&w).unwrap();
        let s: f64 = w.iter().sum();
        for (p, wi) in t.probabilities().iter().zip(&w) {
            assert!((p - wi / s).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(AliasTable::new(&[]).is_err());
        assert!(AliasTable::new(&[0.0, 0.0]).is_err());
        assert!(AliasTable::new(&[1.0, f64::NAN]).is_err());
    }
}
