//! Streaming sample moments, mergeable in a fixed order, and the shared
//! exponential sampler.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Inverse-CDF exponential draw with rate `c`.
pub(crate) fn exponential(rng: &mut ChaCha8Rng, c: f64) -> f64 {
    let u = 1.0 - rng.gen::<f64>();
    -u.ln() / c
}

/// Running mean and sum of squared deviations per entry.
#[derive(Clone, Debug)]
pub(crate) struct Moments {
    pub(crate) count: f64,
    pub(crate) mean: Vec<f64>,
    pub(crate) m2: Vec<f64>,
}

impl Moments {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub(crate) fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    pub(crate) fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let n = self.count + other.count;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * other.count / n;
            self.m2[i] += other.m2[i] + d * d * self.count * other.count / n;
        }
        self.count = n;
    }

    /// Standard error of the mean of entry `i`; zero below two samples.
    pub(crate) fn std_error(&self, i: usize) -> f64 {
        if self.count < 2.0 {
            return 0.0;
        }
        (self.m2[i] / (self.count - 1.0) / self.count).sqrt()
    }

    pub(crate) fn std_errors(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.std_error(i)).collect()
    }
}
