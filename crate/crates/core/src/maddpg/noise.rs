//! Ornstein-Uhlenbeck exploration noise.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng};

#[derive(Debug, Clone)]
pub struct OuNoise {
    x: Vec<f64>,
    pub mu: f64,
    pub theta: f64,
    pub sigma: f64,
    pub dt: f64,
    rng: SimRng,
}

impl OuNoise {
    pub fn new(dim: usize, mu: f64, theta: f64, sigma: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(mu.is_finite() && theta.is_finite() && theta >= 0.0 && sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid(format!("OU parameters out of range: mu={mu}, theta={theta}, sigma={sigma}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("OU time step must be positive, got {dt}")));
        }
        Ok(Self { x: vec![mu; dim], mu, theta, sigma, dt, rng: stream_rng(seed, 0) })
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    /// Returns the process to its mean.
    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = self.mu);
    }

    /// `x ← x + θ(μ − x)dt + σ√dt·N(0, 1)` per coordinate.
    pub fn sample(&mut self) -> &[f64] {
        let sd = self.sigma * self.dt.sqrt();
        for v in &mut self.x {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *v += self.theta * (self.mu - *v) * self.dt + sd * z;
        }
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volatility_stays_at_mean() {
        let mut n = OuNoise::new(3, 0.0, 0.7, 0.0, 1.0, 1).unwrap();
        for _ in 0..10 {
            assert_eq!(n.sample(), &[0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn long_run_mean_is_mu() {
        // Stationary AR(1): x' = (1 - θdt) x + σ√dt z. With ρ = 1 - θdt the
        // standard error of the mean over n steps is about sd_x·sqrt((1+ρ)/((1-ρ)n)).
        let (theta, sigma, n) = (0.15, 0.2, 100_000);
        let mut ou = OuNoise::new(1, 0.0, theta, sigma, 1.0, 42).unwrap();
        let mut sum = 0.0;
        for _ in 0..n {
            sum += ou.sample()[0];
        }
        let mean = sum / n as f64;
        let rho: f64 = 1.0 - theta;
        let sd_x = sigma / (1.0 - rho * rho).sqrt();
        let se = sd_x * ((1.0 + rho) / ((1.0 - rho) * n as f64)).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn seeded_and_resettable() {
        let mut a = OuNoise::new(2, 0.5, 0.15, 0.2, 1.0, 9).unwrap();
        let mut b = OuNoise::new(2, 0.5, 0.15, 0.2, 1.0, 9).unwrap();
        assert_eq!(a.sample().to_vec(), b.sample().to_vec());
        a.reset();
        assert_eq!(a.state(), &[0.5, 0.5]);
        assert!(OuNoise::new(1, 0.0, -1.0, 0.2, 1.0, 0).is_err());
        assert!(OuNoise::new(1, 0.0, 0.1, 0.2, 0.0, 0).is_err());
    }
}
