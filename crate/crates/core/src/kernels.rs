//! Interarrival kernel families `θ ↦ K(h(θ))`.
//!
//! Rate convention: `Exp(λ)` has density `λ e^{-λt}` and mean `1/λ`;
//! `Erlang(k, λ)` is the sum of `k` such exponentials, mean `k/λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::Transform;
use crate::num::Real;
use crate::rng::Stream;
use crate::special::{ln_factorial, regularized_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    Erlang { shape: u32 },
}

/// Declared bound `C(y)` on the interarrival density at rate `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominatingFunction {
    /// `C(y) = y`
    Rate,
    /// `C(y)` = the peak of the family's density at rate `y`.
    ModeDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterarrivalKernel<T = f64> {
    pub family: KernelFamily,
    pub transform: Transform,
    pub dominating: DominatingFunction,
    /// θ values excluded from the kernel (the null set `L_h`); empty by default.
    pub null_set: Vec<T>,
}

impl<T: Real> InterarrivalKernel<T> {
    pub fn new(family: KernelFamily, transform: Transform, dominating: DominatingFunction) -> Self {
        Self { family, transform, dominating, null_set: Vec::new() }
    }

    pub fn with_null_set(mut self, points: Vec<T>) -> Self {
        self.null_set = points;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let KernelFamily::Erlang { shape } = self.family {
            if shape < 2 {
                return Err(Error::InvalidParameter(format!("Erlang shape must be at least 2, got {shape}")));
            }
        }
        Ok(())
    }

    pub fn is_exponential(&self) -> bool {
        self.family == KernelFamily::Exponential
    }

    pub fn name(&self) -> String {
        match self.family {
            KernelFamily::Exponential => format!("Exp({}(θ))", self.transform.name()),
            KernelFamily::Erlang { shape } => format!("Erlang({shape}, {}(θ))", self.transform.name()),
        }
    }

    fn shape(&self) -> u32 {
        match self.family {
            KernelFamily::Exponential => 1,
            KernelFamily::Erlang { shape } => shape,
        }
    }

    /// `h(θ)`, rejecting the null set and nonpositive rates.
    pub fn rate(&self, theta: T) -> Result<T> {
        if self.null_set.contains(&theta) {
            return Err(Error::NullSet { theta: theta.to_f64_lossy() });
        }
        let rate = self.transform.apply(theta);
        if !(rate > T::zero() && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate h(θ) = {rate} at θ = {theta} must be positive and finite"
            )));
        }
        Ok(rate)
    }

    pub fn mean(&self, theta: T) -> Result<T> {
        Ok(T::from_u32(self.shape()).expect("small integer") / self.rate(theta)?)
    }

    /// `F_{h(θ)}(t)`.
    pub fn cdf(&self, theta: T, t: T) -> Result<T> {
        let rate = self.rate(theta)?;
        check_time(t)?;
        Ok(match self.family {
            KernelFamily::Exponential => -(-rate * t).exp_m1(),
            KernelFamily::Erlang { shape } => regularized_gamma(T::from_u32(shape).unwrap(), rate * t).0,
        })
    }

    /// `1 - F_{h(θ)}(t)`.
    pub fn sf(&self, theta: T, t: T) -> Result<T> {
        let rate = self.rate(theta)?;
        check_time(t)?;
        Ok(match self.family {
            KernelFamily::Exponential => (-rate * t).exp(),
            KernelFamily::Erlang { shape } => regularized_gamma(T::from_u32(shape).unwrap(), rate * t).1,
        })
    }

    /// `F'_{h(θ)}(t)`.
    pub fn density(&self, theta: T, t: T) -> Result<T> {
        let rate = self.rate(theta)?;
        check_time(t)?;
        Ok(erlang_density(self.shape(), rate, t))
    }

    /// `sup_{t>0} F'_{h(θ)}(t)`, attained at the mode `(k-1)/λ` (the origin for k = 1).
    pub fn density_sup(&self, theta: T) -> Result<T> {
        let rate = self.rate(theta)?;
        let k = self.shape();
        let mode = T::from_u32(k - 1).unwrap() / rate;
        Ok(erlang_density(k, rate, mode))
    }

    /// `C(y)` for the declared dominating function.
    pub fn dominating_bound(&self, rate: T) -> T {
        match self.dominating {
            DominatingFunction::Rate => rate,
            DominatingFunction::ModeDensity => {
                let k = self.shape();
                erlang_density(k, rate, T::from_u32(k - 1).unwrap() / rate)
            }
        }
    }

    /// Draws one waiting time: inversion for the exponential, a sum of `k` inversions for Erlang.
    pub fn sample_interarrival(&self, theta: T, stream: &mut Stream) -> Result<T> {
        let rate = self.rate(theta)?;
        let mut total = 0.0;
        for _ in 0..self.shape() {
            total += -stream.open01().ln();
        }
        Ok(T::lit(total) / rate)
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time {t} must be nonnegative")))
    }
}

fn erlang_density<T: Real>(k: u32, rate: T, t: T) -> T {
    if t < T::zero() {
        return T::zero();
    }
    if k == 1 {
        return rate * (-rate * t).exp();
    }
    if t == T::zero() {
        return T::zero();
    }
    let km1 = T::from_u32(k - 1).unwrap();
    (T::from_u32(k).unwrap() * rate.ln() + km1 * t.ln() - rate * t - ln_factorial::<T>(u64::from(k - 1))).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureSettings};
    use crate::special::ks_critical_value;
    use approx::assert_relative_eq;

    fn exp(h: Transform) -> InterarrivalKernel {
        InterarrivalKernel::new(KernelFamily::Exponential, h, DominatingFunction::Rate)
    }

    fn erlang2() -> InterarrivalKernel {
        InterarrivalKernel::new(KernelFamily::Erlang { shape: 2 }, Transform::Identity, DominatingFunction::Rate)
    }

    #[test]
    fn cdf_examples() {
        assert_relative_eq!(exp(Transform::Identity).cdf(1.0, 2.0_f64.ln()).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(exp(Transform::Reciprocal).cdf(2.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(erlang2().cdf(1.0, 1.0).unwrap(), 0.264_241_117_657_115_4, epsilon = 1e-14);
    }

    #[test]
    fn erlang_cdf_matches_integrated_density() {
        let k = erlang2();
        for t in [0.1, 1.0, 3.0] {
            let r = integrate(|s| k.density(1.3, s).unwrap(), 0.0, t, &QuadratureSettings::default()).unwrap();
            assert_relative_eq!(r.value, k.cdf(1.3, t).unwrap(), max_relative = 1e-10);
        }
    }

    #[test]
    fn density_is_derivative_of_cdf() {
        for k in [exp(Transform::Exp), erlang2()] {
            for t in [0.05, 0.5, 2.0, 5.0] {
                let h = 1e-5;
                let fd = (k.cdf(0.4, t + h).unwrap() - k.cdf(0.4, t - h).unwrap()) / (2.0 * h);
                assert!((fd - k.density(0.4, t).unwrap()).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cdf_shape_invariants() {
        for k in [exp(Transform::Identity), erlang2()] {
            assert_eq!(k.cdf(2.0, 0.0).unwrap(), 0.0);
            let mut prev = 0.0;
            for i in 1..200 {
                let c = k.cdf(2.0, i as f64 * 0.05).unwrap();
                assert!(c >= prev && c <= 1.0);
                prev = c;
            }
            assert!(k.cdf(2.0, 100.0).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn sampler_matches_cdf() {
        for k in [exp(Transform::Reciprocal), erlang2()] {
            let n = 100_000;
            let mut s = Stream::new(3, 0, 1);
            let mut xs: Vec<f64> = (0..n).map(|_| k.sample_interarrival(0.8, &mut s).unwrap()).collect();
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let d = xs
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = k.cdf(0.8, x).unwrap();
                    (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                })
                .fold(0.0, f64::max);
            assert!(d < ks_critical_value(n, 0.01), "{}: D = {d}", k.name());
        }
    }

    #[test]
    fn sample_means() {
        let n = 1_000_000;
        let mean = |k: &InterarrivalKernel, theta: f64| {
            let mut s = Stream::new(9, 0, 1);
            (0..n).map(|_| k.sample_interarrival(theta, &mut s).unwrap()).sum::<f64>() / n as f64
        };
        // Exp(2): sd 0.5
        assert!((mean(&exp(Transform::Identity), 2.0) - 0.5).abs() < 3.0 * 0.5 / 1000.0);
        // Erlang(2, 1): sd √2
        assert!((mean(&erlang2(), 1.0) - 2.0).abs() < 3.0 * 2f64.sqrt() / 1000.0);
        let mut s = Stream::new(9, 1, 1);
        assert!(exp(Transform::Identity).sample_interarrival(1e6, &mut s).unwrap() < 1e-3);
    }

    #[test]
    fn memorylessness_separates_families() {
        // P(W > s + t | W > s) vs P(W > t) with s = t = 0.5, 200k draws at rate 1
        let n = 200_000;
        let gap = |k: &InterarrivalKernel| {
            let mut st = Stream::new(21, 0, 1);
            let ws: Vec<f64> = (0..n).map(|_| k.sample_interarrival(1.0, &mut st).unwrap()).collect();
            let beyond_s = ws.iter().filter(|&&w| w > 0.5).count() as f64;
            let beyond_st = ws.iter().filter(|&&w| w > 1.0).count() as f64;
            let beyond_t = beyond_s / n as f64;
            (beyond_st / beyond_s - beyond_t).abs()
        };
        assert!(gap(&exp(Transform::Identity)) < 0.006);
        assert!(gap(&erlang2()) > 0.05);
    }

    #[test]
    fn null_set_and_invalid_rates() {
        let k = exp(Transform::Identity).with_null_set(vec![1.0]);
        assert!(matches!(k.cdf(1.0, 0.3), Err(Error::NullSet { .. })));
        assert!(k.cdf(-1.0, 0.3).is_err());
        assert!(k.cdf(2.0, -0.3).is_err());
        let bad = InterarrivalKernel::<f64>::new(KernelFamily::Erlang { shape: 1 }, Transform::Identity, DominatingFunction::Rate);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dominating_bounds() {
        let k = erlang2();
        // Erlang(2, λ) peaks at t = 1/λ with value λ/e
        assert_relative_eq!(k.density_sup(2.0).unwrap(), 2.0 / std::f64::consts::E, max_relative = 1e-14);
        let m = InterarrivalKernel::<f64> { dominating: DominatingFunction::ModeDensity, ..erlang2() };
        assert_relative_eq!(m.dominating_bound(2.0), 2.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_eq!(exp(Transform::Identity).density_sup(3.0).unwrap(), 3.0);
    }
}
