//! Mixing laws, transforms `h`, pushforwards `p_h ∘ Θ` and the density-at-origin map.

use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::InterarrivalKernel;
use crate::num::Real;
use crate::quadrature::{integrate, Integral, QuadratureSettings};
use crate::rng::Stream;
use crate::special::{ln_gamma, normal_cdf, normal_quantile, normal_sf, regularized_gamma};

/// Distribution of the mixing parameter Θ.
///
/// Gamma and inverse gamma use the `(α, β)` convention: Gamma density
/// `β^α θ^{α-1} e^{-βθ} / Γ(α)`, inverse gamma density `β^α θ^{-α-1} e^{-β/θ} / Γ(α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum MixingLaw<T = f64> {
    Degenerate { value: T },
    Gamma { alpha: T, beta: T },
    InverseGamma { alpha: T, beta: T },
    /// Law of `e^X` with `X ~ Normal(mu, sigma2)`.
    #[serde(rename = "lognormal")]
    LogNormal { mu: T, sigma2: T },
    Normal { mean: T, variance: T },
    /// Finitely many atoms `(θ_i, p_i)`.
    Discrete { atoms: Vec<(T, T)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// `(0, ∞)`
    Positive,
    /// the whole real line
    Real,
}

/// Coordinates a continuous law is integrated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chart {
    Log,
    Linear,
}

impl Chart {
    fn to_value<T: Real>(self, x: T) -> T {
        match self {
            Chart::Log => x.exp(),
            Chart::Linear => x,
        }
    }

    fn coordinate<T: Real>(self, v: T) -> T {
        match self {
            Chart::Log => v.ln(),
            Chart::Linear => v,
        }
    }
}

fn positive_finite<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl<T: Real> MixingLaw<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            MixingLaw::Degenerate { value } => positive_finite("degenerate value", *value),
            MixingLaw::Gamma { alpha, beta } | MixingLaw::InverseGamma { alpha, beta } => {
                positive_finite("alpha", *alpha)?;
                positive_finite("beta", *beta)
            }
            MixingLaw::LogNormal { mu, sigma2 } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter("mu must be finite".into()));
                }
                positive_finite("sigma2", *sigma2)
            }
            MixingLaw::Normal { mean, variance } => {
                if !mean.is_finite() {
                    return Err(Error::InvalidParameter("mean must be finite".into()));
                }
                positive_finite("variance", *variance)
            }
            MixingLaw::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidParameter("discrete law needs at least one atom".into()));
                }
                let mut total = T::zero();
                for &(theta, p) in atoms {
                    positive_finite("atom", theta)?;
                    if !(p >= T::zero()) || !p.is_finite() {
                        return Err(Error::InvalidParameter(format!("weight {p} must be nonnegative")));
                    }
                    total = total + p;
                }
                if (total - T::one()).abs() > T::lit(1e-12).max(T::tolerance_floor()) {
                    return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            MixingLaw::Degenerate { value } => format!("Degenerate({value})"),
            MixingLaw::Gamma { alpha, beta } => format!("Gamma({alpha}, {beta})"),
            MixingLaw::InverseGamma { alpha, beta } => format!("InverseGamma({alpha}, {beta})"),
            MixingLaw::LogNormal { mu, sigma2 } => format!("LogNormal({mu}, {sigma2})"),
            MixingLaw::Normal { mean, variance } => format!("Normal({mean}, {variance})"),
            MixingLaw::Discrete { atoms } => format!("Discrete({} atoms)", atoms.len()),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            MixingLaw::Normal { .. } => Support::Real,
            _ => Support::Positive,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, MixingLaw::Degenerate { .. } | MixingLaw::Discrete { .. })
    }

    fn chart(&self) -> Chart {
        match self.support() {
            Support::Positive => Chart::Log,
            Support::Real => Chart::Linear,
        }
    }

    /// Mass the law puts on `(0, ∞)`; must be one for a mixed Poisson mixing distribution.
    pub fn positive_mass(&self) -> T {
        match self {
            MixingLaw::Normal { mean, variance } => normal_sf(-*mean / variance.sqrt()),
            _ => T::one(),
        }
    }

    pub fn mean(&self) -> Option<T> {
        match self {
            MixingLaw::Degenerate { value } => Some(*value),
            MixingLaw::Gamma { alpha, beta } => Some(*alpha / *beta),
            MixingLaw::InverseGamma { alpha, beta } => (*alpha > T::one()).then(|| *beta / (*alpha - T::one())),
            MixingLaw::LogNormal { mu, sigma2 } => Some((*mu + *sigma2 / T::lit(2.0)).exp()),
            MixingLaw::Normal { mean, .. } => Some(*mean),
            MixingLaw::Discrete { atoms } => Some(atoms.iter().map(|&(t, p)| t * p).sum()),
        }
    }

    /// Log density in chart coordinates (`x = ln θ` for positive laws, `x = θ` otherwise).
    fn ln_chart_density(&self, x: T) -> T {
        let half = T::lit(0.5);
        let ln_sqrt_2pi = half * (T::lit(2.0) * T::PI()).ln();
        match self {
            MixingLaw::Gamma { alpha, beta } => *alpha * beta.ln() - ln_gamma(*alpha) + *alpha * x - *beta * x.exp(),
            MixingLaw::InverseGamma { alpha, beta } => {
                *alpha * beta.ln() - ln_gamma(*alpha) - *alpha * x - *beta * (-x).exp()
            }
            MixingLaw::LogNormal { mu, sigma2 } => {
                let z = (x - *mu) / sigma2.sqrt();
                -half * z * z - half * sigma2.ln() - ln_sqrt_2pi
            }
            MixingLaw::Normal { mean, variance } => {
                let z = (x - *mean) / variance.sqrt();
                -half * z * z - half * variance.ln() - ln_sqrt_2pi
            }
            MixingLaw::Degenerate { .. } | MixingLaw::Discrete { .. } => T::neg_infinity(),
        }
    }

    /// Log of the Lebesgue density at `theta`; `-inf` outside the support.
    pub fn ln_density(&self, theta: T) -> Result<T> {
        if !self.is_continuous() {
            return Err(Error::Unsupported { operation: "density", law: self.name() });
        }
        match self.chart() {
            Chart::Linear => Ok(self.ln_chart_density(theta)),
            Chart::Log if theta > T::zero() => Ok(self.ln_chart_density(theta.ln()) - theta.ln()),
            Chart::Log => Ok(T::neg_infinity()),
        }
    }

    pub fn density(&self, theta: T) -> Result<T> {
        Ok(self.ln_density(theta)?.exp())
    }

    /// `(P(Θ ≤ θ), P(Θ > θ))`, each computed without cancellation in its own tail.
    pub fn cdf_sf(&self, theta: T) -> (T, T) {
        let one = T::one();
        match self {
            MixingLaw::Degenerate { value } => {
                if theta >= *value {
                    (one, T::zero())
                } else {
                    (T::zero(), one)
                }
            }
            MixingLaw::Discrete { atoms } => {
                let below: T = atoms.iter().filter(|a| a.0 <= theta).map(|a| a.1).sum();
                let above: T = atoms.iter().filter(|a| a.0 > theta).map(|a| a.1).sum();
                (below, above)
            }
            MixingLaw::Gamma { alpha, beta } => {
                if theta <= T::zero() {
                    (T::zero(), one)
                } else {
                    regularized_gamma(*alpha, *beta * theta)
                }
            }
            MixingLaw::InverseGamma { alpha, beta } => {
                if theta <= T::zero() {
                    (T::zero(), one)
                } else {
                    let (p, q) = regularized_gamma(*alpha, *beta / theta);
                    (q, p)
                }
            }
            MixingLaw::LogNormal { mu, sigma2 } => {
                if theta <= T::zero() {
                    (T::zero(), one)
                } else {
                    let z = (theta.ln() - *mu) / sigma2.sqrt();
                    (normal_cdf(z), normal_sf(z))
                }
            }
            MixingLaw::Normal { mean, variance } => {
                let z = (theta - *mean) / variance.sqrt();
                (normal_cdf(z), normal_sf(z))
            }
        }
    }

    pub fn cdf(&self, theta: T) -> T {
        self.cdf_sf(theta).0
    }

    /// Smallest θ with `P(Θ ≤ θ) ≥ p`.
    pub fn quantile(&self, p: T) -> Result<T> {
        self.solve_tail(p, false)
    }

    /// θ with `P(Θ > θ) = tail`.
    pub fn upper_quantile(&self, tail: T) -> Result<T> {
        self.solve_tail(tail, true)
    }

    fn solve_tail(&self, p: T, upper: bool) -> Result<T> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParameter(format!("tail probability {p} must lie in (0, 1)")));
        }
        match self {
            MixingLaw::Degenerate { value } => Ok(*value),
            MixingLaw::Discrete { atoms } => {
                let mut sorted = atoms.clone();
                sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("atoms are finite"));
                let mut acc = T::zero();
                let target = if upper { T::one() - p } else { p };
                for &(theta, w) in &sorted {
                    acc = acc + w;
                    if acc >= target {
                        return Ok(theta);
                    }
                }
                Ok(sorted.last().expect("nonempty").0)
            }
            MixingLaw::Normal { mean, variance } => {
                let z = normal_quantile(p);
                Ok(if upper { *mean - variance.sqrt() * z } else { *mean + variance.sqrt() * z })
            }
            MixingLaw::LogNormal { mu, sigma2 } => {
                let z = normal_quantile(p);
                Ok(if upper { (*mu - sigma2.sqrt() * z).exp() } else { (*mu + sigma2.sqrt() * z).exp() })
            }
            MixingLaw::Gamma { .. } | MixingLaw::InverseGamma { .. } => self.newton_log_quantile(p, upper),
        }
    }

    /// Safeguarded Newton iteration on `x = ln θ`.
    fn newton_log_quantile(&self, p: T, upper: bool) -> Result<T> {
        let residual = |x: T| {
            let (cdf, sf) = self.cdf_sf(x.exp());
            if upper {
                p - sf
            } else {
                cdf - p
            }
        };
        let start = self.mean().filter(|m| *m > T::zero()).unwrap_or_else(T::one).ln();
        let (mut lo, mut hi) = (start - T::one(), start + T::one());
        let mut guard = 0;
        while residual(lo) > T::zero() {
            lo = lo - (start - lo).abs().max(T::one());
            guard += 1;
            if guard > 200 || lo < T::lit(-700.0) {
                break;
            }
        }
        guard = 0;
        while residual(hi) < T::zero() {
            hi = hi + (hi - start).abs().max(T::one());
            guard += 1;
            if guard > 200 || hi > T::lit(700.0) {
                break;
            }
        }
        let mut x = (lo + hi) / T::lit(2.0);
        for _ in 0..200 {
            let r = residual(x);
            if r == T::zero() {
                break;
            }
            if r < T::zero() {
                lo = x;
            } else {
                hi = x;
            }
            // d residual / dx = density in chart coordinates
            let slope = self.ln_chart_density(x).exp();
            let mut next = x - r / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = (lo + hi) / T::lit(2.0);
            }
            if (next - x).abs() <= T::epsilon() * T::lit(4.0) * x.abs().max(T::one()) {
                x = next;
                break;
            }
            x = next;
        }
        Ok(x.exp())
    }

    /// Draws one value of Θ.
    pub fn sample(&self, stream: &mut Stream) -> T {
        match self {
            MixingLaw::Degenerate { value } => *value,
            MixingLaw::Gamma { alpha, beta } => {
                let g = Gamma::new(alpha.to_f64_lossy(), 1.0 / beta.to_f64_lossy()).expect("validated gamma");
                T::lit(g.sample(stream))
            }
            MixingLaw::InverseGamma { .. } => {
                // inversion keeps this sampler independent of the gamma sampler
                let u = stream.open01();
                let result = if u < 0.5 {
                    self.quantile(T::lit(u))
                } else {
                    self.upper_quantile(T::lit(1.0 - u))
                };
                result.expect("u lies in (0, 1)")
            }
            MixingLaw::LogNormal { mu, sigma2 } => {
                let n = Normal::new(mu.to_f64_lossy(), sigma2.to_f64_lossy().sqrt()).expect("validated normal");
                T::lit(n.sample(stream).exp())
            }
            MixingLaw::Normal { mean, variance } => {
                let n = Normal::new(mean.to_f64_lossy(), variance.to_f64_lossy().sqrt()).expect("validated normal");
                T::lit(n.sample(stream))
            }
            MixingLaw::Discrete { atoms } => {
                let u = T::lit(stream.open01());
                let mut acc = T::zero();
                for &(theta, w) in atoms {
                    acc = acc + w;
                    if u <= acc {
                        return theta;
                    }
                }
                atoms.last().expect("nonempty").0
            }
        }
    }

    /// `∫ exp(log_g(map(θ))) P_Θ(dθ)`.
    ///
    /// Continuous laws are integrated in chart coordinates over the quantile range
    /// `[q(tail_mass), q(1 - tail_mass)]`; atoms are summed exactly.
    pub fn integrate_mapped<F: Fn(T) -> T>(
        &self,
        map: Transform,
        log_g: F,
        settings: &QuadratureSettings<T>,
    ) -> Result<Integral<T>> {
        match self {
            MixingLaw::Degenerate { value } => Ok(Integral {
                value: log_g(map.apply(*value)).exp(),
                error: T::zero(),
                evaluations: 1,
            }),
            MixingLaw::Discrete { atoms } => {
                let value = atoms.iter().map(|&(theta, w)| w * log_g(map.apply(theta)).exp()).sum();
                Ok(Integral { value, error: T::zero(), evaluations: atoms.len() })
            }
            _ => {
                let chart = self.chart();
                let lo = chart.coordinate(self.quantile(settings.tail_mass)?);
                let hi = chart.coordinate(self.upper_quantile(settings.tail_mass)?);
                let integrand = |x: T| {
                    let theta = chart.to_value(x);
                    let l = log_g(map.apply(theta)) + self.ln_chart_density(x);
                    if l == T::neg_infinity() {
                        T::zero()
                    } else {
                        l.exp()
                    }
                };
                integrate(integrand, lo, hi, settings)
            }
        }
    }
}

/// A measurable map `h` applied to the mixing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `h(θ) = 1/θ`
    Reciprocal,
    /// `h(θ) = e^θ`
    Exp,
}

impl Transform {
    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Reciprocal => "reciprocal",
            Transform::Exp => "exp",
        }
    }

    pub fn apply<T: Real>(self, theta: T) -> T {
        match self {
            Transform::Identity => theta,
            Transform::Reciprocal => theta.recip(),
            Transform::Exp => theta.exp(),
        }
    }

    pub fn inverse<T: Real>(self, y: T) -> Option<T> {
        match self {
            Transform::Identity => Some(y),
            Transform::Reciprocal => (y != T::zero()).then(|| y.recip()),
            Transform::Exp => (y > T::zero()).then(|| y.ln()),
        }
    }

    /// `ln |d h^{-1}(y) / dy|`.
    fn ln_inverse_jacobian<T: Real>(self, y: T) -> T {
        match self {
            Transform::Identity => T::zero(),
            Transform::Reciprocal => T::lit(-2.0) * y.abs().ln(),
            Transform::Exp => -y.ln(),
        }
    }

    /// True when `h` preserves order on its domain.
    pub fn is_increasing(self) -> bool {
        !matches!(self, Transform::Reciprocal)
    }

    pub fn check_domain(self, support: Support) -> Result<()> {
        match (self, support) {
            (Transform::Reciprocal, Support::Real) => Err(Error::Domain {
                transform: self.name().into(),
                support: "the real line (contains 0)".into(),
            }),
            _ => Ok(()),
        }
    }
}

/// Law of `h(Θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardLaw<T = f64> {
    pub base: MixingLaw<T>,
    pub map: Transform,
}

pub fn pushforward<T: Real>(base: MixingLaw<T>, map: Transform) -> Result<PushforwardLaw<T>> {
    base.validate()?;
    map.check_domain(base.support())?;
    Ok(PushforwardLaw { base, map })
}

impl<T: Real> PushforwardLaw<T> {
    pub fn sample(&self, stream: &mut Stream) -> T {
        self.map.apply(self.base.sample(stream))
    }

    /// Density of `h(Θ)` by change of variables.
    pub fn ln_density(&self, y: T) -> Result<T> {
        match self.map.inverse(y) {
            Some(theta) => Ok(self.base.ln_density(theta)? + self.map.ln_inverse_jacobian(y)),
            None => {
                if self.base.is_continuous() {
                    Ok(T::neg_infinity())
                } else {
                    Err(Error::Unsupported { operation: "density", law: self.base.name() })
                }
            }
        }
    }

    pub fn cdf(&self, y: T) -> T {
        match (self.map, self.map.inverse(y)) {
            (Transform::Reciprocal, _) if y <= T::zero() => T::zero(),
            (Transform::Exp, None) => T::zero(),
            (map, Some(theta)) => {
                let (cdf, sf) = self.base.cdf_sf(theta);
                if map.is_increasing() {
                    cdf
                } else {
                    // P(1/Θ ≤ y) = P(Θ ≥ 1/y); continuous laws have no atom at 1/y
                    sf + self.atom_mass(theta)
                }
            }
            _ => T::zero(),
        }
    }

    fn atom_mass(&self, theta: T) -> T {
        match &self.base {
            MixingLaw::Degenerate { value } if *value == theta => T::one(),
            MixingLaw::Discrete { atoms } => atoms.iter().filter(|a| a.0 == theta).map(|a| a.1).sum(),
            _ => T::zero(),
        }
    }

    /// Closed-form identification of the pushforward, when one exists.
    pub fn simplify(&self) -> Option<MixingLaw<T>> {
        match (&self.base, self.map) {
            (base, Transform::Identity) => Some(base.clone()),
            (MixingLaw::Degenerate { value }, map) => Some(MixingLaw::Degenerate { value: map.apply(*value) }),
            (MixingLaw::Discrete { atoms }, map) => Some(MixingLaw::Discrete {
                atoms: atoms.iter().map(|&(t, p)| (map.apply(t), p)).collect(),
            }),
            (MixingLaw::InverseGamma { alpha, beta }, Transform::Reciprocal) => {
                Some(MixingLaw::Gamma { alpha: *alpha, beta: *beta })
            }
            (MixingLaw::Gamma { alpha, beta }, Transform::Reciprocal) => {
                Some(MixingLaw::InverseGamma { alpha: *alpha, beta: *beta })
            }
            (MixingLaw::LogNormal { mu, sigma2 }, Transform::Reciprocal) => {
                Some(MixingLaw::LogNormal { mu: -*mu, sigma2: *sigma2 })
            }
            (MixingLaw::Normal { mean, variance }, Transform::Exp) => {
                Some(MixingLaw::LogNormal { mu: *mean, sigma2: *variance })
            }
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        format!("{} ∘ {}", self.map.name(), self.base.name())
    }
}

/// A law of the Poisson rate that fdd evaluators can integrate against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateLaw<T = f64> {
    Direct(MixingLaw<T>),
    Pushforward(PushforwardLaw<T>),
}

impl<T: Real> From<MixingLaw<T>> for RateLaw<T> {
    fn from(law: MixingLaw<T>) -> Self {
        RateLaw::Direct(law)
    }
}

impl<T: Real> From<PushforwardLaw<T>> for RateLaw<T> {
    fn from(law: PushforwardLaw<T>) -> Self {
        RateLaw::Pushforward(law)
    }
}

impl<T: Real> RateLaw<T> {
    fn parts(&self) -> (&MixingLaw<T>, Transform) {
        match self {
            RateLaw::Direct(law) => (law, Transform::Identity),
            RateLaw::Pushforward(p) => (&p.base, p.map),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (base, map) = self.parts();
        base.validate()?;
        map.check_domain(base.support())
    }

    pub fn name(&self) -> String {
        match self {
            RateLaw::Direct(law) => law.name(),
            RateLaw::Pushforward(p) => p.name(),
        }
    }

    /// `∫ exp(log_g(λ)) U(dλ)` over the rate law `U`.
    pub fn integrate_log<F: Fn(T) -> T>(&self, log_g: F, settings: &QuadratureSettings<T>) -> Result<Integral<T>> {
        let (base, map) = self.parts();
        base.integrate_mapped(map, log_g, settings)
    }

    /// λ* with `P(rate > λ*) ≤ tail`.
    pub fn rate_upper_quantile(&self, tail: T) -> Result<T> {
        let (base, map) = self.parts();
        if map.is_increasing() {
            Ok(map.apply(base.upper_quantile(tail)?))
        } else {
            Ok(map.apply(base.quantile(tail)?))
        }
    }

    /// `P(rate > 0)`.
    pub fn positive_mass(&self) -> T {
        let (base, map) = self.parts();
        match map {
            Transform::Identity => base.positive_mass(),
            Transform::Exp => T::one(),
            Transform::Reciprocal => base.positive_mass(),
        }
    }

    pub fn sample_rate(&self, stream: &mut Stream) -> T {
        let (base, map) = self.parts();
        map.apply(base.sample(stream))
    }
}

/// `lim_{t→0} F'_{h(θ)}(t)` by Richardson extrapolation of central differences.
///
/// Differences are taken at `t = s 2^{-k}`, `k = 10..=20`, where `s` is the
/// kernel's mean interarrival time capped at one. Converged when successive
/// diagonal extrapolants differ by less than `1e-8` in units of `1/s`.
pub fn p_h_numeric<T: Real>(kernel: &InterarrivalKernel<T>, theta: T) -> Result<T> {
    const FIRST: i32 = 10;
    const LAST: i32 = 20;
    let tol = T::lit(1e-8).max(T::tolerance_floor() * T::lit(1e3));
    let scale = kernel.mean(theta)?.min(T::one());
    let deriv = |s: T| -> Result<T> {
        let hi = kernel.cdf(theta, scale * s * T::lit(1.5))?;
        let lo = kernel.cdf(theta, scale * s * T::lit(0.5))?;
        // derivative of G(s) = F(scale s)
        Ok((hi - lo) / s)
    };
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut previous_diag: Option<T> = None;
    for k in FIRST..=LAST {
        let s = T::lit(2.0).powi(-k);
        let mut row = vec![deriv(s)?];
        if let Some(prev) = rows.last() {
            let mut factor = T::one();
            for j in 0..prev.len() {
                factor = factor * T::lit(2.0);
                let r = row[j] + (row[j] - prev[j]) / (factor - T::one());
                row.push(r);
            }
        }
        let diag = *row.last().expect("row is nonempty");
        if let Some(prev) = previous_diag {
            if (diag - prev).abs() < tol {
                if diag <= tol {
                    return Err(Error::AssumptionViolation(format!(
                        "density limit at the origin is {} for θ = {theta}, not positive",
                        diag / scale
                    )));
                }
                return Ok(diag / scale);
            }
        }
        previous_diag = Some(diag);
        rows.push(row);
    }
    Err(Error::AssumptionViolation(format!(
        "density limit at the origin did not converge for θ = {theta}"
    )))
}

/// One line of an [`AssumptionReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub pass: bool,
    /// Headline number: smallest p_h, smallest relative gap, largest sup F'/C, or the L¹ integral.
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Outcome of checking the density-limit assumption on a quantile grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub grid_size: usize,
    pub positivity: AssumptionCheck,
    pub injectivity: AssumptionCheck,
    pub domination: AssumptionCheck,
    /// `∫ C(h(θ)) P_Θ(dθ)`; reported, passes when the quadrature converges to a finite value.
    pub integrability: AssumptionCheck,
    /// `(θ, p_h(θ))` on the grid; `None` where p_h could not be established.
    pub grid: Vec<(f64, Option<f64>)>,
    pub pass: bool,
}

/// Relative resolution under which two p_h values count as equal.
pub const INJECTIVITY_RESOLUTION: f64 = 1e-7;

/// Mid-point quantile grid `q((i + 1/2)/n)`, with duplicates removed.
pub fn quantile_grid<T: Real>(law: &MixingLaw<T>, grid_size: usize) -> Result<Vec<T>> {
    if grid_size < 2 {
        return Err(Error::InvalidParameter("assumption grid needs at least two points".into()));
    }
    let n = T::from_usize_lossy(grid_size);
    let mut grid = (0..grid_size)
        .map(|i| law.quantile((T::from_usize_lossy(i) + T::lit(0.5)) / n))
        .collect::<Result<Vec<_>>>()?;
    grid.sort_by(|a, b| a.partial_cmp(b).expect("quantiles are finite"));
    grid.dedup();
    Ok(grid)
}

/// Checks positivity, injectivity and domination of the density-limit map on a
/// quantile grid of `law`, plus integrability of the declared dominating function.
///
/// Injectivity is certified on the finite grid only.
pub fn check_assumption<T: Real>(
    kernel: &InterarrivalKernel<T>,
    law: &MixingLaw<T>,
    grid_size: usize,
) -> Result<AssumptionReport> {
    law.validate()?;
    let grid = quantile_grid(law, grid_size)?;

    let limits: Vec<Result<T>> = grid.iter().map(|&theta| p_h_numeric(kernel, theta)).collect();
    let failures: Vec<String> = grid
        .iter()
        .zip(&limits)
        .filter_map(|(theta, r)| r.as_ref().err().map(|e| format!("θ={theta}: {e}")))
        .collect();
    let min_limit = limits
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .fold(f64::INFINITY, |m, v| m.min(v.to_f64_lossy()));
    let positivity = AssumptionCheck {
        pass: failures.is_empty(),
        statistic: if failures.is_empty() { min_limit } else { 0.0 },
        threshold: 0.0,
        detail: if failures.is_empty() {
            format!("p_h positive at all {} grid points", grid.len())
        } else {
            format!("{} of {} grid points fail: {}", failures.len(), grid.len(), failures[0])
        },
    };

    let mut values: Vec<f64> = limits.iter().filter_map(|r| r.as_ref().ok()).map(|v| v.to_f64_lossy()).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("limits are finite"));
    let min_gap = values
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[1].abs().max(w[0].abs()).max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let injective = values.len() == grid.len() && min_gap > INJECTIVITY_RESOLUTION;
    let injectivity = AssumptionCheck {
        pass: injective,
        statistic: min_gap,
        threshold: INJECTIVITY_RESOLUTION,
        detail: if values.len() < grid.len() {
            "p_h undefined on part of the grid".into()
        } else {
            format!("smallest relative gap between sorted p_h values: {min_gap:e}")
        },
    };

    let mut worst_ratio = 0.0_f64;
    for &theta in &grid {
        let rate = kernel.rate(theta)?;
        let bound = kernel.dominating_bound(rate);
        let sup = kernel.density_sup(theta)?;
        worst_ratio = worst_ratio.max((sup / bound).to_f64_lossy());
    }
    let domination = AssumptionCheck {
        pass: worst_ratio <= 1.0 + 1e-9,
        statistic: worst_ratio,
        threshold: 1.0,
        detail: format!("max over grid of sup_t F'(t) / C(h(θ)) = {worst_ratio:.12}"),
    };

    let integral = law.integrate_mapped(
        kernel.transform,
        |y| kernel.dominating_bound(y).ln(),
        &QuadratureSettings::default(),
    );
    let integrability = match integral {
        Ok(i) if i.value.is_finite() => AssumptionCheck {
            pass: true,
            statistic: i.value.to_f64_lossy(),
            threshold: f64::INFINITY,
            detail: format!("∫ C(h(θ)) dP_Θ = {} (error estimate {:e})", i.value, i.error),
        },
        Ok(i) => AssumptionCheck {
            pass: false,
            statistic: i.value.to_f64_lossy(),
            threshold: f64::INFINITY,
            detail: "integral is not finite".into(),
        },
        Err(e) => AssumptionCheck {
            pass: false,
            statistic: f64::NAN,
            threshold: f64::INFINITY,
            detail: e.to_string(),
        },
    };

    let pass = positivity.pass && injectivity.pass && domination.pass && integrability.pass;
    Ok(AssumptionReport {
        grid_size: grid.len(),
        grid: grid
            .iter()
            .zip(&limits)
            .map(|(t, r)| (t.to_f64_lossy(), r.as_ref().ok().map(|v| v.to_f64_lossy())))
            .collect(),
        positivity,
        injectivity,
        domination,
        integrability,
        pass,
    })
}
