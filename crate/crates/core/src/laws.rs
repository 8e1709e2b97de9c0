//! Exact finite-dimensional laws of Poisson, mixed Poisson and Pólya processes,
//! and residual evaluators for the multinomial, binomial-splitting, Markov and
//! interarrival-product identities.
//!
//! All probabilities are assembled in log space and exponentiated last.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::{pushforward, MixingLaw, RateLaw, Transform};
use crate::num::{ln_one_minus_exp_neg, Real};
use crate::path::FddQuery;
use crate::quadrature::{Integral, QuadratureSettings};
use crate::special::{ln_binomial, ln_factorial, ln_rising};

/// Anything that assigns probabilities to fdd events.
pub trait FddSource<T: Real> {
    fn probability(&self, q: &FddQuery<T>) -> Result<T>;

    /// Smallest `K` with `P(N_{s+d} - N_s ≥ K) ≤ eps` for every `s`.
    fn count_truncation(&self, duration: T, eps: T) -> Result<u64>;
}

/// `Σ_j κ_j ln Δ_j - Σ_j ln κ_j!`: the part of every Poisson-mixture fdd that does not depend on the rate.
fn ln_rate_free_part<T: Real>(q: &FddQuery<T>) -> T {
    q.durations()
        .iter()
        .zip(q.increments())
        .map(|(&d, &k)| {
            if k == 0 {
                T::zero()
            } else {
                T::from_u64_lossy(k) * d.ln() - ln_factorial::<T>(k)
            }
        })
        .sum()
}

/// `ln P_θ(∩_j {N_{t_j} - N_{t_{j-1}} = κ_j})` for a Poisson process of rate θ.
pub fn ln_poisson_fdd<T: Real>(theta: T, q: &FddQuery<T>) -> T {
    let n = q.total();
    let rate_part = if n == 0 { T::zero() } else { T::from_u64_lossy(n) * theta.ln() };
    ln_rate_free_part(q) + rate_part - theta * q.last_time()
}

/// Product of Poisson(θΔ_j) pmfs at κ_j.
pub fn poisson_fdd<T: Real>(theta: T, q: &FddQuery<T>) -> T {
    ln_poisson_fdd(theta, q).exp()
}

/// `∫ P_θ(query) U(dθ)` by adaptive quadrature against the rate law `U`
/// (exact sums for atomic laws).
pub fn mpp_fdd_quadrature<T: Real>(
    law: &RateLaw<T>,
    q: &FddQuery<T>,
    settings: &QuadratureSettings<T>,
) -> Result<Integral<T>> {
    law.validate()?;
    let mass = law.positive_mass();
    if (mass - T::one()).abs() > T::lit(1e-12).max(T::tolerance_floor()) {
        return Err(Error::InvalidParameter(format!(
            "mixing law {} puts mass {mass} on (0, ∞); a mixed Poisson law needs mass one",
            law.name()
        )));
    }
    let fixed = ln_rate_free_part(q);
    let n = T::from_u64_lossy(q.total());
    let t_m = q.last_time();
    let nonzero = q.total() > 0;
    law.integrate_log(
        |rate| {
            let rate_part = if nonzero { n * rate.ln() } else { T::zero() };
            fixed + rate_part - rate * t_m
        },
        settings,
    )
}

/// Closed form of the Gamma(α, β)-mixed fdd:
/// `(∏ Δ_j^{κ_j}/κ_j!) Γ(α+n)/Γ(α) β^α / (β + t_m)^{α+n}`.
pub fn polya_fdd_closed<T: Real>(alpha: T, beta: T, q: &FddQuery<T>) -> Result<T> {
    if !(alpha > T::zero() && beta > T::zero()) {
        return Err(Error::InvalidParameter(format!("Pólya parameters ({alpha}, {beta}) must be positive")));
    }
    let n = q.total();
    let ln = ln_rate_free_part(q) + ln_rising(alpha, n) + alpha * beta.ln()
        - (alpha + T::from_u64_lossy(n)) * (beta + q.last_time()).ln();
    Ok(ln.exp())
}

/// Smallest `K > μ` with the Chernoff bound `e^{-μ} (eμ/K)^K ≤ eps` on `P(Poisson(μ) ≥ K)`.
pub fn poisson_tail_level<T: Real>(mu: T, eps: T) -> u64 {
    if mu <= T::zero() {
        return 1;
    }
    let ln_eps = eps.ln();
    let mut k = mu.floor().to_u64().unwrap_or(0) + 1;
    loop {
        let kf = T::from_u64_lossy(k);
        let ln_bound = -mu + kf * (T::one() + mu.ln() - kf.ln());
        if ln_bound <= ln_eps {
            return k;
        }
        k += 1 + k / 64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub enum FddEvaluator<T = f64> {
    Poisson { theta: T },
    MppQuadrature { law: RateLaw<T>, settings: QuadratureSettings<T> },
    PolyaClosedForm { alpha: T, beta: T },
}

impl<T: Real> FddEvaluator<T> {
    pub fn quadrature(law: impl Into<RateLaw<T>>) -> Self {
        FddEvaluator::MppQuadrature { law: law.into(), settings: QuadratureSettings::default() }
    }

    /// Probability with its error estimate (zero for closed forms).
    pub fn evaluate(&self, q: &FddQuery<T>) -> Result<Integral<T>> {
        match self {
            FddEvaluator::Poisson { theta } => {
                if !(*theta > T::zero()) {
                    return Err(Error::InvalidParameter(format!("Poisson rate {theta} must be positive")));
                }
                Ok(Integral { value: poisson_fdd(*theta, q), error: T::zero(), evaluations: 1 })
            }
            FddEvaluator::MppQuadrature { law, settings } => mpp_fdd_quadrature(law, q, settings),
            FddEvaluator::PolyaClosedForm { alpha, beta } => {
                Ok(Integral { value: polya_fdd_closed(*alpha, *beta, q)?, error: T::zero(), evaluations: 1 })
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            FddEvaluator::Poisson { theta } => format!("Poisson({theta})"),
            FddEvaluator::MppQuadrature { law, .. } => format!("MPP[{}] by quadrature", law.name()),
            FddEvaluator::PolyaClosedForm { alpha, beta } => format!("Pólya({alpha}, {beta}) closed form"),
        }
    }
}

impl<T: Real> FddSource<T> for FddEvaluator<T> {
    fn probability(&self, q: &FddQuery<T>) -> Result<T> {
        Ok(self.evaluate(q)?.value.max(T::zero()).min(T::one()))
    }

    fn count_truncation(&self, duration: T, eps: T) -> Result<u64> {
        let half = eps / T::lit(2.0);
        let top_rate = match self {
            FddEvaluator::Poisson { theta } => return Ok(poisson_tail_level(*theta * duration, eps)),
            FddEvaluator::MppQuadrature { law, .. } => law.rate_upper_quantile(half)?,
            FddEvaluator::PolyaClosedForm { alpha, beta } => {
                MixingLaw::Gamma { alpha: *alpha, beta: *beta }.upper_quantile(half)?
            }
        };
        // P(N ≥ K) ≤ P(rate > λ*) + P(Poisson(λ* d) ≥ K)
        Ok(poisson_tail_level(top_rate * duration, half))
    }
}

fn check_times<T: Real>(times: &[T], counts: &[u64]) -> Result<()> {
    if times.len() != counts.len() || times.is_empty() {
        return Err(Error::InvalidQuery("times and counts must be nonempty and of equal length".into()));
    }
    Ok(())
}

/// Multinomial identity residual, LHS − RHS:
/// `P(∩_j {N_{t_j} - N_{t_{j-1}} = κ_j}) - n!/∏κ_j! ∏(Δ_j/t_m)^{κ_j} P(N_{t_m} = n)`,
/// where `counts` are the cumulative counts `n_j = κ_1 + … + κ_j`.
pub fn multinomial_residual<T: Real, F: FddSource<T> + ?Sized>(f: &F, times: &[T], counts: &[u64]) -> Result<T> {
    check_times(times, counts)?;
    let q = FddQuery::from_cumulative(times.to_vec(), counts)?;
    let t_m = q.last_time();
    let n = q.total();
    let ln_coeff = ln_factorial::<T>(n)
        + q.durations()
            .iter()
            .zip(q.increments())
            .map(|(&d, &k)| {
                if k == 0 {
                    T::zero()
                } else {
                    T::from_u64_lossy(k) * (d / t_m).ln() - ln_factorial::<T>(k)
                }
            })
            .sum::<T>();
    let lhs = f.probability(&q)?;
    let total = f.probability(&FddQuery::new(vec![t_m], vec![n])?)?;
    Ok(lhs - ln_coeff.exp() * total)
}

/// Binomial splitting residual, LHS − RHS:
/// `P(N_s = k, N_t - N_s = n - k) - C(n,k) (s/t)^k (1 - s/t)^{n-k} P(N_t = n)`.
pub fn binomial_splitting_residual<T: Real, F: FddSource<T> + ?Sized>(f: &F, s: T, t: T, k: u64, n: u64) -> Result<T> {
    if !(s > T::zero() && s < t) {
        return Err(Error::InvalidQuery(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    if k > n {
        return Err(Error::InvalidQuery(format!("need k ≤ n, got k = {k}, n = {n}")));
    }
    let lhs = f.probability(&FddQuery::new(vec![s, t], vec![k, n - k])?)?;
    let total = f.probability(&FddQuery::new(vec![t], vec![n])?)?;
    let ratio = s / t;
    let mut ln_coeff = ln_binomial::<T>(n, k);
    if k > 0 {
        ln_coeff = ln_coeff + T::from_u64_lossy(k) * ratio.ln();
    }
    if n > k {
        ln_coeff = ln_coeff + T::from_u64_lossy(n - k) * ((t - s) / t).ln();
    }
    Ok(lhs - ln_coeff.exp() * total)
}

/// The four joint probabilities entering the Markov factorization at cumulative counts
/// `n_1 ≤ … ≤ n_{m+1}`: `(A, B, C, D)` with
/// `A = P(∩_{j≤m} {N_{t_j} = n_j})`, `B = P(N_{t_m} = n_m, N_{t_{m+1}} = n_{m+1})`,
/// `C = P(∩_{j≤m+1} {N_{t_j} = n_j})`, `D = P(N_{t_m} = n_m)`.
pub fn markov_queries<T: Real>(times: &[T], counts: &[u64]) -> Result<[FddQuery<T>; 4]> {
    check_times(times, counts)?;
    if times.len() < 2 {
        return Err(Error::InvalidQuery("Markov factorization needs at least two time points".into()));
    }
    let m = times.len() - 1;
    Ok([
        FddQuery::from_cumulative(times[..m].to_vec(), &counts[..m])?,
        FddQuery::from_cumulative(times[m - 1..].to_vec(), &counts[m - 1..])?,
        FddQuery::from_cumulative(times.to_vec(), counts)?,
        FddQuery::new(vec![times[m - 1]], vec![counts[m - 1]])?,
    ])
}

/// Markov factorization residual `A·B − C·D` (see [`markov_queries`]).
pub fn markov_factorization_residual<T: Real, F: FddSource<T> + ?Sized>(f: &F, times: &[T], counts: &[u64]) -> Result<T> {
    let [qa, qb, qc, qd] = markov_queries(times, counts)?;
    let (a, b) = (f.probability(&qa)?, f.probability(&qb)?);
    let (c, d) = (f.probability(&qc)?, f.probability(&qd)?);
    Ok(a * b - c * d)
}

/// `∫ ∏_k (1 - e^{-α(y) w_k}) U(dy)`: the joint interarrival CDF of a mixed Poisson process
/// whose conditional interarrivals are `Exp(α(y))`.
pub fn huang_product_rhs<T: Real>(
    law: &MixingLaw<T>,
    alpha: Transform,
    w: &[T],
    settings: &QuadratureSettings<T>,
) -> Result<Integral<T>> {
    if w.is_empty() {
        return Err(Error::InvalidQuery("at least one waiting-time bound is required".into()));
    }
    if let Some(bad) = w.iter().find(|&&x| !(x > T::zero() && x.is_finite())) {
        return Err(Error::InvalidQuery(format!("waiting-time bound {bad} must be positive")));
    }
    let law = pushforward(law.clone(), alpha)?;
    law.base.integrate_mapped(law.map, |rate| w.iter().map(|&wk| ln_one_minus_exp_neg(rate * wk)).sum(), settings)
}

/// Sum over `κ = 0..K-1` of the query extended by one more interval `(t_m, t_next]`,
/// with `K` chosen so the discarded tail is at most `eps`. Returns `(sum, K)`.
pub fn marginalize_appended<T: Real, F: FddSource<T> + ?Sized>(
    f: &F,
    q: &FddQuery<T>,
    t_next: T,
    eps: T,
) -> Result<(T, u64)> {
    let k_max = f.count_truncation(t_next - q.last_time(), eps)?;
    let mut times = q.times().to_vec();
    times.push(t_next);
    let mut sum = T::zero();
    for k in 0..k_max {
        let mut inc = q.increments().to_vec();
        inc.push(k);
        sum = sum + f.probability(&FddQuery::new(times.clone(), inc)?)?;
    }
    Ok((sum, k_max))
}

/// Sum over all ways of splitting `κ_j` at an inserted time `s ∈ (t_{j-1}, t_j)`.
pub fn split_interior<T: Real, F: FddSource<T> + ?Sized>(f: &F, q: &FddQuery<T>, j: usize, s: T) -> Result<T> {
    let times = q.times();
    let prev = if j == 0 { T::zero() } else { times[j - 1] };
    if j >= times.len() || !(s > prev && s < times[j]) {
        return Err(Error::InvalidQuery(format!("inserted time {s} must lie strictly inside interval {j}")));
    }
    let mut new_times = times.to_vec();
    new_times.insert(j, s);
    let kappa = q.increments()[j];
    let mut sum = T::zero();
    for a in 0..=kappa {
        let mut inc = q.increments().to_vec();
        inc[j] = kappa - a;
        inc.insert(j, a);
        sum = sum + f.probability(&FddQuery::new(new_times.clone(), inc)?)?;
    }
    Ok(sum)
}

/// Total probability over all increment vectors on `times` (m ≤ 2), truncated per interval
/// at level `eps`. Returns `(sum, certified bound on the omitted mass)`.
pub fn normalization<T: Real, F: FddSource<T> + ?Sized>(f: &F, times: &[T], eps: T) -> Result<(T, T)> {
    let probe = FddQuery::new(times.to_vec(), vec![0; times.len()])?;
    let levels = probe
        .durations()
        .iter()
        .map(|&d| f.count_truncation(d, eps))
        .collect::<Result<Vec<_>>>()?;
    let omitted = eps * T::from_usize_lossy(levels.len());
    let sum = match levels.as_slice() {
        [k1] => (0..*k1).map(|a| f.probability(&FddQuery::new(times.to_vec(), vec![a])?)).sum::<Result<T>>()?,
        [k1, k2] => {
            let mut acc = T::zero();
            for a in 0..*k1 {
                for b in 0..*k2 {
                    acc = acc + f.probability(&FddQuery::new(times.to_vec(), vec![a, b])?)?;
                }
            }
            acc
        }
        _ => return Err(Error::InvalidQuery("normalization is enumerated for m ≤ 2 only".into())),
    };
    Ok((sum, omitted))
}

/// Mean and variance of `N_t` from the one-dimensional fdd, truncated at level `eps`.
pub fn count_moments<T: Real, F: FddSource<T> + ?Sized>(f: &F, t: T, eps: T) -> Result<(T, T)> {
    let k_max = f.count_truncation(t, eps)?;
    let (mut m1, mut m2) = (T::zero(), T::zero());
    for k in 0..k_max {
        let p = f.probability(&FddQuery::new(vec![t], vec![k])?)?;
        let kf = T::from_u64_lossy(k);
        m1 = m1 + kf * p;
        m2 = m2 + kf * kf * p;
    }
    Ok((m1, m2 - m1 * m1))
}
