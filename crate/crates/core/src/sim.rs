//! Path samplers for the disintegration and direct-Poisson routes, and
//! empirical estimators of fdd probabilities, interarrival CDFs and identity residuals.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{DominatingFunction, InterarrivalKernel, KernelFamily};
use crate::laws::FddSource;
use crate::mixing::{MixingLaw, Transform};
use crate::num::Real;
use crate::path::{CountingPath, FddQuery};
use crate::rng::{Stream, INTERARRIVAL_STREAM, THETA_STREAM};
use crate::special::{erfc, ln_binomial, ln_factorial};
use crate::stats::{ks_test, KsOutcome};

/// Paths with more events than this before the horizon are rejected.
pub const EXPLOSION_LIMIT: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum Route<T = f64> {
    /// Draw θ from the mixing law, then interarrivals from the kernel at θ.
    Disintegration,
    /// Homogeneous Poisson process with a fixed rate.
    DirectPoisson { theta: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan<T = f64> {
    pub route: Route<T>,
    pub kernel: InterarrivalKernel<T>,
    pub mixing: MixingLaw<T>,
    pub horizon: T,
    pub num_paths: u64,
    pub master_seed: u64,
}

impl<T: Real + Serialize> SimulationPlan<T> {
    pub fn validate(&self) -> Result<()> {
        if self.num_paths == 0 {
            return Err(Error::InvalidParameter("num_paths must be at least 1".into()));
        }
        if !(self.horizon > T::zero() && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon {} must be positive", self.horizon)));
        }
        self.kernel.validate()?;
        self.mixing.validate()?;
        self.kernel.transform.check_domain(self.mixing.support())?;
        if let Route::DirectPoisson { theta } = self.route {
            if !(theta > T::zero() && theta.is_finite()) {
                return Err(Error::InvalidParameter(format!("direct Poisson rate {theta} must be positive")));
            }
        }
        Ok(())
    }

    /// Short hex digest of the plan, written into path dumps.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("plans serialize");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// A simulated path together with the mixing parameter it was drawn under.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedPath<T = f64> {
    pub path: CountingPath<T>,
    pub theta: T,
}

/// Path `index` of `plan`; a deterministic function of `(master_seed, index)`.
pub fn sample_path<T: Real + Serialize>(plan: &SimulationPlan<T>, index: u64) -> Result<SimulatedPath<T>> {
    let direct;
    let (kernel, theta) = match plan.route {
        Route::Disintegration => {
            let mut theta_stream = Stream::new(plan.master_seed, index, THETA_STREAM);
            (&plan.kernel, plan.mixing.sample(&mut theta_stream))
        }
        Route::DirectPoisson { theta } => {
            direct = InterarrivalKernel::new(KernelFamily::Exponential, Transform::Identity, DominatingFunction::Rate);
            (&direct, theta)
        }
    };
    let mut stream = Stream::new(plan.master_seed, index, INTERARRIVAL_STREAM);
    let mut events = Vec::new();
    let mut t = T::zero();
    loop {
        let w = kernel.sample_interarrival(theta, &mut stream)?;
        t = t + w;
        if t > plan.horizon {
            break;
        }
        // waiting times below the spacing of floats at t would produce a tie
        if events.last().is_some_and(|&last| t <= last) {
            return Err(Error::InvalidPath(format!("path {index} produced simultaneous events at {t}")));
        }
        events.push(t);
        if events.len() > EXPLOSION_LIMIT {
            return Err(Error::Explosion { path_index: index, limit: EXPLOSION_LIMIT });
        }
    }
    Ok(SimulatedPath { path: CountingPath::new(plan.horizon, events)?, theta })
}

/// All paths of `plan`, in index order. `threads = None` uses the global pool.
pub fn simulate<T: Real + Serialize>(plan: &SimulationPlan<T>, threads: Option<usize>) -> Result<Vec<SimulatedPath<T>>> {
    plan.validate()?;
    let run = || (0..plan.num_paths).into_par_iter().map(|i| sample_path(plan, i)).collect::<Result<Vec<_>>>();
    match threads {
        None => run(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Frequency estimate of a probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalEstimate {
    pub value: f64,
    pub std_error: f64,
    pub num_paths: u64,
}

impl EmpiricalEstimate {
    fn from_hits(hits: u64, n: u64) -> Self {
        let value = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        let std_error = if n == 0 { 0.0 } else { (value * (1.0 - value) / n as f64).sqrt() };
        Self { value, std_error, num_paths: n }
    }

    /// `(value − exact) / std_error`; infinite when the error is zero and the values differ.
    pub fn z_score(&self, exact: f64) -> f64 {
        z_of(self.value - exact, self.std_error)
    }
}

fn z_of(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

fn check_horizon<T: Real>(paths: &[SimulatedPath<T>], needed: T) -> Result<()> {
    match paths.iter().find(|p| p.path.horizon() < needed) {
        Some(p) => Err(Error::OutOfRange { time: needed.to_f64_lossy(), horizon: p.path.horizon().to_f64_lossy() }),
        None => Ok(()),
    }
}

/// Fraction of paths realizing the fdd event `q`.
pub fn empirical_fdd<T: Real>(paths: &[SimulatedPath<T>], q: &FddQuery<T>) -> Result<EmpiricalEstimate> {
    check_horizon(paths, q.last_time())?;
    let mut hits = 0u64;
    for p in paths {
        if q.matches(&p.path)? {
            hits += 1;
        }
    }
    Ok(EmpiricalEstimate::from_hits(hits, paths.len() as u64))
}

/// Fraction of paths with `W_k ≤ w_k` for all `k ≤ r`.
///
/// Requires every horizon to be at least `Σ w_k`, so the event is decided by the truncated path.
pub fn empirical_joint_interarrival_cdf<T: Real>(paths: &[SimulatedPath<T>], w: &[T]) -> Result<EmpiricalEstimate> {
    if w.is_empty() || w.iter().any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidQuery("waiting-time bounds must be positive and nonempty".into()));
    }
    let window: T = w.iter().copied().sum();
    if let Some(p) = paths.iter().find(|p| p.path.horizon() < window) {
        return Err(Error::UndecidableEvent { horizon: p.path.horizon().to_f64_lossy(), required: window.to_f64_lossy() });
    }
    let hits = paths
        .iter()
        .filter(|p| {
            let waits = p.path.interarrivals();
            waits.len() >= w.len() && waits.iter().zip(w).all(|(a, b)| a <= b)
        })
        .count() as u64;
    Ok(EmpiricalEstimate::from_hits(hits, paths.len() as u64))
}

/// Empirical identity residual with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalResidual {
    pub value: f64,
    pub std_error: f64,
    pub num_paths: u64,
}

impl EmpiricalResidual {
    pub fn z_score(&self) -> f64 {
        z_of(self.value, self.std_error)
    }

    /// Mean and standard error of per-path scores.
    fn from_scores(scores: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut s, mut ss) = (0u64, 0.0, 0.0);
        for x in scores {
            n += 1;
            s += x;
            ss += x * x;
        }
        let nf = n.max(1) as f64;
        let mean = s / nf;
        let var = (ss / nf - mean * mean).max(0.0);
        Self { value: mean, std_error: (var / nf).sqrt(), num_paths: n }
    }
}

/// Per-path indicator of each query, evaluated once.
fn indicators<T: Real>(paths: &[SimulatedPath<T>], queries: &[FddQuery<T>]) -> Result<Vec<Vec<bool>>> {
    let needed = queries.iter().map(|q| q.last_time()).fold(T::zero(), T::max);
    check_horizon(paths, needed)?;
    paths
        .iter()
        .map(|p| queries.iter().map(|q| q.matches(&p.path)).collect::<Result<Vec<_>>>())
        .collect()
}

/// Empirical multinomial residual; linear in indicators, so its standard error is exact.
pub fn empirical_multinomial_residual<T: Real>(
    paths: &[SimulatedPath<T>],
    times: &[T],
    counts: &[u64],
) -> Result<EmpiricalResidual> {
    let q = FddQuery::from_cumulative(times.to_vec(), counts)?;
    let t_m = q.last_time();
    let n = q.total();
    let ln_coeff = ln_factorial::<f64>(n)
        + q.durations()
            .iter()
            .zip(q.increments())
            .map(|(&d, &k)| if k == 0 { 0.0 } else { k as f64 * (d / t_m).to_f64_lossy().ln() - ln_factorial::<f64>(k) })
            .sum::<f64>();
    let coeff = ln_coeff.exp();
    let total = FddQuery::new(vec![t_m], vec![n])?;
    let ind = indicators(paths, &[q, total])?;
    Ok(EmpiricalResidual::from_scores(
        ind.iter().map(|i| f64::from(u8::from(i[0])) - coeff * f64::from(u8::from(i[1]))),
    ))
}

/// Empirical binomial splitting residual; exact standard error.
pub fn empirical_splitting_residual<T: Real>(
    paths: &[SimulatedPath<T>],
    s: T,
    t: T,
    k: u64,
    n: u64,
) -> Result<EmpiricalResidual> {
    if !(s > T::zero() && s < t) || k > n {
        return Err(Error::InvalidQuery("need 0 < s < t and k ≤ n".into()));
    }
    let ratio = (s / t).to_f64_lossy();
    let coeff = (ln_binomial::<f64>(n, k)
        + if k > 0 { k as f64 * ratio.ln() } else { 0.0 }
        + if n > k { (n - k) as f64 * (1.0 - ratio).ln() } else { 0.0 })
    .exp();
    let split = FddQuery::new(vec![s, t], vec![k, n - k])?;
    let total = FddQuery::new(vec![t], vec![n])?;
    let ind = indicators(paths, &[split, total])?;
    Ok(EmpiricalResidual::from_scores(
        ind.iter().map(|i| f64::from(u8::from(i[0])) - coeff * f64::from(u8::from(i[1]))),
    ))
}

/// Empirical Markov factorization residual `p_A p_B − p_C p_D`, standard error from its influence function.
pub fn empirical_markov_residual<T: Real>(
    paths: &[SimulatedPath<T>],
    times: &[T],
    counts: &[u64],
) -> Result<EmpiricalResidual> {
    let queries = crate::laws::markov_queries(times, counts)?;
    let ind = indicators(paths, &queries)?;
    let n = ind.len().max(1) as f64;
    let mut p = [0.0; 4];
    for row in &ind {
        for (acc, &hit) in p.iter_mut().zip(row) {
            *acc += f64::from(u8::from(hit));
        }
    }
    p.iter_mut().for_each(|x| *x /= n);
    let [pa, pb, pc, pd] = p;
    let value = pa * pb - pc * pd;
    let scores = ind.iter().map(|row| {
        let x = |j: usize| f64::from(u8::from(row[j])) - p[j];
        pb * x(0) + pa * x(1) - pd * x(2) - pc * x(3)
    });
    let inf = EmpiricalResidual::from_scores(scores);
    Ok(EmpiricalResidual { value, std_error: inf.std_error, num_paths: ind.len() as u64 })
}

/// Frequency-based fdd source over a set of simulated paths.
pub struct EmpiricalFdd<'a, T = f64> {
    pub paths: &'a [SimulatedPath<T>],
}

impl<T: Real> FddSource<T> for EmpiricalFdd<'_, T> {
    fn probability(&self, q: &FddQuery<T>) -> Result<T> {
        Ok(T::lit(empirical_fdd(self.paths, q)?.value))
    }

    fn count_truncation(&self, _duration: T, _eps: T) -> Result<u64> {
        Ok(self.paths.iter().map(|p| p.path.len() as u64).max().unwrap_or(0) + 1)
    }
}

/// Probability-integral-transform test of conditional interarrival laws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitReport {
    pub samples: usize,
    /// Paths with fewer than the requested number of gaps before the horizon.
    pub short_paths: u64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub serial_pairs: usize,
    pub serial_z: f64,
    pub serial_p_value: f64,
}

/// PIT test of the first `max_gaps` interarrivals of each path against `cdf(θ, w)`.
///
/// A gap `W_i` is only observed when `W_i ≤ c_i = horizon − T_{i−1}`, so each
/// observed gap is transformed by `F(W_i) / F(c_i)`, which is uniform given the
/// past under the null. Pooled uniformity is tested with Kolmogorov–Smirnov and
/// independence with the lag-one product `(u_i − ½)(u_{i+1} − ½)`.
pub fn conditional_pit_check<T: Real>(
    paths: &[SimulatedPath<T>],
    max_gaps: usize,
    cdf: impl Fn(T, T) -> Result<T>,
) -> Result<PitReport> {
    if max_gaps == 0 {
        return Err(Error::InvalidParameter("at least one gap per path is required".into()));
    }
    let mut us = Vec::new();
    let mut short = 0u64;
    let (mut lag_sum, mut lag_sq, mut pairs) = (0.0, 0.0, 0usize);
    for p in paths {
        let horizon = p.path.horizon();
        let mut prev_time = T::zero();
        let mut prev_u: Option<f64> = None;
        let events = p.path.arrivals();
        if events.len() < max_gaps {
            short += 1;
        }
        for &t in events.iter().take(max_gaps) {
            let full = cdf(p.theta, horizon - prev_time)?;
            let u = (cdf(p.theta, t - prev_time)? / full).to_f64_lossy().clamp(0.0, 1.0);
            if let Some(v) = prev_u {
                let prod = (v - 0.5) * (u - 0.5);
                lag_sum += prod;
                lag_sq += prod * prod;
                pairs += 1;
            }
            us.push(u);
            prev_u = Some(u);
            prev_time = t;
        }
    }
    if us.is_empty() {
        return Err(Error::InvalidParameter("no path has an observed interarrival".into()));
    }
    let KsOutcome { statistic, p_value, n } = ks_test(&mut us, |x| x);
    let serial_z = if lag_sq > 0.0 { lag_sum / lag_sq.sqrt() } else { 0.0 };
    Ok(PitReport {
        samples: n,
        short_paths: short,
        ks_statistic: statistic,
        ks_p_value: p_value,
        serial_pairs: pairs,
        serial_z,
        serial_p_value: erfc(serial_z.abs() / std::f64::consts::SQRT_2),
    })
}

/// PIT test with each path's own θ pushed through the kernel's CDF `F_{h(θ)}`.
pub fn conditional_poisson_check<T: Real>(
    paths: &[SimulatedPath<T>],
    kernel: &InterarrivalKernel<T>,
    max_gaps: usize,
) -> Result<PitReport> {
    conditional_pit_check(paths, max_gaps, |theta, w| kernel.cdf(theta, w))
}

/// Mean and variance of `N_t` across paths at each requested time.
pub fn count_summary<T: Real>(paths: &[SimulatedPath<T>], times: &[T]) -> Result<Vec<(f64, f64, f64)>> {
    let n = paths.len().max(1) as f64;
    times
        .iter()
        .map(|&t| {
            let (mut s, mut ss) = (0.0, 0.0);
            for p in paths {
                let c = p.path.count(t)? as f64;
                s += c;
                ss += c * c;
            }
            let mean = s / n;
            let var = if paths.len() > 1 { (ss - n * mean * mean) / (n - 1.0) } else { 0.0 };
            Ok((t.to_f64_lossy(), mean, var))
        })
        .collect()
}

/// Writes the path dump: a `#` header with plan hash and seed, then one line of
/// comma-separated event times per path.
pub fn write_path_dump<T: Real + Serialize>(
    out: &mut impl Write,
    plan: &SimulationPlan<T>,
    paths: &[SimulatedPath<T>],
) -> std::io::Result<()> {
    writeln!(
        out,
        "# plan_hash={} seed={} paths={} horizon={}",
        plan.hash(),
        plan.master_seed,
        paths.len(),
        plan.horizon
    )?;
    for p in paths {
        let line = p.path.arrivals().iter().map(|t| t.to_f64_lossy().to_string()).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}")?;
    }
    Ok(())
}
