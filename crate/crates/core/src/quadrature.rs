//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The panel with the largest error estimate is bisected until the summed
//! estimate meets `max(abs_tol, rel_tol * |value|)` or the roundoff level of `∫|f|`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Controls for [`integrate`] and for the mixture integrals built on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct QuadratureSettings<T = f64> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_subdivisions: usize,
    /// Equal panels the interval is cut into before adapting.
    pub initial_panels: usize,
    /// Mass discarded in each tail when a mixing law's support is truncated to quantiles.
    pub tail_mass: T,
}

impl<T: Real> Default for QuadratureSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10).max(T::tolerance_floor()),
            abs_tol: T::zero(),
            max_subdivisions: 4_000,
            initial_panels: 64,
            tail_mass: T::lit(1e-14).max(T::epsilon()),
        }
    }
}

impl<T: Real> QuadratureSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > T::zero()) || self.abs_tol < T::zero() {
            return Err(Error::InvalidParameter("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions == 0 || self.initial_panels == 0 {
            return Err(Error::InvalidParameter("quadrature needs at least one panel".into()));
        }
        if !(self.tail_mass > T::zero() && self.tail_mass < T::lit(0.5)) {
            return Err(Error::InvalidParameter("tail mass must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Value of an integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integral<T = f64> {
    pub value: T,
    pub error: T,
    pub evaluations: usize,
}

impl<T: Real> Integral<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), error: T::zero(), evaluations: 0 }
    }
}

struct Panel<T> {
    lo: T,
    hi: T,
    value: T,
    error: T,
    magnitude: T,
}

impl<T: Real> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Panel<T> {}
impl<T: Real> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal)
    }
}

fn kronrod<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> Result<Panel<T>> {
    let half = (hi - lo) / T::lit(2.0);
    let center = lo + half;
    let fc = f(center);
    let mut k = fc * T::lit(WGK[7]);
    let mut m = fc.abs() * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    let mut finite = fc.is_finite();
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let (left, right) = (f(center - dx), f(center + dx));
        let pair = left + right;
        finite &= pair.is_finite();
        m = m + (left.abs() + right.abs()) * T::lit(WGK[j]);
        k = k + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            g = g + pair * T::lit(WG[j / 2]);
        }
    }
    if !finite {
        return Err(Error::InvalidParameter(format!(
            "integrand is not finite on [{}, {}]",
            lo.to_f64_lossy(),
            hi.to_f64_lossy()
        )));
    }
    Ok(Panel {
        lo,
        hi,
        value: k * half,
        error: ((k - g) * half).abs(),
        magnitude: m * half.abs(),
    })
}

/// Integrates `f` over the finite interval `[lo, hi]`.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, lo: T, hi: T, settings: &QuadratureSettings<T>) -> Result<Integral<T>> {
    settings.validate()?;
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidParameter("integration bounds must be finite and ordered".into()));
    }
    if hi == lo {
        return Ok(Integral::zero());
    }
    let width = (hi - lo) / T::from_usize_lossy(settings.initial_panels);
    let mut heap = BinaryHeap::with_capacity(settings.initial_panels * 2);
    for i in 0..settings.initial_panels {
        let a = lo + width * T::from_usize_lossy(i);
        let b = if i + 1 == settings.initial_panels { hi } else { a + width };
        heap.push(kronrod(&f, a, b)?);
    }
    let mut evaluations = 15 * settings.initial_panels;
    let mut subdivisions = settings.initial_panels;
    loop {
        let (value, error, magnitude) = heap
            .iter()
            .fold((T::zero(), T::zero(), T::zero()), |(v, e, m), p| (v + p.value, e + p.error, m + p.magnitude));
        // cancellation in ∫|f| bounds the attainable accuracy
        let roundoff = magnitude * T::epsilon() * T::lit(50.0);
        if error <= settings.abs_tol.max(settings.rel_tol * value.abs()).max(roundoff) {
            return Ok(Integral { value, error, evaluations });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = (worst.lo + worst.hi) / T::lit(2.0);
        if subdivisions >= settings.max_subdivisions || !(mid > worst.lo && mid < worst.hi) {
            return Err(Error::QuadratureNonConvergence {
                lower: lo.to_f64_lossy(),
                upper: hi.to_f64_lossy(),
                value: value.to_f64_lossy(),
                error: error.to_f64_lossy(),
                evaluations,
            });
        }
        heap.push(kronrod(&f, worst.lo, mid)?);
        heap.push(kronrod(&f, mid, worst.hi)?);
        evaluations += 30;
        subdivisions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, &QuadratureSettings::default()).unwrap();
        assert_relative_eq!(r.value, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn peaked_integrand_converges() {
        let r = integrate(|x: f64| (-(x - 0.3) * (x - 0.3) * 1e4).exp(), -5.0, 5.0, &QuadratureSettings::default()).unwrap();
        assert_relative_eq!(r.value, std::f64::consts::PI.sqrt() / 100.0, max_relative = 1e-10);
    }

    #[test]
    fn exponential_moments() {
        let r = integrate(|x: f64| x * (-x).exp(), 0.0, 60.0, &QuadratureSettings::default()).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let s = QuadratureSettings { max_subdivisions: 3, initial_panels: 1, ..Default::default() };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 1e-300, 1.0, &s).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }

    #[test]
    fn non_finite_integrand_rejected() {
        let err = integrate(|_x: f64| f64::NAN, 0.0, 1.0, &QuadratureSettings::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn single_precision_defaults_are_reachable() {
        let r = integrate(|x: f32| x.sin(), 0.0, std::f32::consts::PI, &QuadratureSettings::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }
}
