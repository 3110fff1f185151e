//! CW ODMR spectrum synthesis: baseline photon rate minus Lorentzian dips,
//! with microwave-power-dependent contrast and linewidth, and Poisson shot
//! noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum OdmrError {
    #[error("frequency grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("invalid line parameters: {0}")]
    InvalidLine(String),
    #[error("summed dip contrast reaches {max_sum} at {at_hz} Hz; counts would go negative")]
    ContrastOverflow { max_sum: f64, at_hz: f64 },
    #[error("dwell time must be > 0")]
    InvalidDwell,
    #[error("baseline rate must be >= 0")]
    InvalidBaseline,
}

/// One Lorentzian ODMR dip: center frequency, FWHM and fractional contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianLine<S> {
    pub center: S,
    pub fwhm: S,
    pub contrast: S,
}

impl<S: Real> LorentzianLine<S> {
    pub fn new(center: S, fwhm: S, contrast: S) -> Result<Self, OdmrError> {
        if !(fwhm > S::zero()) {
            return Err(OdmrError::InvalidLine("fwhm must be > 0".into()));
        }
        if !(contrast >= S::zero() && contrast < S::one()) {
            return Err(OdmrError::InvalidLine("contrast must be in [0, 1)".into()));
        }
        Ok(Self { center, fwhm, contrast })
    }

    /// Dip profile C·(Δν/2)² / ((ν−ν₀)² + (Δν/2)²), the fractional PL drop at ν.
    pub fn dip(&self, nu: S) -> S {
        let hw = self.fwhm / S::of(2.0);
        let d = nu - self.center;
        self.contrast * hw * hw / (d * d + hw * hw)
    }
}

/// Frequency-swept photon-count spectrum, synthetic or measured.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum<S> {
    pub freqs: Vec<S>,
    pub counts: Vec<S>,
    pub dwell_time_s: S,
    pub baseline_rate: S,
}

/// Noiseless spectrum: counts(ν) = R·dwell·(1 − Σᵢ dipᵢ(ν)).
pub fn synth_spectrum<S: Real>(
    lines: &[LorentzianLine<S>],
    grid: &[S],
    baseline_rate: S,
    dwell_s: S,
) -> Result<OdmrSpectrum<S>, OdmrError> {
    if !(dwell_s > S::zero()) {
        return Err(OdmrError::InvalidDwell);
    }
    if !(baseline_rate >= S::zero()) {
        return Err(OdmrError::InvalidBaseline);
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OdmrError::GridNotIncreasing);
    }
    let mut counts = Vec::with_capacity(grid.len());
    for &nu in grid {
        let total_dip: S = lines.iter().map(|l| l.dip(nu)).sum();
        if total_dip >= S::one() {
            return Err(OdmrError::ContrastOverflow {
                max_sum: total_dip.as_f64(),
                at_hz: nu.as_f64(),
            });
        }
        counts.push(baseline_rate * dwell_s * (S::one() - total_dip));
    }
    Ok(OdmrSpectrum {
        freqs: grid.to_vec(),
        counts,
        dwell_time_s: dwell_s,
        baseline_rate,
    })
}

/// Microwave-power response of a single ODMR line.
///
/// Saturation forms C(s) = C_∞·s/(1+s) and Δν(s) = Δν₀·√(1+s) with
/// s = P/P_sat. The paper defers the exact forms to its Supporting
/// Information; these are the standard two-level saturation expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerResponse<S> {
    pub c_inf: S,
    pub p_sat_mw: S,
    pub linewidth_0: S,
}

impl<S: Real> PowerResponse<S> {
    pub fn new(c_inf: S, p_sat_mw: S, linewidth_0: S) -> Result<Self, OdmrError> {
        if !(c_inf > S::zero() && c_inf < S::one()) {
            return Err(OdmrError::InvalidLine("c_inf must be in (0, 1)".into()));
        }
        if !(p_sat_mw > S::zero()) {
            return Err(OdmrError::InvalidLine("p_sat_mw must be > 0".into()));
        }
        if !(linewidth_0 > S::zero()) {
            return Err(OdmrError::InvalidLine("linewidth_0 must be > 0".into()));
        }
        Ok(Self { c_inf, p_sat_mw, linewidth_0 })
    }

    /// (contrast, fwhm) at microwave power `p_mw` (watts).
    pub fn power_broadened_line(&self, p_mw: S) -> (S, S) {
        let s = p_mw / self.p_sat_mw;
        let contrast = self.c_inf * s / (S::one() + s);
        let fwhm = self.linewidth_0 * (S::one() + s).sqrt();
        (contrast, fwhm)
    }

    /// Fit P_sat to measured (power, contrast) anchors by least squares on
    /// relative contrast error, holding C_∞ and Δν₀ fixed.
    pub fn calibrate(c_inf: S, linewidth_0: S, anchors: &[(S, S)]) -> Self {
        let objective = |p_sat: f64| -> f64 {
            anchors
                .iter()
                .map(|&(p, c)| {
                    let s = p.as_f64() / p_sat;
                    let model = c_inf.as_f64() * s / (1.0 + s);
                    let rel = model / c.as_f64() - 1.0;
                    rel * rel
                })
                .sum()
        };
        // coarse log-spaced scan, then golden-section refinement
        let mut best = (1e-3, objective(1e-3));
        let mut p = 1e-3;
        while p < 1e3 {
            let f = objective(p);
            if f < best.1 {
                best = (p, f);
            }
            p *= 1.05;
        }
        let (mut a, mut b) = (best.0 / 1.1, best.0 * 1.1);
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let x1 = b - gr * (b - a);
            let x2 = a + gr * (b - a);
            if objective(x1) < objective(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        Self {
            c_inf,
            p_sat_mw: S::of(0.5 * (a + b)),
            linewidth_0,
        }
    }

    /// Calibration for 5 mW laser excitation: C_∞ = 0.55 with P_sat fit to
    /// the measured anchors C(2 W) = 0.46 and C(0.04 W) ≈ 0.10, Δν₀ = 110 MHz.
    pub fn calibrated_5mw_laser() -> Self {
        Self::calibrate(
            S::of(0.55),
            S::of(110e6),
            &[(S::of(2.0), S::of(0.46)), (S::of(0.04), S::of(0.10))],
        )
    }

    /// Calibration for 1 mW laser excitation: lower saturation contrast and
    /// narrower zero-power linewidth than the 5 mW set.
    pub fn calibrated_1mw_laser() -> Self {
        Self {
            c_inf: S::of(0.38),
            p_sat_mw: S::of(0.16),
            linewidth_0: S::of(95e6),
        }
    }
}

/// Poisson-sample each bin of a noiseless spectrum. Deterministic given the
/// seed; each bin draws from its own counter-based substream, so the result
/// does not depend on evaluation order.
pub fn add_shot_noise<S: Real>(spec: &OdmrSpectrum<S>, seed: u64) -> OdmrSpectrum<S> {
    let counts = spec
        .counts
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            let mean = mean.as_f64();
            if mean <= 0.0 {
                return S::zero();
            }
            let mut rng = bin_rng(seed, i as u64);
            let draw = Poisson::new(mean).expect("positive mean").sample(&mut rng);
            S::of(draw)
        })
        .collect();
    OdmrSpectrum {
        freqs: spec.freqs.clone(),
        counts,
        dwell_time_s: spec.dwell_time_s,
        baseline_rate: spec.baseline_rate,
    }
}

/// Substream for bin `index` of a run seeded with `seed` (SplitMix64 mix).
pub(crate) fn bin_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Uniform f64 in [0,1) helper for substreams (used by the Monte Carlo code).
pub(crate) fn uniform01(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen::<f64>()
}
