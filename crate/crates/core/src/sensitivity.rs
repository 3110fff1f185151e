//! Shot-noise-limited DC magnetic sensitivity
//! η_B = A·(h/gμ_B)·Δν/(C·√R) and its optimization over microwave power.

use thiserror::Error;

use crate::constants::gyromagnetic_hz_per_t;
use crate::num::Real;
use crate::odmr::PowerResponse;

#[derive(Debug, Error, PartialEq)]
pub enum SensitivityError {
    #[error("invalid sensitivity input: {0}")]
    InvalidInput(String),
    #[error("power range must be nonempty and positive")]
    InvalidRange,
}

/// Inputs to the sensitivity formula. `lineshape_factor` is the numerical
/// parameter A (≈ 0.77 for a Lorentzian profile).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityInput<S> {
    pub lineshape_factor: S,
    pub contrast: S,
    pub fwhm: S,
    pub count_rate: S,
    pub g_factor: S,
}

impl<S: Real> SensitivityInput<S> {
    pub fn new(
        lineshape_factor: S,
        contrast: S,
        fwhm: S,
        count_rate: S,
        g_factor: S,
    ) -> Result<Self, SensitivityError> {
        let all_pos = lineshape_factor > S::zero()
            && contrast > S::zero()
            && fwhm > S::zero()
            && count_rate > S::zero()
            && g_factor > S::zero();
        if !all_pos {
            return Err(SensitivityError::InvalidInput(
                "all fields must be > 0".into(),
            ));
        }
        if !(contrast < S::one()) {
            return Err(SensitivityError::InvalidInput("contrast must be < 1".into()));
        }
        Ok(Self {
            lineshape_factor,
            contrast,
            fwhm,
            count_rate,
            g_factor,
        })
    }

    /// Lorentzian default A = 0.77.
    pub fn lorentzian(contrast: S, fwhm: S, count_rate: S) -> Result<Self, SensitivityError> {
        Self::new(S::of(0.77), contrast, fwhm, count_rate, S::of(2.0))
    }
}

/// η_B in T/√Hz.
pub fn eta_b<S: Real>(inp: &SensitivityInput<S>) -> S {
    let gamma = S::of(gyromagnetic_hz_per_t(inp.g_factor.as_f64()));
    inp.lineshape_factor * inp.fwhm / (gamma * inp.contrast * inp.count_rate.sqrt())
}

/// η_B(P_mw) composed from the power-broadened line parameters.
pub fn sensitivity_vs_mw_power<S: Real>(
    resp: &PowerResponse<S>,
    count_rate: S,
    powers: &[S],
) -> Result<Vec<(S, S)>, SensitivityError> {
    if powers.iter().any(|&p| !(p > S::zero())) {
        return Err(SensitivityError::InvalidRange);
    }
    powers
        .iter()
        .map(|&p| {
            let (c, w) = resp.power_broadened_line(p);
            let inp = SensitivityInput::lorentzian(c, w, count_rate)
                .map_err(|e| SensitivityError::InvalidInput(e.to_string()))?;
            Ok((p, eta_b(&inp)))
        })
        .collect()
}

/// Optimum of a sensitivity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityOptimum<S> {
    pub p_opt: S,
    pub eta_opt: S,
    /// True when the minimum sits on an endpoint of the search range.
    pub boundary: bool,
}

/// Analytic location of the interior optimum in saturation units:
/// η ∝ Δν/C ∝ (1+s)^{3/2}/s, whose derivative vanishes at s = 2.
pub fn optimal_saturation_parameter<S: Real>() -> S {
    S::of(2.0)
}

/// Golden-section search for the minimum of the unimodal η_B(P_mw) curve.
pub fn optimize_sensitivity<S: Real>(
    resp: &PowerResponse<S>,
    count_rate: S,
    p_range: (S, S),
) -> Result<SensitivityOptimum<S>, SensitivityError> {
    let (mut a, mut b) = p_range;
    if !(a > S::zero() && b > a) {
        return Err(SensitivityError::InvalidRange);
    }
    let eta_at = |p: S| -> S {
        let (c, w) = resp.power_broadened_line(p);
        let gamma = S::of(gyromagnetic_hz_per_t(2.0));
        S::of(0.77) * w / (gamma * c * count_rate.sqrt())
    };
    let (lo, hi) = (a, b);
    let gr = S::of((5f64.sqrt() - 1.0) / 2.0);
    let mut x1 = b - gr * (b - a);
    let mut x2 = a + gr * (b - a);
    let mut f1 = eta_at(x1);
    let mut f2 = eta_at(x2);
    for _ in 0..300 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = eta_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = eta_at(x2);
        }
        if (b - a) <= S::of(1e-14) * (a.abs() + b.abs()) {
            break;
        }
    }
    let mut p_opt = (a + b) / S::of(2.0);
    let mut eta_opt = eta_at(p_opt);
    // compare against the endpoints of the original range
    let mut boundary = false;
    for &(p, e) in &[(lo, eta_at(lo)), (hi, eta_at(hi))] {
        if e < eta_opt {
            p_opt = p;
            eta_opt = e;
            boundary = true;
        }
    }
    // the interior search collapsing onto an endpoint is also a boundary optimum
    let width = hi - lo;
    if (p_opt - lo).abs() < S::of(1e-9) * width || (p_opt - hi).abs() < S::of(1e-9) * width {
        boundary = true;
    }
    Ok(SensitivityOptimum {
        p_opt,
        eta_opt,
        boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eta_b_paper_anchor() {
        // C = 0.2, Δν = 110 MHz, R = 3.6e6 counts/s, A = 0.77 → ≈ 8 µT/√Hz
        let inp = SensitivityInput::lorentzian(0.2, 110e6, 3.6e6).unwrap();
        let eta = eta_b(&inp);
        let direct = 0.77 * 110e6 / (2.0 * 1.3996244936e10 * 0.2 * 3.6e6f64.sqrt());
        assert_relative_eq!(eta, direct, max_relative = 1e-12);
        assert!((eta - 8e-6).abs() < 1e-6, "eta = {eta}");
    }

    #[test]
    fn eta_b_scaling() {
        let base = SensitivityInput::lorentzian(0.2, 110e6, 3.6e6).unwrap();
        let mut doubled_r = base;
        doubled_r.count_rate = 2.0 * base.count_rate;
        assert_relative_eq!(
            eta_b(&base) / eta_b(&doubled_r),
            2f64.sqrt(),
            max_relative = 1e-12
        );
        // homogeneity: scaling Δν and C by the same k leaves η_B unchanged
        let mut scaled = base;
        scaled.fwhm = base.fwhm * 3.7;
        scaled.contrast = base.contrast * 3.7;
        assert_eq!(eta_b(&base), eta_b(&scaled));
    }

    #[test]
    fn eta_b_monotone_limits() {
        let mut last = f64::INFINITY;
        for i in 1..100 {
            let c = i as f64 / 101.0;
            let fwhm = 110e6 * (1.0 - c).max(1e-3);
            let inp = SensitivityInput::lorentzian(c, fwhm, 3.6e6).unwrap();
            let eta = eta_b(&inp);
            assert!(eta < last);
            last = eta;
        }
    }

    fn resp() -> PowerResponse<f64> {
        PowerResponse::new(0.55, 0.2, 110e6).unwrap()
    }

    #[test]
    fn curve_is_u_shaped() {
        let powers: Vec<f64> = (1..=200).map(|i| 0.01 * i as f64).collect();
        let curve = sensitivity_vs_mw_power(&resp(), 3.6e6, &powers).unwrap();
        let min_idx = curve
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap()
            .0;
        assert!(min_idx > 0 && min_idx < curve.len() - 1);
        for w in curve[..=min_idx].windows(2) {
            assert!(w[1].1 < w[0].1);
        }
        for w in curve[min_idx..].windows(2) {
            assert!(w[1].1 > w[0].1);
        }
    }

    #[test]
    fn golden_section_matches_analytic_optimum() {
        let r = resp();
        let opt = optimize_sensitivity(&r, 3.6e6, (0.001, 10.0)).unwrap();
        assert!(!opt.boundary);
        let s_opt = opt.p_opt / r.p_sat_mw;
        assert_relative_eq!(
            s_opt,
            optimal_saturation_parameter::<f64>(),
            max_relative = 1e-6
        );
    }

    #[test]
    fn golden_section_matches_brute_force() {
        let r = resp();
        let opt = optimize_sensitivity(&r, 3.6e6, (0.01, 5.0)).unwrap();
        let n = 1_000_000;
        let step = (5.0 - 0.01) / n as f64;
        let powers: Vec<f64> = (0..=n).map(|i| 0.01 + step * i as f64).collect();
        let curve = sensitivity_vs_mw_power(&r, 3.6e6, &powers).unwrap();
        let brute = curve
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert!((opt.p_opt - brute.0).abs() <= step, "golden {},", opt.p_opt);
    }

    #[test]
    fn boundary_optimum_flagged() {
        let r = resp();
        // range entirely left of the interior optimum (~0.55 W)
        let opt = optimize_sensitivity(&r, 3.6e6, (0.001, 0.05)).unwrap();
        assert!(opt.boundary);
        assert_relative_eq!(opt.p_opt, 0.05, max_relative = 1e-6);
    }

    #[test]
    fn two_laser_calibrations_differ() {
        let a = PowerResponse::<f64>::calibrated_5mw_laser();
        let b = PowerResponse::<f64>::calibrated_1mw_laser();
        let oa = optimize_sensitivity(&a, 3.6e6, (0.001, 10.0)).unwrap();
        let ob = optimize_sensitivity(&b, 1.2e6, (0.001, 10.0)).unwrap();
        assert!(oa.p_opt != ob.p_opt);
        assert!(oa.eta_opt != ob.eta_opt);
    }

    #[test]
    fn paper_scale_optimum_in_band() {
        let r = PowerResponse::<f64>::calibrated_5mw_laser();
        let opt = optimize_sensitivity(&r, 3.6e6, (0.001, 10.0)).unwrap();
        assert!(
            opt.eta_opt > 4e-6 && opt.eta_opt < 16e-6,
            "eta_opt = {}",
            opt.eta_opt
        );
    }
}
