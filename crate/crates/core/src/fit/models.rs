//! Model functions and their analytic Jacobians.

use crate::num::Real;

/// Closed interval bound for one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Real> Bound<S> {
    pub fn free() -> Self {
        Self {
            lo: S::neg_infinity(),
            hi: S::infinity(),
        }
    }

    pub fn nonneg() -> Self {
        Self {
            lo: S::zero(),
            hi: S::infinity(),
        }
    }

    pub fn positive() -> Self {
        Self {
            lo: S::of(1e-300),
            hi: S::infinity(),
        }
    }

    pub fn clamp(&self, x: S) -> S {
        if x < self.lo {
            self.lo
        } else if x > self.hi {
            self.hi
        } else {
            x
        }
    }
}

/// The fit models used across the toolkit.
///
/// Parameter layouts:
/// - `MultiLorentzian(n)`: `[baseline, center_1, fwhm_1, contrast_1, ...]`,
///   f(ν) = baseline·(1 − Σᵢ Cᵢ·(Δνᵢ/2)²/((ν−νᵢ)² + (Δνᵢ/2)²))
/// - `Saturation`: `[i_sat, p_sat]`, I(P) = I_sat/(1 + P_sat/P)
/// - `ExpDecay` / `EchoDecay`: `[amp, t_const, offset]`, a·e^(−t/T) + c
/// - `RabiTwoTone`: `[offset, b1, tau_a, f1, phi1, b2, tau_b, f2, phi2]`,
///   A + B₁e^(−τ/τ_a)cos(2πf₁τ+φ₁) + B₂e^(−τ/τ_b)cos(2πf₂τ+φ₂)
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    MultiLorentzian(usize),
    Saturation,
    ExpDecay,
    EchoDecay,
    RabiTwoTone,
}

impl FitModel {
    pub fn n_params(&self) -> usize {
        match self {
            FitModel::MultiLorentzian(n) => 1 + 3 * n,
            FitModel::Saturation => 2,
            FitModel::ExpDecay | FitModel::EchoDecay => 3,
            FitModel::RabiTwoTone => 9,
        }
    }

    pub fn model_id(&self) -> String {
        match self {
            FitModel::MultiLorentzian(n) => format!("multi_lorentzian({n})"),
            FitModel::Saturation => "saturation".into(),
            FitModel::ExpDecay => "exp_decay".into(),
            FitModel::EchoDecay => "echo_decay".into(),
            FitModel::RabiTwoTone => "rabi_two_tone".into(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            FitModel::MultiLorentzian(n) => {
                let mut names = vec!["baseline".to_string()];
                for i in 1..=*n {
                    names.push(format!("center_{i}"));
                    names.push(format!("fwhm_{i}"));
                    names.push(format!("contrast_{i}"));
                }
                names
            }
            FitModel::Saturation => vec!["i_sat".into(), "p_sat".into()],
            FitModel::ExpDecay | FitModel::EchoDecay => {
                vec!["amp".into(), "t_const".into(), "offset".into()]
            }
            FitModel::RabiTwoTone => vec![
                "offset".into(),
                "b1".into(),
                "tau_a".into(),
                "f1".into(),
                "phi1".into(),
                "b2".into(),
                "tau_b".into(),
                "f2".into(),
                "phi2".into(),
            ],
        }
    }

    pub fn default_bounds<S: Real>(&self) -> Vec<Bound<S>> {
        match self {
            FitModel::MultiLorentzian(n) => {
                let mut b = vec![Bound::nonneg()];
                for _ in 0..*n {
                    b.push(Bound::free()); // center
                    b.push(Bound::positive()); // fwhm
                    b.push(Bound {
                        lo: S::zero(),
                        hi: S::of(0.999_999),
                    }); // contrast
                }
                b
            }
            FitModel::Saturation => vec![Bound::nonneg(), Bound::positive()],
            FitModel::ExpDecay | FitModel::EchoDecay => {
                vec![Bound::free(), Bound::positive(), Bound::free()]
            }
            FitModel::RabiTwoTone => vec![
                Bound::free(),
                Bound::free(),
                Bound::positive(),
                Bound::nonneg(),
                Bound::free(),
                Bound::free(),
                Bound::positive(),
                Bound::nonneg(),
                Bound::free(),
            ],
        }
    }

    pub fn eval<S: Real>(&self, x: S, p: &[S]) -> S {
        match self {
            FitModel::MultiLorentzian(n) => {
                let mut dip = S::zero();
                for i in 0..*n {
                    let (c, w, a) = (p[1 + 3 * i], p[2 + 3 * i], p[3 + 3 * i]);
                    let h = w / S::of(2.0);
                    let d = x - c;
                    dip = dip + a * h * h / (d * d + h * h);
                }
                p[0] * (S::one() - dip)
            }
            FitModel::Saturation => p[0] / (S::one() + p[1] / x),
            FitModel::ExpDecay | FitModel::EchoDecay => p[0] * (-x / p[1]).exp() + p[2],
            FitModel::RabiTwoTone => {
                let tau = x;
                let two_pi = S::of(std::f64::consts::TAU);
                let tone = |b: S, t: S, f: S, phi: S| {
                    b * (-tau / t).exp() * (two_pi * f * tau + phi).cos()
                };
                p[0] + tone(p[1], p[2], p[3], p[4]) + tone(p[5], p[6], p[7], p[8])
            }
        }
    }

    /// Analytic partial derivatives ∂f/∂pⱼ at `x`, written into `row`.
    pub fn jacobian_row<S: Real>(&self, x: S, p: &[S], row: &mut [S]) {
        match self {
            FitModel::MultiLorentzian(n) => {
                let mut dip = S::zero();
                for i in 0..*n {
                    let (c, w, a) = (p[1 + 3 * i], p[2 + 3 * i], p[3 + 3 * i]);
                    let h = w / S::of(2.0);
                    let d = x - c;
                    let denom = d * d + h * h;
                    let lor = h * h / denom;
                    dip = dip + a * lor;
                    let b = p[0];
                    // ∂f/∂center = −b·a·∂L/∂c, with ∂L/∂c = 2h²d/denom²
                    row[1 + 3 * i] = -b * a * S::of(2.0) * h * h * d / (denom * denom);
                    // ∂L/∂w = (h/denom)(1 − L)
                    row[2 + 3 * i] = -b * a * (h / denom) * (S::one() - lor);
                    row[3 + 3 * i] = -b * lor;
                }
                row[0] = S::one() - dip;
            }
            FitModel::Saturation => {
                let denom = S::one() + p[1] / x;
                row[0] = S::one() / denom;
                row[1] = -p[0] / (denom * denom * x);
            }
            FitModel::ExpDecay | FitModel::EchoDecay => {
                let e = (-x / p[1]).exp();
                row[0] = e;
                row[1] = p[0] * e * x / (p[1] * p[1]);
                row[2] = S::one();
            }
            FitModel::RabiTwoTone => {
                row[0] = S::one();
                let tau = x;
                let two_pi = S::of(std::f64::consts::TAU);
                for k in 0..2 {
                    let o = 1 + 4 * k;
                    let (b, t, f, phi) = (p[o], p[o + 1], p[o + 2], p[o + 3]);
                    let e = (-tau / t).exp();
                    let arg = two_pi * f * tau + phi;
                    let (sin, cos) = (arg.sin(), arg.cos());
                    row[o] = e * cos;
                    row[o + 1] = b * e * cos * tau / (t * t);
                    row[o + 2] = -b * e * sin * two_pi * tau;
                    row[o + 3] = -b * e * sin;
                }
            }
        }
    }
}
