//! Emission and excitation of a dipole near a layered metal stack.
//!
//! The emitter sits in a semi-infinite host a height `d` above a planar
//! stack (e.g. gold film on sapphire). Decay rates follow the classical
//! dipole-above-layered-media theory: the normalized total rate is an
//! angular-spectrum integral of the stack reflection coefficient over
//! propagating and evanescent waves, and the upward radiated / collected
//! rates integrate the interference pattern over the escape cone. All rates
//! are relative to the same dipole in the unbounded host.
//!
//! The host's top surface (hBN/air) is not modeled; the flake is treated as
//! semi-infinite above the stack.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PlasmonError {
    #[error("quadrature failed to reach relative tolerance {tol} ({context})")]
    QuadratureNotConverged { tol: f64, context: &'static str },
    #[error("wavelength {wavelength_nm} nm outside tabulated range [{min_nm:.0}, {max_nm:.0}] nm")]
    WavelengthOutOfRange {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
}

/// Measured gold optical constants (photon energy eV, n, k), visible/NIR.
/// Johnson & Christy 1972 bulk values.
const GOLD_NK: &[(f64, f64, f64)] = &[
    (0.64, 0.92, 13.78),
    (0.77, 0.56, 11.21),
    (0.89, 0.43, 9.519),
    (1.02, 0.35, 8.145),
    (1.14, 0.27, 7.150),
    (1.26, 0.22, 6.350),
    (1.39, 0.17, 5.663),
    (1.51, 0.16, 5.083),
    (1.64, 0.14, 4.542),
    (1.76, 0.13, 4.103),
    (1.88, 0.14, 3.697),
    (2.01, 0.21, 3.272),
    (2.13, 0.29, 2.863),
    (2.26, 0.43, 2.455),
    (2.38, 0.62, 2.081),
    (2.50, 1.04, 1.833),
    (2.63, 1.31, 1.849),
    (2.75, 1.38, 1.914),
    (2.88, 1.45, 1.948),
    (3.00, 1.46, 1.958),
];

const EV_NM: f64 = 1239.841984;

/// Interpolated gold relative permittivity at `wavelength_nm`.
pub fn gold_permittivity(wavelength_nm: f64) -> Result<Complex64, PlasmonError> {
    let ev = EV_NM / wavelength_nm;
    let (min_ev, max_ev) = (GOLD_NK[0].0, GOLD_NK[GOLD_NK.len() - 1].0);
    if !(min_ev..=max_ev).contains(&ev) {
        return Err(PlasmonError::WavelengthOutOfRange {
            wavelength_nm,
            min_nm: EV_NM / max_ev,
            max_nm: EV_NM / min_ev,
        });
    }
    let i = GOLD_NK.partition_point(|row| row.0 < ev).clamp(1, GOLD_NK.len() - 1);
    let (e0, n0, k0) = GOLD_NK[i - 1];
    let (e1, n1, k1) = GOLD_NK[i];
    let f = (ev - e0) / (e1 - e0);
    let n = n0 + f * (n1 - n0);
    let k = k0 + f * (k1 - k0);
    let nk = Complex64::new(n, k);
    Ok(nk * nk)
}

/// Sapphire relative permittivity (weakly dispersive; constant n = 1.76).
pub const SAPPHIRE_EPS: f64 = 1.76 * 1.76;
/// Host (hBN flake) relative permittivity, isotropic average n = 1.85.
pub const HBN_EPS: f64 = 1.85 * 1.85;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub eps: Complex64,
    pub thickness_nm: f64,
}

/// Planar stack below the emitter's host half-space.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub host_eps: f64,
    pub layers: Vec<Layer>,
    pub substrate_eps: Complex64,
}

impl Stack {
    pub fn gold_on_sapphire(
        gold_thickness_nm: f64,
        wavelength_nm: f64,
        host_eps: f64,
    ) -> Result<Self, PlasmonError> {
        Ok(Self {
            host_eps,
            layers: vec![Layer {
                eps: gold_permittivity(wavelength_nm)?,
                thickness_nm: gold_thickness_nm,
            }],
            substrate_eps: Complex64::new(SAPPHIRE_EPS, 0.0),
        })
    }

    pub fn bare_sapphire(host_eps: f64) -> Self {
        Self {
            host_eps,
            layers: Vec::new(),
            substrate_eps: Complex64::new(SAPPHIRE_EPS, 0.0),
        }
    }

    /// Homogeneous host: no interfaces at all.
    pub fn homogeneous(host_eps: f64) -> Self {
        Self {
            host_eps,
            layers: Vec::new(),
            substrate_eps: Complex64::new(host_eps, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Polarization {
    S,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DipoleOrientation {
    Perpendicular,
    Parallel,
    /// Orientation average (2·parallel + perpendicular)/3.
    Isotropic,
}

/// Normalized z-wavevector l_j = k_jz/k₁ for in-plane component u = k∥/k₁.
fn lz(eps_rel: Complex64, u: f64) -> Complex64 {
    (eps_rel - u * u).sqrt()
}

fn fresnel(
    eps_i: Complex64,
    li: Complex64,
    eps_j: Complex64,
    ljz: Complex64,
    pol: Polarization,
) -> Complex64 {
    let (num, den) = match pol {
        Polarization::S => (li - ljz, li + ljz),
        Polarization::P => (eps_j * li - eps_i * ljz, eps_j * li + eps_i * ljz),
    };
    if den.norm() == 0.0 {
        // identical media at grazing incidence: both l's vanish, r → 0
        return Complex64::new(0.0, 0.0);
    }
    num / den
}

/// Stack reflection coefficient seen from the host at in-plane component u
/// (real; u > 1 is evanescent in the host). `k1_per_nm` is the host
/// wavenumber.
fn stack_reflection(stack: &Stack, u: f64, k1_per_nm: f64, pol: Polarization) -> Complex64 {
    let e1 = Complex64::new(stack.host_eps, 0.0);
    // work downward: r at the lowest finite layer / substrate first
    let eps_of = |idx: usize| -> Complex64 {
        if idx == 0 {
            e1
        } else {
            stack.layers[idx - 1].eps
        }
    };
    let n_layers = stack.layers.len();
    let eps_sub = stack.substrate_eps;
    let mut r = {
        let eps_last = eps_of(n_layers);
        fresnel(
            eps_last,
            lz(eps_last / e1, u),
            eps_sub,
            lz(eps_sub / e1, u),
            pol,
        )
    };
    for i in (0..n_layers).rev() {
        let eps_top = eps_of(i);
        let eps_bot = stack.layers[i].eps;
        let l_bot = lz(eps_bot / e1, u);
        let r_top = fresnel(eps_top, lz(eps_top / e1, u), eps_bot, l_bot, pol);
        let phase = (Complex64::i() * 2.0 * k1_per_nm * stack.layers[i].thickness_nm * l_bot).exp();
        r = (r_top + r * phase) / (Complex64::new(1.0, 0.0) + r_top * r * phase);
    }
    r
}

const QUAD_TOL: f64 = 1e-4;

/// Adaptive Simpson quadrature for complex integrands.
fn adaptive_simpson<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    context: &'static str,
) -> Result<Complex64, PlasmonError> {
    fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
        (fa + 4.0 * fm + fb) * (h / 6.0)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> Complex64>(
        f: &F,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        eps: f64,
        depth: u32,
    ) -> Option<Complex64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.norm() <= 15.0 * eps {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        let l = recurse(f, a, m, fa, flm, fm, left, eps * 0.5, depth - 1)?;
        let r = recurse(f, m, b, fm, frm, fb, right, eps * 0.5, depth - 1)?;
        Some(l + r)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    let scale = whole.norm().max(1e-3);
    recurse(f, a, b, fa, fm, fb, whole, QUAD_TOL * scale, 40).ok_or(
        PlasmonError::QuadratureNotConverged {
            tol: QUAD_TOL,
            context,
        },
    )
}

/// Decay rates relative to the homogeneous-host rate Γ₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRates {
    pub total_rel: f64,
    /// Radiated upward into the host half-space.
    pub radiated_rel: f64,
    /// Radiated upward within the collection cone u ≤ NA/n₁.
    pub collected_rel: f64,
}

/// Emission rates of a dipole at `height_nm` above the stack.
pub fn dipole_rates(
    stack: &Stack,
    wavelength_nm: f64,
    height_nm: f64,
    orientation: DipoleOrientation,
    collection_na: f64,
) -> Result<DecayRates, PlasmonError> {
    if let DipoleOrientation::Isotropic = orientation {
        let pa = dipole_rates(
            stack,
            wavelength_nm,
            height_nm,
            DipoleOrientation::Parallel,
            collection_na,
        )?;
        let pe = dipole_rates(
            stack,
            wavelength_nm,
            height_nm,
            DipoleOrientation::Perpendicular,
            collection_na,
        )?;
        return Ok(DecayRates {
            total_rel: (2.0 * pa.total_rel + pe.total_rel) / 3.0,
            radiated_rel: (2.0 * pa.radiated_rel + pe.radiated_rel) / 3.0,
            collected_rel: (2.0 * pa.collected_rel + pe.collected_rel) / 3.0,
        });
    }

    let n1 = stack.host_eps.sqrt();
    let k1 = 2.0 * std::f64::consts::PI * n1 / wavelength_nm;
    let d = height_nm;
    let perp = matches!(orientation, DipoleOrientation::Perpendicular);

    let rp = |u: f64| stack_reflection(stack, u, k1, Polarization::P);
    let rs = |u: f64| stack_reflection(stack, u, k1, Polarization::S);

    // propagating part, u = sin φ removes the 1/l₁ singularity
    let propagating = adaptive_simpson(
        &|phi: f64| {
            let (u, l1) = (phi.sin(), phi.cos());
            let e = (Complex64::i() * 2.0 * k1 * l1 * d).exp();
            if perp {
                Complex64::new(u * u * u, 0.0) * rp(u) * e
            } else {
                Complex64::new(u, 0.0) * (rs(u) - l1 * l1 * rp(u)) * e
            }
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        "total rate, propagating sector",
    )?;

    // evanescent part, u = √(1+s²), l₁ = i·s; substitute v = 2k₁d·s so the
    // exponential cutoff is uniform in height
    let twokd = 2.0 * k1 * d;
    let evanescent = adaptive_simpson(
        &|v: f64| {
            let s = v / twokd;
            let u = (1.0 + s * s).sqrt();
            let damp = (-v).exp() / twokd;
            let val = if perp {
                // Re[(u³/l₁)·r_p·e^{2ik₁l₁d}]du → (1+s²)·Im[r_p]·e^{-v}
                (1.0 + s * s) * rp(u).im
            } else {
                (rs(u) + s * s * rp(u)).im
            };
            Complex64::new(val * damp, 0.0)
        },
        0.0,
        60.0,
        "total rate, evanescent sector",
    )?;

    let total_rel = if perp {
        1.0 + 1.5 * (propagating.re + evanescent.re)
    } else {
        1.0 + 0.75 * (propagating.re + evanescent.re)
    };

    // upward radiated power per solid angle, integrated over the escape cone
    let upward = |u_max: f64, context: &'static str| -> Result<f64, PlasmonError> {
        let phi_max = u_max.clamp(0.0, 1.0).asin();
        let integral = adaptive_simpson(
            &|phi: f64| {
                let (u, l1) = (phi.sin(), phi.cos());
                let e = (Complex64::i() * 2.0 * k1 * l1 * d).exp();
                let one = Complex64::new(1.0, 0.0);
                if perp {
                    let amp = (one + rp(u) * e).norm_sqr();
                    Complex64::new(0.75 * u * u * u * amp, 0.0)
                } else {
                    let amp_s = (one + rs(u) * e).norm_sqr();
                    let amp_p = (one - rp(u) * e).norm_sqr();
                    Complex64::new(0.375 * u * (amp_s + l1 * l1 * amp_p), 0.0)
                }
            },
            0.0,
            phi_max,
            context,
        )?;
        Ok(integral.re)
    };

    let radiated_rel = upward(1.0, "radiated sector")?;
    let collected_rel = upward(collection_na / n1, "collection cone")?;

    Ok(DecayRates {
        total_rel,
        radiated_rel,
        collected_rel,
    })
}

/// Pump intensity at the emitter relative to the homogeneous host, for an
/// in-plane absorption dipole, averaged over the focused illumination cone.
pub fn excitation_gain(
    stack: &Stack,
    wavelength_nm: f64,
    height_nm: f64,
    na: f64,
) -> Result<f64, PlasmonError> {
    let n1 = stack.host_eps.sqrt();
    let k1 = 2.0 * std::f64::consts::PI * n1 / wavelength_nm;
    let d = height_nm;
    let phi_max = (na / n1).clamp(0.0, 1.0).asin();
    let one = Complex64::new(1.0, 0.0);
    let field = adaptive_simpson(
        &|phi: f64| {
            let (u, l1) = (phi.sin(), phi.cos());
            let e = (Complex64::i() * 2.0 * k1 * l1 * d).exp();
            let rs = stack_reflection(stack, u, k1, Polarization::S);
            let rp = stack_reflection(stack, u, k1, Polarization::P);
            // in-plane intensity of s- and p-polarized incident waves
            let i_s = (one + rs * e).norm_sqr();
            let i_p = l1 * l1 * (one - rp * e).norm_sqr();
            Complex64::new(u * l1 * (i_s + i_p), 0.0)
        },
        0.0,
        phi_max,
        "excitation field",
    )?;
    let norm = adaptive_simpson(
        &|phi: f64| {
            let (u, l1) = (phi.sin(), phi.cos());
            Complex64::new(u * l1 * (1.0 + l1 * l1), 0.0)
        },
        0.0,
        phi_max,
        "excitation norm",
    )?;
    Ok(field.re / norm.re)
}

/// Pump intensity |E|² at depth `depth_nm` inside a flake of thickness
/// `thickness_nm` illuminated from air at normal incidence, relative to the
/// incident intensity. `stack` describes everything below the flake and must
/// use the flake permittivity as its host; the air/flake top interface and
/// the cavity build-up between it and the stack are included here.
pub fn flake_pump_intensity(
    stack: &Stack,
    wavelength_nm: f64,
    thickness_nm: f64,
    depth_nm: f64,
) -> f64 {
    let n1 = stack.host_eps.sqrt();
    let k1 = 2.0 * std::f64::consts::PI * n1 / wavelength_nm;
    // normal incidence: the s-branch of the oblique coefficients
    let r_below = stack_reflection(stack, 0.0, k1, Polarization::S);
    let r_top = (1.0 - n1) / (1.0 + n1); // air → flake
    let t_top = 2.0 / (1.0 + n1);
    let round_trip = (Complex64::i() * 2.0 * k1 * thickness_nm).exp();
    let a = Complex64::new(t_top, 0.0)
        / (Complex64::new(1.0, 0.0) + r_top * r_below * round_trip);
    let z = depth_nm.clamp(0.0, thickness_nm);
    let up = (Complex64::i() * k1 * z).exp();
    let down = r_below * (Complex64::i() * k1 * (2.0 * thickness_nm - z)).exp();
    (a * (up + down)).norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancementConfig {
    pub collection_na: f64,
    /// Intrinsic quantum efficiency of the emitter in the bare host.
    pub q0: f64,
    pub excitation_nm: f64,
    pub emission_band_nm: (f64, f64),
    pub n_band_samples: usize,
    pub gold_film_nm: f64,
    pub host_eps: f64,
    /// Emitter depth below the flake's top surface.
    pub emitter_depth_nm: f64,
}

impl Default for EnhancementConfig {
    fn default() -> Self {
        Self {
            collection_na: 0.9,
            q0: 0.1,
            excitation_nm: 532.0,
            emission_band_nm: (750.0, 950.0),
            n_band_samples: 5,
            gold_film_nm: 150.0,
            host_eps: HBN_EPS,
            emitter_depth_nm: 5.0,
        }
    }
}

/// Collected photoluminescence of an in-plane emitter at `height_nm` above
/// the stack, in arbitrary units: excitation gain × collected fraction
/// including the intrinsic nonradiative channel.
fn collected_pl(
    stack_at: &dyn Fn(f64) -> Result<Stack, PlasmonError>,
    thickness_nm: f64,
    cfg: &EnhancementConfig,
) -> Result<f64, PlasmonError> {
    let exc = flake_pump_intensity(
        &stack_at(cfg.excitation_nm)?,
        cfg.excitation_nm,
        thickness_nm,
        cfg.emitter_depth_nm,
    );
    let height_nm = (thickness_nm - cfg.emitter_depth_nm).max(1.0);
    let (lo, hi) = cfg.emission_band_nm;
    let n = cfg.n_band_samples.max(1);
    let mut sum = 0.0;
    for i in 0..n {
        let lambda = if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        };
        let rates = dipole_rates(
            &stack_at(lambda)?,
            lambda,
            height_nm,
            DipoleOrientation::Parallel,
            cfg.collection_na,
        )?;
        // nonradiative channel has rate (1−q₀)/q₀ relative to Γ₀
        sum += rates.collected_rel / (rates.total_rel + (1.0 - cfg.q0) / cfg.q0);
    }
    Ok(exc * sum / n as f64)
}

/// Collected-PL ratio between the gold stack and the bare sapphire reference
/// for an emitter at the top of a flake of thickness `thickness_nm`.
pub fn enhancement_at_thickness(
    thickness_nm: f64,
    cfg: &EnhancementConfig,
) -> Result<f64, PlasmonError> {
    let gold = |lambda: f64| Stack::gold_on_sapphire(cfg.gold_film_nm, lambda, cfg.host_eps);
    let reference = |_lambda: f64| Ok(Stack::bare_sapphire(cfg.host_eps));
    let pl_gold = collected_pl(&gold, thickness_nm, cfg)?;
    let pl_ref = collected_pl(&reference, thickness_nm, cfg)?;
    Ok(pl_gold / pl_ref)
}

pub fn enhancement_vs_thickness(
    thicknesses_nm: &[f64],
    cfg: &EnhancementConfig,
) -> Result<Vec<f64>, PlasmonError> {
    thicknesses_nm
        .iter()
        .map(|&t| enhancement_at_thickness(t, cfg))
        .collect()
}
