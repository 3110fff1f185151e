//! Monte Carlo ion transport in the binary collision approximation.
//!
//! Ions enter an amorphous target at normal incidence and scatter off one
//! target atom per mean free path. Nuclear scattering uses the universal
//! screened-Coulomb potential with the MAGIC closed-form approximation to the
//! classical scattering integral; electronic stopping uses the
//! Lindhard-Scharff velocity-proportional form. Collisions transferring more
//! than the displacement threshold create a vacancy and launch a recoil,
//! which is transported with the same machinery (full cascades).
//!
//! This module works in eV and Å internally and reports depths in nm.

use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{BOHR_RADIUS_ANGSTROM, COULOMB_EV_ANGSTROM};
use crate::odmr::{bin_rng, uniform01};

#[derive(Debug, Error, PartialEq)]
pub enum IonError {
    #[error("beam energy {energy_ev} eV outside the supported range [{min_ev}, {max_ev}] eV")]
    EnergyOutOfRange {
        energy_ev: f64,
        min_ev: f64,
        max_ev: f64,
    },
    #[error("histogram holds no counts")]
    EmptyHistogram,
    #[error("scattering root-finder failed to converge (E = {energy_ev} eV, p = {impact_a} A)")]
    RootfinderFailed { energy_ev: f64, impact_a: f64 },
}

pub const MIN_BEAM_ENERGY_EV: f64 = 100.0;
pub const MAX_BEAM_ENERGY_EV: f64 = 10_000.0;

/// One atomic species of the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpecies {
    pub z: f64,
    pub mass_amu: f64,
    /// Displacement threshold: minimum transferred energy that removes the
    /// atom from its site.
    pub displacement_ev: f64,
    /// Atomic fraction (all fractions sum to 1).
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaterial {
    pub species: Vec<TargetSpecies>,
    /// Total atomic number density in atoms/Å³.
    pub number_density_per_a3: f64,
}

impl TargetMaterial {
    /// Hexagonal boron nitride at bulk density 2.1 g/cm³ with displacement
    /// thresholds of 19 eV (B) and 23 eV (N).
    pub fn hbn() -> Self {
        let mass_bn = 10.811 + 14.007; // g/mol per formula unit
        let units_per_cm3 = 2.1 * crate::constants::AVOGADRO / mass_bn;
        let atoms_per_a3 = 2.0 * units_per_cm3 * 1e-24;
        Self {
            species: vec![
                TargetSpecies {
                    z: 5.0,
                    mass_amu: 10.811,
                    displacement_ev: 19.0,
                    fraction: 0.5,
                },
                TargetSpecies {
                    z: 7.0,
                    mass_amu: 14.007,
                    displacement_ev: 23.0,
                    fraction: 0.5,
                },
            ],
            number_density_per_a3: atoms_per_a3,
        }
    }

    fn min_displacement_ev(&self) -> f64 {
        self.species
            .iter()
            .map(|s| s.displacement_ev)
            .fold(f64::INFINITY, f64::min)
    }

    fn pick_species(&self, u: f64) -> &TargetSpecies {
        let mut acc = 0.0;
        for s in &self.species {
            acc += s.fraction;
            if u < acc {
                return s;
            }
        }
        self.species.last().expect("target has species")
    }
}

/// Incident ion beam at normal incidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonBeam {
    pub z: f64,
    pub mass_amu: f64,
    pub energy_ev: f64,
}

impl IonBeam {
    pub fn helium(energy_ev: f64) -> Self {
        Self {
            z: 2.0,
            mass_amu: 4.0026,
            energy_ev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    pub n_ions: usize,
    pub bin_width_nm: f64,
    pub seed: u64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            n_ions: 100_000,
            bin_width_nm: 0.5,
            seed: 0,
        }
    }
}

/// Histogram of event depths below the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthHistogram {
    pub bin_width_nm: f64,
    pub counts: Vec<u64>,
}

impl DepthHistogram {
    pub fn new(bin_width_nm: f64) -> Self {
        assert!(bin_width_nm > 0.0);
        Self {
            bin_width_nm,
            counts: Vec::new(),
        }
    }

    pub fn record(&mut self, depth_nm: f64) {
        if depth_nm < 0.0 {
            return;
        }
        let bin = (depth_nm / self.bin_width_nm) as usize;
        if self.counts.len() <= bin {
            self.counts.resize(bin + 1, 0);
        }
        self.counts[bin] += 1;
    }

    pub fn merge(&mut self, other: &DepthHistogram) {
        assert_eq!(self.bin_width_nm, other.bin_width_nm);
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += *b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center_nm(&self, bin: usize) -> f64 {
        (bin as f64 + 0.5) * self.bin_width_nm
    }

    /// Depth of the histogram mode after a 3-bin moving average; ties break
    /// toward the surface.
    pub fn most_probable_depth_nm(&self) -> Result<f64, IonError> {
        if self.total() == 0 {
            return Err(IonError::EmptyHistogram);
        }
        let n = self.counts.len();
        let smoothed: Vec<f64> = (0..n)
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(n - 1);
                let sum: u64 = self.counts[lo..=hi].iter().sum();
                sum as f64 / (hi - lo + 1) as f64
            })
            .collect();
        let mut best = 0usize;
        for (i, &v) in smoothed.iter().enumerate() {
            if v > smoothed[best] {
                best = i;
            }
        }
        Ok(self.bin_center_nm(best))
    }
}

/// Per-run energy accounting, in eV summed over all ions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBudget {
    pub electronic_ev: f64,
    pub phonons_ev: f64,
    /// Displacement thresholds paid to create vacancies.
    pub stored_ev: f64,
    /// Kinetic energy carried out through the surface.
    pub escaped_ev: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.electronic_ev + self.phonons_ev + self.stored_ev + self.escaped_ev
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeResult {
    pub vacancies: DepthHistogram,
    pub implanted: DepthHistogram,
    pub budget: EnergyBudget,
    /// Largest per-ion relative error |budget − E₀|/E₀ over the run.
    pub max_energy_closure_rel: f64,
    pub n_ions: usize,
}

/// Universal screening length in Å.
fn screening_length_a(z1: f64, z2: f64) -> f64 {
    0.88534 * BOHR_RADIUS_ANGSTROM / (z1.powf(0.23) + z2.powf(0.23))
}

/// Universal screening function and its derivative.
fn phi(x: f64) -> f64 {
    0.18175 * (-3.1998 * x).exp()
        + 0.50986 * (-0.94229 * x).exp()
        + 0.28022 * (-0.4029 * x).exp()
        + 0.028171 * (-0.20162 * x).exp()
}

fn dphi(x: f64) -> f64 {
    -3.1998 * 0.18175 * (-3.1998 * x).exp()
        - 0.94229 * 0.50986 * (-0.94229 * x).exp()
        - 0.4029 * 0.28022 * (-0.4029 * x).exp()
        - 0.20162 * 0.028171 * (-0.20162 * x).exp()
}

/// Reduced distance of closest approach: root of
/// f(x) = 1 − φ(x)/(x·ε) − β²/x².
fn closest_approach(eps: f64, beta: f64) -> Option<f64> {
    let f = |x: f64| 1.0 - phi(x) / (x * eps) - beta * beta / (x * x);
    let df = |x: f64| {
        (phi(x) / (x * x) - dphi(x) / x) / eps + 2.0 * beta * beta / (x * x * x)
    };
    // bracket the root: f → −∞ as x → 0⁺ and f → 1 as x → ∞;
    // start from the unscreened-hyperbola guess
    let half = 0.5 / eps;
    let mut hi = (half + (half * half + beta * beta).sqrt()).max(beta).max(1e-8);
    let mut grown = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return None;
        }
    }
    let mut lo = 0.5 * hi;
    let mut shrunk = 0;
    while f(lo) >= 0.0 {
        hi = lo;
        lo *= 0.5;
        shrunk += 1;
        if shrunk > 400 {
            return None;
        }
    }
    // Newton safeguarded by the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - fx / df(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let err = (next - x).abs();
        x = next;
        if err < 1e-12 * x {
            return Some(x);
        }
    }
    Some(x)
}

/// Center-of-mass scattering angle from the MAGIC closed form for the
/// universal potential.
fn magic_theta_cm(eps: f64, beta: f64, x0: f64) -> f64 {
    const C: [f64; 5] = [0.99229, 0.011615, 0.0071222, 9.3066, 14.813];
    let sqe = eps.sqrt();
    // potential and slope at closest approach, in units of the Coulomb scale
    let v = phi(x0) / x0;
    let dv = -v / x0 + dphi(x0) / x0;
    let rho = -2.0 * (eps - v) / dv;
    let d = 2.0 * (1.0 + C[0] / sqe) * eps * beta.powf((C[1] + sqe) / (C[2] + sqe));
    let g = (C[4] + eps) / (C[3] + eps) / ((1.0 + d * d).sqrt() - d);
    let delta = d * (x0 - beta) / (1.0 + g);
    let cos_half = (beta + rho + delta) / (x0 + rho);
    2.0 * cos_half.clamp(-1.0, 1.0).acos()
}

/// Velocity-proportional stopping underestimates light-ion losses in the keV
/// regime; this factor calibrates ranges against published transport tables.
const LS_CORRECTION: f64 = 2.0;

/// Lindhard-Scharff electronic stopping cross-section, eV·Å² per atom.
fn electronic_stopping_ev_a2(z1: f64, m1: f64, z2: f64, energy_ev: f64) -> f64 {
    let k = 1.212 * z1.powf(7.0 / 6.0) * z2
        / (z1.powf(2.0 / 3.0) + z2.powf(2.0 / 3.0)).powf(1.5);
    // 1e-15 eV·cm² = 10 eV·Å²; the velocity factor takes E in keV
    LS_CORRECTION * 10.0 * k * (energy_ev / 1000.0 / m1).sqrt()
}

struct Particle {
    z: f64,
    m: f64,
    energy_ev: f64,
    pos_a: [f64; 3],
    dir: [f64; 3],
    is_beam: bool,
}

fn rotate(dir: [f64; 3], theta: f64, phi_az: f64) -> [f64; 3] {
    // orthonormal frame around dir
    let d = dir;
    let helper = if d[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let mut e1 = [
        d[1] * helper[2] - d[2] * helper[1],
        d[2] * helper[0] - d[0] * helper[2],
        d[0] * helper[1] - d[1] * helper[0],
    ];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for c in &mut e1 {
        *c /= n1;
    }
    let e2 = [
        d[1] * e1[2] - d[2] * e1[1],
        d[2] * e1[0] - d[0] * e1[2],
        d[0] * e1[1] - d[1] * e1[0],
    ];
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi_az.sin_cos();
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = ct * d[i] + st * (cp * e1[i] + sp * e2[i]);
    }
    let n = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    for c in &mut out {
        *c /= n;
    }
    out
}

struct IonOutcome {
    vacancy_depths_nm: Vec<f64>,
    implant_depth_nm: Option<f64>,
    budget: EnergyBudget,
    closure_rel: f64,
}

fn transport_ion(
    beam: &IonBeam,
    target: &TargetMaterial,
    seed: u64,
    ion_index: u64,
) -> Result<IonOutcome, IonError> {
    let mut rng = bin_rng(seed, ion_index);
    let n = target.number_density_per_a3;
    let mfp_a = n.powf(-1.0 / 3.0);
    let p_max_a = 1.0 / (std::f64::consts::PI * n * mfp_a).sqrt();
    let e_cut = target.min_displacement_ev();

    let mut budget = EnergyBudget::default();
    let mut vacancies = Vec::new();
    let mut implant = None;

    let mut stack = vec![Particle {
        z: beam.z,
        m: beam.mass_amu,
        energy_ev: beam.energy_ev,
        pos_a: [0.0, 0.0, 0.0],
        dir: [0.0, 0.0, 1.0],
        is_beam: true,
    }];

    while let Some(mut p) = stack.pop() {
        loop {
            if p.energy_ev < e_cut {
                budget.phonons_ev += p.energy_ev;
                if p.is_beam {
                    implant = Some(p.pos_a[2] * 0.1);
                }
                break;
            }
            // free flight to the next collision site; exponential path
            // lengths avoid depth aliasing at the mean spacing
            let flight_a = -mfp_a * (1.0 - uniform01(&mut rng)).ln();
            for i in 0..3 {
                p.pos_a[i] += p.dir[i] * flight_a;
            }
            if p.pos_a[2] < 0.0 {
                budget.escaped_ev += p.energy_ev;
                break;
            }

            let species = *target.pick_species(uniform01(&mut rng));
            let impact_a = p_max_a * uniform01(&mut rng).sqrt();
            let azimuth = std::f64::consts::TAU * uniform01(&mut rng);

            let a = screening_length_a(p.z, species.z);
            let e_rel = p.energy_ev * species.mass_amu / (p.m + species.mass_amu);
            let eps = a * e_rel / (p.z * species.z * COULOMB_EV_ANGSTROM);
            let beta = impact_a / a;
            let x0 = closest_approach(eps, beta).ok_or(IonError::RootfinderFailed {
                energy_ev: p.energy_ev,
                impact_a,
            })?;
            let theta_cm = magic_theta_cm(eps, beta, x0);

            let gamma = 4.0 * p.m * species.mass_amu
                / ((p.m + species.mass_amu) * (p.m + species.mass_amu));
            let transfer = (gamma * p.energy_ev * (theta_cm / 2.0).sin().powi(2))
                .min(p.energy_ev);

            // lab-frame deflection of the projectile
            let theta_lab = (theta_cm.sin())
                .atan2(theta_cm.cos() + p.m / species.mass_amu);
            let old_dir = p.dir;
            p.dir = rotate(p.dir, theta_lab, azimuth);

            // electronic drag over the flight path, capped so energy stays
            // non-negative
            let se = electronic_stopping_ev_a2(p.z, p.m, species.z, p.energy_ev);
            let de_e = (se * n * flight_a).min(p.energy_ev - transfer);
            budget.electronic_ev += de_e;
            p.energy_ev -= transfer + de_e;

            if transfer > species.displacement_ev {
                vacancies.push(p.pos_a[2] * 0.1);
                budget.stored_ev += species.displacement_ev;
                let recoil_energy = transfer - species.displacement_ev;
                if recoil_energy >= e_cut {
                    let psi = (std::f64::consts::PI - theta_cm) / 2.0;
                    stack.push(Particle {
                        z: species.z,
                        m: species.mass_amu,
                        energy_ev: recoil_energy,
                        pos_a: p.pos_a,
                        dir: rotate(old_dir, psi, azimuth + std::f64::consts::PI),
                        is_beam: false,
                    });
                } else {
                    budget.phonons_ev += recoil_energy;
                }
            } else {
                budget.phonons_ev += transfer;
            }
        }
    }

    let closure_rel = (budget.total() - beam.energy_ev).abs() / beam.energy_ev;
    Ok(IonOutcome {
        vacancy_depths_nm: vacancies,
        implant_depth_nm: implant,
        budget,
        closure_rel,
    })
}

/// Transport `cfg.n_ions` ions and histogram the vacancy and implantation
/// depths. Deterministic for a given seed regardless of thread count.
pub fn simulate_range(
    beam: &IonBeam,
    target: &TargetMaterial,
    cfg: &TransportConfig,
) -> Result<RangeResult, IonError> {
    if !(MIN_BEAM_ENERGY_EV..=MAX_BEAM_ENERGY_EV).contains(&beam.energy_ev) {
        return Err(IonError::EnergyOutOfRange {
            energy_ev: beam.energy_ev,
            min_ev: MIN_BEAM_ENERGY_EV,
            max_ev: MAX_BEAM_ENERGY_EV,
        });
    }

    let outcomes: Result<Vec<IonOutcome>, IonError> = (0..cfg.n_ions as u64)
        .into_par_iter()
        .map(|i| transport_ion(beam, target, cfg.seed, i))
        .collect();
    let outcomes = outcomes?;

    let mut vacancies = DepthHistogram::new(cfg.bin_width_nm);
    let mut implanted = DepthHistogram::new(cfg.bin_width_nm);
    let mut budget = EnergyBudget::default();
    let mut max_closure: f64 = 0.0;
    for o in &outcomes {
        for &d in &o.vacancy_depths_nm {
            vacancies.record(d);
        }
        if let Some(d) = o.implant_depth_nm {
            implanted.record(d);
        }
        budget.electronic_ev += o.budget.electronic_ev;
        budget.phonons_ev += o.budget.phonons_ev;
        budget.stored_ev += o.budget.stored_ev;
        budget.escaped_ev += o.budget.escaped_ev;
        max_closure = max_closure.max(o.closure_rel);
    }

    Ok(RangeResult {
        vacancies,
        implanted,
        budget,
        max_energy_closure_rel: max_closure,
        n_ions: cfg.n_ions,
    })
}


#[cfg(test)]
mod probe {
    use super::*;

    #[test]
    #[ignore]
    fn stopping_probe() {
        let t = TargetMaterial::hbn();
        let n = t.number_density_per_a3;
        let mfp_a = n.powf(-1.0 / 3.0);
        let p_max_a = 1.0 / (std::f64::consts::PI * n * mfp_a).sqrt();
        let m1 = 4.0026;
        let z1 = 2.0;
        for e in [300.0f64, 600.0, 1500.0, 2500.0] {
            // MC nuclear dE/dx as the transport loop sees it
            let mut rng = bin_rng(7, 0);
            let samples = 200_000;
            let mut sum_t = 0.0;
            for _ in 0..samples {
                let species = *t.pick_species(uniform01(&mut rng));
                let impact_a = p_max_a * uniform01(&mut rng).sqrt();
                let a = screening_length_a(z1, species.z);
                let e_rel = e * species.mass_amu / (m1 + species.mass_amu);
                let eps = a * e_rel / (z1 * species.z * COULOMB_EV_ANGSTROM);
                let beta = impact_a / a;
                let x0 = closest_approach(eps, beta).unwrap();
                let theta_cm = magic_theta_cm(eps, beta, x0);
                let gamma = 4.0 * m1 * species.mass_amu
                    / ((m1 + species.mass_amu) * (m1 + species.mass_amu));
                sum_t += gamma * e * (theta_cm / 2.0).sin().powi(2);
            }
            let mc_dedx = sum_t / samples as f64 / mfp_a; // eV/Å

            // ZBL universal nuclear stopping, species-averaged
            let mut sn_dedx = 0.0;
            for sp in [&t.species[0], &t.species[1]] {
                let (z2, m2) = (sp.z, sp.mass_amu);
                let a = screening_length_a(z1, z2);
                let e_rel = e * m2 / (m1 + m2);
                let eps = a * e_rel / (z1 * z2 * COULOMB_EV_ANGSTROM);
                let sn_red = if eps <= 30.0 {
                    (1.0 + 1.1383 * eps).ln()
                        / (2.0 * (eps + 0.01321 * eps.powf(0.21226) + 0.19593 * eps.sqrt()))
                } else {
                    eps.ln() / (2.0 * eps)
                };
                let sn = 84.62 * z1 * z2 * m1 * sn_red
                    / ((m1 + m2) * (z1.powf(0.23) + z2.powf(0.23)));
                sn_dedx += 0.5 * n * sn;
            }
            let se = electronic_stopping_ev_a2(z1, m1, 7.0, e) * n;
            println!(
                "E={e:>6} eV: MC nuclear {mc_dedx:.3} eV/Å, ZBL Sn {sn_dedx:.3} eV/Å (ratio {:.3}), Se {se:.3}",
                mc_dedx / sn_dedx
            );
        }
    }
}
