//! Two-level Bloch dynamics for the microwave-driven {ms=0, ms=+1} pair.
//!
//! Rotating-wave, on-resonance picture. Free evolution decays the coherence
//! quadratures at 1/T2 and relaxes the population difference at 1/T1; driven
//! evolution damps the nutating components at 1/T2* (the phenomenological
//! ensemble dephasing that limits Rabi oscillations).

use crate::num::Real;

/// Pseudo-spin state: w is the population difference (ms=0 minus ms=+1,
/// normalized to the pair), u and v the coherence quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState<S> {
    pub u: S,
    pub v: S,
    pub w: S,
    pub t1_s: S,
    pub t2_s: S,
    pub t2star_s: S,
}

impl<S: Real> BlochState<S> {
    pub fn polarized(t1_s: S, t2_s: S, t2star_s: S) -> Self {
        Self {
            u: S::zero(),
            v: S::zero(),
            w: S::one(),
            t1_s,
            t2_s,
            t2star_s,
        }
    }

    pub fn norm(&self) -> S {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    /// Free evolution for `dt`: transverse decay at 1/T2, longitudinal
    /// relaxation of w toward 0 at 1/T1.
    pub fn free_decay(&mut self, dt: S) {
        let e2 = (-dt / self.t2_s).exp();
        let e1 = (-dt / self.t1_s).exp();
        self.u = self.u * e2;
        self.v = self.v * e2;
        self.w = self.w * e1;
    }

    /// Resonant drive about the in-plane axis at angle `phase_rad` for `dt`,
    /// nutating at `rabi_hz`. Components rotating about the drive axis are
    /// damped at 1/T2*; the spin-locked component decays at 1/T2.
    pub fn drive(&mut self, rabi_hz: S, phase_rad: S, dt: S) {
        let theta = S::of(std::f64::consts::TAU) * rabi_hz * dt;
        let (nx, ny) = (phase_rad.cos(), phase_rad.sin());
        let r = [self.u, self.v, self.w];
        // decompose into components parallel / perpendicular to the drive axis
        let dot = r[0] * nx + r[1] * ny;
        let par = [dot * nx, dot * ny, S::zero()];
        let perp = [r[0] - par[0], r[1] - par[1], r[2]];
        // Rodrigues rotation of the perpendicular part about n = (nx, ny, 0)
        let (c, s) = (theta.cos(), theta.sin());
        let cross = [
            ny * perp[2],
            -nx * perp[2],
            nx * perp[1] - ny * perp[0],
        ];
        let rot = [
            perp[0] * c + cross[0] * s,
            perp[1] * c + cross[1] * s,
            perp[2] * c + cross[2] * s,
        ];
        let e_star = (-dt / self.t2star_s).exp();
        let e_lock = (-dt / self.t2_s).exp();
        self.u = par[0] * e_lock + rot[0] * e_star;
        self.v = par[1] * e_lock + rot[1] * e_star;
        self.w = rot[2] * e_star;
    }
}

/// Rabi frequency vs microwave power: f = κ·√P (drive field ∝ √power).
/// κ defaults to 25 MHz/√W, which puts paper-scale powers in the tens of
/// megahertz.
pub fn rabi_frequency_vs_power<S: Real>(kappa_hz_per_sqrt_w: S, p_mw_w: &[S]) -> Vec<S> {
    p_mw_w
        .iter()
        .map(|&p| kappa_hz_per_sqrt_w * p.max(S::zero()).sqrt())
        .collect()
}

pub const DEFAULT_RABI_KAPPA_HZ_PER_SQRT_W: f64 = 25e6;
