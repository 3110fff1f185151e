//! Rate-equation model of the GS/ES/MS optical pumping cycle.
//!
//! Seven states: the spin-resolved ground and excited triplets plus a single
//! metastable level. Optical transitions conserve spin; the intersystem
//! crossing is spin dependent (k_isc1 > k_isc0), which is what produces both
//! optical polarization and positive ODMR contrast.

use thiserror::Error;

use crate::num::Real;

pub const N_STATES: usize = 7;
pub const GS0: usize = 0;
pub const GSP: usize = 1;
pub const GSM: usize = 2;
pub const ES0: usize = 3;
pub const ESP: usize = 4;
pub const ESM: usize = 5;
pub const MS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("step {dt_s} s exceeds the integrator stability bound {max_dt_s} s")]
    StepTooLarge { dt_s: f64, max_dt_s: f64 },
    #[error("rates must be >= 0")]
    NegativeRate,
    #[error("populations must be >= 0 and sum to 1")]
    InvalidPopulations,
    #[error("k_isc0 = k_isc1: a spin-symmetric cycle cannot polarize")]
    NoPolarization,
}

/// Rate constants of the pumping cycle, in 1/s. The pump rate is
/// `pump_per_mw · laser_power_mw`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRates<S> {
    pub pump_per_mw: S,
    pub k_rad: S,
    pub k_isc0: S,
    pub k_isc1: S,
    pub k_ms: S,
    /// Fraction of metastable decay branching back to GS±1 (split evenly);
    /// the remaining 1−β returns to GS0.
    pub branch_gs_pm: S,
}

impl<S: Real> LevelRates<S> {
    pub fn new(
        pump_per_mw: S,
        k_rad: S,
        k_isc0: S,
        k_isc1: S,
        k_ms: S,
        branch_gs_pm: S,
    ) -> Result<Self, RateError> {
        let ok = pump_per_mw >= S::zero()
            && k_rad >= S::zero()
            && k_isc0 >= S::zero()
            && k_isc1 >= S::zero()
            && k_ms >= S::zero()
            && branch_gs_pm >= S::zero()
            && branch_gs_pm <= S::one();
        if !ok {
            return Err(RateError::NegativeRate);
        }
        Ok(Self {
            pump_per_mw,
            k_rad,
            k_isc0,
            k_isc1,
            k_ms,
            branch_gs_pm,
        })
    }

    /// Default calibration: polarization time constant of order 100 ns at the
    /// 1 mW reference power. The paper gives no rate constants; these are
    /// free calibration parameters.
    pub fn calibrated_defaults() -> Self {
        Self {
            pump_per_mw: S::of(5e7),
            k_rad: S::of(8e8),
            k_isc0: S::of(2e8),
            k_isc1: S::of(1e9),
            k_ms: S::of(1e8),
            branch_gs_pm: S::of(0.4),
        }
    }

    pub fn max_rate(&self, laser_power_mw: S) -> S {
        let kp = self.pump_per_mw * laser_power_mw;
        kp.max(self.k_rad + self.k_isc1)
            .max(self.k_rad + self.k_isc0)
            .max(self.k_ms)
    }
}

/// Populations over the seven states plus the rate set and laser power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSystem<S> {
    pub populations: [S; N_STATES],
    pub rates: LevelRates<S>,
    pub laser_power_mw: S,
}

impl<S: Real> LevelSystem<S> {
    /// Unpolarized ground-state manifold.
    pub fn unpolarized(rates: LevelRates<S>, laser_power_mw: S) -> Self {
        let third = S::one() / S::of(3.0);
        let mut populations = [S::zero(); N_STATES];
        populations[GS0] = third;
        populations[GSP] = third;
        populations[GSM] = third;
        Self {
            populations,
            rates,
            laser_power_mw,
        }
    }

    pub fn total_population(&self) -> S {
        self.populations.iter().copied().sum()
    }

    /// Spin polarization: ms=0 population excess over the ms=±1 mean,
    /// summed over ground and excited manifolds.
    pub fn polarization(&self) -> S {
        let p = &self.populations;
        (p[GS0] + p[ES0])
            - (p[GSP] + p[GSM] + p[ESP] + p[ESM]) / S::of(2.0)
    }

    /// Rate matrix M (dp/dt = M·p) for the current laser state.
    pub fn rate_matrix(&self, laser_on: bool) -> [[S; N_STATES]; N_STATES] {
        let r = &self.rates;
        let kp = if laser_on {
            r.pump_per_mw * self.laser_power_mw
        } else {
            S::zero()
        };
        let mut m = [[S::zero(); N_STATES]; N_STATES];
        let mut add = |from: usize, to: usize, rate: S| {
            m[to][from] = m[to][from] + rate;
            m[from][from] = m[from][from] - rate;
        };
        // spin-conserving optical pumping and radiative decay
        for (gs, es) in [(GS0, ES0), (GSP, ESP), (GSM, ESM)] {
            add(gs, es, kp);
            add(es, gs, r.k_rad);
        }
        // spin-dependent intersystem crossing into the metastable level
        add(ES0, MS, r.k_isc0);
        add(ESP, MS, r.k_isc1);
        add(ESM, MS, r.k_isc1);
        // metastable return with branching
        let beta = r.branch_gs_pm;
        add(MS, GS0, r.k_ms * (S::one() - beta));
        add(MS, GSP, r.k_ms * beta / S::of(2.0));
        add(MS, GSM, r.k_ms * beta / S::of(2.0));
        m
    }

    /// One classical 4th-order Runge-Kutta step of the linear rate ODE.
    pub fn evolve_rates(&self, laser_on: bool, dt_s: S) -> Result<Self, RateError> {
        if !(dt_s > S::zero()) || dt_s > S::of(1e-9) {
            return Err(RateError::StepTooLarge {
                dt_s: dt_s.as_f64(),
                max_dt_s: 1e-9,
            });
        }
        let m = self.rate_matrix(laser_on);
        let mut next = *self;
        next.populations = rk4_step(&m, &self.populations, dt_s);
        Ok(next)
    }

    /// Integrate for `duration_s` with an internally chosen stable step.
    /// Returns the final state and the time-integrated ES radiative photon
    /// flux k_rad·(ES₀+ES₊+ES₋) over the interval.
    pub fn integrate(&self, laser_on: bool, duration_s: S) -> (Self, S) {
        if !(duration_s > S::zero()) {
            return (*self, S::zero());
        }
        let max_rate = self.rates.max_rate(self.laser_power_mw);
        let stable = if max_rate > S::zero() {
            (S::of(0.1) / max_rate).min(S::of(1e-9))
        } else {
            S::of(1e-9)
        };
        let n_steps = (duration_s / stable).ceil().as_f64() as usize;
        let n_steps = n_steps.max(1);
        let dt = duration_s / S::of(n_steps as f64);
        let m = self.rate_matrix(laser_on);
        let mut p = self.populations;
        let mut flux = S::zero();
        let es_sum = |p: &[S; N_STATES]| p[ES0] + p[ESP] + p[ESM];
        for _ in 0..n_steps {
            let before = es_sum(&p);
            p = rk4_step(&m, &p, dt);
            let after = es_sum(&p);
            flux = flux + self.rates.k_rad * (before + after) / S::of(2.0) * dt;
        }
        let mut out = *self;
        out.populations = p;
        (out, flux)
    }

    /// Steady state under continuous laser, by integrating until the
    /// populations stop moving (relative tolerance 1e-12 per step batch).
    pub fn steady_state(&self, laser_on: bool) -> Self {
        let mut state = *self;
        let max_rate = self.rates.max_rate(self.laser_power_mw).as_f64();
        let batch = S::of((20.0 / max_rate.max(1e3)).min(1e-6));
        for _ in 0..10_000 {
            let (next, _) = state.integrate(laser_on, batch);
            let delta: f64 = next
                .populations
                .iter()
                .zip(&state.populations)
                .map(|(a, b)| (*a - *b).abs().as_f64())
                .fold(0.0, f64::max);
            state = next;
            if delta < 1e-13 {
                break;
            }
        }
        state
    }
}

/// Time for the laser to polarize the spin to 1 − 1/e of its steady-state
/// excess, starting from the unpolarized ground manifold.
pub fn initialization_time<S: Real>(
    rates: &LevelRates<S>,
    laser_power_mw: S,
) -> Result<S, RateError> {
    if rates.k_isc0 == rates.k_isc1 {
        return Err(RateError::NoPolarization);
    }
    let sys = LevelSystem::unpolarized(*rates, laser_power_mw);
    let target_frac = 1.0 - (-1.0f64).exp();
    let steady = sys.steady_state(true).polarization().as_f64();
    if steady.abs() < 1e-12 {
        return Err(RateError::NoPolarization);
    }
    let max_rate = rates.max_rate(laser_power_mw);
    let dt = (S::of(0.05) / max_rate).min(S::of(1e-9));
    let m = sys.rate_matrix(true);
    let mut p = sys.populations;
    let mut t = S::zero();
    let t_max = S::of(1e-4);
    loop {
        p = rk4_step(&m, &p, dt);
        t = t + dt;
        let pol = {
            let mut s = LevelSystem {
                populations: p,
                rates: *rates,
                laser_power_mw,
            };
            s.populations = p;
            s.polarization().as_f64()
        };
        if pol / steady >= target_frac {
            return Ok(t);
        }
        if t > t_max {
            return Err(RateError::NoPolarization);
        }
    }
}

pub(crate) fn rk4_step<S: Real>(
    m: &[[S; N_STATES]; N_STATES],
    p: &[S; N_STATES],
    dt: S,
) -> [S; N_STATES] {
    let apply = |v: &[S; N_STATES]| -> [S; N_STATES] {
        let mut out = [S::zero(); N_STATES];
        for (i, row) in m.iter().enumerate() {
            let mut s = S::zero();
            for (j, &mij) in row.iter().enumerate() {
                s = s + mij * v[j];
            }
            out[i] = s;
        }
        out
    };
    let axpy = |p: &[S; N_STATES], k: &[S; N_STATES], h: S| -> [S; N_STATES] {
        let mut out = *p;
        for i in 0..N_STATES {
            out[i] = out[i] + h * k[i];
        }
        out
    };
    let half = dt / S::of(2.0);
    let k1 = apply(p);
    let k2 = apply(&axpy(p, &k1, half));
    let k3 = apply(&axpy(p, &k2, half));
    let k4 = apply(&axpy(p, &k3, dt));
    let sixth = dt / S::of(6.0);
    let mut out = *p;
    for i in 0..N_STATES {
        out[i] = out[i]
            + sixth * (k1[i] + S::of(2.0) * k2[i] + S::of(2.0) * k3[i] + k4[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rates() -> LevelRates<f64> {
        LevelRates::calibrated_defaults()
    }

    #[test]
    fn zero_rates_identity() {
        let r = LevelRates::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let sys = LevelSystem::unpolarized(r, 1.0);
        let next = sys.evolve_rates(true, 1e-10).unwrap();
        assert_eq!(sys.populations, next.populations);
    }

    #[test]
    fn step_too_large_rejected() {
        let sys = LevelSystem::unpolarized(rates(), 1.0);
        assert!(matches!(
            sys.evolve_rates(true, 2e-9),
            Err(RateError::StepTooLarge { .. })
        ));
        assert!(sys.evolve_rates(true, 0.5e-9).is_ok());
    }

    #[test]
    fn population_conserved() {
        let sys = LevelSystem::unpolarized(rates(), 1.0);
        let (after, _) = sys.integrate(true, 2e-6);
        assert_abs_diff_eq!(after.total_population(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn laser_polarizes_into_ms0() {
        let sys = LevelSystem::unpolarized(rates(), 1.0);
        let steady = sys.steady_state(true);
        let p = steady.populations;
        assert!(p[GS0] > p[GSP], "GS0 {} GS+ {}", p[GS0], p[GSP]);
        assert!(p[GS0] > p[GSM]);
        assert!(steady.polarization() > 0.05);
    }

    // dense matrix-exponential oracle via scaling and squaring
    fn expm(m: &[[f64; 7]; 7], t: f64) -> [[f64; 7]; 7] {
        let norm: f64 = m
            .iter()
            .flatten()
            .map(|x| x.abs())
            .fold(0.0, f64::max)
            * t;
        let squarings = (norm.log2().ceil().max(0.0) as u32) + 6;
        let scale = t / 2f64.powi(squarings as i32);
        // Taylor series of exp(M·scale)
        let mut result = [[0.0; 7]; 7];
        let mut term = [[0.0; 7]; 7];
        for i in 0..7 {
            result[i][i] = 1.0;
            term[i][i] = 1.0;
        }
        for k in 1..30 {
            let mut next = [[0.0; 7]; 7];
            for i in 0..7 {
                for j in 0..7 {
                    let mut s = 0.0;
                    for l in 0..7 {
                        s += term[i][l] * m[l][j] * scale;
                    }
                    next[i][j] = s / k as f64;
                }
            }
            term = next;
            for i in 0..7 {
                for j in 0..7 {
                    result[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            let mut sq = [[0.0; 7]; 7];
            for i in 0..7 {
                for j in 0..7 {
                    let mut s = 0.0;
                    for l in 0..7 {
                        s += result[i][l] * result[l][j];
                    }
                    sq[i][j] = s;
                }
            }
            result = sq;
        }
        result
    }

    #[test]
    fn rk4_matches_matrix_exponential() {
        let sys = LevelSystem::unpolarized(rates(), 1.0);
        let m = sys.rate_matrix(true);
        // 1 µs at dt = 0.1 ns
        let dt = 1e-10;
        let n = 10_000;
        let mut p = sys.populations;
        for _ in 0..n {
            p = rk4_step(&m, &p, dt);
        }
        let e = expm(&m, dt * n as f64);
        for i in 0..7 {
            let exact: f64 = (0..7).map(|j| e[i][j] * sys.populations[j]).sum();
            assert!(
                (p[i] - exact).abs() <= 1e-8,
                "state {i}: rk4 {} vs expm {exact}",
                p[i]
            );
        }
    }

    #[test]
    fn steady_state_reached_quickly() {
        let sys = LevelSystem::unpolarized(rates(), 1.0);
        let steady = sys.steady_state(true);
        let rates_list = [
            sys.rates.pump_per_mw * sys.laser_power_mw,
            sys.rates.k_rad,
            sys.rates.k_isc0,
            sys.rates.k_isc1,
            sys.rates.k_ms,
        ];
        let min_rate = rates_list
            .iter()
            .copied()
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let (evolved, _) = sys.integrate(true, 40.0 / min_rate);
        for i in 0..7 {
            assert!(
                (evolved.populations[i] - steady.populations[i]).abs() < 1e-6,
                "state {i}"
            );
        }
    }

    #[test]
    fn initialization_time_order_100ns() {
        let t = initialization_time(&rates(), 1.0).unwrap();
        assert!(
            (30e-9..300e-9).contains(&t),
            "initialization time {t} s out of band"
        );
    }

    #[test]
    fn initialization_time_decreases_with_power() {
        let mut last = f64::INFINITY;
        for i in 1..=10 {
            let power = 0.5 * i as f64;
            let t = initialization_time(&rates(), power).unwrap();
            assert!(t < last, "power {power} mW gave {t}");
            last = t;
        }
    }

    #[test]
    fn symmetric_isc_cannot_polarize() {
        let mut r = rates();
        r.k_isc1 = r.k_isc0;
        assert_eq!(
            initialization_time(&r, 1.0).unwrap_err(),
            RateError::NoPolarization
        );
    }
}
