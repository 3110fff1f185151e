//! Pulse-sequence execution on the coupled rate-equation / Bloch model.
//!
//! Optical segments (laser, read) evolve the seven-level rate model and
//! erase spin coherence. Microwave and free-evolution segments act on a
//! two-level Bloch vector spanning {GS ms=0, GS ms=+1}, carried in absolute
//! population units so populations arriving from excited-state decay fold in
//! consistently. Readout is the time-integrated excited-state radiative flux
//! over the read window; contrast is quoted against a reference run with all
//! microwave pulses removed and the swept duration set to zero.

use rayon::prelude::*;
use thiserror::Error;

use crate::num::Real;
use crate::pulse::bloch::BlochState;
use crate::pulse::rates::{LevelSystem, GS0, GSP};
use crate::pulse::sequence::{DurationSpec, MwLength, PulseOp, PulseSequence, SequenceError};

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error("sequence drives microwave pulses but the Rabi frequency is not positive")]
    NoRabiFrequency,
    #[error("reference readout signal is zero; nothing to normalize against")]
    ZeroReference,
}

/// Run-time inputs that are not part of the sequence text.
#[derive(Debug, Clone, Copy)]
pub struct RunContext<S> {
    /// Rabi frequency of the resonant drive; `pi`/`pi/2` durations resolve
    /// from it.
    pub rabi_hz: S,
}

impl<S: Real> Default for RunContext<S> {
    fn default() -> Self {
        Self {
            rabi_hz: S::of(20e6),
        }
    }
}

fn resolve_ns<S: Real>(dur: DurationSpec, sweep_ns: S) -> S {
    match dur {
        DurationSpec::FixedNs(ns) => S::of(ns),
        DurationSpec::Sweep => sweep_ns,
    }
}

fn mw_duration_ns<S: Real>(len: MwLength, sweep_ns: S, rabi_hz: S) -> S {
    match len {
        MwLength::FixedNs(ns) => S::of(ns),
        MwLength::Sweep => sweep_ns,
        MwLength::Pi => S::of(0.5e9) / rabi_hz,
        MwLength::PiOverTwo => S::of(0.25e9) / rabi_hz,
    }
}

/// Laser-off relaxation of the rate model. Once the excited and metastable
/// levels are empty the ground populations are stationary, so the integration
/// only covers the decay transient.
fn relax_dark<S: Real>(sys: LevelSystem<S>, dur_s: S) -> LevelSystem<S> {
    let tail: S = sys.populations[3..].iter().copied().sum();
    if tail < S::of(1e-15) {
        return sys;
    }
    let k_min = sys.rates.k_rad.min(sys.rates.k_ms).max(S::of(1e3));
    let transient = (S::of(60.0) / k_min).min(dur_s);
    let (next, _) = sys.integrate(false, transient);
    next
}

struct Engine<S: Real> {
    sys: LevelSystem<S>,
    bloch: BlochState<S>, // u, v, w in absolute population units
    signal: S,
}

impl<S: Real> Engine<S> {
    fn new(sys: LevelSystem<S>, bloch_template: &BlochState<S>) -> Self {
        let mut bloch = *bloch_template;
        bloch.u = S::zero();
        bloch.v = S::zero();
        bloch.w = sys.populations[GS0] - sys.populations[GSP];
        Self {
            sys,
            bloch,
            signal: S::zero(),
        }
    }

    fn reset_coherence(&mut self) {
        self.bloch.u = S::zero();
        self.bloch.v = S::zero();
        self.bloch.w = self.sys.populations[GS0] - self.sys.populations[GSP];
    }

    /// Laser-off rate relaxation folding arriving decay population into the
    /// Bloch w component (arrivals carry no coherence).
    fn dark_rates(&mut self, dur_s: S) {
        let before = (self.sys.populations[GS0], self.sys.populations[GSP]);
        self.sys = relax_dark(self.sys, dur_s);
        let d0 = self.sys.populations[GS0] - before.0;
        let dp = self.sys.populations[GSP] - before.1;
        self.bloch.w = self.bloch.w + (d0 - dp);
    }

    fn write_back_pair(&mut self) {
        let n = self.sys.populations[GS0] + self.sys.populations[GSP];
        let half = S::of(0.5);
        self.sys.populations[GS0] = half * (n + self.bloch.w);
        self.sys.populations[GSP] = half * (n - self.bloch.w);
    }

    fn run(
        &mut self,
        ops: &[PulseOp],
        sweep_ns: S,
        ctx: &RunContext<S>,
        include_mw: bool,
    ) -> Result<(), RunError> {
        let ns = S::of(1e-9);
        for op in ops {
            match *op {
                PulseOp::Laser { dur_ns } => {
                    let (next, _) = self.sys.integrate(true, S::of(dur_ns) * ns);
                    self.sys = next;
                    self.reset_coherence();
                }
                PulseOp::Read { window_ns } => {
                    let (next, flux) = self.sys.integrate(true, S::of(window_ns) * ns);
                    self.sys = next;
                    self.signal = self.signal + flux;
                    self.reset_coherence();
                }
                PulseOp::Wait { dur } => {
                    let d = resolve_ns(dur, sweep_ns) * ns;
                    if d > S::zero() {
                        self.dark_rates(d);
                        self.bloch.free_decay(d);
                        self.write_back_pair();
                    }
                }
                PulseOp::Mw { len, phase_deg } => {
                    if !include_mw {
                        continue;
                    }
                    if !(ctx.rabi_hz > S::zero()) {
                        return Err(RunError::NoRabiFrequency);
                    }
                    let d = mw_duration_ns(len, sweep_ns, ctx.rabi_hz) * ns;
                    if d > S::zero() {
                        self.dark_rates(d);
                        let phase = S::of(phase_deg.to_radians());
                        self.bloch.drive(ctx.rabi_hz, phase, d);
                        self.write_back_pair();
                    }
                }
            }
        }
        Ok(())
    }
}

fn readout<S: Real>(
    seq: &PulseSequence,
    sys: &LevelSystem<S>,
    bloch: &BlochState<S>,
    sweep_ns: S,
    ctx: &RunContext<S>,
    include_mw: bool,
) -> Result<S, RunError> {
    let mut engine = Engine::new(*sys, bloch);
    engine.run(seq.ops(), sweep_ns, ctx, include_mw)?;
    Ok(engine.signal)
}

/// Execute `seq` once per swept duration and return the readout contrast
/// (S_ref − S(τ))/S_ref, where the reference omits all microwave pulses and
/// sets the swept duration to zero.
pub fn run_sequence<S: Real>(
    seq: &PulseSequence,
    sys: &LevelSystem<S>,
    bloch: &BlochState<S>,
    sweep_ns: &[S],
    ctx: &RunContext<S>,
) -> Result<Vec<S>, RunError> {
    if !seq.has_sweep() {
        return Err(RunError::Sequence(SequenceError::Malformed(
            "sequence contains no sweep placeholder".into(),
        )));
    }
    let s_ref = readout(seq, sys, bloch, S::zero(), ctx, false)?;
    if !(s_ref > S::zero()) {
        return Err(RunError::ZeroReference);
    }
    sweep_ns
        .par_iter()
        .map(|&tau| {
            let s = readout(seq, sys, bloch, tau, ctx, true)?;
            Ok((s_ref - s) / s_ref)
        })
        .collect()
}

/// Canonical sequence texts for the standard experiments.
pub mod templates {
    /// Polarize, sweep the resonant drive duration, read.
    pub const RABI: &str = "laser 5us; mw t; read 300ns";
    /// Polarize, sweep a dark interval, read.
    pub const T1: &str = "laser 5us; wait t; read 300ns";
    /// Hahn echo; the closing pulse is phase-inverted so the echo refocuses
    /// into the opposite pole.
    pub const ECHO: &str =
        "laser 5us; mw pi/2; wait t; mw pi; wait t; mw pi/2 phase 180; read 300ns";
}
