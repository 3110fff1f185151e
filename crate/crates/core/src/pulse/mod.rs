//! Pulsed experiments: optical pumping rate equations, two-level Bloch
//! dynamics, the pulse-sequence language, and the sequence simulator.

pub mod bloch;
pub mod rates;
pub mod sequence;
pub mod sim;

pub use bloch::{rabi_frequency_vs_power, BlochState, DEFAULT_RABI_KAPPA_HZ_PER_SQRT_W};
pub use rates::{initialization_time, LevelRates, LevelSystem, RateError};
pub use sequence::{parse_sequence, PulseOp, PulseSequence, SequenceError};
pub use sim::{run_sequence, templates, RunContext, RunError};
