//! Physical constants used across the toolkit.

/// Bohr magneton over Planck constant, Hz/T.
pub const MU_B_OVER_H_HZ_PER_T: f64 = 1.399_624_493_6e10;

/// Planck constant, J·s.
pub const PLANCK_J_S: f64 = 6.626_070_15e-34;

/// Bohr radius, Å.
pub const BOHR_RADIUS_ANGSTROM: f64 = 0.529_177_210_9;

/// Coulomb constant times elementary charge squared, eV·Å.
pub const COULOMB_EV_ANGSTROM: f64 = 14.399_645;

/// Avogadro constant, 1/mol.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Zeeman coupling gμ_B/h in Hz/T for a given g-factor.
pub fn gyromagnetic_hz_per_t(g_factor: f64) -> f64 {
    g_factor * MU_B_OVER_H_HZ_PER_T
}
