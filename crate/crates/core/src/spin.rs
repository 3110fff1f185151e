//! Spin-1 ground-state model of the V_B⁻ defect.
//!
//! Resonance frequencies under a static magnetic field come from two routes:
//! a closed-form expression valid for fields along the defect symmetry axis,
//! and a general 3×3 Hermitian eigensolve for arbitrary field orientation.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::constants::gyromagnetic_hz_per_t;
use crate::num::Real;

#[derive(Debug, Error, PartialEq)]
pub enum SpinError {
    #[error("invalid spin parameters: {0}")]
    InvalidParams(String),
    #[error("splitting {splitting_hz} Hz is below the zero-field floor 2·E_gs = {floor_hz} Hz")]
    BelowZeroFieldSplitting { splitting_hz: f64, floor_hz: f64 },
    #[error("eigenlevels degenerate within tolerance; transition labeling ambiguous")]
    DegenerateLevels,
    #[error("magnetic field components must be finite")]
    NonFiniteField,
}

/// Zero-field splitting parameters and g-factor of the ground-state triplet.
///
/// All energies are stored as frequencies (Hz), i.e. already divided by h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfsSpinParams<S> {
    d_gs: S,
    e_gs: S,
    g_factor: S,
}

impl<S: Real> ZfsSpinParams<S> {
    pub fn new(d_gs: S, e_gs: S, g_factor: S) -> Result<Self, SpinError> {
        if !(d_gs > S::zero()) {
            return Err(SpinError::InvalidParams("d_gs must be > 0".into()));
        }
        if !(e_gs >= S::zero()) {
            return Err(SpinError::InvalidParams("e_gs must be >= 0".into()));
        }
        if !(e_gs < d_gs) {
            return Err(SpinError::InvalidParams("e_gs must be < d_gs".into()));
        }
        if !(g_factor > S::zero()) {
            return Err(SpinError::InvalidParams("g_factor must be > 0".into()));
        }
        Ok(Self { d_gs, e_gs, g_factor })
    }

    /// Literature values for V_B⁻: D_gs/h = 3.47 GHz, E_gs/h = 50 MHz, g = 2.
    pub fn vb_defaults() -> Self {
        Self {
            d_gs: S::of(3.47e9),
            e_gs: S::of(50e6),
            g_factor: S::of(2.0),
        }
    }

    pub fn d_gs(&self) -> S {
        self.d_gs
    }

    pub fn e_gs(&self) -> S {
        self.e_gs
    }

    pub fn g_factor(&self) -> S {
        self.g_factor
    }

    /// gμ_B/h in Hz/T.
    pub fn gamma_hz_per_t(&self) -> S {
        S::of(gyromagnetic_hz_per_t(self.g_factor.as_f64()))
    }

    /// Resonance pair from the closed-form axial Zeeman relation
    /// ν₁,₂ = D ∓ √(E² + (γ B_z)²).
    pub fn resonance_frequencies_axial(&self, b_z: S) -> Result<ResonancePair<S>, SpinError> {
        if !b_z.is_finite() {
            return Err(SpinError::NonFiniteField);
        }
        let zeeman = self.gamma_hz_per_t() * b_z;
        let shift = (self.e_gs * self.e_gs + zeeman * zeeman).sqrt();
        Ok(ResonancePair {
            nu1: self.d_gs - shift,
            nu2: self.d_gs + shift,
        })
    }

    /// Inverts the axial Zeeman relation: |B_z| that produces the given
    /// ν₂ − ν₁ splitting.
    pub fn field_from_splitting(&self, splitting_hz: S) -> Result<S, SpinError> {
        let floor = S::of(2.0) * self.e_gs;
        if splitting_hz < floor {
            return Err(SpinError::BelowZeroFieldSplitting {
                splitting_hz: splitting_hz.as_f64(),
                floor_hz: floor.as_f64(),
            });
        }
        let half = splitting_hz / S::of(2.0);
        let zeeman = (half * half - self.e_gs * self.e_gs).sqrt();
        Ok(zeeman / self.gamma_hz_per_t())
    }
}

/// Static magnetic field in tesla; z is the defect symmetry axis
/// (out-of-plane axis of the hBN sheet).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticField<S> {
    pub bx: S,
    pub by: S,
    pub bz: S,
}

impl<S: Real> MagneticField<S> {
    pub fn new(bx: S, by: S, bz: S) -> Result<Self, SpinError> {
        if !(bx.is_finite() && by.is_finite() && bz.is_finite()) {
            return Err(SpinError::NonFiniteField);
        }
        Ok(Self { bx, by, bz })
    }

    pub fn axial(bz: S) -> Self {
        Self {
            bx: S::zero(),
            by: S::zero(),
            bz,
        }
    }

    pub fn magnitude(&self) -> S {
        (self.bx * self.bx + self.by * self.by + self.bz * self.bz).sqrt()
    }
}

/// The two microwave transitions out of the ms=0-like level, ordered nu1 ≤ nu2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonancePair<S> {
    pub nu1: S,
    pub nu2: S,
}

impl<S: Real> ResonancePair<S> {
    pub fn splitting(&self) -> S {
        self.nu2 - self.nu1
    }

    pub fn center(&self) -> S {
        (self.nu1 + self.nu2) / S::of(2.0)
    }
}

// Spin-1 operators in the S_z basis {|+1⟩, |0⟩, |−1⟩}.
fn spin_matrices() -> (Matrix3<Complex64>, Matrix3<Complex64>, Matrix3<Complex64>) {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sx = Matrix3::new(
        c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0),
        c(s, 0.0), c(0.0, 0.0), c(s, 0.0),
        c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0),
    );
    let sy = Matrix3::new(
        c(0.0, 0.0), c(0.0, -s), c(0.0, 0.0),
        c(0.0, s), c(0.0, 0.0), c(0.0, -s),
        c(0.0, 0.0), c(0.0, s), c(0.0, 0.0),
    );
    let sz = Matrix3::new(
        c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
        c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0),
    );
    (sx, sy, sz)
}

/// Ground-state Hamiltonian H/h = D S_z² + E (S_x² − S_y²) + γ B·S, in Hz,
/// in the S_z basis {|+1⟩, |0⟩, |−1⟩}.
pub fn hamiltonian_matrix(
    params: &ZfsSpinParams<f64>,
    field: &MagneticField<f64>,
) -> Matrix3<Complex64> {
    let (sx, sy, sz) = spin_matrices();
    let gamma = params.gamma_hz_per_t();
    let d = Complex64::new(params.d_gs(), 0.0);
    let e = Complex64::new(params.e_gs(), 0.0);
    let zeeman = sx * Complex64::new(gamma * field.bx, 0.0)
        + sy * Complex64::new(gamma * field.by, 0.0)
        + sz * Complex64::new(gamma * field.bz, 0.0);
    sz * sz * d + (sx * sx - sy * sy) * e + zeeman
}

/// Resonance frequencies for an arbitrary field via the 3×3 eigensolve.
///
/// Levels are identified by overlap with the zero-field eigenvectors rather
/// than by energy ordering, so the labeling survives level crossings.
pub fn resonance_frequencies_general(
    params: &ZfsSpinParams<f64>,
    field: &MagneticField<f64>,
) -> Result<ResonancePair<f64>, SpinError> {
    let h = hamiltonian_matrix(params, field);
    let eig = nalgebra::SymmetricEigen::new(h);

    // Zero-field eigenvectors: |0⟩ and the bright combinations (|+1⟩ ∓ |−1⟩)/√2
    // with energies D − E and D + E respectively.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64| Complex64::new(re, 0.0);
    let refs = [
        Vector3::new(c(0.0), c(1.0), c(0.0)), // ms=0-like
        Vector3::new(c(s), c(0.0), c(-s)),    // lower branch (D − E)
        Vector3::new(c(s), c(0.0), c(s)),     // upper branch (D + E)
    ];

    // Overlap matrix |⟨ref_i | v_j⟩|².
    let mut overlap = [[0.0f64; 3]; 3];
    for (i, r) in refs.iter().enumerate() {
        for j in 0..3 {
            let v = eig.eigenvectors.column(j);
            let dot: Complex64 = r.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            overlap[i][j] = dot.norm_sqr();
        }
    }

    // Maximum-weight assignment over all 3! permutations.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let score =
        |p: &[usize; 3]| -> f64 { overlap[0][p[0]] + overlap[1][p[1]] + overlap[2][p[2]] };
    let mut sorted: Vec<&[usize; 3]> = PERMS.iter().collect();
    sorted.sort_by(|a, b| score(b).partial_cmp(&score(a)).unwrap());
    let best = sorted[0];
    let runner_up = sorted[1];

    let pair_from = |p: &[usize; 3]| -> ResonancePair<f64> {
        let e0 = eig.eigenvalues[p[0]];
        let lo = eig.eigenvalues[p[1]];
        let hi = eig.eigenvalues[p[2]];
        let (a, b) = (lo - e0, hi - e0);
        if a <= b {
            ResonancePair { nu1: a, nu2: b }
        } else {
            ResonancePair { nu1: b, nu2: a }
        }
    };

    let result = pair_from(best);
    // Ambiguous only if a near-tied assignment yields different transitions.
    if (score(best) - score(runner_up)).abs() < 1e-9 {
        let alt = pair_from(runner_up);
        let scale = params.d_gs().abs();
        if (alt.nu1 - result.nu1).abs() > 1e-9 * scale
            || (alt.nu2 - result.nu2).abs() > 1e-9 * scale
        {
            return Err(SpinError::DegenerateLevels);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params() -> ZfsSpinParams<f64> {
        ZfsSpinParams::vb_defaults()
    }

    #[test]
    fn invariants_rejected() {
        assert!(ZfsSpinParams::new(-1.0, 0.0, 2.0).is_err());
        assert!(ZfsSpinParams::new(3.47e9, -1.0, 2.0).is_err());
        assert!(ZfsSpinParams::new(3.47e9, 4e9, 2.0).is_err());
        assert!(ZfsSpinParams::new(3.47e9, 50e6, 0.0).is_err());
    }

    #[test]
    fn hamiltonian_axial_zero_field_is_diagonal() {
        let p = ZfsSpinParams::new(3.47e9, 0.0, 2.0).unwrap();
        let h = hamiltonian_matrix(&p, &MagneticField::axial(0.0));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j && i != 1 { 3.47e9 } else { 0.0 };
                assert_abs_diff_eq!(h[(i, j)].re, expect, epsilon = 1e-3);
                assert_abs_diff_eq!(h[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_field_eigenvalues_split_by_2e() {
        let h = hamiltonian_matrix(&params(), &MagneticField::axial(0.0));
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_relative_eq!(ev[0], 0.0, epsilon = 1.0);
        assert_relative_eq!(ev[1], 3.42e9, max_relative = 1e-12);
        assert_relative_eq!(ev[2], 3.52e9, max_relative = 1e-12);
    }

    #[test]
    fn hamiltonian_hermitian_and_trace_for_random_fields() {
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.2
        };
        for _ in 0..50 {
            let f = MagneticField::new(next(), next(), next()).unwrap();
            let h = hamiltonian_matrix(&params(), &f);
            let hdag = h.adjoint();
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(h[(i, j)].re, hdag[(i, j)].re, epsilon = 1e-6);
                    assert_abs_diff_eq!(h[(i, j)].im, hdag[(i, j)].im, epsilon = 1e-6);
                }
            }
            let trace = h[(0, 0)] + h[(1, 1)] + h[(2, 2)];
            assert_relative_eq!(trace.re, 2.0 * 3.47e9, max_relative = 1e-12);
        }
    }

    #[test]
    fn paper_splittings() {
        let p = params();
        let s59 = p.resonance_frequencies_axial(5.9e-3).unwrap().splitting();
        let s98 = p.resonance_frequencies_axial(9.8e-3).unwrap().splitting();
        // paper reports 346 MHz and 560 MHz
        assert!((s59 - 345.2e6).abs() < 2e6, "got {s59}");
        assert!((s98 - 557.8e6).abs() < 2e6, "got {s98}");
    }

    #[test]
    fn zero_field_resonances() {
        let pair = params().resonance_frequencies_axial(0.0).unwrap();
        assert_relative_eq!(pair.nu1, 3.42e9, max_relative = 1e-12);
        assert_relative_eq!(pair.nu2, 3.52e9, max_relative = 1e-12);
    }

    #[test]
    fn axial_sum_rule() {
        let p = params();
        for &b in &[0.0, 1e-3, 5.9e-3, 9.8e-3, 0.05, 0.1] {
            let pair = p.resonance_frequencies_axial(b).unwrap();
            assert_relative_eq!(pair.nu1 + pair.nu2, 2.0 * p.d_gs(), max_relative = 1e-12);
        }
    }

    #[test]
    fn general_matches_axial() {
        let p = params();
        for &b in &[0.0, 2e-3, 5.9e-3, 9.8e-3, 0.03] {
            let axial = p.resonance_frequencies_axial(b).unwrap();
            let gen = resonance_frequencies_general(&p, &MagneticField::axial(b)).unwrap();
            assert_relative_eq!(gen.nu1, axial.nu1, max_relative = 1e-10);
            assert_relative_eq!(gen.nu2, axial.nu2, max_relative = 1e-10);
        }
    }

    // Independent oracle: eigenvalues from the closed-form roots of the
    // characteristic cubic of the 3×3 Hermitian matrix.
    fn eigen_cubic(h: &Matrix3<Complex64>) -> [f64; 3] {
        // det(H - λI) = -λ³ + c2 λ² + c1 λ + c0 with real coefficients.
        let tr: Complex64 = h[(0, 0)] + h[(1, 1)] + h[(2, 2)];
        let det = h[(0, 0)] * (h[(1, 1)] * h[(2, 2)] - h[(1, 2)] * h[(2, 1)])
            - h[(0, 1)] * (h[(1, 0)] * h[(2, 2)] - h[(1, 2)] * h[(2, 0)])
            + h[(0, 2)] * (h[(1, 0)] * h[(2, 1)] - h[(1, 1)] * h[(2, 0)]);
        // sum of principal 2x2 minors
        let m01 = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
        let m02 = h[(0, 0)] * h[(2, 2)] - h[(0, 2)] * h[(2, 0)];
        let m12 = h[(1, 1)] * h[(2, 2)] - h[(1, 2)] * h[(2, 1)];
        let (b, c, d) = (-tr.re, (m01 + m02 + m12).re, -det.re);
        // λ³ + bλ² + cλ + d = 0; depressed cubic trigonometric solution.
        let p = c - b * b / 3.0;
        let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            *o = m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - b / 3.0;
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    #[test]
    fn transverse_field_matches_cubic_oracle() {
        let p = params();
        let f = MagneticField::new(5e-3, 0.0, 0.0).unwrap();
        let h = hamiltonian_matrix(&p, &f);
        let oracle = eigen_cubic(&h);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(oracle.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1.0);
        }
        // and the labeled transitions are consistent with the sorted levels
        let pair = resonance_frequencies_general(&p, &f).unwrap();
        assert_relative_eq!(pair.nu1, oracle[1] - oracle[0], max_relative = 1e-9);
        assert_relative_eq!(pair.nu2, oracle[2] - oracle[0], max_relative = 1e-9);
    }

    #[test]
    fn field_from_splitting_round_trip() {
        let p = params();
        for &b in &[0.0, 1e-3, 9.8e-3, 0.05, 0.1] {
            let s = p.resonance_frequencies_axial(b).unwrap().splitting();
            let back = p.field_from_splitting(s).unwrap();
            assert_relative_eq!(back, b, max_relative = 1e-9, epsilon = 1e-15);
        }
        // paper: 560 MHz splitting corresponds to ~9.8 mT
        let b = p.field_from_splitting(560e6).unwrap();
        assert!((b - 9.84e-3).abs() < 0.1e-3, "got {b}");
    }

    #[test]
    fn field_from_splitting_boundary_and_error() {
        let p = params();
        assert_abs_diff_eq!(p.field_from_splitting(100e6).unwrap(), 0.0, epsilon = 1e-12);
        assert!(matches!(
            p.field_from_splitting(99e6),
            Err(SpinError::BelowZeroFieldSplitting { .. })
        ));
    }

    #[test]
    fn splitting_monotone_in_field() {
        let p = params();
        let mut last = -1.0;
        for i in 0..100 {
            let b = i as f64 * 1e-3;
            let s = p.resonance_frequencies_axial(b).unwrap().splitting();
            assert!(s > last);
            last = s;
        }
    }
}
