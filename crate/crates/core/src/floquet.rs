//! Truncated Floquet matrices and quasienergy classification.
//!
//! For `H(t) = Σ_n H^(n) e^{inωt}` the Floquet matrix has block `(k, m)` equal
//! to `H^(k-m) + k ν δ_km` (ν = ω/2π, everything in Hz). Photon indices run
//! from `-(N-1)/2` to `(N-1)/2`. An eigenvector whose weight in the central
//! (photon index 0) block exceeds one half is a "true" quasienergy and is
//! labelled by its dominant basis state there.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::atom::{AtomSpec, StateLabel};
use crate::dressed::{rf_local_components, FourierHamiltonian, LocalFieldPoint, TrapConfig};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen};
use crate::spin::{build_product_hamiltonian, CMatrix};

pub const DEFAULT_BLOCKS: usize = 21;

#[derive(Debug, Clone)]
pub struct FloquetMatrix {
    pub manifold_dim: usize,
    pub n_blocks: usize,
    /// Hermitian, Hz, with `offset` removed from the diagonal.
    pub matrix: CMatrix,
    pub block_photon_index: Vec<i32>,
    /// Basis labels of one block.
    pub labels: Vec<StateLabel>,
    pub offset: f64,
    /// Zero-field manifold energy of each label, Hz.
    pub zero_field: Vec<f64>,
}

impl FloquetMatrix {
    pub fn central_block(&self) -> usize {
        self.n_blocks / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasienergyEntry {
    pub label: StateLabel,
    /// Quasienergy in the photon-index-0 branch, Hz.
    pub quasienergy: f64,
    /// Quasienergy measured from the zero-field energy of the label's manifold, Hz.
    pub shift: f64,
    pub central_weight: f64,
}

#[derive(Debug, Clone)]
pub struct QuasienergySpectrum {
    /// Classified levels in basis order.
    pub entries: Vec<QuasienergyEntry>,
    pub offset: f64,
    /// All eigenvalues (ascending, `offset` removed) and their central-block weights.
    pub eigenvalues: Vec<f64>,
    pub central_weights: Vec<f64>,
}

impl QuasienergySpectrum {
    pub fn get(&self, label: StateLabel) -> Option<&QuasienergyEntry> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn shift_of(&self, label: StateLabel) -> Result<f64> {
        self.get(label)
            .map(|e| e.shift)
            .ok_or_else(|| Error::Classification(format!("{label} not present in spectrum")))
    }
}

fn check_blocks(n_blocks: usize) -> Result<()> {
    if n_blocks < 3 || n_blocks.is_multiple_of(2) {
        return Err(Error::param(
            "n_blocks",
            n_blocks as f64,
            "must be odd and at least 3",
        ));
    }
    Ok(())
}

/// Block assembly from the non-negative Fourier components `[H^(0), H^(1), ...]`.
pub fn assemble_blocks(components: &[CMatrix], n_blocks: usize, rf_frequency: f64) -> Result<CMatrix> {
    check_blocks(n_blocks)?;
    let d = components[0].nrows();
    let half = (n_blocks / 2) as i64;
    let mut m = CMatrix::zeros(d * n_blocks, d * n_blocks);
    for a in 0..n_blocks {
        let k = a as i64 - half;
        for (n, h) in components.iter().enumerate() {
            if n == 0 {
                m.view_mut((a * d, a * d), (d, d)).copy_from(h);
                for i in 0..d {
                    m[(a * d + i, a * d + i)] += c(k as f64 * rf_frequency);
                }
            } else if a >= n {
                let b = a - n;
                m.view_mut((a * d, b * d), (d, d)).copy_from(h);
                m.view_mut((b * d, a * d), (d, d)).copy_from(&h.adjoint());
            }
        }
    }
    Ok(m)
}

pub fn assemble_floquet_matrix(
    components: &FourierHamiltonian,
    n_blocks: usize,
    rf_frequency: f64,
) -> Result<FloquetMatrix> {
    let parts = [
        components.h0.clone(),
        components.h_plus1.clone(),
        components.h_plus2.clone(),
    ];
    let matrix = assemble_blocks(&parts, n_blocks, rf_frequency)?;
    Ok(FloquetMatrix {
        manifold_dim: components.dim(),
        n_blocks,
        matrix,
        block_photon_index: photon_indices(n_blocks),
        labels: components.labels.clone(),
        offset: components.reference,
        zero_field: vec![components.reference; components.dim()],
    })
}

fn photon_indices(n_blocks: usize) -> Vec<i32> {
    let half = (n_blocks / 2) as i32;
    (-half..=half).collect()
}

pub fn quasienergies(floquet: &FloquetMatrix) -> Result<QuasienergySpectrum> {
    let d = floquet.manifold_dim;
    let eig = hermitian_eigen(&floquet.matrix)?;
    let start = floquet.central_block() * d;
    let central = eig.vectors.rows(start, d);
    let mut values = eig.values;
    // Rayleigh-quotient refinement of central-block levels: their rounding
    // error then scales with the central-block energies, not the full
    // photon ladder.
    for (k, value) in values.iter_mut().enumerate() {
        let weight: f64 = central.column(k).iter().map(|z| z.norm_sqr()).sum();
        if weight > 0.5 {
            let v = eig.vectors.column(k);
            *value = v.dotc(&(&floquet.matrix * v)).re;
        }
    }
    classify(
        &floquet.labels,
        floquet.offset,
        &floquet.zero_field,
        values,
        |k| central.column(k).iter().map(|z| z.norm_sqr()).collect(),
    )
}

/// Rotating-wave levels: eigenvalues of `H^(0)` alone.
pub fn rwa_spectrum(components: &FourierHamiltonian) -> Result<QuasienergySpectrum> {
    let eig = hermitian_eigen(&components.h0)?;
    classify(
        &components.labels,
        components.reference,
        &vec![components.reference; components.dim()],
        eig.values,
        |k| eig.vectors.column(k).iter().map(|z| z.norm_sqr()).collect(),
    )
}

fn classify(
    labels: &[StateLabel],
    offset: f64,
    zero_field: &[f64],
    values: Vec<f64>,
    central_probabilities: impl Fn(usize) -> Vec<f64>,
) -> Result<QuasienergySpectrum> {
    let d = labels.len();
    let mut slots: Vec<Option<QuasienergyEntry>> = vec![None; d];
    let mut weights = Vec::with_capacity(values.len());
    for (k, &value) in values.iter().enumerate() {
        let probs = central_probabilities(k);
        let weight: f64 = probs.iter().sum();
        weights.push(weight);
        if weight <= 0.5 {
            continue;
        }
        let dominant = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty block");
        if let Some(prev) = &slots[dominant] {
            return Err(Error::Classification(format!(
                "two levels ({:.3} Hz, {:.3} Hz) claim {}",
                prev.quasienergy - offset,
                value,
                labels[dominant]
            )));
        }
        slots[dominant] = Some(QuasienergyEntry {
            label: labels[dominant],
            quasienergy: value + offset,
            shift: value - (zero_field[dominant] - offset),
            central_weight: weight,
        });
    }
    let missing: Vec<String> = slots
        .iter()
        .zip(labels)
        .filter(|(s, _)| s.is_none())
        .map(|(_, l)| l.to_string())
        .collect();
    if !missing.is_empty() {
        let worst = weights.iter().copied().filter(|w| *w <= 0.5).fold(0.0, f64::max);
        return Err(Error::Classification(format!(
            "no central-block level for {} (largest unclassified weight {worst:.3})",
            missing.join(", ")
        )));
    }
    Ok(QuasienergySpectrum {
        entries: slots.into_iter().flatten().collect(),
        offset,
        eigenvalues: values,
        central_weights: weights,
    })
}

/// Floquet matrix of the full lab-frame ground-state Hamiltonian, written in
/// the basis of local Breit-Rabi eigenstates. Only `H^(±1)` is nonzero.
pub fn full_model_floquet(
    atom: &AtomSpec,
    trap: &TrapConfig,
    point: &LocalFieldPoint,
    n_blocks: usize,
) -> Result<FloquetMatrix> {
    check_blocks(n_blocks)?;
    let ph = build_product_hamiltonian(atom)?;
    let lower = atom.lower_f();
    let upper = atom.upper_f();
    let offset = 0.5 * (atom.zero_field_energy(lower)? + atom.zero_field_energy(upper)?);

    let mut h_static = ph.static_hamiltonian([0.0, 0.0, point.b0_magnitude]);
    for i in 0..ph.dim {
        h_static[(i, i)] -= c(offset);
    }

    let mut labels: Vec<StateLabel> = atom.manifold_labels(lower);
    labels.extend(atom.manifold_labels(upper));
    let mut basis = CMatrix::zeros(ph.dim, ph.dim);
    let mut energies = vec![0.0; ph.dim];

    // F_z is conserved along the local field: diagonalize each m block by hand.
    let fz: Vec<f64> = (0..ph.dim).map(|i| ph.f_z[(i, i)].re).collect();
    for m in -(upper as i32)..=(upper as i32) {
        let idx: Vec<usize> = (0..ph.dim).filter(|&i| (fz[i] - m as f64).abs() < 1e-9).collect();
        let col = |f: u32| labels.iter().position(|l| *l == StateLabel::new(f, m)).unwrap();
        match idx.as_slice() {
            [i] => {
                let k = col(upper);
                energies[k] = h_static[(*i, *i)].re;
                basis[(*i, k)] = c(1.0);
            }
            [i, j] => {
                let a = h_static[(*i, *i)].re;
                let d = h_static[(*j, *j)].re;
                let b = h_static[(*i, *j)];
                let r = (0.5 * (a - d)).hypot(b.norm());
                let t = 0.5 * (2.0 * b.norm()).atan2(a - d);
                let phase = Complex64::from_polar(1.0, -b.arg());
                let (ku, kl) = (col(upper), col(lower));
                energies[ku] = 0.5 * (a + d) + r;
                energies[kl] = 0.5 * (a + d) - r;
                basis[(*i, ku)] = c(t.cos());
                basis[(*j, ku)] = phase * t.sin();
                basis[(*i, kl)] = c(-t.sin());
                basis[(*j, kl)] = phase * t.cos();
            }
            _ => return Err(Error::LinearAlgebra("unexpected F_z block structure")),
        }
    }

    let rf = rf_local_components(trap, point);
    let half = c(0.5);
    let h1_product = (ph.h_zeeman_x() * rf.bx
        + ph.h_zeeman_y() * (rf.by * Complex64::new(0.0, -1.0))
        + ph.h_zeeman_z() * rf.bz)
        * half;
    let h1 = basis.adjoint() * h1_product * &basis;
    let h0 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        ph.dim,
        energies.iter().map(|&e| c(e)),
    ));
    let matrix = assemble_blocks(&[h0, h1], n_blocks, trap.rf_frequency)?;
    let zero_field = labels
        .iter()
        .map(|l| atom.zero_field_energy(l.f))
        .collect::<Result<Vec<_>>>()?;

    Ok(FloquetMatrix {
        manifold_dim: ph.dim,
        n_blocks,
        matrix,
        block_photon_index: photon_indices(n_blocks),
        labels,
        offset,
        zero_field,
    })
}

pub fn full_model_quasienergies(
    atom: &AtomSpec,
    trap: &TrapConfig,
    point: &LocalFieldPoint,
    n_blocks: usize,
) -> Result<QuasienergySpectrum> {
    quasienergies(&full_model_floquet(atom, trap, point, n_blocks)?)
}

/// Diagonalize several Floquet matrices concurrently, preserving order.
pub fn quasienergies_many(matrices: &[FloquetMatrix]) -> Vec<Result<QuasienergySpectrum>> {
    matrices.par_iter().map(quasienergies).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::{build_fourier_hamiltonian, local_field_point, CIRCULAR_LEFT};
    use crate::static_spectrum::breit_rabi_shift;
    use std::f64::consts::FRAC_PI_4;

    fn rb() -> AtomSpec {
        AtomSpec::rubidium87()
    }

    fn trap(b_i: f64, b_rf: f64, nu: f64, delta: f64) -> TrapConfig {
        TrapConfig {
            b_ioffe: b_i,
            gradient: 200.0,
            rf_amplitude: b_rf,
            rf_frequency: nu,
            polarization_delta: delta,
        }
    }

    #[test]
    fn block_count_validation() {
        let atom = rb();
        let t = trap(3.0, 0.01, 1e6, 0.0);
        let p = local_field_point(&t, 0.0, 0.0).unwrap();
        let h = build_fourier_hamiltonian(&atom, &t, &p, 2).unwrap();
        assert!(assemble_floquet_matrix(&h, 4, 1e6).is_err());
        assert!(assemble_floquet_matrix(&h, 1, 1e6).is_err());
        let f = assemble_floquet_matrix(&h, 21, 1e6).unwrap();
        assert_eq!(f.matrix.shape(), (105, 105));
        assert_eq!(f.block_photon_index.first(), Some(&-10));
        assert_eq!(f.block_photon_index.last(), Some(&10));
    }

    #[test]
    fn undressed_blocks_are_shifted_copies() {
        let atom = rb();
        let t = trap(3.0, 0.0, 0.8e6, 0.0);
        let p = local_field_point(&t, 0.1, 0.0).unwrap();
        for f in [1, 2] {
            let h = build_fourier_hamiltonian(&atom, &t, &p, f).unwrap();
            let fm = assemble_floquet_matrix(&h, 7, t.rf_frequency).unwrap();
            let mut expected: Vec<f64> = Vec::new();
            for k in -3..=3 {
                for l in &h.labels {
                    let e = breit_rabi_shift(&atom, *l, p.b0_magnitude).unwrap()
                        + h.rotation_sign * t.rf_frequency * l.m as f64
                        + k as f64 * t.rf_frequency;
                    expected.push(e);
                }
            }
            expected.sort_by(f64::total_cmp);
            let spec = quasienergies(&fm).unwrap();
            for (a, b) in spec.eigenvalues.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-6);
            }
            for e in &spec.entries {
                assert!((e.central_weight - 1.0).abs() < 1e-12);
                let exact = breit_rabi_shift(&atom, e.label, p.b0_magnitude).unwrap()
                    + h.rotation_sign * t.rf_frequency * e.label.m as f64;
                assert!((e.shift - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn three_block_matches_hand_assembly() {
        let atom = rb();
        let t = trap(2.9, 0.04, 1.3e6, -0.5);
        let p = local_field_point(&t, 0.4, 0.8).unwrap();
        let h = build_fourier_hamiltonian(&atom, &t, &p, 1).unwrap();
        let fm = assemble_floquet_matrix(&h, 3, t.rf_frequency).unwrap();
        let nu = t.rf_frequency;
        let id = CMatrix::identity(3, 3);
        // Rows/columns by photon index -1, 0, +1.
        let blocks = [
            [&h.h0 - &id * c(nu), h.h_plus1.adjoint(), h.h_plus2.adjoint()],
            [h.h_plus1.clone(), h.h0.clone(), h.h_plus1.adjoint()],
            [h.h_plus2.clone(), h.h_plus1.clone(), &h.h0 + &id * c(nu)],
        ];
        for (a, row) in blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                let got = fm.matrix.view((3 * a, 3 * b), (3, 3));
                assert!((got - blk).norm() < 1e-9, "block ({a},{b})");
            }
        }
    }

    #[test]
    fn circular_rf_leaves_upper_h0_levels_unchanged() {
        let atom = rb();
        let p_trap = trap(3.0, 0.0, 2e6, CIRCULAR_LEFT);
        let p = local_field_point(&p_trap, 0.0, 0.0).unwrap();
        let bare = rwa_spectrum(&build_fourier_hamiltonian(&atom, &p_trap, &p, 2).unwrap()).unwrap();
        for b_rf in [0.01, 0.05, 0.1] {
            let t = trap(3.0, b_rf, 2e6, CIRCULAR_LEFT);
            let h = build_fourier_hamiltonian(&atom, &t, &p, 2).unwrap();
            let dressed = rwa_spectrum(&h).unwrap();
            for (a, b) in bare.entries.iter().zip(&dressed.entries) {
                assert_eq!(a.label, b.label);
                assert!((a.shift - b.shift).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn full_model_undressed_reproduces_breit_rabi() {
        let atom = rb();
        let t = trap(3.1, 0.0, 1e6, CIRCULAR_LEFT);
        for chi in [0.0, 0.3] {
            let p = local_field_point(&t, chi, 0.4).unwrap();
            let spec = full_model_quasienergies(&atom, &t, &p, 5).unwrap();
            assert_eq!(spec.entries.len(), 8);
            for e in &spec.entries {
                let exact = breit_rabi_shift(&atom, e.label, p.b0_magnitude).unwrap();
                assert!((e.shift - exact).abs() < 1e-5, "{} {} {}", e.label, e.shift, exact);
                assert!((e.central_weight - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_model_agrees_with_rotating_frame_on_clock_states() {
        let atom = rb();
        let t = trap(2.7, 0.05, 1.0e6, CIRCULAR_LEFT);
        let p = local_field_point(&t, 0.1, 0.0).unwrap();
        let full = full_model_quasienergies(&atom, &t, &p, 21).unwrap();
        for label in [atom.clock_lower, atom.clock_upper] {
            let h = build_fourier_hamiltonian(&atom, &t, &p, label.f).unwrap();
            let w = quasienergies(&assemble_floquet_matrix(&h, 21, t.rf_frequency).unwrap()).unwrap();
            let lab = w.shift_of(label).unwrap() - h.rotation_sign * t.rf_frequency * label.m as f64;
            // Differences come only from couplings between manifolds.
            assert!((full.shift_of(label).unwrap() - lab).abs() < 5.0);
        }
    }

    #[test]
    fn periodic_companions() {
        let atom = rb();
        let t = trap(2.7, 0.05, 1.0e6, -FRAC_PI_4);
        let p = local_field_point(&t, 0.1, 0.0).unwrap();
        let h = build_fourier_hamiltonian(&atom, &t, &p, 1).unwrap();
        let spec = quasienergies(&assemble_floquet_matrix(&h, 21, t.rf_frequency).unwrap()).unwrap();
        for e in &spec.entries {
            let q = e.quasienergy - spec.offset;
            for shift in [-1.0, 1.0] {
                let target = q + shift * t.rf_frequency;
                let nearest = spec
                    .eigenvalues
                    .iter()
                    .map(|v| (v - target).abs())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest < 1e-6 * t.rf_frequency, "{nearest}");
            }
        }
    }
}
