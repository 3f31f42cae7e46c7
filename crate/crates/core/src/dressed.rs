//! Local trap geometry and rotating-frame Fourier components of the dressed
//! hyperfine manifolds.
//!
//! The static field is `e_z B_I + sqrt(chi) (e_x cos α + e_y sin α)` and the rf
//! field `(B_rf/2)[(e_x cos δ - i e_y sin δ) e^{iωt} + c.c.]`. At each point the
//! rf amplitude is resolved in a local frame whose z' axis follows the static
//! field and whose x' axis lies in the plane of the trap axis and the field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atom::{AtomSpec, StateLabel};
use crate::error::{Error, Result};
use crate::linalg::c;
use crate::spin::{spin_operators, CMatrix, Spin};
use crate::static_spectrum::{breit_rabi_shift, lande_g_factor};

/// One dressed Ioffe-Pritchard configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial (Ioffe) field B_I, G.
    pub b_ioffe: f64,
    /// Transverse quadrupole gradient, G/cm. Only used to convert χ to a radius.
    pub gradient: f64,
    /// Rf amplitude B_rf, G.
    pub rf_amplitude: f64,
    /// Rf frequency ω/2π, Hz.
    pub rf_frequency: f64,
    /// Polarization parameter δ, rad. 0 is linear, -π/4 left-hand circular.
    pub polarization_delta: f64,
}

pub const CIRCULAR_LEFT: f64 = -std::f64::consts::FRAC_PI_4;

/// Gradient used when none is given; puts χ = 0.25 G² at ρ ≈ 25 μm.
pub const DEFAULT_GRADIENT: f64 = 200.0;

impl TrapConfig {
    pub fn undressed(b_ioffe: f64) -> Self {
        TrapConfig {
            b_ioffe,
            gradient: DEFAULT_GRADIENT,
            rf_amplitude: 0.0,
            rf_frequency: 1.0e6,
            polarization_delta: CIRCULAR_LEFT,
        }
    }

    pub fn circular(b_ioffe: f64, rf_amplitude: f64, rf_frequency: f64) -> Self {
        TrapConfig {
            b_ioffe,
            gradient: DEFAULT_GRADIENT,
            rf_amplitude,
            rf_frequency,
            polarization_delta: CIRCULAR_LEFT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_ioffe > 0.0) {
            return Err(Error::param("b_ioffe", self.b_ioffe, "must be positive"));
        }
        if !(self.rf_amplitude >= 0.0) {
            return Err(Error::param("rf_amplitude", self.rf_amplitude, "must be non-negative"));
        }
        if !(self.rf_frequency > 0.0) {
            return Err(Error::param("rf_frequency", self.rf_frequency, "must be positive"));
        }
        if !self.polarization_delta.is_finite() {
            return Err(Error::param("polarization_delta", self.polarization_delta, "must be finite"));
        }
        if !(self.gradient > 0.0) {
            return Err(Error::param("gradient", self.gradient, "must be positive"));
        }
        Ok(())
    }

    /// Weak-field envelope checks (factor 20 margins). Returned and logged, never fatal.
    pub fn validity_warnings(&self, atom: &AtomSpec) -> Vec<String> {
        let mut out = Vec::new();
        if 20.0 * self.rf_amplitude > self.b_ioffe {
            out.push(format!(
                "rf amplitude {} G is not << Ioffe field {} G",
                self.rf_amplitude, self.b_ioffe
            ));
        }
        if 20.0 * atom.bohr_magneton * atom.g_j * self.b_ioffe > atom.hfs_frequency {
            out.push(format!(
                "Ioffe field {} G is outside the weak-field regime",
                self.b_ioffe
            ));
        }
        for w in &out {
            log::warn!("{w}");
        }
        out
    }

    /// χ = (G ρ)² for a radial distance in cm.
    pub fn chi_at_radius(&self, rho_cm: f64) -> f64 {
        (self.gradient * rho_cm).powi(2)
    }

    pub fn radius_at_chi(&self, chi: f64) -> f64 {
        chi.sqrt() / self.gradient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalFieldPoint {
    /// Squared transverse static field, G².
    pub chi: f64,
    pub alpha: f64,
    pub b0_magnitude: f64,
    /// Angle between trap axis and local static field.
    pub theta: f64,
}

pub fn local_field_point(trap: &TrapConfig, chi: f64, alpha: f64) -> Result<LocalFieldPoint> {
    if !(chi >= 0.0) || !chi.is_finite() {
        return Err(Error::param("chi", chi, "must be non-negative"));
    }
    let transverse = chi.sqrt();
    Ok(LocalFieldPoint {
        chi,
        alpha,
        b0_magnitude: trap.b_ioffe.hypot(transverse),
        theta: transverse.atan2(trap.b_ioffe),
    })
}

/// Complex rf amplitudes along the local axes, G. The physical field is
/// `(e^{iωt}/2)(e_x' bx - i e_y' by + e_z' bz) + c.c.`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfLocalComponents {
    pub bx: Complex64,
    pub by: Complex64,
    pub bz: Complex64,
}

impl RfLocalComponents {
    pub fn total_squared(&self) -> f64 {
        self.bx.norm_sqr() + self.by.norm_sqr() + self.bz.norm_sqr()
    }
}

pub fn rf_local_components(trap: &TrapConfig, point: &LocalFieldPoint) -> RfLocalComponents {
    let b = trap.rf_amplitude;
    let (sa, ca) = point.alpha.sin_cos();
    let (sd, cd) = trap.polarization_delta.sin_cos();
    let (st, ct) = point.theta.sin_cos();
    RfLocalComponents {
        bx: Complex64::new(b * ca * ct * cd, -b * sa * ct * sd),
        by: Complex64::new(b * ca * sd, -b * sa * cd),
        bz: Complex64::new(b * ca * st * cd, -b * sa * st * sd),
    }
}

/// Rotating-frame Fourier components of one hyperfine manifold, Hz.
///
/// `h0` is stored relative to `reference`, the zero-field energy of the
/// manifold, so its diagonal is `E_BR(F~, m) - reference + s·ν·m` with
/// `s = rotation_sign` and `ν` the rf frequency. Negative components are the
/// adjoints of the stored positive ones.
#[derive(Debug, Clone)]
pub struct FourierHamiltonian {
    pub manifold: u32,
    pub rotation_sign: f64,
    pub reference: f64,
    pub labels: Vec<StateLabel>,
    pub h0: CMatrix,
    pub h_plus1: CMatrix,
    pub h_plus2: CMatrix,
}

impl FourierHamiltonian {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// Fourier component `H^(n)`; zero beyond |n| = 2.
    pub fn component(&self, n: i32) -> CMatrix {
        match n {
            0 => self.h0.clone(),
            1 => self.h_plus1.clone(),
            2 => self.h_plus2.clone(),
            -1 => self.h_plus1.adjoint(),
            -2 => self.h_plus2.adjoint(),
            _ => CMatrix::zeros(self.dim(), self.dim()),
        }
    }
}

pub fn build_fourier_hamiltonian(
    atom: &AtomSpec,
    trap: &TrapConfig,
    point: &LocalFieldPoint,
    manifold: u32,
) -> Result<FourierHamiltonian> {
    let s = atom.rotation_sign(manifold)?;
    let labels = atom.manifold_labels(manifold);
    let ops = spin_operators(Spin::from_twice(2 * manifold));
    let g_f = lande_g_factor(atom, manifold)?;
    let nu = trap.rf_frequency;
    let rf = rf_local_components(trap, point);

    let mut h0 = CMatrix::zeros(labels.len(), labels.len());
    for (k, label) in labels.iter().enumerate() {
        let e = breit_rabi_shift(atom, *label, point.b0_magnitude)?;
        h0[(k, k)] = c(e + s * nu * label.m as f64);
    }

    // Sign convention: s = +1 for the lower manifold, whose co-rotating
    // coupling is F+ (bx - by); s = -1 for the upper one, F- (bx + by).
    let (co, counter) = if s > 0.0 {
        (&ops.f_plus, &ops.f_minus)
    } else {
        (&ops.f_minus, &ops.f_plus)
    };
    let quarter = atom.bohr_magneton * g_f / 4.0;
    let co_amp = rf.bx - rf.by * s;
    let counter_amp = rf.bx + rf.by * s;

    h0 += co * (co_amp * quarter) + counter * (co_amp.conj() * quarter);
    let h_plus1 = &ops.fz * (rf.bz * (2.0 * quarter));
    let h_plus2 = counter * (counter_amp * quarter);

    Ok(FourierHamiltonian {
        manifold,
        rotation_sign: s,
        reference: atom.zero_field_energy(manifold)?,
        labels,
        h0,
        h_plus1,
        h_plus2,
    })
}
