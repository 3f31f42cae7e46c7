//! Sensitivity of the shift expansion to field and polarization errors,
//! RMS shift deviation, and shift-versus-potential profiles.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::AtomSpec;
use crate::dressed::TrapConfig;
use crate::error::{Error, Result};
use crate::magic::{
    dressed_clock_shift, fit_shift_expansion, trap_potential, ClockState, Engine, MagicPoint,
    Numerics,
};

/// RMS magnitudes of experimental deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBudget {
    /// δB_I / B_I.
    pub rel_ioffe: f64,
    /// δB_rf / B_rf.
    pub rel_rf: f64,
    /// Polarization offset ε, rad.
    pub polarization_offset: f64,
}

impl DeviationBudget {
    pub const ZERO: DeviationBudget = DeviationBudget {
        rel_ioffe: 0.0,
        rel_rf: 0.0,
        polarization_offset: 0.0,
    };

    /// Typical atom-chip stability: 2.5e-4, 5e-4 and 0.2°.
    pub fn atom_chip() -> Self {
        DeviationBudget {
            rel_ioffe: 2.5e-4,
            rel_rf: 5e-4,
            polarization_offset: 0.2f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rel_ioffe", self.rel_ioffe),
            ("rel_rf", self.rel_rf),
            ("polarization_offset", self.polarization_offset),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, v, "must be a non-negative RMS magnitude"));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.rel_ioffe == 0.0 && self.rel_rf == 0.0 && self.polarization_offset == 0.0
    }
}

/// Finite-difference steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Steps {
    /// Relative field step h.
    pub field: f64,
    /// Polarization step, rad.
    pub polarization: f64,
}

impl Default for Steps {
    fn default() -> Self {
        Steps {
            field: 1e-3,
            polarization: 0.5f64.to_radians(),
        }
    }
}

impl Steps {
    pub fn halved(&self) -> Self {
        Steps {
            field: self.field / 2.0,
            polarization: self.polarization / 2.0,
        }
    }
}

/// Number of equally spaced azimuths used for the cos 2α projection.
pub const AZIMUTHS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarizationSensitivity {
    /// [β₁, β₂], Hz/G², Hz/G⁴ per rad.
    pub beta: [f64; 2],
    /// [γ₀, γ₁, γ₂], Hz, Hz/G², Hz/G⁴ per rad².
    pub gamma: [f64; 3],
    /// Numerical β₀, Hz per rad; zero up to discretization.
    pub beta0_check: f64,
    /// Largest cos 4α projection of A_i(ε, α) - A_i(0), relative to the cos 2α one.
    pub higher_harmonic_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub rf_frequency: f64,
    pub b_ioffe: f64,
    pub b_rf: f64,
    pub engine: Engine,
    /// Base [A0, A1, A2, A3] at the magic point.
    pub base: [f64; 4],
    /// [α₀, α₁, α₂] per unit relative Ioffe deviation.
    pub alpha_ioffe: [f64; 3],
    /// [α₀, α₁, α₂] per unit relative rf-amplitude deviation.
    pub alpha_rf: [f64; 3],
    pub beta: [f64; 2],
    pub gamma: [f64; 3],
    pub beta0_check: f64,
    pub higher_harmonic_ratio: f64,
    pub steps: Steps,
    pub numerics: Numerics,
}

fn leading3(atom: &AtomSpec, trap: &TrapConfig, numerics: &Numerics) -> Result<[f64; 3]> {
    let e = fit_shift_expansion(atom, trap, numerics)?;
    Ok([e.a0, e.a1, e.a2])
}

fn numerics_at(magic: &MagicPoint, numerics: &Numerics) -> Numerics {
    Numerics {
        engine: magic.engine,
        ..*numerics
    }
}

/// `(α^(I), α^(rf))` by central differences in the relative field magnitudes.
pub fn field_sensitivities(
    atom: &AtomSpec,
    magic: &MagicPoint,
    numerics: &Numerics,
    steps: &Steps,
) -> Result<([f64; 3], [f64; 3])> {
    let n = numerics_at(magic, numerics);
    let h = steps.field;
    let base = magic.trap();
    let variants = [
        TrapConfig { b_ioffe: base.b_ioffe * (1.0 + h), ..base },
        TrapConfig { b_ioffe: base.b_ioffe * (1.0 - h), ..base },
        TrapConfig { rf_amplitude: base.rf_amplitude * (1.0 + h), ..base },
        TrapConfig { rf_amplitude: base.rf_amplitude * (1.0 - h), ..base },
    ];
    let a: Vec<[f64; 3]> = variants
        .par_iter()
        .map(|t| leading3(atom, t, &n))
        .collect::<Result<_>>()?;
    let diff = |p: &[f64; 3], m: &[f64; 3]| {
        [0, 1, 2].map(|i| (p[i] - m[i]) / (2.0 * h))
    };
    Ok((diff(&a[0], &a[1]), diff(&a[2], &a[3])))
}

/// `β_i` and `γ_i` from the azimuthal dependence of `A_i(ε, α)` at `ε = ±step`.
pub fn polarization_sensitivities(
    atom: &AtomSpec,
    magic: &MagicPoint,
    numerics: &Numerics,
    steps: &Steps,
) -> Result<PolarizationSensitivity> {
    let n = numerics_at(magic, numerics);
    let eps = steps.polarization;
    let base_trap = magic.trap();
    let alphas: Vec<f64> = (0..AZIMUTHS).map(|k| 2.0 * PI * k as f64 / AZIMUTHS as f64).collect();

    let mut jobs: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    for sign in [1.0, -1.0] {
        for &a in &alphas {
            jobs.push((sign * eps, a));
        }
    }
    let values: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(e, a)| {
            let trap = TrapConfig {
                polarization_delta: base_trap.polarization_delta + e,
                ..base_trap
            };
            leading3(atom, &trap, &Numerics { alpha: a, ..n })
        })
        .collect::<Result<_>>()?;
    let a0 = values[0];
    let plus = &values[1..=AZIMUTHS];
    let minus = &values[AZIMUTHS + 1..];

    let project = |set: &[[f64; 3]], i: usize, harmonic: f64| -> f64 {
        2.0 / AZIMUTHS as f64
            * set
                .iter()
                .zip(&alphas)
                .map(|(v, a)| v[i] * (harmonic * a).cos())
                .sum::<f64>()
    };
    let mean = |set: &[[f64; 3]], i: usize| set.iter().map(|v| v[i]).sum::<f64>() / AZIMUTHS as f64;

    let beta_all: [f64; 3] =
        [0, 1, 2].map(|i| (project(plus, i, 2.0) - project(minus, i, 2.0)) / (2.0 * eps));
    let gamma = [0, 1, 2].map(|i| (mean(plus, i) + mean(minus, i) - 2.0 * a0[i]) / (2.0 * eps * eps));

    let mut higher_harmonic_ratio: f64 = 0.0;
    for i in 1..3 {
        let second = project(plus, i, 2.0).abs().max(project(minus, i, 2.0).abs());
        let fourth = project(plus, i, 4.0).abs().max(project(minus, i, 4.0).abs());
        if second > 0.0 {
            higher_harmonic_ratio = higher_harmonic_ratio.max(fourth / second);
        }
    }

    Ok(PolarizationSensitivity {
        beta: [beta_all[1], beta_all[2]],
        gamma,
        beta0_check: beta_all[0],
        higher_harmonic_ratio,
    })
}

/// Full coefficient set at one magic point.
pub fn sensitivity_report(
    atom: &AtomSpec,
    magic: &MagicPoint,
    numerics: &Numerics,
    steps: &Steps,
) -> Result<SensitivityReport> {
    let (fields, pol) = rayon::join(
        || field_sensitivities(atom, magic, numerics, steps),
        || polarization_sensitivities(atom, magic, numerics, steps),
    );
    let (alpha_ioffe, alpha_rf) = fields?;
    let pol = pol?;
    Ok(SensitivityReport {
        rf_frequency: magic.rf_frequency,
        b_ioffe: magic.b_ioffe,
        b_rf: magic.b_rf,
        engine: magic.engine,
        base: magic.expansion.leading(),
        alpha_ioffe,
        alpha_rf,
        beta: pol.beta,
        gamma: pol.gamma,
        beta0_check: pol.beta0_check,
        higher_harmonic_ratio: pol.higher_harmonic_ratio,
        steps: *steps,
        numerics: numerics_at(magic, numerics),
    })
}

fn relative_shift(
    atom: &AtomSpec,
    trap: &TrapConfig,
    chi: f64,
    alpha: f64,
    engine: Engine,
    n_blocks: usize,
) -> Result<f64> {
    Ok(dressed_clock_shift(atom, trap, chi, alpha, engine, n_blocks)?
        - dressed_clock_shift(atom, trap, 0.0, alpha, engine, n_blocks)?)
}

/// RMS deviation δE of `ΔE(χ) - ΔE(0)` caused by the budget, Hz.
///
/// Quadrature sum of the linear responses to δB_I, δB_rf and ε.
#[allow(clippy::too_many_arguments)]
pub fn rms_shift_deviation(
    atom: &AtomSpec,
    trap: &TrapConfig,
    budget: &DeviationBudget,
    chi: f64,
    alpha: f64,
    engine: Engine,
    n_blocks: usize,
    steps: &Steps,
) -> Result<f64> {
    budget.validate()?;
    trap.validate()?;
    if budget.is_zero() || chi == 0.0 {
        return Ok(0.0);
    }
    let h = steps.field;
    let e = steps.polarization;
    let mut terms: Vec<(TrapConfig, TrapConfig, f64, f64)> = Vec::new();
    if budget.rel_ioffe > 0.0 {
        terms.push((
            TrapConfig { b_ioffe: trap.b_ioffe * (1.0 + h), ..*trap },
            TrapConfig { b_ioffe: trap.b_ioffe * (1.0 - h), ..*trap },
            2.0 * h,
            budget.rel_ioffe,
        ));
    }
    if budget.rel_rf > 0.0 && trap.rf_amplitude > 0.0 {
        terms.push((
            TrapConfig { rf_amplitude: trap.rf_amplitude * (1.0 + h), ..*trap },
            TrapConfig { rf_amplitude: trap.rf_amplitude * (1.0 - h), ..*trap },
            2.0 * h,
            budget.rel_rf,
        ));
    }
    if budget.polarization_offset > 0.0 && trap.rf_amplitude > 0.0 {
        terms.push((
            TrapConfig { polarization_delta: trap.polarization_delta + e, ..*trap },
            TrapConfig { polarization_delta: trap.polarization_delta - e, ..*trap },
            2.0 * e,
            budget.polarization_offset,
        ));
    }
    let squares: Vec<f64> = terms
        .par_iter()
        .map(|(p, m, span, size)| {
            let d = (relative_shift(atom, p, chi, alpha, engine, n_blocks)?
                - relative_shift(atom, m, chi, alpha, engine, n_blocks)?)
                / span;
            Ok((d * size).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(squares.iter().sum::<f64>().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    /// Trapping potential of the profiled state, Hz.
    pub u_trap: f64,
    pub chi: f64,
    /// ΔE(χ) - ΔE(0), Hz.
    pub relative_shift: f64,
    /// RMS deviation from the budget, Hz (0 without a budget).
    pub rms_deviation: f64,
}

impl ProfileRow {
    /// |ΔE - ΔE(0)| + δE, the total shift inhomogeneity at this potential.
    pub fn total_inhomogeneity(&self) -> f64 {
        self.relative_shift.abs() + self.rms_deviation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub rows: Vec<ProfileRow>,
    /// Reason the profile stops short of `u_trap_max`, if it does.
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings {
    pub engine: Engine,
    pub n_blocks: usize,
    pub alpha: f64,
    /// State whose potential defines U_trap.
    pub state: ClockState,
    pub steps: Steps,
}

impl ProfileSettings {
    pub fn new(engine: Engine) -> Self {
        ProfileSettings {
            engine,
            n_blocks: crate::floquet::DEFAULT_BLOCKS,
            alpha: 0.0,
            state: ClockState::Upper,
            steps: Steps::default(),
        }
    }
}

/// Relative shift along a uniform grid of `points` potentials in `[0, u_trap_max]`.
pub fn shift_profile(
    atom: &AtomSpec,
    trap: &TrapConfig,
    budget: Option<&DeviationBudget>,
    u_trap_max: f64,
    points: usize,
    settings: &ProfileSettings,
) -> Result<Profile> {
    trap.validate()?;
    if let Some(b) = budget {
        b.validate()?;
    }
    if !(u_trap_max >= 0.0) || !u_trap_max.is_finite() {
        return Err(Error::param("u_trap_max", u_trap_max, "must be non-negative"));
    }
    let zero = ProfileRow {
        u_trap: 0.0,
        chi: 0.0,
        relative_shift: 0.0,
        rms_deviation: 0.0,
    };
    if u_trap_max == 0.0 {
        return Ok(Profile {
            rows: vec![zero],
            truncated: None,
        });
    }
    if points < 2 {
        return Err(Error::param("points", points as f64, "need at least two rows"));
    }
    let s = settings;
    let potential = |chi: f64| trap_potential(atom, trap, chi, s.alpha, s.state, s.engine, s.n_blocks);
    let targets: Vec<f64> = (0..points)
        .map(|k| u_trap_max * k as f64 / (points - 1) as f64)
        .collect();

    let row = |u: f64, hint: f64| -> Result<ProfileRow> {
        let chi = invert_potential(&potential, u, hint)?;
        let relative_shift = relative_shift(atom, trap, chi, s.alpha, s.engine, s.n_blocks)?;
        let rms_deviation = match budget {
            Some(b) => rms_shift_deviation(atom, trap, b, chi, s.alpha, s.engine, s.n_blocks, &s.steps)?,
            None => 0.0,
        };
        Ok(ProfileRow {
            u_trap: u,
            chi,
            relative_shift,
            rms_deviation,
        })
    };

    let mut rows = vec![zero];
    let mut truncated = None;
    let mut last_chi = 0.0;
    for &u in &targets[1..] {
        match row(u, last_chi) {
            Ok(r) => {
                last_chi = r.chi;
                rows.push(r);
            }
            Err(e) => {
                let msg = format!("profile truncated at U_trap = {u:.1} Hz: {e}");
                warn!("{msg}");
                truncated = Some(msg);
                break;
            }
        }
    }
    Ok(Profile { rows, truncated })
}

/// χ with `potential(χ) = target`, assuming the potential increases with χ.
fn invert_potential(potential: &impl Fn(f64) -> Result<f64>, target: f64, hint: f64) -> Result<f64> {
    let mut lo = hint;
    let mut f_lo = potential(lo)? - target;
    if f_lo > 0.0 {
        lo = 0.0;
        f_lo = -target;
    }
    let mut hi = if hint > 0.0 { hint * 1.5 } else { 1e-3 };
    let mut f_hi = potential(hi)? - target;
    let mut grow = 0;
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = potential(hi)? - target;
        grow += 1;
        if grow > 60 {
            return Err(Error::param("u_trap", target, "potential never reaches the requested value"));
        }
    }
    // Illinois regula falsi.
    let tol = 1e-9 * target.abs().max(1.0);
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fx = potential(x)? - target;
        if fx.abs() <= tol || (hi - lo) <= 1e-15 * hi {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        }
    }
    Err(Error::NotConverged {
        iterations: 200,
        residual: f_lo.abs().min(f_hi.abs()),
    })
}
