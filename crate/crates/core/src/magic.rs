//! Dressed clock shift, its expansion in χ, and second-order magic conditions.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{AtomSpec, StateLabel, BOLTZMANN, HBAR};
use crate::dressed::{build_fourier_hamiltonian, local_field_point, LocalFieldPoint, TrapConfig};
use crate::error::{Error, Result};
use crate::fit::{chebyshev_nodes, polyfit};
use crate::floquet::{
    assemble_floquet_matrix, full_model_quasienergies, quasienergies, rwa_spectrum, DEFAULT_BLOCKS,
};
use crate::static_spectrum::{clock_manifold_offset, find_static_magic_field, lande_g_factor};

/// How dressed levels are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Eigenvalues of the static rotating-frame Hamiltonian `H^(0)`.
    Rwa,
    /// Floquet treatment of the rotating-frame Hamiltonian.
    Wffa,
    /// Floquet treatment of the full lab-frame ground-state Hamiltonian.
    Full,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Rwa, Engine::Wffa, Engine::Full];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Rwa => "rwa",
            Engine::Wffa => "wffa",
            Engine::Full => "full",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rwa" => Ok(Engine::Rwa),
            "wffa" | "floquet" => Ok(Engine::Wffa),
            "full" => Ok(Engine::Full),
            other => Err(format!("unknown method `{other}` (expected rwa, wffa or full)")),
        }
    }
}

/// Which clock state a single-level quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockState {
    Lower,
    Upper,
}

impl ClockState {
    pub fn label(self, atom: &AtomSpec) -> StateLabel {
        match self {
            ClockState::Lower => atom.clock_lower,
            ClockState::Upper => atom.clock_upper,
        }
    }
}

/// Sampling of the χ interval used to extract expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Upper end of the χ interval, G².
    pub chi_max: f64,
    pub nodes: usize,
    pub degree: usize,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow {
            chi_max: 0.25,
            nodes: 20,
            degree: 6,
        }
    }
}

impl FitWindow {
    pub fn validate(&self) -> Result<()> {
        if !(self.chi_max > 0.0) || !self.chi_max.is_finite() {
            return Err(Error::param("chi_max", self.chi_max, "must be positive"));
        }
        if self.degree < 3 {
            return Err(Error::param(
                "degree",
                self.degree as f64,
                "need at least a cubic to report A3",
            ));
        }
        if self.nodes <= self.degree {
            return Err(Error::param(
                "nodes",
                self.nodes as f64,
                "need more nodes than the polynomial degree",
            ));
        }
        Ok(())
    }
}

/// Engine-independent numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub engine: Engine,
    /// Floquet blocks (odd); ignored by the rotating-wave engine.
    pub n_blocks: usize,
    pub window: FitWindow,
    /// Azimuth at which the expansion is taken, rad.
    pub alpha: f64,
}

impl Numerics {
    pub fn new(engine: Engine) -> Self {
        Numerics {
            engine,
            n_blocks: DEFAULT_BLOCKS,
            window: FitWindow::default(),
            alpha: 0.0,
        }
    }
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics::new(Engine::Wffa)
    }
}

/// Lab-frame energies of both clock states at one point, each measured from
/// the zero-field energy of its own manifold, Hz.
pub fn clock_levels(
    atom: &AtomSpec,
    trap: &TrapConfig,
    point: &LocalFieldPoint,
    engine: Engine,
    n_blocks: usize,
) -> Result<(f64, f64)> {
    let lower = atom.clock_lower;
    let upper = atom.clock_upper;
    match engine {
        Engine::Full => {
            let spec = full_model_quasienergies(atom, trap, point, n_blocks)?;
            Ok((spec.shift_of(lower)?, spec.shift_of(upper)?))
        }
        Engine::Rwa | Engine::Wffa => {
            let l = rotating_level(atom, trap, point, lower, engine, n_blocks)?;
            let u = rotating_level(atom, trap, point, upper, engine, n_blocks)?;
            Ok((l, u))
        }
    }
}

fn rotating_level(
    atom: &AtomSpec,
    trap: &TrapConfig,
    point: &LocalFieldPoint,
    label: StateLabel,
    engine: Engine,
    n_blocks: usize,
) -> Result<f64> {
    let fh = build_fourier_hamiltonian(atom, trap, point, label.f)?;
    let spec = match engine {
        Engine::Rwa => rwa_spectrum(&fh)?,
        _ => quasienergies(&assemble_floquet_matrix(&fh, n_blocks, trap.rf_frequency)?)?,
    };
    // Undo the frame rotation so the level is comparable with lab-frame energies.
    Ok(spec.shift_of(label)? - fh.rotation_sign * trap.rf_frequency * label.m as f64)
}

/// Lab-frame energy of one clock state, measured from its zero-field manifold energy, Hz.
pub fn dressed_level(
    atom: &AtomSpec,
    trap: &TrapConfig,
    chi: f64,
    alpha: f64,
    state: ClockState,
    engine: Engine,
    n_blocks: usize,
) -> Result<f64> {
    trap.validate()?;
    let point = local_field_point(trap, chi, alpha)?;
    let label = state.label(atom);
    match engine {
        Engine::Full => full_model_quasienergies(atom, trap, &point, n_blocks)?.shift_of(label),
        _ => rotating_level(atom, trap, &point, label, engine, n_blocks),
    }
}

/// `ΔE(χ, α) = E(|2>) - E(|1>) - hfs` in the dressed trap, Hz.
pub fn dressed_clock_shift(
    atom: &AtomSpec,
    trap: &TrapConfig,
    chi: f64,
    alpha: f64,
    engine: Engine,
    n_blocks: usize,
) -> Result<f64> {
    trap.validate()?;
    let point = local_field_point(trap, chi, alpha)?;
    let (lower, upper) = clock_levels(atom, trap, &point, engine, n_blocks)?;
    Ok(upper - lower + clock_manifold_offset(atom))
}

/// Trapping potential of one clock state relative to the trap centre, Hz.
pub fn trap_potential(
    atom: &AtomSpec,
    trap: &TrapConfig,
    chi: f64,
    alpha: f64,
    state: ClockState,
    engine: Engine,
    n_blocks: usize,
) -> Result<f64> {
    let at = dressed_level(atom, trap, chi, alpha, state, engine, n_blocks)?;
    let centre = dressed_level(atom, trap, 0.0, alpha, state, engine, n_blocks)?;
    Ok(at - centre)
}

/// `ΔE(χ) ≈ A0 + A1 χ + A2 χ² + A3 χ³`, units Hz/G^(2k).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftExpansion {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// All fitted monomial coefficients, lowest order first.
    pub coefficients: Vec<f64>,
    pub fit_rms_residual: f64,
    pub chi_max: f64,
}

impl ShiftExpansion {
    pub fn eval(&self, chi: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * chi + c)
    }

    pub fn leading(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }
}

const FIT_RESIDUAL_WARNING: f64 = 1e-2;

/// Sample `ΔE` on Chebyshev nodes of `[0, chi_max]` and fit a polynomial.
pub fn fit_shift_expansion(
    atom: &AtomSpec,
    trap: &TrapConfig,
    numerics: &Numerics,
) -> Result<ShiftExpansion> {
    trap.validate()?;
    numerics.window.validate()?;
    let w = numerics.window;
    let nodes = chebyshev_nodes(w.nodes, 0.0, w.chi_max);
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|&chi| {
            dressed_clock_shift(atom, trap, chi, numerics.alpha, numerics.engine, numerics.n_blocks)
        })
        .collect::<Result<_>>()?;
    let fit = polyfit(&nodes, &values, w.degree)?;
    if fit.rms_residual > FIT_RESIDUAL_WARNING {
        warn!(
            "shift fit residual {:.3e} Hz exceeds {FIT_RESIDUAL_WARNING:e} Hz (B_I = {}, B_rf = {})",
            fit.rms_residual, trap.b_ioffe, trap.rf_amplitude
        );
    }
    let c = &fit.coefficients;
    Ok(ShiftExpansion {
        a0: c[0],
        a1: c[1],
        a2: c[2],
        a3: c[3],
        coefficients: c.clone(),
        fit_rms_residual: fit.rms_residual,
        chi_max: w.chi_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub numerics: Numerics,
    /// Convergence threshold on |A1|, Hz/G².
    pub tol_a1: f64,
    /// Convergence threshold on |A2|, Hz/G⁴.
    pub tol_a2: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Largest Newton step in B_I, G.
    pub max_step_ioffe: f64,
    /// Largest Newton step in B_rf as a fraction of the current B_rf.
    pub max_step_rf_fraction: f64,
    /// Frequency step of the built-in continuation, Hz.
    pub continuation_step: f64,
}

impl SolverSettings {
    pub fn new(engine: Engine) -> Self {
        SolverSettings {
            numerics: Numerics::new(engine),
            tol_a1: 1e-4,
            tol_a2: 1e-3,
            max_iterations: 40,
            max_halvings: 6,
            max_step_ioffe: 0.05,
            max_step_rf_fraction: 0.5,
            continuation_step: 0.1e6,
        }
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings::new(Engine::Wffa)
    }
}

/// Known solution that seeds continuation when no initial guess is given.
pub const SEED_FREQUENCY: f64 = 2.2e6;
pub const SEED_POINT: (f64, f64) = (3.195, 0.000816);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagicPoint {
    pub rf_frequency: f64,
    pub b_ioffe: f64,
    pub b_rf: f64,
    pub engine: Engine,
    pub expansion: ShiftExpansion,
    pub iterations: usize,
}

impl MagicPoint {
    /// Circularly polarized trap at this point.
    pub fn trap(&self) -> TrapConfig {
        TrapConfig::circular(self.b_ioffe, self.b_rf, self.rf_frequency)
    }
}

struct Newton<'a> {
    atom: &'a AtomSpec,
    frequency: f64,
    delta: f64,
    gradient: f64,
    settings: &'a SolverSettings,
}

impl Newton<'_> {
    fn trap(&self, x: [f64; 2]) -> TrapConfig {
        TrapConfig {
            b_ioffe: x[0],
            gradient: self.gradient,
            rf_amplitude: x[1],
            rf_frequency: self.frequency,
            polarization_delta: self.delta,
        }
    }

    fn expand(&self, x: [f64; 2]) -> Result<ShiftExpansion> {
        if !(x[0] > 0.0) || !(x[1] > 0.0) {
            return Err(Error::param("b_ioffe/b_rf", x[0].min(x[1]), "left the positive quadrant"));
        }
        fit_shift_expansion(self.atom, &self.trap(x), &self.settings.numerics)
    }

    fn merit(&self, e: &ShiftExpansion) -> f64 {
        (e.a1 / self.settings.tol_a1).hypot(e.a2 / self.settings.tol_a2)
    }

    fn converged(&self, e: &ShiftExpansion) -> bool {
        e.a1.abs() < self.settings.tol_a1 && e.a2.abs() < self.settings.tol_a2
    }

    fn jacobian(&self, x: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let h = [1e-4, 1e-3 * x[1]];
        let mut j = [[0.0; 2]; 2];
        for col in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[col] += h[col];
            xm[col] -= h[col];
            let (ep, em) = rayon::join(|| self.expand(xp), || self.expand(xm));
            let (ep, em) = (ep?, em?);
            j[0][col] = (ep.a1 - em.a1) / (2.0 * h[col]);
            j[1][col] = (ep.a2 - em.a2) / (2.0 * h[col]);
        }
        Ok(j)
    }

    fn solve(&self, guess: (f64, f64)) -> Result<MagicPoint> {
        let s = self.settings;
        let mut x = [guess.0, guess.1];
        let mut current = self.expand(x)?;
        for iteration in 0..=s.max_iterations {
            debug!(
                "newton {iteration}: B_I = {:.7}, B_rf = {:.7}, A1 = {:.3e}, A2 = {:.3e}",
                x[0], x[1], current.a1, current.a2
            );
            if self.converged(&current) {
                return Ok(MagicPoint {
                    rf_frequency: self.frequency,
                    b_ioffe: x[0],
                    b_rf: x[1],
                    engine: s.numerics.engine,
                    expansion: current,
                    iterations: iteration,
                });
            }
            if iteration == s.max_iterations {
                break;
            }
            let j = self.jacobian(x)?;
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det.abs() > 0.0) || !det.is_finite() {
                return Err(Error::LinearAlgebra("singular magic-condition Jacobian"));
            }
            let r = [current.a1, current.a2];
            let mut dx = [
                -(j[1][1] * r[0] - j[0][1] * r[1]) / det,
                -(-j[1][0] * r[0] + j[0][0] * r[1]) / det,
            ];
            let cap = (s.max_step_ioffe / dx[0].abs())
                .min(s.max_step_rf_fraction * x[1] / dx[1].abs())
                .min(1.0);
            dx = [dx[0] * cap, dx[1] * cap];

            let base = self.merit(&current);
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=s.max_halvings {
                let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
                match self.expand(trial) {
                    Ok(e) if self.merit(&e) < base || self.converged(&e) => {
                        accepted = Some((trial, e));
                        break;
                    }
                    Ok(_) => {}
                    Err(err) => debug!("trial step rejected: {err}"),
                }
                lambda *= 0.5;
            }
            match accepted {
                Some((trial, e)) => {
                    x = trial;
                    current = e;
                }
                None => {
                    return Err(Error::NotConverged {
                        iterations: iteration + 1,
                        residual: base,
                    })
                }
            }
        }
        Err(Error::NotConverged {
            iterations: s.max_iterations,
            residual: self.merit(&current),
        })
    }
}

/// Solve `A1 = A2 = 0` for (B_I, B_rf) at one rf frequency, circular polarization.
///
/// Without an initial guess the solution is continued in frequency from a
/// known point at 2.2 MHz.
pub fn solve_magic_point(
    atom: &AtomSpec,
    rf_frequency: f64,
    initial_guess: Option<(f64, f64)>,
    settings: &SolverSettings,
) -> Result<MagicPoint> {
    atom.validate()?;
    if !(rf_frequency > 0.0) || !rf_frequency.is_finite() {
        return Err(Error::param("rf_frequency", rf_frequency, "must be positive"));
    }
    let newton = |freq: f64| Newton {
        atom,
        frequency: freq,
        delta: crate::dressed::CIRCULAR_LEFT,
        gradient: crate::dressed::DEFAULT_GRADIENT,
        settings,
    };
    if let Some(guess) = initial_guess {
        return newton(rf_frequency).solve(guess);
    }

    let span = rf_frequency - SEED_FREQUENCY;
    let steps = (span.abs() / settings.continuation_step).ceil().max(0.0) as usize;
    let mut history: Vec<MagicPoint> = Vec::new();
    for k in 0..=steps {
        let freq = if steps == 0 {
            rf_frequency
        } else {
            SEED_FREQUENCY + span * k as f64 / steps as f64
        };
        let guess = predict(&history, freq).unwrap_or(SEED_POINT);
        let point = newton(freq).solve(guess)?;
        history.push(point);
    }
    Ok(history.pop().expect("at least one continuation step"))
}

/// Linear extrapolation in frequency from the last two solutions.
fn predict(history: &[MagicPoint], freq: f64) -> Option<(f64, f64)> {
    match history {
        [] => None,
        [only] => Some((only.b_ioffe, only.b_rf)),
        [.., a, b] => {
            let t = (freq - b.rf_frequency) / (b.rf_frequency - a.rf_frequency);
            let bi = b.b_ioffe + t * (b.b_ioffe - a.b_ioffe);
            let mut brf = b.b_rf + t * (b.b_rf - a.b_rf);
            if !(brf > 0.0) {
                brf = b.b_rf * (b.b_rf / a.b_rf).powf(t);
            }
            Some((bi, brf))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub rf_frequency: f64,
    pub point: Option<MagicPoint>,
    pub error: Option<String>,
}

/// Magic points along a sorted frequency list, continuing outward from the
/// frequency closest to 2.2 MHz. A failure is recorded and does not stop the scan.
pub fn magic_scan(
    atom: &AtomSpec,
    frequencies: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<ScanEntry>> {
    atom.validate()?;
    if frequencies.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param(
            "frequencies",
            f64::NAN,
            "must be strictly increasing",
        ));
    }
    if frequencies.is_empty() {
        return Ok(Vec::new());
    }
    let start = frequencies
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - SEED_FREQUENCY).abs().total_cmp(&(b.1 - SEED_FREQUENCY).abs()))
        .map(|(i, _)| i)
        .expect("non-empty");

    let mut entries: Vec<Option<ScanEntry>> = vec![None; frequencies.len()];
    let down: Vec<usize> = (0..=start).rev().collect();
    let up: Vec<usize> = (start + 1..frequencies.len()).collect();
    let mut start_history: Vec<MagicPoint> = Vec::new();
    for (pass, order) in [down, up].into_iter().enumerate() {
        let mut history = if pass == 0 { Vec::new() } else { start_history.clone() };
        for idx in order {
            let freq = frequencies[idx];
            let result = match predict(&history, freq) {
                Some(guess) => solve_magic_point(atom, freq, Some(guess), settings),
                None => solve_magic_point(atom, freq, None, settings),
            };
            let entry = match result {
                Ok(p) => {
                    history.push(p.clone());
                    ScanEntry {
                        rf_frequency: freq,
                        point: Some(p),
                        error: None,
                    }
                }
                Err(e) => {
                    warn!("no magic point at {:.4} MHz: {e}", freq / 1e6);
                    ScanEntry {
                        rf_frequency: freq,
                        point: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            entries[idx] = Some(entry);
            if pass == 0 && idx == start {
                start_history = history.clone();
            }
        }
    }
    Ok(entries.into_iter().map(|e| e.expect("every index visited")).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticityMargin {
    /// Rf resonance at the static magic field, μB|g_F|B_magic, Hz.
    pub resonance_frequency: f64,
    /// Resonance minus rf frequency, Hz.
    pub detuning: f64,
    /// Thermal energy scale sqrt(3 k_B T ω_xy / ħ) / 2π, Hz.
    pub thermal_scale: f64,
    /// (detuning / thermal_scale)²; adiabatic when ≫ 1.
    pub ratio: f64,
}

/// Adiabaticity of the dressing for a thermal cloud of temperature `temperature`
/// (K) in a trap of radial frequency `trap_frequency` (ω_xy/2π, Hz).
pub fn adiabaticity_margin(
    atom: &AtomSpec,
    rf_frequency: f64,
    temperature: f64,
    trap_frequency: f64,
) -> Result<AdiabaticityMargin> {
    if !(temperature > 0.0) {
        return Err(Error::param("temperature", temperature, "must be positive"));
    }
    if !(trap_frequency > 0.0) {
        return Err(Error::param("trap_frequency", trap_frequency, "must be positive"));
    }
    if !(rf_frequency > 0.0) {
        return Err(Error::param("rf_frequency", rf_frequency, "must be positive"));
    }
    let b_magic = find_static_magic_field(atom)?.b_magic;
    let g = lande_g_factor(atom, atom.lower_f())?.abs();
    let resonance_frequency = atom.bohr_magneton * g * b_magic;
    let detuning = resonance_frequency - rf_frequency;
    let omega_xy = 2.0 * std::f64::consts::PI * trap_frequency;
    let thermal_scale =
        (3.0 * BOLTZMANN * temperature * omega_xy / HBAR).sqrt() / (2.0 * std::f64::consts::PI);
    Ok(AdiabaticityMargin {
        resonance_frequency,
        detuning,
        thermal_scale,
        ratio: (detuning / thermal_scale).powi(2),
    })
}
