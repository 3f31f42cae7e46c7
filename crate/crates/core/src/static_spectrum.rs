//! Undressed hyperfine energies and the static magic field.

use serde::Serialize;

use crate::atom::{AtomSpec, StateLabel};
use crate::error::{Error, Result};

/// Breit-Rabi parameter X for a field of `b0` Gauss.
pub fn breit_rabi_x(atom: &AtomSpec, b0: f64) -> f64 {
    (atom.g_j - atom.g_i) * atom.bohr_magneton * b0 / atom.hfs_frequency
}

/// Breit-Rabi energy of `|F~, m>` at field `b0`, Hz.
pub fn breit_rabi_energy(atom: &AtomSpec, label: StateLabel, b0: f64) -> Result<f64> {
    Ok(atom.zero_field_energy(label.f)? + breit_rabi_shift(atom, label, b0)?)
}

/// Breit-Rabi energy measured from the zero-field energy of its manifold.
///
/// Evaluated without the GHz-scale offset so differences between states
/// keep full relative precision.
pub fn breit_rabi_shift(atom: &AtomSpec, label: StateLabel, b0: f64) -> Result<f64> {
    atom.check_label(label)?;
    if !(b0 >= 0.0) {
        return Err(Error::param("b0", b0, "field magnitude must be non-negative"));
    }
    Ok(shift_unchecked(atom, label, b0))
}

pub(crate) fn shift_unchecked(atom: &AtomSpec, label: StateLabel, b0: f64) -> f64 {
    let s = if label.f == atom.upper_f() { 1.0 } else { -1.0 };
    let two_i_plus_1 = atom.nuclear_spin.twice() as f64 + 1.0;
    let m = label.m as f64;
    let x = breit_rabi_x(atom, b0);
    let u = 4.0 * m * x / two_i_plus_1 + x * x;
    // sqrt(1 + u) - 1 without cancellation.
    let root_minus_one = u / ((1.0 + u).sqrt() + 1.0);
    atom.g_i * atom.bohr_magneton * m * b0 + s * atom.hfs_frequency / 2.0 * root_minus_one
}

pub fn lande_g_factor(atom: &AtomSpec, f: u32) -> Result<f64> {
    atom.hyperfine_sign(f)?;
    let ff = f as f64 * (f as f64 + 1.0);
    let ii = atom.nuclear_spin.value() * (atom.nuclear_spin.value() + 1.0);
    let jj = atom.electron_spin.value() * (atom.electron_spin.value() + 1.0);
    Ok(atom.g_j * (ff - ii + jj) / (2.0 * ff) + atom.g_i * (ff + ii - jj) / (2.0 * ff))
}

/// `E(|2>) - E(|1>) - hfs` for the configured clock states, Hz.
pub fn static_clock_shift(atom: &AtomSpec, b0: f64) -> Result<f64> {
    if !(b0 >= 0.0) {
        return Err(Error::param("b0", b0, "field magnitude must be non-negative"));
    }
    atom.validate()?;
    Ok(clock_shift_unchecked(atom, b0))
}

/// Offset `E0(upper) - E0(lower) - hfs` between the two clock manifolds at zero field.
pub(crate) fn clock_manifold_offset(atom: &AtomSpec) -> f64 {
    let s = |f: u32| if f == atom.upper_f() { 1.0 } else { -1.0 };
    (s(atom.clock_upper.f) - s(atom.clock_lower.f)) / 2.0 * atom.hfs_frequency - atom.hfs_frequency
}

fn clock_shift_unchecked(atom: &AtomSpec, b0: f64) -> f64 {
    shift_unchecked(atom, atom.clock_upper, b0) - shift_unchecked(atom, atom.clock_lower, b0)
        + clock_manifold_offset(atom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticMagic {
    /// Field where the clock shift is stationary, G.
    pub b_magic: f64,
    /// Second derivative of the clock shift there, Hz/G^2.
    pub curvature: f64,
    /// Clock shift at the magic field, Hz.
    pub shift: f64,
}

impl StaticMagic {
    /// Coefficient C of the quadratic response `C δB^2`, Hz/G^2.
    pub fn quadratic_coefficient(&self) -> f64 {
        self.curvature / 2.0
    }
}

const SEARCH_LO: f64 = 0.0;
const SEARCH_HI: f64 = 10.0;
const FIRST_DERIVATIVE_STEP: f64 = 1e-4;
const SECOND_DERIVATIVE_STEP: f64 = 1e-3;

fn first_derivative(atom: &AtomSpec, b: f64) -> f64 {
    let h = FIRST_DERIVATIVE_STEP;
    (clock_shift_unchecked(atom, b + h) - clock_shift_unchecked(atom, b - h)) / (2.0 * h)
}

fn second_derivative(atom: &AtomSpec, b: f64) -> f64 {
    let h = SECOND_DERIVATIVE_STEP;
    (clock_shift_unchecked(atom, b + h) - 2.0 * clock_shift_unchecked(atom, b)
        + clock_shift_unchecked(atom, b - h))
        / (h * h)
}

/// Locate the minimum of the static clock shift on [0, 10] G.
///
/// Golden-section search followed by Newton polish of the first derivative.
pub fn find_static_magic_field(atom: &AtomSpec) -> Result<StaticMagic> {
    atom.validate()?;
    if first_derivative(atom, SEARCH_LO) > 0.0 || first_derivative(atom, SEARCH_HI) < 0.0 {
        return Err(Error::NoStationaryPoint {
            lo: SEARCH_LO,
            hi: SEARCH_HI,
        });
    }

    let f = |b: f64| clock_shift_unchecked(atom, b);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (SEARCH_LO, SEARCH_HI);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }

    let mut x = 0.5 * (a + b);
    for _ in 0..50 {
        let step = first_derivative(atom, x) / second_derivative(atom, x);
        x -= step;
        if step.abs() < 1e-10 {
            break;
        }
    }
    let x = x.max(SEARCH_LO);
    if !(x <= SEARCH_HI) || !x.is_finite() {
        return Err(Error::NoStationaryPoint {
            lo: SEARCH_LO,
            hi: SEARCH_HI,
        });
    }

    Ok(StaticMagic {
        b_magic: x,
        curvature: second_derivative(atom, x),
        shift: f(x),
    })
}
