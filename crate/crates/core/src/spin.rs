//! Angular-momentum matrices and the product-basis ground-state Hamiltonian.
//!
//! Every basis is ordered by descending magnetic quantum number, so `fz` is
//! `diag(F, F-1, ..., -F)` and the raising operator lives on the
//! superdiagonal. The product basis `|m_J, m_I>` is the Kronecker product of
//! the two descending bases (electron index outermost).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::atom::AtomSpec;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// A spin quantum number stored as twice its value, so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin(u32);

impl Spin {
    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !value.is_finite() || value < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(value));
        }
        Ok(Spin(twice.round() as u32))
    }

    pub const fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.0.is_multiple_of(2)
    }

    /// Projections `F, F-1, ..., -F`.
    pub fn projections(self) -> impl Iterator<Item = f64> {
        let f = self.value();
        (0..self.dim()).map(move |k| f - k as f64)
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Spin::new(value)
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

/// Matrices of one spin in units of hbar.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub f_total: Spin,
    pub fx: CMatrix,
    pub fy: CMatrix,
    pub fz: CMatrix,
    pub f_plus: CMatrix,
    pub f_minus: CMatrix,
}

impl SpinOperators {
    pub fn dim(&self) -> usize {
        self.f_total.dim()
    }
}

pub fn build_spin_operators(f_total: f64) -> Result<SpinOperators> {
    Ok(spin_operators(Spin::new(f_total)?))
}

pub fn spin_operators(f_total: Spin) -> SpinOperators {
    let n = f_total.dim();
    let f = f_total.value();
    let ms: Vec<f64> = f_total.projections().collect();

    let mut f_plus = CMatrix::zeros(n, n);
    // <m+1| F+ |m> sits at (row of m+1, column of m) = (k-1, k).
    for k in 1..n {
        let m = ms[k];
        f_plus[(k - 1, k)] = Complex64::new((f * (f + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let f_minus = f_plus.adjoint();
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    let fx = (&f_plus + &f_minus) * half;
    let fy = (&f_plus - &f_minus) * (-half_i);
    let fz = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        ms.iter().map(|&m| Complex64::new(m, 0.0)),
    ));

    SpinOperators {
        f_total,
        fx,
        fy,
        fz,
        f_plus,
        f_minus,
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Static pieces of the ground-state Hamiltonian in the `|m_J, m_I>` basis, in Hz.
#[derive(Debug, Clone)]
pub struct ProductBasisHamiltonian {
    pub dim: usize,
    pub h_hfs: CMatrix,
    /// Zeeman coupling for a unit (1 G) field along x, y, z.
    pub h_zeeman: [CMatrix; 3],
    /// Total angular momentum projection `F_z = J_z + I_z`.
    pub f_z: CMatrix,
}

impl ProductBasisHamiltonian {
    pub fn h_zeeman_x(&self) -> &CMatrix {
        &self.h_zeeman[0]
    }

    pub fn h_zeeman_y(&self) -> &CMatrix {
        &self.h_zeeman[1]
    }

    pub fn h_zeeman_z(&self) -> &CMatrix {
        &self.h_zeeman[2]
    }

    /// `h_hfs + b·h_zeeman` for a field vector `b` in Gauss.
    pub fn static_hamiltonian(&self, b: [f64; 3]) -> CMatrix {
        let mut h = self.h_hfs.clone();
        for (k, &bk) in b.iter().enumerate() {
            if bk != 0.0 {
                h += &self.h_zeeman[k] * Complex64::new(bk, 0.0);
            }
        }
        h
    }
}

pub fn build_product_hamiltonian(atom: &AtomSpec) -> Result<ProductBasisHamiltonian> {
    atom.validate()?;
    let j = spin_operators(atom.electron_spin);
    let i = spin_operators(atom.nuclear_spin);
    let eye_j = CMatrix::identity(j.dim(), j.dim());
    let eye_i = CMatrix::identity(i.dim(), i.dim());

    // A = 2 hfs / (2I + 1) makes the F = I ± 1/2 splitting equal to hfs.
    let a_hfs = 2.0 * atom.hfs_frequency / (2.0 * atom.nuclear_spin.value() + 1.0);
    let j_dot_i = kron(&j.fx, &i.fx) + kron(&j.fy, &i.fy) + kron(&j.fz, &i.fz);
    let h_hfs = j_dot_i * Complex64::new(a_hfs, 0.0);

    let mu = atom.bohr_magneton;
    let zeeman = |jk: &CMatrix, ik: &CMatrix| {
        kron(jk, &eye_i) * Complex64::new(mu * atom.g_j, 0.0)
            + kron(&eye_j, ik) * Complex64::new(mu * atom.g_i, 0.0)
    };
    let h_zeeman = [
        zeeman(&j.fx, &i.fx),
        zeeman(&j.fy, &i.fy),
        zeeman(&j.fz, &i.fz),
    ];
    let f_z = kron(&j.fz, &eye_i) + kron(&eye_j, &i.fz);

    Ok(ProductBasisHamiltonian {
        dim: j.dim() * i.dim(),
        h_hfs,
        h_zeeman,
        f_z,
    })
}
