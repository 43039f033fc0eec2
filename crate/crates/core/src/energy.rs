//! Quadratic energy functions `V(x) = ½ xᵀAx`.
//!
//! A trajectory satisfies the coordinate-wise sign condition for `V` when
//! every velocity component has the opposite sign of the matching gradient
//! component, `ẋ_i (Ax)_i <= 0`. The classification here decides which
//! convergence statement applies: a positive-definite `A` forces
//! convergence, while a rank-deficient `A` only says something when its
//! kernel is one-dimensional and has no zero entry.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue threshold used by [`QuadraticEnergy::new`].
pub const EIGEN_TOL: f64 = 1e-9;
/// Relative threshold below which a kernel entry counts as zero.
pub const KERNEL_ZERO_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Classification {
    PositiveDefinite,
    PsdRankDeficient,
    Indefinite,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PositiveDefinite => "positive-definite",
            Self::PsdRankDeficient => "psd-rank-deficient",
            Self::Indefinite => "indefinite",
        })
    }
}

/// Result of an eigen-decomposition based classification.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub classification: Classification,
    /// Orthonormal basis of the numerical kernel.
    pub kernel_basis: Vec<DVector<f64>>,
    /// Largest eigenvalue magnitude (the spectral norm).
    pub norm: f64,
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
}

/// Classifies a symmetric matrix by its spectrum. Eigenvalues within
/// `tol·‖A‖` of zero span the kernel.
pub fn classify(a: &DMatrix<f64>, tol: f64) -> Result<Spectrum> {
    let sym = symmetrize(a)?;
    let eig = SymmetricEigen::new(sym);
    let norm = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cut = tol * norm;

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let kernel_basis: Vec<DVector<f64>> = order
        .iter()
        .filter(|&&k| eig.eigenvalues[k].abs() <= cut)
        .map(|&k| canonical_sign(eig.eigenvectors.column(k).normalize()))
        .collect();

    let classification = if eigenvalues.iter().all(|&l| l > cut) {
        Classification::PositiveDefinite
    } else if eigenvalues.iter().all(|&l| l >= -cut) {
        Classification::PsdRankDeficient
    } else {
        Classification::Indefinite
    };
    Ok(Spectrum {
        classification,
        kernel_basis,
        norm,
        eigenvalues,
    })
}

fn symmetrize(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let asymmetry = (a - a.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * a.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok((a + a.transpose()) * 0.5)
}

// Largest-magnitude entry positive, so kernels come out deterministic.
fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let lead = v.iter().fold(0.0_f64, |m, &x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        -v
    } else {
        v
    }
}

/// `V(x) = ½ xᵀAx` together with its classification and kernel.
#[derive(Debug, Clone)]
pub struct QuadraticEnergy {
    matrix: DMatrix<f64>,
    spectrum: Spectrum,
}

impl QuadraticEnergy {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(a, EIGEN_TOL)
    }

    pub fn with_tolerance(a: DMatrix<f64>, tol: f64) -> Result<Self> {
        let matrix = symmetrize(&a)?;
        let spectrum = classify(&matrix, tol)?;
        Ok(Self { matrix, spectrum })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn classification(&self) -> Classification {
        self.spectrum.classification
    }

    pub fn kernel_basis(&self) -> &[DVector<f64>] {
        &self.spectrum.kernel_basis
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Spectral norm `‖A‖`.
    pub fn norm(&self) -> f64 {
        self.spectrum.norm
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(0.5 * x.dot(&(&self.matrix * x)))
    }

    /// `∇V(x) = Ax`.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(&self.matrix * x)
    }

    /// Whether no nonzero kernel vector has a zero entry. This can only hold
    /// when the kernel has dimension at most one.
    pub fn kernel_is_zero_free(&self) -> bool {
        match self.kernel_basis() {
            [] => true,
            [v] => {
                let scale = v.norm();
                v.iter().all(|x| x.abs() > KERNEL_ZERO_TOL * scale)
            }
            _ => false,
        }
    }

    /// Euclidean distance from `point` to the span of the kernel basis.
    pub fn kernel_distance(&self, point: &DVector<f64>) -> Result<f64> {
        self.check_dim(point)?;
        let mut residual = point.clone();
        for v in self.kernel_basis() {
            residual -= v * v.dot(point);
        }
        Ok(residual.norm())
    }
}

impl fmt::Display for QuadraticEnergy {
    /// Row-major text, one row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.matrix.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// `xᵀLx` for a Laplacian `L`.
pub fn disagreement(laplacian: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    if laplacian.nrows() != x.len() || laplacian.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: laplacian.nrows(),
            actual: x.len(),
        });
    }
    Ok(x.dot(&(laplacian * x)))
}
