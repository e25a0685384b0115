//! Symmetric positive-definite matrices and the affine-invariant geometry.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};
use crate::scalar::Real;

/// A symmetric positive-definite matrix together with its eigendecomposition.
///
/// Construction rejects anything with a non-positive eigenvalue; nothing is
/// ever clamped or repaired here. `A^{1/2}` and `A^{-1/2}` are computed lazily
/// and cached, since distances and geodesics keep asking for them.
#[derive(Debug, Clone)]
pub struct SpdMatrix<T: Real> {
    matrix: Array2<T>,
    eig: SymEigen<T>,
    sqrt: OnceLock<Array2<T>>,
    inv_sqrt: OnceLock<Array2<T>>,
}

/// Scalar functions that can be lifted to an SPD matrix through its
/// eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpdFn<T> {
    Log,
    Exp,
    Sqrt,
    InvSqrt,
    Inverse,
    Power(T),
}

impl<T: Real> SpdFn<T> {
    fn apply(self, x: T) -> T {
        match self {
            SpdFn::Log => x.ln(),
            SpdFn::Exp => x.exp(),
            SpdFn::Sqrt => x.sqrt(),
            SpdFn::InvSqrt => x.sqrt().recip(),
            SpdFn::Inverse => x.recip(),
            SpdFn::Power(t) => x.powf(t),
        }
    }
}

impl<T: Real> SpdMatrix<T> {
    pub fn new(matrix: Array2<T>) -> Result<Self> {
        let eig = linalg::sym_eig(&matrix.view())?;
        let min = eig.values[eig.dim() - 1];
        if !(min > T::zero()) {
            return Err(Error::invalid(format!(
                "matrix is not positive definite (smallest eigenvalue {min})"
            )));
        }
        let matrix = linalg::symmetrize(&matrix);
        Ok(Self::from_parts(matrix, eig))
    }

    fn from_parts(matrix: Array2<T>, eig: SymEigen<T>) -> Self {
        Self {
            matrix,
            eig,
            sqrt: OnceLock::new(),
            inv_sqrt: OnceLock::new(),
        }
    }

    /// Builds `V diag(values) Vᵀ` from an orthonormal basis, reusing it as the
    /// stored decomposition.
    fn from_spectrum(values: Array1<T>, vectors: Array2<T>) -> Result<Self> {
        if values.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::numerical("matrix function left the SPD cone"));
        }
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            values[j]
                .partial_cmp(&values[i])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let sorted = Array1::from_iter(order.iter().map(|&i| values[i]));
        let mut basis = Array2::zeros((n, n));
        for (col, &src) in order.iter().enumerate() {
            basis.column_mut(col).assign(&vectors.column(src));
        }
        let eig = SymEigen {
            values: sorted,
            vectors: basis,
        };
        let matrix = eig.map(|x| x);
        Ok(Self::from_parts(matrix, eig))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(
            Array2::eye(dim),
            SymEigen {
                values: Array1::ones(dim),
                vectors: Array2::eye(dim),
            },
        )
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        Self::new(Array2::from_diag(&Array1::from_vec(diag.to_vec())))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.matrix
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.matrix.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.matrix
    }

    pub fn eigen(&self) -> &SymEigen<T> {
        &self.eig
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &Array1<T> {
        &self.eig.values
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eig.values[self.dim() - 1]
    }

    pub fn condition_number(&self) -> T {
        self.eig.values[0] / self.min_eigenvalue()
    }

    /// Maps through `f` and returns the symmetric (not necessarily SPD)
    /// result.
    pub fn map(&self, f: SpdFn<T>) -> Array2<T> {
        match f {
            SpdFn::Sqrt => self.sqrt_matrix().clone(),
            SpdFn::InvSqrt => self.inv_sqrt_matrix().clone(),
            _ => self.eig.map(|x| f.apply(x)),
        }
    }

    /// Maps through an SPD-preserving function without re-decomposing.
    pub fn map_spd(&self, f: SpdFn<T>) -> Result<Self> {
        if f == SpdFn::Log {
            return Err(Error::invalid("log does not map into the SPD cone"));
        }
        let values = self.eig.values.mapv(|x| f.apply(x));
        Self::from_spectrum(values, self.eig.vectors.clone())
    }

    pub fn log(&self) -> Array2<T> {
        self.map(SpdFn::Log)
    }

    pub fn sqrt(&self) -> Self {
        self.map_spd(SpdFn::Sqrt).expect("sqrt of SPD is SPD")
    }

    pub fn inv_sqrt(&self) -> Self {
        self.map_spd(SpdFn::InvSqrt).expect("inverse sqrt of SPD is SPD")
    }

    pub fn inverse(&self) -> Self {
        self.map_spd(SpdFn::Inverse).expect("inverse of SPD is SPD")
    }

    pub fn powf(&self, t: T) -> Result<Self> {
        self.map_spd(SpdFn::Power(t))
    }

    pub fn sqrt_matrix(&self) -> &Array2<T> {
        self.sqrt.get_or_init(|| self.eig.map(|x| x.sqrt()))
    }

    pub fn inv_sqrt_matrix(&self) -> &Array2<T> {
        self.inv_sqrt.get_or_init(|| self.eig.map(|x| x.sqrt().recip()))
    }

    /// `W A Wᵀ` for a full-row-rank `W`.
    pub fn congruence(&self, w: &ArrayView2<'_, T>) -> Result<Self> {
        if w.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "congruence by a {}x{} matrix on a {}-dim SPD matrix",
                w.nrows(),
                w.ncols(),
                self.dim()
            )));
        }
        Self::new(linalg::congruence(w, &self.view()))
    }

    /// `A^{-1/2} B A^{-1/2}` with `self` as `A`.
    pub fn whiten(&self, other: &Self) -> Array2<T> {
        linalg::congruence(&self.inv_sqrt_matrix().view(), &other.view())
    }

    /// Lossy conversion to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<SpdMatrix<U>> {
        SpdMatrix::new(self.matrix.mapv(|x| U::lit(x.as_f64())))
    }
}

/// Lifts `f` to `S` through its eigenvalues.
pub fn spd_map<T: Real>(s: &SpdMatrix<T>, f: SpdFn<T>) -> Array2<T> {
    s.map(f)
}

/// Matrix exponential of a symmetric matrix; always SPD.
pub fn exp_sym<T: Real>(s: &ArrayView2<'_, T>) -> Result<SpdMatrix<T>> {
    let eig = linalg::sym_eig(s)?;
    SpdMatrix::from_spectrum(eig.values.mapv(|x| x.exp()), eig.vectors)
}

fn check_dims<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Squared affine-invariant distance `Σ log² λᵢ(A^{-1/2} B A^{-1/2})`.
pub fn squared_distance<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T> {
    check_dims(a, b)?;
    let eig = linalg::sym_eig(&a.whiten(b).view())?;
    let mut acc = T::zero();
    for &l in eig.values.iter() {
        if !(l > T::zero()) {
            return Err(Error::numerical("whitened matrix lost positivity"));
        }
        let g = l.ln();
        acc += g * g;
    }
    Ok(acc)
}

/// Affine-invariant Riemannian distance `‖log(A^{-1/2} B A^{-1/2})‖_F`.
pub fn distance<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>) -> Result<T> {
    squared_distance(a, b).map(|d| d.sqrt())
}

/// Point at parameter `t` on the geodesic from `a` to `b`:
/// `A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}`.
pub fn geodesic<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>, t: T) -> Result<SpdMatrix<T>> {
    check_dims(a, b)?;
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::invalid(format!("geodesic parameter {t} outside [0, 1]")));
    }
    if t == T::zero() {
        return Ok(a.clone());
    }
    if t == T::one() {
        return Ok(b.clone());
    }
    let inner = SpdMatrix::new(a.whiten(b))?.powf(t)?;
    SpdMatrix::new(linalg::congruence(&a.sqrt_matrix().view(), &inner.view()))
}
