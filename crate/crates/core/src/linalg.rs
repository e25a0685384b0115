//! Dense symmetric linear algebra used by every other module.
//!
//! All matrix functions go through [`sym_eig`], a cyclic Jacobi solver with
//! the relative-accuracy stopping test of Demmel and Veselić. Matrices here
//! are small (a few dozen rows at most) so the cubic cost per sweep is
//! irrelevant next to the accuracy Jacobi gives on ill-conditioned SPD input.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order and `vectors` holds the matching orthonormal eigenvectors
/// as columns.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

impl<T: Real> SymEigen<T> {
    /// `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Array2<T> {
        let mapped = self.values.mapv(f);
        let scaled = &self.vectors * &mapped.view().insert_axis(Axis(0));
        symmetrize(&scaled.dot(&self.vectors.t()))
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn frobenius<T: Real>(a: &ArrayView2<'_, T>) -> T {
    a.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub fn max_abs<T: Real>(a: &ArrayView2<'_, T>) -> T {
    a.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

/// `(A + Aᵀ) / 2`.
pub fn symmetrize<T: Real>(a: &Array2<T>) -> Array2<T> {
    let half = T::lit(0.5);
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (a[[i, j]] + a[[j, i]]) * half;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Checks squareness, finiteness and symmetry within
/// `max|a_ij − a_ji| ≤ tol · max|a_ij|`.
pub fn check_symmetric<T: Real>(a: &ArrayView2<'_, T>) -> Result<()> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::invalid(format!("matrix is {r}x{c}, expected square")));
    }
    if r == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let scale = max_abs(a);
    let tol = T::symmetry_tolerance() * scale;
    for i in 0..r {
        for j in (i + 1)..r {
            if (a[[i, j]] - a[[j, i]]).abs() > tol {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    a[[i, j]],
                    a[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Above this size [`sym_eig`] switches from Jacobi to Householder
/// tridiagonalization followed by implicit QL.
pub const JACOBI_MAX_DIM: usize = 10;

/// Symmetric eigendecomposition.
///
/// The input must be symmetric within [`Real::symmetry_tolerance`]; the
/// strictly symmetric part is what gets decomposed. Small matrices use cyclic
/// Jacobi (relative accuracy even for tiny eigenvalues), larger ones the
/// tridiagonal QL route, which is several times faster.
pub fn sym_eig<T: Real>(s: &ArrayView2<'_, T>) -> Result<SymEigen<T>> {
    check_symmetric(s)?;
    let sym = symmetrize(&s.to_owned());
    if sym.nrows() <= JACOBI_MAX_DIM {
        jacobi_eig(&sym)
    } else {
        tridiagonal_ql_eig(&sym)
    }
}

fn into_sorted<T: Real>(n: usize, diag: &[T], v: &[T]) -> SymEigen<T> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        diag[j]
            .partial_cmp(&diag[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| diag[i]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        // sign convention: the largest-magnitude component is positive
        let mut pivot = T::zero();
        for k in 0..n {
            let x = v[k * n + src];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < T::zero() { -T::one() } else { T::one() };
        for k in 0..n {
            vectors[[k, col]] = sign * v[k * n + src];
        }
    }
    SymEigen { values, vectors }
}

/// Cyclic Jacobi with the Demmel–Veselić stopping test.
pub fn jacobi_eig<T: Real>(sym: &Array2<T>) -> Result<SymEigen<T>> {
    let n = sym.nrows();
    let mut a: Vec<T> = sym.iter().copied().collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let eps = T::epsilon();
    let norm = frobenius(&sym.view());
    // below this an off-diagonal entry is numerically zero whatever the diagonal
    let floor = T::min_positive_value().max(norm * eps * eps);

    let mut converged = n == 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq.abs() <= floor || apq.abs() <= eps * (app * aqq).abs().sqrt() {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (apq + apq);
                let t = {
                    let mag = T::one() / (theta.abs() + theta.hypot(T::one()));
                    if theta < T::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::one() / t.hypot(T::one());
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps (dim {n})"
        )));
    }

    let diag: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
    Ok(into_sorted(n, &diag, &v))
}

/// Householder reduction to tridiagonal form and implicit QL with Wilkinson
/// shifts (the EISPACK `tred2`/`tql2` pair).
pub fn tridiagonal_ql_eig<T: Real>(sym: &Array2<T>) -> Result<SymEigen<T>> {
    let n = sym.nrows();
    let mut v: Vec<T> = sym.iter().copied().collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    let zero = T::zero();
    let one = T::one();

    // tred2
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = zero;
                v[j * n + i] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = one;
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = zero;
    }
    v[(n - 1) * n + n - 1] = one;
    e[0] = zero;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let two = one + one;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::numerical(format!(
                        "tridiagonal QL did not converge (dim {n})"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let hk = v[k * n + i + 1];
                        let vk = v[k * n + i];
                        v[k * n + i + 1] = s * vk + c * hk;
                        v[k * n + i] = c * vk - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    Ok(into_sorted(n, &d, &v))
}

/// `W C Wᵀ`, symmetrized.
pub fn congruence<T: Real>(w: &ArrayView2<'_, T>, c: &ArrayView2<'_, T>) -> Array2<T> {
    symmetrize(&w.dot(c).dot(&w.t()))
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &ArrayView2<'_, T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("cholesky of a non-square matrix"));
    }
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::numerical(format!(
                "matrix is not positive definite (pivot {j} = {d})"
            )));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}
