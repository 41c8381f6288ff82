//! Dense complex helpers shared by the channel model and both optimisation stages.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `a * b` through the packed zgemm kernel.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matmul inner dimension");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: Complex<f64> is repr(C) with layout [re, im], the same as the
    // kernel's c64 = [f64; 2]. nalgebra storage is column-major and contiguous,
    // so (row stride, col stride) = (1, nrows). Buffers do not alias.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `B X B` for Hermitian `B`, the inverse of the log-det Hessian applied to `X`.
pub fn sandwich(b: &CMatrix, x: &CMatrix) -> CMatrix {
    hermitian_part(&matmul(&matmul(b, x), b))
}

/// `Re tr(A B)` for Hermitian `A`, i.e. the real Frobenius inner product.
pub fn herm_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `Re vᴴ A v`.
pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    v.dotc(&(a * v)).re
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

/// Relative deviation from Hermitian symmetry.
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    (a - a.adjoint()).norm() / scale
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

/// Lower Cholesky factor `L` with `A = L Lᴴ` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    pub fn l(&self) -> &CMatrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.nrows()).map(|i| self.l[(i, i)].re.ln()).sum::<f64>()
    }

    /// `A⁻¹`.
    pub fn inverse(&self) -> CMatrix {
        let n = self.l.nrows();
        // Invert L by forward substitution, then A⁻¹ = L⁻ᴴ L⁻¹.
        let mut linv = CMatrix::zeros(n, n);
        for j in 0..n {
            linv[(j, j)] = ONE / self.l[(j, j)];
            for i in j + 1..n {
                let mut acc = ZERO;
                for p in j..i {
                    acc += self.l[(i, p)] * linv[(p, j)];
                }
                linv[(i, j)] = -acc / self.l[(i, i)];
            }
        }
        hermitian_part(&matmul(&linv.adjoint(), &linv))
    }
}

/// Cholesky factorisation; `None` unless `a` is numerically positive definite.
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &CMatrix) -> Option<Cholesky> {
    let n = a.nrows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for p in 0..j {
            d -= l[(j, p)].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = C64::new(d, 0.0);
        for i in j + 1..n {
            let mut acc = a[(i, j)];
            for p in 0..j {
                acc -= l[(i, p)] * l[(j, p)].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    Some(Cholesky { l })
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
pub fn leading_eigenpair(a: &CMatrix) -> (f64, CVector) {
    let (values, vectors) = hermitian_eigen(a);
    let last = a.nrows() - 1;
    (values[last], vectors.column(last).into_owned())
}

/// Project every entry onto the unit circle; zero entries map to 1.
pub fn unit_modulus(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            ONE
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(m: usize, n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        CMatrix::from_fn(m, n, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            C64::new(a, b)
        })
    }

    #[test]
    fn zgemm_matches_naive_product() {
        let a = sample(7, 5, 1);
        let b = sample(5, 3, 2);
        let diff = (matmul(&a, &b) - &a * &b).norm();
        assert!(diff < 1e-13, "{diff}");
    }

    #[test]
    fn herm_inner_is_trace_of_product() {
        let x = sample(4, 4, 3);
        let y = sample(4, 4, 4);
        let a = hermitian_part(&x);
        let b = hermitian_part(&y);
        let tr = (&a * &b).trace().re;
        assert!((herm_inner(&a, &b) - tr).abs() < 1e-13);
    }

    #[test]
    fn leading_pair_of_diagonal() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(5.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let (l, v) = leading_eigenpair(&d);
        assert!((l - 5.0).abs() < 1e-12);
        assert!((v[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = CMatrix::identity(3, 3);
        a[(2, 2)] = C64::new(-1.0, 0.0);
        assert!(cholesky(&a).is_none());
        assert!(cholesky(&CMatrix::identity(3, 3)).is_some());
    }

    #[test]
    fn cholesky_inverse_and_log_det() {
        let x = sample(5, 5, 9);
        let a = matmul(&x, &x.adjoint()) + CMatrix::identity(5, 5);
        let chol = cholesky(&a).unwrap();
        let err = (matmul(&chol.inverse(), &a) - CMatrix::identity(5, 5)).norm();
        assert!(err < 1e-12, "{err}");
        let (vals, _) = hermitian_eigen(&a);
        let want: f64 = vals.iter().map(|v| v.ln()).sum();
        assert!((chol.log_det() - want).abs() < 1e-12);
    }
}
