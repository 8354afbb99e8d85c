//! Dense complex linear algebra sized for this crate's problems.
//!
//! Everything the simulator touches is a small dense Hermitian matrix
//! (charge-basis construction at dimension ~101, propagation at 64), so the
//! layer is deliberately minimal: row-major complex matrices, a cyclic Jacobi
//! eigensolver, eigendecomposition-based matrix exponentials and Kronecker
//! products. No LU, no SVD, no non-Hermitian paths.

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITICITY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (deviation {dev:.3e}, tolerance {tol:.3e})")]
    NotHermitian { dev: f64, tol: f64 },
    #[error("Jacobi sweep limit reached after {sweeps} sweeps (off-norm {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from nested row slices; intended for literals in tests.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = if r > 0 { rows[0].len() } else { 0 };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: C64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// `out = self * rhs`, reusing `out`'s storage. This is the propagation
    /// hot path: the i-k-j loop order keeps both `rhs` and `out` rows
    /// contiguous so the inner loop vectorizes.
    pub fn mul_into(&self, rhs: &Self, out: &mut Self) {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch");
        assert_eq!((out.rows, out.cols), (self.rows, rhs.cols));
        out.data.fill(C64::new(0.0, 0.0));
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in a_row.iter().enumerate() {
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &r) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * r;
                }
            }
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows, rhs.cols);
        self.mul_into(rhs, &mut out);
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Scale row i by `phases[i]` (left-multiplication by a diagonal matrix).
    pub fn scale_rows(&mut self, phases: &[C64]) {
        assert_eq!(phases.len(), self.rows);
        for (i, &p) in phases.iter().enumerate() {
            for v in self.row_mut(i) {
                *v *= p;
            }
        }
    }

    /// Scale column j by `phases[j]` (right-multiplication by a diagonal matrix).
    pub fn scale_cols(&mut self, phases: &[C64]) {
        assert_eq!(phases.len(), self.cols);
        for i in 0..self.rows {
            for (v, &p) in self.row_mut(i).iter_mut().zip(phases) {
                *v *= p;
            }
        }
    }

    /// Kronecker product: `(A ⊗ B)[i·p+k, j·q+l] = A[i,j]·B[k,l]`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (p, q) = (rhs.rows, rhs.cols);
        let mut out = Self::zeros(self.rows * p, self.cols * q);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..p {
                    for l in 0..q {
                        out[(i * p + k, j * q + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `max_ij |A[i,j] - conj(A[j,i])|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `max |U†U - I|`, the working definition of unitarity error.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.dagger().mul(self);
        gram.max_abs_diff(&Self::identity(self.cols))
    }

    /// Replace self by the average of itself and its conjugate transpose.
    pub fn symmetrize_hermitian(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)].conj());
                self[(i, j)] = avg;
                self[(j, i)] = avg.conj();
            }
            let d = self[(i, i)].re;
            self[(i, i)] = C64::new(d, 0.0);
        }
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a Hermitian matrix: `A = V Λ V†`.
///
/// Eigenvalues are sorted ascending; `eigenvectors` holds the corresponding
/// orthonormal eigenvectors as columns. Each column is phase-fixed so that its
/// largest-magnitude entry is real and positive, which makes the output
/// deterministic run to run.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Reconstruct `V Λ V†` (diagnostics and tests).
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let mut vl = self.eigenvectors.clone();
        vl.scale_cols(&self.eigenvalues.iter().map(|&e| C64::new(e, 0.0)).collect::<Vec<_>>());
        let mut out = ComplexMatrix::zeros(n, n);
        vl.mul_into(&self.eigenvectors.dagger(), &mut out);
        out
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Rotations are applied in a fixed row-major order over the strict upper
/// triangle until the off-diagonal Frobenius norm falls below `1e-14` of the
/// matrix scale, so the result is deterministic. Quadratic convergence makes
/// the sweep limit generous for every matrix this crate produces.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<EigenDecomposition, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let dev = a.hermiticity_defect();
    if dev > HERMITICITY_REL_TOL * scale {
        return Err(LinalgError::NotHermitian { dev, tol: HERMITICITY_REL_TOL * scale });
    }

    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize_hermitian();
    let mut v = ComplexMatrix::identity(n);

    let frob = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = 1e-14 * frob;
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&m);
        if off <= target {
            converged = true;
            break;
        }
        // Elements far below the current off-norm contribute nothing useful;
        // skipping them keeps late sweeps cheap.
        let skip_below = off / (n as f64) * 1e-2;
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut m, &mut v, p, q, skip_below.min(target));
            }
        }
        sweeps += 1;
    }
    if !converged && off_diagonal_norm(&m) > target {
        return Err(LinalgError::NoConvergence { sweeps, off: off_diagonal_norm(&m) });
    }

    // Sort ascending, permuting eigenvector columns along.
    let mut order: Vec<usize> = (0..n).collect();
    let evals: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    order.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).unwrap().then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| evals[i]).collect();
    let mut vecs = ComplexMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vecs[(i, new_j)] = v[(i, old_j)];
        }
    }
    fix_column_phases(&mut vecs);

    Ok(EigenDecomposition { eigenvalues, eigenvectors: vecs })
}

fn off_diagonal_norm(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += 2.0 * m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// One complex Jacobi rotation zeroing `m[p,q]`, accumulated into `v`.
fn jacobi_rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, skip_below: f64) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r <= skip_below {
        return;
    }
    let u = apq / r; // e^{i·arg(apq)}
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let tau = (aqq - app) / (2.0 * r);
    // Smaller-magnitude root of t² - 2τt - 1 = 0.
    let t = if tau >= 0.0 {
        -1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let su = s * u;
    let su_conj = s * u.conj();

    let n = m.rows();
    // Column update: M ← M·J with J[p,p]=J[q,q]=c, J[q,p]=s·ū, J[p,q]=−s·u.
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp + su_conj * mkq;
        m[(k, q)] = -su * mkp + c * mkq;
    }
    // Row update: M ← J†·M.
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk + su * mqk;
        m[(q, k)] = -su_conj * mpk + c * mqk;
    }
    // Clean up what should be exactly zero / real.
    m[(p, q)] = C64::new(0.0, 0.0);
    m[(q, p)] = C64::new(0.0, 0.0);
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
    // Accumulate V ← V·J.
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp + su_conj * vkq;
        v[(k, q)] = -su * vkp + c * vkq;
    }
}

/// Rotate each column so its largest-magnitude entry is real and positive.
fn fix_column_phases(v: &mut ComplexMatrix) {
    let (n, cols) = (v.rows(), v.cols());
    for j in 0..cols {
        let mut best = 0usize;
        let mut best_mag = 0.0;
        for i in 0..n {
            let mag = v[(i, j)].norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = v[(best, j)];
        let mag = pivot.norm();
        if mag > 0.0 {
            let phase = pivot.conj() / mag;
            for i in 0..n {
                let x = v[(i, j)] * phase;
                v[(i, j)] = x;
            }
        }
    }
}

/// `exp(i·scale·A)` for Hermitian `A`, via `V exp(i·scale·Λ) V†`.
///
/// Going through the eigendecomposition keeps the result unitary to roundoff,
/// which matters when millions of these factors are chained into a propagator.
pub fn expm_hermitian(a: &ComplexMatrix, scale: f64) -> Result<ComplexMatrix, LinalgError> {
    let eig = eig_hermitian(a)?;
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&e| C64::from_polar(1.0, scale * e))
        .collect();
    let mut vl = eig.eigenvectors.clone();
    vl.scale_cols(&phases);
    let mut out = ComplexMatrix::zeros(a.rows(), a.cols());
    vl.mul_into(&eig.eigenvectors.dagger(), &mut out);
    Ok(out)
}

/// Free-function form of the Kronecker product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}
