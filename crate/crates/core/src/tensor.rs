//! Dense complex linear algebra.
//!
//! Everything above this module (states, observables, measurements,
//! decoherence) is expressed in terms of [`CMatrix`] and [`CVector`]. Storage
//! is row-major and dense; the scenarios this crate targets stay well below a
//! few hundred basis states.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Largest number of entries any constructed matrix may hold.
pub const MAX_ENTRIES: usize = 1 << 20;

/// Tolerance used to merge near-equal eigenvalues.
pub const MERGE_TOL: f64 = 1e-8;

/// Tolerance for structural checks (Hermiticity, idempotence, normalization).
pub const INVARIANT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("sizing error: {0}")]
    Sizing(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("usage error: {0}")]
    Usage(String),
}

pub type TensorResult<T> = Result<T, TensorError>;

fn check_finite(data: &[C64]) -> TensorResult<()> {
    match data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Some(k) => Err(TensorError::NonFinite(k)),
        None => Ok(()),
    }
}

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> TensorResult<Self> {
        if rows == 0 || cols == 0 {
            return Err(TensorError::Sizing("matrix dimensions must be positive".into()));
        }
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n <= MAX_ENTRIES)
            .ok_or_else(|| TensorError::Sizing(format!("{rows}x{cols} exceeds {MAX_ENTRIES} entries")))?;
        if data.len() != n {
            return Err(TensorError::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {n} entries, got {}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> TensorResult<Self> {
        let r = rows.len();
        let c = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err(TensorError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Convenience constructor from real entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> TensorResult<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0 && rows * cols <= MAX_ENTRIES);
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// |v⟩⟨w|
    pub fn outer(v: &CVector, w: &CVector) -> Self {
        let mut m = Self::zeros(v.dim(), w.dim());
        for i in 0..v.dim() {
            for j in 0..w.dim() {
                m[(i, j)] = v[i] * w[j].conj();
            }
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

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> TensorResult<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &Self) -> TensorResult<Self> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn matmul(&self, other: &Self) -> TensorResult<Self> {
        if self.cols != other.rows {
            return Err(TensorError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn apply(&self, v: &CVector) -> TensorResult<CVector> {
        if self.cols != v.dim() {
            return Err(TensorError::DimensionMismatch(format!(
                "cannot apply {}x{} matrix to vector of dim {}",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        let data = (0..self.rows).map(|i| self.row(i).iter().zip(v.entries()).map(|(a, b)| a * b).sum()).collect();
        Ok(CVector { data })
    }

    /// U·M·U†
    pub fn conjugate_by(&self, u: &Self) -> TensorResult<Self> {
        u.matmul(self)?.matmul(&dagger(u))
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    fn same_shape(&self, other: &Self) -> TensorResult<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TensorError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>8.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Dense complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector {
    data: Vec<C64>,
}

impl CVector {
    pub fn new(data: Vec<C64>) -> TensorResult<Self> {
        if data.is_empty() {
            return Err(TensorError::Sizing("vector dimension must be positive".into()));
        }
        if data.len() > MAX_ENTRIES {
            return Err(TensorError::Sizing(format!("vector of dim {} too large", data.len())));
        }
        check_finite(&data)?;
        Ok(Self { data })
    }

    pub fn from_real(data: &[f64]) -> TensorResult<Self> {
        Self::new(data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// The `k`-th computational basis vector of dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        let mut data = vec![C64::new(0.0, 0.0); dim];
        data[k] = C64::new(1.0, 0.0);
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn normalized(&self) -> TensorResult<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(TensorError::Usage("cannot normalize the zero vector".into()));
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn kron(&self, other: &Self) -> TensorResult<Self> {
        let n = self.dim().checked_mul(other.dim()).filter(|&n| n <= MAX_ENTRIES);
        if n.is_none() {
            return Err(TensorError::Sizing("vector Kronecker product too large".into()));
        }
        let data = self.data.iter().flat_map(|&a| other.data.iter().map(move |&b| a * b)).collect();
        Ok(Self { data })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<usize> for CVector {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> TensorResult<CMatrix> {
    kron_with_limit(a, b, MAX_ENTRIES)
}

/// Kronecker product with an explicit cap on the number of result entries.
pub fn kron_with_limit(a: &CMatrix, b: &CMatrix, max_entries: usize) -> TensorResult<CMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let total = rows.zip(cols).and_then(|(r, c)| r.checked_mul(c));
    let (rows, cols) = match total {
        Some(n) if n <= max_entries && n <= MAX_ENTRIES => (rows.unwrap(), cols.unwrap()),
        _ => {
            return Err(TensorError::Sizing(format!(
                "kron of {}x{} and {}x{} exceeds {max_entries} entries",
                a.rows, a.cols, b.rows, b.cols
            )))
        }
    };
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for j in 0..a.cols {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// One eigenvalue group of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGroup {
    pub eigenvalue: f64,
    pub projector: CMatrix,
}

/// Eigenvalue groups in ascending eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub groups: Vec<SpectralGroup>,
    pub tol: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.eigenvalue).collect()
    }

    /// Σ λᵢ Pᵢ
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.groups[0].projector.rows();
        let mut out = CMatrix::zeros(n, n);
        for g in &self.groups {
            out = out.add(&g.projector.scale(C64::new(g.eigenvalue, 0.0))).expect("same shape");
        }
        out
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns of the
/// returned matrix) of a Hermitian matrix, by cyclic complex Jacobi sweeps.
pub fn eigh(h: &CMatrix) -> TensorResult<(Vec<f64>, CMatrix)> {
    let err = h.hermiticity_error();
    if err > INVARIANT_TOL {
        return Err(TensorError::NotHermitian(err));
    }
    let n = h.rows();
    let mut a = h.clone();
    // symmetrize so rounding in the input does not leak into the rotation
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // J = U·R with U = diag(.., 1 @p, e^{-iφ} @q, ..)
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * jpp + akq * jqp;
                    a[(k, q)] = akp * jpq + akq * jqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
                    a[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok((values, vectors))
}

/// Groups the spectrum of `h` into eigenvalue classes whose members lie
/// within `tol` of the class's smallest eigenvalue.
pub fn spectral_decompose(h: &CMatrix, tol: f64) -> TensorResult<SpectralDecomposition> {
    let (values, vectors) = eigh(h)?;
    let n = values.len();
    let mut groups: Vec<(Vec<usize>, f64)> = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        match groups.last_mut() {
            Some((members, first)) if lambda - *first <= tol => members.push(k),
            _ => groups.push((vec![k], lambda)),
        }
    }
    let groups = groups
        .into_iter()
        .map(|(members, _)| {
            let mut projector = CMatrix::zeros(n, n);
            for &k in &members {
                for i in 0..n {
                    for j in 0..n {
                        projector[(i, j)] += vectors[(i, k)] * vectors[(j, k)].conj();
                    }
                }
            }
            let eigenvalue = members.iter().map(|&k| values[k]).sum::<f64>() / members.len() as f64;
            SpectralGroup { eigenvalue, projector }
        })
        .collect();
    Ok(SpectralDecomposition { groups, tol })
}

/// Reduced matrix of `rho` on the subsystems listed in `keep`.
///
/// `dims` gives the subsystem dimensions in tensor-product order; the kept
/// subsystems appear in the result in that same order regardless of how
/// `keep` is sorted.
pub fn partial_trace(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> TensorResult<CMatrix> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(TensorError::Usage("subsystem dimensions must be positive".into()));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(TensorError::Usage(format!("keep index {bad} out of range for {} subsystems", dims.len())));
    }
    let total: usize = dims.iter().product();
    if !rho.is_square() || rho.rows() != total {
        return Err(TensorError::DimensionMismatch(format!(
            "rho is {}x{}, expected side {total}",
            rho.rows(),
            rho.cols()
        )));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > INVARIANT_TOL || !rho.is_hermitian(INVARIANT_TOL) {
        log::warn!("partial_trace input is not a unit-trace Hermitian matrix (trace {tr})");
    }

    let kept: Vec<bool> = (0..dims.len()).map(|k| keep.contains(&k)).collect();
    let kept_dim: usize = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let traced_dim = total / kept_dim;

    // split every global index into (kept index, traced index)
    let mut split = Vec::with_capacity(total);
    for g in 0..total {
        let (mut rem, mut ki, mut ti) = (g, 0usize, 0usize);
        let mut kstride = 1;
        let mut tstride = 1;
        for (k, &d) in dims.iter().enumerate().rev() {
            let digit = rem % d;
            rem /= d;
            if kept[k] {
                ki += digit * kstride;
                kstride *= d;
            } else {
                ti += digit * tstride;
                tstride *= d;
            }
        }
        split.push((ki, ti));
    }
    let mut by_traced: Vec<Vec<usize>> = vec![Vec::new(); traced_dim];
    for (g, &(_, t)) in split.iter().enumerate() {
        by_traced[t].push(g);
    }

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for members in &by_traced {
        for &g1 in members {
            for &g2 in members {
                out[(split[g1].0, split[g2].0)] += rho[(g1, g2)];
            }
        }
    }
    Ok(out)
}
