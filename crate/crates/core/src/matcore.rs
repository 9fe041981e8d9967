//! Core matrix and subspace types shared by every module: data matrices,
//! rank-r orthogonal projections stored as orthonormal bases, the robustness
//! budget `(q, kappa)` with its dual exponent, the sin-theta subspace
//! distance, and the project-wide CSV matrix format.

use nalgebra::{DMatrix, DVector};
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::Error;
use crate::Result;

/// Orthonormality tolerance for projection invariants.
pub const ORTHO_TOL: f64 = 1e-8;
/// Relative singular-value threshold for numerical rank detection.
pub const RANK_TOL: f64 = 1e-10;

/// An `l_q` exponent in `[1, infinity]`. Infinity is a distinguished variant
/// so that the dual exponent `q* = q/(q-1)` is exact (`1` when `q` is
/// infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Inf,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            return Ok(Exponent::Inf);
        }
        if !q.is_finite() || q < 1.0 {
            return Err(Error::InvalidParams(format!("exponent q must be in [1, inf], got {q}")));
        }
        Ok(Exponent::Finite(q))
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Exponent::Inf)
    }

    /// The exponent as a float (`f64::INFINITY` for the infinite variant).
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(q) => q,
            Exponent::Inf => f64::INFINITY,
        }
    }

    /// Dual exponent `q*` with `1/q + 1/q* = 1` (convention `1/inf = 0`).
    pub fn dual(self) -> Exponent {
        match self {
            Exponent::Inf => Exponent::Finite(1.0),
            Exponent::Finite(q) if q == 1.0 => Exponent::Inf,
            Exponent::Finite(q) => Exponent::Finite(q / (q - 1.0)),
        }
    }
}

/// The robustness budget `(q, kappa)`: perturbations are measured in `l_q`
/// and the projection must satisfy `||Pi||_{q->2} <= kappa`.
#[derive(Debug, Clone, Copy)]
pub struct RobustnessBudget {
    q: Exponent,
    kappa: f64,
}

impl RobustnessBudget {
    pub fn new(q: Exponent, kappa: f64) -> Result<Self> {
        if q.value() < 2.0 {
            return Err(Error::InvalidParams(format!("budget exponent must satisfy q >= 2, got {}", q.value())));
        }
        if !(kappa >= 1.0) {
            return Err(Error::InvalidParams(format!("kappa must be >= 1, got {kappa}")));
        }
        Ok(RobustnessBudget { q, kappa })
    }

    /// Budget for `q = infinity`.
    pub fn linf(kappa: f64) -> Result<Self> {
        Self::new(Exponent::Inf, kappa)
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn q_star(&self) -> Exponent {
        self.q.dual()
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// An `n x m` real data matrix; column `j` is the `j`-th sample in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::InvalidParams(format!(
                "data matrix must have n >= 1, m >= 1, got {}x{}",
                inner.nrows(),
                inner.ncols()
            )));
        }
        if inner.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("data matrix entry".into()));
        }
        Ok(DataMatrix { inner })
    }

    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::InvalidParams("no columns".into()));
        }
        let n = cols[0].len();
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        let inner = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        DataMatrix::new(inner)
    }

    /// Ambient dimension (rows).
    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    /// Sample count (columns).
    pub fn m(&self) -> usize {
        self.inner.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.inner.column(j).into_owned()
    }

    /// Keeps only the listed columns (in the given order).
    pub fn select_columns(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::InvalidParams("selecting zero columns".into()));
        }
        let inner = DMatrix::from_fn(self.n(), idx.len(), |i, j| self.inner[(i, idx[j])]);
        DataMatrix::new(inner)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// `A A^T`, the (unnormalized) second-moment matrix.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.inner * self.inner.transpose()
    }

    /// Spectral norm via the symmetric eigenproblem on the smaller Gram side.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.inner)
    }

    /// Row means, i.e. the average sample.
    pub fn mean(&self) -> DVector<f64> {
        let mut mu = DVector::zeros(self.n());
        for j in 0..self.m() {
            mu += self.inner.column(j);
        }
        mu / self.m() as f64
    }
}

/// Symmetric eigendecomposition `(values, vectors)` with a fast backend for
/// large matrices. The input is symmetrized first.
pub fn sym_eig(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = 0.5 * (m + m.transpose());
    if n <= 96 {
        let eig = sym.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        let fm = faer::Mat::from_fn(n, n, |i, j| sym[(i, j)]);
        let evd = fm
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("self-adjoint eigendecomposition of a finite matrix");
        let s = evd.S().column_vector().to_owned();
        let u = evd.U();
        let vals = DVector::from_fn(n, |i, _| s[i]);
        let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)]);
        (vals, vecs)
    }
}

/// Spectral norm of a rectangular matrix via the Gram matrix of its smaller
/// side.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let (n, m) = (a.nrows(), a.ncols());
    let g = if n <= m { a * a.transpose() } else { a.transpose() * a };
    let (vals, _) = sym_eig(&g);
    vals.iter().cloned().fold(0.0f64, f64::max).max(0.0).sqrt()
}

/// A rank-r orthogonal projection stored as an orthonormal basis of its
/// range. Rank 0 (empty basis) is allowed and represents the zero map.
#[derive(Debug, Clone)]
pub struct Projection {
    /// `n x r` matrix with orthonormal columns.
    basis: DMatrix<f64>,
}

impl Projection {
    /// Wraps a basis that is already orthonormal (checked against
    /// [`ORTHO_TOL`]).
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        if basis.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("projection basis entry".into()));
        }
        let r = basis.ncols();
        let gram = basis.transpose() * &basis;
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > ORTHO_TOL {
                    return Err(Error::InvalidParams(format!(
                        "basis not orthonormal: gram[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(Projection { basis })
    }

    /// The rank-0 projection on `R^n`.
    pub fn zero(n: usize) -> Self {
        Projection { basis: DMatrix::zeros(n, 0) }
    }

    /// Projection onto the span of a single (not necessarily unit) vector.
    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        orthonormalize(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Materializes `Pi = B B^T`. Intended for tests and small instances.
    pub fn matrix(&self) -> DMatrix<f64> {
        if self.rank() == 0 {
            return DMatrix::zeros(self.n(), self.n());
        }
        &self.basis * self.basis.transpose()
    }

    /// Applies `Pi` to a single vector.
    pub fn apply_vector(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "projection on R^{} applied to vector of length {}",
                self.n(),
                v.len()
            )));
        }
        if self.rank() == 0 {
            return Ok(DVector::zeros(self.n()));
        }
        Ok(&self.basis * (self.basis.transpose() * v))
    }
}

/// Orthonormalizes the columns of `raw` and returns the projection onto
/// their span. Numerical rank is detected by singular values relative to the
/// largest ([`RANK_TOL`]); an all-zero input yields the rank-0 projection.
pub fn orthonormalize(raw: &DMatrix<f64>) -> Result<Projection> {
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("orthonormalize input".into()));
    }
    let n = raw.nrows();
    if raw.ncols() == 0 {
        return Ok(Projection::zero(n));
    }
    let svd = raw.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    if smax <= 0.0 {
        return Ok(Projection::zero(n));
    }
    let rank = svd.singular_values.iter().filter(|&&s| s >= RANK_TOL * smax).count();
    if rank == 0 {
        return Ok(Projection::zero(n));
    }
    let u = svd.u.as_ref().expect("svd with u requested");
    let basis = u.columns(0, rank).into_owned();
    Projection::from_orthonormal(basis)
}

/// Applies the projection to every column of `a`.
pub fn apply_projection(p: &Projection, a: &DataMatrix) -> Result<DataMatrix> {
    if p.n() != a.n() {
        return Err(Error::DimensionMismatch(format!(
            "projection on R^{} applied to {}-row matrix",
            p.n(),
            a.n()
        )));
    }
    if p.rank() == 0 {
        return DataMatrix::new(DMatrix::zeros(a.n(), a.m()));
    }
    let projected = p.basis() * (p.basis().transpose() * a.matrix());
    DataMatrix::new(projected)
}

/// Squared sin-theta distance `||(I - Pi_1) Pi_2||_F^2`.
///
/// For equal ranks this is the squared Frobenius norm of the sines of the
/// principal angles between the two subspaces, and equals
/// `1/2 ||Pi_1 - Pi_2||_F^2`.
pub fn sin_theta_sq(p1: &Projection, p2: &Projection) -> Result<f64> {
    if p1.n() != p2.n() {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of R^{} and R^{}",
            p1.n(),
            p2.n()
        )));
    }
    let r2 = p2.rank() as f64;
    if p2.rank() == 0 {
        return Ok(0.0);
    }
    if p1.rank() == 0 {
        return Ok(r2);
    }
    let cross = p1.basis().transpose() * p2.basis();
    Ok((r2 - cross.norm_squared()).max(0.0))
}

// ---------------------------------------------------------------------------
// Matrix CSV format (project-wide): one row per matrix row, comma-separated,
// optional first comment line `# n=<n> m=<m>`. Ragged rows are rejected.
// ---------------------------------------------------------------------------

/// Writes a matrix in the project CSV format. Floats are printed with
/// shortest round-trip formatting, so a read-back is bit-exact.
pub fn write_matrix_csv<W: Write>(w: &mut W, a: &DataMatrix) -> Result<()> {
    writeln!(w, "# n={} m={}", a.n(), a.m())?;
    for i in 0..a.n() {
        let row: Vec<String> = (0..a.m()).map(|j| format!("{:?}", a.matrix()[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a matrix in the project CSV format, rejecting ragged rows.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<DataMatrix> {
    let reader = BufReader::new(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = trimmed
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: bad float {tok:?}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "ragged row at line {}: expected {} columns, got {}",
                    lineno + 1,
                    w,
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix file".into()));
    }
    let n = rows.len();
    let m = width.unwrap();
    DataMatrix::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn read_matrix_csv_path(path: &std::path::Path) -> Result<DataMatrix> {
    read_matrix_csv(std::fs::File::open(path)?)
}

pub fn write_matrix_csv_path(path: &std::path::Path, a: &DataMatrix) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_matrix_csv(&mut f, a)
}
