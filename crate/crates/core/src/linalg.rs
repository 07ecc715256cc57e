//! Dense linear algebra helpers shared by the solvers.

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 100_000;

/// Frobenius norm.
pub fn fro(m: &Mat) -> f64 {
    m.norm()
}

/// `(M + Mᵀ)/2`, exactly symmetric in floating point.
pub fn symmetrize(m: &Mat) -> Mat {
    let n = m.nrows();
    let mut s = Mat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            s[(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    s
}

pub fn is_zero(m: &Mat) -> bool {
    m.iter().all(|&v| v == 0.0)
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-major vectorisation.
pub fn vec(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    // tr(A B) without forming the product.
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted descending.
pub fn sym_eig_desc(m: &Mat) -> Result<(Vec<f64>, Mat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::Decomposition("symmetric eigen"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Mat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

pub fn min_sym_eigenvalue(m: &Mat) -> Result<f64> {
    Ok(sym_eig_desc(m)?.0.last().copied().unwrap_or(0.0))
}

pub fn max_sym_eigenvalue(m: &Mat) -> Result<f64> {
    Ok(sym_eig_desc(m)?.0.first().copied().unwrap_or(0.0))
}

/// Thin SVD with singular values sorted descending.
pub struct SortedSvd {
    pub u: Mat,
    pub singular_values: Vec<f64>,
    pub v: Mat,
}

pub fn svd_sorted(m: &Mat) -> Result<SortedSvd> {
    let svd = SVD::try_new(m.clone(), true, true, EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::Decomposition("singular value"))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut su = Mat::zeros(u.nrows(), k);
    let mut sv = Mat::zeros(v_t.ncols(), k);
    for (c, &i) in order.iter().enumerate() {
        su.set_column(c, &u.column(i));
        sv.set_column(c, &v_t.row(i).transpose());
    }
    Ok(SortedSvd {
        u: su,
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v: sv,
    })
}

/// Largest real part over the eigenvalues of a general square matrix.
pub fn max_real_eigenvalue(m: &Mat) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let schur =
        Schur::try_new(m.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(Error::Decomposition("Schur"))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Block {
    pub start: usize,
    pub size: usize,
}

impl Block {
    fn end(&self) -> usize {
        self.start + self.size
    }
}

/// Real Schur form `A = Q T Qᵀ` with the diagonal block structure of `T`.
#[derive(Clone, Debug)]
pub(crate) struct RealSchur {
    pub q: Mat,
    pub t: Mat,
    pub blocks: Vec<Block>,
    /// Frobenius norm of the original matrix, used to scale pivot thresholds.
    pub scale: f64,
}

impl RealSchur {
    pub fn new(a: &Mat) -> Result<Self> {
        let n = a.nrows();
        let scale = fro(a);
        if n == 0 {
            return Ok(Self {
                q: Mat::zeros(0, 0),
                t: Mat::zeros(0, 0),
                blocks: Vec::new(),
                scale,
            });
        }
        let (q, mut t) = Schur::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER)
            .ok_or(Error::Decomposition("Schur"))?
            .unpack();
        for j in 0..n {
            for i in j + 2..n {
                t[(i, j)] = 0.0;
            }
        }
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)] != 0.0 {
                if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                    return Err(Error::Decomposition("Schur (unreduced 3x3 block)"));
                }
                blocks.push(Block { start: i, size: 2 });
                i += 2;
            } else {
                blocks.push(Block { start: i, size: 1 });
                i += 1;
            }
        }
        Ok(Self {
            q,
            t,
            blocks,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Schur form of `A + σI`; shares `Q`.
    pub fn shifted(&self, sigma: f64) -> Self {
        let mut s = self.clone();
        for i in 0..s.dim() {
            s.t[(i, i)] += sigma;
        }
        s
    }

    /// `Qᵀ M Q'` for a second orthogonal factor `Q'`.
    pub fn to_schur(&self, m: &Mat, right: &RealSchur) -> Mat {
        self.q.transpose() * m * &right.q
    }

    pub fn back_from_schur(&self, m: &Mat, right: &RealSchur) -> Mat {
        &self.q * m * right.q.transpose()
    }
}

/// Solves `T Y + Y Sᵀ = F` for quasi-upper-triangular `T` and `S`, overwriting `F`.
///
/// A pivot whose magnitude falls below `pivot_tol` signals that `T` and `-S`
/// share an eigenvalue.
pub(crate) fn solve_quasi_sylvester(
    t: &RealSchur,
    s: &RealSchur,
    f: &mut Mat,
    pivot_tol: f64,
) -> Result<()> {
    let n = t.dim();
    let r = s.dim();
    debug_assert_eq!(f.shape(), (n, r));
    let tm = &t.t;
    let sm = &s.t;
    let data = f.as_mut_slice();
    for jb in s.blocks.iter().rev() {
        // Fold in the already solved columns to the right.
        for l in jb.end()..r {
            for jj in jb.start..jb.end() {
                let c = sm[(jj, l)];
                if c != 0.0 {
                    let (head, tail) = data.split_at_mut(l * n);
                    let dst = &mut head[jj * n..(jj + 1) * n];
                    let src = &tail[..n];
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d -= c * v;
                    }
                }
            }
        }
        for ib in t.blocks.iter().rev() {
            let mut rhs = [0.0; 4];
            for b in 0..jb.size {
                for a in 0..ib.size {
                    rhs[a + ib.size * b] = data[(jb.start + b) * n + ib.start + a];
                }
            }
            let z = solve_block(tm, ib, sm, jb, rhs, pivot_tol)?;
            for b in 0..jb.size {
                let col = (jb.start + b) * n;
                for a in 0..ib.size {
                    data[col + ib.start + a] = z[a + ib.size * b];
                }
                // Eliminate this block from the rows above.
                for a in 0..ib.size {
                    let za = z[a + ib.size * b];
                    if za != 0.0 {
                        let tcol = tm.column(ib.start + a);
                        for i in 0..ib.start {
                            data[col + i] -= tcol[i] * za;
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Solves the at most 4x4 system `T_II Z + Z S_JJᵀ = R` with partial pivoting.
fn solve_block(
    t: &Mat,
    ib: &Block,
    s: &Mat,
    jb: &Block,
    mut rhs: [f64; 4],
    pivot_tol: f64,
) -> Result<[f64; 4]> {
    let (p, q) = (ib.size, jb.size);
    let d = p * q;
    let mut m = [[0.0; 4]; 4];
    for b in 0..q {
        for a in 0..p {
            let row = a + p * b;
            for b2 in 0..q {
                for a2 in 0..p {
                    let col = a2 + p * b2;
                    let mut v = 0.0;
                    if b == b2 {
                        v += t[(ib.start + a, ib.start + a2)];
                    }
                    if a == a2 {
                        v += s[(jb.start + b, jb.start + b2)];
                    }
                    m[row][col] = v;
                }
            }
        }
    }
    for k in 0..d {
        let mut piv = k;
        for i in k + 1..d {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k].abs() < pivot_tol || m[piv][k] == 0.0 {
            return Err(Error::SingularPencil {
                pivot: m[piv][k].abs(),
                threshold: pivot_tol,
            });
        }
        m.swap(k, piv);
        rhs.swap(k, piv);
        for i in k + 1..d {
            let l = m[i][k] / m[k][k];
            if l != 0.0 {
                let pivot_row = m[k];
                for (mij, pkj) in m[i][k..d].iter_mut().zip(&pivot_row[k..d]) {
                    *mij -= l * pkj;
                }
                rhs[i] -= l * rhs[k];
            }
        }
    }
    let mut x = [0.0; 4];
    for k in (0..d).rev() {
        let mut v = rhs[k];
        for j in k + 1..d {
            v -= m[k][j] * x[j];
        }
        x[k] = v / m[k][k];
    }
    Ok(x)
}

/// Dense LU solve with a relative pivot check.
pub fn solve_dense(m: Mat, rhs: &Vector, rel_pivot_tol: f64) -> Result<Vector> {
    let scale = fro(&m).max(f64::MIN_POSITIVE);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = u
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let threshold = rel_pivot_tol * scale;
    if min_pivot < threshold || min_pivot == 0.0 {
        return Err(Error::SingularPencil {
            pivot: min_pivot,
            threshold,
        });
    }
    lu.solve(rhs).ok_or(Error::SingularPencil {
        pivot: min_pivot,
        threshold,
    })
}
