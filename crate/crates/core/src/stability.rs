//! Mean-square stability of `dx = Ax dt + Σ Nᵢ x dWᵢ` via the operator
//! `K(X) = AX + XAᵀ + Σ NᵢXNᵢᵀ`, and extraction of stable realizations from
//! marginally stable reduced models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, fro, is_zero, max_real_eigenvalue, svd_sorted, sym_eig_desc, symmetrize, Mat, RealSchur,
};
use crate::lyapunov::{self, solve_generalized_lyapunov, LyapunovOptions, MethodChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AsymptoticallyStable,
    MarginallyStable,
    Unstable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbscissaMethod {
    DenseEig,
    MatrixFreePower,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub abscissa: f64,
    pub verdict: Verdict,
    pub method: AbscissaMethod,
    pub tolerance: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityOptions {
    /// Largest state dimension handled by dense eigenvalue computation.
    pub dense_cutoff: usize,
    pub max_iter: usize,
    /// Verdict tolerance relative to `‖K(I)‖_F`.
    pub verdict_rtol: f64,
    /// Target width of the bracketing interval in the matrix-free iteration.
    pub abscissa_rtol: f64,
    pub lyapunov: LyapunovOptions,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self {
            dense_cutoff: 60,
            max_iter: 5000,
            verdict_rtol: 1e-9,
            abscissa_rtol: 1e-9,
            lyapunov: LyapunovOptions::default(),
        }
    }
}

/// `AX + XAᵀ + Σ NᵢXNᵢᵀ`, applied without forming the Kronecker matrix.
pub fn kron_operator_action(a: &Mat, n: &[Mat], x: &Mat) -> Mat {
    let ax = a * x;
    let mut out = &ax + x * a.transpose();
    for ni in n {
        out += ni * x * ni.transpose();
    }
    out
}

/// `AᵀX + XA + Σ NᵢᵀXNᵢ`.
pub fn adjoint_operator_action(a: &Mat, n: &[Mat], x: &Mat) -> Mat {
    let mut out = a.transpose() * x + x * a;
    for ni in n {
        out += ni.transpose() * x * ni;
    }
    out
}

/// Explicit `K = I ⊗ A + A ⊗ I + Σ Nᵢ ⊗ Nᵢ`.
pub fn kron_matrix(a: &Mat, n: &[Mat]) -> Mat {
    lyapunov::mixed_kron_matrix(a, a, n, n)
}

fn verdict_tolerance(a: &Mat, n: &[Mat], rtol: f64) -> f64 {
    let k_i = kron_operator_action(a, n, &Mat::identity(a.nrows(), a.nrows()));
    (rtol * fro(&k_i)).max(1e-14)
}

fn classify(abscissa: f64, tol: f64) -> Verdict {
    if abscissa < -tol {
        Verdict::AsymptoticallyStable
    } else if abscissa.abs() <= tol {
        Verdict::MarginallyStable
    } else {
        Verdict::Unstable
    }
}

// Coordinates in the orthonormal basis {E_ii} ∪ {(E_ij + E_ji)/√2 : i < j} of
// the symmetric matrices. The operator maps this subspace into itself and its
// rightmost eigenvalue always has a symmetric eigenvector, so the restriction
// carries the abscissa at a quarter of the cost of the full Kronecker matrix.
fn sym_index_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            p.push((i, j));
        }
    }
    p
}

fn sym_coords(x: &Mat, pairs: &[(usize, usize)]) -> linalg::Vector {
    linalg::Vector::from_iterator(
        pairs.len(),
        pairs.iter().map(|&(i, j)| {
            if i == j {
                x[(i, i)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (x[(i, j)] + x[(j, i)])
            }
        }),
    )
}

fn sym_from_coords(v: &linalg::Vector, n: usize, pairs: &[(usize, usize)]) -> Mat {
    let mut x = Mat::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        if i == j {
            x[(i, i)] = v[k];
        } else {
            let e = v[k] / std::f64::consts::SQRT_2;
            x[(i, j)] = e;
            x[(j, i)] = e;
        }
    }
    x
}

/// Matrix of `X ↦ AX + XAᵀ + Σ NᵢXNᵢᵀ` restricted to symmetric matrices.
fn sym_restricted_matrix(a: &Mat, n: &[Mat]) -> Mat {
    let dim = a.nrows();
    let pairs = sym_index_pairs(dim);
    let d = pairs.len();
    let mut m = Mat::zeros(d, d);
    let mut g = Mat::zeros(dim, dim);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        // Image of the basis element S = (e_i e_jᵀ + e_j e_iᵀ)/√2 (or e_i e_iᵀ).
        g.fill(0.0);
        let w = if i == j {
            1.0
        } else {
            std::f64::consts::FRAC_1_SQRT_2
        };
        let mut add_outer = |u: linalg::Vector, v: linalg::Vector, s: f64| {
            // g += s (u vᵀ + v uᵀ)
            for c in 0..dim {
                for r in 0..dim {
                    g[(r, c)] += s * (u[r] * v[c] + v[r] * u[c]);
                }
            }
        };
        let ei = |idx: usize| {
            let mut e = linalg::Vector::zeros(dim);
            e[idx] = 1.0;
            e
        };
        if i == j {
            // A e_i e_iᵀ + e_i e_iᵀ Aᵀ + Σ n_i n_iᵀ
            add_outer(a.column(i).into_owned(), ei(i), 1.0);
            for ni in n {
                let c = ni.column(i).into_owned();
                add_outer(c.clone(), c, 0.5);
            }
        } else {
            add_outer(a.column(i).into_owned(), ei(j), w);
            add_outer(a.column(j).into_owned(), ei(i), w);
            for ni in n {
                add_outer(ni.column(i).into_owned(), ni.column(j).into_owned(), w);
            }
        }
        m.set_column(k, &sym_coords(&g, &pairs));
    }
    m
}

fn transposed(a: &Mat, n: &[Mat]) -> (Mat, Vec<Mat>) {
    (a.transpose(), n.iter().map(|m| m.transpose()).collect())
}

/// Rightmost real part of the spectrum of `K`, with a stability verdict.
pub fn spectral_abscissa(a: &Mat, n: &[Mat], opts: &StabilityOptions) -> Result<StabilityReport> {
    let dim = a.nrows();
    let tolerance = verdict_tolerance(a, n, opts.verdict_rtol);
    let (abscissa, method) = if dim <= opts.dense_cutoff {
        let m = sym_restricted_matrix(a, n);
        (max_real_eigenvalue(&m)?, AbscissaMethod::DenseEig)
    } else {
        (
            matrix_free_abscissa(a, n, opts)?,
            AbscissaMethod::MatrixFreePower,
        )
    };
    Ok(StabilityReport {
        abscissa,
        verdict: classify(abscissa, tolerance),
        method,
        tolerance,
    })
}

/// Shift-invert power iteration on the positive operator `(μI − K)⁻¹`.
///
/// Collatz–Wielandt bounds on the PSD cone bracket the abscissa while the
/// iterate stays numerically definite. Perron eigenmatrices are often close to
/// rank deficient, so the iteration also stops once the Rayleigh estimate
/// `⟨X, K(X)⟩` has a small eigen-residual.
fn matrix_free_abscissa(a: &Mat, n: &[Mat], opts: &StabilityOptions) -> Result<f64> {
    let dim = a.nrows();
    let spec_a = 2.0 * max_real_eigenvalue(a)?;
    if n.iter().all(is_zero) {
        return Ok(spec_a);
    }
    let schur = RealSchur::new(a)?;
    let upper = 2.0 * linalg::max_sym_eigenvalue(&symmetrize(a))?
        + n.iter().map(|m| fro(m).powi(2)).sum::<f64>();
    let scale = fro(&kron_operator_action(a, n, &Mat::identity(dim, dim))).max(1e-300);
    let mut mu = upper + (1e-3 * upper.abs()).max(1e-6 * scale);
    let inner = LyapunovOptions {
        method: MethodChoice::SplittingIteration,
        ..opts.lyapunov.clone()
    };
    let mut x = Mat::identity(dim, dim) / (dim as f64).sqrt();
    let mut lo = spec_a;
    let mut hi = upper;
    for _ in 0..opts.max_iter {
        let shifted = schur.shifted(-0.5 * mu);
        let z = symmetrize(&lyapunov::splitting(&shifted, &shifted, n, n, &x, &inner)?.x);
        if let Ok((theta_min, theta_max)) = generalized_eig_range(&z, &x) {
            if theta_max > 0.0 {
                hi = hi.min(mu - 1.0 / theta_max);
            }
            if theta_min > 0.0 {
                lo = lo.max(mu - 1.0 / theta_min);
            }
        }
        if hi - lo <= opts.abscissa_rtol * (1.0 + hi.abs()) {
            return Ok(0.5 * (hi + lo));
        }
        x = &z / fro(&z);
        let kx = kron_operator_action(a, n, &x);
        let rayleigh = x.dot(&kx);
        if fro(&(kx - &x * rayleigh)) <= opts.abscissa_rtol * scale {
            return Ok(rayleigh.clamp(lo, hi));
        }
        let margin = (hi - lo).max(0.05 * hi.abs()).max(1e-9 * scale);
        if hi + margin < mu {
            mu = hi + margin;
        }
    }
    log::warn!("matrix-free abscissa bracket [{lo:.6e}, {hi:.6e}] not resolved");
    Err(Error::NoConvergence {
        what: "matrix-free spectral abscissa",
        iterations: opts.max_iter,
    })
}

/// Range of `θ` with `Z v = θ X v` for symmetric `Z` and positive definite `X`.
fn generalized_eig_range(z: &Mat, x: &Mat) -> Result<(f64, f64)> {
    let chol = x.clone().cholesky().ok_or(Error::NotPositiveSemidefinite {
        eigenvalue: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::Decomposition("Cholesky factor inverse"))?;
    let m = &linv * z * linv.transpose();
    let (vals, _) = sym_eig_desc(&m)?;
    Ok((*vals.last().unwrap(), vals[0]))
}

/// Outcome of the Lyapunov-inequality stability test.
#[derive(Clone, Debug)]
pub struct StabilityWitness {
    pub certified: bool,
    pub x: Option<Mat>,
    pub min_eigenvalue: Option<f64>,
    pub epsilon: f64,
}

/// Looks for `X ≻ 0` with `K(X) = −(Y + εI)`; success certifies mean-square
/// asymptotic stability. Failure is inconclusive.
pub fn sufficient_ms_stability(
    a: &Mat,
    n: &[Mat],
    y: &Mat,
    opts: &LyapunovOptions,
) -> Result<StabilityWitness> {
    let dim = a.nrows();
    let epsilon = 1e-8 * (1.0 + fro(y));
    let c = y + Mat::identity(dim, dim) * epsilon;
    let inconclusive = |x: Option<Mat>, min_eigenvalue| StabilityWitness {
        certified: false,
        x,
        min_eigenvalue,
        epsilon,
    };
    let sol = match solve_generalized_lyapunov(a, n, &c, opts) {
        Ok(s) => s,
        Err(Error::SingularPencil { .. } | Error::IterationDivergence { .. }) => {
            return Ok(inconclusive(None, None))
        }
        Err(e) => return Err(e),
    };
    if !linalg::is_finite(&sol.x) || sol.residual_norm > 1e-6 * (1.0 + fro(&c)) {
        return Ok(inconclusive(None, None));
    }
    let min_eig = linalg::min_sym_eigenvalue(&sol.x)?;
    if min_eig > 0.0 {
        Ok(StabilityWitness {
            certified: true,
            x: Some(sol.x),
            min_eigenvalue: Some(min_eig),
            epsilon,
        })
    } else {
        Ok(inconclusive(Some(sol.x), Some(min_eig)))
    }
}

#[derive(Clone, Debug)]
pub struct PsdEigenmatrix {
    pub matrix: Mat,
    pub eigenvalue: f64,
    pub residual: f64,
}

/// Unit-norm PSD `V̂` with `AᵀV̂ + V̂A + Σ NᵢᵀV̂Nᵢ = α V̂` at the spectral abscissa `α`.
pub fn psd_null_eigenmatrix(a: &Mat, n: &[Mat], opts: &StabilityOptions) -> Result<PsdEigenmatrix> {
    let dim = a.nrows();
    if dim > opts.dense_cutoff {
        return Err(Error::InvalidArgument(format!(
            "eigenmatrix extraction is dense-only (n = {dim} exceeds cutoff {})",
            opts.dense_cutoff
        )));
    }
    let (at, nt) = transposed(a, n);
    let m = sym_restricted_matrix(&at, &nt);
    let alpha = max_real_eigenvalue(&m)?;
    let d = m.nrows();
    let shifted = &m - Mat::identity(d, d) * alpha;
    let svd = svd_sorted(&shifted)?;
    let smax = svd.singular_values[0];
    let null_tol = 1e-8 * (1.0 + smax);
    let mut basis: Vec<linalg::Vector> = Vec::new();
    for k in (0..d).rev() {
        if basis.is_empty() || svd.singular_values[k] <= null_tol {
            basis.push(svd.v.column(k).into_owned());
        } else {
            break;
        }
    }
    let pairs = sym_index_pairs(dim);
    let mut candidates = Vec::new();
    if basis.len() > 1 {
        // Project the identity onto the eigenspace first.
        let id = sym_coords(&Mat::identity(dim, dim), &pairs);
        let mut proj = linalg::Vector::zeros(d);
        for b in &basis {
            proj += b * b.dot(&id);
        }
        if proj.norm() > 1e-8 {
            candidates.push(proj);
        }
    }
    candidates.extend(basis.iter().cloned());
    let mut best = f64::NEG_INFINITY;
    for v in candidates {
        let mut x = symmetrize(&sym_from_coords(&v, dim, &pairs));
        let (vals, _) = sym_eig_desc(&x)?;
        let tr: f64 = vals.iter().sum();
        let flip = if tr.abs() > 1e-12 {
            tr < 0.0
        } else {
            vals[0].abs() < vals[dim - 1].abs()
        };
        if flip {
            x = -x;
        }
        x /= fro(&x);
        let min_eig = linalg::min_sym_eigenvalue(&x)?;
        if min_eig >= -1e-8 {
            let residual = fro(&(adjoint_operator_action(a, n, &x) - &x * alpha));
            return Ok(PsdEigenmatrix {
                matrix: x,
                eigenvalue: alpha,
                residual,
            });
        }
        best = best.max(min_eig);
    }
    Err(Error::DegenerateEigenspace {
        min_eigenvalue: best,
    })
}

/// Stable subsystem `(Â₀, N̂₀, B̂₀)` with `Φ̂(t)B̂ = V₀ Φ̂₀(t) B̂₀`.
#[derive(Clone, Debug)]
pub struct StableRealization {
    pub v0: Mat,
    pub projected_a: Mat,
    pub projected_n: Vec<Mat>,
    pub projected_b: Mat,
    pub steps: usize,
}

impl StableRealization {
    pub fn order(&self) -> usize {
        self.v0.ncols()
    }

    fn empty(r: usize, q: usize, m: usize, steps: usize) -> Self {
        Self {
            v0: Mat::zeros(r, 0),
            projected_a: Mat::zeros(0, 0),
            projected_n: vec![Mat::zeros(0, 0); q],
            projected_b: Mat::zeros(0, m),
            steps,
        }
    }
}

const KERNEL_RTOL: f64 = 1e-10;

/// Repeatedly projects a marginally stable triple onto the kernel of a PSD
/// eigenmatrix of the adjoint operator until it is asymptotically stable.
pub fn extract_stable_realization(
    a: &Mat,
    n: &[Mat],
    b: &Mat,
    opts: &StabilityOptions,
) -> Result<StableRealization> {
    let r = a.nrows();
    let (q, m) = (n.len(), b.ncols());
    if is_zero(b) {
        return Ok(StableRealization::empty(r, q, m, 0));
    }
    let mut v0 = Mat::identity(r, r);
    let mut cur_a = a.clone();
    let mut cur_n = n.to_vec();
    let mut cur_b = b.clone();
    let mut steps = 0;
    loop {
        if cur_a.nrows() == 0 || is_zero(&cur_b) {
            return Ok(StableRealization::empty(r, q, m, steps));
        }
        let report = spectral_abscissa(&cur_a, &cur_n, opts)?;
        match report.verdict {
            Verdict::AsymptoticallyStable => {
                return Ok(StableRealization {
                    v0,
                    projected_a: cur_a,
                    projected_n: cur_n,
                    projected_b: cur_b,
                    steps,
                })
            }
            Verdict::Unstable => {
                return Err(Error::ContractViolation(format!(
                    "reduced triple is unstable (abscissa {:.6e}); no dissipation identity holds",
                    report.abscissa
                )))
            }
            Verdict::MarginallyStable => {}
        }
        let vhat = psd_null_eigenmatrix(&cur_a, &cur_n, opts)?.matrix;
        let kernel = kernel_basis(&vhat, &cur_b)?;
        cur_a = kernel.transpose() * &cur_a * &kernel;
        cur_n = cur_n
            .iter()
            .map(|x| kernel.transpose() * x * &kernel)
            .collect();
        cur_b = kernel.transpose() * &cur_b;
        v0 = &v0 * &kernel;
        steps += 1;
    }
}

/// Orthonormal basis of the numerical kernel of `V̂`; `B̂` must lie in it.
fn kernel_basis(vhat: &Mat, b: &Mat) -> Result<Mat> {
    let dim = vhat.nrows();
    let (vals, vecs) = sym_eig_desc(vhat)?;
    let bnorm = fro(b);
    let mut cutoff = KERNEL_RTOL * vals[0];
    for attempt in 0..2 {
        let keep: Vec<usize> = (0..dim).filter(|&k| vals[k] < cutoff).collect();
        if keep.is_empty() {
            return Err(Error::ContractViolation(
                "PSD eigenmatrix is positive definite while the input matrix is nonzero".into(),
            ));
        }
        let mut basis = Mat::zeros(dim, keep.len());
        for (c, &k) in keep.iter().enumerate() {
            basis.set_column(c, &vecs.column(k));
        }
        let leak = fro(&(b - &basis * (basis.transpose() * b)));
        if leak <= 1e-8 * bnorm {
            return Ok(basis);
        }
        log::debug!("kernel cutoff {cutoff:.3e} leaks {leak:.3e} of the input; tightening (attempt {attempt})");
        cutoff *= 0.1;
    }
    Err(Error::ContractViolation(
        "input matrix is not contained in the kernel of the PSD eigenmatrix".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> StabilityOptions {
        StabilityOptions::default()
    }

    #[test]
    fn action_examples() {
        let a = -Mat::identity(3, 3);
        assert_eq!(
            kron_operator_action(&a, &[], &Mat::zeros(3, 3)),
            Mat::zeros(3, 3)
        );
        assert_eq!(
            kron_operator_action(&a, &[], &Mat::identity(3, 3)),
            Mat::identity(3, 3) * -2.0
        );
    }

    #[test]
    fn sym_restriction_matches_explicit_operator() {
        let a = Mat::from_fn(4, 4, |i, j| {
            ((i * 5 + j * 3) % 7) as f64 / 7.0 - if i == j { 2.0 } else { 0.0 }
        });
        let n = vec![Mat::from_fn(4, 4, |i, j| ((i + 2 * j) % 5) as f64 / 10.0)];
        let m = sym_restricted_matrix(&a, &n);
        let pairs = sym_index_pairs(4);
        let x = Mat::from_fn(4, 4, |i, j| {
            (i + j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }
        });
        let direct = sym_coords(&kron_operator_action(&a, &n, &x), &pairs);
        let via = &m * sym_coords(&x, &pairs);
        assert!((direct - via).norm() < 1e-12);
    }

    #[test]
    fn example_abscissae() {
        let a = Mat::from_row_slice(2, 2, &[0.0, -10.0, 1.0, -10.0]);
        let rep = spectral_abscissa(&a, &[], &opts()).unwrap();
        // λ(A) = −5 ± √15 is real, so α(K) = 2(√15 − 5).
        let oracle = max_real_eigenvalue(&kron_matrix(&a, &[])).unwrap();
        assert!((rep.abscissa - oracle).abs() < 1e-10);
        assert!((rep.abscissa - 2.0 * (15f64.sqrt() - 5.0)).abs() < 1e-10);
        assert_eq!(rep.verdict, Verdict::AsymptoticallyStable);

        let rep = spectral_abscissa(&Mat::zeros(1, 1), &[Mat::zeros(1, 1)], &opts()).unwrap();
        assert_eq!(rep.verdict, Verdict::MarginallyStable);

        let rep = spectral_abscissa(&-Mat::identity(3, 3), &[], &opts()).unwrap();
        assert!((rep.abscissa + 2.0).abs() < 1e-12);
    }

    #[test]
    fn matrix_free_agrees_with_dense() {
        let a = Mat::from_fn(6, 6, |i, j| {
            if i == j {
                -3.0 - i as f64 * 0.3
            } else {
                ((i * 7 + j * 11) % 5) as f64 / 10.0 - 0.2
            }
        });
        let n = vec![
            Mat::from_fn(6, 6, |i, j| ((i * 3 + j) % 4) as f64 / 6.0),
            Mat::from_fn(6, 6, |i, j| {
                if i == j {
                    0.8
                } else {
                    0.05 * (i as f64 - j as f64)
                }
            }),
        ];
        let dense = spectral_abscissa(&a, &n, &opts()).unwrap();
        let mf = spectral_abscissa(
            &a,
            &n,
            &StabilityOptions {
                dense_cutoff: 0,
                ..opts()
            },
        )
        .unwrap();
        assert_eq!(mf.method, AbscissaMethod::MatrixFreePower);
        assert!((dense.abscissa - mf.abscissa).abs() < 1e-7 * (1.0 + dense.abscissa.abs()));
    }

    #[test]
    fn witness_examples() {
        let w = sufficient_ms_stability(
            &-Mat::identity(2, 2),
            &[],
            &Mat::identity(2, 2),
            &LyapunovOptions::default(),
        )
        .unwrap();
        assert!(w.certified);
        let x = w.x.unwrap();
        assert!((x[(0, 0)] - (1.0 + w.epsilon) / 2.0).abs() < 1e-14);

        let w = sufficient_ms_stability(
            &Mat::zeros(1, 1),
            &[],
            &Mat::identity(1, 1),
            &LyapunovOptions::default(),
        )
        .unwrap();
        assert!(!w.certified);
    }

    #[test]
    fn null_eigenmatrix_examples() {
        let e = psd_null_eigenmatrix(&Mat::zeros(1, 1), &[], &opts()).unwrap();
        assert!((e.matrix[(0, 0)] - 1.0).abs() < 1e-14 && e.eigenvalue.abs() < 1e-14);

        let a = Mat::from_element(2, 2, -1.0);
        let e = psd_null_eigenmatrix(&a, &[], &opts()).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((&e.matrix - expected).amax() < 1e-10);
        assert!(e.residual < 1e-8);

        let e = psd_null_eigenmatrix(&-Mat::identity(3, 3), &[], &opts()).unwrap();
        assert!((e.eigenvalue + 2.0).abs() < 1e-12);
        assert!(e.residual < 1e-8);
        assert!(linalg::min_sym_eigenvalue(&e.matrix).unwrap() >= -1e-8);
    }

    #[test]
    fn extraction_of_decoupled_marginal_mode() {
        let a = Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -1.0, 0.5, 0.0, -0.5, -2.0]);
        let b = Mat::from_row_slice(3, 1, &[0.0, 1.0, 1.0]);
        let real = extract_stable_realization(&a, &[], &b, &opts()).unwrap();
        assert_eq!(real.order(), 2);
        assert_eq!(real.steps, 1);
        let g = real.v0.transpose() * &real.v0;
        assert!((g - Mat::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn extraction_of_uncontrolled_rom() {
        let real = extract_stable_realization(
            &Mat::zeros(1, 1),
            &[Mat::zeros(1, 1)],
            &Mat::zeros(1, 1),
            &opts(),
        )
        .unwrap();
        assert_eq!(real.order(), 0);
    }

    #[test]
    fn stable_rom_is_returned_unchanged() {
        let a = -Mat::identity(2, 2);
        let real = extract_stable_realization(&a, &[], &Mat::identity(2, 1), &opts()).unwrap();
        assert_eq!(real.steps, 0);
        assert_eq!(real.v0, Mat::identity(2, 2));
    }
}
