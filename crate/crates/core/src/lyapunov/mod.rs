//! Standard, generalized and mixed Lyapunov/Sylvester equation solvers.
//!
//! All solvers address equations of the form
//! `A X + X Âᵀ + Σ Nᵢ X N̂ᵢᵀ = −C`,
//! with `Â = A`, `N̂ = N` in the symmetric (Gramian) case.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, fro, is_zero, solve_dense, solve_quasi_sylvester, symmetrize, Mat, RealSchur,
};

mod factored;

pub use factored::{compress_factor, generalized_lyapunov_factor, lyapunov_factor, FactorSolution};

/// Relative pivot threshold for the triangular and Kronecker solves.
pub const PIVOT_RTOL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovMethod {
    DirectKron,
    SplittingIteration,
    BartelsStewart,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    #[default]
    Auto,
    DirectKron,
    SplittingIteration,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovOptions {
    pub method: MethodChoice,
    /// Automatic selection uses the Kronecker solve while the unknown count
    /// stays below `kron_cutoff²`.
    pub kron_cutoff: usize,
    pub max_iter: usize,
    pub step_tol: f64,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            method: MethodChoice::Auto,
            kron_cutoff: 30,
            max_iter: 10_000,
            step_tol: 1e-12,
        }
    }
}

impl LyapunovOptions {
    pub fn with_method(method: MethodChoice) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct LyapunovSolution {
    pub x: Mat,
    pub residual_norm: f64,
    pub method: LyapunovMethod,
    pub iterations: usize,
}

/// `‖AX + XAᵀ + Σ NᵢXNᵢᵀ + C‖_F`.
pub fn residual_generalized(a: &Mat, n: &[Mat], c: &Mat, x: &Mat) -> f64 {
    residual_mixed(a, a, n, n, c, x)
}

/// `‖AX + XÂᵀ + Σ NᵢXN̂ᵢᵀ + C‖_F`.
pub fn residual_mixed(a: &Mat, ahat: &Mat, n: &[Mat], nhat: &[Mat], c: &Mat, x: &Mat) -> f64 {
    let mut r = a * x + x * ahat.transpose() + c;
    for (ni, mi) in n.iter().zip(nhat) {
        r += ni * x * mi.transpose();
    }
    fro(&r)
}

fn check_square(name: &str, m: &Mat, dim: usize) -> Result<()> {
    if m.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_mixed(a: &Mat, ahat: &Mat, n: &[Mat], nhat: &[Mat], c: &Mat) -> Result<()> {
    let (dn, dr) = (a.nrows(), ahat.nrows());
    check_square("A", a, dn)?;
    check_square("Ahat", ahat, dr)?;
    if n.len() != nhat.len() {
        return Err(Error::Dimension(format!(
            "{} full and {} reduced noise matrices",
            n.len(),
            nhat.len()
        )));
    }
    for (ni, mi) in n.iter().zip(nhat) {
        check_square("N", ni, dn)?;
        check_square("Nhat", mi, dr)?;
    }
    if c.shape() != (dn, dr) {
        return Err(Error::Dimension(format!(
            "right-hand side is {}x{}, expected {dn}x{dr}",
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// Solves `AX + XAᵀ = −C` by Bartels–Stewart.
pub fn solve_standard_lyapunov(a: &Mat, c: &Mat) -> Result<LyapunovSolution> {
    check_mixed(a, a, &[], &[], c)?;
    let s = RealSchur::new(a)?;
    let x = sylvester_with(&s, &s, c)?;
    let x = symmetrize(&x);
    Ok(LyapunovSolution {
        residual_norm: residual_generalized(a, &[], c, &x),
        x,
        method: LyapunovMethod::BartelsStewart,
        iterations: 0,
    })
}

/// Solves `AX + XÂᵀ = −C` for a rectangular `X` by Bartels–Stewart.
pub fn solve_sylvester(a: &Mat, ahat: &Mat, c: &Mat) -> Result<Mat> {
    check_mixed(a, ahat, &[], &[], c)?;
    let sa = RealSchur::new(a)?;
    let sb = RealSchur::new(ahat)?;
    sylvester_with(&sa, &sb, c)
}

fn pivot_tol(left: &RealSchur, right: &RealSchur) -> f64 {
    PIVOT_RTOL * left.scale.max(right.scale)
}

pub(crate) fn sylvester_with(left: &RealSchur, right: &RealSchur, c: &Mat) -> Result<Mat> {
    let mut f = -left.to_schur(c, right);
    solve_quasi_sylvester(left, right, &mut f, pivot_tol(left, right))?;
    Ok(left.back_from_schur(&f, right))
}

/// Solves `AX + XAᵀ + Σ NᵢXNᵢᵀ = −C`.
pub fn solve_generalized_lyapunov(
    a: &Mat,
    n: &[Mat],
    c: &Mat,
    opts: &LyapunovOptions,
) -> Result<LyapunovSolution> {
    check_mixed(a, a, n, n, c)?;
    let dim = a.nrows();
    let method = select(dim * dim, n, opts);
    let mut sol = match method {
        LyapunovMethod::BartelsStewart => {
            let s = RealSchur::new(a)?;
            let x = sylvester_with(&s, &s, c)?;
            LyapunovSolution {
                x,
                residual_norm: 0.0,
                method,
                iterations: 0,
            }
        }
        LyapunovMethod::DirectKron => direct_kron(a, a, n, n, c)?,
        LyapunovMethod::SplittingIteration => {
            let s = RealSchur::new(a)?;
            splitting(&s, &s, n, n, c, opts)?
        }
    };
    sol.x = symmetrize(&sol.x);
    sol.residual_norm = residual_generalized(a, n, c, &sol.x);
    Ok(sol)
}

/// Solves `AX + XÂᵀ + Σ NᵢXN̂ᵢᵀ = −C` for `X ∈ ℝ^{n×r}`.
pub fn solve_mixed_sylvester(
    a: &Mat,
    ahat: &Mat,
    n: &[Mat],
    nhat: &[Mat],
    c: &Mat,
    opts: &LyapunovOptions,
) -> Result<LyapunovSolution> {
    check_mixed(a, ahat, n, nhat, c)?;
    let sa = RealSchur::new(a)?;
    mixed_with_schur(&sa, a, ahat, n, nhat, c, opts)
}

/// Mixed solve reusing a precomputed Schur form of the left coefficient.
pub(crate) fn mixed_with_schur(
    sa: &RealSchur,
    a: &Mat,
    ahat: &Mat,
    n: &[Mat],
    nhat: &[Mat],
    c: &Mat,
    opts: &LyapunovOptions,
) -> Result<LyapunovSolution> {
    check_mixed(a, ahat, n, nhat, c)?;
    let method = select(a.nrows() * ahat.nrows(), n, opts);
    let mut sol = match method {
        LyapunovMethod::BartelsStewart => {
            let sb = RealSchur::new(ahat)?;
            LyapunovSolution {
                x: sylvester_with(sa, &sb, c)?,
                residual_norm: 0.0,
                method,
                iterations: 0,
            }
        }
        LyapunovMethod::DirectKron => direct_kron(a, ahat, n, nhat, c)?,
        LyapunovMethod::SplittingIteration => {
            let sb = RealSchur::new(ahat)?;
            splitting(sa, &sb, n, nhat, c, opts)?
        }
    };
    sol.residual_norm = residual_mixed(a, ahat, n, nhat, c, &sol.x);
    Ok(sol)
}

fn select(unknowns: usize, n: &[Mat], opts: &LyapunovOptions) -> LyapunovMethod {
    match opts.method {
        MethodChoice::DirectKron => LyapunovMethod::DirectKron,
        MethodChoice::SplittingIteration => LyapunovMethod::SplittingIteration,
        MethodChoice::Auto if n.iter().all(is_zero) => LyapunovMethod::BartelsStewart,
        MethodChoice::Auto if unknowns < opts.kron_cutoff * opts.kron_cutoff => {
            LyapunovMethod::DirectKron
        }
        MethodChoice::Auto => LyapunovMethod::SplittingIteration,
    }
}

/// Mixed Kronecker matrix `I ⊗ A + Â ⊗ I + Σ N̂ᵢ ⊗ Nᵢ`.
pub fn mixed_kron_matrix(a: &Mat, ahat: &Mat, n: &[Mat], nhat: &[Mat]) -> Mat {
    let (dn, dr) = (a.nrows(), ahat.nrows());
    let mut k =
        linalg::kron(&Mat::identity(dr, dr), a) + linalg::kron(ahat, &Mat::identity(dn, dn));
    for (ni, mi) in n.iter().zip(nhat) {
        k += linalg::kron(mi, ni);
    }
    k
}

fn direct_kron(a: &Mat, ahat: &Mat, n: &[Mat], nhat: &[Mat], c: &Mat) -> Result<LyapunovSolution> {
    let k = mixed_kron_matrix(a, ahat, n, nhat);
    let rhs = -linalg::vec(c);
    let v = solve_dense(k, &rhs, PIVOT_RTOL)?;
    Ok(LyapunovSolution {
        x: linalg::unvec(&v, a.nrows(), ahat.nrows()),
        residual_norm: 0.0,
        method: LyapunovMethod::DirectKron,
        iterations: 0,
    })
}

/// Stationary splitting `A X_{k+1} + X_{k+1} Âᵀ = −(C + Σ Nᵢ X_k N̂ᵢᵀ)`, run in
/// Schur coordinates so each sweep is a single quasi-triangular solve.
pub(crate) fn splitting(
    left: &RealSchur,
    right: &RealSchur,
    n: &[Mat],
    nhat: &[Mat],
    c: &Mat,
    opts: &LyapunovOptions,
) -> Result<LyapunovSolution> {
    let tol = pivot_tol(left, right);
    let nt: Vec<Mat> = n.iter().map(|m| left.to_schur(m, left)).collect();
    let mt: Vec<Mat> = nhat
        .iter()
        .map(|m| right.to_schur(m, right).transpose())
        .collect();
    let ct = left.to_schur(c, right);
    let mut y = -&ct;
    solve_quasi_sylvester(left, right, &mut y, tol)?;
    let mut last_update = fro(&y);
    let mut iterations = 1;
    while iterations < opts.max_iter {
        let mut rhs = -&ct;
        for (ni, mi) in nt.iter().zip(&mt) {
            rhs -= ni * &y * mi;
        }
        solve_quasi_sylvester(left, right, &mut rhs, tol)?;
        let ynorm = fro(&rhs);
        last_update = fro(&(&rhs - &y));
        y = rhs;
        iterations += 1;
        if !ynorm.is_finite() || ynorm > 1e300 {
            break;
        }
        if last_update <= opts.step_tol * (1.0 + ynorm) {
            return Ok(LyapunovSolution {
                x: left.back_from_schur(&y, right),
                residual_norm: 0.0,
                method: LyapunovMethod::SplittingIteration,
                iterations,
            });
        }
    }
    let residual = {
        let mut r = &left.t * &y + &y * right.t.transpose() + &ct;
        for (ni, mi) in nt.iter().zip(&mt) {
            r += ni * &y * mi;
        }
        fro(&r)
    };
    Err(Error::IterationDivergence {
        iterations,
        last_update,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_a() -> Mat {
        Mat::from_row_slice(2, 2, &[0.0, -10.0, 1.0, -10.0])
    }

    fn example_c() -> Mat {
        let b = Mat::from_row_slice(2, 1, &[0.0, 10.0]);
        &b * b.transpose()
    }

    #[test]
    fn standard_example_gramian() {
        let sol = solve_standard_lyapunov(&example_a(), &example_c()).unwrap();
        let expected = Mat::from_row_slice(2, 2, &[50.0, 0.0, 0.0, 5.0]);
        assert!((&sol.x - expected).amax() < 1e-10);
        assert!(sol.residual_norm < 1e-12);
        assert_eq!(sol.method, LyapunovMethod::BartelsStewart);
    }

    #[test]
    fn standard_minus_identity() {
        let sol = solve_standard_lyapunov(&-Mat::identity(3, 3), &Mat::identity(3, 3)).unwrap();
        assert!((&sol.x - Mat::identity(3, 3) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn standard_singular_pencil() {
        let a = Mat::from_element(2, 2, -1.0);
        let c = Mat::from_element(2, 2, 1.0);
        assert!(matches!(
            solve_standard_lyapunov(&a, &c),
            Err(Error::SingularPencil { .. })
        ));
        let opts = LyapunovOptions::with_method(MethodChoice::DirectKron);
        assert!(matches!(
            solve_generalized_lyapunov(&a, &[Mat::zeros(2, 2)], &c, &opts),
            Err(Error::SingularPencil { .. })
        ));
    }

    #[test]
    fn generalized_zero_noise_is_standard() {
        let sol = solve_generalized_lyapunov(
            &example_a(),
            &[Mat::zeros(2, 2)],
            &example_c(),
            &LyapunovOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.method, LyapunovMethod::BartelsStewart);
        assert!((sol.x[(0, 0)] - 50.0).abs() < 1e-10 && (sol.x[(1, 1)] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn generalized_scalar_ansatz() {
        let a = -Mat::identity(2, 2);
        let n = [Mat::identity(2, 2) * 0.5];
        let c = Mat::identity(2, 2);
        for m in [MethodChoice::DirectKron, MethodChoice::SplittingIteration] {
            let sol =
                solve_generalized_lyapunov(&a, &n, &c, &LyapunovOptions::with_method(m)).unwrap();
            assert!(
                (&sol.x - Mat::identity(2, 2) * (4.0 / 7.0)).amax() < 1e-12,
                "{m:?}"
            );
        }
    }

    #[test]
    fn splitting_diverges_on_unstable_noise() {
        let a = -Mat::identity(2, 2);
        let n = [Mat::identity(2, 2) * 2.0];
        let opts = LyapunovOptions {
            method: MethodChoice::SplittingIteration,
            max_iter: 200,
            ..Default::default()
        };
        assert!(matches!(
            solve_generalized_lyapunov(&a, &n, &Mat::identity(2, 2), &opts),
            Err(Error::IterationDivergence { .. })
        ));
    }

    #[test]
    fn mixed_with_same_data_is_gramian() {
        let a = Mat::from_row_slice(3, 3, &[-3.0, 1.0, 0.0, 0.5, -2.0, 0.3, 0.0, 0.2, -4.0]);
        let n = vec![Mat::from_row_slice(
            3,
            3,
            &[0.3, 0.0, 0.1, 0.0, 0.2, 0.0, 0.1, 0.0, 0.4],
        )];
        let c = Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 2.0]);
        let opts = LyapunovOptions::default();
        let p = solve_generalized_lyapunov(&a, &n, &c, &opts).unwrap().x;
        for m in [MethodChoice::DirectKron, MethodChoice::SplittingIteration] {
            let p2 = solve_mixed_sylvester(&a, &a, &n, &n, &c, &LyapunovOptions::with_method(m))
                .unwrap();
            assert!((&p2.x - &p).amax() < 1e-12);
            assert!(p2.residual_norm < 1e-12);
        }
    }

    #[test]
    fn residual_definitions() {
        let a = example_a();
        let c = example_c();
        assert!((residual_generalized(&a, &[], &c, &Mat::zeros(2, 2)) - fro(&c)).abs() < 1e-12);
        let x = Mat::from_row_slice(2, 2, &[50.0, 0.0, 0.0, 5.0]);
        let eps = 1e-3;
        let r = residual_generalized(&a, &[], &c, &(x + Mat::identity(2, 2) * eps));
        assert!((r - fro(&((&a + a.transpose()) * eps))).abs() < 1e-12);
    }

    #[test]
    fn sylvester_rectangular() {
        let a = Mat::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -2.0, -1.0, 0.0, 0.0, 0.0, -3.0]);
        let b = Mat::from_row_slice(2, 2, &[-0.5, 0.1, 0.0, -2.0]);
        let c = Mat::from_fn(3, 2, |i, j| (i + j) as f64);
        let x = solve_sylvester(&a, &b, &c).unwrap();
        assert!(residual_mixed(&a, &b, &[], &[], &c, &x) < 1e-12);
    }
}
