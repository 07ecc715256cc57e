//! Solvers that return a factor `L` with `X = LLᵀ` instead of `X` itself.
//!
//! Rounding then perturbs `L` by `O(ε‖L‖)`, so an eigenvalue `λ` of `X` is
//! resolved to relative accuracy `O(ε √(‖X‖/λ))` rather than `O(ε ‖X‖/λ)`.

use nalgebra::{Complex, DMatrix};

use super::{check_mixed, LyapunovOptions, PIVOT_RTOL};
use crate::error::{Error, Result};
use crate::linalg::{fro, svd_sorted, Mat, RealSchur};

type C64 = Complex<f64>;
type CMat = DMatrix<C64>;

/// `A = U T Uᴴ` with `T` upper triangular, obtained by splitting the 2×2
/// blocks of the real Schur form.
pub(crate) struct ComplexSchur {
    u: CMat,
    t: CMat,
    scale: f64,
}

impl ComplexSchur {
    pub fn new(a: &Mat) -> Result<Self> {
        Ok(Self::from_real(&RealSchur::new(a)?))
    }

    pub fn from_real(s: &RealSchur) -> Self {
        let n = s.dim();
        let mut t = s.t.map(|v| C64::new(v, 0.0));
        let mut u = s.q.map(|v| C64::new(v, 0.0));
        for b in s.blocks.iter().filter(|b| b.size == 2) {
            let (k, m) = (b.start, b.start + 1);
            let mid = (t[(k, k)] + t[(m, m)]) * 0.5;
            let half = (t[(k, k)] - t[(m, m)]) * 0.5;
            let lambda = mid + (half * half + t[(k, m)] * t[(m, k)]).sqrt();
            let mu = lambda - t[(m, m)];
            let sub = t[(m, k)].re;
            let r = (mu.norm_sqr() + sub * sub).sqrt();
            let (c, s) = (mu / r, sub / r);
            // G = [[c̄, s], [−s, c]] from the left, Gᴴ = [[c, −s], [s, c̄]] from the right.
            for j in k..n {
                let (x, y) = (t[(k, j)], t[(m, j)]);
                t[(k, j)] = c.conj() * x + y * s;
                t[(m, j)] = c * y - x * s;
            }
            for i in 0..=m {
                let (x, y) = (t[(i, k)], t[(i, m)]);
                t[(i, k)] = x * c + y * s;
                t[(i, m)] = y * c.conj() - x * s;
            }
            for i in 0..n {
                let (x, y) = (u[(i, k)], u[(i, m)]);
                u[(i, k)] = x * c + y * s;
                u[(i, m)] = y * c.conj() - x * s;
            }
            t[(m, k)] = C64::new(0.0, 0.0);
        }
        Self {
            u,
            t,
            scale: s.scale,
        }
    }
}

/// Upper-triangular `U` with `UUᴴ = X` where `TX + XTᴴ = −CCᴴ`.
///
/// Peels off the last row and column: with `ν = ‖c₂‖/√(−2Re τ)` the column
/// above the diagonal solves a shifted triangular system, and the leading
/// block sees the updated factor `C₁ − u c₂/ν`.
fn triangular_factor(t: &CMat, mut c: CMat, pivot_tol: f64) -> Result<CMat> {
    let n = t.nrows();
    let p = c.ncols();
    let mut u = CMat::zeros(n, n);
    let mut x = vec![C64::new(0.0, 0.0); n];
    for j in (0..n).rev() {
        let tau = t[(j, j)];
        let alpha = -2.0 * tau.re;
        if !(alpha > pivot_tol) {
            return Err(Error::SingularPencil {
                pivot: alpha,
                threshold: pivot_tol,
            });
        }
        let norm = (0..p).map(|q| c[(j, q)].norm_sqr()).sum::<f64>().sqrt();
        let nu = norm / alpha.sqrt();
        u[(j, j)] = C64::new(nu, 0.0);
        if nu == 0.0 || j == 0 {
            continue;
        }
        let w: Vec<C64> = (0..p).map(|q| c[(j, q)] / nu).collect();
        // (T₁₁ + τ̄I) x = −C₁wᴴ − ν t₁₂
        for i in 0..j {
            let mut acc = C64::new(0.0, 0.0);
            for (q, wq) in w.iter().enumerate() {
                acc += c[(i, q)] * wq.conj();
            }
            x[i] = -acc - t[(i, j)] * nu;
        }
        for i in (0..j).rev() {
            let mut s = x[i];
            for l in i + 1..j {
                s -= t[(i, l)] * x[l];
            }
            x[i] = s / (t[(i, i)] + tau.conj());
        }
        for i in 0..j {
            u[(i, j)] = x[i];
        }
        for (q, wq) in w.iter().enumerate() {
            for i in 0..j {
                c[(i, q)] -= x[i] * wq;
            }
        }
    }
    Ok(u)
}

/// `R` with `RRᵀ = FFᵀ` and at most `F.nrows()` columns.
pub fn compress_factor(f: &Mat) -> Mat {
    let (n, p) = f.shape();
    if p <= n {
        return f.clone();
    }
    f.transpose().qr().r().transpose()
}

fn factor_with(cs: &ComplexSchur, z: &Mat) -> Result<Mat> {
    let n = z.nrows();
    let zc = compress_factor(z).map(|v| C64::new(v, 0.0));
    let ut = triangular_factor(&cs.t, cs.u.adjoint() * zc, PIVOT_RTOL * cs.scale)?;
    let l = &cs.u * ut;
    // X = Re(LLᴴ) = Re L Re Lᵀ + Im L Im Lᵀ
    let mut f = Mat::zeros(n, 2 * n);
    f.columns_mut(0, n).copy_from(&l.map(|v| v.re));
    f.columns_mut(n, n).copy_from(&l.map(|v| v.im));
    Ok(compress_factor(&f))
}

/// `L` with `LLᵀ = X` and `AX + XAᵀ = −ZZᵀ`, for stable `A`.
pub fn lyapunov_factor(a: &Mat, z: &Mat) -> Result<Mat> {
    check_mixed(a, a, &[], &[], &(z * z.transpose()))?;
    factor_with(&ComplexSchur::new(a)?, z)
}

#[derive(Clone, Debug)]
pub struct FactorSolution {
    pub l: Mat,
    pub iterations: usize,
}

/// Whether `new·newᵀ − old·oldᵀ` is negligible along every eigenvector of
/// `new·newᵀ`, relative to the eigenvalue or to the rounding level of the factors.
fn settled(old: &Mat, new: &Mat, tol: f64) -> Result<bool> {
    let svd = svd_sorted(new)?;
    let top = svd.singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(fro(old) == 0.0);
    }
    let noise = 8.0 * f64::EPSILON * (new.nrows() as f64).sqrt() * top;
    let proj = svd.u.transpose() * old;
    Ok(svd.singular_values.iter().enumerate().all(|(i, &s)| {
        let before = proj.row(i).norm_squared();
        (s * s - before).abs() <= tol * s * s + noise * s
    }))
}

/// Factor of the solution of `AX + XAᵀ + Σ NᵢXNᵢᵀ = −ZZᵀ`, by the splitting
/// iteration `X₊ = L⁻¹(ZZᵀ + Σ NᵢXNᵢᵀ)` carried out on factors.
pub fn generalized_lyapunov_factor(
    a: &Mat,
    n: &[Mat],
    z: &Mat,
    opts: &LyapunovOptions,
) -> Result<FactorSolution> {
    check_mixed(a, a, n, n, &(z * z.transpose()))?;
    let cs = ComplexSchur::new(a)?;
    let mut l = factor_with(&cs, z)?;
    if n.is_empty() {
        return Ok(FactorSolution { l, iterations: 1 });
    }
    let dim = a.nrows();
    let m = z.ncols();
    let mut last_update = f64::INFINITY;
    for iterations in 2..=opts.max_iter.max(2) {
        let k = l.ncols();
        let mut rhs = Mat::zeros(dim, m + n.len() * k);
        rhs.columns_mut(0, m).copy_from(z);
        for (i, ni) in n.iter().enumerate() {
            rhs.columns_mut(m + i * k, k).copy_from(&(ni * &l));
        }
        let next = factor_with(&cs, &rhs)?;
        let size = fro(&next);
        if !size.is_finite() || size > 1e150 {
            break;
        }
        last_update = fro(&(&next * next.transpose() - &l * l.transpose()));
        if settled(&l, &next, opts.step_tol)? {
            return Ok(FactorSolution {
                l: next,
                iterations,
            });
        }
        l = next;
    }
    Err(Error::IterationDivergence {
        iterations: opts.max_iter,
        last_update,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::{solve_generalized_lyapunov, solve_standard_lyapunov};

    fn pseudo_random(n: usize, m: usize, seed: u64) -> Mat {
        let mut state = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        Mat::from_fn(n, m, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    fn stable(n: usize, seed: u64) -> Mat {
        let g = pseudo_random(n, n, seed);
        let shift = crate::linalg::max_real_eigenvalue(&g).unwrap() + 0.5;
        g - Mat::identity(n, n) * shift
    }

    #[test]
    fn complex_schur_is_triangular_and_unitary() {
        let a = Mat::from_row_slice(
            4,
            4,
            &[
                -1.0, 3.0, 0.5, 0.0, -2.0, -1.0, 0.0, 1.0, 0.0, 0.0, -0.5, 4.0, 0.3, 0.0, -1.0,
                -0.5,
            ],
        );
        let cs = ComplexSchur::new(&a).unwrap();
        for j in 0..4 {
            for i in j + 1..4 {
                assert_eq!(cs.t[(i, j)].norm(), 0.0);
            }
        }
        let ac = a.map(|v| C64::new(v, 0.0));
        assert!((&cs.u * &cs.t * cs.u.adjoint() - ac).norm() < 1e-13);
        assert!((cs.u.adjoint() * &cs.u - CMat::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn example_factor() {
        let a = Mat::from_row_slice(2, 2, &[0.0, -10.0, 1.0, -10.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 10.0]);
        let l = lyapunov_factor(&a, &b).unwrap();
        let x = &l * l.transpose();
        assert!((x - Mat::from_row_slice(2, 2, &[50.0, 0.0, 0.0, 5.0])).amax() < 1e-12);
    }

    #[test]
    fn factor_matches_bartels_stewart() {
        for seed in 0..5 {
            let a = stable(9, seed);
            let z = pseudo_random(9, 2, seed + 50);
            let l = lyapunov_factor(&a, &z).unwrap();
            let x = solve_standard_lyapunov(&a, &(&z * z.transpose()))
                .unwrap()
                .x;
            assert!(fro(&(&l * l.transpose() - &x)) <= 1e-11 * fro(&x));
        }
    }

    #[test]
    fn generalized_factor_matches_dense_solution() {
        for seed in 0..5 {
            let a = stable(7, seed) - Mat::identity(7, 7);
            let n = vec![
                pseudo_random(7, 7, seed + 9) * 0.8,
                pseudo_random(7, 7, seed + 19) * 0.8,
            ];
            let z = pseudo_random(7, 1, seed + 29);
            let sol = generalized_lyapunov_factor(&a, &n, &z, &LyapunovOptions::default()).unwrap();
            let x = solve_generalized_lyapunov(
                &a,
                &n,
                &(&z * z.transpose()),
                &LyapunovOptions::default(),
            )
            .unwrap()
            .x;
            assert!(
                fro(&(&sol.l * sol.l.transpose() - &x)) <= 1e-10 * fro(&x),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn zero_input_gives_zero_factor() {
        let a = stable(4, 3);
        let sol = generalized_lyapunov_factor(
            &a,
            &[pseudo_random(4, 4, 1) * 0.1],
            &Mat::zeros(4, 1),
            &LyapunovOptions::default(),
        )
        .unwrap();
        assert_eq!(fro(&sol.l), 0.0);
    }

    #[test]
    fn unstable_matrix_is_rejected() {
        assert!(lyapunov_factor(&Mat::identity(2, 2), &Mat::identity(2, 1)).is_err());
    }
}
