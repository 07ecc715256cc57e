//! Gramians, Gramian-eigenbasis Galerkin reduction and square-root balanced truncation.

use crate::error::{Error, Result};
use crate::linalg::{self, fro, is_zero, svd_sorted, sym_eig_desc, symmetrize, Mat};
use crate::lyapunov::{
    generalized_lyapunov_factor, solve_generalized_lyapunov, FactorSolution, LyapunovOptions,
    LyapunovSolution,
};
use crate::model::{BilinearControlSystem, GalerkinRom, ReductionMethod, StochasticLinearSystem};
use crate::stability::{
    extract_stable_realization, spectral_abscissa, sufficient_ms_stability, StabilityOptions,
    StabilityReport, StableRealization, Verdict,
};

/// Relative eigenvalue cutoff for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GramianOptions {
    pub lyapunov: LyapunovOptions,
    pub stability: StabilityOptions,
    /// Check mean-square asymptotic stability before solving.
    pub verify_stability: bool,
    /// Largest dimension for which bounds work with a Cholesky-type factor of
    /// `P`, which resolves small Gramian eigenvalues to high relative accuracy.
    pub factor_cutoff: usize,
}

impl Default for GramianOptions {
    fn default() -> Self {
        Self {
            lyapunov: LyapunovOptions::default(),
            stability: StabilityOptions::default(),
            verify_stability: true,
            factor_cutoff: 100,
        }
    }
}

/// Errors with [`Error::Unstable`] unless `(A, N)` is mean-square asymptotically stable.
///
/// A Lyapunov witness with `Y = I` settles most cases at the cost of one solve;
/// the spectral abscissa decides the rest.
pub fn verify_ms_stability(a: &Mat, n: &[Mat], opts: &GramianOptions) -> Result<()> {
    let dim = a.nrows();
    if sufficient_ms_stability(a, n, &Mat::identity(dim, dim), &opts.lyapunov)?.certified {
        return Ok(());
    }
    log::debug!("Lyapunov witness inconclusive for n = {dim}; computing the spectral abscissa");
    let report = spectral_abscissa(a, n, &opts.stability)?;
    if report.verdict == Verdict::AsymptoticallyStable {
        Ok(())
    } else {
        Err(Error::Unstable {
            abscissa: report.abscissa,
        })
    }
}

/// `L` with `P = LLᵀ`; see [`reachability_gramian`].
pub fn reachability_factor(
    sys: &StochasticLinearSystem,
    opts: &GramianOptions,
) -> Result<FactorSolution> {
    if opts.verify_stability {
        verify_ms_stability(&sys.a, &sys.n, opts)?;
    }
    generalized_lyapunov_factor(&sys.a, &sys.n, &sys.b, &opts.lyapunov)
}

/// `P` with `AP + PAᵀ + Σ NᵢPNᵢᵀ = −BBᵀ`.
pub fn reachability_gramian(
    sys: &StochasticLinearSystem,
    opts: &GramianOptions,
) -> Result<LyapunovSolution> {
    if opts.verify_stability {
        verify_ms_stability(&sys.a, &sys.n, opts)?;
    }
    let c = &sys.b * sys.b.transpose();
    solve_generalized_lyapunov(&sys.a, &sys.n, &c, &opts.lyapunov)
}

/// `P_γ` of the rescaled system `(A, N/γ, B/γ)`.
pub fn bilinear_gramian(
    sys: &BilinearControlSystem,
    opts: &GramianOptions,
) -> Result<LyapunovSolution> {
    reachability_gramian(&sys.scaled(), opts)
}

/// `Q` with `AᵀQ + QA + Σ NᵢᵀQNᵢ = −I`.
pub fn observability_gramian(
    sys: &StochasticLinearSystem,
    opts: &GramianOptions,
) -> Result<LyapunovSolution> {
    let at = sys.a.transpose();
    let nt: Vec<Mat> = sys.n.iter().map(|m| m.transpose()).collect();
    if opts.verify_stability {
        verify_ms_stability(&at, &nt, opts)?;
    }
    let dim = sys.dim();
    solve_generalized_lyapunov(&at, &nt, &Mat::identity(dim, dim), &opts.lyapunov)
}

/// Eigenvalues (descending, clipped at zero) and orthonormal eigenvectors of a Gramian.
#[derive(Clone, Debug)]
pub struct GramianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub basis: Mat,
    /// Largest magnitude among the negative eigenvalues that were clipped.
    pub clipped: f64,
}

pub fn spectral_factorize(p: &Mat) -> Result<GramianSpectrum> {
    let (mut vals, basis) = sym_eig_desc(&symmetrize(p))?;
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut clipped = 0.0f64;
    for v in vals.iter_mut() {
        if *v < 0.0 {
            if *v < -RANK_RTOL * top {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: *v });
            }
            clipped = clipped.max(-*v);
            *v = 0.0;
        }
    }
    Ok(GramianSpectrum {
        eigenvalues: vals,
        basis,
        clipped,
    })
}

/// Spectrum of `P = LLᵀ` from the singular value decomposition of `L`.
pub fn factor_spectrum(l: &Mat) -> Result<GramianSpectrum> {
    let n = l.nrows();
    let square = if l.ncols() < n {
        let mut m = Mat::zeros(n, n);
        m.columns_mut(0, l.ncols()).copy_from(l);
        m
    } else {
        l.clone()
    };
    let svd = svd_sorted(&square)?;
    Ok(GramianSpectrum {
        eigenvalues: svd.singular_values.iter().map(|s| s * s).collect(),
        basis: svd.u,
        clipped: 0.0,
    })
}

fn check_order(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!(
            "reduced order {r} outside 1..={n}"
        )));
    }
    Ok(())
}

/// Galerkin projection onto the leading `r` Gramian eigenvectors.
pub fn galerkin_reduce(
    sys: &StochasticLinearSystem,
    spectrum: &GramianSpectrum,
    r: usize,
) -> Result<GalerkinRom> {
    check_order(r, sys.dim())?;
    let lam = &spectrum.eigenvalues;
    if lam[r - 1] <= RANK_RTOL * lam[0] {
        log::warn!(
            "truncating at r = {r} with lambda_r = {:.3e} <= {RANK_RTOL:.0e} lambda_1; the reduced model may be only marginally stable",
            lam[r - 1]
        );
    }
    let v = spectrum.basis.columns(0, r).into_owned();
    GalerkinRom::orthogonal(sys, v)
}

/// Square-root factor `Z` with `P ≈ Z Zᵀ`, keeping eigenvalues above the rank cutoff.
fn sqrt_factor(p: &Mat) -> Result<Mat> {
    let spec = spectral_factorize(p)?;
    let top = spec.eigenvalues.first().copied().unwrap_or(0.0);
    let rank = spec
        .eigenvalues
        .iter()
        .filter(|&&v| v > RANK_RTOL * top)
        .count();
    let mut z = Mat::zeros(p.nrows(), rank);
    for k in 0..rank {
        z.set_column(k, &(spec.basis.column(k) * spec.eigenvalues[k].sqrt()));
    }
    Ok(z)
}

/// `√eig(PQ)`, descending, computed as singular values of `Z_Qᵀ Z_P`.
pub fn hankel_singular_values(p: &Mat, q: &Mat) -> Result<Vec<f64>> {
    let zp = sqrt_factor(p)?;
    let zq = sqrt_factor(q)?;
    Ok(svd_sorted(&(zq.transpose() * zp))?.singular_values)
}

/// Square-root balanced truncation.
pub fn balanced_truncation_reduce(
    sys: &StochasticLinearSystem,
    p: &Mat,
    q: &Mat,
    r: usize,
) -> Result<GalerkinRom> {
    check_order(r, sys.dim())?;
    let zp = sqrt_factor(p)?;
    let zq = sqrt_factor(q)?;
    if r > zp.ncols().min(zq.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "order {r} exceeds numerical ranks of P ({}) and Q ({})",
            zp.ncols(),
            zq.ncols()
        )));
    }
    let svd = svd_sorted(&(zq.transpose() * &zp))?;
    let s = &svd.singular_values;
    if s[r - 1] < 1e-13 * s[0] {
        return Err(Error::IllConditionedTruncation {
            ratio: s[r - 1] / s[0],
        });
    }
    let scale = Mat::from_diagonal(&linalg::Vector::from_iterator(
        r,
        s[..r].iter().map(|v| 1.0 / v.sqrt()),
    ));
    let v = &zp * svd.v.columns(0, r) * &scale;
    let w = &zq * svd.u.columns(0, r) * &scale;
    GalerkinRom::project(&sys.a, &sys.n, &sys.b, v, w, ReductionMethod::Bt)
}

/// Reduced Gramian together with the stability information used to obtain it.
#[derive(Clone, Debug)]
pub struct ReducedGramian {
    pub p_hat: Mat,
    pub report: StabilityReport,
    /// Present when the reduced model was only marginally stable.
    pub realization: Option<StableRealization>,
}

/// `P̂` of the reduced triple; marginal models go through stable-realization extraction.
pub fn reduced_gramian(rom: &GalerkinRom, opts: &GramianOptions) -> Result<ReducedGramian> {
    reduced_gramian_of(&rom.reduced_a, &rom.reduced_n, &rom.reduced_b, opts)
}

pub(crate) fn reduced_gramian_of(
    a: &Mat,
    n: &[Mat],
    b: &Mat,
    opts: &GramianOptions,
) -> Result<ReducedGramian> {
    let r = a.nrows();
    let report = spectral_abscissa(a, n, &opts.stability)?;
    match report.verdict {
        Verdict::AsymptoticallyStable => {
            let c = b * b.transpose();
            let sol = solve_generalized_lyapunov(a, n, &c, &opts.lyapunov)?;
            Ok(ReducedGramian {
                p_hat: sol.x,
                report,
                realization: None,
            })
        }
        Verdict::MarginallyStable => {
            let real = extract_stable_realization(a, n, b, &opts.stability)?;
            let p_hat = if real.order() == 0 || is_zero(&real.projected_b) {
                Mat::zeros(r, r)
            } else {
                let c = &real.projected_b * real.projected_b.transpose();
                let p0 = solve_generalized_lyapunov(
                    &real.projected_a,
                    &real.projected_n,
                    &c,
                    &opts.lyapunov,
                )?
                .x;
                symmetrize(&(&real.v0 * p0 * real.v0.transpose()))
            };
            Ok(ReducedGramian {
                p_hat,
                report,
                realization: Some(real),
            })
        }
        Verdict::Unstable => Err(Error::ContractViolation(format!(
            "reduced model is unstable (abscissa {:.6e}); its Gramian does not exist",
            report.abscissa
        ))),
    }
}

/// Largest principal angle sine between the column spaces of two orthonormal bases.
pub fn subspace_gap(v1: &Mat, v2: &Mat) -> Result<f64> {
    let proj = v2 - v1 * (v1.transpose() * v2);
    Ok(svd_sorted(&proj)?
        .singular_values
        .first()
        .copied()
        .unwrap_or(0.0))
}

/// `‖VᵀV − I‖_F`.
pub fn orthonormality_defect(v: &Mat) -> f64 {
    fro(&(v.transpose() * v - Mat::identity(v.ncols(), v.ncols())))
}
