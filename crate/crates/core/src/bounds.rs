//! A-priori error bounds for Gramian-based reduced models.
//!
//! For a stochastic system with reachability Gramian `P` and reduced model
//! `(Â, N̂, B̂, V)`, the worst-case mean error over `[0, T]` is bounded by
//! `ℰ(r)·‖u‖` with
//! `ℰ(r)² = tr P + tr(P̂ VᵀV) − 2 tr(P₂ Vᵀ)`,
//! where `P₂` solves `AP₂ + P₂Âᵀ + Σ NᵢP₂N̂ᵢᵀ = −BB̂ᵀ`. Bilinear systems use the
//! same factor on the rescaled data times `γ·exp(γ²‖u⁰‖²/2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::{input_l2_norm, InputSignal};
use crate::linalg::{fro, symmetrize, trace_product, Mat, RealSchur};
use crate::lyapunov::{mixed_with_schur, solve_generalized_lyapunov, solve_mixed_sylvester};
use crate::model::{BilinearControlSystem, GalerkinRom, ReductionMethod, StochasticLinearSystem};
use crate::parallel::{map_indexed, Execution};
use crate::reduction::{
    factor_spectrum, reachability_factor, reachability_gramian, reduced_gramian,
    spectral_factorize, GramianOptions, GramianSpectrum,
};
use crate::stability::Verdict;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    General,
    Weighted,
    BilinearGeneral,
    BilinearWeighted,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundTerms {
    pub tr_p: f64,
    pub tr_phat: f64,
    pub tr_p2_vt: f64,
    /// `tr(Λ₂𝒲)`, or `tr(Λ₂𝒲₀)` when the reduced model is only marginally stable.
    pub tr_lambda2_weighted: Option<f64>,
    pub tr_phat_minus_lambda1: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorBoundReport {
    pub input_independent_factor: f64,
    pub input_norm: f64,
    pub exponential_factor: f64,
    pub gamma: f64,
    pub bound: f64,
    pub terms: BoundTerms,
    pub method: BoundMethod,
}

impl ErrorBoundReport {
    fn assemble(
        factor: f64,
        input_norm: f64,
        exponential_factor: f64,
        gamma: f64,
        terms: BoundTerms,
        method: BoundMethod,
    ) -> Self {
        Self {
            input_independent_factor: factor,
            input_norm,
            exponential_factor,
            gamma,
            bound: factor * exponential_factor * input_norm * gamma,
            terms,
            method,
        }
    }
}

/// Reachability data of the full system, shared across reduced models.
pub struct BoundContext {
    sys: StochasticLinearSystem,
    p: Mat,
    /// `P = LLᵀ`; small quantities such as `ΠPΠᵀ` are formed from `L`.
    l: Mat,
    schur_a: RealSchur,
    spectrum: GramianSpectrum,
    opts: GramianOptions,
}

impl BoundContext {
    pub fn new(sys: &StochasticLinearSystem, opts: &GramianOptions) -> Result<Self> {
        if sys.dim() > opts.factor_cutoff {
            let p = reachability_gramian(sys, opts)?.x;
            return Self::with_gramian(sys, p, opts);
        }
        let l = reachability_factor(sys, opts)?.l;
        let spectrum = factor_spectrum(&l)?;
        Ok(Self {
            schur_a: RealSchur::new(&sys.a)?,
            sys: sys.clone(),
            p: symmetrize(&(&l * l.transpose())),
            l,
            spectrum,
            opts: opts.clone(),
        })
    }

    /// Uses a precomputed reachability Gramian.
    pub fn with_gramian(
        sys: &StochasticLinearSystem,
        p: Mat,
        opts: &GramianOptions,
    ) -> Result<Self> {
        if p.shape() != (sys.dim(), sys.dim()) {
            return Err(Error::Dimension("Gramian does not match the system".into()));
        }
        let spectrum = spectral_factorize(&p)?;
        let mut l = spectrum.basis.clone();
        for (j, lambda) in spectrum.eigenvalues.iter().enumerate() {
            l.column_mut(j).scale_mut(lambda.sqrt());
        }
        Ok(Self {
            schur_a: RealSchur::new(&sys.a)?,
            sys: sys.clone(),
            p,
            l,
            spectrum,
            opts: opts.clone(),
        })
    }

    pub fn gramian(&self) -> &Mat {
        &self.p
    }

    pub fn system(&self) -> &StochasticLinearSystem {
        &self.sys
    }

    pub fn spectrum(&mut self) -> Result<&GramianSpectrum> {
        Ok(&self.spectrum)
    }

    fn check_rom(&self, rom: &GalerkinRom) -> Result<()> {
        if rom.source_dim != self.sys.dim()
            || rom.reduced_n.len() != self.sys.n.len()
            || rom.reduced_b.ncols() != self.sys.inputs()
        {
            return Err(Error::Dimension(
                "reduced model does not belong to this system".into(),
            ));
        }
        Ok(())
    }

    /// `ℰ(r)` together with the traces entering it.
    pub fn factor(&self, rom: &GalerkinRom) -> Result<(f64, BoundTerms)> {
        self.check_rom(rom)?;
        let red = reduced_gramian(rom, &self.opts)?;
        let p_hat = red.p_hat;
        let tr_p = self.p.trace();
        let vtv = rom.v.transpose() * &rom.v;
        let tr_phat = trace_product(&p_hat, &vtv);
        let (radicand, tr_p2_vt) = if red.report.verdict == Verdict::AsymptoticallyStable {
            let (radicand, p2) = self.error_gramian_trace(rom)?;
            (radicand, trace_product(&p2, &rom.v.transpose()))
        } else {
            let c = &self.sys.b * rom.reduced_b.transpose();
            let p2 = mixed_with_schur(
                &self.schur_a,
                &self.sys.a,
                &rom.reduced_a,
                &self.sys.n,
                &rom.reduced_n,
                &c,
                &self.opts.lyapunov,
            )?
            .x;
            let tr_p2_vt = trace_product(&p2, &rom.v.transpose());
            (tr_p + tr_phat - 2.0 * tr_p2_vt, tr_p2_vt)
        };
        if radicand < -1e-10 * tr_p.abs() || !radicand.is_finite() {
            return Err(Error::NegativeRadicand {
                tr_p,
                tr_phat,
                tr_p2vt: tr_p2_vt,
            });
        }
        Ok((
            radicand.max(0.0).sqrt(),
            BoundTerms {
                tr_p,
                tr_phat,
                tr_p2_vt,
                ..Default::default()
            },
        ))
    }

    /// `tr P + tr(P̂VᵀV) − 2tr(P₂Vᵀ)` evaluated without cancellation, plus `P₂`.
    ///
    /// With `Π = I − VWᵀ` the error splits as `x − Vx̂ = Ve + Πx` where
    /// `e = Wᵀx − x̂` starts at zero and is driven by `Πx` only. The joint
    /// Gramian `[[E, G], [Gᵀ, P]]` of `(e, x)` then has small blocks `E` and
    /// `G`, and `ℰ² = tr(EVᵀV) + 2tr(GΠᵀV) + tr(ΠPΠᵀ)`. Needs a
    /// mean-square stable reduced model.
    fn error_gramian_trace(&self, rom: &GalerkinRom) -> Result<(f64, Mat)> {
        let (v, w) = (&rom.v, &rom.w);
        let wt = w.transpose();
        let l = &self.l;
        // K = WᵀAΠ, Mᵢ = WᵀNᵢΠ
        let k = &wt * &self.sys.a - &rom.reduced_a * &wt;
        let ms: Vec<Mat> = self
            .sys
            .n
            .iter()
            .zip(&rom.reduced_n)
            .map(|(ni, nh)| &wt * ni - nh * &wt)
            .collect();
        let pi_l = l - v * (&wt * l);
        let pi_p = &pi_l * l.transpose();
        let s = &pi_l * pi_l.transpose();

        // A Gᵀ + Gᵀ Âᵀ + Σ Nᵢ Gᵀ N̂ᵢᵀ = −(KΠP + Σ MᵢΠPNᵢᵀ)ᵀ
        let mut cg = &k * &pi_p;
        for (m, ni) in ms.iter().zip(&self.sys.n) {
            cg += m * &pi_p * ni.transpose();
        }
        let gt = mixed_with_schur(
            &self.schur_a,
            &self.sys.a,
            &rom.reduced_a,
            &self.sys.n,
            &rom.reduced_n,
            &cg.transpose(),
            &self.opts.lyapunov,
        )?
        .x;
        let g = gt.transpose();

        // ÂE + EÂᵀ + Σ N̂ᵢEN̂ᵢᵀ = −(KGᵀ + GKᵀ + Σ N̂ᵢGMᵢᵀ + MᵢGᵀN̂ᵢᵀ + MᵢSMᵢᵀ)
        let kg = &k * &gt;
        let mut ce = &kg + kg.transpose();
        for (m, nh) in ms.iter().zip(&rom.reduced_n) {
            let cross = nh * &g * m.transpose();
            ce += &cross + cross.transpose() + m * &s * m.transpose();
        }
        let e = solve_generalized_lyapunov(
            &rom.reduced_a,
            &rom.reduced_n,
            &symmetrize(&ce),
            &self.opts.lyapunov,
        )?
        .x;

        let vtv = v.transpose() * v;
        let pi_t_v = v - w * (v.transpose() * v);
        let radicand = trace_product(&e, &vtv) + 2.0 * trace_product(&g, &pi_t_v) + s.trace();
        // P₂ = ∫ x x̂ᵀ = PW − Gᵀ
        Ok((radicand, &self.p * w - gt))
    }

    /// `ℰ(r)` from the eigenbasis-weighted representation.
    pub fn weighted_factor(&mut self, rom: &GalerkinRom) -> Result<(f64, BoundTerms)> {
        self.check_rom(rom)?;
        if rom.method != ReductionMethod::Os {
            return Err(Error::ContractViolation(
                "the weighted representation needs a Gramian-eigenbasis (OS) reduced model".into(),
            ));
        }
        let n = self.sys.dim();
        let r = rom.order();
        let tr_p = self.p.trace();
        if r == n {
            let terms = BoundTerms {
                tr_p,
                tr_phat: tr_p,
                tr_p2_vt: tr_p,
                tr_lambda2_weighted: Some(0.0),
                tr_phat_minus_lambda1: Some(0.0),
            };
            return Ok((0.0, terms));
        }
        let u2 = self.spectrum.basis.columns(r, n - r).into_owned();
        if fro(&(u2.transpose() * &rom.v)) > 1e-8 {
            return Err(Error::ContractViolation(
                "reduced basis is not spanned by the leading Gramian eigenvectors".into(),
            ));
        }
        // Balanced coordinates [V U₂]; the reduced model is the leading block.
        let mut u = Mat::zeros(n, n);
        u.columns_mut(0, r).copy_from(&rom.v);
        u.columns_mut(r, n - r).copy_from(&u2);
        let ut = u.transpose();
        let ab = &ut * &self.sys.a * &u;
        let nb: Vec<Mat> = self.sys.n.iter().map(|m| &ut * m * &u).collect();
        let vl = rom.v.transpose() * &self.l;
        let ul = u2.transpose() * &self.l;
        let lambda1 = &vl * vl.transpose();
        let lambda2 = &ul * ul.transpose();

        let red = reduced_gramian(rom, &self.opts)?;
        let p_hat = red.p_hat;
        let a11 = &rom.reduced_a;
        let n11 = &rom.reduced_n;

        // A₁₁ᵀY + YA_b + Σ N₁₁ᵀ Y N_b = −[I 0]
        let a11t = a11.transpose();
        let n11t: Vec<Mat> = n11.iter().map(|m| m.transpose()).collect();
        let abt = ab.transpose();
        let nbt: Vec<Mat> = nb.iter().map(|m| m.transpose()).collect();
        let mut rhs = Mat::zeros(r, n);
        rhs.columns_mut(0, r).fill_with_identity();
        let y = solve_mixed_sylvester(&a11t, &abt, &n11t, &nbt, &rhs, &self.opts.lyapunov)?.x;
        let y2 = y.columns(r, n - r).into_owned();

        let a12 = ab.view((0, r), (r, n - r)).into_owned();
        let mut w0 = Mat::identity(n - r, n - r) + a12.transpose() * &y2 * 2.0;
        for m in &nb {
            let n12 = m.view((0, r), (r, n - r)).into_owned();
            let ncol = m.columns(r, n - r).into_owned();
            w0 += n12.transpose() * (&y * ncol) * 2.0;
        }
        let tr_phat_minus_lambda1 = p_hat.trace() - lambda1.trace();
        let tr_w0 = trace_product(&lambda2, &w0);

        let (factor_sq, tr_lambda2_weighted) =
            if red.report.verdict == Verdict::AsymptoticallyStable {
                // A₁₁ᵀQ̂ + Q̂A₁₁ + Σ N₁₁ᵀQ̂N₁₁ = −I
                let q_hat = solve_generalized_lyapunov(
                    &a11t,
                    &n11t,
                    &Mat::identity(r, r),
                    &self.opts.lyapunov,
                )?
                .x;
                let mut w = w0;
                for m in &nb {
                    let n12 = m.view((0, r), (r, n - r)).into_owned();
                    w -= n12.transpose() * &q_hat * &n12;
                }
                let t = trace_product(&lambda2, &w);
                (t, t)
            } else {
                (tr_phat_minus_lambda1 + tr_w0, tr_w0)
            };
        if factor_sq < -1e-10 * tr_p.abs() || !factor_sq.is_finite() {
            return Err(Error::NegativeRadicand {
                tr_p,
                tr_phat: p_hat.trace(),
                tr_p2vt: f64::NAN,
            });
        }
        Ok((
            factor_sq.max(0.0).sqrt(),
            BoundTerms {
                tr_p,
                tr_phat: p_hat.trace(),
                tr_p2_vt: f64::NAN,
                tr_lambda2_weighted: Some(tr_lambda2_weighted),
                tr_phat_minus_lambda1: Some(tr_phat_minus_lambda1),
            },
        ))
    }

    pub fn general(&self, rom: &GalerkinRom, input_norm: f64) -> Result<ErrorBoundReport> {
        let (f, terms) = self.factor(rom)?;
        Ok(ErrorBoundReport::assemble(
            f,
            input_norm,
            1.0,
            1.0,
            terms,
            BoundMethod::General,
        ))
    }

    pub fn weighted(&mut self, rom: &GalerkinRom, input_norm: f64) -> Result<ErrorBoundReport> {
        let (f, terms) = self.weighted_factor(rom)?;
        Ok(ErrorBoundReport::assemble(
            f,
            input_norm,
            1.0,
            1.0,
            terms,
            BoundMethod::Weighted,
        ))
    }

    /// [`factor`](Self::factor) for several reduced models, in input order.
    pub fn factor_sweep(
        &self,
        roms: &[GalerkinRom],
        exec: Execution,
    ) -> Vec<Result<(f64, BoundTerms)>> {
        map_indexed(roms.len(), exec, |i| self.factor(&roms[i]))
    }

    pub fn general_sweep(
        &self,
        roms: &[GalerkinRom],
        input_norm: f64,
        exec: Execution,
    ) -> Vec<Result<ErrorBoundReport>> {
        map_indexed(roms.len(), exec, |i| self.general(&roms[i], input_norm))
    }
}

/// Stochastic bound `ℰ(r)·‖u‖`.
pub fn general_bound(
    sys: &StochasticLinearSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    opts: &GramianOptions,
) -> Result<ErrorBoundReport> {
    BoundContext::new(sys, opts)?.general(rom, input_l2_norm(u)?)
}

/// Stochastic bound from the eigenbasis-weighted representation.
pub fn weighted_bound(
    sys: &StochasticLinearSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    opts: &GramianOptions,
) -> Result<ErrorBoundReport> {
    BoundContext::new(sys, opts)?.weighted(rom, input_l2_norm(u)?)
}

/// `exp(γ²‖u⁰‖²/2)` where `u⁰` keeps only channels with a nonzero bilinear coefficient.
pub fn exponential_factor(sys: &BilinearControlSystem, u: &InputSignal) -> Result<f64> {
    let u0 = u.restricted(&sys.bilinear_channels());
    let norm = input_l2_norm(&u0)?;
    Ok((0.5 * sys.gamma * sys.gamma * norm * norm).exp())
}

/// Bound context for a bilinear system, built on its rescaled counterpart.
pub struct BilinearBoundContext {
    inner: BoundContext,
    sys: BilinearControlSystem,
}

impl BilinearBoundContext {
    pub fn new(sys: &BilinearControlSystem, opts: &GramianOptions) -> Result<Self> {
        Ok(Self {
            inner: BoundContext::new(&sys.scaled(), opts)?,
            sys: sys.clone(),
        })
    }

    pub fn scaled_context(&mut self) -> &mut BoundContext {
        &mut self.inner
    }

    fn check_input(&self, u: &InputSignal) -> Result<()> {
        if u.dim() != self.sys.inputs() {
            return Err(Error::Dimension(format!(
                "input has {} channels, system has {}",
                u.dim(),
                self.sys.inputs()
            )));
        }
        Ok(())
    }

    /// The reduced model must come from the rescaled system.
    pub fn general(&self, rom: &GalerkinRom, u: &InputSignal) -> Result<ErrorBoundReport> {
        self.check_input(u)?;
        let (f, terms) = self.inner.factor(rom)?;
        Ok(ErrorBoundReport::assemble(
            f,
            input_l2_norm(u)?,
            exponential_factor(&self.sys, u)?,
            self.sys.gamma,
            terms,
            BoundMethod::BilinearGeneral,
        ))
    }

    pub fn general_sweep(
        &self,
        roms: &[GalerkinRom],
        u: &InputSignal,
        exec: Execution,
    ) -> Vec<Result<ErrorBoundReport>> {
        map_indexed(roms.len(), exec, |i| self.general(&roms[i], u))
    }

    pub fn weighted(&mut self, rom: &GalerkinRom, u: &InputSignal) -> Result<ErrorBoundReport> {
        self.check_input(u)?;
        let (f, terms) = self.inner.weighted_factor(rom)?;
        Ok(ErrorBoundReport::assemble(
            f,
            input_l2_norm(u)?,
            exponential_factor(&self.sys, u)?,
            self.sys.gamma,
            terms,
            BoundMethod::BilinearWeighted,
        ))
    }
}

pub fn bilinear_general_bound(
    sys: &BilinearControlSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    opts: &GramianOptions,
) -> Result<ErrorBoundReport> {
    BilinearBoundContext::new(sys, opts)?.general(rom, u)
}

pub fn bilinear_weighted_bound(
    sys: &BilinearControlSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    opts: &GramianOptions,
) -> Result<ErrorBoundReport> {
    BilinearBoundContext::new(sys, opts)?.weighted(rom, u)
}
