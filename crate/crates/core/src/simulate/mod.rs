//! Trajectory simulation used to validate the error bounds.

mod dopri;
mod euler_maruyama;
mod moments;
mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input::InputSignal;
use crate::linalg::Mat;
use crate::model::{BilinearControlSystem, GalerkinRom};
use crate::parallel::Execution;

pub use dopri::{integrate_dense, DopriOptions};
pub use euler_maruyama::euler_maruyama_paired;
pub use moments::{
    mixed_gramian_ode_oracle, moment_ode, second_moment_monte_carlo, MomentSolution,
    DEFAULT_RK_STEPS,
};
pub use rng::NoiseStream;

/// Number of dense-output points on the bilinear error curve.
pub const DENSE_GRID_POINTS: usize = 1024;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationConfig {
    pub step_size: f64,
    pub horizon: f64,
    pub samples: usize,
    pub seed: u64,
    pub rk_rel_tol: f64,
    pub rk_abs_tol: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0 / 256.0,
            horizon: 1.0,
            samples: 100_000,
            seed: 0,
            rk_rel_tol: 1e-6,
            rk_abs_tol: 1e-9,
            execution: Execution::default(),
        }
    }
}

impl SimulationConfig {
    pub fn bilinear_default() -> Self {
        Self {
            horizon: 10.0,
            ..Self::default()
        }
    }

    /// Step count `round(T/h)` and the effective step `T/steps`.
    pub fn grid(&self) -> Result<(usize, f64)> {
        if !(self.step_size > 0.0 && self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size {} and horizon {} must be positive",
                self.step_size, self.horizon
            )));
        }
        let steps = ((self.horizon / self.step_size).round() as usize).max(1);
        Ok((steps, self.horizon / steps as f64))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanErrorCurve {
    pub time_grid: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub stderr: Vec<f64>,
    pub sup_value: f64,
    /// Effective time step (stochastic) or zero (adaptive).
    pub step: f64,
}

impl MeanErrorCurve {
    pub fn new(time_grid: Vec<f64>, mean_error: Vec<f64>, stderr: Vec<f64>, step: f64) -> Self {
        let sup_value = mean_error.iter().copied().fold(0.0, f64::max);
        Self {
            time_grid,
            mean_error,
            stderr,
            sup_value,
            step,
        }
    }

    /// Index of the supremum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.mean_error.iter().enumerate() {
            if v > self.mean_error[best] {
                best = i;
            }
        }
        best
    }
}

/// Integrates the bilinear system and its reduced model jointly and returns
/// `‖z(t) − V ẑ(t)‖₂` on a uniform grid.
///
/// The reduced model is taken to come from the rescaled system `(A, N/γ, B/γ)`,
/// so it is driven by `γ·u`.
pub fn bilinear_simulate_paired(
    sys: &BilinearControlSystem,
    rom: &GalerkinRom,
    u: &InputSignal,
    cfg: &SimulationConfig,
) -> Result<MeanErrorCurve> {
    let n = sys.dim();
    let r = rom.order();
    let m = sys.inputs();
    if rom.source_dim != n || rom.reduced_n.len() != m || rom.reduced_b.ncols() != m {
        return Err(Error::Dimension(
            "reduced model does not match the system".into(),
        ));
    }
    if u.dim() != m {
        return Err(Error::Dimension(format!(
            "input has {} channels, system has {m}",
            u.dim()
        )));
    }
    if !(cfg.horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    let g = sys.gamma;
    let t_end = cfg.horizon;
    let grid: Vec<f64> = (0..DENSE_GRID_POINTS)
        .map(|i| t_end * i as f64 / (DENSE_GRID_POINTS - 1) as f64)
        .collect();
    let mut ubuf = vec![0.0; m];
    let mut failed: Option<f64> = None;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        u.eval_into(t, &mut ubuf);
        if ubuf.iter().any(|v| !v.is_finite()) {
            failed.get_or_insert(t);
            dy.fill(0.0);
            return;
        }
        let z = nalgebra::DVectorView::from_slice(&y[..n], n);
        let zh = nalgebra::DVectorView::from_slice(&y[n..], r);
        let mut dz = &sys.a * z;
        let mut dzh = &rom.reduced_a * zh;
        for (i, &ui) in ubuf.iter().enumerate() {
            if ui != 0.0 {
                dz += (&sys.n[i] * z) * ui + sys.b.column(i) * ui;
                dzh += (&rom.reduced_n[i] * zh) * (g * ui) + rom.reduced_b.column(i) * (g * ui);
            }
        }
        dy[..n].copy_from_slice(dz.as_slice());
        dy[n..].copy_from_slice(dzh.as_slice());
    };
    let opts = DopriOptions {
        rtol: cfg.rk_rel_tol,
        atol: cfg.rk_abs_tol,
        ..DopriOptions::default()
    };
    let ys = integrate_dense(rhs, &vec![0.0; n + r], 0.0, t_end, &grid, &opts)?;
    if let Some(t) = failed {
        return Err(Error::InputEvaluation { t });
    }
    let err: Vec<f64> = ys
        .iter()
        .map(|y| {
            let z = Mat::from_column_slice(n, 1, &y[..n]);
            let zh = Mat::from_column_slice(r, 1, &y[n..]);
            (z - &rom.v * zh).norm()
        })
        .collect();
    let zeros = vec![0.0; err.len()];
    Ok(MeanErrorCurve::new(grid, err, zeros, 0.0))
}
