//! Finite-difference heat equation on the unit square with boundary control.
//!
//! Interior nodes `(i, j)`, `0 ≤ i, j < k`, spacing `Δ = 1/(k+1)`, stored at
//! index `j·k + i` (x fastest). The left edge carries a Robin condition whose
//! coefficient is driven by the first input (or by noise), the bottom edge a
//! Dirichlet control, and the remaining edges homogeneous Dirichlet data.
//!
//! Discretization:
//! - `A = L/Δ² + (c/Δ²)·G` with the five-point Laplacian `L` and `G` the
//!   diagonal indicator of the left-edge layer `i = 0`;
//! - `N = (c/Δ)·G`;
//! - `B` has entries `1/Δ` on the bottom layer `j = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro, max_sym_eigenvalue, symmetrize, Mat};
use crate::model::{BilinearControlSystem, StochasticLinearSystem};
use crate::simulate::NoiseStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatMode {
    Stochastic,
    Bilinear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HeatBenchmarkSpec {
    pub k: usize,
    pub robin_coefficient: f64,
    pub mode: HeatMode,
    /// Scaling parameter attached to the bilinear system.
    pub gamma: f64,
}

impl HeatBenchmarkSpec {
    pub fn new(k: usize, mode: HeatMode) -> Self {
        Self {
            k,
            robin_coefficient: 0.8,
            mode,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum HeatSystem {
    Stochastic(StochasticLinearSystem),
    Bilinear(BilinearControlSystem),
}

impl HeatSystem {
    pub fn dim(&self) -> usize {
        match self {
            HeatSystem::Stochastic(s) => s.dim(),
            HeatSystem::Bilinear(s) => s.dim(),
        }
    }
}

/// Five-point Dirichlet Laplacian on the `k × k` interior grid, scaled by `1/Δ²`.
pub fn dirichlet_laplacian(k: usize) -> Mat {
    let n = k * k;
    let h = 1.0 / (k as f64 + 1.0);
    let s = 1.0 / (h * h);
    let mut a = Mat::zeros(n, n);
    for j in 0..k {
        for i in 0..k {
            let p = j * k + i;
            a[(p, p)] = -4.0 * s;
            if i > 0 {
                a[(p, p - 1)] = s;
            }
            if i + 1 < k {
                a[(p, p + 1)] = s;
            }
            if j > 0 {
                a[(p, p - k)] = s;
            }
            if j + 1 < k {
                a[(p, p + k)] = s;
            }
        }
    }
    a
}

struct Parts {
    a: Mat,
    n: Mat,
    b: Mat,
}

fn assemble(k: usize, c: f64) -> Parts {
    let n = k * k;
    let h = 1.0 / (k as f64 + 1.0);
    let mut a = dirichlet_laplacian(k);
    let mut nm = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, 1);
    for j in 0..k {
        let p = j * k;
        a[(p, p)] += c / (h * h);
        nm[(p, p)] = c / h;
    }
    for i in 0..k {
        b[(i, 0)] = 1.0 / h;
    }
    Parts { a, n: nm, b }
}

pub fn generate_heat_system(spec: &HeatBenchmarkSpec) -> Result<HeatSystem> {
    if spec.k < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid size k = {} must be at least 2",
            spec.k
        )));
    }
    let Parts { a, n, b } = assemble(spec.k, spec.robin_coefficient);
    let dim = spec.k * spec.k;
    Ok(match spec.mode {
        HeatMode::Stochastic => HeatSystem::Stochastic(StochasticLinearSystem::new(a, vec![n], b)?),
        HeatMode::Bilinear => {
            let mut b2 = Mat::zeros(dim, 2);
            b2.set_column(1, &b.column(0));
            HeatSystem::Bilinear(BilinearControlSystem::new(
                a,
                vec![n, Mat::zeros(dim, dim)],
                b2,
                spec.gamma,
            )?)
        }
    })
}

/// Convenience wrapper for the stochastic benchmark.
pub fn heat_stochastic(k: usize) -> Result<StochasticLinearSystem> {
    match generate_heat_system(&HeatBenchmarkSpec::new(k, HeatMode::Stochastic))? {
        HeatSystem::Stochastic(s) => Ok(s),
        HeatSystem::Bilinear(_) => unreachable!(),
    }
}

pub fn heat_bilinear(k: usize, gamma: f64) -> Result<BilinearControlSystem> {
    let spec = HeatBenchmarkSpec {
        gamma,
        ..HeatBenchmarkSpec::new(k, HeatMode::Bilinear)
    };
    match generate_heat_system(&spec)? {
        HeatSystem::Bilinear(s) => Ok(s),
        HeatSystem::Stochastic(_) => unreachable!(),
    }
}

/// Random mean-square asymptotically stable system with Gaussian entries.
///
/// `A` is shifted so that `2λ_max(sym A) + Σ‖Nᵢ‖_F² = −margin`, which makes
/// `X = I` a Lyapunov witness. `noise` scales the couplings relative to `A`.
pub fn random_stable_system(
    n: usize,
    q: usize,
    m: usize,
    noise: f64,
    margin: f64,
    seed: u64,
) -> Result<StochasticLinearSystem> {
    if n == 0 || !(margin > 0.0) {
        return Err(Error::InvalidArgument(
            "need n ≥ 1 and a positive margin".into(),
        ));
    }
    let mut rng = NoiseStream::new(seed, 0);
    let s = 1.0 / (n as f64).sqrt();
    let mut draw = |rows: usize, cols: usize, scale: f64| {
        Mat::from_fn(rows, cols, |_, _| scale * rng.standard_normal())
    };
    let mut a = draw(n, n, s);
    let nm: Vec<Mat> = (0..q).map(|_| draw(n, n, noise * s)).collect();
    let b = draw(n, m, 1.0);
    let spread: f64 = nm.iter().map(|x| fro(x).powi(2)).sum();
    let shift = max_sym_eigenvalue(&symmetrize(&a))? + 0.5 * (spread + margin);
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    StochasticLinearSystem::new(a, nm, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_real_eigenvalue;

    #[test]
    fn random_systems_have_identity_witness() {
        for seed in 0..5 {
            let sys = random_stable_system(7, 2, 2, 0.8, 0.3, seed).unwrap();
            let k_i = crate::stability::kron_operator_action(&sys.a, &sys.n, &Mat::identity(7, 7));
            assert!(max_sym_eigenvalue(&k_i).unwrap() < 0.0);
        }
        let a = random_stable_system(5, 1, 1, 0.5, 0.1, 3).unwrap();
        let b = random_stable_system(5, 1, 1, 0.5, 0.1, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k2_by_hand() {
        // Δ = 1/3: Laplacian entries 9, diagonal -36, Robin shift 0.8·9 on nodes 0 and 2.
        let sys = heat_stochastic(2).unwrap();
        let expected = Mat::from_row_slice(
            4,
            4,
            &[
                -36.0 + 7.2,
                9.0,
                9.0,
                0.0, //
                9.0,
                -36.0,
                0.0,
                9.0, //
                9.0,
                0.0,
                -36.0 + 7.2,
                9.0, //
                0.0,
                9.0,
                9.0,
                -36.0,
            ],
        );
        assert!((&sys.a - expected).amax() < 1e-12);
        let nn = &sys.n[0];
        assert!((nn[(0, 0)] - 2.4).abs() < 1e-12 && (nn[(2, 2)] - 2.4).abs() < 1e-12);
        assert_eq!(nn.iter().filter(|&&v| v != 0.0).count(), 2);
        assert_eq!(sys.b.as_slice(), &[3.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn drift_is_hurwitz() {
        for k in [2, 5, 9] {
            let sys = heat_stochastic(k).unwrap();
            assert!(max_real_eigenvalue(&sys.a).unwrap() < 0.0);
            assert!(max_sym_eigenvalue(&dirichlet_laplacian(k)).unwrap() < 0.0);
        }
    }

    #[test]
    fn bilinear_layout() {
        let sys = heat_bilinear(3, 1.0).unwrap();
        assert_eq!(sys.inputs(), 2);
        assert_eq!(sys.bilinear_channels(), vec![true, false]);
        assert_eq!(sys.b.column(0).iter().filter(|&&v| v != 0.0).count(), 0);
        assert_eq!(sys.b.column(1).iter().filter(|&&v| v != 0.0).count(), 3);
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(generate_heat_system(&HeatBenchmarkSpec::new(1, HeatMode::Stochastic)).is_err());
    }
}
