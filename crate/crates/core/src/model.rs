//! System and reduced-model types.

use crate::error::{Error, Result};
use crate::linalg::{fro, Mat};

/// Itô system `dx = (Ax + Bu)dt + Σ Nᵢ x dWᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticLinearSystem {
    pub a: Mat,
    pub n: Vec<Mat>,
    pub b: Mat,
}

/// Bilinear system `ż = Az + Σ Nᵢ z uᵢ + Bu` with scaling parameter `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct BilinearControlSystem {
    pub a: Mat,
    pub n: Vec<Mat>,
    pub b: Mat,
    pub gamma: f64,
}

/// Structural checks shared by both system kinds.
pub trait Validate {
    fn violations(&self) -> Vec<String>;
}

/// Lists every dimensional or non-finite-entry problem; empty means valid.
pub fn validate_system<S: Validate + ?Sized>(sys: &S) -> Vec<String> {
    sys.violations()
}

fn check_matrix(name: &str, m: &Mat, rows: usize, cols: usize, out: &mut Vec<String>) {
    if m.shape() != (rows, cols) {
        out.push(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        ));
    }
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                out.push(format!("{name}[{i},{j}] is not finite ({})", m[(i, j)]));
            }
        }
    }
}

fn common_violations(a: &Mat, n: &[Mat], b: &Mat) -> Vec<String> {
    let mut out = Vec::new();
    let dim = a.nrows();
    if dim == 0 {
        out.push("state dimension n must be at least 1".to_string());
    }
    check_matrix("A", a, dim, dim, &mut out);
    for (i, ni) in n.iter().enumerate() {
        check_matrix(&format!("N[{i}]"), ni, dim, dim, &mut out);
    }
    if b.ncols() == 0 {
        out.push("input dimension m must be at least 1".to_string());
    }
    if b.nrows() != dim {
        out.push(format!("B has {} rows, expected {dim}", b.nrows()));
    }
    check_matrix("B", b, b.nrows(), b.ncols(), &mut out);
    out
}

impl Validate for StochasticLinearSystem {
    fn violations(&self) -> Vec<String> {
        common_violations(&self.a, &self.n, &self.b)
    }
}

impl Validate for BilinearControlSystem {
    fn violations(&self) -> Vec<String> {
        let mut out = common_violations(&self.a, &self.n, &self.b);
        if self.n.len() != self.b.ncols() {
            out.push(format!(
                "{} bilinear matrices for {} input channels",
                self.n.len(),
                self.b.ncols()
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            out.push(format!(
                "gamma must be positive and finite, got {}",
                self.gamma
            ));
        }
        out
    }
}

fn checked<S: Validate>(sys: S) -> Result<S> {
    let v = sys.violations();
    if v.is_empty() {
        Ok(sys)
    } else {
        Err(Error::Dimension(v.join("; ")))
    }
}

impl StochasticLinearSystem {
    pub fn new(a: Mat, n: Vec<Mat>, b: Mat) -> Result<Self> {
        checked(Self { a, n, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn noise_channels(&self) -> usize {
        self.n.len()
    }
}

impl BilinearControlSystem {
    pub fn new(a: Mat, n: Vec<Mat>, b: Mat, gamma: f64) -> Result<Self> {
        checked(Self { a, n, b, gamma })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// The rescaled system `(A, N/γ, B/γ)` whose Gramians enter the bilinear bounds.
    pub fn scaled(&self) -> StochasticLinearSystem {
        let g = self.gamma;
        StochasticLinearSystem {
            a: self.a.clone(),
            n: self.n.iter().map(|m| m / g).collect(),
            b: &self.b / g,
        }
    }

    /// Channels whose bilinear coefficient is nonzero.
    pub fn bilinear_channels(&self) -> Vec<bool> {
        self.n.iter().map(|m| m.iter().any(|&v| v != 0.0)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ReductionMethod {
    #[serde(rename = "OS")]
    Os,
    #[serde(rename = "BT")]
    Bt,
}

impl std::fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReductionMethod::Os => "OS",
            ReductionMethod::Bt => "BT",
        })
    }
}

/// Petrov–Galerkin reduced model `Â = WᵀAV`, `N̂ᵢ = WᵀNᵢV`, `B̂ = WᵀB`.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinRom {
    pub v: Mat,
    pub w: Mat,
    pub reduced_a: Mat,
    pub reduced_n: Vec<Mat>,
    pub reduced_b: Mat,
    pub method: ReductionMethod,
    pub source_dim: usize,
}

impl GalerkinRom {
    pub fn project(
        a: &Mat,
        n: &[Mat],
        b: &Mat,
        v: Mat,
        w: Mat,
        method: ReductionMethod,
    ) -> Result<Self> {
        if v.nrows() != a.nrows() || w.shape() != v.shape() {
            return Err(Error::Dimension(format!(
                "projection bases {}x{} / {}x{} do not fit n = {}",
                v.nrows(),
                v.ncols(),
                w.nrows(),
                w.ncols(),
                a.nrows()
            )));
        }
        let wt = w.transpose();
        Ok(Self {
            reduced_a: &wt * a * &v,
            reduced_n: n.iter().map(|ni| &wt * ni * &v).collect(),
            reduced_b: &wt * b,
            source_dim: a.nrows(),
            v,
            w,
            method,
        })
    }

    /// Galerkin projection onto an orthonormal basis.
    pub fn orthogonal(sys: &StochasticLinearSystem, v: Mat) -> Result<Self> {
        let w = v.clone();
        Self::project(&sys.a, &sys.n, &sys.b, v, w, ReductionMethod::Os)
    }

    pub fn order(&self) -> usize {
        self.v.ncols()
    }

    pub fn as_system(&self) -> StochasticLinearSystem {
        StochasticLinearSystem {
            a: self.reduced_a.clone(),
            n: self.reduced_n.clone(),
            b: self.reduced_b.clone(),
        }
    }

    /// Largest deviation of the stored reduced matrices from `WᵀAV` etc.
    pub fn projection_defect(&self, a: &Mat, n: &[Mat], b: &Mat) -> f64 {
        let wt = self.w.transpose();
        let mut d = fro(&(&self.reduced_a - &wt * a * &self.v));
        for (ni, nh) in n.iter().zip(&self.reduced_n) {
            d = d.max(fro(&(nh - &wt * ni * &self.v)));
        }
        d.max(fro(&(&self.reduced_b - &wt * b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_system() -> StochasticLinearSystem {
        StochasticLinearSystem::new(
            Mat::from_row_slice(2, 2, &[0.0, -10.0, 1.0, -10.0]),
            vec![],
            Mat::from_row_slice(2, 1, &[0.0, 10.0]),
        )
        .unwrap()
    }

    #[test]
    fn valid_system_has_no_violations() {
        assert!(validate_system(&example_system()).is_empty());
    }

    #[test]
    fn wrong_b_rows_reported() {
        let mut sys = example_system();
        sys.b = Mat::zeros(3, 1);
        let v = validate_system(&sys);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("B has 3 rows"));
    }

    #[test]
    fn nan_entry_reported() {
        let mut sys = example_system();
        sys.a[(1, 0)] = f64::NAN;
        let v = validate_system(&sys);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("A[1,0]"));
    }

    #[test]
    fn bilinear_channel_count_and_gamma() {
        let sys = BilinearControlSystem {
            a: -Mat::identity(2, 2),
            n: vec![Mat::identity(2, 2)],
            b: Mat::zeros(2, 2),
            gamma: 0.0,
        };
        assert_eq!(validate_system(&sys).len(), 2);
    }

    #[test]
    fn projection_matches_formula() {
        let sys = example_system();
        let v = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        let rom = GalerkinRom::orthogonal(&sys, v).unwrap();
        assert_eq!(rom.reduced_a[(0, 0)], 0.0);
        assert_eq!(rom.reduced_b[(0, 0)], 0.0);
        assert_eq!(rom.projection_defect(&sys.a, &sys.n, &sys.b), 0.0);
    }
}
