//! JSON interchange format for systems and reduced models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{BilinearControlSystem, GalerkinRom, ReductionMethod, StochasticLinearSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Stochastic,
    Bilinear,
}

/// Row-major nested arrays.
pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &Mat) -> Rows {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(name: &str, rows: &Rows, nrows: usize, ncols: usize) -> Result<Mat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{name} must be {nrows}x{ncols}")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Projection {
    #[serde(rename = "V")]
    pub v: Rows,
    #[serde(rename = "W")]
    pub w: Rows,
    pub method: ReductionMethod,
    pub r: usize,
    #[serde(rename = "sourceDim")]
    pub source_dim: usize,
    #[serde(
        rename = "parentSha256",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub parent_sha256: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemFile {
    pub kind: SystemKind,
    pub n: usize,
    pub m: usize,
    pub q: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "N")]
    pub n_mats: Vec<Rows>,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Projection>,
}

/// A parsed system of either kind.
#[derive(Clone, Debug)]
pub enum AnySystem {
    Stochastic(StochasticLinearSystem),
    Bilinear(BilinearControlSystem),
}

impl AnySystem {
    /// The data whose Gramians drive reduction: the system itself or its rescaled form.
    pub fn reduction_view(&self) -> StochasticLinearSystem {
        match self {
            AnySystem::Stochastic(s) => s.clone(),
            AnySystem::Bilinear(s) => s.scaled(),
        }
    }
}

impl SystemFile {
    fn build(kind: SystemKind, a: &Mat, n: &[Mat], b: &Mat, gamma: Option<f64>) -> Self {
        Self {
            kind,
            n: a.nrows(),
            m: b.ncols(),
            q: n.len(),
            a: to_rows(a),
            n_mats: n.iter().map(to_rows).collect(),
            b: to_rows(b),
            gamma,
            projection: None,
        }
    }

    pub fn from_stochastic(sys: &StochasticLinearSystem) -> Self {
        Self::build(SystemKind::Stochastic, &sys.a, &sys.n, &sys.b, None)
    }

    pub fn from_bilinear(sys: &BilinearControlSystem) -> Self {
        Self::build(
            SystemKind::Bilinear,
            &sys.a,
            &sys.n,
            &sys.b,
            Some(sys.gamma),
        )
    }

    pub fn from_any(sys: &AnySystem) -> Self {
        match sys {
            AnySystem::Stochastic(s) => Self::from_stochastic(s),
            AnySystem::Bilinear(s) => Self::from_bilinear(s),
        }
    }

    /// Reduced model file; bilinear parents keep their kind and scaling.
    pub fn from_rom(rom: &GalerkinRom, parent: &AnySystem, parent_sha256: Option<String>) -> Self {
        let (kind, gamma) = match parent {
            AnySystem::Stochastic(_) => (SystemKind::Stochastic, None),
            AnySystem::Bilinear(s) => (SystemKind::Bilinear, Some(s.gamma)),
        };
        let mut f = Self::build(kind, &rom.reduced_a, &rom.reduced_n, &rom.reduced_b, gamma);
        if let Some(g) = gamma {
            // Reduced matrices come from the rescaled data; store them unscaled.
            f.n_mats = rom.reduced_n.iter().map(|m| to_rows(&(m * g))).collect();
            f.b = to_rows(&(&rom.reduced_b * g));
        }
        f.projection = Some(Projection {
            v: to_rows(&rom.v),
            w: to_rows(&rom.w),
            method: rom.method,
            r: rom.order(),
            source_dim: rom.source_dim,
            parent_sha256,
        });
        f
    }

    pub fn to_system(&self) -> Result<AnySystem> {
        let n = self.n;
        let a = from_rows("A", &self.a, n, n)?;
        if self.n_mats.len() != self.q {
            return Err(Error::Format(format!(
                "q = {} but {} N matrices",
                self.q,
                self.n_mats.len()
            )));
        }
        let nm = self
            .n_mats
            .iter()
            .enumerate()
            .map(|(i, r)| from_rows(&format!("N[{i}]"), r, n, n))
            .collect::<Result<Vec<_>>>()?;
        let b = from_rows("B", &self.b, n, self.m)?;
        match self.kind {
            SystemKind::Stochastic => Ok(AnySystem::Stochastic(StochasticLinearSystem::new(
                a, nm, b,
            )?)),
            SystemKind::Bilinear => {
                let gamma = self.gamma.unwrap_or(1.0);
                Ok(AnySystem::Bilinear(BilinearControlSystem::new(
                    a, nm, b, gamma,
                )?))
            }
        }
    }

    /// Rebuilds the reduced model stored with a `projection` block.
    pub fn to_rom(&self) -> Result<GalerkinRom> {
        let p = self
            .projection
            .as_ref()
            .ok_or_else(|| Error::Format("file has no projection block".into()))?;
        let sys = self.to_system()?;
        let data = sys.reduction_view();
        Ok(GalerkinRom {
            v: from_rows("V", &p.v, p.source_dim, p.r)?,
            w: from_rows("W", &p.w, p.source_dim, p.r)?,
            reduced_a: data.a,
            reduced_n: data.n,
            reduced_b: data.b,
            method: p.method,
            source_dim: p.source_dim,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
