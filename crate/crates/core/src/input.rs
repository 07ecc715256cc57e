//! Deterministic input signals and their L² norms.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed forms available by name.
pub const REGISTRY: &[&str] = &["damped-sine", "unit", "zero"];

fn registry_eval(name: &str, t: f64) -> Option<f64> {
    match name {
        "damped-sine" => Some((-0.5 * t).exp() * (10.0 * t).sin()),
        "unit" => Some(1.0),
        "zero" => Some(0.0),
        _ => None,
    }
}

/// One scalar input channel.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Signal {
    /// Registry entry multiplied by `scale`.
    Named {
        name: String,
        #[serde(default = "one")]
        scale: f64,
    },
    Constant {
        value: f64,
    },
    /// Piecewise-linear interpolation; held constant outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
    #[serde(skip)]
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

fn one() -> f64 {
    1.0
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Named { name, scale } => write!(f, "Named({name} x {scale})"),
            Signal::Constant { value } => write!(f, "Constant({value})"),
            Signal::Table { times, .. } => write!(f, "Table({} knots)", times.len()),
            Signal::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Signal {
    pub fn named(name: &str) -> Result<Self> {
        if registry_eval(name, 0.0).is_none() {
            return Err(Error::InvalidArgument(format!(
                "unknown signal '{name}' (known: {})",
                REGISTRY.join(", ")
            )));
        }
        Ok(Signal::Named {
            name: name.to_string(),
            scale: 1.0,
        })
    }

    pub fn table(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "signal table needs equally many (>= 1) times and values".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "signal table times must increase".into(),
            ));
        }
        Ok(Signal::Table { times, values })
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Signal::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Signal::Named { name, scale } => scale * registry_eval(name, t).unwrap_or(f64::NAN),
            Signal::Constant { value } => *value,
            Signal::Table { times, values } => interpolate(times, values, t),
            Signal::Custom(f) => f(t),
        }
    }

    fn scaled(&self, c: f64) -> Signal {
        match self {
            Signal::Named { name, scale } => Signal::Named {
                name: name.clone(),
                scale: scale * c,
            },
            Signal::Constant { value } => Signal::Constant { value: value * c },
            Signal::Table { times, values } => Signal::Table {
                times: times.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
            Signal::Custom(f) => {
                let f = Arc::clone(f);
                Signal::Custom(Arc::new(move |t| c * f(t)))
            }
        }
    }
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t <= times[0] {
        return values[0];
    }
    let last = times.len() - 1;
    if t >= times[last] {
        return values[last];
    }
    let k = times.partition_point(|&s| s <= t);
    let (t0, t1) = (times[k - 1], times[k]);
    let w = (t - t0) / (t1 - t0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

/// Vector-valued input on `[0, horizon]`, one [`Signal`] per channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputSignal {
    pub channels: Vec<Signal>,
    pub horizon: f64,
}

impl InputSignal {
    pub fn new(channels: Vec<Signal>, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if channels.is_empty() {
            return Err(Error::InvalidArgument(
                "input needs at least one channel".into(),
            ));
        }
        Ok(Self { channels, horizon })
    }

    /// The same scalar signal on `m` channels.
    pub fn tied(signal: Signal, m: usize, horizon: f64) -> Result<Self> {
        Self::new(vec![signal; m], horizon)
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.channels) {
            *o = s.eval(t);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        self.eval_into(t, &mut v);
        v
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            channels: self.channels.iter().map(|s| s.scaled(c)).collect(),
            horizon: self.horizon,
        }
    }

    /// Zeroes every channel whose mask entry is false.
    pub fn restricted(&self, keep: &[bool]) -> Self {
        Self {
            channels: self
                .channels
                .iter()
                .zip(keep.iter().chain(std::iter::repeat(&false)))
                .map(|(s, &k)| {
                    if k {
                        s.clone()
                    } else {
                        Signal::Constant { value: 0.0 }
                    }
                })
                .collect(),
            horizon: self.horizon,
        }
    }
}

const MIN_INTERVALS: usize = 4096;
const MAX_INTERVALS: usize = 1 << 24;
const QUAD_RTOL: f64 = 1e-8;

fn simpson_sq(u: &InputSignal, intervals: usize, buf: &mut [f64]) -> Result<f64> {
    let h = u.horizon / intervals as f64;
    let mut acc = 0.0;
    for k in 0..=intervals {
        let t = if k == intervals {
            u.horizon
        } else {
            k as f64 * h
        };
        u.eval_into(t, buf);
        let mut sq = 0.0;
        for &v in buf.iter() {
            if !v.is_finite() {
                return Err(Error::InputEvaluation { t });
            }
            sq += v * v;
        }
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * sq;
    }
    Ok(acc * h / 3.0)
}

/// `(∫₀ᵀ ‖u(s)‖² ds)^{1/2}` by composite Simpson with grid doubling.
pub fn input_l2_norm(u: &InputSignal) -> Result<f64> {
    let mut buf = vec![0.0; u.dim()];
    let mut intervals = MIN_INTERVALS;
    let mut prev = simpson_sq(u, intervals, &mut buf)?;
    loop {
        intervals *= 2;
        let cur = simpson_sq(u, intervals, &mut buf)?;
        if (cur - prev).abs() <= QUAD_RTOL * cur.abs() || cur == prev {
            return Ok(cur.max(0.0).sqrt());
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                tolerance: QUAD_RTOL,
                previous: prev,
                current: cur,
            });
        }
        prev = cur;
    }
}
