//! Boundary graphs: callable profiles with a dense sample cache used for
//! band and Lipschitz certification.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of cached samples used for sampling-based certification.
pub const SAMPLE_COUNT: usize = 4096;

/// Parametric families understood by configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum GraphFamily {
    /// `base`.
    Constant { base: f64 },
    /// `base + amplitude · sin(π (x − x₀)/(x₁ − x₀))` over the parameter interval.
    SineBump { base: f64, amplitude: f64 },
    /// `base + amplitude · cos(mode · x)`.
    CosineMode { base: f64, amplitude: f64, mode: f64 },
    /// `base + amplitude · (1 − ((x − center)/width)²)²` inside the support, `base` outside.
    CompactBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

impl GraphFamily {
    pub fn build(&self, interval: (f64, f64)) -> BoundaryGraph {
        match *self {
            GraphFamily::Constant { base } => {
                BoundaryGraph::new(format!("constant({base})"), interval, move |_| base, |_| 0.0)
            }
            GraphFamily::SineBump { base, amplitude } => {
                let (x0, x1) = interval;
                let k = std::f64::consts::PI / (x1 - x0);
                BoundaryGraph::new(
                    format!("sine-bump({base}, {amplitude})"),
                    interval,
                    move |x| base + amplitude * (k * (x - x0)).sin(),
                    move |x| amplitude * k * (k * (x - x0)).cos(),
                )
            }
            GraphFamily::CosineMode {
                base,
                amplitude,
                mode,
            } => BoundaryGraph::new(
                format!("cosine-mode({base}, {amplitude}, {mode})"),
                interval,
                move |x| base + amplitude * (mode * x).cos(),
                move |x| -amplitude * mode * (mode * x).sin(),
            ),
            GraphFamily::CompactBump {
                base,
                amplitude,
                center,
                width,
            } => BoundaryGraph::new(
                format!("compact-bump({base}, {amplitude}, {center}, {width})"),
                interval,
                move |x| {
                    let t = (x - center) / width;
                    if t.abs() < 1.0 {
                        base + amplitude * (1.0 - t * t).powi(2)
                    } else {
                        base
                    }
                },
                move |x| {
                    let t = (x - center) / width;
                    if t.abs() < 1.0 {
                        -4.0 * amplitude * t * (1.0 - t * t) / width
                    } else {
                        0.0
                    }
                },
            ),
        }
    }
}

/// A Lipschitz function on a closed parameter interval, with its derivative.
#[derive(Clone)]
pub struct BoundaryGraph {
    name: String,
    interval: (f64, f64),
    value: Profile,
    derivative: Profile,
    samples: Arc<Vec<f64>>,
}

impl fmt::Debug for BoundaryGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryGraph")
            .field("name", &self.name)
            .field("interval", &self.interval)
            .finish()
    }
}

impl BoundaryGraph {
    pub fn new(
        name: impl Into<String>,
        interval: (f64, f64),
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let samples = (0..SAMPLE_COUNT)
            .map(|i| value(sample_point(interval, i)))
            .collect();
        Self {
            name: name.into(),
            interval,
            value: Arc::new(value),
            derivative: Arc::new(derivative),
            samples: Arc::new(samples),
        }
    }

    pub fn constant(c: f64, interval: (f64, f64)) -> Self {
        GraphFamily::Constant { base: c }.build(interval)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    /// Pointwise sum `self + other`, e.g. a reference graph plus a perturbation.
    pub fn plus(&self, other: &BoundaryGraph) -> BoundaryGraph {
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        BoundaryGraph::new(
            format!("{} + {}", self.name, other.name),
            self.interval,
            move |x| a.eval(x) + b.eval(x),
            move |x| da.derivative(x) + db.derivative(x),
        )
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_abscissa(&self, i: usize) -> f64 {
        sample_point(self.interval, i)
    }

    pub fn sampled_min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sampled_max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest difference quotient over consecutive cached samples.
    pub fn lipschitz_estimate(&self) -> f64 {
        let dx = (self.interval.1 - self.interval.0) / (SAMPLE_COUNT - 1) as f64;
        self.samples
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dx).abs())
            .fold(0.0, f64::max)
    }

    /// Returns the first sampled abscissa where the graph leaves `(lo, hi)`.
    pub fn band_violation(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > lo && v < hi))
            .map(|(i, &v)| (self.sample_abscissa(i), v))
    }
}

fn sample_point(interval: (f64, f64), i: usize) -> f64 {
    interval.0 + (interval.1 - interval.0) * i as f64 / (SAMPLE_COUNT - 1) as f64
}
