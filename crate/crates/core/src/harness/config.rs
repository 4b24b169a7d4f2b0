//! Study configuration read from TOML.
//!
//! ```toml
//! [domain]
//! kind = "graph-cylinder"
//! interval = [0.0, 1.0]
//! floor = 0.0
//! ceiling = 1.5
//! rho = 0.5
//!
//! [domain.graph]
//! family = "constant"
//! base = 1.0
//!
//! [dirichlet]
//! pieces = [{ piece = "side", side = "bottom" }]
//!
//! [coefficient]
//! kind = "identity"
//!
//! [perturbation]
//! family = "sine-bump"
//! epsilons = [0.1, 0.05, 0.025, 0.0125]
//!
//! [mesh]
//! h = 0.03
//!
//! [study]
//! r = [2.0, 3.0, "inf"]
//! target_r = 3.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{
    build_graph_map, build_normal_map, BoundaryGraph, DeformationMap, DirichletSpec, GraphFamily, ReferenceDomain,
};
use crate::operator::{CoefficientField, CoefficientSpec, JacobianRule};

/// An exponent in `[1, ∞]`; written as a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const INFINITY: Exponent = Exponent(f64::INFINITY);

    pub fn label(self) -> String {
        if self.0.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", self.0)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Exponent(x)),
            Raw::Int(x) => Ok(Exponent(x as f64)),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "∞") => Ok(Exponent::INFINITY),
            Raw::Text(t) => t
                .parse::<f64>()
                .map(Exponent)
                .map_err(|_| serde::de::Error::custom(format!("invalid exponent {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainConfig {
    GraphCylinder {
        interval: [f64; 2],
        floor: f64,
        ceiling: f64,
        rho: f64,
        graph: GraphFamily,
    },
    Disk {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
        /// Half-width `t` of the tubular neighbourhood.
        tube: f64,
        /// Band margin `ρ < 2t` of the normal map.
        rho: f64,
    },
}

/// Shape of the boundary displacement; the amplitude is `sign · ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PerturbationFamily {
    /// No displacement: every study quantity must vanish.
    None,
    SineBump,
    CosineMode { mode: f64 },
    CompactBump { center: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    #[serde(flatten)]
    pub family: PerturbationFamily,
    #[serde(default = "one")]
    pub sign: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub jacobian: JacobianRule,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            h: default_h(),
            jacobian: JacobianRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySettings {
    /// Truncation of the eigenvalue series; defaults to `min(n/4, 200)`.
    #[serde(default)]
    pub eigen_count: Option<usize>,
    #[serde(default = "default_rs")]
    pub r: Vec<Exponent>,
    /// Exponent whose rate `1/r` is asserted.
    #[serde(default = "default_target_r")]
    pub target_r: f64,
    #[serde(default = "minus_one")]
    pub xi: f64,
    #[serde(default)]
    pub seed: u64,
    /// Eigenvalue indices (zero-based) of the cluster tracked by projector and
    /// eigenfunction distances.
    #[serde(default = "default_cluster")]
    pub cluster: Vec<usize>,
    #[serde(default = "default_ps")]
    pub delta_p: Vec<Exponent>,
    #[serde(default = "default_tolerance")]
    pub rate_tolerance: f64,
    #[serde(default = "default_points")]
    pub riesz_points: usize,
    /// Forces the exploratory flag (slopes reported, not asserted).
    #[serde(default)]
    pub exploratory: bool,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            eigen_count: None,
            r: default_rs(),
            target_r: default_target_r(),
            xi: -1.0,
            seed: 0,
            cluster: default_cluster(),
            delta_p: default_ps(),
            rate_tolerance: default_tolerance(),
            riesz_points: default_points(),
            exploratory: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant { value: f64 },
    /// `amplitude · exp(−|x − center|²/(2 width²))`.
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
}

impl SourceSpec {
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match *self {
            SourceSpec::Constant { value } => value,
            SourceSpec::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                amplitude * (-d2 / (2.0 * width * width)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonConfig {
    #[serde(default = "default_source")]
    pub source: SourceSpec,
    /// `ε` in the two-dimensional exponent `1/2 − ε` of `|D|`.
    #[serde(default = "default_dim_eps")]
    pub dimension_epsilon: f64,
    /// Exponent `s` of `δ_s`.
    #[serde(default = "default_s")]
    pub s: f64,
    /// Exponent `r` of `|Ω △ Ω̃|^{1/r}`.
    #[serde(default = "default_target_r")]
    pub r: f64,
    /// Factor `c` inside `M_f(c|Ω △ Ω̃|)`.
    #[serde(default = "one")]
    pub mf_factor: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self {
            source: default_source(),
            dimension_epsilon: default_dim_eps(),
            s: default_s(),
            r: default_target_r(),
            mf_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_stem")]
    pub stem: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            stem: default_stem(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub dirichlet: DirichletSpec,
    #[serde(default = "default_coefficient")]
    pub coefficient: CoefficientSpec,
    pub perturbation: PerturbationConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub study: StudySettings,
    #[serde(default)]
    pub poisson: PoissonConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn default_h() -> f64 {
    0.05
}
fn default_rs() -> Vec<Exponent> {
    vec![Exponent(2.0), Exponent(3.0), Exponent::INFINITY]
}
fn default_ps() -> Vec<Exponent> {
    vec![Exponent(2.0), Exponent(3.0)]
}
fn default_target_r() -> f64 {
    3.0
}
fn default_cluster() -> Vec<usize> {
    vec![0]
}
fn default_tolerance() -> f64 {
    0.15
}
fn default_points() -> usize {
    64
}
fn default_source() -> SourceSpec {
    SourceSpec::Constant { value: 1.0 }
}
fn default_dim_eps() -> f64 {
    0.05
}
fn default_s() -> f64 {
    2.1
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_stem() -> String {
    "study".to_string()
}
fn default_coefficient() -> CoefficientSpec {
    CoefficientSpec::Identity
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: StudyConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let eps = &self.perturbation.epsilons;
        if eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config("epsilons must be positive".into()));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilons must be strictly decreasing".into()));
        }
        if !(self.mesh.h > 0.0) {
            return Err(Error::Config("mesh.h must be positive".into()));
        }
        if self.study.r.iter().any(|r| !(r.0 >= 1.0)) {
            return Err(Error::Config("series exponents r must be at least 1".into()));
        }
        if self.study.delta_p.iter().any(|p| !(p.0 >= 2.0)) || !(self.poisson.s >= 2.0) {
            return Err(Error::Config("vicinity exponents p and s must be at least 2".into()));
        }
        if !self.exploratory()? && !(self.study.target_r > 2.0) {
            return Err(Error::Config(format!(
                "target_r = {} must exceed 2 on the smooth track",
                self.study.target_r
            )));
        }
        if !(self.study.rate_tolerance >= 0.0) {
            return Err(Error::Config("rate_tolerance must be nonnegative".into()));
        }
        if self.study.cluster.is_empty() {
            return Err(Error::Config("cluster must be nonempty".into()));
        }
        if self.study.riesz_points < 4 || !self.study.riesz_points.is_multiple_of(2) {
            return Err(Error::Config("riesz_points must be even and at least 4".into()));
        }
        self.domain()?;
        self.coefficient.build()?;
        Ok(())
    }

    /// Rates are asserted only on the smooth track: a Lipschitz coefficient
    /// (every built-in perturbation family is C^{1,1}).
    pub fn exploratory(&self) -> Result<bool> {
        Ok(self.study.exploratory || !self.coefficient.build()?.is_lipschitz())
    }

    pub fn domain(&self) -> Result<ReferenceDomain> {
        match &self.domain {
            DomainConfig::GraphCylinder {
                interval,
                floor,
                ceiling,
                rho,
                graph,
            } => {
                let g = graph.build((interval[0], interval[1]));
                ReferenceDomain::graph_cylinder(
                    (interval[0], interval[1]),
                    *floor,
                    *ceiling,
                    *rho,
                    g,
                    self.dirichlet.clone(),
                )
            }
            DomainConfig::Disk {
                center, radius, tube, ..
            } => ReferenceDomain::disk(*center, *radius, *tube, self.dirichlet.clone()),
        }
    }

    pub fn coefficient_field(&self) -> Result<CoefficientField> {
        self.coefficient.build()
    }

    /// Displacement profile of amplitude `sign·ε` over `interval`.
    pub fn profile(&self, eps: f64, interval: (f64, f64)) -> BoundaryGraph {
        let a = self.perturbation.sign * eps;
        let family = match self.perturbation.family {
            PerturbationFamily::None => GraphFamily::Constant { base: 0.0 },
            PerturbationFamily::SineBump => GraphFamily::SineBump { base: 0.0, amplitude: a },
            PerturbationFamily::CosineMode { mode } => GraphFamily::CosineMode {
                base: 0.0,
                amplitude: a,
                mode,
            },
            PerturbationFamily::CompactBump { center, width } => GraphFamily::CompactBump {
                base: 0.0,
                amplitude: a,
                center,
                width,
            },
        };
        family.build(interval)
    }

    /// The perturbed map `φ̃` for amplitude `ε` (the unperturbed map is the identity).
    pub fn perturbed_map(&self, domain: &ReferenceDomain, eps: f64) -> Result<DeformationMap> {
        match &self.domain {
            DomainConfig::GraphCylinder {
                interval,
                floor,
                ceiling,
                rho,
                graph,
            } => {
                let iv = (interval[0], interval[1]);
                let g1 = graph.build(iv);
                let g2 = g1.plus(&self.profile(eps, iv));
                build_graph_map(&g1, &g2, *floor, *ceiling, *rho)
            }
            DomainConfig::Disk { rho, .. } => {
                let g = self.profile(eps, (0.0, std::f64::consts::TAU));
                build_normal_map(domain, &g, *rho)
            }
        }
    }

    pub fn jacobian_rule(&self) -> JacobianRule {
        self.mesh.jacobian
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[domain]
kind = "graph-cylinder"
interval = [0.0, 1.0]
floor = 0.0
ceiling = 1.5
rho = 0.5

[domain.graph]
family = "constant"
base = 1.0

[dirichlet]
pieces = [{ piece = "side", side = "bottom" }]

[perturbation]
family = "sine-bump"
epsilons = [0.1, 0.05, 0.025, 0.0125]

[mesh]
h = 0.1

[study]
r = [2, 3.0, "inf"]
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = StudyConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.study.r, vec![Exponent(2.0), Exponent(3.0), Exponent::INFINITY]);
        assert_eq!(c.coefficient, CoefficientSpec::Identity);
        assert_eq!(c.perturbation.family, PerturbationFamily::SineBump);
        let again = StudyConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
        let d = c.domain().unwrap();
        let phi = c.perturbed_map(&d, 0.1).unwrap();
        let y = phi.apply([0.5, 1.0]);
        assert!((y[1] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_eps = SAMPLE.replace("[0.1, 0.05, 0.025, 0.0125]", "[0.05, 0.1]");
        assert!(matches!(StudyConfig::from_toml(&bad_eps), Err(Error::Config(_))));
        let bad_r = SAMPLE.replace("r = [2, 3.0, \"inf\"]", "target_r = 2.0");
        assert!(matches!(StudyConfig::from_toml(&bad_r), Err(Error::Config(_))));
        let unknown = SAMPLE.replace("[mesh]", "[mesh]\nsize = 3");
        assert!(matches!(StudyConfig::from_toml(&unknown), Err(Error::Config(_))));
    }
}
