//! Run configuration: domain, physical parameters, boundary profiles and
//! solver settings, read from a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{KgmError, Result};
use crate::functional::{FunctionalContext, NonlinearityModel, PhysicalParams, Regime};
use crate::grid::{BoundaryData, BoundaryKind, Domain};
use crate::optimize::{DescentConfig, MountainPassConfig, MultiplicityConfig};

/// Box `[0, L_1] x ... x [0, L_dim]` with `counts[a]` interior nodes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub counts: Vec<usize>,
}

impl DomainSpec {
    pub fn cube(dim: usize, length: f64, n: usize) -> Self {
        Self { dim, lengths: vec![length; dim], counts: vec![n; dim] }
    }

    pub fn build(&self) -> Result<Domain> {
        Domain::new(self.dim, &self.lengths, &self.counts)
    }

    /// Same box with `n` interior nodes on every axis.
    pub fn with_grid(&self, n: usize) -> Self {
        Self { counts: vec![n; self.dim], ..self.clone() }
    }
}

/// Named boundary profile, sampled at the boundary node coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundarySpec {
    Constant {
        value: f64,
    },
    /// `offset + slope · x`
    Linear {
        offset: f64,
        slope: Vec<f64>,
    },
    /// `amplitude · sin(2π Σ_a k_a x_a / L_a + phase)`
    Sinusoidal {
        amplitude: f64,
        wavenumbers: Vec<f64>,
        #[serde(default)]
        phase: f64,
    },
    /// one value per boundary node, in the domain's boundary order
    Tabulated {
        values: Vec<f64>,
    },
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::Constant { value: 0.0 }
    }
}

impl BoundarySpec {
    pub fn constant(value: f64) -> Self {
        BoundarySpec::Constant { value }
    }

    pub fn build(&self, d: &Domain, kind: BoundaryKind) -> Result<BoundaryData> {
        let dim = d.dim();
        match self {
            BoundarySpec::Constant { value } => BoundaryData::new(d, kind, vec![*value; d.num_boundary()]),
            BoundarySpec::Linear { offset, slope } => {
                check_len(slope.len(), dim, "slope")?;
                let vals = sample(d, |x| offset + x.iter().zip(slope).map(|(a, b)| a * b).sum::<f64>());
                BoundaryData::new(d, kind, vals)
            }
            BoundarySpec::Sinusoidal { amplitude, wavenumbers, phase } => {
                check_len(wavenumbers.len(), dim, "wavenumbers")?;
                let l = d.lengths().to_vec();
                let vals = sample(d, |x| {
                    let arg: f64 = (0..dim).map(|a| wavenumbers[a] * x[a] / l[a]).sum();
                    amplitude * (2.0 * std::f64::consts::PI * arg + phase).sin()
                });
                BoundaryData::new(d, kind, vals)
            }
            BoundarySpec::Tabulated { values } => BoundaryData::new(d, kind, values.clone()),
        }
    }
}

fn sample(d: &Domain, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    d.boundary_nodes()
        .iter()
        .map(|&full| {
            let x = d.coords(full);
            f(&x[..d.dim()])
        })
        .collect()
}

fn check_len(got: usize, dim: usize, what: &str) -> Result<()> {
    if got != dim {
        return Err(KgmError::Config(format!("{what} has {got} entries, expected {dim}")));
    }
    Ok(())
}

/// `g(t) = μ|t|^{p-2}t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub p: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

impl NonlinearitySpec {
    pub fn build(&self) -> Result<NonlinearityModel> {
        NonlinearityModel::power(self.p, self.mu)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub descent: DescentConfig,
    pub mountain_pass: MountainPassConfig,
    pub multiplicity: MultiplicityConfig,
    /// run the multiplicity probe in the nonlinear regime
    pub probe_multiplicity: bool,
}

/// Everything needed to reproduce one `solve` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub params: PhysicalParams,
    pub regime: Regime,
    /// matter trace (Dirichlet and mixed regimes)
    #[serde(default)]
    pub h: BoundarySpec,
    /// potential trace (Dirichlet and nonlinear regimes)
    #[serde(default)]
    pub zeta: BoundarySpec,
    /// potential flux (mixed regime)
    #[serde(default)]
    pub theta: BoundarySpec,
    #[serde(default)]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// Validated configuration with the lifted functional context.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub domain: Domain,
    pub h: BoundaryData,
    pub zeta: BoundaryData,
    pub theta: BoundaryData,
    pub context: FunctionalContext,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| KgmError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field against the preconditions of the solvers, with
    /// the offending field named in the error.
    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: KgmError| KgmError::Config(format!("{name}: {e}"));
        let d = self.domain.build().map_err(|e| field("domain", e))?;
        self.params.validate().map_err(|e| field("params", e))?;
        self.h.build(&d, BoundaryKind::DirichletTrace).map_err(|e| field("h", e))?;
        self.zeta.build(&d, BoundaryKind::DirichletTrace).map_err(|e| field("zeta", e))?;
        self.theta.build(&d, BoundaryKind::NeumannFlux).map_err(|e| field("theta", e))?;
        self.solver.descent.validate().map_err(|e| field("solver.descent", e))?;
        self.solver.mountain_pass.validate().map_err(|e| field("solver.mountain_pass", e))?;
        match (self.regime, &self.nonlinearity) {
            (Regime::Nonlinear, None) => {
                return Err(KgmError::Config("nonlinearity: required in the nonlinear regime".into()))
            }
            (Regime::Nonlinear, Some(n)) => {
                n.build().map_err(|e| field("nonlinearity", e))?;
            }
            (_, Some(_)) => {
                return Err(KgmError::Config("nonlinearity: only allowed in the nonlinear regime".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// Validates, builds the boundary data and lifts them.
    pub fn prepare(&self) -> Result<Prepared> {
        self.validate()?;
        let domain = self.domain.build()?;
        let h = self.h.build(&domain, BoundaryKind::DirichletTrace)?;
        let zeta = self.zeta.build(&domain, BoundaryKind::DirichletTrace)?;
        let theta = self.theta.build(&domain, BoundaryKind::NeumannFlux)?;
        let context = match self.regime {
            Regime::Dirichlet => FunctionalContext::dirichlet(&domain, self.params, &h, &zeta)?,
            Regime::Mixed => FunctionalContext::mixed(&domain, self.params, &h, &theta)?,
            Regime::Nonlinear => {
                if !h.is_zero() {
                    return Err(KgmError::Config("h: must vanish in the nonlinear regime".into()));
                }
                let model = self.nonlinearity.expect("validated").build()?;
                FunctionalContext::nonlinear(&domain, self.params, &zeta, model)?
            }
        };
        Ok(Prepared { domain, h, zeta, theta, context })
    }

    /// Warnings about the requested problem that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(n) = &self.nonlinearity {
            if self.domain.dim == 3 && n.p >= 6.0 {
                out.push(format!("p = {} is not subcritical in 3D (needs p < 6)", n.p));
            } else if self.domain.dim == 2 && n.p >= 5.0 {
                out.push(format!("p = {} is large; expect stiff gradient steps and far endpoints", n.p));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "domain": {"dim": 2, "lengths": [1.0, 1.0], "counts": [7, 7]},
        "params": {"m": 1.0, "omega": 0.5, "q": 0.1},
        "regime": "dirichlet",
        "h": {"profile": "constant", "value": 1.0},
        "zeta": {"profile": "linear", "offset": 1.0, "slope": [0.5, 0.0]}
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        let p = c.prepare().unwrap();
        assert_eq!(p.zeta.len(), p.domain.num_boundary());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let typo = MINIMAL.replace("\"omega\"", "\"omgea\"");
        assert!(matches!(RunConfig::from_json(&typo), Err(KgmError::Parse(_))));
        let bad = MINIMAL.replace("\"m\": 1.0", "\"m\": -1.0");
        let err = RunConfig::from_json(&bad).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("params"));
        let slope = MINIMAL.replace("[0.5, 0.0]", "[0.5]");
        let err = RunConfig::from_json(&slope).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("zeta"));
    }

    #[test]
    fn nonlinear_regime_needs_model() {
        let c = MINIMAL.replace("\"dirichlet\"", "\"nonlinear\"");
        assert!(RunConfig::from_json(&c).unwrap().validate().is_err());
    }

    #[test]
    fn tabulated_length_checked() {
        let d = Domain::cube(2, 1.0, 3).unwrap();
        let t = BoundarySpec::Tabulated { values: vec![1.0; 3] };
        assert!(t.build(&d, BoundaryKind::DirichletTrace).is_err());
        let t = BoundarySpec::Tabulated { values: vec![1.0; d.num_boundary()] };
        assert!(t.build(&d, BoundaryKind::DirichletTrace).is_ok());
    }
}
