//! Simulation scenarios and the built-in scenario pack.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{MtdCurve, ToxParams, ToxPriorConfig};
use crate::stage1::Stage1Config;
use crate::stage2::{EfficacyTruth, MedianShape, Stage2Config, TrueTtp};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Replicates per scenario unless overridden.
pub const DEFAULT_REPLICATES: usize = 200;

const RECONSTRUCTED: &str = "Generative truths chosen to exhibit the intended curve shapes.";

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_delta_u_grid() -> Vec<f64> {
    vec![0.8, 0.9]
}

/// One simulation scenario: generative truths plus design configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub provenance: String,
    pub true_tox: ToxParams,
    /// Stage-2 truth; absent for stage-1-only scenarios.
    #[serde(default)]
    pub efficacy: Option<EfficacyTruth>,
    #[serde(default)]
    pub stage1: Stage1Config,
    #[serde(default)]
    pub stage2: Stage2Config,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Efficacy thresholds at which power and type-I error are reported.
    #[serde(default = "default_delta_u_grid")]
    pub delta_u_grid: Vec<f64>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, true_tox: ToxParams) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            provenance: RECONSTRUCTED.into(),
            true_tox,
            efficacy: None,
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            replicates: DEFAULT_REPLICATES,
            delta_u_grid: default_delta_u_grid(),
        }
    }

    pub fn with_efficacy(mut self, efficacy: EfficacyTruth) -> Self {
        self.efficacy = Some(efficacy);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\', '_']) {
            return Err(Error::config(format!(
                "scenario name {:?} must be non-empty without '/', '\\' or '_'",
                self.name
            )));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be positive"));
        }
        if self.delta_u_grid.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(Error::config("delta_u_grid entries must be in (0,1)"));
        }
        self.true_tox.validate()?;
        self.stage1.validate()?;
        self.stage2.validate()
    }

    /// The true MTD curve, if the truth has one.
    pub fn true_curve(&self) -> Result<MtdCurve> {
        MtdCurve::new(self.true_tox, self.stage1.theta)
    }

    /// Effect-size label used in file names.
    pub fn effect_label(&self) -> String {
        match &self.efficacy {
            None => "none".into(),
            Some(EfficacyTruth {
                ttp: TrueTtp::Shape { effect_size, .. },
                ..
            }) => format!("{effect_size}"),
            Some(_) => "spline".into(),
        }
    }

    /// `{scenario}_{effect}_{accrual}`.
    pub fn file_stem(&self) -> String {
        format!("{}_{}_{}", self.name, self.effect_label(), self.stage2.accrual_rate)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::report::to_json_string(self)
    }
}

/// A named collection of scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPack {
    pub schema_version: u32,
    #[serde(default)]
    pub provenance: String,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioPack {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.scenarios {
            s.validate()?;
            if !seen.insert(&s.name) {
                return Err(Error::config(format!("duplicate scenario name {:?}", s.name)));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}

/// Read a scenario file holding either one scenario or a pack.
pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("scenarios").is_some() {
        let pack: ScenarioPack = serde_json::from_value(value)?;
        pack.validate()?;
        Ok(pack.scenarios)
    } else {
        let s: Scenario = serde_json::from_value(value)?;
        s.validate()?;
        Ok(vec![s])
    }
}

fn beta_mean((a, b): (f64, f64)) -> f64 {
    a / (a + b)
}

/// The truth matching the prior: corner probabilities at their prior means and
/// the interaction placing the reference combination `(1/3, 1/2)` on the
/// `theta` contour.
pub fn calibrated_truth(prior: &ToxPriorConfig, theta: f64) -> Result<ToxParams> {
    let rho10 = beta_mean(prior.rho10);
    let rho01 = beta_mean(prior.rho01);
    let rho00 = rho10.min(rho01) * beta_mean(prior.rho00_ratio);
    ToxParams::through_point(rho00, rho10, rho01, 1.0 / 3.0, 0.5, theta)
}

/// Stage-1 truths: `(name, rho00, rho10, rho01, point on the θ contour)`.
const STAGE1_TRUTHS: [(&str, f64, f64, f64, (f64, f64)); 10] = [
    ("through-symmetric", 0.05, 0.25, 0.25, (1.0 / 3.0, 0.5)),
    ("through-a-toxic", 0.05, 0.30, 0.15, (1.0 / 3.0, 0.5)),
    ("through-b-toxic", 0.05, 0.12, 0.28, (1.0 / 3.0, 0.5)),
    ("above-mild", 0.02, 0.10, 0.10, (0.5, 0.7)),
    ("above-moderate", 0.03, 0.15, 0.20, (0.5, 0.6)),
    ("above-far", 0.01, 0.05, 0.05, (0.7, 0.7)),
    ("below-moderate", 0.08, 0.28, 0.30, (0.2, 0.3)),
    ("below-steep", 0.10, 0.30, 0.30, (0.2, 0.25)),
    ("asymmetric-a", 0.02, 0.30, 0.08, (0.6, 0.3)),
    ("asymmetric-b", 0.02, 0.08, 0.30, (0.2, 0.8)),
];

/// Weibull shape of the stage-2 generative truths.
pub const TRUE_WEIBULL_SHAPE: f64 = 2.0;

/// Depth in months below the null median reached by the shaped truths away
/// from their peak.
pub const SHAPE_DROP: f64 = 1.0;

pub const EFFECT_SIZES: [f64; 2] = [1.5, 2.0];

/// Stage-2 truth of a given shape and effect size (0 gives the null).
pub fn shaped_efficacy(shape: MedianShape, effect_size: f64, med0: f64) -> EfficacyTruth {
    EfficacyTruth {
        ttp: TrueTtp::Shape {
            shape,
            med0,
            effect_size,
            drop: SHAPE_DROP,
            weibull_k: TRUE_WEIBULL_SHAPE,
        },
        dlt_rate: None,
    }
}

/// The built-in pack: the calibrated stage-1 truth, ten further stage-1
/// truths with curves through, above and below the reference combination or
/// with asymmetric toxicity, an extreme-toxicity truth without an MTD curve,
/// and the six stage-2 median shapes at each effect size along the calibrated
/// truth's curve.
pub fn builtin_pack() -> Result<ScenarioPack> {
    let stage1 = Stage1Config::default();
    let calibrated = calibrated_truth(&stage1.prior, stage1.theta)?;
    let mut scenarios = vec![Scenario::new("calibrated", calibrated)];
    for (name, r00, r10, r01, (x, y)) in STAGE1_TRUTHS {
        scenarios.push(Scenario::new(name, ToxParams::through_point(r00, r10, r01, x, y, stage1.theta)?));
    }
    scenarios.push(Scenario::new("extreme-toxic", ToxParams::new(0.9, 0.95, 0.95, 1.0)?));
    let med0 = Stage2Config::default().med0;
    for shape in MedianShape::ALL {
        for es in EFFECT_SIZES {
            scenarios.push(
                Scenario::new(format!("{}-es{es}", shape.name()), calibrated)
                    .with_efficacy(shaped_efficacy(shape, es, med0)),
            );
        }
    }
    let pack = ScenarioPack {
        schema_version: SCHEMA_VERSION,
        provenance: RECONSTRUCTED.into(),
        scenarios,
    };
    pack.validate()?;
    Ok(pack)
}
