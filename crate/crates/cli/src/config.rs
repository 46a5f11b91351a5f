//! Experiment configuration, read from a flat JSON record.

use serde::{Deserialize, Serialize};
use uir_core::deconv::{EstimatorConfig, StepRule};
use uir_core::isotonic::{DesignPoints, IsotonicFn};
use uir_core::noise::{make_noise, NoiseFamily, NoiseModel};

use crate::error::{CliError, CliResult};

/// Named nondecreasing regression functions on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RegressionSpec {
    /// `slope · x + intercept`.
    Linear {
        #[serde(default = "default_slope")]
        slope: f64,
        #[serde(default = "default_intercept")]
        intercept: f64,
    },
    /// `J` equal-width pieces with levels evenly spread over `[-V, V]`.
    Step { pieces: usize },
    /// `e^{rate (x - 1/2)} - 1` clipped to `[-V, V]`.
    ClippedExponential { rate: f64 },
    Constant { value: f64 },
}

fn default_slope() -> f64 {
    2.0
}

fn default_intercept() -> f64 {
    -1.0
}

impl RegressionSpec {
    pub fn validate(&self) -> CliResult<()> {
        match *self {
            RegressionSpec::Linear { slope, intercept } if !(slope >= 0.0) || !intercept.is_finite() => {
                Err(CliError::Config("linear regression needs a finite nonnegative slope".into()))
            }
            RegressionSpec::Step { pieces: 0 } => Err(CliError::Config("step function needs at least one piece".into())),
            RegressionSpec::ClippedExponential { rate } if !(rate >= 0.0) || !rate.is_finite() => {
                Err(CliError::Config("clipped exponential needs a finite nonnegative rate".into()))
            }
            RegressionSpec::Constant { value } if !value.is_finite() => {
                Err(CliError::Config("constant must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64, v: f64) -> f64 {
        match *self {
            RegressionSpec::Linear { slope, intercept } => slope * x + intercept,
            RegressionSpec::Step { pieces } => {
                if pieces == 1 {
                    return 0.0;
                }
                let j = ((x * pieces as f64).floor() as usize).min(pieces - 1);
                -v + 2.0 * v * j as f64 / (pieces - 1) as f64
            }
            RegressionSpec::ClippedExponential { rate } => ((rate * (x - 0.5)).exp() - 1.0).clamp(-v, v),
            RegressionSpec::Constant { value } => value,
        }
    }

    /// The function at the design points; fails if it leaves `[-V, V]`.
    pub fn at(&self, design: &DesignPoints, v: f64) -> CliResult<IsotonicFn> {
        self.validate()?;
        Ok(IsotonicFn::from_fn(design.clone(), v, |x| self.eval(x, v))?)
    }
}

/// Noise record such as `{"family": "gaussian", "sd": 0.3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseSpec {
    Gaussian { sd: f64 },
    Laplace { scale: f64 },
    Uniform { half_width: f64 },
    PointMass,
}

impl NoiseSpec {
    pub fn family(self) -> NoiseFamily {
        match self {
            NoiseSpec::Gaussian { sd } => NoiseFamily::Gaussian { sd },
            NoiseSpec::Laplace { scale } => NoiseFamily::Laplace { scale },
            NoiseSpec::Uniform { half_width } => NoiseFamily::Uniform { half_width },
            NoiseSpec::PointMass => NoiseFamily::PointMass,
        }
    }

    pub fn build(self) -> CliResult<NoiseModel> {
        Ok(make_noise(self.family())?)
    }

    /// From a family name and its single parameter, as given on the command line.
    pub fn from_name(name: &str, param: Option<f64>) -> CliResult<Self> {
        let need = |what: &str| {
            param.ok_or_else(|| CliError::Config(format!("{name} noise needs --noise-param ({what})")))
        };
        Ok(match name.replace('-', "_").as_str() {
            "gaussian" => NoiseSpec::Gaussian { sd: need("standard deviation")? },
            "laplace" => NoiseSpec::Laplace { scale: need("scale")? },
            "uniform" => NoiseSpec::Uniform { half_width: need("half-width")? },
            "point_mass" => NoiseSpec::PointMass,
            other => return Err(CliError::Config(format!("unknown noise family '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRuleSpec {
    Classic,
    #[default]
    ExactLineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSettings {
    pub max_iterations: usize,
    pub fw_gap_tolerance: Option<f64>,
    pub step_rule: StepRuleSpec,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        let base = EstimatorConfig::default();
        Self {
            max_iterations: base.max_iterations,
            fw_gap_tolerance: base.fw_gap_tolerance,
            step_rule: StepRuleSpec::ExactLineSearch,
        }
    }
}

impl From<EstimatorSettings> for EstimatorConfig {
    fn from(s: EstimatorSettings) -> Self {
        EstimatorConfig {
            max_iterations: s.max_iterations,
            fw_gap_tolerance: s.fw_gap_tolerance,
            step_rule: match s.step_rule {
                StepRuleSpec::Classic => StepRule::Classic,
                StepRuleSpec::ExactLineSearch => StepRule::ExactLineSearch,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regression: RegressionSpec,
    #[serde(rename = "V")]
    pub v: f64,
    pub noise: NoiseSpec,
    pub sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub estimator: EstimatorSettings,
}

fn default_replications() -> usize {
    1
}

fn default_p_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

impl Default for ExperimentConfig {
    /// Linear signal, gaussian noise with sd 0.3, `n ∈ {10², 10³, 10⁴}`.
    fn default() -> Self {
        Self {
            regression: RegressionSpec::Linear {
                slope: default_slope(),
                intercept: default_intercept(),
            },
            v: 1.0,
            noise: NoiseSpec::Gaussian { sd: 0.3 },
            sizes: vec![100, 1000, 10_000],
            replications: 20,
            seed: 0,
            p_list: default_p_list(),
            estimator: EstimatorSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(CliError::Config("V must be positive".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 3) {
            return Err(CliError::Config("sizes must be nonempty and each at least 3".into()));
        }
        if self.replications < 1 {
            return Err(CliError::Config("replications must be at least 1".into()));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(p >= 1.0) || !p.is_finite()) {
            return Err(CliError::Config("p_list must be nonempty with finite p >= 1".into()));
        }
        self.regression.validate()?;
        self.noise.build()?;
        EstimatorConfig::from(self.estimator).validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_flat_record() {
        let text = r#"{
            "regression": {"family": "step", "pieces": 3},
            "V": 1.5,
            "noise": {"family": "gaussian", "sd": 0.3},
            "sizes": [100, 1000],
            "replications": 4,
            "seed": 9,
            "p_list": [1],
            "estimator": {"max_iterations": 50}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.regression, RegressionSpec::Step { pieces: 3 });
        assert_eq!(c.noise, NoiseSpec::Gaussian { sd: 0.3 });
        assert_eq!(c.v, 1.5);
        assert_eq!(c.estimator.max_iterations, 50);
        assert_eq!(c.estimator.step_rule, StepRuleSpec::ExactLineSearch);
        let round = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn defaults_fill_optional_fields() {
        let c = ExperimentConfig::from_json(
            r#"{"regression": {"family": "linear"}, "V": 1, "noise": {"family": "point_mass"}, "sizes": [10]}"#,
        )
        .unwrap();
        assert_eq!(c.replications, 1);
        assert_eq!(c.p_list, vec![1.0, 2.0]);
        assert_eq!(c.regression, RegressionSpec::Linear { slope: 2.0, intercept: -1.0 });
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_invalid_records() {
        let base = r#"{"regression": {"family": "linear"}, "V": 1, "noise": {"family": "gaussian", "sd": 0.3}, "sizes": [10]}"#;
        for bad in [
            base.replace("\"V\": 1", "\"V\": 0"),
            base.replace("[10]", "[2]"),
            base.replace("[10]", "[]"),
            base.replace("0.3", "-1"),
            base.replace("\"sizes\"", "\"replications\": 0, \"sizes\""),
            base.replace("\"sizes\"", "\"mystery\": 1, \"sizes\""),
            base.replace("linear", "cubic"),
        ] {
            assert!(ExperimentConfig::from_json(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn regression_families_are_monotone_and_bounded() {
        let design = DesignPoints::equispaced(100).unwrap();
        for spec in [
            RegressionSpec::Linear { slope: 2.0, intercept: -1.0 },
            RegressionSpec::Step { pieces: 4 },
            RegressionSpec::Step { pieces: 1 },
            RegressionSpec::ClippedExponential { rate: 3.0 },
            RegressionSpec::Constant { value: 0.0 },
        ] {
            let f = spec.at(&design, 1.0).unwrap();
            assert!(f.values().windows(2).all(|w| w[0] <= w[1]));
            assert!(f.values().iter().all(|v| v.abs() <= 1.0));
        }
        let step = RegressionSpec::Step { pieces: 3 };
        assert_eq!(step.eval(0.1, 2.0), -2.0);
        assert_eq!(step.eval(0.5, 2.0), 0.0);
        assert_eq!(step.eval(1.0, 2.0), 2.0);
        // leaves [-V, V]
        assert!(RegressionSpec::Linear { slope: 4.0, intercept: -1.0 }.at(&design, 1.0).is_err());
    }

    #[test]
    fn noise_from_command_line_names() {
        assert_eq!(NoiseSpec::from_name("gaussian", Some(0.3)).unwrap(), NoiseSpec::Gaussian { sd: 0.3 });
        assert_eq!(NoiseSpec::from_name("point-mass", None).unwrap(), NoiseSpec::PointMass);
        assert!(NoiseSpec::from_name("laplace", None).is_err());
        assert!(NoiseSpec::from_name("cauchy", Some(1.0)).is_err());
    }
}
