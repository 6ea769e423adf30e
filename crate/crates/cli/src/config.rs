//! Line-oriented `key = value` study configuration.

use std::collections::BTreeMap;
use std::path::Path;

use profile_sampler::error::{Error, Result};
use profile_sampler::prior::Prior;
use profile_sampler::types::{ModelKind, ParameterPoint};

/// Full description of a replication study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub theta0: ParameterPoint,
    pub chain_total: usize,
    pub chain_burn_in: usize,
    pub master_seed: u64,
    pub target_event_frac: f64,
    pub rate_r: f64,
    pub step_constant: f64,
    /// Exponents scaling the |MLE−CM|, |SE_M−SE_N|, |L_M−L_N| and
    /// |U_M−U_N| columns by n^e.
    pub scaling_exponents: [f64; 4],
    pub prior: Prior,
    pub threads: usize,
}

impl StudyConfig {
    /// Desk-scale defaults: two sample sizes, 50 replicates, 5000-draw
    /// chains. The full-paper scale is reachable by config only.
    ///
    /// The default event fraction differs by design. Right-censored data
    /// target 0.9 (effective sample = expected event count). For current
    /// status data a 0.9 event fraction leaves the profile posterior nearly
    /// flat to the right — most examination times fall where the indicator
    /// is degenerate — so the balanced fraction 0.5 is the default there.
    pub fn desk_default(model: ModelKind) -> Self {
        let (rate_r, scaling_exponents, target_event_frac) = match model {
            ModelKind::CoxCurrent => (
                1.0 / 3.0,
                [2.0 / 3.0, 1.0 / 6.0, 2.0 / 3.0, 2.0 / 3.0],
                0.5,
            ),
            _ => (0.5, [1.0, 0.5, 1.0, 1.0], 0.9),
        };
        StudyConfig {
            model,
            sizes: vec![50, 100],
            reps: 50,
            theta0: ParameterPoint::scalar(1.0).expect("finite"),
            chain_total: 5000,
            chain_burn_in: 2000,
            master_seed: 20_080_401,
            target_event_frac,
            rate_r,
            step_constant: 1.0,
            scaling_exponents,
            prior: Prior::Flat,
            threads: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.model, ModelKind::CoxRight | ModelKind::CoxCurrent) {
            return Err(Error::Config("study supports cox_right and cox_current".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config("sizes must be nonempty".into()));
        }
        if self.sizes.iter().any(|n| *n < 2) {
            return Err(Error::Config("every study size must be >= 2".into()));
        }
        if self.reps < 1 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if self.chain_burn_in >= self.chain_total {
            return Err(Error::Config("chain_burn_in must be < chain_total".into()));
        }
        if self.theta0.dim() != 1 {
            return Err(Error::Config("study summaries are defined for scalar theta0".into()));
        }
        if !(0.0 < self.target_event_frac && self.target_event_frac < 1.0) {
            return Err(Error::Config("target_event_frac must be in (0,1)".into()));
        }
        if self.rate_r <= 0.25 || !self.rate_r.is_finite() {
            return Err(Error::Config("rate_r must exceed 1/4".into()));
        }
        if self.step_constant <= 0.0 {
            return Err(Error::Config("step_constant must be positive".into()));
        }
        if self.threads < 1 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<StudyConfig> {
        let mut pairs = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected 'key = value', got '{line}'"),
                });
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }

        let model: ModelKind = pairs
            .get("model")
            .map(|s| s.parse())
            .transpose()?
            .unwrap_or(ModelKind::CoxRight);
        let mut config = StudyConfig::desk_default(model);

        for (key, value) in &pairs {
            match key.as_str() {
                "model" => {}
                "sizes" => {
                    config.sizes = value
                        .split(',')
                        .map(|t| parse_num::<usize>(t, "sizes"))
                        .collect::<Result<_>>()?;
                }
                "reps" => config.reps = parse_num(value, key)?,
                "theta0" => {
                    let coords = value
                        .split(',')
                        .map(|t| parse_num::<f64>(t, "theta0"))
                        .collect::<Result<Vec<f64>>>()?;
                    config.theta0 = ParameterPoint::new(coords)?;
                }
                "chain_total" => config.chain_total = parse_num(value, key)?,
                "chain_burn_in" => config.chain_burn_in = parse_num(value, key)?,
                "master_seed" => config.master_seed = parse_num(value, key)?,
                "target_event_frac" => config.target_event_frac = parse_num(value, key)?,
                "rate_r" => config.rate_r = parse_num(value, key)?,
                "step_constant" => config.step_constant = parse_num(value, key)?,
                "scaling_exponents" => {
                    let parts = value
                        .split(',')
                        .map(|t| parse_num::<f64>(t, "scaling_exponents"))
                        .collect::<Result<Vec<f64>>>()?;
                    if parts.len() != 4 {
                        return Err(Error::Config("scaling_exponents needs exactly 4 values".into()));
                    }
                    config.scaling_exponents = [parts[0], parts[1], parts[2], parts[3]];
                }
                "prior" => config.prior = parse_prior(value)?,
                "threads" => config.threads = parse_num(value, key)?,
                other => {
                    return Err(Error::Config(format!("unknown config key '{other}'")));
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<StudyConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
        StudyConfig::parse(&text)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

/// `flat`, or `gaussian:<mean>[,..]:<sd>[,..]`.
pub fn parse_prior(spec: &str) -> Result<Prior> {
    if spec == "flat" {
        return Ok(Prior::Flat);
    }
    if let Some(rest) = spec.strip_prefix("gaussian:") {
        let Some((means, sds)) = rest.split_once(':') else {
            return Err(Error::Config(format!("gaussian prior needs 'gaussian:<mean>:<sd>', got '{spec}'")));
        };
        let mean = means
            .split(',')
            .map(|t| parse_num::<f64>(t, "prior mean"))
            .collect::<Result<Vec<f64>>>()?;
        let sd = sds
            .split(',')
            .map(|t| parse_num::<f64>(t, "prior sd"))
            .collect::<Result<Vec<f64>>>()?;
        return Prior::gaussian(mean, sd);
    }
    Err(Error::Config(format!("unknown prior '{spec}' (expected flat or gaussian:mean:sd)")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config_with_comments() {
        let text = "\
# replication study
model = cox_current
sizes = 30, 60   # two sizes
reps = 5
theta0 = 1.0
chain_total = 900
chain_burn_in = 300
master_seed = 42
target_event_frac = 0.85
rate_r = 0.3333333333333333
step_constant = 2
scaling_exponents = 0.6666666666666666, 0.16666666666666666, 0.6666666666666666, 0.6666666666666666
prior = flat
threads = 2
";
        let config = StudyConfig::parse(text).unwrap();
        assert_eq!(config.model, ModelKind::CoxCurrent);
        assert_eq!(config.sizes, vec![30, 60]);
        assert_eq!(config.reps, 5);
        assert_eq!(config.threads, 2);
        assert_eq!(config.master_seed, 42);
    }

    #[test]
    fn defaults_differ_by_model() {
        let right = StudyConfig::desk_default(ModelKind::CoxRight);
        let current = StudyConfig::desk_default(ModelKind::CoxCurrent);
        assert_eq!(right.scaling_exponents, [1.0, 0.5, 1.0, 1.0]);
        assert!((current.scaling_exponents[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((current.rate_r - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(StudyConfig::parse("model = nope\n").is_err());
        assert!(StudyConfig::parse("bad line\n").is_err());
        assert!(StudyConfig::parse("mystery = 1\n").is_err());
        assert!(StudyConfig::parse("reps = 0\n").is_err());
        assert!(StudyConfig::parse("chain_total = 10\nchain_burn_in = 10\n").is_err());
        assert!(StudyConfig::parse("model = partly_linear\n").is_err());
    }

    #[test]
    fn prior_round_trip() {
        assert_eq!(parse_prior("flat").unwrap(), Prior::Flat);
        let g = parse_prior("gaussian:0.5:2").unwrap();
        assert_eq!(g, Prior::gaussian(vec![0.5], vec![2.0]).unwrap());
        assert!(parse_prior("gaussian:1").is_err());
        assert!(parse_prior("cauchy").is_err());
    }
}
