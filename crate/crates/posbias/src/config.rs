use std::path::Path;

use posbias_core::SimulationConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Invalid(#[from] posbias_core::Error),
}

/// Parses a flat TOML document with the [`SimulationConfig`] fields. Unknown
/// keys are rejected; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<SimulationConfig, ConfigError> {
    let config: SimulationConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<SimulationConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use posbias_core::SamplingMode;

    #[test]
    fn full_config() {
        let text = r#"
            eta = 2.0
            eps_minus = 0.05
            overlap = 0.5
            sweeps = 3
            top_k = 8
            num_queries = 100
            candidates_per_query = 12
            relevant_fraction = 0.3
            score_noise = 1.0
            seed = 42
            mode = "iid-sampling"
        "#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.eta, 2.0);
        assert_eq!(c.top_k, 8);
        assert_eq!(c.seed, 42);
        assert_eq!(c.mode, SamplingMode::IidSampling);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = parse_config("sweeps = 7").unwrap();
        assert_eq!(c.sweeps, 7);
        assert_eq!(c.eta, SimulationConfig::default().eta);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            parse_config("sweeps = 7\nbogus = 1"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            parse_config("overlap = 1.5"),
            Err(ConfigError::Invalid(_))
        ));
    }
}
