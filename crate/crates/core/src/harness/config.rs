use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::adversary::ChannelMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SparsitySweep,
    NoiseSweep,
    GammaAttack,
    ChannelNoiseAttack,
    ProtocolDemo,
    OracleSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::SparsitySweep,
        Experiment::NoiseSweep,
        Experiment::GammaAttack,
        Experiment::ChannelNoiseAttack,
        Experiment::ProtocolDemo,
        Experiment::OracleSuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SparsitySweep => "sparsity_sweep",
            Experiment::NoiseSweep => "noise_sweep",
            Experiment::GammaAttack => "gamma_attack",
            Experiment::ChannelNoiseAttack => "channel_noise_attack",
            Experiment::ProtocolDemo => "protocol_demo",
            Experiment::OracleSuite => "oracle_suite",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::param(format!("unknown experiment '{s}'")))
    }
}

/// Parameter ranges. Unset axes take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// `(n, mu)` pairs.
    pub dims: Option<Vec<(usize, usize)>>,
    pub k: Option<Vec<usize>>,
    pub s: Option<Vec<usize>>,
    pub snr_db: Option<Vec<f64>>,
    pub gamma: Option<Vec<f64>>,
    /// Channel-to-deviation power ratio for Eve's channels, dB.
    pub deviation_snr_db: Option<Vec<f64>>,
    pub modes: Option<Vec<ChannelMode>>,
    /// Rounds per protocol run (protocol demo only).
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_trials() -> usize {
    50
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One cell of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub mu: usize,
    pub k: usize,
    pub s: usize,
    pub snr_db: f64,
    pub gamma: Option<f64>,
    pub deviation_snr_db: Option<f64>,
    pub mode: Option<ChannelMode>,
    pub rounds: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            grids: Grids::default(),
            trials: default_trials(),
            seed: 0,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.experiment != Experiment::OracleSuite && self.points()?.is_empty() {
            return Err(Error::param("parameter grid is empty"));
        }
        Ok(())
    }

    /// The resolved grid in deterministic order: dims, k, s, snr, gamma,
    /// deviation, mode (last varies fastest).
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        use Experiment::*;
        let g = &self.grids;
        let e = self.experiment;
        let dims = g.dims.clone().unwrap_or_else(|| match e {
            SparsitySweep => vec![(128, 100), (200, 160)],
            _ => vec![(128, 100)],
        });
        let ks = g.k.clone().unwrap_or_else(|| match e {
            SparsitySweep | NoiseSweep => (4..=10).collect(),
            _ => vec![4],
        });
        let ss = g.s.clone().unwrap_or_else(|| match e {
            SparsitySweep => (4..=10).collect(),
            NoiseSweep => vec![5],
            GammaAttack | ChannelNoiseAttack => vec![2],
            _ => vec![4],
        });
        let snrs = g.snr_db.clone().unwrap_or_else(|| match e {
            NoiseSweep => vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            GammaAttack | ChannelNoiseAttack => vec![50.0],
            _ => vec![30.0],
        });
        let gammas: Vec<Option<f64>> = match e {
            GammaAttack => g
                .gamma
                .clone()
                .unwrap_or_else(|| vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0])
                .into_iter()
                .map(Some)
                .collect(),
            ChannelNoiseAttack => g.gamma.clone().unwrap_or_else(|| vec![6.0]).into_iter().map(Some).collect(),
            _ => vec![None],
        };
        let deviations: Vec<Option<f64>> = match e {
            ChannelNoiseAttack => g
                .deviation_snr_db
                .clone()
                .unwrap_or_else(|| vec![50.0, 40.0, 30.0, 20.0, 10.0, 0.0])
                .into_iter()
                .map(Some)
                .collect(),
            _ => vec![None],
        };
        let modes: Vec<Option<ChannelMode>> = match e {
            GammaAttack => vec![Some(ChannelMode::Identical)],
            ChannelNoiseAttack => g
                .modes
                .clone()
                .unwrap_or_else(|| vec![ChannelMode::OneDeviated, ChannelMode::BothDeviated])
                .into_iter()
                .map(Some)
                .collect(),
            _ => vec![None],
        };
        let rounds = match e {
            ProtocolDemo => g.rounds.unwrap_or(3),
            _ => 1,
        };
        if rounds == 0 {
            return Err(Error::param("rounds must be at least 1"));
        }
        for &(n, mu) in &dims {
            if n == 0 || mu == 0 || mu > n {
                return Err(Error::param(format!("invalid dims ({n}, {mu}): need 0 < mu <= n")));
            }
        }
        if let Some(&bad) = gammas.iter().flatten().find(|g| !(**g > 0.0)) {
            return Err(Error::param(format!("gamma must be positive, got {bad}")));
        }

        let mut out = Vec::new();
        for &(n, mu) in &dims {
            for &k in &ks {
                for &s in &ss {
                    for &snr_db in &snrs {
                        for &gamma in &gammas {
                            for &deviation_snr_db in &deviations {
                                for &mode in &modes {
                                    out.push(GridPoint {
                                        n,
                                        mu,
                                        k,
                                        s,
                                        snr_db,
                                        gamma,
                                        deviation_snr_db,
                                        mode,
                                        rounds,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.name()));
        }
        assert!("fig7".parse::<Experiment>().is_err());
    }

    #[test]
    fn default_grids() {
        let pts = ExperimentConfig::new(Experiment::SparsitySweep).points().unwrap();
        assert_eq!(pts.len(), 2 * 7 * 7);
        assert_eq!((pts[0].n, pts[0].k, pts[0].s), (128, 4, 4));
        let pts = ExperimentConfig::new(Experiment::NoiseSweep).points().unwrap();
        assert_eq!(pts.len(), 7 * 6);
        assert!(pts.iter().all(|p| p.s == 5));
        let pts = ExperimentConfig::new(Experiment::ChannelNoiseAttack).points().unwrap();
        assert_eq!(pts.len(), 12);
    }

    #[test]
    fn json_config() {
        let cfg = ExperimentConfig::from_json(
            r#"{"experiment": "gamma_attack", "trials": 3, "seed": 9,
                "grids": {"gamma": [1.0, 6.0], "dims": [[64, 48]]}}"#,
        )
        .unwrap();
        let pts = cfg.points().unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].gamma, Some(6.0));
        assert_eq!((pts[0].n, pts[0].mu), (64, 48));
        assert!(ExperimentConfig::from_json(r#"{"experiment": "noise_sweep", "trials": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "noise_sweep", "grids": {"k": []}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "noise_sweep", "bogus": 1}"#).is_err());
    }
}
