//! Experiment configuration. Every field has a default, so `{}` is the full
//! acceptance matrix.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hsdecomp_core::atomic::AtomKind;
use hsdecomp_core::czd::CzFlavor;
use hsdecomp_core::SpaceSpec;
use serde::{Deserialize, Serialize};

use crate::fields::FieldSpec;

/// Acceptance criteria, one named check each.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    A8,
}

impl CheckId {
    pub const ALL: [CheckId; 8] = [
        CheckId::A1,
        CheckId::A2,
        CheckId::A3,
        CheckId::A4,
        CheckId::A5,
        CheckId::A6,
        CheckId::A7,
        CheckId::A8,
    ];

    pub fn title(self) -> &'static str {
        match self {
            CheckId::A1 => "pointwise maximal equivalence (N vs star)",
            CheckId::A2 => "Hajlasz norm vs ||Nf||_1",
            CheckId::A3 => "Calderon-Zygmund postconditions",
            CheckId::A4 => "atomic decomposition",
            CheckId::A5 => "H1 atoms have bounded grand maximal function",
            CheckId::A6 => "(grad f)+ dominated by Nf",
            CheckId::A7 => "discrete convolution bounds",
            CheckId::A8 => "invariance suite",
        }
    }
}

impl std::fmt::Display for CheckId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Ceilings for measured constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ceilings {
    /// `||Nf||_1 / value` must lie in `[1/bracket, bracket]`.
    pub hajlasz_bracket: f64,
    /// Largest allowed max/min ratio of a constant across fixtures.
    pub spread: f64,
    pub cz_constant: f64,
    pub overlap: usize,
    pub atomic_constant: f64,
    pub h1_atom: f64,
    pub convolution: f64,
    /// Allowed growth of `||u_r - f||_1` when `r` halves.
    pub convolution_slack: f64,
}

impl Default for Ceilings {
    fn default() -> Self {
        Ceilings {
            hajlasz_bracket: 1e2,
            spread: 10.0,
            cz_constant: 1e3,
            overlap: 64,
            atomic_constant: 1e3,
            h1_atom: 1e2,
            convolution: 1e2,
            convolution_slack: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "spec_list")]
    pub fixtures: Vec<SpaceSpec>,
    /// Clouds of growing size for the Hajłasz spread.
    #[serde(with = "spec_list")]
    pub hajlasz_clouds: Vec<SpaceSpec>,
    pub fields: Vec<FieldSpec>,
    pub checks: Vec<CheckId>,
    /// Overrides the per-space default `q`.
    pub q: Option<f64>,
    pub alpha_points: usize,
    pub cz_flavors: Vec<CzFlavor>,
    pub atom_flavors: Vec<AtomKind>,
    pub atoms_per_fixture: usize,
    pub seed: u64,
    /// `(grad f)+` runs on fixtures up to this size.
    pub grad_plus_max_n: usize,
    /// Convolution radii in units of the space spacing, largest first.
    pub convolution_scales: Vec<f64>,
    pub ceilings: Ceilings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fixtures: vec![
                SpaceSpec::Path { n: 4, spacing: 1.0 },
                SpaceSpec::Cycle { n: 8 },
                SpaceSpec::Grid { k: 4 },
                SpaceSpec::Cloud { n: 64, seed: 7 },
                SpaceSpec::Cloud { n: 256, seed: 11 },
            ],
            hajlasz_clouds: vec![
                SpaceSpec::Cloud { n: 16, seed: 7 },
                SpaceSpec::Cloud { n: 64, seed: 7 },
                SpaceSpec::Cloud { n: 256, seed: 11 },
            ],
            fields: vec![
                FieldSpec::Linear,
                FieldSpec::Bump { seed: 1 },
                FieldSpec::RandomLipschitz { seed: 2 },
                FieldSpec::IndicatorSmoothed,
            ],
            checks: CheckId::ALL.to_vec(),
            q: None,
            alpha_points: 5,
            cz_flavors: vec![CzFlavor::Homogeneous, CzFlavor::Tilde, CzFlavor::M11],
            atom_flavors: vec![AtomKind::HsMoment, AtomKind::HsSize, AtomKind::HsNonhomog, AtomKind::Ls],
            atoms_per_fixture: 20,
            seed: 2024,
            grad_plus_max_n: 64,
            convolution_scales: vec![2.0, 1.0, 0.5, 0.25],
            ceilings: Ceilings::default(),
        }
    }
}

impl ExperimentConfig {
    /// The default matrix restricted to P4.
    pub fn p4_only() -> Self {
        ExperimentConfig {
            fixtures: vec![SpaceSpec::Path { n: 4, spacing: 1.0 }],
            hajlasz_clouds: Vec::new(),
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha_points == 0 {
            bail!("alpha_points must be positive");
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q.is_finite()) {
                bail!("q = {q} must be a positive number");
            }
        }
        if self.convolution_scales.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            bail!("convolution scales must be positive");
        }
        if self.convolution_scales.windows(2).any(|w| w[1] >= w[0]) {
            bail!("convolution scales must be strictly decreasing");
        }
        if self.atom_flavors.contains(&AtomKind::H1) {
            bail!("h1 atoms are checked by A5, not constructed");
        }
        Ok(())
    }
}

/// Space specs as their short string form, e.g. `"cloud(64,7)"`.
mod spec_list {
    use hsdecomp_core::SpaceSpec;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(specs: &[SpaceSpec], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(specs.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<SpaceSpec>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_matrix() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"cloud(64,7)\""));
        assert!(text.contains("\"random-lipschitz(2)\""));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"fixtures": ["torus(3)"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"fields": ["cubic"]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"convolution_scales": [1, 2]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"alpha_points": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"typo": 1}"#).is_err());
    }
}
