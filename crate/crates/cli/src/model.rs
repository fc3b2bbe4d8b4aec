//! Versioned JSON model files.

use std::path::Path;

use efmix::learners::MixtureModel;
use efmix::{Family, Natural};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT: &str = "efmix-model/1";

/// Human-readable parameters; the natural coordinates are authoritative.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Source {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    /// Absent for dropped components.
    pub source: Option<Source>,
    pub natural: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub algorithm: String,
    pub init: String,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub heuristic: String,
    pub empty_clusters: String,
    pub ridge: Option<f64>,
    pub outer_iterations: usize,
    pub termination: String,
    pub avg_loglik: f64,
    pub avg_complete_loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub family: String,
    pub dim: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMeta>,
}

fn source_of(fam: &Family, theta: &Natural) -> Result<Source, CliError> {
    Ok(match fam {
        Family::Gaussian(g) => {
            let s = g.from_natural(theta)?;
            let d = g.dim();
            Source {
                mean: Some(s.mean.iter().copied().collect()),
                cov: Some((0..d).map(|i| (0..d).map(|j| s.cov[(i, j)]).collect()).collect()),
                ..Source::default()
            }
        }
        Family::Rayleigh(r) => Source {
            sigma: Some(r.from_natural(theta)?.sigma),
            ..Source::default()
        },
        Family::Poisson(p) => Source {
            rate: Some(p.from_natural(theta)?.rate),
            ..Source::default()
        },
    })
}

pub fn support_dim(fam: &Family) -> usize {
    match fam {
        Family::Gaussian(g) => g.dim(),
        _ => 1,
    }
}

impl ModelFile {
    pub fn new(fam: &Family, model: &MixtureModel, fit: Option<FitMeta>) -> Result<Self, CliError> {
        let components = model
            .weights()
            .iter()
            .zip(model.components())
            .map(|(w, c)| {
                Ok(Component {
                    weight: *w,
                    source: c.as_ref().map(|t| source_of(fam, t)).transpose()?,
                    natural: c.as_ref().map(|t| t.as_slice().to_vec()),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(Self {
            format: FORMAT.into(),
            family: model.family().into(),
            dim: support_dim(fam),
            k: model.k(),
            weights: model.weights().to_vec(),
            components,
            fit,
        })
    }

    pub fn to_model(&self) -> Result<(Family, MixtureModel), CliError> {
        let bad = |msg: String| CliError::Data(format!("invalid model file: {msg}"));
        if self.format != FORMAT {
            return Err(bad(format!("unsupported format {:?}", self.format)));
        }
        let fam = Family::from_name(&self.family, self.dim).map_err(|e| bad(e.to_string()))?;
        if self.k != self.weights.len() || self.k != self.components.len() {
            return Err(bad("k disagrees with weights or components".into()));
        }
        let comps = self.components.iter().map(|c| c.natural.clone().map(Natural::new)).collect();
        let model = MixtureModel::new(self.family.clone(), self.weights.clone(), comps).map_err(|e| bad(e.to_string()))?;
        model.validate(&fam).map_err(|e| bad(e.to_string()))?;
        Ok((fam, model))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("invalid model file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use efmix::families::{Rayleigh, RayleighSource};

    fn rayleigh_file() -> ModelFile {
        let r = Rayleigh;
        let model = MixtureModel::new(
            "rayleigh",
            vec![0.3, 0.7, 0.0],
            vec![
                Some(r.to_natural(RayleighSource::new(1.0 / 3.0).unwrap())),
                Some(r.to_natural(RayleighSource::new(2.718281828459045).unwrap())),
                None,
            ],
        )
        .unwrap();
        ModelFile::new(&Family::Rayleigh(r), &model, None).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let f = rayleigh_file();
        let json = f.to_json();
        let back = ModelFile::from_json(&json).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.to_json(), json);
        let (_, m) = back.to_model().unwrap();
        let (_, orig) = f.to_model().unwrap();
        for (a, b) in m.components().iter().zip(orig.components()) {
            match (a, b) {
                (Some(a), Some(b)) => assert_eq!(a.as_slice()[0].to_bits(), b.as_slice()[0].to_bits()),
                (None, None) => {}
                _ => panic!("activity changed"),
            }
        }
    }

    #[test]
    fn unknown_fields_are_ignored() {
        let json = rayleigh_file().to_json().replacen('{', "{\n  \"comment\": \"later\",", 1);
        assert!(ModelFile::from_json(&json).is_ok());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut f = rayleigh_file();
        f.format = "efmix-model/9".into();
        assert!(matches!(f.to_model(), Err(CliError::Data(_))));
    }
}
