//! JSON model files. The verification report travels inside the file so a
//! model's certificate can be checked wherever the model is used.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mlp::{InputMap, Mlp, MonotoneMlp, OutputMap};
use super::verify::VerificationReport;
use crate::error::{Error, Result};
use crate::geometry::Domain;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub sizes: Vec<usize>,
    pub theta: f64,
    pub input_map: InputMap,
    pub output_map: OutputMap,
    /// Row-major weight matrices, one per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    /// Whether the weights are constrained non-negative.
    pub monotone: bool,
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub verification: Option<VerificationReport>,
}

/// A loaded model with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub net: Mlp,
    pub monotone: bool,
    pub domain: Option<Domain>,
    pub verification: Option<VerificationReport>,
}

impl SavedModel {
    pub fn monotone(net: MonotoneMlp, domain: Option<Domain>, verification: Option<VerificationReport>) -> Self {
        SavedModel {
            net: net.into_mlp(),
            monotone: true,
            domain,
            verification,
        }
    }

    pub fn unconstrained(net: Mlp, domain: Option<Domain>) -> Self {
        SavedModel {
            net,
            monotone: false,
            domain,
            verification: None,
        }
    }

    /// True when the model is monotone and carries a passing, consistent
    /// report.
    pub fn is_certified(&self) -> bool {
        self.monotone
            && self.net.has_nonneg_weights()
            && self.verification.as_ref().is_some_and(|r| r.pass && r.is_consistent())
    }

    pub fn monotone_net(&self) -> Result<MonotoneMlp> {
        if !self.monotone {
            return Err(Error::InvalidModel("model is not monotone".into()));
        }
        MonotoneMlp::try_from_mlp(self.net.clone())
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            version: MODEL_VERSION,
            sizes: self.net.sizes.clone(),
            theta: self.net.theta,
            input_map: self.net.input_map.clone(),
            output_map: self.net.output_map,
            weights: self.net.weights.clone(),
            biases: self.net.biases.clone(),
            monotone: self.monotone,
            domain: self.domain.clone(),
            verification: self.verification.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: MODEL_VERSION,
            });
        }
        let net = Mlp {
            sizes: file.sizes,
            theta: file.theta,
            weights: file.weights,
            biases: file.biases,
            input_map: file.input_map,
            output_map: file.output_map,
        };
        net.validate()?;
        if file.monotone && !net.has_nonneg_weights() {
            return Err(Error::InvalidModel("monotone model has a negative weight".into()));
        }
        if let Some(d) = &file.domain {
            if d.dim() != net.input_dim() {
                return Err(Error::InvalidModel("domain dimension differs from the input size".into()));
            }
        }
        Ok(SavedModel {
            net,
            monotone: file.monotone,
            domain: file.domain,
            verification: file.verification,
        })
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, &self.to_file())?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        SavedModel::from_file(serde_json::from_reader(reader)?)
    }
}

pub fn model_save(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let w = std::io::BufWriter::new(std::fs::File::create(path)?);
    model.write_json(w)
}

pub fn model_load(path: impl AsRef<Path>) -> Result<SavedModel> {
    SavedModel::read_json(std::io::BufReader::new(std::fs::File::open(path)?))
}
