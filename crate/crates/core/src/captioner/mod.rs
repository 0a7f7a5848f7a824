//! The four image-conditioned GRU caption generators.
//!
//! All architectures share a word embedding table, a GRU and an affine output
//! layer followed by softmax. They differ only in where the projected image
//! enters:
//!
//! | kind        | image projection | enters as                              |
//! |-------------|------------------|----------------------------------------|
//! | init-inject | `D -> h`         | initial hidden state                   |
//! | pre-inject  | `D -> m`         | first GRU input, before START          |
//! | par-inject  | `D -> m`         | concatenated to every word embedding   |
//! | merge       | `D -> h`         | concatenated to the hidden state only  |
//!
//! The "multimodal vector" is the hidden state for the inject kinds and the
//! `[hidden; image]` concatenation for merge.

mod checkpoint;
mod generate;
mod params;
mod replay;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_params, save_params, FORMAT_VERSION, MAGIC};
pub use generate::generate;
pub use params::{ModelDims, ModelParams};
pub use replay::{build_replay, forward_replay, gru_step, ParamNodes, ReplayBuilder, ReplayGraph, StepNodes};

use crate::error::Error;
use crate::tensor::Tensor;

/// Reserved token ids shared by every vocabulary.
pub const UNK: usize = 0;
pub const START: usize = 1;
pub const END: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArchitectureKind {
    #[serde(rename = "init")]
    InitInject,
    #[serde(rename = "pre")]
    PreInject,
    #[serde(rename = "par")]
    ParInject,
    Merge,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 4] = [
        ArchitectureKind::InitInject,
        ArchitectureKind::PreInject,
        ArchitectureKind::ParInject,
        ArchitectureKind::Merge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::InitInject => "init",
            ArchitectureKind::PreInject => "pre",
            ArchitectureKind::ParInject => "par",
            ArchitectureKind::Merge => "merge",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ArchitectureKind::InitInject => 0,
            ArchitectureKind::PreInject => 1,
            ArchitectureKind::ParInject => 2,
            ArchitectureKind::Merge => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_inject(self) -> bool {
        self != ArchitectureKind::Merge
    }

    /// Width of the projected image vector.
    pub fn projection_width(self, dims: &ModelDims) -> usize {
        match self {
            ArchitectureKind::InitInject | ArchitectureKind::Merge => dims.hidden,
            ArchitectureKind::PreInject | ArchitectureKind::ParInject => dims.embed,
        }
    }

    /// Width of the GRU input vector.
    pub fn gru_input_width(self, dims: &ModelDims) -> usize {
        match self {
            ArchitectureKind::ParInject => 2 * dims.embed,
            _ => dims.embed,
        }
    }

    /// Width of the vector fed to the output layer.
    pub fn multimodal_width(self, dims: &ModelDims) -> usize {
        match self {
            ArchitectureKind::Merge => 2 * dims.hidden,
            _ => dims.hidden,
        }
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "init" | "init-inject" => Ok(ArchitectureKind::InitInject),
            "pre" | "pre-inject" => Ok(ArchitectureKind::PreInject),
            "par" | "par-inject" => Ok(ArchitectureKind::ParInject),
            "merge" => Ok(ArchitectureKind::Merge),
            other => Err(Error::Config(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Internal state of one prediction step of a teacher-forced replay.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub input_token: usize,
    pub hidden: Tensor,
    pub multimodal: Tensor,
    pub logits: Tensor,
    pub softmax: Tensor,
}
