//! Problem files: one JSON document holding every input a command may need.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sirefine::channels::{ChannelConfig, ChannelFile, StateChannel};
use sirefine::noncausal::NcSizes;
use sirefine::search::SearchConfig;
use sirefine::sim::SimConfig;
use sirefine::{DistortionQuad, SourceSpec};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub target: Option<DistortionQuad>,
    /// Auxiliary channel for `simulate`, causal or non-causal form.
    #[serde(default)]
    pub aux: Option<serde_json::Value>,
    #[serde(default)]
    pub channels: Option<Channels>,
    #[serde(default)]
    pub capacities: Option<Capacities>,
    #[serde(default)]
    pub search: Option<SearchConfig>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub channel_config: Option<ChannelConfig>,
    /// `[|W1|, |W2|]` for the causal search.
    #[serde(default)]
    pub causal_sizes: Option<[usize; 2]>,
    #[serde(default)]
    pub nc_sizes: Option<NcSizes>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channels {
    pub stage1: ChannelFile,
    #[serde(default)]
    pub stage2: Option<ChannelFile>,
}

impl Channels {
    pub fn stage1(&self) -> Result<StateChannel> {
        self.stage1.clone().try_into().context("stage1 channel")
    }

    pub fn stage2(&self) -> Result<Option<StateChannel>> {
        self.stage2
            .clone()
            .map(|c| c.try_into().context("stage2 channel"))
            .transpose()
    }
}

/// Channel capacities and uses per source symbol for the separation test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Capacities {
    pub c1: f64,
    pub c2: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl ProblemFile {
    pub fn source(&self) -> Result<&SourceSpec> {
        self.source.as_ref().ok_or_else(|| anyhow!("problem file has no `source`"))
    }
}

/// An input file with its digest, recorded in the run manifest.
#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Reads every input file and remembers its digest.
#[derive(Default)]
pub struct Inputs {
    pub digests: Vec<InputDigest>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.digests.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn json<T: DeserializeOwned>(&mut self, path: &Path) -> Result<T> {
        let text = self.read(path)?;
        serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
    }
}
