//! Monte-Carlo simulation of the random-coding schemes.
//!
//! Both schemes draw codebooks once per seed and share them read-only
//! across trials. Trial `t` draws its source block from the stream
//! `(seed, TRIAL, t)`, so reports do not depend on worker count.

mod causal;
pub mod codebook;
mod noncausal;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{DistortionMatrix, DistortionQuad, Symbol};
use crate::text::sig9;

pub use causal::{
    decode_causal, encode_causal, gen_causal_codebooks, simulate_causal, CausalCodebooks, CausalEncoding,
};
pub use noncausal::{
    decode_nc_y, decode_nc_z, encode_nc, gen_nc_codebooks, simulate_nc, DecodeFailure, NcCodebooks, NcEncoding,
    NcChosen, NcIndices, Stage, SubBins, Book, YRecovered, ZRecovered,
};

/// Stream tag for per-trial source blocks.
const TRIAL: u64 = 0x7472;

/// How causal codebooks are held in memory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Storage {
    /// Materialize when the books fit `codeword_cap`, else regenerate on demand.
    #[default]
    Auto,
    Materialized,
    OnDemand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Blocklength.
    pub n: usize,
    /// Typicality slack; `2/sqrt(n)` when absent.
    pub delta: Option<f64>,
    /// Bits per symbol added to every codebook exponent.
    pub rate_margin: f64,
    pub trials: usize,
    pub seed: u64,
    /// Limit on stored codeword symbols. For on-demand causal books it also
    /// bounds the symbols scanned per encoding step.
    pub codeword_cap: u64,
    pub storage: Storage,
    /// Redraws of an atypical causal codeword before keeping the last draw.
    pub max_retries: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            delta: None,
            rate_margin: 0.1,
            trials: 100,
            seed: 0,
            codeword_cap: 1 << 22,
            storage: Storage::Auto,
            max_retries: 64,
        }
    }
}

impl SimConfig {
    pub fn resolved_delta(&self) -> f64 {
        self.delta.unwrap_or(2.0 / (self.n.max(1) as f64).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("blocklength must be at least 1".into()));
        }
        if !self.resolved_delta().is_finite() || self.resolved_delta() <= 0.0 {
            return Err(Error::InvalidArgument("delta must be positive".into()));
        }
        if !self.rate_margin.is_finite() || self.rate_margin <= 0.0 {
            return Err(Error::InvalidArgument("rate margin must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("need at least one trial".into()));
        }
        Ok(())
    }
}

/// Size of one codebook family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeEntry {
    pub name: String,
    /// `log2` of the nominal codebook size.
    pub log2_size: f64,
    /// Codewords per book, saturating.
    pub size: u128,
    /// Bins per book (equal to `size` when unbinned).
    pub bins: u128,
    /// Number of books in the family, saturating.
    pub books: u128,
    /// Sub-bins per bin, for two-level binning.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_bins: Option<u128>,
}

impl SizeEntry {
    pub(crate) fn new(name: &str, log2_size: f64, size: u128, bins: u128, books: u128) -> Self {
        Self {
            name: name.into(),
            log2_size,
            size,
            bins,
            books,
            sub_bins: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n: usize,
    pub entries: Vec<SizeEntry>,
    /// Symbols needed to store every book, saturating.
    pub total_symbols: u128,
    pub cap: u128,
}

impl SizeReport {
    fn new(n: usize, entries: Vec<SizeEntry>, cap: u64) -> Self {
        let total_symbols = entries
            .iter()
            .fold(0u128, |acc, e| acc.saturating_add(e.size.saturating_mul(e.books)))
            .saturating_mul(n as u128);
        Self {
            n,
            entries,
            total_symbols,
            cap: cap as u128,
        }
    }

    pub fn fits(&self) -> bool {
        self.total_symbols <= self.cap
    }

    fn require_fit(self) -> Result<Self> {
        if self.fits() {
            Ok(self)
        } else {
            Err(Error::CapExceeded(Box::new(self)))
        }
    }
}

/// Result of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Encoder error event, if any.
    pub event: Option<String>,
    /// Transmitted indices, empty when encoding failed.
    pub indices: Vec<u64>,
    /// Per-decoder empirical distortions when every decoder succeeded.
    pub distortions: Option<[f64; 4]>,
    /// Decoder-side failures, including wrong unique recoveries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decode_failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheme: String,
    pub config: SimConfig,
    pub delta: f64,
    pub sizes: SizeReport,
    /// Rates actually spent: `log2` of each transmitted index range over `n`.
    pub rates: BTreeMap<String, f64>,
    pub error_counts: BTreeMap<String, u64>,
    pub trials_ok: u64,
    /// Mean over successful trials; absent when none succeeded.
    pub empirical_distortions: Option<DistortionQuad>,
    /// Expected distortions of the same channel and decoders.
    pub single_letter: DistortionQuad,
    pub trials_detail: Vec<TrialRecord>,
}

impl SimReport {
    /// Trials lost to an encoder error event.
    pub fn encoder_errors(&self) -> u64 {
        self.trials_detail.iter().filter(|t| t.event.is_some()).count() as u64
    }

    /// Unique decodings that disagreed with the encoder.
    pub fn wrong_unique(&self) -> u64 {
        self.error_counts
            .iter()
            .filter(|(k, _)| k.ends_with("_wrong"))
            .map(|(_, v)| v)
            .sum()
    }

    /// Trial rows as CSV.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from("trial,event,indices,d_y1,d_z1,d_y2,d_z2,decode_failures\n");
        for t in &self.trials_detail {
            let idx = t.indices.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
            let d = match t.distortions {
                Some(d) => d.iter().map(|&v| sig9(v)).collect::<Vec<_>>().join(","),
                None => ",,,".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.trial,
                t.event.as_deref().unwrap_or(""),
                idx,
                d,
                t.decode_failures.join(" ")
            ));
        }
        out
    }
}

/// `log2(count) / n`.
pub(crate) fn index_rate(count: u128, n: usize) -> f64 {
    (count as f64).log2() / n as f64
}

/// Average per-symbol distortion.
pub(crate) fn block_distortion(x: &[Symbol], xh: &[Symbol], d: &DistortionMatrix) -> f64 {
    let s: f64 = x.iter().zip(xh).map(|(&a, &b)| d.get(a as usize, b as usize)).sum();
    s / x.len() as f64
}

/// Fold trial records into counts and mean distortions.
pub(crate) fn aggregate(
    records: &[TrialRecord],
    keys: &[&str],
) -> (BTreeMap<String, u64>, u64, Option<DistortionQuad>) {
    let mut counts: BTreeMap<String, u64> = keys.iter().map(|k| (k.to_string(), 0)).collect();
    let mut ok = 0u64;
    let mut sums = [0.0; 4];
    for r in records {
        if let Some(e) = &r.event {
            *counts.entry(e.clone()).or_default() += 1;
        }
        for f in &r.decode_failures {
            *counts.entry(f.clone()).or_default() += 1;
        }
        if let Some(d) = r.distortions {
            ok += 1;
            for (s, v) in sums.iter_mut().zip(d) {
                *s += v;
            }
        }
    }
    let mean = (ok > 0).then(|| DistortionQuad::from_array(sums.map(|s| s / ok as f64)));
    (counts, ok, mean)
}
