//! Two-codebook scheme for causal side information.
//!
//! `C1` holds `ceil(2^{n(I(X;W1)+m)})` W1-sequences; for each `k`, `C2(k)`
//! holds `ceil(2^{n(I(X;W2|W1)+m)})` W2-sequences drawn given `C1[k]`.
//! Codeword `k` of `C1` and codeword `j` of `C2(k)` come from their own
//! derived streams, so a book can be held in memory or regenerated on
//! demand with identical contents. The encoder sends the first index whose
//! codeword is jointly typical with the source block.

use rayon::prelude::*;

use super::codebook::{nominal_size, Codebook, ConditionalSampler, TupleTest};
use super::{aggregate, block_distortion, index_rate, SimConfig, SimReport, SizeEntry, SizeReport, Storage, TrialRecord, TRIAL};
use crate::causal::{axis, causal_joint, causal_rates, evaluate_causal, CausalAuxChannel, CausalDecoderRuleSet};
use crate::error::{Error, Result};
use crate::prob::{sample_iid, Symbol, SourceSpec};
use crate::rng::{derive_seed, derived_rng};

const TAG_C1: u64 = 0xc1;
const TAG_C2: u64 = 0xc2;

const EVENTS: [&str; 4] = ["e1", "e2", "e3", "scan_exhausted"];

#[derive(Clone, Debug)]
struct Stored {
    c1: Codebook,
    c2: Vec<Codebook>,
}

/// The causal scheme's codebooks, stored or regenerated per index.
#[derive(Clone, Debug)]
pub struct CausalCodebooks {
    n: usize,
    seed: u64,
    max_retries: u32,
    m1: u128,
    m2: u128,
    sizes: SizeReport,
    scan_limit: u64,
    w1_gen: ConditionalSampler,
    w2_gen: ConditionalSampler,
    w1_test: TupleTest,
    w12_test: TupleTest,
    x_test: TupleTest,
    xw1_test: TupleTest,
    xw12_test: TupleTest,
    stored: Option<Stored>,
}

/// Encoder output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalEncoding {
    Indices { k: u64, j: u64 },
    /// Source block atypical.
    E1,
    /// No W1 codeword jointly typical with `x`.
    E2,
    /// No W2 codeword in `C2(k)` jointly typical with `(x, w1)`.
    E3 { k: u64 },
    /// On-demand scan reached its budget before the end of the book.
    ScanExhausted,
}

impl CausalCodebooks {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `(|C1|, |C2(k)|)`, saturating.
    pub fn sizes(&self) -> (u128, u128) {
        (self.m1, self.m2)
    }

    pub fn size_report(&self) -> &SizeReport {
        &self.sizes
    }

    pub fn is_materialized(&self) -> bool {
        self.stored.is_some()
    }

    fn draw_w1(&self, k: u64) -> Vec<Symbol> {
        let mut rng = derived_rng(self.seed, &[TAG_C1, k]);
        let mut w = vec![0; self.n];
        let mut counts = Vec::new();
        for _ in 0..=self.max_retries {
            self.w1_gen.sample_seq(&[], &mut w, &mut rng);
            if self.w1_test.check(&[&w], &mut counts) {
                break;
            }
        }
        w
    }

    fn draw_w2(&self, k: u64, j: u64, w1: &[Symbol]) -> Vec<Symbol> {
        let mut rng = derived_rng(self.seed, &[TAG_C2, k, j]);
        let mut w = vec![0; self.n];
        let mut counts = Vec::new();
        for _ in 0..=self.max_retries {
            self.w2_gen.sample_seq(&[w1], &mut w, &mut rng);
            if self.w12_test.check(&[w1, &w], &mut counts) {
                break;
            }
        }
        w
    }

    /// Codeword `k` of `C1`.
    pub fn w1(&self, k: u64) -> Result<Vec<Symbol>> {
        self.check_index(k, self.m1)?;
        Ok(match &self.stored {
            Some(s) => s.c1.get(k as usize).to_vec(),
            None => self.draw_w1(k),
        })
    }

    /// Codeword `j` of `C2(k)`.
    pub fn w2(&self, k: u64, j: u64) -> Result<Vec<Symbol>> {
        self.check_index(k, self.m1)?;
        self.check_index(j, self.m2)?;
        Ok(match &self.stored {
            Some(s) => s.c2[k as usize].get(j as usize).to_vec(),
            None => self.draw_w2(k, j, &self.draw_w1(k)),
        })
    }

    fn check_index(&self, i: u64, size: u128) -> Result<()> {
        if (i as u128) < size {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                size: size.min(u64::MAX as u128) as u64,
            })
        }
    }
}

/// Build the causal codebooks. Fails when `Storage::Materialized` is
/// requested for books larger than the cap.
pub fn gen_causal_codebooks(source: &SourceSpec, aux: &CausalAuxChannel, cfg: &SimConfig) -> Result<CausalCodebooks> {
    cfg.validate()?;
    let joint = causal_joint(source, aux)?;
    let (i1, dr) = causal_rates(&joint);
    let n = cfg.n;
    let delta = cfg.resolved_delta();
    let (l1, m1) = nominal_size(n, i1 + cfg.rate_margin);
    let (l2, m2) = nominal_size(n, dr + cfg.rate_margin);
    let sizes = SizeReport::new(
        n,
        vec![
            SizeEntry::new("c1", l1, m1, m1, 1),
            SizeEntry::new("c2", l2, m2, m2, m1),
        ],
        cfg.codeword_cap,
    );
    let materialize = match cfg.storage {
        Storage::Auto => sizes.fits(),
        Storage::Materialized => {
            sizes.clone().require_fit()?;
            true
        }
        Storage::OnDemand => false,
    };
    let mut books = CausalCodebooks {
        n,
        seed: cfg.seed,
        max_retries: cfg.max_retries,
        m1,
        m2,
        scan_limit: (cfg.codeword_cap / n as u64).max(1),
        sizes,
        w1_gen: ConditionalSampler::new(&joint, &[], axis::W1),
        w2_gen: ConditionalSampler::new(&joint, &[axis::W1], axis::W2),
        w1_test: TupleTest::new(&joint, &[axis::W1], n, delta)?,
        w12_test: TupleTest::new(&joint, &[axis::W1, axis::W2], n, delta)?,
        x_test: TupleTest::new(&joint, &[axis::X], n, delta)?,
        xw1_test: TupleTest::new(&joint, &[axis::X, axis::W1], n, delta)?,
        xw12_test: TupleTest::new(&joint, &[axis::X, axis::W1, axis::W2], n, delta)?,
        stored: None,
    };
    if materialize {
        let rows: Vec<(Vec<Symbol>, Codebook)> = (0..m1 as u64)
            .into_par_iter()
            .map(|k| {
                let w1 = books.draw_w1(k);
                let mut c2 = Codebook::with_capacity(n, m2 as usize);
                for j in 0..m2 as u64 {
                    let w2 = books.draw_w2(k, j, &w1);
                    c2.push_with(|s| s.copy_from_slice(&w2));
                }
                (w1, c2)
            })
            .collect();
        let mut c1 = Codebook::with_capacity(n, m1 as usize);
        let mut c2s = Vec::with_capacity(m1 as usize);
        for (w1, c2) in rows {
            c1.push_with(|s| s.copy_from_slice(&w1));
            c2s.push(c2);
        }
        books.stored = Some(Stored { c1, c2: c2s });
    }
    Ok(books)
}

/// First index in `0..size` passing `hit`, scanning at most `limit` indices.
fn first_match(size: u128, limit: u64, mut hit: impl FnMut(u64) -> bool) -> std::result::Result<Option<u64>, ()> {
    let end = size.min(limit as u128) as u64;
    for k in 0..end {
        if hit(k) {
            return Ok(Some(k));
        }
    }
    if (end as u128) < size {
        Err(())
    } else {
        Ok(None)
    }
}

/// Two-step first-typical-match encoder.
pub fn encode_causal(x: &[Symbol], books: &CausalCodebooks) -> Result<CausalEncoding> {
    if x.len() != books.n {
        return Err(Error::LengthMismatch(vec![books.n, x.len()]));
    }
    let mut counts = Vec::new();
    if !books.x_test.check(&[x], &mut counts) {
        return Ok(CausalEncoding::E1);
    }
    let limit = if books.stored.is_some() { u64::MAX } else { books.scan_limit };
    let mut w1_found = Vec::new();
    let k = match first_match(books.m1, limit, |k| {
        let w1 = match &books.stored {
            Some(s) => s.c1.get(k as usize).to_vec(),
            None => books.draw_w1(k),
        };
        let hit = books.xw1_test.check(&[x, &w1], &mut counts);
        if hit {
            w1_found = w1;
        }
        hit
    }) {
        Ok(Some(k)) => k,
        Ok(None) => return Ok(CausalEncoding::E2),
        Err(()) => return Ok(CausalEncoding::ScanExhausted),
    };
    let j = match first_match(books.m2, limit, |j| {
        let hit = match &books.stored {
            Some(s) => books
                .xw12_test
                .check(&[x, &w1_found, s.c2[k as usize].get(j as usize)], &mut counts),
            None => {
                let w2 = books.draw_w2(k, j, &w1_found);
                books.xw12_test.check(&[x, &w1_found, &w2], &mut counts)
            }
        };
        hit
    }) {
        Ok(Some(j)) => j,
        Ok(None) => return Ok(CausalEncoding::E3 { k }),
        Err(()) => return Ok(CausalEncoding::ScanExhausted),
    };
    Ok(CausalEncoding::Indices { k, j })
}

/// Symbol-by-symbol reconstructions `[y1, z1, y2, z2]`. Position `i` uses
/// only `y[i]`, `z[i]` and the codewords named by the indices.
pub fn decode_causal(
    k: u64,
    j: u64,
    y: &[Symbol],
    z: &[Symbol],
    books: &CausalCodebooks,
    dec: &CausalDecoderRuleSet,
) -> Result<[Vec<Symbol>; 4]> {
    if y.len() != books.n || z.len() != books.n {
        return Err(Error::LengthMismatch(vec![books.n, y.len(), z.len()]));
    }
    let w1 = books.w1(k)?;
    let w2 = books.w2(k, j)?;
    let at = |i: usize| {
        [
            dec.g_y1.apply(&[y[i] as usize, w1[i] as usize]) as Symbol,
            dec.g_z1.apply(&[z[i] as usize, w1[i] as usize]) as Symbol,
            dec.g_y2.apply(&[y[i] as usize, w1[i] as usize, w2[i] as usize]) as Symbol,
            dec.g_z2.apply(&[z[i] as usize, w1[i] as usize, w2[i] as usize]) as Symbol,
        ]
    };
    let mut out: [Vec<Symbol>; 4] = Default::default();
    for i in 0..books.n {
        for (o, v) in out.iter_mut().zip(at(i)) {
            o.push(v);
        }
    }
    Ok(out)
}

/// Run `cfg.trials` independent blocks through encoder and decoders.
pub fn simulate_causal(
    source: &SourceSpec,
    aux: &CausalAuxChannel,
    dec: &CausalDecoderRuleSet,
    cfg: &SimConfig,
) -> Result<SimReport> {
    let books = gen_causal_codebooks(source, aux, cfg)?;
    let point = evaluate_causal(source, aux, dec)?;
    let records: Vec<TrialRecord> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<TrialRecord> {
            let xyz = sample_iid(source.pxyz(), cfg.n, derive_seed(cfg.seed, &[TRIAL, t]));
            let mut rec = TrialRecord {
                trial: t,
                event: None,
                indices: Vec::new(),
                distortions: None,
                decode_failures: Vec::new(),
            };
            match encode_causal(&xyz[0], &books)? {
                CausalEncoding::Indices { k, j } => {
                    let xh = decode_causal(k, j, &xyz[1], &xyz[2], &books, dec)?;
                    let mut d = [0.0; 4];
                    for (m, (xh, dm)) in xh.iter().zip(source.distortions()).enumerate() {
                        d[m] = block_distortion(&xyz[0], xh, dm);
                    }
                    rec.indices = vec![k, j];
                    rec.distortions = Some(d);
                }
                CausalEncoding::E1 => rec.event = Some("e1".into()),
                CausalEncoding::E2 => rec.event = Some("e2".into()),
                CausalEncoding::E3 { k } => {
                    rec.event = Some("e3".into());
                    rec.indices = vec![k];
                }
                CausalEncoding::ScanExhausted => rec.event = Some("scan_exhausted".into()),
            }
            Ok(rec)
        })
        .collect::<Result<_>>()?;
    let (error_counts, trials_ok, empirical) = aggregate(&records, &EVENTS);
    let rates = [
        ("r1".to_string(), index_rate(books.m1, cfg.n)),
        ("delta_r".to_string(), index_rate(books.m2, cfg.n)),
    ]
    .into_iter()
    .collect();
    Ok(SimReport {
        scheme: "causal".into(),
        config: cfg.clone(),
        delta: cfg.resolved_delta(),
        sizes: books.sizes.clone(),
        rates,
        error_counts,
        trials_ok,
        empirical_distortions: empirical,
        single_letter: point.achieved,
        trials_detail: records,
    })
}
