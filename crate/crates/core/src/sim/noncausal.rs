//! Five-codebook nested-binning scheme for non-causal side information.
//!
//! Books, with `m` the rate margin and every exponent scaled by `n`:
//!
//! | book              | size exponent               | bin exponent                   |
//! |-------------------|-----------------------------|--------------------------------|
//! | `w1`              | `I(X;W1) + m`               | `I(X;W1|Y) + 2m`               |
//! | `v(i)`            | `I(X;V|W1) + m`             | `I(X;V|W1,Z) + 2m`             |
//! | `w2(i,j)`         | `I(X;W2|W1,V) + m`          | `I(X;W2|W1,V,Z) + 2m`          |
//! | `w3(i,j)`         | `I(X;W3|W1,V) + m`          | `I(X;W3|W1,V,Y) + 2m`          |
//! | `w4(i,j,k,l)`     | `I(X;W4|W1,W2,W3,V) + m`    | `I(X;W4|W1,W2,W3,V,Z) + 2m`    |
//!
//! Each `v` bin is split into `ceil(2^{n(I(Z;V|W1) - I(Y;V|W1))})`
//! sub-bins. Stage 1 sends the bins of `w1`, `v`, `w2`; stage 2 sends the
//! `v` sub-bin and the bins of `w3`, `w4`.

use rayon::prelude::*;

use super::codebook::{nominal_size, random_bins, Binning, Codebook, ConditionalSampler, TupleTest};
use super::{aggregate, block_distortion, index_rate, SimConfig, SimReport, SizeEntry, SizeReport, TrialRecord, TRIAL};
use crate::error::Result;
use crate::noncausal::{axis::*, inner_distortions, nc_joint, NcAuxChannel, NcDecoderRuleSet};
use crate::prob::info::cmi_axes;
use crate::prob::{sample_iid, Symbol, SourceSpec};
use crate::rng::{derive_seed, derived_rng};

const TAG_W1: u64 = 0x51;
const TAG_V: u64 = 0x52;
const TAG_W2: u64 = 0x53;
const TAG_W3: u64 = 0x54;
const TAG_W4: u64 = 0x55;

const KEYS: [&str; 19] = [
    "e1", "e2", "e3", "e4", "e5", "e6", "e7",
    "y1_none", "y1_ambiguous", "y1_wrong",
    "z1_none", "z1_ambiguous", "z1_wrong",
    "y2_none", "y2_ambiguous", "y2_wrong",
    "z2_none", "z2_ambiguous", "z2_wrong",
];

/// A codebook together with its bins.
#[derive(Clone, Debug)]
pub struct Book {
    pub words: Codebook,
    pub bins: Binning,
}

/// Second-level partition of every bin of a `v` book.
#[derive(Clone, Debug)]
pub struct SubBins {
    /// Sub-bin of each codeword, local to its bin.
    pub of: Vec<u32>,
    /// `members[bin][sub]` lists codeword indices.
    pub members: Vec<Vec<Vec<u32>>>,
}

impl SubBins {
    fn split(bins: &Binning, per_bin: u128) -> Self {
        let mut of = vec![0u32; bins.bin_of.len()];
        let members = bins
            .members
            .iter()
            .map(|group| {
                let s = (per_bin.min(group.len() as u128) as usize).max(1);
                let (base, extra) = (group.len() / s, group.len() % s);
                let mut pos = 0;
                (0..s)
                    .map(|b| {
                        let len = base + usize::from(b < extra);
                        let sub = group[pos..pos + len].to_vec();
                        for &c in &sub {
                            of[c as usize] = b as u32;
                        }
                        pos += len;
                        sub
                    })
                    .collect()
            })
            .collect();
        Self { of, members }
    }

    /// Sub-bins partition each bin of `bins` exactly.
    pub fn partitions(&self, bins: &Binning) -> bool {
        self.members.len() == bins.members.len()
            && self.members.iter().zip(&bins.members).all(|(subs, group)| {
                let mut flat: Vec<u32> = subs.iter().flatten().copied().collect();
                let mut g = group.clone();
                flat.sort_unstable();
                g.sort_unstable();
                flat == g
                    && subs
                        .iter()
                        .enumerate()
                        .all(|(s, m)| m.iter().all(|&c| self.of[c as usize] as usize == s))
            })
    }
}

#[derive(Debug)]
struct Tests {
    x: TupleTest,
    xw1: TupleTest,
    xw1v: TupleTest,
    xw1vw2: TupleTest,
    xw1vw3: TupleTest,
    xw1vw2w3: TupleTest,
    all: TupleTest,
    y_w1: TupleTest,
    y_w1v: TupleTest,
    y_w1vw3: TupleTest,
    z_w1: TupleTest,
    z_w1v: TupleTest,
    z_w1vw2: TupleTest,
    z_w1vw3: TupleTest,
    z_all: TupleTest,
}

impl Tests {
    fn new(j: &crate::prob::JointPmf, n: usize, d: f64) -> Result<Self> {
        let t = |axes: &[usize]| TupleTest::new(j, axes, n, d);
        Ok(Self {
            x: t(&[X])?,
            xw1: t(&[X, W1])?,
            xw1v: t(&[X, W1, V])?,
            xw1vw2: t(&[X, W1, V, W2])?,
            xw1vw3: t(&[X, W1, V, W3])?,
            xw1vw2w3: t(&[X, W1, V, W2, W3])?,
            all: t(&[X, W1, V, W2, W3, W4])?,
            y_w1: t(&[W1, Y])?,
            y_w1v: t(&[W1, V, Y])?,
            y_w1vw3: t(&[W1, V, W3, Y])?,
            z_w1: t(&[W1, Z])?,
            z_w1v: t(&[W1, V, Z])?,
            z_w1vw2: t(&[W1, V, W2, Z])?,
            z_w1vw3: t(&[W1, V, W3, Z])?,
            z_all: t(&[W1, V, W2, W3, W4, Z])?,
        })
    }
}

/// All codebooks of the non-causal scheme, held in memory.
#[derive(Debug)]
pub struct NcCodebooks {
    n: usize,
    /// Sizes of the `w1`, `v`, `w2`, `w3`, `w4` books.
    dims: [usize; 5],
    sizes: SizeReport,
    pub w1: Book,
    /// Indexed by `i`.
    pub v: Vec<Book>,
    /// Indexed by `i`.
    pub v_sub: Vec<SubBins>,
    /// Indexed by `i·|v| + j`.
    pub w2: Vec<Book>,
    /// Indexed by `i·|v| + j`.
    pub w3: Vec<Book>,
    /// Indexed by `((i·|v| + j)·|w2| + k)·|w3| + l`.
    pub w4: Vec<Book>,
    tests: Tests,
}

/// Codeword indices chosen by the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NcChosen {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

/// Transmitted bin indices: stage 1 `(b1, b2, b3)`, stage 2 `(b4s, b5, b6)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NcIndices {
    pub b1: usize,
    pub b2: usize,
    pub b3: usize,
    pub b4s: usize,
    pub b5: usize,
    pub b6: usize,
}

impl NcIndices {
    pub fn to_vec(self) -> Vec<u64> {
        [self.b1, self.b2, self.b3, self.b4s, self.b5, self.b6]
            .iter()
            .map(|&b| b as u64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NcEncoding {
    Encoded { indices: NcIndices, chosen: NcChosen },
    /// Error event `1..=7`.
    Failed { event: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    One,
    Two,
}

/// Why a decoder could not pick a unique codeword; the field names the book.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeFailure {
    NoneTypical(&'static str),
    AmbiguousBin(&'static str),
    /// A received index does not name a bin.
    InvalidIndex(&'static str),
}

impl DecodeFailure {
    pub fn book(&self) -> &'static str {
        match self {
            Self::NoneTypical(b) | Self::AmbiguousBin(b) | Self::InvalidIndex(b) => b,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::NoneTypical(_) | Self::InvalidIndex(_) => "none",
            Self::AmbiguousBin(_) => "ambiguous",
        }
    }
}

/// Codewords recovered by the Y decoder; stage-2 fields are `None` after stage 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct YRecovered {
    pub w1: usize,
    pub v: Option<usize>,
    pub w3: Option<usize>,
}

/// Codewords recovered by the Z decoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZRecovered {
    pub w1: usize,
    pub v: usize,
    pub w2: usize,
    pub w3: Option<usize>,
    pub w4: Option<usize>,
}

impl NcCodebooks {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Sizes of the `w1`, `v`, `w2`, `w3`, `w4` books.
    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn size_report(&self) -> &SizeReport {
        &self.sizes
    }

    fn ij(&self, i: usize, j: usize) -> usize {
        i * self.dims[1] + j
    }

    fn ijkl(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        (self.ij(i, j) * self.dims[2] + k) * self.dims[3] + l
    }

    /// Every bin and sub-bin partition is exact.
    pub fn partitions_exact(&self) -> bool {
        let books = std::iter::once(&self.w1)
            .chain(&self.v)
            .chain(&self.w2)
            .chain(&self.w3)
            .chain(&self.w4);
        books.into_iter().all(|b| b.bins.is_partition() && b.bins.bin_of.len() == b.words.len())
            && self.v.iter().zip(&self.v_sub).all(|(b, s)| s.partitions(&b.bins))
    }
}

fn make_book(
    n: usize,
    size: usize,
    bins: usize,
    gen: &ConditionalSampler,
    parents: &[&[Symbol]],
    seed: u64,
    stream: &[u64],
) -> Book {
    let mut rng = derived_rng(seed, stream);
    let mut words = Codebook::with_capacity(n, size);
    for _ in 0..size {
        words.push_with(|w| gen.sample_seq(parents, w, &mut rng));
    }
    let bins = random_bins(size, bins, &mut rng);
    Book { words, bins }
}

struct Family {
    name: &'static str,
    size_exp: f64,
    bin_exp: f64,
}

/// Generate every book. Fails with the size report when the books would
/// exceed `cfg.codeword_cap` symbols.
pub fn gen_nc_codebooks(source: &SourceSpec, aux: &NcAuxChannel, cfg: &SimConfig) -> Result<NcCodebooks> {
    cfg.validate()?;
    let j = nc_joint(source, aux)?;
    let n = cfg.n;
    let m = cfg.rate_margin;
    let i = |a: &[usize], b: &[usize], c: &[usize]| cmi_axes(&j, a, b, c);
    let families = [
        Family {
            name: "w1",
            size_exp: i(&[X], &[W1], &[]),
            bin_exp: i(&[X], &[W1], &[Y]),
        },
        Family {
            name: "v",
            size_exp: i(&[X], &[V], &[W1]),
            bin_exp: i(&[X], &[V], &[W1, Z]),
        },
        Family {
            name: "w2",
            size_exp: i(&[X], &[W2], &[W1, V]),
            bin_exp: i(&[X], &[W2], &[W1, V, Z]),
        },
        Family {
            name: "w3",
            size_exp: i(&[X], &[W3], &[W1, V]),
            bin_exp: i(&[X], &[W3], &[W1, V, Y]),
        },
        Family {
            name: "w4",
            size_exp: i(&[X], &[W4], &[W1, W2, W3, V]),
            bin_exp: i(&[X], &[W4], &[W1, W2, W3, V, Z]),
        },
    ];
    let sub_exp = i(&[Z], &[V], &[W1]) - i(&[Y], &[V], &[W1]);
    let (_, sub_bins) = nominal_size(n, sub_exp);
    let mut entries = Vec::with_capacity(5);
    let mut books_in_family: u128 = 1;
    for (f, fam) in families.iter().enumerate() {
        let (log2_size, size) = nominal_size(n, fam.size_exp + m);
        let bins = nominal_size(n, fam.bin_exp + 2.0 * m).1.clamp(1, size);
        let mut e = SizeEntry::new(fam.name, log2_size, size, bins, books_in_family);
        if f == 1 {
            e.sub_bins = Some(sub_bins);
        }
        entries.push(e);
        // v books hang off w1 codewords, w2 and w3 off (w1, v) pairs and w4
        // off (w1, v, w2, w3).
        books_in_family = match f {
            0 => size,
            1 => books_in_family.saturating_mul(size),
            2 => books_in_family,
            3 => books_in_family
                .saturating_mul(entries[2].size)
                .saturating_mul(size),
            _ => books_in_family,
        };
    }
    let sizes = SizeReport::new(n, entries, cfg.codeword_cap).require_fit()?;
    let dims: [usize; 5] = std::array::from_fn(|f| sizes.entries[f].size as usize);
    let bins: [usize; 5] = std::array::from_fn(|f| sizes.entries[f].bins as usize);
    let seed = cfg.seed;
    let g_w1 = ConditionalSampler::new(&j, &[], W1);
    let g_v = ConditionalSampler::new(&j, &[W1], V);
    let g_w2 = ConditionalSampler::new(&j, &[W1, V], W2);
    let g_w3 = ConditionalSampler::new(&j, &[W1, V], W3);
    let g_w4 = ConditionalSampler::new(&j, &[W1, W2, W3, V], W4);

    let w1 = make_book(n, dims[0], bins[0], &g_w1, &[], seed, &[TAG_W1]);
    type Branch = (Book, SubBins, Vec<Book>, Vec<Book>, Vec<Book>);
    let branches: Vec<Branch> = (0..dims[0])
        .into_par_iter()
        .map(|a| {
            let w1a = w1.words.get(a);
            let v = make_book(n, dims[1], bins[1], &g_v, &[w1a], seed, &[TAG_V, a as u64]);
            let sub = SubBins::split(&v.bins, sub_bins);
            let (mut w2s, mut w3s, mut w4s) = (Vec::new(), Vec::new(), Vec::new());
            for b in 0..dims[1] {
                let vb = v.words.get(b);
                let path = [a as u64, b as u64];
                let w2 = make_book(n, dims[2], bins[2], &g_w2, &[w1a, vb], seed, &[TAG_W2, path[0], path[1]]);
                let w3 = make_book(n, dims[3], bins[3], &g_w3, &[w1a, vb], seed, &[TAG_W3, path[0], path[1]]);
                for c in 0..dims[2] {
                    for d in 0..dims[3] {
                        let parents = [w1a, w2.words.get(c), w3.words.get(d), vb];
                        let stream = [TAG_W4, path[0], path[1], c as u64, d as u64];
                        w4s.push(make_book(n, dims[4], bins[4], &g_w4, &parents, seed, &stream));
                    }
                }
                w2s.push(w2);
                w3s.push(w3);
            }
            (v, sub, w2s, w3s, w4s)
        })
        .collect();
    let mut books = NcCodebooks {
        n,
        dims,
        sizes,
        w1,
        v: Vec::new(),
        v_sub: Vec::new(),
        w2: Vec::new(),
        w3: Vec::new(),
        w4: Vec::new(),
        tests: Tests::new(&j, n, cfg.resolved_delta())?,
    };
    for (v, sub, w2, w3, w4) in branches {
        books.v.push(v);
        books.v_sub.push(sub);
        books.w2.extend(w2);
        books.w3.extend(w3);
        books.w4.extend(w4);
    }
    Ok(books)
}

fn first_typical(book: &Codebook, mut hit: impl FnMut(&[Symbol]) -> bool) -> Option<usize> {
    (0..book.len()).find(|&c| hit(book.get(c)))
}

/// Sequential first-typical-match encoder.
pub fn encode_nc(x: &[Symbol], books: &NcCodebooks) -> NcEncoding {
    let t = &books.tests;
    let mut cnt = Vec::new();
    let fail = |event| NcEncoding::Failed { event };
    if x.len() != books.n || !t.x.check(&[x], &mut cnt) {
        return fail(1);
    }
    let Some(i) = first_typical(&books.w1.words, |w| t.xw1.check(&[x, w], &mut cnt)) else {
        return fail(2);
    };
    let w1 = books.w1.words.get(i);
    let vb = &books.v[i];
    let Some(j) = first_typical(&vb.words, |v| t.xw1v.check(&[x, w1, v], &mut cnt)) else {
        return fail(3);
    };
    let v = vb.words.get(j);
    let ij = books.ij(i, j);
    let Some(k) = first_typical(&books.w2[ij].words, |w| t.xw1vw2.check(&[x, w1, v, w], &mut cnt)) else {
        return fail(4);
    };
    let Some(l) = first_typical(&books.w3[ij].words, |w| t.xw1vw3.check(&[x, w1, v, w], &mut cnt)) else {
        return fail(5);
    };
    let w2 = books.w2[ij].words.get(k);
    let w3 = books.w3[ij].words.get(l);
    if !t.xw1vw2w3.check(&[x, w1, v, w2, w3], &mut cnt) {
        return fail(6);
    }
    let b4 = &books.w4[books.ijkl(i, j, k, l)];
    let Some(m) = first_typical(&b4.words, |w| t.all.check(&[x, w1, v, w2, w3, w], &mut cnt)) else {
        return fail(7);
    };
    NcEncoding::Encoded {
        indices: NcIndices {
            b1: books.w1.bins.bin_of[i] as usize,
            b2: vb.bins.bin_of[j] as usize,
            b3: books.w2[ij].bins.bin_of[k] as usize,
            b4s: books.v_sub[i].of[j] as usize,
            b5: books.w3[ij].bins.bin_of[l] as usize,
            b6: b4.bins.bin_of[m] as usize,
        },
        chosen: NcChosen { i, j, k, l, m },
    }
}

/// The unique candidate passing `hit`.
fn unique(
    name: &'static str,
    cands: Option<&Vec<u32>>,
    mut hit: impl FnMut(usize) -> bool,
) -> std::result::Result<usize, DecodeFailure> {
    let cands = cands.ok_or(DecodeFailure::InvalidIndex(name))?;
    let mut found = None;
    for &c in cands {
        if hit(c as usize) {
            if found.is_some() {
                return Err(DecodeFailure::AmbiguousBin(name));
            }
            found = Some(c as usize);
        }
    }
    found.ok_or(DecodeFailure::NoneTypical(name))
}

/// Y-side decoder. Stage 2 uses the `v` sub-bin, never the full `v` bin.
pub fn decode_nc_y(
    stage: Stage,
    idx: &NcIndices,
    y: &[Symbol],
    books: &NcCodebooks,
) -> std::result::Result<YRecovered, DecodeFailure> {
    let t = &books.tests;
    let mut cnt = Vec::new();
    let w1b = &books.w1.words;
    let i = unique("w1", books.w1.bins.members.get(idx.b1), |c| {
        t.y_w1.check(&[w1b.get(c), y], &mut cnt)
    })?;
    if stage == Stage::One {
        return Ok(YRecovered { w1: i, v: None, w3: None });
    }
    let w1 = w1b.get(i);
    let vb = &books.v[i].words;
    let sub = books.v_sub[i].members.get(idx.b2).and_then(|s| s.get(idx.b4s));
    let j = unique("v", sub, |c| t.y_w1v.check(&[w1, vb.get(c), y], &mut cnt))?;
    let v = vb.get(j);
    let b3 = &books.w3[books.ij(i, j)];
    let l = unique("w3", b3.bins.members.get(idx.b5), |c| {
        t.y_w1vw3.check(&[w1, v, b3.words.get(c), y], &mut cnt)
    })?;
    Ok(YRecovered {
        w1: i,
        v: Some(j),
        w3: Some(l),
    })
}

/// Z-side decoder. Never reads `idx.b4s`.
pub fn decode_nc_z(
    stage: Stage,
    idx: &NcIndices,
    z: &[Symbol],
    books: &NcCodebooks,
) -> std::result::Result<ZRecovered, DecodeFailure> {
    let t = &books.tests;
    let mut cnt = Vec::new();
    let w1b = &books.w1.words;
    let i = unique("w1", books.w1.bins.members.get(idx.b1), |c| {
        t.z_w1.check(&[w1b.get(c), z], &mut cnt)
    })?;
    let w1 = w1b.get(i);
    let vbook = &books.v[i];
    let j = unique("v", vbook.bins.members.get(idx.b2), |c| {
        t.z_w1v.check(&[w1, vbook.words.get(c), z], &mut cnt)
    })?;
    let v = vbook.words.get(j);
    let ij = books.ij(i, j);
    let b2 = &books.w2[ij];
    let k = unique("w2", b2.bins.members.get(idx.b3), |c| {
        t.z_w1vw2.check(&[w1, v, b2.words.get(c), z], &mut cnt)
    })?;
    if stage == Stage::One {
        return Ok(ZRecovered {
            w1: i,
            v: j,
            w2: k,
            w3: None,
            w4: None,
        });
    }
    let w2 = b2.words.get(k);
    let b3 = &books.w3[ij];
    let l = unique("w3", b3.bins.members.get(idx.b5), |c| {
        t.z_w1vw3.check(&[w1, v, b3.words.get(c), z], &mut cnt)
    })?;
    let w3 = b3.words.get(l);
    let b4 = &books.w4[books.ijkl(i, j, k, l)];
    let m = unique("w4", b4.bins.members.get(idx.b6), |c| {
        t.z_all.check(&[w1, v, w2, w3, b4.words.get(c), z], &mut cnt)
    })?;
    Ok(ZRecovered {
        w1: i,
        v: j,
        w2: k,
        w3: Some(l),
        w4: Some(m),
    })
}

fn failure_key(side: char, f: &DecodeFailure) -> String {
    let stage = match (side, f.book()) {
        ('y', "w1") | ('z', "w1" | "v" | "w2") => 1,
        _ => 2,
    };
    format!("{side}{stage}_{}", f.kind())
}

/// Run `cfg.trials` blocks through the encoder and both decoders.
pub fn simulate_nc(source: &SourceSpec, aux: &NcAuxChannel, dec: &NcDecoderRuleSet, cfg: &SimConfig) -> Result<SimReport> {
    let books = gen_nc_codebooks(source, aux, cfg)?;
    let single_letter = inner_distortions(source, aux, dec)?;
    let records: Vec<TrialRecord> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let xyz = sample_iid(source.pxyz(), cfg.n, derive_seed(cfg.seed, &[TRIAL, t]));
            let (x, y, z) = (&xyz[0], &xyz[1], &xyz[2]);
            let mut rec = TrialRecord {
                trial: t,
                event: None,
                indices: Vec::new(),
                distortions: None,
                decode_failures: Vec::new(),
            };
            let (idx, chosen) = match encode_nc(x, &books) {
                NcEncoding::Failed { event } => {
                    rec.event = Some(format!("e{event}"));
                    return rec;
                }
                NcEncoding::Encoded { indices, chosen } => (indices, chosen),
            };
            rec.indices = idx.to_vec();
            let yr = decode_nc_y(Stage::Two, &idx, y, &books);
            let zr = decode_nc_z(Stage::Two, &idx, z, &books);
            match &yr {
                Err(f) => rec.decode_failures.push(failure_key('y', f)),
                Ok(r) => {
                    if r.w1 != chosen.i {
                        rec.decode_failures.push("y1_wrong".into());
                    } else if r.v != Some(chosen.j) || r.w3 != Some(chosen.l) {
                        rec.decode_failures.push("y2_wrong".into());
                    }
                }
            }
            match &zr {
                Err(f) => rec.decode_failures.push(failure_key('z', f)),
                Ok(r) => {
                    if (r.w1, r.v, r.w2) != (chosen.i, chosen.j, chosen.k) {
                        rec.decode_failures.push("z1_wrong".into());
                    } else if r.w3 != Some(chosen.l) || r.w4 != Some(chosen.m) {
                        rec.decode_failures.push("z2_wrong".into());
                    }
                }
            }
            if let (Ok(yr), Ok(zr)) = (yr, zr) {
                rec.distortions = Some(reconstruct(&books, dec, source, x, y, z, &yr, &zr));
            }
            rec
        })
        .collect();
    let (error_counts, trials_ok, empirical) = aggregate(&records, &KEYS);
    let e = &books.sizes.entries;
    let r1 = index_rate(e[0].bins, cfg.n) + index_rate(e[1].bins, cfg.n) + index_rate(e[2].bins, cfg.n);
    let sub = e[1].sub_bins.unwrap_or(1).min(e[1].size.div_ceil(e[1].bins));
    let r2_extra = index_rate(sub, cfg.n) + index_rate(e[3].bins, cfg.n) + index_rate(e[4].bins, cfg.n);
    let rates = [("r1".to_string(), r1), ("r2".to_string(), r1 + r2_extra)]
        .into_iter()
        .collect();
    Ok(SimReport {
        scheme: "noncausal".into(),
        config: cfg.clone(),
        delta: cfg.resolved_delta(),
        sizes: books.sizes.clone(),
        rates,
        error_counts,
        trials_ok,
        empirical_distortions: empirical,
        single_letter,
        trials_detail: records,
    })
}

#[allow(clippy::too_many_arguments)]
fn reconstruct(
    books: &NcCodebooks,
    dec: &NcDecoderRuleSet,
    source: &SourceSpec,
    x: &[Symbol],
    y: &[Symbol],
    z: &[Symbol],
    yr: &YRecovered,
    zr: &ZRecovered,
) -> [f64; 4] {
    let (yv, yw3) = (yr.v.expect("stage 2"), yr.w3.expect("stage 2"));
    let y_w1 = books.w1.words.get(yr.w1);
    let y_v = books.v[yr.w1].words.get(yv);
    let y_w3 = books.w3[books.ij(yr.w1, yv)].words.get(yw3);
    let (zw3, zw4) = (zr.w3.expect("stage 2"), zr.w4.expect("stage 2"));
    let z_w1 = books.w1.words.get(zr.w1);
    let z_v = books.v[zr.w1].words.get(zr.v);
    let zij = books.ij(zr.w1, zr.v);
    let z_w2 = books.w2[zij].words.get(zr.w2);
    let z_w3 = books.w3[zij].words.get(zw3);
    let z_w4 = books.w4[books.ijkl(zr.w1, zr.v, zr.w2, zw3)].words.get(zw4);
    let u = |s: &[Symbol], i: usize| s[i] as usize;
    let n = books.n;
    let mut xh: [Vec<Symbol>; 4] = Default::default();
    for i in 0..n {
        xh[0].push(dec.g_y1.apply(&[u(y, i), u(y_w1, i)]) as Symbol);
        xh[1].push(dec.g_z1.apply(&[u(z, i), u(z_w1, i), u(z_w2, i), u(z_v, i)]) as Symbol);
        xh[2].push(dec.g_y2.apply(&[u(y, i), u(y_w1, i), u(y_w3, i), u(y_v, i)]) as Symbol);
        xh[3].push(
            dec.g_z2
                .apply(&[u(z, i), u(z_w1, i), u(z_w2, i), u(z_w3, i), u(z_w4, i), u(z_v, i)]) as Symbol,
        );
    }
    std::array::from_fn(|k| block_distortion(x, &xh[k], &source.distortions()[k]))
}
