mod common;

use common::*;
use rand::Rng;
use sirefine::causal::*;
use sirefine::noncausal::*;
use sirefine::prob::sample_iid;
use sirefine::rng::rng_from_seed;
use sirefine::sim::*;
use sirefine::{Error, JointPmf, SourceSpec, Symbol};

fn bsc_test_channel(q: f64) -> CausalAuxChannel {
    CausalAuxChannel::from_tables(2, 2, 1, &[1.0 - q, q, q, 1.0 - q], &[1.0; 4]).unwrap()
}

/// W1 and W2 each reveal `X` with probability `a`, else erase.
fn erasure_aux(a: f64) -> CausalAuxChannel {
    let w1 = [a, 0.0, 1.0 - a, 0.0, a, 1.0 - a];
    let mut w2 = Vec::new();
    for x in 0..2 {
        for _w1 in 0..3 {
            w2.extend(if x == 0 { [a, 0.0, 1.0 - a] } else { [0.0, a, 1.0 - a] });
        }
    }
    CausalAuxChannel::from_tables(2, 3, 3, &w1, &w2).unwrap()
}

fn erasure(a: f64) -> Vec<f64> {
    vec![a, 0.0, 1.0 - a, 0.0, a, 1.0 - a]
}

/// Small non-causal instance whose books are all singleton bins.
fn nc_instance() -> (SourceSpec, NcAuxChannel) {
    let s = degraded_bss(0.1, 0.2);
    let one = [1.0, 1.0];
    let sizes = NcSizes { w1: 3, w2: 1, w3: 3, w4: 1, v: 1 };
    let aux = NcAuxChannel::independent_given_x(2, sizes, [&erasure(0.15), &one, &erasure(0.1), &one, &one]).unwrap();
    (s, aux)
}

/// Non-causal instance with a non-trivial `v` layer and real binning.
fn nc_binned_instance() -> (SourceSpec, NcAuxChannel) {
    let s = degraded_bss(0.1, 0.2);
    let one = [1.0, 1.0];
    let sizes = NcSizes { w1: 3, w2: 1, w3: 3, w4: 1, v: 3 };
    let aux = NcAuxChannel::independent_given_x(2, sizes, [&erasure(0.15), &one, &erasure(0.1), &one, &erasure(0.5)])
        .unwrap();
    (s, aux)
}

fn cfg(n: usize, margin: f64, trials: usize, seed: u64) -> SimConfig {
    SimConfig {
        n,
        rate_margin: margin,
        trials,
        seed,
        ..SimConfig::default()
    }
}

#[test]
fn constant_auxiliaries_give_margin_sized_constant_books() {
    let s = degraded_bss(0.1, 0.2);
    let aux = CausalAuxChannel::constant(2).unwrap();
    let c = cfg(20, 0.2, 10, 3);
    let books = gen_causal_codebooks(&s, &aux, &c).unwrap();
    assert_eq!(books.sizes(), (16, 16));
    assert!(books.is_materialized());
    for k in 0..16 {
        assert!(books.w1(k).unwrap().iter().all(|&v| v == 0));
    }
    let xyz = sample_iid(s.pxyz(), 20, 9);
    assert_eq!(encode_causal(&xyz[0], &books).unwrap(), CausalEncoding::Indices { k: 0, j: 0 });
    assert_eq!(encode_causal(&[0; 20], &books).unwrap(), CausalEncoding::E1);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let rep = simulate_causal(&s, &aux, &dec, &cfg(20, 0.2, 200, 3)).unwrap();
    assert_eq!(rep.error_counts["e2"] + rep.error_counts["e3"] + rep.error_counts["scan_exhausted"], 0);
    assert_eq!(rep.trials_ok + rep.error_counts["e1"], 200);
}

#[test]
fn codebooks_are_seed_determined_and_storage_independent() {
    let s = degraded_bss(0.1, 0.2);
    let aux = erasure_aux(0.1);
    let base = cfg(30, 0.1, 20, 5);
    let a = gen_causal_codebooks(&s, &aux, &base).unwrap();
    let b = gen_causal_codebooks(&s, &aux, &base).unwrap();
    let lazy = gen_causal_codebooks(&s, &aux, &SimConfig { storage: Storage::OnDemand, ..base.clone() }).unwrap();
    assert!(a.is_materialized() && !lazy.is_materialized());
    let (m1, m2) = a.sizes();
    for k in (0..m1 as u64).step_by(3) {
        assert_eq!(a.w1(k).unwrap(), b.w1(k).unwrap());
        assert_eq!(a.w1(k).unwrap(), lazy.w1(k).unwrap());
        for j in (0..m2 as u64).step_by(5) {
            assert_eq!(a.w2(k, j).unwrap(), lazy.w2(k, j).unwrap());
        }
    }
    let other = gen_causal_codebooks(&s, &aux, &SimConfig { seed: 6, ..base.clone() }).unwrap();
    assert!((0..m1 as u64).any(|k| other.w1(k).unwrap() != a.w1(k).unwrap()));
    let dec = optimal_decoders(&s, &aux).unwrap();
    let r1 = simulate_causal(&s, &aux, &dec, &base).unwrap();
    let r2 = simulate_causal(&s, &aux, &dec, &SimConfig { storage: Storage::OnDemand, ..base.clone() }).unwrap();
    assert_eq!(r1.trials_detail, r2.trials_detail);
    assert!(matches!(a.w1(m1 as u64), Err(Error::IndexOutOfRange { .. })));
    assert!(matches!(a.w2(0, m2 as u64), Err(Error::IndexOutOfRange { .. })));
}

#[test]
fn codeword_symbols_follow_the_auxiliary_marginal() {
    // P(W1 = 1) = 1/2; 3 sigma at n = 1000 is about 47
    let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    let c = SimConfig {
        storage: Storage::OnDemand,
        ..cfg(1000, 0.1, 1, 7)
    };
    let books = gen_causal_codebooks(&s, &bsc_test_channel(0.3), &c).unwrap();
    let sigma = (1000.0f64 * 0.25).sqrt();
    for k in 0..40 {
        let ones = books.w1(k).unwrap().iter().filter(|&&v| v == 1).count() as f64;
        assert!((ones - 500.0).abs() <= 3.0 * sigma, "{ones}");
    }
}

#[test]
fn decoding_reproduces_the_source_when_the_codeword_carries_it() {
    let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    let aux = CausalAuxChannel::copy(2).unwrap();
    let dec = optimal_decoders(&s, &aux).unwrap();
    let c = cfg(8, 0.1, 1, 1);
    let books = gen_causal_codebooks(&s, &aux, &c).unwrap();
    let mut rng = rng_from_seed(2);
    let mut hits = 0;
    for _ in 0..50 {
        let x: Vec<Symbol> = (0..8).map(|_| rng.random_range(0..2)).collect();
        if let CausalEncoding::Indices { k, j } = encode_causal(&x, &books).unwrap() {
            let out = decode_causal(k, j, &[0; 8], &[0; 8], &books, &dec).unwrap();
            assert_eq!(out[0], x);
            hits += 1;
        }
    }
    assert!(hits > 0);
    assert!(decode_causal(0, 0, &[0; 7], &[0; 8], &books, &dec).is_err());
}

#[test]
fn decoding_with_perfect_side_information_ignores_indices() {
    let mut m = vec![0.0; 8];
    m[0] = 0.5;
    m[7] = 0.5;
    let s = SourceSpec::with_hamming(JointPmf::new(axes(&["X", "Y", "Z"], &[2, 2, 2]), m).unwrap()).unwrap();
    let aux = bsc_test_channel(0.2);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let books = gen_causal_codebooks(&s, &aux, &cfg(10, 0.1, 1, 4)).unwrap();
    let y: Vec<Symbol> = vec![0, 1, 1, 0, 1, 0, 0, 1, 1, 1];
    for k in 0..books.sizes().0 as u64 {
        assert_eq!(decode_causal(k, 0, &y, &y, &books, &dec).unwrap()[0], y);
    }
}

#[test]
fn decoder_output_ignores_future_side_information() {
    let s = degraded_bss(0.1, 0.2);
    let aux = erasure_aux(0.2);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let n = 50;
    let books = gen_causal_codebooks(&s, &aux, &cfg(n, 0.1, 1, 8)).unwrap();
    let (m1, m2) = books.sizes();
    let mut rng = rng_from_seed(10);
    let mut violations = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(0..m1 as u64);
        let j = rng.random_range(0..m2 as u64);
        let xyz = sample_iid(s.pxyz(), n, rng.random());
        let base = decode_causal(k, j, &xyz[1], &xyz[2], &books, &dec).unwrap();
        let i = rng.random_range(0..n);
        let (mut y, mut z) = (xyz[1].clone(), xyz[2].clone());
        for t in i + 1..n {
            y[t] = rng.random_range(0..2);
            z[t] = rng.random_range(0..2);
        }
        let moved = decode_causal(k, j, &y, &z, &books, &dec).unwrap();
        if base.iter().zip(&moved).any(|(a, b)| a[..=i] != b[..=i]) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn causal_pipeline_tracks_single_letter_distortion() {
    let s = degraded_bss(0.1, 0.2);
    let aux = erasure_aux(0.03);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let rep = simulate_causal(&s, &aux, &dec, &cfg(400, 0.15, 200, 2)).unwrap();
    assert!(rep.encoder_errors() <= 4, "{:?}", rep.error_counts);
    let e = rep.empirical_distortions.unwrap();
    assert!((e.dy1 - rep.single_letter.dy1).abs() <= 0.05, "{e:?} vs {:?}", rep.single_letter);
    let r1 = rep.rates["r1"];
    let (i1, _) = causal_rates(&causal_joint(&s, &aux).unwrap());
    assert!(r1 >= i1 + 0.15 && r1 <= i1 + 0.15 + 1.0 / 400.0 + 1e-9);
}

#[test]
fn vacuous_typicality_sends_the_first_codeword() {
    // Every block is typical, so the encoder always sends codeword 0, which
    // is independent of the source. The oracle is the same decoders fed a
    // W1 with the same marginal but independent of X.
    let s = degraded_bss(0.1, 0.2);
    let aux = bsc_test_channel(0.2);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let c = SimConfig {
        delta: Some(10.0),
        ..cfg(1, 0.5, 4000, 3)
    };
    let rep = simulate_causal(&s, &aux, &dec, &c).unwrap();
    assert_eq!(rep.trials_ok, 4000);
    assert!(rep.trials_detail.iter().all(|t| t.indices == [0, 0]));
    let blind = CausalAuxChannel::from_tables(2, 2, 1, &[0.5; 4], &[1.0; 4]).unwrap();
    let oracle = evaluate_causal(&s, &blind, &dec).unwrap().achieved.as_array();
    let e = rep.empirical_distortions.unwrap().as_array();
    for (a, b) in e.iter().zip(oracle) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn larger_margins_do_not_raise_first_codebook_failures() {
    let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    let aux = bsc_test_channel(0.25);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let seeds = 20u64;
    let freq = |m: f64| -> Vec<f64> {
        (0..seeds)
            .map(|seed| {
                let c = SimConfig {
                    delta: Some(0.05),
                    ..cfg(30, m, 50, seed)
                };
                simulate_causal(&s, &aux, &dec, &c).unwrap().error_counts["e2"] as f64 / 50.0
            })
            .collect()
    };
    let runs: Vec<Vec<f64>> = [0.01, 0.02, 0.05, 0.1].into_iter().map(freq).collect();
    assert!(runs[0].iter().sum::<f64>() > 0.0);
    for w in runs.windows(2) {
        let d: Vec<f64> = w[1].iter().zip(&w[0]).map(|(h, l)| h - l).collect();
        let mean = d.iter().sum::<f64>() / seeds as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
        // one-sided 95% bound on the paired difference
        assert!(mean <= 1.729 * (var / seeds as f64).sqrt() + 1e-12, "{mean} {var}");
    }
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let s = degraded_bss(0.1, 0.2);
    let aux = erasure_aux(0.1);
    let dec = optimal_decoders(&s, &aux).unwrap();
    let c = cfg(60, 0.15, 40, 11);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&simulate_causal(&s, &aux, &dec, &c).unwrap()).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(4));
    assert_eq!(a, run(4));
    let (ns, naux) = nc_instance();
    let pt = evaluate_nc(&ns, &naux, BoundKind::Inner).unwrap();
    let nc = cfg(12, 0.2, 50, 2);
    let runs: Vec<String> = [1, 3]
        .into_iter()
        .map(|t| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build().unwrap();
            pool.install(|| serde_json::to_string(&simulate_nc(&ns, &naux, &pt.decoders, &nc).unwrap()).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn oversized_books_fail_with_a_size_report() {
    let s = degraded_bss(0.1, 0.2);
    let aux = erasure_aux(0.3);
    let c = SimConfig {
        storage: Storage::Materialized,
        ..cfg(500, 0.2, 1, 0)
    };
    match gen_causal_codebooks(&s, &aux, &c) {
        Err(Error::CapExceeded(rep)) => {
            assert_eq!(rep.entries.len(), 2);
            assert!(rep.total_symbols > rep.cap);
            assert_eq!(rep.cap, 1 << 22);
        }
        other => panic!("{other:?}"),
    }
    let (ns, naux) = nc_instance();
    match gen_nc_codebooks(&ns, &naux, &cfg(60, 0.2, 1, 0)) {
        Err(Error::CapExceeded(rep)) => {
            let names: Vec<&str> = rep.entries.iter().map(|e| e.name.as_str()).collect();
            assert_eq!(names, ["w1", "v", "w2", "w3", "w4"]);
            assert!(!rep.fits());
        }
        other => panic!("{other:?}"),
    }
    assert!(SimConfig { n: 0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { rate_margin: 0.0, ..SimConfig::default() }.validate().is_err());
}

#[test]
fn constant_noncausal_auxiliaries_encode_to_first_codewords() {
    let s = degraded_bss(0.1, 0.2);
    let one = [1.0, 1.0];
    let sizes = NcSizes { w1: 1, w2: 1, w3: 1, w4: 1, v: 1 };
    let aux = NcAuxChannel::independent_given_x(2, sizes, [&one; 5]).unwrap();
    let c = cfg(10, 0.2, 300, 4);
    let books = gen_nc_codebooks(&s, &aux, &c).unwrap();
    assert_eq!(books.dims(), [4; 5]);
    assert!(books.partitions_exact());
    let xyz = sample_iid(s.pxyz(), 10, 5);
    match encode_nc(&xyz[0], &books) {
        NcEncoding::Encoded { chosen, .. } => assert_eq!(chosen, NcChosen { i: 0, j: 0, k: 0, l: 0, m: 0 }),
        other => panic!("{other:?}"),
    }
    let tight = gen_nc_codebooks(&s, &aux, &SimConfig { delta: Some(0.1), ..c.clone() }).unwrap();
    assert_eq!(encode_nc(&[1; 10], &tight), NcEncoding::Failed { event: 1 });
    let pt = evaluate_nc(&s, &aux, BoundKind::Inner).unwrap();
    let rep = simulate_nc(&s, &aux, &pt.decoders, &c).unwrap();
    let e = rep.empirical_distortions.unwrap().as_array();
    for (a, b) in e.iter().zip(rep.single_letter.as_array()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn bins_and_sub_bins_partition_every_book() {
    let (s, aux) = nc_binned_instance();
    let c = cfg(10, 0.2, 1, 3);
    let books = gen_nc_codebooks(&s, &aux, &c).unwrap();
    assert!(books.partitions_exact());
    let all = std::iter::once(&books.w1).chain(&books.v).chain(&books.w2).chain(&books.w3).chain(&books.w4);
    for b in all {
        let total: usize = b.bins.members.iter().map(Vec::len).sum();
        assert_eq!(total, b.words.len());
        let mut seen = vec![0; total];
        for m in &b.bins.members {
            for &c in m {
                seen[c as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&v| v == 1));
    }
    // sub-bin count against the exponent recomputed from the joint
    let j = nc_joint(&s, &aux).unwrap();
    let (sh, m) = (j.shape(), j.mass());
    let exp = cmi(m, &sh, &[2], &[7], &[3]) - cmi(m, &sh, &[1], &[7], &[3]);
    let want = (c.n as f64 * exp.max(0.0)).exp2().ceil() as usize;
    let e = &books.size_report().entries[1];
    assert_eq!(e.sub_bins, Some(want as u128));
    assert!(want > 1);
    for (sub, v) in books.v_sub.iter().zip(&books.v) {
        assert!(sub.partitions(&v.bins));
        for (group, subs) in v.bins.members.iter().zip(&sub.members) {
            assert_eq!(subs.len(), want.min(group.len()).max(1));
        }
    }
}

#[test]
fn decoders_agree_with_encoder_whenever_unique() {
    for (s, aux, n) in [
        { let (s, a) = nc_instance(); (s, a, 14) },
        { let (s, a) = nc_binned_instance(); (s, a, 10) },
    ] {
        let books = gen_nc_codebooks(&s, &aux, &cfg(n, 0.2, 1, 1)).unwrap();
        let mut unique = 0;
        for t in 0..300u64 {
            let xyz = sample_iid(s.pxyz(), n, 1000 + t);
            let NcEncoding::Encoded { indices, chosen } = encode_nc(&xyz[0], &books) else {
                continue;
            };
            if let Ok(r) = decode_nc_y(Stage::Two, &indices, &xyz[1], &books) {
                assert_eq!((r.w1, r.v, r.w3), (chosen.i, Some(chosen.j), Some(chosen.l)));
                unique += 1;
            }
            if let Ok(r) = decode_nc_y(Stage::One, &indices, &xyz[1], &books) {
                assert_eq!((r.w1, r.v), (chosen.i, None));
            }
            if let Ok(r) = decode_nc_z(Stage::Two, &indices, &xyz[2], &books) {
                assert_eq!(
                    (r.w1, r.v, r.w2, r.w3, r.w4),
                    (chosen.i, chosen.j, chosen.k, Some(chosen.l), Some(chosen.m))
                );
            }
        }
        assert!(unique >= 100, "{unique}");
    }
}

#[test]
fn z_decoder_never_reads_the_sub_bin_index() {
    let (s, aux) = nc_binned_instance();
    let books = gen_nc_codebooks(&s, &aux, &cfg(10, 0.2, 1, 2)).unwrap();
    for t in 0..100u64 {
        let xyz = sample_iid(s.pxyz(), 10, t);
        let NcEncoding::Encoded { indices, .. } = encode_nc(&xyz[0], &books) else {
            continue;
        };
        let base = decode_nc_z(Stage::Two, &indices, &xyz[2], &books);
        for b4s in [0, 1, 7, usize::MAX] {
            let moved = NcIndices { b4s, ..indices };
            assert_eq!(decode_nc_z(Stage::Two, &moved, &xyz[2], &books), base);
        }
        let bad = NcIndices { b1: usize::MAX, ..indices };
        assert_eq!(decode_nc_y(Stage::One, &bad, &xyz[1], &books), Err(DecodeFailure::InvalidIndex("w1")));
    }
}

#[test]
fn perfect_side_information_at_z_always_decodes() {
    // Z = X and Y pure noise, so every bin is a single codeword
    let s = degraded_bss(0.0, 0.5);
    let one = [1.0, 1.0];
    let sizes = NcSizes { w1: 3, w2: 1, w3: 3, w4: 1, v: 1 };
    let aux = NcAuxChannel::independent_given_x(2, sizes, [&erasure(0.3), &one, &erasure(0.2), &one, &one]).unwrap();
    let books = gen_nc_codebooks(&s, &aux, &cfg(10, 0.05, 1, 3)).unwrap();
    let mut encoded = 0;
    for t in 0..200u64 {
        let xyz = sample_iid(s.pxyz(), 10, t);
        let NcEncoding::Encoded { indices, chosen } = encode_nc(&xyz[0], &books) else {
            continue;
        };
        encoded += 1;
        let r = decode_nc_z(Stage::Two, &indices, &xyz[2], &books).unwrap();
        assert_eq!((r.w1, r.w3), (chosen.i, Some(chosen.l)));
    }
    assert!(encoded > 0);
}

#[test]
fn copying_the_source_into_w2_makes_z1_lossless() {
    let s = degraded_bss(0.1, 0.2);
    let one = [1.0, 1.0];
    let sizes = NcSizes { w1: 1, w2: 2, w3: 1, w4: 1, v: 1 };
    let aux = NcAuxChannel::independent_given_x(2, sizes, [&one, &[1.0, 0.0, 0.0, 1.0], &one, &one, &one]).unwrap();
    let pt = evaluate_nc(&s, &aux, BoundKind::Inner).unwrap();
    assert_eq!(pt.achieved.dz1, 0.0);
    let c = SimConfig {
        delta: Some(0.15),
        ..cfg(8, 0.2, 200, 5)
    };
    let rep = simulate_nc(&s, &aux, &pt.decoders, &c).unwrap();
    assert!(rep.trials_ok > 0);
    for t in &rep.trials_detail {
        if let (Some(d), true) = (t.distortions, t.decode_failures.is_empty()) {
            assert_eq!(d[1], 0.0);
        }
    }
}

#[test]
fn noncausal_simulation_stays_near_the_oracle() {
    let (s, aux) = nc_instance();
    let pt = evaluate_nc(&s, &aux, BoundKind::Inner).unwrap();
    let rep = simulate_nc(&s, &aux, &pt.decoders, &cfg(14, 0.2, 400, 1)).unwrap();
    assert!(rep.trials_ok >= 100);
    assert_eq!(rep.wrong_unique(), 0);
    for k in ["e2", "e3", "e4", "e5", "e6", "e7"] {
        assert!(rep.error_counts[k] as f64 <= 0.1 * 400.0, "{k}");
    }
    let e = rep.empirical_distortions.unwrap().as_array();
    for (a, b) in e.iter().zip(rep.single_letter.as_array()) {
        assert!(*a <= b + 0.07, "{a} vs {b}");
    }
    assert_eq!(rep.single_letter, inner_distortions(&s, &aux, &pt.decoders).unwrap());
    let csv = rep.trials_csv();
    assert_eq!(csv.lines().count(), 401);
    assert!(csv.starts_with("trial,event,indices,d_y1,d_z1,d_y2,d_z2,decode_failures\n"));
    assert!(rep.rates["r2"] >= rep.rates["r1"]);
}
