mod common;

use common::*;
use sirefine::noncausal::*;
use sirefine::prob::{DistortionMatrix, SourceSpec};
use sirefine::rng::rng_from_seed;
use sirefine::search::SearchConfig;
use sirefine::{Alphabet, DistortionQuad, Error, JointPmf};

fn light() -> SearchConfig {
    SearchConfig {
        restarts: 2,
        iters: 300,
        ..SearchConfig::default()
    }
}

/// `H(X|S)` for `S` the Y (1) or Z (2) axis of the source.
fn h_x_given(s: &SourceSpec, side: usize) -> f64 {
    let shape = s.pxyz().shape();
    let m = s.pxyz().mass();
    let joint = marginal_by(m, &shape, shape[0] * shape[side], |c| c[0] * shape[side] + c[side]);
    let si = marginal_by(m, &shape, shape[side], |c| c[side]);
    entropy_of(&joint) - entropy_of(&si)
}

fn sizes(w1: usize, w2: usize, w3: usize, w4: usize, v: usize) -> NcSizes {
    NcSizes { w1, w2, w3, w4, v }
}

#[test]
fn lossless_y2_second_rate_is_conditional_entropy() {
    let mut rng = rng_from_seed(31);
    for _ in 0..50 {
        let s = random_degraded_binary(&mut rng);
        let front =
            lossless_special_case(&s, LosslessDecoder::Y2, &DistortionQuad::unconstrained(), NcSizes::default_for(2), &light())
                .unwrap();
        let oracle = h_x_given(&s, 1);
        for p in &front {
            assert!((p.r2 - oracle).abs() <= 1e-9, "{} vs {oracle}", p.r2);
            assert_eq!(p.achieved.dy2, 0.0);
        }
    }
}

#[test]
fn lossless_z1_with_constant_first_layer_is_slepian_wolf() {
    let mut rng = rng_from_seed(32);
    for _ in 0..50 {
        let s = random_degraded_binary(&mut rng);
        let front = lossless_special_case(
            &s,
            LosslessDecoder::Z1,
            &DistortionQuad::unconstrained(),
            sizes(1, 2, 2, 1, 2),
            &light(),
        )
        .unwrap();
        let oracle = h_x_given(&s, 2);
        for p in &front {
            assert!((p.r1 - oracle).abs() <= 1e-9, "{} vs {oracle}", p.r1);
            assert_eq!(p.achieved.dz1, 0.0);
        }
    }
}

#[test]
fn inner_and_outer_expressions_agree_on_sampled_channels() {
    let mut rng = rng_from_seed(33);
    for k in 0..4 {
        let s = random_degraded_binary(&mut rng);
        let rep = verify_inner_subset_outer(&s, 200, k).unwrap();
        assert_eq!(rep.samples, 200);
        assert_eq!(rep.r1_mismatches, 0);
        assert_eq!(rep.r2_violations, 0);
        assert!(rep.violating_samples.is_empty());
        assert!(rep.max_r1_diff <= 1e-9);
        assert!(rep.max_r2_excess <= 1e-9);
        assert!(rep.max_markov_residual <= 1e-9);
    }
}

#[test]
fn rate_expressions_match_independent_oracle() {
    let mut rng = rng_from_seed(34);
    let s = random_degraded_binary(&mut rng);
    let fam = inner_family(2, NcSizes::default_for(2)).unwrap();
    for _ in 0..20 {
        let aux = NcAuxChannel::from_factored(&fam.randomized(&mut rng)).unwrap();
        let j = nc_joint(&s, &aux).unwrap();
        let (m, sh) = (j.mass(), j.shape());
        let (x, y, z, w1, w2, w3, w4, v) = (0, 1, 2, 3, 4, 5, 6, 7);
        let i = |a: &[usize], b: &[usize], c: &[usize]| cmi(m, &sh, a, b, c);
        let r1 = i(&[x], &[w1], &[y]) + i(&[x], &[w2, v], &[w1, z]);
        let outer2 = i(&[x], &[w1, w3, v], &[y]) + i(&[x], &[w2, w4], &[w1, w3, v, z]);
        let inner2 = i(&[x], &[w1, v, w3], &[y]) + i(&[x], &[w2], &[w1, v, z]) + i(&[x], &[w4], &[w1, w2, w3, v, z]);
        let (ri1, ri2) = inner_rates(&s, &aux, 1e-9).unwrap();
        let (ro1, ro2) = outer_rates(&s, &aux).unwrap();
        assert!((ri1 - r1).abs() < 1e-9 && (ro1 - r1).abs() < 1e-9);
        assert!((ri2 - inner2).abs() < 1e-9 && (ro2 - outer2).abs() < 1e-9);
        assert!(ro2 <= ri2 + 1e-9);
        assert!(i(&[w1, w2, w3, w4, v], &[y, z], &[x]) <= 1e-9);
        assert!(i(&[w2], &[w3], &[x, w1, v]) <= 1e-9);
    }
}

#[test]
fn correlated_refinement_layers_violate_inner_markov_condition() {
    let s = degraded_bss(0.1, 0.2);
    // W2 = W3 = fair coin independent of X
    let mut mass = Vec::new();
    for _x in 0..2 {
        for w2 in 0..2 {
            for w3 in 0..2 {
                mass.push(if w2 == w3 { 0.5 } else { 0.0 });
            }
        }
    }
    let cond = sirefine::CondPmf::new(
        axes(&["X"], &[2]),
        axes(&["W1", "W2", "W3", "W4", "V"], &[1, 2, 2, 1, 1]),
        mass,
    )
    .unwrap();
    let aux = NcAuxChannel::new(cond).unwrap();
    match inner_rates(&s, &aux, 1e-9) {
        Err(Error::ExtraMarkovViolated { residual }) => assert!((residual - 1.0).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
    assert!(outer_rates(&s, &aux).is_ok());
}

#[test]
fn non_degraded_sources_are_rejected() {
    let mut rng = rng_from_seed(35);
    let pxyz = JointPmf::new(axes(&["X", "Y", "Z"], &[2, 2, 2]), random_row(&mut rng, 8)).unwrap();
    let s = SourceSpec::with_hamming(pxyz).unwrap();
    let aux = NcAuxChannel::from_factored(&inner_family(2, NcSizes::default_for(2)).unwrap().anchor()).unwrap();
    assert!(matches!(outer_rates(&s, &aux), Err(Error::NotDegraded { .. })));
    assert!(inner_frontier(&s, &DistortionQuad::unconstrained(), NcSizes::default_for(2), &light()).is_err());
}

#[test]
fn outer_frontier_weakly_dominates_inner_frontier() {
    let s = degraded_bss(0.1, 0.2);
    let t = DistortionQuad::new(0.25, 0.12, 0.2, 0.06);
    let cfg = SearchConfig {
        restarts: 3,
        iters: 600,
        seed: 2,
        ..SearchConfig::default()
    };
    let inner = inner_frontier(&s, &t, NcSizes::default_for(2), &cfg).unwrap();
    let outer = outer_frontier(&s, &t, NcSizes::default_for(2), &cfg).unwrap();
    for p in inner.iter().chain(&outer) {
        assert!(p.achieved.le(&t, 1e-9));
        let again = evaluate_nc(&s, &p.aux, p.kind).unwrap();
        assert!((again.r1 - p.r1).abs() < 1e-9 && (again.r2 - p.r2).abs() < 1e-9);
        let d = inner_distortions(&s, &p.aux, &p.decoders).unwrap();
        assert_eq!(d, p.achieved);
    }
    for p in &inner {
        assert!(outer.iter().any(|q| q.r1 <= p.r1 + 1e-9 && q.r2 <= p.r2 + 1e-9));
    }
}

#[test]
fn refinement_rates_reduce_to_inner_rates_on_their_families() {
    let mut rng = rng_from_seed(36);
    let s = degraded_bss(0.1, 0.2);
    for case in [SrCase::StrongFirstStage, SrCase::WeakNoRefinement] {
        let fam = sr_family(2, NcSizes::default_for(2), case).unwrap();
        for _ in 0..10 {
            let aux = NcAuxChannel::from_factored(&fam.randomized(&mut rng)).unwrap();
            let j = nc_joint(&s, &aux).unwrap();
            let (a, b) = sr_rates(&j, case);
            let (c, d) = inner_rates(&s, &aux, 1e-9).unwrap();
            assert!((a - c).abs() < 1e-9 && (b - d).abs() < 1e-9, "{case:?}");
        }
    }
    let t = DistortionQuad::new(0.2, 0.1, 0.2, 0.05);
    let (case, front) = sr_special_case(&s, &t, NcSizes::default_for(2), &light()).unwrap();
    assert_eq!(case, SrCase::WeakNoRefinement);
    assert!(!front.is_empty());
    assert!(matches!(
        sr_special_case(&s, &DistortionQuad::new(0.2, 0.1, 0.1, 0.0), NcSizes::default_for(2), &light()),
        Err(Error::NoRefinementCase(_))
    ));
}

#[test]
fn lossless_case_needs_a_zero_distortion_column() {
    let x = Alphabet::new("X", 2).unwrap();
    let d = DistortionMatrix::new(x, Alphabet::new("Xh", 2).unwrap(), vec![0.1, 1.0, 1.0, 0.1]).unwrap();
    let base = degraded_bss(0.1, 0.2);
    let s = SourceSpec::new(base.pxyz().clone(), [d.clone(), d.clone(), d.clone(), d]).unwrap();
    let r = lossless_special_case(&s, LosslessDecoder::Z1, &DistortionQuad::unconstrained(), NcSizes::default_for(2), &light());
    assert!(matches!(r, Err(Error::NotLosslessCompatible { .. })));
}

#[test]
fn cardinality_limits_are_enforced() {
    let s = degraded_bss(0.1, 0.2);
    let too_big = sizes(8, 1, 1, 1, 1);
    assert!(outer_frontier(&s, &DistortionQuad::unconstrained(), too_big, &light()).is_err());
    assert!(sizes(7, 1, 1, 1, 1).check_caps(2, CapSet::Outer).is_ok());
}

#[test]
fn aux_channel_json_round_trip() {
    let mut rng = rng_from_seed(37);
    let fam = outer_family(2, NcSizes::default_for(2)).unwrap();
    let aux = NcAuxChannel::from_factored(&fam.randomized(&mut rng)).unwrap();
    let back: NcAuxChannel = serde_json::from_str(&serde_json::to_string(&aux).unwrap()).unwrap();
    assert_eq!(back, aux);
    let mut v: serde_json::Value = serde_json::to_value(&aux).unwrap();
    v["sizes"]["w1"] = 3.into();
    assert!(serde_json::from_value::<NcAuxChannel>(v).is_err());
}
