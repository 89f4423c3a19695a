mod common;

use common::*;
use rand::Rng;
use sirefine::causal::*;
use sirefine::decoder::DecoderTable;
use sirefine::prob::{DistortionMatrix, SourceSpec};
use sirefine::rng::rng_from_seed;
use sirefine::search::SearchConfig;
use sirefine::{Alphabet, DistortionQuad, Error, JointPmf};

fn bsc_aux(q: f64) -> CausalAuxChannel {
    CausalAuxChannel::from_tables(2, 2, 1, &[1.0 - q, q, q, 1.0 - q], &[1.0; 4]).unwrap()
}

fn random_aux<R: Rng>(rng: &mut R, nx: usize, w1: usize, w2: usize) -> CausalAuxChannel {
    CausalAuxChannel::from_tables(
        nx,
        w1,
        w2,
        &random_stochastic(rng, nx, w1),
        &random_stochastic(rng, nx * w1, w2),
    )
    .unwrap()
}

/// Random 2x2x2 source with random distortion tables (2 or 3 reconstruction symbols).
fn random_source<R: Rng>(rng: &mut R) -> SourceSpec {
    let pxyz = JointPmf::new(axes(&["X", "Y", "Z"], &[2, 2, 2]), random_row(rng, 8)).unwrap();
    let x = Alphabet::new("X", 2).unwrap();
    let names = ["Xh_y1", "Xh_z1", "Xh_y2", "Xh_z2"];
    let d = names.map(|n| {
        let k = rng.random_range(2..=3);
        let t: Vec<f64> = (0..2 * k).map(|_| rng.random::<f64>()).collect();
        DistortionMatrix::new(x.clone(), Alphabet::new(n, k).unwrap(), t).unwrap()
    });
    SourceSpec::new(pxyz, d).unwrap()
}

/// Joint `P(x, y, z, w1, w2)` cell by cell.
fn joint_cells(s: &SourceSpec, aux: &CausalAuxChannel) -> Vec<(usize, usize, usize, usize, usize, f64)> {
    let (w1n, w2n) = (aux.w1_size(), aux.w2_size());
    let mut out = Vec::new();
    for x in 0..s.x_size() {
        for y in 0..s.y_size() {
            for z in 0..s.z_size() {
                let p = s.pxyz().get(&[x, y, z]);
                for w1 in 0..w1n {
                    for w2 in 0..w2n {
                        out.push((x, y, z, w1, w2, p * aux.cond().row(x)[w1 * w2n + w2]));
                    }
                }
            }
        }
    }
    out
}

/// Minimum over every deterministic table of `E d(X, g(args))`, where `args`
/// picks the decoder inputs from a cell.
fn exhaustive_min<F>(cells: &[(usize, usize, usize, usize, usize, f64)], d: &DistortionMatrix, sizes: &[usize], args: F) -> f64
where
    F: Fn(&(usize, usize, usize, usize, usize, f64)) -> Vec<usize>,
{
    let rows: usize = sizes.iter().product();
    let k = d.cols().size();
    let tables = k.pow(rows as u32);
    let mut best = f64::INFINITY;
    for t in 0..tables {
        let map: Vec<usize> = (0..rows).map(|r| (t / k.pow(r as u32)) % k).collect();
        let e: f64 = cells
            .iter()
            .map(|c| {
                let a = args(c);
                let r = a.iter().zip(sizes).fold(0, |acc, (&v, &s)| acc * s + v);
                c.5 * d.get(c.0, map[r])
            })
            .sum();
        best = best.min(e);
    }
    best
}

#[test]
fn constant_channel_gives_zero_rates_and_side_information_distortions() {
    let mut rng = rng_from_seed(1);
    let s = random_source(&mut rng);
    let aux = CausalAuxChannel::constant(2).unwrap();
    let p = evaluate_optimal(&s, &aux).unwrap();
    assert_eq!((p.r1, p.delta_r), (0.0, 0.0));
    // Σ_y min_x̂ Σ_x p(x,y) d(x,x̂), and the same with z.
    let si_only = |side: usize, d: &DistortionMatrix| -> f64 {
        (0..2)
            .map(|v| {
                (0..d.cols().size())
                    .map(|xh| {
                        (0..2)
                            .map(|x| {
                                let m: f64 = (0..2)
                                    .map(|o| if side == 1 { s.pxyz().get(&[x, v, o]) } else { s.pxyz().get(&[x, o, v]) })
                                    .sum();
                                m * d.get(x, xh)
                            })
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    };
    let d = s.distortions();
    let expect = [si_only(1, &d[0]), si_only(2, &d[1]), si_only(1, &d[2]), si_only(2, &d[3])];
    for (a, b) in p.achieved.as_array().iter().zip(expect) {
        assert!((a - b).abs() < 1e-12);
    }
    let again = evaluate_causal(&s, &aux, &p.decoders).unwrap();
    assert_eq!(again.achieved, p.achieved);
}

#[test]
fn copy_channel_with_projection_is_lossless() {
    let s = degraded_bss(0.1, 0.2);
    let aux = CausalAuxChannel::copy(2).unwrap();
    let mut dec = optimal_decoders(&s, &aux).unwrap();
    dec.g_y1 = DecoderTable::project(vec!["Y".into(), "W1".into()], vec![2, 2], 2, 1).unwrap();
    let p = evaluate_causal(&s, &aux, &dec).unwrap();
    assert!((p.r1 - 1.0).abs() < 1e-12);
    assert_eq!(p.achieved.dy1, 0.0);
    assert_eq!(optimal_decoders(&s, &aux).unwrap().g_y1.map, vec![0, 1, 0, 1]);
}

#[test]
fn bsc_test_channel_matches_closed_form() {
    let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    for q in [0.05, 0.11, 0.3] {
        let p = evaluate_optimal(&s, &bsc_aux(q)).unwrap();
        assert!((p.r1 - (1.0 - h2(q))).abs() < 1e-12);
        assert!((p.achieved.dy1 - q).abs() < 1e-12);
        let cells = joint_cells(&s, &bsc_aux(q));
        let direct: f64 = cells.iter().map(|c| c.5 * if c.0 == c.3 { 0.0 } else { 1.0 }).sum();
        assert!((direct - q).abs() < 1e-12);
    }
}

#[test]
fn optimal_decoders_match_exhaustive_enumeration() {
    let mut rng = rng_from_seed(2);
    for _ in 0..6 {
        let s = random_source(&mut rng);
        let aux = random_aux(&mut rng, 2, 2, 2);
        let p = evaluate_optimal(&s, &aux).unwrap();
        let cells = joint_cells(&s, &aux);
        let d = s.distortions();
        let oracle = [
            exhaustive_min(&cells, &d[0], &[2, 2], |c| vec![c.1, c.3]),
            exhaustive_min(&cells, &d[1], &[2, 2], |c| vec![c.2, c.3]),
            exhaustive_min(&cells, &d[2], &[2, 2, 2], |c| vec![c.1, c.3, c.4]),
            exhaustive_min(&cells, &d[3], &[2, 2, 2], |c| vec![c.2, c.3, c.4]),
        ];
        for (a, b) in p.achieved.as_array().iter().zip(oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn side_information_equal_to_source_needs_no_rate() {
    // Y = X, Z independent uniform.
    let mut m = vec![0.0; 8];
    for x in 0..2 {
        for z in 0..2 {
            m[x * 4 + x * 2 + z] = 0.25;
        }
    }
    let s = SourceSpec::with_hamming(JointPmf::new(axes(&["X", "Y", "Z"], &[2, 2, 2]), m).unwrap()).unwrap();
    let aux = CausalAuxChannel::constant(2).unwrap();
    let dec = optimal_decoders(&s, &aux).unwrap();
    assert_eq!(dec.g_y1.map, vec![0, 1]);
    let target = DistortionQuad::new(0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let front = min_rates_causal(&s, &target, &SearchConfig::default()).unwrap();
    assert_eq!((front[0].r1, front[0].delta_r), (0.0, 0.0));
    assert_eq!(front[0].achieved.dy1, 0.0);
}

#[test]
fn unconstrained_target_gives_the_origin() {
    let s = degraded_bss(0.1, 0.2);
    let front = min_rates_causal(&s, &DistortionQuad::unconstrained(), &SearchConfig::default()).unwrap();
    assert_eq!(front.len(), 1);
    assert_eq!((front[0].r1, front[0].delta_r), (0.0, 0.0));
}

#[test]
fn no_side_information_recovers_rate_distortion_function() {
    let s = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    let d = 0.1;
    let front = min_rates_causal(&s, &DistortionQuad::splat(d), &SearchConfig::default()).unwrap();
    let min_r1 = front.iter().map(|p| p.r1).fold(f64::INFINITY, f64::min);
    let oracle = rate_distortion_ba(0.5, d);
    assert!((oracle - (1.0 - h2(d))).abs() < 1e-6);
    assert!((min_r1 - oracle).abs() < 0.02, "{min_r1} vs {oracle}");
}

#[test]
fn frontier_is_feasible_non_dominated_and_reproducible() {
    let s = degraded_bss(0.1, 0.25);
    let target = DistortionQuad::new(0.2, 0.08, 0.12, 0.05);
    let cfg = SearchConfig {
        seed: 5,
        ..SearchConfig::default()
    };
    let front = min_rates_causal(&s, &target, &cfg).unwrap();
    assert!(!front.is_empty());
    for (i, a) in front.iter().enumerate() {
        assert!(a.achieved.le(&target, cfg.dist_tol));
        let re = evaluate_causal(&s, &a.aux, &a.decoders).unwrap();
        assert!((re.r1 - a.r1).abs() < 1e-9 && (re.delta_r - a.delta_r).abs() < 1e-9);
        for (x, y) in re.achieved.as_array().iter().zip(a.achieved.as_array()) {
            assert!((x - y).abs() < 1e-9);
        }
        for b in &front[i + 1..] {
            let dominates = |p: &CausalRegionPoint, q: &CausalRegionPoint| p.r1 <= q.r1 && p.delta_r <= q.delta_r;
            assert!(!dominates(a, b) && !dominates(b, a));
        }
    }
    assert_eq!(min_rates_causal(&s, &target, &cfg).unwrap(), front);
}

#[test]
fn looser_targets_do_not_raise_minimum_first_stage_rate() {
    let s = degraded_bss(0.1, 0.25);
    let cfg = SearchConfig::default();
    let mut prev = f64::INFINITY;
    for d in [0.05, 0.08, 0.12, 0.16, 0.2] {
        let t = DistortionQuad::new(d + 0.05, d, f64::INFINITY, f64::INFINITY);
        let r = min_rates_causal(&s, &t, &cfg).unwrap().iter().map(|p| p.r1).fold(f64::INFINITY, f64::min);
        assert!(r <= prev + 1e-3, "{r} > {prev}");
        prev = r;
    }
}

#[test]
fn auxiliary_channel_is_markov_through_the_source() {
    let mut rng = rng_from_seed(3);
    for _ in 0..50 {
        let s = random_source(&mut rng);
        let aux = random_aux(&mut rng, 2, 3, 2);
        let j = causal_joint(&s, &aux).unwrap();
        let shape = j.shape();
        assert!(cmi(j.mass(), &shape, &[3, 4], &[1, 2], &[0]) <= 1e-9);
    }
}

#[test]
fn infeasible_targets_are_rejected() {
    let x = Alphabet::new("X", 2).unwrap();
    let pxyz = JointPmf::uniform(axes(&["X", "Y", "Z"], &[2, 1, 1]));
    let d = DistortionMatrix::new(x.clone(), Alphabet::new("Xh", 2).unwrap(), vec![0.3, 0.5, 0.5, 0.3]).unwrap();
    let s = SourceSpec::new(pxyz, [d.clone(), d.clone(), d.clone(), d]).unwrap();
    let r = min_rates_causal(&s, &DistortionQuad::splat(0.1), &SearchConfig::default());
    assert!(matches!(r, Err(Error::InfeasibleTarget { .. })));
    assert_eq!(best_distortions(&s).unwrap(), DistortionQuad::splat(0.3));
}

#[test]
fn oversized_channels_are_rejected() {
    let m = vec![1.0 / 8.0; 2 * 8];
    let cond = sirefine::CondPmf::new(axes(&["X"], &[2]), axes(&["W1", "W2"], &[8, 1]), m).unwrap();
    assert!(CausalAuxChannel::new(cond).is_err());
}

#[test]
fn single_point_grid_matches_direct_evaluation() {
    let s = degraded_bss(0.1, 0.2);
    let g = GridSpec::new(1, 1, 1);
    let front = brute_force_causal(&s, &DistortionQuad::unconstrained(), &g).unwrap();
    assert_eq!(front.len(), 1);
    let direct = evaluate_optimal(&s, &CausalAuxChannel::constant(2).unwrap()).unwrap();
    assert_eq!((front[0].r1, front[0].delta_r), (0.0, 0.0));
    assert_eq!(front[0].achieved, direct.achieved);
}

#[test]
fn grid_oracle_agrees_with_search() {
    let s = degraded_bss(0.1, 0.2);
    let target = DistortionQuad::new(0.2, 0.07, f64::INFINITY, f64::INFINITY);
    let grid = brute_force_causal(&s, &target, &GridSpec::new(2, 1, 10)).unwrap();
    let search = min_rates_causal_sized(&s, &target, &SearchConfig::default(), (2, 1)).unwrap();
    let g = grid.iter().map(|p| p.r1).fold(f64::INFINITY, f64::min);
    let r = search.iter().map(|p| p.r1).fold(f64::INFINITY, f64::min);
    assert!((g - r).abs() < 0.05, "grid {g} search {r}");
    assert!(r <= g + 1e-9);
    let all = brute_force_causal(&s, &DistortionQuad::unconstrained(), &GridSpec::new(2, 1, 10)).unwrap();
    assert!(all.iter().any(|p| p.r1 == 0.0 && p.delta_r == 0.0));
    let huge = GridSpec::new(4, 4, 50);
    assert!(matches!(
        brute_force_causal(&s, &target, &huge),
        Err(Error::GridTooLarge { .. })
    ));
}

#[test]
fn separation_examples() {
    let cfg = SearchConfig::default();
    let s = degraded_bss(0.1, 0.2);
    let si_only = evaluate_optimal(&s, &CausalAuxChannel::constant(2).unwrap()).unwrap().achieved;
    let out = separation_check(&s, &si_only, 1.0, 1.0, 0.0, 0.0, &cfg).unwrap();
    assert!(out.achievable);
    assert_eq!(out.witness.unwrap().r1, 0.0);
    let out = separation_check(&s, &DistortionQuad::splat(0.0), 1.0, 1.0, 1.0, 1.0, &cfg).unwrap();
    assert!(out.achievable);
    assert!((out.witness.unwrap().r1 - 1.0).abs() < 1e-9);

    let nosi = SourceSpec::without_side_info(&[0.5, 0.5]).unwrap();
    let c1 = 1.0 - h2(0.11);
    assert!((rate_distortion_ba(0.5, 0.13) - (1.0 - h2(0.13))).abs() < 1e-6);
    let t = |d: f64| DistortionQuad::new(d, f64::INFINITY, f64::INFINITY, f64::INFINITY);
    assert!(separation_check(&nosi, &t(0.13), 1.0, 1.0, c1, 0.0, &cfg).unwrap().achievable);
    assert!(!separation_check(&nosi, &t(0.06), 1.0, 1.0, c1, 0.0, &cfg).unwrap().achievable);
    assert!(separation_check(&nosi, &t(0.1), 0.0, 1.0, c1, 0.0, &cfg).is_err());
}

#[test]
fn channel_json_round_trip() {
    let mut rng = rng_from_seed(4);
    let aux = random_aux(&mut rng, 2, 3, 2);
    let text = serde_json::to_string(&aux).unwrap();
    let back: CausalAuxChannel = serde_json::from_str(&text).unwrap();
    assert_eq!(back, aux);
    let s = degraded_bss(0.1, 0.2);
    let p = evaluate_optimal(&s, &aux).unwrap();
    let pj: CausalRegionPoint = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
    let re = evaluate_causal(&s, &pj.aux, &pj.decoders).unwrap();
    assert!((re.r1 - p.r1).abs() < 1e-12 && (re.delta_r - p.delta_r).abs() < 1e-12);
}
