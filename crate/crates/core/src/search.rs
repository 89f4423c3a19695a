//! Seeded multi-start random search over factored auxiliary channels.
//!
//! Each run starts from a random channel pulled toward a feasible anchor
//! (every free factor copying `X`) until the distortion target is met, then
//! proposes single-row moves and keeps a move when it stays feasible and
//! does not worsen the objective. Restarts run in parallel and are merged
//! in restart order, so results depend only on the seed.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::FactoredAux;
use crate::prob::DistortionQuad;
use crate::rng::derived_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Independent starts per objective weight.
    pub restarts: usize,
    /// Proposals per start.
    pub iters: usize,
    pub seed: u64,
    /// Slack when comparing achieved distortions with the target.
    pub dist_tol: f64,
    /// Slack on rate constraints (separation) and frontier dominance.
    pub rate_tol: f64,
    /// Objective `w·rate0 + (1−w)·rate1`, one search per weight.
    pub weights: Vec<f64>,
    pub init_step: f64,
    pub min_step: f64,
    /// Upper limit on auxiliary alphabet sizes chosen by default.
    pub aux_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            iters: 2500,
            seed: 0,
            dist_tol: 1e-9,
            rate_tol: 1e-9,
            weights: vec![0.999, 0.5, 0.001],
            init_step: 0.2,
            min_step: 1e-5,
            aux_cap: 4,
        }
    }
}

/// Rates (two coordinates) and distortions of one auxiliary channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub rates: [f64; 2],
    pub achieved: DistortionQuad,
}

/// Outcome of one search run.
#[derive(Clone, Debug)]
pub struct Found {
    pub aux: FactoredAux,
    pub eval: Evaluation,
    pub score: f64,
}

/// Random feasible descent from a single start.
///
/// Returns `None` when even the anchor misses the target.
pub fn descend<E, S>(
    template: &FactoredAux,
    target: &DistortionQuad,
    eval: &E,
    score: &S,
    cfg: &SearchConfig,
    stream: &[u64],
) -> Option<Found>
where
    E: Fn(&FactoredAux) -> Evaluation,
    S: Fn(&Evaluation) -> f64,
{
    let feasible = |e: &Evaluation| e.achieved.le(target, cfg.dist_tol);
    let mut rng = derived_rng(cfg.seed, stream);
    let anchor = template.anchor();
    let anchor_eval = eval(&anchor);
    if !feasible(&anchor_eval) {
        return None;
    }
    let free = template.free_factors();
    let random = template.randomized(&mut rng);
    let (mut cur, mut cur_eval) = (anchor.clone(), anchor_eval);
    let mut t = 0.0;
    for _ in 0..40 {
        let cand = anchor.mix(&random, t);
        let e = eval(&cand);
        if feasible(&e) {
            cur = cand;
            cur_eval = e;
            break;
        }
        t = 1.0 - (1.0 - t) / 2.0;
    }
    let mut cur_score = score(&cur_eval);
    if free.is_empty() {
        return Some(Found {
            aux: cur,
            eval: cur_eval,
            score: cur_score,
        });
    }
    let mut step = cfg.init_step;
    for _ in 0..cfg.iters {
        let mut cand = cur.clone();
        let fi = free[rng.random_range(0..free.len())];
        let rows = cand.factor_rows(fi);
        let s = cand.var_size(fi);
        let table = cand.table_mut(fi).expect("free factor");
        let u: f64 = rng.random();
        if u < 0.05 {
            let r = rng.random_range(0..rows);
            let v = rng.random_range(0..s);
            let row = &mut table[r * s..(r + 1) * s];
            row.iter_mut().for_each(|q| *q = 0.0);
            row[v] = 1.0;
        } else if u < 0.08 && rows > 1 {
            let a = rng.random_range(0..rows);
            let b = rng.random_range(0..rows);
            let src: Vec<f64> = table[b * s..(b + 1) * s].to_vec();
            table[a * s..(a + 1) * s].copy_from_slice(&src);
        } else {
            let all_rows = u > 0.9;
            let chosen: Vec<usize> = if all_rows {
                (0..rows).collect()
            } else {
                vec![rng.random_range(0..rows)]
            };
            for r in chosen {
                perturb_row(&mut table[r * s..(r + 1) * s], step, &mut rng);
            }
        }
        let e = eval(&cand);
        if feasible(&e) {
            let sc = score(&e);
            if sc <= cur_score {
                if sc < cur_score - 1e-15 {
                    step = (step * 1.2).min(1.0);
                }
                cur = cand;
                cur_eval = e;
                cur_score = sc;
                continue;
            }
        }
        step = (step * 0.98).max(cfg.min_step);
    }
    Some(Found {
        aux: cur,
        eval: cur_eval,
        score: cur_score,
    })
}

fn perturb_row<R: Rng + ?Sized>(row: &mut [f64], step: f64, rng: &mut R) {
    let before = row.to_vec();
    for q in row.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *q = (*q + step * g).max(0.0);
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|q| *q /= sum);
    } else {
        row.copy_from_slice(&before);
    }
}

/// Weighted-sum searches for every `(weight, restart)` pair, in parallel,
/// returned in a fixed order. `stream_tag` separates unrelated searches
/// that share a seed.
pub fn weighted_runs<E>(
    template: &FactoredAux,
    target: &DistortionQuad,
    eval: &E,
    cfg: &SearchConfig,
    stream_tag: u64,
) -> Vec<Found>
where
    E: Fn(&FactoredAux) -> Evaluation + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..cfg.weights.len())
        .flat_map(|w| (0..cfg.restarts.max(1)).map(move |r| (w, r)))
        .collect();
    jobs.par_iter()
        .map(|&(w, r)| {
            let weight = cfg.weights[w];
            let score = move |e: &Evaluation| weight * e.rates[0] + (1.0 - weight) * e.rates[1];
            descend(template, target, eval, &score, cfg, &[stream_tag, w as u64, r as u64])
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Keep the points not dominated in both rate coordinates, sorted by the
/// first coordinate. Near-duplicates (within `tol`) collapse to one.
pub fn pareto<T, F>(mut items: Vec<T>, rates: F, tol: f64) -> Vec<T>
where
    F: Fn(&T) -> [f64; 2],
{
    items.sort_by(|a, b| {
        let (ra, rb) = (rates(a), rates(b));
        ra[0].total_cmp(&rb[0]).then(ra[1].total_cmp(&rb[1]))
    });
    let mut out: Vec<T> = Vec::new();
    let mut best_second = f64::INFINITY;
    for it in items {
        let r = rates(&it);
        if r[1] < best_second - tol {
            best_second = r[1];
            out.push(it);
        }
    }
    out
}
