//! Capacities of the stage channels `P(b | a, s)` with i.i.d. state `S`.
//!
//! - [`dmc_capacity`]: Blahut-Arimoto with a duality-gap stopping rule.
//! - [`causal_state_capacity`]: state known causally at the encoder, via
//!   the derived channel whose inputs are maps `S -> A`.
//! - [`gelfand_pinsker_capacity`]: state known non-causally; a seeded
//!   multi-start search for `max I(U;B) - I(U;S)`, reported as a lower
//!   bound together with a simple upper bound.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::info::entropy_of;
use crate::prob::{Alphabet, CondPmf, JointPmf};
use crate::rng::derived_rng;

/// A state-dependent channel used `rho` times per source symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct StateChannel {
    p_b_given_as: CondPmf,
    p_s: JointPmf,
    rho: f64,
}

/// JSON form of [`StateChannel`]: `transition` rows are indexed by `(a, s)`
/// row-major (state fastest), each a pmf over outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub inputs: usize,
    #[serde(default = "one")]
    pub states: usize,
    pub outputs: usize,
    pub transition: Vec<f64>,
    #[serde(default)]
    pub state_pmf: Option<Vec<f64>>,
    #[serde(default = "one_f")]
    pub rho: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl TryFrom<ChannelFile> for StateChannel {
    type Error = Error;
    fn try_from(f: ChannelFile) -> Result<Self> {
        let a = Alphabet::new("A", f.inputs)?;
        let s = Alphabet::new("S", f.states)?;
        let b = Alphabet::new("B", f.outputs)?;
        let w = CondPmf::new(vec![a, s.clone()], vec![b], f.transition)?;
        let ps = match f.state_pmf {
            Some(p) => JointPmf::new(vec![s], p)?,
            None if f.states == 1 => JointPmf::new(vec![s], vec![1.0])?,
            None => return Err(Error::InvalidArgument("state_pmf is required when states > 1".into())),
        };
        StateChannel::new(w, ps, f.rho)
    }
}

impl From<&StateChannel> for ChannelFile {
    fn from(c: &StateChannel) -> Self {
        ChannelFile {
            inputs: c.inputs(),
            states: c.states(),
            outputs: c.outputs(),
            transition: c.p_b_given_as.mass().to_vec(),
            state_pmf: Some(c.p_s.mass().to_vec()),
            rho: c.rho,
        }
    }
}

impl StateChannel {
    pub fn new(p_b_given_as: CondPmf, p_s: JointPmf, rho: f64) -> Result<Self> {
        if p_b_given_as.from_axes().len() != 2 || p_b_given_as.to_axes().len() != 1 || p_s.rank() != 1 {
            return Err(Error::AlphabetMismatch("channel must be P(B | A, S) with a pmf over S".into()));
        }
        if p_b_given_as.from_axes()[1].size() != p_s.axes()[0].size() {
            return Err(Error::AlphabetMismatch("state alphabet differs between channel and state pmf".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument("rho must be positive".into()));
        }
        Ok(Self {
            p_b_given_as,
            p_s,
            rho,
        })
    }

    /// Channel without state.
    pub fn stateless(p_b_given_a: &CondPmf, rho: f64) -> Result<Self> {
        let a = p_b_given_a.from_axes()[0].relabeled("A");
        let b = p_b_given_a.to_axes()[0].relabeled("B");
        let s = Alphabet::new("S", 1)?;
        let w = CondPmf::new(vec![a, s.clone()], vec![b], p_b_given_a.mass().to_vec())?;
        Self::new(w, JointPmf::new(vec![s], vec![1.0])?, rho)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ChannelFile = serde_json::from_str(text)?;
        f.try_into()
    }

    pub fn inputs(&self) -> usize {
        self.p_b_given_as.from_axes()[0].size()
    }

    pub fn states(&self) -> usize {
        self.p_b_given_as.from_axes()[1].size()
    }

    pub fn outputs(&self) -> usize {
        self.p_b_given_as.to_axes()[0].size()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn state_pmf(&self) -> &[f64] {
        self.p_s.mass()
    }

    /// `W(b | a, s)`.
    pub fn w(&self, a: usize, s: usize, b: usize) -> f64 {
        self.p_b_given_as.row(a * self.states() + s)[b]
    }

    /// `P(b | a) = Σ_s p(s) W(b | a, s)`.
    pub fn averaged(&self) -> CondPmf {
        let (na, ns, nb) = (self.inputs(), self.states(), self.outputs());
        let mut m = vec![0.0; na * nb];
        for a in 0..na {
            for s in 0..ns {
                let ps = self.p_s.mass()[s];
                for b in 0..nb {
                    m[a * nb + b] += ps * self.w(a, s, b);
                }
            }
        }
        normalized_channel(na, nb, m)
    }

    /// `W(b | a, s)` for a fixed state.
    pub fn at_state(&self, s: usize) -> CondPmf {
        let (na, nb) = (self.inputs(), self.outputs());
        let mut m = Vec::with_capacity(na * nb);
        for a in 0..na {
            m.extend((0..nb).map(|b| self.w(a, s, b)));
        }
        normalized_channel(na, nb, m)
    }
}

fn normalized_channel(na: usize, nb: usize, mut m: Vec<f64>) -> CondPmf {
    for row in m.chunks_mut(nb) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    CondPmf::new(
        vec![Alphabet::new("A", na).expect("non-empty")],
        vec![Alphabet::new("B", nb).expect("non-empty")],
        m,
    )
    .expect("rows normalized")
}

/// Maximizing input law, in the form natural to each solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Maximizer {
    Input {
        p_a: Vec<f64>,
    },
    /// Strategies (maps from state to input) with positive weight.
    Strategies {
        strategies: Vec<Vec<u16>>,
        weights: Vec<f64>,
    },
    GelfandPinsker {
        u_size: usize,
        /// Rows by `s`.
        p_u_given_s: Vec<f64>,
        /// Rows by `(u, s)`, state fastest.
        p_a_given_us: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// Bits per channel use. For Gelfand-Pinsker this is the best value found.
    pub capacity: f64,
    /// Upper bound on the true capacity.
    pub upper_bound: f64,
    pub maximizer: Maximizer,
    pub iterations: usize,
    /// `upper_bound - capacity`.
    pub residual: f64,
    /// True when `residual` certifies optimality within the tolerance.
    pub certified: bool,
}

fn kl_rows(w: &CondPmf, q: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|a| {
            w.row(a)
                .iter()
                .zip(q)
                .map(|(&p, &qb)| if p > 0.0 { p * (p / qb).log2() } else { 0.0 })
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// Blahut-Arimoto from the uniform input. Stops when the duality gap
/// `min_t max_a D(W_a || q_t) - max_t I(p_t)` falls to `tol`.
pub fn dmc_capacity(w: &CondPmf, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    let (p, lower, upper, it) = blahut_arimoto(w, tol, max_iter);
    if upper - lower > tol {
        return Err(Error::NonConvergence {
            iterations: it,
            best: lower,
            residual: upper - lower,
        });
    }
    Ok(CapacityResult {
        capacity: lower,
        upper_bound: upper,
        maximizer: Maximizer::Input { p_a: p },
        iterations: it,
        residual: upper - lower,
        certified: true,
    })
}

/// Returns `(p, lower, upper, iterations)` whether or not it converged.
fn blahut_arimoto(w: &CondPmf, tol: f64, max_iter: usize) -> (Vec<f64>, f64, f64, usize) {
    let na = w.rows();
    let nb = w.cols();
    let mut p = vec![1.0 / na as f64; na];
    let mut best_p = p.clone();
    let mut lower = 0.0f64;
    let mut upper = f64::INFINITY;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let mut q = vec![0.0; nb];
        for (a, &pa) in p.iter().enumerate() {
            for (qb, &wb) in q.iter_mut().zip(w.row(a)) {
                *qb += pa * wb;
            }
        }
        let d = kl_rows(w, &q);
        let i_now: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        if i_now > lower {
            lower = i_now;
            best_p.copy_from_slice(&p);
        }
        upper = upper.min(d.iter().copied().fold(0.0, f64::max));
        if upper - lower <= tol {
            break;
        }
        let mut z = 0.0;
        for (pa, da) in p.iter_mut().zip(&d) {
            *pa *= da.exp2();
            z += *pa;
        }
        p.iter_mut().for_each(|v| *v /= z);
    }
    (best_p, lower, upper.max(lower), it)
}

/// Tunables shared by the capacity solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Refuse strategy alphabets larger than this.
    pub strategy_cap: usize,
    /// Auxiliary alphabet for Gelfand-Pinsker; default `|A|^|S|`.
    pub u_size: Option<usize>,
    pub restarts: usize,
    pub iters: usize,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
            strategy_cap: 4096,
            u_size: None,
            restarts: 8,
            iters: 3000,
            seed: 0,
        }
    }
}

fn strategy_count(ch: &StateChannel, cap: usize) -> Result<usize> {
    let size = (ch.inputs() as u128).checked_pow(ch.states() as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::StrategyAlphabetTooLarge { size, cap });
    }
    Ok(size as usize)
}

/// Strategy `t` as its state-to-input table (state 0 is the most
/// significant digit).
fn strategy(t: usize, na: usize, ns: usize) -> Vec<u16> {
    let mut out = vec![0u16; ns];
    let mut r = t;
    for s in (0..ns).rev() {
        out[s] = (r % na) as u16;
        r /= na;
    }
    out
}

/// `P(b | t) = Σ_s p(s) W(b | t(s), s)` over all strategies `t`.
pub fn strategy_channel(ch: &StateChannel, cap: usize) -> Result<CondPmf> {
    let n = strategy_count(ch, cap)?;
    let (na, ns, nb) = (ch.inputs(), ch.states(), ch.outputs());
    let mut m = vec![0.0; n * nb];
    for t in 0..n {
        let st = strategy(t, na, ns);
        for (s, &a) in st.iter().enumerate() {
            let ps = ch.state_pmf()[s];
            for b in 0..nb {
                m[t * nb + b] += ps * ch.w(a as usize, s, b);
            }
        }
    }
    let mut m2 = m;
    for row in m2.chunks_mut(nb) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    CondPmf::new(vec![Alphabet::new("T", n)?], vec![Alphabet::new("B", nb)?], m2)
}

/// Capacity with state known causally at the encoder.
pub fn causal_state_capacity(ch: &StateChannel, cfg: &ChannelConfig) -> Result<CapacityResult> {
    let w = strategy_channel(ch, cfg.strategy_cap)?;
    let r = dmc_capacity(&w, cfg.tol, cfg.max_iter)?;
    let Maximizer::Input { p_a } = &r.maximizer else {
        unreachable!("dmc_capacity reports an input law")
    };
    let (na, ns) = (ch.inputs(), ch.states());
    let (strategies, weights) = p_a
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-12)
        .map(|(t, &p)| (strategy(t, na, ns), p))
        .unzip();
    Ok(CapacityResult {
        maximizer: Maximizer::Strategies { strategies, weights },
        ..r
    })
}

/// `I(U;B) - I(U;S)` for `P(u|s)` (rows by `s`) and `P(a|u,s)` (rows by `(u,s)`).
pub fn gp_objective(ch: &StateChannel, u_size: usize, p_u_given_s: &[f64], p_a_given_us: &[f64]) -> f64 {
    let (na, ns, nb) = (ch.inputs(), ch.states(), ch.outputs());
    let mut pus = vec![0.0; u_size * ns];
    let mut pub_ = vec![0.0; u_size * nb];
    for s in 0..ns {
        let ps = ch.state_pmf()[s];
        for u in 0..u_size {
            let p = ps * p_u_given_s[s * u_size + u];
            pus[u * ns + s] = p;
            if p == 0.0 {
                continue;
            }
            for a in 0..na {
                let pa = p * p_a_given_us[(u * ns + s) * na + a];
                if pa == 0.0 {
                    continue;
                }
                for b in 0..nb {
                    pub_[u * nb + b] += pa * ch.w(a, s, b);
                }
            }
        }
    }
    let marg = |m: &[f64], rows: usize, cols: usize, by_row: bool| -> Vec<f64> {
        let mut out = vec![0.0; if by_row { rows } else { cols }];
        for r in 0..rows {
            for c in 0..cols {
                out[if by_row { r } else { c }] += m[r * cols + c];
            }
        }
        out
    };
    let hu = entropy_of(&marg(&pus, u_size, ns, true));
    let hs = entropy_of(ch.state_pmf());
    let hb = entropy_of(&marg(&pub_, u_size, nb, false));
    let i_us = hu + hs - entropy_of(&pus);
    let i_ub = hu + hb - entropy_of(&pub_);
    i_ub - i_us
}

fn perturb<R: Rng + ?Sized>(row: &mut [f64], step: f64, rng: &mut R) {
    let before = row.to_vec();
    for q in row.iter_mut() {
        let g: f64 = rng.sample(StandardNormal);
        *q = (*q + step * g).max(0.0);
    }
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|q| *q /= s);
    } else {
        row.copy_from_slice(&before);
    }
}

/// Capacity with state known non-causally at the encoder (best value found).
///
/// One start embeds the causal-state optimum (`U` = strategy, independent
/// of `S`), so the result is never below [`causal_state_capacity`] when
/// `u_size` covers that optimum's support.
pub fn gelfand_pinsker_capacity(ch: &StateChannel, cfg: &ChannelConfig) -> Result<CapacityResult> {
    let (na, ns, nb) = (ch.inputs(), ch.states(), ch.outputs());
    let n_strat = strategy_count(ch, cfg.strategy_cap)?;
    let u_size = cfg.u_size.unwrap_or(n_strat);
    if u_size == 0 {
        return Err(Error::InvalidArgument("u_size must be >= 1".into()));
    }
    // causal start: U carries the strategy index
    let causal = causal_state_capacity(ch, cfg)?;
    let Maximizer::Strategies { strategies, weights } = &causal.maximizer else {
        unreachable!("causal solver reports strategies")
    };
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(u_size);
    let wsum: f64 = order.iter().map(|&k| weights[k]).sum();
    let mut u0 = vec![0.0; ns * u_size];
    let mut a0 = vec![0.0; u_size * ns * na];
    for s in 0..ns {
        for u in 0..u_size {
            let (pu, act) = match order.get(u) {
                Some(&k) => (weights[k] / wsum, strategies[k][s] as usize),
                None => (0.0, 0),
            };
            u0[s * u_size + u] = pu;
            a0[(u * ns + s) * na + act] = 1.0;
        }
    }

    let runs: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..cfg.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = derived_rng(cfg.seed, &[31, r as u64]);
            let (mut pu, mut pa) = if r == 0 {
                (u0.clone(), a0.clone())
            } else {
                let mut pu = vec![0.0; ns * u_size];
                for row in pu.chunks_mut(u_size) {
                    row.iter_mut().for_each(|v| *v = rng.random::<f64>() + 1e-3);
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                }
                let mut pa = vec![0.0; u_size * ns * na];
                for row in pa.chunks_mut(na) {
                    row[rng.random_range(0..na)] = 1.0;
                }
                (pu, pa)
            };
            let mut cur = gp_objective(ch, u_size, &pu, &pa);
            let mut step = 0.2;
            for _ in 0..cfg.iters {
                let mut cu = pu.clone();
                let mut ca = pa.clone();
                let mv: f64 = rng.random();
                if mv < 0.5 {
                    let s = rng.random_range(0..ns);
                    perturb(&mut cu[s * u_size..(s + 1) * u_size], step, &mut rng);
                } else if mv < 0.75 {
                    let row = rng.random_range(0..u_size * ns);
                    let r = &mut ca[row * na..(row + 1) * na];
                    r.iter_mut().for_each(|v| *v = 0.0);
                    r[rng.random_range(0..na)] = 1.0;
                } else {
                    let row = rng.random_range(0..u_size * ns);
                    perturb(&mut ca[row * na..(row + 1) * na], step, &mut rng);
                }
                let v = gp_objective(ch, u_size, &cu, &ca);
                if v >= cur {
                    if v > cur + 1e-15 {
                        step = (step * 1.2f64).min(1.0);
                    }
                    cur = v;
                    pu = cu;
                    pa = ca;
                } else {
                    step = (step * 0.98f64).max(1e-6);
                }
            }
            (cur, pu, pa)
        })
        .collect();
    let (best, pu, pa) = runs
        .into_iter()
        .fold(None::<(f64, Vec<f64>, Vec<f64>)>, |acc, r| match acc {
            Some(a) if a.0 >= r.0 => Some(a),
            _ => Some(r),
        })
        .expect("at least one restart");
    let per_state: f64 = (0..ns)
        .map(|s| {
            let c = blahut_arimoto(&ch.at_state(s), cfg.tol, cfg.max_iter);
            ch.state_pmf()[s] * c.2
        })
        .sum();
    let upper = (nb as f64).log2().min(per_state);
    let capacity = best.max(0.0);
    Ok(CapacityResult {
        capacity,
        upper_bound: upper.max(capacity),
        maximizer: Maximizer::GelfandPinsker {
            u_size,
            p_u_given_s: pu,
            p_a_given_us: pa,
        },
        iterations: cfg.iters * cfg.restarts.max(1),
        residual: (upper - capacity).max(0.0),
        certified: upper - capacity <= cfg.tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKnowledge {
    Causal,
    Noncausal,
}

/// Capacities of both stage channels plus their use ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePair {
    pub c1: f64,
    pub c2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub stage1: CapacityResult,
    pub stage2: CapacityResult,
}

pub fn capacity(ch: &StateChannel, mode: StateKnowledge, cfg: &ChannelConfig) -> Result<CapacityResult> {
    match mode {
        StateKnowledge::Causal => causal_state_capacity(ch, cfg),
        StateKnowledge::Noncausal => gelfand_pinsker_capacity(ch, cfg),
    }
}

pub fn stage_capacity_pair(
    ch1: &StateChannel,
    ch2: &StateChannel,
    mode: StateKnowledge,
    cfg: &ChannelConfig,
) -> Result<StagePair> {
    let stage1 = capacity(ch1, mode, cfg)?;
    let stage2 = capacity(ch2, mode, cfg)?;
    Ok(StagePair {
        c1: stage1.capacity,
        c2: stage2.capacity,
        rho1: ch1.rho(),
        rho2: ch2.rho(),
        stage1,
        stage2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ax(l: &str, n: usize) -> Alphabet {
        Alphabet::new(l, n).unwrap()
    }

    #[test]
    fn noiseless_and_useless() {
        let id = CondPmf::deterministic(vec![ax("A", 2)], vec![ax("B", 2)], &[0, 1]).unwrap();
        assert!((dmc_capacity(&id, 1e-12, 1000).unwrap().capacity - 1.0).abs() < 1e-12);
        let flat = CondPmf::new(vec![ax("A", 3)], vec![ax("B", 2)], vec![0.5; 6]).unwrap();
        assert!(dmc_capacity(&flat, 1e-12, 1000).unwrap().capacity.abs() < 1e-12);
    }

    #[test]
    fn strategies_enumerate_all_maps() {
        assert_eq!(strategy(0, 2, 2), vec![0, 0]);
        assert_eq!(strategy(1, 2, 2), vec![0, 1]);
        assert_eq!(strategy(2, 2, 2), vec![1, 0]);
        assert_eq!(strategy(5, 3, 2), vec![1, 2]);
    }

    #[test]
    fn channel_json() {
        let text = r#"{"inputs":2,"outputs":2,"transition":[1,0,0,1]}"#;
        let c = StateChannel::from_json(text).unwrap();
        assert_eq!(c.states(), 1);
        let back: StateChannel = ChannelFile::from(&c).try_into().unwrap();
        assert_eq!(back, c);
        assert!(StateChannel::from_json(r#"{"inputs":2,"states":2,"outputs":2,"transition":[1,0,0,1,1,0,0,1]}"#).is_err());
    }
}
