//! List decoders and error probabilities.

use crate::channel::{apply_channel, Codebook, FadingDMC, ObliviousAVC};
use crate::codegen::next_subset;
use crate::probkit::{compositions, mutual_info, simplex_net, apportion, SequenceType};
use crate::rng::{rng, trial_seed};
use crate::{Error, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

pub trait ListDecoder {
    /// Maximum list size `L`.
    fn list_size(&self) -> usize;
    fn decode(&self, y: &[usize]) -> Result<Vec<usize>>;
}

/// A decoded list longer than `L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ListViolation {
    pub y: Vec<usize>,
    pub output: Vec<usize>,
}

/// Two-step typicality decoder.
///
/// Step 1 keeps codeword `i` when some state sequence `s` makes the joint
/// type of `(u, x_i, s, y)` lie within KL distance `eta` of
/// `P_u P_{x|u} P_s W` with `P_s ∈ lambda_s`. Candidate `s` are realized
/// from a net over conditional types `V(s|u,x,y)` restricted to states with
/// `W(y|x,s) > 0`. Step 2 keeps `i` only if, for that `s`, every list of
/// `L` other step-1 survivors satisfies `I(x,y; x_1..x_L | u,s) ≤ eta`.
pub struct TypicalityDecoder<'a> {
    avc: &'a ObliviousAVC,
    code: &'a Codebook,
    u_seq: Vec<usize>,
    nu: usize,
    /// Design law `P_{x|u}`, rows indexed by `u`.
    p_x_given_u: Vec<Vec<f64>>,
    p_u: Vec<f64>,
    pub eta: f64,
    pub l: usize,
    /// ℓ1 resolution of the conditional-type net.
    pub s_net: f64,
    pub budget: f64,
    /// Step-1 witnesses kept per codeword.
    pub max_witnesses: usize,
    violations: RefCell<Vec<ListViolation>>,
}

impl<'a> TypicalityDecoder<'a> {
    pub fn new(avc: &'a ObliviousAVC, code: &'a Codebook, eta: f64, l: usize, s_net: f64) -> Result<Self> {
        if code.nx != avc.nx() {
            return Err(Error::Dimension("code alphabet differs from X".into()));
        }
        if l == 0 {
            return Err(Error::validation("L", "must be at least 1"));
        }
        let n = code.n;
        let u_seq: Vec<usize> = (0..n).map(|j| code.u_at(j)).collect();
        let nu = code.nu();
        let nx = code.nx;
        let mut p_u = vec![0.0; nu];
        let mut p_xu = vec![vec![0.0; nx]; nu];
        for j in 0..n {
            p_u[u_seq[j]] += 1.0 / n as f64;
            for cw in &code.codewords {
                p_xu[u_seq[j]][cw[j]] += 1.0;
            }
        }
        for row in &mut p_xu {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Ok(Self {
            avc,
            code,
            u_seq,
            nu,
            p_x_given_u: p_xu,
            p_u,
            eta,
            l,
            s_net,
            budget: 1e5,
            max_witnesses: 8,
            violations: RefCell::new(Vec::new()),
        })
    }

    /// Lists longer than `L` produced so far.
    pub fn violations(&self) -> Vec<ListViolation> {
        self.violations.borrow().clone()
    }

    /// KL divergence of a `(u, x, s, y)` count vector from the channel model.
    fn divergence(&self, counts: &[u64]) -> f64 {
        let (nx, ns, ny) = (self.avc.nx(), self.avc.ns(), self.avc.ny());
        let n = self.code.n as f64;
        let mut ps = vec![0.0; ns];
        for (k, &c) in counts.iter().enumerate() {
            ps[(k / ny) % ns] += c as f64 / n;
        }
        let mut d = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let y = k % ny;
            let s = (k / ny) % ns;
            let x = (k / (ny * ns)) % nx;
            let u = k / (ny * ns * nx);
            let q = self.p_u[u] * self.p_x_given_u[u][x] * ps[s] * self.avc.w(y, x, s);
            let p = c as f64 / n;
            if q <= 0.0 {
                return f64::INFINITY;
            }
            d += p * (p / q).log2();
        }
        d.max(0.0)
    }

    fn state_ok(&self, counts: &[u64]) -> Result<bool> {
        let (ns, ny) = (self.avc.ns(), self.avc.ny());
        let n = self.code.n as f64;
        let mut ps = vec![0.0; ns];
        for (k, &c) in counts.iter().enumerate() {
            ps[(k / ny) % ns] += c as f64 / n;
        }
        self.avc.lambda_s.contains(&ps)
    }

    /// State sequences witnessing step 1 for codeword `i`.
    fn step_one(&self, i: usize, y: &[usize]) -> Result<Vec<Vec<usize>>> {
        let (nx, ns, ny) = (self.avc.nx(), self.avc.ns(), self.avc.ny());
        let x = &self.code.codewords[i];
        let mut classes: HashMap<(usize, usize, usize), Vec<usize>> = HashMap::new();
        for j in 0..self.code.n {
            classes.entry((self.u_seq[j], x[j], y[j])).or_default().push(j);
        }
        let mut keys: Vec<_> = classes.keys().copied().collect();
        keys.sort_unstable();
        // options per class: (allowed states, count vectors over them)
        let mut opts: Vec<(Vec<usize>, Vec<Vec<usize>>)> = Vec::with_capacity(keys.len());
        for &(_, xc, yc) in &keys {
            let allowed: Vec<usize> = (0..ns).filter(|&s| self.avc.w(yc, xc, s) > 0.0).collect();
            if allowed.is_empty() {
                return Ok(Vec::new());
            }
            opts.push((allowed, Vec::new()));
        }
        let mut total = 1.0;
        for (k, key) in keys.iter().enumerate() {
            let cnt = classes[key].len();
            let a = opts[k].0.len();
            let exact = crate::cpcone::binomial(cnt + a - 1, a - 1);
            let net_pts = simplex_net(a, self.s_net);
            let choices: Vec<Vec<usize>> = if exact <= net_pts.len() as f64 {
                compositions(cnt, a)
            } else {
                let mut seen = HashSet::new();
                net_pts
                    .iter()
                    .map(|p| apportion(p.probs(), cnt))
                    .filter(|c| seen.insert(c.clone()))
                    .collect()
            };
            total *= choices.len() as f64;
            opts[k].1 = choices;
        }
        if total > self.budget {
            return Err(Error::Budget { needed: total, budget: self.budget });
        }
        let dims: Vec<usize> = opts.iter().map(|o| o.1.len()).collect();
        let mut idx = vec![0usize; dims.len()];
        let mut out = Vec::new();
        for _ in 0..total as usize {
            let mut counts = vec![0u64; self.nu * nx * ns * ny];
            for (k, &(u, xc, yc)) in keys.iter().enumerate() {
                let (allowed, ch) = &opts[k];
                for (a, &c) in allowed.iter().zip(&ch[idx[k]]) {
                    counts[((u * nx + xc) * ns + a) * ny + yc] += c as u64;
                }
            }
            if self.divergence(&counts) <= self.eta && self.state_ok(&counts)? {
                let mut s = vec![0usize; self.code.n];
                for (k, key) in keys.iter().enumerate() {
                    let (allowed, ch) = &opts[k];
                    let mut pos = classes[key].iter();
                    for (a, &c) in allowed.iter().zip(&ch[idx[k]]) {
                        for _ in 0..c {
                            s[*pos.next().unwrap()] = *a;
                        }
                    }
                }
                out.push(s);
                if out.len() >= self.max_witnesses {
                    break;
                }
            }
            crate::probkit::advance(&mut idx, &dims);
        }
        Ok(out)
    }

    /// `I(x,y; x_1..x_L | u,s)` for codeword `i`, list `others`, state `s`.
    fn tournament_mi(&self, i: usize, others: &[usize], s: &[usize], y: &[usize]) -> Result<f64> {
        let (nx, ns, ny) = (self.avc.nx(), self.avc.ns(), self.avc.ny());
        let mut seqs: Vec<&[usize]> = vec![&self.u_seq, &self.code.codewords[i]];
        let mut dims = vec![self.nu, nx];
        for &o in others {
            seqs.push(&self.code.codewords[o]);
            dims.push(nx);
        }
        seqs.push(s);
        dims.push(ns);
        seqs.push(y);
        dims.push(ny);
        let t = crate::probkit::joint_type(&seqs, &dims)?;
        let mut axes = vec!["u".to_string(), "x".to_string()];
        axes.extend((1..=others.len()).map(|k| format!("x{k}")));
        axes.push("s".into());
        axes.push("y".into());
        let j = SequenceType::to_joint(&t, axes.clone())?;
        let list: Vec<&str> = axes[2..2 + others.len()].iter().map(|a| a.as_str()).collect();
        mutual_info(&j, &["x", "y"], &list, &["u", "s"])
    }
}

impl ListDecoder for TypicalityDecoder<'_> {
    fn list_size(&self) -> usize {
        self.l
    }

    fn decode(&self, y: &[usize]) -> Result<Vec<usize>> {
        if y.len() != self.code.n {
            return Err(Error::Dimension("output length differs from n".into()));
        }
        let m = self.code.m();
        let mut witnesses: Vec<(usize, Vec<Vec<usize>>)> = Vec::new();
        for i in 0..m {
            let w = self.step_one(i, y)?;
            if !w.is_empty() {
                witnesses.push((i, w));
            }
        }
        let cands: Vec<usize> = witnesses.iter().map(|w| w.0).collect();
        let mut out = Vec::new();
        for (i, ws) in &witnesses {
            let others: Vec<usize> = cands.iter().copied().filter(|c| c != i).collect();
            let mut accepted = false;
            for s in ws {
                let mut ok = true;
                if others.len() >= self.l {
                    let mut t: Vec<usize> = (0..self.l).collect();
                    loop {
                        let list: Vec<usize> = t.iter().map(|&k| others[k]).collect();
                        if self.tournament_mi(*i, &list, s, y)? > self.eta {
                            ok = false;
                            break;
                        }
                        if !next_subset(&mut t, others.len()) {
                            break;
                        }
                    }
                }
                if ok {
                    accepted = true;
                    break;
                }
            }
            if accepted {
                out.push(*i);
            }
        }
        if out.len() > self.l {
            self.violations.borrow_mut().push(ListViolation {
                y: y.to_vec(),
                output: out.clone(),
            });
        }
        Ok(out)
    }
}

/// Maximum-likelihood decoder for a DMC with known fading sequence
/// (lowest index on ties).
pub struct FadingMlDecoder<'a> {
    pub channel: &'a FadingDMC,
    pub code: &'a Codebook,
}

impl ListDecoder for FadingMlDecoder<'_> {
    fn list_size(&self) -> usize {
        1
    }

    fn decode(&self, y: &[usize]) -> Result<Vec<usize>> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, cw) in self.code.codewords.iter().enumerate() {
            let mut ll = 0.0;
            for j in 0..self.code.n {
                ll += self.channel.row(cw[j], self.code.u_at(j))[y[j]].ln();
            }
            if ll > best.0 {
                best = (ll, i);
            }
        }
        Ok(vec![best.1])
    }
}

/// Enumerates `(y, prob)` over the support of `Π_j row_j(y_j)`.
fn for_each_output(rows: &[&[f64]], budget: f64, mut f: impl FnMut(&[usize], f64)) -> Result<()> {
    let supp: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|r| r.iter().copied().enumerate().filter(|p| p.1 > 0.0).collect())
        .collect();
    let size: f64 = supp.iter().map(|s| s.len() as f64).product();
    if size > budget {
        return Err(Error::Budget { needed: size, budget });
    }
    let dims: Vec<usize> = supp.iter().map(|s| s.len()).collect();
    let mut idx = vec![0usize; dims.len()];
    let mut y = vec![0usize; dims.len()];
    for _ in 0..size as usize {
        let mut p = 1.0;
        for (j, &k) in idx.iter().enumerate() {
            y[j] = supp[j][k].0;
            p *= supp[j][k].1;
        }
        f(&y, p);
        crate::probkit::advance(&mut idx, &dims);
    }
    Ok(())
}

/// Error of the optimal `L`-list decoder when the state sequence is drawn
/// from `state_law` (pairs of sequence and probability):
/// `1 − (1/M) Σ_y` (sum of the `L` largest `P(y|i)`).
pub fn bayes_list_error(avc: &ObliviousAVC, code: &Codebook, state_law: &[(Vec<usize>, f64)], l: usize) -> Result<f64> {
    let (m, n) = (code.m(), code.n);
    if (avc.ny() as f64).powi(n as i32) > 1e6 {
        return Err(Error::Budget { needed: (avc.ny() as f64).powi(n as i32), budget: 1e6 });
    }
    if l >= m {
        return Ok(0.0);
    }
    let mut post: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    for (i, cw) in code.codewords.iter().enumerate() {
        for (s, ps) in state_law {
            if s.len() != n {
                return Err(Error::Dimension("state sequence length differs from n".into()));
            }
            let rows: Vec<&[f64]> = (0..n).map(|j| avc.row(cw[j], s[j])).collect();
            for_each_output(&rows, 1e6, |y, p| {
                post.entry(y.to_vec()).or_insert_with(|| vec![0.0; m])[i] += ps * p;
            })?;
        }
    }
    let mut covered = 0.0;
    for v in post.values_mut() {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        covered += v[..l].iter().sum::<f64>();
    }
    Ok((1.0 - covered / m as f64).max(0.0))
}

/// Exact average error `(1/M) Σ_i P(i ∉ ψ(y) | x_i, s)` at a fixed state.
pub fn exact_avg_error(avc: &ObliviousAVC, code: &Codebook, decoder: &dyn ListDecoder, s: &[usize]) -> Result<f64> {
    let n = code.n;
    if s.len() != n {
        return Err(Error::Dimension("state sequence length differs from n".into()));
    }
    let mut cache: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    let mut err = 0.0;
    for (i, cw) in code.codewords.iter().enumerate() {
        let rows: Vec<&[f64]> = (0..n).map(|j| avc.row(cw[j], s[j])).collect();
        let mut failure: Option<Error> = None;
        for_each_output(&rows, 1e6, |y, p| {
            if failure.is_some() {
                return;
            }
            let list = match cache.get(y) {
                Some(v) => v.clone(),
                None => match decoder.decode(y) {
                    Ok(v) => {
                        cache.insert(y.to_vec(), v.clone());
                        v
                    }
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                },
            };
            if !list.contains(&i) {
                err += p;
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(err / code.m() as f64)
}

/// Sample mean with a normal-approximation 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub ci95: f64,
    pub trials: usize,
}

impl McEstimate {
    fn from_hits(hits: usize, trials: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self {
            mean: p,
            ci95: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }
}

/// Monte Carlo average error: each trial draws a uniform message, a state
/// sequence from `attack(seed)` and a channel output.
pub fn monte_carlo_error(
    avc: &ObliviousAVC,
    code: &Codebook,
    decoder: &dyn ListDecoder,
    attack: &dyn Fn(u64) -> Result<Vec<usize>>,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mut hits = 0;
    for t in 0..trials as u64 {
        let ts = trial_seed(seed, t);
        let mut r = rng(ts);
        let i = r.gen_range(0..code.m());
        let s = attack(trial_seed(ts, 1))?;
        let y = apply_channel(avc, &code.codewords[i], &s, trial_seed(ts, 2))?;
        if !decoder.decode(&y)?.contains(&i) {
            hits += 1;
        }
    }
    Ok(McEstimate::from_hits(hits, trials))
}

/// Monte Carlo error of a decoder over a fading DMC whose fading sequence
/// is the code's time-sharing sequence.
pub fn fading_monte_carlo_error(
    channel: &FadingDMC,
    code: &Codebook,
    decoder: &dyn ListDecoder,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if code.nu() > channel.nu || code.nx != channel.nx {
        return Err(Error::Dimension("code and fading channel disagree".into()));
    }
    let samplers: Vec<WeightedIndex<f64>> = (0..channel.nu * channel.nx)
        .map(|k| WeightedIndex::new(channel.row(k % channel.nx, k / channel.nx).to_vec()).expect("valid row"))
        .collect();
    let mut hits = 0;
    for t in 0..trials as u64 {
        let mut r = rng(trial_seed(seed, t));
        let i = r.gen_range(0..code.m());
        let y: Vec<usize> = (0..code.n)
            .map(|j| samplers[code.u_at(j) * channel.nx + code.codewords[i][j]].sample(&mut r))
            .collect();
        if !decoder.decode(&y)?.contains(&i) {
            hits += 1;
        }
    }
    Ok(McEstimate::from_hits(hits, trials))
}
