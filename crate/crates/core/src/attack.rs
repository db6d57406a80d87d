//! Jamming strategies against a fixed codebook.

use crate::channel::{Codebook, ObliviousAVC, StateConstraint};
use crate::codegen::{cc_reduce, joint_type_spectrum};
use crate::cpcone::{project_to_cp, symmetrize, CpDecomposition};
use crate::probkit::{apportion, joint_type, l1, power_marginal, tuple_index, CondDist};
use crate::rng::rng;
use crate::symcheck::{max_margin_kernel, JammingKernel, SymConfig};
use crate::{Error, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use serde::Serialize;
use std::collections::HashMap;

/// Net radii of the cp-symmetrization attack.
#[derive(Debug, Clone, Serialize)]
pub struct AttackConfig {
    /// Composition net radius of the constant-composition reduction.
    pub lambda: f64,
    /// Radius of the net over list types.
    pub eta: f64,
    /// Allowed distance between the densest list type and the cp cone.
    pub eps: f64,
    pub sym: SymConfig,
    /// Cap on the number of `L`-subsets in the type spectrum.
    pub spectrum_budget: f64,
}

impl AttackConfig {
    pub fn for_alphabet(nx: usize) -> Self {
        Self {
            lambda: 0.05,
            eta: 0.05,
            eps: 0.05,
            sym: SymConfig::for_alphabet(nx),
            spectrum_budget: 1e6,
        }
    }
}

/// Seed-independent part of the attack: the list law `P̃`, its cp
/// decomposition and the symmetrizing kernel.
#[derive(Debug, Clone, Serialize)]
pub struct CpAttackPlan {
    pub l: usize,
    /// Codewords kept by the constant-composition reduction.
    pub pool: Vec<usize>,
    /// Center of the densest list-type cell.
    pub p_hat: Vec<f64>,
    /// Its cp projection.
    pub p_tilde: Vec<f64>,
    /// ℓ1 distance from the symmetrized `p_hat` to `p_tilde`.
    pub projection_distance: f64,
    pub decomposition: CpDecomposition,
    pub kernel: JammingKernel,
    /// State law induced by `p_tilde` and the kernel.
    pub p_s: Vec<f64>,
    /// `Λ_i − cost_i(p_s)` per constraint row.
    pub margins: Vec<f64>,
    /// `Λ_i − δ_i + |S|·B_i*·(η+ε)`.
    pub cost_bounds: Vec<f64>,
    pub warnings: Vec<String>,
    eta: f64,
    eps: f64,
}

/// One run of a jamming attack.
#[derive(Debug, Clone, Serialize)]
pub struct AttackTranscript {
    pub seed: u64,
    /// Chosen list, in sampling order.
    pub list: Vec<usize>,
    pub decomposition: CpDecomposition,
    pub kernel: JammingKernel,
    pub s_seq: Vec<usize>,
    /// Realized `(1/n) Σ_j B_i(s_j)`.
    pub costs: Vec<f64>,
    /// `Λ_i`.
    pub caps: Vec<f64>,
    pub compliant: Vec<bool>,
    /// Expected cost given the chosen list.
    pub expected_costs: Vec<f64>,
    pub margins: Vec<f64>,
    pub cost_bounds: Vec<f64>,
    /// ℓ1 distance between the list's joint type and `P̃`.
    pub list_distance: f64,
    /// Whether `list_distance ≤ η + ε`.
    pub good_event: bool,
    pub warnings: Vec<String>,
}

fn state_rows(avc: &ObliviousAVC) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    match &avc.lambda_s {
        StateConstraint::Polytope(p) => Some((p.a.clone(), p.gamma.clone())),
        StateConstraint::CpUnion { .. } => None,
    }
}

impl CpAttackPlan {
    pub fn new(avc: &ObliviousAVC, code: &Codebook, l: usize, cfg: &AttackConfig) -> Result<Self> {
        if code.m() == 0 {
            return Err(Error::validation("code", "must be nonempty"));
        }
        if code.nx != avc.nx() {
            return Err(Error::Dimension("code alphabet differs from X".into()));
        }
        let nx = code.nx;
        let cc = cc_reduce(code, cfg.lambda)?;
        if cc.subcode.m() < l {
            return Err(Error::Structure(format!(
                "reduced code has {} codewords, fewer than L = {l}",
                cc.subcode.m()
            )));
        }
        let spectrum = joint_type_spectrum(&cc.subcode, l, cfg.spectrum_budget)?;
        if spectrum.is_empty() {
            return Err(Error::Structure("empty joint-type spectrum".into()));
        }
        let cells = nx.pow(l as u32);
        let grid = ((cells as f64) / (2.0 * cfg.eta) - 1e-9).ceil().max(1.0) as usize;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for (_, t) in &spectrum {
            *counts.entry(apportion(&t.probs(), grid)).or_default() += 1;
        }
        let (cell, _) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .unwrap();
        let p_hat: Vec<f64> = cell.iter().map(|&c| c as f64 / grid as f64).collect();
        let sym = symmetrize(&p_hat, nx, l);
        let marginal = power_marginal(&sym, nx, l, 0);
        let proj = project_to_cp(&sym, nx, l, &marginal, &cfg.sym.cp_net)?;
        let mut warnings = Vec::new();
        if proj.distance > cfg.eps {
            warnings.push(format!(
                "densest list type is {:.4} from the cp cone, above eps = {}",
                proj.distance, cfg.eps
            ));
        }
        let (kernel, p_s) = max_margin_kernel(avc, &proj.projection, l, &cfg.sym)?;
        let ns = avc.ns();
        let (margins, cost_bounds) = match state_rows(avc) {
            Some((a, gamma)) => {
                let mut m = Vec::new();
                let mut b = Vec::new();
                for (row, cap) in a.iter().zip(&gamma) {
                    let cost: f64 = row.iter().zip(&p_s).map(|(x, y)| x * y).sum();
                    let delta = cap - cost;
                    let bstar = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                    m.push(delta);
                    b.push(cap - delta + ns as f64 * bstar * (cfg.eta + cfg.eps));
                }
                (m, b)
            }
            None => (Vec::new(), Vec::new()),
        };
        for (i, d) in margins.iter().enumerate() {
            if *d <= 0.0 {
                warnings.push(format!("constraint {i} has margin {d:.3e}"));
            }
        }
        Ok(Self {
            l,
            pool: cc.indices,
            p_hat,
            p_tilde: proj.projection,
            projection_distance: proj.distance,
            decomposition: proj.nearest,
            kernel,
            p_s,
            margins,
            cost_bounds,
            warnings,
            eta: cfg.eta,
            eps: cfg.eps,
        })
    }

    /// Samples `L` distinct codewords of the pool and a state sequence.
    pub fn run(&self, avc: &ObliviousAVC, code: &Codebook, seed: u64) -> Result<AttackTranscript> {
        let mut r = rng(seed);
        let list: Vec<usize> = sample(&mut r, self.pool.len(), self.l)
            .into_iter()
            .map(|k| self.pool[k])
            .collect();
        let nx = code.nx;
        let n = code.n;
        let samplers: Vec<Option<WeightedIndex<f64>>> = (0..self.kernel.contexts())
            .map(|c| WeightedIndex::new(self.kernel.row(c).to_vec()).ok())
            .collect();
        let mut s_seq = Vec::with_capacity(n);
        let mut xs = vec![0usize; self.l];
        for j in 0..n {
            for (k, &i) in list.iter().enumerate() {
                xs[k] = code.codewords[i][j];
            }
            let ctx = tuple_index(&xs, nx);
            let s = samplers[ctx]
                .as_ref()
                .ok_or_else(|| Error::Numerical(format!("kernel row {ctx} is not a distribution")))?
                .sample(&mut r);
            s_seq.push(s);
        }
        let seqs: Vec<&[usize]> = list.iter().map(|&i| code.codewords[i].as_slice()).collect();
        let tau = joint_type(&seqs, &vec![nx; self.l])?.probs();
        let list_distance = l1(&tau, &self.p_tilde);
        let (costs, caps, expected_costs) = match state_rows(avc) {
            Some((a, gamma)) => {
                let mut costs = Vec::new();
                let mut exp = Vec::new();
                for row in &a {
                    costs.push(s_seq.iter().map(|&s| row[s]).sum::<f64>() / n as f64);
                    let mut e = 0.0;
                    for (c, t) in tau.iter().enumerate() {
                        let u = self.kernel.row(c);
                        e += t * u.iter().zip(row).map(|(p, b)| p * b).sum::<f64>();
                    }
                    exp.push(e);
                }
                (costs, gamma, exp)
            }
            None => (Vec::new(), Vec::new(), Vec::new()),
        };
        let mut compliant: Vec<bool> = costs.iter().zip(&caps).map(|(c, g)| *c <= g + 1e-9).collect();
        if let StateConstraint::CpUnion { .. } = avc.lambda_s {
            let mut t = vec![0.0; avc.ns()];
            for &s in &s_seq {
                t[s] += 1.0 / n as f64;
            }
            compliant.push(avc.lambda_s.contains(&t)?);
        }
        Ok(AttackTranscript {
            seed,
            list,
            decomposition: self.decomposition.clone(),
            kernel: self.kernel.clone(),
            s_seq,
            costs,
            caps,
            compliant,
            expected_costs,
            margins: self.margins.clone(),
            cost_bounds: self.cost_bounds.clone(),
            list_distance,
            good_event: list_distance <= self.eta + self.eps + 1e-12,
            warnings: self.warnings.clone(),
        })
    }
}

/// Reduces the code, picks the densest list type, projects it onto the cp
/// cone, finds a symmetrizing kernel and runs it on a random list.
pub fn cp_symmetrization_attack(
    avc: &ObliviousAVC,
    code: &Codebook,
    l: usize,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<AttackTranscript> {
    CpAttackPlan::new(avc, code, l, cfg)?.run(avc, code, seed)
}

/// Independent states `s_j ~ U(·|u_j)`.
pub fn iid_state_attack(kernel: &CondDist, u_seq: &[usize], seed: u64) -> Result<Vec<usize>> {
    let samplers: Vec<WeightedIndex<f64>> = (0..kernel.n_in)
        .map(|u| WeightedIndex::new(kernel.row(u).to_vec()).map_err(|e| Error::Numerical(e.to_string())))
        .collect::<Result<_>>()?;
    let mut r = rng(seed);
    u_seq
        .iter()
        .map(|&u| {
            samplers
                .get(u)
                .map(|d| d.sample(&mut r))
                .ok_or_else(|| Error::Dimension(format!("time-sharing symbol {u} outside the kernel")))
        })
        .collect()
}

/// `1 − Σ_i 4(B_i*)²/(n δ_i²)`, the Chebyshev floor on the compliance
/// probability of an attack with margins `δ_i`.
pub fn compliance_floor(avc: &ObliviousAVC, margins: &[f64], n: usize) -> f64 {
    let Some((a, _)) = state_rows(avc) else {
        return 1.0;
    };
    let mut f = 1.0;
    for (row, d) in a.iter().zip(margins) {
        let b = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if *d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        f -= 4.0 * b * b / (n as f64 * d * d);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bitflip, output_distribution};
    use crate::codegen::sample_codebook;
    use crate::probkit::{permutations, ConstraintPolytope};

    fn light_code(n: usize, m: usize, seed: u64) -> Codebook {
        sample_codebook(n, m, &vec![0; n], &[vec![0.9, 0.1]], seed).unwrap()
    }

    #[test]
    fn iid_point_mass_is_constant() {
        let k = CondDist::from_rows(&[vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(iid_state_attack(&k, &[0; 20], 4).unwrap(), vec![1; 20]);
        assert!(iid_state_attack(&k, &[1], 4).is_err());
    }

    #[test]
    fn iid_bernoulli_weight_in_chebyshev_band() {
        let p = 0.3;
        let k = CondDist::from_rows(&[vec![1.0 - p, p]]).unwrap();
        let n = 400;
        let delta = 0.1;
        let mut outside = 0;
        for t in 0..200 {
            let s = iid_state_attack(&k, &vec![0; n], t).unwrap();
            let w = s.iter().sum::<usize>() as f64 / n as f64;
            if (w - p).abs() > delta {
                outside += 1;
            }
        }
        // Chebyshev: P(|w − p| > δ) ≤ 1/(n δ²)
        assert!((outside as f64 / 200.0) <= 1.0 / (n as f64 * delta * delta));
    }

    #[test]
    fn attack_is_reproducible() {
        let avc = bitflip(Some(0.3));
        let code = light_code(30, 6, 2);
        let cfg = AttackConfig::for_alphabet(2);
        let a = cp_symmetrization_attack(&avc, &code, 2, &cfg, 9).unwrap();
        let b = cp_symmetrization_attack(&avc, &code, 2, &cfg, 9).unwrap();
        assert_eq!(a.s_seq, b.s_seq);
        assert_eq!(a.list, b.list);
        assert_eq!(a.list.len(), 2);
        assert_ne!(a.list[0], a.list[1]);
    }

    #[test]
    fn kernel_symmetrizes_the_realized_list() {
        // per-letter output laws agree under every role permutation
        let avc = bitflip(Some(0.3));
        let code = light_code(6, 5, 11);
        let cfg = AttackConfig::for_alphabet(2);
        let plan = CpAttackPlan::new(&avc, &code, 2, &cfg).unwrap();
        let t = plan.run(&avc, &code, 3).unwrap();
        let mut roles = vec![t.list[0], t.list[1]];
        let third = (0..code.m()).find(|i| !roles.contains(i)).unwrap();
        roles.insert(0, third);
        let mut laws = Vec::new();
        for perm in permutations(3) {
            let x = &code.codewords[roles[perm[0]]];
            let mut acc = vec![0.0; 2usize.pow(6)];
            // average over the kernel's state law given the listed codewords
            let mut rows: Vec<Vec<f64>> = Vec::new();
            for j in 0..6 {
                let ctx = tuple_index(&[code.codewords[roles[perm[1]]][j], code.codewords[roles[perm[2]]][j]], 2);
                rows.push(plan.kernel.row(ctx).to_vec());
            }
            crate::channel::for_each_sequence(2, 6, |s| {
                let p: f64 = s.iter().enumerate().map(|(j, &v)| rows[j][v]).product();
                if p == 0.0 {
                    return;
                }
                let o = output_distribution(&avc, x, s, 1e6).unwrap();
                for (k, v) in o.pmf.iter().enumerate() {
                    acc[k] += p * v;
                }
            });
            laws.push(acc);
        }
        for w in laws.windows(2) {
            assert!(l1(&w[0], &w[1]) < 1e-9);
        }
    }

    #[test]
    fn expected_cost_within_bound() {
        let avc = bitflip(Some(0.3));
        let code = light_code(40, 8, 5);
        let cfg = AttackConfig::for_alphabet(2);
        let plan = CpAttackPlan::new(&avc, &code, 2, &cfg).unwrap();
        assert!(plan.margins[0] > 0.0);
        let mut mean = 0.0;
        let mut good = 0;
        let trials = 200;
        for t in 0..trials {
            let tr = plan.run(&avc, &code, t).unwrap();
            mean += tr.costs[0] / trials as f64;
            good += tr.good_event as usize;
        }
        assert!(mean <= plan.cost_bounds[0]);
        assert!(good > 0);
    }

    #[test]
    fn no_kernel_is_an_error() {
        // |S| = 1 noiseless channel admits no symmetrization
        let avc = ObliviousAVC::new(
            2,
            1,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            ConstraintPolytope::unconstrained(2),
            StateConstraint::Polytope(ConstraintPolytope::unconstrained(1)),
        )
        .unwrap();
        let code = light_code(10, 4, 1);
        let e = cp_symmetrization_attack(&avc, &code, 1, &AttackConfig::for_alphabet(2), 0).unwrap_err();
        assert!(matches!(e, Error::NoKernel(_)));
    }
}
