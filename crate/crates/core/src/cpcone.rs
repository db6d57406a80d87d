//! Completely positive (cp) self-couplings and copositive witnesses.
//!
//! A joint law `J` on `X^L` is cp when `J = Σ_i λ_i P_i^{⊗L}`. Joints on
//! `X^L` are flat arrays indexed by [`tuple_index`]. Membership and
//! copositivity are decided against simplex nets, so every answer carries
//! the net resolution it was computed at.

use crate::channel::Codebook;
use crate::probkit::{
    index_tuple, l1, permutations, power_marginal, simplex_net, tensor_power, tuple_index, Dist,
    JointDist, NORM_TOL,
};
use crate::symcheck::{lp_solve, LinearProgram, LpOutcome};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Mixture `Σ_i λ_i P_i^{⊗L}`; equivalently a time-sharing law `P_u = λ`
/// with `P_{x|u=i} = P_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpDecomposition {
    pub weights: Vec<f64>,
    pub factors: Vec<Vec<f64>>,
    pub order: usize,
}

impl CpDecomposition {
    pub fn new(weights: Vec<f64>, factors: Vec<Vec<f64>>, order: usize) -> Result<Self> {
        Dist::new(weights.clone())?;
        if factors.len() != weights.len() || factors.is_empty() {
            return Err(Error::Dimension("one factor per weight".into()));
        }
        let nx = factors[0].len();
        for f in &factors {
            if f.len() != nx {
                return Err(Error::Dimension("factors over different alphabets".into()));
            }
            Dist::new(f.clone())?;
        }
        if order == 0 {
            return Err(Error::validation("order", "must be at least 1"));
        }
        Ok(Self {
            weights,
            factors,
            order,
        })
    }

    pub fn product(p: &[f64], order: usize) -> Self {
        Self {
            weights: vec![1.0],
            factors: vec![p.to_vec()],
            order,
        }
    }

    pub fn nx(&self) -> usize {
        self.factors[0].len()
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// `Σ_u P_u(u) P_{x|u}(·|u)`.
    pub fn marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nx()];
        for (w, f) in self.weights.iter().zip(&self.factors) {
            for (a, b) in m.iter_mut().zip(f) {
                *a += w * b;
            }
        }
        m
    }

    /// Flat joint over `X^L`.
    pub fn joint(&self) -> Vec<f64> {
        let mut j = vec![0.0; self.nx().pow(self.order as u32)];
        for (w, f) in self.weights.iter().zip(&self.factors) {
            for (a, b) in j.iter_mut().zip(tensor_power(f, self.order)) {
                *a += w * b;
            }
        }
        j
    }
}

pub fn cp_synthesize(d: &CpDecomposition) -> JointDist {
    JointDist::power(d.nx(), d.order, d.joint()).expect("mixture of product laws")
}

/// Resolution of the atom net used for cp membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpNetConfig {
    /// ℓ1 radius of the simplex net of mixture atoms.
    pub eta: f64,
    /// Allowed ℓ1 deviation of the mixture marginal from the target.
    pub lambda: f64,
}

impl CpNetConfig {
    pub fn new(eta: f64) -> Self {
        Self { eta, lambda: eta }
    }

    pub fn for_alphabet(nx: usize) -> Self {
        Self::new(if nx <= 3 { 0.02 } else { 0.1 })
    }
}

/// Nearest mixture of net atoms to a joint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpProjection {
    pub distance: f64,
    pub nearest: CpDecomposition,
    pub projection: Vec<f64>,
    /// ℓ1 distance by which net rounding can move a cp joint of order `L`.
    pub net_error: f64,
}

/// ℓ1 distance from `j` (on `X^L`) to the mixtures `Σ_a w_a R_a^{⊗L}` of
/// net atoms whose marginal lies within `cfg.lambda` of `p_x`.
pub fn distance_to_cp(
    j: &[f64],
    nx: usize,
    l: usize,
    p_x: &[f64],
    cfg: &CpNetConfig,
) -> Result<(f64, CpProjection)> {
    let p = project_to_cp(j, nx, l, p_x, cfg)?;
    Ok((p.distance, p))
}

pub fn project_to_cp(
    j: &[f64],
    nx: usize,
    l: usize,
    p_x: &[f64],
    cfg: &CpNetConfig,
) -> Result<CpProjection> {
    let cells = nx.pow(l as u32);
    if j.len() != cells || p_x.len() != nx {
        return Err(Error::Dimension("joint must live on X^L".into()));
    }
    let mut atoms: Vec<Vec<f64>> = simplex_net(nx, cfg.eta)
        .into_iter()
        .map(|d| d.into_vec())
        .collect();
    atoms.push(p_x.to_vec());
    let na = atoms.len();
    let powers: Vec<Vec<f64>> = atoms.iter().map(|a| tensor_power(a, l)).collect();
    // variables: w (na), t (cells), d (nx)
    let nv = na + cells + nx;
    let mut lp = LinearProgram::new(nv);
    let mut sum = vec![0.0; nv];
    sum[..na].iter_mut().for_each(|v| *v = 1.0);
    lp.add_eq(sum, 1.0);
    for c in 0..cells {
        // |j_c - Σ w_a R_a(c)| ≤ t_c
        let mut r = vec![0.0; nv];
        for a in 0..na {
            r[a] = -powers[a][c];
        }
        r[na + c] = -1.0;
        lp.add_le(r.clone(), -j[c]);
        for a in 0..na {
            r[a] = powers[a][c];
        }
        lp.add_le(r, j[c]);
    }
    for x in 0..nx {
        let mut r = vec![0.0; nv];
        for a in 0..na {
            r[a] = atoms[a][x];
        }
        r[na + cells + x] = -1.0;
        lp.add_le(r.clone(), p_x[x]);
        for a in 0..na {
            r[a] = -atoms[a][x];
        }
        lp.add_le(r, -p_x[x]);
    }
    let mut dev = vec![0.0; nv];
    dev[na + cells..].iter_mut().for_each(|v| *v = 1.0);
    lp.add_le(dev, cfg.lambda);
    let mut obj = vec![0.0; nv];
    obj[na..na + cells].iter_mut().for_each(|v| *v = 1.0);
    lp.objective = Some(obj);
    let (x, value) = match lp_solve(&lp)? {
        LpOutcome::Optimal { x, value } => (x, value),
        _ => return Err(Error::Infeasible("no net mixture near the target marginal".into())),
    };
    let mut weights = Vec::new();
    let mut factors = Vec::new();
    for a in 0..na {
        if x[a] > 1e-12 {
            weights.push(x[a]);
            factors.push(atoms[a].clone());
        }
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= s);
    let nearest = CpDecomposition {
        weights,
        factors,
        order: l,
    };
    let projection = nearest.joint();
    Ok(CpProjection {
        distance: value.max(0.0),
        nearest,
        projection,
        net_error: l as f64 * cfg.eta,
    })
}

/// Applies a coordinate permutation: `(πx)_k = x_{π(k)}`.
fn permute(idx: usize, perm: &[usize], nx: usize) -> usize {
    let t = index_tuple(idx, nx, perm.len());
    let p: Vec<usize> = perm.iter().map(|&k| t[k]).collect();
    tuple_index(&p, nx)
}

/// `max_π max_x |J(x) − J(πx)|`.
pub fn asymmetry(j: &[f64], nx: usize, l: usize) -> f64 {
    let perms = permutations(l);
    let mut a: f64 = 0.0;
    for i in 0..j.len() {
        for p in &perms {
            a = a.max((j[i] - j[permute(i, p, nx)]).abs());
        }
    }
    a
}

/// Average of `J` over all `L!` coordinate permutations.
pub fn symmetrize(j: &[f64], nx: usize, l: usize) -> Vec<f64> {
    let perms = permutations(l);
    let k = perms.len() as f64;
    (0..j.len())
        .map(|i| perms.iter().map(|p| j[permute(i, p, nx)]).sum::<f64>() / k)
        .collect()
}

/// Symmetric tensor `Q` on `X^L` with `⟨Q, J⟩ ≤ −margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopositiveWitness {
    pub nx: usize,
    pub order: usize,
    pub q: Vec<f64>,
    pub margin: f64,
}

impl CopositiveWitness {
    pub fn pair(&self, j: &[f64]) -> f64 {
        self.q.iter().zip(j).map(|(a, b)| a * b).sum()
    }

    /// `min_R ⟨Q, R^{⊗L}⟩` over a simplex net of radius `eta`.
    pub fn min_on_net(&self, eta: f64) -> f64 {
        simplex_net(self.nx, eta)
            .iter()
            .map(|r| self.pair(&tensor_power(r.probs(), self.order)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Orbits of `X^L` under coordinate permutations, keyed by sorted tuple.
fn orbits(nx: usize, l: usize) -> (Vec<usize>, usize) {
    let cells = nx.pow(l as u32);
    let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut of = vec![0; cells];
    for (i, o) in of.iter_mut().enumerate() {
        let mut t = index_tuple(i, nx, l);
        t.sort_unstable();
        let next = ids.len();
        *o = *ids.entry(t).or_insert(next);
    }
    (of, ids.len())
}

/// Searches for a copositive `Q` (checked on a net of radius `eta`) with
/// `‖Q‖∞ ≤ 1` minimizing `⟨J, Q⟩`; returns it when the minimum is negative.
pub fn copositive_witness(
    j_sym: &[f64],
    nx: usize,
    l: usize,
    p_x: &[f64],
    eta: f64,
) -> Result<Option<CopositiveWitness>> {
    if j_sym.len() != nx.pow(l as u32) || p_x.len() != nx {
        return Err(Error::Dimension("joint must live on X^L".into()));
    }
    for axis in 0..l {
        if l1(&power_marginal(j_sym, nx, l, axis), p_x) > 1e-6 {
            return Err(Error::validation("J", format!("marginal {axis} differs from P_x")));
        }
    }
    let (of, k) = orbits(nx, l);
    let fold = |t: &[f64]| {
        let mut v = vec![0.0; k];
        for (i, &m) in t.iter().enumerate() {
            v[of[i]] += m;
        }
        v
    };
    let mut lp = LinearProgram::new(k);
    lp.bounds = vec![(-1.0, 1.0); k];
    for r in simplex_net(nx, eta) {
        lp.add_ge(fold(&tensor_power(r.probs(), l)), 0.0);
    }
    lp.objective = Some(fold(j_sym));
    match lp_solve(&lp)? {
        LpOutcome::Optimal { x, value } if value < -1e-9 => Ok(Some(CopositiveWitness {
            nx,
            order: l,
            q: of.iter().map(|&o| x[o]).collect(),
            margin: -value,
        })),
        _ => Ok(None),
    }
}

/// Explicit self-coupling of `p_x` outside the cp cone together with an
/// exactly copositive witness, for `L ≥ 2` and `|supp p_x| ≥ 2`.
///
/// The pair marginal on coordinates (1,2) is `P⊗P + t·D` with `D` moving
/// mass from the diagonal of two support points `a, b` onto their
/// off-diagonal; the witness is the symmetrization of `v vᵀ` over all
/// coordinate pairs with `v = e_a − (P(a)/P(b)) e_b`, so
/// `⟨Q, R^{⊗L}⟩ = (v·R)² ≥ 0` for every distribution `R`.
pub fn non_cp_coupling(p_x: &[f64], l: usize) -> Option<(Vec<f64>, CopositiveWitness)> {
    if l < 2 {
        return None;
    }
    let nx = p_x.len();
    let mut supp: Vec<usize> = (0..nx).filter(|&x| p_x[x] > 1e-12).collect();
    if supp.len() < 2 {
        return None;
    }
    supp.sort_by(|&a, &b| p_x[b].partial_cmp(&p_x[a]).unwrap().then(a.cmp(&b)));
    let (a, b) = (supp[0], supp[1]);
    let c = p_x[a] / p_x[b];
    let t = p_x[b] * p_x[b];
    let mut j2 = tensor_power(p_x, 2);
    j2[a * nx + a] -= t;
    j2[b * nx + b] = 0.0;
    j2[a * nx + b] += t;
    j2[b * nx + a] += t;
    let rest = tensor_power(p_x, l - 2);
    let j: Vec<f64> = j2
        .iter()
        .flat_map(|&u| rest.iter().map(move |&v| u * v))
        .collect();
    let mut v = vec![0.0; nx];
    v[a] = 1.0;
    v[b] = -c;
    let pairs = (l * (l - 1) / 2) as f64;
    let scale = c * c;
    let q: Vec<f64> = (0..j.len())
        .map(|i| {
            let tup = index_tuple(i, nx, l);
            let mut s = 0.0;
            for p in 0..l {
                for r in p + 1..l {
                    s += v[tup[p]] * v[tup[r]];
                }
            }
            s / pairs / scale
        })
        .collect();
    let margin = t * (1.0 + c) * (1.0 + c) / pairs / scale;
    Some((
        j,
        CopositiveWitness {
            nx,
            order: l,
            q,
            margin,
        },
    ))
}

/// Both sides of the double-counting identity for a tensor `Q` on `X^L`:
/// the sum over all ordered `L`-tuples (with repetition) of `⟨τ_tuple, Q⟩`,
/// and `(M^L/n)·Σ_j ⟨c_j^{⊗L}, Q⟩` with `c_j` the type of column `j`.
pub fn double_counting(code: &Codebook, q: &[f64], l: usize) -> Result<(f64, f64)> {
    let (m, n, nx) = (code.m(), code.n, code.nx);
    if q.len() != nx.pow(l as u32) {
        return Err(Error::Dimension("Q must live on X^L".into()));
    }
    let tuples = (m as f64).powi(l as i32);
    if tuples * n as f64 > 1e8 {
        return Err(Error::Budget {
            needed: tuples * n as f64,
            budget: 1e8,
        });
    }
    let mut lhs = 0.0;
    let mut idx = vec![0usize; l];
    let dims = vec![m; l];
    for _ in 0..tuples as usize {
        let mut s = 0.0;
        for j in 0..n {
            let k = idx
                .iter()
                .fold(0, |acc, &i| acc * nx + code.codewords[i][j]);
            s += q[k];
        }
        lhs += s / n as f64;
        crate::probkit::advance(&mut idx, &dims);
    }
    let mut rhs = 0.0;
    for j in 0..n {
        let mut col = vec![0.0; nx];
        for cw in &code.codewords {
            col[cw[j]] += 1.0 / m as f64;
        }
        rhs += tensor_power(&col, l)
            .iter()
            .zip(q)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    rhs *= tuples / n as f64;
    Ok((lhs, rhs))
}

/// Result of scanning the order-`L` joint types of a code for cp closeness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub fraction: f64,
    pub tuples: usize,
    /// `1 − 1/binom(K,L)` when `K` was supplied.
    pub turan_density_cap: Option<f64>,
    /// `1/binom(K,L)`.
    pub nu: Option<f64>,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Fraction of ascending `L`-subsets of the code whose joint type lies
/// within ℓ1 distance `eps` of the cp mixtures around `p_hat`.
pub fn cp_extraction_fraction(
    code: &Codebook,
    p_hat: &[f64],
    eps: f64,
    l: usize,
    turan_k: Option<usize>,
    cfg: &CpNetConfig,
    budget: f64,
) -> Result<ExtractionReport> {
    let spectrum = crate::codegen::joint_type_spectrum(code, l, budget)?;
    let mut cache: HashMap<Vec<u64>, bool> = HashMap::new();
    let mut close = 0usize;
    for (_, t) in &spectrum {
        let ok = match cache.get(&t.counts) {
            Some(&v) => v,
            None => {
                let (d, _) = distance_to_cp(&t.probs(), code.nx, l, p_hat, cfg)?;
                cache.insert(t.counts.clone(), d <= eps);
                d <= eps
            }
        };
        close += ok as usize;
    }
    let nu = turan_k.map(|k| 1.0 / binomial(k, l));
    Ok(ExtractionReport {
        fraction: close as f64 / spectrum.len() as f64,
        tuples: spectrum.len(),
        turan_density_cap: nu.map(|v| 1.0 - v),
        nu,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProductCheck {
    /// `P(x_i)Q(x_{−i}) = P(x_{i'})Q(x_{−i'})` for all `i ≠ i'` and tuples.
    pub hypothesis: bool,
    /// `Q = P^{⊗L}`.
    pub conclusion: bool,
}

impl ProductCheck {
    pub fn holds(&self) -> bool {
        !self.hypothesis || self.conclusion
    }
}

/// Brute-force check that the exchange hypothesis forces `Q = P^{⊗L}`.
pub fn product_characterization_check(p: &[f64], q: &[f64], l: usize) -> Result<ProductCheck> {
    let nx = p.len();
    if nx > 4 || l > 3 {
        return Err(Error::Budget {
            needed: (nx as f64).powi(l as i32 + 1),
            budget: 256.0,
        });
    }
    if q.len() != nx.pow(l as u32) {
        return Err(Error::Dimension("Q must live on X^L".into()));
    }
    let tol = NORM_TOL;
    let drop = |t: &[usize], i: usize| -> usize {
        let rest: Vec<usize> = t
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i)
            .map(|(_, &v)| v)
            .collect();
        tuple_index(&rest, nx)
    };
    let mut hypothesis = true;
    'outer: for idx in 0..nx.pow(l as u32 + 1) {
        let t = index_tuple(idx, nx, l + 1);
        for i in 0..=l {
            for k in i + 1..=l {
                let a = p[t[i]] * q[drop(&t, i)];
                let b = p[t[k]] * q[drop(&t, k)];
                if (a - b).abs() > tol {
                    hypothesis = false;
                    break 'outer;
                }
            }
        }
    }
    let conclusion = l1(q, &tensor_power(p, l)) <= tol * q.len() as f64;
    Ok(ProductCheck {
        hypothesis,
        conclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn synthesize_examples() {
        let d = CpDecomposition::product(&[0.3, 0.7], 3);
        assert_eq!(cp_synthesize(&d).pmf, tensor_power(&[0.3, 0.7], 3));
        let d = CpDecomposition::new(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(cp_synthesize(&d).pmf, vec![0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn distance_examples() {
        let cfg = CpNetConfig::new(0.05);
        let p = [0.3, 0.7];
        let (d, _) = distance_to_cp(&tensor_power(&p, 2), 2, 2, &p, &cfg).unwrap();
        assert!(d < 1e-9);
        let anti = [0.0, 0.5, 0.5, 0.0];
        let (d, _) = distance_to_cp(&anti, 2, 2, &[0.5, 0.5], &cfg).unwrap();
        assert!(d > 0.1, "{d}");
        // cross-check: a positive distance must come with a witness
        assert!(copositive_witness(&anti, 2, 2, &[0.5, 0.5], 0.05).unwrap().is_some());
    }

    #[test]
    fn asymmetry_examples() {
        let j = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(asymmetry(&j, 2, 2), 1.0);
        assert_eq!(symmetrize(&j, 2, 2), vec![0.0, 0.5, 0.5, 0.0]);
        let s = [0.1, 0.2, 0.2, 0.5];
        assert_eq!(asymmetry(&s, 2, 2), 0.0);
        assert_eq!(symmetrize(&s, 2, 2), s.to_vec());
    }

    #[test]
    fn witness_examples() {
        let p = [0.4, 0.6];
        assert!(copositive_witness(&tensor_power(&p, 2), 2, 2, &p, 0.05).unwrap().is_none());
        let w = copositive_witness(&[0.0, 0.5, 0.5, 0.0], 2, 2, &[0.5, 0.5], 0.05)
            .unwrap()
            .unwrap();
        assert!(w.margin >= 0.5);
        assert!((w.pair(&[0.0, 0.5, 0.5, 0.0]) + w.margin).abs() < 1e-9);
        assert!(w.min_on_net(0.05) >= -1e-9);
        // hand witness [[1,-1],[-1,1]]
        let q = CopositiveWitness { nx: 2, order: 2, q: vec![1.0, -1.0, -1.0, 1.0], margin: 1.0 };
        assert_eq!(q.pair(&[0.0, 0.5, 0.5, 0.0]), -1.0);
        assert!(q.min_on_net(0.01) >= 0.0);
    }

    #[test]
    fn witness_on_far_non_cp_joints() {
        // non-cp binary joints at distance ≥ 0.1: witness margin at least
        // a fixed fraction of the distance
        let mut r = crate::rng::rng(9);
        let cfg = CpNetConfig::new(0.02);
        let mut found = 0;
        for _ in 0..200 {
            let p0: f64 = r.gen_range(0.2..0.8);
            let p = [p0, 1.0 - p0];
            let tmax = p0.min(1.0 - p0);
            let t: f64 = r.gen_range(p0 * (1.0 - p0)..tmax);
            let j = [p0 - t, t, t, 1.0 - p0 - t];
            let (d, _) = distance_to_cp(&j, 2, 2, &p, &cfg).unwrap();
            if d < 0.1 {
                continue;
            }
            found += 1;
            let w = copositive_witness(&j, 2, 2, &p, 0.02).unwrap().expect("witness");
            assert!(w.margin >= 0.25 * d, "margin {} distance {d}", w.margin);
        }
        assert!(found > 10);
    }

    #[test]
    fn non_cp_coupling_is_certified() {
        for (p, l) in [(vec![0.8, 0.2], 2), (vec![0.5, 0.3, 0.2], 2), (vec![0.7, 0.3], 3)] {
            let (j, w) = non_cp_coupling(&p, l).unwrap();
            let nx = p.len();
            assert!(j.iter().all(|&v| v >= -1e-15));
            for axis in 0..l {
                assert!(l1(&power_marginal(&j, nx, l, axis), &p) < 1e-12);
            }
            assert!(w.pair(&j) <= -w.margin + 1e-12 && w.margin > 0.0);
            assert!(w.q.iter().all(|v| v.abs() <= 1.0 + 1e-12));
            assert!(w.min_on_net(0.02) >= -1e-12);
            assert!(asymmetry(&w.q, nx, l) < 1e-15);
        }
        assert!(non_cp_coupling(&[1.0, 0.0], 2).is_none());
    }

    #[test]
    fn double_counting_naive_loop() {
        let code = Codebook::new(2, vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0], vec![0, 0, 0, 1]], None).unwrap();
        let q = [1.0, -1.0, -1.0, 1.0];
        let (lhs, rhs) = double_counting(&code, &q, 2).unwrap();
        let mut naive = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                let t = crate::probkit::joint_type(&[&code.codewords[a], &code.codewords[b]], &[2, 2]).unwrap();
                naive += t.probs().iter().zip(&q).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        assert!((lhs - naive).abs() < 1e-12);
        assert!((lhs - rhs).abs() < 1e-12);
        let single = Codebook::new(2, vec![vec![0, 1, 1]], None).unwrap();
        let (lhs, rhs) = double_counting(&single, &q, 2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn turan_cap_and_identical_code() {
        let code = Codebook::new(2, vec![vec![0, 1, 1, 0]; 4], None).unwrap();
        let r = cp_extraction_fraction(&code, &[0.5, 0.5], 0.01, 2, Some(3), &CpNetConfig::new(0.05), 1e6).unwrap();
        assert_eq!(r.fraction, 1.0);
        assert!((r.turan_density_cap.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.nu.unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn random_codes_have_near_cp_pairs() {
        // constant-composition code of weight 0.1: pair types concentrate near
        // the product law, fraction frozen from a calibration run
        let code = crate::codegen::sample_codebook(200, 40, &vec![0; 200], &[vec![0.9, 0.1]], 17).unwrap();
        let r = cp_extraction_fraction(&code, &[0.9, 0.1], 0.1, 2, None, &CpNetConfig::new(0.02), 1e6).unwrap();
        assert_eq!(r.tuples, 780);
        assert!(r.fraction >= 0.99, "{}", r.fraction);
    }

    #[test]
    fn product_characterization_examples() {
        let p = [0.3, 0.7];
        let c = product_characterization_check(&p, &tensor_power(&p, 2), 2).unwrap();
        assert!(c.hypothesis && c.conclusion && c.holds());
        let c = product_characterization_check(&p, &[0.5, 0.0, 0.0, 0.5], 2).unwrap();
        assert!(!c.hypothesis && c.holds());
    }

    #[test]
    fn product_characterization_grid_search() {
        // every Q on a grid over Δ(X^2) that meets the hypothesis is P⊗P
        let m = 10;
        for pa in 1..m {
            let p = [pa as f64 / m as f64, 1.0 - pa as f64 / m as f64];
            for c in crate::probkit::compositions(m, 4) {
                let q: Vec<f64> = c.iter().map(|&v| v as f64 / m as f64).collect();
                assert!(product_characterization_check(&p, &q, 2).unwrap().holds());
            }
            assert!(product_characterization_check(&p, &tensor_power(&p, 2), 2).unwrap().hypothesis);
        }
    }

    fn decomposition(nx: usize, k: usize, l: usize) -> impl Strategy<Value = CpDecomposition> {
        let norm = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|a| a / s).collect::<Vec<f64>>()
        };
        (
            proptest::collection::vec(0.05f64..1.0, k),
            proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, nx), k),
        )
            .prop_filter_map("mass", move |(w, f)| {
                if f.iter().any(|r| r.iter().sum::<f64>() < 1e-3) {
                    return None;
                }
                CpDecomposition::new(norm(w), f.into_iter().map(norm).collect(), l).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn synthesized_marginals_agree(d in decomposition(3, 3, 3)) {
            let j = d.joint();
            let m = d.marginal();
            for axis in 0..3 {
                prop_assert!(l1(&power_marginal(&j, 3, 3, axis), &m) < 1e-12);
            }
            prop_assert!(asymmetry(&j, 3, 3) < 1e-15);
        }

        #[test]
        fn symmetrization_bound(v in proptest::collection::vec(0.0f64..1.0, 8)) {
            let s: f64 = v.iter().sum();
            prop_assume!(s > 1e-6);
            let j: Vec<f64> = v.iter().map(|a| a / s).collect();
            let sym = symmetrize(&j, 2, 3);
            prop_assert!(asymmetry(&sym, 2, 3) < 1e-15);
            prop_assert!(l1(&j, &sym) <= (8.0 - 2.0) * asymmetry(&j, 2, 3) + 1e-12);
        }

        #[test]
        fn distance_is_lipschitz(d in decomposition(2, 2, 2), e in proptest::collection::vec(0.0f64..0.05, 4)) {
            let cfg = CpNetConfig::new(0.05);
            let j = d.joint();
            let m = d.marginal();
            let mut j2: Vec<f64> = j.iter().zip(&e).map(|(a, b)| a + b).collect();
            let s: f64 = j2.iter().sum();
            j2.iter_mut().for_each(|v| *v /= s);
            let (d1, _) = distance_to_cp(&j, 2, 2, &m, &cfg).unwrap();
            let (d2, _) = distance_to_cp(&j2, 2, 2, &m, &cfg).unwrap();
            prop_assert!((d1 - d2).abs() <= l1(&j, &j2) + 1e-7);
        }

        #[test]
        fn double_counting_identity(
            m in 1usize..6, n in 1usize..8, l in 1usize..4, seed in any::<u64>()
        ) {
            let mut r = crate::rng::rng(seed);
            let cw: Vec<Vec<usize>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(0..2)).collect()).collect();
            let code = Codebook::new(2, cw, None).unwrap();
            let q: Vec<f64> = (0..1 << l).map(|_| r.gen_range(-1.0..1.0)).collect();
            let (lhs, rhs) = double_counting(&code, &q, l).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }
    }
}
