//! Capacity expressions: the jammer's inner minimization, net estimates
//! of the list-decoding capacity, the strong/weak comparison bounds and
//! the capacity of a DMC with known fading.

use crate::channel::{FadingDMC, ObliviousAVC, StateConstraint};
use crate::cpcone::{CpDecomposition, CpNetConfig};
use crate::probkit::{entropy_slice, mutual_info, simplex_net, tensor_power, JointDist};
use crate::rng::rng;
use crate::symcheck::{
    check_decomposition, check_strong, check_weak, cp_decomposition_net, input_net, lp_solve,
    LinearProgram, LpOutcome, SymConfig,
};
use crate::{Error, Result};
use rand::Rng;
use serde::Serialize;

/// `I(x;y)` in bits for input `px` through the row-major channel `v`.
fn channel_mi(px: &[f64], v: &[f64], ny: usize) -> f64 {
    let mut q = vec![0.0; ny];
    let mut h_cond = 0.0;
    for (x, &p) in px.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let row = &v[x * ny..(x + 1) * ny];
        for y in 0..ny {
            q[y] += p * row[y];
        }
        h_cond += p * entropy_slice(row);
    }
    (entropy_slice(&q) - h_cond).max(0.0)
}

/// Induced channel `Σ_s U(s) W(y|x,s)` as an `|X| × |Y|` matrix.
fn mix_channel(avc: &ObliviousAVC, u: &[f64]) -> Vec<f64> {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let mut v = vec![0.0; nx * ny];
    for x in 0..nx {
        for (s, &p) in u.iter().enumerate().take(ns) {
            if p == 0.0 {
                continue;
            }
            for (y, w) in avc.row(x, s).iter().enumerate() {
                v[x * ny + y] += p * w;
            }
        }
    }
    v
}

/// `Σ_u P_u I(x;y|u=u)` for kernel rows `U(·|u)` stacked in `k`.
pub fn conditional_mi(avc: &ObliviousAVC, d: &CpDecomposition, k: &[f64]) -> f64 {
    let ns = avc.ns();
    d.weights
        .iter()
        .zip(&d.factors)
        .enumerate()
        .map(|(u, (w, f))| w * channel_mi(f, &mix_channel(avc, &k[u * ns..(u + 1) * ns]), avc.ny()))
        .sum()
}

fn gradient(avc: &ObliviousAVC, d: &CpDecomposition, k: &[f64]) -> Vec<f64> {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let mut g = vec![0.0; k.len()];
    for (u, (w, f)) in d.weights.iter().zip(&d.factors).enumerate() {
        let v = mix_channel(avc, &k[u * ns..(u + 1) * ns]);
        let mut q = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                q[y] += f[x] * v[x * ny + y];
            }
        }
        for s in 0..ns {
            let mut acc = 0.0;
            for x in 0..nx {
                if f[x] == 0.0 {
                    continue;
                }
                for (y, &wy) in avc.row(x, s).iter().enumerate() {
                    if wy > 0.0 {
                        acc += f[x] * wy * (v[x * ny + y].max(1e-300) / q[y].max(1e-300)).log2();
                    }
                }
            }
            g[u * ns + s] = w * acc;
        }
    }
    g
}

/// LP over `U(s|u)` (first `|U|·|S|` columns) with the state constraint.
/// Cp-union constraints of order ≥ 2 add atom-weight columns.
fn state_lp(avc: &ObliviousAVC, p_u: &[f64], cp_net: &CpNetConfig) -> LinearProgram {
    let ns = avc.ns();
    let nk = p_u.len() * ns;
    let atoms: Vec<Vec<f64>> = match (&avc.lambda_s, avc.lambda_s.as_polytope()) {
        (StateConstraint::CpUnion { p_set, .. }, None) => simplex_net(p_set.dim, cp_net.eta)
            .into_iter()
            .map(|d| d.into_vec())
            .collect(),
        _ => Vec::new(),
    };
    let n = nk + atoms.len();
    let mut lp = LinearProgram::new(n);
    lp.bounds[..nk].iter_mut().for_each(|b| *b = (0.0, 1.0));
    for u in 0..p_u.len() {
        let mut r = vec![0.0; n];
        r[u * ns..(u + 1) * ns].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(r, 1.0);
    }
    let ps_row = |s: usize| {
        let mut r = vec![0.0; n];
        for (u, &w) in p_u.iter().enumerate() {
            r[u * ns + s] = w;
        }
        r
    };
    match (&avc.lambda_s, avc.lambda_s.as_polytope()) {
        (_, Some(poly)) => {
            for i in 0..poly.rows() {
                let mut r = vec![0.0; n];
                for s in 0..ns {
                    for (a, b) in r.iter_mut().zip(ps_row(s)) {
                        *a += poly.a[i][s] * b;
                    }
                }
                lp.add_le(r, poly.gamma[i]);
            }
        }
        (StateConstraint::CpUnion { p_set, order, .. }, None) => {
            let powers: Vec<Vec<f64>> = atoms.iter().map(|a| tensor_power(a, *order)).collect();
            for s in 0..ns {
                let mut r = ps_row(s);
                for (a, pw) in powers.iter().enumerate() {
                    r[nk + a] = -pw[s];
                }
                lp.add_eq(r, 0.0);
            }
            let mut sum = vec![0.0; n];
            sum[nk..].iter_mut().for_each(|v| *v = 1.0);
            lp.add_eq(sum, 1.0);
            for i in 0..p_set.rows() {
                let mut r = vec![0.0; n];
                for (a, atom) in atoms.iter().enumerate() {
                    r[nk + a] = p_set.row_value(i, atom);
                }
                lp.add_le(r, p_set.gamma[i]);
            }
        }
        _ => unreachable!(),
    }
    lp
}

fn lp_point(lp: &LinearProgram, obj: Vec<f64>, nk: usize) -> Result<Option<Vec<f64>>> {
    let mut lp = lp.clone();
    lp.objective = Some(obj);
    match lp_solve(&lp)? {
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Optimal { x, .. } | LpOutcome::Feasible { x } => {
            let mut k = x[..nk].to_vec();
            k.iter_mut().for_each(|v| *v = v.max(0.0));
            Ok(Some(k))
        }
    }
}

fn golden(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mut best = ((a + b) / 2.0, f((a + b) / 2.0));
    for t in [0.0, 1.0] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerMin {
    /// Bits.
    pub value: f64,
    /// Minimizing `U(s|u)`, one row per time-sharing symbol.
    pub kernel: Vec<Vec<f64>>,
    /// Conditional-gradient duality gap at the returned point.
    pub gap: f64,
}

/// Minimizes `I(x;y|u)` over state kernels `U(s|u)` whose state law
/// `Σ_u P_u U(·|u)` satisfies the state constraint.
///
/// Conditional-gradient descent with an LP oracle and golden-section line
/// search, restarted from eight LP vertices; the best end point is kept.
pub fn inner_min(avc: &ObliviousAVC, d: &CpDecomposition) -> Result<InnerMin> {
    if d.nx() != avc.nx() {
        return Err(Error::Dimension("decomposition must range over X".into()));
    }
    let ns = avc.ns();
    let nk = d.k() * ns;
    let lp = state_lp(avc, &d.weights, &CpNetConfig::for_alphabet(avc.nx()));
    let mut r = rng(0x1f2e_3d4c);
    let mut best: Option<InnerMin> = None;
    for start in 0..8 {
        let mut obj = vec![0.0; lp.n];
        if start > 0 {
            obj[..nk].iter_mut().for_each(|v| *v = r.gen_range(-1.0..1.0));
        }
        let Some(mut k) = lp_point(&lp, obj, nk)? else {
            return Err(Error::Infeasible("no state kernel satisfies lambda_s".into()));
        };
        let mut gap = f64::INFINITY;
        for _ in 0..2000 {
            let g = gradient(avc, d, &k);
            let Some(v) = lp_point(&lp, pad(&g, lp.n), nk)? else {
                return Err(Error::Numerical("oracle lost feasibility".into()));
            };
            gap = g.iter().zip(k.iter().zip(&v)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if gap < 1e-10 {
                break;
            }
            let dir: Vec<f64> = v.iter().zip(&k).map(|(a, b)| a - b).collect();
            let (t, _) = golden(|t| {
                let p: Vec<f64> = k.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                conditional_mi(avc, d, &p)
            });
            if t == 0.0 {
                break;
            }
            k.iter_mut().zip(&dir).for_each(|(a, b)| *a += t * b);
        }
        let value = conditional_mi(avc, d, &k);
        if best.as_ref().map_or(true, |b| value < b.value) {
            best = Some(InnerMin {
                value,
                kernel: k.chunks(ns).map(|c| c.to_vec()).collect(),
                gap: gap.max(0.0),
            });
        }
    }
    Ok(best.unwrap())
}

fn pad(g: &[f64], n: usize) -> Vec<f64> {
    let mut v = g.to_vec();
    v.resize(n, 0.0);
    v
}

/// Sweep settings for the outer maximization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Largest `|U|` in the decomposition net.
    pub k_max: usize,
    /// ℓ1 resolution of the input and decomposition nets.
    pub resolution: f64,
    pub sym: SymConfig,
}

impl SearchConfig {
    pub fn for_alphabet(nx: usize) -> Self {
        Self {
            k_max: 1,
            resolution: 0.1,
            sym: SymConfig::for_alphabet(nx),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityEstimate {
    /// Lower-bound estimate in bits (0 when nothing is admissible).
    pub value: f64,
    pub decomposition: Option<CpDecomposition>,
    pub kernel: Option<Vec<Vec<f64>>>,
    /// Set when every net point is symmetrizable.
    pub all_symmetrizable: bool,
    pub evaluated: usize,
    pub admissible: usize,
}

fn sweep(
    avc: &ObliviousAVC,
    decomps: impl IntoIterator<Item = CpDecomposition>,
    admissible: impl Fn(&CpDecomposition) -> Result<bool>,
) -> Result<CapacityEstimate> {
    let mut est = CapacityEstimate {
        value: 0.0,
        decomposition: None,
        kernel: None,
        all_symmetrizable: true,
        evaluated: 0,
        admissible: 0,
    };
    for d in decomps {
        est.evaluated += 1;
        if !admissible(&d)? {
            continue;
        }
        est.admissible += 1;
        est.all_symmetrizable = false;
        let m = inner_min(avc, &d)?;
        if est.decomposition.is_none() || m.value > est.value {
            est.value = m.value;
            est.decomposition = Some(d);
            est.kernel = Some(m.kernel);
        }
    }
    Ok(est)
}

/// Net estimate of the list-decoding capacity: the best inner minimum over
/// decompositions `(P_u, P_{x|u})` that admit no symmetrizing kernel.
pub fn capacity_lower_bound(avc: &ObliviousAVC, l: usize, cfg: &SearchConfig) -> Result<CapacityEstimate> {
    if l == 0 {
        return Err(Error::validation("L", "must be at least 1"));
    }
    let mut decomps = Vec::new();
    for p in input_net(avc, cfg.resolution)? {
        decomps.extend(cp_decomposition_net(&p, l, cfg.k_max, cfg.resolution, cfg.sym.budget)?);
    }
    sweep(avc, decomps, |d| Ok(!check_decomposition(avc, d, &cfg.sym)?.is_yes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonBounds {
    /// Admissible set: inputs that are not strongly symmetrizable.
    pub upper: CapacityEstimate,
    /// Admissible set: inputs that are not weakly symmetrizable.
    pub lower: CapacityEstimate,
}

/// Bounds from the strong and weak notions, both with the unconditioned
/// inner objective `min_{U_s} I(x;y)`.
pub fn sarwate_gastpar_bounds(avc: &ObliviousAVC, l: usize, cfg: &SearchConfig) -> Result<ComparisonBounds> {
    if l == 0 {
        return Err(Error::validation("L", "must be at least 1"));
    }
    let pts: Vec<CpDecomposition> = input_net(avc, cfg.resolution)?
        .iter()
        .map(|p| CpDecomposition::product(p, l))
        .collect();
    let upper = sweep(avc, pts.clone(), |d| {
        Ok(!check_strong(avc, &d.factors[0], l, &cfg.sym)?.is_yes())
    })?;
    let lower = sweep(avc, pts, |d| {
        Ok(!check_weak(avc, &d.factors[0], l, &cfg.sym)?.is_yes())
    })?;
    Ok(ComparisonBounds { upper, lower })
}

/// Capacity of one DMC by alternating maximization; returns the value
/// and the optimal input.
pub fn dmc_capacity(w: &[f64], nx: usize, ny: usize) -> Result<(f64, Vec<f64>)> {
    let mut p = vec![1.0 / nx as f64; nx];
    let mut prev = channel_mi(&p, w, ny);
    for _ in 0..100_000 {
        let mut q = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                q[y] += p[x] * w[x * ny + y];
            }
        }
        let mut next = vec![0.0; nx];
        for x in 0..nx {
            let mut d = 0.0;
            for y in 0..ny {
                let v = w[x * ny + y];
                if v > 0.0 {
                    d += v * (v / q[y]).log2();
                }
            }
            next[x] = p[x] * d.exp2();
        }
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= z);
        let val = channel_mi(&next, w, ny);
        p = next;
        if (val - prev).abs() < 1e-9 {
            return Ok((val, p));
        }
        prev = val;
    }
    Err(Error::NonConvergence(100_000))
}

/// `max_{P_{x|u}} I(x;y|u)`, separable over fading states.
pub fn fading_capacity(f: &FadingDMC) -> Result<(f64, Vec<Vec<f64>>)> {
    let p_u = f.p_u()?;
    if p_u.iter().any(|&p| p <= 0.0) {
        return Err(Error::validation("P_u", "fading states must have positive probability"));
    }
    let mut value = 0.0;
    let mut arg = Vec::with_capacity(f.nu);
    for (u, &pu) in p_u.iter().enumerate() {
        let block = &f.w[u * f.nx * f.ny..(u + 1) * f.nx * f.ny];
        let (c, p) = dmc_capacity(block, f.nx, f.ny)?;
        value += pu * c;
        arg.push(p);
    }
    Ok((value, arg))
}

/// Joint law of `(u, x, x_1..x_L, s, y)` built as
/// `P_u P_{x|u} P_{x|u}^{⊗L} U(s|u,x_[L]) W(y|x,s)`.
pub fn structured_joint(avc: &ObliviousAVC, d: &CpDecomposition, kernel: &[f64]) -> Result<JointDist> {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let l = d.order;
    let per = nx.pow(l as u32);
    if kernel.len() != d.k() * per * ns {
        return Err(Error::Dimension("kernel must be U(s|u, x_[L])".into()));
    }
    let mut dims = vec![d.k(), nx];
    dims.extend(vec![nx; l]);
    dims.push(ns);
    dims.push(ny);
    let mut axes = vec!["u".to_string(), "x".to_string()];
    axes.extend((1..=l).map(|k| format!("x{k}")));
    axes.push("s".into());
    axes.push("y".into());
    let mut pmf = Vec::with_capacity(dims.iter().product());
    for (u, (w, f)) in d.weights.iter().zip(&d.factors).enumerate() {
        let list = tensor_power(f, l);
        for x in 0..nx {
            for (c, pl) in list.iter().enumerate() {
                for s in 0..ns {
                    let base = w * f[x] * pl * kernel[(u * per + c) * ns + s];
                    for y in 0..ny {
                        pmf.push(base * avc.w(y, x, s));
                    }
                }
            }
        }
    }
    JointDist::new(dims, axes, pmf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainCheck {
    /// `I(x;y|u,x_[L])`.
    pub lhs: f64,
    /// `I(x;y|u)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `I(x;y|u,x_[L]) ≥ I(x;y|u)` on a joint law with axes
/// `u, x, x1..xL, s, y`, after verifying that `x` and `x_[L]` are
/// conditionally independent given `u`.
pub fn chain_inequality_check(joint: &JointDist, l: usize) -> Result<ChainCheck> {
    let list: Vec<String> = (1..=l).map(|k| format!("x{k}")).collect();
    let list: Vec<&str> = list.iter().map(|s| s.as_str()).collect();
    let dep = mutual_info(joint, &["x"], &list, &["u"])?;
    if dep > 1e-9 {
        return Err(Error::Structure(format!(
            "x and the list are dependent given u (I = {dep:.3e})"
        )));
    }
    let mut cond = vec!["u"];
    cond.extend(&list);
    let lhs = mutual_info(joint, &["x"], &["y"], &cond)?;
    let rhs = mutual_info(joint, &["x"], &["y"], &["u"])?;
    Ok(ChainCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::bitflip;
    use crate::probkit::{h2, ConstraintPolytope, Dist};
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform_decomp() -> CpDecomposition {
        CpDecomposition::product(&[0.5, 0.5], 1)
    }

    #[test]
    fn constrained_bitflip_inner_min() {
        let m = inner_min(&bitflip(Some(0.1)), &uniform_decomp()).unwrap();
        assert!((m.value - 0.5310044064107188).abs() < 1e-6, "{}", m.value);
        assert!((m.kernel[0][1] - 0.1).abs() < 1e-4);
    }

    #[test]
    fn unconstrained_bitflip_inner_min() {
        let m = inner_min(&bitflip(None), &uniform_decomp()).unwrap();
        assert!(m.value < 1e-6);
        assert!((m.kernel[0][1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn state_blind_channel() {
        // W ignores s: y = x
        let w = vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let avc = ObliviousAVC::new(
            2,
            2,
            2,
            w,
            ConstraintPolytope::unconstrained(2),
            StateConstraint::Polytope(ConstraintPolytope::unconstrained(2)),
        )
        .unwrap();
        let d = CpDecomposition::product(&[0.3, 0.7], 1);
        let m = inner_min(&avc, &d).unwrap();
        assert!((m.value - h2(0.3)).abs() < 1e-9);
    }

    fn ternary_state() -> ObliviousAVC {
        // s = 0 clean, s = 1 flip, s = 2 uniform noise; cost (0, 1, 0.5) ≤ 0.2
        let mut w = Vec::new();
        for x in 0..2 {
            w.extend(if x == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
            w.extend(if x == 0 { [0.0, 1.0] } else { [1.0, 0.0] });
            w.extend([0.5, 0.5]);
        }
        let ls = ConstraintPolytope::new(3, vec![vec![0.0, 1.0, 0.5]], vec![0.2]).unwrap();
        ObliviousAVC::new(2, 3, 2, w, ConstraintPolytope::unconstrained(2), StateConstraint::Polytope(ls)).unwrap()
    }

    fn grid_min(avc: &ObliviousAVC, d: &CpDecomposition, step: usize) -> f64 {
        let poly = avc.lambda_s.polytope().unwrap();
        let mut best = f64::INFINITY;
        for a in 0..=step {
            for b in 0..=step - a {
                let u = [a as f64 / step as f64, b as f64 / step as f64, (step - a - b) as f64 / step as f64];
                let u = &u[..avc.ns()];
                if avc.ns() == 2 && a + b != step {
                    continue;
                }
                if crate::probkit::polytope_contains(u, poly, 1e-12).unwrap() {
                    best = best.min(conditional_mi(avc, d, u));
                }
            }
        }
        best
    }

    #[test]
    fn matches_grid_oracle() {
        for (avc, p) in [(ternary_state(), 0.5), (ternary_state(), 0.8), (bitflip(Some(0.25)), 0.6)] {
            let d = CpDecomposition::product(&[p, 1.0 - p], 1);
            let m = inner_min(&avc, &d).unwrap();
            let g = grid_min(&avc, &d, 400);
            assert!(m.value <= g + 1e-9, "{} vs {}", m.value, g);
            assert!(g - m.value < 1e-4, "{} vs {}", m.value, g);
        }
    }

    #[test]
    fn inner_min_convex_along_segments() {
        let avc = ternary_state();
        let d = CpDecomposition::product(&[0.4, 0.6], 1);
        let a = [0.9, 0.1, 0.0];
        let b = [0.7, 0.0, 0.3];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
        let fm = conditional_mi(&avc, &d, &mid);
        assert!(fm <= (conditional_mi(&avc, &d, &a) + conditional_mi(&avc, &d, &b)) / 2.0 + 1e-12);
    }

    #[test]
    fn infeasible_constraint_errors() {
        let ls = ConstraintPolytope::new(2, vec![vec![1.0, 1.0]], vec![0.5]).unwrap();
        let mut avc = bitflip(None);
        avc.lambda_s = StateConstraint::Polytope(ls);
        assert!(matches!(inner_min(&avc, &uniform_decomp()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn constrained_bitflip_capacity() {
        let avc = bitflip(Some(0.1));
        let cfg = SearchConfig::for_alphabet(2);
        let c = capacity_lower_bound(&avc, 1, &cfg).unwrap();
        assert!(!c.all_symmetrizable);
        assert!((c.value - 0.5310044064107188).abs() < 1e-6);
        let b = sarwate_gastpar_bounds(&avc, 1, &cfg).unwrap();
        assert!((b.upper.value - 0.5310044064107188).abs() < 1e-6);
        assert!((b.lower.value - 0.5310044064107188).abs() < 1e-6);
        assert!(b.lower.value <= c.value + 1e-9 && c.value <= b.upper.value + 1e-9);
    }

    #[test]
    fn unconstrained_bitflip_all_symmetrizable() {
        let avc = bitflip(None);
        let cfg = SearchConfig::for_alphabet(2);
        for l in 1..=2 {
            let c = capacity_lower_bound(&avc, l, &cfg).unwrap();
            assert!(c.all_symmetrizable);
            assert_eq!(c.value, 0.0);
        }
        let b = sarwate_gastpar_bounds(&avc, 1, &cfg).unwrap();
        assert!(b.upper.all_symmetrizable && b.lower.all_symmetrizable);
    }

    #[test]
    fn fading_examples() {
        let clean = FadingDMC::from_blocks(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]], vec![1.0]).unwrap();
        assert!((fading_capacity(&clean).unwrap().0 - 1.0).abs() < 1e-9);
        let bsc = |e: f64| vec![vec![1.0 - e, e], vec![e, 1.0 - e]];
        let one = FadingDMC::from_blocks(&[bsc(0.1)], vec![1.0]).unwrap();
        let (c, p) = fading_capacity(&one).unwrap();
        assert!((c - 0.5310044064107188).abs() < 1e-8);
        assert!((p[0][0] - 0.5).abs() < 1e-6);
        let two = FadingDMC::from_blocks(&[bsc(0.1), bsc(0.2)], vec![0.5, 0.5]).unwrap();
        let (c, _) = fading_capacity(&two).unwrap();
        assert!((c - 0.40453815576167823).abs() < 1e-8, "{c}");
        // a single fading state agrees with the plain DMC routine
        let flat: Vec<f64> = bsc(0.1).concat();
        assert_eq!(dmc_capacity(&flat, 2, 2).unwrap().0, fading_capacity(&one).unwrap().0);
    }

    #[test]
    fn asymmetric_dmc_capacity() {
        // Z channel with crossover 0.5: capacity log2(5/4)
        let w = [1.0, 0.0, 0.5, 0.5];
        let (c, _) = dmc_capacity(&w, 2, 2).unwrap();
        assert!((c - (1.25f64).log2()).abs() < 1e-6);
    }

    #[test]
    fn chain_examples() {
        let avc = bitflip(Some(0.1));
        // state independent of everything, clean channel: y = x
        let d = CpDecomposition::product(&[0.5, 0.5], 1);
        let k = vec![1.0, 0.0, 1.0, 0.0];
        let j = structured_joint(&avc, &d, &k).unwrap();
        let c = chain_inequality_check(&j, 1).unwrap();
        assert!((c.lhs - c.rhs).abs() < 1e-12 && c.holds);
        // point-mass input: both sides vanish
        let d = CpDecomposition::product(&[1.0, 0.0], 1);
        let j = structured_joint(&avc, &d, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let c = chain_inequality_check(&j, 1).unwrap();
        assert!(c.lhs.abs() < 1e-12 && c.rhs.abs() < 1e-12);
    }

    #[test]
    fn chain_structure_violation() {
        // x = x1 deterministically breaks conditional independence
        let mut pmf = vec![0.0; 2 * 2 * 2 * 2];
        for x in 0..2 {
            for y in 0..2 {
                pmf[((x * 2 + x) * 2) * 2 + y] = 0.25;
            }
        }
        let j = JointDist::new(
            vec![1, 2, 2, 2, 2],
            ["u", "x", "x1", "s", "y"].iter().map(|s| s.to_string()).collect(),
            pmf,
        )
        .unwrap();
        assert!(matches!(chain_inequality_check(&j, 1), Err(Error::Structure(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn chain_inequality_random(seed in 0u64..u64::MAX) {
            let mut r = rng(seed);
            let avc = ternary_state();
            let k = 2;
            let l = 2;
            let mut draw = |n: usize| Dist::normalized(&(0..n).map(|_| r.gen_range(0.01..1.0)).collect::<Vec<f64>>()).unwrap().into_vec();
            let weights = draw(k);
            let factors = vec![draw(2), draw(2)];
            let d = CpDecomposition::new(weights, factors, l).unwrap();
            let kernel: Vec<f64> = (0..k * 4).flat_map(|_| draw(3)).collect();
            let j = structured_joint(&avc, &d, &kernel).unwrap();
            let c = chain_inequality_check(&j, l).unwrap();
            prop_assert!(c.holds);
        }
    }
}
