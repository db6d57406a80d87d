//! Symmetrization systems and symmetrizability verdicts.
//!
//! A jamming kernel `U(s|context)` symmetrizes the channel when the output
//! law seen by the receiver is invariant under every permutation of the
//! transmitted codeword and the spoofing list. The identities are linear in
//! the entries of `U`, so deciding symmetrizability of an input distribution
//! is a feasibility question for a linear program once the joint law of the
//! spoofing list is fixed.
//!
//! Three notions quantify over that joint law differently:
//!
//! | notion | joint laws `J` of `(x_1..x_L)` checked |
//! |--------|-----------------------------------------|
//! | weak   | only `P_x^{⊗L}` |
//! | cp     | every cp mixture `Σ λ_i P_i^{⊗L}` with marginal `P_x`, one kernel per mixture component |
//! | strong | every self-coupling with all marginals `P_x` |
//!
//! The cp and strong notions quantify over a continuum; they are swept over
//! finite nets. A `No` always comes with an explicit certificate. A `Yes`
//! from a sweep is reported as [`Answer::YesUpToNet`].
//!
//! Before any LP, a propagation pass looks for equations whose surviving
//! terms all share one sign; such equations force every surviving term to
//! zero. When propagation leaves exactly one state per context, the kernel
//! set is a single deterministic kernel (or empty) and all checks become
//! exact evaluations.

mod lp;

pub use lp::{lp_solve, LinearProgram, LpOutcome, LP_TOL};

use crate::channel::{ObliviousAVC, StateConstraint};
use crate::cpcone::{non_cp_coupling, CopositiveWitness, CpDecomposition, CpNetConfig};
use crate::probkit::{
    compositions, index_tuple, l1, permutations, polytope_contains, power_marginal, simplex_net,
    tensor_power, tuple_index, CondDist,
};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::HashSet;

/// Which symmetrization identities to build.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SymMode {
    /// Kernel `U(s|x')`.
    ObliviousUnique,
    /// Kernel `U(s|u, x_1..x_L)` with `nu` time-sharing symbols.
    ObliviousList { l: usize, nu: usize },
    /// Kernel `U(s|x, x')`.
    Omniscient,
    /// Kernel `U(s|z, x')` for the jammer's observation channel `W(z|x)`.
    Myopic { wz: CondDist },
}

impl SymMode {
    /// Number of conditioning contexts of the kernel.
    pub fn contexts(&self, nx: usize) -> usize {
        match self {
            SymMode::ObliviousUnique => nx,
            SymMode::ObliviousList { l, nu } => nu * nx.pow(*l as u32),
            SymMode::Omniscient => nx * nx,
            SymMode::Myopic { wz } => wz.n_out * nx,
        }
    }
}

/// A conditional law of the state given the kernel context, stored as
/// rows of length `|S|` in context order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JammingKernel {
    pub mode: SymMode,
    pub nx: usize,
    pub ns: usize,
    pub probs: Vec<f64>,
}

impl JammingKernel {
    pub fn new(mode: SymMode, nx: usize, ns: usize, probs: Vec<f64>) -> Result<Self> {
        let k = CondDist::new(mode.contexts(nx), ns, probs)?;
        Ok(Self {
            mode,
            nx,
            ns,
            probs: k.as_slice().to_vec(),
        })
    }

    pub fn contexts(&self) -> usize {
        self.mode.contexts(self.nx)
    }

    pub fn row(&self, ctx: usize) -> &[f64] {
        &self.probs[ctx * self.ns..(ctx + 1) * self.ns]
    }

    /// Kernel placing the state `s = (x_1..x_L)` deterministically, on a
    /// state alphabet of size `|X|^L`.
    pub fn identity(nx: usize, l: usize) -> Self {
        let n = nx.pow(l as u32);
        let mut probs = vec![0.0; n * n];
        for c in 0..n {
            probs[c * n + c] = 1.0;
        }
        Self {
            mode: SymMode::ObliviousList { l, nu: 1 },
            nx,
            ns: n,
            probs,
        }
    }

    /// Context index for list mode.
    pub fn list_context(&self, u: usize, xs: &[usize]) -> usize {
        u * self.nx.pow(xs.len() as u32) + tuple_index(xs, self.nx)
    }

    /// State law `[Σ_u P_u P_{x|u}^{⊗L} U]_s` for a list-mode kernel.
    /// A kernel with a single time-sharing block is shared by all components.
    pub fn state_law(&self, d: &CpDecomposition) -> Result<Vec<f64>> {
        let SymMode::ObliviousList { l, nu } = self.mode else {
            return Err(Error::Dimension("state law needs a list-mode kernel".into()));
        };
        if l != d.order || (nu != 1 && nu != d.k()) || d.nx() != self.nx {
            return Err(Error::Dimension("kernel and decomposition disagree".into()));
        }
        let per = self.nx.pow(l as u32);
        let mut ps = vec![0.0; self.ns];
        for (u, (w, f)) in d.weights.iter().zip(&d.factors).enumerate() {
            let block = if nu == 1 { 0 } else { u };
            for (c, p) in tensor_power(f, l).iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                for (s, q) in self.row(block * per + c).iter().enumerate() {
                    ps[s] += w * p * q;
                }
            }
        }
        Ok(ps)
    }
}

/// The linear identities a symmetrizing kernel must satisfy: every
/// equation reads `Σ coef·U[var] = 0` with `var = context·|S| + s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymSystem {
    pub mode: SymMode,
    pub nx: usize,
    pub ns: usize,
    pub equations: Vec<Vec<(usize, f64)>>,
    /// Equation count before removing trivial and duplicate equations.
    pub raw_count: usize,
}

impl SymSystem {
    pub fn contexts(&self) -> usize {
        self.mode.contexts(self.nx)
    }

    pub fn vars(&self) -> usize {
        self.contexts() * self.ns
    }

    /// Largest absolute equation residual of a kernel.
    pub fn residual(&self, probs: &[f64]) -> f64 {
        self.equations
            .iter()
            .map(|e| e.iter().map(|&(v, c)| c * probs[v]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }
}

struct EqBuilder {
    seen: HashSet<Vec<(usize, i64)>>,
    out: Vec<Vec<(usize, f64)>>,
    raw: usize,
}

impl EqBuilder {
    fn new() -> Self {
        Self {
            seen: HashSet::new(),
            out: Vec::new(),
            raw: 0,
        }
    }

    fn push(&mut self, mut terms: Vec<(usize, f64)>) {
        self.raw += 1;
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|t| t.1.abs() > 1e-15);
        if merged.is_empty() {
            return;
        }
        let sign = if merged[0].1 < 0.0 { -1.0 } else { 1.0 };
        let key: Vec<(usize, i64)> = merged
            .iter()
            .map(|&(v, c)| (v, (sign * c * 1e12).round() as i64))
            .collect();
        if self.seen.insert(key) {
            self.out.push(merged);
        }
    }
}

/// Builds the symmetrization identities of `avc` in the given mode.
pub fn build_sym_system(avc: &ObliviousAVC, mode: SymMode) -> SymSystem {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let mut b = EqBuilder::new();
    let var = |ctx: usize, s: usize| ctx * ns + s;
    match &mode {
        SymMode::ObliviousUnique => {
            list_equations(avc, 1, 1, &mut b);
        }
        SymMode::ObliviousList { l, nu } => {
            list_equations(avc, *l, *nu, &mut b);
        }
        SymMode::Omniscient => {
            for x in 0..nx {
                for xp in 0..nx {
                    for y in 0..ny {
                        let ctx = x * nx + xp;
                        let mut t = Vec::new();
                        for s in 0..ns {
                            t.push((var(ctx, s), avc.w(y, x, s)));
                            t.push((var(ctx, s), -avc.w(y, xp, s)));
                        }
                        b.push(t);
                    }
                }
            }
        }
        SymMode::Myopic { wz } => {
            let nz = wz.n_out;
            for x in 0..nx {
                for xp in 0..nx {
                    for y in 0..ny {
                        let mut t = Vec::new();
                        for z in 0..nz {
                            for s in 0..ns {
                                t.push((var(z * nx + xp, s), wz.get(x, z) * avc.w(y, x, s)));
                                t.push((var(z * nx + x, s), -wz.get(xp, z) * avc.w(y, xp, s)));
                            }
                        }
                        b.push(t);
                    }
                }
            }
        }
    }
    SymSystem {
        mode,
        nx,
        ns,
        equations: b.out,
        raw_count: b.raw,
    }
}

fn list_equations(avc: &ObliviousAVC, l: usize, nu: usize, b: &mut EqBuilder) {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let per = nx.pow(l as u32);
    let perms = permutations(l + 1);
    for u in 0..nu {
        for t in 0..nx.pow(l as u32 + 1) {
            let tup = index_tuple(t, nx, l + 1);
            let ctx = u * per + tuple_index(&tup[1..], nx);
            for perm in &perms {
                let pt: Vec<usize> = perm.iter().map(|&k| tup[k]).collect();
                if pt == tup {
                    b.raw += ny;
                    continue;
                }
                let pctx = u * per + tuple_index(&pt[1..], nx);
                for y in 0..ny {
                    let mut terms = Vec::with_capacity(2 * ns);
                    for s in 0..ns {
                        terms.push((ctx * ns + s, avc.w(y, tup[0], s)));
                        terms.push((pctx * ns + s, -avc.w(y, pt[0], s)));
                    }
                    b.push(terms);
                }
            }
        }
    }
}

/// Outcome of sign-based propagation on a symmetrization system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum KernelSet {
    /// The only symmetrizing kernel is deterministic: context `c` maps to
    /// state `map[c]`.
    Singleton { map: Vec<usize> },
    /// No row-stochastic kernel satisfies the system.
    Empty,
    /// Propagation is inconclusive; `zero[v]` marks entries forced to 0.
    Open { zero: Vec<bool> },
}

/// Propagates forced zeros through the system.
pub fn analyze_kernel_set(sys: &SymSystem) -> KernelSet {
    let nv = sys.vars();
    let mut zero = vec![false; nv];
    loop {
        let mut changed = false;
        for e in &sys.equations {
            let live: Vec<&(usize, f64)> = e.iter().filter(|t| !zero[t.0]).collect();
            if live.is_empty() {
                continue;
            }
            let pos = live.iter().all(|t| t.1 > 0.0);
            let neg = live.iter().all(|t| t.1 < 0.0);
            if pos || neg {
                for t in live {
                    zero[t.0] = true;
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let ns = sys.ns;
    let mut map = Vec::with_capacity(sys.contexts());
    for c in 0..sys.contexts() {
        let alive: Vec<usize> = (0..ns).filter(|&s| !zero[c * ns + s]).collect();
        match alive.len() {
            0 => return KernelSet::Empty,
            1 => map.push(alive[0]),
            _ => return KernelSet::Open { zero },
        }
    }
    let mut probs = vec![0.0; nv];
    for (c, &s) in map.iter().enumerate() {
        probs[c * ns + s] = 1.0;
    }
    if sys.equations.is_empty() || sys.residual(&probs) > 1e-12 {
        if sys.equations.is_empty() {
            return KernelSet::Open { zero };
        }
        return KernelSet::Empty;
    }
    KernelSet::Singleton { map }
}

/// Jamming cost `Σ_u P_u Σ_{x[L]} P_{x|u}^{⊗L} Σ_s U(s|u,x[L]) B(s)`.
pub fn jamming_cost(d: &CpDecomposition, u: &JammingKernel, b_row: &[f64]) -> Result<f64> {
    if b_row.len() != u.ns {
        return Err(Error::Dimension("cost row must range over S".into()));
    }
    let ps = u.state_law(d)?;
    Ok(ps.iter().zip(b_row).map(|(a, b)| a * b).sum())
}

/// Why an input distribution is not symmetrizable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub reason: String,
    /// The joint law of the spoofing list for which no kernel exists.
    pub coupling: Option<Vec<f64>>,
    pub decomposition: Option<CpDecomposition>,
    /// Proof that `coupling` lies outside the cp cone.
    pub copositive: Option<CopositiveWitness>,
    /// Phase-one residual of the infeasible LP.
    pub residual: Option<f64>,
}

impl Certificate {
    fn empty_system() -> Self {
        Self {
            reason: "the symmetrization identities admit no row-stochastic kernel".into(),
            coupling: None,
            decomposition: None,
            copositive: None,
            residual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Answer {
    Yes { witness: JammingKernel },
    /// Every point of a net of the given resolution was feasible;
    /// `witness` is the kernel found for `P_x^{⊗L}`.
    YesUpToNet {
        resolution: f64,
        points: usize,
        witness: JammingKernel,
    },
    No { certificate: Box<Certificate> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymVerdict {
    pub answer: Answer,
    /// Per-constraint jamming costs of the witness (polytope constraints).
    pub costs: Vec<f64>,
}

impl SymVerdict {
    pub fn is_yes(&self) -> bool {
        !matches!(self.answer, Answer::No { .. })
    }

    pub fn witness(&self) -> Option<&JammingKernel> {
        match &self.answer {
            Answer::Yes { witness } | Answer::YesUpToNet { witness, .. } => Some(witness),
            Answer::No { .. } => None,
        }
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.answer {
            Answer::No { certificate } => Some(certificate),
            _ => None,
        }
    }

    fn no(c: Certificate) -> Self {
        Self {
            answer: Answer::No {
                certificate: Box::new(c),
            },
            costs: Vec::new(),
        }
    }
}

/// Net resolutions for the swept notions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymConfig {
    /// ℓ1 resolution of the self-coupling net (strong) and of the factor
    /// and weight nets (cp).
    pub net_resolution: f64,
    /// Largest number of mixture components in the cp sweep
    /// (`None` means `|X|`).
    pub k_max: Option<usize>,
    /// Atom net for cp-union state constraints.
    pub cp_net: CpNetConfig,
    /// ℓ1 resolution of the net over the input polytope (channel level).
    pub px_resolution: f64,
    /// Cap on enumerated grid points.
    pub budget: f64,
}

impl SymConfig {
    pub fn for_alphabet(nx: usize) -> Self {
        Self {
            net_resolution: 0.1,
            k_max: None,
            cp_net: CpNetConfig::for_alphabet(nx),
            px_resolution: 0.1,
            budget: 1e6,
        }
    }
}

/// One LP component: a time-sharing block with weight and list law.
struct Block<'a> {
    weight: f64,
    joint: &'a [f64],
}

enum KernelLp {
    Feasible {
        kernel: Vec<f64>,
        p_s: Vec<f64>,
    },
    Infeasible {
        residual: f64,
    },
}

/// Builds and solves the kernel LP. With one block the kernel is shared;
/// with several, each block gets its own copy of the identities.
fn solve_kernel_lp(
    avc: &ObliviousAVC,
    sys: &SymSystem,
    zero: &[bool],
    blocks: &[Block],
    maximize_margin: bool,
    cp_net: &CpNetConfig,
) -> Result<KernelLp> {
    let ns = sys.ns;
    let nv = sys.vars();
    let nb = blocks.len();
    let mut col_of = vec![usize::MAX; nb * nv];
    let mut cols = Vec::new();
    for b in 0..nb {
        for v in 0..nv {
            if !zero[v] {
                col_of[b * nv + v] = cols.len();
                cols.push(b * nv + v);
            }
        }
    }
    let nk = cols.len();
    // state-law coefficients: P_s(s) = Σ_col coef · U[col]
    let mut ps_rows = vec![vec![0.0; nk]; ns];
    for (b, blk) in blocks.iter().enumerate() {
        for (c, &p) in blk.joint.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for s in 0..ns {
                let k = col_of[b * nv + c * ns + s];
                if k != usize::MAX {
                    ps_rows[s][k] += blk.weight * p;
                }
            }
        }
    }
    let poly = avc.lambda_s.as_polytope();
    let l = sys_order(sys);
    let (atoms, p_set) = match (&avc.lambda_s, &poly) {
        (StateConstraint::CpUnion { p_set, order, .. }, None) => {
            let mut a: Vec<Vec<f64>> = simplex_net(p_set.dim, cp_net.eta)
                .into_iter()
                .map(|d| d.into_vec())
                .collect();
            // the list marginals are always atoms
            if p_set.dim == avc.nx() {
                for blk in blocks {
                    a.push(power_marginal(blk.joint, avc.nx(), l, 0));
                }
            }
            (a, Some((p_set, *order)))
        }
        _ => (Vec::new(), None),
    };
    let na = atoms.len();
    let margin_col = if maximize_margin { 1 } else { 0 };
    let n = nk + na + margin_col;
    let mut lp = LinearProgram::new(n);
    let pad = |r: &[f64]| {
        let mut v = r.to_vec();
        v.resize(n, 0.0);
        v
    };
    for b in 0..nb {
        for e in &sys.equations {
            let mut r = vec![0.0; n];
            let mut any = false;
            for &(v, c) in e {
                let k = col_of[b * nv + v];
                if k != usize::MAX {
                    r[k] += c;
                    any = true;
                }
            }
            if any {
                lp.add_eq(r, 0.0);
            }
        }
        for c in 0..sys.contexts() {
            let mut r = vec![0.0; n];
            for s in 0..ns {
                let k = col_of[b * nv + c * ns + s];
                if k != usize::MAX {
                    r[k] = 1.0;
                }
            }
            lp.add_eq(r, 1.0);
        }
    }
    for k in 0..nk {
        lp.bounds[k] = (0.0, 1.0);
    }
    if let Some(bp) = &poly {
        for i in 0..bp.rows() {
            let mut r = vec![0.0; n];
            for s in 0..ns {
                if bp.a[i][s] != 0.0 {
                    for k in 0..nk {
                        r[k] += bp.a[i][s] * ps_rows[s][k];
                    }
                }
            }
            if maximize_margin {
                r[n - 1] = 1.0;
            }
            lp.add_le(r, bp.gamma[i]);
        }
    }
    if let Some((ps, order)) = p_set {
        let powers: Vec<Vec<f64>> = atoms.iter().map(|a| tensor_power(a, order)).collect();
        for s in 0..ns {
            let mut r = pad(&ps_rows[s]);
            for a in 0..na {
                r[nk + a] = -powers[a][s];
            }
            lp.add_eq(r, 0.0);
        }
        let mut sum = vec![0.0; n];
        sum[nk..nk + na].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(sum, 1.0);
        for i in 0..ps.rows() {
            let mut r = vec![0.0; n];
            for a in 0..na {
                r[nk + a] = ps.a[i].iter().zip(&atoms[a]).map(|(x, y)| x * y).sum();
            }
            lp.add_le(r, ps.gamma[i]);
        }
    }
    if maximize_margin {
        lp.bounds[n - 1] = (0.0, 1e3);
        let mut obj = vec![0.0; n];
        obj[n - 1] = -1.0;
        lp.objective = Some(obj);
    }
    let out = match lp_solve(&lp) {
        Ok(o) => o,
        Err(Error::Unbounded) => return Err(Error::Numerical("margin LP unbounded".into())),
        Err(e) => return Err(e),
    };
    match out {
        LpOutcome::Infeasible { residual } => Ok(KernelLp::Infeasible { residual }),
        LpOutcome::Feasible { x } | LpOutcome::Optimal { x, .. } => {
            let mut kernel = vec![0.0; nb * nv];
            for (k, &g) in cols.iter().enumerate() {
                kernel[g] = x[k].max(0.0);
            }
            // renormalize rows against solver round-off
            for row in kernel.chunks_mut(ns) {
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|v| *v /= s);
                }
            }
            let p_s: Vec<f64> = (0..ns)
                .map(|s| ps_rows[s].iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            Ok(KernelLp::Feasible { kernel, p_s })
        }
    }
}

fn sys_order(sys: &SymSystem) -> usize {
    match sys.mode {
        SymMode::ObliviousList { l, .. } => l,
        _ => 1,
    }
}

fn list_sys(avc: &ObliviousAVC, l: usize) -> SymSystem {
    build_sym_system(avc, SymMode::ObliviousList { l, nu: 1 })
}

fn costs_of(avc: &ObliviousAVC, p_s: &[f64]) -> Vec<f64> {
    match avc.lambda_s.as_polytope() {
        Some(p) => (0..p.rows()).map(|i| p.row_value(i, p_s)).collect(),
        None => Vec::new(),
    }
}

fn check_px(avc: &ObliviousAVC, p_x: &[f64], l: usize) -> Result<()> {
    if p_x.len() != avc.nx() {
        return Err(Error::Dimension("P_x must range over X".into()));
    }
    crate::probkit::Dist::new(p_x.to_vec())?;
    if l == 0 {
        return Err(Error::validation("L", "list size must be at least 1"));
    }
    Ok(())
}

/// Groups states whose output laws `W(·|x,s)` agree for every `x`;
/// returns the class of each state and the number of classes.
pub fn state_classes(avc: &ObliviousAVC) -> (Vec<usize>, usize) {
    let mut reps: Vec<usize> = Vec::new();
    let mut class = Vec::with_capacity(avc.ns());
    for s in 0..avc.ns() {
        let same = |r: usize| (0..avc.nx()).all(|x| avc.row(x, s) == avc.row(x, r));
        match reps.iter().position(|&r| same(r)) {
            Some(k) => class.push(k),
            None => {
                class.push(reps.len());
                reps.push(s);
            }
        }
    }
    (class, reps.len())
}

/// The channel with indistinguishable states merged (state constraint dropped).
pub fn merge_equivalent_states(avc: &ObliviousAVC) -> Result<(ObliviousAVC, Vec<usize>)> {
    let (class, k) = state_classes(avc);
    let mut reps = vec![usize::MAX; k];
    for (s, &c) in class.iter().enumerate() {
        if reps[c] == usize::MAX {
            reps[c] = s;
        }
    }
    let (nx, ny) = (avc.nx(), avc.ny());
    let mut w = Vec::with_capacity(nx * k * ny);
    for x in 0..nx {
        for &r in &reps {
            w.extend_from_slice(avc.row(x, r));
        }
    }
    let merged = ObliviousAVC::new(
        nx,
        k,
        ny,
        w,
        avc.lambda_x.clone(),
        StateConstraint::Polytope(crate::probkit::ConstraintPolytope::unconstrained(k)),
    )?;
    Ok((merged, class))
}

/// Whether every list-`L` symmetrizing kernel places the state
/// `s = (x_1..x_L)` up to states the channel cannot distinguish.
pub fn forces_identity(avc: &ObliviousAVC, l: usize) -> bool {
    if avc.ns() != avc.nx().pow(l as u32) {
        return false;
    }
    let Ok((merged, class)) = merge_equivalent_states(avc) else {
        return false;
    };
    match analyze_kernel_set(&list_sys(&merged, l)) {
        KernelSet::Singleton { map } => map.iter().enumerate().all(|(c, &k)| class[c] == k),
        _ => false,
    }
}

/// Per-joint feasibility oracle shared by all notions.
struct Oracle<'a> {
    avc: &'a ObliviousAVC,
    l: usize,
    sys: SymSystem,
    set: KernelSet,
    cp_net: CpNetConfig,
    identity: bool,
}

enum Probe {
    Feasible { kernel: JammingKernel, p_s: Vec<f64> },
    Infeasible { residual: Option<f64>, copositive: Option<CopositiveWitness>, reason: String },
}

impl<'a> Oracle<'a> {
    fn new(avc: &'a ObliviousAVC, l: usize, cp_net: CpNetConfig) -> Self {
        let sys = list_sys(avc, l);
        let set = analyze_kernel_set(&sys);
        let identity = matches!(avc.lambda_s, StateConstraint::CpUnion { order, .. } if order == l)
            && forces_identity(avc, l);
        Self {
            avc,
            l,
            sys,
            set,
            cp_net,
            identity,
        }
    }

    fn identity_cp_union(&self) -> bool {
        self.identity
    }

    fn kernel(&self, nu: usize, probs: Vec<f64>) -> JammingKernel {
        JammingKernel {
            mode: SymMode::ObliviousList { l: self.l, nu },
            nx: self.avc.nx(),
            ns: self.avc.ns(),
            probs,
        }
    }

    fn singleton_kernel(&self, map: &[usize], nu: usize) -> JammingKernel {
        let ns = self.avc.ns();
        let mut probs = vec![0.0; nu * map.len() * ns];
        for b in 0..nu {
            for (c, &s) in map.iter().enumerate() {
                probs[(b * map.len() + c) * ns + s] = 1.0;
            }
        }
        self.kernel(nu, probs)
    }

    /// Feasibility for a mixture: `parts` are `(weight, J_u)`; `shared`
    /// forces one kernel for all parts.
    fn probe(&self, parts: &[(f64, Vec<f64>)], shared: bool) -> Result<Probe> {
        let blocks_n = if shared { 1 } else { parts.len() };
        if self.identity {
            let mut p_s = vec![0.0; self.avc.ns()];
            for (w, j) in parts {
                for (c, &p) in j.iter().enumerate() {
                    p_s[c] += w * p;
                }
            }
            let map: Vec<usize> = (0..p_s.len()).collect();
            let kernel = self.singleton_kernel(&map, blocks_n);
            return self.identity_cp_membership(p_s, kernel);
        }
        match &self.set {
            KernelSet::Empty => Ok(Probe::Infeasible {
                residual: None,
                copositive: None,
                reason: Certificate::empty_system().reason,
            }),
            KernelSet::Singleton { map } => {
                let mut p_s = vec![0.0; self.avc.ns()];
                for (w, j) in parts {
                    for (c, &p) in j.iter().enumerate() {
                        p_s[map[c]] += w * p;
                    }
                }
                let kernel = self.singleton_kernel(map, blocks_n);
                if self.avc.lambda_s.contains(&p_s)? {
                    Ok(Probe::Feasible { kernel, p_s })
                } else {
                    Ok(Probe::Infeasible {
                        residual: None,
                        copositive: None,
                        reason: "the unique symmetrizing kernel induces a state law outside lambda_s".into(),
                    })
                }
            }
            KernelSet::Open { zero } => {
                let mix: Vec<f64>;
                let blocks: Vec<Block> = if shared {
                    let cells = parts[0].1.len();
                    mix = (0..cells)
                        .map(|c| parts.iter().map(|(w, j)| w * j[c]).sum())
                        .collect();
                    vec![Block {
                        weight: 1.0,
                        joint: &mix,
                    }]
                } else {
                    parts
                        .iter()
                        .map(|(w, j)| Block {
                            weight: *w,
                            joint: j,
                        })
                        .collect()
                };
                match solve_kernel_lp(self.avc, &self.sys, zero, &blocks, false, &self.cp_net)? {
                    KernelLp::Feasible { kernel, p_s } => Ok(Probe::Feasible {
                        kernel: self.kernel(blocks_n, kernel),
                        p_s,
                    }),
                    KernelLp::Infeasible { residual } => Ok(Probe::Infeasible {
                        residual: Some(residual),
                        copositive: None,
                        reason: "kernel LP infeasible".into(),
                    }),
                }
            }
        }
    }

    /// Exact membership of `P_s = J` in a union of cp cones when the only
    /// kernel is the identity.
    fn identity_cp_membership(&self, p_s: Vec<f64>, kernel: JammingKernel) -> Result<Probe> {
        let StateConstraint::CpUnion { p_set, .. } = &self.avc.lambda_s else {
            unreachable!()
        };
        let nx = self.avc.nx();
        let m = power_marginal(&p_s, nx, self.l, 0);
        if !polytope_contains(&m, p_set, 1e-9)? {
            return Ok(Probe::Infeasible {
                residual: None,
                copositive: None,
                reason: "the identity kernel yields a state law whose marginal is outside P_set".into(),
            });
        }
        Ok(Probe::Feasible { kernel, p_s })
    }
}

fn verdict_from_probe(avc: &ObliviousAVC, probe: Probe, coupling: Vec<f64>, d: Option<CpDecomposition>) -> SymVerdict {
    match probe {
        Probe::Feasible { kernel, p_s } => SymVerdict {
            costs: costs_of(avc, &p_s),
            answer: Answer::Yes { witness: kernel },
        },
        Probe::Infeasible {
            residual,
            copositive,
            reason,
        } => SymVerdict::no(Certificate {
            reason,
            coupling: Some(coupling),
            decomposition: d,
            copositive,
            residual,
        }),
    }
}

/// Weak `L`-symmetrizability: one kernel for the product list law.
pub fn check_weak(avc: &ObliviousAVC, p_x: &[f64], l: usize, cfg: &SymConfig) -> Result<SymVerdict> {
    check_px(avc, p_x, l)?;
    let o = Oracle::new(avc, l, cfg.cp_net);
    weak_with(&o, p_x)
}

fn weak_with(o: &Oracle, p_x: &[f64]) -> Result<SymVerdict> {
    if matches!(o.set, KernelSet::Empty) {
        return Ok(SymVerdict::no(Certificate::empty_system()));
    }
    let j = tensor_power(p_x, o.l);
    let probe = o.probe(&[(1.0, j.clone())], true)?;
    Ok(verdict_from_probe(
        o.avc,
        probe,
        j,
        Some(CpDecomposition::product(p_x, o.l)),
    ))
}

/// Grid points of `Δ(X^L)` near `𝒥(P_x)`, projected onto it in ℓ1.
pub fn self_coupling_net(p_x: &[f64], l: usize, resolution: f64, budget: f64) -> Result<Vec<Vec<f64>>> {
    let nx = p_x.len();
    let k = nx.pow(l as u32);
    let m = ((k as f64) / resolution - 1e-9).ceil().max(1.0) as usize;
    let count = crate::cpcone::binomial(m + k - 1, k - 1);
    if count > budget {
        return Err(Error::Budget {
            needed: count,
            budget,
        });
    }
    let r = k as f64 / (2.0 * m as f64);
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    for c in compositions(m, k) {
        let g: Vec<f64> = c.iter().map(|&v| v as f64 / m as f64).collect();
        if (0..l).any(|a| l1(&power_marginal(&g, nx, l, a), p_x) > r + 1e-12) {
            continue;
        }
        let j = project_to_couplings(&g, p_x, l)?;
        let key: Vec<i64> = j.iter().map(|v| (v * 1e9).round() as i64).collect();
        if seen.insert(key) {
            out.push(j);
        }
    }
    Ok(out)
}

/// ℓ1-nearest self-coupling of `p_x` to `g`.
fn project_to_couplings(g: &[f64], p_x: &[f64], l: usize) -> Result<Vec<f64>> {
    let nx = p_x.len();
    let k = g.len();
    let mut lp = LinearProgram::new(2 * k);
    for axis in 0..l {
        for x in 0..nx {
            let mut r = vec![0.0; 2 * k];
            for c in 0..k {
                if index_tuple(c, nx, l)[axis] == x {
                    r[c] = 1.0;
                }
            }
            lp.add_eq(r, p_x[x]);
        }
    }
    for c in 0..k {
        let mut r = vec![0.0; 2 * k];
        r[c] = 1.0;
        r[k + c] = -1.0;
        lp.add_le(r.clone(), g[c]);
        r[c] = -1.0;
        lp.add_le(r, -g[c]);
    }
    let mut obj = vec![0.0; 2 * k];
    obj[k..].iter_mut().for_each(|v| *v = 1.0);
    lp.objective = Some(obj);
    match lp_solve(&lp)? {
        LpOutcome::Optimal { x, .. } => Ok(x[..k].to_vec()),
        _ => Err(Error::Numerical("self-coupling projection failed".into())),
    }
}

/// Strong `L`-symmetrizability over a net of self-couplings.
pub fn check_strong(avc: &ObliviousAVC, p_x: &[f64], l: usize, cfg: &SymConfig) -> Result<SymVerdict> {
    check_px(avc, p_x, l)?;
    let o = Oracle::new(avc, l, cfg.cp_net);
    strong_with(&o, p_x, cfg)
}

fn strong_with(o: &Oracle, p_x: &[f64], cfg: &SymConfig) -> Result<SymVerdict> {
    let weak = weak_with(o, p_x)?;
    if o.l == 1 || !weak.is_yes() {
        return Ok(weak);
    }
    let witness = weak.witness().cloned().unwrap();
    if o.identity_cp_union() {
        // P_s is J up to reordering within each tuple; q is symmetric and
        // negative on J, hence on every cp candidate for P_s
        return Ok(match non_cp_coupling(p_x, o.l) {
            Some((j, q)) => SymVerdict::no(Certificate {
                reason: "every symmetrizing kernel only reorders the list, and the copositive witness is negative on J".into(),
                coupling: Some(j),
                decomposition: None,
                copositive: Some(q),
                residual: None,
            }),
            None => SymVerdict {
                answer: Answer::Yes { witness },
                costs: weak.costs,
            },
        });
    }
    let mut net = Vec::new();
    if let Some((j, _)) = non_cp_coupling(p_x, o.l) {
        net.push(j);
    }
    net.extend(self_coupling_net(p_x, o.l, cfg.net_resolution, cfg.budget)?);
    for j in &net {
        if let Probe::Infeasible {
            residual,
            copositive,
            reason,
        } = o.probe(&[(1.0, j.clone())], true)?
        {
            return Ok(SymVerdict::no(Certificate {
                reason,
                coupling: Some(j.clone()),
                decomposition: None,
                copositive,
                residual,
            }));
        }
    }
    Ok(SymVerdict {
        answer: Answer::YesUpToNet {
            resolution: cfg.net_resolution,
            points: net.len() + 1,
            witness,
        },
        costs: weak.costs,
    })
}

/// cp decompositions of `p_x` with at most `k_max` components: the first
/// `k−1` factors and all weights come from nets, the last factor is solved
/// so the marginal is exactly `p_x`.
pub fn cp_decomposition_net(p_x: &[f64], l: usize, k_max: usize, resolution: f64, budget: f64) -> Result<Vec<CpDecomposition>> {
    let nx = p_x.len();
    let factors: Vec<Vec<f64>> = simplex_net(nx, resolution)
        .into_iter()
        .map(|d| d.into_vec())
        .collect();
    let mut out = vec![CpDecomposition::product(p_x, l)];
    for k in 2..=k_max {
        let weights: Vec<Vec<f64>> = simplex_net(k, resolution)
            .into_iter()
            .map(|d| d.into_vec())
            .filter(|w| w.iter().all(|&v| v > 0.0))
            .collect();
        let combos = weights.len() as f64 * (factors.len() as f64).powi(k as i32 - 1);
        if combos > budget {
            return Err(Error::Budget {
                needed: combos,
                budget,
            });
        }
        for w in &weights {
            let mut idx = vec![0usize; k - 1];
            let dims = vec![factors.len(); k - 1];
            for _ in 0..factors.len().pow(k as u32 - 1) {
                let mut last: Vec<f64> = p_x.to_vec();
                for (i, &f) in idx.iter().enumerate() {
                    for x in 0..nx {
                        last[x] -= w[i] * factors[f][x];
                    }
                }
                let wk = w[k - 1];
                if last.iter().all(|&v| v >= -1e-12) {
                    let last: Vec<f64> = last.iter().map(|v| (v / wk).max(0.0)).collect();
                    let mut fs: Vec<Vec<f64>> = idx.iter().map(|&f| factors[f].clone()).collect();
                    fs.push(last);
                    if fs.iter().all(|f| (f.iter().sum::<f64>() - 1.0).abs() < 1e-9) {
                        out.push(CpDecomposition {
                            weights: w.clone(),
                            factors: fs,
                            order: l,
                        });
                    }
                }
                crate::probkit::advance(&mut idx, &dims);
            }
        }
    }
    Ok(out)
}

/// cp-`L`-symmetrizability over a net of cp decompositions.
pub fn check_cp(avc: &ObliviousAVC, p_x: &[f64], l: usize, cfg: &SymConfig) -> Result<SymVerdict> {
    check_px(avc, p_x, l)?;
    let o = Oracle::new(avc, l, cfg.cp_net);
    cp_with(&o, p_x, cfg)
}

fn cp_with(o: &Oracle, p_x: &[f64], cfg: &SymConfig) -> Result<SymVerdict> {
    let weak = weak_with(o, p_x)?;
    if o.l == 1 || !weak.is_yes() {
        return Ok(weak);
    }
    let witness = weak.witness().cloned().unwrap();
    if o.identity_cp_union() {
        // every decomposition has marginal P_x, already accepted by the weak check
        return Ok(SymVerdict {
            answer: Answer::Yes { witness },
            costs: weak.costs,
        });
    }
    let k_max = cfg.k_max.unwrap_or(o.avc.nx());
    let net = cp_decomposition_net(p_x, o.l, k_max, cfg.net_resolution, cfg.budget)?;
    for d in net.iter().skip(1) {
        let parts: Vec<(f64, Vec<f64>)> = d
            .weights
            .iter()
            .zip(&d.factors)
            .map(|(w, f)| (*w, tensor_power(f, o.l)))
            .collect();
        if let Probe::Infeasible {
            residual,
            copositive,
            reason,
        } = o.probe(&parts, false)?
        {
            return Ok(SymVerdict::no(Certificate {
                reason,
                coupling: Some(d.joint()),
                decomposition: Some(d.clone()),
                copositive,
                residual,
            }));
        }
    }
    Ok(SymVerdict {
        answer: Answer::YesUpToNet {
            resolution: cfg.net_resolution,
            points: net.len(),
            witness,
        },
        costs: weak.costs,
    })
}

/// Symmetrizability of a single cp decomposition `(P_u, P_{x|u})`: one
/// kernel per mixture component, state law averaged over components.
pub fn check_decomposition(avc: &ObliviousAVC, d: &CpDecomposition, cfg: &SymConfig) -> Result<SymVerdict> {
    if d.nx() != avc.nx() {
        return Err(Error::Dimension("decomposition must range over X".into()));
    }
    let o = Oracle::new(avc, d.order, cfg.cp_net);
    if matches!(o.set, KernelSet::Empty) {
        return Ok(SymVerdict::no(Certificate::empty_system()));
    }
    let parts: Vec<(f64, Vec<f64>)> = d
        .weights
        .iter()
        .zip(&d.factors)
        .map(|(w, f)| (*w, tensor_power(f, d.order)))
        .collect();
    let probe = o.probe(&parts, false)?;
    Ok(verdict_from_probe(avc, probe, d.joint(), Some(d.clone())))
}

/// Kernel for a fixed list law that maximizes the smallest constraint
/// slack `δ = min_i (Λ_i − cost_i)`. Used by the jamming attack.
pub fn max_margin_kernel(avc: &ObliviousAVC, j: &[f64], l: usize, cfg: &SymConfig) -> Result<(JammingKernel, Vec<f64>)> {
    let sys = list_sys(avc, l);
    let set = analyze_kernel_set(&sys);
    let zero = match &set {
        KernelSet::Empty => return Err(Error::NoKernel("symmetrization system has no solution".into())),
        KernelSet::Singleton { map } => {
            let mut z = vec![true; sys.vars()];
            for (c, &s) in map.iter().enumerate() {
                z[c * sys.ns + s] = false;
            }
            z
        }
        KernelSet::Open { zero } => zero.clone(),
    };
    let maximize = avc.lambda_s.as_polytope().is_some_and(|p| p.rows() > 0);
    match solve_kernel_lp(avc, &sys, &zero, &[Block { weight: 1.0, joint: j }], maximize, &cfg.cp_net)? {
        KernelLp::Feasible { kernel, p_s } => Ok((
            JammingKernel {
                mode: SymMode::ObliviousList { l, nu: 1 },
                nx: avc.nx(),
                ns: avc.ns(),
                probs: kernel,
            },
            p_s,
        )),
        KernelLp::Infeasible { .. } => Err(Error::NoKernel(
            "no symmetrizing kernel keeps the state law inside lambda_s".into(),
        )),
    }
}

/// Symmetrizability verdicts of one input distribution for `L' = 1..=L_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileEntry {
    pub p_x: Vec<f64>,
    pub strong: usize,
    pub cp: usize,
    pub weak: usize,
    /// `(L', strong, cp, weak)` verdicts.
    pub verdicts: Vec<(usize, SymVerdict, SymVerdict, SymVerdict)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub l_max: usize,
    pub entries: Vec<ProfileEntry>,
    /// Channel-level `(L*_strong, L*_cp, L*_weak)`: minima over entries.
    pub strong: usize,
    pub cp: usize,
    pub weak: usize,
}

/// `L*(P_x)` for each notion: the largest `L' ≤ L_max` answered yes
/// (0 if none). A no for a weaker notion is reused as the certificate of
/// the stronger ones, so the report is always ordered.
pub fn profile_at(avc: &ObliviousAVC, p_x: &[f64], l_max: usize, cfg: &SymConfig) -> Result<ProfileEntry> {
    check_px(avc, p_x, l_max)?;
    let mut e = ProfileEntry {
        p_x: p_x.to_vec(),
        strong: 0,
        cp: 0,
        weak: 0,
        verdicts: Vec::new(),
    };
    for l in 1..=l_max {
        let o = Oracle::new(avc, l, cfg.cp_net);
        let weak = weak_with(&o, p_x)?;
        let cp = if weak.is_yes() { cp_with(&o, p_x, cfg)? } else { weak.clone() };
        let strong = if !cp.is_yes() {
            cp.clone()
        } else {
            strong_with(&o, p_x, cfg)?
        };
        if weak.is_yes() {
            e.weak = l;
        }
        if cp.is_yes() {
            e.cp = l;
        }
        if strong.is_yes() {
            e.strong = l;
        }
        e.verdicts.push((l, strong, cp, weak));
    }
    Ok(e)
}

/// Profiles every input distribution in `px_list`, or a net of `lambda_x`.
pub fn symmetrizability_profile(
    avc: &ObliviousAVC,
    l_max: usize,
    px_list: Option<&[Vec<f64>]>,
    cfg: &SymConfig,
) -> Result<Profile> {
    if l_max == 0 {
        return Err(Error::validation("L_max", "must be at least 1"));
    }
    let pts: Vec<Vec<f64>> = match px_list {
        Some(p) => p.to_vec(),
        None => input_net(avc, cfg.px_resolution)?,
    };
    if pts.is_empty() {
        return Err(Error::Infeasible("lambda_x has no net point".into()));
    }
    let entries = pts
        .iter()
        .map(|p| profile_at(avc, p, l_max, cfg))
        .collect::<Result<Vec<_>>>()?;
    let min = |f: fn(&ProfileEntry) -> usize| entries.iter().map(f).min().unwrap();
    Ok(Profile {
        l_max,
        strong: min(|e| e.strong),
        cp: min(|e| e.cp),
        weak: min(|e| e.weak),
        entries,
    })
}

/// Net points of `Δ(X)` inside `lambda_x`.
pub fn input_net(avc: &ObliviousAVC, resolution: f64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for p in simplex_net(avc.nx(), resolution) {
        if polytope_contains(p.probs(), &avc.lambda_x, 1e-9)? {
            out.push(p.into_vec());
        }
    }
    Ok(out)
}
