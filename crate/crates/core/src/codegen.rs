//! Codebook construction and combinatorial structure of codes.

use crate::channel::Codebook;
use crate::cpcone::binomial;
use crate::probkit::{apportion, joint_type, l1, mutual_info, simplex_net, SequenceType};
use crate::rng::rng;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::Path;

/// Codewords drawn uniformly from the type class that has, on every
/// time-sharing chunk `u`, the composition `apportion(P_{x|u}, n_u)`.
pub fn sample_codebook(
    n: usize,
    m: usize,
    u_seq: &[usize],
    p_x_given_u: &[Vec<f64>],
    seed: u64,
) -> Result<Codebook> {
    if u_seq.len() != n || n == 0 {
        return Err(Error::validation("u_seq", "length must equal n ≥ 1"));
    }
    if m == 0 {
        return Err(Error::validation("M", "need at least one codeword"));
    }
    let nu = u_seq.iter().max().unwrap() + 1;
    if p_x_given_u.len() < nu {
        return Err(Error::validation("P_x|u", "one row per time-sharing symbol"));
    }
    let nx = p_x_given_u[0].len();
    for (u, row) in p_x_given_u.iter().enumerate() {
        crate::probkit::Dist::new(row.clone())
            .map_err(|e| Error::validation(format!("P_x|u[{u}]"), e.to_string()))?;
        if row.len() != nx {
            return Err(Error::validation(format!("P_x|u[{u}]"), "alphabet size differs"));
        }
    }
    let chunks: Vec<Vec<usize>> = (0..nu)
        .map(|u| (0..n).filter(|&j| u_seq[j] == u).collect())
        .collect();
    let templates: Vec<Vec<usize>> = chunks
        .iter()
        .enumerate()
        .map(|(u, pos)| {
            apportion(&p_x_given_u[u], pos.len())
                .iter()
                .enumerate()
                .flat_map(|(x, &c)| std::iter::repeat(x).take(c))
                .collect()
        })
        .collect();
    let mut r = rng(seed);
    let mut codewords = Vec::with_capacity(m);
    for _ in 0..m {
        let mut cw = vec![0usize; n];
        for (pos, tmpl) in chunks.iter().zip(&templates) {
            let mut t = tmpl.clone();
            t.shuffle(&mut r);
            for (&j, v) in pos.iter().zip(t) {
                cw[j] = v;
            }
        }
        codewords.push(cw);
    }
    Codebook::new(nx, codewords, Some(u_seq.to_vec()))
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    n: usize,
    alphabet: usize,
    codewords: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u_seq: Option<Vec<usize>>,
}

pub fn parse_codebook(text: &str) -> Result<Codebook> {
    let f: CodebookFile = serde_json::from_str(text)?;
    let c = Codebook::new(f.alphabet, f.codewords, f.u_seq)?;
    if c.n != f.n {
        return Err(Error::validation("n", "codeword length differs from n"));
    }
    Ok(c)
}

pub fn codebook_json(c: &Codebook) -> String {
    serde_json::to_string_pretty(&CodebookFile {
        n: c.n,
        alphabet: c.nx,
        codewords: c.codewords.clone(),
        u_seq: c.u_seq.clone(),
    })
    .expect("codebook serializes")
}

pub fn load_codebook(path: impl AsRef<Path>) -> Result<Codebook> {
    parse_codebook(&std::fs::read_to_string(path)?)
}

pub fn save_codebook(c: &Codebook, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, codebook_json(c))?;
    Ok(())
}

fn composition(seq: &[usize], nx: usize) -> Vec<f64> {
    let mut c = vec![0.0; nx];
    for &v in seq {
        c[v] += 1.0;
    }
    c.iter().map(|v| v / seq.len() as f64).collect()
}

/// Index of the nearest net point in ℓ1 (first on ties).
fn nearest(p: &[f64], net: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, q) in net.iter().enumerate() {
        let d = l1(p, q);
        if d < best.0 - 1e-12 {
            best = (d, i);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcReduction {
    /// Indices of the surviving codewords in the input code.
    pub indices: Vec<usize>,
    pub subcode: Codebook,
    pub p_hat: Vec<f64>,
}

/// Keeps the largest cell of a λ-net partition of codeword compositions.
/// Every survivor lies within ℓ1 distance `lambda` of `p_hat`.
pub fn cc_reduce(code: &Codebook, lambda: f64) -> Result<CcReduction> {
    if lambda <= 0.0 {
        return Err(Error::validation("lambda", "must be positive"));
    }
    let net: Vec<Vec<f64>> = simplex_net(code.nx, lambda)
        .into_iter()
        .map(|d| d.into_vec())
        .collect();
    let idx: Vec<usize> = (0..code.m()).collect();
    Ok(reduce_on(code, &idx, |cw| cw.to_vec(), &net))
}

fn reduce_on(code: &Codebook, idx: &[usize], view: impl Fn(&[usize]) -> Vec<usize>, net: &[Vec<f64>]) -> CcReduction {
    let mut cells: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in idx {
        let c = composition(&view(&code.codewords[i]), code.nx);
        cells.entry(nearest(&c, net)).or_default().push(i);
    }
    let (&cell, _) = cells
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
        .unwrap();
    let indices = cells.remove(&cell).unwrap();
    CcReduction {
        subcode: code.subcode(&indices),
        indices,
        p_hat: net[cell].clone(),
    }
}

/// Joint types of all ascending `L`-tuples of codewords, in
/// lexicographic tuple order.
pub fn joint_type_spectrum(code: &Codebook, l: usize, budget: f64) -> Result<Vec<(Vec<usize>, SequenceType)>> {
    let m = code.m();
    if l == 0 || l > m {
        return Err(Error::validation("L", "must lie in 1..=M"));
    }
    let count = binomial(m, l);
    if count > budget {
        return Err(Error::Budget { needed: count, budget });
    }
    let dims = vec![code.nx; l];
    let mut out = Vec::with_capacity(count as usize);
    let mut t: Vec<usize> = (0..l).collect();
    loop {
        let seqs: Vec<&[usize]> = t.iter().map(|&i| code.codewords[i].as_slice()).collect();
        out.push((t.clone(), joint_type(&seqs, &dims)?));
        if !next_subset(&mut t, m) {
            break;
        }
    }
    Ok(out)
}

/// Advances an ascending tuple to the next `k`-subset of `0..m`.
pub(crate) fn next_subset(t: &mut [usize], m: usize) -> bool {
    let k = t.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if t[i] < m - k + i {
            t[i] += 1;
            for j in i + 1..k {
                t[j] = t[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PropertyStatus {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeViolation {
    /// Joint type counts on the property's alphabet.
    pub counts: Vec<u64>,
    pub observed: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub status: PropertyStatus,
    pub types_checked: usize,
    pub violations: Vec<TypeViolation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum XRange {
    AllSequences,
    Codewords,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CwReport {
    pub rate: f64,
    /// False when `M < L·2^{nε}`.
    pub applicable: bool,
    pub x_range: XRange,
    pub properties: Vec<PropertyOutcome>,
}

impl CwReport {
    pub fn status(&self, name: &str) -> Option<PropertyStatus> {
        self.properties.iter().find(|p| p.name == name).map(|p| p.status)
    }
}

struct TypeCounter<'a> {
    n: usize,
    nu: usize,
    u: &'a [usize],
}

impl TypeCounter<'_> {
    /// Joint type of `(u, seqs.., s)`.
    fn key(&self, seqs: &[&[usize]], dims: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.nu * dims.iter().product::<usize>()];
        for j in 0..self.n {
            let mut k = self.u[j];
            for (s, &d) in seqs.iter().zip(dims) {
                k = k * d + s[j];
            }
            counts[k] += 1;
        }
        counts
    }
}

fn cmi(counts: &[u64], dims: &[usize], axes: &[&str], a: &[&str], b: &[&str], c: &[&str]) -> f64 {
    let t = SequenceType::from_counts(dims.to_vec(), counts.to_vec()).unwrap();
    let j = t.to_joint(axes.iter().map(|s| s.to_string()).collect()).unwrap();
    mutual_info(&j, a, b, c).unwrap()
}

fn outcome(name: &str, applicable: bool, checked: usize, violations: Vec<TypeViolation>) -> PropertyOutcome {
    let status = if !applicable {
        PropertyStatus::Inapplicable
    } else if violations.is_empty() {
        PropertyStatus::Pass
    } else {
        PropertyStatus::Fail
    };
    PropertyOutcome {
        name: name.into(),
        status,
        types_checked: checked,
        violations,
    }
}

/// Checks the codeword-selection cardinality properties `1`, `2`, `3`,
/// `2'`, `3'` at a given state sequence. Every realized joint type is
/// tested against the bound stated for it; `2'` and `3'` only apply to
/// types with `R < min_k I(x_k;s|u)`.
pub fn verify_cw_properties(
    code: &Codebook,
    u_seq: &[usize],
    s_seq: &[usize],
    ns: usize,
    eps: f64,
    l: usize,
) -> Result<CwReport> {
    let (m, n, nx) = (code.m(), code.n, code.nx);
    if u_seq.len() != n || s_seq.len() != n {
        return Err(Error::Dimension("u_seq and s_seq must have length n".into()));
    }
    if m > 1 << 12 {
        return Err(Error::Budget { needed: m as f64, budget: 4096.0 });
    }
    if l == 0 || l >= m {
        return Err(Error::validation("L", "must lie in 1..M"));
    }
    if s_seq.iter().any(|&s| s >= ns) {
        return Err(Error::validation("s_seq", "symbol outside S"));
    }
    let nu = u_seq.iter().max().unwrap() + 1;
    let rate = ((m as f64) / l as f64).log2() / n as f64;
    let applicable = (m as f64) >= l as f64 * (n as f64 * eps).exp2();
    let tc = TypeCounter { n, nu, u: u_seq };
    let bound_small = (-(n as f64) * eps / 2.0).exp2();
    let nf = n as f64;
    let pos = |v: f64| v.max(0.0);
    let cw = &code.codewords;

    let x_space = (nx as f64).powi(n as i32);
    let x_range = if x_space * m as f64 * nf <= 5e7 {
        XRange::AllSequences
    } else {
        XRange::Codewords
    };
    let xs: Vec<Vec<usize>> = match x_range {
        XRange::AllSequences => {
            let mut v = Vec::new();
            crate::channel::for_each_sequence(nx, n, |x| v.push(x.to_vec()));
            v
        }
        XRange::Codewords => cw.clone(),
    };

    // property 1: types of (u, x_i, s)
    let d1 = [nx, ns];
    let dims1 = [nu, nx, ns];
    let mut g1: HashMap<Vec<u64>, usize> = HashMap::new();
    for c in cw {
        *g1.entry(tc.key(&[c, s_seq], &d1)).or_default() += 1;
    }
    let mut v1 = Vec::new();
    for (k, &cnt) in &g1 {
        let i_xs = cmi(k, &dims1, &["u", "x", "s"], &["x"], &["s"], &["u"]);
        let frac = cnt as f64 / m as f64;
        if i_xs >= eps && frac > bound_small {
            v1.push(TypeViolation { counts: k.clone(), observed: frac, bound: bound_small });
        }
    }
    let p1 = outcome("1", applicable, g1.len(), v1);

    // properties 2 and 3: types of (u, x, x_k, s)
    let d2 = [nx, nx, ns];
    let dims2 = [nu, nx, nx, ns];
    let ax2 = ["u", "x", "xk", "s"];
    if (m * m) as f64 * nf > 2e8 {
        return Err(Error::Budget { needed: (m * m) as f64 * nf, budget: 2e8 });
    }
    let mut g2: HashMap<Vec<u64>, HashSet<usize>> = HashMap::new();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                g2.entry(tc.key(&[&cw[i], &cw[j], s_seq], &d2)).or_default().insert(i);
            }
        }
    }
    let mut v2 = Vec::new();
    for (k, set) in &g2 {
        let lhs = cmi(k, &dims2, &ax2, &["x"], &["xk", "s"], &["u"]);
        let rhs = pos(rate - cmi(k, &dims2, &ax2, &["xk"], &["s"], &["u"])) + eps;
        let frac = set.len() as f64 / m as f64;
        if lhs >= rhs && frac > bound_small {
            v2.push(TypeViolation { counts: k.clone(), observed: frac, bound: bound_small });
        }
    }
    let p2 = outcome("2", applicable, g2.len(), v2);

    let mut v3 = Vec::new();
    let mut seen3: HashSet<Vec<u64>> = HashSet::new();
    for x in &xs {
        let mut g: HashMap<Vec<u64>, usize> = HashMap::new();
        for c in cw {
            *g.entry(tc.key(&[x, c, s_seq], &d2)).or_default() += 1;
        }
        for (k, cnt) in g {
            let bound = (nf * (pos(rate - cmi(&k, &dims2, &ax2, &["xk"], &["x", "s"], &["u"])) + eps)).exp2();
            if cnt as f64 > bound {
                v3.push(TypeViolation { counts: k.clone(), observed: cnt as f64, bound });
            }
            seen3.insert(k);
        }
    }
    let p3 = outcome("3", applicable, seen3.len(), v3);

    // properties 2' and 3': types of (u, x, x_[L], s)
    let max_i = (nx.min(ns) as f64).log2();
    let (p22, p33) = if !applicable || rate >= max_i {
        (outcome("2'", false, 0, Vec::new()), outcome("3'", false, 0, Vec::new()))
    } else {
        list_properties(code, &tc, s_seq, ns, l, eps, rate, &xs)?
    };
    Ok(CwReport {
        rate,
        applicable,
        x_range,
        properties: vec![p1, p2, p3, p22, p33],
    })
}

#[allow(clippy::too_many_arguments)]
fn list_properties(
    code: &Codebook,
    tc: &TypeCounter,
    s_seq: &[usize],
    ns: usize,
    l: usize,
    eps: f64,
    rate: f64,
    xs: &[Vec<usize>],
) -> Result<(PropertyOutcome, PropertyOutcome)> {
    let (m, nx) = (code.m(), code.nx);
    let nf = tc.n as f64;
    let work = (m as f64 + xs.len() as f64) * binomial(m, l) * nf;
    if work > 2e8 {
        return Err(Error::Budget { needed: work, budget: 2e8 });
    }
    let cw = &code.codewords;
    let mut dl = vec![nx; l + 1];
    dl.push(ns);
    let mut dims = vec![tc.nu];
    dims.extend(&dl);
    let mut axes: Vec<String> = vec!["u".into(), "x".into()];
    axes.extend((1..=l).map(|k| format!("x{k}")));
    axes.push("s".into());
    let ax: Vec<&str> = axes.iter().map(|s| s.as_str()).collect();
    let list_ax: Vec<&str> = ax[2..2 + l].to_vec();
    // R < I(x_k;s|u) for every k
    let gated = |k: &[u64]| list_ax.iter().all(|a| rate < cmi(k, &dims, &ax, &[a], &["s"], &["u"]));
    let bound_small = (-nf * eps / 2.0).exp2();

    let mut g: HashMap<Vec<u64>, HashSet<usize>> = HashMap::new();
    let mut t: Vec<usize> = (0..l).collect();
    loop {
        for i in 0..m {
            if t.contains(&i) {
                continue;
            }
            let mut seqs: Vec<&[usize]> = vec![&cw[i]];
            seqs.extend(t.iter().map(|&j| cw[j].as_slice()));
            seqs.push(s_seq);
            g.entry(tc.key(&seqs, &dl)).or_default().insert(i);
        }
        if !next_subset(&mut t, m) {
            break;
        }
    }
    let mut v22 = Vec::new();
    let mut checked22 = 0;
    for (k, set) in &g {
        if !gated(k) {
            continue;
        }
        checked22 += 1;
        let mut rest = list_ax.clone();
        rest.push("s");
        let frac = set.len() as f64 / m as f64;
        if cmi(k, &dims, &ax, &["x"], &rest, &["u"]) >= eps && frac > bound_small {
            v22.push(TypeViolation { counts: k.clone(), observed: frac, bound: bound_small });
        }
    }

    let bound = (nf * eps).exp2();
    let mut v33 = Vec::new();
    let mut checked33: HashSet<Vec<u64>> = HashSet::new();
    for x in xs {
        let mut g: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut t: Vec<usize> = (0..l).collect();
        loop {
            let mut seqs: Vec<&[usize]> = vec![x];
            seqs.extend(t.iter().map(|&j| cw[j].as_slice()));
            seqs.push(s_seq);
            *g.entry(tc.key(&seqs, &dl)).or_default() += 1;
            if !next_subset(&mut t, m) {
                break;
            }
        }
        for (k, cnt) in g {
            if !gated(&k) {
                continue;
            }
            if cnt as f64 > bound {
                v33.push(TypeViolation { counts: k.clone(), observed: cnt as f64, bound });
            }
            checked33.insert(k);
        }
    }
    Ok((
        outcome("2'", checked22 > 0, checked22, v22),
        outcome("3'", !checked33.is_empty(), checked33.len(), v33),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeshareExtraction {
    pub indices: Vec<usize>,
    pub subcode: Codebook,
    /// Column cluster labels, numbered by first appearance.
    pub u_seq: Vec<usize>,
    /// Column-type net point of each cluster.
    pub column_types: Vec<Vec<f64>>,
    /// Per-chunk composition `P'_{x_u}` shared by all survivors.
    pub compositions: Vec<Vec<f64>>,
    pub theta: f64,
    /// `(|X|/(2λ')+1)^{−|X|·|U|}`.
    pub theta_floor: f64,
    pub meets_floor: bool,
}

/// Clusters the columns of the code by type on a ζ-net to obtain a
/// time-sharing sequence, then reduces chunk by chunk to a subcode that is
/// λ'-constant-composition on every chunk.
pub fn extract_timeshare_subcode(code: &Codebook, zeta: f64, lambda_p: f64, theta_min: f64) -> Result<TimeshareExtraction> {
    if zeta <= 0.0 || lambda_p <= 0.0 {
        return Err(Error::validation("zeta/lambda'", "must be positive"));
    }
    let (m, n, nx) = (code.m(), code.n, code.nx);
    let col_net: Vec<Vec<f64>> = simplex_net(nx, zeta).into_iter().map(|d| d.into_vec()).collect();
    let mut label: HashMap<usize, usize> = HashMap::new();
    let mut column_types = Vec::new();
    let mut u_seq = Vec::with_capacity(n);
    for j in 0..n {
        let col: Vec<usize> = code.codewords.iter().map(|c| c[j]).collect();
        let cell = nearest(&composition(&col, nx), &col_net);
        let next = label.len();
        let u = *label.entry(cell).or_insert_with(|| {
            column_types.push(col_net[cell].clone());
            next
        });
        u_seq.push(u);
    }
    let nu = label.len();
    let net: Vec<Vec<f64>> = simplex_net(nx, lambda_p).into_iter().map(|d| d.into_vec()).collect();
    let mut idx: Vec<usize> = (0..m).collect();
    let mut compositions = Vec::with_capacity(nu);
    for u in 0..nu {
        let pos: Vec<usize> = (0..n).filter(|&j| u_seq[j] == u).collect();
        let r = reduce_on(code, &idx, |cw| pos.iter().map(|&j| cw[j]).collect(), &net);
        idx = r.indices;
        compositions.push(r.p_hat);
    }
    idx.sort_unstable();
    let theta = idx.len() as f64 / m as f64;
    let theta_floor = (nx as f64 / (2.0 * lambda_p) + 1.0).powi(-((nx * nu) as i32));
    let mut subcode = code.subcode(&idx);
    subcode.u_seq = Some(u_seq.clone());
    Ok(TimeshareExtraction {
        indices: idx,
        subcode,
        u_seq,
        column_types,
        compositions,
        meets_floor: theta >= theta_floor.max(theta_min) - 1e-12,
        theta,
        theta_floor,
    })
}

/// Checks `|𝓛|·(M−L) ≥ |𝓛'|`, where `𝓛` collects every `L`-subset of a
/// member of the family `𝓛'` of `(L+1)`-subsets of `0..M`.
pub fn list_generation_fact(m: usize, l: usize, family: &[Vec<usize>]) -> Result<bool> {
    if m > 64 || family.len() > 1 << 20 {
        return Err(Error::Budget { needed: family.len() as f64, budget: (1 << 20) as f64 });
    }
    if l >= m {
        return Err(Error::validation("L", "must be smaller than M"));
    }
    let mut members: HashSet<Vec<usize>> = HashSet::new();
    for f in family {
        let mut f = f.clone();
        f.sort_unstable();
        f.dedup();
        if f.len() != l + 1 || f.iter().any(|&v| v >= m) {
            return Err(Error::validation("list_family", "members must be (L+1)-subsets of [M]"));
        }
        members.insert(f);
    }
    let mut lists: HashSet<Vec<usize>> = HashSet::new();
    for f in &members {
        for drop in 0..=l {
            let mut g = f.clone();
            g.remove(drop);
            lists.insert(g);
        }
    }
    Ok(lists.len() * (m - l) >= members.len())
}
