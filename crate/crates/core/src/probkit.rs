//! Finite-alphabet probability core.
//!
//! Distributions are dense `f64` arrays. Multi-axis arrays are stored
//! row-major with the last axis varying fastest; [`tuple_index`] and
//! [`index_tuple`] convert between flat indices and coordinates over a
//! power alphabet `X^L` (first coordinate most significant).
//!
//! All logarithms are base 2.

use crate::{Error, Result};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

/// Tolerance on total mass of a distribution.
pub const NORM_TOL: f64 = 1e-9;
/// Masses below this are treated as exact zeros for support computations.
pub const ZERO_TOL: f64 = 1e-15;

/// A finite alphabet with optional symbol names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub size: usize,
    pub labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::validation("alphabet.size", "must be at least 1"));
        }
        Ok(Self { size, labels: None })
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::validation("alphabet.labels", "must be non-empty"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return Err(Error::validation("alphabet.labels", "labels must be distinct"));
        }
        Ok(Self {
            size: labels.len(),
            labels: Some(labels),
        })
    }
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDist(format!("{what}: empty")));
    }
    let mut total = 0.0;
    for (i, &v) in p.iter().enumerate() {
        if !v.is_finite() || v < -NORM_TOL {
            return Err(Error::InvalidDist(format!("{what}: entry {i} is {v}")));
        }
        total += v;
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidDist(format!("{what}: total mass {total}")));
    }
    Ok(())
}

/// Probability mass function over one alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dist(Vec<f64>);

impl Dist {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_pmf(&p, "dist")?;
        Ok(Dist(p.into_iter().map(|v| v.max(0.0)).collect()))
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(w: &[f64]) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || w.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidDist("cannot normalize".into()));
        }
        Ok(Dist(w.iter().map(|v| v / s).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        Dist(vec![1.0 / k as f64; k])
    }

    pub fn point(k: usize, i: usize) -> Self {
        let mut p = vec![0.0; k];
        p[i] = 1.0;
        Dist(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&v| v > ZERO_TOL).count()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Dist {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Conditional distribution: one output row per conditioning index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondDist {
    pub n_in: usize,
    pub n_out: usize,
    rows: Vec<f64>,
}

impl CondDist {
    pub fn new(n_in: usize, n_out: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != n_in * n_out {
            return Err(Error::Dimension(format!(
                "conditional table has {} entries, expected {}",
                rows.len(),
                n_in * n_out
            )));
        }
        for r in 0..n_in {
            check_pmf(&rows[r * n_out..(r + 1) * n_out], &format!("row {r}"))?;
        }
        Ok(Self { n_in, n_out, rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_out = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_out) {
            return Err(Error::Dimension("ragged conditional rows".into()));
        }
        Self::new(rows.len(), n_out, rows.concat())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_out..(i + 1) * self.n_out]
    }

    pub fn get(&self, i: usize, o: usize) -> f64 {
        self.rows[i * self.n_out + o]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rows
    }
}

/// Joint distribution over a product of alphabets with named axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    pub dims: Vec<usize>,
    pub axes: Vec<String>,
    pub pmf: Vec<f64>,
}

impl JointDist {
    pub fn new(dims: Vec<usize>, axes: Vec<String>, pmf: Vec<f64>) -> Result<Self> {
        if dims.len() != axes.len() {
            return Err(Error::Dimension("one name per axis required".into()));
        }
        let size: usize = dims.iter().product();
        if size != pmf.len() {
            return Err(Error::Dimension(format!(
                "pmf has {} entries, dims imply {size}",
                pmf.len()
            )));
        }
        let mut names = axes.clone();
        names.sort();
        names.dedup();
        if names.len() != axes.len() {
            return Err(Error::Dimension("axis names must be distinct".into()));
        }
        check_pmf(&pmf, "joint")?;
        Ok(Self { dims, axes, pmf })
    }

    /// Joint over `X^L` with axes `x1..xL`.
    pub fn power(nx: usize, l: usize, pmf: Vec<f64>) -> Result<Self> {
        Self::new(
            vec![nx; l],
            (1..=l).map(|i| format!("x{i}")).collect(),
            pmf,
        )
    }

    pub fn axis(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::MissingAxis(name.to_string()))
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &d)| acc * d + c)
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.pmf[self.flat_index(coords)]
    }

    /// Marginal on the listed axes, in the listed order.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointDist> {
        let idx: Vec<usize> = keep.iter().map(|a| self.axis(a)).collect::<Result<_>>()?;
        let dims: Vec<usize> = idx.iter().map(|&i| self.dims[i]).collect();
        let mut out = vec![0.0; dims.iter().product()];
        let mut coords = vec![0usize; self.dims.len()];
        for &m in &self.pmf {
            let k = idx
                .iter()
                .zip(&dims)
                .fold(0, |acc, (&i, &d)| acc * d + coords[i]);
            out[k] += m;
            advance(&mut coords, &self.dims);
        }
        Ok(JointDist {
            dims,
            axes: keep.iter().map(|s| s.to_string()).collect(),
            pmf: out,
        })
    }

    fn entropy_of(&self, axes: &[&str]) -> Result<f64> {
        if axes.is_empty() {
            return Ok(0.0);
        }
        Ok(entropy_slice(&self.marginal(axes)?.pmf))
    }
}

/// Increments a mixed-radix counter (last coordinate fastest).
pub fn advance(coords: &mut [usize], dims: &[usize]) {
    for k in (0..coords.len()).rev() {
        coords[k] += 1;
        if coords[k] < dims[k] {
            return;
        }
        coords[k] = 0;
    }
}

/// Flat index of `tuple` in `base^len`, first coordinate most significant.
pub fn tuple_index(tuple: &[usize], base: usize) -> usize {
    tuple.iter().fold(0, |acc, &t| acc * base + t)
}

pub fn index_tuple(mut idx: usize, base: usize, len: usize) -> Vec<usize> {
    let mut t = vec![0; len];
    for k in (0..len).rev() {
        t[k] = idx % base;
        idx /= base;
    }
    t
}

/// All permutations of `0..k` in lexicographic order (identity first).
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// `P^{⊗L}` as a flat array over `X^L`.
pub fn tensor_power(p: &[f64], l: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..l {
        out = out
            .iter()
            .flat_map(|&a| p.iter().map(move |&b| a * b))
            .collect();
    }
    out
}

/// Marginal of a flat array over `X^L` on coordinate `axis`.
pub fn power_marginal(j: &[f64], nx: usize, l: usize, axis: usize) -> Vec<f64> {
    let mut m = vec![0.0; nx];
    for (i, &v) in j.iter().enumerate() {
        m[index_tuple(i, nx, l)[axis]] += v;
    }
    m
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn xlog2x(p: f64) -> f64 {
    if p <= ZERO_TOL {
        0.0
    } else {
        p * p.log2()
    }
}

pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    -p.iter().map(|&v| xlog2x(v)).sum::<f64>()
}

/// Shannon entropy in bits.
pub fn entropy(p: &Dist) -> f64 {
    entropy_slice(p.probs())
}

/// Binary entropy function.
pub fn h2(p: f64) -> f64 {
    entropy_slice(&[p, 1.0 - p])
}

/// Conditional mutual information `I(x;y|z)` where each of `x`, `y`, `z`
/// is a group of axis names (`z` may be empty).
pub fn mutual_info(p: &JointDist, x: &[&str], y: &[&str], z: &[&str]) -> Result<f64> {
    let cat = |a: &[&str], b: &[&str]| -> Vec<String> {
        a.iter().chain(b).map(|s| s.to_string()).collect()
    };
    let xz = cat(x, z);
    let yz = cat(y, z);
    let mut xyz = cat(x, y);
    xyz.extend(z.iter().map(|s| s.to_string()));
    fn r(v: &[String]) -> Vec<&str> {
        v.iter().map(|s| s.as_str()).collect()
    }
    let v = p.entropy_of(&r(&xz))? + p.entropy_of(&r(&yz))?
        - p.entropy_of(&r(&xyz))?
        - p.entropy_of(z)?;
    Ok(v.max(0.0))
}

/// Kullback–Leibler divergence `D(P‖Q)` in bits.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("{} vs {}", p.len(), q.len())));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > ZERO_TOL {
            if b <= ZERO_TOL {
                return Err(Error::AbsoluteContinuity(i));
            }
            d += a * (a / b).log2();
        }
    }
    Ok(d.max(0.0))
}

/// Integer histogram of one or more aligned sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceType {
    pub dims: Vec<usize>,
    pub counts: Vec<u64>,
    pub n: usize,
}

impl SequenceType {
    pub fn from_counts(dims: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if dims.iter().product::<usize>() != counts.len() {
            return Err(Error::Dimension("counts do not match dims".into()));
        }
        let n = counts.iter().sum::<u64>() as usize;
        if n == 0 {
            return Err(Error::validation("counts", "type of an empty sequence"));
        }
        Ok(Self { dims, counts, n })
    }

    pub fn probs(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.n as f64)
            .collect()
    }

    pub fn to_joint(&self, axes: Vec<String>) -> Result<JointDist> {
        JointDist::new(self.dims.clone(), axes, self.probs())
    }
}

/// Joint type of equal-length sequences; `dims[k]` is the alphabet size of
/// sequence `k`.
pub fn joint_type(seqs: &[&[usize]], dims: &[usize]) -> Result<SequenceType> {
    if seqs.is_empty() || seqs.len() != dims.len() {
        return Err(Error::Dimension("one alphabet size per sequence".into()));
    }
    let n = seqs[0].len();
    if n == 0 {
        return Err(Error::validation("sequences", "length must be at least 1"));
    }
    if seqs.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension("sequences have different lengths".into()));
    }
    let mut counts = vec![0u64; dims.iter().product()];
    for j in 0..n {
        let mut k = 0;
        for (s, &d) in seqs.iter().zip(dims) {
            if s[j] >= d {
                return Err(Error::Dimension(format!("symbol {} outside alphabet {d}", s[j])));
            }
            k = k * d + s[j];
        }
        counts[k] += 1;
    }
    Ok(SequenceType {
        dims: dims.to_vec(),
        counts,
        n,
    })
}

/// Upper bound `(k/(2η)+1)^k` on the size of an η-net of the k-simplex.
pub fn net_size_bound(k: usize, eta: f64) -> f64 {
    (k as f64 / (2.0 * eta) + 1.0).powi(k as i32)
}

/// ℓ1 η-net of the probability simplex on `k` symbols.
///
/// Points are the grid of step `1/m` with `m = ⌈k/(2η)⌉`; largest-remainder
/// rounding moves any distribution by at most `k/(2m) ≤ η` in ℓ1.
pub fn simplex_net(k: usize, eta: f64) -> Vec<Dist> {
    assert!(k >= 1 && eta > 0.0);
    if k == 1 || eta >= 2.0 * (1.0 - 1.0 / k as f64) {
        return vec![Dist::uniform(k)];
    }
    let m = ((k as f64) / (2.0 * eta) - 1e-9).ceil().max(1.0) as usize;
    compositions(m, k)
        .into_iter()
        .map(|c| Dist(c.into_iter().map(|v| v as f64 / m as f64).collect()))
        .collect()
}

/// All ways to write `m` as an ordered sum of `k` nonnegative integers,
/// in lexicographic order.
pub fn compositions(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == 1 {
            cur.push(rem);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in 0..=rem {
            cur.push(v);
            rec(rem - v, k - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Largest-remainder apportionment of `total` units by weights `w`
/// (ties go to the lowest index).
pub fn apportion(w: &[f64], total: usize) -> Vec<usize> {
    let s: f64 = w.iter().sum();
    let exact: Vec<f64> = w.iter().map(|v| v / s * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|v| (v + 1e-12).floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - out[a] as f64;
        let rb = exact[b] - out[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Polytope `{P : A·P ≤ Γ}` over one alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPolytope {
    pub dim: usize,
    pub a: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl ConstraintPolytope {
    pub fn new(dim: usize, a: Vec<Vec<f64>>, gamma: Vec<f64>) -> Result<Self> {
        if a.len() != gamma.len() {
            return Err(Error::Dimension(format!(
                "{} constraint rows but {} bounds",
                a.len(),
                gamma.len()
            )));
        }
        if let Some(i) = a.iter().position(|r| r.len() != dim) {
            return Err(Error::Dimension(format!("row {i} has wrong length")));
        }
        Ok(Self { dim, a, gamma })
    }

    pub fn unconstrained(dim: usize) -> Self {
        Self {
            dim,
            a: Vec::new(),
            gamma: Vec::new(),
        }
    }

    /// `{P}` written as pairs of opposite inequalities.
    pub fn singleton(p: &[f64]) -> Self {
        let k = p.len();
        let mut a = Vec::with_capacity(2 * k);
        let mut gamma = Vec::with_capacity(2 * k);
        for (i, &v) in p.iter().enumerate() {
            let mut r = vec![0.0; k];
            r[i] = 1.0;
            a.push(r.clone());
            gamma.push(v);
            r[i] = -1.0;
            a.push(r);
            gamma.push(-v);
        }
        Self { dim: k, a, gamma }
    }

    pub fn rows(&self) -> usize {
        self.a.len()
    }

    pub fn row_value(&self, i: usize, p: &[f64]) -> f64 {
        self.a[i].iter().zip(p).map(|(a, b)| a * b).sum()
    }

    /// `B_i* = max_s |B_i(s)|`.
    pub fn b_star(&self, i: usize) -> f64 {
        self.a[i].iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn polytope_contains(p: &[f64], k: &ConstraintPolytope, tol: f64) -> Result<bool> {
    if p.len() != k.dim {
        return Err(Error::Dimension(format!(
            "point has {} coordinates, polytope lives in {}",
            p.len(),
            k.dim
        )));
    }
    Ok((0..k.rows()).all(|i| k.row_value(i, p) <= k.gamma[i] + tol))
}

/// Exact size of a type class together with its log2 sandwich.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassSize {
    pub exact: BigUint,
    pub log2_exact: f64,
    pub entropy: f64,
    /// Slack `f = |X|·log2(n+1)/n`.
    pub f: f64,
    pub log2_lower: f64,
    pub log2_upper: f64,
}

impl TypeClassSize {
    pub fn within_bounds(&self) -> bool {
        self.log2_exact >= self.log2_lower - 1e-9 && self.log2_exact <= self.log2_upper + 1e-9
    }
}

fn log2_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).log2()).sum()
}

/// Number of sequences of type `t` (a multinomial coefficient).
pub fn type_class_size(t: &SequenceType) -> TypeClassSize {
    let n = t.n as u64;
    let mut exact = BigUint::from(1u32);
    let mut done = 0u64;
    for &c in &t.counts {
        // running product of binomial(done + c, c)
        for i in 1..=c {
            exact *= BigUint::from(done + i);
            exact /= BigUint::from(i);
        }
        done += c;
    }
    let log2_exact = log2_factorial(n) - t.counts.iter().map(|&c| log2_factorial(c)).sum::<f64>();
    let h = entropy_slice(&t.probs());
    let k = t.counts.len() as f64;
    let f = k * ((n + 1) as f64).log2() / n as f64;
    TypeClassSize {
        exact,
        log2_exact,
        entropy: h,
        f,
        log2_lower: n as f64 * (h - f),
        log2_upper: n as f64 * h,
    }
}

/// Outcome of the conditional type probability bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeProbCheck {
    pub probability: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks `Σ_{y: τ_{x,s,y}=P} W^n(y|x,s) ≤ 2^{-n D(P ‖ P_{x,s} W)}` by
/// exhaustive enumeration over `Y^n`.
///
/// `w` has one row per `(x,s)` pair (index `x·|S|+s`); `p` carries integral
/// counts over `(x,s,y)`.
pub fn type_prob_bound_check(
    w: &CondDist,
    nx: usize,
    ns: usize,
    p: &SequenceType,
    budget: f64,
) -> Result<TypeProbCheck> {
    let ny = w.n_out;
    if w.n_in != nx * ns || p.dims != [nx, ns, ny] {
        return Err(Error::Dimension("type must range over (x,s,y)".into()));
    }
    let n = p.n;
    let outcomes = (ny as f64).powi(n as i32);
    if n > 10 || ny > 3 || outcomes > budget {
        return Err(Error::Budget {
            needed: outcomes,
            budget,
        });
    }
    // realize x and s sequences with the (x,s) marginal of P
    let mut xs = Vec::with_capacity(n);
    for x in 0..nx {
        for s in 0..ns {
            let c: u64 = (0..ny).map(|y| p.counts[(x * ns + s) * ny + y]).sum();
            xs.extend(std::iter::repeat((x, s)).take(c as usize));
        }
    }
    let mut y = vec![0usize; n];
    let mut prob = 0.0;
    let dims = vec![ny; n];
    for _ in 0..outcomes as usize {
        let mut counts = vec![0u64; nx * ns * ny];
        let mut lik = 1.0;
        for j in 0..n {
            let (x, s) = xs[j];
            counts[(x * ns + s) * ny + y[j]] += 1;
            lik *= w.get(x * ns + s, y[j]);
        }
        if counts == p.counts {
            prob += lik;
        }
        advance(&mut y, &dims);
    }
    let pj = p.probs();
    let mut reference = vec![0.0; pj.len()];
    for x in 0..nx {
        for s in 0..ns {
            let m: f64 = (0..ny).map(|y| pj[(x * ns + s) * ny + y]).sum();
            for yy in 0..ny {
                reference[(x * ns + s) * ny + yy] = m * w.get(x * ns + s, yy);
            }
        }
    }
    let bound = match kl_divergence(&pj, &reference) {
        Ok(d) => (-(n as f64) * d).exp2(),
        Err(Error::AbsoluteContinuity(_)) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(TypeProbCheck {
        probability: prob,
        bound,
        holds: prob <= bound * (1.0 + 1e-9) + 1e-15,
    })
}
