//! Channel models and the channel-spec file format.
//!
//! An oblivious AVC is stored as a flat law `W(y|x,s)` at index
//! `(x·|S| + s)·|Y| + y`. Spec files on disk index it as `W[y][x][s]`.

use crate::cpcone::{distance_to_cp, CpNetConfig};
use crate::probkit::{
    advance, polytope_contains, power_marginal, Alphabet, CondDist, ConstraintPolytope, Dist,
    JointDist, NORM_TOL,
};
use crate::rng::rng;
use crate::{Error, Result};
use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

/// Default cap on the number of enumerated outcomes.
pub const DEFAULT_BUDGET: f64 = 1e6;

/// Membership rule for the state distribution `P_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateConstraint {
    /// `{P_s : B·P_s ≤ Λ}`.
    Polytope(ConstraintPolytope),
    /// Union over `P ∈ p_set` of the order-`order` completely positive
    /// `P`-self-couplings, living on `S = X^order`.
    CpUnion {
        p_set: ConstraintPolytope,
        order: usize,
        tol: f64,
    },
}

impl StateConstraint {
    pub fn polytope(&self) -> Option<&ConstraintPolytope> {
        match self {
            StateConstraint::Polytope(p) => Some(p),
            StateConstraint::CpUnion { .. } => None,
        }
    }

    /// Polytope form when one exists (order-1 cp-unions are just `p_set`).
    pub fn as_polytope(&self) -> Option<ConstraintPolytope> {
        match self {
            StateConstraint::Polytope(p) => Some(p.clone()),
            StateConstraint::CpUnion { p_set, order: 1, .. } => Some(p_set.clone()),
            StateConstraint::CpUnion { .. } => None,
        }
    }

    pub fn contains(&self, p_s: &[f64]) -> Result<bool> {
        match self {
            StateConstraint::Polytope(k) => polytope_contains(p_s, k, 1e-9),
            StateConstraint::CpUnion { p_set, order, tol } => {
                let nx = p_set.dim;
                let l = *order;
                if nx.pow(l as u32) != p_s.len() {
                    return Err(Error::Dimension("state law does not live on X^L".into()));
                }
                let m = power_marginal(p_s, nx, l, 0);
                for axis in 1..l {
                    let other = power_marginal(p_s, nx, l, axis);
                    if crate::probkit::l1(&m, &other) > *tol {
                        return Ok(false);
                    }
                }
                if !polytope_contains(&m, p_set, 1e-9)? {
                    return Ok(false);
                }
                if l == 1 {
                    return Ok(true);
                }
                let cfg = CpNetConfig::for_alphabet(nx);
                let (d, _) = distance_to_cp(p_s, nx, l, &m, &cfg)?;
                Ok(d <= *tol)
            }
        }
    }
}

/// Finite oblivious arbitrarily varying channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliviousAVC {
    pub x: Alphabet,
    pub s: Alphabet,
    pub y: Alphabet,
    w: Vec<f64>,
    pub lambda_x: ConstraintPolytope,
    pub lambda_s: StateConstraint,
}

impl ObliviousAVC {
    /// `w` is indexed `(x·|S| + s)·|Y| + y`.
    pub fn new(
        nx: usize,
        ns: usize,
        ny: usize,
        w: Vec<f64>,
        lambda_x: ConstraintPolytope,
        lambda_s: StateConstraint,
    ) -> Result<Self> {
        Self::with_alphabets(
            Alphabet::new(nx)?,
            Alphabet::new(ns)?,
            Alphabet::new(ny)?,
            w,
            lambda_x,
            lambda_s,
        )
    }

    pub fn with_alphabets(
        x: Alphabet,
        s: Alphabet,
        y: Alphabet,
        w: Vec<f64>,
        lambda_x: ConstraintPolytope,
        lambda_s: StateConstraint,
    ) -> Result<Self> {
        let (nx, ns, ny) = (x.size, s.size, y.size);
        if w.len() != nx * ns * ny {
            return Err(Error::validation("W", format!("expected {} entries", nx * ns * ny)));
        }
        for xi in 0..nx {
            for si in 0..ns {
                let row = &w[(xi * ns + si) * ny..(xi * ns + si + 1) * ny];
                if let Some(y) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::validation(
                        format!("W[{y}][{xi}][{si}]"),
                        "entries must be finite and nonnegative",
                    ));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > NORM_TOL {
                    return Err(Error::validation(
                        format!("W[*][{xi}][{si}]"),
                        format!("row (x={xi}, s={si}) sums to {sum}"),
                    ));
                }
            }
        }
        if lambda_x.dim != nx {
            return Err(Error::validation("lambda_x.A", format!("rows must have length {nx}")));
        }
        match &lambda_s {
            StateConstraint::Polytope(p) if p.dim != ns => {
                return Err(Error::validation("lambda_s.A", format!("rows must have length {ns}")));
            }
            StateConstraint::CpUnion { p_set, order, .. } => {
                if p_set.dim.checked_pow(*order as u32) != Some(ns) || *order == 0 {
                    return Err(Error::validation(
                        "lambda_s.L",
                        format!("|S| = {ns} is not |P_set dim|^L"),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self {
            x,
            s,
            y,
            w,
            lambda_x,
            lambda_s,
        })
    }

    pub fn nx(&self) -> usize {
        self.x.size
    }

    pub fn ns(&self) -> usize {
        self.s.size
    }

    pub fn ny(&self) -> usize {
        self.y.size
    }

    pub fn w(&self, y: usize, x: usize, s: usize) -> f64 {
        self.w[(x * self.ns() + s) * self.ny() + y]
    }

    /// The row `W(·|x,s)`.
    pub fn row(&self, x: usize, s: usize) -> &[f64] {
        let ny = self.ny();
        let k = (x * self.ns() + s) * ny;
        &self.w[k..k + ny]
    }

    pub fn law(&self) -> CondDist {
        CondDist::new(self.nx() * self.ns(), self.ny(), self.w.clone()).expect("validated law")
    }

    pub fn is_deterministic(&self) -> bool {
        self.w.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// Channel `W̃(y|x,u)` driven by a known fading sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingDMC {
    pub nx: usize,
    pub nu: usize,
    pub ny: usize,
    /// Indexed `(u·|X| + x)·|Y| + y`.
    pub w: Vec<f64>,
    pub p_u: Option<Vec<f64>>,
    pub u_seq: Option<Vec<usize>>,
}

impl FadingDMC {
    /// Builds from one `|X| × |Y|` row block per fading state.
    pub fn from_blocks(blocks: &[Vec<Vec<f64>>], p_u: Vec<f64>) -> Result<Self> {
        let nu = blocks.len();
        let nx = blocks.first().map_or(0, |b| b.len());
        let ny = blocks.first().and_then(|b| b.first()).map_or(0, |r| r.len());
        let mut w = Vec::with_capacity(nu * nx * ny);
        for b in blocks {
            if b.len() != nx || b.iter().any(|r| r.len() != ny) {
                return Err(Error::Dimension("ragged fading blocks".into()));
            }
            for r in b {
                Dist::new(r.clone())?;
                w.extend_from_slice(r);
            }
        }
        Dist::new(p_u.clone())?;
        if p_u.len() != nu {
            return Err(Error::Dimension("P_u length must equal |U|".into()));
        }
        Ok(Self {
            nx,
            nu,
            ny,
            w,
            p_u: Some(p_u),
            u_seq: None,
        })
    }

    pub fn row(&self, x: usize, u: usize) -> &[f64] {
        let k = (u * self.nx + x) * self.ny;
        &self.w[k..k + self.ny]
    }

    /// `P_u`, either given or the type of the fading sequence.
    pub fn p_u(&self) -> Result<Vec<f64>> {
        if let Some(p) = &self.p_u {
            return Ok(p.clone());
        }
        let seq = self
            .u_seq
            .as_ref()
            .ok_or_else(|| Error::validation("u_seq", "neither P_u nor u_seq given"))?;
        let mut c = vec![0.0; self.nu];
        for &u in seq {
            c[u] += 1.0;
        }
        Ok(c.iter().map(|v| v / seq.len() as f64).collect())
    }
}

/// Codebook: `M` codewords of length `n` over `X`, with an optional
/// time-sharing sequence over `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub n: usize,
    pub nx: usize,
    pub codewords: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_seq: Option<Vec<usize>>,
}

impl Codebook {
    pub fn new(nx: usize, codewords: Vec<Vec<usize>>, u_seq: Option<Vec<usize>>) -> Result<Self> {
        let n = codewords.first().map_or(0, |c| c.len());
        if codewords.is_empty() || n == 0 {
            return Err(Error::validation("codewords", "need at least one nonempty codeword"));
        }
        if let Some(i) = codewords.iter().position(|c| c.len() != n) {
            return Err(Error::validation(format!("codewords[{i}]"), "length differs"));
        }
        if let Some(i) = codewords.iter().position(|c| c.iter().any(|&v| v >= nx)) {
            return Err(Error::validation(format!("codewords[{i}]"), "symbol outside alphabet"));
        }
        if let Some(u) = &u_seq {
            if u.len() != n {
                return Err(Error::validation("u_seq", "length differs from n"));
            }
        }
        Ok(Self {
            n,
            nx,
            codewords,
            u_seq,
        })
    }

    pub fn m(&self) -> usize {
        self.codewords.len()
    }

    pub fn nu(&self) -> usize {
        self.u_seq
            .as_ref()
            .map_or(1, |u| u.iter().copied().max().unwrap_or(0) + 1)
    }

    /// Time-sharing symbol at position `j` (0 when absent).
    pub fn u_at(&self, j: usize) -> usize {
        self.u_seq.as_ref().map_or(0, |u| u[j])
    }

    /// `log2(M) / (n log2|X|)`.
    pub fn rate(&self) -> f64 {
        (self.m() as f64).log2() / (self.n as f64 * (self.nx as f64).log2())
    }

    /// Codewords restricted to the listed indices.
    pub fn subcode(&self, idx: &[usize]) -> Codebook {
        Codebook {
            n: self.n,
            nx: self.nx,
            codewords: idx.iter().map(|&i| self.codewords[i].clone()).collect(),
            u_seq: self.u_seq.clone(),
        }
    }
}

/// Samples `y_j ~ W(·|x_j, s_j)` independently.
pub fn apply_channel(avc: &ObliviousAVC, x: &[usize], s: &[usize], seed: u64) -> Result<Vec<usize>> {
    if x.len() != s.len() {
        return Err(Error::Dimension(format!("x has length {}, s has {}", x.len(), s.len())));
    }
    let samplers: Vec<WeightedIndex<f64>> = (0..avc.nx() * avc.ns())
        .map(|k| WeightedIndex::new(avc.row(k / avc.ns(), k % avc.ns()).to_vec()).expect("valid row"))
        .collect();
    let mut r = rng(seed);
    x.iter()
        .zip(s)
        .map(|(&xi, &si)| {
            if xi >= avc.nx() || si >= avc.ns() {
                return Err(Error::Dimension("symbol outside alphabet".into()));
            }
            Ok(samplers[xi * avc.ns() + si].sample(&mut r))
        })
        .collect()
}

/// Exact law of `Y^n` given `x` and `s`.
pub fn output_distribution(
    avc: &ObliviousAVC,
    x: &[usize],
    s: &[usize],
    budget: f64,
) -> Result<JointDist> {
    if x.len() != s.len() {
        return Err(Error::Dimension("x and s lengths differ".into()));
    }
    let n = x.len();
    let ny = avc.ny();
    let size = (ny as f64).powi(n as i32);
    if size > budget {
        return Err(Error::Budget { needed: size, budget });
    }
    let mut pmf = vec![1.0];
    for j in 0..n {
        let row = avc.row(x[j], s[j]);
        pmf = pmf
            .iter()
            .flat_map(|&a| row.iter().map(move |&b| a * b))
            .collect();
    }
    let dims = vec![ny; n];
    JointDist::new(dims, (1..=n).map(|i| format!("y{i}")).collect(), pmf)
}

/// Averages the state out under a kernel `U(s|u)`.
pub fn induced_dmc(avc: &ObliviousAVC, u: &CondDist) -> Result<FadingDMC> {
    if u.n_out != avc.ns() {
        return Err(Error::Dimension("kernel rows must range over S".into()));
    }
    let (nx, ny, nu) = (avc.nx(), avc.ny(), u.n_in);
    let mut w = vec![0.0; nu * nx * ny];
    for ui in 0..nu {
        for x in 0..nx {
            for s in 0..avc.ns() {
                let p = u.get(ui, s);
                if p == 0.0 {
                    continue;
                }
                for (y, wy) in avc.row(x, s).iter().enumerate() {
                    w[(ui * nx + x) * ny + y] += p * wy;
                }
            }
        }
    }
    Ok(FadingDMC {
        nx,
        nu,
        ny,
        w,
        p_u: None,
        u_seq: None,
    })
}

fn num(v: &Value, field: &str) -> Result<f64> {
    match v {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| Error::validation(field, "not a finite number")),
        Value::String(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|_| Error::validation(field, format!("cannot parse {s:?} as a number"))),
        _ => Err(Error::validation(field, "expected a number or decimal string")),
    }
}

fn arr<'a>(v: &'a Value, field: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| Error::validation(field, "expected an array"))
}

fn get<'a>(v: &'a Value, key: &str, field: &str) -> Result<&'a Value> {
    v.get(key)
        .ok_or_else(|| Error::validation(field, format!("missing key `{key}`")))
}

fn alphabet(v: &Value, field: &str) -> Result<Alphabet> {
    match v {
        Value::Array(labels) => Alphabet::with_labels(
            labels
                .iter()
                .map(|l| match l {
                    Value::String(s) => Ok(s.clone()),
                    other => Ok(other.to_string()),
                })
                .collect::<Result<_>>()?,
        )
        .map_err(|e| Error::validation(field, e.to_string())),
        _ => {
            let k = num(v, field)?;
            if k < 1.0 || k.fract() != 0.0 {
                return Err(Error::validation(field, "size must be a positive integer"));
            }
            Alphabet::new(k as usize)
        }
    }
}

fn polytope(v: &Value, dim: usize, field: &str, bound_key: &str) -> Result<ConstraintPolytope> {
    let a_field = format!("{field}.A");
    let g_field = format!("{field}.{bound_key}");
    let a: Vec<Vec<f64>> = match v.get("A") {
        None | Some(Value::Null) => Vec::new(),
        Some(a) => arr(a, &a_field)?
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let f = format!("{a_field}[{i}]");
                let row = arr(row, &f)?;
                if row.len() != dim {
                    return Err(Error::validation(&f, format!("has {} entries, expected {dim}", row.len())));
                }
                row.iter().map(|c| num(c, &f)).collect()
            })
            .collect::<Result<_>>()?,
    };
    let g: Vec<f64> = match v.get(bound_key) {
        None | Some(Value::Null) => Vec::new(),
        Some(g) => arr(g, &g_field)?
            .iter()
            .enumerate()
            .map(|(i, c)| num(c, &format!("{g_field}[{i}]")))
            .collect::<Result<_>>()?,
    };
    if a.len() != g.len() {
        return Err(Error::validation(
            &g_field,
            format!("{} bounds for {} constraint rows", g.len(), a.len()),
        ));
    }
    ConstraintPolytope::new(dim, a, g)
}

fn polytope_json(p: &ConstraintPolytope, bound_key: &str) -> Value {
    json!({ "A": p.a, bound_key: p.gamma })
}

fn alphabet_json(a: &Alphabet) -> Value {
    match &a.labels {
        Some(l) => json!(l),
        None => json!(a.size),
    }
}

/// Parses a channel spec from JSON text.
pub fn parse_spec(text: &str) -> Result<ObliviousAVC> {
    let v: Value = serde_json::from_str(text)?;
    let al = get(&v, "alphabets", "alphabets")?;
    let x = alphabet(get(al, "X", "alphabets.X")?, "alphabets.X")?;
    let s = alphabet(get(al, "S", "alphabets.S")?, "alphabets.S")?;
    let y = alphabet(get(al, "Y", "alphabets.Y")?, "alphabets.Y")?;
    let (nx, ns, ny) = (x.size, s.size, y.size);
    let wv = arr(get(&v, "W", "W")?, "W")?;
    if wv.len() != ny {
        return Err(Error::validation("W", format!("outer dimension must be |Y| = {ny}")));
    }
    let mut w = vec![0.0; nx * ns * ny];
    for (yi, plane) in wv.iter().enumerate() {
        let plane = arr(plane, &format!("W[{yi}]"))?;
        if plane.len() != nx {
            return Err(Error::validation(format!("W[{yi}]"), format!("must have |X| = {nx} rows")));
        }
        for (xi, row) in plane.iter().enumerate() {
            let f = format!("W[{yi}][{xi}]");
            let row = arr(row, &f)?;
            if row.len() != ns {
                return Err(Error::validation(&f, format!("must have |S| = {ns} entries")));
            }
            for (si, c) in row.iter().enumerate() {
                w[(xi * ns + si) * ny + yi] = num(c, &format!("W[{yi}][{xi}][{si}]"))?;
            }
        }
    }
    let lambda_x = match v.get("lambda_x") {
        None | Some(Value::Null) => ConstraintPolytope::unconstrained(nx),
        Some(lx) => polytope(lx, nx, "lambda_x", "Gamma")?,
    };
    let lambda_s = match v.get("lambda_s") {
        None | Some(Value::Null) => StateConstraint::Polytope(ConstraintPolytope::unconstrained(ns)),
        Some(ls) => {
            let kind = get(ls, "kind", "lambda_s.kind")?
                .as_str()
                .ok_or_else(|| Error::validation("lambda_s.kind", "expected a string"))?;
            match kind {
                "polytope" => {
                    let key = if ls.get("Lambda").is_some() { "Lambda" } else { "Gamma" };
                    StateConstraint::Polytope(polytope(ls, ns, "lambda_s", key)?)
                }
                "cp-union" => {
                    let ps = get(ls, "P_set", "lambda_s.P_set")?;
                    let l = num(get(ls, "L", "lambda_s.L")?, "lambda_s.L")?;
                    if l < 1.0 || l.fract() != 0.0 {
                        return Err(Error::validation("lambda_s.L", "must be a positive integer"));
                    }
                    let tol = match ls.get("tol") {
                        Some(t) => num(t, "lambda_s.tol")?,
                        None => 0.05,
                    };
                    StateConstraint::CpUnion {
                        p_set: polytope(ps, nx, "lambda_s.P_set", "Gamma")?,
                        order: l as usize,
                        tol,
                    }
                }
                other => {
                    return Err(Error::validation(
                        "lambda_s.kind",
                        format!("unknown kind {other:?} (expected \"polytope\" or \"cp-union\")"),
                    ))
                }
            }
        }
    };
    ObliviousAVC::with_alphabets(x, s, y, w, lambda_x, lambda_s)
}

pub fn spec_json(avc: &ObliviousAVC) -> Value {
    let (nx, ns, ny) = (avc.nx(), avc.ns(), avc.ny());
    let w: Vec<Vec<Vec<f64>>> = (0..ny)
        .map(|y| (0..nx).map(|x| (0..ns).map(|s| avc.w(y, x, s)).collect()).collect())
        .collect();
    let lambda_s = match &avc.lambda_s {
        StateConstraint::Polytope(p) => {
            let mut v = polytope_json(p, "Gamma");
            v["kind"] = json!("polytope");
            v
        }
        StateConstraint::CpUnion { p_set, order, tol } => json!({
            "kind": "cp-union",
            "P_set": polytope_json(p_set, "Gamma"),
            "L": order,
            "tol": tol,
        }),
    };
    json!({
        "alphabets": { "X": alphabet_json(&avc.x), "S": alphabet_json(&avc.s), "Y": alphabet_json(&avc.y) },
        "W": w,
        "lambda_x": polytope_json(&avc.lambda_x, "Gamma"),
        "lambda_s": lambda_s,
    })
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<ObliviousAVC> {
    parse_spec(&std::fs::read_to_string(path)?)
}

pub fn save_spec(avc: &ObliviousAVC, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(&spec_json(avc))?)?;
    Ok(())
}

/// Binary bitflip law `y = x ⊕ s` with the state weight bounded by `p`
/// (`None` leaves the state unconstrained).
pub fn bitflip(p: Option<f64>) -> ObliviousAVC {
    let mut w = vec![0.0; 8];
    for x in 0..2 {
        for s in 0..2 {
            w[(x * 2 + s) * 2 + (x ^ s)] = 1.0;
        }
    }
    let ls = match p {
        Some(p) => ConstraintPolytope::new(2, vec![vec![0.0, 1.0]], vec![p]).unwrap(),
        None => ConstraintPolytope::unconstrained(2),
    };
    ObliviousAVC::new(2, 2, 2, w, ConstraintPolytope::unconstrained(2), StateConstraint::Polytope(ls))
        .unwrap()
}

/// Iterates over all of `Y^n` in lexicographic order.
pub(crate) fn for_each_sequence(alpha: usize, n: usize, mut f: impl FnMut(&[usize])) {
    let dims = vec![alpha; n];
    let mut y = vec![0usize; n];
    let total = alpha.pow(n as u32);
    for _ in 0..total {
        f(&y);
        advance(&mut y, &dims);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noisy() -> ObliviousAVC {
        // ternary output, binary input and state
        let w = vec![
            0.7, 0.2, 0.1, 0.1, 0.6, 0.3, 0.3, 0.3, 0.4, 0.0, 0.5, 0.5,
        ];
        ObliviousAVC::new(
            2,
            2,
            3,
            w,
            ConstraintPolytope::unconstrained(2),
            StateConstraint::Polytope(ConstraintPolytope::unconstrained(2)),
        )
        .unwrap()
    }

    #[test]
    fn identity_state_passes_input() {
        let avc = bitflip(None);
        let x = vec![0, 1, 1, 0, 1];
        assert_eq!(apply_channel(&avc, &x, &[0; 5], 1).unwrap(), x);
        assert_eq!(apply_channel(&avc, &x, &[0; 5], 99).unwrap(), x);
        assert!(apply_channel(&avc, &x, &[0; 4], 1).is_err());
    }

    #[test]
    fn sampling_matches_row() {
        let avc = noisy();
        let n = 100_000;
        let y = apply_channel(&avc, &vec![1; n], &vec![0; n], 3).unwrap();
        let row = avc.row(1, 0);
        for k in 0..3 {
            let freq = y.iter().filter(|&&v| v == k).count() as f64 / n as f64;
            let sigma = (row[k] * (1.0 - row[k]) / n as f64).sqrt();
            assert!((freq - row[k]).abs() <= 3.0 * sigma + 1e-12, "{k}: {freq}");
        }
        assert_eq!(y, apply_channel(&avc, &vec![1; n], &vec![0; n], 3).unwrap());
    }

    #[test]
    fn output_distribution_product() {
        let avc = noisy();
        let d = output_distribution(&avc, &[1], &[1], 1e6).unwrap();
        assert_eq!(d.pmf, avc.row(1, 1));
        let (x, s) = ([0, 1], [1, 0]);
        let d = output_distribution(&avc, &x, &s, 1e6).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let naive = avc.w(a, x[0], s[0]) * avc.w(b, x[1], s[1]);
                assert!((d.get(&[a, b]) - naive).abs() < 1e-15);
            }
        }
        let d = output_distribution(&bitflip(None), &[1, 0, 1], &[1, 1, 0], 1e6).unwrap();
        assert_eq!(d.pmf.iter().filter(|&&v| v == 1.0).count(), 1);
        assert!(output_distribution(&avc, &[0; 20], &[0; 20], 1e6).unwrap_err().is_budget());
    }

    #[test]
    fn induced_dmc_examples() {
        let avc = bitflip(None);
        let u = CondDist::new(1, 2, vec![0.9, 0.1]).unwrap();
        let f = induced_dmc(&avc, &u).unwrap();
        assert_eq!(f.row(0, 0), &[0.9, 0.1]);
        assert_eq!(f.row(1, 0), &[0.1, 0.9]);
        let point = CondDist::new(1, 2, vec![0.0, 1.0]).unwrap();
        let f = induced_dmc(&noisy(), &point).unwrap();
        assert_eq!(f.row(0, 0), noisy().row(0, 1));
        let two = CondDist::new(2, 2, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let f = induced_dmc(&avc, &two).unwrap();
        assert_eq!(f.row(0, 1), &[0.2, 0.8]);
        assert_ne!(f.row(0, 0), f.row(0, 1));
        for k in 0..f.nu * f.nx {
            let s: f64 = f.w[k * 2..k * 2 + 2].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let avc = bitflip(Some(0.1));
        save_spec(&avc, &path).unwrap();
        assert_eq!(load_spec(&path).unwrap(), avc);
        let mut cp = noisy();
        cp.lambda_s = StateConstraint::CpUnion {
            p_set: ConstraintPolytope::new(2, vec![vec![0.0, 1.0]], vec![0.3]).unwrap(),
            order: 1,
            tol: 1e-6,
        };
        save_spec(&cp, &path).unwrap();
        assert_eq!(load_spec(&path).unwrap(), cp);
    }

    #[test]
    fn spec_validation_names_row() {
        let text = r#"{"alphabets":{"X":2,"S":1,"Y":2},
            "W":[[[1.0],[0.5]],[[0.0],["0.4"]]]}"#;
        match parse_spec(text) {
            Err(Error::Validation { field, reason }) => {
                assert_eq!(field, "W[*][1][0]");
                assert!(reason.contains("x=1"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
        let bad_kind = r#"{"alphabets":{"X":1,"S":1,"Y":1},"W":[[[1]]],"lambda_s":{"kind":"ball"}}"#;
        assert!(matches!(parse_spec(bad_kind), Err(Error::Validation { field, .. }) if field == "lambda_s.kind"));
        let bad_dim = r#"{"alphabets":{"X":2,"S":1,"Y":1},"W":[[[1],[1]]],"lambda_x":{"A":[[1]],"Gamma":[1]}}"#;
        assert!(matches!(parse_spec(bad_dim), Err(Error::Validation { field, .. }) if field == "lambda_x.A[0]"));
    }

    #[test]
    fn shipped_fixture_loads() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/bitflip.json");
        let avc = load_spec(path).unwrap();
        assert_eq!(avc, bitflip(Some(0.1)));
    }
}
