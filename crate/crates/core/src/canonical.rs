//! Canonical channels with a prescribed set of symmetrizable inputs, and
//! the separations between the strong, cp and weak notions they exhibit.
//!
//! For list size `L` the canonical channel has `S = X^L` and outputs the
//! unordered multiset `{x, s_1, .., s_L}`. The only kernel satisfying the
//! `L`-symmetrization identities is the identity `s = (x_1..x_L)`, and none
//! satisfies the `(L+1)`-identities.

use crate::channel::{ObliviousAVC, StateConstraint};
use crate::cpcone::CpNetConfig;
use crate::probkit::{index_tuple, tensor_power, Alphabet, ConstraintPolytope};
use crate::symcheck::{
    analyze_kernel_set, build_sym_system, forces_identity, lp_solve, max_margin_kernel, symmetrizability_profile, Certificate,
    JammingKernel, KernelSet, LinearProgram, LpOutcome, Profile, SymConfig, SymMode,
};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

/// Sorted `(L+1)`-multisets of `0..nx`, in lexicographic order.
fn multisets(nx: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, nx: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for v in start..nx {
            cur.push(v);
            rec(v, nx, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, nx, size, &mut Vec::new(), &mut out);
    out
}

fn label(t: &[usize]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Some point of `p_set` inside the simplex, if any.
pub fn polytope_point(p_set: &ConstraintPolytope) -> Result<Option<Vec<f64>>> {
    let k = p_set.dim;
    let mut lp = LinearProgram::new(k);
    lp.add_eq(vec![1.0; k], 1.0);
    for (row, g) in p_set.a.iter().zip(&p_set.gamma) {
        lp.add_le(row.clone(), *g);
    }
    Ok(match lp_solve(&lp)? {
        LpOutcome::Feasible { x } | LpOutcome::Optimal { x, .. } => Some(x),
        LpOutcome::Infeasible { .. } => None,
    })
}

/// Deterministic multiset channel with `lambda_x = Δ(X)` and `lambda_s`
/// the union of order-`L` cp self-couplings of laws in `p_set`.
pub fn build_canonical(p_set: &ConstraintPolytope, l: usize) -> Result<ObliviousAVC> {
    if l == 0 {
        return Err(Error::validation("L", "must be at least 1"));
    }
    if polytope_point(p_set)?.is_none() {
        return Err(Error::validation("P_set", "is empty"));
    }
    let nx = p_set.dim;
    let lambda_s = StateConstraint::CpUnion {
        p_set: p_set.clone(),
        order: l,
        tol: 0.05,
    };
    multiset_channel(nx, l, ConstraintPolytope::unconstrained(nx), lambda_s)
}

/// Canonical channel for the single law `p`: `lambda_x = {p}` and
/// `lambda_s = {p^{⊗L}}`.
pub fn build_canonical_singleton(p: &[f64], l: usize) -> Result<ObliviousAVC> {
    if l == 0 {
        return Err(Error::validation("L", "must be at least 1"));
    }
    crate::probkit::Dist::new(p.to_vec())?;
    let lambda_s = StateConstraint::Polytope(ConstraintPolytope::singleton(&tensor_power(p, l)));
    multiset_channel(p.len(), l, ConstraintPolytope::singleton(p), lambda_s)
}

fn multiset_channel(
    nx: usize,
    l: usize,
    lambda_x: ConstraintPolytope,
    lambda_s: StateConstraint,
) -> Result<ObliviousAVC> {
    let ys = multisets(nx, l + 1);
    let pos: BTreeMap<Vec<usize>, usize> = ys.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect();
    let ns = nx.pow(l as u32);
    let ny = ys.len();
    let mut w = vec![0.0; nx * ns * ny];
    for x in 0..nx {
        for s in 0..ns {
            let mut m = index_tuple(s, nx, l);
            m.push(x);
            m.sort_unstable();
            w[(x * ns + s) * ny + pos[&m]] = 1.0;
        }
    }
    let s_labels: Vec<String> = (0..ns).map(|s| label(&index_tuple(s, nx, l))).collect();
    let s_alpha = if l == 1 { Alphabet::new(ns)? } else { Alphabet::with_labels(s_labels)? };
    ObliviousAVC::with_alphabets(
        Alphabet::new(nx)?,
        s_alpha,
        Alphabet::with_labels(ys.iter().map(|m| label(m)).collect())?,
        w,
        lambda_x,
        lambda_s,
    )
}

/// Kernel set of the list-`L` identities, as classified by propagation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SymClass {
    /// The identity `s = (x_1..x_L)` is the only symmetrizing kernel.
    SingletonIdentity,
    Empty,
    /// Anything else; `witness` is a symmetrizing kernel when one was found.
    Other { witness: Option<JammingKernel> },
}

/// Classifies the kernels satisfying the list-`L` identities. Kernels are
/// compared up to states with identical output laws: on the canonical
/// channel `s` and any reordering of `s` are interchangeable.
pub fn verify_sym_singleton(avc: &ObliviousAVC, l: usize) -> Result<SymClass> {
    if l == 0 {
        return Err(Error::validation("L", "must be at least 1"));
    }
    if forces_identity(avc, l) {
        return Ok(SymClass::SingletonIdentity);
    }
    let sys = build_sym_system(avc, SymMode::ObliviousList { l, nu: 1 });
    Ok(match analyze_kernel_set(&sys) {
        KernelSet::Empty => SymClass::Empty,
        KernelSet::Singleton { map } => {
            let identity = avc.ns() == map.len() && map.iter().enumerate().all(|(c, &s)| c == s);
            if identity {
                SymClass::SingletonIdentity
            } else {
                let mut probs = vec![0.0; map.len() * avc.ns()];
                for (c, &s) in map.iter().enumerate() {
                    probs[c * avc.ns() + s] = 1.0;
                }
                SymClass::Other {
                    witness: JammingKernel::new(SymMode::ObliviousList { l, nu: 1 }, avc.nx(), avc.ns(), probs).ok(),
                }
            }
        }
        KernelSet::Open { .. } => {
            let nx = avc.nx();
            let j = vec![1.0 / nx.pow(l as u32) as f64; nx.pow(l as u32)];
            let cfg = SymConfig::for_alphabet(nx);
            SymClass::Other {
                witness: max_margin_kernel(avc, &j, l, &cfg).ok().map(|k| k.0),
            }
        }
    })
}

/// A no verdict backing one of the reported thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationCertificate {
    pub notion: String,
    /// List size at which the notion fails.
    pub l: usize,
    pub p_x: Vec<f64>,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub l: usize,
    pub strong: usize,
    pub cp: usize,
    pub weak: usize,
    pub certificates: Vec<SeparationCertificate>,
    pub profile: Profile,
}

/// Thresholds and certificates of `avc` for `L' = 1..=L+1`, over `px` or a net
/// of `lambda_x`.
pub fn separation_report(avc: &ObliviousAVC, l: usize, px: Option<&[Vec<f64>]>, cfg: &SymConfig) -> Result<SeparationReport> {
    let profile = symmetrizability_profile(avc, l + 1, px, cfg)?;
    let mut certificates = Vec::new();
    for (k, name) in ["strong", "cp", "weak"].iter().enumerate() {
        let level = |e: &crate::symcheck::ProfileEntry| [e.strong, e.cp, e.weak][k];
        let Some(e) = profile.entries.iter().min_by_key(|e| level(e)) else {
            continue;
        };
        let at = level(e) + 1;
        if let Some(v) = e.verdicts.iter().find(|v| v.0 == at) {
            let verdict = [&v.1, &v.2, &v.3][k];
            if let Some(c) = verdict.certificate() {
                certificates.push(SeparationCertificate {
                    notion: name.to_string(),
                    l: at,
                    p_x: e.p_x.clone(),
                    certificate: c.clone(),
                });
            }
        }
    }
    Ok(SeparationReport {
        l,
        strong: profile.strong,
        cp: profile.cp,
        weak: profile.weak,
        certificates,
        profile,
    })
}

/// Thresholds of the canonical channel restricted to inputs in `p_set`.
pub fn separation_demo(p_set: &ConstraintPolytope, l: usize, cfg: &SymConfig) -> Result<SeparationReport> {
    let mut avc = build_canonical(p_set, l)?;
    avc.lambda_x = p_set.clone();
    separation_report(&avc, l, None, cfg)
}

/// Thresholds of the single-law canonical channel.
pub fn singleton_separation_demo(p: &[f64], l: usize, cfg: &SymConfig) -> Result<SeparationReport> {
    let avc = build_canonical_singleton(p, l)?;
    separation_report(&avc, l, Some(&[p.to_vec()]), cfg)
}

/// Binary laws with `P(1) ≤ 0.3`.
pub fn demo_p_set() -> ConstraintPolytope {
    ConstraintPolytope::new(2, vec![vec![0.0, 1.0]], vec![0.3]).expect("well-formed")
}

/// Atom net used for cp-union membership of canonical channels.
pub fn canonical_cp_net(nx: usize) -> CpNetConfig {
    CpNetConfig::for_alphabet(nx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpcone::CpDecomposition;
    use crate::rng::rng;
    use rand::Rng;

    #[test]
    fn output_alphabet_sizes() {
        let p = demo_p_set();
        assert_eq!(build_canonical(&p, 1).unwrap().ny(), 3);
        assert_eq!(build_canonical(&p, 2).unwrap().ny(), 4);
        let p3 = ConstraintPolytope::unconstrained(3);
        // |X| + 2·C(|X|,2) + C(|X|,3)
        assert_eq!(build_canonical(&p3, 2).unwrap().ny(), 3 + 6 + 1);
    }

    #[test]
    fn rows_are_point_masses() {
        let avc = build_canonical(&demo_p_set(), 2).unwrap();
        assert!(avc.is_deterministic());
    }

    #[test]
    fn empty_p_set_rejected() {
        let p = ConstraintPolytope::new(2, vec![vec![1.0, 1.0]], vec![0.5]).unwrap();
        assert!(build_canonical(&p, 1).unwrap_err().is_validation());
    }

    #[test]
    fn identity_at_l_empty_above() {
        for l in 1..=2 {
            let avc = build_canonical(&demo_p_set(), l).unwrap();
            assert_eq!(verify_sym_singleton(&avc, l).unwrap(), SymClass::SingletonIdentity);
            assert_eq!(verify_sym_singleton(&avc, l + 1).unwrap(), SymClass::Empty);
        }
        let p3 = ConstraintPolytope::unconstrained(3);
        let avc = build_canonical(&p3, 2).unwrap();
        assert_eq!(verify_sym_singleton(&avc, 2).unwrap(), SymClass::SingletonIdentity);
    }

    #[test]
    fn unary_alphabet_is_other() {
        let avc = build_canonical(&ConstraintPolytope::unconstrained(1), 1).unwrap();
        assert!(matches!(verify_sym_singleton(&avc, 1).unwrap(), SymClass::Other { .. }));
    }

    #[test]
    fn unique_decoding_set_is_p_set() {
        let avc = build_canonical(&demo_p_set(), 1).unwrap();
        let cfg = SymConfig::for_alphabet(2);
        for k in 0..=10 {
            let p1 = k as f64 / 10.0;
            let v = crate::symcheck::check_weak(&avc, &[1.0 - p1, p1], 1, &cfg).unwrap();
            assert_eq!(v.is_yes(), p1 <= 0.3 + 1e-12, "p1 = {p1}");
        }
    }

    #[test]
    fn identity_marginalization_recovers_the_cp_joint() {
        let mut r = rng(17);
        let id = JammingKernel::identity(3, 2);
        for _ in 0..50 {
            let k = r.gen_range(1..4);
            let mut w: Vec<f64> = (0..k).map(|_| r.gen::<f64>() + 0.01).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let f: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let v: Vec<f64> = (0..3).map(|_| r.gen::<f64>() + 0.01).collect();
                    let t: f64 = v.iter().sum();
                    v.into_iter().map(|x| x / t).collect()
                })
                .collect();
            let d = CpDecomposition::new(w, f, 2).unwrap();
            let ps = id.state_law(&d).unwrap();
            let j = d.joint();
            assert!(ps.iter().zip(&j).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn cp_union_is_closed_under_mixing() {
        let avc = build_canonical(&demo_p_set(), 2).unwrap();
        let mut r = rng(5);
        let draw = |r: &mut crate::rng::Rng| {
            let p1 = r.gen::<f64>() * 0.3;
            let a = r.gen::<f64>() * 0.6 * p1.min(0.3);
            // two-atom decomposition with marginal (1 − p1, p1)
            let w = 0.5;
            let f1 = vec![1.0 - (p1 - a), p1 - a];
            let f2 = vec![1.0 - (p1 + a), p1 + a];
            CpDecomposition::new(vec![w, 1.0 - w], vec![f1, f2], 2).unwrap().joint()
        };
        for _ in 0..40 {
            let (j1, j2) = (draw(&mut r), draw(&mut r));
            let t: f64 = r.gen();
            let mix: Vec<f64> = j1.iter().zip(&j2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            assert!(avc.lambda_s.contains(&j1).unwrap());
            assert!(avc.lambda_s.contains(&mix).unwrap());
        }
    }

    #[test]
    fn demo_separates_strong_from_cp() {
        let cfg = SymConfig::for_alphabet(2);
        let rep = separation_demo(&demo_p_set(), 2, &cfg).unwrap();
        assert_eq!((rep.cp, rep.weak), (2, 2));
        assert!(rep.strong < 2);
        assert!(rep.certificates.iter().any(|c| c.notion == "strong" && c.l == rep.strong + 1));
    }

    #[test]
    fn singleton_variant_separates_cp_from_weak() {
        let cfg = SymConfig::for_alphabet(2);
        let rep = singleton_separation_demo(&[0.7, 0.3], 2, &cfg).unwrap();
        assert_eq!(rep.weak, 2);
        assert!(rep.cp < 2);
        let c = rep.certificates.iter().find(|c| c.notion == "cp").unwrap();
        assert!(c.certificate.decomposition.as_ref().is_some_and(|d| d.k() > 1));
    }
}
