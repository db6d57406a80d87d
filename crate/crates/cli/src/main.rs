//! `avc`: symmetrizability checks, capacity estimates, canonical channels and
//! jamming simulations for finite oblivious AVCs.
//!
//! Every command prints a JSON report on stdout. `avc report` re-emits a saved
//! report as JSON or as a flat CSV projection.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when an enumeration budget
//! is exceeded, 1 otherwise.

mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avc_core::attack::{iid_state_attack, AttackConfig, CpAttackPlan};
use avc_core::canonical::{
    build_canonical, build_canonical_singleton, demo_p_set, separation_report, verify_sym_singleton, SymClass,
};
use avc_core::capacity::{capacity_lower_bound, SearchConfig};
use avc_core::channel::{load_spec, save_spec, ObliviousAVC};
use avc_core::codegen::{extract_timeshare_subcode, load_codebook, save_codebook};
use avc_core::decode::{monte_carlo_error, ListDecoder, TypicalityDecoder};
use avc_core::probkit::{CondDist, ConstraintPolytope};
use avc_core::symcheck::{
    check_cp, check_strong, check_weak, input_net, symmetrizability_profile, JammingKernel, SymConfig, SymVerdict,
};
use avc_core::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "avc", version, about = "Experiments on finite oblivious arbitrarily varying channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Notion {
    Weak,
    Cp,
    Strong,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKind {
    /// cp-symmetrization attack built from the codebook.
    Cp,
    /// Independent states drawn from `--state-law`.
    Iid,
    /// The all-zero state sequence.
    Zero,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecoderKind {
    Typicality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Decide one symmetrizability notion at list size L.
    CheckSym {
        spec: PathBuf,
        #[arg(long, value_enum)]
        mode: Notion,
        #[arg(long = "L")]
        l: usize,
        /// Input law as comma-separated probabilities; a net of lambda_x when omitted.
        #[arg(long = "Px")]
        px: Option<String>,
        /// Resolution of the coupling, decomposition and input nets.
        #[arg(long)]
        net: Option<f64>,
    },
    /// Symmetrizability thresholds for L' = 1..=Lmax.
    Profile {
        spec: PathBuf,
        #[arg(long = "Lmax")]
        l_max: usize,
        /// Input laws separated by ';'; a net of lambda_x when omitted.
        #[arg(long = "Px")]
        px: Option<String>,
        #[arg(long)]
        net: Option<f64>,
    },
    /// Net estimate of the L-list capacity.
    Capacity {
        spec: PathBuf,
        #[arg(long = "L")]
        l: usize,
        /// Resolution of the input and decomposition nets.
        #[arg(long, default_value_t = 0.1)]
        grid: f64,
        /// Largest number of time-sharing blocks.
        #[arg(long, default_value_t = 1)]
        k_max: usize,
    },
    /// Build a canonical channel and report its separation thresholds.
    Canonical {
        /// `demo`, `singleton:p0,p1,..`, or a polytope `{"A": .., "Gamma": ..}` given inline or as a file.
        #[arg(long = "Pset", default_value = "demo")]
        p_set: String,
        #[arg(long = "L")]
        l: usize,
        /// Where to write the channel spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo error of a decoder under an attack.
    Simulate {
        spec: PathBuf,
        codebook: PathBuf,
        #[arg(long, value_enum, default_value = "cp")]
        attack: AttackKind,
        #[arg(long, value_enum, default_value = "typicality")]
        decoder: DecoderKind,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "L", default_value_t = 1)]
        l: usize,
        /// Typicality slack of the decoder.
        #[arg(long, default_value_t = 0.2)]
        eta: f64,
        /// Resolution of the decoder's state-type net.
        #[arg(long, default_value_t = 0.1)]
        s_net: f64,
        /// State law for `--attack iid`, comma-separated.
        #[arg(long)]
        state_law: Option<String>,
    },
    /// Time-sharing constant-composition subcode.
    ExtractSubcode {
        codebook: PathBuf,
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_min: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a saved report; reads stdin when the path is `-`.
    Report {
        #[arg(default_value = "-")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn parse_probs(text: &str, field: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| invalid(field, format!("{t:?} is not a number")))
        })
        .collect()
}

fn sym_config(avc: &ObliviousAVC, net: Option<f64>) -> Result<SymConfig> {
    let mut cfg = SymConfig::for_alphabet(avc.nx());
    if let Some(r) = net {
        if !(r > 0.0 && r <= 1.0) {
            return Err(invalid("net", "must lie in (0, 1]"));
        }
        cfg.net_resolution = r;
        cfg.px_resolution = r;
    }
    Ok(cfg)
}

fn input_laws(avc: &ObliviousAVC, px: Option<&str>, cfg: &SymConfig, sep: char) -> Result<Vec<Vec<f64>>> {
    match px {
        Some(t) => t.split(sep).map(|p| parse_probs(p, "Px")).collect(),
        None => input_net(avc, cfg.px_resolution),
    }
}

fn answer(v: &SymVerdict) -> &'static str {
    match v.answer {
        avc_core::symcheck::Answer::Yes { .. } => "yes",
        avc_core::symcheck::Answer::YesUpToNet { .. } => "yes-up-to-net",
        avc_core::symcheck::Answer::No { .. } => "no",
    }
}

fn is_identity(k: &JammingKernel, nx: usize, l: usize) -> bool {
    let id = JammingKernel::identity(nx, l);
    k.mode == id.mode && k.ns == id.ns && k.probs == id.probs
}

fn check_sym(spec: &Path, mode: Notion, l: usize, px: Option<&str>, net: Option<f64>) -> Result<Value> {
    let avc = load_spec(spec)?;
    let cfg = sym_config(&avc, net)?;
    let laws = input_laws(&avc, px, &cfg, ';')?;
    let mut results = Vec::new();
    let mut rows = Vec::new();
    for p in &laws {
        let v = match mode {
            Notion::Weak => check_weak(&avc, p, l, &cfg)?,
            Notion::Cp => check_cp(&avc, p, l, &cfg)?,
            Notion::Strong => check_strong(&avc, p, l, &cfg)?,
        };
        let identity = v.witness().is_some_and(|k| is_identity(k, avc.nx(), l));
        rows.push(json!([p, answer(&v), identity]));
        results.push(json!({
            "p_x": p,
            "answer": answer(&v),
            "identity_witness": identity,
            "verdict": v,
        }));
    }
    let all = results.iter().all(|r| r["answer"] != "no");
    Ok(json!({
        "command": "check-sym",
        "mode": notion_name(mode),
        "L": l,
        "answer": if all { "yes" } else { "no" },
        "identity_witness": !results.is_empty() && results.iter().all(|r| r["identity_witness"] == true),
        "results": results,
        "table": { "columns": ["p_x", "answer", "identity_witness"], "rows": rows },
    }))
}

fn notion_name(n: Notion) -> &'static str {
    match n {
        Notion::Weak => "weak",
        Notion::Cp => "cp",
        Notion::Strong => "strong",
    }
}

fn profile(spec: &Path, l_max: usize, px: Option<&str>, net: Option<f64>) -> Result<Value> {
    let avc = load_spec(spec)?;
    let cfg = sym_config(&avc, net)?;
    let laws = px.map(|t| input_laws(&avc, Some(t), &cfg, ';')).transpose()?;
    let p = symmetrizability_profile(&avc, l_max, laws.as_deref(), &cfg)?;
    let rows: Vec<Value> = p.entries.iter().map(|e| json!([e.p_x, e.strong, e.cp, e.weak])).collect();
    Ok(json!({
        "command": "profile",
        "L_max": l_max,
        "strong": p.strong,
        "cp": p.cp,
        "weak": p.weak,
        "table": { "columns": ["p_x", "strong", "cp", "weak"], "rows": rows },
    }))
}

fn capacity(spec: &Path, l: usize, grid: f64, k_max: usize) -> Result<Value> {
    let avc = load_spec(spec)?;
    if !(grid > 0.0 && grid <= 1.0) {
        return Err(invalid("grid", "must lie in (0, 1]"));
    }
    if k_max == 0 {
        return Err(invalid("k-max", "must be at least 1"));
    }
    let mut cfg = SearchConfig::for_alphabet(avc.nx());
    cfg.resolution = grid;
    cfg.k_max = k_max;
    let est = capacity_lower_bound(&avc, l, &cfg)?;
    Ok(json!({
        "command": "capacity",
        "L": l,
        "grid": grid,
        "value": est.value,
        "all_symmetrizable": est.all_symmetrizable,
        "evaluated": est.evaluated,
        "admissible": est.admissible,
        "decomposition": est.decomposition,
        "kernel": est.kernel,
    }))
}

enum PSet {
    Polytope(ConstraintPolytope),
    Singleton(Vec<f64>),
}

fn parse_p_set(text: &str) -> Result<PSet> {
    if text == "demo" {
        return Ok(PSet::Polytope(demo_p_set()));
    }
    if let Some(p) = text.strip_prefix("singleton:") {
        return Ok(PSet::Singleton(parse_probs(p, "Pset")?));
    }
    let body = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        std::fs::read_to_string(text)?
    };
    let v: Value = serde_json::from_str(&body)?;
    let rows = |key: &str| -> Result<Vec<Vec<f64>>> {
        serde_json::from_value(v.get(key).cloned().ok_or_else(|| invalid(&format!("Pset.{key}"), "missing"))?)
            .map_err(|e| invalid(&format!("Pset.{key}"), e.to_string()))
    };
    let a = rows("A")?;
    let gamma: Vec<f64> = serde_json::from_value(v.get("Gamma").cloned().ok_or_else(|| invalid("Pset.Gamma", "missing"))?)
        .map_err(|e| invalid("Pset.Gamma", e.to_string()))?;
    let dim = match v.get("dim").and_then(Value::as_u64) {
        Some(d) => d as usize,
        None => a.first().map(Vec::len).ok_or_else(|| invalid("Pset.dim", "needed when A is empty"))?,
    };
    Ok(PSet::Polytope(ConstraintPolytope::new(dim, a, gamma)?))
}

fn class_name(c: &SymClass) -> &'static str {
    match c {
        SymClass::SingletonIdentity => "singleton-identity",
        SymClass::Empty => "empty",
        SymClass::Other { .. } => "other",
    }
}

fn canonical(p_set: &str, l: usize, out: Option<&Path>) -> Result<Value> {
    let (avc, px) = match parse_p_set(p_set)? {
        PSet::Polytope(p) => {
            let mut avc = build_canonical(&p, l)?;
            avc.lambda_x = p;
            (avc, None)
        }
        PSet::Singleton(p) => (build_canonical_singleton(&p, l)?, Some(vec![p])),
    };
    let at = verify_sym_singleton(&avc, l)?;
    let above = verify_sym_singleton(&avc, l + 1)?;
    let rep = separation_report(&avc, l, px.as_deref(), &SymConfig::for_alphabet(avc.nx()))?;
    if let Some(path) = out {
        save_spec(&avc, path)?;
    }
    Ok(json!({
        "command": "canonical",
        "L": l,
        "spec": out,
        "sizes": { "X": avc.nx(), "S": avc.ns(), "Y": avc.ny() },
        "kernel_set_at_L": class_name(&at),
        "kernel_set_above_L": class_name(&above),
        "strong": rep.strong,
        "cp": rep.cp,
        "weak": rep.weak,
        "certificates": rep.certificates,
    }))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    spec: &Path,
    codebook: &Path,
    attack: AttackKind,
    _decoder: DecoderKind,
    trials: usize,
    seed: Option<u64>,
    l: usize,
    eta: f64,
    s_net: f64,
    state_law: Option<&str>,
) -> Result<Value> {
    let seed = seed.ok_or_else(|| invalid("seed", "simulate is stochastic and requires --seed"))?;
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let avc = load_spec(spec)?;
    let code = load_codebook(codebook)?;
    let dec = TypicalityDecoder::new(&avc, &code, eta, l, s_net)?;
    let u_seq: Vec<usize> = (0..code.n).map(|j| code.u_at(j)).collect();
    let mut plan_info = Value::Null;
    let est = match attack {
        AttackKind::Cp => {
            let plan = CpAttackPlan::new(&avc, &code, l, &AttackConfig::for_alphabet(avc.nx()))?;
            plan_info = json!({
                "pool": plan.pool.len(),
                "projection_distance": plan.projection_distance,
                "margins": plan.margins,
                "warnings": plan.warnings,
            });
            let run = |s: u64| plan.run(&avc, &code, s).map(|t| t.s_seq);
            monte_carlo_error(&avc, &code, &dec, &run, trials, seed)?
        }
        AttackKind::Iid => {
            let law = parse_probs(state_law.ok_or_else(|| invalid("state-law", "required by --attack iid"))?, "state-law")?;
            if law.len() != avc.ns() {
                return Err(invalid("state-law", format!("needs |S| = {} entries", avc.ns())));
            }
            let kernel = CondDist::new(code.nu(), avc.ns(), law.repeat(code.nu()))?;
            let run = |s: u64| iid_state_attack(&kernel, &u_seq, s);
            monte_carlo_error(&avc, &code, &dec, &run, trials, seed)?
        }
        AttackKind::Zero => {
            let run = |_: u64| Ok(vec![0; code.n]);
            monte_carlo_error(&avc, &code, &dec, &run, trials, seed)?
        }
    };
    Ok(json!({
        "command": "simulate",
        "seed": seed,
        "trials": trials,
        "L": l,
        "attack": attack_name(attack),
        "decoder": "typicality",
        "error": est,
        "list_violations": dec.violations().len(),
        "plan": plan_info,
        "list_size": dec.list_size(),
    }))
}

fn attack_name(a: AttackKind) -> &'static str {
    match a {
        AttackKind::Cp => "cp",
        AttackKind::Iid => "iid",
        AttackKind::Zero => "zero",
    }
}

fn extract_subcode(codebook: &Path, zeta: f64, lambda: f64, theta_min: f64, out: Option<&Path>) -> Result<Value> {
    let code = load_codebook(codebook)?;
    let ex = extract_timeshare_subcode(&code, zeta, lambda, theta_min)?;
    if let Some(path) = out {
        save_codebook(&ex.subcode, path)?;
    }
    Ok(json!({
        "command": "extract-subcode",
        "kept": ex.indices.len(),
        "of": code.m(),
        "indices": ex.indices,
        "u_seq": ex.u_seq,
        "column_types": ex.column_types,
        "compositions": ex.compositions,
        "theta": ex.theta,
        "theta_floor": ex.theta_floor,
        "meets_floor": ex.meets_floor,
    }))
}

fn report(input: &Path, format: Format) -> Result<String> {
    let text = if input == Path::new("-") {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(input)?
    };
    let v: Value = serde_json::from_str(&text)?;
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&v)? + "\n",
        Format::Csv => table::to_csv(&v),
    })
}

fn run(cli: Cli) -> Result<String> {
    let value = match cli.command {
        Command::CheckSym { spec, mode, l, px, net } => check_sym(&spec, mode, l, px.as_deref(), net)?,
        Command::Profile { spec, l_max, px, net } => profile(&spec, l_max, px.as_deref(), net)?,
        Command::Capacity { spec, l, grid, k_max } => capacity(&spec, l, grid, k_max)?,
        Command::Canonical { p_set, l, out } => canonical(&p_set, l, out.as_deref())?,
        Command::Simulate {
            spec,
            codebook,
            attack,
            decoder,
            trials,
            seed,
            l,
            eta,
            s_net,
            state_law,
        } => simulate(&spec, &codebook, attack, decoder, trials, seed, l, eta, s_net, state_law.as_deref())?,
        Command::ExtractSubcode {
            codebook,
            zeta,
            lambda,
            theta_min,
            out,
        } => extract_subcode(&codebook, zeta, lambda, theta_min, out.as_deref())?,
        Command::Report { input, format } => return report(&input, format),
    };
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn exit_code(e: &Error) -> u8 {
    if e.is_budget() {
        3
    } else if e.is_validation() || matches!(e, Error::Io(_) | Error::UnsupportedConstraint(_)) {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
