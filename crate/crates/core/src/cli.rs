//! Command dispatch and report assembly for the `kstab` binary.
//!
//! Every command produces a self-describing JSON report: the inputs are
//! echoed, tolerances and constant provenance are listed, and the Laplacian
//! convention is embedded.  Reports are byte-identical for identical inputs
//! and seed (object keys are sorted, parallel work is collected in order).

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{hermitian_defect, AlgebraElement, CMat, LINALG_TOL};
use crate::blowup::{
    calibrate, futaki_blowup, gluing_obstruction, inner_product_blowup, verdict, BlowupContext, Calibration, Verdict,
    DEFAULT_DELTA0, QMC_SAMPLES, VANISHING_TOL,
};
use crate::burns_simanca::{curvature_decay, solve_profile, GridSpec, RadialProfile};
use crate::error::{KstabError, Result};
use crate::models::{ModelDocument, ModelSpec, OrbitPoint};
use crate::quadrature::{geomspace, loglog_slope};
use crate::stability::{
    alldelta_check, classify, find_orbit_zero, weight, ClassifyOptions, StabilityClass, Subgroup, ZeroOptions, ZERO_TOL,
};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_DELTA_GRID: [f64; 4] = [0.01, 0.02, 0.05, 0.1];
/// Outer radius of the solved profile used for calibration and fits.
pub const PROFILE_R_MAX: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Weight,
    Classify,
    OrbitZero,
    Alldelta,
    Futaki,
    InnerProduct,
    BsSolve,
    Decay,
    Obstruction,
    Verdict,
    Sweep,
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub model_path: Option<PathBuf>,
    pub eps: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// JSON: per-factor coordinate lists, entries real or `[re, im]`.
    pub point: Option<String>,
    /// Generator index `K`, index list `K,L`, or JSON coefficient vector(s).
    pub gen: Option<String>,
    /// Dimension for `bs-solve` when no model is given.
    pub dim: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            model_path: None,
            eps: vec![],
            delta_grid: vec![],
            point: None,
            gen: None,
            dim: None,
            out: None,
            format: Format::Json,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Undetermined,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Undetermined => 2,
        }
    }
}

/// Result of a run: the JSON report and, for CSV-capable commands, a table.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub report: Value,
    pub csv: Option<String>,
}

/// One failed model check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
}

fn needs_model(c: Command) -> bool {
    !matches!(c, Command::BsSolve)
}

fn needs_blowup(c: Command) -> bool {
    matches!(
        c,
        Command::Futaki
            | Command::InnerProduct
            | Command::BsSolve
            | Command::Decay
            | Command::Obstruction
            | Command::Verdict
            | Command::Sweep
    )
}

/// Checks the parameters a command needs before anything is computed.
pub fn check_config(cfg: &RunConfig) -> Result<()> {
    let c = cfg.command;
    if needs_model(c) && cfg.model_path.is_none() {
        return Err(KstabError::Validation(format!("{} needs --model", command_name(c))));
    }
    if c == Command::BsSolve && cfg.model_path.is_none() && cfg.dim.is_none() {
        return Err(KstabError::Validation("bs-solve needs --model or --dim".into()));
    }
    if matches!(c, Command::Weight | Command::Futaki | Command::InnerProduct | Command::Sweep) && cfg.gen.is_none() {
        return Err(KstabError::Validation(format!("{} needs --gen", command_name(c))));
    }
    if let Some(e) = cfg.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(KstabError::Validation(format!("eps = {e} must lie in (0, 1)")));
    }
    if let Some(d) = cfg.delta_grid.iter().find(|d| !(**d > 0.0 && **d < DEFAULT_DELTA0)) {
        return Err(KstabError::Validation(format!("delta = {d} must lie in (0, {DEFAULT_DELTA0})")));
    }
    if c == Command::Decay && !cfg.eps.is_empty() && cfg.eps.len() < 2 {
        return Err(KstabError::Validation("decay needs at least two eps values".into()));
    }
    if cfg.format == Format::Csv && !matches!(c, Command::BsSolve | Command::Sweep | Command::Decay) {
        return Err(KstabError::Validation(format!("{} has no CSV output", command_name(c))));
    }
    Ok(())
}

pub fn command_name(c: Command) -> String {
    serde_json::to_value(c).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

/// Parses `--point`: a list of factors, each a list of real numbers or
/// `[re, im]` pairs.
pub fn parse_point(text: &str) -> Result<OrbitPoint> {
    let v: Value = serde_json::from_str(text).map_err(|e| KstabError::Schema(format!("--point: {e}")))?;
    let bad = || KstabError::Schema("--point must be a list of coordinate lists".into());
    let factors = v.as_array().ok_or_else(bad)?;
    let mut pairs = Vec::new();
    for f in factors {
        let coords = f.as_array().ok_or_else(bad)?;
        let mut row = Vec::new();
        for c in coords {
            let pair = match c {
                Value::Number(n) => [n.as_f64().ok_or_else(bad)?, 0.0],
                Value::Array(a) if a.len() == 2 => [a[0].as_f64().ok_or_else(bad)?, a[1].as_f64().ok_or_else(bad)?],
                _ => return Err(bad()),
            };
            row.push(pair);
        }
        pairs.push(row);
    }
    OrbitPoint::from_pairs(&pairs)
}

/// Parses `--gen` into algebra elements: `K`, `K,L`, `[c0, c1, ...]` or
/// `[[...], [...]]`.
pub fn parse_generators(text: &str, dim: usize) -> Result<Vec<AlgebraElement>> {
    let text = text.trim();
    let vecs: Vec<Vec<f64>> = if text.starts_with('[') {
        let v: Value = serde_json::from_str(text).map_err(|e| KstabError::Schema(format!("--gen: {e}")))?;
        if v.as_array().is_some_and(|a| a.iter().all(Value::is_array)) {
            serde_json::from_value(v)?
        } else {
            vec![serde_json::from_value(v)?]
        }
    } else {
        text.split(',')
            .map(|s| {
                let k: usize =
                    s.trim().parse().map_err(|_| KstabError::Schema(format!("--gen: bad generator index '{s}'")))?;
                if k >= dim {
                    return Err(KstabError::Validation(format!("generator index {k} out of range (dimension {dim})")));
                }
                Ok((0..dim).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            })
            .collect::<Result<_>>()?
    };
    vecs.into_iter()
        .map(|c| {
            if c.len() != dim {
                return Err(KstabError::Validation(format!(
                    "--gen: {} coefficients given, algebra has dimension {dim}",
                    c.len()
                )));
            }
            Ok(AlgebraElement(DVector::from_vec(c)))
        })
        .collect()
}

/// Runs every model check and lists each failure.
pub fn validate_model(path: &Path) -> Vec<Diagnostic> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return vec![Diagnostic { code: "E_IO", message: format!("{}: {e}", path.display()) }],
    };
    match ModelDocument::parse(&text) {
        Ok(doc) => validate_document(&doc),
        Err(e) => vec![Diagnostic { code: "E_SCHEMA", message: e.to_string() }],
    }
}

pub fn validate_document(doc: &ModelDocument) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |code, message: String| out.push(Diagnostic { code, message });
    for (i, f) in doc.factors.iter().enumerate() {
        if f.dim == 0 || !(f.scale > 0.0) {
            push("E_VALIDATION", format!("factor {i}: dimension must be >= 1 and scale > 0"));
        }
    }
    let m: usize = doc.factors.iter().map(|f| f.dim).sum();
    if m <= 2 {
        push(
            "E_DIMENSION",
            format!("total dimension m = {m}: blowup commands need m > 2; only stability commands will run"),
        );
    }
    let gens = match doc.generator_blocks() {
        Ok(g) => g,
        Err(e) => {
            push("E_SCHEMA", e.to_string());
            return out;
        }
    };
    let mut shapes_ok = true;
    for (k, g) in gens.iter().enumerate() {
        if g.blocks.len() != doc.factors.len() {
            push("E_VALIDATION", format!("generator {k}: {} blocks for {} factors", g.blocks.len(), doc.factors.len()));
            shapes_ok = false;
            continue;
        }
        for (fi, (b, f)) in g.blocks.iter().zip(&doc.factors).enumerate() {
            if b.nrows() != f.dim + 1 {
                push("E_VALIDATION", format!("generator {k}, factor {fi}: expected a {0}x{0} block", f.dim + 1));
                shapes_ok = false;
            } else if hermitian_defect(b) > LINALG_TOL {
                push(
                    "E_HERMITIAN",
                    format!(
                        "generator {k}, factor {fi}: matrix is not Hermitian (defect {:.3e}); use A = A^* blocks",
                        hermitian_defect(b)
                    ),
                );
                shapes_ok = false;
            }
        }
    }
    for &t in &doc.torus {
        if t >= gens.len() {
            push("E_TORUS", format!("torus index {t} out of range ({} generators)", gens.len()));
            shapes_ok = false;
        }
    }
    if !shapes_ok {
        return out;
    }
    let mut torus_ok = true;
    for (i, &a) in doc.torus.iter().enumerate() {
        for &b in &doc.torus[i + 1..] {
            let defect: f64 =
                gens[a].blocks.iter().zip(&gens[b].blocks).map(|(x, y)| commutator(x, y).norm()).fold(0.0, f64::max);
            if defect > LINALG_TOL {
                torus_ok = false;
                push("E_TORUS", format!("torus generators {a} and {b} do not commute (defect {defect:.3e})"));
            }
        }
    }
    match ModelSpec::from_document(doc) {
        Ok(model) => {
            let gram = model.algebra.gram().clone();
            if gram.nrows() > 0 && gram.cholesky().is_none() {
                push(
                    "E_GRAM",
                    "gram matrix is not positive definite: some generator combination has zero Hamiltonian".into(),
                );
            }
        }
        // a non-commuting torus is already listed
        Err(e) if torus_ok => push(e.code(), e.to_string()),
        Err(_) => {}
    }
    out
}

fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

struct Inputs {
    model: Option<ModelSpec>,
    point: Option<OrbitPoint>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let model = match &cfg.model_path {
        Some(path) => Some(ModelSpec::load(path)?),
        None => None,
    };
    let point = match (&cfg.point, &model) {
        (Some(text), Some(m)) => {
            let p = parse_point(text)?;
            m.check_point(&p)?;
            Some(p)
        }
        (Some(text), None) => Some(parse_point(text)?),
        (None, Some(m)) => m.point.clone(),
        (None, None) => None,
    };
    Ok(Inputs { model, point })
}

fn require<'a, T>(x: &'a Option<T>, what: &str) -> Result<&'a T> {
    x.as_ref().ok_or_else(|| KstabError::Validation(format!("{what} is required (the model ships none)")))
}

fn echo(cfg: &RunConfig, inputs: &Inputs) -> Value {
    json!({
        "model_path": cfg.model_path.as_ref().map(|p| p.display().to_string()),
        "model_name": inputs.model.as_ref().and_then(|m| m.name.clone()),
        "eps": cfg.eps,
        "delta_grid": cfg.delta_grid,
        "point": inputs.point.as_ref().map(OrbitPoint::to_pairs),
        "gen": cfg.gen,
        "dim": cfg.dim,
        "format": cfg.format,
        "seed": cfg.seed,
    })
}

fn tolerances() -> Value {
    json!({
        "orbit_zero_residual": ZERO_TOL,
        "vanishing": VANISHING_TOL,
        "ball_quadrature_rel": 1e-10,
        "profile_quadrature_rel": 1e-14,
        "qmc_samples": QMC_SAMPLES,
        "linear_algebra": LINALG_TOL,
    })
}

fn eps_or_default(cfg: &RunConfig) -> f64 {
    cfg.eps.first().copied().unwrap_or(DEFAULT_EPS)
}

fn delta_grid(cfg: &RunConfig) -> Vec<f64> {
    if cfg.delta_grid.is_empty() {
        DEFAULT_DELTA_GRID.to_vec()
    } else {
        cfg.delta_grid.clone()
    }
}

fn classify_options(cfg: &RunConfig) -> ClassifyOptions {
    ClassifyOptions { zero: ZeroOptions { seed: cfg.seed, ..ZeroOptions::default() }, ..ClassifyOptions::default() }
}

fn profile_for(m: usize) -> Result<(RadialProfile, Calibration)> {
    let profile = solve_profile(m, PROFILE_R_MAX, GridSpec::default())?;
    let cal = calibrate(&profile)?;
    Ok((profile, cal))
}

fn constants(cal: &Calibration) -> Value {
    json!({
        "laplacian_factor": {
            "value": cal.laplacian_factor,
            "source": "calibrated against glued-metric volume, total scalar curvature and lift integrals on P^m",
        },
        "volume_identity_error": cal.volume_error,
        "scalar_identity_error": cal.scalar_error,
    })
}

fn blowup_context(model: &ModelSpec, p: &OrbitPoint, eps: f64, cal: &Calibration) -> Result<BlowupContext> {
    Ok(BlowupContext::new(model, p, eps)?.with_calibration(cal))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

/// Runs one command.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    check_config(cfg)?;
    let inputs = if cfg.command == Command::Validate { Inputs { model: None, point: None } } else { load_inputs(cfg)? };
    if needs_blowup(cfg.command) {
        if let Some(m) = &inputs.model {
            if cfg.command != Command::BsSolve || cfg.dim.is_none() {
                m.require_blowup_dimension()?;
            }
        }
    }
    let mut status = Status::Ok;
    let mut csv = None;
    let mut pi_convention = Value::Null;
    let mut extra = serde_json::Map::new();
    let result: Value = match cfg.command {
        Command::Validate => {
            let path = cfg.model_path.as_ref().expect("checked");
            let diags = validate_model(path);
            json!({ "diagnostics": diags, "valid": diags.is_empty() })
        }
        Command::Weight => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let xs = parse_generators(cfg.gen.as_deref().expect("checked"), model.algebra.dim())?;
            let reports = xs.iter().map(|xi| weight(model, p, xi)).collect::<Result<Vec<_>>>()?;
            json!({ "weights": reports })
        }
        Command::Classify => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let v = classify(model, p, &classify_options(cfg))?;
            if v.class == StabilityClass::Undetermined {
                status = Status::Undetermined;
            }
            to_value(&v)
        }
        Command::OrbitZero => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let delta = delta_grid(cfg)[0];
            let full = nalgebra::DMatrix::identity(model.algebra.dim(), model.algebra.dim());
            let subgroup = if model.action_min_singular(p, &full) > crate::stability::STABILIZER_TOL {
                Subgroup::Full
            } else {
                Subgroup::TPerp
            };
            let s = find_orbit_zero(model, p, delta, subgroup.clone(), &classify_options(cfg).zero)?;
            if s.solution.is_none() {
                status = Status::Undetermined;
            }
            json!({ "delta": delta, "subgroup": subgroup, "search": s })
        }
        Command::Alldelta => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let r = alldelta_check(model, p, &delta_grid(cfg), DEFAULT_DELTA0, &classify_options(cfg))?;
            if !r.constant {
                status = Status::Undetermined;
            }
            to_value(&r)
        }
        Command::Futaki => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let (_, cal) = profile_for(model.total_dim())?;
            let ctx = blowup_context(model, p, eps_or_default(cfg), &cal)?;
            pi_convention = to_value(&ctx.convention);
            extra.insert("constants".into(), constants(&cal));
            let xs = parse_generators(cfg.gen.as_deref().expect("checked"), model.algebra.dim())?;
            let ex = xs.iter().map(|xi| futaki_blowup(&ctx, xi, None)).collect::<Result<Vec<_>>>()?;
            json!({ "expansions": ex })
        }
        Command::InnerProduct => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let (v, w) = pair(cfg, model)?;
            let (profile, cal) = profile_for(model.total_dim())?;
            let ctx = blowup_context(model, p, eps_or_default(cfg), &cal)?;
            pi_convention = to_value(&ctx.convention);
            extra.insert("constants".into(), constants(&cal));
            to_value(&inner_product_blowup(&ctx, &profile, &v, &w)?)
        }
        Command::BsSolve => {
            let m = match (&inputs.model, cfg.dim) {
                (_, Some(d)) => d,
                (Some(model), None) => model.total_dim(),
                (None, None) => unreachable!("checked"),
            };
            let profile = solve_profile(m, PROFILE_R_MAX, GridSpec::default())?;
            csv = Some(profile.to_csv());
            json!({
                "header": profile.header(),
                "grid": { "r_min": GridSpec::default().r_min, "r_max": PROFILE_R_MAX, "samples": GridSpec::default().samples },
            })
        }
        Command::Decay => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let eps = if cfg.eps.is_empty() { vec![0.1, 0.05, 0.02, 0.01] } else { cfg.eps.clone() };
            let profile = solve_profile(model.total_dim(), PROFILE_R_MAX, GridSpec::default())?;
            let r = curvature_decay(model, p, &eps, &profile)?;
            let mut table = String::from("eps,r_eps,annulus_sup,inner_residual\n");
            for s in &r.samples {
                table.push_str(&format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    s.eps, s.r_eps, s.annulus_sup, s.inner_residual
                ));
            }
            csv = Some(table);
            to_value(&r)
        }
        Command::Obstruction => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let (profile, cal) = profile_for(model.total_dim())?;
            let ctx = blowup_context(model, p, eps_or_default(cfg), &cal)?;
            pi_convention = to_value(&ctx.convention);
            extra.insert("constants".into(), constants(&cal));
            extra.insert("profile".into(), to_value(&profile.header()));
            to_value(&gluing_obstruction(&ctx, profile.asymptotics.d1)?)
        }
        Command::Verdict => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let (_, cal) = profile_for(model.total_dim())?;
            let ctx = blowup_context(model, p, eps_or_default(cfg), &cal)?;
            pi_convention = to_value(&ctx.convention);
            extra.insert("constants".into(), constants(&cal));
            let r = verdict(&ctx, &delta_grid(cfg), &classify_options(cfg))?;
            if r.verdict == Verdict::Undetermined {
                status = Status::Undetermined;
            }
            to_value(&r)
        }
        Command::Sweep => {
            let model = require(&inputs.model, "model")?;
            let p = require(&inputs.point, "--point")?;
            let eps = if cfg.eps.len() >= 2 { cfg.eps.clone() } else { geomspace(0.02, 0.1, 6) };
            let xs = parse_generators(cfg.gen.as_deref().expect("checked"), model.algebra.dim())?;
            let (profile, cal) = profile_for(model.total_dim())?;
            let base = blowup_context(model, p, eps[0], &cal)?;
            pi_convention = to_value(&base.convention);
            extra.insert("constants".into(), constants(&cal));
            let (quantity, values): (&str, Vec<f64>) = match xs.as_slice() {
                [v] => (
                    "futaki_blowup",
                    eps.iter()
                        .map(|&e| Ok(futaki_blowup(&base.at_eps(e)?, v, None)?.fut_blowup))
                        .collect::<Result<_>>()?,
                ),
                [v, w] => (
                    "inner_product",
                    eps.iter()
                        .map(|&e| Ok(inner_product_blowup(&base.at_eps(e)?, &profile, v, w)?.value))
                        .collect::<Result<_>>()?,
                ),
                _ => return Err(KstabError::Validation("sweep takes one or two generators".into())),
            };
            let mut table = String::from("eps,value\n");
            for (e, v) in eps.iter().zip(&values) {
                table.push_str(&format!("{e:.17e},{v:.17e}\n"));
            }
            csv = Some(table);
            let slope = if values.iter().all(|v| *v != 0.0) { Some(loglog_slope(&eps, &values)) } else { None };
            json!({
                "quantity": quantity,
                "samples": eps.iter().zip(&values).map(|(e, v)| json!({"eps": e, "value": v})).collect::<Vec<_>>(),
                "fitted_slope": slope,
                "m": model.total_dim(),
            })
        }
    };
    let mut report = serde_json::Map::new();
    report.insert("tool".into(), json!("kstab"));
    report.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    report.insert("command".into(), json!(command_name(cfg.command)));
    report.insert("inputs".into(), echo(cfg, &inputs));
    report.insert("tolerances".into(), tolerances());
    report.insert(
        "pi_convention".into(),
        if pi_convention.is_null() { json!({ "state": "not_applicable" }) } else { pi_convention },
    );
    report.insert("status".into(), json!(if status == Status::Ok { "ok" } else { "undetermined" }));
    report.insert("result".into(), result);
    for (k, v) in extra {
        report.insert(k, v);
    }
    Ok(Outcome { status, report: Value::Object(report), csv })
}

fn pair(cfg: &RunConfig, model: &ModelSpec) -> Result<(AlgebraElement, AlgebraElement)> {
    let mut xs = parse_generators(cfg.gen.as_deref().expect("checked"), model.algebra.dim())?;
    if xs.len() != 2 {
        return Err(KstabError::Validation("inner-product needs two generators (--gen K,L)".into()));
    }
    let w = xs.pop().expect("two");
    let v = xs.pop().expect("two");
    Ok((v, w))
}

/// Machine-readable error record.
pub fn error_report(cfg: Option<&RunConfig>, e: &KstabError) -> Value {
    json!({
        "tool": "kstab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cfg.map(|c| command_name(c.command)),
        "status": "error",
        "error": { "code": e.code(), "message": e.to_string() },
    })
}

/// Serializes a report deterministically.
pub fn render(report: &Value) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_specs_parse() {
        let xs = parse_generators("0,2", 3).unwrap();
        assert_eq!(xs[1].0.as_slice(), &[0.0, 0.0, 1.0]);
        let xs = parse_generators("[1, 2, 3]", 3).unwrap();
        assert_eq!(xs.len(), 1);
        let xs = parse_generators("[[1, 0, 0], [0, 1, 0]]", 3).unwrap();
        assert_eq!(xs.len(), 2);
        assert!(parse_generators("5", 3).is_err());
        assert!(parse_generators("[1, 2]", 3).is_err());
    }

    #[test]
    fn points_accept_real_and_complex_entries() {
        let p = parse_point("[[1, [0, 1]], [0, 0, 2]]").unwrap();
        assert_eq!(p.coords.len(), 2);
        assert!((p.coords[0][1].im - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(parse_point("[1, 2]").is_err());
    }

    #[test]
    fn config_is_checked_before_running() {
        let mut cfg = RunConfig::new(Command::Futaki);
        assert!(check_config(&cfg).is_err());
        cfg.model_path = Some("m.json".into());
        assert!(check_config(&cfg).is_err());
        cfg.gen = Some("0".into());
        assert!(check_config(&cfg).is_ok());
        cfg.eps = vec![1.5];
        assert!(check_config(&cfg).is_err());
        let mut cfg = RunConfig::new(Command::Classify);
        cfg.model_path = Some("m.json".into());
        cfg.format = Format::Csv;
        assert!(check_config(&cfg).is_err());
    }
}
