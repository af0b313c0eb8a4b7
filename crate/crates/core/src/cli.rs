//! Batch driver behind the `vopskit` binary: config parsing, serialization
//! and the report-producing commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dashu_ratio::RBig;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::index::MultiIndex;
use crate::koornwinder::{build_koornwinder_level, leading_transform, unit_lower_defect, KoornwinderSpec};
use crate::matrix::{leading_principal_minors, rank, Matrix};
use crate::moments::{default_window, moment_matrix, simplex_moment_exact, MomentFunctional, Moments, WeightSpec};
use crate::poly::{apply, BiPoly, PolyVec};
use crate::quadrature::{Affine, AffineFactor, Density, GenericWeight, QuadratureConfig};
use crate::relations::{
    agcl_residual, blcl_corrected_residual, compute_relation_set, polyvec_distance, recurrence_step, relation_residual,
    rrc_residual, verify_blcl, RelationOptions, RelationSet,
};
use crate::scalar::{parse_rational, serialization_digits, Backend, Scalar};
use crate::vops::{build_level_determinant, build_levels, monic_defect, verify_orthogonality, VopsLevel};

pub const MAX_DEGREE: usize = 12;
pub const DEFAULT_PRECISION: u32 = 50;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const CONSTRUCTION: i32 = 3;
    pub const VERIFICATION: i32 = 4;
    pub const RANK: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("construction failed: {0}")]
    Construction(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => exit::PARSE,
            CliError::Construction(_) => exit::CONSTRUCTION,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

// ------------------------------------------------------------------ config

/// A rational given as a string (`"1/4"`, `"2"`) or a JSON integer.
#[derive(Clone, Debug, Deserialize)]
#[serde(try_from = "Value")]
pub enum Num {
    Int(i64),
    Str(String),
}

impl TryFrom<Value> for Num {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        match v {
            Value::String(s) => Ok(Num::Str(s)),
            Value::Number(n) => n
                .as_i64()
                .map(Num::Int)
                .ok_or_else(|| format!("{n} is not an integer; write rationals as strings such as \"1/4\"")),
            other => Err(format!("expected a rational string or an integer, got {other}")),
        }
    }
}

impl Num {
    pub fn rational(&self) -> CliResult<RBig> {
        match self {
            Num::Int(v) => Ok(RBig::from(*v)),
            Num::Str(s) => parse_rational(s).map_err(|e| CliError::Config(e.to_string())),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightConfig {
    ProductChebyshev {
        a: Num,
        b: Num,
        c: Num,
        d: Num,
    },
    TriangleKoornwinder {
        alpha: u32,
        beta: u32,
        gamma: u32,
        a: Num,
        b: Num,
        c: Num,
        d: Num,
        #[serde(default)]
        tau: Option<Num>,
    },
    ShiftedSimplex {
        alpha: u32,
        beta: u32,
        gamma: u32,
        a: Num,
        b: Num,
    },
    /// `scale · Π (c0 + c1·x₁ + c2·x₂)^e` on `x1_range`, between the affine
    /// bounds `lower = (c0, c1)` and `upper = (c0, c1)` in `x₁`.
    Generic {
        x1_range: [Num; 2],
        lower: [Num; 2],
        upper: [Num; 2],
        #[serde(default)]
        scale: Option<Num>,
        factors: Vec<FactorConfig>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    pub form: [Num; 3],
    pub exponent: Num,
}

impl WeightConfig {
    pub fn to_spec(&self) -> CliResult<WeightSpec> {
        let spec = match self {
            WeightConfig::ProductChebyshev { a, b, c, d } => {
                WeightSpec::ProductChebyshev { a: a.rational()?, b: b.rational()?, c: c.rational()?, d: d.rational()? }
            }
            WeightConfig::TriangleKoornwinder { alpha, beta, gamma, a, b, c, d, tau } => {
                WeightSpec::TriangleKoornwinder {
                    alpha: *alpha,
                    beta: *beta,
                    gamma: *gamma,
                    a: a.rational()?,
                    b: b.rational()?,
                    c: c.rational()?,
                    d: d.rational()?,
                    tau: tau.as_ref().map_or(Ok(RBig::ONE), Num::rational)?,
                }
            }
            WeightConfig::ShiftedSimplex { alpha, beta, gamma, a, b } => WeightSpec::ShiftedSimplex {
                alpha: *alpha,
                beta: *beta,
                gamma: *gamma,
                a: a.rational()?,
                b: b.rational()?,
            },
            WeightConfig::Generic { x1_range, lower, upper, scale, factors } => WeightSpec::Generic(GenericWeight {
                x1_range: (x1_range[0].rational()?, x1_range[1].rational()?),
                lower: Affine::in_x1(lower[0].rational()?, lower[1].rational()?),
                upper: Affine::in_x1(upper[0].rational()?, upper[1].rational()?),
                density: Density::Factors {
                    scale: scale.as_ref().map_or(Ok(RBig::ONE), Num::rational)?,
                    factors: factors
                        .iter()
                        .map(|f| {
                            Ok(AffineFactor {
                                form: Affine::new(f.form[0].rational()?, f.form[1].rational()?, f.form[2].rational()?),
                                exponent: f.exponent.rational()?,
                            })
                        })
                        .collect::<CliResult<_>>()?,
                },
            }),
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Exact,
    #[default]
    Float,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Vops,
    Lambda,
    Upsilon,
    Relations,
    Recurrence,
    Moments,
    Verify,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub k: i32,
    pub m: i32,
    pub delta: Num,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    pub base_nodes: Option<usize>,
    pub factor: Option<usize>,
    pub max_rounds: Option<usize>,
    pub rel_threshold: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightConfig,
    #[serde(default)]
    pub backend: BackendKind,
    #[serde(default)]
    pub precision: Option<u32>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default)]
    pub outputs: Option<Vec<Output>>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub normalize: bool,
    /// Adds `delta`, in the π-units of the target moment, to selected moments.
    #[serde(default)]
    pub perturb: Vec<Perturbation>,
    #[serde(default)]
    pub quadrature: Option<QuadratureOverrides>,
    /// Per-degree matrices `H` applied as `H·ℙ_n` to emitted tables.
    #[serde(default)]
    pub transform: BTreeMap<String, Vec<Vec<Num>>>,
    /// `"rank-deficient"` replaces `A_2` by `A_1` before the rank test.
    #[serde(default)]
    pub joint_stub: Option<String>,
}

fn default_n_max() -> usize {
    3
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.n_max > MAX_DEGREE {
            return Err(CliError::Config(format!("n_max = {} exceeds {MAX_DEGREE}", cfg.n_max)));
        }
        if let Some(s) = &cfg.joint_stub {
            if s != "rank-deficient" {
                return Err(CliError::Config(format!("unknown joint_stub {s:?}")));
            }
        }
        let spec = cfg.weight.to_spec()?;
        if cfg.backend == BackendKind::Exact
            && !matches!(spec, WeightSpec::ProductChebyshev { .. } | WeightSpec::ShiftedSimplex { .. })
        {
            return Err(CliError::Config(format!("{} moments are not available in exact arithmetic", spec.name())));
        }
        Ok(cfg)
    }

    pub fn outputs(&self) -> Vec<Output> {
        self.outputs.clone().unwrap_or_else(|| vec![Output::Vops])
    }
}

/// Command-line overrides layered on a config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub precision: Option<u32>,
    pub env_precision: Option<u32>,
    pub normalize: bool,
    pub format: Option<Format>,
    pub strict: bool,
}

/// Everything a command needs, resolved from config and flags.
pub struct Context {
    pub cfg: RunConfig,
    pub spec: WeightSpec,
    pub backend: Backend,
    pub quad: QuadratureConfig,
    pub format: Format,
    pub strict: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, ov: &Overrides) -> CliResult<Self> {
        let spec = cfg.weight.to_spec()?;
        let backend = match cfg.backend {
            BackendKind::Exact => Backend::Exact,
            BackendKind::Float => {
                let digits = ov.precision.or(cfg.precision).or(ov.env_precision).unwrap_or(DEFAULT_PRECISION);
                Backend::float(digits).map_err(|e| CliError::Config(e.to_string()))?
            }
        };
        let mut quad = QuadratureConfig::default();
        if let Some(q) = &cfg.quadrature {
            quad.base_nodes = q.base_nodes.unwrap_or(quad.base_nodes);
            quad.factor = q.factor.unwrap_or(quad.factor);
            quad.max_rounds = q.max_rounds.unwrap_or(quad.max_rounds);
            quad.rel_threshold = q.rel_threshold.or(quad.rel_threshold);
        }
        quad.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = cfg;
        cfg.normalize |= ov.normalize;
        Ok(Context {
            format: ov.format.or(cfg.format).unwrap_or_default(),
            strict: ov.strict,
            spec,
            backend,
            quad,
            cfg,
        })
    }

    fn tolerance(&self) -> f64 {
        self.backend.tolerance(12)
    }

    /// Moment provider valid for levels up to `top`.
    pub fn moments(&self, top: usize) -> CliResult<Moments> {
        let mut m = Moments::with_config(self.spec.clone(), self.backend, default_window(top), self.quad.clone())?;
        for p in &self.cfg.perturb {
            let pi_exp = m.mu(p.k, p.m)?.pi_exp();
            m = m.with_perturbation(p.k, p.m, self.backend.rational_pi(&p.delta.rational()?, pi_exp));
        }
        if self.cfg.normalize {
            m = m.normalized()?;
        }
        Ok(m)
    }

    fn transform_for(&self, n: usize) -> CliResult<Option<Matrix>> {
        let Some(rows) = self.cfg.transform.get(&n.to_string()) else {
            return Ok(None);
        };
        let b = self.backend;
        let data = rows
            .iter()
            .map(|r| r.iter().map(|x| Ok(b.rational(&x.rational()?))).collect::<CliResult<Vec<_>>>())
            .collect::<CliResult<Vec<_>>>()?;
        let h = Matrix::from_rows(b, data).map_err(|e| CliError::Config(e.to_string()))?;
        if h.shape() != (n + 1, n + 1) || rank(&h)? < n + 1 {
            return Err(CliError::Config(format!(
                "transform for degree {n} must be a non-singular {0}x{0} matrix",
                n + 1
            )));
        }
        Ok(Some(h))
    }
}

// ----------------------------------------------------------- serialization

pub fn scalar_to_json(s: &Scalar) -> Value {
    match s {
        Scalar::Exact { value, pi_exp } => {
            let text = if value.denominator().is_one() {
                value.numerator().to_string()
            } else {
                format!("{}/{}", value.numerator(), value.denominator())
            };
            if *pi_exp == 0 {
                json!({ "value": text })
            } else {
                json!({ "value": text, "pi_exp": pi_exp })
            }
        }
        Scalar::Float(f) => json!({ "value": s.to_decimal_string(serialization_digits(f.precision())) }),
    }
}

pub fn scalar_from_json(v: &Value, backend: Backend) -> crate::Result<Scalar> {
    let text =
        v.get("value").and_then(Value::as_str).ok_or_else(|| Error::Parse(format!("scalar without a value: {v}")))?;
    let pi_exp = v.get("pi_exp").and_then(Value::as_i64).unwrap_or(0) as i32;
    let r = parse_rational(text)?;
    Ok(backend.rational_pi(&r, pi_exp))
}

pub fn matrix_to_json(m: &Matrix) -> Value {
    let rows: Vec<Value> = (0..m.rows()).map(|r| Value::Array(m.row(r).iter().map(scalar_to_json).collect())).collect();
    json!({ "rows": m.rows(), "cols": m.cols(), "data": rows })
}

pub fn matrix_from_json(v: &Value, backend: Backend) -> crate::Result<Matrix> {
    let bad = || Error::Parse("malformed matrix".into());
    let rows = v.get("rows").and_then(Value::as_u64).ok_or_else(bad)? as usize;
    let cols = v.get("cols").and_then(Value::as_u64).ok_or_else(bad)? as usize;
    let data = v.get("data").and_then(Value::as_array).ok_or_else(bad)?;
    if data.len() != rows {
        return Err(bad());
    }
    let mut m = Matrix::zeros(backend, rows, cols);
    for (r, row) in data.iter().enumerate() {
        let row = row.as_array().filter(|x| x.len() == cols).ok_or_else(bad)?;
        for (c, x) in row.iter().enumerate() {
            m.set(r, c, scalar_from_json(x, backend)?);
        }
    }
    Ok(m)
}

/// Terms sorted by descending degree, then descending power of `x₁`.
fn table_terms(p: &BiPoly) -> Vec<(MultiIndex, Scalar)> {
    let mut t = p.sorted_terms();
    t.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then(b.0.i.cmp(&a.0.i)));
    t
}

pub fn entry_name(n: usize, k: usize) -> String {
    format!("P_{{{},{}}}", n - k, k)
}

pub fn polyvec_to_json(p: &PolyVec) -> Value {
    let n = p.degree();
    let entries: Vec<Value> = p
        .entries()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let terms: Vec<Value> = table_terms(e)
                .iter()
                .map(|(m, c)| {
                    let mut t = scalar_to_json(c);
                    t["i"] = json!(m.i);
                    t["j"] = json!(m.j);
                    t
                })
                .collect();
            json!({ "name": entry_name(n, k), "k": k, "terms": terms })
        })
        .collect();
    json!({ "degree": n, "entries": entries })
}

pub fn polyvec_from_json(v: &Value, backend: Backend) -> crate::Result<PolyVec> {
    let bad = || Error::Parse("malformed polynomial vector".into());
    let n = v.get("degree").and_then(Value::as_u64).ok_or_else(bad)? as usize;
    let entries = v.get("entries").and_then(Value::as_array).ok_or_else(bad)?;
    let polys = entries
        .iter()
        .map(|e| {
            let terms = e.get("terms").and_then(Value::as_array).ok_or_else(bad)?;
            let parsed = terms
                .iter()
                .map(|t| {
                    let i = t.get("i").and_then(Value::as_i64).ok_or_else(bad)? as i32;
                    let j = t.get("j").and_then(Value::as_i64).ok_or_else(bad)? as i32;
                    Ok((MultiIndex::new(i, j), scalar_from_json(t, backend)?))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            BiPoly::from_terms(backend, parsed)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    PolyVec::new(n, polys)
}

const TEXT_DIGITS: usize = 12;

/// `d.ddd` when the exponent is moderate, otherwise trimmed scientific form.
fn compact_decimal(sci: &str) -> String {
    let Some((mant, exp)) = sci.split_once('e') else {
        return sci.to_string();
    };
    let exp: i32 = exp.parse().unwrap_or(0);
    let (sign, mant) = mant.strip_prefix('-').map_or(("", mant), |m| ("-", m));
    let digits: String = mant.chars().filter(char::is_ascii_digit).collect();
    let trim = |t: String| {
        if t.contains('.') {
            t.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            t
        }
    };
    if !(-5..6).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return format!("{sign}{}e{exp}", trim(format!("{head}.{tail}")));
    }
    let body = if exp < 0 {
        format!("0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let point = exp as usize + 1;
        let padded = format!("{digits:0<point$}");
        format!("{}.{}", &padded[..point], &padded[point..])
    };
    format!("{sign}{}", trim(body))
}

fn scalar_text(s: &Scalar) -> String {
    let body = match s {
        Scalar::Exact { .. } => scalar_to_json(s)["value"].as_str().unwrap_or_default().to_string(),
        Scalar::Float(_) => compact_decimal(&s.to_decimal_string(TEXT_DIGITS)),
    };
    match (body.as_str(), s.pi_exp()) {
        (_, 0) => body,
        ("1", 1) => "pi".into(),
        ("1", e) => format!("pi^{e}"),
        (_, 1) => format!("{body}*pi"),
        (_, e) => format!("{body}*pi^{e}"),
    }
}

fn monomial_text(m: MultiIndex) -> String {
    let part = |name: &str, e: i32| match e {
        0 => String::new(),
        1 => name.to_string(),
        _ => format!("{name}^{e}"),
    };
    let s = [part("x1", m.i), part("x2", m.j)].into_iter().filter(|s| !s.is_empty()).collect::<Vec<_>>();
    s.join("*")
}

/// `x2^3 - (121/12)x2^2 + (121/6)x2 - 8`.
pub fn poly_text(p: &BiPoly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut out = String::new();
    let noise = p.backend().tolerance(12);
    let terms = table_terms(p).into_iter().filter(|(_, c)| c.backend().is_exact() || c.to_f64().abs() > noise);
    for (idx, (m, c)) in terms.enumerate() {
        let neg = c.signum() < 0;
        let mag = if neg { c.neg() } else { c };
        let sign = match (idx, neg) {
            (0, true) => "-",
            (0, false) => "",
            (_, true) => " - ",
            (_, false) => " + ",
        };
        out.push_str(sign);
        let mono = monomial_text(m);
        let coeff = scalar_text(&mag);
        match (mag.is_one(), mono.is_empty()) {
            (true, false) => out.push_str(&mono),
            (_, true) => out.push_str(&coeff),
            (false, false) if coeff.contains(['/', 'e', '*']) => write!(out, "({coeff}){mono}").unwrap(),
            (false, false) => write!(out, "{coeff}{mono}").unwrap(),
        }
    }
    out
}

// ------------------------------------------------------------------ report

/// One verification record.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub degree: usize,
    pub axis: Option<u8>,
    pub residual: String,
    pub pass: bool,
}

impl Check {
    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "degree": self.degree,
            "axis": self.axis,
            "residual": self.residual,
            "pass": self.pass,
        })
    }
}

#[derive(Default)]
pub struct Report {
    /// File name and JSON body for each artifact.
    pub files: Vec<(String, Value)>,
    pub stdout: String,
    pub exit_code: i32,
}

impl Report {
    fn raise(&mut self, code: i32) {
        self.exit_code = self.exit_code.max(code);
    }

    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            let text = serde_json::to_string_pretty(body).expect("serializable");
            std::fs::write(dir.join(name), text + "\n")?;
        }
        Ok(())
    }
}

fn residual_text(s: &Scalar) -> String {
    if s.is_zero() {
        "0".into()
    } else {
        format!("{:e}", s.to_f64())
    }
}

// ---------------------------------------------------------------- commands

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    /// Everything listed under `outputs`.
    Run,
    Vops,
    Verify,
    Relations,
    Recurrence,
    Moments,
}

pub fn run(cmd: Command, ctx: &Context) -> CliResult<Report> {
    let mut report = Report::default();
    let outputs = ctx.cfg.outputs();
    match cmd {
        Command::Run => {
            let mut seen = Vec::new();
            for o in outputs.iter().copied() {
                let stage = match o {
                    Output::Vops | Output::Lambda | Output::Upsilon => Command::Vops,
                    Output::Relations => Command::Relations,
                    Output::Recurrence => Command::Recurrence,
                    Output::Moments => Command::Moments,
                    Output::Verify => Command::Verify,
                };
                if !seen.contains(&stage) {
                    seen.push(stage);
                    run_stage(stage, ctx, &outputs, &mut report)?;
                }
            }
        }
        Command::Vops => {
            let tables = [Output::Vops, Output::Lambda, Output::Upsilon];
            let wanted: Vec<Output> = outputs.iter().copied().filter(|o| tables.contains(o)).collect();
            let wanted = if wanted.is_empty() { vec![Output::Vops] } else { wanted };
            run_stage(cmd, ctx, &wanted, &mut report)?
        }
        other => run_stage(other, ctx, &outputs, &mut report)?,
    }
    Ok(report)
}

fn run_stage(cmd: Command, ctx: &Context, outputs: &[Output], report: &mut Report) -> CliResult<()> {
    match cmd {
        Command::Vops => cmd_vops(ctx, outputs, report),
        Command::Verify => cmd_verify(ctx, report),
        Command::Relations => cmd_relations(ctx, report, false),
        Command::Recurrence => cmd_relations(ctx, report, true),
        Command::Moments => cmd_moments(ctx, report),
        Command::Run => unreachable!("expanded by run"),
    }
}

fn cmd_vops(ctx: &Context, outputs: &[Output], report: &mut Report) -> CliResult<()> {
    let want = |o| outputs.contains(&o);
    if !(want(Output::Vops) || want(Output::Lambda) || want(Output::Upsilon)) {
        return Ok(());
    }
    let n_max = ctx.cfg.n_max;
    let f = ctx.moments(n_max)?;
    let levels = build_levels(&f, n_max)?;
    for l in &levels {
        let n = l.degree;
        if want(Output::Vops) {
            let p = match ctx.transform_for(n)? {
                Some(h) => apply(&h, &l.p, n)?,
                None => l.p.clone(),
            };
            report.files.push((format!("vops_n{n}.json"), polyvec_to_json(&p)));
            emit_vops(ctx.format, &p, &mut report.stdout);
        }
        if want(Output::Lambda) {
            report
                .files
                .push((format!("lambda_n{n}.json"), json!({ "degree": n, "lambda": matrix_to_json(&l.lambda) })));
            emit_matrix(ctx.format, &format!("Lambda_{n}"), n, &l.lambda, &mut report.stdout);
        }
        if want(Output::Upsilon) {
            let u = l.upsilon()?;
            report.files.push((format!("upsilon_n{n}.json"), json!({ "degree": n, "upsilon": matrix_to_json(u) })));
            emit_matrix(ctx.format, &format!("Upsilon_{n}"), n, u, &mut report.stdout);
        }
    }
    Ok(())
}

fn emit_vops(format: Format, p: &PolyVec, out: &mut String) {
    let n = p.degree();
    match format {
        Format::Json => {
            out.push_str(&serde_json::to_string(&polyvec_to_json(p)).expect("serializable"));
            out.push('\n');
        }
        Format::Csv => {
            if n == 0 {
                out.push_str("entry,n,k,i,j,value,pi_exp\n");
            }
            for (k, e) in p.entries().iter().enumerate() {
                for (m, c) in table_terms(e) {
                    let v = scalar_to_json(&c);
                    writeln!(
                        out,
                        "{},{n},{k},{},{},{},{}",
                        entry_name(n, k),
                        m.i,
                        m.j,
                        v["value"].as_str().unwrap(),
                        c.pi_exp()
                    )
                    .unwrap();
                }
            }
        }
        Format::Text => {
            for (k, e) in p.entries().iter().enumerate() {
                writeln!(out, "{} = {}", entry_name(n, k), poly_text(e)).unwrap();
            }
        }
    }
}

fn emit_matrix(format: Format, name: &str, n: usize, m: &Matrix, out: &mut String) {
    match format {
        Format::Json => {
            out.push_str(
                &serde_json::to_string(&json!({ "name": name, "matrix": matrix_to_json(m) })).expect("serializable"),
            );
            out.push('\n');
        }
        Format::Csv => {
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    let s = m.get(r, c);
                    writeln!(out, "{name},{n},{r},{c},{},{}", scalar_to_json(s)["value"].as_str().unwrap(), s.pi_exp())
                        .unwrap();
                }
            }
        }
        Format::Text => {
            writeln!(out, "{name} =").unwrap();
            for r in 0..m.rows() {
                let row: Vec<String> = m.row(r).iter().map(scalar_text).collect();
                writeln!(out, "  [{}]", row.join(", ")).unwrap();
            }
        }
    }
}

fn relation_sets(ctx: &Context, levels: &[VopsLevel], n: usize) -> CliResult<RelationSet> {
    let mut set = compute_relation_set(levels, n, RelationOptions::default())?;
    if ctx.cfg.joint_stub.is_some() {
        let a1 = set.axes[0].a.clone();
        set.joint = a1.vstack(&a1)?;
        set.joint_rank = rank(&set.joint)?;
        set.recurrence = Err(Error::RankDeficient { rank: set.joint_rank, expected: n + 2 });
    }
    Ok(set)
}

fn cmd_relations(ctx: &Context, report: &mut Report, recurrence: bool) -> CliResult<()> {
    let n_max = ctx.cfg.n_max;
    let f = ctx.moments(n_max + 1)?;
    let levels = build_levels(&f, n_max + 1)?;
    let tol = ctx.tolerance();
    for n in 0..=n_max {
        let set = relation_sets(ctx, &levels, n)?;
        let mut body = Map::new();
        body.insert("degree".into(), json!(n));
        if !recurrence {
            for rel in &set.axes {
                body.insert(
                    format!("axis{}", rel.axis),
                    json!({
                        "A": matrix_to_json(&rel.a),
                        "B": matrix_to_json(&rel.b),
                        "C": matrix_to_json(&rel.c),
                        "path": format!("{:?}", rel.path).to_lowercase(),
                    }),
                );
            }
        }
        body.insert("joint_rank".into(), json!(set.joint_rank));
        body.insert("full_rank".into(), json!(set.joint_rank == n + 2));
        match &set.recurrence {
            Ok(rec) => {
                body.insert("D1".into(), matrix_to_json(&rec.d1));
                body.insert("D2".into(), matrix_to_json(&rec.d2));
                body.insert("E".into(), matrix_to_json(&rec.e));
                body.insert("F".into(), matrix_to_json(&rec.f));
                let prev = if n > 0 { Some(&levels[n - 1].p) } else { None };
                let next = recurrence_step(prev, &levels[n].p, rec)?;
                let dist = polyvec_distance(&next, &levels[n + 1].p)?;
                body.insert("reconstruction_residual".into(), json!(residual_text(&dist)));
                if !(dist.is_zero() || dist.to_f64().abs() <= tol) {
                    report.raise(exit::VERIFICATION);
                }
                if ctx.format == Format::Text {
                    writeln!(
                        report.stdout,
                        "degree {n}: joint rank {} of {}, reconstruction residual {}",
                        set.joint_rank,
                        n + 2,
                        residual_text(&dist)
                    )
                    .unwrap();
                }
            }
            Err(e) => {
                body.insert("rank_failure".into(), json!(e.to_string()));
                if ctx.format == Format::Text {
                    writeln!(report.stdout, "degree {n}: {e}").unwrap();
                }
                if ctx.strict {
                    report.raise(exit::RANK);
                }
            }
        }
        let body = Value::Object(body);
        match ctx.format {
            Format::Json => writeln!(report.stdout, "{}", serde_json::to_string(&body).expect("serializable")).unwrap(),
            Format::Csv => {
                if !recurrence {
                    for rel in &set.axes {
                        for (label, m) in [("A", &rel.a), ("B", &rel.b), ("C", &rel.c)] {
                            emit_matrix(Format::Csv, &format!("{label}{}", rel.axis), n, m, &mut report.stdout);
                        }
                    }
                }
                if let Ok(rec) = &set.recurrence {
                    for (label, m) in [("D1", &rec.d1), ("D2", &rec.d2), ("E", &rec.e), ("F", &rec.f)] {
                        emit_matrix(Format::Csv, label, n, m, &mut report.stdout);
                    }
                }
            }
            Format::Text if !recurrence => {
                for rel in &set.axes {
                    for (label, m) in [("A", &rel.a), ("B", &rel.b), ("C", &rel.c)] {
                        emit_matrix(Format::Text, &format!("{label}_{{{n},{}}}", rel.axis), n, m, &mut report.stdout);
                    }
                }
            }
            Format::Text => {}
        }
        let name = if recurrence { format!("recurrence_n{n}.json") } else { format!("relations_n{n}.json") };
        report.files.push((name, body));
    }
    Ok(())
}

fn cmd_moments(ctx: &Context, report: &mut Report) -> CliResult<()> {
    let n = ctx.cfg.n_max as i32;
    let f = ctx.moments(ctx.cfg.n_max)?;
    let mut rows = Vec::new();
    if ctx.format == Format::Csv {
        report.stdout.push_str("k,m,value,pi_exp\n");
    }
    for k in -n..=n {
        for m in -n..=n {
            let v = match f.mu(k, m) {
                Ok(v) => v,
                Err(Error::NotExact(_)) if ctx.backend.is_exact() && (k < 0 || m < 0) => continue,
                Err(e) => return Err(e.into()),
            };
            let mut rec = scalar_to_json(&v);
            rec["k"] = json!(k);
            rec["m"] = json!(m);
            match ctx.format {
                Format::Csv => {
                    writeln!(report.stdout, "{k},{m},{},{}", rec["value"].as_str().unwrap(), v.pi_exp()).unwrap()
                }
                Format::Text => writeln!(report.stdout, "mu({k},{m}) = {}", scalar_text(&v)).unwrap(),
                Format::Json => {}
            }
            rows.push(rec);
        }
    }
    let body = json!({ "weight": ctx.spec.to_string(), "backend": ctx.backend.to_string(), "moments": rows });
    if ctx.format == Format::Json {
        writeln!(report.stdout, "{}", serde_json::to_string(&body).expect("serializable")).unwrap();
    }
    report.files.push(("moments.json".into(), body));
    Ok(())
}

/// Runs every check the construction supports and reports one record each.
pub fn verify_checks(ctx: &Context) -> CliResult<(Vec<Check>, Vec<Value>)> {
    let n_max = ctx.cfg.n_max;
    let f = ctx.moments(n_max)?;
    let levels = build_levels(&f, n_max)?;
    let tol = ctx.tolerance();
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();
    let ok = |s: &Scalar| s.is_zero() || s.to_f64().abs() <= tol;
    let mut push = |name, degree, axis, value: Scalar, pass: Option<bool>| {
        let pass = pass.unwrap_or_else(|| ok(&value));
        checks.push(Check { name, degree, axis, residual: residual_text(&value), pass });
    };
    let b = ctx.backend;
    for l in &levels {
        let n = l.degree;
        push("orthogonality", n, None, verify_orthogonality(&f, l)?, None);
        push("monic", n, None, monic_defect(l)?, None);
        let lam_ok = rank(&l.lambda)? == n + 1;
        push("lambda_nonsingular", n, None, if lam_ok { b.zero() } else { b.one() }, Some(lam_ok));
        let minors = leading_principal_minors(&moment_matrix(&f, n)?)?;
        let full = minors.len() == crate::index::poly_dim(n);
        let smallest = minors.iter().min_by(|x, y| x.to_f64().total_cmp(&y.to_f64())).cloned().unwrap_or(b.zero());
        let positive = full && smallest.signum() > 0;
        push(
            "moment_matrix_positive",
            n,
            None,
            if smallest.signum() < 0 { smallest.neg() } else { b.zero() },
            Some(positive),
        );
        diagnostics.push(json!({ "name": "smallest_leading_minor", "degree": n, "value": scalar_to_json(&smallest) }));
        if n <= 4 {
            let mut worst = b.zero();
            for k in 0..=n {
                let d = build_level_determinant(&f, n, k)?.sub(l.p.entry(k))?.max_abs_coeff();
                if d.abs_gt(&worst) {
                    worst = d;
                }
            }
            push("determinant_route", n, None, worst, None);
        }
    }
    for n in 0..n_max {
        let set = relation_sets(ctx, &levels, n)?;
        for rel in &set.axes {
            let axis = Some(rel.axis);
            push("relation_identity", n, axis, relation_residual(&levels, n, rel)?.max_abs_coeff(), None);
            push("agcl", n, axis, agcl_residual(rel, n)?.max_abs(), None);
            if n >= 1 {
                push("rrc", n, axis, rrc_residual(&levels, rel, n)?.max_abs(), None);
                if let (Ok(un), Ok(up)) = (levels[n].upsilon(), levels[n - 1].upsilon()) {
                    push("blcl", n, axis, blcl_corrected_residual(&f, &levels[n], rel, un, up)?.max_abs(), None);
                    diagnostics.push(json!({
                        "name": "blcl_stated_form",
                        "degree": n,
                        "axis": rel.axis,
                        "value": residual_text(&verify_blcl(rel, un, up)?),
                    }));
                }
            }
        }
        let full = set.joint_rank == n + 2;
        push("joint_rank", n, None, b.int((n + 2 - set.joint_rank.min(n + 2)) as i64), Some(full));
        if let Ok(rec) = &set.recurrence {
            let id = rec.d1.transpose().mul(&set.axes[0].a)?.add(&rec.d2.transpose().mul(&set.axes[1].a)?)?;
            push("left_inverse", n, None, id.sub(&Matrix::identity(b, n + 2))?.max_abs(), None);
            let prev = if n > 0 { Some(&levels[n - 1].p) } else { None };
            let next = recurrence_step(prev, &levels[n].p, rec)?;
            push("recurrence", n, None, polyvec_distance(&next, &levels[n + 1].p)?, None);
        }
    }
    cross_checks(ctx, &f, &levels, &mut push)?;
    Ok((checks, diagnostics))
}

/// Comparisons against a route that does not read the configured moments.
fn cross_checks(
    ctx: &Context,
    f: &Moments,
    levels: &[VopsLevel],
    push: &mut impl FnMut(&'static str, usize, Option<u8>, Scalar, Option<bool>),
) -> CliResult<()> {
    let b = ctx.backend;
    let n_max = ctx.cfg.n_max as i32;
    let scale = if ctx.cfg.normalize {
        Moments::with_config(ctx.spec.clone(), b, default_window(ctx.cfg.n_max), ctx.quad.clone())?.mu(0, 0)?.recip()?
    } else {
        b.one()
    };
    match &ctx.spec {
        WeightSpec::ProductChebyshev { a, b: bb, c, d } => {
            // μ_{r,s} = β₁^{2r+1} β₂^{2s+1} μ_{−r−1,−s−1} with βᵢ² the product of the endpoints
            let beta_sq = [a * bb, c * d];
            let mut worst = b.zero();
            for r in -n_max..n_max {
                for s in -n_max..n_max {
                    let mut factor = b.one();
                    for (sq, e) in beta_sq.iter().zip([2 * r + 1, 2 * s + 1]) {
                        factor = factor.mul(&b.rational(sq).sqrt()?.powi(e)?)?;
                    }
                    let diff = f.mu(r, s)?.sub(&factor.mul(&f.mu(-r - 1, -s - 1)?)?)?.abs();
                    if diff.abs_gt(&worst) {
                        worst = diff;
                    }
                }
            }
            push("moment_reflection", 0, None, worst, None);
        }
        WeightSpec::ShiftedSimplex { alpha, beta, gamma, a, b: bb } => {
            let other = match b {
                Backend::Exact => Some(Moments::with_config(
                    ctx.spec.clone(),
                    Backend::float(DEFAULT_PRECISION)?,
                    2 * n_max,
                    ctx.quad.clone(),
                )?),
                Backend::Float { .. } => None,
            };
            let mut worst = 0.0f64;
            for k in 0..=2 * n_max {
                for m in 0..=2 * n_max - k {
                    let exact = b.rational(&simplex_moment_exact(*alpha, *beta, *gamma, a, bb, k, m)?).mul(&scale)?;
                    let d = match &other {
                        Some(q) => q
                            .mu(k, m)?
                            .sub(&Backend::float(DEFAULT_PRECISION)?.rational(&exact.to_rational()))?
                            .to_f64()
                            .abs(),
                        None => f.mu(k, m)?.sub(&exact)?.to_f64().abs(),
                    };
                    worst = worst.max(d);
                }
            }
            let tol = if other.is_some() { Backend::float(DEFAULT_PRECISION)?.tolerance(12) } else { ctx.tolerance() };
            push("moment_backends", 0, None, b.rational(&float_rational(worst)), Some(worst <= tol));
        }
        WeightSpec::TriangleKoornwinder { .. } if !b.is_exact() => {
            let spec = KoornwinderSpec::from_weight(&ctx.spec).expect("triangle");
            for l in levels.iter().take(4) {
                let k = build_koornwinder_level(&spec, l.degree, b, &ctx.quad)?;
                let (g, residual) = leading_transform(&k, &l.p)?;
                push("koornwinder_transform", l.degree, None, residual, None);
                push("koornwinder_unit_triangular", l.degree, None, unit_lower_defect(&g)?, None);
            }
        }
        _ => {}
    }
    Ok(())
}

fn float_rational(x: f64) -> RBig {
    RBig::simplest_from_f64(x).unwrap_or(RBig::ZERO)
}

fn cmd_verify(ctx: &Context, report: &mut Report) -> CliResult<()> {
    let (checks, diagnostics) = verify_checks(ctx)?;
    let all = checks.iter().all(|c| c.pass);
    let body = json!({
        "weight": ctx.spec.to_string(),
        "backend": ctx.backend.to_string(),
        "n_max": ctx.cfg.n_max,
        "pass": all,
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
        "diagnostics": diagnostics,
    });
    match ctx.format {
        Format::Json => {
            writeln!(report.stdout, "{}", serde_json::to_string_pretty(&body).expect("serializable")).unwrap()
        }
        Format::Csv => {
            report.stdout.push_str("name,degree,axis,residual,pass\n");
            for c in &checks {
                let axis = c.axis.map(|a| a.to_string()).unwrap_or_default();
                writeln!(report.stdout, "{},{},{axis},{},{}", c.name, c.degree, c.residual, c.pass).unwrap();
            }
        }
        Format::Text => {
            for c in &checks {
                let axis = c.axis.map(|a| format!(" axis {a}")).unwrap_or_default();
                let mark = if c.pass { "ok  " } else { "FAIL" };
                writeln!(report.stdout, "{mark} {} n={}{axis}: {}", c.name, c.degree, c.residual).unwrap();
            }
        }
    }
    report.files.push(("verify_report.json".into(), body));
    if !all {
        report.raise(exit::VERIFICATION);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::Moments;

    fn q(n: i64, d: i64) -> RBig {
        RBig::from_parts_signed(n.into(), d.into())
    }

    fn rectangle_levels(backend: Backend) -> Vec<VopsLevel> {
        let spec = WeightSpec::ProductChebyshev { a: q(1, 4), b: q(4, 1), c: q(4, 9), d: q(9, 1) };
        build_levels(&Moments::new(spec, backend, 8).unwrap(), 3).unwrap()
    }

    #[test]
    fn exact_scalars_serialize_in_lowest_terms() {
        let s = Scalar::exact(q(-6, 4), 2);
        assert_eq!(scalar_to_json(&s), json!({ "value": "-3/2", "pi_exp": 2 }));
        assert_eq!(scalar_to_json(&Scalar::exact(q(8, 1), 0)), json!({ "value": "8" }));
        assert_eq!(scalar_from_json(&scalar_to_json(&s), Backend::Exact).unwrap(), s);
    }

    #[test]
    fn polyvec_round_trip_is_coefficient_identical() {
        for backend in [Backend::Exact, Backend::float(40).unwrap()] {
            for l in rectangle_levels(backend) {
                let back = polyvec_from_json(&polyvec_to_json(&l.p), backend).unwrap();
                assert_eq!(back, l.p, "{backend} degree {}", l.degree);
                let lam = matrix_from_json(&matrix_to_json(&l.lambda), backend).unwrap();
                assert_eq!(lam, l.lambda);
            }
        }
    }

    #[test]
    fn text_rendering() {
        let levels = rectangle_levels(Backend::Exact);
        assert_eq!(poly_text(levels[3].p.entry(3)), "x2^3 - (121/12)x2^2 + (121/6)x2 - 8");
        assert_eq!(compact_decimal("-1.3104137133800e0"), "-1.31041371338");
        assert_eq!(compact_decimal("2.6398651007700e-4"), "0.000263986510077");
        assert_eq!(compact_decimal("1.2500000000000e7"), "1.25e7");
        assert_eq!(compact_decimal("4.0000000000000e2"), "400");
        assert_eq!(scalar_text(&Scalar::exact(q(1, 1), 2)), "pi^2");
        assert_eq!(scalar_text(&Scalar::exact(q(9, 16), 2)), "9/16*pi^2");
    }

    #[test]
    fn config_rejections() {
        let ok = r#"{"weight": {"type": "product-chebyshev", "a": "1/4", "b": 4, "c": "4/9", "d": "9"}}"#;
        let cfg = RunConfig::parse(ok).unwrap();
        assert_eq!(cfg.backend, BackendKind::Float);
        assert_eq!(cfg.outputs(), vec![Output::Vops]);
        for bad in [
            r#"{"weight": {"type": "product-chebyshev", "a": 0.25, "b": 4, "c": "4/9", "d": "9"}}"#,
            r#"{"weight": {"type": "product-chebyshev", "a": "1/4", "b": 4, "c": "4/9", "d": "9"}, "n_max": 13}"#,
            r#"{"weight": {"type": "product-chebyshev", "a": "1/4", "b": 4, "c": "4/9", "d": "9"}, "colour": 1}"#,
            r#"{"weight": {"type": "product-chebyshev", "a": "4", "b": "1/4", "c": "4/9", "d": "9"}}"#,
            r#"{"weight": {"type": "triangle-koornwinder", "alpha": 1, "beta": 2, "gamma": 1,
                "a": "1", "b": "2", "c": "3", "d": "5"}, "backend": "exact"}"#,
            r#"{"weight": {"type": "circle"}}"#,
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn precision_precedence() {
        let text = r#"{"weight": {"type": "shifted-simplex", "alpha": 3, "beta": 2, "gamma": 1, "a": "1", "b": "2"}}"#;
        let digits = |ov: Overrides| Context::new(RunConfig::parse(text).unwrap(), &ov).unwrap().backend.digits();
        assert_eq!(digits(Overrides::default()), Some(DEFAULT_PRECISION));
        assert_eq!(digits(Overrides { env_precision: Some(40), ..Default::default() }), Some(40));
        assert_eq!(digits(Overrides { precision: Some(35), env_precision: Some(40), ..Default::default() }), Some(35));
        let with_cfg = text.replace("}}", "}, \"precision\": 45}");
        let ctx = Context::new(
            RunConfig::parse(&with_cfg).unwrap(),
            &Overrides { env_precision: Some(40), ..Default::default() },
        );
        assert_eq!(ctx.unwrap().backend.digits(), Some(45));
    }
}
