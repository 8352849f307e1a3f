//! Problem files, task runners and report writing for the `tforms` binary.
//!
//! A problem file names its fields and says which of them form the form:
//!
//! ```json
//! {"space": {"grid": 4096},
//!  "fields": {"alpha": {"kind": "scalar_symbolic", "expr": "z - 0.5",
//!                       "zeros": [{"at": 0.5, "order": 1, "left": "-", "right": "+", "coeff": 1}]}},
//!  "task": "classify",
//!  "params": {"alpha": "alpha"}}
//! ```
//!
//! `params.f` names the form field; without it the form is the
//! discriminant form of `alpha`.

pub mod check;

use crate::classify::{classify_form, congruent, ClassificationReport, CongruenceReport, Mode};
use crate::error::{Error, Result};
use crate::field::io::{write_sampled, FieldDesc};
use crate::field::{OperatorField, DEFAULT_GRID};
use crate::forms::{discriminant, metabolizer, pos_neg_split, MetabolizerCheck, TorsionForm};
use crate::torsion::density::{density_curve_on, LAMBDA_WINDOW};
use crate::torsion::{germ_signature, ns_exponent, Decision, GermSignature, TorsionObject};
use check::{run_check, CheckReport, Suite};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_DECIDED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_HEURISTIC: i32 = 2;

/// Default number of λ points of a density curve.
pub const DEFAULT_POINTS: usize = 200;
pub const MAX_POINTS: usize = 100_000;
pub const MAX_GRID: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify,
    Congruence,
    Split,
    Metabolizer,
    Density,
    Check,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub grid: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: Option<String>,
    pub f: Option<String>,
    /// Second form of a congruence task inside one file.
    pub other: Option<String>,
    pub other_f: Option<String>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
    pub suite: Option<Suite>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub space: SpaceSpec,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldDesc>,
    pub task: Option<Task>,
    #[serde(default)]
    pub params: Params,
}

fn invalid(field: &str, message: impl Into<String>) -> Error {
    Error::Validation { field: field.into(), message: message.into() }
}

/// The first backquoted name in a serde message, which is the offending field.
fn quoted_name(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

impl ProblemFile {
    pub fn parse(src: &str) -> Result<Self> {
        let p: ProblemFile = serde_json::from_str(src).map_err(|e| {
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            if e.is_data() {
                invalid(quoted_name(&msg).unwrap_or("problem"), msg.clone())
            } else {
                Error::Parse { line: e.line(), column: e.column(), message: msg }
            }
        })?;
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if let Some(n) = self.space.grid {
            if n == 0 || n > MAX_GRID {
                return Err(invalid("space.grid", format!("grid must lie in 1..={MAX_GRID}, got {n}")));
            }
        }
        let p = &self.params;
        let names = [("params.alpha", &p.alpha), ("params.f", &p.f), ("params.other", &p.other), ("params.other_f", &p.other_f)];
        for (key, name) in names {
            if let Some(name) = name {
                if !self.fields.contains_key(name) {
                    return Err(invalid(key, format!("no field named {name:?}")));
                }
            }
        }
        if p.alpha.is_none() && !self.fields.contains_key("alpha") && self.task != Some(Task::Check) {
            return Err(invalid("params.alpha", "no field named \"alpha\" and none given"));
        }
        if let Some(n) = p.points {
            if !(2..=MAX_POINTS).contains(&n) {
                return Err(invalid("params.points", format!("points must lie in 2..={MAX_POINTS}, got {n}")));
            }
        }
        for (key, v) in [("params.lambda_min", p.lambda_min), ("params.lambda_max", p.lambda_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(key, format!("must be positive and finite, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// A parsed problem together with the directory its data paths are relative to.
#[derive(Clone, Debug)]
pub struct Problem {
    pub file: ProblemFile,
    pub base: PathBuf,
    /// `--grid` from the command line, overriding `space.grid`.
    pub grid_override: Option<usize>,
}

impl Problem {
    pub fn load(path: &Path, grid_override: Option<usize>) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let file = ProblemFile::parse(&src)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Problem { file, base, grid_override })
    }

    /// Resolution used wherever a symbolic field has to be sampled.
    pub fn grid(&self) -> usize {
        self.grid_override.or(self.file.space.grid).unwrap_or(DEFAULT_GRID)
    }

    fn field(&self, name: &str) -> Result<OperatorField> {
        let desc = self.file.fields.get(name).ok_or_else(|| invalid(name, "field is not defined"))?;
        let f = desc.load(name, &self.base)?;
        if let Some(g) = f.grid() {
            if g != self.grid() && (self.grid_override.is_some() || self.file.space.grid.is_some()) {
                return Err(invalid(name, format!("sampled on {g} points but the space grid is {}", self.grid())));
            }
        }
        Ok(f)
    }

    fn form_named(&self, alpha: Option<&str>, f: Option<&str>) -> Result<TorsionForm> {
        let a = self.field(alpha.unwrap_or("alpha"))?;
        match f {
            None => discriminant(a),
            Some(f) => TorsionForm::new(TorsionObject::new(a)?, self.field(f)?),
        }
    }

    pub fn form(&self) -> Result<TorsionForm> {
        let p = &self.file.params;
        self.form_named(p.alpha.as_deref(), p.f.as_deref())
    }

    /// The second form of a single-file congruence task.
    pub fn other_form(&self) -> Result<TorsionForm> {
        let p = &self.file.params;
        let other = p.other.as_deref().ok_or_else(|| invalid("params.other", "congruence needs a second form"))?;
        self.form_named(Some(other), p.other_f.as_deref())
    }
}

/// Result of a task: exit code, a one-paragraph human summary and the
/// files that were written.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit: i32,
    pub summary: String,
    pub written: Vec<PathBuf>,
}

fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `out`, or to stdout when there is none.
fn emit(out: Option<&Path>, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            written.push(p.to_path_buf());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Description of a result field. Sampled fields go to `<stem>.<name>.bin`
/// next to the report and are omitted when the report goes to stdout.
fn field_out(field: &OperatorField, name: &str, out: Option<&Path>, written: &mut Vec<PathBuf>) -> Result<Option<FieldDesc>> {
    if let Some(g) = field.as_symbolic() {
        return Ok(Some(FieldDesc::from_symbolic(g)));
    }
    let Some(out) = out else { return Ok(None) };
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let file = format!("{stem}.{name}.bin");
    let path = out.with_file_name(&file);
    write_sampled(&path, field)?;
    written.push(path);
    Ok(Some(FieldDesc::Sampled { dim: field.dim(), grid: field.grid().unwrap_or(0), data: file }))
}

fn describe(sig: &Option<GermSignature>) -> String {
    match sig {
        None => "n/a".into(),
        Some(s) if s.is_empty() => "no germs".into(),
        Some(s) => s
            .entries()
            .iter()
            .map(|e| format!("{}{}@{}^{}", e.sign.symbol(), e.side.name(), e.location, e.order.value()))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

pub fn run_classify(problem: &Problem, out: Option<&Path>) -> Result<Outcome> {
    let report: ClassificationReport = classify_form(&problem.form()?)?;
    let mut written = Vec::new();
    emit(out, &to_json(&report)?, &mut written)?;
    let exact = report.mode == Mode::ExactSymbolic;
    let mut summary = format!("classify: {}\n", if exact { "exact (germ signatures)" } else { "heuristic (sampled)" });
    let _ = writeln!(summary, "  positive part: {}", describe(&report.positive));
    let _ = writeln!(summary, "  negative part: {}", describe(&report.negative));
    let _ = write!(summary, "  split residual: {:e}", report.split_residual);
    Ok(Outcome { exit: if exact { EXIT_DECIDED } else { EXIT_HEURISTIC }, summary, written })
}

#[derive(Serialize)]
struct CongruenceOutput<'a> {
    #[serde(flatten)]
    report: &'a CongruenceReport,
    /// Certificate maps, one per part certificate.
    maps: Vec<Option<FieldDesc>>,
}

pub fn run_congruence(phi: &TorsionForm, psi: &TorsionForm, out: Option<&Path>) -> Result<Outcome> {
    let report = congruent(phi, psi)?;
    let mut written = Vec::new();
    let maps = report
        .certificates
        .iter()
        .map(|c| {
            let part = serde_json::to_value(c.part).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            field_out(&c.certificate.map, &format!("{part}_map"), out, &mut written)
        })
        .collect::<Result<Vec<_>>>()?;
    emit(out, &to_json(&CongruenceOutput { report: &report, maps })?, &mut written)?;
    let mut summary = format!(
        "congruence: {} ({})",
        if report.congruent { "congruent" } else { "not congruent" },
        if report.exact { "exact" } else { "heuristic" }
    );
    if let Some(d) = &report.distinguishing {
        let _ = write!(
            summary,
            "\n  distinguishing germ in the {:?} part of the {} form: {} side of {}, order {}",
            d.part,
            if d.in_first { "first" } else { "second" },
            d.germ.side.name(),
            d.germ.location,
            d.germ.order.value()
        );
    }
    Ok(Outcome { exit: if report.exact { EXIT_DECIDED } else { EXIT_HEURISTIC }, summary, written })
}

#[derive(Serialize)]
struct SplitOutput {
    reassembly_residual: f64,
    positive: Option<FieldDesc>,
    negative: Option<FieldDesc>,
    positive_signature: Option<GermSignature>,
    negative_signature: Option<GermSignature>,
}

pub fn run_split(problem: &Problem, out: Option<&Path>) -> Result<Outcome> {
    let split = pos_neg_split(&problem.form()?)?;
    let mut written = Vec::new();
    let (p, m) = (&split.positive.object, &split.negative.object);
    let symbolic = p.alpha().as_symbolic().is_some();
    let sig = |x: &TorsionObject| if symbolic { germ_signature(x).map(Some) } else { Ok(None) };
    let output = SplitOutput {
        reassembly_residual: split.reassembly_residual,
        positive: field_out(p.alpha(), "positive", out, &mut written)?,
        negative: field_out(m.alpha(), "negative", out, &mut written)?,
        positive_signature: sig(p)?,
        negative_signature: sig(m)?,
    };
    emit(out, &to_json(&output)?, &mut written)?;
    let summary = format!(
        "split: reassembly residual {:e}\n  positive part: {}\n  negative part: {}",
        split.reassembly_residual,
        describe(&output.positive_signature),
        describe(&output.negative_signature)
    );
    Ok(Outcome { exit: EXIT_DECIDED, summary, written })
}

#[derive(Serialize)]
struct MetabolizerOutput {
    check: MetabolizerCheck,
    beta: Option<FieldDesc>,
    delta: Option<FieldDesc>,
    inclusion: Option<FieldDesc>,
}

pub fn run_metabolizer(problem: &Problem, out: Option<&Path>) -> Result<Outcome> {
    let m = metabolizer(&problem.form()?)?;
    let mut written = Vec::new();
    let output = MetabolizerOutput {
        check: m.check,
        beta: field_out(&m.beta, "beta", out, &mut written)?,
        delta: field_out(&m.delta, "delta", out, &mut written)?,
        inclusion: field_out(&m.inclusion, "inclusion", out, &mut written)?,
    };
    emit(out, &to_json(&output)?, &mut written)?;
    let summary = format!(
        "metabolizer: δ-criterion {:?} (sup δ = {:e}, inf δ = {:e})",
        m.check.decision, m.check.delta_sup, m.check.delta_inf
    );
    let exit = if m.check.decision == Decision::Yes { EXIT_DECIDED } else { EXIT_HEURISTIC };
    Ok(Outcome { exit, summary, written })
}

/// λ window and point count for a density curve; command-line values win
/// over the problem file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DensityArgs {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub points: Option<usize>,
}

pub fn run_density(problem: &Problem, args: DensityArgs, out: Option<&Path>) -> Result<Outcome> {
    let p = &problem.file.params;
    let lmin = args.lambda_min.or(p.lambda_min).unwrap_or(LAMBDA_WINDOW.0);
    let lmax = args.lambda_max.or(p.lambda_max).unwrap_or(LAMBDA_WINDOW.1);
    let points = args.points.or(p.points).unwrap_or(DEFAULT_POINTS);
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(invalid("points", format!("points must lie in 2..={MAX_POINTS}, got {points}")));
    }
    let x = TorsionObject::new(problem.field(p.alpha.as_deref().unwrap_or("alpha"))?)?;
    let curve = density_curve_on(&x, problem.grid(), lmin, lmax, points)?;
    let mut csv = String::from("lambda,F\n");
    for (l, v) in curve.lambdas.iter().zip(&curve.values) {
        let _ = writeln!(csv, "{l:e},{v:e}");
    }
    let mut written = Vec::new();
    emit(out, &csv, &mut written)?;
    let summary = match ns_exponent(&curve) {
        Ok(e) => format!("density: {points} points on [{lmin:e}, {lmax:e}], fitted exponent {e:.6}"),
        Err(e) => format!("density: {points} points on [{lmin:e}, {lmax:e}], no exponent fit ({e})"),
    };
    Ok(Outcome { exit: EXIT_DECIDED, summary, written })
}

pub fn run_check_task(seed: u64, suite: Suite, out: Option<&Path>) -> Result<Outcome> {
    let report: CheckReport = run_check(seed, suite);
    let mut written = Vec::new();
    emit(out, &to_json(&report)?, &mut written)?;
    let mut summary = format!("check (seed {seed}): {} passed, {} failed", report.passed, report.failed);
    for p in report.properties.iter().filter(|p| p.failed > 0) {
        let _ = write!(summary, "\n  {}: {} of {} failed", p.name, p.failed, p.cases);
    }
    Ok(Outcome { exit: if report.all_passed() { EXIT_DECIDED } else { EXIT_ERROR }, summary, written })
}

/// Runs the task named in the problem file.
pub fn run(problem: &Problem, out: Option<&Path>) -> Result<Outcome> {
    let task = problem.file.task.ok_or_else(|| invalid("task", "problem file names no task"))?;
    match task {
        Task::Classify => run_classify(problem, out),
        Task::Congruence => run_congruence(&problem.form()?, &problem.other_form()?, out),
        Task::Split => run_split(problem, out),
        Task::Metabolizer => run_metabolizer(problem, out),
        Task::Density => run_density(problem, DensityArgs::default(), out),
        Task::Check => {
            let p = &problem.file.params;
            run_check_task(p.seed.unwrap_or(0), p.suite.unwrap_or(Suite::All), out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINEAR: &str = r#"{"fields": {"alpha": {"kind": "scalar_symbolic", "expr": "z - 0.5",
        "zeros": [{"at": 0.5, "order": 1, "left": "-", "right": "+", "coeff": 1}]}}, "task": "classify"}"#;

    fn problem(src: &str) -> Problem {
        Problem { file: ProblemFile::parse(src).unwrap(), base: PathBuf::from("."), grid_override: None }
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        match ProblemFile::parse("{\n  \"fields\": {,\n}") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 14)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors_name_the_field() {
        let e = ProblemFile::parse(r#"{"fields": {}, "task": "classify", "bogus": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Validation { ref field, .. } if field == "bogus"), "{e:?}");
        let e = ProblemFile::parse(r#"{"fields": {"alpha": {"kind": "scalar_symbolic", "expr": "1"}},
            "params": {"f": "g"}}"#)
        .unwrap_err();
        assert!(matches!(e, Error::Validation { ref field, .. } if field == "params.f"), "{e:?}");
    }

    #[test]
    fn malformed_expression_reports_its_position() {
        let p = problem(r#"{"fields": {"alpha": {"kind": "scalar_symbolic", "expr": "z - * 2"}}, "task": "classify"}"#);
        assert!(matches!(p.form(), Err(Error::Parse { column: 5, .. })), "{:?}", p.form());
    }

    #[test]
    fn classify_linear_germ_is_decided() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let o = run(&problem(LINEAR), Some(&out)).unwrap();
        assert_eq!(o.exit, EXIT_DECIDED);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["mode"], "exact-symbolic");
        assert_eq!(v["positive"][0]["order"].as_f64(), Some(1.0));
        assert_eq!(v["negative"][0]["side"], "left");
    }

    #[test]
    fn split_writes_sampled_parts_next_to_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("alpha.bin");
        let alpha = OperatorField::from_fn(64, |z| crate::linalg::CMat::from_real_diag(&[z - 0.5, 1.0])).unwrap();
        write_sampled(&data, &alpha).unwrap();
        let src = r#"{"fields": {"alpha": {"kind": "sampled", "dim": 2, "grid": 64, "data": "alpha.bin"}}, "task": "split"}"#;
        let path = dir.path().join("p.json");
        std::fs::write(&path, src).unwrap();
        let p = Problem::load(&path, None).unwrap();
        let out = dir.path().join("split.json");
        let o = run(&p, Some(&out)).unwrap();
        assert_eq!(o.written.len(), 3);
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["positive"]["data"], "split.positive.bin");
        let back = FieldDesc::Sampled { dim: 2, grid: 64, data: "split.positive.bin".into() }.load("positive", dir.path());
        assert!(back.unwrap().is_hermitian());
        assert!(matches!(Problem::load(&path, Some(128)).unwrap().form(), Err(Error::Validation { .. })));
    }

    #[test]
    fn density_csv_has_the_documented_header() {
        let src = r#"{"fields": {"alpha": {"kind": "scalar_symbolic", "expr": "abs(z - 0.5)",
            "zeros": [{"at": 0.5, "order": 1, "left": "+", "right": "+", "coeff": 1}]}},
            "params": {"points": 20}}"#;
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("curve.csv");
        run_density(&problem(src), DensityArgs::default(), Some(&out)).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lambda,F"));
        let rows: Vec<(f64, f64)> = lines
            .map(|l| {
                let (a, b) = l.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect();
        assert_eq!(rows.len(), 20);
        let (l, f) = rows[19];
        assert!((f - 2.0 * l).abs() < 2e-3, "{l} {f}");
    }
}
