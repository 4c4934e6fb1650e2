//! The command-line interface.
//!
//! Exit codes: `0` the answer is yes (derivable, admissible, unifiable,
//! generated), `1` the answer is no (refuted, inadmissible, not unifiable),
//! `2` usage or input error, `3` the bounded search gave no verdict or ran
//! out of budget (with a `reason`).

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::admissibility::{self, AdmOptions, AdmStatus, Rule, TppMode};
use crate::derivability::{derives_with, is_theorem, DeriveOptions, Engine};
use crate::error::{Error, Result};
use crate::frames::{self, FrameJson, FrameMap, Model, Transform};
use crate::logics::{self, LogicSpec};
use crate::oracle::{self, EnumerationSpec};
use crate::reductions::{self, Family, Pattern, Source, Witness};
use crate::syntax::{apply, parse, Atom, Formula};
use crate::translations::{self, TranslationKind};

pub const EXIT_TRUE: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "transmodal",
    version,
    about = "Derivability, admissibility and unification in transitive modal logics"
)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide `Γ ⊢_L φ`; prints a countermodel when refuted.
    Derive(DeriveArgs),
    /// Decide admissibility of a rule `Γ / Δ`.
    Admissible(AdmissibleArgs),
    /// Decide whether a formula has a unifier (parameters stay fixed).
    Unifiable(UnifiableArgs),
    /// Apply a translation to a formula.
    Translate(TranslateArgs),
    /// Generate a hard instance from a source sentence.
    Reduce(ReduceArgs),
    /// Frame analytics, maps and constructions.
    #[command(subcommand)]
    Frame(FrameCommand),
    /// Dump a finite stage of the universal frame.
    Universal(UniversalArgs),
    /// Brute-force baselines.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Generate and verify batches of random instances.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct LogicArg {
    /// A preset (K4, S4, GL, S4Grz, K4Grz, S4.3, GL.3, S4Grz.3, K4.3, S5, Verum)
    /// with optional `+BD<d>`, `+BB<k>`, `+CL<c>` modifiers.
    #[arg(long, default_value = "K4")]
    logic: String,
}

impl LogicArg {
    fn get(&self) -> Result<LogicSpec> {
        logics::preset(&self.logic)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Auto,
    Recursive,
    Chain,
    Literal,
}

#[derive(Args, Debug)]
struct DeriveArgs {
    #[command(flatten)]
    logic: LogicArg,
    /// Premises, separated by `;`.
    #[arg(long, default_value = "")]
    premises: String,
    #[arg(long, value_enum, default_value = "auto")]
    engine: EngineArg,
    /// Bound on search steps.
    #[arg(long, default_value_t = crate::derivability::DEFAULT_BUDGET)]
    budget: u64,
    /// Conclusion; several may be given as `φ1;φ2` (derivable if one is).
    formula: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Displayed,
    Full,
}

#[derive(Args, Debug)]
struct AdmissibleArgs {
    #[command(flatten)]
    logic: LogicArg,
    /// Premises, separated by `;`.
    #[arg(long, default_value = "")]
    premises: String,
    /// Conclusions, separated by `;` (empty for `Γ / ∅`).
    #[arg(long, default_value = "")]
    conclusions: String,
    /// Largest model size searched where no complete engine applies.
    #[arg(long, default_value_t = admissibility::DEFAULT_CAP)]
    cap: usize,
    /// Which tight-pseudopredecessor clauses the general engine checks.
    #[arg(long, value_enum, default_value = "displayed")]
    mode: ModeArg,
}

#[derive(Args, Debug)]
struct UnifiableArgs {
    #[command(flatten)]
    logic: LogicArg,
    formula: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Gmt,
    Boxdot,
    Effboxdot,
    Relativize,
}

#[derive(Args, Debug)]
struct TranslateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// The relativizing atom, e.g. `p3`.
    #[arg(long)]
    r: Option<String>,
    formula: String,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    family: String,
    /// Source sentence JSON (`-` for standard input).
    #[arg(long = "in")]
    input: PathBuf,
    /// Write the instance here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum FrameCommand {
    /// Clusters, skeleton, depth, width, rootedness.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Evaluate a formula at a point (or everywhere).
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        point: Option<usize>,
        formula: String,
    },
    /// Check a partial map against its declared kind.
    CheckMap {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Map JSON: `{"map":[0,null,1],"kind":"subreduction","cofinal":false,"onto":false}`.
        #[arg(long)]
        map: PathBuf,
    },
    /// Apply a construction.
    Transform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        op: TransformArg,
        /// Points generating the subframe, as `0,2,3`.
        #[arg(long, value_delimiter = ',')]
        points: Vec<usize>,
        /// Further summands for `sum`.
        #[arg(long = "with")]
        with: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransformArg {
    Generated,
    Sum,
    Reflexivize,
    Skeleton,
}

#[derive(Args, Debug)]
struct UniversalArgs {
    #[command(flatten)]
    logic: LogicArg,
    /// Parameters as `p0,p1`.
    #[arg(long, value_delimiter = ',')]
    params: Vec<String>,
    #[arg(long, default_value_t = 1)]
    stages: usize,
    /// Largest number of points created.
    #[arg(long, default_value_t = 4096)]
    budget: usize,
    /// Also print the characteristic formula of each point (parameter-free frames only).
    #[arg(long)]
    beta: bool,
}

#[derive(Subcommand, Debug)]
enum OracleCommand {
    /// Enumerate frames up to isomorphism.
    Enumerate {
        #[arg(long, default_value_t = 3)]
        max: usize,
        #[arg(long)]
        logic: Option<String>,
        #[arg(long)]
        rooted: bool,
    },
    /// Search for a countermodel of bounded size.
    Refute {
        #[command(flatten)]
        logic: LogicArg,
        #[arg(long, default_value_t = 4)]
        cap: usize,
        formula: String,
    },
    /// Search for a valuation of the variables making a formula true everywhere.
    UnifyValuation {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        formula: String,
    },
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value = "qbf")]
    family: String,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Set size `n` of third-order sentences.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Number of set variables, or bits per QBF block.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Number of QBF blocks.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Largest matrix size.
    #[arg(long, default_value_t = 9)]
    size: u64,
    /// Decide each instance and compare with the source sentence.
    #[arg(long)]
    verify: bool,
}

/// Run the CLI on the given arguments (including the program name),
/// writing to standard output and standard error; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_TRUE };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let json = cli.json;
    let mut ctx = Output { out, json };
    match dispatch(cli.command, &mut ctx) {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_TRUE,
        Err(e) => {
            let (code, kind) = match e {
                Error::Budget(_) | Error::Unsupported(_) => (EXIT_UNKNOWN, "unknown"),
                _ => (EXIT_USAGE, "error"),
            };
            if json {
                let v = json!({ "verdict": kind, "reason": e.to_string() });
                let _ = writeln!(ctx.out, "{v}");
            } else {
                let _ = writeln!(err, "{kind}: {e}");
            }
            code
        }
    }
}

struct Output<'a> {
    out: &'a mut dyn Write,
    json: bool,
}

impl Output<'_> {
    /// Print `text` in text mode or `value` as JSON.
    fn emit<S: Serialize>(&mut self, text: &str, value: &S) -> Result<()> {
        if self.json {
            writeln!(self.out, "{}", serde_json::to_string(value)?)?;
        } else {
            writeln!(self.out, "{text}")?;
        }
        Ok(())
    }
}

fn formulas(list: &str) -> Result<Vec<Formula>> {
    list.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

fn read_model(path: &Path) -> Result<Model> {
    let j: FrameJson = serde_json::from_str(&read_input(path)?)?;
    j.to_model()
}

fn model_json(m: &Model) -> FrameJson {
    FrameJson::from_model(m)
}

fn bool_exit(b: bool) -> i32 {
    if b {
        EXIT_TRUE
    } else {
        EXIT_FALSE
    }
}

fn dispatch(cmd: Command, o: &mut Output) -> Result<i32> {
    match cmd {
        Command::Derive(a) => derive(a, o),
        Command::Admissible(a) => admissible(a, o),
        Command::Unifiable(a) => unifiable(a, o),
        Command::Translate(a) => translate(a, o),
        Command::Reduce(a) => reduce(a, o),
        Command::Frame(c) => frame(c, o),
        Command::Universal(a) => universal(a, o),
        Command::Oracle(c) => oracle_cmd(c, o),
        Command::Bench(a) => bench(a, o),
    }
}

fn derive(a: DeriveArgs, o: &mut Output) -> Result<i32> {
    let l = a.logic.get()?;
    let gamma = formulas(&a.premises)?;
    let delta = formulas(&a.formula)?;
    if delta.is_empty() {
        return Err(Error::Invalid("no conclusion given".into()));
    }
    let engine = match a.engine {
        EngineArg::Auto => Engine::Auto,
        EngineArg::Recursive => Engine::Recursive,
        EngineArg::Chain => Engine::Chain,
        EngineArg::Literal => Engine::Literal,
    };
    let v = derives_with(
        &l,
        &gamma,
        &delta,
        &DeriveOptions {
            engine,
            budget: a.budget,
        },
    )?;
    if o.json {
        o.emit("", &v)?;
    } else if v.derivable {
        writeln!(o.out, "derivable in {}", l.name)?;
    } else {
        writeln!(o.out, "not derivable in {}", l.name)?;
        if let Some(c) = &v.countermodel {
            let mut j = model_json(&c.model);
            j.root = Some(c.root);
            writeln!(o.out, "{}", serde_json::to_string(&j)?)?;
        }
    }
    Ok(bool_exit(v.derivable))
}

fn admissible(a: AdmissibleArgs, o: &mut Output) -> Result<i32> {
    let l = a.logic.get()?;
    let rule = Rule::new(formulas(&a.premises)?, formulas(&a.conclusions)?);
    let v = match a.mode {
        ModeArg::Displayed => admissibility::admissible(&l, &rule, a.cap)?,
        ModeArg::Full => {
            let opts = AdmOptions {
                cap: a.cap,
                mode: TppMode::FullSigma,
                ..AdmOptions::default()
            };
            admissibility::admissible_clx_with(&l, &rule, &opts)?
        }
    };
    let text = match v.status {
        AdmStatus::Admissible => format!("admissible in {} ({})", l.name, v.method),
        AdmStatus::Inadmissible => format!("inadmissible in {} ({})", l.name, v.method),
        AdmStatus::BoundedAdmissible => format!(
            "no counterexample up to {} points in {} ({})",
            v.cap.unwrap_or(a.cap),
            l.name,
            v.method
        ),
    };
    if o.json {
        let mut value = serde_json::to_value(&v)?;
        if v.status == AdmStatus::BoundedAdmissible {
            value["reason"] = json!(format!("no counterexample up to {} points", v.cap.unwrap_or(a.cap)));
        }
        o.emit("", &value)?;
    } else {
        writeln!(o.out, "{text}")?;
        if let Some(c) = &v.counterexample {
            writeln!(o.out, "{}", serde_json::to_string(c)?)?;
        }
    }
    Ok(match v.status {
        AdmStatus::Admissible => EXIT_TRUE,
        AdmStatus::Inadmissible => EXIT_FALSE,
        AdmStatus::BoundedAdmissible => EXIT_UNKNOWN,
    })
}

fn unifiable(a: UnifiableArgs, o: &mut Output) -> Result<i32> {
    let l = a.logic.get()?;
    let phi = parse(&a.formula)?;
    let u = admissibility::unifiable(&l, &phi)?;
    let text = match &u {
        admissibility::Unification::Unifiable { method, .. } => format!("unifiable in {} ({method})", l.name),
        admissibility::Unification::NotUnifiable { method } => format!("not unifiable in {} ({method})", l.name),
        admissibility::Unification::Unknown { method, reason } => format!("unknown in {} ({method}): {reason}", l.name),
    };
    o.emit(&text, &u)?;
    Ok(match u.value() {
        Some(b) => bool_exit(b),
        None => EXIT_UNKNOWN,
    })
}

fn translate(a: TranslateArgs, o: &mut Output) -> Result<i32> {
    let phi = parse(&a.formula)?;
    if let KindArg::Effboxdot = a.kind {
        let e = translations::eff_boxdot(&phi);
        o.emit(&e.formula.to_string(), &e)?;
        return Ok(EXIT_TRUE);
    }
    let kind = match a.kind {
        KindArg::Gmt => TranslationKind::Gmt,
        KindArg::Boxdot => TranslationKind::Boxdot,
        KindArg::Relativize => {
            let r =
                a.r.as_deref()
                    .ok_or_else(|| Error::Invalid("relativize needs --r".into()))?;
            TranslationKind::Relativize(Atom::parse_name(r).ok_or_else(|| Error::Invalid(format!("bad atom `{r}`")))?)
        }
        KindArg::Effboxdot => unreachable!(),
    };
    let f = translations::translate(kind, &phi)?;
    o.emit(&f.to_string(), &json!({ "formula": f }))?;
    Ok(EXIT_TRUE)
}

fn reduce(a: ReduceArgs, o: &mut Output) -> Result<i32> {
    let family: Family = a.family.parse()?;
    let text = read_input(&a.input)?;
    let source = if family.takes_qbf() {
        Source::Qbf(serde_json::from_str(&text)?)
    } else {
        Source::Sentence(serde_json::from_str(&text)?)
    };
    let inst = reductions::generate(family, &source)?;
    let body = serde_json::to_string_pretty(&inst)?;
    match &a.out {
        Some(path) => {
            std::fs::write(path, format!("{body}\n"))?;
            let summary = format!(
                "{} instance written to {} (|ξ| = {}, modal depth {})",
                family,
                path.display(),
                inst.stats.xi_size,
                inst.stats.xi_modal_depth
            );
            o.emit(&summary, &inst.stats)?;
        }
        None => writeln!(o.out, "{body}")?,
    }
    Ok(EXIT_TRUE)
}

fn frame(c: FrameCommand, o: &mut Output) -> Result<i32> {
    match c {
        FrameCommand::Analyze { input } => {
            let m = read_model(&input)?;
            let s = frames::analyze(&m.frame);
            let text = format!(
                "{} points, {} clusters, depth {}, width {}, largest cluster {}, {}",
                s.points,
                s.clusters.len(),
                s.depth,
                s.width,
                s.max_cluster,
                if s.rooted { "rooted" } else { "not rooted" }
            );
            o.emit(&text, &s)?;
            Ok(EXIT_TRUE)
        }
        FrameCommand::Check { input, point, formula } => {
            let m = read_model(&input)?;
            let phi = parse(&formula)?;
            let holds = match point {
                Some(w) if w >= m.len() => return Err(Error::Invalid(format!("point {w} out of range"))),
                Some(w) => frames::model_check(&m, w, &phi)?,
                None => m.holds_everywhere(&phi)?,
            };
            o.emit(if holds { "true" } else { "false" }, &json!({ "holds": holds }))?;
            Ok(bool_exit(holds))
        }
        FrameCommand::CheckMap { source, target, map } => {
            let (s, t) = (read_model(&source)?, read_model(&target)?);
            let m: FrameMap = serde_json::from_str(&read_input(&map)?)?;
            let ok = frames::check_map(&m, &s.frame, &t.frame)?;
            o.emit(if ok { "valid" } else { "invalid" }, &json!({ "valid": ok }))?;
            Ok(bool_exit(ok))
        }
        FrameCommand::Transform {
            input,
            op,
            points,
            with,
        } => {
            let m = read_model(&input)?;
            let op = match op {
                TransformArg::Generated => Transform::GeneratedSubframe(points),
                TransformArg::Sum => Transform::DisjointSum(with.iter().map(|p| read_model(p)).collect::<Result<_>>()?),
                TransformArg::Reflexivize => Transform::Reflexivization,
                TransformArg::Skeleton => Transform::Skeleton,
            };
            let r = frames::transform(&m, &op)?;
            let j = model_json(&r);
            writeln!(o.out, "{}", serde_json::to_string(&j)?)?;
            Ok(EXIT_TRUE)
        }
    }
}

fn universal(a: UniversalArgs, o: &mut Output) -> Result<i32> {
    let l = a.logic.get()?;
    let params = a
        .params
        .iter()
        .map(|s| match Atom::parse_name(s) {
            Some(Atom::Param(i)) => Ok(i),
            _ => Err(Error::Invalid(format!("`{s}` is not a parameter"))),
        })
        .collect::<Result<Vec<u32>>>()?;
    let u = frames::universal_frame(&l, &params, a.stages, a.budget)?;
    let beta = if a.beta { Some(frames::beta_formulas(&u)?) } else { None };
    if o.json {
        let value = json!({
            "logic": l.name,
            "stage": u.stage,
            "model": model_json(&u.model),
            "clusters": u.clusters,
            "cluster_of": u.cluster_of,
            "beta": beta,
        });
        o.emit("", &value)?;
    } else {
        writeln!(
            o.out,
            "stage {} of the universal {} frame: {} points in {} clusters",
            u.stage,
            l.name,
            u.model.len(),
            u.clusters.len()
        )?;
        for (c, p) in u.clusters.iter().enumerate() {
            let pts: Vec<usize> = (0..u.model.len()).filter(|&w| u.cluster_of[w] == c).collect();
            writeln!(
                o.out,
                "  cluster {c}: points {pts:?}, {:?}, stage {}, above {:?}, assignments {:?}",
                p.ri, p.stage, p.upset, p.e
            )?;
            if let Some(b) = &beta {
                for &w in &pts {
                    writeln!(o.out, "    β_{w} = {}", b[w])?;
                }
            }
        }
    }
    Ok(EXIT_TRUE)
}

fn oracle_cmd(c: OracleCommand, o: &mut Output) -> Result<i32> {
    match c {
        OracleCommand::Enumerate { max, logic, rooted } => {
            let mut spec = EnumerationSpec::up_to(max);
            if let Some(name) = logic {
                spec = spec.logic(&logics::preset(&name)?);
            }
            if rooted {
                spec = spec.rooted();
            }
            let fs = oracle::enumerate_frames(&spec)?;
            if o.json {
                let all: Vec<FrameJson> = fs.iter().map(|f| model_json(&Model::new(f.clone()))).collect();
                o.emit("", &all)?;
            } else {
                writeln!(o.out, "{} frames", fs.len())?;
            }
            Ok(EXIT_TRUE)
        }
        OracleCommand::Refute { logic, cap, formula } => {
            let l = logic.get()?;
            let phi = parse(&formula)?;
            match oracle::brute_countermodel(&l, &phi, cap)? {
                Some((m, root)) => {
                    let mut j = model_json(&m);
                    j.root = Some(root);
                    let text = format!("refuted\n{}", serde_json::to_string(&j)?);
                    o.emit(&text, &json!({ "refuted": true, "countermodel": j }))?;
                    Ok(EXIT_FALSE)
                }
                None => {
                    let text = format!("no countermodel up to {cap} points");
                    o.emit(&text, &json!({ "refuted": false, "cap": cap }))?;
                    Ok(EXIT_TRUE)
                }
            }
        }
        OracleCommand::UnifyValuation { input, budget, formula } => {
            let m = read_model(&input)?;
            let phi = parse(&formula)?;
            match oracle::brute_valuation_unify(&phi, &m, budget)? {
                Some(v) => {
                    let j = model_json(&v);
                    let text = format!("valuation found\n{}", serde_json::to_string(&j)?);
                    o.emit(&text, &json!({ "found": true, "model": j }))?;
                    Ok(EXIT_TRUE)
                }
                None => {
                    o.emit("no valuation", &json!({ "found": false }))?;
                    Ok(EXIT_FALSE)
                }
            }
        }
    }
}

#[derive(Serialize)]
struct BenchRow {
    index: usize,
    source: String,
    truth: bool,
    xi_size: u64,
    xi_modal_depth: u32,
    /// Outcome of the decision, when `--verify` was given and one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    decided: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    millis: u128,
}

/// Decide the generated instance where an exact procedure is available.
fn bench_decide(inst: &reductions::ReductionInstance, args: &BenchArgs) -> Result<Option<(bool, String)>> {
    match inst.family {
        Family::Qbf => {
            let l = logics::preset(&format!("S4Grz.3+BD{}", args.d))?;
            let v = admissibility::admissible_bddp(&l, &inst.rule(), admissibility::DEFAULT_CAP)?;
            Ok(v.admissible_value()
                .map(|adm| (!adm, format!("unifiability in {}", l.name))))
        }
        Family::Psp1par => {
            let l = logics::preset("GL.3")?;
            let v = admissibility::admissible_linear_clx(&l, &inst.rule())?;
            Ok(v.admissible_value()
                .map(|adm| (!adm, "unifiability in GL.3".to_string())))
        }
        Family::Nexp | Family::Nexp1par | Family::Nexp2par | Family::Nexp0adm => {
            let k4 = logics::preset("K4")?;
            Ok(Some(match &inst.witness {
                Some(Witness::Substitution { substitution }) => (
                    is_theorem(&k4, &apply(substitution, &inst.xi))?,
                    "witness substitution derivable in K4".to_string(),
                ),
                _ => (false, "no witness substitution".to_string()),
            }))
        }
        _ => Ok(None),
    }
}

fn bench(a: BenchArgs, o: &mut Output) -> Result<i32> {
    let family: Family = a.family.parse()?;
    let sources: Vec<Source> = if family.takes_qbf() {
        let m = if family == Family::Psp1par { 1 } else { a.m };
        reductions::random_qbfs(a.seed, a.count, a.d, m, a.size)?
            .into_iter()
            .map(Source::Qbf)
            .collect()
    } else {
        let pattern = match family {
            Family::Conexp => Pattern::Pi2,
            Family::Sig2exp => Pattern::Sigma3,
            _ => Pattern::Sigma2,
        };
        reductions::random_sentences(a.seed, a.count, a.n, a.m, pattern, a.size)?
            .into_iter()
            .map(Source::Sentence)
            .collect()
    };
    let mut mismatches = 0;
    let mut undecided = 0;
    for (index, source) in sources.iter().enumerate() {
        let start = Instant::now();
        let (truth, text) = match source {
            Source::Qbf(q) => (q.is_true()?, q.to_string()),
            Source::Sentence(s) => (s.is_true()?, s.to_string()),
        };
        let inst = reductions::generate(family, source)?;
        let (decided, method) = if a.verify {
            match bench_decide(&inst, &a)? {
                Some((d, m)) => (Some(d), Some(m)),
                None => (None, None),
            }
        } else {
            (None, None)
        };
        match decided {
            Some(d) if d != truth => mismatches += 1,
            None if a.verify => undecided += 1,
            _ => {}
        }
        let row = BenchRow {
            index,
            source: text,
            truth,
            xi_size: inst.stats.xi_size,
            xi_modal_depth: inst.stats.xi_modal_depth,
            decided,
            method,
            millis: start.elapsed().as_millis(),
        };
        let line = format!(
            "{index:3}  {:5}  |ξ| = {:6}  {}  {} ms  {}",
            row.truth,
            row.xi_size,
            match row.decided {
                Some(d) if d == truth => "agrees",
                Some(_) => "DISAGREES",
                None => "-",
            },
            row.millis,
            row.source
        );
        o.emit(&line, &row)?;
    }
    if !o.json {
        writeln!(
            o.out,
            "{} instances, {mismatches} disagreements, {undecided} undecided",
            sources.len()
        )?;
    }
    Ok(if mismatches > 0 {
        EXIT_FALSE
    } else if undecided > 0 {
        EXIT_UNKNOWN
    } else {
        EXIT_TRUE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("transmodal").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_args(&["derive", "--logic", "GL", "[]([]x0 -> x0) -> []x0"]).0, 0);
        assert_eq!(run_args(&["derive", "--logic", "K4", "[]x0 -> x0"]).0, 1);
        assert_eq!(run_args(&["unifiable", "--logic", "K4", "p0"]).0, 1);
        assert_eq!(run_args(&["unifiable", "--logic", "K4", "x0 | p0"]).0, 0);
        assert_eq!(run_args(&["derive", "--logic", "Nope", "x0"]).0, 2);
        assert_eq!(run_args(&["derive", "--logic", "K4", "x0 &"]).0, 2);
        assert_eq!(run_args(&["frobnicate"]).0, 2);
    }

    #[test]
    fn admissible_codes() {
        let (code, _) = run_args(&[
            "admissible",
            "--logic",
            "S4.3",
            "--premises",
            "[]x0 | []x1",
            "--conclusions",
            "x0;x1",
        ]);
        assert_eq!(code, 1);
        let (code, out) = run_args(&[
            "--json",
            "admissible",
            "--logic",
            "K4",
            "--premises",
            "p0",
            "--cap",
            "3",
        ]);
        assert_eq!(code, 3);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert!(v["reason"].is_string());
    }

    #[test]
    fn translate_output() {
        let (code, out) = run_args(&["translate", "--kind", "boxdot", "[]x0"]);
        assert_eq!(code, 0);
        assert_eq!(parse(out.trim()).unwrap(), parse("[.]x0").unwrap());
        assert_eq!(
            run_args(&["translate", "--kind", "relativize", "--r", "p0", "[]p0"]).0,
            2
        );
    }
}
