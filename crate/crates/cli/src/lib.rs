//! Command implementations for the `limp` binary.
//!
//! Every command returns a [`Report`]: lines of the form `STATUS\tdetail`
//! and a success flag that becomes the exit code.

use std::collections::BTreeSet;
use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use limp_core::corpus::LawSuite;
use limp_core::filters::{Bounds, DEFAULT_WIDTH};
use limp_core::grammar::{parse_bindings, parse_store_bindings, parse_subtype_query, parse_term, parse_type};
use limp_core::semantics::{eval_with_store, rewrite_normalize, type_members, EvalResult, Store};
use limp_core::subtyping::{leq, ClosureOracle};
use limp_core::syntax::{Computation, Location, Term};
use limp_core::types::{enumerate_types, NormalType, Sort, TypeExpr};
use limp_core::typing::{
    check_derivation, derivation_from_str, derivation_to_string, derive_search, enumerate_derivable_types, Context,
    Judgment, TypeSet,
};

#[derive(Parser, Debug)]
#[command(name = "limp", version, about = "Imperative lambda-calculus with intersection types")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a term (or a type) and print its canonical form.
    Parse {
        #[command(flatten)]
        input: Input,
        /// Read the input as a type.
        #[arg(long = "type")]
        as_type: bool,
    },
    /// Decide `A <= B`.
    Subtype {
        query: String,
        /// Also ask the saturation oracle.
        #[arg(long)]
        oracle: bool,
        /// Depth of the oracle universe.
        #[arg(long, default_value_t = 2)]
        depth: usize,
    },
    /// Search for a derivation of `ctx |- M : A`, or verify one.
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long = "type", short = 't')]
        ty: Option<String>,
        #[arg(long, default_value = "")]
        ctx: String,
        /// Write the derivation found as JSON.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Check a derivation file instead of searching.
        #[arg(long)]
        verify: Option<PathBuf>,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// List the derivable types of a term up to a depth.
    Infer {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value = "")]
        ctx: String,
        /// Diff against the semantic membership set.
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        bounds: BoundsArgs,
    },
    /// Run a closed computation.
    Eval {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Mode::Store)]
        mode: Mode,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        /// Initial store, e.g. `l0 = \x. [x]`.
        #[arg(long, default_value = "")]
        store: String,
    },
    /// Check the five equations on generated instances.
    Laws {
        #[arg(long, default_value_t = 4)]
        size: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seeded instances per law on top of the exhaustive ones.
        #[arg(long, default_value_t = 10)]
        samples: usize,
        /// Restrict to one law (1 to 5).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        law: Option<u8>,
    },
    /// Compare the subtyping decision with the saturation oracle.
    Oracle {
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value = "l0")]
        locs: String,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rewrite,
    Store,
}

/// A term from a file (`-` for stdin) or inline with `-e`.
#[derive(Args, Debug)]
pub struct Input {
    pub file: Option<PathBuf>,
    #[arg(short = 'e', long = "expr", conflicts_with = "file")]
    pub expr: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct BoundsArgs {
    /// Depth of existential witness types.
    #[arg(long)]
    pub wdepth: Option<usize>,
    /// Width of existential witness types.
    #[arg(long)]
    pub wwidth: Option<usize>,
    /// Extra locations, e.g. `l0,l1`.
    #[arg(long)]
    pub locs: Option<String>,
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub lines: Vec<String>,
    pub ok: bool,
}

impl Report {
    fn new() -> Self {
        Report { lines: Vec::new(), ok: true }
    }

    fn line(&mut self, status: &str, detail: impl AsRef<str>) {
        self.lines.push(format!("{status}\t{}", detail.as_ref()));
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|l| format!("{l}\n")).collect()
    }
}

impl Input {
    fn read(&self) -> Result<String> {
        match (&self.expr, &self.file) {
            (Some(e), _) => Ok(e.clone()),
            (None, Some(p)) if p == Path::new("-") => {
                let mut s = String::new();
                std::io::stdin().read_to_string(&mut s)?;
                Ok(s)
            }
            (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
            (None, None) => bail!("no input: give a file or -e"),
        }
    }

    fn term(&self) -> Result<Term> {
        let src = self.read()?;
        parse_term(&src).map_err(|e| anyhow!("{}", located(&src, e.pos, &e.msg)))
    }
}

/// `line:col: msg` for a byte offset.
fn located(src: &str, pos: usize, msg: &str) -> String {
    let before = &src[..pos.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("{line}:{col}: {msg}")
}

fn ty(src: &str) -> Result<TypeExpr> {
    let t = parse_type(src).map_err(|e| anyhow!("type {}", located(src, e.pos, &e.msg)))?;
    t.sort()?;
    Ok(t)
}

pub fn parse_locs(src: &str) -> Result<BTreeSet<Location>> {
    src.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.strip_prefix('l')
                .and_then(|n| n.parse().ok())
                .map(Location)
                .ok_or_else(|| anyhow!("bad location `{s}`"))
        })
        .collect()
}

fn context(src: &str) -> Result<Context> {
    let mut ctx = Context::new();
    for (x, t) in parse_bindings(src).map_err(|e| anyhow!("context {}", located(src, e.pos, &e.msg)))? {
        let s = t.sort()?;
        if s != Sort::Value {
            bail!("context entry `{x}` has a type of sort {s}, not a value type");
        }
        ctx.insert(x, t.normalize());
    }
    Ok(ctx)
}

fn locations_of(t: &Term, ctx: &Context) -> BTreeSet<Location> {
    let mut locs = t.locations();
    for d in ctx.values() {
        d.locations(&mut locs);
    }
    locs
}

impl BoundsArgs {
    /// Explicit flags win; otherwise `default` supplies the depth and the
    /// locations always include those mentioned by the inputs.
    fn resolve(&self, default: Bounds, mentioned: &BTreeSet<Location>) -> Result<Bounds> {
        let mut locs = default.locs;
        locs.extend(mentioned.iter().copied());
        if let Some(src) = &self.locs {
            locs.extend(parse_locs(src)?);
        }
        let width = self.wwidth.unwrap_or(default.witness_width);
        if width == 0 {
            bail!("--wwidth must be at least 1");
        }
        Ok(Bounds::new(self.wdepth.unwrap_or(default.witness_depth), width, locs))
    }
}

fn describe(b: &Bounds) -> String {
    let locs: Vec<String> = b.locs.iter().map(|l| l.to_string()).collect();
    format!("wdepth={} wwidth={} locs={}", b.witness_depth, b.witness_width, locs.join(","))
}

pub fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Parse { input, as_type } => cmd_parse(input, *as_type),
        Command::Subtype { query, oracle, depth } => cmd_subtype(query, *oracle, *depth),
        Command::Check { input, ty, ctx, emit, verify, bounds } => {
            cmd_check(input, ty.as_deref(), ctx, emit.as_deref(), verify.as_deref(), bounds)
        }
        Command::Infer { input, depth, ctx, compare, bounds } => cmd_infer(input, *depth, ctx, *compare, bounds),
        Command::Eval { input, mode, fuel, store } => cmd_eval(input, *mode, *fuel, store),
        Command::Laws { size, depth, seed, samples, law } => cmd_laws(*size, *depth, *seed, *samples, *law),
        Command::Oracle { depth, locs } => cmd_oracle(*depth, &parse_locs(locs)?),
    }
}

pub fn cmd_parse(input: &Input, as_type: bool) -> Result<Report> {
    let mut r = Report::new();
    if as_type {
        let t = ty(&input.read()?)?;
        r.line("OK", format!("{}\t{}", t.sort()?, t.normalize()));
    } else {
        let t = input.term()?;
        let sort = match t {
            Term::Value(_) => "value",
            Term::Comp(_) => "computation",
        };
        r.line("OK", format!("{sort}\t{t}"));
    }
    Ok(r)
}

pub fn cmd_subtype(query: &str, oracle: bool, depth: usize) -> Result<Report> {
    let (a, b) = parse_subtype_query(query).map_err(|e| anyhow!("{}", located(query, e.pos, &e.msg)))?;
    let answer = leq(&a, &b)?;
    let mut r = Report::new();
    r.line(if answer { "true" } else { "false" }, format!("{a} <= {b}"));
    if oracle {
        let (na, nb) = (a.normalize(), b.normalize());
        let mut locs = BTreeSet::from([Location(0)]);
        na.locations(&mut locs);
        nb.locations(&mut locs);
        let mut universe = vec![na.clone(), nb.clone()];
        for s in Sort::ALL {
            universe.extend(enumerate_types(s, depth, &locs)?);
        }
        let slow = ClosureOracle::new(&universe).leq(&na, &nb)?;
        if slow == answer {
            r.line("AGREE", format!("oracle at depth {depth}: {slow}"));
        } else {
            r.line("DISAGREE", format!("oracle at depth {depth}: {slow}"));
            r.ok = false;
        }
    }
    Ok(r)
}

pub fn cmd_check(
    input: &Input,
    ty_src: Option<&str>,
    ctx_src: &str,
    emit: Option<&Path>,
    verify: Option<&Path>,
    bounds: &BoundsArgs,
) -> Result<Report> {
    let mut r = Report::new();
    if let Some(path) = verify {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let d = derivation_from_str(&text)?;
        match check_derivation(&d) {
            Ok(()) => r.line("VALID", d.conclusion.to_string()),
            Err(e) => {
                r.line("INVALID", e.to_string());
                r.ok = false;
            }
        }
        return Ok(r);
    }
    let term = input.term()?;
    let target = ty(ty_src.ok_or_else(|| anyhow!("check needs --type (or --verify)"))?)?.normalize();
    let ctx = context(ctx_src)?;
    let b = bounds.resolve(Bounds::for_target(&target, &BTreeSet::new()), &locations_of(&term, &ctx))?;
    let j = Judgment::new(ctx, term, target);
    if !j.subject.free_vars().iter().all(|x| j.ctx.contains_key(x)) {
        r.line("NOTE", "free variables without a context entry are typed only by wD");
    }
    match derive_search(&j, &b) {
        Some(d) => {
            r.line("DERIVABLE", format!("{j}\tderivation size {}", d.size()));
            if let Some(path) = emit {
                fs::write(path, derivation_to_string(&d)).with_context(|| format!("writing {}", path.display()))?;
                r.line("EMITTED", path.display().to_string());
            }
        }
        None => {
            r.line("NOT-FOUND-WITHIN-BOUNDS", format!("{j}\t{}", describe(&b)));
            r.ok = false;
        }
    }
    Ok(r)
}

fn listing(set: &TypeSet) -> Vec<String> {
    let mut types: Vec<NormalType> = std::iter::once(NormalType::omega(set.sort))
        .chain(set.atoms.iter().map(|a| NormalType::atom(a.clone())))
        .collect();
    types.sort_by(|a, b| a.enumeration_key().cmp(&b.enumeration_key()));
    types.iter().map(|t| t.to_string()).collect()
}

pub fn cmd_infer(input: &Input, depth: usize, ctx_src: &str, compare: bool, bounds: &BoundsArgs) -> Result<Report> {
    let term = input.term()?;
    let ctx = context(ctx_src)?;
    let default = Bounds::new(depth + 1, DEFAULT_WIDTH, BTreeSet::from([Location(0)]));
    let b = bounds.resolve(default, &locations_of(&term, &ctx))?;
    let derivable = enumerate_derivable_types(&ctx, &term, depth, &b)?;
    let mut r = Report::new();
    for t in listing(&derivable) {
        r.line("TYPE", t);
    }
    r.line(
        "OK",
        format!("{} generating types at depth {depth}; every meet of them is derivable; {}", derivable.atoms.len() + 1, describe(&b)),
    );
    if compare {
        let semantic = type_members(&term, &ctx, depth, &b)?;
        let (only_syn, only_sem) = derivable.diff(&semantic);
        for a in &only_syn {
            r.line("ONLY-DERIVABLE", a.to_string());
        }
        for a in &only_sem {
            r.line("ONLY-SEMANTIC", a.to_string());
        }
        let n = only_syn.len() + only_sem.len();
        r.line(if n == 0 { "PASS" } else { "FAIL" }, format!("{n} discrepancies"));
        r.ok = n == 0;
    }
    Ok(r)
}

pub fn cmd_eval(input: &Input, mode: Mode, fuel: usize, store_src: &str) -> Result<Report> {
    let m: Computation = match input.term()? {
        Term::Comp(m) => m,
        Term::Value(v) => bail!("`{v}` is a value; eval needs a computation"),
    };
    let mut r = Report::new();
    match mode {
        Mode::Rewrite => {
            let fv = m.free_vars();
            if !fv.is_empty() {
                bail!("cannot evaluate an open term; free variables: {}", fv.into_iter().collect::<Vec<_>>().join(", "));
            }
            let out = rewrite_normalize(&m, fuel);
            for (i, s) in out.steps.iter().enumerate() {
                r.line("STEP", format!("{}\tlaw {}\t{}", i + 1, s.law, s.result));
            }
            if out.exhausted {
                r.line("FUEL-EXHAUSTED", format!("after {} steps\t{}", out.steps.len(), out.normal_form));
                r.ok = false;
            } else {
                r.line("NORMAL", format!("{} steps\t{}", out.steps.len(), out.normal_form));
            }
        }
        Mode::Store => {
            let store: Store = parse_store_bindings(store_src)
                .map_err(|e| anyhow!("store {}", located(store_src, e.pos, &e.msg)))?
                .into_iter()
                .collect();
            match eval_with_store(&m, &store, fuel)? {
                EvalResult::Done { value, store } => r.line("DONE", format!("{value}\t{store}")),
                EvalResult::FuelExhausted => {
                    r.line("FUEL-EXHAUSTED", format!("fuel {fuel}"));
                    r.ok = false;
                }
            }
        }
    }
    Ok(r)
}

pub fn cmd_laws(size: usize, depth: usize, seed: u64, samples: usize, law: Option<u8>) -> Result<Report> {
    let mut suite = LawSuite::new(size, depth, seed);
    suite.samples = samples;
    if let Some(l) = law {
        suite.laws = vec![l];
    }
    let report = suite.run();
    Ok(Report { lines: report.render().lines().map(str::to_string).collect(), ok: report.ok() })
}

pub fn cmd_oracle(depth: usize, locs: &BTreeSet<Location>) -> Result<Report> {
    let mut r = Report::new();
    for s in Sort::ALL {
        let u = enumerate_types(s, depth, locs)?;
        let oracle = ClosureOracle::new(&u);
        let mut bad = Vec::new();
        for a in &u {
            for b in &u {
                if limp_core::subtyping::leq_nf(a, b) != oracle.leq(a, b)? {
                    bad.push(format!("{a} <= {b}"));
                }
            }
        }
        let status = if bad.is_empty() { "PASS" } else { "FAIL" };
        r.line(status, format!("{s}: {} pairs, {} discrepancies", u.len() * u.len(), bad.len()));
        for d in bad {
            r.line("DISAGREE", d);
        }
        r.ok &= status == "PASS";
    }
    Ok(r)
}
