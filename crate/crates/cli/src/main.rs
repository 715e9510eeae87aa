//! `hopfp`: type-check and evaluate HO+PFP formulas over labeled transition
//! systems, simulate Turing machines and compile them into fixpoint formulas.
//!
//! Exit codes: 0 true/accept/agree, 1 false/reject/disagree, 2 bad input or
//! violated precondition, 3 budget or resource limit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hopfp::frontend::{parse_formula, parse_lts, parse_tm, parse_type, parse_value, print_formula};
use hopfp::logic::{formula_order, infer_free_types};
use hopfp::machine::{encode_lts, run, Verdict};
use hopfp::reduction::{build_machine_formula, check_size, crossval, type_tower, Mode};
use hopfp::{
    check_well_formed, domain_size, Environment, Error, EvalOptions, Evaluator, Lts,
    ReductionError, ReductionParams, TmSpec, TypingContext,
};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "hopfp",
    version,
    about = "Higher-order fixpoint logic over transition systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a formula is well-formed and print its free variables and order.
    Typecheck {
        /// Formula text, or a file containing it.
        #[arg(long)]
        formula: String,
        /// Declare a free variable's type, e.g. `S=(set (tuple o))`.
        #[arg(long = "decl", value_name = "VAR=TYPE")]
        decls: Vec<String>,
    },
    /// Evaluate a formula on an LTS. Exits 0 if it holds, 1 if not.
    Eval {
        /// LTS description file.
        #[arg(long)]
        lts: PathBuf,
        /// Formula text, or a file containing it.
        #[arg(long)]
        formula: String,
        /// Bind a free variable, e.g. `x=s0` or `S={(s0) (s2)}`.
        #[arg(long = "env", value_name = "VAR=VALUE")]
        env: Vec<String>,
        #[arg(long = "decl", value_name = "VAR=TYPE")]
        decls: Vec<String>,
        /// Print evaluation statistics as a JSON line.
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Run a Turing machine on a word. Exits 0 on accept, 1 on reject.
    Simulate {
        #[arg(long)]
        tm: PathBuf,
        #[arg(long, default_value = "")]
        word: String,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        /// Print every configuration.
        #[arg(long)]
        trace: bool,
    },
    /// Compile a machine and input into the sentence whose truth is acceptance.
    CompileTm {
        #[command(flatten)]
        target: Target,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the simulator and the model checker on the same input and compare.
    Crossval {
        #[command(flatten)]
        target: Target,
        /// Also compare every fixpoint stage with the simulator trace.
        #[arg(long)]
        stages: bool,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Print the number of elements of a type over n states.
    DomainSize {
        #[arg(long = "type")]
        ty: String,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Args)]
struct EvalArgs {
    /// Largest domain a quantifier or fixpoint may enumerate.
    #[arg(long, default_value_t = EvalOptions::default().budget)]
    budget: u64,
    /// Compute outermost fixpoint stages in parallel.
    #[arg(long)]
    parallel: bool,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            budget: self.budget,
            parallel: self.parallel,
            ..EvalOptions::default()
        }
    }
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    tm: PathBuf,
    /// Order parameter: the machine runs in k-fold exponential space.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Tuple width of the index type.
    #[arg(long, default_value_t = 1)]
    c: usize,
    /// Synthetic input word, run on an ordered LTS with `--n` states.
    #[arg(long, conflicts_with = "lts", required_unless_present = "lts")]
    word: Option<String>,
    /// States of the ordered LTS; defaults to the smallest that fits.
    #[arg(long, requires = "word")]
    n: Option<usize>,
    /// LTS whose encoding is the machine input.
    #[arg(long)]
    lts: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure {
            code: if e.is_resource() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

macro_rules! from_via_error {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Failure {
                Error::from(e).into()
            }
        }
    )*};
}
from_via_error!(
    hopfp::ParseError,
    hopfp::TypeError,
    hopfp::DomainError,
    hopfp::EvalError,
    hopfp::MachineError,
    ReductionError
);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Typecheck { formula, decls } => {
            let f = parse_formula(&inline_or_file(&formula)?)?;
            let ctx = infer_free_types(&f, &declarations(&decls)?)?;
            let typed = check_well_formed(&f, &ctx)?;
            for (v, t) in &typed.free {
                println!("{v} : {t}");
            }
            println!("order {}", formula_order(&typed.formula, &typed.free));
            Ok(0)
        }
        Command::Eval {
            lts,
            formula,
            env,
            decls,
            stats,
            eval,
        } => {
            let t = parse_lts(&read(&lts)?)?;
            let f = parse_formula(&inline_or_file(&formula)?)?;
            let ctx = infer_free_types(&f, &declarations(&decls)?)?;
            let typed = check_well_formed(&f, &ctx)?;
            let env = environment(&env, &typed.free, &t)?;
            let (holds, s) =
                Evaluator::with_options(&t, eval.options()).eval_with_stats(&typed, &env)?;
            println!("{holds}");
            if stats {
                #[derive(Serialize)]
                struct Line<'a> {
                    result: bool,
                    stats: &'a hopfp::EvalStats,
                }
                println!(
                    "{}",
                    json(&Line {
                        result: holds,
                        stats: &s
                    })
                );
            }
            Ok(u8::from(!holds))
        }
        Command::Simulate {
            tm,
            word,
            max_steps,
            trace,
        } => {
            let m = parse_tm(&read(&tm)?)?;
            if trace {
                let (_, configs) = hopfp::machine::run_trace(&m, &word, max_steps, u64::MAX)?;
                for c in &configs {
                    println!("{}", c.render(&m));
                }
            }
            let r = run(&m, &word, max_steps, u64::MAX)?;
            println!("{} after {} steps, {} cells", r.verdict, r.steps, r.space);
            Ok(match r.verdict {
                Verdict::Accept => 0,
                Verdict::Reject => 1,
                Verdict::BudgetExceeded => 3,
            })
        }
        Command::CompileTm { target, output } => {
            let m = parse_tm(&read(&target.tm)?)?;
            let (word, n, params) = resolve(&target, &m)?;
            let phi = build_machine_formula(&m, &word, params, n)?;
            let text = format!(
                "; machine formula for `{word}` over {n} states, k = {}, c = {}, order {}\n{}\n",
                params.k,
                params.c,
                formula_order(&phi.formula, &TypingContext::new()),
                print_formula(&phi.formula)
            );
            match output {
                Some(p) => {
                    std::fs::write(&p, text).map_err(|e| usage(format!("{}: {e}", p.display())))?
                }
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Crossval {
            target,
            stages,
            eval,
        } => {
            let m = parse_tm(&read(&target.tm)?)?;
            let (word, n, params) = resolve(&target, &m)?;
            let (t, mode) = match &target.lts {
                Some(p) => (parse_lts(&read(p)?)?, Mode::Encoded),
                None => (Lts::ordered(n), Mode::Synthetic(word)),
            };
            let r = crossval(&m, &t, params, &mode, &eval.options(), stages)?;
            println!("{}", json(&r));
            println!("{}", r.summary());
            let faithful = r.stages.as_ref().is_none_or(|s| s.faithful());
            Ok(u8::from(!(r.agree && faithful)))
        }
        Command::DomainSize { ty, n } => {
            let t = parse_type(&ty)?;
            println!("{}", domain_size(&t, n)?);
            Ok(0)
        }
    }
}

/// The input word, LTS size and parameters of a compile or crossval target.
fn resolve(target: &Target, m: &TmSpec) -> Result<(String, usize, ReductionParams), Failure> {
    if target.k == 0 || target.c == 0 {
        return Err(usage("k and c must be at least 1"));
    }
    let params = ReductionParams::new(target.k, target.c);
    if let Some(p) = &target.lts {
        let t = parse_lts(&read(p)?)?;
        return Ok((encode_lts(&t), t.len(), params));
    }
    let word = target.word.clone().unwrap_or_default();
    let n = match target.n {
        Some(n) => n,
        None => smallest_n(m, &word, params)?,
    };
    check_size(m, n, params)?;
    Ok((word, n, params))
}

fn smallest_n(m: &TmSpec, word: &str, params: ReductionParams) -> Result<usize, Failure> {
    let len = word.chars().count() as u64;
    let mut n = m.states().len().max(m.tape_alphabet().len()).max(params.c);
    loop {
        let (_, _, d) = type_tower(params, n, EvalOptions::default().budget)?;
        if d >= len {
            return Ok(n);
        }
        n += 1;
    }
}

fn declarations(decls: &[String]) -> Result<TypingContext, Failure> {
    decls
        .iter()
        .map(|d| {
            let (v, t) = split_binding(d)?;
            Ok((v.to_string(), parse_type(t)?))
        })
        .collect()
}

fn environment(bindings: &[String], free: &TypingContext, t: &Lts) -> Result<Environment, Failure> {
    let mut env = Environment::new();
    for b in bindings {
        let (v, text) = split_binding(b)?;
        let ty = free
            .get(v)
            .ok_or_else(|| usage(format!("`{v}` is not a free variable of the formula")))?;
        env.insert(v.to_string(), parse_value(text, ty, t)?);
    }
    if let Some(v) = free.keys().find(|v| !env.contains_key(*v)) {
        return Err(usage(format!(
            "free variable `{v}` needs a value (--env {v}=...)"
        )));
    }
    Ok(env)
}

fn split_binding(s: &str) -> Result<(&str, &str), Failure> {
    s.split_once('=')
        .map(|(v, t)| (v.trim(), t.trim()))
        .ok_or_else(|| usage(format!("expected VAR=..., got `{s}`")))
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Formula arguments may be inline text or a path.
fn inline_or_file(arg: &str) -> Result<String, Failure> {
    let p = Path::new(arg);
    if !arg.trim_start().starts_with('(') && p.is_file() {
        read(p)
    } else {
        Ok(arg.to_string())
    }
}

fn json(v: &impl Serialize) -> String {
    serde_json::to_string(v).expect("serializable")
}
