//! Command-line front end: type checking, evaluation, subtyping queries and
//! tallying over `.rlc` source and constraint files.

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser as ClapParser, Subcommand};
use serde::Serialize;

use setrow_core::eval::{eval, Outcome};
use setrow_core::frontend::{self, Parser, QueryKind};
use setrow_core::subtype::is_subtype;
use setrow_core::tally::{solution_satisfies, tally};
use setrow_core::types::{Kind, TypeStore};
use setrow_core::typing::{CheckCfg, Checker, Mode, TypeEnv};

#[derive(ClapParser)]
#[command(
    name = "setrow",
    about = "Record types with rows: checker, evaluator, subtyper, tallying"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    cfg: CfgArgs,
}

#[derive(Args, Clone)]
struct CfgArgs {
    /// Typing mode: practical or complete.
    #[arg(long, default_value = "practical", global = true)]
    mode: String,
    /// Cardinality bound for the instance-subtyping search.
    #[arg(long, default_value_t = 2, global = true)]
    max_card: u32,
    /// Total expansion budget of the application dove-tail search.
    #[arg(long, default_value_t = 4, global = true)]
    budget: u32,
    /// Step budget for tallying and evaluation.
    #[arg(long, default_value_t = 1_000_000, global = true)]
    fuel: u64,
    /// Seed for randomized tooling (reserved; commands here are deterministic).
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Line-delimited JSON output.
    #[arg(long, global = true)]
    machine: bool,
    /// Print every application candidate / tallying solution.
    #[arg(long, global = true)]
    all_solutions: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check the declarations and queries of a source file.
    Check { file: String },
    /// Evaluate the declarations of a source file.
    Eval { file: String },
    /// Decide a subtyping between two types given as text.
    Sub {
        t1: String,
        t2: String,
        /// Check both directions.
        #[arg(long)]
        equiv: bool,
    },
    /// Solve the constraints of a file for substitutions.
    Tally {
        file: String,
        /// Monomorphic variables, comma separated (`a`, `?f`, `@r`).
        #[arg(long, default_value = "")]
        delta: String,
        /// Re-check every solution against the constraints.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Serialize)]
#[serde(tag = "kind")]
enum Line {
    #[serde(rename = "decl")]
    Decl {
        name: String,
        verdict: String,
        r#type: Option<String>,
        error: Option<String>,
    },
    #[serde(rename = "query")]
    Query {
        verdict: bool,
        lhs: String,
        rhs: String,
    },
    #[serde(rename = "sub")]
    Sub { verdict: bool },
    #[serde(rename = "eval")]
    Eval {
        name: String,
        verdict: String,
        value: Option<String>,
    },
    #[serde(rename = "tally")]
    Tally {
        verdict: String,
        substitutions: Vec<Vec<(String, String)>>,
    },
}

fn emit(machine: bool, line: Line, human: String) {
    if machine {
        println!("{}", serde_json::to_string(&line).expect("serializable"));
    } else {
        println!("{}", human);
    }
}

fn cfg_of(args: &CfgArgs) -> Result<CheckCfg, String> {
    let mode = match args.mode.as_str() {
        "practical" => Mode::Practical,
        "complete" => Mode::Complete,
        other => return Err(format!("unknown mode `{}`", other)),
    };
    if args.max_card == 0 || args.budget == 0 || args.fuel == 0 {
        return Err("budgets must be at least 1".into());
    }
    Ok(CheckCfg {
        mode,
        max_card: args.max_card,
        budget: args.budget,
        fuel: args.fuel,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cfg_of(&cli.cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(2);
        }
    };
    let code = match &cli.command {
        Cmd::Check { file } => cmd_check(file, &cfg, &cli.cfg),
        Cmd::Eval { file } => cmd_eval(file, &cli.cfg),
        Cmd::Sub { t1, t2, equiv } => cmd_sub(t1, t2, *equiv, &cli.cfg),
        Cmd::Tally {
            file,
            delta,
            verify,
        } => cmd_tally(file, delta, *verify, &cfg, &cli.cfg),
    };
    ExitCode::from(code)
}

fn read(file: &str) -> Result<String, u8> {
    fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read `{}`: {}", file, e);
        2u8
    })
}

fn cmd_check(file: &str, cfg: &CheckCfg, args: &CfgArgs) -> u8 {
    let text = match read(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let mut st = TypeStore::new();
    let unit = {
        let mut p = match Parser::new(&mut st, &text) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        };
        match p.parse_unit() {
            Ok(u) => u,
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        }
    };
    let checker = Checker::new(cfg.clone());
    let mut env = TypeEnv::default();
    let mut failed = false;
    for (name, annot, expr) in &unit.declarations {
        match checker.type_of(&mut st, &env, expr) {
            Ok(t) => {
                let bound = match annot {
                    Some(a) => {
                        let ok = match setrow_core::tally::leq_sub(
                            &mut st,
                            t,
                            *a,
                            &env.delta,
                            cfg.max_card,
                            cfg.fuel,
                        ) {
                            Ok(r) => r.is_some(),
                            Err(_) => false,
                        };
                        if !ok {
                            failed = true;
                            let msg = format!(
                                "deduced type {} does not match the annotation {}",
                                frontend::print(&mut st, t),
                                frontend::print(&mut st, *a)
                            );
                            emit(
                                args.machine,
                                Line::Decl {
                                    name: name.clone(),
                                    verdict: "type_error".into(),
                                    r#type: None,
                                    error: Some(msg.clone()),
                                },
                                format!("{}: error: {}", name, msg),
                            );
                            continue;
                        }
                        *a
                    }
                    None => t,
                };
                env.gamma.insert(name.clone(), bound);
                let printed = frontend::print(&mut st, bound);
                emit(
                    args.machine,
                    Line::Decl {
                        name: name.clone(),
                        verdict: "ok".into(),
                        r#type: Some(printed.clone()),
                        error: None,
                    },
                    format!("{} : {}", name, printed),
                );
            }
            Err(e) => {
                failed = true;
                emit(
                    args.machine,
                    Line::Decl {
                        name: name.clone(),
                        verdict: "type_error".into(),
                        r#type: None,
                        error: Some(e.to_string()),
                    },
                    format!("{}: error: {}", name, e),
                );
            }
        }
    }
    for &(t1, t2, kind) in &unit.queries {
        let verdict = match kind {
            QueryKind::Sub => is_subtype(&mut st, t1, t2),
            QueryKind::Equiv => is_subtype(&mut st, t1, t2) && is_subtype(&mut st, t2, t1),
        };
        if !verdict {
            failed = true;
        }
        let (l, r) = (frontend::print(&mut st, t1), frontend::print(&mut st, t2));
        emit(
            args.machine,
            Line::Query {
                verdict,
                lhs: l.clone(),
                rhs: r.clone(),
            },
            format!(
                "sub {} {} {} : {}",
                l,
                if kind == QueryKind::Sub { "<:" } else { "=:=" },
                r,
                verdict
            ),
        );
    }
    if failed {
        1
    } else {
        0
    }
}

fn cmd_eval(file: &str, args: &CfgArgs) -> u8 {
    let text = match read(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let mut st = TypeStore::new();
    let unit = {
        let mut p = match Parser::new(&mut st, &text) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        };
        match p.parse_unit() {
            Ok(u) => u,
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        }
    };
    let mut values: Vec<(String, setrow_core::typing::Expr)> = Vec::new();
    let mut code = 0u8;
    for (name, _, expr) in &unit.declarations {
        let mut closed = expr.clone();
        for (n, v) in &values {
            closed = setrow_core::eval::subst(&closed, n, v);
        }
        match eval(&closed, args.fuel) {
            Outcome::Value(v) => {
                emit(
                    args.machine,
                    Line::Eval {
                        name: name.clone(),
                        verdict: "value".into(),
                        value: Some(print_value(&v)),
                    },
                    format!("{} = {}", name, print_value(&v)),
                );
                values.push((name.clone(), v));
            }
            Outcome::Stuck(e) => {
                code = 1;
                emit(
                    args.machine,
                    Line::Eval {
                        name: name.clone(),
                        verdict: "stuck".into(),
                        value: None,
                    },
                    format!("{} : stuck at {}", name, print_value(&e)),
                );
            }
            Outcome::Diverged => {
                code = 1;
                emit(
                    args.machine,
                    Line::Eval {
                        name: name.clone(),
                        verdict: "diverged".into(),
                        value: None,
                    },
                    format!("{} : diverged (fuel exhausted)", name),
                );
            }
        }
    }
    code
}

fn print_value(e: &setrow_core::typing::Expr) -> String {
    use setrow_core::typing::{Const, Expr};
    match e {
        Expr::Const(Const::Int(n)) => n.to_string(),
        Expr::Const(Const::Str(s)) => format!("{:?}", s),
        Expr::Const(Const::True) => "true".into(),
        Expr::Const(Const::False) => "false".into(),
        Expr::Empty => "{}".into(),
        Expr::Ext { rec, label, val } => {
            format!(
                "({} with {} = {})",
                print_value(rec),
                label,
                print_value(val)
            )
        }
        Expr::Abs { param, .. } => format!("lam {} . <body>", param),
        Expr::Var(x) => x.clone(),
        Expr::App(a, b) => format!("({} {})", print_value(a), print_value(b)),
        Expr::Sel { rec, label } => format!("{}.{}", print_value(rec), label),
        Expr::Del { rec, label } => format!("{} \\ {}", print_value(rec), label),
    }
}

fn cmd_sub(t1: &str, t2: &str, equiv: bool, args: &CfgArgs) -> u8 {
    let mut st = TypeStore::new();
    let combined = format!("sub {} <: {}", t1, t2);
    let mut p = match Parser::new(&mut st, &combined) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}", e);
            return 2;
        }
    };
    let unit = match p.parse_unit() {
        Ok(u) => u,
        Err(e) => {
            eprintln!("error: {}", e);
            return 2;
        }
    };
    let (a, b, _) = unit.queries[0];
    let forward = is_subtype(&mut st, a, b);
    let verdict = if equiv {
        forward && is_subtype(&mut st, b, a)
    } else {
        forward
    };
    emit(args.machine, Line::Sub { verdict }, format!("{}", verdict));
    if verdict {
        0
    } else {
        1
    }
}

fn cmd_tally(file: &str, delta_arg: &str, verify: bool, cfg: &CheckCfg, args: &CfgArgs) -> u8 {
    let text = match read(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let mut st = TypeStore::new();
    let (constraints, row_spaces) = {
        let mut p = match Parser::new(&mut st, &text) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        };
        match p.parse_constraints() {
            Ok(cs) => {
                let spaces = p.row_spaces.clone();
                (cs, spaces)
            }
            Err(e) => {
                eprintln!("error: {}", e);
                return 2;
            }
        }
    };
    let mut delta = BTreeSet::new();
    for entry in delta_arg.split(',').filter(|s| !s.is_empty()) {
        let v = if let Some(name) = entry.strip_prefix('@') {
            match row_spaces.get(name) {
                Some(excl) => st.var(name, Kind::Row(excl.clone())),
                None => {
                    eprintln!("error: row variable `@{}` does not occur in the file", name);
                    return 2;
                }
            }
        } else if let Some(name) = entry.strip_prefix('?') {
            st.var(name, Kind::Field)
        } else {
            st.var(entry, Kind::Type)
        };
        delta.insert(v);
    }
    let theta = match tally(&mut st, &constraints, &delta, cfg.fuel) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}", e);
            return 1;
        }
    };
    if theta.is_empty() {
        emit(
            args.machine,
            Line::Tally {
                verdict: "none".into(),
                substitutions: vec![],
            },
            "no solution".into(),
        );
        return 0;
    }
    let mut subs_out = Vec::new();
    for (i, sub) in theta.iter().enumerate() {
        let mut entries = Vec::new();
        for (v, t) in sub.iter() {
            let name = st.var_info(v).name.clone();
            let printed = frontend::print(&mut st, t);
            entries.push((name, printed));
        }
        if verify && !solution_satisfies(&mut st, sub, &constraints) {
            eprintln!("error: solution {} fails verification", i + 1);
            return 1;
        }
        if !args.machine {
            let mark = if verify { " [verified]" } else { "" };
            println!("solution {}{}:", i + 1, mark);
            for (name, printed) in &entries {
                println!("  {} := {}", name, printed);
            }
        }
        subs_out.push(entries);
        if !args.all_solutions {
            break;
        }
    }
    if args.machine {
        emit(
            true,
            Line::Tally {
                verdict: "solutions".into(),
                substitutions: subs_out,
            },
            String::new(),
        );
    }
    0
}
