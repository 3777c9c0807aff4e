//! Command-line front end: Betti tables, operator words on states, relation
//! checks and operator matrices, emitted as JSON or CSV.

pub mod expr;
pub mod output;

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quot_yangian::fock::poincare_closed_form;
use quot_yangian::relations::{check_fa_restricted, check_mult_identity, check_relation};
use quot_yangian::{Basis, CheckReport, EngineError, EngineQ, FockStateQ, ModuliParams, RelationCase, RelationId};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{parse_expr, parse_word, ParseError, Target};
use crate::output::{csv_rows, parse_state, state_to_json, Document, StateFormatError};

#[derive(Debug, Parser)]
#[command(name = "quot-yangian", version, about = "Quot-scheme cohomology as a shifted Yangian module")]
pub struct Cli {
    #[command(flatten)]
    pub config: Config,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Config {
    /// rank r of V
    #[arg(long, global = true, default_value_t = 1)]
    pub rank: u32,
    #[arg(long, global = true, default_value_t = 0)]
    pub genus: u32,
    /// degree n of V
    #[arg(long = "deg-v", global = true, default_value_t = 0, allow_hyphen_values = true)]
    pub deg_v: i64,
    /// largest charge d considered
    #[arg(long, global = true, default_value_t = 2)]
    pub dmax: usize,
    /// operator word, e.g. `f[1](1) a[0](w) |0>`
    #[arg(long, global = true)]
    pub expr: Option<String>,
    /// comma-separated relation names (default: the six Yangian relations)
    #[arg(long, global = true, value_delimiter = ',')]
    pub relations: Vec<String>,
    /// largest relation index (default 2r+2)
    #[arg(long, global = true)]
    pub kmax: Option<u32>,
    /// cap on computed operator images
    #[arg(long, global = true, default_value_t = 10_000_000)]
    pub fuel: u64,
    /// worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// write the result here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Graded dimensions per charge, enumerated and from the closed form
    Betti,
    /// Apply `--expr` and print the resulting state
    Act,
    /// Check relation families on every basis vector of charge ≤ dmax
    Check,
    /// Dump the matrix of each token of `--expr` for charges ≤ dmax
    Matrix,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Betti => "betti",
            Command::Act => "act",
            Command::Check => "check",
            Command::Matrix => "matrix",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("state file: {0}")]
    State(#[from] StateFormatError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for computational failures, 2 for anything the caller got wrong.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(_) => 1,
            CliError::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub struct Outcome {
    pub stdout: String,
    pub passed: bool,
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = &cli.config;
    let params = ModuliParams::new(cfg.rank, cfg.genus, cfg.deg_v)
        .ok_or_else(|| CliError::Usage("--rank must be at least 1".into()))?;
    if cfg.fuel == 0 {
        return Err(CliError::Usage("--fuel must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let (text, passed) = pool.install(|| match cli.command {
        Command::Betti => betti(cfg, &params),
        Command::Act => act(cfg, &params),
        Command::Check => check(cfg, &params),
        Command::Matrix => matrix(cfg, &params),
    })?;
    match &cfg.out {
        Some(path) => {
            write_once(path, &text)?;
            Ok(Outcome { stdout: format!("wrote {}\n", path.display()), passed })
        }
        None => Ok(Outcome { stdout: text, passed }),
    }
}

fn write_once(path: &PathBuf, text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let io = |source| CliError::Io { path: path.clone(), source };
    let mut f = fs::OpenOptions::new().write(true).create_new(true).open(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

fn render<T: Serialize>(params: &ModuliParams, command: Command, results: T) -> String {
    let doc = Document { params, command: command.name(), results };
    let mut s = serde_json::to_string(&doc).expect("plain data serializes");
    s.push('\n');
    s
}

fn engine(cfg: &Config, params: &ModuliParams) -> EngineQ {
    EngineQ::new(*params).with_fuel(cfg.fuel)
}

fn require_expr(cfg: &Config) -> Result<&str, CliError> {
    cfg.expr.as_deref().ok_or_else(|| CliError::Usage("--expr is required for this command".into()))
}

#[derive(Serialize)]
struct BettiJson<'a> {
    enumerated: &'a [Vec<u64>],
    closed_form: &'a [Vec<u64>],
    r#match: bool,
}

#[derive(Serialize)]
struct ActJson<'a> {
    expr: &'a str,
    display: String,
    state: Vec<output::TermJson>,
}

fn betti(cfg: &Config, params: &ModuliParams) -> Result<(String, bool), CliError> {
    let enumerated: Vec<Vec<u64>> =
        (0..=cfg.dmax).map(|d| Basis::enumerate(params.rank, params.genus, d).graded_dims()).collect();
    let closed = poincare_closed_form(params.rank, params.genus, cfg.dmax);
    let ok = enumerated == closed;
    let text = match cfg.format {
        Format::Json => render(
            params,
            Command::Betti,
            BettiJson { enumerated: &enumerated, closed_form: &closed, r#match: ok },
        ),
        Format::Csv => {
            let mut rows = Vec::new();
            for (d, (e, c)) in enumerated.iter().zip(&closed).enumerate() {
                for deg in 0..e.len().max(c.len()) {
                    let get = |v: &Vec<u64>| v.get(deg).copied().unwrap_or(0);
                    rows.push(vec![d.to_string(), deg.to_string(), get(e).to_string(), get(c).to_string()]);
                }
            }
            csv_rows("d,degree,dim_enumerated,dim_closed_form", rows)
        }
    };
    Ok((text, ok))
}

fn act(cfg: &Config, params: &ModuliParams) -> Result<(String, bool), CliError> {
    let src = require_expr(cfg)?;
    let ast = parse_expr(src, params)?;
    let start = match &ast.target {
        Target::Vacuum => FockStateQ::vacuum(params.genus),
        Target::File(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            parse_state(&text, params)?
        }
    };
    let out = engine(cfg, params).act_word(&ast.word, &start)?;
    let terms = state_to_json(&out)?;
    let text = match cfg.format {
        Format::Json => render(
            params,
            Command::Act,
            ActJson { expr: src, display: out.to_string(), state: terms },
        ),
        Format::Csv => csv_rows(
            "coeff,vector",
            out.terms().map(|(v, _, c)| vec![c.to_string(), v.to_string()]),
        ),
    };
    Ok((text, true))
}

fn check(cfg: &Config, params: &ModuliParams) -> Result<(String, bool), CliError> {
    let ids: Vec<RelationId> = if cfg.relations.is_empty() {
        RelationId::YANGIAN.to_vec()
    } else {
        cfg.relations
            .iter()
            .map(|s| RelationId::parse(s).ok_or_else(|| CliError::Usage(format!("unknown relation `{s}`"))))
            .collect::<Result<_, _>>()?
    };
    let k_max = cfg.kmax.unwrap_or(2 * params.rank + 2);
    let eng = engine(cfg, params);
    let mut reports: Vec<CheckReport> = Vec::new();
    for id in ids {
        let rep = match id {
            RelationId::FaRestricted => check_fa_restricted(&eng, cfg.dmax)?,
            RelationId::Mult => check_mult_identity(&eng, cfg.dmax, k_max)?,
            _ => check_relation(&eng, &RelationCase::new(id, *params, cfg.dmax, k_max), None)?,
        };
        reports.push(rep);
    }
    let passed = reports.iter().all(CheckReport::passed);
    let text = match cfg.format {
        Format::Json => render(params, Command::Check, &reports),
        Format::Csv => csv_rows(
            "relation,passed,tested,failures",
            reports.iter().map(|r| {
                vec![r.id.to_string(), r.passed().to_string(), r.tested.to_string(), r.failures.to_string()]
            }),
        ),
    };
    Ok((text, passed))
}

#[derive(Serialize)]
struct MatrixJson {
    token: String,
    d: usize,
    rows: usize,
    cols: usize,
    /// `[row, col, value]`
    entries: Vec<(u32, u32, String)>,
    row_basis: Vec<String>,
    col_basis: Vec<String>,
}

fn matrix(cfg: &Config, params: &ModuliParams) -> Result<(String, bool), CliError> {
    let word = parse_word(require_expr(cfg)?, params)?;
    let eng = engine(cfg, params);
    let mut out = Vec::new();
    for token in &word.tokens {
        for d in 0..=cfg.dmax {
            let target = d as i64 + token.kind.charge_shift();
            if target < 0 {
                continue;
            }
            let m = eng.operator_matrix(token, d)?;
            let mut entries = Vec::with_capacity(m.nnz());
            for col in 0..m.cols() {
                for (row, x) in m.column(col) {
                    entries.push((*row, col as u32, x.to_string()));
                }
            }
            entries.sort_by_key(|e| (e.0, e.1));
            let names = |b: &Basis| b.vectors().iter().map(|v| v.to_string()).collect::<Vec<_>>();
            out.push(MatrixJson {
                token: token.to_string(),
                d,
                rows: m.rows(),
                cols: m.cols(),
                entries,
                row_basis: names(&eng.basis(target as usize)),
                col_basis: names(&eng.basis(d)),
            });
        }
    }
    let text = match cfg.format {
        Format::Json => render(params, Command::Matrix, &out),
        Format::Csv => csv_rows(
            "token,d,row,col,value",
            out.iter().flat_map(|m| {
                m.entries.iter().map(move |(r, c, x)| {
                    vec![format!("\"{}\"", m.token), m.d.to_string(), r.to_string(), c.to_string(), x.clone()]
                })
            }),
        ),
    };
    Ok((text, true))
}
