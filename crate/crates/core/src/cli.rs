//! The `dyft` command-line harness: data generation, oracle verification,
//! benchmarks and dynamic workload replay.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::database::{SketchDatabase, SketchId};
use crate::error::{invalid, Error, Result};
use crate::format::SketchFile;
use crate::index::{Dyft, DyftConfig, SearchPath, DEFAULT_W_IN};
use crate::multi::{gv_block_count, DyftPlus};
use crate::sketch::{AlphabetConfig, Sketch};
use crate::workload::{self, Op};

#[derive(Debug, Parser)]
#[command(name = "dyft", version, about = "Hamming range search over integer sketches")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write uniformly random sketches to a file.
    Gen(GenArgs),
    /// Check index answers against a linear scan for every query.
    Verify(VerifyArgs),
    /// Measure insertion time, memory and search time, written as CSV.
    Bench(BenchArgs),
    /// Replay an insert/delete/query script, checking every query.
    Dynamic(DynamicArgs),
    /// Write a random insert/delete/query script.
    GenOps(GenOpsArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub sigma: u32,
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Dyft,
    Dyftplus,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[arg(long, value_enum, default_value_t = Mode::Dyft)]
    pub mode: Mode,
    /// Block count for dyftplus; defaults to floor(r/2) + 1.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Inner-node cost weight.
    #[arg(long, default_value_t = DEFAULT_W_IN)]
    pub win: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub radius: usize,
    #[command(flatten)]
    pub index: IndexArgs,
    /// Drop one id from the answer of this query before comparing (self-test).
    #[arg(long, hide = true)]
    pub corrupt_query: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub radius: usize,
    #[command(flatten)]
    pub index: IndexArgs,
    /// Database sizes at which to measure; defaults to the whole input.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    #[arg(long)]
    pub csv: PathBuf,
}

#[derive(Debug, Args)]
pub struct DynamicArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub ops: PathBuf,
    #[arg(long)]
    pub radius: usize,
    #[command(flatten)]
    pub index: IndexArgs,
}

#[derive(Debug, Args)]
pub struct GenOpsArgs {
    /// Number of input records the script may reference.
    #[arg(long)]
    pub records: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Result of a command that ran to completion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// An index answer differed from the linear scan.
    Mismatch,
}

/// Answer of one search with its instrumentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub ids: Vec<SketchId>,
    pub candidates_verified: usize,
    /// Searches (whole query or per block) that took the linear path.
    pub linear_paths: usize,
}

/// Any of the searchable structures behind a uniform interface.
#[derive(Debug)]
pub enum Engine {
    Dyft(Box<Dyft>),
    Plus(Box<DyftPlus>),
    Linear(Box<SketchDatabase>),
}

impl Engine {
    pub fn new(config: AlphabetConfig, radius: usize, args: &IndexArgs) -> Result<Self> {
        let dyft_config = DyftConfig::new(config, radius).with_w_in(args.win);
        match args.mode {
            Mode::Dyft => Ok(Engine::Dyft(Box::new(Dyft::new(dyft_config)?))),
            Mode::Dyftplus => {
                let q = args
                    .blocks
                    .unwrap_or_else(|| gv_block_count(radius, config.len()));
                Ok(Engine::Plus(Box::new(DyftPlus::new(dyft_config, q)?)))
            }
            Mode::Linear => {
                if radius > config.len() {
                    return invalid(format!("radius {radius} exceeds sketch length {}", config.len()));
                }
                Ok(Engine::Linear(Box::new(SketchDatabase::new(config))))
            }
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            Engine::Dyft(_) => "dyft",
            Engine::Plus(_) => "dyftplus",
            Engine::Linear(_) => "linear",
        }
    }

    /// Block count; 1 for the single trie, 0 for the plain scan.
    pub fn blocks(&self) -> usize {
        match self {
            Engine::Dyft(_) => 1,
            Engine::Plus(p) => p.block_spec().q(),
            Engine::Linear(_) => 0,
        }
    }

    pub fn database(&self) -> &SketchDatabase {
        match self {
            Engine::Dyft(d) => d.database(),
            Engine::Plus(p) => p.database(),
            Engine::Linear(db) => db,
        }
    }

    pub fn insert(&mut self, x: &Sketch) -> Result<SketchId> {
        match self {
            Engine::Dyft(d) => d.insert(x),
            Engine::Plus(p) => p.insert(x),
            Engine::Linear(db) => db.insert(x),
        }
    }

    pub fn remove(&mut self, id: SketchId) -> Result<()> {
        match self {
            Engine::Dyft(d) => d.remove(id),
            Engine::Plus(p) => p.remove(id),
            Engine::Linear(db) => db.remove(id),
        }
    }

    pub fn search(&self, y: &Sketch, radius: usize) -> Result<Answer> {
        match self {
            Engine::Dyft(d) => {
                let out = d.search_star(y, radius)?;
                Ok(Answer {
                    linear_paths: usize::from(out.path == SearchPath::Linear),
                    ids: out.ids,
                    candidates_verified: out.candidates_verified,
                })
            }
            Engine::Plus(p) => {
                let out = p.search(y, radius)?;
                Ok(Answer {
                    ids: out.ids,
                    candidates_verified: out.candidates_verified,
                    linear_paths: out.linear_blocks,
                })
            }
            Engine::Linear(db) => Ok(Answer {
                ids: db.linear_search(y, radius)?,
                candidates_verified: db.len(),
                linear_paths: 1,
            }),
        }
    }

    /// Index memory; for the plain scan, the database itself.
    pub fn memory_bytes(&self) -> usize {
        match self {
            Engine::Dyft(d) => d.stats().memory_bytes,
            Engine::Plus(p) => p.memory_bytes(),
            Engine::Linear(db) => db.memory_bytes(),
        }
    }
}

fn check_compatible(input: &SketchFile, queries: &SketchFile) -> Result<()> {
    if input.config() != queries.config() {
        return invalid(format!(
            "query file alphabet {:?} differs from input {:?}",
            queries.config(),
            input.config()
        ));
    }
    Ok(())
}

/// Difference between an index answer and the oracle answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub query: usize,
    pub missing: Vec<SketchId>,
    pub unexpected: Vec<SketchId>,
}

fn compare(query: usize, got: &[SketchId], expected: &[SketchId]) -> Option<Mismatch> {
    if got == expected {
        return None;
    }
    let missing = expected.iter().filter(|id| got.binary_search(id).is_err()).copied().collect();
    let unexpected = got.iter().filter(|id| expected.binary_search(id).is_err()).copied().collect();
    Some(Mismatch {
        query,
        missing,
        unexpected,
    })
}

/// Runs every query through the engine and the linear oracle. `tamper` may
/// alter an index answer before it is compared.
pub fn verify_queries(
    engine: &Engine,
    queries: &SketchFile,
    radius: usize,
    mut tamper: impl FnMut(usize, &mut Vec<SketchId>),
) -> Result<Option<Mismatch>> {
    for (i, y) in queries.iter().enumerate() {
        let mut got = engine.search(&y, radius)?.ids;
        tamper(i, &mut got);
        let expected = engine.database().linear_search(&y, radius)?;
        if let Some(m) = compare(i, &got, &expected) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

pub fn build(input: &SketchFile, radius: usize, args: &IndexArgs) -> Result<Engine> {
    let mut engine = Engine::new(input.config(), radius, args)?;
    for x in input.iter() {
        engine.insert(&x)?;
    }
    Ok(engine)
}

pub fn cmd_gen(args: &GenArgs, out: &mut impl Write) -> Result<Status> {
    let config = AlphabetConfig::new(args.sigma, args.dim)?;
    let file = workload::uniform_sketches(config, args.count, args.seed);
    file.save(&args.out)?;
    writeln!(
        out,
        "wrote {} sketches (sigma={}, m={}) to {}",
        file.len(),
        args.sigma,
        args.dim,
        args.out.display()
    )?;
    Ok(Status::Ok)
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut impl Write) -> Result<Status> {
    let input = SketchFile::load(&args.input)?;
    let queries = SketchFile::load(&args.queries)?;
    check_compatible(&input, &queries)?;
    let engine = build(&input, args.radius, &args.index)?;
    let corrupt = args.corrupt_query;
    let mismatch = verify_queries(&engine, &queries, args.radius, |i, ids| {
        if Some(i) == corrupt {
            // drop an answer, or invent one when the answer is empty
            if ids.pop().is_none() {
                ids.push(SketchId::MAX);
            }
        }
    })?;
    match mismatch {
        None => {
            writeln!(
                out,
                "ok: {} queries, {} sketches, r={}, method={}",
                queries.len(),
                input.len(),
                args.radius,
                engine.method()
            )?;
            Ok(Status::Ok)
        }
        Some(m) => {
            writeln!(
                out,
                "mismatch at query {}: missing {:?}, unexpected {:?}",
                m.query, m.missing, m.unexpected
            )?;
            Ok(Status::Mismatch)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub sigma: u32,
    pub m: usize,
    pub r: usize,
    pub q: usize,
    pub n: usize,
    pub search_ms_mean: String,
    pub insert_s_total: String,
    pub memory_bytes: usize,
    pub candidates_verified: usize,
    pub linear_path_taken: usize,
}

/// Inserts `input` in order and measures at every checkpoint. Candidates
/// and linear-path counts are totals over the query set.
pub fn bench_rows(
    input: &SketchFile,
    queries: &SketchFile,
    radius: usize,
    args: &IndexArgs,
    checkpoints: &[usize],
) -> Result<Vec<BenchRow>> {
    check_compatible(input, queries)?;
    let checkpoints = if checkpoints.is_empty() {
        vec![input.len()]
    } else {
        checkpoints.to_vec()
    };
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("checkpoints must be strictly increasing");
    }
    if let Some(&last) = checkpoints.last() {
        if last > input.len() {
            return invalid(format!("checkpoint {last} exceeds the {} input sketches", input.len()));
        }
    }
    let mut engine = Engine::new(input.config(), radius, args)?;
    let queries: Vec<Sketch> = queries.iter().collect();
    let mut inserted = 0;
    let mut insert_time = Duration::ZERO;
    let mut rows = Vec::with_capacity(checkpoints.len());
    for &n in &checkpoints {
        let start = Instant::now();
        while inserted < n {
            engine.insert(&input.get(inserted).expect("checked above"))?;
            inserted += 1;
        }
        insert_time += start.elapsed();

        let mut candidates = 0;
        let mut linear = 0;
        let start = Instant::now();
        for y in &queries {
            let a = engine.search(y, radius)?;
            candidates += a.candidates_verified;
            linear += a.linear_paths;
        }
        let search = start.elapsed();
        let mean_ms = if queries.is_empty() {
            0.0
        } else {
            search.as_secs_f64() * 1e3 / queries.len() as f64
        };
        rows.push(BenchRow {
            method: engine.method(),
            sigma: input.config().sigma(),
            m: input.config().len(),
            r: radius,
            q: engine.blocks(),
            n,
            search_ms_mean: format!("{mean_ms:.3}"),
            insert_s_total: format!("{:.6}", insert_time.as_secs_f64()),
            memory_bytes: engine.memory_bytes(),
            candidates_verified: candidates,
            linear_path_taken: linear,
        });
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], w: impl Write) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    writer
        .write_record([
            "method",
            "sigma",
            "m",
            "r",
            "q",
            "n",
            "search_ms_mean",
            "insert_s_total",
            "memory_bytes",
            "candidates_verified",
            "linear_path_taken",
        ])
        .map_err(csv_error)?;
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn cmd_bench(args: &BenchArgs, out: &mut impl Write) -> Result<Status> {
    let input = SketchFile::load(&args.input)?;
    let queries = SketchFile::load(&args.queries)?;
    let rows = bench_rows(&input, &queries, args.radius, &args.index, &args.checkpoints)?;
    write_csv(&rows, fs::File::create(&args.csv)?)?;
    for row in &rows {
        writeln!(
            out,
            "{} n={} search={} ms insert={} s memory={} B",
            row.method, row.n, row.search_ms_mean, row.insert_s_total, row.memory_bytes
        )?;
    }
    Ok(Status::Ok)
}

/// Replays `ops`, checking every query against a linear scan of the live set.
pub fn replay(
    engine: &mut Engine,
    input: &SketchFile,
    ops: &[Op],
    radius: usize,
) -> Result<std::result::Result<usize, Mismatch>> {
    let record = |i: usize| {
        input.get(i).ok_or_else(|| {
            Error::InvalidArgument(format!("record {i} out of range ({} records)", input.len()))
        })
    };
    let mut checked = 0;
    for (step, op) in ops.iter().enumerate() {
        match *op {
            Op::Insert(i) => {
                engine.insert(&record(i)?)?;
            }
            Op::Delete(id) => engine.remove(id)?,
            Op::Query(i) => {
                let y = record(i)?;
                let got = engine.search(&y, radius)?.ids;
                let expected = engine.database().linear_search(&y, radius)?;
                if let Some(m) = compare(step, &got, &expected) {
                    return Ok(Err(m));
                }
                checked += 1;
            }
        }
    }
    Ok(Ok(checked))
}

pub fn cmd_dynamic(args: &DynamicArgs, out: &mut impl Write) -> Result<Status> {
    let input = SketchFile::load(&args.input)?;
    let ops = workload::parse_script(&fs::read_to_string(&args.ops)?)?;
    let mut engine = Engine::new(input.config(), args.radius, &args.index)?;
    match replay(&mut engine, &input, &ops, args.radius)? {
        Ok(checked) => {
            writeln!(
                out,
                "ok: {} ops, {checked} queries checked, {} live",
                ops.len(),
                engine.database().len()
            )?;
            Ok(Status::Ok)
        }
        Err(m) => {
            writeln!(
                out,
                "mismatch at op {}: missing {:?}, unexpected {:?}",
                m.query + 1,
                m.missing,
                m.unexpected
            )?;
            Ok(Status::Mismatch)
        }
    }
}

pub fn cmd_gen_ops(args: &GenOpsArgs, out: &mut impl Write) -> Result<Status> {
    if args.records == 0 {
        return invalid("a script needs at least one record");
    }
    let ops = workload::random_script(args.records, args.count, args.seed);
    fs::write(&args.out, workload::format_script(&ops))?;
    writeln!(out, "wrote {} ops to {}", ops.len(), args.out.display())?;
    Ok(Status::Ok)
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<Status> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Dynamic(a) => cmd_dynamic(a, out),
        Command::GenOps(a) => cmd_gen_ops(a, out),
    }
}
