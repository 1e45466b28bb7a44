//! The `z4ring` command line.
//!
//! Exit status is 0 on success, 1 for domain or dimension errors and 2 for
//! usage, I/O or file-format errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::format::{read_file, write_file};
use crate::gf2poly::{check_condition, char_poly_mod2, ORDER_DEGREE_CAP};
use crate::matrix::{BlockParams, DEFAULT_BLOCK, DEFAULT_DEPTH};
use crate::schedule::{
    cost_model, simulate, staggered_selftest, write_trace, FaultInjection, ScheduleParams,
};
use crate::sequence::{companion, generate, select_uniform, uniform_test_exponent, RecurrenceSpec};
use crate::strassen::{mul_strassen, StrassenConfig};
use crate::z4core::DEFAULT_CHUNK;

/// Fault period used by `selftest --inject-fault`.
const INJECTED_FAULT_PERIOD: u64 = 1000;

#[derive(Parser, Debug)]
#[command(name = "z4ring", version, about = "Bit-sliced matrix arithmetic over Z/4Z")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Multiply two square matrices.
    Mul(MulArgs),
    /// Raise a square matrix to a power.
    Pow(PowArgs),
    /// Run the identity test on the four variants of a recurrence.
    FindUniform(FindUniformArgs),
    /// Check the admissibility condition of recurrence coefficients.
    CheckPoly(CheckPolyArgs),
    /// Print terms of a recurrence.
    Gen(GenArgs),
    /// Memory/compute schedule cost model and simulation.
    Schedule(ScheduleArgs),
    /// Staggered Subject/Examiner self-test of the dot-product kernel.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Naive,
    Blocked,
    Strassen,
}

#[derive(Args, Debug)]
pub struct MulArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Blocked)]
    pub algo: Algo,
    /// Strassen recursion cut-off.
    #[arg(long, default_value_t = 64)]
    pub threshold: usize,
    /// Dot-product chunk width.
    #[arg(long, default_value_t = DEFAULT_CHUNK)]
    pub n: usize,
    /// Output tile edge.
    #[arg(long, default_value_t = DEFAULT_BLOCK)]
    pub block: usize,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("exponent").required(true).args(["exp", "exp_uniform_test"])))]
pub struct PowArgs {
    pub m: PathBuf,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    /// Decimal exponent of any size.
    #[arg(long)]
    pub exp: Option<BigUint>,
    /// Use the exponent 2^(D+1) - 2.
    #[arg(long = "exp-uniform-test", value_name = "D")]
    pub exp_uniform_test: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FindUniformArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub coeffs: Vec<u8>,
    #[arg(long, default_value_t = 2)]
    pub s: u32,
    /// Write the companion matrix of the selected recurrence here.
    #[arg(long = "emit-matrix")]
    pub emit_matrix: Option<PathBuf>,
    /// Candidate (0-3) to emit instead of the unique survivor.
    #[arg(long, requires = "emit_matrix", value_parser = clap::value_parser!(u8).range(0..4))]
    pub candidate: Option<u8>,
}

#[derive(Args, Debug)]
pub struct CheckPolyArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub coeffs: Vec<u8>,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub coeffs: Vec<u8>,
    #[arg(long)]
    pub s: u32,
    #[arg(long, value_delimiter = ',', required = true)]
    pub init: Vec<u64>,
    #[arg(long)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub depth: u64,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub z: u64,
    #[arg(long)]
    pub delta: u64,
    #[arg(long, default_value_t = DEFAULT_BLOCK)]
    pub block: usize,
    #[arg(long)]
    pub simulate: bool,
    /// Write the per-step trace here (implies --simulate).
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub rounds: u64,
    #[arg(long = "inject-fault")]
    pub inject_fault: bool,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension(_) | Error::Domain(_) | Error::Budget(_) | Error::DataNotReady { .. } => 1,
        Error::Format(_) | Error::Io(_) => 2,
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn execute(cmd: &Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Mul(a) => cmd_mul(a),
        Command::Pow(a) => cmd_pow(a),
        Command::FindUniform(a) => cmd_find_uniform(a, out),
        Command::CheckPoly(a) => cmd_check_poly(a, out),
        Command::Gen(a) => cmd_gen(a, out),
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::Selftest(a) => cmd_selftest(a, out),
    }
}

fn cmd_mul(a: &MulArgs) -> Result<()> {
    let params = BlockParams::new(a.block, a.n, DEFAULT_DEPTH)?;
    let strassen = StrassenConfig::new(a.threshold)?;
    let lhs = read_file(&a.a)?;
    let rhs = read_file(&a.b)?;
    let product = match a.algo {
        Algo::Naive => lhs.mul_naive(&rhs)?,
        Algo::Blocked => lhs.mul_blocked(&rhs, params)?,
        Algo::Strassen => mul_strassen(&lhs, &rhs, &strassen)?,
    };
    write_file(&a.output, &product)
}

fn cmd_pow(a: &PowArgs) -> Result<()> {
    let e = match (&a.exp, a.exp_uniform_test) {
        (Some(e), _) => e.clone(),
        (None, Some(d)) => uniform_test_exponent(d),
        (None, None) => unreachable!("clap requires one exponent flag"),
    };
    let m = read_file(&a.m)?;
    write_file(&a.output, &m.matpow(&e)?)
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_find_uniform(a: &FindUniformArgs, out: &mut dyn Write) -> Result<()> {
    let spec = RecurrenceSpec::new(&a.coeffs, a.s)?;
    let report = select_uniform(&spec)?;
    let width = report
        .candidates
        .iter()
        .map(|c| join(c.spec.coeffs()).len())
        .max()
        .unwrap_or(0)
        .max("coefficients".len());
    let admissible = report.admissible.map_or("n/a", yes_no);
    writeln!(out, "exponent    {}", report.exponent).map_err(io)?;
    writeln!(out, "admissible  {admissible}").map_err(io)?;
    writeln!(out, "{:<5} {:<width$} {:<9} survivor", "index", "coefficients", "identity")
        .map_err(io)?;
    for c in &report.candidates {
        writeln!(
            out,
            "{:<5} {:<width$} {:<9} {}",
            c.index,
            join(c.spec.coeffs()),
            c.identity_test,
            yes_no(!c.identity_test)
        )
        .map_err(io)?;
    }
    writeln!(out, "unique      {}", yes_no(report.unique)).map_err(io)?;
    if let Some(path) = &a.emit_matrix {
        let picked = a.candidate.map(|i| &report.candidates[i as usize].spec);
        let Some(chosen) = picked.or_else(|| report.uniform_candidate()) else {
            return Err(Error::Domain(format!(
                "{} candidates survived the identity test; pick one with --candidate",
                report.survivors.len()
            )));
        };
        write_file(path, &companion(chosen))?;
    }
    Ok(())
}

fn cmd_check_poly(a: &CheckPolyArgs, out: &mut dyn Write) -> Result<()> {
    let spec = RecurrenceSpec::new(&a.coeffs, 2)?;
    let adm = check_condition(&spec)?;
    writeln!(out, "char_poly   {}", char_poly_mod2(&spec)).map_err(io)?;
    writeln!(out, "admissible  {}", yes_no(adm.admissible)).map_err(io)?;
    if let Some(p) = &adm.p {
        writeln!(out, "P           {p}").map_err(io)?;
        let deg = p.degree().expect("P is nonzero");
        if *p != crate::Gf2Poly::x() && deg <= ORDER_DEGREE_CAP {
            let order = p.order()?;
            writeln!(out, "order       {order}").map_err(io)?;
            writeln!(out, "maximal     {}", yes_no(order == (1u64 << deg) - 1)).map_err(io)?;
        }
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = RecurrenceSpec::new(&a.coeffs, a.s)?;
    let values = generate(&spec, &a.init, a.count)?;
    let mut w = BufWriter::new(out);
    for v in values {
        writeln!(w, "{v}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn cmd_schedule(a: &ScheduleArgs, out: &mut dyn Write) -> Result<()> {
    let p = ScheduleParams { n: a.n, depth: a.depth, k: a.k, z: a.z, delta: a.delta, block: a.block };
    let mut report = cost_model(&p);
    let mut fills = None;
    if a.simulate || a.trace.is_some() {
        let sim = simulate(&p)?;
        if let Some(path) = &a.trace {
            write_trace_file(path, &sim)?;
        }
        fills = Some((sim.row_fills, sim.column_fills));
        report = sim.report;
    }
    let line = |out: &mut dyn Write, key: &str, val: &dyn std::fmt::Display| {
        writeln!(out, "{key:<14}{val:>12}").map_err(io)
    };
    line(out, "kappa", &report.kappa)?;
    line(out, "K_naive", &report.k_naive)?;
    line(out, "K_improved", &report.k_improved)?;
    line(out, "Phi_naive", &report.phi_naive)?;
    line(out, "Phi_improved", &report.phi_improved)?;
    line(out, "Gamma", &report.gamma)?;
    line(out, "margin", &report.memory_bound_margin)?;
    line(out, "feasible", &yes_no(report.feasible))?;
    if let Some(cycles) = report.simulated_cycles {
        line(out, "simulated", &cycles)?;
    }
    if let Some((r, c)) = fills {
        line(out, "row_fills", &r)?;
        line(out, "column_fills", &c)?;
    }
    for reason in &report.reasons {
        writeln!(out, "reason        {reason}").map_err(io)?;
    }
    Ok(())
}

fn write_trace_file(path: &Path, sim: &crate::schedule::Simulation) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(f);
    write_trace(sim, &mut w).and_then(|_| w.flush()).map_err(io)
}

fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Result<()> {
    let fault = a.inject_fault.then_some(FaultInjection { period: INJECTED_FAULT_PERIOD });
    let r = staggered_selftest(a.width, a.rounds, fault)?;
    writeln!(out, "width     {:>12}", a.width).map_err(io)?;
    writeln!(out, "rounds    {:>12}", r.rounds).map_err(io)?;
    writeln!(out, "errors    {:>12}", r.errors).map_err(io)?;
    if let Some(first) = r.first_error_round {
        writeln!(out, "first     {first:>12}").map_err(io)?;
    }
    Ok(())
}
