//! Command-line surface. `run` returns the process exit code: 0 on success,
//! 1 when `verify` finds a failing check, 2 for usage and input errors.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::basis::{basis_values, eval_b_with, eval_d_with, EvalReport, Families, MethodChoice};
use crate::forms::{form, Parity, Sign};
use crate::interp::{reconstruct, SampleSet};
use crate::verify::{run_all, run_one, VerifyConfig, CRITERIA};

/// Environment variable capping the worker threads (0 or unset = one per core).
pub const THREADS_ENV: &str = "THETA_INTERP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "theta-interp", version, about = "Fourier interpolation basis at square-root nodes")]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the polynomial P with g_n = theta^3 P(1/J) (even) or h_n = theta P(1/J) (odd).
    Coeffs {
        #[arg(long)]
        parity: Parity,
        #[arg(long, allow_hyphen_values = true)]
        eps: Sign,
        /// Index or inclusive range `a:b`.
        #[arg(long)]
        n: IndexRange,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Tabulate b_n (even) or d_n (odd) on a grid.
    EvalBasis {
        #[arg(long)]
        parity: Parity,
        #[arg(long, allow_hyphen_values = true)]
        eps: Sign,
        #[arg(long)]
        n: IndexRange,
        /// `x_min:x_max:steps`.
        #[arg(long, allow_hyphen_values = true, default_value = "0:4:401")]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Reconstruct a function from a sample-set JSON file.
    Interpolate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, allow_hyphen_values = true, default_value = "-4:4:401")]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Run the acceptance checks and print one line per check.
    Verify {
        /// Run only these criteria (repeatable).
        #[arg(long)]
        only: Vec<usize>,
        #[arg(long, default_value_t = crate::verify::DEFAULT_SEED)]
        seed: u64,
        /// Override a tolerance, e.g. `--tol delta=1e-7` (repeatable).
        #[arg(long)]
        tol: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
    /// a_n and ahat_n on a grid, for n in the given range.
    PlotData {
        #[arg(long, default_value = "0:2")]
        n: IndexRange,
        #[arg(long, allow_hyphen_values = true, default_value = "-4:4:401")]
        grid: Grid,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Contour,
    Laplace,
}

impl From<MethodArg> for MethodChoice {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => MethodChoice::Auto,
            MethodArg::Contour => MethodChoice::Contour,
            MethodArg::Laplace => MethodChoice::Laplace,
        }
    }
}

/// `n` or `a:b` (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexRange {
    pub lo: usize,
    pub hi: usize,
}

impl FromStr for IndexRange {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad index `{t}`: {e}"));
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let n = parse(s)?;
                (n, n)
            }
        };
        if lo > hi {
            return Err(format!("empty index range {lo}:{hi}"));
        }
        Ok(IndexRange { lo, hi })
    }
}

/// `x_min:x_max:steps` with `steps ≥ 2` points including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let span = self.x_max - self.x_min;
        let last = (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.x_min + span * k as f64 / last).collect()
    }
}

impl FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("grid must be x_min:x_max:steps, got `{s}`"));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad grid bound `{t}`: {e}"));
        let g = Grid {
            x_min: num(a)?,
            x_max: num(b)?,
            steps: n.trim().parse().map_err(|e| format!("bad step count `{n}`: {e}"))?,
        };
        if !(g.x_min.is_finite() && g.x_max.is_finite() && g.x_min < g.x_max) {
            return Err("grid needs finite x_min < x_max".into());
        }
        if g.steps < 2 {
            return Err("grid needs at least 2 steps".into());
        }
        Ok(g)
    }
}

/// A rectangular numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// CSV with 17 significant digits, so parsing restores every value exactly.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Table, String> {
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().ok_or("empty CSV")?.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != header.len() {
                return Err(format!("row {} has {} cells, header has {}", i + 1, row.len(), header.len()));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    /// An array of objects keyed by the header.
    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|r| self.header.iter().cloned().zip(r.iter().map(|v| serde_json::json!(v))).collect())
            .collect();
        serde_json::to_string_pretty(&rows).expect("finite table") + "\n"
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv | Format::Text => self.to_csv(),
        }
    }
}

struct Failure {
    code: i32,
    msg: String,
}

fn usage(msg: impl ToString) -> Failure {
    Failure { code: 2, msg: msg.to_string() }
}

fn pool() -> Result<rayon::ThreadPool, Failure> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV} must be a non-negative integer")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(usage)
}

/// Evaluates `row` at every grid point concurrently; rows come back in grid order.
fn grid_rows<F>(xs: &[f64], row: F) -> crate::Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> crate::Result<Vec<f64>> + Sync,
{
    xs.par_iter().map(|&x| row(x)).collect()
}

pub fn basis_table(parity: Parity, eps: Sign, n: IndexRange, grid: &Grid, method: MethodChoice) -> crate::Result<Table> {
    let letter = match parity {
        Parity::Even => "b",
        Parity::Odd => "d",
    };
    let mut header = vec!["x".to_string()];
    header.extend((n.lo..=n.hi).map(|k| format!("{letter}_{eps}_{k}")));
    let rows = grid_rows(&grid.points(), |x| {
        let mut row = vec![x];
        for k in n.lo..=n.hi {
            let r: EvalReport = match parity {
                Parity::Even => eval_b_with(eps, k, x, method)?,
                Parity::Odd => {
                    if eps == Sign::Minus && k == 0 {
                        return Err(crate::Error::NoSuchForm);
                    }
                    eval_d_with(eps, k, x, method)?
                }
            };
            row.push(r.value);
        }
        Ok(row)
    })?;
    Ok(Table { header, rows })
}

pub fn plot_table(n: IndexRange, grid: &Grid) -> crate::Result<Table> {
    let mut header = vec!["x".to_string()];
    for k in n.lo..=n.hi {
        header.push(format!("a_{k}"));
        header.push(format!("ahat_{k}"));
    }
    let rows = grid_rows(&grid.points(), |x| {
        let bv = basis_values(x, n.hi, Families::EVEN, MethodChoice::Auto)?;
        let mut row = vec![x];
        for k in n.lo..=n.hi {
            let (a, ah) = bv.a(k);
            row.push(a.value);
            row.push(ah.value);
        }
        Ok(row)
    })?;
    Ok(Table { header, rows })
}

pub fn interpolation_table(samples: &SampleSet, grid: &Grid) -> crate::Result<Table> {
    let header = ["x", "re", "im", "abs_error_estimate", "tail_bound"].map(String::from).to_vec();
    let rows = grid_rows(&grid.points(), |x| {
        let r = reconstruct(samples, x)?;
        Ok(vec![x, r.value.re, r.value.im, r.abs_error_estimate, r.tail_bound])
    })?;
    Ok(Table { header, rows })
}

fn emit(out: &Output, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &out.output {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure { code: 1, msg: e.to_string() }),
    }
}

fn eval_err(e: crate::Error) -> Failure {
    usage(e)
}

fn execute(cfg: CliConfig, stdout: &mut dyn Write) -> Result<(), Failure> {
    match cfg.command {
        Command::Coeffs { parity, eps, n, format, out } => {
            let mut text = String::new();
            let mut specs = Vec::new();
            for k in n.lo..=n.hi {
                let f = form(parity, eps, k).map_err(eval_err)?;
                match format {
                    Format::Json => specs.push((*f).clone()),
                    _ => {
                        let cells: Vec<String> = f.poly.iter().map(|c| c.to_string()).collect();
                        text += &format!("[{}]\n", cells.join(", "));
                    }
                }
            }
            if format == Format::Json {
                text = if specs.len() == 1 {
                    serde_json::to_string(&specs[0])
                } else {
                    serde_json::to_string(&specs)
                }
                .expect("serializable")
                    + "\n";
            }
            emit(&out, &text, stdout)
        }
        Command::EvalBasis { parity, eps, n, grid, method, format, out } => {
            let t = pool()?.install(|| basis_table(parity, eps, n, &grid, method.into())).map_err(eval_err)?;
            emit(&out, &t.render(format), stdout)
        }
        Command::Interpolate { samples, grid, format, out } => {
            let text = fs::read_to_string(&samples).map_err(|e| usage(format!("cannot read {}: {e}", samples.display())))?;
            let s: SampleSet = serde_json::from_str(&text).map_err(|e| usage(format!("bad sample set: {e}")))?;
            let t = pool()?.install(|| interpolation_table(&s, &grid)).map_err(eval_err)?;
            emit(&out, &t.render(format), stdout)
        }
        Command::PlotData { n, grid, format, out } => {
            let t = pool()?.install(|| plot_table(n, &grid)).map_err(eval_err)?;
            emit(&out, &t.render(format), stdout)
        }
        Command::Verify { only, seed, tol, out } => {
            let mut vc = VerifyConfig { seed, ..Default::default() };
            for t in &tol {
                let (name, v) = t.split_once('=').ok_or_else(|| usage(format!("--tol expects name=value, got `{t}`")))?;
                let v: f64 = v.parse().map_err(|_| usage(format!("bad tolerance value `{v}`")))?;
                vc.tol.set(name, v).map_err(usage)?;
            }
            let results = if only.is_empty() {
                run_all(&vc)
            } else {
                only.iter()
                    .map(|&id| run_one(id, &vc).ok_or_else(|| usage(format!("no criterion {id} (1..={})", CRITERIA.len()))))
                    .collect::<Result<Vec<_>, _>>()?
            };
            let mut text = String::new();
            for r in &results {
                text += &format!("{r}\n");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            text += &format!("{} / {} checks passed\n", results.len() - failed, results.len());
            emit(&out, &text, stdout)?;
            if failed > 0 {
                return Err(Failure { code: 1, msg: format!("{failed} check(s) failed") });
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match CliConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return 2;
            }
            let _ = write!(stdout, "{e}");
            return 0;
        }
    };
    match execute(cfg, stdout) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.msg);
            f.code
        }
    }
}

pub fn main_with_env() -> i32 {
    let code = run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    let _ = io::stdout().flush();
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("theta-interp").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "-4:4:401".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 401);
        assert_eq!(p[0], -4.0);
        assert_eq!(p[400], 4.0);
        assert_eq!(p[200], 0.0);
        assert!("1:0:5".parse::<Grid>().is_err());
        assert!("0:1:1".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn index_ranges() {
        assert_eq!("3".parse::<IndexRange>().unwrap(), IndexRange { lo: 3, hi: 3 });
        assert_eq!("0:2".parse::<IndexRange>().unwrap(), IndexRange { lo: 0, hi: 2 });
        assert!("2:0".parse::<IndexRange>().is_err());
    }

    #[test]
    fn coeffs_text_and_json() {
        let (code, out, _) = run_str(&["coeffs", "--parity", "even", "--eps", "-", "--n", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out, "[0, 252, -46, 1]\n");
        let (code, out, _) = run_str(&["coeffs", "--parity", "even", "--eps", "-", "--n", "3", "--format", "json"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v, serde_json::json!({"parity": "even", "eps": "-", "n": 3, "poly": ["0/1", "252/1", "-46/1", "1/1"]}));
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_str(&["coeffs", "--parity", "sideways", "--eps", "+", "--n", "1"]).0, 2);
        assert_eq!(run_str(&["coeffs", "--parity", "even", "--eps", "-", "--n", "0"]).0, 2);
        assert_eq!(run_str(&["eval-basis", "--parity", "odd", "--eps", "+", "--n", "0", "--grid", "0:1:1"]).0, 2);
        assert_eq!(run_str(&["verify", "--tol", "delta=-1"]).0, 2);
        assert_eq!(run_str(&["verify", "--only", "99"]).0, 2);
        assert_eq!(run_str(&["frobnicate"]).0, 2);
    }

    #[test]
    fn verify_failure_exits_1() {
        let (code, out, _) = run_str(&["verify", "--only", "3", "--tol", "j_at_i=1e-300", "--tol", "jacobi=1e-300"]);
        assert_eq!(code, 1, "{out}");
        assert!(out.contains("[FAIL]"));
        let (code, out, _) = run_str(&["verify", "--only", "1", "--only", "2"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let t = Table {
            header: vec!["x".into(), "v".into()],
            rows: vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-300, f64::MAX], vec![5e-324, -0.0]],
        };
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.header, t.header);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
