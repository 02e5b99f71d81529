use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use eofkit::eof::{eof_minimize, ppt_check, wootters_eof, PptVerdict};
use eofkit::io::{c_dependent_to_json, ensemble_to_json, state_from_json, state_to_json};
use eofkit::qcore::{BipartiteLayout, DensityMatrix, Observable};
use eofkit::qcorr::{cqc_degree, udqc, wdqc};
use eofkit::states::{make, FamilySpec, Pauli};
use eofkit::verify::{run_suite, Suite};
use eofkit::OptimizerConfig;

/// Entanglement of formation and quantum-correlation coefficients.
#[derive(Parser)]
#[command(name = "eofkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Variational entanglement of formation.
    Eof {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Include the optimal decomposition in the JSON report.
        #[arg(long)]
        with_ensemble: bool,
    },
    /// Degree of quantum correlations on a pair of local observables.
    Cqc {
        #[command(flatten)]
        state: StateArgs,
        /// Local Pauli observables, e.g. `z,z`.
        #[arg(long, default_value = "z,z")]
        observables: String,
        #[command(flatten)]
        opt: OptArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Uniform degree of quantum correlation (trace-norm bounds).
    Udqc {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[command(flatten)]
        out: OutArgs,
        /// Include the nearest c-dependent state found.
        #[arg(long)]
        with_ensemble: bool,
    },
    /// Weak degree of quantum correlation on per-factor observables.
    Wdqc {
        #[command(flatten)]
        state: StateArgs,
        /// One entry per factor; `-` leaves a factor out, e.g. `z,-,z`.
        #[arg(long)]
        observables: String,
        #[command(flatten)]
        opt: OptArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep a one-parameter family over a grid.
    Sweep {
        /// `werner` or `isotropic`.
        #[arg(long)]
        family: String,
        /// `lo:hi:step`.
        #[arg(long, default_value = "0:1:0.1")]
        grid: String,
        #[command(flatten)]
        opt: OptArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the acceptance suites.
    Verify {
        /// `all`, a criterion number or a suite name.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a family state as a matrix document.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StateArgs {
    /// Named state, e.g. `werner:p=0.5`.
    #[arg(long, conflicts_with = "input")]
    family: Option<String>,
    /// Matrix document.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct OptArgs {
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
}

impl OptArgs {
    fn config(&self) -> Result<OptimizerConfig> {
        let d = OptimizerConfig::default();
        let cfg = OptimizerConfig {
            restarts: self.restarts.unwrap_or(d.restarts),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            seed: self.seed.unwrap_or(d.seed),
            ensemble_size: self.ensemble_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    output: Option<PathBuf>,
}

struct LoadedState {
    state: DensityMatrix,
    dims: Vec<usize>,
}

impl LoadedState {
    fn layout(&self) -> Result<BipartiteLayout> {
        match self.dims.as_slice() {
            [d1, d2] => Ok(BipartiteLayout::new(*d1, *d2)?),
            dims => bail!("this command needs a bipartite state, got factors {dims:?}"),
        }
    }
}

fn load_state(args: &StateArgs) -> Result<LoadedState> {
    match (&args.family, &args.input) {
        (Some(text), None) => {
            let spec: FamilySpec = text.parse()?;
            Ok(LoadedState { state: make(&spec)?.density(), dims: spec.factor_dims() })
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let (state, dims) = state_from_json(&text).with_context(|| format!("invalid state in {}", path.display()))?;
            Ok(LoadedState { state, dims })
        }
        _ => bail!("give exactly one of --family or --input"),
    }
}

fn parse_paulis(text: &str) -> Result<Vec<Option<Pauli>>> {
    text.split(',')
        .map(|t| match t.trim() {
            "-" | "_" => Ok(None),
            t => Ok(Some(t.parse::<Pauli>()?)),
        })
        .collect()
}

/// Grid points `lo + k·step` up to `hi`.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else { bail!("grid must be lo:hi:step, got `{text}`") };
    let (lo, hi, step): (f64, f64, f64) = (lo.trim().parse()?, hi.trim().parse()?, step.trim().parse()?);
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        bail!("grid needs lo <= hi and step > 0, got `{text}`");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + k as f64 * step).collect())
}

/// `%.12g`-style formatting.
fn g12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..12).contains(&exp) {
        trim(format!("{:.*}", (11 - exp).max(0) as usize, x))
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, e) = s.split_once('e').expect("exponent");
        format!("{}e{e}", trim(mantissa.to_string()))
    }
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// A single-row report as JSON or two-line CSV.
fn report(out: &OutArgs, fields: Vec<(&str, Value)>) -> Result<()> {
    let text = match out.format.unwrap_or(Format::Json) {
        Format::Json => {
            let map: serde_json::Map<String, Value> = fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            serde_json::to_string_pretty(&Value::Object(map))? + "\n"
        }
        Format::Csv => {
            let scalar: Vec<_> = fields.into_iter().filter(|(_, v)| !v.is_object() && !v.is_array()).collect();
            let header: Vec<&str> = scalar.iter().map(|(k, _)| *k).collect();
            let row: Vec<String> = scalar
                .iter()
                .map(|(_, v)| match v {
                    Value::Number(n) => g12(n.as_f64().unwrap_or(f64::NAN)),
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            format!("{}\n{}\n", header.join(","), row.join(","))
        }
    };
    emit(out, &text)
}

fn pauli_pair(text: &str) -> Result<(Observable, Observable)> {
    match parse_paulis(text)?.as_slice() {
        [Some(a), Some(b)] => Ok((a.observable(), b.observable())),
        _ => bail!("cqc needs two Pauli observables, e.g. `z,z`"),
    }
}

fn cqc_max_over_paulis(w: &DensityMatrix, layout: BipartiteLayout, cfg: &OptimizerConfig) -> Result<f64> {
    let mut best: f64 = 0.0;
    for a in Pauli::XYZ {
        for b in Pauli::XYZ {
            best = best.max(cqc_degree(w, &a.observable(), &b.observable(), layout, cfg)?.value);
        }
    }
    Ok(best)
}

const SWEEP_HEADER: &str = "param,eof_upper,oracle_value,ppt,cqc_max_over_pauli_grid";

fn sweep(family: &str, grid: &str, cfg: &OptimizerConfig, out: &OutArgs) -> Result<()> {
    let base: FamilySpec = family.parse()?;
    let points = parse_grid(grid)?;
    let layout = base.layout()?;
    let mut rows = Vec::with_capacity(points.len());
    for p in points {
        let spec = base.with_parameter(p)?;
        let w = make(&spec)?.density();
        let eof = eof_minimize(&w, layout, cfg)?;
        let oracle = wootters_eof(&w)?;
        let ppt = ppt_check(&w, layout)?.verdict == PptVerdict::Ppt;
        let cqc = cqc_max_over_paulis(&w, layout, cfg)?;
        rows.push((p, eof.value, oracle, ppt, cqc));
    }
    let text = match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = format!("{SWEEP_HEADER}\n");
            for (p, e, o, ppt, c) in rows {
                s += &format!("{},{},{},{},{}\n", g12(p), g12(e), g12(o), ppt, g12(c));
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .into_iter()
                .map(|(p, e, o, ppt, c)| {
                    json!({"param": p, "eof_upper": e, "oracle_value": o, "ppt": ppt, "cqc_max_over_pauli_grid": c})
                })
                .collect();
            serde_json::to_string_pretty(&rows)? + "\n"
        }
    };
    emit(out, &text)
}

fn json_str(text: &str) -> Result<Value> {
    Ok(serde_json::from_str(text)?)
}

enum Outcome {
    Ok,
    SuiteFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Eof { state, opt, out, with_ensemble } => {
            let s = load_state(&state)?;
            let cfg = opt.config()?;
            let r = eof_minimize(&s.state, s.layout()?, &cfg)?;
            let mut fields = vec![
                ("value", json!(r.value)),
                ("converged", json!(r.converged)),
                ("restarts_used", json!(r.restarts_used)),
                ("residual", json!(r.residual)),
            ];
            if with_ensemble {
                fields.push(("optimal_ensemble", json_str(&ensemble_to_json(&r.optimal_ensemble, &s.dims)?)?));
            }
            report(&out, fields)?;
        }
        Command::Cqc { state, observables, opt, out } => {
            let s = load_state(&state)?;
            let (a, b) = pauli_pair(&observables)?;
            let r = cqc_degree(&s.state, &a, &b, s.layout()?, &opt.config()?)?;
            report(
                &out,
                vec![("value", json!(r.value)), ("converged", json!(r.converged)), ("pure_branch", json!(r.pure_branch))],
            )?;
        }
        Command::Udqc { state, opt, out, with_ensemble } => {
            let s = load_state(&state)?;
            let r = udqc(&s.state, s.layout()?, &opt.config()?)?;
            let mut fields = vec![
                ("upper_bound", json!(r.upper_bound)),
                ("lower_bound", json!(r.lower_bound)),
                ("converged", json!(r.converged)),
                ("witnesses", serde_json::to_value(&r.witnesses)?),
            ];
            if with_ensemble {
                fields.push(("nearest", json_str(&c_dependent_to_json(&r.nearest)?)?));
            }
            report(&out, fields)?;
        }
        Command::Wdqc { state, observables, opt, out } => {
            let s = load_state(&state)?;
            let list = parse_paulis(&observables)?;
            if list.len() != s.dims.len() {
                bail!("{} observables for {} factors; use `-` for factors without one", list.len(), s.dims.len());
            }
            let assigned: Vec<(usize, Observable)> =
                list.iter().enumerate().filter_map(|(k, p)| p.map(|p| (k, p.observable()))).collect();
            let r = wdqc(&s.state, &s.dims, &assigned, &opt.config()?)?;
            report(
                &out,
                vec![
                    ("value", json!(r.value)),
                    ("quantum_value", json!(r.quantum_value)),
                    ("converged", json!(r.converged)),
                ],
            )?;
        }
        Command::Sweep { family, grid, opt, out } => sweep(&family, &grid, &opt.config()?, &out)?,
        Command::Verify { suite, seed, output } => {
            let suite: Suite = suite.parse()?;
            let r = run_suite(suite, seed)?;
            emit(&OutArgs { format: None, output }, &r.render())?;
            if !r.passed() {
                return Ok(Outcome::SuiteFailed);
            }
        }
        Command::Gen { family, output } => {
            let spec: FamilySpec = family.parse()?;
            let text = state_to_json(&make(&spec)?.density(), &spec.factor_dims())? + "\n";
            emit(&OutArgs { format: None, output }, &text)?;
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SuiteFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", chain(&e));
            ExitCode::from(2)
        }
    }
}

fn chain(e: &anyhow::Error) -> String {
    e.chain().map(|c| c.to_string()).collect::<Vec<_>>().join(": ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(0.1), "0.1");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(0.11761859), "0.11761859");
        assert_eq!(g12(1e-20), "1e-20");
        assert_eq!(g12(-2.5e-7), "-2.5e-7");
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn error_chain_joins_contexts() {
        let e = anyhow::anyhow!("outer").context("ctx");
        assert_eq!(chain(&e), "ctx: outer");
    }
}
