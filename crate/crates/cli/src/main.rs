use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use zorich::dynamics::{self, SlicePlane};
use zorich::hair::{self, CurveOptions};
use zorich::io::{self, Ledger, RunConfig};
use zorich::map::Calibration;
use zorich::sampling::{self, SampledConstants};
use zorich::{verify, ExternalAddress};

#[derive(Parser)]
#[command(name = "zorich", version, about = "Zorich maps, their hairs and dynamics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reuse the constants of a saved ledger instead of recalibrating.
    #[arg(long, global = true)]
    ledger: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the map and write the constants ledger.
    Calibrate {
        /// Also record sampled derivative constants.
        #[arg(long)]
        sample: bool,
    },
    /// Sample a hair curve.
    Hair {
        #[command(flatten)]
        addr: AddressArg,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = hair::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = hair::DEFAULT_K_MAX)]
        k_max: usize,
        /// Also evaluate at the endpoint parameter `t_s`.
        #[arg(long)]
        endpoint: bool,
        /// Fail when any sample misses the tolerance.
        #[arg(long)]
        strict: bool,
    },
    /// Cauchy differences of the depth-k approximations at one parameter.
    HairConvergence {
        #[command(flatten)]
        addr: AddressArg,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 40)]
        k_max: usize,
        /// Fail when a fitted slope exceeds `log alpha + 0.1`.
        #[arg(long)]
        strict: bool,
    },
    /// Admissibility bounds and the endpoint parameter of an address.
    Tsub {
        #[command(flatten)]
        addr: AddressArg,
        #[arg(long, default_value_t = 32)]
        horizon: usize,
    },
    /// Trace a forward orbit.
    Orbit {
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = dynamics::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Escape-time image of a plane through the axis, as binary PGM.
    Slice {
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        #[arg(long, default_value_t = dynamics::DEFAULT_BUDGET)]
        budget: usize,
        /// Spatial axis spanning the plane, zero-based.
        #[arg(long, default_value_t = 0)]
        axis: usize,
        /// Spatial window as `lo,hi`.
        #[arg(long, allow_hyphen_values = true)]
        x_range: Option<String>,
        /// Height window as `lo,hi`.
        #[arg(long, allow_hyphen_values = true)]
        h_range: Option<String>,
    },
    /// Derivative estimate and telescoping check at one depth.
    LemmaCheck {
        #[command(flatten)]
        addr: AddressArg,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = sampling::DEFAULT_SAMPLES)]
        samples: usize,
    },
    /// Run the invariant suite and write a JSON report.
    Verify,
}

#[derive(Args)]
struct AddressArg {
    /// Address descriptor as JSON, or `@path`; the zero address when absent.
    #[arg(long)]
    address: Option<String>,
}

impl AddressArg {
    fn resolve(&self, cal: &Calibration) -> Result<ExternalAddress> {
        let len = cal.dimension() - 1;
        match &self.address {
            None => Ok(ExternalAddress::zero(len)),
            Some(s) => {
                let text = match s.strip_prefix('@') {
                    Some(p) => fs::read_to_string(p).with_context(|| format!("reading {p}"))?,
                    None => s.clone(),
                };
                Ok(ExternalAddress::parse(&text, len)?)
            }
        }
    }
}

struct Ctx {
    config: RunConfig,
    ledger: Option<Ledger>,
    out: Option<PathBuf>,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let mut config = match &g.config {
            Some(p) => RunConfig::from_json_str(&read(p)?)?,
            None => RunConfig::default(),
        };
        if let Some(s) = g.seed {
            config.seed = s;
        }
        let ledger = match &g.ledger {
            Some(p) => Some(Ledger::from_json_str(&read(p)?)?),
            None => None,
        };
        Ok(Ctx {
            config,
            ledger,
            out: g.out.clone(),
        })
    }

    fn calibration(&self) -> Result<Calibration> {
        Ok(match &self.ledger {
            Some(l) => l.to_calibration().context("invalid ledger")?,
            None => self.config.calibrate()?,
        })
    }

    fn constants(&self, cal: &Calibration, samples: usize) -> Result<SampledConstants> {
        if let Some(s) = self.ledger.as_ref().and_then(|l| l.sampled.clone()) {
            return Ok(s);
        }
        Ok(sampling::sample_constants(cal, self.config.seed, samples)?)
    }

    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
            None => {
                std::io::stdout().write_all(bytes)?;
                Ok(())
            }
        }
    }
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?}")))
        .collect()
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    match parse_floats(s)?[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => bail!("range must be 'lo,hi'"),
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Exit status for a command that ran to completion.
enum Outcome {
    Ok,
    Failed(String),
}

fn run(cli: Cli) -> Result<Outcome> {
    let ctx = Ctx::new(&cli.global)?;
    match cli.cmd {
        Command::Calibrate { sample } => {
            let cal = ctx.calibration()?;
            let sampled = if sample {
                Some(sampling::sample_constants(&cal, ctx.config.seed, sampling::DEFAULT_SAMPLES)?)
            } else {
                None
            };
            ctx.emit(Ledger::from_calibration(&cal, sampled).to_json_string()?.as_bytes())?;
        }
        Command::Hair {
            addr,
            t_min,
            t_max,
            samples,
            tol,
            k_max,
            endpoint,
            strict,
        } => {
            let cal = ctx.calibration()?;
            let a = addr.resolve(&cal)?;
            let bounds = a.bounds(32)?;
            if !bounds.admissible {
                bail!("address is not admissible");
            }
            if !(tol > 0.0) || samples == 0 || !(t_min <= t_max) {
                bail!("need tol > 0, samples >= 1 and t_min <= t_max");
            }
            if t_min < bounds.t_s {
                bail!("t_min = {t_min} lies below t_s = {}", bounds.t_s);
            }
            let opts = CurveOptions { tol, k_max };
            let mut out = Vec::new();
            if endpoint {
                let mut s = hair::hair_sample(&cal, &a, bounds.t_s, opts)?;
                s.endpoint = true;
                out.push(s);
            }
            out.extend(hair::hair_curve(&cal, &a, &linspace(t_min, t_max, samples), opts)?);
            ctx.emit(io::hair_csv(&out, cal.dimension()).as_bytes())?;
            let missed = out.iter().filter(|s| !s.converged).count();
            if strict && missed > 0 {
                return Ok(Outcome::Failed(format!("{missed} samples did not converge")));
            }
        }
        Command::HairConvergence {
            addr,
            t,
            k_min,
            k_max,
            strict,
        } => {
            let cal = ctx.calibration()?;
            let a = addr.resolve(&cal)?;
            let rep = hair::convergence_report(&cal, &a, t, k_min, k_max)?;
            ctx.emit(io::convergence_csv(&rep).as_bytes())?;
            eprintln!(
                "{}",
                json!({ "c0_fit": rep.c0_fit, "c1_fit": rep.c1_fit, "log_alpha": rep.log_alpha })
            );
            let bound = rep.log_alpha + 0.1;
            if strict && !(rep.c0_fit.within(bound) && rep.c1_fit.within(bound)) {
                return Ok(Outcome::Failed("fitted rate exceeds log alpha + 0.1".into()));
            }
        }
        Command::Tsub { addr, horizon } => {
            let cal = ctx.calibration()?;
            let b = addr.resolve(&cal)?.bounds(horizon)?;
            let v = json!({ "t_s": b.t_s, "admissible": b.admissible, "t": b.t, "tau": b.tau });
            ctx.emit(format!("{}\n", serde_json::to_string_pretty(&v)?).as_bytes())?;
        }
        Command::Orbit { point, budget } => {
            let cal = ctx.calibration()?;
            let x = parse_floats(&point)?;
            if x.len() != cal.dimension() {
                bail!("point has {} coordinates, expected {}", x.len(), cal.dimension());
            }
            let (res, steps) = dynamics::trace_orbit(&cal, &x, budget);
            ctx.emit(io::orbit_csv(&steps, cal.dimension()).as_bytes())?;
            eprintln!("{}", serde_json::to_string(&res)?);
        }
        Command::Slice {
            width,
            height,
            budget,
            axis,
            x_range,
            h_range,
        } => {
            let cal = ctx.calibration()?;
            let mut plane = SlicePlane::standard(&cal);
            plane.axis = axis;
            if let Some(r) = x_range {
                plane.x_range = parse_range(&r)?;
            }
            if let Some(r) = h_range {
                plane.h_range = parse_range(&r)?;
            }
            let img = dynamics::escape_slice(&cal, &plane, width, height, budget)?;
            let mut buf = Vec::new();
            io::write_pgm(&img, &mut buf)?;
            ctx.emit(&buf)?;
        }
        Command::LemmaCheck { addr, k, t, samples } => {
            let cal = ctx.calibration()?;
            let a = addr.resolve(&cal)?;
            let consts = ctx.constants(&cal, samples)?;
            let rep = hair::lemma_check(&cal, &a, k, t, &consts)?;
            let v = json!({ "constants": consts, "report": rep });
            ctx.emit(format!("{}\n", serde_json::to_string_pretty(&v)?).as_bytes())?;
        }
        Command::Verify => {
            let cal = ctx.calibration()?;
            let rep = verify::run_verify_with(&cal, ctx.config.seed)?;
            ctx.emit(rep.to_json_string()?.as_bytes())?;
            let failed: Vec<_> = rep.hard.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            if !failed.is_empty() {
                return Ok(Outcome::Failed(format!("hard checks failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_ranges() {
        assert_eq!(linspace(0.5, 2.0, 4), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(linspace(1.0, 3.0, 1), vec![1.0]);
        assert_eq!(parse_range("-4, 4").unwrap(), (-4.0, 4.0));
        assert!(parse_range("1").is_err());
        assert!(parse_floats("1,x").is_err());
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
