//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification row failed or a computation
//! failed, 2 usage, input parse or stability-bound error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use grassflow::development::{develop, undevelop, GrassmannPath};
use grassflow::flows::{simulate, Model, SimConfig, State};
use grassflow::hierarchy::compute_hierarchy;
use grassflow::io::{self, FieldFile, FieldMeta};
use grassflow::presets::{make_field, FieldData, Preset, PresetParams};
use grassflow::verify::{run_suite, Suite, VerifyConfig};
use grassflow::{Error, OrbitParams};

#[derive(Parser)]
#[command(name = "grassflow", version, about = "AKNS hierarchy, Grassmannian development and KdV operator checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write Q_1 .. Q_J of a skew field.
    Hierarchy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        jmax: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Integrate an evolution equation.
    Simulate {
        /// mnls, gnls, kdv, flow-j or hflow-j
        #[arg(long)]
        model: String,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        t_final: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100)]
        log_every: usize,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        conserved: Option<PathBuf>,
    },
    /// Path on the orbit to its skew field.
    Develop {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Skew field to its path on the orbit.
    Undevelop {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a preset field.
    MakeField {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long = "L", default_value_t = 20.0)]
        half_width: f64,
        #[arg(long = "N", default_value_t = 256)]
        len: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run a verification suite and write a CSV report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. } | Error::Parameter(_) | Error::Stability(_) | Error::UnknownPreset(_) | Error::Validation { .. } | Error::Io(_)
    )
}

fn need_params(file: &FieldFile) -> grassflow::Result<OrbitParams> {
    file.params.clone().ok_or_else(|| Error::ModelMismatch("scalar fields have no orbit".into()))
}

fn run(cli: Cli) -> grassflow::Result<bool> {
    match cli.command {
        Command::Hierarchy { input, jmax, output } => {
            let file = io::load_field(&input)?;
            let FieldData::Skew(u) = &file.data else {
                return Err(Error::ModelMismatch(format!("hierarchy needs a skew_field, got {}", file.data.kind())));
            };
            let table = compute_hierarchy(u, &need_params(&file)?, jmax)?;
            if table.flagged() {
                eprintln!("warning: recursion residuals {:?}", table.recursion_residuals());
            }
            fs::write(output, io::hierarchy_to_string(&table, jmax)?)?;
        }
        Command::Simulate { model, j, t_final, dt, input, log_every, output, conserved } => {
            let model = Model::parse(&model, j)?;
            let file = io::load_field(&input)?;
            let state = match file.data {
                FieldData::Skew(f) => State::Field(f),
                FieldData::Path(f) => State::Path(f),
                FieldData::Scalar(f) => State::Scalar(f),
            };
            let traj = simulate(model, &state, &SimConfig { t_final, dt, log_every }, file.params.as_ref())?;
            if traj.flagged {
                eprintln!("warning: orbit correction exceeded tolerance");
            }
            fs::write(output, io::trajectory_to_string(&traj, file.params.as_ref())?)?;
            if let Some(path) = conserved {
                fs::write(path, io::conserved_to_csv(&traj)?)?;
            }
        }
        Command::Develop { input, output } => {
            let file = io::load_field(&input)?;
            let params = need_params(&file)?;
            let FieldData::Path(g) = file.data else {
                return Err(Error::ModelMismatch(format!("develop needs a grassmann_path, got {}", file.data.kind())));
            };
            let fp = develop(&GrassmannPath::new(g, &params)?, &params)?;
            report_frames(&fp);
            let out = FieldFile { data: FieldData::Skew(fp.u().clone()), params: Some(params), meta: file.meta };
            io::save_field(&out, output)?;
        }
        Command::Undevelop { input, output } => {
            let file = io::load_field(&input)?;
            let params = need_params(&file)?;
            let FieldData::Skew(u) = &file.data else {
                return Err(Error::ModelMismatch(format!("undevelop needs a skew_field, got {}", file.data.kind())));
            };
            let fp = undevelop(u, &params)?;
            report_frames(&fp);
            let out = FieldFile { data: FieldData::Path(fp.gamma().clone()), params: Some(params), meta: file.meta };
            io::save_field(&out, output)?;
        }
        Command::MakeField { preset, n, k, half_width, len, seed, output } => {
            let preset: Preset = preset.parse()?;
            let data = make_field(preset, &PresetParams { n, k, half_width, len, seed })?;
            let params = match data {
                FieldData::Scalar(_) => None,
                _ => Some(OrbitParams::new(n, k)?),
            };
            let meta = FieldMeta { preset: Some(preset.name().to_string()), seed: Some(seed) };
            io::save_field(&FieldFile { data, params, meta }, output)?;
        }
        Command::Verify { suite, config, report } => {
            let suite: Suite = suite.parse()?;
            let cfg = match config {
                Some(path) => VerifyConfig::from_toml(&fs::read_to_string(path)?)?,
                None => VerifyConfig::default(),
            };
            let rep = run_suite(suite, &cfg)?;
            let csv = rep.to_csv()?;
            match report {
                Some(path) => fs::write(path, &csv)?,
                None => print!("{csv}"),
            }
            for row in rep.failures() {
                eprintln!("FAIL {}/{} {}: {:e} (tolerance {})", row.suite, row.test_id, row.quantity, row.value, row.bound);
            }
            return Ok(rep.passed());
        }
    }
    Ok(true)
}

fn report_frames(fp: &grassflow::development::FramedPath) {
    let d = fp.diagnostics();
    if d.flagged {
        eprintln!(
            "warning: unitarity drift {:e}, conjugation residual {:e}",
            d.unitarity_drift, d.conjugation_residual
        );
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if usage_error(&e) { 2 } else { 1 })
        }
    }
}
