//! `fldp`: generate workloads, run the evaluation sweep, audit FLDP, print report sizes.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 verification failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fldp::data::{CsvSpec, DatasetSpec, ZipfSpec, DEFAULT_ZIPF_EXPONENT};
use fldp::experiment::{self, ExperimentSpec};
use fldp::params::UnaryVariant;
use fldp::simulation::{self, Replicate};
use fldp::verifier::{self, Enumerable, FhrEnumeration, GrrEnumeration, UnaryEnumeration};
use fldp::{wire, Execution, HadamardOrder, Mechanism};

#[derive(Parser)]
#[command(name = "fldp", version, about = "Flexible Hadamard Response experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a dataset and its exact frequencies.
    GenData {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory (items.csv, ground_truth.csv).
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Run the mechanism × ε × trial sweep and write results.csv + manifest.json.
    Run(RunArgs),
    /// Exhaustively audit the (ε, η) guarantee of a mechanism and write certificate.json.
    VerifyFldp {
        #[arg(value_enum)]
        mechanism: AuditedMechanism,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Hadamard order for fhr (power of two, at most 64).
        #[arg(long, default_value_t = 8)]
        order: u64,
        /// Domain size for grr / oue / rappor.
        #[arg(long, default_value_t = 8)]
        domain: u32,
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
    /// Print per-report communication cost in bits for each mechanism.
    SizeTable {
        #[arg(long, default_value_t = 1023)]
        domain: u64,
        /// Budget used to size the OLH hash range.
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    Zipf,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AuditedMechanism {
    Fhr,
    Grr,
    Oue,
    Rappor,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_enum, default_value = "zipf")]
    dataset: DatasetKind,
    #[arg(long, default_value_t = 100_000)]
    zipf_n: u64,
    #[arg(long, default_value_t = 1023)]
    zipf_d: u32,
    #[arg(long, default_value_t = DEFAULT_ZIPF_EXPONENT)]
    zipf_exponent: f64,
    /// Seed for the Zipf generator.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Input file when --dataset csv.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Zero-based column to read from the CSV.
    #[arg(long, default_value_t = 0)]
    csv_column: usize,
    /// Skip the first CSV row.
    #[arg(long)]
    csv_header: bool,
}

impl DataArgs {
    fn spec(&self) -> Result<DatasetSpec, String> {
        match self.dataset {
            DatasetKind::Zipf => Ok(DatasetSpec::Zipf(ZipfSpec {
                n: self.zipf_n,
                domain_size: self.zipf_d,
                exponent: self.zipf_exponent,
                seed: self.data_seed,
            })),
            DatasetKind::Csv => {
                let path = self.csv.clone().ok_or("--dataset csv needs --csv <path>")?;
                Ok(DatasetSpec::Csv(CsvSpec {
                    path,
                    column: self.csv_column,
                    has_header: self.csv_header,
                }))
            }
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_MECHANISMS.map(|m| m.to_string()))]
    mechanisms: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = experiment::default_epsilons())]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = experiment::DEFAULT_TOPK)]
    topk: Vec<usize>,
    #[arg(long, default_value_t = experiment::DEFAULT_TRIALS)]
    trials: u32,
    /// Master seed for per-user randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Write 0 in wall_time_ms so results.csv is byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    /// Also write trial-0 FHR reports (reports/*.bin and *.jsonl).
    #[arg(long)]
    dump_reports: bool,
    /// Run single-threaded.
    #[arg(long)]
    sequential: bool,
}

enum Failure {
    Usage(String),
    Verification(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::GenData { data, out } => gen_data(&data, &out),
        Command::Run(args) => run(&args),
        Command::VerifyFldp {
            mechanism,
            epsilon,
            order,
            domain,
            out,
        } => verify_fldp(mechanism, epsilon, order, domain, &out),
        Command::SizeTable { domain, epsilon } => {
            let t = wire::report_size_table(domain, epsilon)?;
            println!("mechanism,bits");
            println!("fhr,{}", t.fhr);
            println!("grr,{}", t.grr);
            println!("oue,{}", t.unary);
            println!("rappor,{}", t.unary);
            println!("olh,{}", t.olh);
            Ok(())
        }
    }
}

fn gen_data(data: &DataArgs, out: &std::path::Path) -> Result<(), Failure> {
    let spec = data.spec()?;
    spec.validate()?;
    let stream = spec.load()?;
    fs::create_dir_all(out)?;
    stream.write_items(fs::File::create(out.join("items.csv"))?)?;
    stream.write_ground_truth(fs::File::create(out.join("ground_truth.csv"))?)?;
    eprintln!(
        "wrote {} records over {} values to {}",
        stream.len(),
        stream.domain_size(),
        out.display()
    );
    Ok(())
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let mechanisms = args
        .mechanisms
        .iter()
        .map(|m| m.parse::<Mechanism>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = ExperimentSpec {
        dataset: args.data.spec()?,
        mechanisms,
        epsilons: args.epsilons.clone(),
        topk: args.topk.clone(),
        trials: args.trials,
        seed: args.seed,
        record_timing: !args.no_timing,
    };
    spec.validate()?;
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let stream = spec.dataset.load()?;
    let output = experiment::run_on_stream(&spec, &stream, exec)?;
    experiment::write_outputs(&output, &args.out)?;
    if args.dump_reports && spec.mechanisms.contains(&Mechanism::Fhr) {
        let dir = args.out.join("reports");
        fs::create_dir_all(&dir)?;
        let d = stream.domain_size();
        let order = HadamardOrder::for_domain(d as u64)?;
        for &eps in &spec.epsilons {
            let params = Mechanism::Fhr.params(eps, d as u64)?;
            let rep = Replicate {
                seed: spec.seed,
                trial: 0,
            };
            let reports = simulation::fhr_reports(stream.items(), d, &params, rep, exec)?;
            let stem = format!("fhr_eps{eps}_trial0");
            wire::write_report_file(fs::File::create(dir.join(format!("{stem}.bin")))?, order, &reports)?;
            wire::write_jsonl(
                std::io::BufWriter::new(fs::File::create(dir.join(format!("{stem}.jsonl")))?),
                &reports,
            )?;
        }
    }
    eprintln!("wrote {} rows to {}", output.rows.len(), args.out.join("results.csv").display());
    Ok(())
}

fn verify_fldp(
    mechanism: AuditedMechanism,
    epsilon: f64,
    order: u64,
    domain: u32,
    out: &std::path::Path,
) -> Result<(), Failure> {
    let (audited, claimed_eta): (Box<dyn Enumerable>, f64) = match mechanism {
        AuditedMechanism::Fhr => (
            Box::new(FhrEnumeration::new(epsilon, HadamardOrder::from_order(order)?)?),
            0.5,
        ),
        AuditedMechanism::Grr => (Box::new(GrrEnumeration::new(epsilon, domain)?), 1.0),
        AuditedMechanism::Oue => (
            Box::new(UnaryEnumeration::new(epsilon, domain, UnaryVariant::Oue)?),
            1.0,
        ),
        AuditedMechanism::Rappor => (
            Box::new(UnaryEnumeration::new(epsilon, domain, UnaryVariant::Rappor)?),
            1.0,
        ),
    };
    let cert = verifier::certify(audited.as_ref())?;
    let doc = serde_json::json!({
        "mechanism": match mechanism {
            AuditedMechanism::Fhr => "fhr",
            AuditedMechanism::Grr => "grr",
            AuditedMechanism::Oue => "oue",
            AuditedMechanism::Rappor => "rappor",
        },
        "epsilon": epsilon,
        "claimed_eta": claimed_eta,
        "certificate": cert,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(out, text)?;
    println!(
        "eta={} max_ratio={} epsilon_effective={}",
        cert.eta_observed, cert.max_ratio_observed, cert.epsilon_effective
    );
    if cert.eta_observed < claimed_eta {
        return Err(Failure::Verification(format!(
            "eta {} below claimed {claimed_eta}",
            cert.eta_observed
        )));
    }
    if cert.epsilon_effective.is_nan() || cert.epsilon_effective > epsilon + 1e-9 {
        return Err(Failure::Verification(format!(
            "effective epsilon {} exceeds {epsilon}",
            cert.epsilon_effective
        )));
    }
    Ok(())
}
