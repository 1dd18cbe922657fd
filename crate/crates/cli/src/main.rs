//! `dopspoof`: runs one experiment and writes its CSV output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dopspoof_core::channel::speed_for_doppler;
use dopspoof_core::harness::{parse_config, run_experiment, ExperimentKind, ExperimentSpec};
use dopspoof_core::{Error, SpoofParams};

#[derive(Parser)]
#[command(name = "dopspoof", version, about = "Doppler spoofing experiments on a baseband OFDM link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired bit-error-rate sweep over SNR and Doppler.
    Ber(Common),
    /// Averaged Welch periodogram of the received signal.
    Periodogram(Common),
    /// Speed estimates and phase traces at the eavesdropper.
    Estimate(Common),
    /// Frequency response of the spoofing filter.
    FilterReport(Common),
}

#[derive(Args)]
struct Common {
    /// `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated SNR grid in dB. A periodogram takes a single value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    doppler_real_hz: Option<f64>,
    /// Artificial Doppler added without knowledge of the real speed; 0 disables spoofing.
    #[arg(long, allow_hyphen_values = true)]
    doppler_spoof_hz: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
}

fn build_spec(kind: ExperimentKind, a: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text, kind)?
        }
        None => ExperimentSpec::new(kind),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(o) = &a.out {
        spec.out_path = o.clone();
    }
    if let Some(t) = a.trials {
        spec.n_trials = t;
    }
    if let Some(snr) = &a.snr {
        if kind == ExperimentKind::Periodogram {
            match snr.as_slice() {
                [s] => spec.channel.snr_db = *s,
                _ => return Err(Error::Validation("a periodogram takes a single --snr value".into())),
            }
        } else {
            spec.snr_grid_db = snr.clone();
        }
    }
    let f_c = spec.cfg.f_c;
    if let Some(f) = a.doppler_real_hz {
        spec.channel.v_re = speed_for_doppler(f, f_c);
        spec.doppler_pairs_hz.clear();
    }
    if let Some(f) = a.doppler_spoof_hz {
        spec.spoof = (f != 0.0).then(|| SpoofParams { v_sp: speed_for_doppler(f, f_c), v_re_known: None });
        spec.doppler_pairs_hz.clear();
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Ber(a) => (ExperimentKind::Ber, a),
        Command::Periodogram(a) => (ExperimentKind::Periodogram, a),
        Command::Estimate(a) => (ExperimentKind::Estimate, a),
        Command::FilterReport(a) => (ExperimentKind::FilterReport, a),
    };
    match build_spec(kind, args).and_then(|spec| run_experiment(&spec)) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
