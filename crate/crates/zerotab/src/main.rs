use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use primerace::residues::{build_modulus, characters, parse_label};
use primerace::zeros::{ZeroRecord, ZeroSet};
use zerotab::{find_zeros, LFunction};

/// Writes a zero file for characters mod k, complete to height T.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Modulus k.
    #[arg(short = 'k', long)]
    modulus: u64,
    /// Completeness height T.
    #[arg(short = 'T', long)]
    tmax: f64,
    /// Character labels (default: every character mod k). Principal
    /// characters get the zeros of the Riemann zeta function.
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Output path.
    #[arg(short, long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let m = match build_modulus(args.modulus) {
        Ok(m) => Arc::new(m),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let all = characters(&m);
    let chosen: Vec<_> = if args.labels.is_empty() {
        all
    } else {
        let mut out = Vec::new();
        for label in &args.labels {
            match parse_label(label).filter(|(k, _)| *k == args.modulus) {
                Some((_, idx)) => match all.iter().find(|c| c.index() == idx.as_slice()) {
                    Some(c) => out.push(c.clone()),
                    None => {
                        eprintln!("error: no character '{label}'");
                        return ExitCode::from(2);
                    }
                },
                None => {
                    eprintln!("error: bad label '{label}'");
                    return ExitCode::from(2);
                }
            }
        }
        out
    };
    let source = format!(
        "zerotab {}: Euler-Maclaurin evaluation of the inducing primitive L-function, sign changes of Z(t) refined by Brent's method",
        env!("CARGO_PKG_VERSION")
    );
    let mut zs = ZeroSet::new(args.modulus, args.tmax, source).expect("valid modulus");
    for chi in &chosen {
        let start = Instant::now();
        let mut lf = LFunction::for_character(chi);
        let rep = find_zeros(&mut lf, args.tmax);
        eprintln!(
            "{}: conductor {}, {} zeros, drift [{:.2}, {:.2}], max |Im| {:.1e}, {} near misses, {:.1?}",
            chi.label(),
            lf.conductor(),
            rep.zeros.len(),
            rep.count_drift.0,
            rep.count_drift.1,
            rep.max_imag,
            rep.near_misses_resolved,
            start.elapsed()
        );
        let records: Vec<ZeroRecord> = rep.zeros.iter().map(|&g| ZeroRecord::on_line(g)).collect();
        zs.insert(chi.index(), &records).expect("valid records");
    }
    if let Err(e) = zs.save(&args.out) {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
