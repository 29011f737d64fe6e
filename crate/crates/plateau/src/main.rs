use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use plateau::cli::{Cli, Format, Run, execute};
use plateau::error::CliError;

fn render(run: &Run, wall: f64) -> Result<String, CliError> {
    match run.format {
        Format::Csv => run.outcome.table.to_csv(),
        Format::Json => {
            let rec = run.outcome.run_record(run.settings.as_map(), run.seed, wall);
            Ok(serde_json::to_string_pretty(&rec).expect("record serialises") + "\n")
        }
    }
}

fn main_inner(cli: &Cli) -> Result<(), CliError> {
    let start = Instant::now();
    let run = execute(cli, None)?;
    let wall = start.elapsed().as_secs_f64();
    let text = render(&run, wall)?;
    match &cli.global.output {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    for note in &run.outcome.notes {
        eprintln!("note: {note}");
    }
    for c in &run.outcome.checks {
        eprintln!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if cli.global.verify {
        let again = execute(cli, Some(1))?;
        if again.outcome.table.to_csv()? != run.outcome.table.to_csv()? {
            return Err(CliError::Check("re-run on one worker produced different numbers".into()));
        }
        eprintln!("verify: re-run on one worker is byte-identical");
    }
    let failed = run.outcome.failed_checks();
    if run.outcome.checks_gate && !failed.is_empty() {
        return Err(CliError::Check(format!("{} of {} checks failed", failed.len(), run.outcome.checks.len())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plateau: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
