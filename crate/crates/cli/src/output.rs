//! Output sinks. JSON is one envelope object per file; CSV starts with two
//! `#` lines naming the config hash and tool version, then a header row.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    tool_version: &'a str,
    payload: &'a T,
}

/// Where data and the human summary go. With `--out` the data goes to the
/// file and the summary to stdout; otherwise the data takes stdout and the
/// summary moves to stderr.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
    pub config_hash: String,
}

impl Sink {
    fn open(&self) -> Result<Box<dyn Write>, CliError> {
        Ok(match &self.out {
            Some(path) => {
                Box::new(BufWriter::new(File::create(path).map_err(|e| {
                    CliError::Config(format!("--out {}: {e}", path.display()))
                })?))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    pub fn summary(&self, text: &str) {
        if self.out.is_some() {
            print_text(text);
        } else {
            let _ = writeln!(io::stderr().lock(), "{text}");
        }
    }

    pub fn json<T: Serialize>(&self, payload: &T) -> Result<(), CliError> {
        let mut w = self.open()?;
        let envelope = Envelope {
            config_hash: &self.config_hash,
            tool_version: remrec::TOOL_VERSION,
            payload,
        };
        serde_json::to_writer_pretty(&mut w, &envelope)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes the preamble, then hands a CSV writer to `body`.
    pub fn csv(
        &self,
        body: impl FnOnce(&mut csv::Writer<&mut Box<dyn Write>>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let mut w = self.open()?;
        writeln!(w, "# config_hash={}", self.config_hash)?;
        writeln!(w, "# tool_version={}", remrec::TOOL_VERSION)?;
        {
            let mut c = csv::Writer::from_writer(&mut w);
            body(&mut c)?;
            c.flush()?;
        }
        w.flush()?;
        Ok(())
    }

    /// `json` or `csv` by the configured format.
    pub fn emit<T: Serialize>(
        &self,
        payload: &T,
        body: impl FnOnce(&mut csv::Writer<&mut Box<dyn Write>>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        match self.format {
            Format::Json => self.json(payload),
            Format::Csv => self.csv(body),
        }
    }
}

/// Shortest text that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `println!` that tolerates a closed stdout.
pub fn print_text(text: &str) {
    let _ = writeln!(io::stdout().lock(), "{text}");
}

pub fn is_broken_pipe(e: &CliError) -> bool {
    let kind = match e {
        CliError::Io(e) => Some(e.kind()),
        CliError::Csv(e) => match e.kind() {
            csv::ErrorKind::Io(e) => Some(e.kind()),
            _ => None,
        },
        CliError::Json(e) => e.io_error_kind(),
        _ => None,
    };
    kind == Some(io::ErrorKind::BrokenPipe)
}
