//! Report files. Bodies are a pure function of the config and the results;
//! wall-clock data goes only to the `run.log` sidecar.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// 17 significant digits: enough to reload every f64 exactly.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub struct OutDir {
    pub dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &str) -> Result<OutDir, CliError> {
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(OutDir { dir })
    }

    pub fn write(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
        body.push('\n');
        self.write(name, &body)
    }

    /// A CSV file whose first line is `# config: <json>`.
    pub fn csv(&self, name: &str, config: &ExperimentConfig, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let cfg = serde_json::to_string(config).map_err(|e| CliError::Numeric(e.to_string()))?;
        let mut out = format!("# config: {cfg}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            let path = self.dir.join(name);
            w.write_record(header).map_err(|e| io_err(&path, e))?;
            for r in rows {
                w.write_record(r).map_err(|e| io_err(&path, e))?;
            }
            w.flush().map_err(|e| io_err(&path, e))?;
        }
        self.write(name, &String::from_utf8(out).expect("csv output is utf-8"))
    }

    /// Appends one line to `run.log`.
    pub fn log(&self, line: &str) {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(self.dir.join("run.log")) {
            let _ = writeln!(f, "{secs} {line}");
        }
    }
}

/// A gnuplot script drawing `ycols` against column `xcol` of `csv` on log-log
/// axes.
pub fn gnuplot_script(csv: &str, title: &str, xcol: usize, ycols: &[(usize, &str)]) -> String {
    let plots: Vec<String> = ycols
        .iter()
        .map(|(c, label)| format!("'{csv}' every ::1 using {xcol}:{c} with linespoints title '{label}'"))
        .collect();
    format!(
        "set datafile separator ','\nset datafile commentschars '#'\n\
         set logscale xy\nset xlabel 'lambda'\nset title '{title}'\nplot {}\n",
        plots.join(", \\\n     ")
    )
}
