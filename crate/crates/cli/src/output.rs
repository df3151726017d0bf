//! Table and script writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Output {
    dir: PathBuf,
    format: Format,
    gnuplot: bool,
}

/// One curve of a gnuplot script: 1-based y column and title.
pub struct Curve<'a>(pub usize, pub &'a str);

impl Output {
    pub fn new(dir: &Path, format: Format, gnuplot: bool) -> anyhow::Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), format, gnuplot })
    }

    pub fn subdir(&self, name: &str) -> anyhow::Result<Self> {
        Self::new(&self.dir.join(name), self.format, self.gnuplot)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Writes `rows` as `<name>.csv` or `<name>.json` according to the format.
    pub fn table<T: Serialize>(&self, name: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
        match self.format {
            Format::Csv => self.csv(name, rows),
            Format::Json => self.json(name, rows),
        }
    }

    pub fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
        let path = self.path(&format!("{name}.csv"));
        let mut writer = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.path(&format!("{name}.json"));
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Emits `<name>.gp` plotting columns of `<name>.csv` against column 1,
    /// when scripts were requested and the table is CSV.
    pub fn gnuplot(&self, name: &str, xlabel: &str, ylabel: &str, curves: &[Curve]) -> anyhow::Result<()> {
        if !self.gnuplot || self.format != Format::Csv {
            return Ok(());
        }
        let mut script = String::new();
        writeln!(script, "set datafile separator ','")?;
        writeln!(script, "set xlabel '{xlabel}'")?;
        writeln!(script, "set ylabel '{ylabel}'")?;
        writeln!(script, "set key outside")?;
        let plots: Vec<String> = curves
            .iter()
            .enumerate()
            .map(|(i, Curve(col, title))| {
                let file = if i == 0 { format!("'{name}.csv'") } else { "''".to_string() };
                format!("{file} every ::1 using 1:{col} with lines title '{title}'")
            })
            .collect();
        writeln!(script, "plot {}", plots.join(", \\\n     "))?;
        fs::write(self.path(&format!("{name}.gp")), script)?;
        Ok(())
    }
}
