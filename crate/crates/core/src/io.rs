//! File formats: TOML configs, plain-text departure profiles, and the CSV
//! artifacts a run leaves behind.
//!
//! A departure profile file lists one `time rate` pair per line (blank
//! lines and `#` comments allowed); each rate applies from its time
//! (exclusive) until the next listed time (inclusive), and intervals
//! before the first time carry rate zero.
//!
//! A [`CsvSink`] writes, per run: `summary.csv` (one row per day),
//! `density.csv` (one row per day and payoff cell), `flows.csv` (one row
//! per day and time interval; cumulative curves, queue length, and
//! queueing time are reported at each interval's *end* boundary), and
//! `manifest.toml` (stop reason, tool version, and the exact
//! configuration). Files are flushed after every day so an interrupted
//! run still leaves consistent artifacts. All floats are written with 12
//! significant digits.

use std::fs;
use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{SimConfig, ValidatedConfig};
use crate::driver::{DayRecord, DaySink, RunSummary};
use crate::error::SimError;
use crate::grid::Grids;
use crate::{Result, Scalar};

/// Reads and deserialises a TOML configuration file.
///
/// # Errors
///
/// [`SimError::Io`] when the file cannot be read, [`SimError::Parse`] when
/// it is not a valid configuration (unknown keys are rejected).
pub fn read_config_file<T: Scalar + DeserializeOwned>(path: &Path) -> Result<SimConfig<T>> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::io(format!("reading {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| SimError::Parse(format!("{}: {e}", path.display())))
}

/// Serialises a configuration as TOML (the inverse of
/// [`read_config_file`]).
pub fn config_to_string<T: Scalar + Serialize>(cfg: &SimConfig<T>) -> String {
    toml::to_string(cfg).expect("config serialises to TOML")
}

/// Reads a piecewise-constant departure profile: `time rate` per line.
///
/// # Errors
///
/// [`SimError::Io`] when the file cannot be read; [`SimError::Parse`]
/// (with file and line number) for malformed lines or an empty profile.
pub fn read_departure_pieces(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::io(format!("reading {}", path.display()), e))?;
    let mut pieces = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.split_whitespace();
        let (Some(t), Some(rate), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(SimError::Parse(format!(
                "{}:{lineno}: expected `time rate`, got {raw:?}",
                path.display()
            )));
        };
        let t: f64 = t
            .parse()
            .map_err(|_| SimError::Parse(format!("{}:{lineno}: bad time {t:?}", path.display())))?;
        let rate: f64 = rate.parse().map_err(|_| {
            SimError::Parse(format!("{}:{lineno}: bad rate {rate:?}", path.display()))
        })?;
        pieces.push((t, rate));
    }
    if pieces.is_empty() {
        return Err(SimError::Parse(format!(
            "{}: no departure pieces found",
            path.display()
        )));
    }
    Ok(pieces)
}

/// Samples a piecewise-constant departure profile at the interval centers.
///
/// Piece `(t_i, rate_i)` applies on `(t_i, t_{i+1}]`; centers before the
/// first piece get rate zero.
///
/// # Errors
///
/// [`SimError::Parse`] when the pieces are empty, out of order, or carry
/// a negative or non-finite time/rate.
pub fn rates_from_pieces<T: Scalar>(
    cfg: &ValidatedConfig<T>,
    grids: &Grids<T>,
    pieces: &[(T, T)],
) -> Result<Vec<T>> {
    if pieces.is_empty() {
        return Err(SimError::Parse("departure profile: no pieces".into()));
    }
    for (i, &(t, rate)) in pieces.iter().enumerate() {
        if !t.is_finite() || !rate.is_finite() || rate < T::zero() {
            return Err(SimError::Parse(format!(
                "departure profile: piece {i} has time {t}, rate {rate} \
                 (need finite time and finite nonnegative rate)"
            )));
        }
    }
    for (i, win) in pieces.windows(2).enumerate() {
        if win[0].0 >= win[1].0 {
            return Err(SimError::Parse(format!(
                "departure profile: times must strictly increase \
                 (piece {i} at {} is not before piece {} at {})",
                win[0].0,
                i + 1,
                win[1].0
            )));
        }
    }

    let mut f = vec![T::zero(); cfg.n_intervals()];
    let mut idx = 0usize;
    for (m, &t) in grids.time.centers.iter().enumerate() {
        while idx + 1 < pieces.len() && pieces[idx + 1].0 < t {
            idx += 1;
        }
        if pieces[idx].0 < t {
            f[m] = pieces[idx].1;
        }
    }
    Ok(f)
}

/// Formats a scalar with 12 significant digits in scientific notation —
/// the precision used in all CSV artifacts.
pub fn fmt_sig<T: Scalar>(x: T) -> String {
    format!("{x:.11e}")
}

/// Sink that writes the CSV artifacts of a run into a directory.
pub struct CsvSink<T> {
    dir: PathBuf,
    summary: BufWriter<File>,
    density: BufWriter<File>,
    flows: BufWriter<File>,
    t_centers: Vec<T>,
    x_centers: Vec<T>,
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        SimError::io(format!("creating {}", path.display()), e)
    })?))
}

fn write_err(path: &Path, e: std::io::Error) -> SimError {
    SimError::io(format!("writing {}", path.display()), e)
}

impl<T: Scalar> CsvSink<T> {
    /// Opens the artifact files in `dir` (created if missing).
    ///
    /// # Errors
    ///
    /// [`SimError::Io`] when `dir` already holds a `summary.csv` and
    /// `overwrite` is false, or when a file cannot be created.
    pub fn create(dir: &Path, grids: &Grids<T>, overwrite: bool) -> Result<Self> {
        let summary_path = dir.join("summary.csv");
        if summary_path.exists() && !overwrite {
            return Err(SimError::io(
                format!(
                    "output directory {} already holds run artifacts \
                     (pass --overwrite to replace them)",
                    dir.display()
                ),
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "summary.csv exists"),
            ));
        }
        fs::create_dir_all(dir)
            .map_err(|e| SimError::io(format!("creating {}", dir.display()), e))?;

        let mut summary = create_file(&summary_path)?;
        summary
            .write_all(b"day,mass,ue_gap,x_star,max_density_change\n")
            .map_err(|e| write_err(&summary_path, e))?;

        let density_path = dir.join("density.csv");
        let mut density = create_file(&density_path)?;
        density
            .write_all(b"day,cell_index,x_center,k\n")
            .map_err(|e| write_err(&density_path, e))?;

        let flows_path = dir.join("flows.csv");
        let mut flows = create_file(&flows_path)?;
        flows
            .write_all(b"day,t_center,f,g,F,G,delta,upsilon,phi1,phi2,phi\n")
            .map_err(|e| write_err(&flows_path, e))?;

        Ok(CsvSink {
            dir: dir.to_path_buf(),
            summary,
            density,
            flows,
            t_centers: grids.time.centers.clone(),
            x_centers: grids.payoff.x_centers.clone(),
        })
    }

    /// Writes the run manifest and flushes all files. `config_text` is
    /// echoed into the manifest's `[config]` table.
    ///
    /// # Errors
    ///
    /// [`SimError::Io`] on any write failure.
    pub fn finalize(mut self, summary: &RunSummary<T>, config_text: &str) -> Result<()> {
        let path = self.dir.join("manifest.toml");
        let mut w = create_file(&path)?;
        let err = |e| write_err(&path, e);
        writeln!(w, "version = \"{}\"", env!("CARGO_PKG_VERSION")).map_err(err)?;
        writeln!(w, "days = {}", summary.days).map_err(err)?;
        writeln!(w, "final_day = {}", fmt_sig(summary.final_day)).map_err(err)?;
        writeln!(w, "final_gap = {}", fmt_sig(summary.final_gap)).map_err(err)?;
        writeln!(w, "final_x_star = {}", fmt_sig(summary.final_x_star)).map_err(err)?;
        writeln!(w, "max_mass_error = {}", fmt_sig(summary.max_mass_error)).map_err(err)?;
        writeln!(w, "reason = \"{}\"", summary.reason).map_err(err)?;
        writeln!(w, "converged = {}", summary.converged).map_err(err)?;
        writeln!(w, "\n[config]").map_err(err)?;
        w.write_all(config_text.as_bytes()).map_err(err)?;
        w.flush().map_err(err)?;

        let spath = self.dir.join("summary.csv");
        self.summary.flush().map_err(|e| write_err(&spath, e))?;
        let dpath = self.dir.join("density.csv");
        self.density.flush().map_err(|e| write_err(&dpath, e))?;
        let fpath = self.dir.join("flows.csv");
        self.flows.flush().map_err(|e| write_err(&fpath, e))
    }
}

impl<T: Scalar> DaySink<T> for CsvSink<T> {
    fn record(&mut self, day: &DayRecord<T>) -> Result<()> {
        let spath = self.dir.join("summary.csv");
        let change = match day.density_change {
            Some(c) => fmt_sig(c),
            None => "nan".to_string(),
        };
        writeln!(
            self.summary,
            "{},{},{},{},{change}",
            fmt_sig(day.day),
            fmt_sig(day.mass),
            fmt_sig(day.gap),
            fmt_sig(day.x_star),
        )
        .map_err(|e| write_err(&spath, e))?;
        self.summary.flush().map_err(|e| write_err(&spath, e))?;

        let dpath = self.dir.join("density.csv");
        let day_str = fmt_sig(day.day);
        let mut rows = String::new();
        for (i, (&x, &k)) in self.x_centers.iter().zip(&day.density.k).enumerate() {
            rows.push_str(&day_str);
            rows.push_str(&format!(",{i},{},{}\n", fmt_sig(x), fmt_sig(k)));
        }
        self.density
            .write_all(rows.as_bytes())
            .map_err(|e| write_err(&dpath, e))?;
        self.density.flush().map_err(|e| write_err(&dpath, e))?;

        let fpath = self.dir.join("flows.csv");
        let mut rows = String::new();
        for (m, &t) in self.t_centers.iter().enumerate() {
            rows.push_str(&day_str);
            rows.push_str(&format!(
                ",{},{},{},{},{},{},{},{},{},{}\n",
                fmt_sig(t),
                fmt_sig(day.flows.f[m]),
                fmt_sig(day.flows.g[m]),
                fmt_sig(day.flows.cum_f[m + 1]),
                fmt_sig(day.flows.cum_g[m + 1]),
                fmt_sig(day.flows.delta[m + 1]),
                fmt_sig(day.flows.upsilon[m + 1]),
                fmt_sig(day.costs.phi1[m]),
                fmt_sig(day.costs.phi2[m]),
                fmt_sig(day.costs.phi[m]),
            ));
        }
        self.flows
            .write_all(rows.as_bytes())
            .map_err(|e| write_err(&fpath, e))?;
        self.flows.flush().map_err(|e| write_err(&fpath, e))
    }
}
