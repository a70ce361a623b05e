//! Plot-ready CSV tables.
//!
//! | file | columns |
//! |------|---------|
//! | `spectrum_snapshot.csv` | `bpm,power,peak_rank,cm` (rank and cm empty off-peak) |
//! | `mae_hist.csv`, `std_hist.csv` | `bin_low,bin_high,count` |

use std::io::Write;
use std::path::{Path, PathBuf};

use super::evaluate::{EvaluationReport, HistogramBin};
use crate::error::Result;
use crate::num::Real;
use crate::spectral::{BreathSpectrum, PeakSet};

pub const SPECTRUM_SNAPSHOT_CSV: &str = "spectrum_snapshot.csv";
pub const MAE_HIST_CSV: &str = "mae_hist.csv";
pub const STD_HIST_CSV: &str = "std_hist.csv";

/// One row per bin from DC up to the top of the breath band. Peaks carry
/// their 1-based power rank and confidence metric.
pub fn write_spectrum_snapshot<T: Real, W: Write>(
    spectrum: &BreathSpectrum<T>,
    peaks: &PeakSet<T>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bpm", "power", "peak_rank", "cm"])?;
    for k in (0..spectrum.len()).take_while(|&k| spectrum.rate_of(k) <= spectrum.band.1) {
        let peak = peaks.peaks.iter().enumerate().find(|(_, p)| p.bin_index == k);
        let (rank, cm) = match peak {
            Some((i, p)) => ((i + 1).to_string(), p.cm.to_f64_lossy().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            spectrum.rate_of(k).to_f64_lossy().to_string(),
            spectrum.power[k].to_f64_lossy().to_string(),
            rank,
            cm,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram<W: Write>(bins: &[HistogramBin], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_low", "bin_high", "count"])?;
    for b in bins {
        w.write_record([b.bin_low.to_string(), b.bin_high.to_string(), b.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the histogram tables and, when given, a spectrum snapshot into
/// `dir`. Returns the paths written.
pub fn emit_figure_data<T: Real>(
    report: &EvaluationReport,
    snapshot: Option<(&BreathSpectrum<T>, &PeakSet<T>)>,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let create = |name: &str| -> Result<(PathBuf, std::io::BufWriter<std::fs::File>)> {
        let p = dir.join(name);
        Ok((p.clone(), std::io::BufWriter::new(std::fs::File::create(p)?)))
    };
    if let Some((spectrum, peaks)) = snapshot {
        let (p, f) = create(SPECTRUM_SNAPSHOT_CSV)?;
        write_spectrum_snapshot(spectrum, peaks, f)?;
        written.push(p);
    }
    let (p, f) = create(MAE_HIST_CSV)?;
    write_histogram(&report.mae_histogram, f)?;
    written.push(p);
    let (p, f) = create(STD_HIST_CSV)?;
    write_histogram(&report.std_histogram, f)?;
    written.push(p);
    Ok(written)
}
