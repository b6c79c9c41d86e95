//! CSV and JSON tables written and read by the command-line tools.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a table
//! read back yields bit-identical values.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fht::{FhtEpisode, ThresholdWindow};
use crate::model::Trajectory;
use crate::stats::{AcfSeries, Histogram, MfhtCurve};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

fn parse_cell<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    record[idx].parse().map_err(|_| Error::Malformed {
        path: path.to_path_buf(),
        line: record.position().map_or(0, |p| p.line()),
        column: name.to_owned(),
        message: format!("cannot parse `{}`", &record[idx]),
    })
}

fn opt_to_string(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `series,day,x,v`
pub fn write_trajectories_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut wtr = writer(path)?;
    wtr.write_record(["series", "day", "x", "v"])?;
    for (s, t) in trajectories.iter().enumerate() {
        for (d, (x, v)) in t.x.iter().zip(&t.v).enumerate() {
            wtr.write_record([s.to_string(), d.to_string(), x.to_string(), v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub const EPISODE_HEADER: [&str; 7] = [
    "ticker",
    "window_id",
    "theta_i",
    "theta_f",
    "start_index",
    "fht",
    "volatility",
];

/// Appends the episodes of one window to an open episode table.
pub fn write_episode_rows<W: Write>(
    wtr: &mut csv::Writer<W>,
    window: &ThresholdWindow,
    episodes: &[FhtEpisode],
) -> Result<()> {
    let id = window.id();
    let (ti, tf) = (window.theta_i.to_string(), window.theta_f.to_string());
    for e in episodes {
        wtr.write_record([
            e.ticker.as_str(),
            &id,
            &ti,
            &tf,
            &e.start_index.to_string(),
            &e.fht.to_string(),
            &e.volatility.to_string(),
        ])?;
    }
    Ok(())
}

pub fn write_episodes_csv(path: &Path, groups: &[(ThresholdWindow, Vec<FhtEpisode>)]) -> Result<()> {
    let mut wtr = writer(path)?;
    wtr.write_record(EPISODE_HEADER)?;
    for (w, eps) in groups {
        write_episode_rows(&mut wtr, w, eps)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Episodes grouped by `window_id` in first-appearance order, with the
/// multipliers recorded in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeGroup {
    pub window_id: String,
    pub theta_i: f64,
    pub theta_f: f64,
    pub episodes: Vec<FhtEpisode>,
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeGroup>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &EPISODE_HEADER)?;
    let mut groups: Vec<EpisodeGroup> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let window_id = &record[1];
        let episode = FhtEpisode {
            ticker: record[0].to_owned(),
            start_index: parse_cell(path, &record, 4, "start_index")?,
            fht: parse_cell(path, &record, 5, "fht")?,
            volatility: parse_cell(path, &record, 6, "volatility")?,
        };
        match groups.iter_mut().find(|g| g.window_id == window_id) {
            Some(g) => g.episodes.push(episode),
            None => groups.push(EpisodeGroup {
                window_id: window_id.to_owned(),
                theta_i: parse_cell(path, &record, 2, "theta_i")?,
                theta_f: parse_cell(path, &record, 3, "theta_f")?,
                episodes: vec![episode],
            }),
        }
    }
    Ok(groups)
}

/// `bin_lo,bin_hi,mfht,count`; `mfht` is blank for bins below the minimum count.
pub fn write_curve_csv(path: &Path, c: &MfhtCurve) -> Result<()> {
    let mut wtr = writer(path)?;
    wtr.write_record(["bin_lo", "bin_hi", "mfht", "count"])?;
    for k in 0..c.n_bins() {
        let (lo, hi) = c.bin_bounds(k);
        wtr.write_record([
            lo.to_string(),
            hi.to_string(),
            opt_to_string(c.mfht[k]),
            c.counts[k].to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn read_curve_csv(path: &Path) -> Result<MfhtCurve> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &["bin_lo", "bin_hi", "mfht", "count"])?;
    let mut edges: Vec<f64> = Vec::new();
    let mut mfht = Vec::new();
    let mut counts = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let lo: f64 = parse_cell(path, &record, 0, "bin_lo")?;
        let hi: f64 = parse_cell(path, &record, 1, "bin_hi")?;
        match edges.last() {
            None => edges.push(lo),
            Some(&prev) if prev != lo => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: record.position().map_or(0, |p| p.line()),
                    column: "bin_lo".into(),
                    message: "bins are not contiguous".into(),
                })
            }
            _ => {}
        }
        edges.push(hi);
        mfht.push(if record[2].is_empty() {
            None
        } else {
            Some(parse_cell(path, &record, 2, "mfht")?)
        });
        counts.push(parse_cell(path, &record, 3, "count")?);
    }
    if counts.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: "curve has no bins".into(),
        });
    }
    Ok(MfhtCurve {
        bin_edges: edges,
        mfht,
        counts,
        min_count: 0,
        window: None,
    })
}

/// `bin_lo,bin_hi,density,count`
pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut wtr = writer(path)?;
    wtr.write_record(["bin_lo", "bin_hi", "density", "count"])?;
    for k in 0..h.counts.len() {
        wtr.write_record([
            h.bin_edges[k].to_string(),
            h.bin_edges[k + 1].to_string(),
            h.density[k].to_string(),
            h.counts[k].to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// `lag,value`
pub fn write_acf_csv(path: &Path, a: &AcfSeries) -> Result<()> {
    let mut wtr = writer(path)?;
    wtr.write_record(["lag", "value"])?;
    for (lag, v) in a.lags.iter().zip(&a.values) {
        wtr.write_record([lag.to_string(), v.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, value)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}
