//! CSV import and export. Every file has a header row; floats are written in
//! shortest round-trip form so a re-read gives the same bits.

use std::path::Path;

use epinp::chain::ChainOutput;
use epinp::discrete::DailyEstimate;
use epinp::epi::{EpidemicEvents, Event, EventKind, RemovalData, TimeScale};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::summary::PosteriorSummary;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| csv_err(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn bad(path: &Path, message: String) -> CliError {
    CliError::Csv {
        path: path.to_path_buf(),
        message,
    }
}

fn expect_header(path: &Path, r: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let h = r.headers().map_err(|e| csv_err(path, e))?;
    if h.len() < want.len() || want.iter().zip(h.iter()).any(|(a, b)| *a != b.trim()) {
        return Err(bad(path, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, k: usize) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line());
    let s = rec.get(k).unwrap_or("").trim();
    s.parse()
        .map_err(|_| bad(path, format!("line {line}: cannot parse {s:?}")))
}

/// Reads the `time` column of a removals file.
pub fn read_times(path: &Path) -> Result<Vec<f64>> {
    let mut r = reader(path)?;
    expect_header(path, &mut r, &["time"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        out.push(field(path, &rec.map_err(|e| csv_err(path, e))?, 0)?);
    }
    Ok(out)
}

/// Loads removal data named by `data.path`, with `population_size` from the
/// config. Continuous data with tied times are accepted only when
/// `data.tie_spacing` is set; repeats are then spread by that spacing, up to
/// `data.tie_tolerance` (default 0.5).
pub fn ingest_removals(config: &RunConfig, scale: TimeScale) -> Result<RemovalData> {
    let path = config.path("data.path")?;
    let population: usize = config.required("population_size")?;
    let times = read_times(&path)?;
    if times.is_empty() {
        return Err(CliError::Data(format!("{}: no removals", path.display())));
    }
    let data = match (scale, config.parsed::<f64>("data.tie_spacing")?) {
        (TimeScale::Continuous, Some(spacing)) => RemovalData::continuous_with_tie_breaking(
            times,
            population,
            spacing,
            config.or("data.tie_tolerance", 0.5)?,
        ),
        _ => RemovalData::new(times, population, scale),
    }
    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log::info!(
        "loaded n = {} removals, N = {population}, span [{}, {}]",
        data.len(),
        data.first(),
        data.last()
    );
    Ok(data)
}

pub fn write_times(path: &Path, times: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time"]).map_err(|e| csv_err(path, e))?;
    for t in times {
        w.write_record([t.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `time,kind,individual` with an empty label for label-free events.
pub fn write_events(path: &Path, events: &EpidemicEvents) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["time", "kind", "individual"])
        .map_err(|e| csv_err(path, e))?;
    for e in events.events() {
        let label = e.individual.map(|i| i.to_string()).unwrap_or_default();
        w.write_record([e.time.to_string(), e.kind.code().to_string(), label])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_events(path: &Path, population: usize, scale: TimeScale) -> Result<EpidemicEvents> {
    let mut r = reader(path)?;
    expect_header(path, &mut r, &["time", "kind", "individual"])?;
    let mut events = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let time: f64 = field(path, &rec, 0)?;
        let code = rec.get(1).unwrap_or("").trim();
        let kind = EventKind::from_code(code)
            .ok_or_else(|| bad(path, format!("unknown event kind {code:?}")))?;
        let individual = match rec.get(2).map(str::trim) {
            None | Some("") => None,
            Some(_) => Some(field(path, &rec, 2)?),
        };
        events.push(Event {
            time,
            kind,
            individual,
        });
    }
    EpidemicEvents::new(events, population, scale)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Long-format rate samples `iteration,day,beta`; missing values are
/// skipped.
pub fn write_samples(path: &Path, out: &ChainOutput) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "day", "beta"])
        .map_err(|e| csv_err(path, e))?;
    if let Some(f) = &out.function {
        for (row, it) in f.rows.iter().zip(&out.retained) {
            for (day, v) in f.grid.iter().zip(row) {
                if let Some(v) = v {
                    w.write_record([it.to_string(), day.to_string(), v.to_string()])
                        .map_err(|e| csv_err(path, e))?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Rows `(iteration, day, beta)` of a samples file.
pub fn read_samples(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let mut r = reader(path)?;
    expect_header(path, &mut r, &["iteration", "day", "beta"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        out.push((field(path, &rec, 0)?, field(path, &rec, 1)?, field(path, &rec, 2)?));
    }
    Ok(out)
}

/// Scalar traces, one row per retained iteration.
pub fn write_parameters(path: &Path, out: &ChainOutput) -> Result<()> {
    let mut w = writer(path)?;
    let names: Vec<&String> = out.scalars.keys().collect();
    let mut header = vec!["iteration".to_string()];
    header.extend(names.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (k, it) in out.retained.iter().enumerate() {
        let mut row = vec![it.to_string()];
        row.extend(names.iter().map(|n| out.scalars[*n][k].to_string()));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_summary(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["day", "median", "mean", "lo95", "hi95"])
        .map_err(|e| csv_err(path, e))?;
    for r in &summary.rows {
        w.write_record([
            r.day.to_string(),
            r.median.to_string(),
            r.mean.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_ml(path: &Path, rows: &[DailyEstimate]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["day", "susceptible", "infective", "new_infections", "beta", "saturated"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.day.to_string(),
            r.susceptible.to_string(),
            r.infective.to_string(),
            r.new_infections.to_string(),
            r.beta.map(|b| b.to_string()).unwrap_or_default(),
            r.saturated.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let times = vec![0.1 + 0.2, 1.0 / 3.0, 7.0, 1e-17];
        write_times(&p, &times).unwrap();
        assert_eq!(read_times(&p).unwrap(), times);
    }

    #[test]
    fn header_is_mandatory() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "1\n2\n").unwrap();
        assert!(matches!(read_times(&p), Err(CliError::Csv { .. })));
        std::fs::write(&p, "time\n1\nx\n").unwrap();
        assert!(matches!(read_times(&p), Err(CliError::Csv { .. })));
    }

    #[test]
    fn ingest_sorts_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("r.csv"), "time\n5\n2\n9\n").unwrap();
        let c = RunConfig::parse("data.path = r.csv\npopulation_size = 10", dir.path()).unwrap();
        let d = ingest_removals(&c, TimeScale::Discrete).unwrap();
        assert_eq!(d.times(), &[2.0, 5.0, 9.0]);
        std::fs::write(dir.path().join("r.csv"), "time\n").unwrap();
        let err = ingest_removals(&c, TimeScale::Discrete).unwrap_err();
        assert!(err.to_string().contains("no removals"));
        std::fs::write(dir.path().join("r.csv"), "time\n1.5\n").unwrap();
        assert!(matches!(
            ingest_removals(&c, TimeScale::Discrete),
            Err(CliError::Data(_))
        ));
    }
}
