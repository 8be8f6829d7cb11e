//! Plot-ready CSV artifacts. Floats use Rust's shortest round-trip
//! formatting, so identical runs produce identical bytes.

use std::path::Path;

use crate::envs::RewardVector;
use crate::error::{invalid, io_err, Result};
use crate::metrics::Front;
use crate::trainer::{MergedFronts, TrainLog};

fn reward_header(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|k| format!("r_{k}"))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

fn row(lead: Option<usize>, values: &[f64], tail: Option<usize>) -> Vec<String> {
    lead.map(|s| s.to_string())
        .into_iter()
        .chain(values.iter().map(|v| v.to_string()))
        .chain(tail.map(|s| s.to_string()))
        .collect()
}

fn n_objectives(log: &TrainLog) -> usize {
    log.spec.env.n_objectives()
}

/// Columns `step, r_1..r_n, episode_len`.
pub fn write_trainlog(path: impl AsRef<Path>, log: &TrainLog) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let header: Vec<String> =
        std::iter::once("step".into()).chain(reward_header(n_objectives(log))).chain(["episode_len".into()]).collect();
    w.write_record(&header)?;
    for r in &log.records {
        w.write_record(row(Some(r.step), &r.ret, Some(r.length)))?;
    }
    w.flush().map_err(io_err(path.as_ref()))
}

/// Columns `step, r_1..r_n`, one row per finished training episode.
pub fn write_trace(path: impl AsRef<Path>, log: &TrainLog) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let header: Vec<String> = std::iter::once("step".into()).chain(reward_header(n_objectives(log))).collect();
    w.write_record(&header)?;
    for t in &log.trace {
        w.write_record(row(Some(t.step), &t.ret, None))?;
    }
    w.flush().map_err(io_err(path.as_ref()))
}

/// Columns `r_1..r_n`.
pub fn write_front(path: impl AsRef<Path>, front: &[RewardVector], n_objectives: usize) -> Result<()> {
    if front.iter().any(|p| p.len() != n_objectives) {
        return Err(invalid("front point dimension differs from header"));
    }
    let mut w = writer(path.as_ref())?;
    w.write_record(reward_header(n_objectives))?;
    for p in front {
        w.write_record(row(None, p, None))?;
    }
    w.flush().map_err(io_err(path.as_ref()))
}

/// Columns `step, r_1..r_n`; one row per point of each merged front.
pub fn write_merged_fronts(path: impl AsRef<Path>, merged: &MergedFronts, n_objectives: usize) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    let header: Vec<String> = std::iter::once("step".into()).chain(reward_header(n_objectives)).collect();
    w.write_record(&header)?;
    for (step, front) in merged {
        for p in front {
            w.write_record(row(Some(*step), p, None))?;
        }
    }
    w.flush().map_err(io_err(path.as_ref()))
}

/// Columns `step, hv`.
pub fn write_hypervolume(path: impl AsRef<Path>, history: &[(usize, f64)]) -> Result<()> {
    let mut w = writer(path.as_ref())?;
    w.write_record(["step", "hv"])?;
    for (step, hv) in history {
        w.write_record([step.to_string(), hv.to_string()])?;
    }
    w.flush().map_err(io_err(path.as_ref()))
}

/// Reads a front file. A leading non-numeric row is taken as a header;
/// an empty file is the empty front.
pub fn read_front(path: impl AsRef<Path>) -> Result<Front> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(file);
    let mut front = Front::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(p) => {
                if let Some(first) = front.first() {
                    if first.len() != p.len() {
                        return Err(invalid(format!("row {} of {} has {} values, expected {}", i + 1, path.display(), p.len(), first.len())));
                    }
                }
                front.push(p);
            }
            Err(_) if i == 0 => continue,
            Err(e) => return Err(invalid(format!("row {} of {}: {e}", i + 1, path.display()))),
        }
    }
    Ok(front)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.csv");
        let front = vec![vec![0.1 + 0.2, -3.0], vec![26.25, -1e-300], vec![f64::MAX, -7.0]];
        write_front(&path, &front, 2).unwrap();
        assert_eq!(read_front(&path).unwrap(), front);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("r_1,r_2\n"));
        assert!(text.contains("26.25,"));
    }

    #[test]
    fn empty_and_header_only_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(read_front(&empty).unwrap().is_empty());
        let header = dir.path().join("header.csv");
        write_front(&header, &[], 2).unwrap();
        assert!(read_front(&header).unwrap().is_empty());
    }

    #[test]
    fn ragged_and_garbage_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(read_front(&p).is_err());
        std::fs::write(&p, "1,2\n3,4,5\n").unwrap();
        assert!(read_front(&p).is_err());
        assert!(read_front(dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn hypervolume_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("hv.csv");
        write_hypervolume(&p, &[(1000, 0.0), (2000, 1854.5)]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "step,hv\n1000,0\n2000,1854.5\n");
    }
}
