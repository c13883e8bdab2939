//! CSV and JSON export of trajectory logs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::run::TrajectoryLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

/// Formats `v` with 12 significant digits, like C's `%.12g`.
pub fn format_number(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

fn ensure_nonempty(log: &TrajectoryLog) -> Result<()> {
    if log.records.is_empty() {
        return Err(Error::InvalidParameter("cannot export an empty trajectory log".into()));
    }
    Ok(())
}

/// Writes `robots.csv` (`k,robot_id,x1,x2`, robots 1-based) and `target.csv`
/// (`k,y1,y2`) into `dir`, returning both paths.
pub fn write_csv(log: &TrajectoryLog, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_nonempty(log)?;
    fs::create_dir_all(dir)?;
    let robots_path = dir.join("robots.csv");
    let target_path = dir.join("target.csv");

    let mut robots = String::from("k,robot_id,x1,x2\n");
    let mut target = String::from("k,y1,y2\n");
    for r in &log.records {
        for (i, p) in r.positions.iter().enumerate() {
            robots.push_str(&format!(
                "{},{},{},{}\n",
                r.k,
                i + 1,
                format_number(p[0]),
                format_number(p[1])
            ));
        }
        target.push_str(&format!(
            "{},{},{}\n",
            r.k,
            format_number(r.target[0]),
            format_number(r.target[1])
        ));
    }
    fs::File::create(&robots_path)?.write_all(robots.as_bytes())?;
    fs::File::create(&target_path)?.write_all(target.as_bytes())?;
    Ok(vec![robots_path, target_path])
}

/// Writes the full log to `trajectory.json` in `dir`.
pub fn write_json(log: &TrajectoryLog, dir: &Path) -> Result<PathBuf> {
    ensure_nonempty(log)?;
    fs::create_dir_all(dir)?;
    let path = dir.join("trajectory.json");
    fs::write(&path, log.to_json_string())?;
    Ok(path)
}
