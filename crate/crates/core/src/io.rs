//! Trajectory input and output: generic CSV, KITTI oxts directories and
//! synthetic profiles with exact ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::wrap_angle;
use crate::tracker::{validate_records, TrajectoryRecord};

/// Reads `t,omega[,truth]` (seconds, rad/s, radians) with a header line.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

fn parse_csv(text: &str, path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_ascii_lowercase)
        .collect();
    let has_truth = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["t", "omega"] => false,
        ["t", "omega", "truth"] => true,
        _ => {
            return Err(parse_err(
                1,
                format!("expected header `t,omega` or `t,omega,truth`, found `{}`", header.join(",")),
            ))
        }
    };

    let mut records: Vec<TrajectoryRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        if row.iter().all(str::is_empty) {
            continue;
        }
        if row.len() != header.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), row.len())));
        }
        let field = |i: usize| -> Result<f64> {
            let v: f64 = row[i]
                .parse()
                .map_err(|_| parse_err(line, format!("`{}` is not a number", &row[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("non-finite value `{}`", &row[i])))
            }
        };
        let record = TrajectoryRecord {
            t: field(0)?,
            omega: field(1)?,
            truth_heading: if has_truth { Some(field(2)?) } else { None },
        };
        if let Some(prev) = records.last() {
            if record.t <= prev.t {
                return Err(Error::NonMonotonic {
                    location: format!("{}:{line}", path.display()),
                });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(records)
}

/// Writes records in the format [`read_csv`] accepts. The truth column is
/// written only when every record carries one.
pub fn write_csv(path: impl AsRef<Path>, records: &[TrajectoryRecord]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_csv(records)).map_err(|e| Error::io(path, e))
}

pub fn render_csv(records: &[TrajectoryRecord]) -> String {
    let with_truth = !records.is_empty() && records.iter().all(|r| r.truth_heading.is_some());
    let mut out = String::from(if with_truth { "t,omega,truth\n" } else { "t,omega\n" });
    for r in records {
        match r.truth_heading.filter(|_| with_truth) {
            Some(truth) => out.push_str(&format!("{},{},{}\n", r.t, r.omega, truth)),
            None => out.push_str(&format!("{},{}\n", r.t, r.omega)),
        }
    }
    out
}

/// Column layout of oxts text records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OxtsLayout {
    pub yaw_column: usize,
    pub yaw_rate_column: usize,
    /// Nominal recording rate, Hz. Informational: timestamps are authoritative.
    pub sample_rate_hz: f64,
}

impl Default for OxtsLayout {
    fn default() -> Self {
        Self {
            yaw_column: 5,
            yaw_rate_column: 19,
            sample_rate_hz: 100.0,
        }
    }
}

impl OxtsLayout {
    pub fn validate(&self) -> Result<()> {
        if self.yaw_column == self.yaw_rate_column {
            return Err(Error::InvalidParameter("oxts yaw and yaw-rate columns must differ".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "oxts sample rate must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

const OXTS_TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";

/// Reads an oxts directory: `dir/timestamps.txt` (one `YYYY-MM-DD HH:MM:SS.fff`
/// per line) and one whitespace-separated record per file in `dir/data/`,
/// taken in file-name order. Times are relative to the first timestamp.
pub fn read_oxts(dir: impl AsRef<Path>, layout: &OxtsLayout) -> Result<Vec<TrajectoryRecord>> {
    layout.validate()?;
    let dir = dir.as_ref();
    let stamp_path = dir.join("timestamps.txt");
    let stamp_text = fs::read_to_string(&stamp_path).map_err(|e| Error::io(&stamp_path, e))?;
    let mut stamps = Vec::new();
    for (i, line) in stamp_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let when = NaiveDateTime::parse_from_str(line, OXTS_TIME_FORMAT).map_err(|e| Error::Parse {
            path: stamp_path.clone(),
            line: i + 1,
            message: format!("bad timestamp `{line}`: {e}"),
        })?;
        stamps.push((when, i + 1));
    }

    let data_dir = dir.join("data");
    let mut files: Vec<PathBuf> = fs::read_dir(&data_dir)
        .map_err(|e| Error::io(&data_dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(&data_dir, e)))
        .collect::<Result<Vec<_>>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "txt"));
    files.sort();
    if files.len() != stamps.len() {
        return Err(Error::Structure(format!(
            "{} has {} data files but {} has {} timestamps",
            data_dir.display(),
            files.len(),
            stamp_path.display(),
            stamps.len()
        )));
    }
    if files.is_empty() {
        return Err(Error::Structure(format!("{} contains no records", data_dir.display())));
    }

    let origin = stamps[0].0;
    let needed = layout.yaw_column.max(layout.yaw_rate_column) + 1;
    let mut records: Vec<TrajectoryRecord> = Vec::with_capacity(files.len());
    for (file, &(when, stamp_line)) in files.iter().zip(&stamps) {
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() < needed {
            return Err(Error::Parse {
                path: file.clone(),
                line: 1,
                message: format!("expected at least {needed} fields, found {}", fields.len()),
            });
        }
        let number = |col: usize| -> Result<f64> {
            fields[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: file.clone(),
                    line: 1,
                    message: format!("column {col}: `{}` is not a finite number", fields[col]),
                })
        };
        let t = (when - origin)
            .num_nanoseconds()
            .ok_or_else(|| Error::Structure("timestamp span overflows".into()))? as f64
            * 1e-9;
        if let Some(prev) = records.last() {
            if t <= prev.t {
                return Err(Error::NonMonotonic {
                    location: format!("{}:{stamp_line}", stamp_path.display()),
                });
            }
        }
        records.push(TrajectoryRecord {
            t,
            omega: number(layout.yaw_rate_column)?,
            truth_heading: Some(wrap_angle(number(layout.yaw_column)?)),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    ConstantRotation,
    BalancedMaze,
    Noisy,
}

impl std::str::FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant_rotation" => Ok(Self::ConstantRotation),
            "balanced_maze" => Ok(Self::BalancedMaze),
            "noisy" => Ok(Self::Noisy),
            other => Err(Error::InvalidParameter(format!(
                "unknown profile `{other}` (expected constant_rotation, balanced_maze or noisy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub kind: ProfileKind,
    /// Peak turn rate, rad/s.
    pub omega_max: f64,
    /// Length of a constant rotation; lower bound on the length of a maze run. Seconds.
    pub duration: f64,
    pub frame_dt: f64,
    /// Gyro noise standard deviation, rad/s. Used by `Noisy` only.
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Total absolute turning a maze run covers at least, radians.
pub const MAZE_MIN_TURNING: f64 = 4000.0 * std::f64::consts::PI / 180.0;
/// Straight-driving time between maze turns, seconds.
pub const MAZE_STRAIGHT: f64 = 1.0;
/// Outbound turns of one maze leg, degrees (left positive).
const MAZE_TURNS_DEG: [f64; 6] = [90.0, -45.0, 135.0, -90.0, 60.0, -120.0];

impl SyntheticProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.omega_max.is_finite()
            && self.duration.is_finite()
            && self.duration >= 0.0
            && self.frame_dt.is_finite()
            && self.frame_dt > 0.0
            && self.noise_sigma.is_finite()
            && self.noise_sigma >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid synthetic profile {self:?}")));
        }
        if self.kind != ProfileKind::ConstantRotation && !(self.omega_max > 0.0) {
            return Err(Error::InvalidParameter("maze profiles need omega_max > 0".into()));
        }
        Ok(())
    }
}

/// Builds a synthetic trajectory sampled every `frame_dt`, starting at heading 0.
///
/// Omega is piecewise linear between samples and the truth is its exact
/// integral, so the trapezoid rule reproduces the clean truth to rounding.
pub fn generate(profile: &SyntheticProfile) -> Result<Vec<TrajectoryRecord>> {
    profile.validate()?;
    let dt = profile.frame_dt;
    let omegas = match profile.kind {
        ProfileKind::ConstantRotation => {
            let frames = (profile.duration / dt).round() as usize;
            vec![profile.omega_max; frames + 1]
        }
        ProfileKind::BalancedMaze | ProfileKind::Noisy => maze_omegas(profile.omega_max, dt, profile.duration),
    };
    let mut records = Vec::with_capacity(omegas.len());
    let mut heading = 0.0;
    for (k, &w) in omegas.iter().enumerate() {
        if k > 0 {
            heading += 0.5 * dt * (omegas[k - 1] + w);
        }
        records.push(TrajectoryRecord {
            t: k as f64 * dt,
            omega: w,
            truth_heading: Some(wrap_angle(heading)),
        });
    }
    if profile.kind == ProfileKind::Noisy && profile.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, profile.noise_sigma)
            .map_err(|e| Error::InvalidParameter(format!("noise sigma: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
        for r in &mut records {
            r.omega += normal.sample(&mut rng);
        }
    }
    validate_records(&records)?;
    Ok(records)
}

/// Omega samples of a maze run: each leg drives the outbound turns, turns
/// around, drives back along the same path (reversed order, opposite sense)
/// and turns around again, so every leg has zero net rotation. Legs repeat
/// until both the turning total and the minimum duration are reached.
fn maze_omegas(omega_max: f64, dt: f64, min_duration: f64) -> Vec<f64> {
    let mut leg: Vec<f64> = MAZE_TURNS_DEG.to_vec();
    leg.push(180.0);
    leg.extend(MAZE_TURNS_DEG.iter().rev().map(|a| -a));
    leg.push(-180.0);

    let straight = (MAZE_STRAIGHT / dt).round().max(1.0) as usize;
    let mut omegas = vec![0.0; straight];
    let mut turned = 0.0;
    while turned < MAZE_MIN_TURNING || (omegas.len() as f64) * dt < min_duration {
        for &deg in &leg {
            let angle = deg.to_radians();
            // A plateau of m samples between zero samples integrates to m * dt * rate.
            let m = (angle.abs() / (omega_max * dt)).ceil().max(1.0) as usize;
            let rate = angle / (m as f64 * dt);
            omegas.extend(std::iter::repeat_n(rate, m));
            omegas.extend(std::iter::repeat_n(0.0, straight));
            turned += angle.abs();
        }
    }
    omegas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::baseline_integrate;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn smallest_valid_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "t,omega\n0,0\n0.01,0.1\n");
        let r = read_csv(&p).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1], TrajectoryRecord::new(0.01, 0.1));
    }

    #[test]
    fn csv_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.csv", "t,omega\n0,0\n0.02,0\n0.01,0\n");
        let err = read_csv(&p).unwrap_err();
        assert!(matches!(err, Error::NonMonotonic { .. }));
        assert!(err.to_string().ends_with("a.csv:4"), "{err}");

        let p = write(dir.path(), "b.csv", "t,omega\n0,0\n0.01,abc\n");
        assert!(matches!(read_csv(&p), Err(Error::Parse { line: 3, .. })));
        let p = write(dir.path(), "c.csv", "t,omega\n0,NaN\n");
        assert!(matches!(read_csv(&p), Err(Error::Parse { line: 2, .. })));
        let p = write(dir.path(), "d.csv", "t,omega\n0,inf\n");
        assert!(read_csv(&p).is_err());
        let p = write(dir.path(), "e.csv", "time,rate\n0,0\n");
        assert!(matches!(read_csv(&p), Err(Error::Parse { line: 1, .. })));
        let p = write(dir.path(), "f.csv", "t,omega,truth\n0,0\n");
        assert!(matches!(read_csv(&p), Err(Error::Parse { line: 2, .. })));
        assert!(read_csv(dir.path().join("missing.csv")).unwrap_err().is_io());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let records = generate(&SyntheticProfile {
            kind: ProfileKind::Noisy,
            omega_max: 0.5,
            duration: 0.0,
            frame_dt: 0.01,
            noise_sigma: 0.05,
            seed: 7,
        })
        .unwrap();
        let p = dir.path().join("r.csv");
        write_csv(&p, &records).unwrap();
        assert_eq!(read_csv(&p).unwrap(), records);
    }

    fn oxts_fixture(dir: &Path, stamps: &[&str], rows: &[[f64; 20]]) {
        fs::create_dir_all(dir.join("data")).unwrap();
        write(dir, "timestamps.txt", &(stamps.join("\n") + "\n"));
        for (i, row) in rows.iter().enumerate() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            write(&dir.join("data"), &format!("{i:010}.txt"), &(line.join(" ") + "\n"));
        }
    }

    fn oxts_rows() -> Vec<[f64; 20]> {
        (0..3)
            .map(|i| {
                let mut row = [0.0; 20];
                for (c, v) in row.iter_mut().enumerate() {
                    *v = 100.0 * i as f64 + c as f64 * 0.01;
                }
                row
            })
            .collect()
    }

    const STAMPS: [&str; 3] = [
        "2011-09-26 13:02:25.964389445",
        "2011-09-26 13:02:25.974389445",
        "2011-09-26 13:02:25.984389445",
    ];

    #[test]
    fn oxts_default_columns() {
        let dir = tempfile::tempdir().unwrap();
        let rows = oxts_rows();
        oxts_fixture(dir.path(), &STAMPS, &rows);
        let r = read_oxts(dir.path(), &OxtsLayout::default()).unwrap();
        assert_eq!(r.len(), 3);
        for (i, rec) in r.iter().enumerate() {
            assert!((rec.t - 0.01 * i as f64).abs() < 1e-12);
            assert_eq!(rec.omega, rows[i][19]);
            assert!((rec.truth_heading.unwrap() - wrap_angle(rows[i][5])).abs() < 1e-15);
        }
    }

    #[test]
    fn oxts_layout_override() {
        let dir = tempfile::tempdir().unwrap();
        let rows = oxts_rows();
        oxts_fixture(dir.path(), &STAMPS, &rows);
        let layout = OxtsLayout {
            yaw_column: 2,
            yaw_rate_column: 7,
            ..OxtsLayout::default()
        };
        let r = read_oxts(dir.path(), &layout).unwrap();
        assert_eq!(r[2].omega, rows[2][7]);
        assert_eq!(r[0].truth_heading, Some(rows[0][2]));
    }

    #[test]
    fn oxts_structural_errors() {
        let dir = tempfile::tempdir().unwrap();
        oxts_fixture(dir.path(), &STAMPS[..2], &oxts_rows());
        assert!(matches!(read_oxts(dir.path(), &OxtsLayout::default()), Err(Error::Structure(_))));

        let dir = tempfile::tempdir().unwrap();
        oxts_fixture(dir.path(), &STAMPS, &oxts_rows());
        fs::remove_file(dir.path().join("timestamps.txt")).unwrap();
        assert!(read_oxts(dir.path(), &OxtsLayout::default()).unwrap_err().is_io());

        let dir = tempfile::tempdir().unwrap();
        oxts_fixture(dir.path(), &STAMPS, &oxts_rows());
        write(&dir.path().join("data"), "0000000001.txt", "1 2 3\n");
        assert!(matches!(read_oxts(dir.path(), &OxtsLayout::default()), Err(Error::Parse { .. })));

        let same = OxtsLayout {
            yaw_column: 3,
            yaw_rate_column: 3,
            ..OxtsLayout::default()
        };
        assert!(read_oxts(dir.path(), &same).is_err());
    }

    fn profile(kind: ProfileKind, omega_deg: f64, duration: f64) -> SyntheticProfile {
        SyntheticProfile {
            kind,
            omega_max: omega_deg.to_radians(),
            duration,
            frame_dt: 0.01,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn constant_rotation_one_lap() {
        let r = generate(&profile(ProfileKind::ConstantRotation, 20.0, 18.0)).unwrap();
        assert_eq!(r.len(), 1801);
        let end = r.last().unwrap().truth_heading.unwrap();
        assert!(crate::network::angle_difference(end, 0.0).abs() < 1e-9);
        let mid = r[900].truth_heading.unwrap();
        assert!((mid - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn maze_is_balanced_and_long() {
        let r = generate(&profile(ProfileKind::BalancedMaze, 40.0, 0.0)).unwrap();
        let end = r.last().unwrap().truth_heading.unwrap();
        assert!(crate::network::angle_difference(end, 0.0).abs() < 1e-9);
        let total: f64 = r.windows(2).map(|w| 0.5 * 0.01 * (w[0].omega + w[1].omega).abs()).sum();
        assert!(total.to_degrees() >= 4000.0);
        assert!(r.iter().all(|x| x.omega.abs() <= 40f64.to_radians() + 1e-12));
        let base = baseline_integrate(&r, 0.0).unwrap();
        for (h, rec) in base.iter().zip(&r) {
            assert!(crate::network::angle_difference(*h, rec.truth_heading.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn maze_honours_minimum_duration() {
        let short = generate(&profile(ProfileKind::BalancedMaze, 40.0, 0.0)).unwrap();
        let span = short.last().unwrap().t;
        let long = generate(&profile(ProfileKind::BalancedMaze, 40.0, span + 1.0)).unwrap();
        assert!(long.last().unwrap().t >= span + 1.0);
    }

    #[test]
    fn noisy_is_deterministic_and_keeps_clean_truth() {
        let mut p = profile(ProfileKind::Noisy, 40.0, 0.0);
        p.noise_sigma = 0.05;
        p.seed = 11;
        let a = generate(&p).unwrap();
        assert_eq!(a, generate(&p).unwrap());
        let clean = generate(&profile(ProfileKind::BalancedMaze, 40.0, 0.0)).unwrap();
        assert_eq!(a.len(), clean.len());
        assert!(a.iter().zip(&clean).all(|(x, y)| x.truth_heading == y.truth_heading));
        assert!(a.iter().zip(&clean).any(|(x, y)| x.omega != y.omega));
        p.seed = 12;
        assert_ne!(a, generate(&p).unwrap());
    }

    #[test]
    fn profile_kind_parsing() {
        assert_eq!("noisy".parse::<ProfileKind>().unwrap(), ProfileKind::Noisy);
        assert!("spiral".parse::<ProfileKind>().is_err());
    }
}
