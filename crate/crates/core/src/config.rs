//! `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are errors; every key is optional.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::diagnostics::{default_fit_window, ScheduleKind, SplittingSchedule};
use crate::error::{Error, Result};
use crate::evolution::{log_spaced, DatumSpec, SimulationConfig};
use crate::spectral::TorusGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    PowerLaw,
    Bump,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleChoice {
    LogCubed,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub points_per_dim: usize,
    pub side_length: f64,
    pub dt: f64,
    /// Defaults to `T_box/3`.
    pub t_end: Option<f64>,
    /// Log-spaced snapshots after `t = 0`.
    pub snapshot_count: usize,
    /// First positive snapshot; defaults to `T_box/1000`.
    pub snapshot_start: Option<f64>,
    /// Defaults per experiment.
    pub nonlinear: Option<bool>,
    pub datum: DatumKind,
    pub delta: f64,
    pub profile_r: f64,
    pub cutoff: f64,
    pub datum_file: Option<PathBuf>,
    /// Overrides the decay character used for bounds; implied by
    /// `profile_r` for power-law data.
    pub q_star: Option<f64>,
    pub schedule: ScheduleChoice,
    /// Defaults to `max{2 + q*, 1} + 0.5`.
    pub schedule_alpha: Option<f64>,
    pub c_tilde: f64,
    pub fit_t_min: Option<f64>,
    pub fit_t_max: Option<f64>,
    pub tolerance: f64,
    pub lyapunov_tolerance: f64,
    pub estimator_decades: f64,
    pub estimator_cutoff: f64,
    pub alpha: f64,
    pub dissipation_c: f64,
    pub refinement_levels: usize,
    pub energy_tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            points_per_dim: 32,
            side_length: 32.0,
            dt: 0.05,
            t_end: None,
            snapshot_count: 48,
            snapshot_start: None,
            nonlinear: None,
            datum: DatumKind::PowerLaw,
            delta: 0.1,
            profile_r: 0.0,
            cutoff: 1.0,
            datum_file: None,
            q_star: None,
            schedule: ScheduleChoice::LogCubed,
            schedule_alpha: None,
            c_tilde: 1.0,
            fit_t_min: None,
            fit_t_max: None,
            tolerance: 0.1,
            lyapunov_tolerance: 1e-10,
            estimator_decades: 2.0,
            estimator_cutoff: 2.0,
            alpha: 1.0,
            dissipation_c: 1.0,
            refinement_levels: 3,
            energy_tolerance: 1e-6,
        }
    }
}

fn invalid(key: &str, value: &str, constraint: &str) -> Error {
    Error::Config(format!("{key} = {value}: {constraint}"))
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| invalid(key, value, "not a valid number"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

/// Splits the text into key/value pairs, rejecting malformed and repeated
/// lines.
pub fn parse_assignments(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!(
                "line {}: empty key or value in `{line}`",
                lineno + 1
            )));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in parse_assignments(text)? {
            let (k, v) = (key.as_str(), value.as_str());
            match k {
                "points_per_dim" => c.points_per_dim = parse_num(k, v)?,
                "side_length" => c.side_length = parse_num(k, v)?,
                "dt" => c.dt = parse_num(k, v)?,
                "t_end" => c.t_end = Some(parse_num(k, v)?),
                "snapshot_count" => c.snapshot_count = parse_num(k, v)?,
                "snapshot_start" => c.snapshot_start = Some(parse_num(k, v)?),
                "nonlinear" => c.nonlinear = Some(parse_bool(k, v)?),
                "datum" => {
                    c.datum = match v {
                        "power_law" => DatumKind::PowerLaw,
                        "bump" => DatumKind::Bump,
                        "file" => DatumKind::File,
                        _ => return Err(invalid(k, v, "expected power_law, bump or file")),
                    }
                }
                "delta" => c.delta = parse_num(k, v)?,
                "profile_r" => c.profile_r = parse_num(k, v)?,
                "cutoff" => c.cutoff = parse_num(k, v)?,
                "datum_file" => c.datum_file = Some(PathBuf::from(v)),
                "q_star" => c.q_star = Some(parse_num(k, v)?),
                "schedule" => {
                    c.schedule = match v {
                        "log_cubed" => ScheduleChoice::LogCubed,
                        "power" => ScheduleChoice::Power,
                        _ => return Err(invalid(k, v, "expected log_cubed or power")),
                    }
                }
                "schedule_alpha" => c.schedule_alpha = Some(parse_num(k, v)?),
                "c_tilde" => c.c_tilde = parse_num(k, v)?,
                "fit_t_min" => c.fit_t_min = Some(parse_num(k, v)?),
                "fit_t_max" => c.fit_t_max = Some(parse_num(k, v)?),
                "tolerance" => c.tolerance = parse_num(k, v)?,
                "lyapunov_tolerance" => c.lyapunov_tolerance = parse_num(k, v)?,
                "estimator_decades" => c.estimator_decades = parse_num(k, v)?,
                "estimator_cutoff" => c.estimator_cutoff = parse_num(k, v)?,
                "alpha" => c.alpha = parse_num(k, v)?,
                "dissipation_c" => c.dissipation_c = parse_num(k, v)?,
                "refinement_levels" => c.refinement_levels = parse_num(k, v)?,
                "energy_tolerance" => c.energy_tolerance = parse_num(k, v)?,
                _ => return Err(Error::Config(format!("unknown key {k}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, &v.to_string(), "must be positive and finite"))
            }
        };
        if self.points_per_dim < 16 || self.points_per_dim % 2 != 0 {
            return Err(invalid(
                "points_per_dim",
                &self.points_per_dim.to_string(),
                "N must be even and >= 16",
            ));
        }
        positive("side_length", self.side_length)?;
        positive("dt", self.dt)?;
        if let Some(t) = self.t_end {
            positive("t_end", t)?;
        }
        if let Some(t) = self.snapshot_start {
            positive("snapshot_start", t)?;
        }
        if self.snapshot_count < 5 {
            return Err(invalid(
                "snapshot_count",
                &self.snapshot_count.to_string(),
                "need at least 5 snapshots for rate fits",
            ));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(invalid(
                "delta",
                &self.delta.to_string(),
                "must lie in [0, 1] so that ‖∇u₀‖ ≤ ‖∇W‖",
            ));
        }
        if !(self.profile_r > -2.0) {
            return Err(invalid(
                "profile_r",
                &self.profile_r.to_string(),
                "r <= -2 violates the hypothesis q* = r*(Λu₀) > -2 of the decay bound",
            ));
        }
        if let Some(q) = self.q_star {
            if !(q > -2.0) {
                return Err(invalid(
                    "q_star",
                    &q.to_string(),
                    "q* <= -2 violates the hypothesis q* = r*(Λu₀) > -2 of the decay bound",
                ));
            }
        }
        positive("cutoff", self.cutoff)?;
        positive("estimator_cutoff", self.estimator_cutoff)?;
        let grid = self.grid()?;
        for (key, v) in [("cutoff", self.cutoff), ("estimator_cutoff", self.estimator_cutoff)] {
            if v >= grid.axis_nyquist() {
                return Err(invalid(
                    key,
                    &v.to_string(),
                    &format!("must lie below the axis Nyquist frequency {}", grid.axis_nyquist()),
                ));
            }
        }
        if self.datum == DatumKind::File && self.datum_file.is_none() {
            return Err(Error::Config("datum = file requires datum_file".into()));
        }
        if let Some(a) = self.schedule_alpha {
            positive("schedule_alpha", a)?;
        }
        positive("c_tilde", self.c_tilde)?;
        positive("tolerance", self.tolerance)?;
        positive("lyapunov_tolerance", self.lyapunov_tolerance)?;
        positive("estimator_decades", self.estimator_decades)?;
        positive("energy_tolerance", self.energy_tolerance)?;
        positive("dissipation_c", self.dissipation_c)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", &self.alpha.to_string(), "must lie in (0, 1]"));
        }
        if self.refinement_levels < 2 {
            return Err(invalid(
                "refinement_levels",
                &self.refinement_levels.to_string(),
                "need at least 2 levels",
            ));
        }
        let t_end = self.t_end(&grid);
        if self.snapshot_start(&grid) >= t_end {
            return Err(Error::Config(format!(
                "snapshot_start must be below t_end = {t_end}"
            )));
        }
        let (lo, hi) = self.fit_window(&grid);
        if !(lo >= 0.0 && hi > lo && hi <= grid.t_box()) {
            return Err(Error::Config(format!(
                "fit window [{lo}, {hi}] must be nonempty and inside [0, T_box = {}]",
                grid.t_box()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.points_per_dim, self.side_length)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn t_end(&self, grid: &TorusGrid) -> f64 {
        self.t_end.unwrap_or(grid.t_box() / 3.0)
    }

    pub fn snapshot_start(&self, grid: &TorusGrid) -> f64 {
        self.snapshot_start.unwrap_or(grid.t_box() / 1000.0)
    }

    pub fn fit_window(&self, grid: &TorusGrid) -> (f64, f64) {
        let (lo, hi) = default_fit_window(grid);
        (self.fit_t_min.unwrap_or(lo), self.fit_t_max.unwrap_or(hi))
    }

    /// `t = 0` followed by `snapshot_count` log-spaced times up to `t_end`.
    pub fn snapshot_times(&self, grid: &TorusGrid) -> Vec<f64> {
        let mut times = vec![0.0];
        times.extend(log_spaced(
            self.snapshot_start(grid),
            self.t_end(grid),
            self.snapshot_count,
        ));
        times
    }

    pub fn datum_spec(&self) -> DatumSpec {
        match self.datum {
            DatumKind::PowerLaw => DatumSpec::PowerLaw {
                r: self.profile_r,
                cutoff: self.cutoff,
                delta: self.delta,
            },
            DatumKind::Bump => DatumSpec::Bump { delta: self.delta },
            DatumKind::File => DatumSpec::File(self.datum_file.clone().unwrap_or_default()),
        }
    }

    pub fn simulation(&self, nonlinear_default: bool) -> Result<SimulationConfig> {
        let grid = self.grid()?;
        let sim = SimulationConfig {
            grid,
            dt: self.dt,
            t_end: self.t_end(&grid),
            snapshot_times: self.snapshot_times(&grid),
            nonlinearity_enabled: self.nonlinear.unwrap_or(nonlinear_default),
            datum: self.datum_spec(),
        };
        sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(sim)
    }

    /// Splitting schedule selected by `schedule`, given the datum's `q*`.
    pub fn splitting_schedule(&self, q_star: f64) -> Result<SplittingSchedule> {
        match self.schedule {
            ScheduleChoice::LogCubed => SplittingSchedule::new(ScheduleKind::LogCubed, self.c_tilde),
            ScheduleChoice::Power => self.power_schedule(q_star),
        }
    }

    /// `g(t) = (1+t)^α` with `α = schedule_alpha` or `max{2+q*, 1} + 0.5`.
    pub fn power_schedule(&self, q_star: f64) -> Result<SplittingSchedule> {
        let alpha = match self.schedule_alpha {
            Some(a) => a,
            None => (2.0 + q_star).max(1.0) + 0.5,
        };
        SplittingSchedule::new(ScheduleKind::Power(alpha), self.c_tilde)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.points_per_dim, 32);
        assert_eq!(c.side_length, 32.0);
        assert_eq!(c.delta, 0.1);
        assert_eq!(c.datum, DatumKind::PowerLaw);
        assert_eq!(c.profile_r, 0.0);
    }

    #[test]
    fn comments_and_whitespace() {
        let c = ExperimentConfig::parse("# header\n  dt = 0.01  # inline\n\nnonlinear=false\n").unwrap();
        assert_eq!(c.dt, 0.01);
        assert_eq!(c.nonlinear, Some(false));
    }

    #[test]
    fn rejects_bad_input() {
        let err = ExperimentConfig::parse("points_per_dim = 15").unwrap_err().to_string();
        assert!(err.contains("points_per_dim") && err.contains("even"), "{err}");
        let err = ExperimentConfig::parse("profile_r = -2.5").unwrap_err().to_string();
        assert!(err.contains("profile_r") && err.contains("q* = r*(Λu₀) > -2"), "{err}");
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("dt = 1\ndt = 2").is_err());
        assert!(ExperimentConfig::parse("dt 1").is_err());
        assert!(ExperimentConfig::parse("dt = fast").is_err());
        assert!(ExperimentConfig::parse("delta = 1.5").is_err());
        assert!(ExperimentConfig::parse("datum = file").is_err());
        assert!(ExperimentConfig::parse("cutoff = 4.0").is_err());
        assert!(ExperimentConfig::parse("fit_t_max = 100").is_err());
        assert!(ExperimentConfig::parse("alpha = 1.5").is_err());
        assert!(ExperimentConfig::from_path(Path::new("/nonexistent/cfg")).is_err());
    }

    #[test]
    fn derived_quantities() {
        let c = ExperimentConfig::default();
        let g = c.grid().unwrap();
        let times = c.snapshot_times(&g);
        assert_eq!(times.len(), 49);
        assert_eq!(times[0], 0.0);
        assert!((times[48] - g.t_box() / 3.0).abs() < 1e-15);
        let sim = c.simulation(true).unwrap();
        assert!(sim.nonlinearity_enabled);
        match c.power_schedule(-1.5).unwrap().kind() {
            ScheduleKind::Power(a) => assert_eq!(a, 1.5),
            _ => unreachable!(),
        }
    }
}
