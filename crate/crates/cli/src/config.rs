//! Run configuration: a line-based `section.key = value` text format.
//!
//! `#` starts a comment line, blank lines are skipped, unknown keys are
//! rejected. Every field has a default, so an empty config is valid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use somdp_core::bounds::BoundVariant;
use somdp_core::nav::NavConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub geometry_path: Option<PathBuf>,
    pub env: NavConfig,
    pub so: SelfOrgSettings,
    pub eval: EvalSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfOrgSettings {
    pub modules: usize,
    pub budget: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub warmup_splits: usize,
    pub splits_per_call: usize,
    pub bound_variant: BoundVariant,
    pub solver_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalSettings {
    pub runs: usize,
    pub cap: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            geometry_path: None,
            env: NavConfig::default(),
            so: SelfOrgSettings {
                modules: 3,
                budget: 400,
                max_sweeps: 40,
                tol: 1e-4,
                warmup_splits: 2,
                splits_per_call: 1,
                bound_variant: BoundVariant::AsWritten,
                solver_tol: 1e-6,
            },
            eval: EvalSettings { runs: 500, cap: 1000 },
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| format!("in config {}", path.display()))?;
        if let Some(geo) = &cfg.geometry_path {
            if !geo.exists() {
                bail!(
                    "config {} references missing geometry file {}",
                    path.display(),
                    geo.display()
                );
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            let value = value.trim();
            cfg.set(key, value)
                .with_context(|| format!("line {}: key `{key}`", lineno + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.env.cell > 0.0) {
            bail!("env.cell must be positive");
        }
        if self.env.move_amp < 0.0 || self.env.noise_amp < 0.0 {
            bail!("move and noise amplitudes must be non-negative");
        }
        if self.env.noise_dirs < 1 {
            bail!("env.noise_dirs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.env.discount) {
            bail!("env.discount must be in [0, 1)");
        }
        if self.so.modules < 1 || self.so.budget < 1 || self.so.splits_per_call < 1 {
            bail!("so.modules, so.budget, and so.splits_per_call must be at least 1");
        }
        if !(self.so.solver_tol > 0.0) {
            bail!("so.solver_tol must be positive");
        }
        if self.eval.runs < 1 {
            bail!("eval.runs must be at least 1");
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| anyhow!("bad value `{value}`: {e}"))
        }
        match key {
            "seed" => self.seed = num(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "geometry_path" => self.geometry_path = Some(PathBuf::from(value)),
            "env.cell" => self.env.cell = num(value)?,
            "env.move_amp" => self.env.move_amp = num(value)?,
            "env.noise_amp" => self.env.noise_amp = num(value)?,
            "env.noise_dirs" => self.env.noise_dirs = num(value)?,
            "env.discount" => self.env.discount = num(value)?,
            "env.episode_cap" => self.env.episode_cap = num(value)?,
            "so.modules" => self.so.modules = num(value)?,
            "so.budget" => self.so.budget = num(value)?,
            "so.max_sweeps" => self.so.max_sweeps = num(value)?,
            "so.tol" => self.so.tol = num(value)?,
            "so.warmup_splits" => self.so.warmup_splits = num(value)?,
            "so.splits_per_call" => self.so.splits_per_call = num(value)?,
            "so.solver_tol" => self.so.solver_tol = num(value)?,
            "so.bound_variant" => {
                self.so.bound_variant = BoundVariant::parse(value)
                    .ok_or_else(|| anyhow!("bad value `{value}`: want as-written|conservative"))?
            }
            "eval.runs" => self.eval.runs = num(value)?,
            "eval.cap" => self.eval.cap = num(value)?,
            _ => bail!("unknown key"),
        }
        Ok(())
    }

    /// Canonical rendering of the run parameters; the hash of this text
    /// identifies the run in output sidecars. The output directory is not a
    /// run parameter (the same run may be written anywhere), so it is
    /// excluded.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(p) = &self.geometry_path {
            let _ = writeln!(s, "geometry_path = {}", p.display());
        }
        let _ = writeln!(s, "env.cell = {}", self.env.cell);
        let _ = writeln!(s, "env.move_amp = {}", self.env.move_amp);
        let _ = writeln!(s, "env.noise_amp = {}", self.env.noise_amp);
        let _ = writeln!(s, "env.noise_dirs = {}", self.env.noise_dirs);
        let _ = writeln!(s, "env.discount = {}", self.env.discount);
        let _ = writeln!(s, "env.episode_cap = {}", self.env.episode_cap);
        let _ = writeln!(s, "so.modules = {}", self.so.modules);
        let _ = writeln!(s, "so.budget = {}", self.so.budget);
        let _ = writeln!(s, "so.max_sweeps = {}", self.so.max_sweeps);
        let _ = writeln!(s, "so.tol = {}", self.so.tol);
        let _ = writeln!(s, "so.warmup_splits = {}", self.so.warmup_splits);
        let _ = writeln!(s, "so.splits_per_call = {}", self.so.splits_per_call);
        let _ = writeln!(s, "so.bound_variant = {}", self.so.bound_variant.as_str());
        let _ = writeln!(s, "so.solver_tol = {}", self.so.solver_tol);
        let _ = writeln!(s, "eval.runs = {}", self.eval.runs);
        let _ = writeln!(s, "eval.cap = {}", self.eval.cap);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(
            RunConfig::parse("# just a comment\n\n").unwrap(),
            RunConfig::default()
        );
    }

    #[test]
    fn round_trips_through_resolved_text() {
        // output_dir is not a run parameter and is absent from the text.
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.so.modules = 2;
        cfg.so.bound_variant = BoundVariant::Conservative;
        cfg.env.cell = 0.25;
        cfg.geometry_path = Some(PathBuf::from("geo.txt"));
        let back = RunConfig::parse(&cfg.resolved_text()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("so.bogus = 1\n").unwrap_err();
        assert!(format!("{err:#}").contains("unknown key"));
    }

    #[test]
    fn bad_values_are_rejected_with_location() {
        let err = RunConfig::parse("seed = onions\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 1"));
        assert!(RunConfig::parse("so.bound_variant = loose\n").is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(RunConfig::parse("env.cell = 0\n").is_err());
        assert!(RunConfig::parse("env.discount = 1.0\n").is_err());
        assert!(RunConfig::parse("so.modules = 0\n").is_err());
        assert!(RunConfig::parse("eval.runs = 0\n").is_err());
    }
}
