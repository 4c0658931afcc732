//! Experiment configuration: defaults, validation, and the line-based
//! `key=value` config format with CLI overrides applied on top.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::boundary::Family;
use crate::phantoms::PhantomId;
use crate::{Error, Result};

/// Everything one experiment needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub phantom: PhantomId,
    pub family: Family,
    /// Arc index i in 1..=8 selecting Gamma_i = eta([0, i*pi/4]).
    pub gamma_index: usize,
    /// Data (forward) mesh spacing; strictly finer than the reconstruction mesh.
    pub data_h: f64,
    /// Reconstruction mesh spacing.
    pub recon_h: f64,
    /// Noise level in percent.
    pub alpha: f64,
    pub seed: u64,
    /// Eigenvalue floor applied to the (possibly noisy) power density.
    pub floor_l: f64,
    /// Use the Euclidean nodal norm for the noise normalization.
    pub vector_norm_noise: bool,
    /// Percentile clamp on |F| cell magnitudes; None disables.
    pub clamp_percentile: Option<f64>,
    /// Output directory for artifacts; None skips all file output.
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            phantom: PhantomId::Sigma1,
            family: Family::Adapted,
            gamma_index: 8,
            data_h: 0.0125,
            recon_h: 0.016,
            alpha: 0.0,
            seed: 50,
            floor_l: 1e-6,
            vector_norm_noise: false,
            clamp_percentile: Some(99.9),
            out_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.gamma_index) {
            return Err(Error::GammaIndexOutOfRange(self.gamma_index));
        }
        if !(self.data_h > 0.0 && self.data_h < 0.5) {
            return Err(Error::BadMeshSpacing(self.data_h));
        }
        if !(self.recon_h > 0.0 && self.recon_h < 0.5) {
            return Err(Error::BadMeshSpacing(self.recon_h));
        }
        if self.data_h >= self.recon_h {
            return Err(Error::BadConfig(format!(
                "data mesh must be strictly finer: data_h {} >= recon_h {}",
                self.data_h, self.recon_h
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::BadConfig(format!("alpha {} must be >= 0", self.alpha)));
        }
        if !(self.floor_l > 0.0) {
            return Err(Error::BadConfig(format!(
                "floor {} must be > 0",
                self.floor_l
            )));
        }
        if let Some(p) = self.clamp_percentile {
            if !(50.0 <= p && p <= 100.0) {
                return Err(Error::BadConfig(format!("clamp percentile {p} outside [50, 100]")));
            }
        }
        Ok(())
    }

    /// Apply `key=value` overrides (config file first, then CLI flags).
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            match k.as_str() {
                "phantom" => {
                    self.phantom = PhantomId::parse(v)
                        .ok_or_else(|| Error::BadConfig(format!("unknown phantom {v:?}")))?
                }
                "family" => {
                    self.family = Family::parse(v)
                        .ok_or_else(|| Error::BadConfig(format!("unknown family {v:?}")))?
                }
                "gamma" => self.gamma_index = parse_num(k, v)? as usize,
                "data_h" => self.data_h = parse_num(k, v)?,
                "recon_h" => self.recon_h = parse_num(k, v)?,
                "alpha" => self.alpha = parse_num(k, v)?,
                "seed" => self.seed = parse_num(k, v)? as u64,
                "floor" => self.floor_l = parse_num(k, v)?,
                "vector_norm_noise" => self.vector_norm_noise = parse_bool(k, v)?,
                "clamp" => {
                    self.clamp_percentile = if v == "off" {
                        None
                    } else {
                        Some(parse_num(k, v)?)
                    }
                }
                "out" => self.out_dir = Some(PathBuf::from(v)),
                _ => return Err(Error::BadConfig(format!("unknown key {k:?}"))),
            }
        }
        Ok(())
    }

    /// Echo in config-file format (written into run directories).
    pub fn echo(&self) -> String {
        let mut s = String::from("# aetlab experiment config\n");
        s.push_str(&format!("phantom={}\n", self.phantom.name()));
        s.push_str(&format!("family={}\n", self.family.name()));
        s.push_str(&format!("gamma={}\n", self.gamma_index));
        s.push_str(&format!("data_h={}\n", self.data_h));
        s.push_str(&format!("recon_h={}\n", self.recon_h));
        s.push_str(&format!("alpha={}\n", self.alpha));
        s.push_str(&format!("seed={}\n", self.seed));
        s.push_str(&format!("floor={}\n", self.floor_l));
        s.push_str(&format!("vector_norm_noise={}\n", self.vector_norm_noise));
        match self.clamp_percentile {
            Some(p) => s.push_str(&format!("clamp={p}\n")),
            None => s.push_str("clamp=off\n"),
        }
        s
    }

    /// Short tag for run subdirectories.
    pub fn tag(&self) -> String {
        format!(
            "{}_{}_g{}_a{}",
            self.phantom.name(),
            self.family.name(),
            self.gamma_index,
            self.alpha
        )
    }
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::BadConfig(format!("bad number for {key}: {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::BadConfig(format!("bad bool for {key}: {v:?}"))),
    }
}

/// Parse the line-based config format: `key=value` lines, `#` comments and
/// blank lines ignored.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::BadConfig(format!("line {}: expected key=value, got {line:?}", lineno + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}
