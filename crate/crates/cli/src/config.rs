//! Experiment configuration files and built-in presets.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use starweyl_core::direct::MaskPolicy;
use starweyl_core::graph::{example1_specs, ClosedForm, Edge, EdgeSpec, PotentialSpec, SpectralSamplingPlan};
use starweyl_core::inverse::{InverseConfig, Smoothing};
use starweyl_core::{build_graph, StarGraph};

pub const PRESETS: [&str; 3] = ["example1-uniform190", "example1-log90", "fig2-sweep"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub edges: Vec<EdgeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Which Weyl entries the direct run keeps; by default the diagonal and
    /// successor entries when `M_k = 0`, everything otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskPolicy>,
    /// Inclusive `M_k` range for sweep runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_mk: Option<[usize; 2]>,
}

/// An edge; the potential may be left out for inverse runs on external data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplingConfig {
    /// `count` points from `a` to `b`, each given as `[re, im]`.
    Uniform { a: [f64; 2], b: [f64; 2], count: usize },
    /// `rho_k = 10^alpha_k + i delta`.
    LogUniform { alpha: [f64; 2], delta: f64, count: usize },
}

impl SamplingConfig {
    pub fn count(&self) -> usize {
        match *self {
            SamplingConfig::Uniform { count, .. } | SamplingConfig::LogUniform { count, .. } => count,
        }
    }

    pub fn set_count(&mut self, m: usize) {
        match self {
            SamplingConfig::Uniform { count, .. } | SamplingConfig::LogUniform { count, .. } => *count = m,
        }
    }

    pub fn plan(&self) -> SpectralSamplingPlan {
        match *self {
            SamplingConfig::Uniform { a, b, count } => {
                SpectralSamplingPlan::uniform(Complex64::new(a[0], a[1]), Complex64::new(b[0], b[1]), count)
            }
            SamplingConfig::LogUniform { alpha, delta, count } => {
                SpectralSamplingPlan::log_uniform((alpha[0], alpha[1]), delta, count)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "N")]
    pub order: usize,
    #[serde(rename = "N_c")]
    pub n_c: Option<usize>,
    #[serde(rename = "M_k")]
    pub m_k: usize,
    pub rho_scan_max: Option<f64>,
    #[serde(rename = "K_N")]
    pub k_n: Option<usize>,
    pub svd_threshold: f64,
    pub x_points: usize,
    pub x_margin: f64,
    pub smoothing: Smoothing,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let c = InverseConfig::default();
        Self {
            order: c.order,
            n_c: c.n_c,
            m_k: c.m_k,
            rho_scan_max: c.rho_max,
            k_n: c.k_n,
            svd_threshold: c.svd_threshold,
            x_points: c.x_points,
            x_margin: c.x_margin,
            smoothing: c.smoothing,
        }
    }
}

impl SolverConfig {
    pub fn inverse(&self) -> InverseConfig {
        InverseConfig {
            order: self.order,
            n_c: self.n_c,
            m_k: self.m_k,
            rho_max: self.rho_scan_max,
            k_n: self.k_n,
            svd_threshold: self.svd_threshold,
            x_points: self.x_points,
            x_margin: self.x_margin,
            smoothing: self.smoothing,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let edges = example1_specs()
            .into_iter()
            .map(|s| EdgeConfig {
                length: s.length,
                potential: Some(s.potential),
                grid_size: s.grid_size,
            })
            .collect();
        let log_uniform = |count| SamplingConfig::LogUniform {
            alpha: [0.0, 2.0],
            delta: 0.1,
            count,
        };
        let mut config = Self {
            edges,
            sampling: None,
            solver: SolverConfig::default(),
            mask: None,
            sweep_mk: None,
        };
        match name {
            "example1-uniform190" => {
                config.sampling = Some(SamplingConfig::Uniform {
                    a: [1.0, 0.1],
                    b: [100.0, 0.1],
                    count: 190,
                })
            }
            "example1-log90" => config.sampling = Some(log_uniform(90)),
            "fig2-sweep" => {
                config.sampling = Some(log_uniform(30));
                config.solver.order = 7;
                config.mask = Some(MaskPolicy::Full);
                config.sweep_mk = Some([0, 7]);
            }
            _ => bail!("unknown preset `{name}` (available: {})", PRESETS.join(", ")),
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.len() < 2 {
            bail!("`edges` must list at least 2 edges, got {}", self.edges.len());
        }
        for (k, e) in self.edges.iter().enumerate() {
            if !(e.length > 0.0 && e.length.is_finite()) {
                bail!("`edges[{k}].length` must be positive, got {}", e.length);
            }
        }
        if let Some([a, b]) = self.sweep_mk {
            if a > b {
                bail!("`sweep_mk` range {a}..{b} is empty");
            }
        }
        let s = &self.solver;
        if s.x_points < 9 {
            bail!("`solver.x_points` must be at least 9, got {}", s.x_points);
        }
        if s.smoothing.window.is_multiple_of(2) || s.smoothing.window <= s.smoothing.degree {
            bail!(
                "`solver.smoothing.window` must be odd and exceed the degree ({} vs {})",
                s.smoothing.window,
                s.smoothing.degree
            );
        }
        if !(s.svd_threshold > 0.0 && s.svd_threshold < 1.0) {
            bail!("`solver.svd_threshold` must lie in (0, 1), got {}", s.svd_threshold);
        }
        Ok(())
    }

    pub fn sampling(&self) -> Result<&SamplingConfig> {
        self.sampling.as_ref().ok_or_else(|| anyhow!("missing key `sampling`"))
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    /// The graph with every potential materialized; each edge needs one.
    pub fn graph(&self) -> Result<StarGraph> {
        let specs = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let potential = e.potential.clone().ok_or_else(|| anyhow!("missing key `edges[{k}].potential`"))?;
                Ok(EdgeSpec {
                    length: e.length,
                    potential,
                    grid_size: e.grid_size,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(build_graph(&specs)?)
    }

    /// Mask used when synthesizing data for a run with the given `M_k` range.
    pub fn mask_for(&self, max_m_k: usize) -> MaskPolicy {
        self.mask.unwrap_or(if max_m_k > 0 {
            MaskPolicy::Full
        } else {
            MaskPolicy::DiagPlusSuccessor
        })
    }

    /// Ground truth for edge `i` (1-based), when the config gives one.
    pub fn truth(&self, i: usize) -> Result<Option<Truth>> {
        let e = &self.edges[i - 1];
        Ok(match &e.potential {
            None => None,
            Some(PotentialSpec::Closed(form)) => Some(Truth::Closed(form.clone())),
            Some(PotentialSpec::Samples { samples }) => Some(Truth::Sampled(Edge::new(i, e.length, samples.clone())?)),
        })
    }
}

pub enum Truth {
    Closed(ClosedForm),
    Sampled(Edge),
}

impl Truth {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Truth::Closed(f) => f.eval(x),
            Truth::Sampled(e) => e.potential_at(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            let c = ExperimentConfig::preset(name).unwrap();
            c.validate().unwrap();
            assert_eq!(c.edges.len(), 9);
            assert!(c.graph().is_ok());
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let c = ExperimentConfig::preset("fig2-sweep").unwrap();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn missing_edges_names_the_key() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"sampling": null}"#).unwrap_err();
        assert!(err.to_string().contains("`edges`"), "{err}");
    }

    #[test]
    fn solver_keys_use_upper_case_symbols() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"edges": [{"length": 1.0}, {"length": 2.0}],
                "solver": {"N": 5, "M_k": 1, "svd_threshold": 1e-9}}"#,
        )
        .unwrap();
        assert_eq!(c.solver.order, 5);
        assert_eq!(c.solver.m_k, 1);
        assert_eq!(c.solver.x_points, SolverConfig::default().x_points);
        assert!(c.graph().unwrap_err().to_string().contains("edges[0].potential"));
    }
}
