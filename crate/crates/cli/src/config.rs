//! Declarative experiment configuration (JSON).
//!
//! ```json
//! {
//!   "model": { "name": "c0", "n": 2, "params": { "rho": 0.5 } },
//!   "kind": "simulate",
//!   "x0": [0.25, 0.0],
//!   "T": 1.0,
//!   "output": "results/c0-simulate"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semicocycle::{build_model, ModelBundle, ModelName, ModelParams, NormTag, SolverOptions, VectorState};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    ChainRule,
    RecoverGenerator,
    Growth,
    Gronwall,
    Lyapunov,
    Continuity,
    DimensionSweep,
    Differentiability,
}

impl ExperimentKind {
    /// Kinds that draw seeded sample sets and therefore require a seed.
    pub fn is_sampled(self) -> bool {
        matches!(
            self,
            ExperimentKind::ChainRule
                | ExperimentKind::Growth
                | ExperimentKind::Continuity
                | ExperimentKind::DimensionSweep
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.n.unwrap_or_else(|| self.name.default_dim())
    }

    pub fn build(&self) -> Result<ModelBundle, HarnessError> {
        build_model(self.name, self.dim(), &self.params).map_err(|e| HarnessError::BadConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub kind: ExperimentKind,
    /// Initial point (real coordinates).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Final time of simulate and gronwall runs.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Probe time of a dimension sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Sample count of sampled kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Boundary margin of sample sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Reference time of continuity probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    /// Inner time of generator recovery.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Difference step of the differentiability probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_h: Option<f64>,
    /// Evaluate through the generator even when a closed form exists.
    #[serde(default)]
    pub generated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

pub const DEFAULT_SAMPLES: usize = 20;
pub const DEFAULT_UNIT_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::BadConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::BadConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Check every kind-specific requirement. Nothing is written before
    /// this passes.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::BadConfig(msg));
        let kind = self.kind;
        let bundle = self.model.build()?;
        self.solver
            .validate()
            .map_err(|e| HarnessError::BadConfig(e.to_string()))?;
        if kind.is_sampled() && self.seed.is_none() {
            return bad(format!("kind {kind:?} draws samples and needs a seed"));
        }
        if self.samples == Some(0) {
            return bad("samples must be positive".into());
        }
        let needs_x0 = matches!(
            kind,
            ExperimentKind::Simulate
                | ExperimentKind::RecoverGenerator
                | ExperimentKind::Gronwall
                | ExperimentKind::Lyapunov
                | ExperimentKind::Differentiability
        );
        if needs_x0 {
            match &self.x0 {
                None => return bad(format!("kind {kind:?} needs x0")),
                Some(x) if x.len() != bundle.flow.domain.dim => {
                    return bad(format!(
                        "x0 has {} coordinates, model has {}",
                        x.len(),
                        bundle.flow.domain.dim
                    ))
                }
                Some(x) if x.iter().any(|v| !v.is_finite()) => return bad("x0 must be finite".into()),
                _ => {}
            }
        }
        if matches!(kind, ExperimentKind::Simulate | ExperimentKind::Gronwall) {
            match self.t_end {
                Some(t) if t.is_finite() && t > 0.0 => {}
                _ => return bad(format!("kind {kind:?} needs a positive final time T")),
            }
        }
        let grid_ok = |g: &Option<Vec<f64>>| {
            g.as_ref()
                .is_none_or(|g| !g.is_empty() && g.iter().all(|v| v.is_finite() && *v >= 0.0))
        };
        if !grid_ok(&self.grids.t) || !grid_ok(&self.grids.s) {
            return bad("time grids must be non-empty lists of finite non-negative values".into());
        }
        match kind {
            ExperimentKind::Continuity if self.grids.t.is_none() => return bad("continuity needs grids.t".into()),
            ExperimentKind::DimensionSweep => {
                match &self.grids.dims {
                    Some(d) if !d.is_empty() && d.iter().all(|&n| n >= 1) && d.windows(2).all(|w| w[1] > w[0]) => {}
                    _ => return bad("dimension_sweep needs increasing grids.dims".into()),
                }
                match self.t {
                    Some(t) if t.is_finite() && t >= 0.0 => {}
                    _ => return bad("dimension_sweep needs a probe time t".into()),
                }
            }
            ExperimentKind::Lyapunov => {
                if let Some(g) = &self.grids.t {
                    if g.len() < 2 || g[0] <= 0.0 || g.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("lyapunov needs two or more increasing positive times".into());
                    }
                }
            }
            ExperimentKind::Growth | ExperimentKind::Gronwall if !bundle.cocycle.has_generator() => {
                return bad(format!("kind {kind:?} needs a model with a generator"));
            }
            ExperimentKind::RecoverGenerator => {
                if let Some(s) = self.s {
                    if !(s > 0.0 && s.is_finite()) {
                        return bad("inner time s must be positive".into());
                    }
                }
            }
            ExperimentKind::Differentiability => {
                if let Some(h) = self.probe_h {
                    if !(h > 0.0 && h.is_finite()) {
                        return bad("probe_h must be positive".into());
                    }
                }
            }
            _ => {}
        }
        if self.generated && !bundle.cocycle.has_generator() {
            return bad(format!("model {} has no generator", self.model.name));
        }
        Ok(())
    }

    pub fn x0_state(&self, tag: NormTag) -> Option<VectorState> {
        self.x0.as_ref().map(|x| VectorState::real(x, tag))
    }

    pub fn sample_count(&self) -> usize {
        self.samples.unwrap_or(DEFAULT_SAMPLES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_simulate() {
        let cfg =
            ExperimentConfig::from_json(r#"{"model":{"name":"c0","n":2},"kind":"simulate","x0":[0.25,0.0],"T":1.0}"#)
                .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.solver, SolverOptions::default());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"model":{"name":"c7"},"kind":"simulate","x0":[0.1],"T":1.0}"#,
            r#"{"model":{"name":"c0","n":2},"kind":"growth"}"#,
            r#"{"model":{"name":"c0","n":2},"kind":"simulate","x0":[0.25],"T":1.0}"#,
            r#"{"model":{"name":"c0","n":2,"params":{"rho":1.5}},"kind":"simulate","x0":[0.25,0.0],"T":1.0}"#,
            r#"{"model":{"name":"piecewise"},"kind":"growth","seed":1}"#,
            r#"{"model":{"name":"c0"},"kind":"dimension_sweep","seed":1,"t":0.1,"grids":{"dims":[8,4]}}"#,
            r#"{"model":{"name":"c0"},"kind":"simulate","x0":[0.25],"T":1.0,"colour":"red"}"#,
        ];
        for text in cases {
            let result = ExperimentConfig::from_json(text).and_then(|c| c.validate());
            assert!(matches!(result, Err(HarnessError::BadConfig(_))), "{text}");
        }
    }
}
