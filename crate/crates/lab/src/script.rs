//! Scenario files: a header plus a kind-specific body.

use demuth_base::BaseScenario;
use demuth_core::{validate_family, StagedClopenFamily};
use demuth_sjt::{Sjt, SjtScenario};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Transform,
    Sjt,
    Base,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Transform => "transform",
            Kind::Sjt => "sjt",
            Kind::Base => "base",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// The file format. The header horizon overrides the body; the depth must
/// agree with it (for transforms, the number of components).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub body: serde_json::Value,
    pub depth: usize,
    pub horizon: u64,
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Transform(StagedClopenFamily),
    Sjt(SjtScenario),
    Base(BaseScenario),
}

impl Scenario {
    pub fn kind(&self) -> Kind {
        match self {
            Scenario::Transform(_) => Kind::Transform,
            Scenario::Sjt(_) => Kind::Sjt,
            Scenario::Base(_) => Kind::Base,
        }
    }

    pub fn horizon(&self) -> u64 {
        match self {
            Scenario::Transform(f) => f.horizon as u64,
            Scenario::Sjt(s) => s.horizon,
            Scenario::Base(b) => b.horizon,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Scenario::Transform(f) => f.len(),
            Scenario::Sjt(s) => s.depth,
            Scenario::Base(b) => b.depth,
        }
    }

    pub fn set_horizon(&mut self, h: u64) {
        match self {
            Scenario::Transform(f) => f.horizon = h as usize,
            Scenario::Sjt(s) => s.horizon = h,
            Scenario::Base(b) => b.horizon = h,
        }
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        let bad = |e: String| Err(ScriptError::Invalid(e));
        match self {
            Scenario::Transform(f) => {
                let v = validate_family(f);
                if v.is_empty() { Ok(()) } else { bad(format!("{v:?}")) }
            }
            Scenario::Sjt(s) => Sjt::new(s.clone()).map(|_| ()).or_else(|e| bad(e.to_string())),
            Scenario::Base(b) => b.validate().or_else(|e| bad(e.to_string())),
        }
    }
}

impl ScenarioScript {
    pub fn wrap(sc: &Scenario, seed: Option<u64>) -> ScenarioScript {
        let body = match sc {
            Scenario::Transform(f) => serde_json::to_value(f),
            Scenario::Sjt(s) => serde_json::to_value(s),
            Scenario::Base(b) => serde_json::to_value(b),
        }
        .expect("scenarios serialize");
        ScenarioScript { body, depth: sc.depth(), horizon: sc.horizon(), kind: sc.kind(), seed }
    }

    /// Decodes the body, applies the header and validates.
    pub fn scenario(&self) -> Result<Scenario, ScriptError> {
        let body = self.body.clone();
        let mut sc = match self.kind {
            Kind::Transform => Scenario::Transform(serde_json::from_value(body)?),
            Kind::Sjt => Scenario::Sjt(serde_json::from_value(body)?),
            Kind::Base => Scenario::Base(serde_json::from_value(body)?),
        };
        sc.set_horizon(self.horizon);
        if sc.depth() != self.depth {
            return Err(ScriptError::Invalid(format!("header depth {} but body depth {}", self.depth, sc.depth())));
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<ScenarioScript, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScriptError::Io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scripts serialize")
    }
}
