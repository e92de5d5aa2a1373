//! Deterministic fuzzing: seeded scenario generation and batch runs.

use crate::run::{run, RunError, RunOptions};
use crate::script::{Kind, Scenario, ScenarioScript};
use demuth_base::{random_base, BaseLimits};
use demuth_core::{random_family, FamilyLimits};
use demuth_sjt::{random_sjt, SjtLimits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Bounds shared by the generators. `depth` is the tree depth, or the
/// number of components for transform scripts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FuzzLimits {
    pub horizon: u64,
    pub depth: usize,
}

impl FuzzLimits {
    pub fn default_for(kind: Kind) -> FuzzLimits {
        match kind {
            Kind::Transform => FuzzLimits { horizon: 300, depth: 8 },
            Kind::Sjt => FuzzLimits { horizon: 2000, depth: 4 },
            Kind::Base => FuzzLimits { horizon: 2000, depth: 7 },
        }
    }
}

pub fn generate(kind: Kind, seed: u64, lim: FuzzLimits) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        Kind::Transform => {
            let l = FamilyLimits { components: lim.depth, horizon: lim.horizon as usize, ..FamilyLimits::default() };
            Scenario::Transform(random_family(&mut rng, &l))
        }
        Kind::Sjt => Scenario::Sjt(random_sjt(&mut rng, &SjtLimits { horizon: lim.horizon, depth: lim.depth, ..SjtLimits::default() })),
        Kind::Base => Scenario::Base(random_base(&mut rng, &BaseLimits { horizon: lim.horizon, depth: lim.depth, ..BaseLimits::default() })),
    }
}

/// Per-trial seeds drawn from the master seed.
pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.gen()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub breaches: Vec<String>,
    pub index: usize,
    pub seed: u64,
    /// The final audit could not run because the scenario changes late.
    pub unsettled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub kind: Kind,
    pub seed: u64,
    pub trials: Vec<Trial>,
    /// Sum of each numeric note over all trials.
    pub notes: std::collections::BTreeMap<String, u64>,
}

impl FuzzSummary {
    pub fn clean(&self) -> bool {
        self.trials.iter().all(|t| t.breaches.is_empty())
    }
}

/// Runs `trials` generated scenarios. Failing ones are written to `corpus`.
pub fn fuzz(kind: Kind, trials: usize, seed: u64, lim: FuzzLimits, opts: &RunOptions, corpus: Option<&Path>) -> Result<FuzzSummary, RunError> {
    if let Some(dir) = corpus {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Options(format!("{}: {e}", dir.display())))?;
    }
    let mut out = FuzzSummary { kind, seed, trials: Vec::new(), notes: Default::default() };
    for (index, s) in trial_seeds(seed, trials).into_iter().enumerate() {
        let sc = generate(kind, s, lim);
        let res = run(&sc, opts)?;
        let breaches: Vec<String> = res.report.breaches().into_iter().collect();
        let unsettled = res.report.lines.iter().any(|l| l.status == crate::report::Status::Skip);
        for (k, v) in &res.report.notes {
            *out.notes.entry(k.clone()).or_default() += v.as_u64().unwrap_or(0);
        }
        if !breaches.is_empty() {
            if let Some(dir) = corpus {
                let path = dir.join(format!("{}-{index:04}-{s:016x}.json", kind.name()));
                std::fs::write(&path, ScenarioScript::wrap(&sc, Some(s)).to_pretty())
                    .map_err(|e| RunError::Options(format!("{}: {e}", path.display())))?;
            }
        }
        out.trials.push(Trial { breaches, index, seed: s, unsettled });
    }
    Ok(out)
}
