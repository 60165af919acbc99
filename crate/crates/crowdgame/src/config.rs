//! TOML experiment configuration.
//!
//! A config file describes one game (world, roster, assignment, profile,
//! mechanism) plus the knobs of each subcommand. Fields that can be wrong in
//! ways the parser cannot see are kept with their source span so that errors
//! point at a line.

use std::ops::Range;

use crowdgame_core::game::{
    make_assignment, Assignment, GameConfig, PrejudiceMode, StrategyProfile,
};
use crowdgame_core::mechanisms::{
    MechanismSpec, DEFAULT_ACCURACY_CUT, DEFAULT_AGREE_CUT, DEFAULT_MATCH_CUT, DEFAULT_MAX_ROUNDS,
    DEFAULT_THRESHOLD,
};
use crowdgame_core::probcore::{
    substream, ConditionalTable, Distribution, LabelSpace, StreamTag, WorldDistribution,
};
use crowdgame_core::{AgentRoster, Strategy};
use serde::{Deserialize, Serialize};
use toml::Spanned;

/// A config error with an optional byte span into the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
    pub span: Option<Range<usize>>,
}

impl ConfigError {
    fn at(span: Range<usize>, message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            span: Some(span),
        }
    }

    fn plain(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            span: None,
        }
    }

    /// Renders the error as `origin:line:column: message` when the span is
    /// known.
    pub fn render(&self, origin: &str, source: &str) -> String {
        match &self.span {
            Some(span) => {
                let (line, col) = line_col(source, span.start);
                format!("{origin}:{line}:{col}: {}", self.message)
            }
            None => format!("{origin}: {}", self.message),
        }
    }
}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(source.len());
    let before = &source[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(offset, |nl| offset - nl - 1) + 1;
    (line, col)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default)]
    pub prejudice_mode: ModeSpec,
    pub world: WorldSpec,
    pub roster: RosterSpec,
    pub assignment: AssignmentSpec,
    pub profile: ProfileSpec,
    pub mechanism: Spanned<MechanismConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_sweep: Option<GoldSweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_sweep: Option<EntropySweepSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[default]
    Shared,
    Iid,
}

impl From<ModeSpec> for PrejudiceMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Shared => PrejudiceMode::Shared,
            ModeSpec::Iid => PrejudiceMode::Iid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub k: Spanned<usize>,
    pub p_y: Spanned<Vec<f64>>,
    pub p_u: Spanned<Vec<f64>>,
    pub signal: Spanned<SignalSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalName {
    Identity,
}

/// `"identity"`, a symmetric accuracy, or explicit rows of `P(I | Y = y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalSpec {
    Named(SignalName),
    Accuracy(f64),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterSpec {
    pub n_agents: Spanned<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informed: Option<Spanned<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub informed_fraction: Option<Spanned<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentSpec {
    pub n_items: Spanned<usize>,
    /// Absent means every agent labels every item.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_per_item: Option<Spanned<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Truthful,
    Prejudiced,
    Randomise,
}

impl From<StrategyName> for Strategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::Truthful => Strategy::Truthful,
            StrategyName::Prejudiced => Strategy::Prejudiced,
            StrategyName::Randomise => Strategy::Randomise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub informed: StrategyName,
    pub uninformed: StrategyName,
    /// Overrides the per-type choice for every agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_agent: Option<Spanned<Vec<StrategyName>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MechanismConfig {
    Agreement {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Pairwise {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Gold {
        gold_items: usize,
        #[serde(default = "default_accuracy_cut")]
        accuracy_cut: f64,
        #[serde(default = "default_agree_cut")]
        agree_cut: f64,
        #[serde(default = "default_max_rounds")]
        max_rounds: usize,
    },
    PrejudiceAnchored {
        anchored_items: usize,
        #[serde(default = "default_match_cut")]
        match_cut: f64,
        #[serde(default = "default_agree_cut")]
        agree_cut: f64,
        #[serde(default = "default_max_rounds")]
        max_rounds: usize,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_accuracy_cut() -> f64 {
    DEFAULT_ACCURACY_CUT
}
fn default_agree_cut() -> f64 {
    DEFAULT_AGREE_CUT
}
fn default_match_cut() -> f64 {
    DEFAULT_MATCH_CUT
}
fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

impl MechanismConfig {
    pub fn to_spec(&self) -> MechanismSpec {
        match *self {
            MechanismConfig::Agreement { threshold } => MechanismSpec::Agreement { threshold },
            MechanismConfig::Pairwise { threshold } => {
                MechanismSpec::PairwiseAgreement { threshold }
            }
            MechanismConfig::Gold {
                gold_items,
                accuracy_cut,
                agree_cut,
                max_rounds,
            } => MechanismSpec::GoldSeeded {
                gold_items,
                accuracy_cut,
                agree_cut,
                max_rounds,
            },
            MechanismConfig::PrejudiceAnchored {
                anchored_items,
                match_cut,
                agree_cut,
                max_rounds,
            } => MechanismSpec::PrejudiceAnchored {
                anchored_items,
                match_cut,
                agree_cut,
                max_rounds,
            },
        }
    }

    fn cuts(&self) -> Vec<(&'static str, f64)> {
        match *self {
            MechanismConfig::Agreement { threshold } | MechanismConfig::Pairwise { threshold } => {
                vec![("threshold", threshold)]
            }
            MechanismConfig::Gold {
                accuracy_cut,
                agree_cut,
                ..
            } => vec![("accuracy_cut", accuracy_cut), ("agree_cut", agree_cut)],
            MechanismConfig::PrejudiceAnchored {
                match_cut,
                agree_cut,
                ..
            } => {
                vec![("match_cut", match_cut), ("agree_cut", agree_cut)]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub n_items_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldSweepSection {
    pub g: Vec<usize>,
    /// Only count trials where the shared prejudice differs from the truth
    /// on at least one gold item.
    #[serde(default)]
    pub require_disagreement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySweepSection {
    pub p_u: Vec<Vec<f64>>,
    pub steps: usize,
    pub restarts: usize,
    /// Trials behind each payoff estimate during the dynamics.
    pub trials: u64,
}

/// A config resolved into core types.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub game: GameConfig,
    pub profile: StrategyProfile,
    pub mechanism: MechanismSpec,
}

impl ExperimentConfig {
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(|e| ConfigError {
            message: e.message().to_string(),
            span: e.span(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the world without checking the information constraints.
    pub fn world(&self) -> Result<WorldDistribution, ConfigError> {
        self.world_with_p_u(self.world.p_u.get_ref(), Some(self.world.p_u.span()))
    }

    /// The configured world with `P(U)` replaced.
    pub fn world_with_p_u(
        &self,
        p_u: &[f64],
        span: Option<Range<usize>>,
    ) -> Result<WorldDistribution, ConfigError> {
        let w = &self.world;
        let k = *w.k.get_ref();
        let labels = LabelSpace::new(k).map_err(|e| ConfigError::at(w.k.span(), e.to_string()))?;
        let p_y = distribution("p_y", w.p_y.get_ref(), Some(w.p_y.span()), k)?;
        let p_u = distribution("p_u", p_u, span, k)?;
        let signal = match w.signal.get_ref() {
            SignalSpec::Named(SignalName::Identity) => ConditionalTable::identity(k),
            &SignalSpec::Accuracy(a) => {
                if !(0.0..=1.0).contains(&a) {
                    return Err(ConfigError::at(
                        w.signal.span(),
                        format!("signal accuracy {a} is outside [0, 1]"),
                    ));
                }
                ConditionalTable::symmetric(k, a)
                    .map_err(|e| ConfigError::at(w.signal.span(), e.to_string()))?
            }
            SignalSpec::Rows(rows) => {
                if rows.len() != k {
                    return Err(ConfigError::at(
                        w.signal.span(),
                        format!("signal has {} rows, expected k = {k}", rows.len()),
                    ));
                }
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(y, r)| {
                        check_probs(&format!("signal row {y}"), r, k).and_then(|()| {
                            Distribution::new(r.clone()).map_err(|e| format!("signal row {y}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| ConfigError::at(w.signal.span(), m))?;
                ConditionalTable::new(rows)
                    .map_err(|e| ConfigError::at(w.signal.span(), e.to_string()))?
            }
        };
        WorldDistribution::new(labels, p_y, p_u, signal)
            .map_err(|e| ConfigError::at(w.signal.span(), e.to_string()))
    }

    pub fn roster(&self) -> Result<AgentRoster, ConfigError> {
        let r = &self.roster;
        let n = *r.n_agents.get_ref();
        let informed: Vec<usize> = match (&r.informed, &r.informed_fraction) {
            (Some(list), None) => {
                if let Some(&bad) = list.get_ref().iter().find(|&&a| a >= n) {
                    return Err(ConfigError::at(
                        list.span(),
                        format!("informed agent {bad} is out of range for {n} agents"),
                    ));
                }
                list.get_ref().clone()
            }
            (None, Some(frac)) => {
                let f = *frac.get_ref();
                if !(0.0..=1.0).contains(&f) {
                    return Err(ConfigError::at(
                        frac.span(),
                        format!("informed_fraction {f} is outside [0, 1]"),
                    ));
                }
                (0..(f * n as f64).round() as usize).collect()
            }
            _ => {
                return Err(ConfigError::at(
                    r.n_agents.span(),
                    "roster needs exactly one of `informed` or `informed_fraction`",
                ))
            }
        };
        AgentRoster::new(n, informed).map_err(|e| ConfigError::at(r.n_agents.span(), e.to_string()))
    }

    /// Assignment for `n_items` items. Random assignments come from the
    /// assignment substream of the config seed.
    pub fn assignment_for(
        &self,
        n_agents: usize,
        n_items: usize,
        seed: u64,
    ) -> Result<Assignment, ConfigError> {
        let a = &self.assignment;
        let span = a.n_items.span();
        let result = match &a.labels_per_item {
            None => Assignment::complete(n_agents, n_items),
            Some(lpi) => {
                let mut rng = substream(seed, StreamTag::Assignment, n_items as u64);
                make_assignment(n_agents, n_items, *lpi.get_ref(), &mut rng)
            }
        };
        result.map_err(|e| ConfigError::at(span, e.to_string()))
    }

    pub fn profile(&self, roster: &AgentRoster) -> Result<StrategyProfile, ConfigError> {
        let p = &self.profile;
        match &p.per_agent {
            Some(list) => {
                let per_agent = list.get_ref().iter().map(|&s| s.into()).collect();
                StrategyProfile::new(roster, per_agent)
                    .map_err(|e| ConfigError::at(list.span(), e.to_string()))
            }
            None => StrategyProfile::type_symmetric(roster, p.informed.into(), p.uninformed.into())
                .map_err(|e| ConfigError::plain(format!("profile: {e}"))),
        }
    }

    pub fn mechanism(&self) -> Result<MechanismSpec, ConfigError> {
        let m = &self.mechanism;
        for (name, value) in m.get_ref().cuts() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::at(
                    m.span(),
                    format!("mechanism {name} {value} is outside [0, 1]"),
                ));
            }
        }
        Ok(m.get_ref().to_spec())
    }

    /// Resolves everything at `n_items` items with the given seed.
    pub fn scenario_at(&self, n_items: usize, seed: u64) -> Result<Scenario, ConfigError> {
        self.scenario_with(self.world()?, n_items, seed)
    }

    pub fn scenario_with(
        &self,
        world: WorldDistribution,
        n_items: usize,
        seed: u64,
    ) -> Result<Scenario, ConfigError> {
        let roster = self.roster()?;
        let assignment = self.assignment_for(roster.n_agents(), n_items, seed)?;
        let profile = self.profile(&roster)?;
        let mechanism = self.mechanism()?;
        let game = GameConfig::new(world, roster, assignment, self.prejudice_mode.into())
            .map_err(|e| ConfigError::plain(e.to_string()))?;
        Ok(Scenario {
            game,
            profile,
            mechanism,
        })
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario, ConfigError> {
        self.scenario_at(*self.assignment.n_items.get_ref(), seed)
    }
}

fn check_probs(name: &str, probs: &[f64], k: usize) -> Result<(), String> {
    if probs.len() != k {
        return Err(format!(
            "{name} has {} entries, expected k = {k}",
            probs.len()
        ));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(format!("{name}[{i}] = {p} is not a probability"));
    }
    Ok(())
}

fn distribution(
    name: &str,
    probs: &[f64],
    span: Option<Range<usize>>,
    k: usize,
) -> Result<Distribution, ConfigError> {
    let err = |message: String| ConfigError {
        message,
        span: span.clone(),
    };
    check_probs(name, probs, k).map_err(err)?;
    Distribution::new(probs.to_vec()).map_err(|e| err(format!("{name}: {e}")))
}
