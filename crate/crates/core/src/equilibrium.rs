//! Payoff estimation and equilibrium checks.
//!
//! An agent's payoff is the probability that the mechanism identifies it.
//! Payoffs are estimated by Monte Carlo, and every comparison between
//! strategies reuses the same world streams for each candidate (common random
//! numbers), so differences reflect the strategy change rather than luck.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::game::{
    AgentRoster, AgentType, Assignment, GameConfig, PrejudiceMode, Strategy, StrategyProfile,
};
use crate::mechanisms::{play_round, AnchorRequest, Mechanism, MechanismError};
use crate::probcore::{
    substream, ConditionalTable, Distribution, LabelSpace, ProbError, StreamTag, WorldDistribution,
};
use crate::stats::{bernoulli_std_err, chi_square_homogeneity};
use crate::{trials, AgentId, Label};

pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const MIN_PAYOFF_TRIALS: u64 = 100;
/// Mass moved between the two most probable labels to build a prior that
/// differs from a given prejudice law.
pub const PERTURBATION_MASS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EquilibriumError {
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Probability(#[from] ProbError),
    #[error("payoff estimates need at least {MIN_PAYOFF_TRIALS} trials, got {0}")]
    TooFewTrials(u64),
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("the roster has no informed agent")]
    NoInformedAgent,
    #[error("mechanism `{0}` reads anchors; the experiment is defined for report-only mechanisms")]
    AnchoredMechanism(alloc::string::String),
    #[error("mechanism `{0}` does not use gold labels")]
    NotGoldMechanism(alloc::string::String),
    #[error("strategy {strategy:?} is not available to agent {agent}")]
    Unavailable { agent: AgentId, strategy: Strategy },
}

impl From<crate::game::GameError> for EquilibriumError {
    fn from(e: crate::game::GameError) -> Self {
        EquilibriumError::Mechanism(e.into())
    }
}

/// Estimated probability that an agent is identified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffEstimate {
    pub value: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl PayoffEstimate {
    fn from_hits(hits: u64, trials: u64) -> Self {
        let value = hits as f64 / trials as f64;
        Self {
            value,
            std_err: bernoulli_std_err(value, trials),
            trials,
        }
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_std_err(&self, other: &PayoffEstimate) -> f64 {
        libm::sqrt(self.std_err * self.std_err + other.std_err * other.std_err)
    }
}

fn check_trials(trials: u64) -> Result<(), EquilibriumError> {
    if trials < MIN_PAYOFF_TRIALS {
        return Err(EquilibriumError::TooFewTrials(trials));
    }
    Ok(())
}

/// Payoff of `focal` under `profile` with each of its strategies replaced by
/// the candidates in turn. Trial `t` of every candidate shares one world.
pub fn payoff_table<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    mechanism: &M,
    focal: AgentId,
    candidates: &[Strategy],
    trials: u64,
    seed: u64,
) -> Result<Vec<(Strategy, PayoffEstimate)>, EquilibriumError> {
    check_trials(trials)?;
    let ty = cfg.roster().agent_type(focal);
    if let Some(&strategy) = candidates
        .iter()
        .find(|s| !Strategy::available(ty).contains(s))
    {
        return Err(EquilibriumError::Unavailable {
            agent: focal,
            strategy,
        });
    }
    let profiles: Vec<StrategyProfile> = candidates
        .iter()
        .map(|&s| profile.with_agent(focal, s))
        .collect();
    for p in &profiles {
        p.validate(cfg.roster())?;
    }
    let per_trial = trials::map_indexed(trials, |t| {
        profiles
            .iter()
            .map(|p| {
                play_round(mechanism, cfg, p, seed, t).map(|played| played.outcome.contains(focal))
            })
            .collect::<Result<Vec<bool>, _>>()
    });
    let mut hits = alloc::vec![0u64; candidates.len()];
    for row in per_trial {
        for (h, hit) in hits.iter_mut().zip(row?) {
            *h += u64::from(hit);
        }
    }
    Ok(candidates
        .iter()
        .zip(hits)
        .map(|(&s, h)| (s, PayoffEstimate::from_hits(h, trials)))
        .collect())
}

/// Probability that `focal` is identified when everyone plays `profile`.
pub fn estimate_payoff<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    mechanism: &M,
    focal: AgentId,
    trials: u64,
    seed: u64,
) -> Result<PayoffEstimate, EquilibriumError> {
    let current = profile.strategy(focal);
    Ok(payoff_table(cfg, profile, mechanism, focal, &[current], trials, seed)?[0].1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub current: Strategy,
    pub best: Strategy,
    pub table: Vec<(Strategy, PayoffEstimate)>,
}

impl BestResponse {
    pub fn payoff(&self, strategy: Strategy) -> Option<PayoffEstimate> {
        self.table
            .iter()
            .find(|(s, _)| *s == strategy)
            .map(|(_, p)| *p)
    }

    /// Whether every candidate is within `sigmas` combined standard errors of
    /// every other.
    pub fn is_flat(&self, sigmas: f64) -> bool {
        self.table.iter().all(|(_, a)| {
            self.table
                .iter()
                .all(|(_, b)| (a.value - b.value).abs() <= sigmas * a.combined_std_err(b))
        })
    }
}

/// The payoff-maximizing strategy for `agent` against the rest of `profile`.
/// Only a strictly higher estimate displaces the current strategy.
pub fn best_response<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    mechanism: &M,
    agent: AgentId,
    trials: u64,
    seed: u64,
) -> Result<BestResponse, EquilibriumError> {
    let current = profile.strategy(agent);
    let candidates = Strategy::available(cfg.roster().agent_type(agent));
    let table = payoff_table(cfg, profile, mechanism, agent, candidates, trials, seed)?;
    let current_value = table
        .iter()
        .find(|(s, _)| *s == current)
        .map_or(f64::NEG_INFINITY, |(_, p)| p.value);
    let mut best = current;
    let mut best_value = current_value;
    for &(s, p) in &table {
        if p.value > best_value {
            best = s;
            best_value = p.value;
        }
    }
    Ok(BestResponse {
        current,
        best,
        table,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub agent_type: AgentType,
    pub agent: AgentId,
    pub deviation: Strategy,
    pub baseline: PayoffEstimate,
    pub deviated: PayoffEstimate,
    /// `deviated.value - baseline.value`.
    pub gain: f64,
    /// Combined standard error of the two estimates.
    pub std_err: f64,
}

impl DeviationReport {
    fn new(
        agent_type: AgentType,
        agent: AgentId,
        deviation: Strategy,
        baseline: PayoffEstimate,
        deviated: PayoffEstimate,
    ) -> Self {
        Self {
            agent_type,
            agent,
            deviation,
            baseline,
            deviated,
            gain: deviated.value - baseline.value,
            std_err: baseline.combined_std_err(&deviated),
        }
    }

    /// Gain no larger than `epsilon` plus two standard errors.
    pub fn within(&self, epsilon: f64) -> bool {
        self.gain <= epsilon + 2.0 * self.std_err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumVerdict {
    pub profile: StrategyProfile,
    pub epsilon: f64,
    pub deviations: Vec<DeviationReport>,
    pub is_epsilon_equilibrium: bool,
}

impl EquilibriumVerdict {
    pub fn max_gain(&self) -> Option<f64> {
        self.deviations.iter().map(|d| d.gain).reduce(f64::max)
    }

    /// Every deviation's payoff is within `sigmas` standard errors of the
    /// baseline, i.e. the representative agents are indifferent.
    pub fn is_indifferent(&self, sigmas: f64) -> bool {
        self.deviations
            .iter()
            .all(|d| d.gain.abs() <= sigmas * d.std_err)
    }
}

/// Tests every unilateral pure deviation of one representative agent per type.
pub fn verify_equilibrium<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    mechanism: &M,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<EquilibriumVerdict, EquilibriumError> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(EquilibriumError::NonPositiveEpsilon(epsilon));
    }
    profile.validate(cfg.roster())?;
    let mut deviations = Vec::new();
    for ty in [AgentType::Informed, AgentType::Uninformed] {
        let Some(agent) = cfg.roster().representative(ty) else {
            continue;
        };
        let current = profile.strategy(agent);
        let mut candidates = alloc::vec![current];
        candidates.extend(
            Strategy::available(ty)
                .iter()
                .copied()
                .filter(|&s| s != current),
        );
        let table = payoff_table(cfg, profile, mechanism, agent, &candidates, trials, seed)?;
        let baseline = table[0].1;
        for &(s, deviated) in &table[1..] {
            deviations.push(DeviationReport::new(ty, agent, s, baseline, deviated));
        }
    }
    let is_epsilon_equilibrium = deviations.iter().all(|d| d.within(epsilon));
    Ok(EquilibriumVerdict {
        profile: profile.clone(),
        epsilon,
        deviations,
        is_epsilon_equilibrium,
    })
}

/// Type-symmetric opponent profiles: informed agents in {Truthful,
/// Prejudiced, Randomise} times uninformed agents in {Prejudiced, Randomise}.
pub fn opponent_grid(roster: &AgentRoster) -> Vec<StrategyProfile> {
    let mut grid = Vec::new();
    for &informed in Strategy::available(AgentType::Informed) {
        for &uninformed in Strategy::available(AgentType::Uninformed) {
            if let Ok(p) = StrategyProfile::type_symmetric(roster, informed, uninformed) {
                if !grid.contains(&p) {
                    grid.push(p);
                }
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow {
    pub opponents: StrategyProfile,
    pub truthful: PayoffEstimate,
    /// Deviations from Truthful to Prejudiced and to Randomise. A gain here
    /// is the advantage of the alternative over Truthful.
    pub alternatives: Vec<DeviationReport>,
}

impl DominanceRow {
    /// Truthful is at least as good as each alternative up to two standard
    /// errors of the difference.
    pub fn truthful_weakly_best(&self) -> bool {
        self.alternatives.iter().all(|d| d.gain <= 2.0 * d.std_err)
    }

    /// Truthful payoff minus the best alternative.
    pub fn margin(&self) -> f64 {
        -self
            .alternatives
            .iter()
            .map(|d| d.gain)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Compares Truthful with the other strategies of a focal informed agent
/// against each opponent profile in `grid`.
pub fn check_dominance_truthful<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    mechanism: &M,
    grid: &[StrategyProfile],
    trials: u64,
    seed: u64,
) -> Result<Vec<DominanceRow>, EquilibriumError> {
    if !matches!(mechanism.anchors(), AnchorRequest::Gold(_)) {
        return Err(EquilibriumError::NotGoldMechanism(mechanism.name().into()));
    }
    let focal = cfg
        .roster()
        .representative(AgentType::Informed)
        .ok_or(EquilibriumError::NoInformedAgent)?;
    let candidates = [
        Strategy::Truthful,
        Strategy::Prejudiced,
        Strategy::Randomise,
    ];
    grid.iter()
        .map(|opponents| {
            let table = payoff_table(cfg, opponents, mechanism, focal, &candidates, trials, seed)?;
            let truthful = table[0].1;
            Ok(DominanceRow {
                opponents: opponents.clone(),
                truthful,
                alternatives: table[1..]
                    .iter()
                    .map(|&(s, p)| DeviationReport::new(AgentType::Informed, focal, s, truthful, p))
                    .collect(),
            })
        })
        .collect()
}

/// Moves up to `mass` of probability from the most probable label to the
/// second most probable one (ties resolved towards lower labels).
pub fn perturb_marginal(base: &Distribution, mass: f64) -> Result<Distribution, ProbError> {
    let mut order: Vec<Label> = (0..base.len()).collect();
    order.sort_by(|&a, &b| base.prob(b).total_cmp(&base.prob(a)).then(a.cmp(&b)));
    let (top, second) = (order[0], order[1]);
    let moved = mass.min(base.prob(top));
    let mut probs = base.probs().to_vec();
    probs[top] -= moved;
    probs[second] += moved;
    Distribution::new(probs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpossibilityReport {
    /// Fraction of trials where everyone was identified when everyone is
    /// informed and truthful.
    pub success_rate_scenario1: f64,
    /// Fraction of trials where no one was identified when everyone plays the
    /// shared prejudice.
    pub success_rate_scenario2: f64,
    pub combined: f64,
    pub pooled_std_err: f64,
    /// Chi-square homogeneity test of per-item report patterns between the
    /// two scenarios.
    pub distribution_test_pvalue: f64,
    pub chi_square: f64,
    pub df: usize,
    pub trials: u64,
}

/// The two games that a report-only mechanism cannot tell apart.
#[derive(Debug, Clone)]
pub struct ScenarioPair {
    pub truthful: (GameConfig, StrategyProfile),
    pub prejudiced: (GameConfig, StrategyProfile),
}

/// Scenario 1: every agent informed and truthful with a noiseless signal,
/// truth drawn from `base`. Scenario 2: every agent plays a shared prejudice
/// drawn from `base`, with the true prior perturbed away from it.
pub fn scenario_pair(
    k: usize,
    base: &Distribution,
    n_agents: usize,
    n_items: usize,
) -> Result<ScenarioPair, EquilibriumError> {
    let labels = LabelSpace::new(k)?;
    if base.len() != k {
        return Err(ProbError::DimensionMismatch {
            expected: k,
            actual: base.len(),
        }
        .into());
    }
    let other = perturb_marginal(base, PERTURBATION_MASS)?;
    let roster = AgentRoster::with_informed_prefix(n_agents, n_agents)?;
    let assignment = Assignment::complete(n_agents, n_items)?;
    let build = |p_y: &Distribution,
                 p_u: &Distribution,
                 strategy: Strategy|
     -> Result<_, EquilibriumError> {
        let world = WorldDistribution::new(
            labels,
            p_y.clone(),
            p_u.clone(),
            ConditionalTable::identity(k),
        )?;
        let cfg = GameConfig::new(
            world,
            roster.clone(),
            assignment.clone(),
            PrejudiceMode::Shared,
        )?;
        let profile = StrategyProfile::type_symmetric(&roster, strategy, strategy)?;
        Ok((cfg, profile))
    };
    Ok(ScenarioPair {
        truthful: build(base, &other, Strategy::Truthful)?,
        prejudiced: build(&other, base, Strategy::Prejudiced)?,
    })
}

/// Runs both scenarios of [`scenario_pair`] `trials` times.
pub fn impossibility_demo<M: Mechanism + ?Sized>(
    k: usize,
    base: &Distribution,
    n_agents: usize,
    n_items: usize,
    mechanism: &M,
    trials: u64,
    seed: u64,
) -> Result<ImpossibilityReport, EquilibriumError> {
    if mechanism.anchors() != AnchorRequest::None {
        return Err(EquilibriumError::AnchoredMechanism(mechanism.name().into()));
    }
    if trials == 0 {
        return Err(MechanismError::NoTrials.into());
    }
    let pair = scenario_pair(k, base, n_agents, n_items)?;
    let seed_truthful = substream(seed, StreamTag::Custom(1), 0).next_u64();
    let seed_prejudiced = substream(seed, StreamTag::Custom(2), 0).next_u64();

    let run =
        |(cfg, profile): &(GameConfig, StrategyProfile), scenario_seed: u64, want_all: bool| {
            trials::map_indexed(trials, |t| {
                let played = play_round(mechanism, cfg, profile, scenario_seed, t)?;
                let n = cfg.n_agents();
                let success = if want_all {
                    played.outcome.identified.len() == n
                } else {
                    played.outcome.identified.is_empty()
                };
                let reports = played.round.reports();
                let patterns: Vec<Vec<Option<Label>>> = (0..reports.n_items())
                    .map(|j| reports.item_row(j).to_vec())
                    .collect();
                Ok::<_, MechanismError>((success, patterns))
            })
        };

    let mut counts: BTreeMap<Vec<Option<Label>>, (u64, u64)> = BTreeMap::new();
    let mut successes = [0u64; 2];
    for (idx, results) in [
        run(&pair.truthful, seed_truthful, true),
        run(&pair.prejudiced, seed_prejudiced, false),
    ]
    .into_iter()
    .enumerate()
    {
        for r in results {
            let (success, patterns) = r?;
            successes[idx] += u64::from(success);
            for p in patterns {
                let slot = counts.entry(p).or_default();
                if idx == 0 {
                    slot.0 += 1;
                } else {
                    slot.1 += 1;
                }
            }
        }
    }
    let rate1 = successes[0] as f64 / trials as f64;
    let rate2 = successes[1] as f64 / trials as f64;
    let se1 = bernoulli_std_err(rate1, trials);
    let se2 = bernoulli_std_err(rate2, trials);
    let test = chi_square_homogeneity(counts.into_values());
    Ok(ImpossibilityReport {
        success_rate_scenario1: rate1,
        success_rate_scenario2: rate2,
        combined: rate1 + rate2,
        pooled_std_err: libm::sqrt(se1 * se1 + se2 * se2),
        distribution_test_pvalue: test.p_value,
        chi_square: test.statistic,
        df: test.df,
        trials,
    })
}

/// Which of the named equilibria a profile is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProfileClass {
    /// Everyone reports the prejudice.
    Prejudice,
    /// Every informed agent is truthful and no uninformed agent is.
    Truthful,
    /// Everyone randomises.
    Randomise,
    Other,
}

pub fn classify_profile(roster: &AgentRoster, profile: &StrategyProfile) -> ProfileClass {
    let all = |s: Strategy| profile.strategies().iter().all(|&x| x == s);
    if all(Strategy::Prejudiced) {
        ProfileClass::Prejudice
    } else if roster.n_agents() > roster.informed().len()
        && roster
            .informed()
            .iter()
            .all(|&a| profile.strategy(a) == Strategy::Truthful)
        || roster.n_agents() == roster.informed().len() && all(Strategy::Truthful)
    {
        ProfileClass::Truthful
    } else if all(Strategy::Randomise) {
        ProfileClass::Randomise
    } else {
        ProfileClass::Other
    }
}

/// Each agent's strategy drawn uniformly from the ones available to it.
pub fn random_profile<R: RngCore + ?Sized>(roster: &AgentRoster, rng: &mut R) -> StrategyProfile {
    let per_agent = (0..roster.n_agents())
        .map(|a| {
            let options = Strategy::available(roster.agent_type(a));
            options[(rng.next_u64() % options.len() as u64) as usize]
        })
        .collect();
    StrategyProfile::new(roster, per_agent).expect("available strategies are valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Maximum number of sweeps over all agents.
    pub max_passes: usize,
    /// Trials per payoff comparison.
    pub trials: u64,
    /// An agent switches only when the best alternative beats its current
    /// strategy by more than this many combined standard errors.
    pub switch_sigmas: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            max_passes: 20,
            trials: 400,
            switch_sigmas: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOutcome {
    pub profile: StrategyProfile,
    /// A full pass ended without anyone switching.
    pub converged: bool,
    pub passes: usize,
    pub switches: usize,
}

/// Sequential best-response dynamics: agents in index order switch to a
/// significantly better strategy until a pass changes nothing.
pub fn best_response_dynamics<M: Mechanism + ?Sized>(
    cfg: &GameConfig,
    initial: &StrategyProfile,
    mechanism: &M,
    options: &DynamicsOptions,
    seed: u64,
) -> Result<DynamicsOutcome, EquilibriumError> {
    initial.validate(cfg.roster())?;
    let n = cfg.n_agents();
    let mut profile = initial.clone();
    let mut switches = 0;
    for pass in 0..options.max_passes {
        let mut changed = false;
        for agent in 0..n {
            let step = (pass * n + agent) as u64;
            let payoff_seed = substream(seed, StreamTag::Dynamics, step).next_u64();
            let current = profile.strategy(agent);
            let candidates = Strategy::available(cfg.roster().agent_type(agent));
            let table = payoff_table(
                cfg,
                &profile,
                mechanism,
                agent,
                candidates,
                options.trials,
                payoff_seed,
            )?;
            let now = table
                .iter()
                .find(|(s, _)| *s == current)
                .map(|(_, p)| *p)
                .expect("current is a candidate");
            let mut best: Option<(Strategy, f64)> = None;
            for &(s, p) in table.iter().filter(|(s, _)| *s != current) {
                let gain = p.value - now.value;
                if gain > options.switch_sigmas * p.combined_std_err(&now)
                    && best.is_none_or(|(_, g)| gain > g)
                {
                    best = Some((s, gain));
                }
            }
            if let Some((s, _)) = best {
                profile = profile.with_agent(agent, s);
                switches += 1;
                changed = true;
            }
        }
        if !changed {
            return Ok(DynamicsOutcome {
                profile,
                converged: true,
                passes: pass + 1,
                switches,
            });
        }
    }
    Ok(DynamicsOutcome {
        profile,
        converged: false,
        passes: options.max_passes,
        switches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::{MechanismOutcome, MechanismSpec, MechanismView};
    use alloc::vec;

    fn binary_cfg(n_agents: usize, n_informed: usize, n_items: usize, p_u: [f64; 2]) -> GameConfig {
        GameConfig::new(
            WorldDistribution::new(
                LabelSpace::new(2).unwrap(),
                Distribution::uniform(2),
                Distribution::new(p_u.to_vec()).unwrap(),
                ConditionalTable::identity(2),
            )
            .unwrap(),
            AgentRoster::with_informed_prefix(n_agents, n_informed).unwrap(),
            Assignment::complete(n_agents, n_items).unwrap(),
            PrejudiceMode::Shared,
        )
        .unwrap()
    }

    struct Everyone;
    impl Mechanism for Everyone {
        fn name(&self) -> &str {
            "everyone"
        }
        fn identify(&self, view: &MechanismView<'_>) -> Result<MechanismOutcome, MechanismError> {
            Ok(MechanismOutcome {
                identified: (0..view.reports.n_agents()).collect(),
            })
        }
    }

    #[test]
    fn trivial_mechanism_pays_everyone() {
        let cfg = binary_cfg(4, 2, 5, [0.9, 0.1]);
        let p =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let est = estimate_payoff(&cfg, &p, &Everyone, 3, 200, 0).unwrap();
        assert_eq!((est.value, est.std_err, est.trials), (1.0, 0.0, 200));
        assert_eq!(
            estimate_payoff(&cfg, &p, &Everyone, 3, 99, 0),
            Err(EquilibriumError::TooFewTrials(99))
        );
    }

    #[test]
    fn unanimous_prejudice_pays_one() {
        let cfg = binary_cfg(8, 4, 20, [0.9, 0.1]);
        let p = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Prejudiced,
            Strategy::Prejudiced,
        )
        .unwrap();
        for agent in 0..8 {
            let est =
                estimate_payoff(&cfg, &p, &MechanismSpec::agreement(), agent, 200, 1).unwrap();
            assert_eq!(est.value, 1.0);
        }
    }

    #[test]
    fn vacuous_epsilon_always_holds() {
        let cfg = binary_cfg(6, 3, 10, [0.9, 0.1]);
        let p =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Prejudiced)
                .unwrap();
        let v = verify_equilibrium(&cfg, &p, &MechanismSpec::agreement(), 1.0, 200, 4).unwrap();
        assert!(v.is_epsilon_equilibrium);
        assert_eq!(v.deviations.len(), 3);
        assert!(matches!(
            verify_equilibrium(&cfg, &p, &MechanismSpec::agreement(), 0.0, 200, 4),
            Err(EquilibriumError::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn perturbation_moves_top_mass() {
        let p = perturb_marginal(&Distribution::uniform(2), 0.2).unwrap();
        assert!((p.prob(0) - 0.3).abs() < 1e-12 && (p.prob(1) - 0.7).abs() < 1e-12);
        let q = perturb_marginal(&Distribution::new(vec![0.1, 0.6, 0.3]).unwrap(), 0.2).unwrap();
        assert!((q.prob(1) - 0.4).abs() < 1e-12 && (q.prob(2) - 0.5).abs() < 1e-12);
        let tiny = perturb_marginal(&Distribution::uniform(10), 0.2).unwrap();
        assert!(tiny.total_variation(&Distribution::uniform(10)) > 0.09);
    }

    #[test]
    fn impossibility_rejects_anchored_mechanisms() {
        let r = impossibility_demo(
            2,
            &Distribution::uniform(2),
            4,
            5,
            &MechanismSpec::gold_seeded(2),
            10,
            0,
        );
        assert!(matches!(r, Err(EquilibriumError::AnchoredMechanism(_))));
    }

    #[test]
    fn identical_reports_give_identical_outcomes() {
        // Both scenarios can produce the same unanimous matrix; a report-only
        // mechanism must then answer identically, so at most one succeeds.
        let pair = scenario_pair(2, &Distribution::uniform(2), 4, 6).unwrap();
        let reports = crate::game::Reports::from_item_rows(
            &[0usize, 1, 1, 0, 1, 0]
                .iter()
                .map(|&l| vec![Some(l); 4])
                .collect::<Vec<_>>(),
        );
        for mech in [
            MechanismSpec::agreement(),
            MechanismSpec::PairwiseAgreement { threshold: 0.8 },
        ] {
            let a = mech
                .identify(&MechanismView::reports_only(
                    &reports,
                    pair.truthful.0.assignment(),
                ))
                .unwrap();
            let b = mech
                .identify(&MechanismView::reports_only(
                    &reports,
                    pair.prejudiced.0.assignment(),
                ))
                .unwrap();
            assert_eq!(a, b);
            let s1 = a.identified.len() == 4;
            let s2 = b.identified.is_empty();
            assert!(u8::from(s1) + u8::from(s2) <= 1);
        }
    }

    #[test]
    fn scenario_worlds_are_valid() {
        let pair =
            scenario_pair(3, &Distribution::new(vec![0.5, 0.3, 0.2]).unwrap(), 5, 10).unwrap();
        for (cfg, _) in [&pair.truthful, &pair.prejudiced] {
            assert!(crate::probcore::validate_world(cfg.world(), 1e-6).all_passed());
        }
        assert_eq!(
            pair.truthful.0.world().p_y(),
            pair.prejudiced.0.world().p_u()
        );
    }

    #[test]
    fn profile_classes() {
        let roster = AgentRoster::with_informed_prefix(4, 2).unwrap();
        let sym = |i, u| StrategyProfile::type_symmetric(&roster, i, u).unwrap();
        assert_eq!(
            classify_profile(&roster, &sym(Strategy::Prejudiced, Strategy::Prejudiced)),
            ProfileClass::Prejudice
        );
        assert_eq!(
            classify_profile(&roster, &sym(Strategy::Truthful, Strategy::Randomise)),
            ProfileClass::Truthful
        );
        assert_eq!(
            classify_profile(&roster, &sym(Strategy::Truthful, Strategy::Prejudiced)),
            ProfileClass::Truthful
        );
        assert_eq!(
            classify_profile(&roster, &sym(Strategy::Randomise, Strategy::Randomise)),
            ProfileClass::Randomise
        );
        assert_eq!(
            classify_profile(&roster, &sym(Strategy::Prejudiced, Strategy::Randomise)),
            ProfileClass::Other
        );
    }

    #[test]
    fn zero_pass_dynamics_keep_initial_profile() {
        let cfg = binary_cfg(4, 2, 10, [0.9, 0.1]);
        let init = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Randomise,
            Strategy::Prejudiced,
        )
        .unwrap();
        let opts = DynamicsOptions {
            max_passes: 0,
            ..DynamicsOptions::default()
        };
        let out =
            best_response_dynamics(&cfg, &init, &MechanismSpec::agreement(), &opts, 0).unwrap();
        assert_eq!(out.profile, init);
        assert!(!out.converged);
    }

    #[test]
    fn opponent_grid_has_six_profiles() {
        let roster = AgentRoster::with_informed_prefix(4, 2).unwrap();
        assert_eq!(opponent_grid(&roster).len(), 6);
    }
}
