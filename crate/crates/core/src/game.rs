//! The labelling game: who labels what, which strategies agents play, and
//! how a round of reports is generated from a world.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::probcore::WorldDistribution;
use crate::{AgentId, ItemId, Label};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error("roster needs at least one agent")]
    EmptyRoster,
    #[error("agent {agent} is out of range for a roster of {n_agents}")]
    AgentOutOfRange { agent: AgentId, n_agents: usize },
    #[error("item {item} is out of range for {n_items} items")]
    ItemOutOfRange { item: ItemId, n_items: usize },
    #[error("item {0} is not assigned to any agent")]
    UnassignedItem(ItemId),
    #[error("agent {0} has no items")]
    IdleAgent(AgentId),
    #[error("need at least one item")]
    NoItems,
    #[error("agent {0} is uninformed and cannot play Truthful")]
    TruthfulUninformed(AgentId),
    #[error("profile covers {actual} agents, roster has {expected}")]
    ProfileSize { expected: usize, actual: usize },
    #[error("assignment covers {actual} agents, roster has {expected}")]
    AssignmentSize { expected: usize, actual: usize },
    #[error("cannot assign {labels_per_item} labels per item with {n_agents} agents and {n_items} items")]
    InfeasibleAssignment {
        n_agents: usize,
        n_items: usize,
        labels_per_item: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentType {
    Informed,
    Uninformed,
}

impl AgentType {
    pub fn name(self) -> &'static str {
        match self {
            AgentType::Informed => "informed",
            AgentType::Uninformed => "uninformed",
        }
    }
}

/// The agents of a game and which of them receive the informative signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRoster {
    n_agents: usize,
    informed: BTreeSet<AgentId>,
}

impl AgentRoster {
    pub fn new(
        n_agents: usize,
        informed: impl IntoIterator<Item = AgentId>,
    ) -> Result<Self, GameError> {
        if n_agents == 0 {
            return Err(GameError::EmptyRoster);
        }
        let informed: BTreeSet<_> = informed.into_iter().collect();
        if let Some(&agent) = informed.iter().find(|&&a| a >= n_agents) {
            return Err(GameError::AgentOutOfRange { agent, n_agents });
        }
        Ok(Self { n_agents, informed })
    }

    /// Agents `0..n_informed` are informed, the rest are not.
    pub fn with_informed_prefix(n_agents: usize, n_informed: usize) -> Result<Self, GameError> {
        Self::new(n_agents, 0..n_informed.min(n_agents))
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn informed(&self) -> &BTreeSet<AgentId> {
        &self.informed
    }

    pub fn is_informed(&self, agent: AgentId) -> bool {
        self.informed.contains(&agent)
    }

    pub fn agent_type(&self, agent: AgentId) -> AgentType {
        if self.is_informed(agent) {
            AgentType::Informed
        } else {
            AgentType::Uninformed
        }
    }

    pub fn agents_of(&self, ty: AgentType) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.n_agents).filter(move |&a| self.agent_type(a) == ty)
    }

    /// Lowest-indexed agent of the given type, if any.
    pub fn representative(&self, ty: AgentType) -> Option<AgentId> {
        self.agents_of(ty).next()
    }
}

/// Which agent labels which item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    n_items: usize,
    items_of_agent: Vec<Vec<ItemId>>,
    agents_of_item: Vec<Vec<AgentId>>,
}

impl Assignment {
    /// `incidence[a]` lists the items of agent `a`; duplicates are dropped.
    pub fn new(n_items: usize, incidence: Vec<Vec<ItemId>>) -> Result<Self, GameError> {
        if incidence.is_empty() {
            return Err(GameError::EmptyRoster);
        }
        if n_items == 0 {
            return Err(GameError::NoItems);
        }
        let mut agents_of_item = alloc::vec![Vec::new(); n_items];
        let mut items_of_agent = Vec::with_capacity(incidence.len());
        for (agent, items) in incidence.into_iter().enumerate() {
            let items: BTreeSet<_> = items.into_iter().collect();
            if items.is_empty() {
                return Err(GameError::IdleAgent(agent));
            }
            for &item in &items {
                if item >= n_items {
                    return Err(GameError::ItemOutOfRange { item, n_items });
                }
                agents_of_item[item].push(agent);
            }
            items_of_agent.push(items.into_iter().collect());
        }
        if let Some(item) = agents_of_item.iter().position(Vec::is_empty) {
            return Err(GameError::UnassignedItem(item));
        }
        Ok(Self {
            n_items,
            items_of_agent,
            agents_of_item,
        })
    }

    /// Every agent labels every item.
    pub fn complete(n_agents: usize, n_items: usize) -> Result<Self, GameError> {
        Self::new(n_items, alloc::vec![(0..n_items).collect(); n_agents])
    }

    pub fn n_agents(&self) -> usize {
        self.items_of_agent.len()
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn items_of(&self, agent: AgentId) -> &[ItemId] {
        &self.items_of_agent[agent]
    }

    pub fn agents_on(&self, item: ItemId) -> &[AgentId] {
        &self.agents_of_item[item]
    }

    pub fn contains(&self, agent: AgentId, item: ItemId) -> bool {
        self.items_of_agent[agent].binary_search(&item).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        self.items_of_agent
            .iter()
            .all(|items| items.len() == self.n_items)
    }

    /// Whether the graph joining agents that share an item is connected.
    pub fn overlap_connected(&self) -> bool {
        let n = self.n_agents();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for agents in &self.agents_of_item {
            if let Some((&first, rest)) = agents.split_first() {
                for &other in rest {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, other));
                    parent[a] = b;
                }
            }
        }
        let root = find(&mut parent, 0);
        (1..n).all(|a| find(&mut parent, a) == root)
    }
}

/// Builds an assignment with `labels_per_item` distinct agents per item whose
/// overlap graph is connected.
///
/// The first items form a chain of windows over the agents, each window
/// sharing one agent with the next, which covers and connects everyone.
/// The remaining items go to uniformly drawn subsets of agents.
pub fn make_assignment<R: RngCore + ?Sized>(
    n_agents: usize,
    n_items: usize,
    labels_per_item: usize,
    rng: &mut R,
) -> Result<Assignment, GameError> {
    let infeasible = GameError::InfeasibleAssignment {
        n_agents,
        n_items,
        labels_per_item,
    };
    if n_agents == 0 || n_items == 0 || labels_per_item == 0 || labels_per_item > n_agents {
        return Err(infeasible);
    }
    if labels_per_item == n_agents {
        return Assignment::complete(n_agents, n_items);
    }
    if labels_per_item == 1 {
        // Singleton items never overlap, so only a lone agent is connected.
        return if n_agents == 1 {
            Assignment::complete(1, n_items)
        } else {
            Err(infeasible)
        };
    }
    let stride = labels_per_item - 1;
    let chain_len = (n_agents - 1).div_ceil(stride);
    if chain_len > n_items {
        return Err(infeasible);
    }
    let mut incidence = alloc::vec![Vec::new(); n_agents];
    for item in 0..chain_len {
        let start = item * stride;
        for offset in 0..labels_per_item {
            incidence[(start + offset) % n_agents].push(item);
        }
    }
    let mut pool: Vec<AgentId> = (0..n_agents).collect();
    for item in chain_len..n_items {
        // Partial Fisher-Yates: the first labels_per_item slots become the pick.
        for slot in 0..labels_per_item {
            let remaining = (n_agents - slot) as u64;
            let pick = slot + (rng.next_u64() % remaining) as usize;
            pool.swap(slot, pick);
            incidence[pool[slot]].push(item);
        }
    }
    Assignment::new(n_items, incidence)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Report the informative signal.
    Truthful,
    /// Report the prejudice draw.
    Prejudiced,
    /// Report a fresh draw from the label prior.
    Randomise,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Truthful,
        Strategy::Prejudiced,
        Strategy::Randomise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Truthful => "truthful",
            Strategy::Prejudiced => "prejudiced",
            Strategy::Randomise => "randomise",
        }
    }

    /// Strategies an agent of the given type may play.
    pub fn available(ty: AgentType) -> &'static [Strategy] {
        match ty {
            AgentType::Informed => &Strategy::ALL,
            AgentType::Uninformed => &[Strategy::Prejudiced, Strategy::Randomise],
        }
    }
}

/// One pure strategy per agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyProfile {
    per_agent: Vec<Strategy>,
}

impl StrategyProfile {
    pub fn new(roster: &AgentRoster, per_agent: Vec<Strategy>) -> Result<Self, GameError> {
        let profile = Self { per_agent };
        profile.validate(roster)?;
        Ok(profile)
    }

    /// Every informed agent plays `informed`, every uninformed one `uninformed`.
    pub fn type_symmetric(
        roster: &AgentRoster,
        informed: Strategy,
        uninformed: Strategy,
    ) -> Result<Self, GameError> {
        let per_agent = (0..roster.n_agents())
            .map(|a| {
                if roster.is_informed(a) {
                    informed
                } else {
                    uninformed
                }
            })
            .collect();
        Self::new(roster, per_agent)
    }

    pub fn strategy(&self, agent: AgentId) -> Strategy {
        self.per_agent[agent]
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.per_agent
    }

    pub fn len(&self) -> usize {
        self.per_agent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_agent.is_empty()
    }

    /// Copy with one agent switched. The result is not re-validated.
    pub fn with_agent(&self, agent: AgentId, strategy: Strategy) -> Self {
        let mut per_agent = self.per_agent.clone();
        per_agent[agent] = strategy;
        Self { per_agent }
    }

    pub fn validate(&self, roster: &AgentRoster) -> Result<(), GameError> {
        if self.per_agent.len() != roster.n_agents() {
            return Err(GameError::ProfileSize {
                expected: roster.n_agents(),
                actual: self.per_agent.len(),
            });
        }
        match self
            .per_agent
            .iter()
            .enumerate()
            .find(|&(a, &s)| s == Strategy::Truthful && !roster.is_informed(a))
        {
            Some((a, _)) => Err(GameError::TruthfulUninformed(a)),
            None => Ok(()),
        }
    }

    /// Whether every agent of each type plays the same strategy.
    pub fn is_type_symmetric(&self, roster: &AgentRoster) -> bool {
        [AgentType::Informed, AgentType::Uninformed]
            .iter()
            .all(|&ty| {
                let mut it = roster.agents_of(ty).map(|a| self.per_agent[a]);
                match it.next() {
                    Some(first) => it.all(|s| s == first),
                    None => true,
                }
            })
    }
}

/// `A_{I,T}`: informed agents that play Truthful.
pub fn truthful_informed_set(roster: &AgentRoster, profile: &StrategyProfile) -> BTreeSet<AgentId> {
    roster
        .informed()
        .iter()
        .copied()
        .filter(|&a| profile.strategy(a) == Strategy::Truthful)
        .collect()
}

/// How prejudice draws are shared among the agents on an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrejudiceMode {
    /// One draw per item, seen by every agent on it.
    #[default]
    Shared,
    /// An independent draw per agent and item.
    Iid,
}

/// The labels agents submitted, laid out item by item.
///
/// This is the only part of a round a mechanism without anchors may see.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Reports {
    n_agents: usize,
    n_items: usize,
    cells: Vec<Option<Label>>,
}

impl Reports {
    pub fn new(n_agents: usize, n_items: usize, cells: Vec<Option<Label>>) -> Self {
        assert_eq!(cells.len(), n_agents * n_items, "report grid size");
        Self {
            n_agents,
            n_items,
            cells,
        }
    }

    /// Builds reports from `rows[item][agent]`.
    pub fn from_item_rows(rows: &[Vec<Option<Label>>]) -> Self {
        let n_items = rows.len();
        let n_agents = rows.first().map_or(0, Vec::len);
        let cells = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(n_agents, n_items, cells)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn get(&self, agent: AgentId, item: ItemId) -> Option<Label> {
        self.cells[item * self.n_agents + agent]
    }

    /// Reports on one item, indexed by agent.
    pub fn item_row(&self, item: ItemId) -> &[Option<Label>] {
        &self.cells[item * self.n_agents..(item + 1) * self.n_agents]
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    /// Applies a label permutation to every report.
    pub fn relabel(&self, perm: &[Label]) -> Self {
        Self {
            n_agents: self.n_agents,
            n_items: self.n_items,
            cells: self.cells.iter().map(|c| c.map(|l| perm[l])).collect(),
        }
    }

    /// Largest label present plus one, or zero without reports.
    pub fn label_bound(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .map(|&l| l + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrejudiceDraws {
    /// `u_j` per item.
    Shared(Vec<Label>),
    /// `u_{a,j}` on the item-major grid, `None` where the agent is not assigned.
    Iid(Vec<Option<Label>>),
}

/// Everything that happened in one game over `n_items` items.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMatrix {
    reports: Reports,
    truth: Vec<Label>,
    prejudice: PrejudiceDraws,
    signals: Vec<Option<Label>>,
}

impl ReportMatrix {
    pub fn reports(&self) -> &Reports {
        &self.reports
    }

    pub fn truth(&self) -> &[Label] {
        &self.truth
    }

    pub fn prejudice(&self) -> &PrejudiceDraws {
        &self.prejudice
    }

    /// The prejudice draw agent `agent` saw on `item`.
    pub fn prejudice_of(&self, agent: AgentId, item: ItemId) -> Option<Label> {
        match &self.prejudice {
            PrejudiceDraws::Shared(u) => Some(u[item]),
            PrejudiceDraws::Iid(grid) => grid[item * self.reports.n_agents + agent],
        }
    }

    /// Informative signal `i_{a,j}`, present for informed agents on their items.
    pub fn signal(&self, agent: AgentId, item: ItemId) -> Option<Label> {
        self.signals[item * self.reports.n_agents + agent]
    }
}

/// The static description of a game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    world: WorldDistribution,
    roster: AgentRoster,
    assignment: Assignment,
    prejudice_mode: PrejudiceMode,
}

impl GameConfig {
    pub fn new(
        world: WorldDistribution,
        roster: AgentRoster,
        assignment: Assignment,
        prejudice_mode: PrejudiceMode,
    ) -> Result<Self, GameError> {
        if assignment.n_agents() != roster.n_agents() {
            return Err(GameError::AssignmentSize {
                expected: roster.n_agents(),
                actual: assignment.n_agents(),
            });
        }
        Ok(Self {
            world,
            roster,
            assignment,
            prejudice_mode,
        })
    }

    pub fn world(&self) -> &WorldDistribution {
        &self.world
    }

    pub fn roster(&self) -> &AgentRoster {
        &self.roster
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn prejudice_mode(&self) -> PrejudiceMode {
        self.prejudice_mode
    }

    pub fn n_agents(&self) -> usize {
        self.roster.n_agents()
    }

    pub fn n_items(&self) -> usize {
        self.assignment.n_items()
    }
}

/// Plays one game: draws truths, prejudices and signals for every item and
/// records each assigned agent's report under `profile`.
///
/// The stream is consumed in a fixed order independent of the profile (two
/// draws per item, three per assigned agent and item), so runs that share a
/// stream but differ in strategies see the same world.
pub fn generate_reports<R: RngCore + ?Sized>(
    cfg: &GameConfig,
    profile: &StrategyProfile,
    rng: &mut R,
) -> Result<ReportMatrix, GameError> {
    profile.validate(&cfg.roster)?;
    let world = &cfg.world;
    let n_agents = cfg.n_agents();
    let n_items = cfg.n_items();
    let mut reports = alloc::vec![None; n_agents * n_items];
    let mut signals = alloc::vec![None; n_agents * n_items];
    let mut truth = Vec::with_capacity(n_items);
    let mut shared = Vec::with_capacity(n_items);
    let mut iid = match cfg.prejudice_mode {
        PrejudiceMode::Shared => Vec::new(),
        PrejudiceMode::Iid => alloc::vec![None; n_agents * n_items],
    };

    for item in 0..n_items {
        let y = world.p_y().sample(rng);
        let u_shared = world.p_u().sample(rng);
        truth.push(y);
        shared.push(u_shared);
        let signal_law = world.p_i_given_y().row(y);
        for &agent in cfg.assignment.agents_on(item) {
            let cell = item * n_agents + agent;
            let u_own = world.p_u().sample(rng);
            let signal = signal_law.sample(rng);
            let fresh = world.p_y().sample(rng);
            let u = match cfg.prejudice_mode {
                PrejudiceMode::Shared => u_shared,
                PrejudiceMode::Iid => {
                    iid[cell] = Some(u_own);
                    u_own
                }
            };
            if cfg.roster.is_informed(agent) {
                signals[cell] = Some(signal);
            }
            reports[cell] = Some(match profile.strategy(agent) {
                Strategy::Truthful => signal,
                Strategy::Prejudiced => u,
                Strategy::Randomise => fresh,
            });
        }
    }

    Ok(ReportMatrix {
        reports: Reports::new(n_agents, n_items, reports),
        truth,
        prejudice: match cfg.prejudice_mode {
            PrejudiceMode::Shared => PrejudiceDraws::Shared(shared),
            PrejudiceMode::Iid => PrejudiceDraws::Iid(iid),
        },
        signals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::{
        substream, ConditionalTable, Distribution, LabelSpace, SimRng, StreamTag,
    };
    use alloc::vec;
    use rand_core::SeedableRng;

    fn world(p_y: &[f64], p_u: &[f64], signal: ConditionalTable) -> WorldDistribution {
        WorldDistribution::new(
            LabelSpace::new(p_y.len()).unwrap(),
            Distribution::new(p_y.to_vec()).unwrap(),
            Distribution::new(p_u.to_vec()).unwrap(),
            signal,
        )
        .unwrap()
    }

    fn config(
        n_agents: usize,
        n_informed: usize,
        n_items: usize,
        mode: PrejudiceMode,
    ) -> GameConfig {
        GameConfig::new(
            world(&[0.5, 0.5], &[0.9, 0.1], ConditionalTable::identity(2)),
            AgentRoster::with_informed_prefix(n_agents, n_informed).unwrap(),
            Assignment::complete(n_agents, n_items).unwrap(),
            mode,
        )
        .unwrap()
    }

    #[test]
    fn roster_rejects_out_of_range_informed() {
        assert_eq!(
            AgentRoster::new(3, [0, 3]),
            Err(GameError::AgentOutOfRange {
                agent: 3,
                n_agents: 3
            })
        );
    }

    #[test]
    fn assignment_rejects_gaps() {
        assert_eq!(
            Assignment::new(3, vec![vec![0], vec![0, 1]]),
            Err(GameError::UnassignedItem(2))
        );
        assert_eq!(
            Assignment::new(2, vec![vec![0, 1], vec![]]),
            Err(GameError::IdleAgent(1))
        );
        assert!(matches!(
            Assignment::new(2, vec![vec![0, 2]]),
            Err(GameError::ItemOutOfRange { item: 2, .. })
        ));
    }

    #[test]
    fn uninformed_truthful_is_rejected() {
        let roster = AgentRoster::with_informed_prefix(3, 1).unwrap();
        assert_eq!(
            StrategyProfile::type_symmetric(&roster, Strategy::Truthful, Strategy::Truthful),
            Err(GameError::TruthfulUninformed(1))
        );
        let cfg = config(3, 1, 4, PrejudiceMode::Shared);
        let bad = StrategyProfile::type_symmetric(&roster, Strategy::Truthful, Strategy::Randomise)
            .unwrap()
            .with_agent(2, Strategy::Truthful);
        let mut rng = SimRng::seed_from_u64(0);
        assert_eq!(
            generate_reports(&cfg, &bad, &mut rng),
            Err(GameError::TruthfulUninformed(2))
        );
    }

    #[test]
    fn identity_signal_truthful_reports_match_truth() {
        let cfg = config(5, 5, 40, PrejudiceMode::Shared);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let m = generate_reports(&cfg, &profile, &mut SimRng::seed_from_u64(1)).unwrap();
        for item in 0..40 {
            for agent in 0..5 {
                assert_eq!(m.reports().get(agent, item), Some(m.truth()[item]));
                assert_eq!(m.signal(agent, item), Some(m.truth()[item]));
            }
        }
    }

    #[test]
    fn shared_prejudice_is_unanimous() {
        let cfg = config(6, 3, 50, PrejudiceMode::Shared);
        let profile = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Prejudiced,
            Strategy::Prejudiced,
        )
        .unwrap();
        let m = generate_reports(&cfg, &profile, &mut SimRng::seed_from_u64(2)).unwrap();
        let PrejudiceDraws::Shared(u) = m.prejudice() else {
            panic!("expected shared draws")
        };
        for (item, &label) in u.iter().enumerate() {
            assert!(m.reports().item_row(item).iter().all(|&r| r == Some(label)));
        }
    }

    #[test]
    fn iid_prejudice_agreement_rate() {
        // Two prejudiced agents agree with probability 0.9^2 + 0.1^2.
        let expected = 0.9f64 * 0.9 + 0.1 * 0.1;
        assert!((expected - 0.82).abs() < 1e-12);
        let cfg = config(2, 0, 20_000, PrejudiceMode::Iid);
        let profile = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Prejudiced,
            Strategy::Prejudiced,
        )
        .unwrap();
        let m = generate_reports(&cfg, &profile, &mut SimRng::seed_from_u64(3)).unwrap();
        let agree = (0..20_000)
            .filter(|&j| m.reports().get(0, j) == m.reports().get(1, j))
            .count() as f64
            / 20_000.0;
        // 4 sigma of a Bernoulli(0.82) mean over 20k draws is about 0.011.
        assert!((agree - expected).abs() < 0.011, "{agree}");
    }

    #[test]
    fn randomise_reports_follow_prior() {
        let mut cfg = config(1, 0, 10_000, PrejudiceMode::Shared);
        cfg.world = world(
            &[0.2, 0.3, 0.5],
            &[0.6, 0.2, 0.2],
            ConditionalTable::identity(3),
        );
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Randomise, Strategy::Randomise)
                .unwrap();
        let m = generate_reports(&cfg, &profile, &mut SimRng::seed_from_u64(4)).unwrap();
        let mut counts = [0usize; 3];
        for j in 0..10_000 {
            counts[m.reports().get(0, j).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip([0.2, 0.3, 0.5]) {
            assert!((*c as f64 / 10_000.0 - p).abs() < 0.02);
        }
    }

    #[test]
    fn iid_prejudice_uncorrelated_with_truth() {
        let cfg = config(1, 0, 50_000, PrejudiceMode::Iid);
        let profile = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Prejudiced,
            Strategy::Prejudiced,
        )
        .unwrap();
        let m = generate_reports(&cfg, &profile, &mut SimRng::seed_from_u64(5)).unwrap();
        let n = 50_000.0;
        let xs: Vec<f64> = m.truth().iter().map(|&y| y as f64).collect();
        let ys: Vec<f64> = (0..50_000)
            .map(|j| m.reports().get(0, j).unwrap() as f64)
            .collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / n;
        let sx = (xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>() / n).sqrt();
        let sy = (ys.iter().map(|y| (y - my) * (y - my)).sum::<f64>() / n).sqrt();
        // Standard error of a null correlation is 1/sqrt(n) ~ 0.0045.
        assert!((cov / (sx * sy)).abs() < 0.02);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = config(4, 2, 30, PrejudiceMode::Iid);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let a = generate_reports(&cfg, &profile, &mut substream(9, StreamTag::World, 3)).unwrap();
        let b = generate_reports(&cfg, &profile, &mut substream(9, StreamTag::World, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strategy_change_keeps_world_draws() {
        let cfg = config(4, 2, 30, PrejudiceMode::Shared);
        let base =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let dev = base.with_agent(0, Strategy::Prejudiced);
        let a = generate_reports(&cfg, &base, &mut substream(1, StreamTag::World, 0)).unwrap();
        let b = generate_reports(&cfg, &dev, &mut substream(1, StreamTag::World, 0)).unwrap();
        assert_eq!(a.truth(), b.truth());
        for j in 0..30 {
            for agent in 1..4 {
                assert_eq!(a.reports().get(agent, j), b.reports().get(agent, j));
            }
        }
    }

    #[test]
    fn truthful_set_examples() {
        let roster = AgentRoster::with_informed_prefix(4, 2).unwrap();
        let all_t =
            StrategyProfile::type_symmetric(&roster, Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        assert_eq!(
            truthful_informed_set(&roster, &all_t),
            roster.informed().clone()
        );
        let all_p =
            StrategyProfile::type_symmetric(&roster, Strategy::Prejudiced, Strategy::Prejudiced)
                .unwrap();
        assert!(truthful_informed_set(&roster, &all_p).is_empty());
        let mixed = all_t.with_agent(1, Strategy::Prejudiced);
        assert_eq!(truthful_informed_set(&roster, &mixed), BTreeSet::from([0]));
    }

    #[test]
    fn assignment_complete_cases() {
        let mut rng = SimRng::seed_from_u64(0);
        let a = make_assignment(3, 4, 3, &mut rng).unwrap();
        assert!(a.is_complete());
        for n in 2..6 {
            assert!(make_assignment(n, 7, n, &mut rng).unwrap().is_complete());
        }
    }

    /// Breadth-first search over the co-labelling graph.
    fn connected_by_bfs(a: &Assignment) -> bool {
        let n = a.n_agents();
        let mut seen = vec![false; n];
        let mut queue = alloc::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(agent) = queue.pop_front() {
            for &item in a.items_of(agent) {
                for &other in a.agents_on(item) {
                    if !seen[other] {
                        seen[other] = true;
                        queue.push_back(other);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    #[test]
    fn sparse_assignment_is_connected() {
        for seed in 0..20 {
            let a = make_assignment(6, 30, 2, &mut SimRng::seed_from_u64(seed)).unwrap();
            assert!(connected_by_bfs(&a));
            assert!(a.overlap_connected());
            assert!((0..30).all(|j| a.agents_on(j).len() == 2));
        }
    }

    #[test]
    fn infeasible_assignments_rejected() {
        let mut rng = SimRng::seed_from_u64(0);
        assert!(make_assignment(3, 4, 4, &mut rng).is_err());
        assert!(make_assignment(3, 4, 1, &mut rng).is_err());
        assert!(make_assignment(10, 3, 2, &mut rng).is_err());
        assert!(make_assignment(10, 3, 5, &mut rng).is_ok());
    }

    #[test]
    fn overlap_detects_disconnection() {
        let a = Assignment::new(2, vec![vec![0], vec![0], vec![1], vec![1]]).unwrap();
        assert!(!a.overlap_connected());
        assert!(!connected_by_bfs(&a));
    }
}
