//! Mechanisms map a round of reports to the set of agents they believe are
//! informed and truthful.
//!
//! Two families are implemented:
//!
//! - report-only rules ([`agreement_mechanism`], [`pairwise_agreement_mechanism`])
//!   that trust agents who agree with the crowd;
//! - anchored rules ([`gold_seeded_mechanism`], [`prejudice_anchored_mechanism`])
//!   that classify agents against a few known labels and then propagate trust
//!   through items labelled in common.
//!
//! Mechanisms only ever receive a [`MechanismView`]: the reports, the
//! assignment and whatever anchors they asked for. Truth, signals and
//! prejudice draws stay inside the [`ReportMatrix`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::game::{
    generate_reports, truthful_informed_set, Assignment, GameConfig, GameError, PrejudiceDraws,
    ReportMatrix, Reports, StrategyProfile,
};
use crate::probcore::{substream, StreamTag};
use crate::{trials, AgentId, ItemId, Label};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const DEFAULT_ACCURACY_CUT: f64 = 0.8;
pub const DEFAULT_AGREE_CUT: f64 = 0.8;
pub const DEFAULT_MATCH_CUT: f64 = 0.9;
pub const DEFAULT_MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MechanismError {
    #[error("no reports to score")]
    EmptyReports,
    #[error("gold set is empty")]
    EmptyGold,
    #[error("no observed prejudice labels")]
    EmptyPrejudice,
    #[error("anchored item {item} is out of range for {n_items} items")]
    AnchorOutOfRange { item: ItemId, n_items: usize },
    #[error("asked for {requested} anchored items but the game has {n_items}")]
    TooManyAnchors { requested: usize, n_items: usize },
    #[error("prejudice anchors need a shared prejudice draw per item")]
    IidPrejudice,
    #[error("mechanism needs anchors it was not given")]
    MissingAnchors,
    #[error(
        "reports cover {reports} agents x {report_items} items, assignment {assignment} x {items}"
    )]
    ShapeMismatch {
        reports: usize,
        report_items: usize,
        assignment: usize,
        items: usize,
    },
    #[error("classification still changing after {0} rounds")]
    NoFixedPoint(usize),
    #[error("need at least one trial")]
    NoTrials,
    #[error(transparent)]
    Game(#[from] GameError),
}

/// `A_M`, the agents a mechanism designates as informed and truthful.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MechanismOutcome {
    pub identified: BTreeSet<AgentId>,
}

impl MechanismOutcome {
    pub fn contains(&self, agent: AgentId) -> bool {
        self.identified.contains(&agent)
    }
}

/// Item labels known to a mechanism ahead of time: true labels for a gold
/// set, observed prejudice for prejudice anchors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorLabels {
    items: BTreeMap<ItemId, Label>,
}

impl AnchorLabels {
    pub fn new(n_items: usize, items: BTreeMap<ItemId, Label>) -> Result<Self, MechanismError> {
        if let Some(&item) = items.keys().find(|&&j| j >= n_items) {
            return Err(MechanismError::AnchorOutOfRange { item, n_items });
        }
        Ok(Self { items })
    }

    /// Reads the labels of `items` off a per-item vector.
    pub fn from_labels(
        labels: &[Label],
        items: impl IntoIterator<Item = ItemId>,
    ) -> Result<Self, MechanismError> {
        let n_items = labels.len();
        let mut map = BTreeMap::new();
        for item in items {
            let label = *labels
                .get(item)
                .ok_or(MechanismError::AnchorOutOfRange { item, n_items })?;
            map.insert(item, label);
        }
        Ok(Self { items: map })
    }

    pub fn get(&self, item: ItemId) -> Option<Label> {
        self.items.get(&item).copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = (ItemId, Label)> + '_ {
        self.items.iter().map(|(&j, &l)| (j, l))
    }
}

/// Realized true labels of some items.
pub type GoldSet = AnchorLabels;
/// Observed shared prejudice of some items.
pub type PrejudiceAnchors = AnchorLabels;

/// What a mechanism needs from the world besides the reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorRequest {
    None,
    /// True labels of this many items.
    Gold(usize),
    /// Shared prejudice draws of this many items.
    Prejudice(usize),
}

/// The inputs a mechanism is allowed to read.
#[derive(Debug, Clone, Copy)]
pub struct MechanismView<'a> {
    pub reports: &'a Reports,
    pub assignment: &'a Assignment,
    pub gold: Option<&'a GoldSet>,
    pub prejudice: Option<&'a PrejudiceAnchors>,
}

impl<'a> MechanismView<'a> {
    pub fn reports_only(reports: &'a Reports, assignment: &'a Assignment) -> Self {
        Self {
            reports,
            assignment,
            gold: None,
            prejudice: None,
        }
    }
}

pub trait Mechanism: Sync {
    fn name(&self) -> &str;

    fn anchors(&self) -> AnchorRequest {
        AnchorRequest::None
    }

    fn identify(&self, view: &MechanismView<'_>) -> Result<MechanismOutcome, MechanismError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationParams {
    /// Round-0 cut: minimum gold accuracy to be trusted, or minimum prejudice
    /// match rate to be rejected.
    pub seed_cut: f64,
    /// Minimum pooled agreement with trusted agents to become trusted.
    pub agree_cut: f64,
    pub max_rounds: usize,
}

/// The concrete mechanisms shipped with the simulator.
#[derive(Debug, Clone, PartialEq)]
pub enum MechanismSpec {
    /// Plurality consensus per item; trust agents that match it often enough.
    Agreement { threshold: f64 },
    /// Trust agents whose mean pairwise agreement with co-labellers is high.
    PairwiseAgreement { threshold: f64 },
    /// Seed trust from `gold_items` known labels, then propagate.
    GoldSeeded {
        gold_items: usize,
        accuracy_cut: f64,
        agree_cut: f64,
        max_rounds: usize,
    },
    /// Reject agents that echo the observed prejudice on `anchored_items`
    /// items, trust the rest, then propagate.
    PrejudiceAnchored {
        anchored_items: usize,
        match_cut: f64,
        agree_cut: f64,
        max_rounds: usize,
    },
}

impl MechanismSpec {
    pub fn agreement() -> Self {
        MechanismSpec::Agreement {
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn gold_seeded(gold_items: usize) -> Self {
        MechanismSpec::GoldSeeded {
            gold_items,
            accuracy_cut: DEFAULT_ACCURACY_CUT,
            agree_cut: DEFAULT_AGREE_CUT,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn prejudice_anchored(anchored_items: usize) -> Self {
        MechanismSpec::PrejudiceAnchored {
            anchored_items,
            match_cut: DEFAULT_MATCH_CUT,
            agree_cut: DEFAULT_AGREE_CUT,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn uses_anchors(&self) -> bool {
        self.anchors() != AnchorRequest::None
    }

    /// Runs an anchored mechanism and returns the full classification trace.
    /// Report-only mechanisms yield `None`.
    pub fn propagate(
        &self,
        view: &MechanismView<'_>,
    ) -> Result<Option<Propagation>, MechanismError> {
        match *self {
            MechanismSpec::GoldSeeded {
                accuracy_cut,
                agree_cut,
                max_rounds,
                ..
            } => {
                let gold = view.gold.ok_or(MechanismError::MissingAnchors)?;
                let params = PropagationParams {
                    seed_cut: accuracy_cut,
                    agree_cut,
                    max_rounds,
                };
                gold_seeded_mechanism(view.reports, view.assignment, gold, &params).map(Some)
            }
            MechanismSpec::PrejudiceAnchored {
                match_cut,
                agree_cut,
                max_rounds,
                ..
            } => {
                let obs = view.prejudice.ok_or(MechanismError::MissingAnchors)?;
                let params = PropagationParams {
                    seed_cut: match_cut,
                    agree_cut,
                    max_rounds,
                };
                prejudice_anchored_mechanism(view.reports, view.assignment, obs, &params).map(Some)
            }
            _ => Ok(None),
        }
    }
}

impl Mechanism for MechanismSpec {
    fn name(&self) -> &str {
        match self {
            MechanismSpec::Agreement { .. } => "agreement",
            MechanismSpec::PairwiseAgreement { .. } => "pairwise",
            MechanismSpec::GoldSeeded { .. } => "gold",
            MechanismSpec::PrejudiceAnchored { .. } => "prejudice-anchored",
        }
    }

    fn anchors(&self) -> AnchorRequest {
        match *self {
            MechanismSpec::GoldSeeded { gold_items, .. } => AnchorRequest::Gold(gold_items),
            MechanismSpec::PrejudiceAnchored { anchored_items, .. } => {
                AnchorRequest::Prejudice(anchored_items)
            }
            _ => AnchorRequest::None,
        }
    }

    fn identify(&self, view: &MechanismView<'_>) -> Result<MechanismOutcome, MechanismError> {
        match *self {
            MechanismSpec::Agreement { threshold } => {
                agreement_mechanism(view.reports, view.assignment, threshold)
            }
            MechanismSpec::PairwiseAgreement { threshold } => {
                pairwise_agreement_mechanism(view.reports, view.assignment, threshold)
            }
            _ => Ok(self.propagate(view)?.expect("anchored mechanism").outcome()),
        }
    }
}

fn check_shape(reports: &Reports, assignment: &Assignment) -> Result<(), MechanismError> {
    if reports.n_agents() != assignment.n_agents() || reports.n_items() != assignment.n_items() {
        return Err(MechanismError::ShapeMismatch {
            reports: reports.n_agents(),
            report_items: reports.n_items(),
            assignment: assignment.n_agents(),
            items: assignment.n_items(),
        });
    }
    if reports.is_empty() {
        return Err(MechanismError::EmptyReports);
    }
    Ok(())
}

/// Plurality label per item, `None` for items with fewer than two reports.
/// Ties go to the lowest label.
pub fn plurality_consensus(reports: &Reports) -> Vec<Option<Label>> {
    let mut counts = alloc::vec![0usize; reports.label_bound()];
    (0..reports.n_items())
        .map(|item| {
            counts.iter_mut().for_each(|c| *c = 0);
            let mut n = 0;
            for &label in reports.item_row(item).iter().flatten() {
                counts[label] += 1;
                n += 1;
            }
            if n < 2 {
                return None;
            }
            let mut best = 0;
            for (label, &c) in counts.iter().enumerate() {
                if c > counts[best] {
                    best = label;
                }
            }
            Some(best)
        })
        .collect()
}

/// Fraction of each agent's scored items on which it matches the consensus.
/// Agents without a scored item get `None`.
pub fn agreement_scores(
    reports: &Reports,
    assignment: &Assignment,
) -> Result<Vec<Option<f64>>, MechanismError> {
    check_shape(reports, assignment)?;
    let consensus = plurality_consensus(reports);
    Ok((0..assignment.n_agents())
        .map(|agent| {
            let (mut hits, mut scored) = (0usize, 0usize);
            for &item in assignment.items_of(agent) {
                if let (Some(c), Some(r)) = (consensus[item], reports.get(agent, item)) {
                    scored += 1;
                    hits += usize::from(c == r);
                }
            }
            (scored > 0).then(|| hits as f64 / scored as f64)
        })
        .collect())
}

fn threshold_scores(scores: &[Option<f64>], threshold: f64) -> MechanismOutcome {
    MechanismOutcome {
        identified: scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.unwrap_or(0.0) >= threshold)
            .map(|(a, _)| a)
            .collect(),
    }
}

/// Identifies agents whose agreement with the per-item plurality is at least
/// `threshold`. Reads reports only.
pub fn agreement_mechanism(
    reports: &Reports,
    assignment: &Assignment,
    threshold: f64,
) -> Result<MechanismOutcome, MechanismError> {
    Ok(threshold_scores(
        &agreement_scores(reports, assignment)?,
        threshold,
    ))
}

/// Mean agreement of each agent with every co-labeller, pooled over items.
pub fn pairwise_agreement_scores(
    reports: &Reports,
    assignment: &Assignment,
) -> Result<Vec<Option<f64>>, MechanismError> {
    check_shape(reports, assignment)?;
    Ok((0..assignment.n_agents())
        .map(|agent| {
            let (mut hits, mut pairs) = (0usize, 0usize);
            for &item in assignment.items_of(agent) {
                let Some(mine) = reports.get(agent, item) else {
                    continue;
                };
                for &other in assignment.agents_on(item) {
                    if other == agent {
                        continue;
                    }
                    if let Some(theirs) = reports.get(other, item) {
                        pairs += 1;
                        hits += usize::from(mine == theirs);
                    }
                }
            }
            (pairs > 0).then(|| hits as f64 / pairs as f64)
        })
        .collect())
}

/// Identifies agents whose pooled pairwise agreement is at least `threshold`.
pub fn pairwise_agreement_mechanism(
    reports: &Reports,
    assignment: &Assignment,
    threshold: f64,
) -> Result<MechanismOutcome, MechanismError> {
    Ok(threshold_scores(
        &pairwise_agreement_scores(reports, assignment)?,
        threshold,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Unclassified,
    Trusted,
    Rejected,
}

/// Result of an anchored classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Propagation {
    pub status: Vec<Status>,
    /// Round in which each agent was classified; round 0 is the anchor round.
    pub classified_in: Vec<Option<usize>>,
    /// Last round that classified anyone.
    pub rounds: usize,
}

impl Propagation {
    pub fn outcome(&self) -> MechanismOutcome {
        MechanismOutcome {
            identified: self
                .status
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == Status::Trusted)
                .map(|(a, _)| a)
                .collect(),
        }
    }

    pub fn trusted(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == Status::Trusted)
            .map(|(a, _)| a)
    }
}

/// Fraction of `agent`'s anchored items on which its report equals the anchor,
/// or `None` if it labelled no anchored item.
fn anchor_match_rate(
    reports: &Reports,
    assignment: &Assignment,
    agent: AgentId,
    anchors: &AnchorLabels,
) -> Option<f64> {
    let (mut hits, mut seen) = (0usize, 0usize);
    for &item in assignment.items_of(agent) {
        if let (Some(a), Some(r)) = (anchors.get(item), reports.get(agent, item)) {
            seen += 1;
            hits += usize::from(a == r);
        }
    }
    (seen > 0).then(|| hits as f64 / seen as f64)
}

/// Spreads trust from the round-0 classification until nothing changes.
///
/// Each round, every unclassified agent that shares an item with an agent
/// trusted at the start of the round is scored by its pooled agreement over
/// all (trusted agent, shared item) pairs.
fn propagate(
    reports: &Reports,
    assignment: &Assignment,
    mut status: Vec<Status>,
    agree_cut: f64,
    max_rounds: usize,
) -> Result<Propagation, MechanismError> {
    let n = status.len();
    let mut classified_in: Vec<Option<usize>> = status
        .iter()
        .map(|&s| (s != Status::Unclassified).then_some(0))
        .collect();
    let mut rounds = 0;
    let mut round = 1;
    loop {
        let mut updates = Vec::new();
        for agent in (0..n).filter(|&a| status[a] == Status::Unclassified) {
            let (mut hits, mut pairs) = (0usize, 0usize);
            for &item in assignment.items_of(agent) {
                let Some(mine) = reports.get(agent, item) else {
                    continue;
                };
                for &other in assignment.agents_on(item) {
                    if other != agent && status[other] == Status::Trusted {
                        if let Some(theirs) = reports.get(other, item) {
                            pairs += 1;
                            hits += usize::from(mine == theirs);
                        }
                    }
                }
            }
            if pairs > 0 {
                let rate = hits as f64 / pairs as f64;
                updates.push((
                    agent,
                    if rate >= agree_cut {
                        Status::Trusted
                    } else {
                        Status::Rejected
                    },
                ));
            }
        }
        if updates.is_empty() {
            break;
        }
        if round > max_rounds {
            return Err(MechanismError::NoFixedPoint(max_rounds));
        }
        for (agent, s) in updates {
            status[agent] = s;
            classified_in[agent] = Some(round);
        }
        rounds = round;
        round += 1;
    }
    Ok(Propagation {
        status,
        classified_in,
        rounds,
    })
}

/// Trusts agents whose accuracy on gold items is at least `params.seed_cut`,
/// rejects the other gold-holders, then propagates through shared items.
/// Agents never reached stay unclassified and are not identified.
pub fn gold_seeded_mechanism(
    reports: &Reports,
    assignment: &Assignment,
    gold: &GoldSet,
    params: &PropagationParams,
) -> Result<Propagation, MechanismError> {
    check_shape(reports, assignment)?;
    if gold.is_empty() {
        return Err(MechanismError::EmptyGold);
    }
    check_anchor_range(gold, assignment.n_items())?;
    let status = (0..assignment.n_agents())
        .map(
            |agent| match anchor_match_rate(reports, assignment, agent, gold) {
                Some(acc) if acc >= params.seed_cut => Status::Trusted,
                Some(_) => Status::Rejected,
                None => Status::Unclassified,
            },
        )
        .collect();
    propagate(
        reports,
        assignment,
        status,
        params.agree_cut,
        params.max_rounds,
    )
}

/// Rejects agents whose reports match the observed prejudice on at least
/// `params.seed_cut` of their anchored items, provisionally trusts the other
/// anchored agents, then propagates like [`gold_seeded_mechanism`].
pub fn prejudice_anchored_mechanism(
    reports: &Reports,
    assignment: &Assignment,
    observed: &PrejudiceAnchors,
    params: &PropagationParams,
) -> Result<Propagation, MechanismError> {
    check_shape(reports, assignment)?;
    if observed.is_empty() {
        return Err(MechanismError::EmptyPrejudice);
    }
    check_anchor_range(observed, assignment.n_items())?;
    let status = (0..assignment.n_agents())
        .map(
            |agent| match anchor_match_rate(reports, assignment, agent, observed) {
                Some(rate) if rate >= params.seed_cut => Status::Rejected,
                Some(_) => Status::Trusted,
                None => Status::Unclassified,
            },
        )
        .collect();
    propagate(
        reports,
        assignment,
        status,
        params.agree_cut,
        params.max_rounds,
    )
}

fn check_anchor_range(anchors: &AnchorLabels, n_items: usize) -> Result<(), MechanismError> {
    match anchors.items().find(|&(j, _)| j >= n_items) {
        Some((item, _)) => Err(MechanismError::AnchorOutOfRange { item, n_items }),
        None => Ok(()),
    }
}

/// `count` distinct items out of `n_items`, uniformly, in ascending order.
pub fn sample_items<R: RngCore + ?Sized>(
    n_items: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<ItemId>, MechanismError> {
    if count > n_items {
        return Err(MechanismError::TooManyAnchors {
            requested: count,
            n_items,
        });
    }
    let mut pool: Vec<ItemId> = (0..n_items).collect();
    for slot in 0..count {
        let pick = slot + (rng.next_u64() % (n_items - slot) as u64) as usize;
        pool.swap(slot, pick);
    }
    pool.truncate(count);
    pool.sort_unstable();
    Ok(pool)
}

/// The anchors a mechanism asked for, drawn from a played round.
#[derive(Debug, Clone, Default)]
pub struct Anchors {
    pub gold: Option<GoldSet>,
    pub prejudice: Option<PrejudiceAnchors>,
}

impl Anchors {
    pub fn draw<R: RngCore + ?Sized>(
        request: AnchorRequest,
        round: &ReportMatrix,
        rng: &mut R,
    ) -> Result<Self, MechanismError> {
        let n_items = round.truth().len();
        Ok(match request {
            AnchorRequest::None => Anchors::default(),
            AnchorRequest::Gold(0) => return Err(MechanismError::EmptyGold),
            AnchorRequest::Gold(g) => Anchors {
                gold: Some(GoldSet::from_labels(
                    round.truth(),
                    sample_items(n_items, g, rng)?,
                )?),
                prejudice: None,
            },
            AnchorRequest::Prejudice(0) => return Err(MechanismError::EmptyPrejudice),
            AnchorRequest::Prejudice(m) => {
                let PrejudiceDraws::Shared(u) = round.prejudice() else {
                    return Err(MechanismError::IidPrejudice);
                };
                Anchors {
                    gold: None,
                    prejudice: Some(PrejudiceAnchors::from_labels(
                        u,
                        sample_items(n_items, m, rng)?,
                    )?),
                }
            }
        })
    }

    pub fn view<'a>(
        &'a self,
        reports: &'a Reports,
        assignment: &'a Assignment,
    ) -> MechanismView<'a> {
        MechanismView {
            reports,
            assignment,
            gold: self.gold.as_ref(),
            prejudice: self.prejudice.as_ref(),
        }
    }
}

/// One played game with the mechanism's verdict.
#[derive(Debug, Clone)]
pub struct PlayedRound {
    pub round: ReportMatrix,
    pub anchors: Anchors,
    pub outcome: MechanismOutcome,
}

/// Plays trial `trial` of the experiment seeded by `seed`.
///
/// World draws come from the `(seed, World, trial)` stream and anchor choices
/// from `(seed, Mechanism, trial)`, so two profiles evaluated with the same
/// seed and trial index face the same world and the same anchored items.
pub fn play_round<M: Mechanism + ?Sized>(
    mechanism: &M,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    seed: u64,
    trial: u64,
) -> Result<PlayedRound, MechanismError> {
    let round = generate_reports(cfg, profile, &mut substream(seed, StreamTag::World, trial))?;
    let anchors = Anchors::draw(
        mechanism.anchors(),
        &round,
        &mut substream(seed, StreamTag::Mechanism, trial),
    )?;
    let outcome = mechanism.identify(&anchors.view(round.reports(), cfg.assignment()))?;
    Ok(PlayedRound {
        round,
        anchors,
        outcome,
    })
}

/// Classification counts pooled over agents and trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    /// In `A_{I,T}` and identified.
    pub true_pos: u64,
    /// In `A_{I,T}` but not identified.
    pub false_neg: u64,
    /// Outside `A_{I,T}` and not identified.
    pub true_neg: u64,
    /// Outside `A_{I,T}` but identified.
    pub false_pos: u64,
}

impl ConfusionCounts {
    fn add(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
        self.false_pos += other.false_pos;
    }

    pub fn record(target: &BTreeSet<AgentId>, outcome: &MechanismOutcome, n_agents: usize) -> Self {
        let mut c = ConfusionCounts::default();
        for agent in 0..n_agents {
            match (target.contains(&agent), outcome.contains(agent)) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
                (false, true) => c.false_pos += 1,
            }
        }
        c
    }

    /// `P(a in A_M | a in A_{I,T})`, undefined when `A_{I,T}` was always empty.
    pub fn p_ii(&self) -> Option<f64> {
        ratio(self.true_pos, self.true_pos + self.false_neg)
    }

    /// `P(a not in A_M | a not in A_{I,T})`.
    pub fn p_uu(&self) -> Option<f64> {
        ratio(self.true_neg, self.true_neg + self.false_pos)
    }

    /// Odds `p_ii / (1 - p_ii)` with half-count smoothing so that perfect
    /// classification stays finite.
    pub fn odds_ii(&self) -> Option<f64> {
        smoothed_odds(self.true_pos, self.false_neg)
    }

    pub fn odds_uu(&self) -> Option<f64> {
        smoothed_odds(self.true_neg, self.false_pos)
    }

    /// Product of the two class odds: the diagnostic odds ratio of the
    /// identified/not-identified split against `A_{I,T}` membership.
    pub fn diagnostic_odds_ratio(&self) -> Option<f64> {
        Some(self.odds_ii()? * self.odds_uu()?)
    }

    /// Fraction of agent-trials classified against their `A_{I,T}` membership.
    pub fn misclassification(&self) -> Option<f64> {
        let total = self.true_pos + self.false_neg + self.true_neg + self.false_pos;
        ratio(self.false_neg + self.false_pos, total)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn smoothed_odds(hits: u64, misses: u64) -> Option<f64> {
    (hits + misses > 0).then(|| (hits as f64 + 0.5) / (misses as f64 + 0.5))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OddsPoint {
    pub n_items: usize,
    pub counts: ConfusionCounts,
}

impl OddsPoint {
    pub fn odds_ratio(&self) -> Option<f64> {
        self.counts.diagnostic_odds_ratio()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismMetrics {
    pub p_ii_hat: Option<f64>,
    pub p_uu_hat: Option<f64>,
    pub trials: u64,
    pub counts: ConfusionCounts,
    pub odds_ratio_curve: Vec<OddsPoint>,
}

/// Plays `trials` independent games and tallies how well the mechanism
/// recovers `A_{I,T}`.
pub fn confusion_counts<M: Mechanism + ?Sized>(
    mechanism: &M,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    trials: u64,
    seed: u64,
) -> Result<ConfusionCounts, MechanismError> {
    if trials == 0 {
        return Err(MechanismError::NoTrials);
    }
    profile.validate(cfg.roster())?;
    let target = truthful_informed_set(cfg.roster(), profile);
    let per_trial = trials::map_indexed(trials, |t| {
        play_round(mechanism, cfg, profile, seed, t)
            .map(|played| ConfusionCounts::record(&target, &played.outcome, cfg.n_agents()))
    });
    let mut total = ConfusionCounts::default();
    for c in per_trial {
        total.add(&c?);
    }
    Ok(total)
}

/// Estimates `p_ii` and `p_uu` for `cfg`. The odds-ratio curve is left empty;
/// see [`evaluate_with_curve`].
pub fn evaluate_mechanism<M: Mechanism + ?Sized>(
    mechanism: &M,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    trials: u64,
    seed: u64,
) -> Result<MechanismMetrics, MechanismError> {
    let counts = confusion_counts(mechanism, cfg, profile, trials, seed)?;
    Ok(MechanismMetrics {
        p_ii_hat: counts.p_ii(),
        p_uu_hat: counts.p_uu(),
        trials,
        counts,
        odds_ratio_curve: Vec::new(),
    })
}

/// [`evaluate_mechanism`] plus a re-run for every item count in `grid`,
/// with `make_cfg` building the game for a given number of items.
pub fn evaluate_with_curve<M, F, E>(
    mechanism: &M,
    cfg: &GameConfig,
    make_cfg: F,
    grid: &[usize],
    profile: &StrategyProfile,
    trials: u64,
    seed: u64,
) -> Result<MechanismMetrics, E>
where
    M: Mechanism + ?Sized,
    F: Fn(usize) -> Result<GameConfig, E>,
    E: From<MechanismError>,
{
    let mut metrics = evaluate_mechanism(mechanism, cfg, profile, trials, seed)?;
    for &n_items in grid {
        let point_cfg = make_cfg(n_items)?;
        let counts = confusion_counts(mechanism, &point_cfg, profile, trials, seed)?;
        metrics.odds_ratio_curve.push(OddsPoint { n_items, counts });
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AgentRoster, PrejudiceMode, Strategy};
    use crate::probcore::{ConditionalTable, Distribution, LabelSpace, SimRng, WorldDistribution};
    use alloc::vec;
    use proptest::prelude::*;
    use rand_core::{RngCore, SeedableRng};

    fn rows(r: &[&[Label]]) -> Reports {
        Reports::from_item_rows(
            &r.iter()
                .map(|row| row.iter().map(|&l| Some(l)).collect())
                .collect::<Vec<_>>(),
        )
    }

    fn params(seed_cut: f64) -> PropagationParams {
        PropagationParams {
            seed_cut,
            agree_cut: 0.8,
            max_rounds: 16,
        }
    }

    #[test]
    fn unanimous_reports_identify_everyone() {
        let r = rows(&[&[1, 1, 1], &[0, 0, 0], &[1, 1, 1]]);
        let a = Assignment::complete(3, 3).unwrap();
        let out = agreement_mechanism(&r, &a, 0.8).unwrap();
        assert_eq!(out.identified, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn zero_threshold_identifies_everyone() {
        let r = rows(&[&[0, 1, 1, 0], &[1, 0, 1, 0]]);
        let a = Assignment::complete(4, 2).unwrap();
        assert_eq!(
            agreement_mechanism(&r, &a, 0.0).unwrap().identified.len(),
            4
        );
    }

    #[test]
    fn ties_break_to_lowest_label() {
        let r = rows(&[&[2, 1, 1, 2]]);
        assert_eq!(plurality_consensus(&r), vec![Some(1)]);
    }

    #[test]
    fn lone_reports_are_skipped() {
        let r = Reports::from_item_rows(&[vec![Some(1), None], vec![Some(0), Some(0)]]);
        let a = Assignment::new(2, vec![vec![0, 1], vec![1]]).unwrap();
        let scores = agreement_scores(&r, &a).unwrap();
        assert_eq!(scores, vec![Some(1.0), Some(1.0)]);
    }

    #[test]
    fn empty_reports_are_an_error() {
        let r = Reports::from_item_rows(&[vec![None, None]]);
        let a = Assignment::complete(2, 1).unwrap();
        assert_eq!(
            agreement_mechanism(&r, &a, 0.5),
            Err(MechanismError::EmptyReports)
        );
    }

    #[test]
    fn randomiser_excluded_by_agreement() {
        // Four truthful agents with an identity signal and one uniform
        // randomiser over 100 binary items. The randomiser's score is
        // Binomial(100, 1/2)/100; the chance of reaching 0.8 is below 1e-9.
        let tail: f64 = (80..=100u64).map(|k| binom_pmf(100, k, 0.5)).sum();
        assert!(tail < 1e-9);
        let cfg = binary_config(5, 4, 100);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let mut excluded = 0;
        for t in 0..200 {
            let played = play_round(&MechanismSpec::agreement(), &cfg, &profile, 42, t).unwrap();
            assert!((0..4).all(|a| played.outcome.contains(a)));
            excluded += usize::from(!played.outcome.contains(4));
        }
        assert!(excluded as f64 / 200.0 >= 0.99);
    }

    fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
        let mut c = 1.0;
        for i in 0..k {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        c * libm::pow(p, k as f64) * libm::pow(1.0 - p, (n - k) as f64)
    }

    fn binary_config(n_agents: usize, n_informed: usize, n_items: usize) -> GameConfig {
        GameConfig::new(
            WorldDistribution::new(
                LabelSpace::new(2).unwrap(),
                Distribution::uniform(2),
                Distribution::new(vec![0.9, 0.1]).unwrap(),
                ConditionalTable::identity(2),
            )
            .unwrap(),
            AgentRoster::with_informed_prefix(n_agents, n_informed).unwrap(),
            Assignment::complete(n_agents, n_items).unwrap(),
            PrejudiceMode::Shared,
        )
        .unwrap()
    }

    #[test]
    fn perfect_gold_accuracy_trusted_in_round_zero() {
        let r = rows(&[&[1, 0], &[0, 0], &[1, 1]]);
        let a = Assignment::complete(2, 3).unwrap();
        let gold = GoldSet::from_labels(&[1, 0, 1], [0, 2]).unwrap();
        let p = gold_seeded_mechanism(&r, &a, &gold, &params(0.8)).unwrap();
        assert_eq!(p.status[0], Status::Trusted);
        assert_eq!(p.classified_in[0], Some(0));
        assert_eq!(p.status[1], Status::Rejected);
    }

    #[test]
    fn prejudice_contradicting_gold_is_rejected() {
        // Shared prejudice u = (0, 0, 1) against truth (1, 1, 0).
        let r = rows(&[&[0, 0, 0], &[0, 0, 0], &[1, 1, 1]]);
        let a = Assignment::complete(3, 3).unwrap();
        let gold = GoldSet::from_labels(&[1, 1, 0], [0, 1, 2]).unwrap();
        let p = gold_seeded_mechanism(&r, &a, &gold, &params(0.8)).unwrap();
        assert!(p.status.iter().all(|&s| s == Status::Rejected));
        assert!(p.outcome().identified.is_empty());
    }

    #[test]
    fn trust_propagates_without_gold() {
        // Agent 0 holds gold item 0; agent 1 only shares items 1 and 2 with
        // agent 0; agent 2 only shares item 3 with agent 1.
        let r = Reports::from_item_rows(&[
            vec![Some(1), None, None],
            vec![Some(0), Some(0), None],
            vec![Some(1), Some(1), None],
            vec![None, Some(0), Some(0)],
        ]);
        let a = Assignment::new(4, vec![vec![0, 1, 2], vec![1, 2, 3], vec![3]]).unwrap();
        let gold = GoldSet::from_labels(&[1, 0, 1, 0], [0]).unwrap();
        let p = gold_seeded_mechanism(&r, &a, &gold, &params(1.0)).unwrap();
        assert_eq!(p.status, vec![Status::Trusted; 3]);
        assert_eq!(p.classified_in, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(p.rounds, 2);
    }

    #[test]
    fn unreachable_agents_stay_out() {
        let r = rows(&[&[1, 1], &[0, 1]]);
        let a = Assignment::new(2, vec![vec![0], vec![1]]).unwrap();
        let gold = GoldSet::from_labels(&[1, 0], [0]).unwrap();
        let p = gold_seeded_mechanism(&r, &a, &gold, &params(0.8)).unwrap();
        assert_eq!(p.status, vec![Status::Trusted, Status::Unclassified]);
        assert_eq!(p.outcome().identified, BTreeSet::from([0]));
    }

    #[test]
    fn round_limit_is_enforced() {
        let r = Reports::from_item_rows(&[
            vec![Some(1), None, None],
            vec![Some(0), Some(0), None],
            vec![None, Some(0), Some(0)],
        ]);
        let a = Assignment::new(3, vec![vec![0, 1], vec![1, 2], vec![2]]).unwrap();
        let gold = GoldSet::from_labels(&[1, 0, 0], [0]).unwrap();
        let tight = PropagationParams {
            max_rounds: 1,
            ..params(1.0)
        };
        assert_eq!(
            gold_seeded_mechanism(&r, &a, &gold, &tight),
            Err(MechanismError::NoFixedPoint(1))
        );
        assert!(gold_seeded_mechanism(&r, &a, &gold, &params(1.0)).is_ok());
    }

    #[test]
    fn empty_anchors_are_errors() {
        let r = rows(&[&[1, 1]]);
        let a = Assignment::complete(2, 1).unwrap();
        let none = AnchorLabels::new(1, BTreeMap::new()).unwrap();
        assert_eq!(
            gold_seeded_mechanism(&r, &a, &none, &params(0.8)),
            Err(MechanismError::EmptyGold)
        );
        assert_eq!(
            prejudice_anchored_mechanism(&r, &a, &none, &params(0.9)),
            Err(MechanismError::EmptyPrejudice)
        );
        assert!(AnchorLabels::new(1, BTreeMap::from([(3, 0)])).is_err());
    }

    #[test]
    fn prejudice_echo_rejected_and_truth_trusted() {
        // Observed prejudice differs from the truth on every anchored item.
        let truth = [1, 0, 1, 1];
        let u = [0, 1, 0, 0];
        let r = Reports::from_item_rows(
            &truth
                .iter()
                .zip(&u)
                .map(|(&y, &p)| vec![Some(p), Some(y)])
                .collect::<Vec<_>>(),
        );
        let a = Assignment::complete(2, 4).unwrap();
        let obs = PrejudiceAnchors::from_labels(&u, 0..4).unwrap();
        let p = prejudice_anchored_mechanism(&r, &a, &obs, &params(0.9)).unwrap();
        assert_eq!(p.status, vec![Status::Rejected, Status::Trusted]);
        assert_eq!(p.classified_in, vec![Some(0), Some(0)]);
    }

    #[test]
    fn randomisers_rarely_rejected_by_prejudice_anchor() {
        // Per-agent rejection needs >= 9 of 10 matches at rate 1/2.
        let per_agent: f64 = (9..=10u64).map(|k| binom_pmf(10, k, 0.5)).sum();
        assert!((per_agent - 11.0 / 1024.0).abs() < 1e-12);
        assert!(1.0 - per_agent >= 0.98);
        let cfg = binary_config(1, 0, 10);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Randomise, Strategy::Randomise)
                .unwrap();
        let mech = MechanismSpec::PrejudiceAnchored {
            anchored_items: 10,
            match_cut: 0.9,
            agree_cut: 0.8,
            max_rounds: 16,
        };
        let trials = 20_000u64;
        let rejected = (0..trials)
            .filter(|&t| {
                let played = play_round(&mech, &cfg, &profile, 5, t).unwrap();
                let prop = mech
                    .propagate(
                        &played
                            .anchors
                            .view(played.round.reports(), cfg.assignment()),
                    )
                    .unwrap()
                    .unwrap();
                prop.status[0] == Status::Rejected
            })
            .count() as f64
            / trials as f64;
        let sd = libm::sqrt(per_agent * (1.0 - per_agent) / trials as f64);
        assert!(
            (rejected - per_agent).abs() < 4.0 * sd,
            "{rejected} vs {per_agent}"
        );
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

    struct Oracle(BTreeSet<AgentId>);
    impl Mechanism for Oracle {
        fn name(&self) -> &str {
            "oracle"
        }
        fn identify(&self, _: &MechanismView<'_>) -> Result<MechanismOutcome, MechanismError> {
            Ok(MechanismOutcome {
                identified: self.0.clone(),
            })
        }
    }

    #[test]
    fn degenerate_mechanisms_metrics() {
        let cfg = binary_config(6, 3, 10);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        let m = evaluate_mechanism(&Everyone, &cfg, &profile, 50, 1).unwrap();
        assert_eq!((m.p_ii_hat, m.p_uu_hat), (Some(1.0), Some(0.0)));
        let oracle = Oracle(truthful_informed_set(cfg.roster(), &profile));
        let m = evaluate_mechanism(&oracle, &cfg, &profile, 50, 1).unwrap();
        assert_eq!((m.p_ii_hat, m.p_uu_hat), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn empty_target_leaves_p_ii_undefined() {
        let cfg = binary_config(4, 2, 10);
        let profile = StrategyProfile::type_symmetric(
            cfg.roster(),
            Strategy::Prejudiced,
            Strategy::Prejudiced,
        )
        .unwrap();
        let m = evaluate_mechanism(&MechanismSpec::agreement(), &cfg, &profile, 20, 3).unwrap();
        assert_eq!(m.p_ii_hat, None);
        assert_eq!(m.p_uu_hat, Some(0.0));
        assert_eq!(m.counts.odds_ii(), None);
        assert_eq!(
            evaluate_mechanism(&Everyone, &cfg, &profile, 0, 3),
            Err(MechanismError::NoTrials)
        );
    }

    #[test]
    fn anchor_requests_validated() {
        let cfg = binary_config(3, 3, 5);
        let profile =
            StrategyProfile::type_symmetric(cfg.roster(), Strategy::Truthful, Strategy::Randomise)
                .unwrap();
        assert_eq!(
            play_round(&MechanismSpec::gold_seeded(0), &cfg, &profile, 0, 0).err(),
            Some(MechanismError::EmptyGold)
        );
        assert!(matches!(
            play_round(&MechanismSpec::gold_seeded(6), &cfg, &profile, 0, 0),
            Err(MechanismError::TooManyAnchors { .. })
        ));
        let iid = GameConfig::new(
            cfg.world().clone(),
            cfg.roster().clone(),
            cfg.assignment().clone(),
            PrejudiceMode::Iid,
        )
        .unwrap();
        assert_eq!(
            play_round(&MechanismSpec::prejudice_anchored(3), &iid, &profile, 0, 0).err(),
            Some(MechanismError::IidPrejudice)
        );
    }

    #[test]
    fn sample_items_distinct_sorted() {
        let mut rng = SimRng::seed_from_u64(8);
        for _ in 0..50 {
            let s = sample_items(20, 7, &mut rng).unwrap();
            assert_eq!(s.len(), 7);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(sample_items(4, 4, &mut rng).unwrap(), vec![0, 1, 2, 3]);
    }

    prop_compose! {
        fn report_grid()(n_agents in 2usize..7, n_items in 1usize..12, k in 2usize..4)
            (cells in prop::collection::vec(0..k, n_agents * n_items), n_agents in Just(n_agents), n_items in Just(n_items), k in Just(k))
            -> (Reports, usize) {
            (Reports::new(n_agents, n_items, cells.into_iter().map(Some).collect()), k)
        }
    }

    fn has_tie(r: &Reports, k: usize) -> bool {
        (0..r.n_items()).any(|j| {
            let mut counts = vec![0; k];
            r.item_row(j).iter().flatten().for_each(|&l| counts[l] += 1);
            let max = *counts.iter().max().unwrap();
            counts.iter().filter(|&&c| c == max).count() > 1
        })
    }

    proptest! {
        #[test]
        fn agreement_is_permutation_equivariant(
            (r, k) in report_grid(),
            threshold in 0.0f64..1.0,
            rot in 1usize..3,
        ) {
            prop_assume!(!has_tie(&r, k));
            let perm: Vec<Label> = (0..k).map(|l| (l + rot) % k).collect();
            let a = Assignment::complete(r.n_agents(), r.n_items()).unwrap();
            let before = agreement_mechanism(&r, &a, threshold).unwrap();
            let after = agreement_mechanism(&r.relabel(&perm), &a, threshold).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn agreement_is_antitone_in_threshold(
            (r, _k) in report_grid(),
            lo in 0.0f64..1.0,
            hi in 0.0f64..1.0,
        ) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let a = Assignment::complete(r.n_agents(), r.n_items()).unwrap();
            let wide = agreement_mechanism(&r, &a, lo).unwrap();
            let narrow = agreement_mechanism(&r, &a, hi).unwrap();
            prop_assert!(narrow.identified.is_subset(&wide.identified));
        }

        #[test]
        fn mechanisms_are_pure(
            (r, _k) in report_grid(),
            gold_bits in prop::collection::vec(any::<bool>(), 12),
        ) {
            let a = Assignment::complete(r.n_agents(), r.n_items()).unwrap();
            let copy = r.clone();
            prop_assert_eq!(agreement_mechanism(&r, &a, 0.7), agreement_mechanism(&copy, &a, 0.7));
            let truth: Vec<Label> = gold_bits.iter().take(r.n_items()).map(|&b| usize::from(b)).collect();
            let gold = GoldSet::from_labels(&truth, 0..r.n_items()).unwrap();
            prop_assert_eq!(
                gold_seeded_mechanism(&r, &a, &gold, &params(0.5)),
                gold_seeded_mechanism(&copy, &a, &gold, &params(0.5))
            );
        }

        #[test]
        fn propagation_is_monotone_and_bounded(
            seed in 0u64..1000,
            n_agents in 3usize..9,
            extra_items in 0usize..10,
            gold_count in 1usize..4,
        ) {
            let mut rng = SimRng::seed_from_u64(seed);
            let n_items = n_agents + extra_items;
            let a = crate::game::make_assignment(n_agents, n_items, 2, &mut rng).unwrap();
            let mut cells = vec![None; n_agents * n_items];
            for j in 0..n_items {
                for &ag in a.agents_on(j) {
                    cells[j * n_agents + ag] = Some((rng.next_u32() % 2) as usize);
                }
            }
            let r = Reports::new(n_agents, n_items, cells);
            let truth: Vec<Label> = (0..n_items).map(|_| (rng.next_u32() % 2) as usize).collect();
            let gold = GoldSet::from_labels(&truth, 0..gold_count.min(n_items)).unwrap();
            let p = gold_seeded_mechanism(&r, &a, &gold, &PropagationParams {
                seed_cut: 0.5, agree_cut: 0.5, max_rounds: n_agents,
            }).unwrap();
            prop_assert!(p.rounds <= n_agents);
            // Classified agents carry the round they were fixed in, and every
            // agent classified after round 0 has a trusted co-labeller fixed earlier.
            for agent in 0..n_agents {
                match (p.status[agent], p.classified_in[agent]) {
                    (Status::Unclassified, None) => {}
                    (Status::Unclassified, Some(_)) | (_, None) => prop_assert!(false),
                    (_, Some(0)) => {}
                    (_, Some(round)) => {
                        let has_earlier = a.items_of(agent).iter().any(|&j| a.agents_on(j).iter().any(|&o| {
                            o != agent && p.status[o] == Status::Trusted && p.classified_in[o].unwrap() < round
                        }));
                        prop_assert!(has_earlier);
                    }
                }
            }
        }
    }
}
