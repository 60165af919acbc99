//! Multi-run experiments built on the core crate: the gold-set sweep and the
//! equilibrium-selection sweep over prejudice distributions.

use crowdgame_core::equilibrium::{
    best_response_dynamics, classify_profile, random_profile, DynamicsOptions, EquilibriumError,
    ProfileClass,
};
use crowdgame_core::game::{
    generate_reports, truthful_informed_set, GameConfig, PrejudiceDraws, PrejudiceMode,
    StrategyProfile,
};
use crowdgame_core::mechanisms::{Anchors, Mechanism, MechanismError, MechanismSpec};
use crowdgame_core::probcore::{substream, StreamTag};
use rand_core::RngCore;
use rayon::prelude::*;

/// Give up on conditioned gold sweeps after this many draws per kept trial.
pub const MAX_DRAWS_PER_TRIAL: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GoldPoint {
    pub g: usize,
    /// Mean over trials of the fraction of agents whose identified status
    /// differs from membership in `A_{I,T}`.
    pub misclassification: f64,
    pub std_err: f64,
    pub mean_rounds: f64,
    pub trials: u64,
    /// Trial indices consumed, including the ones skipped by conditioning.
    pub draws: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SweepError {
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("gold-sweep needs a gold mechanism, got `{0}`")]
    NotGold(String),
    #[error("gold set size must be at least 1")]
    ZeroGold,
    #[error("conditioning on gold disagreement needs shared prejudice")]
    IidConditioning,
    #[error(
        "only {kept} of {draws} draws had the prejudice disagree with the truth on a gold item"
    )]
    RareCondition { kept: u64, draws: u64 },
}

struct GoldTrial {
    misclassified: f64,
    rounds: usize,
}

fn gold_trial(
    mechanism: &MechanismSpec,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    require_disagreement: bool,
    seed: u64,
    t: u64,
) -> Result<Option<GoldTrial>, MechanismError> {
    let round = generate_reports(cfg, profile, &mut substream(seed, StreamTag::World, t))?;
    let anchors = Anchors::draw(
        mechanism.anchors(),
        &round,
        &mut substream(seed, StreamTag::Mechanism, t),
    )?;
    if require_disagreement {
        let (Some(gold), PrejudiceDraws::Shared(u)) = (&anchors.gold, round.prejudice()) else {
            return Err(MechanismError::IidPrejudice);
        };
        if gold.items().all(|(item, y)| u[item] == y) {
            return Ok(None);
        }
    }
    let propagation = mechanism
        .propagate(&anchors.view(round.reports(), cfg.assignment()))?
        .ok_or(MechanismError::MissingAnchors)?;
    let outcome = propagation.outcome();
    let target = truthful_informed_set(cfg.roster(), profile);
    let n = cfg.n_agents();
    let wrong = (0..n)
        .filter(|a| outcome.contains(*a) != target.contains(a))
        .count();
    Ok(Some(GoldTrial {
        misclassified: wrong as f64 / n as f64,
        rounds: propagation.rounds,
    }))
}

/// Runs the gold-seeded mechanism with each gold-set size in `gs`.
///
/// With `require_disagreement`, trials where the shared prejudice equals the
/// truth on every gold item are skipped and replaced by later trial indices.
pub fn gold_sweep(
    mechanism: &MechanismSpec,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    gs: &[usize],
    require_disagreement: bool,
    trials: u64,
    seed: u64,
) -> Result<Vec<GoldPoint>, SweepError> {
    let MechanismSpec::GoldSeeded {
        accuracy_cut,
        agree_cut,
        max_rounds,
        ..
    } = *mechanism
    else {
        return Err(SweepError::NotGold(mechanism.name().to_string()));
    };
    if trials == 0 {
        return Err(MechanismError::NoTrials.into());
    }
    if require_disagreement && cfg.prejudice_mode() == PrejudiceMode::Iid {
        return Err(SweepError::IidConditioning);
    }
    profile
        .validate(cfg.roster())
        .map_err(MechanismError::from)?;
    gs.iter()
        .map(|&g| {
            if g == 0 {
                return Err(SweepError::ZeroGold);
            }
            let spec = MechanismSpec::GoldSeeded {
                gold_items: g,
                accuracy_cut,
                agree_cut,
                max_rounds,
            };
            let mut kept = Vec::with_capacity(trials as usize);
            let mut next = 0u64;
            let mut draws = 0u64;
            while (kept.len() as u64) < trials {
                if next >= trials * MAX_DRAWS_PER_TRIAL {
                    return Err(SweepError::RareCondition {
                        kept: kept.len() as u64,
                        draws: next,
                    });
                }
                let batch = (next..next + trials)
                    .into_par_iter()
                    .map(|t| {
                        gold_trial(&spec, cfg, profile, require_disagreement, seed, t)
                            .map(|r| (t, r))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                next += trials;
                for (t, r) in batch {
                    if let Some(r) = r {
                        if (kept.len() as u64) < trials {
                            kept.push(r);
                            draws = t + 1;
                        }
                    }
                }
            }
            let n = kept.len() as f64;
            let mean = kept.iter().map(|r| r.misclassified).sum::<f64>() / n;
            let var = if kept.len() > 1 {
                kept.iter()
                    .map(|r| (r.misclassified - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            } else {
                0.0
            };
            Ok(GoldPoint {
                g,
                misclassification: mean,
                std_err: (var / n).sqrt(),
                mean_rounds: kept.iter().map(|r| r.rounds as f64).sum::<f64>() / n,
                trials,
                draws,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinShares {
    pub prejudice: f64,
    pub truthful: f64,
    pub randomise: f64,
    pub other: f64,
    /// Fraction of restarts still switching when the pass budget ran out.
    pub nonconverged: f64,
    pub restarts: usize,
}

/// Runs best-response dynamics from `restarts` uniformly random profiles and
/// tallies where they end up. Restarts that did not converge are classified
/// by their final profile and also counted in `nonconverged`.
pub fn basin_shares(
    cfg: &GameConfig,
    mechanism: &MechanismSpec,
    options: &DynamicsOptions,
    restarts: usize,
    seed: u64,
) -> Result<BasinShares, SweepError> {
    let outcomes = (0..restarts as u64)
        .into_par_iter()
        .map(|r| {
            let initial =
                random_profile(cfg.roster(), &mut substream(seed, StreamTag::Custom(10), r));
            let dynamics_seed = substream(seed, StreamTag::Custom(11), r).next_u64();
            best_response_dynamics(cfg, &initial, mechanism, options, dynamics_seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut counts = [0usize; 4];
    let mut nonconverged = 0usize;
    for o in &outcomes {
        let slot = match classify_profile(cfg.roster(), &o.profile) {
            ProfileClass::Prejudice => 0,
            ProfileClass::Truthful => 1,
            ProfileClass::Randomise => 2,
            ProfileClass::Other => 3,
        };
        counts[slot] += 1;
        nonconverged += usize::from(!o.converged);
    }
    let share = |c: usize| {
        if restarts == 0 {
            0.0
        } else {
            c as f64 / restarts as f64
        }
    };
    Ok(BasinShares {
        prejudice: share(counts[0]),
        truthful: share(counts[1]),
        randomise: share(counts[2]),
        other: share(counts[3]),
        nonconverged: share(nonconverged),
        restarts,
    })
}
