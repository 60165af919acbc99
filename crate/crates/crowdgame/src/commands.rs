//! Subcommand implementations. Each returns the CSV text and a short
//! human-readable report; writing them out is left to the caller.

use std::fmt::Display;
use std::path::Path;

use crowdgame_core::equilibrium::{
    impossibility_demo, verify_equilibrium, DynamicsOptions, DEFAULT_EPSILON,
};
use crowdgame_core::mechanisms::{confusion_counts, Mechanism, MechanismError};
use crowdgame_core::probcore::{
    validate_world, Distribution, ValidationReport, WorldDistribution, STRICT_TOL,
};

use crate::config::{ConfigError, ExperimentConfig, MechanismConfig};
use crate::csv_out::{num, real, vector, Table};
use crate::sweeps::{basin_shares, gold_sweep, SweepError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed input or impossible parameters.
    #[error("{0}")]
    Usage(String),
    /// The input is well-formed but the experiment cannot run on it.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

fn usage(e: impl Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn mechanism_error(e: MechanismError) -> CliError {
    match e {
        MechanismError::NoFixedPoint(_) => CliError::Domain(e.to_string()),
        _ => usage(e),
    }
}

/// What a subcommand produced. `failed` marks a domain-level negative result
/// (a constraint or verdict that did not hold); the output is still valid.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub csv: Option<String>,
    pub report: String,
    pub failed: bool,
}

/// Command-line overrides of config values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
}

/// A parsed config together with its source, for line-anchored errors.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    origin: String,
    source: String,
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_source(&path.display().to_string(), source)
    }

    pub fn from_source(origin: &str, source: String) -> Result<Self, CliError> {
        let config = ExperimentConfig::parse(&source)
            .map_err(|e| CliError::Usage(e.render(origin, &source)))?;
        Ok(Self {
            config,
            origin: origin.to_string(),
            source,
        })
    }

    fn check<T>(&self, r: Result<T, ConfigError>) -> Result<T, CliError> {
        r.map_err(|e| CliError::Usage(e.render(&self.origin, &self.source)))
    }

    fn seed(&self, o: &Overrides) -> u64 {
        o.seed.unwrap_or(self.config.seed)
    }

    fn trials(&self, o: &Overrides) -> u64 {
        o.trials.unwrap_or(self.config.trials)
    }

    fn n_items(&self) -> usize {
        *self.config.assignment.n_items.get_ref()
    }

    /// The world, refusing to run on one that violates a constraint.
    fn valid_world(&self) -> Result<WorldDistribution, CliError> {
        let world = self.check(self.config.world())?;
        let report = validate_world(&world, STRICT_TOL);
        if !report.all_passed() {
            return Err(CliError::Domain(failure_message(&self.origin, &report)));
        }
        Ok(world)
    }
}

fn failure_message(origin: &str, report: &ValidationReport) -> String {
    let names = report
        .failures()
        .map(|c| format!("{} (measured {})", c.constraint.describe(), c.measured))
        .collect::<Vec<_>>()
        .join("; ");
    format!("{origin}: world violates {names}")
}

pub fn validate(l: &Loaded) -> Result<Output, CliError> {
    let world = l.check(l.config.world())?;
    l.check(
        l.config
            .scenario_with(world.clone(), l.n_items(), l.config.seed),
    )?;
    let report = validate_world(&world, STRICT_TOL);
    let mut text = String::new();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let how = if c.structural {
            " (holds by construction)"
        } else {
            ""
        };
        text.push_str(&format!(
            "{status} {}: measured {}{how}\n",
            c.constraint.describe(),
            c.measured
        ));
    }
    let failed = !report.all_passed();
    if failed {
        text.push_str(&failure_message(&l.origin, &report));
        text.push('\n');
    }
    Ok(Output {
        csv: None,
        report: text,
        failed,
    })
}

pub const SIMULATE_HEADER: [&str; 9] = [
    "n_items",
    "p_ii_hat",
    "p_uu_hat",
    "odds_ratio_ii",
    "odds_ratio_uu",
    "odds_ratio",
    "misclassification",
    "trials",
    "seed",
];

/// One row per item count in `[simulate] n_items_grid`, or a single row at
/// the configured item count.
pub fn simulate(l: &Loaded, o: &Overrides) -> Result<Output, CliError> {
    let (seed, trials) = (l.seed(o), l.trials(o));
    let world = l.valid_world()?;
    let grid = match &l.config.simulate {
        Some(s) if !s.n_items_grid.is_empty() => s.n_items_grid.clone(),
        _ => vec![l.n_items()],
    };
    let mut table = Table::new(&SIMULATE_HEADER);
    let mut report = String::new();
    for n_items in grid {
        let sc = l.check(l.config.scenario_with(world.clone(), n_items, seed))?;
        let c = confusion_counts(&sc.mechanism, &sc.game, &sc.profile, trials, seed)
            .map_err(mechanism_error)?;
        table.row([
            n_items.to_string(),
            num(c.p_ii()),
            num(c.p_uu()),
            num(c.odds_ii()),
            num(c.odds_uu()),
            num(c.diagnostic_odds_ratio()),
            num(c.misclassification()),
            trials.to_string(),
            seed.to_string(),
        ]);
        report.push_str(&format!(
            "n_items={n_items}: p_ii_hat={} p_uu_hat={}\n",
            num(c.p_ii()),
            num(c.p_uu())
        ));
    }
    Ok(Output {
        csv: Some(table.finish()),
        report,
        failed: false,
    })
}

pub const EQUILIBRIUM_HEADER: [&str; 10] = [
    "agent_type",
    "agent",
    "strategy",
    "deviation",
    "baseline",
    "deviated",
    "gain",
    "std_err",
    "within_epsilon",
    "verdict",
];

pub fn equilibrium(l: &Loaded, o: &Overrides) -> Result<Output, CliError> {
    let (seed, trials) = (l.seed(o), l.trials(o));
    let world = l.valid_world()?;
    let sc = l.check(l.config.scenario_with(world, l.n_items(), seed))?;
    let epsilon = l
        .config
        .equilibrium
        .as_ref()
        .map_or(DEFAULT_EPSILON, |e| e.epsilon);
    let verdict = verify_equilibrium(&sc.game, &sc.profile, &sc.mechanism, epsilon, trials, seed)
        .map_err(usage)?;
    let mut table = Table::new(&EQUILIBRIUM_HEADER);
    for d in &verdict.deviations {
        table.row([
            d.agent_type.name().to_string(),
            d.agent.to_string(),
            sc.profile.strategy(d.agent).name().to_string(),
            d.deviation.name().to_string(),
            real(d.baseline.value),
            real(d.deviated.value),
            real(d.gain),
            real(d.std_err),
            d.within(epsilon).to_string(),
            verdict.is_epsilon_equilibrium.to_string(),
        ]);
    }
    let report = format!(
        "{}-equilibrium: {} (max gain {})\n",
        epsilon,
        verdict.is_epsilon_equilibrium,
        num(verdict.max_gain())
    );
    Ok(Output {
        csv: Some(table.finish()),
        report,
        failed: !verdict.is_epsilon_equilibrium,
    })
}

/// Flags of the impossibility subcommand; unset values come from the config
/// or from the defaults below.
#[derive(Debug, Clone, Default)]
pub struct ImpossibilityArgs {
    pub k: Option<usize>,
    pub base_dist: Option<Vec<f64>>,
    pub agents: Option<usize>,
    pub items: Option<usize>,
    pub mechanism: Option<String>,
}

pub const IMPOSSIBILITY_DEFAULT_AGENTS: usize = 6;
pub const IMPOSSIBILITY_DEFAULT_ITEMS: usize = 30;
pub const IMPOSSIBILITY_DEFAULT_TRIALS: u64 = 1000;

/// A mechanism by name with default parameters.
pub fn mechanism_by_name(name: &str) -> Result<MechanismConfig, CliError> {
    let src = match name {
        "agreement" | "pairwise" => format!("kind = \"{name}\""),
        "gold" => "kind = \"gold\"\ngold_items = 5".to_string(),
        "prejudice-anchored" => "kind = \"prejudice-anchored\"\nanchored_items = 10".to_string(),
        _ => return Err(CliError::Usage(format!(
            "unknown mechanism `{name}` (expected agreement, pairwise, gold or prejudice-anchored)"
        ))),
    };
    toml::from_str(&src).map_err(usage)
}

pub const IMPOSSIBILITY_HEADER: [&str; 16] = [
    "k",
    "base_dist",
    "agents",
    "items",
    "mechanism",
    "trials",
    "seed",
    "success_rate_scenario1",
    "success_rate_scenario2",
    "combined",
    "pooled_std_err",
    "bound",
    "within_bound",
    "distribution_test_pvalue",
    "chi_square",
    "df",
];

pub fn impossibility(
    l: Option<&Loaded>,
    args: &ImpossibilityArgs,
    o: &Overrides,
) -> Result<Output, CliError> {
    let cfg = l.map(|l| &l.config);
    let k = args.k.or(cfg.map(|c| *c.world.k.get_ref())).unwrap_or(2);
    let base = match (&args.base_dist, cfg) {
        (Some(b), _) => b.clone(),
        (None, Some(c)) if args.k.is_none_or(|k| k == c.world.p_y.get_ref().len()) => {
            c.world.p_y.get_ref().clone()
        }
        _ => vec![1.0 / k as f64; k],
    };
    if base.len() != k {
        return Err(CliError::Usage(format!(
            "base distribution has {} entries, expected k = {k}",
            base.len()
        )));
    }
    let base_dist = Distribution::new(base.clone())
        .map_err(|e| CliError::Usage(format!("base distribution: {e}")))?;
    let agents = args
        .agents
        .or(cfg.map(|c| *c.roster.n_agents.get_ref()))
        .unwrap_or(IMPOSSIBILITY_DEFAULT_AGENTS);
    let items = args
        .items
        .or(cfg.map(|c| *c.assignment.n_items.get_ref()))
        .unwrap_or(IMPOSSIBILITY_DEFAULT_ITEMS);
    let mechanism = match (&args.mechanism, cfg) {
        (Some(name), _) => mechanism_by_name(name)?,
        (None, Some(c)) => c.mechanism.get_ref().clone(),
        (None, None) => mechanism_by_name("agreement")?,
    };
    let spec = mechanism.to_spec();
    if spec.uses_anchors() {
        return Err(CliError::Domain(format!(
            "mechanism `{}` reads gold or anchor labels; the impossibility experiment is defined for mechanisms that see only the reports",
            spec.name()
        )));
    }
    let seed = o.seed.or(cfg.map(|c| c.seed)).unwrap_or(0);
    let trials = o
        .trials
        .or(cfg.map(|c| c.trials))
        .unwrap_or(IMPOSSIBILITY_DEFAULT_TRIALS);
    let r = impossibility_demo(k, &base_dist, agents, items, &spec, trials, seed).map_err(usage)?;
    let bound = 1.0 + 3.0 * r.pooled_std_err;
    let within = r.combined <= bound;
    let mut table = Table::new(&IMPOSSIBILITY_HEADER);
    table.row([
        k.to_string(),
        vector(&base),
        agents.to_string(),
        items.to_string(),
        spec.name().to_string(),
        trials.to_string(),
        seed.to_string(),
        real(r.success_rate_scenario1),
        real(r.success_rate_scenario2),
        real(r.combined),
        real(r.pooled_std_err),
        real(bound),
        within.to_string(),
        real(r.distribution_test_pvalue),
        real(r.chi_square),
        r.df.to_string(),
    ]);
    let report = format!(
        "success rates {} + {} = {} (bound {}), report-law test p = {}\n",
        r.success_rate_scenario1,
        r.success_rate_scenario2,
        r.combined,
        bound,
        r.distribution_test_pvalue
    );
    Ok(Output {
        csv: Some(table.finish()),
        report,
        failed: !within,
    })
}

pub const GOLD_SWEEP_HEADER: [&str; 7] = [
    "g",
    "misclassification_rate",
    "std_err",
    "mean_rounds",
    "trials",
    "draws",
    "seed",
];

fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::RareCondition { .. } => CliError::Domain(e.to_string()),
        SweepError::Mechanism(m) => mechanism_error(m),
        _ => usage(e),
    }
}

pub fn gold_sweep_cmd(l: &Loaded, gs: Option<&[usize]>, o: &Overrides) -> Result<Output, CliError> {
    let (seed, trials) = (l.seed(o), l.trials(o));
    let section = l.config.gold_sweep.as_ref();
    let gs: Vec<usize> = match (gs, section) {
        (Some(g), _) => g.to_vec(),
        (None, Some(s)) => s.g.clone(),
        (None, None) => {
            return Err(CliError::Usage(
                "gold-sweep needs --g or a [gold_sweep] section with g".to_string(),
            ))
        }
    };
    if gs.is_empty() {
        return Err(CliError::Usage(
            "gold-sweep needs at least one gold set size".to_string(),
        ));
    }
    let require = section.is_some_and(|s| s.require_disagreement);
    let world = l.valid_world()?;
    let sc = l.check(l.config.scenario_with(world, l.n_items(), seed))?;
    let points = gold_sweep(
        &sc.mechanism,
        &sc.game,
        &sc.profile,
        &gs,
        require,
        trials,
        seed,
    )
    .map_err(sweep_error)?;
    let mut table = Table::new(&GOLD_SWEEP_HEADER);
    let mut report = String::new();
    for p in &points {
        table.row([
            p.g.to_string(),
            real(p.misclassification),
            real(p.std_err),
            real(p.mean_rounds),
            p.trials.to_string(),
            p.draws.to_string(),
            seed.to_string(),
        ]);
        report.push_str(&format!(
            "g={}: misclassification {} (se {})\n",
            p.g, p.misclassification, p.std_err
        ));
    }
    Ok(Output {
        csv: Some(table.finish()),
        report,
        failed: false,
    })
}

/// Flags of the entropy sweep; unset values come from `[entropy_sweep]`.
#[derive(Debug, Clone, Default)]
pub struct EntropyArgs {
    pub p_u: Vec<Vec<f64>>,
    pub steps: Option<usize>,
    pub restarts: Option<usize>,
}

pub const ENTROPY_SWEEP_HEADER: [&str; 12] = [
    "p_u",
    "entropy_p_u",
    "entropy_informed_reports",
    "basin_prejudice",
    "basin_truthful",
    "basin_randomise",
    "basin_other",
    "nonconverged",
    "restarts",
    "steps",
    "trials",
    "seed",
];

pub fn entropy_sweep(l: &Loaded, args: &EntropyArgs, o: &Overrides) -> Result<Output, CliError> {
    let section = l.config.entropy_sweep.as_ref();
    let missing = |what: &str| {
        CliError::Usage(format!(
            "entropy-sweep needs {what} (flag or [entropy_sweep] section)"
        ))
    };
    let p_us = if !args.p_u.is_empty() {
        args.p_u.clone()
    } else {
        section
            .map(|s| s.p_u.clone())
            .ok_or_else(|| missing("--p-u"))?
    };
    let steps = args
        .steps
        .or(section.map(|s| s.steps))
        .ok_or_else(|| missing("--steps"))?;
    let restarts = args
        .restarts
        .or(section.map(|s| s.restarts))
        .ok_or_else(|| missing("--restarts"))?;
    let trials = o
        .trials
        .or(section.map(|s| s.trials))
        .ok_or_else(|| missing("--trials"))?;
    let seed = l.seed(o);
    let options = DynamicsOptions {
        max_passes: steps,
        trials,
        ..DynamicsOptions::default()
    };
    let mut table = Table::new(&ENTROPY_SWEEP_HEADER);
    let mut report = String::new();
    for p_u in &p_us {
        let world = l.check(l.config.world_with_p_u(p_u, None))?;
        let checks = validate_world(&world, STRICT_TOL);
        if !checks.all_passed() {
            return Err(CliError::Domain(failure_message(
                &format!("p_u = [{}]", vector(p_u)),
                &checks,
            )));
        }
        let h_u = world.p_u().entropy();
        let h_i = world.signal_marginal().entropy();
        let sc = l.check(l.config.scenario_with(world, l.n_items(), seed))?;
        let shares =
            basin_shares(&sc.game, &sc.mechanism, &options, restarts, seed).map_err(sweep_error)?;
        table.row([
            vector(p_u),
            real(h_u),
            real(h_i),
            real(shares.prejudice),
            real(shares.truthful),
            real(shares.randomise),
            real(shares.other),
            real(shares.nonconverged),
            restarts.to_string(),
            steps.to_string(),
            trials.to_string(),
            seed.to_string(),
        ]);
        report.push_str(&format!(
            "H(P(U))={h_u:.4}: prejudice {} truthful {} randomise {} other {} nonconverged {}\n",
            shares.prejudice, shares.truthful, shares.randomise, shares.other, shares.nonconverged
        ));
    }
    Ok(Output {
        csv: Some(table.finish()),
        report,
        failed: false,
    })
}
