//! Investment environment: monthly price factors, portfolio transitions under
//! simplex allocations, and episode rollouts.
//!
//! Timing convention within month `t`: existing balances grow first
//! (savings and mortgage at `1 + r_t`, property and stocks by their growth
//! factors), then the monthly contribution is split by the action and
//! added, then the month counter advances.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default monthly contribution in NOK.
pub const DEFAULT_CONTRIBUTION: f64 = 10_000.0;
/// Default investment horizon in months (30 years).
pub const DEFAULT_MONTHS: usize = 360;
/// Mortgage principal outstanding at the start of every episode, in NOK.
pub const DEFAULT_MORTGAGE: f64 = 2_000_000.0;
/// Tolerance for accepting an action as a point on the simplex.
pub const SIMPLEX_CONTRACT_TOL: f64 = 1e-6;

pub const PRICE_CSV_HEADER: [&str; 4] = ["month", "stock_factor", "property_factor", "interest_rate"];
pub const EPISODE_CSV_HEADER: [&str; 11] = [
    "month",
    "savings",
    "property",
    "stocks",
    "luxury_cum",
    "mortgage_outstanding",
    "act_savings",
    "act_property",
    "act_stocks",
    "act_luxury",
    "act_mortgage",
];

/// The five allocation channels, in action-vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Asset {
    Savings,
    Property,
    Stocks,
    Luxury,
    Mortgage,
}

impl Asset {
    pub const ALL: [Asset; 5] = [
        Asset::Savings,
        Asset::Property,
        Asset::Stocks,
        Asset::Luxury,
        Asset::Mortgage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Asset::Savings => "savings",
            Asset::Property => "property",
            Asset::Stocks => "stocks",
            Asset::Luxury => "luxury",
            Asset::Mortgage => "mortgage",
        }
    }
}

/// Month-by-month growth factors and interest rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    stock_factor: Vec<f64>,
    property_factor: Vec<f64>,
    interest_rate: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonthPrices {
    pub stock_factor: f64,
    pub property_factor: f64,
    pub interest_rate: f64,
}

impl PriceSeries {
    pub fn new(stock_factor: Vec<f64>, property_factor: Vec<f64>, interest_rate: Vec<f64>) -> Result<Self> {
        if stock_factor.len() != property_factor.len() || stock_factor.len() != interest_rate.len() {
            return Err(Error::Shape("price columns have different lengths".into()));
        }
        for (t, ((&s, &p), &r)) in stock_factor
            .iter()
            .zip(&property_factor)
            .zip(&interest_rate)
            .enumerate()
        {
            if !(s.is_finite() && s > 0.0 && p.is_finite() && p > 0.0) {
                return Err(Error::Contract(format!("growth factors must be positive at month {t}")));
            }
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Contract(format!("interest rate must be non-negative at month {t}")));
            }
        }
        Ok(Self {
            stock_factor,
            property_factor,
            interest_rate,
        })
    }

    /// Same factors every month.
    pub fn constant(months: usize, stock_factor: f64, property_factor: f64, interest_rate: f64) -> Result<Self> {
        Self::new(
            vec![stock_factor; months],
            vec![property_factor; months],
            vec![interest_rate; months],
        )
    }

    pub fn months(&self) -> usize {
        self.stock_factor.len()
    }

    pub fn at(&self, month: usize) -> MonthPrices {
        MonthPrices {
            stock_factor: self.stock_factor[month],
            property_factor: self.property_factor[month],
            interest_rate: self.interest_rate[month],
        }
    }

    pub fn stock_factors(&self) -> &[f64] {
        &self.stock_factor
    }

    pub fn property_factors(&self) -> &[f64] {
        &self.property_factor
    }

    pub fn interest_rates(&self) -> &[f64] {
        &self.interest_rate
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = PRICE_CSV_HEADER.join(",");
        out.push('\n');
        for t in 0..self.months() {
            let p = self.at(t);
            let _ = writeln!(out, "{t},{},{},{}", p.stock_factor, p.property_factor, p.interest_rate);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput("price file is empty".into()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .clone();
        if header.iter().collect::<Vec<_>>() != PRICE_CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header '{}'", PRICE_CSV_HEADER.join(",")),
            });
        }
        let (mut s, mut p, mut r) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                msg: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .ok_or_else(|| Error::Parse { line, msg: format!("missing column {}", PRICE_CSV_HEADER[i]) })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line, msg: format!("{}: {e}", PRICE_CSV_HEADER[i]) })
            };
            let month = field(0)?;
            if month != s.len() as f64 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected month {}, found {month}", s.len()),
                });
            }
            let (gs, gp, rate) = (field(1)?, field(2)?, field(3)?);
            if !(gs > 0.0 && gp > 0.0) || !gs.is_finite() || !gp.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: "growth factors must be positive".into(),
                });
            }
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: "interest rate must be non-negative".into(),
                });
            }
            s.push(gs);
            p.push(gp);
            r.push(rate);
        }
        if s.is_empty() {
            return Err(Error::EmptyInput("price file has no data rows".into()));
        }
        Self::new(s, p, r)
    }
}

/// Reads a price series from the `month,stock_factor,property_factor,interest_rate` CSV schema.
pub fn load_price_csv(path: &Path) -> Result<PriceSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PriceSeries::from_csv_str(&text)
}

/// Parameters of the synthetic market (all monthly).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMarketConfig {
    pub stock_drift: f64,
    pub stock_volatility: f64,
    pub property_drift: f64,
    pub property_volatility: f64,
    pub interest_mean: f64,
    pub interest_reversion: f64,
    pub interest_volatility: f64,
    pub seed: u64,
}

impl Default for SyntheticMarketConfig {
    fn default() -> Self {
        Self {
            stock_drift: 0.006,
            stock_volatility: 0.04,
            property_drift: 0.004,
            property_volatility: 0.015,
            interest_mean: 0.002,
            interest_reversion: 0.1,
            interest_volatility: 0.0005,
            seed: 42,
        }
    }
}

/// Log-normal stock and property factors with `E[ln g] = μ − σ²/2`, and a
/// mean-reverting interest rate clipped at zero starting from its mean.
pub fn generate_synthetic(config: &SyntheticMarketConfig, months: usize) -> Result<PriceSeries> {
    if config.stock_volatility < 0.0 || config.property_volatility < 0.0 || config.interest_volatility < 0.0 {
        return Err(Error::Contract("volatilities must be non-negative".into()));
    }
    if config.interest_mean < 0.0 {
        return Err(Error::Contract("mean interest rate must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut s = Vec::with_capacity(months);
    let mut p = Vec::with_capacity(months);
    let mut r = Vec::with_capacity(months);
    let mut rate = config.interest_mean;
    for _ in 0..months {
        let zs: f64 = StandardNormal.sample(&mut rng);
        let zp: f64 = StandardNormal.sample(&mut rng);
        let zr: f64 = StandardNormal.sample(&mut rng);
        let (ms, vs) = (config.stock_drift, config.stock_volatility);
        let (mp, vp) = (config.property_drift, config.property_volatility);
        s.push((ms - 0.5 * vs * vs + vs * zs).exp());
        p.push((mp - 0.5 * vp * vp + vp * zp).exp());
        r.push(rate);
        rate = (rate + config.interest_reversion * (config.interest_mean - rate) + config.interest_volatility * zr).max(0.0);
    }
    PriceSeries::new(s, p, r)
}

/// A point on the 5-simplex: fractions of the monthly contribution per asset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationAction([f64; 5]);

impl AllocationAction {
    /// Accepts fractions within [`SIMPLEX_CONTRACT_TOL`] of the simplex and
    /// projects them onto it (clip at 0, renormalize). Fractions already
    /// summing to 1 within rounding are kept bit for bit.
    pub fn new(fractions: [f64; 5]) -> Result<Self> {
        if !Self(fractions).is_on_simplex(SIMPLEX_CONTRACT_TOL) {
            return Err(Error::Contract(format!("action {fractions:?} is not on the simplex")));
        }
        let clipped = fractions.map(|v| v.max(0.0));
        let total: f64 = clipped.iter().sum();
        if (total - 1.0).abs() <= 1e-12 {
            return Ok(Self(clipped));
        }
        Ok(Self(clipped.map(|v| v / total)))
    }

    pub fn from_slice(fractions: &[f64]) -> Result<Self> {
        let arr: [f64; 5] = fractions
            .try_into()
            .map_err(|_| Error::Shape(format!("action needs 5 fractions, got {}", fractions.len())))?;
        Self::new(arr)
    }

    pub fn uniform() -> Self {
        Self([0.2; 5])
    }

    pub fn all_in(asset: Asset) -> Self {
        let mut a = [0.0; 5];
        a[asset.index()] = 1.0;
        Self(a)
    }

    pub fn fractions(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn get(&self, asset: Asset) -> f64 {
        self.0[asset.index()]
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|v| v.is_finite() && *v >= -tol && *v <= 1.0 + tol)
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }
}

/// Holdings and liabilities at the start of a month, all in NOK.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub savings: f64,
    pub property: f64,
    pub stocks: f64,
    pub mortgage_outstanding: f64,
    pub mortgage_principal_repaid: f64,
    pub cumulative_luxury: f64,
    pub month: usize,
}

impl PortfolioState {
    pub fn with_mortgage(principal: f64) -> Self {
        Self {
            mortgage_outstanding: principal,
            ..Self::default()
        }
    }

    /// Holdings in action-channel order: savings, property, stocks,
    /// cumulative luxury spend, mortgage principal repaid.
    pub fn holdings(&self) -> [f64; 5] {
        [
            self.savings,
            self.property,
            self.stocks,
            self.cumulative_luxury,
            self.mortgage_principal_repaid,
        ]
    }
}

/// One month of portfolio evolution under the documented timing convention.
pub fn step(state: &PortfolioState, action: &AllocationAction, prices: MonthPrices, contribution: f64) -> Result<PortfolioState> {
    if !action.is_on_simplex(SIMPLEX_CONTRACT_TOL) {
        return Err(Error::Contract(format!("action {:?} is off the simplex", action.fractions())));
    }
    let growth_cash = 1.0 + prices.interest_rate;
    let mut next = PortfolioState {
        savings: state.savings * growth_cash,
        property: state.property * prices.property_factor,
        stocks: state.stocks * prices.stock_factor,
        mortgage_outstanding: state.mortgage_outstanding * growth_cash,
        mortgage_principal_repaid: state.mortgage_principal_repaid,
        cumulative_luxury: state.cumulative_luxury,
        month: state.month + 1,
    };
    let [a_sav, a_prop, a_stock, a_lux, a_mort] = *action.fractions();
    next.savings += contribution * a_sav;
    next.property += contribution * a_prop;
    next.stocks += contribution * a_stock;
    next.cumulative_luxury += contribution * a_lux;
    let payment = contribution * a_mort;
    let applied = payment.min(next.mortgage_outstanding);
    next.mortgage_outstanding -= applied;
    next.mortgage_principal_repaid += applied;
    next.savings += payment - applied;
    Ok(next)
}

/// Net worth credited to the investor; luxury spend is consumption and excluded.
pub fn portfolio_value(state: &PortfolioState) -> f64 {
    state.savings + state.property + state.stocks + state.mortgage_principal_repaid
}

/// Maps the observation history (one feature vector per month so far) to an action.
pub trait Policy {
    /// Called once before each episode.
    fn reset(&mut self) {}

    fn act(&mut self, history: &[Vec<f64>]) -> Result<AllocationAction>;
}

/// Always returns the same allocation.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub AllocationAction);

impl Policy for ConstantPolicy {
    fn act(&mut self, _history: &[Vec<f64>]) -> Result<AllocationAction> {
        Ok(self.0)
    }
}

/// Number of features produced by [`MarketEnv::observe`] before any extras.
pub const BASE_OBS_DIM: usize = 10;

/// A price series plus the contribution schedule, mortgage size and any
/// per-customer features appended to every observation.
#[derive(Clone, Debug)]
pub struct MarketEnv {
    pub series: PriceSeries,
    pub contribution: f64,
    pub initial_mortgage: f64,
    pub extra_features: Vec<f64>,
}

impl MarketEnv {
    pub fn new(series: PriceSeries, contribution: f64) -> Self {
        Self {
            series,
            contribution,
            initial_mortgage: DEFAULT_MORTGAGE,
            extra_features: Vec::new(),
        }
    }

    pub fn with_extra_features(mut self, features: Vec<f64>) -> Self {
        self.extra_features = features;
        self
    }

    pub fn horizon(&self) -> usize {
        self.series.months()
    }

    pub fn obs_dim(&self) -> usize {
        BASE_OBS_DIM + self.extra_features.len()
    }

    pub fn initial_state(&self) -> PortfolioState {
        PortfolioState::with_mortgage(self.initial_mortgage)
    }

    /// Holdings normalized by cumulative contributions, remaining mortgage
    /// fraction, elapsed fraction of the horizon, the current month's
    /// market factors (as percentages), then any extra features.
    pub fn observe(&self, state: &PortfolioState) -> Vec<f64> {
        let scale = (state.month as f64 * self.contribution).max(self.contribution).max(1.0);
        let mut obs = Vec::with_capacity(self.obs_dim());
        obs.extend(state.holdings().iter().map(|h| h / scale));
        obs.push(if self.initial_mortgage > 0.0 {
            state.mortgage_outstanding / self.initial_mortgage
        } else {
            0.0
        });
        obs.push(state.month as f64 / self.horizon().max(1) as f64);
        if state.month < self.horizon() {
            let p = self.series.at(state.month);
            obs.push((p.stock_factor - 1.0) * 100.0);
            obs.push((p.property_factor - 1.0) * 100.0);
            obs.push(p.interest_rate * 100.0);
        } else {
            obs.extend([0.0; 3]);
        }
        obs.extend_from_slice(&self.extra_features);
        obs
    }

    pub fn step(&self, state: &PortfolioState, action: &AllocationAction) -> Result<PortfolioState> {
        if state.month >= self.horizon() {
            return Err(Error::Contract(format!(
                "month {} is past the {}-month horizon",
                state.month,
                self.horizon()
            )));
        }
        step(state, action, self.series.at(state.month), self.contribution)
    }

    pub fn run_episode(&self, policy: &mut dyn Policy) -> Result<EpisodeResult> {
        policy.reset();
        let horizon = self.horizon();
        let mut state = self.initial_state();
        let mut history = Vec::with_capacity(horizon);
        let mut states = Vec::with_capacity(horizon);
        let mut actions = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            history.push(self.observe(&state));
            let action = policy.act(&history)?;
            state = self.step(&state, &action)?;
            states.push(state);
            actions.push(action);
        }
        let final_value = states.last().map_or(0.0, portfolio_value);
        Ok(EpisodeResult {
            states,
            actions,
            final_value,
        })
    }
}

/// Rolls out `policy` over `series` with the default mortgage.
pub fn run_episode(policy: &mut dyn Policy, series: &PriceSeries, contribution: f64) -> Result<EpisodeResult> {
    MarketEnv::new(series.clone(), contribution).run_episode(policy)
}

/// Rollout record: `states[t]` is the portfolio at the end of month `t`
/// after taking `actions[t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub states: Vec<PortfolioState>,
    pub actions: Vec<AllocationAction>,
    pub final_value: f64,
}

impl EpisodeResult {
    pub fn months(&self) -> usize {
        self.states.len()
    }

    pub fn final_state(&self) -> Option<&PortfolioState> {
        self.states.last()
    }

    /// Time-averaged allocation; uniform zeros for an empty episode.
    pub fn mean_action(&self) -> [f64; 5] {
        let mut mean = [0.0; 5];
        if self.actions.is_empty() {
            return mean;
        }
        for a in &self.actions {
            for (m, v) in mean.iter_mut().zip(a.fractions()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.actions.len() as f64);
        mean
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = EPISODE_CSV_HEADER.join(",");
        out.push('\n');
        for (t, (s, a)) in self.states.iter().zip(&self.actions).enumerate() {
            let f = a.fractions();
            let _ = writeln!(
                out,
                "{t},{},{},{},{},{},{},{},{},{},{}",
                s.savings, s.property, s.stocks, s.cumulative_luxury, s.mortgage_outstanding, f[0], f[1], f[2], f[3], f[4]
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_prices(r: f64) -> MonthPrices {
        MonthPrices {
            stock_factor: 1.0,
            property_factor: 1.0,
            interest_rate: r,
        }
    }

    #[test]
    fn all_savings_single_step() {
        let state = PortfolioState {
            savings: 100_000.0,
            ..Default::default()
        };
        let next = step(&state, &AllocationAction::all_in(Asset::Savings), flat_prices(0.002), 10_000.0).unwrap();
        assert!((next.savings - 110_200.0).abs() < 1e-9);
        assert_eq!(next.month, 1);
    }

    #[test]
    fn identity_dynamics_only_advance_month() {
        let state = PortfolioState {
            savings: 5.0,
            property: 6.0,
            stocks: 7.0,
            mortgage_outstanding: 8.0,
            mortgage_principal_repaid: 9.0,
            cumulative_luxury: 10.0,
            month: 3,
        };
        let next = step(&state, &AllocationAction::uniform(), flat_prices(0.0), 0.0).unwrap();
        assert_eq!(next, PortfolioState { month: 4, ..state });
    }

    #[test]
    fn mortgage_overpayment_is_rerouted_to_savings() {
        let state = PortfolioState {
            mortgage_outstanding: 500.0,
            ..Default::default()
        };
        let next = step(&state, &AllocationAction::all_in(Asset::Mortgage), flat_prices(0.0), 10_000.0).unwrap();
        assert_eq!(next.mortgage_outstanding, 0.0);
        assert_eq!(next.mortgage_principal_repaid, 500.0);
        assert_eq!(next.savings, 9_500.0);
    }

    #[test]
    fn off_simplex_action_is_a_contract_error() {
        assert!(AllocationAction::new([0.5, 0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(AllocationAction::new([-0.1, 0.5, 0.6, 0.0, 0.0]).is_err());
        let raw = AllocationAction([0.3, 0.3, 0.3, 0.0, 0.0]);
        assert!(matches!(
            step(&PortfolioState::default(), &raw, flat_prices(0.0), 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn portfolio_value_excludes_luxury() {
        assert_eq!(portfolio_value(&PortfolioState::default()), 0.0);
        let s = PortfolioState {
            savings: 1e6,
            cumulative_luxury: 5e5,
            ..Default::default()
        };
        assert_eq!(portfolio_value(&s), 1e6);
    }

    #[test]
    fn noise_free_synthetic_is_exact_drift() {
        let cfg = SyntheticMarketConfig {
            stock_volatility: 0.0,
            property_volatility: 0.0,
            interest_volatility: 0.0,
            ..Default::default()
        };
        let s = generate_synthetic(&cfg, 24).unwrap();
        assert!(s.stock_factors().iter().all(|g| *g == cfg.stock_drift.exp()));
        assert!(s.property_factors().iter().all(|g| *g == cfg.property_drift.exp()));
        assert!(s.interest_rates().iter().all(|r| *r == cfg.interest_mean));
    }

    #[test]
    fn synthetic_is_deterministic_per_seed() {
        let cfg = SyntheticMarketConfig::default();
        assert_eq!(generate_synthetic(&cfg, 100).unwrap(), generate_synthetic(&cfg, 100).unwrap());
        let other = SyntheticMarketConfig { seed: 7, ..cfg.clone() };
        assert_ne!(generate_synthetic(&cfg, 100).unwrap(), generate_synthetic(&other, 100).unwrap());
    }

    #[test]
    fn csv_parse_two_rows_and_errors() {
        let text = "month,stock_factor,property_factor,interest_rate\n0,1.01,1.002,0.002\n1,0.99,1.0,0.0015\n";
        let s = PriceSeries::from_csv_str(text).unwrap();
        assert_eq!(s.months(), 2);
        assert_eq!(s.at(1).stock_factor, 0.99);
        assert_eq!(s.at(1).interest_rate, 0.0015);

        let zero = "month,stock_factor,property_factor,interest_rate\n0,1.0,1.0,0.0\n1,0,1.0,0.0\n";
        match PriceSeries::from_csv_str(zero) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(PriceSeries::from_csv_str(""), Err(Error::EmptyInput(_))));
        let garbage = "month,stock_factor,property_factor,interest_rate\n0,abc,1.0,0.0\n";
        assert!(matches!(PriceSeries::from_csv_str(garbage), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_series_gives_empty_episode() {
        let series = PriceSeries::new(vec![], vec![], vec![]).unwrap();
        let r = run_episode(&mut ConstantPolicy(AllocationAction::uniform()), &series, 10_000.0).unwrap();
        assert_eq!(r.months(), 0);
        assert_eq!(r.final_value, 0.0);
    }

    #[test]
    fn observation_has_documented_width() {
        let series = PriceSeries::constant(12, 1.01, 1.0, 0.001).unwrap();
        let env = MarketEnv::new(series, 10_000.0).with_extra_features(vec![0.1, 0.2, 0.3]);
        let obs = env.observe(&env.initial_state());
        assert_eq!(obs.len(), BASE_OBS_DIM + 3);
        assert_eq!(obs[5], 1.0);
        assert!((obs[7] - 1.0).abs() < 1e-12);
    }
}
