use intrinsic_affinity::market::{
    generate_synthetic, load_price_csv, portfolio_value, run_episode, AllocationAction, Asset, ConstantPolicy, MarketEnv,
    Policy, PriceSeries, SyntheticMarketConfig,
};
use intrinsic_affinity::Result;
use proptest::prelude::*;

#[test]
fn stocks_only_matches_annuity_future_value() {
    let series = PriceSeries::constant(360, 1.005, 1.0, 0.0).unwrap();
    let mut policy = ConstantPolicy(AllocationAction::all_in(Asset::Stocks));
    let result = run_episode(&mut policy, &series, 10_000.0).unwrap();
    let annuity = (1.005_f64.powi(360) - 1.0) / 0.005 * 10_000.0;
    assert!((annuity - 1.00452e7).abs() / 1.00452e7 < 1e-4);
    assert!((result.final_value - annuity).abs() / annuity < 1e-6);
    assert_eq!(result.months(), 360);
}

#[test]
fn dyadic_allocation_conserves_cash_exactly() {
    let series = PriceSeries::constant(360, 1.0, 1.0, 0.0).unwrap();
    let action = AllocationAction::new([0.5, 0.125, 0.125, 0.125, 0.125]).unwrap();
    let r = run_episode(&mut ConstantPolicy(action), &series, 10_000.0).unwrap();
    let last = r.final_state().unwrap();
    assert_eq!(r.final_value + last.cumulative_luxury, 360.0 * 10_000.0);
}

#[test]
fn generated_series_survives_csv_round_trip() {
    let series = generate_synthetic(&SyntheticMarketConfig::default(), 360).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prices.csv");
    series.write_csv(&path).unwrap();
    let back = load_price_csv(&path).unwrap();
    assert_eq!(back.months(), series.months());
    for t in 0..series.months() {
        let (a, b) = (series.at(t), back.at(t));
        assert!((a.stock_factor - b.stock_factor).abs() <= 1e-12);
        assert!((a.property_factor - b.property_factor).abs() <= 1e-12);
        assert!((a.interest_rate - b.interest_rate).abs() <= 1e-12);
    }
}

#[test]
fn log_stock_factor_mean_obeys_law_of_large_numbers() {
    let cfg = SyntheticMarketConfig::default();
    let n = 100_000;
    let series = generate_synthetic(&cfg, n).unwrap();
    let mean = series.stock_factors().iter().map(|g| g.ln()).sum::<f64>() / n as f64;
    let expected = cfg.stock_drift - 0.5 * cfg.stock_volatility.powi(2);
    let standard_error = cfg.stock_volatility / (n as f64).sqrt();
    assert!(
        (mean - expected).abs() < 3.0 * standard_error,
        "mean {mean} vs {expected} (se {standard_error})"
    );
}

#[test]
fn synthetic_rates_never_negative() {
    let cfg = SyntheticMarketConfig {
        interest_mean: 0.0,
        interest_volatility: 0.01,
        ..Default::default()
    };
    let s = generate_synthetic(&cfg, 5_000).unwrap();
    assert!(s.interest_rates().iter().all(|r| *r >= 0.0));
}

struct Schedule(u16);

impl Policy for Schedule {
    fn act(&mut self, history: &[Vec<f64>]) -> Result<AllocationAction> {
        let month = history.len() - 1;
        Ok(if self.0 >> month & 1 == 1 {
            AllocationAction::all_in(Asset::Mortgage)
        } else {
            AllocationAction::all_in(Asset::Savings)
        })
    }
}

/// Closed-form outstanding balance of a loan accruing `rates` and receiving
/// `payment` in the months flagged by `mask`.
fn outstanding_oracle(initial: f64, rates: &[f64], payment: f64, mask: u16) -> f64 {
    let mut total = initial * rates.iter().map(|r| 1.0 + r).product::<f64>();
    for t in 0..rates.len() {
        if mask >> t & 1 == 1 {
            total -= payment * rates[t + 1..].iter().map(|r| 1.0 + r).product::<f64>();
        }
    }
    total
}

fn cumulative_counts(mask: u16) -> [u8; 12] {
    let mut out = [0u8; 12];
    let mut c = 0;
    for (t, o) in out.iter_mut().enumerate() {
        c += (mask >> t & 1) as u8;
        *o = c;
    }
    out
}

#[test]
fn earlier_mortgage_repayment_dominates_exhaustively() {
    let rate_sets: [[f64; 12]; 2] = [
        [0.002; 12],
        [0.001, 0.004, 0.0025, 0.003, 0.0005, 0.006, 0.002, 0.0015, 0.0035, 0.001, 0.005, 0.002],
    ];
    for rates in rate_sets {
        let series = PriceSeries::new(vec![1.0; 12], vec![1.0; 12], rates.to_vec()).unwrap();
        let env = MarketEnv::new(series, 10_000.0);
        // initial − final outstanding = principal repaid − interest paid
        let net: Vec<f64> = (0..1u16 << 12)
            .map(|mask| {
                let r = env.run_episode(&mut Schedule(mask)).unwrap();
                let last = r.final_state().unwrap();
                let oracle = outstanding_oracle(env.initial_mortgage, &rates, 10_000.0, mask);
                assert!((last.mortgage_outstanding - oracle).abs() < 1e-6);
                let interest = last.mortgage_outstanding + last.mortgage_principal_repaid - env.initial_mortgage;
                last.mortgage_principal_repaid - interest
            })
            .collect();
        let prefix: Vec<[u8; 12]> = (0..1u16 << 12).map(cumulative_counts).collect();
        let mut compared = 0usize;
        for a in 0..1usize << 12 {
            for b in 0..1usize << 12 {
                if a == b || prefix[a][11] != prefix[b][11] {
                    continue;
                }
                if prefix[a].iter().zip(&prefix[b]).all(|(x, y)| x >= y) {
                    compared += 1;
                    assert!(net[a] >= net[b] - 1e-6, "schedule {a:012b} repays earlier than {b:012b}");
                }
            }
        }
        assert!(compared > 10_000);
    }
}

fn simplex_point() -> impl Strategy<Value = [f64; 5]> {
    prop::array::uniform5(0.0..1.0f64).prop_filter_map("non-degenerate", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| w.map(|v| v / total))
    })
}

struct Replay(Vec<AllocationAction>);

impl Policy for Replay {
    fn act(&mut self, history: &[Vec<f64>]) -> Result<AllocationAction> {
        Ok(self.0[history.len() - 1])
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_allocations_conserve_cash(points in prop::collection::vec(simplex_point(), 1..120)) {
        let months = points.len();
        let actions: Vec<_> = points.iter().map(|p| AllocationAction::new(*p).unwrap()).collect();
        let series = PriceSeries::constant(months, 1.0, 1.0, 0.0).unwrap();
        let r = run_episode(&mut Replay(actions), &series, 10_000.0).unwrap();
        let last = r.final_state().unwrap();
        let invested = months as f64 * 10_000.0;
        prop_assert!((r.final_value + last.cumulative_luxury - invested).abs() <= 1e-9 * invested);
        for a in &r.actions {
            prop_assert!(a.fractions().iter().all(|v| *v >= 0.0));
            prop_assert!((a.fractions().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn episodes_are_deterministic(seed in any::<u64>(), point in simplex_point()) {
        let cfg = SyntheticMarketConfig { seed, ..Default::default() };
        let series = generate_synthetic(&cfg, 48).unwrap();
        let action = AllocationAction::new(point).unwrap();
        let a = run_episode(&mut ConstantPolicy(action), &series, 10_000.0).unwrap();
        let b = run_episode(&mut ConstantPolicy(action), &series, 10_000.0).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.states.iter().all(|s| portfolio_value(s) >= 0.0 && s.mortgage_outstanding >= 0.0));
    }
}
