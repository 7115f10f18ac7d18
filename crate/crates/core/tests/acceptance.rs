//! Acceptance criteria, one line each:
//!
//! ```text
//! cargo test --release -p dpsim-core --test acceptance
//! cargo test --release -p dpsim-core --test acceptance -- --include-ignored   # adds full scale
//! ```
//!
//! Pass criterion numbers as filters to run a subset, e.g. `-- 2 3`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use dpsim::config::RunConfig;
use dpsim::engine::{
    run_simulation, run_tournament, Roster, SimulationSettings, StepBudget, TournamentSettings, TraceLevel,
};
use dpsim::market::{realize_period, sample_market_params, scientist_choice_probs, MarketParams};
use dpsim::persist::SimulationTrace;
use dpsim::pipeline::execute;
use dpsim::report::ReportBuilder;
use dpsim::rng::RngStream;
use dpsim::strategies::anneal::AnnealSchedule;
use dpsim::strategies::bmodel::{fit_models, normal_nodes, subset_share, DemandModels, SalesRecord};
use dpsim::strategies::logit::{ChoiceObservation, MixtureLogit};
use dpsim::strategies::ml::{best_price, select_and_fit};
use dpsim::strategies::ols::{select_model, OlsForm};
use dpsim::strategies::wls::{wls_fit, WeightScheme};
use dpsim::strategies::{build_roster, FixedPrice, MlParams, StrategyId, StrategyParams};

type Outcome = Result<String, String>;

/// Criterion number, check, and whether it only runs on request.
type Criterion = (usize, fn() -> Outcome, bool);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn full_roster() -> Roster {
    build_roster(&StrategyId::ALL, &StrategyParams::default())
}

fn tournament(roster: &Roster, sims: u64, periods: usize, seed: u64, level: TraceLevel) -> dpsim::engine::TournamentSummary {
    let mut simulation = SimulationSettings::new(seed, periods);
    simulation.trace_level = level;
    let settings = TournamentSettings { simulations: sims, parallelism: 0, simulation };
    run_tournament::<std::convert::Infallible, _>(roster, &settings, |_| Ok(())).expect("tournament runs")
}

fn max_share_error(cards: &[dpsim::engine::Scorecard]) -> f64 {
    cards
        .iter()
        .flat_map(|c| [&c.oligopoly_share, &c.duopoly_share, &c.final_share])
        .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let summary = tournament(&full_roster(), 200, 100, 1, TraceLevel::Revenue);
    let secs = start.elapsed().as_secs_f64();
    let err = max_share_error(&summary.scorecards);
    check(
        err <= 1e-12 && secs < 60.0 && summary.scorecards.len() == 200,
        format!("max |sum - 1| = {err:.1e} over 200 sims x 100 periods, {secs:.1} s"),
    )
}

/// Revenue of `n` symmetric sellers at price `p` facing one logit class.
fn symmetric_revenue(p: f64, n: usize, alpha: f64, beta: f64) -> f64 {
    let q = scientist_choice_probs(&vec![p; n], alpha, beta);
    p * q.purchase.iter().sum::<f64>()
}

fn criterion_2() -> Outcome {
    let mut rng = RngStream::from_seed(2).child("calibration");
    let step = 0.01;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let params = sample_market_params(8, &mut rng).map_err(|e| e.to_string())?;
        for n in [2, 8] {
            for (alpha, beta, target) in [
                (params.alpha_phd, params.beta_phd(n).unwrap(), params.p_phd),
                (params.alpha_prof, params.beta_prof(n).unwrap(), params.p_prof),
            ] {
                let hi = (4.0 * target / step).ceil() as usize;
                let (mut best_p, mut best_v) = (0.0, f64::NEG_INFINITY);
                for k in 1..=hi {
                    let p = k as f64 * step;
                    let v = symmetric_revenue(p, n, alpha, beta);
                    if v > best_v {
                        (best_p, best_v) = (p, v);
                    }
                }
                worst = worst.max((best_p - target).abs());
            }
        }
    }
    check(worst <= step + 1e-9, format!("largest distance from target price {worst:.4} (grid step {step})"))
}

/// Closed-form expected sales per period `[segment][k]`.
fn expected_sales(prices: &[f64], p: &MarketParams) -> [Vec<f64>; 3] {
    let m = prices.len();
    let pmin = prices.iter().copied().fold(f64::INFINITY, f64::min);
    let ties = prices.iter().filter(|x| **x == pmin).count() as f64;
    let sho = prices.iter().map(|&x| if x == pmin { p.lambda * p.theta_sho * (-pmin / p.beta_sho).exp() / ties } else { 0.0 }).collect();
    let loy = prices.iter().map(|&x| p.lambda * p.theta_loy / m as f64 * (-x / p.beta_loy).exp()).collect();
    let phd = scientist_choice_probs(prices, p.alpha_phd, p.beta_phd(m).unwrap());
    let prof = scientist_choice_probs(prices, p.alpha_prof, p.beta_prof(m).unwrap());
    let sci = (0..m)
        .map(|k| p.lambda * p.theta_sci * (p.gamma_phd * phd.purchase[k] + p.gamma_prof * prof.purchase[k]))
        .collect();
    [sho, loy, sci]
}

fn criterion_3() -> Outcome {
    let periods = 100_000;
    let mut rng = RngStream::from_seed(3).child("configurations");
    let mut zs = Vec::new();
    for c in 0..20 {
        let m = 2 + rng.below(7);
        let params = sample_market_params(m, &mut rng).map_err(|e| e.to_string())?;
        let prices: Vec<f64> = (0..m).map(|_| rng.uniform(1.0, 25.0)).collect();
        let expected = expected_sales(&prices, &params);
        let mut market = RngStream::from_seed(3).child("market").child_index(c);
        let mut sum = [vec![0.0; m], vec![0.0; m], vec![0.0; m]];
        let mut sq = sum.clone();
        for _ in 0..periods {
            let o = realize_period(&prices, &params, &mut market).map_err(|e| e.to_string())?;
            for (seg, sales) in [&o.sales_sho, &o.sales_loy, &o.sales_sci].into_iter().enumerate() {
                for k in 0..m {
                    let x = sales[k] as f64;
                    sum[seg][k] += x;
                    sq[seg][k] += x * x;
                }
            }
        }
        let n = periods as f64;
        for seg in 0..3 {
            for k in 0..m {
                let mean = sum[seg][k] / n;
                let var = (sq[seg][k] / n - mean * mean) * n / (n - 1.0);
                // a rare outcome may never occur; fall back to the Poisson error of the expectation
                let var = if var == 0.0 { expected[seg][k] } else { var };
                if var == 0.0 {
                    if mean != 0.0 {
                        return Err(format!("config {c} segment {seg} competitor {k}: sales where none are possible"));
                    }
                    continue;
                }
                let z = (mean - expected[seg][k]).abs() / (var / n).sqrt();
                zs.push(z);
            }
        }
    }
    // Each mean is judged at 3 standard errors. Across ~200 comparisons a correct model
    // still lands a few outside, so the count of misses must stay within the 99.9%
    // binomial quantile and the mean squared z must be consistent with 1.
    let n = zs.len();
    let misses = zs.iter().filter(|z| **z > 3.0).count();
    let allowed = binomial_quantile(n, 2.0 * normal_tail(3.0), 0.999);
    let mean_sq = zs.iter().map(|z| z * z).sum::<f64>() / n as f64;
    let chi_band = 3.0 * (2.0 / n as f64).sqrt();
    let worst = zs.iter().copied().fold(0.0, f64::max);
    check(
        misses <= allowed && (mean_sq - 1.0).abs() <= chi_band,
        format!(
            "{misses} of {n} segment-competitor means beyond 3 SE (allowed {allowed}), largest |z| {worst:.2}, \
             mean z^2 {mean_sq:.3}; 20 configs x {periods} periods"
        ),
    )
}

/// Upper tail of the standard normal.
fn normal_tail(z: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    1.0 - Normal::standard().cdf(z)
}

/// Smallest `k` with `P(Binomial(n, p) <= k) >= level`.
fn binomial_quantile(n: usize, p: f64, level: f64) -> usize {
    use statrs::distribution::{Binomial, DiscreteCDF};
    let b = Binomial::new(p, n as u64).unwrap();
    (0..=n).find(|&k| b.cdf(k as u64) >= level).unwrap_or(n)
}

fn criterion_4() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = RunConfig { simulations: 50, periods: 200, seed: 4, ..RunConfig::default() };
    let serial = RunConfig { out: tmp.path().join("serial"), parallelism: 1, ..base.clone() };
    let parallel = RunConfig { out: tmp.path().join("parallel"), parallelism: 4, ..base };
    let start = Instant::now();
    execute(&serial).map_err(|e| e.to_string())?;
    execute(&parallel).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut files = 0;
    for entry in std::fs::read_dir(&serial.out).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.is_file() {
            let other = parallel.out.join(path.file_name().unwrap());
            let (a, b) = (std::fs::read(&path).map_err(|e| e.to_string())?, std::fs::read(&other).map_err(|e| e.to_string())?);
            if a != b {
                return Err(format!("{} differs between serial and parallel runs", path.display()));
            }
            files += 1;
        }
    }
    check(files == 51, format!("{files} files byte-identical, serial vs 4-thread run, 50 sims x 200 periods, {secs:.1} s"))
}

fn criterion_5() -> Outcome {
    let roster: Roster = vec![build_roster(&[StrategyId::Greedy], &StrategyParams::default()).remove(0), Arc::new(FixedPrice(40.0))];
    let mut deviations = 0;
    let mut checked = 0;
    for sim in 0..10 {
        let r = run_simulation(&roster, sim, &SimulationSettings::new(5, 1000)).map_err(|e| e.to_string())?;
        for c in r.duopolies.iter().chain([&r.oligopoly]) {
            for p in &c.periods[1..] {
                checked += 1;
                if p.prices[0] != 40.0 {
                    deviations += 1;
                }
            }
        }
    }
    check(deviations == 0, format!("{deviations} of {checked} greedy prices from period 2 on differ from 40"))
}

/// Logit share of the first seller, written out independently of the crate.
fn logit_share(a: f64, b: f64, own: f64, others: &[f64]) -> f64 {
    let e = |p: f64| (a - b * p).exp();
    e(own) / (1.0 + e(own) + others.iter().map(|p| e(*p)).sum::<f64>())
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // OLS: linear demand recovers the vertex, log demand wins selection
    let prices: Vec<f64> = (1..=40).map(|i| i as f64).collect();
    let lin: Vec<f64> = prices.iter().map(|p| 100.0 - 2.0 * p).collect();
    let m = select_model(&prices, &lin).ok_or("no OLS model")?;
    let vertex = m.optimal_price(0.1, 100.0);
    let good = m.form == OlsForm::LinLin && (m.fit.r_squared - 1.0).abs() < 1e-12 && (vertex - 25.0).abs() <= 0.1 + 1e-9;
    ok &= good;
    notes.push(format!("ols vertex {vertex:.1}"));
    let expo: Vec<f64> = prices.iter().map(|p| (5.0 - 0.1 * p).exp()).collect();
    let m = select_model(&prices, &expo).ok_or("no OLS model")?;
    ok &= m.form == OlsForm::LogDemand;
    notes.push(format!("ols log-demand {:?}", m.form));

    // WLS: exact coefficients under every scheme
    let mut rng = RngStream::from_seed(6).child("wls");
    let own: Vec<f64> = (0..80).map(|_| rng.uniform(0.0, 40.0)).collect();
    let others: Vec<f64> = (0..80).map(|_| rng.uniform(0.0, 120.0)).collect();
    let demand: Vec<f64> = own.iter().zip(&others).map(|(x, y)| 50.0 - 2.0 * x + 0.5 * y).collect();
    let mut wls_err: f64 = 0.0;
    for scheme in [WeightScheme::Uniform, WeightScheme::HalfLife(20.0), WeightScheme::HalfLife(100.0), WeightScheme::Window(50)] {
        let f = wls_fit(&own, &others, &demand, scheme).ok_or("no WLS fit")?;
        wls_err = wls_err.max((f.a - 50.0).abs()).max((f.b + 2.0).abs()).max((f.c - 0.5).abs());
    }
    ok &= wls_err <= 1e-6;
    notes.push(format!("wls max coef error {wls_err:.1e}"));

    // mixture EM: single-component data, slope within 10%
    let mut rng = RngStream::from_seed(6).child("logit");
    let data: Vec<ChoiceObservation> = (0..500)
        .map(|_| {
            let own_price = rng.uniform(2.0, 18.0);
            let competitor_prices = vec![rng.uniform(2.0, 18.0), rng.uniform(2.0, 18.0)];
            let sales = 100.0 * logit_share(10.0, 1.0, own_price, &competitor_prices);
            ChoiceObservation { own_price, competitor_prices, sales }
        })
        .collect();
    let mut mix = MixtureLogit::initial(100.0, 10, &data);
    mix.em(&data, 200, &mut StepBudget::unlimited()).map_err(|e| e.to_string())?;
    let slope = mix.dominant().b;
    ok &= (slope - 1.0).abs() <= 0.1;
    notes.push(format!("em slope {slope:.3}"));

    // b-model: annealing recovers subset bounds (1, 2) exactly
    let mut rng = RngStream::from_seed(6).child("subset");
    let records: Vec<SalesRecord> = (0..500)
        .map(|_| {
            let own_price = rng.uniform(0.0, 100.0);
            let mut profile: Vec<f64> = (0..4).map(|_| rng.uniform(0.0, 100.0)).collect();
            profile.sort_by(f64::total_cmp);
            let sales = 60.0 * subset_share(own_price, &profile, 1, 2);
            SalesRecord { own_price, profile, sales }
        })
        .collect();
    let fitted = fit_models(
        &records,
        DemandModels::initial(50.0, 5),
        &AnnealSchedule::default(),
        &normal_nodes(8),
        &mut rng,
        &mut StepBudget::unlimited(),
    )
    .map_err(|e| e.to_string())?;
    ok &= (fitted.d, fitted.e) == (1, 2);
    notes.push(format!("subset bounds ({}, {})", fitted.d, fitted.e));

    // ml: noiseless linear demand, chosen price at the vertex 20
    let mut rng = RngStream::from_seed(6).child("ml");
    let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.uniform(5.0, 35.0), rng.uniform(10.0, 60.0), rng.uniform(10.0, 60.0)]).collect();
    let y: Vec<f64> = x.iter().map(|r| 120.0 - 3.0 * r[0]).collect();
    let (_, model) = select_and_fit(&MlParams::default().family(), &x, &y, 5, &mut rng).ok_or("no regressor")?;
    let p = best_price(&model, &[30.0, 40.0], 0.1, 100.0);
    ok &= (p - 20.0).abs() <= 0.1 + 1e-9;
    notes.push(format!("ml price {p:.1}"));

    check(ok, notes.join(", "))
}

/// Spearman rank correlation with average ranks for ties.
fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|a, b| v[*a].total_cmp(&v[*b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

fn criterion_7() -> Outcome {
    let ids = StrategyId::ALL;
    let roster = full_roster();
    let (sims, periods) = (500, 250);
    let settings = TournamentSettings { simulations: sims, parallelism: 0, simulation: SimulationSettings::new(7, periods) };
    let mut report = ReportBuilder::new(&ids);
    let start = Instant::now();
    run_tournament(&roster, &settings, |r| report.add(&SimulationTrace::from_result(r, &ids, periods, TraceLevel::Full)).map(|_| ()))
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let report = report.finish();

    let loyal: BTreeMap<u64, f64> = report
        .theta
        .iter()
        .filter(|t| t.segment == "loy" && t.competitor == "all")
        .map(|t| ((t.bucket_lo * 10.0).round() as u64, t.oligopoly_revenue))
        .collect();
    let xs: Vec<f64> = loyal.keys().map(|b| *b as f64).collect();
    let ys: Vec<f64> = loyal.values().copied().collect();
    let rho = spearman(&xs, &ys);
    let greedy = report.extremes.iter().find(|e| e.competitor == "greedy").ok_or("no greedy row")?;
    let (olig, duo) = report.share_dispersion();
    let a = rho > 0.8;
    let b = greedy.price_high_strict <= 0.01;
    let c = olig > duo;
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    check(
        a && b && c,
        format!(
            "(a) spearman {rho:.3} over {} loyal-share buckets {}; (b) greedy strictly highest in {:.4} of periods {}; \
             (c) share sd oligopoly {olig:.4} vs duopoly {duo:.4} {}; {secs:.0} s on {threads} thread(s)",
            xs.len(),
            pass(a),
            greedy.price_high_strict,
            pass(b),
            pass(c)
        ),
    )
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for id in [StrategyId::BGrid, StrategyId::Ols] {
        let roster = build_roster(&[id; 8], &StrategyParams::default());
        let summary = tournament(&roster, 200, 250, 8, TraceLevel::Revenue);
        let worst = summary.final_score.iter().map(|s| (s - 0.125).abs()).fold(0.0, f64::max);
        ok &= worst <= 0.02;
        notes.push(format!("{id} x8: max |score - 1/8| = {worst:.4}"));
    }
    check(ok, notes.join(", "))
}

fn criterion_9() -> Outcome {
    let roster = full_roster();
    let (sims, periods) = (5000, 1000);
    let start = Instant::now();
    let summary = tournament(&roster, sims, periods, 9, TraceLevel::Revenue);
    let secs = start.elapsed().as_secs_f64();
    let sampled: Vec<u64> = (0..sims).step_by(100).collect();
    let err = max_share_error(&sampled.iter().map(|&s| summary.scorecards[s as usize].clone()).collect::<Vec<_>>());
    let mut settings = SimulationSettings::new(9, periods);
    settings.trace_level = TraceLevel::Revenue;
    for &sim in &sampled {
        let again = run_simulation(&roster, sim, &settings).map_err(|e| e.to_string())?;
        if again.scorecard != summary.scorecards[sim as usize] {
            return Err(format!("simulation {sim} not reproducible"));
        }
    }
    check(err <= 1e-12, format!("{sims} sims x {periods} periods x 29 competitions in {secs:.0} s; 1% sample normalised and reproducible"))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let include_ignored = args.iter().any(|a| a == "--include-ignored" || a == "--ignored");
    let filters: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    if args.iter().any(|a| a == "--list") {
        for n in 1..=9 {
            println!("criterion_{n}: test");
        }
        return;
    }

    let criteria: [Criterion; 9] = [
        (1, criterion_1, false),
        (2, criterion_2, false),
        (3, criterion_3, false),
        (4, criterion_4, false),
        (5, criterion_5, false),
        (6, criterion_6, false),
        (7, criterion_7, false),
        (8, criterion_8, false),
        (9, criterion_9, true),
    ];
    let mut failed = 0;
    for (n, run, ignored) in criteria {
        if !filters.is_empty() && !filters.contains(&n) {
            continue;
        }
        if ignored && !include_ignored && !filters.contains(&n) {
            println!("criterion {n}: SKIP (full-scale run; pass --include-ignored)");
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail}) [{secs:.1} s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail}) [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
