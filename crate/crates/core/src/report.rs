//! Aggregate analyses over a set of simulation traces, written as CSV.
//!
//! Every table is keyed by roster slot. Slots whose strategy appears more
//! than once in the roster are labelled `id#slot`.
//!
//! | file            | contents                                                        |
//! |-----------------|-----------------------------------------------------------------|
//! | `scores.csv`    | mean oligopoly, duopoly and final share per slot, with rank     |
//! | `shares.csv`    | the same shares per simulation                                  |
//! | `pairwise.csv`  | mean duopoly revenue per period of row against column           |
//! | `extremes.csv`  | fraction of oligopoly periods lowest/highest in price, sales, revenue |
//! | `prices.csv`    | price distribution overall, per market type and per opponent    |
//! | `segments.csv`  | per-segment sales per period and revenue per expected arrival   |
//! | `theta.csv`     | revenue and price by segment-share bucket                       |
//!
//! Price distributions, extremes and series statistics need full traces;
//! revenue-only traces contribute to the other tables only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{CompetitionKind, CompetitionTrace};
use crate::persist::{list_trace_files, read_simulation, PersistError, SimulationTrace};
use crate::stats::percentile_sorted;
use crate::strategies::StrategyId;

/// Number of segment-share buckets on `[0, 1]`, each `0.1` wide.
pub const THETA_BUCKETS: usize = 10;
pub const THETA_BUCKET_WIDTH: f64 = 1.0 / THETA_BUCKETS as f64;
const SEGMENTS: [&str; 3] = ["sho", "loy", "sci"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no trace files in {0}")]
    NoTraces(PathBuf),
    #[error("none of the {0} trace files could be read")]
    NoCompleteTraces(usize),
    #[error("simulation {sim} has roster {found:?}, expected {expected:?}")]
    RosterMismatch { sim: u64, expected: Vec<StrategyId>, found: Vec<StrategyId> },
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("creating {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Display label per roster slot.
pub fn slot_labels(roster: &[StrategyId]) -> Vec<String> {
    roster
        .iter()
        .enumerate()
        .map(|(slot, id)| {
            if roster.iter().filter(|x| *x == id).count() > 1 {
                format!("{id}#{slot}")
            } else {
                id.to_string()
            }
        })
        .collect()
}

/// Revenue shares with an even split when total revenue is zero.
fn normalise(revenue: &[f64]) -> Vec<f64> {
    let total: f64 = revenue.iter().sum();
    if total > 0.0 {
        revenue.iter().map(|r| r / total).collect()
    } else {
        vec![1.0 / revenue.len() as f64; revenue.len()]
    }
}

/// Per-competitor revenue of a competition, summed from its periods when
/// they are present.
fn competition_revenue(c: &CompetitionTrace) -> Vec<f64> {
    if c.periods.is_empty() {
        return c.summary.revenue.clone();
    }
    let mut r = vec![0.0; c.participants.len()];
    for p in &c.periods {
        for (acc, v) in r.iter_mut().zip(&p.outcome.revenue) {
            *acc += v;
        }
    }
    r
}

/// Oligopoly, duopoly and final shares of one simulation, recomputed from
/// the trace alone.
pub fn recompute_shares(t: &SimulationTrace) -> SimulationShares {
    let m = t.header.roster.len();
    let mut oligopoly = vec![0.0; m];
    let mut duopoly = vec![0.0; m];
    for c in &t.competitions {
        let target = if c.id.kind == CompetitionKind::Oligopoly { &mut oligopoly } else { &mut duopoly };
        for (&slot, r) in c.participants.iter().zip(competition_revenue(c)) {
            target[slot] += r;
        }
    }
    let oligopoly = normalise(&oligopoly);
    let duopoly = normalise(&duopoly);
    let final_share = oligopoly.iter().zip(&duopoly).map(|(x, y)| (x + y) / 2.0).collect();
    SimulationShares { sim: t.header.sim, oligopoly, duopoly, final_share }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationShares {
    pub sim: u64,
    pub oligopoly: Vec<f64>,
    pub duopoly: Vec<f64>,
    pub final_share: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub slot: usize,
    pub competitor: String,
    pub strategy: StrategyId,
    pub oligopoly_share: f64,
    pub duopoly_share: f64,
    pub final_score: f64,
    pub final_q25: f64,
    pub final_median: f64,
    pub final_q75: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShareRow {
    pub sim: u64,
    pub slot: usize,
    pub competitor: String,
    pub oligopoly_share: f64,
    pub duopoly_share: f64,
    pub final_score: f64,
}

/// Fractions of oligopoly periods in which a competitor was at the bottom or
/// top of the market. Ties count for every tied competitor, so a column can
/// sum to more than one; the `strict` columns count sole extremes only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremeRow {
    pub slot: usize,
    pub competitor: String,
    pub periods: u64,
    pub price_low: f64,
    pub price_high: f64,
    pub sales_low: f64,
    pub sales_high: f64,
    pub revenue_low: f64,
    pub revenue_high: f64,
    pub price_low_strict: f64,
    pub price_high_strict: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceRow {
    pub slot: usize,
    pub competitor: String,
    /// `all`, `oligopoly`, `duopoly` or `vs:<opponent>`.
    pub scope: String,
    pub periods: u64,
    pub mean: f64,
    pub sd: Option<f64>,
    pub cv: Option<f64>,
    pub min: Option<f64>,
    pub q25: Option<f64>,
    pub median: Option<f64>,
    pub q75: Option<f64>,
    pub max: Option<f64>,
    /// Mean over competitions of the coefficient of variation of the
    /// competitor's own price series.
    pub mean_series_cv: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentRow {
    pub slot: usize,
    pub competitor: String,
    /// `oligopoly` or `duopoly`.
    pub scope: String,
    pub sales_sho: f64,
    pub sales_loy: f64,
    pub sales_sci: f64,
    pub revenue_per_arrival_sho: f64,
    pub revenue_per_arrival_loy: f64,
    pub revenue_per_arrival_sci: f64,
    pub revenue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaRow {
    pub segment: String,
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    /// Roster label, or `all` for the mean over the roster.
    pub competitor: String,
    pub simulations: u64,
    pub oligopoly_revenue: f64,
    pub duopoly_revenue: f64,
    pub oligopoly_price: f64,
}

/// Square matrix of mean revenue per period: `mean[j][k]` is what slot `j`
/// earned against `k`. Diagonal entries are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTable {
    pub labels: Vec<String>,
    pub mean: Vec<Vec<Option<f64>>>,
    /// Mean of each row over its opponents.
    pub row_average: Vec<f64>,
    /// Mean of each column: what opponents earned against that slot.
    pub column_average: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub roster: Vec<StrategyId>,
    pub labels: Vec<String>,
    pub simulations: usize,
    /// Simulations that carried per-period data.
    pub full_traces: usize,
    /// Largest gap between recomputed and recorded final shares.
    pub max_score_discrepancy: f64,
    pub scores: Vec<ScoreRow>,
    pub shares: Vec<ShareRow>,
    pub pairwise: PairwiseTable,
    pub extremes: Vec<ExtremeRow>,
    pub prices: Vec<PriceRow>,
    pub segments: Vec<SegmentRow>,
    pub theta: Vec<ThetaRow>,
}

#[derive(Clone, Debug, Default)]
struct PriceAcc {
    values: Vec<f64>,
    sum: f64,
    count: u64,
    series_cv: Vec<f64>,
}

impl PriceAcc {
    fn merge<'a>(parts: impl IntoIterator<Item = &'a PriceAcc>) -> PriceAcc {
        let mut out = PriceAcc::default();
        for p in parts {
            out.values.extend_from_slice(&p.values);
            out.sum += p.sum;
            out.count += p.count;
            out.series_cv.extend_from_slice(&p.series_cv);
        }
        out
    }

    fn row(mut self, slot: usize, competitor: &str, scope: String) -> PriceRow {
        let mean = if self.count > 0 { self.sum / self.count as f64 } else { f64::NAN };
        let mut row = PriceRow {
            slot,
            competitor: competitor.to_string(),
            scope,
            periods: self.count,
            mean,
            sd: None,
            cv: None,
            min: None,
            q25: None,
            median: None,
            q75: None,
            max: None,
            mean_series_cv: None,
        };
        if !self.values.is_empty() {
            self.values.sort_by(f64::total_cmp);
            let v = &self.values;
            let sd = sample_sd(v);
            row.sd = Some(sd);
            row.cv = (mean > 0.0).then(|| sd / mean);
            row.min = v.first().copied();
            row.q25 = Some(percentile_sorted(v, 25.0));
            row.median = Some(percentile_sorted(v, 50.0));
            row.q75 = Some(percentile_sorted(v, 75.0));
            row.max = v.last().copied();
        }
        if !self.series_cv.is_empty() {
            row.mean_series_cv = Some(self.series_cv.iter().sum::<f64>() / self.series_cv.len() as f64);
        }
        row
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default)]
struct SegmentAcc {
    periods: f64,
    sales: [f64; 3],
    revenue: [f64; 3],
    expected_arrivals: [f64; 3],
}

#[derive(Clone, Copy, Debug, Default)]
struct ThetaAcc {
    sims: u64,
    oligopoly_revenue: f64,
    duopoly_revenue: f64,
    oligopoly_price: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct ExtremeAcc {
    low: [u64; 3],
    high: [u64; 3],
    price_low_strict: u64,
    price_high_strict: u64,
}

/// Incremental report over simulations added in any order.
pub struct ReportBuilder {
    roster: Vec<StrategyId>,
    labels: Vec<String>,
    first_k: Option<u64>,
    shares: BTreeMap<u64, SimulationShares>,
    full_traces: usize,
    max_discrepancy: f64,
    pairwise_sum: Vec<Vec<f64>>,
    oligopoly_periods: u64,
    extremes: Vec<ExtremeAcc>,
    /// `prices[slot][scope]`; scopes `0..m` are duopolies against that
    /// opponent, scope `m` the oligopoly.
    prices: Vec<Vec<PriceAcc>>,
    /// `segments[slot][0]` oligopoly, `[1]` duopoly.
    segments: Vec<[SegmentAcc; 2]>,
    /// `theta[segment][bucket][slot]`
    theta: Vec<Vec<Vec<ThetaAcc>>>,
}

impl ReportBuilder {
    pub fn new(roster: &[StrategyId]) -> Self {
        let m = roster.len();
        Self {
            roster: roster.to_vec(),
            labels: slot_labels(roster),
            first_k: None,
            shares: BTreeMap::new(),
            full_traces: 0,
            max_discrepancy: 0.0,
            pairwise_sum: vec![vec![0.0; m]; m],
            oligopoly_periods: 0,
            extremes: vec![ExtremeAcc::default(); m],
            prices: vec![vec![PriceAcc::default(); m + 1]; m],
            segments: vec![[SegmentAcc::default(); 2]; m],
            theta: vec![vec![vec![ThetaAcc::default(); m]; THETA_BUCKETS]; SEGMENTS.len()],
        }
    }

    /// Only simulations with index below `k` are counted.
    pub fn first_k(mut self, k: Option<u64>) -> Self {
        self.first_k = k;
        self
    }

    pub fn accepts(&self, sim: u64) -> bool {
        self.first_k.is_none_or(|k| sim < k)
    }

    /// Add one simulation. Returns `false` if the first-K filter skipped it.
    pub fn add(&mut self, t: &SimulationTrace) -> Result<bool, ReportError> {
        if t.header.roster != self.roster {
            return Err(ReportError::RosterMismatch { sim: t.header.sim, expected: self.roster.clone(), found: t.header.roster.clone() });
        }
        if !self.accepts(t.header.sim) {
            return Ok(false);
        }
        let shares = recompute_shares(t);
        for (a, b) in shares.final_share.iter().zip(&t.scorecard.final_share) {
            self.max_discrepancy = self.max_discrepancy.max((a - b).abs());
        }
        self.shares.insert(t.header.sim, shares);

        let periods = t.header.periods as f64;
        let full = t.competitions.iter().all(|c| !c.periods.is_empty());
        if full {
            self.full_traces += 1;
        }
        let m = self.roster.len();
        let market = &t.header.market;
        let theta = market.theta();

        let mut olig_rev = vec![0.0; m];
        let mut olig_price = vec![0.0; m];
        let mut duo_rev = vec![0.0; m];
        for c in &t.competitions {
            let oligopoly = c.id.kind == CompetitionKind::Oligopoly;
            let revenue = competition_revenue(c);
            let s = &c.summary;
            for (pos, &slot) in c.participants.iter().enumerate() {
                let scope = if oligopoly { m } else { c.participants[1 - pos] };
                if !oligopoly {
                    self.pairwise_sum[slot][scope] += revenue[pos] / periods;
                    duo_rev[slot] += revenue[pos] / periods / (m - 1) as f64;
                } else {
                    olig_rev[slot] = revenue[pos] / periods;
                    olig_price[slot] = s.price_sum[pos] / periods;
                }

                let acc = &mut self.prices[slot][scope];
                acc.sum += s.price_sum[pos];
                acc.count += s.periods as u64;
                if full {
                    let series: Vec<f64> = c.periods.iter().map(|p| p.prices[pos]).collect();
                    let mean = series.iter().sum::<f64>() / series.len() as f64;
                    if mean > 0.0 {
                        acc.series_cv.push(sample_sd(&series) / mean);
                    }
                    acc.values.extend(series);
                }

                let seg = &mut self.segments[slot][usize::from(!oligopoly)];
                seg.periods += s.periods as f64;
                let sales = [s.sales_sho[pos], s.sales_loy[pos], s.sales_sci[pos]];
                let rev = [s.revenue_sho[pos], s.revenue_loy[pos], s.revenue_sci[pos]];
                for i in 0..3 {
                    seg.sales[i] += sales[i] as f64;
                    seg.revenue[i] += rev[i];
                    seg.expected_arrivals[i] += market.lambda * theta[i] * s.periods as f64;
                }
            }
            if oligopoly && full {
                self.count_extremes(c);
            }
        }

        for (seg, &share) in theta.iter().enumerate() {
            // the nudge keeps shares like 0.3 out of the bucket below
            let bucket = ((share / THETA_BUCKET_WIDTH + 1e-9) as usize).min(THETA_BUCKETS - 1);
            for slot in 0..m {
                let acc = &mut self.theta[seg][bucket][slot];
                acc.sims += 1;
                acc.oligopoly_revenue += olig_rev[slot];
                acc.duopoly_revenue += duo_rev[slot];
                acc.oligopoly_price += olig_price[slot];
            }
        }
        Ok(true)
    }

    fn count_extremes(&mut self, c: &CompetitionTrace) {
        for p in &c.periods {
            self.oligopoly_periods += 1;
            let o = &p.outcome;
            let sales: Vec<f64> = (0..p.prices.len()).map(|k| o.total_sales(k) as f64).collect();
            for (metric, values) in [&p.prices, &sales, &o.revenue].into_iter().enumerate() {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let n_lo = values.iter().filter(|v| **v == lo).count();
                let n_hi = values.iter().filter(|v| **v == hi).count();
                for (pos, &v) in values.iter().enumerate() {
                    let e = &mut self.extremes[c.participants[pos]];
                    if v == lo {
                        e.low[metric] += 1;
                        if metric == 0 && n_lo == 1 {
                            e.price_low_strict += 1;
                        }
                    }
                    if v == hi {
                        e.high[metric] += 1;
                        if metric == 0 && n_hi == 1 {
                            e.price_high_strict += 1;
                        }
                    }
                }
            }
        }
    }

    pub fn simulations(&self) -> usize {
        self.shares.len()
    }

    pub fn finish(self) -> ReportBundle {
        let m = self.roster.len();
        let labels = self.labels.clone();
        let n = self.shares.len().max(1) as f64;

        let mut shares = Vec::new();
        let mut finals = vec![Vec::new(); m];
        let mut sums = vec![[0.0; 3]; m];
        for s in self.shares.values() {
            for slot in 0..m {
                shares.push(ShareRow {
                    sim: s.sim,
                    slot,
                    competitor: labels[slot].clone(),
                    oligopoly_share: s.oligopoly[slot],
                    duopoly_share: s.duopoly[slot],
                    final_score: s.final_share[slot],
                });
                finals[slot].push(s.final_share[slot]);
                sums[slot][0] += s.oligopoly[slot];
                sums[slot][1] += s.duopoly[slot];
                sums[slot][2] += s.final_share[slot];
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|a, b| sums[*b][2].total_cmp(&sums[*a][2]).then(a.cmp(b)));
        let mut rank = vec![0; m];
        for (r, &slot) in order.iter().enumerate() {
            rank[slot] = r + 1;
        }
        let scores = (0..m)
            .map(|slot| {
                let f = &mut finals[slot];
                f.sort_by(f64::total_cmp);
                let q = |p| if f.is_empty() { f64::NAN } else { percentile_sorted(f, p) };
                ScoreRow {
                    slot,
                    competitor: labels[slot].clone(),
                    strategy: self.roster[slot],
                    oligopoly_share: sums[slot][0] / n,
                    duopoly_share: sums[slot][1] / n,
                    final_score: sums[slot][2] / n,
                    final_q25: q(25.0),
                    final_median: q(50.0),
                    final_q75: q(75.0),
                    rank: rank[slot],
                }
            })
            .collect();

        let mean: Vec<Vec<Option<f64>>> =
            (0..m).map(|j| (0..m).map(|k| (j != k).then(|| self.pairwise_sum[j][k] / n)).collect()).collect();
        let avg = |it: &mut dyn Iterator<Item = Option<f64>>| {
            let v: Vec<f64> = it.flatten().collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        let row_average = (0..m).map(|j| avg(&mut mean[j].iter().copied())).collect();
        let column_average = (0..m).map(|k| avg(&mut mean.iter().map(|r| r[k]))).collect();
        let pairwise = PairwiseTable { labels: labels.clone(), mean, row_average, column_average };

        let total = self.oligopoly_periods;
        let frac = |c: u64| if total > 0 { c as f64 / total as f64 } else { f64::NAN };
        let extremes = if total == 0 {
            Vec::new()
        } else {
            self.extremes
                .iter()
                .enumerate()
                .map(|(slot, e)| ExtremeRow {
                    slot,
                    competitor: labels[slot].clone(),
                    periods: total,
                    price_low: frac(e.low[0]),
                    price_high: frac(e.high[0]),
                    sales_low: frac(e.low[1]),
                    sales_high: frac(e.high[1]),
                    revenue_low: frac(e.low[2]),
                    revenue_high: frac(e.high[2]),
                    price_low_strict: frac(e.price_low_strict),
                    price_high_strict: frac(e.price_high_strict),
                })
                .collect()
        };

        let mut prices = Vec::new();
        for (slot, scopes) in self.prices.into_iter().enumerate() {
            let label = &labels[slot];
            prices.push(PriceAcc::merge(&scopes).row(slot, label, "all".into()));
            prices.push(scopes[m].clone().row(slot, label, "oligopoly".into()));
            prices.push(PriceAcc::merge(&scopes[..m]).row(slot, label, "duopoly".into()));
            for (opp, acc) in scopes.into_iter().enumerate().take(m) {
                if opp != slot {
                    prices.push(acc.row(slot, label, format!("vs:{}", labels[opp])));
                }
            }
        }

        let segments = self
            .segments
            .iter()
            .enumerate()
            .flat_map(|(slot, scopes)| {
                let label = labels[slot].clone();
                scopes.iter().zip(["oligopoly", "duopoly"]).map(move |(s, scope)| {
                    let per_period = |x: f64| if s.periods > 0.0 { x / s.periods } else { 0.0 };
                    let per_arrival = |i: usize| if s.expected_arrivals[i] > 0.0 { s.revenue[i] / s.expected_arrivals[i] } else { 0.0 };
                    SegmentRow {
                        slot,
                        competitor: label.clone(),
                        scope: scope.into(),
                        sales_sho: per_period(s.sales[0]),
                        sales_loy: per_period(s.sales[1]),
                        sales_sci: per_period(s.sales[2]),
                        revenue_per_arrival_sho: per_arrival(0),
                        revenue_per_arrival_loy: per_arrival(1),
                        revenue_per_arrival_sci: per_arrival(2),
                        revenue: per_period(s.revenue.iter().sum()),
                    }
                })
            })
            .collect();

        let mut theta = Vec::new();
        for (seg, buckets) in self.theta.iter().enumerate() {
            for (b, slots) in buckets.iter().enumerate() {
                let sims = slots[0].sims;
                if sims == 0 {
                    continue;
                }
                let lo = b as f64 / THETA_BUCKETS as f64;
                let row = |competitor: String, a: ThetaAcc, div: f64| ThetaRow {
                    segment: SEGMENTS[seg].into(),
                    bucket_lo: lo,
                    bucket_hi: (b + 1) as f64 / THETA_BUCKETS as f64,
                    competitor,
                    simulations: sims,
                    oligopoly_revenue: a.oligopoly_revenue / div,
                    duopoly_revenue: a.duopoly_revenue / div,
                    oligopoly_price: a.oligopoly_price / div,
                };
                let mut all = ThetaAcc::default();
                for (slot, a) in slots.iter().enumerate() {
                    all.oligopoly_revenue += a.oligopoly_revenue;
                    all.duopoly_revenue += a.duopoly_revenue;
                    all.oligopoly_price += a.oligopoly_price;
                    theta.push(row(labels[slot].clone(), *a, sims as f64));
                }
                theta.push(row("all".into(), all, (sims * m as u64) as f64));
            }
        }

        ReportBundle {
            roster: self.roster,
            labels,
            simulations: self.shares.len(),
            full_traces: self.full_traces,
            max_score_discrepancy: self.max_discrepancy,
            scores,
            shares,
            pairwise,
            extremes,
            prices,
            segments,
            theta,
        }
    }
}

fn sim_from_file_name(path: &Path) -> Option<u64> {
    path.file_name()?.to_str()?.strip_prefix("sim-")?.strip_suffix(".jsonl")?.parse().ok()
}

/// Build a report from every readable trace in `dir`. Traces that fail to
/// parse are skipped with a warning.
pub fn build_report(dir: &Path, first_k: Option<u64>) -> Result<ReportBundle, ReportError> {
    let mut files = list_trace_files(dir)?;
    if files.is_empty() {
        return Err(ReportError::NoTraces(dir.to_path_buf()));
    }
    let found = files.len();
    if let Some(k) = first_k {
        files.retain(|p| sim_from_file_name(p).is_none_or(|s| s < k));
    }
    let mut builder: Option<ReportBuilder> = None;
    for chunk in files.chunks(64) {
        let traces: Vec<_> = chunk.par_iter().map(|p| read_simulation(p)).collect();
        for t in traces {
            match t {
                Ok(t) => {
                    let b = builder.get_or_insert_with(|| ReportBuilder::new(&t.header.roster).first_k(first_k));
                    b.add(&t)?;
                }
                Err(e) => log::warn!("skipping trace: {e}"),
            }
        }
    }
    builder.filter(|b| b.simulations() > 0).map(ReportBuilder::finish).ok_or(ReportError::NoCompleteTraces(found))
}

impl ReportBundle {
    /// Write every table to `dir`, creating it if needed.
    pub fn write_csv(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
        write_rows(&dir.join("scores.csv"), &self.scores)?;
        write_rows(&dir.join("shares.csv"), &self.shares)?;
        write_rows(&dir.join("extremes.csv"), &self.extremes)?;
        write_rows(&dir.join("prices.csv"), &self.prices)?;
        write_rows(&dir.join("segments.csv"), &self.segments)?;
        write_rows(&dir.join("theta.csv"), &self.theta)?;
        self.write_pairwise(&dir.join("pairwise.csv"))
    }

    fn write_pairwise(&self, path: &Path) -> Result<(), ReportError> {
        let wrap = |source| ReportError::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        let p = &self.pairwise;
        let mut header = vec!["competitor".to_string()];
        header.extend(p.labels.iter().cloned());
        header.push("average".into());
        w.write_record(&header).map_err(wrap)?;
        for (j, row) in p.mean.iter().enumerate() {
            let mut rec = vec![p.labels[j].clone()];
            rec.extend(row.iter().map(|v| v.map_or(String::new(), |v| v.to_string())));
            rec.push(p.row_average[j].to_string());
            w.write_record(&rec).map_err(wrap)?;
        }
        let mut rec = vec!["average".to_string()];
        rec.extend(p.column_average.iter().map(f64::to_string));
        rec.push(String::new());
        w.write_record(&rec).map_err(wrap)?;
        w.flush().map_err(|e| wrap(e.into()))
    }

    /// Standard deviation across slots of the mean oligopoly and duopoly
    /// shares.
    pub fn share_dispersion(&self) -> (f64, f64) {
        let sd = |f: fn(&ScoreRow) -> f64| {
            let v: Vec<f64> = self.scores.iter().map(f).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        (sd(|r| r.oligopoly_share), sd(|r| r.duopoly_share))
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ReportError> {
    let wrap = |source| ReportError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}
