//! Reaction-aware delivery metrics.
//!
//! A `(user, message)` pair counts as delivered only when the user received
//! it on time and reacted above the ignore level. Everything else the user
//! receives, duplicates included, is overhead.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dissemination::Delivery;
use crate::generator::InjectionSchedule;
use crate::model::{MsgId, UserId};
use crate::reaction::{ReactionOutcome, ReactionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RateDenominator {
    /// Pairs whose precomputed reaction is above ignore.
    #[default]
    Wanted,
    /// Every user-message pair.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricsOptions {
    pub denominator: RateDenominator,
    /// Count the origin's own reception at injection.
    pub include_self: bool,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            denominator: RateDenominator::Wanted,
            include_self: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord {
    pub user_id: UserId,
    pub msg_id: MsgId,
    pub wanted: bool,
    pub first_reception: Option<f64>,
    pub on_time: bool,
    pub reacted_above_ignore: bool,
    pub angry: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserStats {
    pub user_id: UserId,
    pub receptions_total: u64,
    pub duplicates: u64,
    pub successful: u64,
    /// `None` when the user had no successful delivery.
    pub overhead_pct: Option<f64>,
    /// Delays of successful deliveries, by message id.
    pub delays: Vec<f64>,
}

impl UserStats {
    pub fn mean_delay(&self) -> Option<f64> {
        mean(&self.delays)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Percentiles {
    pub p5: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub jain_index: Option<f64>,
    pub percentiles: Option<Percentiles>,
    pub included: usize,
    /// Users whose value was undefined.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessSet {
    pub successful: FairnessReport,
    pub mean_delay: FairnessReport,
    pub overhead: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub user_count: usize,
    pub message_count: usize,
    pub options: MetricsOptions,
    pub delivery_rate: Option<f64>,
    pub rate_numerator: u64,
    pub rate_denominator: u64,
    pub delay_count: usize,
    pub delay_mean_s: Option<f64>,
    pub delay_median_s: Option<f64>,
    pub delay_p95_s: Option<f64>,
    pub overhead_mean_pct: Option<f64>,
    pub overhead_undefined_users: usize,
    pub total_receptions: u64,
    pub duplicate_receptions: u64,
    pub angry_count: u64,
    pub fairness: FairnessSet,
    pub per_user: Vec<UserStats>,
}

/// Arithmetic mean in slice order.
pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Linear-interpolation percentile of sorted values, `p` in `[0, 100]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Jain's index `(Σv)² / (n·Σv²)`; `None` for empty input or all-zero values.
pub fn jain_index(values: &[f64]) -> Option<f64> {
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    if values.is_empty() || sq == 0.0 {
        return None;
    }
    Some(sum * sum / (values.len() as f64 * sq))
}

/// Jain index and percentile table over the defined entries of `values`.
pub fn fairness(values: &[Option<f64>]) -> FairnessReport {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let s = sorted(&defined);
    let percentiles = (!s.is_empty()).then(|| Percentiles {
        p5: percentile_sorted(&s, 5.0).unwrap(),
        p25: percentile_sorted(&s, 25.0).unwrap(),
        p50: percentile_sorted(&s, 50.0).unwrap(),
        p75: percentile_sorted(&s, 75.0).unwrap(),
        p95: percentile_sorted(&s, 95.0).unwrap(),
    });
    FairnessReport {
        jain_index: jain_index(&defined),
        percentiles,
        included: defined.len(),
        excluded: values.len() - defined.len(),
    }
}

/// Successful over wanted records; `None` without wanted records.
pub fn delivery_rate(records: &[DeliveryRecord]) -> Option<f64> {
    let wanted = records.iter().filter(|r| r.wanted).count();
    let ok = records.iter().filter(|r| r.reacted_above_ignore).count();
    (wanted > 0).then(|| ok as f64 / wanted as f64)
}

/// `first_reception - injection` for every successful record, in record order.
pub fn delivery_delays(records: &[DeliveryRecord], injection: impl Fn(MsgId) -> f64) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.reacted_above_ignore)
        .filter_map(|r| r.first_reception.map(|t| t - injection(r.msg_id)))
        .collect()
}

/// `100 * receptions_total / successful`; `None` when nothing was successful.
pub fn per_user_overhead(receptions_total: u64, successful: u64) -> Option<f64> {
    (successful > 0).then(|| 100.0 * receptions_total as f64 / successful as f64)
}

#[derive(Debug, Clone, Copy)]
struct FirstReception {
    time: f64,
    reaction_index: usize,
    angry: bool,
}

/// Accumulates receptions and reaction outcomes during a run.
#[derive(Debug, Clone, Default)]
pub struct MetricsCollector {
    receptions: Vec<u64>,
    duplicates: Vec<u64>,
    self_receptions: Vec<u64>,
    first: HashMap<(UserId, MsgId), FirstReception>,
    angry: u64,
}

impl MetricsCollector {
    pub fn new(user_count: usize) -> Self {
        MetricsCollector {
            receptions: vec![0; user_count],
            duplicates: vec![0; user_count],
            self_receptions: vec![0; user_count],
            ..Default::default()
        }
    }

    pub fn on_delivery(&mut self, d: &Delivery) {
        self.receptions[d.to_node] += 1;
        if d.was_duplicate {
            self.duplicates[d.to_node] += 1;
        }
        if d.from_node == d.to_node {
            self.self_receptions[d.to_node] += 1;
        }
    }

    pub fn on_outcome(&mut self, o: &ReactionOutcome) {
        if o.angry {
            self.angry += 1;
        }
        self.first.insert(
            (o.user_id, o.msg_id),
            FirstReception {
                time: o.reception_time.secs(),
                reaction_index: o.reaction_index,
                angry: o.angry,
            },
        );
    }

    pub fn angry_count(&self) -> u64 {
        self.angry
    }

    /// Records for every pair that was wanted or received, ordered by `(user, msg)`.
    pub fn records(
        &self,
        schedule: &InjectionSchedule,
        table: &ReactionTable,
        opts: &MetricsOptions,
    ) -> Vec<DeliveryRecord> {
        let mut out = Vec::new();
        for user in 0..table.user_count() {
            for msg in schedule.messages() {
                if !opts.include_self && msg.origin_node() == user {
                    continue;
                }
                let pre = table.get(user, msg.msg_id()).expect("complete table");
                let wanted = pre.reaction_index > 0;
                let first = self.first.get(&(user, msg.msg_id()));
                if !wanted && first.is_none() {
                    continue;
                }
                let on_time = first.is_some_and(|f| !f.angry);
                out.push(DeliveryRecord {
                    user_id: user,
                    msg_id: msg.msg_id(),
                    wanted,
                    first_reception: first.map(|f| f.time),
                    on_time,
                    reacted_above_ignore: on_time && first.is_some_and(|f| f.reaction_index > 0),
                    angry: first.is_some_and(|f| f.angry),
                });
            }
        }
        out
    }

    pub fn summarize(
        &self,
        schedule: &InjectionSchedule,
        table: &ReactionTable,
        opts: MetricsOptions,
    ) -> SummaryReport {
        let records = self.records(schedule, table, &opts);
        let injection: HashMap<MsgId, f64> = schedule
            .messages()
            .iter()
            .map(|m| (m.msg_id(), m.injection_time().secs()))
            .collect();
        let user_count = table.user_count();

        let mut per_user: Vec<UserStats> = (0..user_count)
            .map(|u| {
                let own = if opts.include_self {
                    0
                } else {
                    self.self_receptions[u]
                };
                UserStats {
                    user_id: u,
                    receptions_total: self.receptions[u] - own,
                    duplicates: self.duplicates[u],
                    successful: 0,
                    overhead_pct: None,
                    delays: Vec::new(),
                }
            })
            .collect();
        for r in records.iter().filter(|r| r.reacted_above_ignore) {
            let stats = &mut per_user[r.user_id];
            stats.successful += 1;
            stats.delays.push(
                r.first_reception.expect("successful implies received") - injection[&r.msg_id],
            );
        }
        for s in &mut per_user {
            s.overhead_pct = per_user_overhead(s.receptions_total, s.successful);
        }

        let numerator = records.iter().filter(|r| r.reacted_above_ignore).count() as u64;
        let denominator = match opts.denominator {
            RateDenominator::Wanted => records.iter().filter(|r| r.wanted).count() as u64,
            RateDenominator::AllPairs => {
                let pairs = (user_count * schedule.len()) as u64;
                if opts.include_self {
                    pairs
                } else {
                    pairs - schedule.len() as u64
                }
            }
        };
        let delays: Vec<f64> = per_user
            .iter()
            .flat_map(|s| s.delays.iter().copied())
            .collect();
        let delays_sorted = sorted(&delays);
        let overheads: Vec<Option<f64>> = per_user.iter().map(|s| s.overhead_pct).collect();
        let defined_overheads: Vec<f64> = overheads.iter().flatten().copied().collect();

        SummaryReport {
            user_count,
            message_count: schedule.len(),
            options: opts,
            delivery_rate: (denominator > 0).then(|| numerator as f64 / denominator as f64),
            rate_numerator: numerator,
            rate_denominator: denominator,
            delay_count: delays.len(),
            delay_mean_s: mean(&delays),
            delay_median_s: percentile_sorted(&delays_sorted, 50.0),
            delay_p95_s: percentile_sorted(&delays_sorted, 95.0),
            overhead_mean_pct: mean(&defined_overheads),
            overhead_undefined_users: overheads.iter().filter(|o| o.is_none()).count(),
            total_receptions: per_user.iter().map(|s| s.receptions_total).sum(),
            duplicate_receptions: per_user.iter().map(|s| s.duplicates).sum(),
            angry_count: self.angry,
            fairness: FairnessSet {
                successful: fairness(
                    &per_user
                        .iter()
                        .map(|s| Some(s.successful as f64))
                        .collect::<Vec<_>>(),
                ),
                mean_delay: fairness(
                    &per_user
                        .iter()
                        .map(UserStats::mean_delay)
                        .collect::<Vec<_>>(),
                ),
                overhead: fairness(&overheads),
            },
            per_user,
        }
    }
}

/// Per-user CSV: `user_id,receptions_total,duplicates,successful,overhead_pct,mean_delay_s`.
pub fn write_per_user_csv<W: Write>(stats: &[UserStats], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "user_id,receptions_total,duplicates,successful,overhead_pct,mean_delay_s"
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in stats {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.user_id,
            s.receptions_total,
            s.duplicates,
            s.successful,
            opt(s.overhead_pct),
            opt(s.mean_delay())
        )?;
    }
    Ok(())
}

/// Mean with a two-sided 95% Student-t confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub half_width: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

pub fn mean_ci95(samples: &[f64]) -> Option<MeanCi> {
    let n = samples.len();
    let m = mean(samples)?;
    if n < 2 {
        return Some(MeanCi {
            n,
            mean: m,
            half_width: None,
            lo: None,
            hi: None,
        });
    }
    let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    let hw = t * (var / n as f64).sqrt();
    Some(MeanCi {
        n,
        mean: m,
        half_width: Some(hw),
        lo: Some(m - hw),
        hi: Some(m + hw),
    })
}

/// Cross-replication means and confidence intervals of the headline metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub replications: usize,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, Option<MeanCi>>,
}

pub fn aggregate(seeds: &[u64], reports: &[SummaryReport]) -> AggregateReport {
    type Getter = fn(&SummaryReport) -> Option<f64>;
    let getters: [(&str, Getter); 9] = [
        ("delivery_rate", |r| r.delivery_rate),
        ("delay_mean_s", |r| r.delay_mean_s),
        ("delay_median_s", |r| r.delay_median_s),
        ("delay_p95_s", |r| r.delay_p95_s),
        ("overhead_mean_pct", |r| r.overhead_mean_pct),
        ("angry_count", |r| Some(r.angry_count as f64)),
        ("jain_successful", |r| r.fairness.successful.jain_index),
        ("jain_mean_delay", |r| r.fairness.mean_delay.jain_index),
        ("jain_overhead", |r| r.fairness.overhead.jain_index),
    ];
    AggregateReport {
        replications: reports.len(),
        seeds: seeds.to_vec(),
        metrics: getters
            .iter()
            .map(|(name, get)| {
                let xs: Vec<f64> = reports.iter().filter_map(get).collect();
                (name.to_string(), mean_ci95(&xs))
            })
            .collect(),
    }
}
