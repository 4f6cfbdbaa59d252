//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::time::Instant;

use common::{event_message, run_constructed, small_scenario, Node};
use oppsim::cli::run_cli;
use oppsim::dissemination::scan_contacts;
use oppsim::generator::build_schedule;
use oppsim::kernel::{RngStream, StreamId};
use oppsim::metrics::jain_index;
use oppsim::model::{
    builtin_scenario, Area, Message, MessageDraft, Position, ReactionSet, UserProfile,
};
use oppsim::reaction::{draw_reaction, lower_bound, Directive};
use oppsim::sim::{run, RunOptions};
use serde_json::Value;

const JODEL_BASE: [f64; 3] = [0.90, 0.095, 0.005];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

// Probability mass of each interval once the draw is restricted to [lb, 100].
fn analytic_law(base: &[f64], lb: f64) -> Vec<f64> {
    if lb >= 100.0 {
        let mut v = vec![0.0; base.len()];
        *v.last_mut().unwrap() = 1.0;
        return v;
    }
    let mut lo = 0.0;
    base.iter()
        .map(|b| {
            let hi = lo + 100.0 * b;
            let overlap = (hi.min(100.0) - lo.max(lb)).max(0.0);
            lo = hi;
            overlap / (100.0 - lb)
        })
        .collect()
}

fn c1_reaction_law() -> Outcome {
    let started = Instant::now();
    let expected = [
        (0.0, [0.90, 0.095, 0.005]),
        (50.0, [0.80, 0.19, 0.01]),
        (100.0, [0.0, 0.0, 1.0]),
    ];
    let mut worst = 0.0f64;
    for (lb, table) in expected {
        let law = analytic_law(&JODEL_BASE, lb);
        for (a, b) in law.iter().zip(table) {
            if (a - b).abs() > 1e-12 {
                return Err(format!(
                    "analytic law at lb={lb} is {law:?}, expected {table:?}"
                ));
            }
        }
        let mut rng = RngStream::new(1, StreamId::Custom(format!("law-{lb}")));
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[draw_reaction(&JODEL_BASE, lb, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(table) {
            worst = worst.max((*c as f64 / n as f64 - p).abs());
        }
        if lb == 100.0 && counts[2] != n {
            return Err(format!("lb=100 gave {counts:?}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst <= 0.005 && secs < 5.0,
        format!("max |freq - law| = {worst:.5} over 3x1e5 draws in {secs:.2}s"),
        format!("max deviation {worst:.5} (limit 0.005), runtime {secs:.2}s (limit 5s)"),
    )
}

fn c2_clamp() -> Outcome {
    let reactions = ReactionSet::new(["ignore", "comment/vote", "save"]).unwrap();
    let mut triples = Vec::new();
    for pop in 0..=100u8 {
        for l in 1..=10usize {
            for k in 0..=l {
                if pop as f64 + 100.0 * k as f64 / l as f64 >= 100.0 {
                    triples.push((pop, k, l));
                }
            }
        }
    }
    let stride = triples.len() as f64 / 1000.0;
    let grid: Vec<_> = (0..1000)
        .map(|i| triples[(i as f64 * stride) as usize])
        .collect();
    let mut rng = RngStream::new(2, StreamId::Custom("clamp".into()));
    let mut draws = 0;
    for (i, &(pop, k, l)) in grid.iter().enumerate() {
        let keywords: Vec<String> = (0..l).map(|j| format!("kw{j}")).collect();
        let msg = Message::new(MessageDraft {
            msg_id: i,
            keywords: keywords.clone(),
            popularity: Some(pop),
            event: None,
            danger: None,
            injection_time: common::t(0.0),
            origin_node: 0,
        })
        .unwrap();
        let user = UserProfile::new(
            0,
            keywords[..k].iter(),
            reactions.clone(),
            JODEL_BASE.to_vec(),
        )
        .unwrap();
        let lb = lower_bound(&msg, &user);
        for _ in 0..100 {
            let r = draw_reaction(user.base(), lb, &mut rng);
            draws += 1;
            if r != reactions.strongest() {
                return Err(format!(
                    "(pop={pop}, k={k}, l={l}) lb={lb} drew reaction {r}"
                ));
            }
        }
    }
    Ok(format!(
        "{} triples x 100 draws = {draws} draws, all strongest",
        grid.len()
    ))
}

fn c3_emergency() -> Outcome {
    let started = Instant::now();
    let mut cfg = builtin_scenario("emergency").unwrap();
    cfg.user_count = 200;
    cfg.run_horizon = 7200.0;
    cfg.single_emergency = true;
    cfg.master_seed = 3;
    let out = run(&cfg, RunOptions::default()).map_err(|v| format!("{v:?}"))?;
    let msg = &out.schedule.messages()[0];
    let zone = *msg
        .danger()
        .ok_or("emergency message without danger zone")?;
    let strongest = cfg.reaction_set.strongest();
    let receivers: Vec<_> = out.outcomes.iter().filter(|o| o.msg_id == 0).collect();
    let mut inside = 0;
    let mut escaped = 0;
    let mut stuck = Vec::new();
    for o in &receivers {
        if let Directive::Flee(_) = o.directive {
            inside += 1;
            let d = out.final_positions[o.user_id].distance(&zone.center);
            if d >= zone.radius {
                escaped += 1;
            } else {
                stuck.push((o.user_id, o.reception_time.secs(), d));
            }
        }
    }
    let maximal = receivers
        .iter()
        .filter(|o| o.reaction_index == strongest && !o.angry)
        .count();
    let secs = started.elapsed().as_secs_f64();
    check(
        inside > 0 && stuck.is_empty() && maximal == receivers.len() && secs < 30.0,
        format!(
            "{} receivers, {maximal} maximal; {escaped}/{inside} in-zone receivers end outside r={} in {secs:.2}s",
            receivers.len(),
            zone.radius
        ),
        format!(
            "{} receivers, {maximal} maximal, {inside} in zone, still inside (user, t_recv, dist): {stuck:?}, runtime {secs:.2}s",
            receivers.len()
        ),
    )
}

fn c4_angry() -> Outcome {
    let mut cfg = small_scenario(3, Area::new(1000.0, 1000.0), 1000.0);
    cfg.visit_probability = 0.0;
    let horizon = cfg.run_horizon;
    let nodes = [
        Node {
            home: Position::new(0.0, 0.0),
            hold: Some(horizon * 2.0),
        },
        Node {
            home: Position::new(20.0, 0.0),
            hold: Some(horizon * 2.0),
        },
        Node {
            home: Position::new(200.0, 0.0),
            hold: Some(horizon * 2.0),
        },
    ];
    let msg = event_message(0, 0, 5.0, (50.0, 100.0), Position::new(500.0, 500.0), 100);
    let out = run_constructed(
        &cfg,
        &nodes,
        vec![msg],
        |i, s| {
            if i == 2 {
                let ok = oppsim::mobility::command_visit(
                    s,
                    Position::new(40.0, 0.0),
                    300.0,
                    5000.0,
                    0.0,
                    &cfg.mobility,
                );
                assert!(ok);
            }
        },
        RunOptions::default(),
    );
    let angry: Vec<_> = out.outcomes.iter().filter(|o| o.angry).collect();
    let node2 = out.deliveries.iter().find(|d| d.to_node == 2);
    let stats = &out.summary.per_user[2];
    let ok = angry.len() == 1
        && angry[0].user_id == 2
        && angry[0].reaction_index == 0
        && node2.is_some_and(|d| d.from_node == 1 && d.time.secs() > 100.0)
        && stats.successful == 0
        && out.summary.rate_denominator == 3
        && out.summary.rate_numerator == 2
        && out.summary.angry_count == 1;
    check(
        ok,
        format!(
            "node 2 got it from node 1 at t={}s after end=100s: 1 angry outcome, index 0, delivery rate {}/{}",
            node2.unwrap().time.secs(),
            out.summary.rate_numerator,
            out.summary.rate_denominator
        ),
        format!(
            "angry={angry:?} node2 delivery={node2:?} rate={}/{}",
            out.summary.rate_numerator, out.summary.rate_denominator
        ),
    )
}

// Piecewise-linear position of one node from its trace.
fn position_at(trace: &[(f64, Position)], t: f64) -> Position {
    let after = trace.partition_point(|p| p.0 <= t);
    if after == 0 {
        return trace[0].1;
    }
    let (t0, p0) = trace[after - 1];
    match trace.get(after) {
        Some(&(t1, p1)) if t1 > t0 => {
            let f = (t - t0) / (t1 - t0);
            Position::new(p0.x + (p1.x - p0.x) * f, p0.y + (p1.y - p0.y) * f)
        }
        _ => p0,
    }
}

fn c5_visits() -> Outcome {
    let n = 30;
    let mut cfg = small_scenario(n, Area::new(1000.0, 1000.0), 9000.0);
    cfg.visit_probability = 1.0;
    cfg.contact_radius_m = 2000.0;
    cfg.master_seed = 5;
    let (start, end) = (3600.0, 7200.0);
    let addr = Position::new(500.0, 500.0);
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            home: Position::new(30.0 * i as f64 + 15.0, 1000.0 - 33.0 * i as f64),
            hold: None,
        })
        .collect();
    let msg = event_message(0, 0, 0.0, (start, end), addr, 100);
    let opts = RunOptions {
        record_trace: true,
        ..RunOptions::default()
    };
    let out = run_constructed(&cfg, &nodes, vec![msg], |_, _| {}, opts);

    let strongest = cfg.reaction_set.strongest();
    let maximal: Vec<usize> = out
        .outcomes
        .iter()
        .filter(|o| o.reaction_index == strongest)
        .map(|o| o.user_id)
        .collect();
    let mut traces: BTreeMap<usize, Vec<(f64, Position)>> = BTreeMap::new();
    for p in &out.trace {
        traces
            .entry(p.node_id)
            .or_default()
            .push((p.time, p.position));
    }
    let mut worst = 0.0f64;
    for &u in &maximal {
        let tr = &traces[&u];
        let mut probes: Vec<f64> = (0..=360)
            .map(|k| start + (end - start) * k as f64 / 360.0)
            .collect();
        probes.extend(
            tr.iter()
                .map(|p| p.0)
                .filter(|&x| (start..=end).contains(&x)),
        );
        for x in probes {
            worst = worst.max(position_at(tr, x).distance(&addr));
        }
    }
    let accepted = out.visits.iter().filter(|v| v.accepted).count();
    check(
        maximal.len() == n && accepted == n && worst <= 1.0,
        format!("{n}/{n} maximal users, all visits accepted, max distance to addr during window {worst:.3e} m"),
        format!(
            "{} maximal of {n}, {accepted} visits accepted, max distance during window {worst:.3} m",
            maximal.len()
        ),
    )
}

fn read_rows(path: &Path) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            headers
                .iter()
                .zip(r.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn num(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap()
}

fn opt_json(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn oracle_jain(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut s = 0.0;
    let mut q = 0.0;
    for x in xs {
        s += x;
        q += x * x;
    }
    (q != 0.0).then(|| s * s / (xs.len() as f64 * q))
}

fn oracle_percentile(xs: &[f64], p: f64) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (rank.floor() as usize, rank.ceil() as usize);
    Some(v[lo] + (v[hi] - v[lo]) * (rank - lo as f64))
}

fn oracle_mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn c6_metrics_oracle() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let code = run_cli([
        "oppsim",
        "run",
        "--preset",
        "jodel",
        "--users",
        "200",
        "--horizon",
        "21600",
        "--seed",
        "6",
        "--dump-events",
        "--dump-precompute",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    if code != 0 {
        return Err(format!("run exited with {code}"));
    }
    let rep = dir.path().join("rep-0");
    let events = read_rows(&rep.join("events.csv"));
    let pre = read_rows(&rep.join("precompute.csv"));
    let sched = read_rows(&rep.join("schedule.csv"));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(rep.join("summary.json")).unwrap()).unwrap();
    let report = &summary["report"];
    let n = 200usize;

    let injection: HashMap<usize, f64> = sched
        .iter()
        .map(|r| (num(r, "msg_id") as usize, num(r, "injection_time")))
        .collect();
    let event_end: HashMap<usize, Option<f64>> = sched
        .iter()
        .map(|r| (num(r, "msg_id") as usize, r["end"].parse().ok()))
        .collect();
    let reaction: HashMap<(usize, usize), u32> = pre
        .iter()
        .map(|r| {
            (
                (num(r, "user_id") as usize, num(r, "msg_id") as usize),
                num(r, "reaction_index") as u32,
            )
        })
        .collect();

    let mut received = vec![0u64; n];
    let mut dups = vec![0u64; n];
    let mut first: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in &events {
        let (to, m, t) = (
            num(e, "to_node") as usize,
            num(e, "msg_id") as usize,
            num(e, "time"),
        );
        received[to] += 1;
        let dup = first.contains_key(&(to, m));
        if dup != (e["was_duplicate"] == "1") {
            return Err(format!("duplicate flag disagrees at {e:?}"));
        }
        if dup {
            dups[to] += 1;
        } else {
            first.insert((to, m), t);
        }
    }
    let successful_pair = |u: usize, m: usize| -> Option<f64> {
        let t = *first.get(&(u, m))?;
        let late = event_end[&m].is_some_and(|end| t > end);
        (!late && reaction[&(u, m)] > 0).then(|| t - injection[&m])
    };
    let wanted = reaction.values().filter(|&&r| r > 0).count() as u64;
    let mut success = vec![0u64; n];
    let mut delays_by_user: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut msgs: Vec<usize> = injection.keys().copied().collect();
    msgs.sort_unstable();
    for u in 0..n {
        for &m in &msgs {
            if let Some(d) = successful_pair(u, m) {
                success[u] += 1;
                delays_by_user[u].push(d);
            }
        }
    }
    let numerator: u64 = success.iter().sum();
    let all_delays: Vec<f64> = delays_by_user.iter().flatten().copied().collect();
    let overhead: Vec<Option<f64>> = (0..n)
        .map(|u| (success[u] > 0).then(|| 100.0 * received[u] as f64 / success[u] as f64))
        .collect();
    let defined_overhead: Vec<f64> = overhead.iter().flatten().copied().collect();
    let mean_delays: Vec<f64> = delays_by_user
        .iter()
        .filter_map(|d| oracle_mean(d))
        .collect();
    let success_f: Vec<f64> = success.iter().map(|&s| s as f64).collect();

    let mut mismatches = Vec::new();
    let mut cmp = |name: &str, ours: Option<f64>, theirs: Option<f64>| {
        if ours != theirs {
            mismatches.push(format!("{name}: oracle {ours:?} vs summary {theirs:?}"));
        }
    };
    cmp(
        "rate_numerator",
        Some(numerator as f64),
        report["rate_numerator"].as_f64(),
    );
    cmp(
        "rate_denominator",
        Some(wanted as f64),
        report["rate_denominator"].as_f64(),
    );
    cmp(
        "delivery_rate",
        (wanted > 0).then(|| numerator as f64 / wanted as f64),
        opt_json(&report["delivery_rate"]),
    );
    cmp(
        "delay_count",
        Some(all_delays.len() as f64),
        report["delay_count"].as_f64(),
    );
    cmp(
        "delay_mean_s",
        oracle_mean(&all_delays),
        opt_json(&report["delay_mean_s"]),
    );
    cmp(
        "delay_median_s",
        oracle_percentile(&all_delays, 50.0),
        opt_json(&report["delay_median_s"]),
    );
    cmp(
        "delay_p95_s",
        oracle_percentile(&all_delays, 95.0),
        opt_json(&report["delay_p95_s"]),
    );
    cmp(
        "overhead_mean_pct",
        oracle_mean(&defined_overhead),
        opt_json(&report["overhead_mean_pct"]),
    );
    cmp(
        "total_receptions",
        Some(received.iter().sum::<u64>() as f64),
        report["total_receptions"].as_f64(),
    );
    cmp(
        "jain_successful",
        oracle_jain(&success_f),
        opt_json(&report["fairness"]["successful"]["jain_index"]),
    );
    cmp(
        "jain_mean_delay",
        oracle_jain(&mean_delays),
        opt_json(&report["fairness"]["mean_delay"]["jain_index"]),
    );
    cmp(
        "jain_overhead",
        oracle_jain(&defined_overhead),
        opt_json(&report["fairness"]["overhead"]["jain_index"]),
    );
    let per_user = report["per_user"].as_array().unwrap();
    let mut delay_mismatch = Vec::new();
    for u in 0..n {
        let pu = &per_user[u];
        cmp(
            &format!("user {u} receptions"),
            Some(received[u] as f64),
            pu["receptions_total"].as_f64(),
        );
        cmp(
            &format!("user {u} duplicates"),
            Some(dups[u] as f64),
            pu["duplicates"].as_f64(),
        );
        cmp(
            &format!("user {u} overhead"),
            overhead[u],
            opt_json(&pu["overhead_pct"]),
        );
        let theirs: Vec<f64> = pu["delays"]
            .as_array()
            .unwrap()
            .iter()
            .map(|d| d.as_f64().unwrap())
            .collect();
        if theirs != delays_by_user[u] {
            delay_mismatch.push(format!("user {u} delays differ"));
        }
    }
    mismatches.extend(delay_mismatch);
    let secs = started.elapsed().as_secs_f64();
    if !mismatches.is_empty() {
        return Err(format!(
            "{} mismatches, first: {}",
            mismatches.len(),
            mismatches[0]
        ));
    }
    check(
        secs < 60.0,
        format!(
            "{} events, {} messages, {} delays, rate {numerator}/{wanted}: all fields equal exactly, {secs:.2}s",
            events.len(),
            msgs.len(),
            all_delays.len()
        ),
        format!("oracle matched but took {secs:.2}s (limit 60s)"),
    )
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    })
}

fn c7_determinism() -> Outcome {
    let mut hashes = Vec::new();
    let mut rows = 0;
    for reps in ["1", "1"] {
        let dir = tempfile::tempdir().unwrap();
        let code = run_cli([
            "oppsim",
            "run",
            "--preset",
            "city-events",
            "--users",
            "300",
            "--horizon",
            "86400",
            "--seed",
            "7",
            "--reps",
            reps,
            "--dump-events",
            "-o",
            dir.path().to_str().unwrap(),
        ]);
        if code != 0 {
            return Err(format!("run exited with {code}"));
        }
        let bytes = fs::read(dir.path().join("rep-0/events.csv")).unwrap();
        rows = bytes.iter().filter(|&&b| b == b'\n').count();
        hashes.push(fnv1a(&bytes));
    }
    check(
        hashes[0] == hashes[1] && rows > 1,
        format!(
            "two runs, events.csv hash {:016x} both times ({rows} lines)",
            hashes[0]
        ),
        format!("hashes differ: {:016x} vs {:016x}", hashes[0], hashes[1]),
    )
}

fn c8_generator() -> Outcome {
    let mut cfg = builtin_scenario("jodel").unwrap();
    cfg.user_count = 200;
    cfg.run_horizon = 30.0 * 86400.0;
    let schedule = build_schedule(&cfg, &mut RngStream::new(8, StreamId::Generator));
    let msgs = schedule.messages();
    let total = msgs.len() as f64;
    let share = |pred: &dyn Fn(u8) -> bool| {
        msgs.iter().filter(|m| pred(m.popularity())).count() as f64 / total
    };
    let p0 = share(&|p| p == 0);
    let p10 = share(&|p| (10..=20).contains(&p));
    let p50 = share(&|p| p == 50);
    let mut by_user: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for m in msgs {
        by_user
            .entry(m.origin_node())
            .or_default()
            .push(m.injection_time().secs());
    }
    let mut gaps = 0.0;
    let mut count = 0usize;
    for times in by_user.values() {
        for w in times.windows(2) {
            gaps += w[1] - w[0];
            count += 1;
        }
    }
    let mean_gap = gaps / count as f64;
    let target = 86400.0 / 5.0;
    let rel = (mean_gap - target).abs() / target;
    let ok = msgs.len() >= 3000
        && (p0 - 0.70).abs() <= 0.02
        && (p10 - 0.29).abs() <= 0.02
        && (p50 - 0.01).abs() <= 0.02
        && rel <= 0.05;
    let text = format!(
        "{} messages; popularity 0:{p0:.4} 10-20:{p10:.4} 50:{p50:.4}; mean gap {mean_gap:.1}s vs {target}s ({:.2}%)",
        msgs.len(),
        rel * 100.0
    );
    check(ok, text.clone(), text)
}

fn c9_contacts() -> Outcome {
    let mut cfg = builtin_scenario("jodel").unwrap();
    cfg.user_count = 200;
    cfg.run_horizon = 7200.0;
    cfg.master_seed = 9;
    let opts = RunOptions {
        check_contacts: true,
        ..RunOptions::default()
    };
    let out = run(&cfg, opts).map_err(|v| format!("{v:?}"))?;

    // Independent brute force on random layouts, including points on cell edges.
    let area = cfg.area;
    let mut rng = RngStream::new(9, StreamId::Custom("layouts".into()));
    let r = cfg.contact_radius_m;
    let mut layouts = 0;
    for trial in 0..200 {
        let pts: Vec<Position> = (0..200)
            .map(|i| {
                if trial % 4 == 0 && i % 2 == 0 {
                    Position::new((rng.index(34) as f64) * r, (rng.index(34) as f64) * r)
                } else {
                    Position::new(
                        rng.uniform(0.0, area.width).unwrap(),
                        rng.uniform(0.0, area.height).unwrap(),
                    )
                }
            })
            .collect();
        let mut brute = Vec::new();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if (pts[i].x - pts[j].x).powi(2) + (pts[i].y - pts[j].y).powi(2) <= r * r {
                    brute.push((i, j));
                }
            }
        }
        if scan_contacts(&pts, r, &area) != brute {
            return Err(format!("layout {trial} differs from brute force"));
        }
        layouts += 1;
    }
    check(
        out.contact_check.ticks > 0 && out.contact_check.mismatches == 0,
        format!(
            "{} ticks of a 200-node run and {layouts} random layouts: indexed == brute force",
            out.contact_check.ticks
        ),
        format!(
            "{} of {} ticks mismatched",
            out.contact_check.mismatches, out.contact_check.ticks
        ),
    )
}

fn c10_jain() -> Outcome {
    for n in [2usize, 4, 10] {
        let equal = vec![3.5; n];
        let mut single = vec![0.0; n];
        single[n / 2] = 7.0;
        let je = jain_index(&equal);
        let js = jain_index(&single);
        let close = |a: Option<f64>, b: f64| a.is_some_and(|a| (a - b).abs() <= 1e-12);
        if !close(je, 1.0) || !close(js, 1.0 / n as f64) {
            return Err(format!("n={n}: equal -> {je:?}, single -> {js:?}"));
        }
    }
    Ok("equal -> 1 and single nonzero -> 1/n for n = 2, 4, 10".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("reaction law", c1_reaction_law),
        ("clamp", c2_clamp),
        ("emergency end-to-end", c3_emergency),
        ("angry bit", c4_angry),
        ("visit punctuality", c5_visits),
        ("metrics oracle", c6_metrics_oracle),
        ("determinism", c7_determinism),
        ("generator statistics", c8_generator),
        ("contact oracle", c9_contacts),
        ("fairness identities", c10_jain),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
