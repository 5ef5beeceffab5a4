//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use attrec::experiments::{
    experiment1, experiment2, experiment3, monotone_non_increasing, not_below, separated_above, theorem_suites, Method,
    CONVERGENCE_K,
};
use attrec::simulator::{builtin_scenario_names, stream, Domain, Scenario};
use attrec::{
    calibrate_bin, BinCalibration, ClassifierModel, ModelSet, ObjectCatalog, Observation, Orientation, Outcome,
    Recognizer,
};
use rand::seq::SliceRandom;
use rand::Rng;

const ORACLE_TOLERANCE: f64 = 1e-10;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const THEOREM1_CASES: usize = 2000;
const THEOREM1_BUDGET: Duration = Duration::from_secs(60);
const CONVERGENCE_TRIALS: usize = 20_000;
const CONVERGENCE_CEILING: f64 = 0.02;
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(300);
const EXP2_TRIALS: usize = 2000;
const EXP3_TRIALS: usize = 2000;
const TARGET_PPV: f64 = 0.96;
const DETECTION_FLOOR: f64 = 0.09;
const NORMALIZATION_TOLERANCE: f64 = 1e-12;
const ORDER_TOLERANCE: f64 = 1e-10;
const SEED: u64 = 20160415;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence

/// Non-decreasing index sequences of length `len` over `0..n`.
fn multisets(n: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, len: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            cur.push(x);
            rec(n, len, x, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, len, 0, &mut Vec::new(), &mut out);
    out
}

#[derive(Clone, Copy)]
enum State {
    Pos,
    Neg,
    Uncertain,
    Unreliable,
}

const STATES: [State; 4] = [State::Pos, State::Neg, State::Uncertain, State::Unreliable];

/// Posterior by literal products over the piecewise conditional, with the
/// catch-all branch evaluated as the prior mass of matching objects.
fn oracle(matrix: &[Vec<bool>], priors: &[f64], ppv: &[f64], npv: &[f64], obs: &[(usize, State)]) -> Vec<f64> {
    let n = priors.len();
    let mut weights: Vec<f64> = priors.to_vec();
    for (j, w) in weights.iter_mut().enumerate() {
        for &(i, state) in obs {
            let f = matrix[j][i];
            let mass: f64 = (0..n).filter(|&t| matrix[t][i] == f).map(|t| priors[t]).sum();
            let cond = match (state, f) {
                (State::Pos, true) => ppv[i],
                (State::Pos, false) => 1.0 - ppv[i],
                (State::Neg, true) => 1.0 - npv[i],
                (State::Neg, false) => npv[i],
                _ => mass,
            };
            *w *= cond / mass;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for n in 2..=4usize {
        let columns: Vec<Vec<bool>> = (1..(1u32 << n) - 1)
            .map(|mask| (0..n).map(|j| mask >> j & 1 == 1).collect())
            .collect();
        let skewed: Vec<f64> = (1..=n).map(|j| j as f64 / (n * (n + 1) / 2) as f64).collect();
        let prior_sets = [vec![1.0 / n as f64; n], skewed];
        for m in 1..=4usize {
            let ppv: Vec<f64> = (0..m).map(|i| 0.93 - 0.11 * i as f64).collect();
            let npv: Vec<f64> = (0..m).map(|i| 0.87 - 0.07 * i as f64).collect();
            let models = ModelSet {
                bins: vec![[0.0, 1.0], [1.0, 2.0]],
                classifiers: (0..m)
                    .map(|i| ClassifierModel {
                        attribute: format!("a{i}"),
                        orientation: Orientation::LowerIsPositive,
                        calibrations: vec![
                            BinCalibration::with_rates(0, ppv[i], npv[i], 0.5, 0.5, 0.1, 0.1),
                            BinCalibration::unreliable(1),
                        ],
                    })
                    .collect(),
            };
            let obs_sets: Vec<Vec<usize>> = (0..=3).flat_map(|len| multisets(4 * m, len)).collect();
            for cols in multisets(columns.len(), m) {
                let matrix: Vec<Vec<bool>> = (0..n).map(|j| cols.iter().map(|&c| columns[c][j]).collect()).collect();
                for priors in &prior_sets {
                    let catalog = ObjectCatalog::new(
                        (0..n).map(|j| format!("o{j}")).collect(),
                        (0..m).map(|i| format!("a{i}")).collect(),
                        matrix.clone(),
                        priors.clone(),
                    )
                    .expect("valid catalog");
                    let rec = Recognizer::new(catalog, models.clone()).expect("aligned models");
                    for set in &obs_sets {
                        let obs: Vec<(usize, State)> = set.iter().map(|&s| (s / 4, STATES[s % 4])).collect();
                        let mut state = rec.start();
                        for &(i, st) in &obs {
                            let o = match st {
                                State::Pos => Observation::new(i, 0, Outcome::Positive, true),
                                State::Neg => Observation::new(i, 0, Outcome::Negative, true),
                                State::Uncertain => Observation::new(i, 0, Outcome::Uncertain, true),
                                State::Unreliable => Observation::new(i, 1, Outcome::Positive, false),
                            };
                            rec.observe(&mut state, &o).expect("valid observation");
                        }
                        let got = state.normalized();
                        let want = oracle(&matrix, priors, &ppv, &npv, &obs);
                        for (g, w) in got.iter().zip(&want) {
                            worst = worst.max((g - w).abs());
                        }
                        checked += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= ORACLE_TOLERANCE && elapsed < ORACLE_BUDGET,
        format!("{checked} cases, max |diff| {worst:.2e} (tol {ORACLE_TOLERANCE:.0e}), {elapsed:.2?} (budget {ORACLE_BUDGET:?})"),
    )
}

// ---------------------------------------------------------------------------
// 2-3. Guarantee and convergence suites

fn theorem_criteria() -> (Verdict, Verdict) {
    let start = Instant::now();
    let t1 = attrec::theory::theorem1_suite(THEOREM1_CASES, SEED);
    let t1_time = start.elapsed();
    let first = verdict(
        t1.cases >= 1000 && t1.correct == t1.cases && t1_time < THEOREM1_BUDGET,
        format!(
            "{}/{} correct over {} certified cases, {t1_time:.2?} (budget {THEOREM1_BUDGET:?})",
            t1.correct, t1.cases, t1.certified
        ),
    );

    let start = Instant::now();
    let report = theorem_suites(0, CONVERGENCE_TRIALS, SEED).expect("convergence run");
    let c = &report.convergence;
    let elapsed = start.elapsed();
    let at = |k: usize| c.errors[CONVERGENCE_K.iter().position(|&x| x == k).unwrap()].error();
    let pass = c.trials >= 2000
        && c.config.ppv == 0.98
        && c.config.npv == 0.98
        && c.config.detection == 0.5
        && at(50) < at(5)
        && at(200) < CONVERGENCE_CEILING
        && elapsed < CONVERGENCE_BUDGET;
    let second = verdict(
        pass,
        format!(
            "{} trials, error K=5 {:.5}, K=50 {:.5}, K=200 {:.5} (ceiling {CONVERGENCE_CEILING}), {elapsed:.2?}",
            c.trials,
            at(5),
            at(50),
            at(200)
        ),
    );
    (first, second)
}

// ---------------------------------------------------------------------------
// 4. Threshold comparison

fn exp2_criterion() -> Verdict {
    let scenario = Scenario::builtin("exp2").expect("bundled exp2");
    let curve = experiment2(&scenario, EXP2_TRIALS, scenario.seed()).expect("exp2 run");
    let two = curve.series(Method::TwoThreshold);
    let one = curve.series(Method::SingleThreshold);
    let mut detail = String::new();
    let mut lower = true;
    for (idx, &k) in curve.k_values.iter().enumerate() {
        if k >= 3 {
            let (e2, h2) = two[idx];
            let (e1, h1) = one[idx];
            lower &= separated_above(e1, h1, e2, h2);
        }
    }
    let decomposes = curve
        .two_threshold
        .iter()
        .chain(&curve.single_threshold)
        .all(|t| (t.error() - t.wrong_rate() - t.tie_rate()).abs() < 1e-12 && t.tie_rate() <= t.error());
    let mono = monotone_non_increasing(&two) && monotone_non_increasing(&one);
    for (idx, k) in curve.k_values.iter().enumerate() {
        detail.push_str(&format!(" K{k}:{:.3}/{:.3}", two[idx].0, one[idx].0));
    }
    verdict(
        curve.trials >= 1000 && curve.k_values == (1..=8).collect::<Vec<_>>() && lower && mono && decomposes,
        format!(
            "{} trials, two<single beyond halfwidths at K>=3: {lower}, monotone: {mono}, decomposes: {decomposes};{detail}",
            curve.trials
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Attribute families

fn exp3_criterion() -> Verdict {
    let scenario = Scenario::builtin("exp3").expect("bundled exp3");
    let table = experiment3(&scenario, EXP3_TRIALS, scenario.seed()).expect("exp3 run");
    let views = scenario.file.exp3.as_ref().map(|c| c.views_per_bin);
    let get = |s: &str, k: usize| {
        let t = table.get(s, k).expect("system present");
        (t.accuracy(), t.halfwidth())
    };
    let nb = table.bins.len();
    let mut all_best = true;
    let mut detail = String::new();
    for k in 0..nb {
        let (a, ha) = get("all", k);
        let (f, hf) = get("fine", k);
        let (c, hc) = get("coarse", k);
        all_best &= not_below(a, ha, f, hf) && not_below(a, ha, c, hc);
        detail.push_str(&format!(" bin{k}: all {a:.3} fine {f:.3} coarse {c:.3};"));
    }
    let (f, hf) = get("fine", nb - 1);
    let (c, hc) = get("coarse", nb - 1);
    let coarse_far = separated_above(c, hc, f, hf);
    verdict(
        nb == 5 && views == Some(3) && all_best && coarse_far,
        format!("all>=max(fine,coarse): {all_best}, coarse>fine in farthest bin: {coarse_far};{detail}"),
    )
}

// ---------------------------------------------------------------------------
// 6. Calibration contract

/// Replicates each shipped experiment calibrates on.
fn replicates_used(scenario: &Scenario) -> u64 {
    let exp2 = scenario.file.exp2.as_ref().map_or(1, |c| c.training_sets);
    let exp3 = scenario.file.exp3.as_ref().map_or(1, |c| c.training_sets);
    exp2.max(exp3).max(1) as u64
}

fn calibration_contract() -> Verdict {
    let mut reliable = 0;
    let mut violations = Vec::new();
    for name in builtin_scenario_names() {
        let scenario = Scenario::builtin(name).expect("bundled scenario");
        for r in 0..replicates_used(&scenario) {
            let samples = scenario.training_replicate(r).expect("samples");
            let models = scenario.calibrate_on(&samples).expect("calibration");
            for (i, model) in models.classifiers.iter().enumerate() {
                for cal in model.calibrations.iter().filter(|c| c.reliable) {
                    reliable += 1;
                    let (pos, neg) = &samples[i][cal.bin_index];
                    let lower = model.orientation == Orientation::LowerIsPositive;
                    let tp_cut = cal.theta_pos.expect("reliable bin has theta_pos");
                    let tn_cut = cal.theta_neg.expect("reliable bin has theta_neg");
                    let said_pos = |s: f64| if lower { s <= tp_cut } else { s >= tp_cut };
                    let said_neg = |s: f64| if lower { s >= tn_cut } else { s <= tn_cut };
                    let tp = pos.iter().filter(|&&s| said_pos(s)).count();
                    let fp = neg.iter().filter(|&&s| said_pos(s)).count();
                    let tn = neg.iter().filter(|&&s| said_neg(s)).count();
                    let fn_ = pos.iter().filter(|&&s| said_neg(s)).count();
                    let ppv_ok = tp + fp > 0 && tp as f64 >= TARGET_PPV * (tp + fp) as f64;
                    let det_ok = tp as f64 >= DETECTION_FLOOR * pos.len() as f64;
                    let npv_ok = tn + fn_ > 0 && tn as f64 >= TARGET_PPV * (tn + fn_) as f64;
                    if !(ppv_ok && det_ok && npv_ok) {
                        violations.push(format!("{name}/r{r}/{}/bin{}", model.attribute, cal.bin_index));
                    }
                }
            }
        }
    }
    verdict(
        violations.is_empty() && reliable > 0,
        format!("{reliable} reliable (attribute, bin) records recounted, violations: {violations:?}"),
    )
}

// ---------------------------------------------------------------------------
// 7. Invariants

fn invariant_suite() -> Verdict {
    let scenario = Scenario::builtin("exp3").expect("bundled exp3");
    let rec = Recognizer::new(scenario.catalog.clone(), scenario.calibrate_replicate(0).unwrap()).unwrap();
    let m = scenario.catalog.num_attributes();
    let mut rng = stream(SEED, Domain::Trial, 0);
    let mut norm_worst = 0.0f64;
    let mut order_worst = 0.0f64;
    let mut noop_ok = true;
    for _ in 0..500 {
        let truth = rng.random_range(0..scenario.catalog.num_objects());
        let mut obs: Vec<Observation> = (0..rng.random_range(1..30))
            .map(|_| {
                let i = rng.random_range(0..m);
                let k = rng.random_range(0..scenario.num_bins());
                let t = attrec::simulator::Truth::of(scenario.catalog.has(truth, i));
                let score = scenario.sample_score(i, t, k, &mut rng).unwrap();
                Observation::classified(rec.model(i).unwrap(), i, k, score).unwrap()
            })
            .collect();
        let mut a = rec.start();
        for o in &obs {
            let before = a.clone();
            let adopted = rec.observe(&mut a, o).unwrap();
            if !o.outcome.is_adopted() || !o.in_reliable_region {
                noop_ok &= !adopted && a == before;
            }
        }
        norm_worst = norm_worst.max((a.normalized().iter().sum::<f64>() - 1.0).abs());
        obs.shuffle(&mut rng);
        let mut b = rec.start();
        for o in &obs {
            rec.observe(&mut b, o).unwrap();
        }
        for (x, y) in a.log_normalized().iter().zip(b.log_normalized()) {
            order_worst = order_worst.max((x - y).abs());
        }
    }
    // Forced uncertain and out-of-region observations leave the state alone.
    let mut s = rec.start();
    let before = s.clone();
    for i in 0..m {
        for k in 0..scenario.num_bins() {
            rec.observe(&mut s, &Observation::new(i, k, Outcome::Uncertain, true))
                .unwrap();
            rec.observe(&mut s, &Observation::new(i, k, Outcome::Positive, false))
                .unwrap();
        }
    }
    noop_ok &= s == before;
    let prior_ok = rec.start().normalized() == scenario.catalog.priors().to_vec();

    // Sweep determinism: same sample, permuted, gives the same calibration.
    let samples = scenario.training_replicate(3).unwrap();
    let mut sweep_ok = true;
    for (i, per_bin) in samples.iter().enumerate() {
        for (k, (pos, neg)) in per_bin.iter().enumerate() {
            let o = scenario.orientation(i);
            let t = scenario.targets;
            let first = calibrate_bin(k, pos, neg, o, &t).unwrap();
            let mut p2 = pos.clone();
            let mut n2 = neg.clone();
            p2.reverse();
            n2.shuffle(&mut rng);
            sweep_ok &= first == calibrate_bin(k, &p2, &n2, o, &t).unwrap();
        }
    }

    // Byte-identical tables across two runs.
    let twice = |f: &dyn Fn() -> String| f() == f();
    let e1 = Scenario::builtin("exp1").unwrap();
    let e2 = Scenario::builtin("exp2").unwrap();
    let csv_ok = twice(&|| {
        let r = experiment1(&e1, Some(4), 9).unwrap();
        r.kde_csv() + &r.overlap_csv()
    }) && twice(&|| experiment2(&e2, 200, 9).unwrap().csv())
        && twice(&|| experiment3(&scenario, 100, 9).unwrap().csv())
        && twice(&|| theorem_suites(20, 300, 9).unwrap().convergence.csv());

    let pass = norm_worst <= NORMALIZATION_TOLERANCE
        && order_worst <= ORDER_TOLERANCE
        && noop_ok
        && prior_ok
        && sweep_ok
        && csv_ok;
    verdict(
        pass,
        format!(
            "normalization {norm_worst:.1e} (tol {NORMALIZATION_TOLERANCE:.0e}), order {order_worst:.1e} \
             (tol {ORDER_TOLERANCE:.0e}), no-op {noop_ok}, prior identity {prior_ok}, sweep determinism \
             {sweep_ok}, identical CSVs {csv_ok}"
        ),
    )
}

fn main() -> ExitCode {
    let (t1, t2) = theorem_criteria();
    let results = [
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 guaranteed recognition suite", t1),
        ("3 two-object convergence", t2),
        ("4 threshold comparison", exp2_criterion()),
        ("5 attribute families", exp3_criterion()),
        ("6 calibration contract", calibration_contract()),
        ("7 invariant suite", invariant_suite()),
    ];
    let mut failed = BTreeSet::new();
    for (name, v) in &results {
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass {
            failed.insert(*name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing {failed:?}");
        ExitCode::FAILURE
    }
}
