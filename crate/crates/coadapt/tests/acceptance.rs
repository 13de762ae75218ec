//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coadapt::analysis;
use coadapt::config::InitScheme;
use coadapt::logfile::{read_log, write_log};
use coadapt::simulate::Batch;
use coadapt_core::human::HumanModel;
use coadapt_core::learner::{init_circle_8, init_random_ball, BallSampling};
use coadapt_core::protocol::{run_trial, session_plan, PlannedTrial, ScreenMap, SessionLog, Tick, TrialKind, TrialSpec};
use coadapt_core::stats::{median, percentiles};
use coadapt_core::{
    run_simulated_session, AffinePolicy, ClosedLoopSystem, Dims, Estimate, LearnerConfig, Matrix, QuadraticCost,
    TrialOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Upper bound on the median total error at k = 10 over 100 noisy 1x1
/// sessions, as printed by `scripts/noisy_oracle.py`.
const NOISY_MEDIAN_THRESHOLD: f64 = 0.106;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// The circle for 1x1, a few ball draws otherwise.
fn starts(dims: Dims) -> Vec<Estimate> {
    if dims.state_len() == 2 {
        init_circle_8(0.65).unwrap().to_vec()
    } else {
        (0..3)
            .map(|s| init_random_ball(dims, 0.65, BallSampling::Volume, s).unwrap())
            .collect()
    }
}

fn exact_session(dims: Dims, init: Estimate) -> coadapt_core::SimulatedSession {
    run_simulated_session(
        &QuadraticCost::origin(dims),
        &LearnerConfig::defaults(dims),
        init,
        &HumanModel::ExactBestResponse,
        &TrialOptions::default(),
    )
    .unwrap()
}

fn closed_loop_equality() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut sessions = 0;
    for dims in Dims::experiment_configurations() {
        let config = LearnerConfig::defaults(dims);
        let sys = ClosedLoopSystem::from_config(&config).map_err(|e| e.to_string())?;
        for init in starts(dims) {
            let s = exact_session(dims, init.clone());
            let want = sys.iterate(&init.stacked(), 10).map_err(|e| e.to_string())?;
            ensure(s.history.len() == 11, || "expected 11 iterates".into())?;
            for (st, x) in s.history.iter().zip(&want) {
                for (a, b) in st.estimate.stacked().iter().zip(x) {
                    worst = worst.max((a - b).abs());
                }
            }
            sessions += 1;
        }
    }
    let elapsed = t0.elapsed();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e} > 1e-12"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("{sessions} sessions, max deviation {worst:e}, {elapsed:.2?}"))
}

fn circle_convergence() -> Outcome {
    let t0 = Instant::now();
    let dims = Dims::new(1, 1).unwrap();
    let mut worst_final: f64 = 0.0;
    for (i, init) in init_circle_8(0.65).unwrap().into_iter().enumerate() {
        let s = exact_session(dims, init);
        for st in &s.history[1..] {
            ensure(st.estimate.h_hat == [0.0], || {
                format!("start {i}: h_hat {:?} at k = {}", st.estimate.h_hat, st.k)
            })?;
        }
        let last = &s.final_state().estimate;
        let total = last.h_hat[0].abs() + last.m_hat[0].abs();
        ensure(total <= 1e-3, || format!("start {i}: total L1 {total:e} at k = 10"))?;
        worst_final = worst_final.max(total);
    }
    let elapsed = t0.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("worst total L1 at k=10 {worst_final:e}, {elapsed:.2?}"))
}

fn spectral_analysis() -> Outcome {
    let one = Dims::new(1, 1).unwrap();
    let sys = ClosedLoopSystem::from_config(&LearnerConfig::defaults(one)).map_err(|e| e.to_string())?;
    let want = [0.0, 0.0, -0.5, 0.5];
    let got = sys.matrix().as_slice();
    ensure(got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12), || {
        format!("1x1 matrix {:?}", sys.matrix())
    })?;
    let rho = sys.stability().map_err(|e| e.to_string())?.spectral_radius;
    ensure((rho - 0.5).abs() <= 1e-12, || format!("rho = {rho}"))?;
    for dims in ["2x1", "2x2"].map(|d| d.parse::<Dims>().unwrap()) {
        let sys = ClosedLoopSystem::from_config(&LearnerConfig::defaults(dims)).map_err(|e| e.to_string())?;
        let sq = sys.power(2).map_err(|e| e.to_string())?.max_abs();
        ensure(sq <= 1e-12, || format!("{dims}: max |A^2| = {sq:e}"))?;
        for init in starts(dims) {
            let s = exact_session(dims, init);
            for st in &s.history[2..] {
                let m = st.estimate.m_hat.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                ensure(m <= 1e-12, || format!("{dims}: |m_hat[{}]| = {m:e}", st.k))?;
            }
        }
    }
    Ok(format!("1x1 rho = {rho}; 2x1 and 2x2 A^2 = 0; m_hat = 0 from k = 2"))
}

/// Cost along the policy, from the definition.
fn cost_along(l: &[f64], dh: usize, h_hat: &[f64], m_hat: &[f64], h: &[f64]) -> f64 {
    let mut c = 0.0;
    for x in h {
        c += 0.5 * x * x;
    }
    for (i, mh) in m_hat.iter().enumerate() {
        let mut m = *mh;
        for j in 0..dh {
            m += l[i * dh + j] * (h[j] - h_hat[j]);
        }
        c += 0.5 * m * m;
    }
    c
}

fn best_response_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 * 1e-3).collect();
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    for dims in Dims::experiment_configurations() {
        let (dh, dm) = (dims.human(), dims.machine());
        let cost = QuadraticCost::origin(dims);
        for _ in 0..100 {
            let l: Vec<f64> = (0..dh * dm).map(|_| rng.random_range(-2.0..2.0)).collect();
            let h_hat: Vec<f64> = (0..dh).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m_hat: Vec<f64> = (0..dm).map(|_| rng.random_range(-1.0..1.0)).collect();
            let policy = AffinePolicy::new(Matrix::from_row_major(dm, dh, l.clone()).unwrap(), h_hat.clone(), m_hat.clone())
                .unwrap();
            let br = cost.best_response(&policy).map_err(|e| e.to_string())?;
            let at_br = cost_along(&l, dh, &h_hat, &m_hat, &br);
            let mut grid_min = f64::INFINITY;
            if dh == 1 {
                for &a in &grid {
                    grid_min = grid_min.min(cost_along(&l, 1, &h_hat, &m_hat, &[a]));
                }
            } else {
                for &a in &grid {
                    for &b in &grid {
                        grid_min = grid_min.min(cost_along(&l, 2, &h_hat, &m_hat, &[a, b]));
                    }
                }
            }
            ensure(grid_min >= at_br - 1e-6, || {
                format!("{dims}: grid cost {grid_min} below closed form {at_br}")
            })?;
            min_margin = min_margin.min(grid_min - at_br);
            checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!("{checked} policies, smallest grid margin {min_margin:e}, {elapsed:.2?}"))
}

fn protocol_fidelity() -> Outcome {
    for (dims, want) in Dims::experiment_configurations().into_iter().zip([23, 33, 33, 53]) {
        let plan = session_plan(dims, 10).map_err(|e| e.to_string())?;
        let checks = plan.iter().filter(|t| matches!(t, PlannedTrial::AttentionCheck { .. })).count();
        ensure(plan.len() == want && checks == 3, || {
            format!("{dims}: {} trials, {checks} checks", plan.len())
        })?;
    }

    let dims = Dims::new(1, 1).unwrap();
    let cost = QuadraticCost::origin(dims);
    let spec = TrialSpec {
        policy: AffinePolicy::new(Matrix::from_rows(&[[1.0]]), vec![0.65], vec![0.0]).unwrap(),
        timing: coadapt_core::protocol::TrialTiming::for_dims(dims),
        screen: ScreenMap::identity(1),
        kind: TrialKind::Unperturbed,
    };
    let mut source = |tick: &Tick<'_>| Some(vec![(tick.t * 0.7).sin() * 0.5]);
    let record = run_trial(&cost, &spec, &mut source).map_err(|e| e.to_string())?;
    let mut log = SessionLog::new(dims);
    log.push_trial(0, 0, &record, &Estimate::zeros(dims), &cost)
        .map_err(|e| e.to_string())?;
    ensure(log.rows().len() == 600, || format!("10 s trial logged {} rows", log.rows().len()))?;

    let session = run_simulated_session(
        &cost,
        &LearnerConfig::defaults(dims),
        init_circle_8(0.65).unwrap()[5].clone(),
        &HumanModel::GradientFlow {
            rate: 5.0,
            sigma: 0.03,
            seed: 17,
        },
        &TrialOptions {
            seed: 17,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    write_log(&session.log, &mut bytes).map_err(|e| e.to_string())?;
    let back = read_log(bytes.as_slice()).map_err(|e| e.to_string())?;
    ensure(back == session.log, || "log CSV round trip changed the log".into())?;
    Ok(format!("plans 23/33/33/53, 600 rows per 10 s trial, {} rows round-tripped", back.rows().len()))
}

fn noisy_robustness() -> Outcome {
    let dims = Dims::new(1, 1).unwrap();
    let batch = Batch {
        learner: LearnerConfig::defaults(dims),
        init: InitScheme::Circle8 { radius: 0.65 },
        sessions: 100,
        seed: 0,
        human: HumanModel::NoisyBestResponse { sigma: 0.05, seed: 0 },
        timing: None,
    };
    let totals = (0..batch.sessions)
        .map(|i| {
            let s = batch.run_session(i).map_err(|e| e.to_string())?;
            let e = &s.final_state().estimate;
            Ok(e.h_hat[0].abs() + e.m_hat[0].abs())
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let med = median(&totals).map_err(|e| e.to_string())?;
    ensure(med < NOISY_MEDIAN_THRESHOLD, || {
        format!("median total L1 {med} >= {NOISY_MEDIAN_THRESHOLD}")
    })?;
    Ok(format!("median total L1 at k=10 = {med:.6} < {NOISY_MEDIAN_THRESHOLD}"))
}

/// Linear interpolation between closest ranks on a fully sorted copy.
fn reference_percentile(values: &[f64], p: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let pos = (x.len() - 1) as f64 * p / 100.0;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 {
        x[lo]
    } else {
        x[lo] + frac * (x[lo + 1] - x[lo])
    }
}

fn stats_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let values: Vec<f64> = (0..10_000).map(|_| rng.random_range(-5.0..5.0)).collect();
    let ps: Vec<f64> = (0..=200).map(|i| i as f64 * 0.5).chain([5.0, 25.0, 50.0, 75.0, 95.0, 33.3]).collect();
    let got = percentiles(&values, &ps).map_err(|e| e.to_string())?;
    for (p, g) in ps.iter().zip(&got) {
        let want = reference_percentile(&values, *p);
        ensure(g.to_bits() == want.to_bits(), || format!("p{p}: {g} vs reference {want}"))?;
    }
    let med = median(&values).map_err(|e| e.to_string())?;
    ensure(med.to_bits() == reference_percentile(&values, 50.0).to_bits(), || "median mismatch".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let logs = dir.path().join("logs");
    let batch = Batch {
        learner: LearnerConfig::defaults(Dims::new(1, 1).unwrap()),
        init: InitScheme::Circle8 { radius: 0.65 },
        sessions: 16,
        seed: 3,
        human: HumanModel::NoisyBestResponse { sigma: 0.05, seed: 3 },
        timing: None,
    };
    batch.run_to_dir(&logs, true).map_err(|e| e.to_string())?;
    let mut generations = Vec::new();
    for run in ["a", "b"] {
        let set = analysis::load_dir(&logs).map_err(|e| e.to_string())?;
        let stats = analysis::iteration_stats(&set).map_err(|e| e.to_string())?;
        let files = analysis::write_stats(&stats, set.dims, &dir.path().join(run)).map_err(|e| e.to_string())?;
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(f).unwrap()).collect();
        generations.push(bytes);
    }
    ensure(generations[0] == generations[1], || "stats CSVs differ between runs".into())?;
    Ok(format!(
        "{} percentiles bit-identical on 1e4 values; {} stats CSVs regenerated bit-identically",
        ps.len(),
        generations[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("closed-loop equality", closed_loop_equality),
        ("1x1 convergence from circle starts", circle_convergence),
        ("spectral analysis", spectral_analysis),
        ("best-response grid oracle", best_response_oracle),
        ("protocol fidelity", protocol_fidelity),
        ("noisy-human robustness", noisy_robustness),
        ("stats pipeline", stats_pipeline),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
