//! End-to-end acceptance checks. Runs as a plain program so that every
//! criterion prints one line in order, and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::time::Instant;

use branchsim_core::engine::{
    apply_branch_vector, simultaneity_window, AggregatedEngine, ClassTable, ExactEngine, StateVectorToy, INITIAL_LABEL,
};
use branchsim_core::measure::{golden_split, BigCount, SplitParameter};
use branchsim_core::scenarios::*;
use branchsim_core::stats::{
    limiting_mean, max_push_forward_step, push_forward, stationary_density, stationary_moments_by_quadrature,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXACT_COUNT_SECONDS: f64 = 10.0;
const ORACLE_SECONDS: f64 = 1.0;
const ORACLE_CASES: usize = 20;
const ORACLE_TOLERANCE: f64 = 1e-12;
const BINOMIAL_SECONDS: f64 = 5.0;
const CONSERVATION_TOLERANCE: f64 = 1e-9;
const MOMENT_TOLERANCE: f64 = 1e-10;
const PUSH_FORWARD_TOLERANCE: f64 = 1e-8;
const DENSITY_SECONDS: f64 = 1.0;
const ENVELOPE_BOUNDS: [f64; 3] = [0.03, 0.015, 0.003];
const GOLDEN_SECONDS: f64 = 600.0;
const DECAY_BAND: (f64, f64) = (-0.65, -0.35);
const PAIR_RATIO_TOLERANCE: f64 = 0.01;
const PAIR_LEAD_TOLERANCE: f64 = 1e-6;
const PAIR_SECONDS: f64 = 60.0;
const MULTIPARTICLE_TOLERANCE: f64 = 0.05;
const MULTIPARTICLE_MIN_EVENTS: usize = 10_000;
const MULTIPARTICLE_SECONDS: f64 = 30.0;
const MULTIPARTICLE_SEED: u64 = 20_240_601;
const J_MAX: u32 = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn pow2(j: u32) -> u64 {
    1u64 << j
}

fn exact_count(c: &BigCount) -> Option<BigUint> {
    match c {
        BigCount::Exact(n) => Some(n.clone()),
        BigCount::Scaled(_) => None,
    }
}

/// Pure-family counts and residual count at each snapshot time, along with
/// the largest deviation of the total measure from one.
fn exact_pair_counts(config: &ScenarioConfig, times: &[f64]) -> Result<(Vec<(Vec<u64>, u64)>, f64), String> {
    let scenario = config.resolve().map_err(|e| e.to_string())?;
    let mut engine = ExactEngine::new(scenario, config.population_cap).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    let mut drift: f64 = 0.0;
    for &t in times {
        engine.advance_to(t).map_err(|e| e.to_string())?;
        let tally = engine.tally();
        out.push((tally.pure.clone(), tally.residual));
        drift = drift.max((engine.total_measure() - 1.0).abs());
    }
    Ok((out, drift))
}

fn period() -> f64 {
    doubling_period(1.0)
}

fn criterion_equal_pair(drifts: &mut Vec<(&'static str, f64)>) -> Outcome {
    let start = Instant::now();
    let mut config = build_eq5();
    config.population_cap = 1 << 23;
    let times: Vec<f64> = (1..=J_MAX).map(|j| f64::from(j - 1) * period()).collect();
    let (counts, drift) = match exact_pair_counts(&config, &times) {
        Ok(r) => r,
        Err(e) => return Outcome::new(false, format!("engine error: {e}")),
    };
    drifts.push(("equal pair", drift));
    let mut bad = Vec::new();
    for (j, (pure, residual)) in (1..=J_MAX).zip(&counts) {
        let want = pow2(j) - 1;
        if pure != &vec![want, want] || *residual != 1 {
            bad.push(format!("J={j}: pure {pure:?} residual {residual}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        bad.is_empty() && secs < EXACT_COUNT_SECONDS,
        format!("J=1..{J_MAX} pure A = pure B = 2^J-1, one residual; mismatches {bad:?}; {secs:.2} s"),
    )
}

fn criterion_unequal_pair(drifts: &mut Vec<(&'static str, f64)>) -> Outcome {
    let start = Instant::now();
    let mut config = build_eq6();
    config.population_cap = 1 << 23;
    let times: Vec<f64> = (1..=J_MAX).map(|j| f64::from(j) * period()).collect();
    let scenario = config.resolve().expect("builder is valid");
    let mut engine = ExactEngine::new(scenario, config.population_cap).expect("single-multiplicity cells");
    let mut bad = Vec::new();
    let mut drift: f64 = 0.0;
    for (j, &t) in (1..=J_MAX).zip(&times) {
        if let Err(e) = engine.advance_to(t) {
            return Outcome::new(false, format!("engine error at J={j}: {e}"));
        }
        let tally = engine.tally();
        drift = drift.max((engine.total_measure() - 1.0).abs());
        if tally.pure != vec![pow2(j + 1) - 1, pow2(j) - 1] {
            bad.push(format!("J={j}: pure {:?}", tally.pure));
        }
        let split = tally.counts(ResidualPolicy::CountAsSplit);
        let (a, b) = (exact_count(&split["A"]), exact_count(&split["B"]));
        match (a, b) {
            (Some(a), Some(b)) if a == b.clone() * 2u32 => {}
            (a, b) => bad.push(format!("J={j}: split counts {a:?} : {b:?}")),
        }
    }
    drifts.push(("unequal pair", drift));
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        bad.is_empty() && secs < EXACT_COUNT_SECONDS,
        format!("J=1..{J_MAX} pure A = 2^(J+1)-1, pure B = 2^J-1, split ratio 2; mismatches {bad:?}; {secs:.2} s"),
    )
}

/// Replays the exact engine's events through the state-vector form and
/// compares the per-label measures.
fn oracle_case(z: f64, m: f64, g: f64) -> Result<f64, String> {
    let sp = SplitParameter::from_z(z).map_err(|e| e.to_string())?;
    let mut config = build_eq5();
    config.z = z;
    config.g = GSpec::Value(g);
    config.components[0].cells[0].m0 = m;
    config.components[1].cells[0].m0 = 1.0 - m;
    let scenario = config.resolve().map_err(|e| e.to_string())?;
    let mut engine = ExactEngine::new(scenario.clone(), 1 << 12).map_err(|e| e.to_string())?;
    let first = -(m.max(1.0 - m) * g).ln();
    engine.advance_to(first + 2.5).map_err(|e| e.to_string())?;

    let mut state = StateVectorToy::new(g, 1.0);
    state.set_amplitude(0, INITIAL_LABEL, m.sqrt());
    state.set_amplitude(1, INITIAL_LABEL, (1.0 - m).sqrt());
    for sb in &engine.sub_branches()[1..] {
        let mut events = engine.labels().events(sb.label);
        let (cell, t) = events.pop().expect("new sub-branches carry an event");
        let parent = state.register_label(events);
        state = apply_branch_vector(&state, cell, parent, t, &sp).map_err(|e| e.to_string())?;
    }
    let vector = state.label_measures();

    let mut reduced = BTreeMap::new();
    for sb in engine.sub_branches() {
        let events: Vec<(u32, u64)> = engine.labels().events(sb.label).iter().map(|&(c, t)| (c, t.to_bits())).collect();
        for (cell, lm) in sb.measures(&scenario) {
            reduced.insert((cell, events.clone()), lm.measure());
        }
    }
    if engine.sub_branches().len() < 4 {
        return Err(format!("only {} sub-branches", engine.sub_branches().len()));
    }
    let mut worst: f64 = 0.0;
    for key in vector.keys().chain(reduced.keys()) {
        let v = vector.get(key).copied().unwrap_or(0.0);
        let r = reduced.get(key).copied().unwrap_or(0.0);
        worst = worst.max((v - r).abs());
    }
    Ok(worst)
}

fn criterion_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut errors = Vec::new();
    for _ in 0..ORACLE_CASES {
        let z = rng.gen_range(0.05..0.95);
        let m = rng.gen_range(0.1..0.9);
        let g = rng.gen_range(1.0..1.0 / f64::max(m, 1.0 - m));
        match oracle_case(z, m, g) {
            Ok(w) => worst = worst.max(w),
            Err(e) => errors.push(format!("z={z:.4} m={m:.4} g={g:.4}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        errors.is_empty() && worst <= ORACLE_TOLERANCE && secs < ORACLE_SECONDS,
        format!("{ORACLE_CASES} random cases, max per-label measure difference {worst:.2e}; errors {errors:?}; {secs:.3} s"),
    )
}

fn binomial(n: u32, k: u32) -> BigUint {
    let mut c = BigUint::from(1u32);
    for i in 0..k {
        c = c * (n - i) / (i + 1);
    }
    c
}

fn single_cell(z: f64, horizon: f64) -> ScenarioConfig {
    let mut config = build_eq5();
    config.name = "single".into();
    config.z = z;
    config.g = GSpec::Value(1.0);
    config.mode = EngineMode::Aggregated;
    config.components = vec![ComponentSpec {
        family: "A".into(),
        cells: vec![CellSpec { cell_id: 0, m0: 1.0, multiplicity: 1 }],
    }];
    config.horizon = horizon;
    config
}

fn criterion_binomial(drifts: &mut Vec<(&'static str, f64)>) -> Outcome {
    let start = Instant::now();
    let horizon = 12.0 * period();
    let mut details = Vec::new();
    let mut pass = true;
    for z in [0.5, 0.382] {
        let config = single_cell(z, horizon);
        let scenario = config.resolve().expect("valid single cell");
        let table = ClassTable::from_scenario(&config, &scenario).expect("single-cell components");
        let mut engine = AggregatedEngine::new(table, 0.0).expect("engine starts");
        let (ln_z, ln_r) = (z.ln(), (1.0 - z).ln());
        let mut checked = 0usize;
        let mut complete = 0usize;
        let mut mismatches = 0usize;
        let mut drift: f64 = 0.0;
        for j in 0..=96 {
            let t = f64::from(j) * horizon / 96.0;
            if let Err(e) = engine.advance_to(t, |_| {}) {
                return Outcome::new(false, format!("engine error at z={z}: {e}"));
            }
            match engine.table().check_conservation() {
                Ok(d) => drift = drift.max(d),
                Err(e) => return Outcome::new(false, format!("conservation at z={z}: {e}")),
            }
            // A class has fired once its measure has grown to threshold, up to
            // the simultaneity window; an alive class holds the paths through
            // each parent that has fired.
            let reach = t + simultaneity_window(t, config.tau);
            let fired = |a: u32, b: u32| -(f64::from(a) * ln_z + f64::from(b) * ln_r) * config.tau <= reach;
            let mut expected = BTreeMap::new();
            let (a_max, b_max) = ((reach / (-ln_z * config.tau)) as u32 + 2, (reach / (-ln_r * config.tau)) as u32 + 2);
            for a in 0..=a_max {
                for b in 0..=b_max {
                    if fired(a, b) {
                        continue;
                    }
                    let from_z = (a > 0 && fired(a - 1, b)).then(|| binomial(a + b - 1, a - 1));
                    let from_r = (b > 0 && fired(a, b - 1)).then(|| binomial(a + b - 1, a));
                    complete += usize::from(from_z.is_some() && from_r.is_some());
                    let n = from_z.unwrap_or_default() + from_r.unwrap_or_default();
                    if n > BigUint::default() {
                        expected.insert((a, b), n);
                    }
                }
            }
            let got: BTreeMap<(u32, u32), Option<BigUint>> =
                engine.table().iter().map(|(k, n)| ((k.a, k.b), exact_count(n))).collect();
            checked += got.len();
            if got.len() != expected.len() {
                mismatches += got.len().abs_diff(expected.len()).max(1);
            }
            for (k, n) in &expected {
                if got.get(k) != Some(&Some(n.clone())) {
                    mismatches += 1;
                }
            }
        }
        drifts.push((if z == 0.5 { "binomial z=1/2" } else { "binomial z=0.382" }, drift));
        pass &= mismatches == 0 && checked > 0;
        details.push(format!("z={z}: {checked} alive class counts checked ({complete} with both parents fired, equal to C(a+b,a)), {mismatches} mismatches"));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(pass && secs < BINOMIAL_SECONDS, format!("{}; {secs:.2} s", details.join("; ")))
}

fn criterion_density() -> Outcome {
    let start = Instant::now();
    let splits = [
        SplitParameter::from_z(0.1).unwrap(),
        SplitParameter::from_z(0.382).unwrap(),
        golden_split(),
        SplitParameter::from_z(0.5).unwrap(),
    ];
    let (mut norm_err, mut mean_err, mut push_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for sp in &splits {
        let (norm, mean) = stationary_moments_by_quadrature(sp);
        norm_err = norm_err.max((norm - 1.0).abs());
        mean_err = mean_err.max((mean - limiting_mean(sp)).abs());
        let rho = |m: f64| stationary_density(m, sp).unwrap_or(0.0);
        let delta = 0.5 * max_push_forward_step(sp);
        for i in 0..2000 {
            let m = (f64::from(i) + 0.5) / 2000.0;
            let r = rho(m);
            push_err = push_err.max((push_forward(&rho, sp, delta, m) - r).abs() / r.max(1.0));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        norm_err <= MOMENT_TOLERANCE && mean_err <= MOMENT_TOLERANCE && push_err <= PUSH_FORWARD_TOLERANCE && secs < DENSITY_SECONDS,
        format!(
            "normalization error {norm_err:.1e}, mean error {mean_err:.1e}, push-forward error {push_err:.1e}; {secs:.3} s"
        ),
    )
}

fn criterion_golden(report: &GoldenReport, secs: f64) -> Outcome {
    let env = &report.envelopes;
    let ok = env.len() == ENVELOPE_BOUNDS.len()
        && env.iter().zip(ENVELOPE_BOUNDS).all(|(e, bound)| matches!(e, Some(v) if *v <= bound));
    let fmt: Vec<String> = env.iter().map(|e| e.map_or("none".into(), |v| format!("{v:.4}"))).collect();
    Outcome::new(
        ok && secs < GOLDEN_SECONDS,
        format!(
            "{} components ({:?}), {} events; envelopes [{}] vs bounds {ENVELOPE_BOUNDS:?}; {secs:.1} s",
            report.scenario.components.len(),
            GoldenRun::default().layout,
            report.events,
            fmt.join(", ")
        ),
    )
}

fn criterion_decay(report: &GoldenReport) -> Outcome {
    match report.decay_exponent {
        Some(p) => Outcome::new(
            p >= DECAY_BAND.0 && p <= DECAY_BAND.1,
            format!("fitted exponent {p:.3} vs band {DECAY_BAND:?}"),
        ),
        None => Outcome::new(false, "fit did not run"),
    }
}

fn criterion_gaussian(drifts: &mut Vec<(&'static str, f64)>) -> Outcome {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for cells in [CellModel::Uniform, CellModel::GaussianShells] {
        let pair = GaussianPair { cells, ..GaussianPair::default() };
        let config = build_gaussian_pair(&pair).expect("valid pair");
        let scenario = config.resolve().expect("valid pair");
        let table = ClassTable::from_scenario(&config, &scenario).expect("single-cell components");
        let mut first = [f64::INFINITY; 2];
        for (key, _) in table.iter() {
            let f = table.components()[key.component as usize].family as usize;
            first[f] = first[f].min(table.branch_time(*key));
        }
        let t_period = doubling_period(pair.tau);
        let lead = (first[0] - first[1]) / t_period;
        let end = first[0] + 20.0 * t_period;
        let mut engine = AggregatedEngine::new(table, 0.0).expect("engine starts");
        let mut drift: f64 = 0.0;
        for j in 0..=40 {
            let t = end * f64::from(j) / 40.0;
            if let Err(e) = engine.advance_to(t, |_| {}) {
                return Outcome::new(false, format!("engine error: {e}"));
            }
            match engine.table().check_conservation() {
                Ok(d) => drift = drift.max(d),
                Err(e) => return Outcome::new(false, format!("conservation: {e}")),
            }
        }
        drifts.push((if cells == CellModel::Uniform { "pair uniform" } else { "pair shells" }, drift));
        let counts = engine.table().family_counts();
        let ratio = counts["A"].to_ext().ratio(counts["B"].to_ext());
        let ratio_ok = (ratio / 2.0 - 1.0).abs() <= PAIR_RATIO_TOLERANCE;
        let lead_ok = cells != CellModel::Uniform || (lead - 5.0).abs() <= PAIR_LEAD_TOLERANCE;
        pass &= ratio_ok && lead_ok;
        details.push(format!("{cells:?}: ratio {ratio:.5}, B leads by {lead:.9} T"));
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(pass && secs < PAIR_SECONDS, format!("{}; {secs:.2} s", details.join("; ")))
}

fn within_factor(x: f64, target: f64, factor: f64) -> bool {
    x >= target / factor && x <= target * factor
}

fn criterion_regime() -> Outcome {
    let start = Instant::now();
    let proton = PhysicalParams::grw_proton();
    let delay = spreading_delay(&proton, 1e3).expect("valid parameters");
    let t0_ok = (1.0e-7..=2.5e-7).contains(&delay.t0);
    let factor = delay.delay_factor.unwrap_or(f64::NAN);
    let factor_ok = (140.0..=170.0).contains(&factor);
    let cells_ok = within_factor(delay.cells_covered, 1e70, 10.0);

    let threshold_fixed = mass_threshold(&proton).expect("valid parameters") * 1e3;
    let scaled = PhysicalParams { rate_scaling: RateScaling::ProportionalToMass, ..proton };
    let threshold_scaled = mass_threshold(&scaled).expect("valid parameters") * 1e3;
    let fixed_ok = within_factor(threshold_fixed, 0.1, 2.0);
    let scaled_ok = within_factor(threshold_scaled, 1e-12, 10.0);

    let heavy = PhysicalParams { mass: 1e-4, ..scaled };
    let interval = branch_interval(&heavy, &SplitParameter::from_z(0.5).unwrap()).expect("valid parameters");
    let interval_ok = interval < 1e-6;
    let secs = start.elapsed().as_secs_f64();

    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    Outcome::new(
        t0_ok && factor_ok && cells_ok && fixed_ok && scaled_ok && interval_ok && secs < 0.1,
        format!(
            "t0 {:.3e} s [{}]; delay factor {factor:.1} (log estimate {:.1}) [{}]; cells covered {:.2e} [{}]; \
             mass threshold {threshold_fixed:.3} g [{}]; scaled threshold {threshold_scaled:.2e} g [{}]; \
             interval at 0.1 g {interval:.2e} s [{}]",
            delay.t0,
            mark(t0_ok),
            delay.log_delay_factor,
            mark(factor_ok),
            delay.cells_covered,
            mark(cells_ok),
            mark(fixed_ok),
            mark(scaled_ok),
            mark(interval_ok),
        ),
    )
}

fn multiparticle_runs() -> Vec<(u32, MultiparticleStream)> {
    let sp = SplitParameter::from_z(0.5).unwrap();
    [10u32, 100, 1000]
        .into_iter()
        .map(|n| {
            let spacing = period() / f64::from(n);
            let horizon = 1.1 * MULTIPARTICLE_MIN_EVENTS as f64 * spacing + period();
            (n, multiparticle_stream(n, &sp, 1.0, MULTIPARTICLE_SEED, horizon).expect("valid stream"))
        })
        .collect()
}

fn criterion_multiparticle(runs: &[(u32, MultiparticleStream)], secs: f64) -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for (n, s) in runs {
        let want = period() / f64::from(*n);
        let got = s.mean_interval.unwrap_or(f64::NAN);
        let err = (got / want - 1.0).abs();
        pass &= err <= MULTIPARTICLE_TOLERANCE && s.times.len() >= MULTIPARTICLE_MIN_EVENTS;
        details.push(format!("N={n}: {} events, interval/(T/N) = {:.4}", s.times.len(), got / want));
    }
    Outcome::new(pass && secs < MULTIPARTICLE_SECONDS, format!("{}; {secs:.2} s", details.join("; ")))
}

fn main() {
    let mut drifts = Vec::new();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let report = |n: u32, name: &'static str, o: Outcome, results: &mut Vec<(u32, &str, Outcome)>| {
        println!("criterion {n:>2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    report(1, "equal pair exact counts", criterion_equal_pair(&mut drifts), &mut results);
    report(2, "unequal pair exact counts", criterion_unequal_pair(&mut drifts), &mut results);
    report(3, "vector form vs reduced rule", criterion_oracle(), &mut results);
    report(4, "binomial class counts", criterion_binomial(&mut drifts), &mut results);

    let start = Instant::now();
    let golden = run_golden(&GoldenRun::default());
    let golden_secs = start.elapsed().as_secs_f64();
    let golden = match golden {
        Ok(g) => Some(g),
        Err(e) => {
            println!("golden run failed: {e}");
            None
        }
    };
    let gaussian = criterion_gaussian(&mut drifts);
    if let Some(g) = &golden {
        drifts.push(("golden", g.max_conservation_drift));
    }
    let worst = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    let listed: Vec<String> = drifts.iter().map(|(n, d)| format!("{n} {d:.1e}")).collect();
    report(
        5,
        "measure conservation",
        Outcome::new(
            golden.is_some() && worst <= CONSERVATION_TOLERANCE,
            format!("largest relative drift {worst:.2e} over runs [{}]", listed.join(", ")),
        ),
        &mut results,
    );
    report(6, "stationary density", criterion_density(), &mut results);
    match &golden {
        Some(g) => {
            report(7, "golden-ratio fluctuation envelope", criterion_golden(g, golden_secs), &mut results);
            report(8, "envelope decay exponent", criterion_decay(g), &mut results);
        }
        None => {
            report(7, "golden-ratio fluctuation envelope", Outcome::new(false, "run failed"), &mut results);
            report(8, "envelope decay exponent", Outcome::new(false, "run failed"), &mut results);
        }
    }
    report(9, "gaussian pair ratio", gaussian, &mut results);
    report(10, "regime numbers", criterion_regime(), &mut results);

    let start = Instant::now();
    let streams = multiparticle_runs();
    let mp_secs = start.elapsed().as_secs_f64();
    report(11, "multiparticle interval", criterion_multiparticle(&streams, mp_secs), &mut results);

    let rerun = run_golden(&GoldenRun::default()).ok();
    let same_golden = match (&golden, &rerun) {
        (Some(a), Some(b)) => serde_json::to_vec(a).unwrap() == serde_json::to_vec(b).unwrap(),
        _ => false,
    };
    let same_streams = serde_json::to_vec(&streams.iter().map(|s| &s.1).collect::<Vec<_>>()).unwrap()
        == serde_json::to_vec(&multiparticle_runs().iter().map(|s| s.1.clone()).collect::<Vec<_>>()).unwrap();
    report(
        12,
        "determinism",
        Outcome::new(
            same_golden && same_streams,
            format!("golden rerun identical: {same_golden}; multiparticle rerun identical: {same_streams}"),
        ),
        &mut results,
    );

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
