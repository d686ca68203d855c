use std::process::ExitCode;
use std::time::Instant;

use hvi_core::benchmark::{
    coupled_benchmark, linear_decay, linear_estimate_instance, manufactured_exact, manufactured_linear,
    BenchmarkParams,
};
use hvi_core::contact::{assemble_problem, check_contact_smallness, solve_contact, ContactSetup};
use hvi_core::contact::{ContactInitial, ContactLoads};
use hvi_core::dvhi::{build_system, check_inequality_residual, dvhi_benchmark, solve_dvhi, DvhiBenchmark};
use hvi_core::estimates::{verify_dependence_estimate, verify_theta_estimate, ESTIMATE_SLACK};
use hvi_core::probes::{Sampler, SamplerConfig};
use hvi_core::runner::{run, Command, RunOptions, ScenarioConfig};
use hvi_core::stepper::StepSolveConfig;
use hvi_core::system::{
    relative_distance, solve_monolithic_oracle, solve_system, solve_system_from, FrozenData, SystemConfig,
};
use hvi_core::{TimeGrid, Trajectory};

const DECAY_NODE_TOL: f64 = 1e-12;
const DECAY_RUNTIME: f64 = 1.0;
const UNIQUENESS_TOL: f64 = 1e-8;
const UNIQUENESS_RUNTIME: f64 = 5.0;
const EXTRAPOLATION_FACTOR: f64 = 10.0;
const ORACLE_TOL: f64 = 1e-6;
const ORACLE_RUNTIME: f64 = 30.0;
const ORDER_RANGE: (f64, f64) = (0.8, 1.2);
const SLACK_FLOOR: f64 = -1e-6;
const ZERO_TOL: f64 = 1e-12;
const MIRROR_TOL: f64 = 1e-10;
const CONTACT_ORACLE_TOL: f64 = 1e-5;
const CONTACT_RUNTIME: f64 = 60.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn linear_decay_exactness() -> Outcome {
    let start = Instant::now();
    let (p, g) = linear_decay(1.0, 256).map_err(err)?;
    let sol = solve_system(&p, &g, &SystemConfig::default()).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    for k in 0..=g.steps() {
        let want = (1.0 + g.dt()).powi(-(k as i32));
        worst = worst.max((sol.w.value(k)[0] - want).abs()).max((sol.theta.value(k)[0] - want).abs());
    }
    let end = (sol.w.value(g.steps())[0] - (-1.0f64).exp()).abs();
    ensure(
        worst <= DECAY_NODE_TOL && end <= 2.0 * g.dt() && secs < DECAY_RUNTIME,
        format!("node error {worst:.2e}, |w(T) - 1/e| = {end:.2e} (bound {:.2e}), {secs:.3} s", 2.0 * g.dt()),
    )
}

fn zero_start(p: &hvi_core::system::SystemProblem, g: &TimeGrid) -> hvi_core::Result<FrozenData> {
    let f = FrozenData::initial(p, g)?;
    Ok(FrozenData { lambda: f.lambda.scaled(0.0), ..f })
}

fn discrete_uniqueness() -> Outcome {
    let start = Instant::now();
    let (p, g) = coupled_benchmark(&BenchmarkParams::default()).map_err(err)?;
    let l = p.ledger();
    let active = [&p.hist_r, &p.hist_r1, &p.hist_r2, &p.hist_s].iter().all(|h| !h.is_zero())
        && l.m_j > 0.0
        && l.m_phi > 0.0
        && l.m_g > 0.0;
    let margins = (l.m_a - l.m_j, l.m_b - l.m_g);
    let cfg = SystemConfig::default();
    let a = solve_system_from(&p, &g, &cfg, zero_start(&p, &g).map_err(err)?).map_err(err)?;
    let b = solve_system_from(&p, &g, &cfg, FrozenData::random(&p, &g, 99).map_err(err)?).map_err(err)?;
    let d = relative_distance(&a.w, &a.theta, &b.w, &b.theta).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        active && margins.0 >= 0.5 && margins.1 >= 0.5 && d <= UNIQUENESS_TOL && secs < UNIQUENESS_RUNTIME,
        format!("relative distance {d:.2e}, margins ({:.2}, {:.2}), {secs:.3} s", margins.0, margins.1),
    )
}

fn contraction() -> Outcome {
    let (p, g) = coupled_benchmark(&BenchmarkParams::default()).map_err(err)?;
    let sol = solve_system(&p, &g, &SystemConfig::default()).map_err(err)?;
    let (inc, ratios) = (&sol.diag.increments, &sol.diag.contraction_ratios);
    if inc.len() < 4 {
        return Err(format!("only {} increments recorded", inc.len()));
    }
    let worst = ratios.iter().skip(1).copied().fold(0.0, f64::max);
    // Least-squares geometric fit of the increments after iteration 1.
    let pts: Vec<(f64, f64)> = inc.iter().enumerate().skip(1).map(|(i, v)| (i as f64, v.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let last = inc.len() - 1;
    let predicted = (my + slope * (last as f64 - mx)).exp();
    let factor = (predicted / inc[last]).max(inc[last] / predicted);
    ensure(
        worst < 1.0 && factor <= EXTRAPOLATION_FACTOR,
        format!(
            "max ratio {worst:.3}, fitted rate {:.2e}, predicted {predicted:.2e} vs final {:.2e} (factor {factor:.2})",
            slope.exp(),
            inc[last]
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = SystemConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 1..=5 {
        let params = BenchmarkParams { steps: 64, ..BenchmarkParams::randomized(seed) };
        let (p, g) = coupled_benchmark(&params).map_err(err)?;
        let l = p.ledger();
        if l.m_a - l.m_j < 0.25 || l.m_b - l.m_g < 0.25 {
            return Err(format!("seed {seed}: margin below 0.25"));
        }
        let sol = solve_system(&p, &g, &cfg).map_err(err)?;
        let (w, th) = solve_monolithic_oracle(&p, &g, &cfg).map_err(err)?;
        worst = worst.max(relative_distance(&sol.w, &sol.theta, &w, &th).map_err(err)?);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= ORACLE_TOL && secs < ORACLE_RUNTIME, format!("max relative distance {worst:.2e}, {secs:.2} s"))
}

fn temporal_order() -> Outcome {
    let cfg = SystemConfig::default();
    let mut errors = Vec::new();
    for n in [32, 64, 128, 256, 512] {
        let (p, g) = manufactured_linear(1.0, n).map_err(err)?;
        let sol = solve_system(&p, &g, &cfg).map_err(err)?;
        let e = (0..=n)
            .map(|k| {
                let (w, th) = manufactured_exact(g.node(k));
                (sol.w.value(k)[0] - w).abs().max((sol.theta.value(k)[0] - th).abs())
            })
            .fold(0.0, f64::max);
        errors.push(e);
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let ok = orders.iter().all(|o| (ORDER_RANGE.0..=ORDER_RANGE.1).contains(o));
    ensure(ok, format!("observed orders {:?}", orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>()))
}

fn gating_and_degradation() -> Outcome {
    let bad = r#"{"version":1,"kind":"abstract","problem":{"builtin":"coupled","m_a":1,"m_j":1.2}}"#;
    let cfg = ScenarioConfig::from_json(bad).map_err(err)?;
    let code = match run(&cfg, Command::Solve, &RunOptions::default()) {
        Ok(_) => return Err("violating ledger was solved".into()),
        Err(e) if e.code == "gate" => e.exit_code(),
        Err(e) => return Err(format!("unexpected error {e}")),
    };
    let mut medians = Vec::new();
    for margin in [0.5, 0.25, 0.125] {
        let mut iters = Vec::new();
        for seed in 1..=3 {
            let (p, g) = coupled_benchmark(&BenchmarkParams::with_margin(margin, seed)).map_err(err)?;
            iters.push(solve_system(&p, &g, &SystemConfig::default()).map_err(err)?.diag.picard_iters);
        }
        iters.sort_unstable();
        medians.push(iters[1]);
    }
    ensure(
        code == 2 && medians.windows(2).all(|m| m[0] <= m[1]),
        format!("gate exit code {code}, median picard_iters {medians:?}"),
    )
}

fn dvhi_mapping() -> Outcome {
    let mut s = Sampler::new(&SamplerConfig { seed: 4, ..Default::default() }, 0);
    for i in 0..100 {
        let b = DvhiBenchmark {
            m_abar: 2.0 + 2.0 * s.uniform(),
            m_g: s.uniform(),
            coupling: s.uniform(),
            friction: s.uniform(),
            m_bbar: 1.0 + s.uniform(),
            one_sided: s.uniform(),
            lipschitz_f: 3.0 * s.uniform(),
            seed: i,
        };
        let d = dvhi_benchmark(&b).map_err(err)?;
        let (_, map) = build_system(&d).map_err(err)?;
        let (nm, nt) = (map.norm_m, map.norm_theta);
        let l = map.ledger;
        let exact = l.m_j == d.pot_g.m * nm * nm
            && l.mbar_j == d.pot_g.mbar * nm + d.rhs_big_f.lipschitz
            && l.m_b == d.op_bbar.m - d.rhs_f.one_sided
            && l.mbar_b == d.rhs_f.lipschitz * nt;
        if !exact {
            return Err(format!("ledger {i}: mapping mismatch {l:?}"));
        }
    }
    let d = dvhi_benchmark(&DvhiBenchmark::default()).map_err(err)?;
    let g = TimeGrid::new(1.0, 128).map_err(err)?;
    let sol = solve_dvhi(&d, &g, &SystemConfig::default()).map_err(err)?;
    let r = check_inequality_residual(&d, &sol.u, &sol.theta, &g, 64).map_err(err)?;
    ensure(
        r.min_slack >= SLACK_FLOOR && r.nodes == 128 && r.directions == 64,
        format!("100 ledgers mapped exactly, min slack {:.2e} over {}x{}", r.min_slack, r.directions, r.nodes),
    )
}

fn contact_suite() -> Outcome {
    let start = Instant::now();
    let cfg = SystemConfig::default();
    let mut notes = Vec::new();

    let quiet = ContactSetup { loads: ContactLoads::default(), initial: ContactInitial::default(), ..ContactSetup::default() };
    let asm = assemble_problem(&quiet).map_err(err)?;
    let g = TimeGrid::new(0.5, 8).map_err(err)?;
    let sol = solve_contact(&asm, &g, &cfg).map_err(err)?;
    let zero = [&sol.u, &sol.w, &sol.theta]
        .iter()
        .flat_map(|t| t.values().iter().map(|v| v.amax()))
        .fold(0.0, f64::max);
    if zero > ZERO_TOL {
        return Err(format!("(a) zero data left fields of size {zero:.2e}"));
    }
    notes.push(format!("(a) {zero:.0e}"));

    let setup = ContactSetup::default();
    if (setup.mesh.nx, setup.mesh.ny) != (8, 4) {
        return Err("(b) default mesh is not 8x4".into());
    }
    let asm = assemble_problem(&setup).map_err(err)?;
    let g = TimeGrid::new(1.0, 16).map_err(err)?;
    let sol = solve_contact(&asm, &g, &cfg).map_err(err)?;
    let mirror = (0..=g.steps())
        .map(|k| {
            let (w, th) = (sol.w.value(k), sol.theta.value(k));
            (asm.fem.mirror_v(w) - w).amax().max((asm.fem.mirror_e(th) - th).amax())
        })
        .fold(0.0, f64::max);
    if mirror > MIRROR_TOL {
        return Err(format!("(b) mirror defect {mirror:.2e}"));
    }
    notes.push(format!("(b) {mirror:.1e}"));

    let (thermal, iso) = (setup.without_heat_sources(), ContactSetup { thermal: false, ..setup.clone() });
    let (a, b) = (assemble_problem(&thermal).map_err(err)?, assemble_problem(&iso).map_err(err)?);
    let g12 = TimeGrid::new(1.0, 12).map_err(err)?;
    let (sa, sb) = (solve_contact(&a, &g12, &cfg).map_err(err)?, solve_contact(&b, &g12, &cfg).map_err(err)?);
    let cold = sa.theta.values().iter().all(|t| t.iter().all(|x| *x == 0.0));
    if !(cold && sa.u.values() == sb.u.values() && sa.w.values() == sb.w.values() && sa.sigma == sb.sigma) {
        return Err("(c) isothermal run differs".into());
    }
    notes.push("(c) bitwise".into());

    let l = asm.ledger;
    let gate = check_contact_smallness(&l).map_err(err)?;
    let recorded = (gate.margins[0] - (l.m_visc - l.m_j())).abs() <= 1e-12
        && (gate.margins[1] - (l.m_conduct - l.m_g())).abs() <= 1e-12;
    if !(gate.pass && l.trace_v > 0.0 && l.trace_e > 0.0 && recorded && sol.smallness.margins == gate.margins) {
        return Err(format!("(d) gate {gate:?}"));
    }
    notes.push(format!("(d) |trace| {:.3}, margins {:.3}/{:.3}", l.trace_v, gate.margins[0], gate.margins[1]));

    let g8 = TimeGrid::new(1.0, 8).map_err(err)?;
    let p = asm.system_for(&g8).map_err(err)?;
    let fast = solve_contact(&asm, &g8, &cfg).map_err(err)?;
    let (w, th) = solve_monolithic_oracle(&p, &g8, &cfg).map_err(err)?;
    let d = relative_distance(&fast.w, &fast.theta, &w, &th).map_err(err)?;
    if d > CONTACT_ORACLE_TOL {
        return Err(format!("(e) oracle distance {d:.2e}"));
    }
    notes.push(format!("(e) {d:.1e}"));

    let secs = start.elapsed().as_secs_f64();
    ensure(secs < CONTACT_RUNTIME, format!("{}, {secs:.2} s", notes.join(", ")))
}

fn random_path(p: &hvi_core::system::SystemProblem, g: &TimeGrid, s: &mut Sampler) -> hvi_core::Result<Trajectory> {
    let vals = (0..=g.steps()).map(|_| s.gaussian(p.v.dim())).collect();
    Trajectory::new(p.v.clone(), *g, vals)
}

fn estimates() -> Outcome {
    let (p, g) = linear_estimate_instance(&BenchmarkParams::default()).map_err(err)?;
    let cfg = StepSolveConfig::default();
    let frozen: Vec<_> = (0..10)
        .map(|i| Ok((FrozenData::random(&p, &g, 2 * i)?, FrozenData::random(&p, &g, 2 * i + 1)?)))
        .collect::<hvi_core::Result<_>>()
        .map_err(err)?;
    let dep = verify_dependence_estimate(&p, &g, &frozen, &cfg).map_err(err)?;
    let mut s = Sampler::new(&SamplerConfig { seed: 5, ..Default::default() }, 0);
    let paths: Vec<_> = (0..10)
        .map(|_| Ok((random_path(&p, &g, &mut s)?, random_path(&p, &g, &mut s)?)))
        .collect::<hvi_core::Result<_>>()
        .map_err(err)?;
    let th = verify_theta_estimate(&p, &g, &paths, &cfg).map_err(err)?;
    ensure(
        dep.pass && th.pass && dep.checks.len() == 10 && th.checks.len() == 10,
        format!(
            "dependence {:.3}/{:.3}, theta {:.3}/{:.3} (fitted/analytic, slack {ESTIMATE_SLACK})",
            dep.max_fitted, dep.analytic, th.max_fitted, th.analytic
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("linear decay exactness", linear_decay_exactness),
        ("discrete uniqueness", discrete_uniqueness),
        ("contraction", contraction),
        ("oracle equivalence", oracle_equivalence),
        ("temporal order", temporal_order),
        ("smallness gating and degradation", gating_and_degradation),
        ("inequality constant mapping", dvhi_mapping),
        ("contact sanity suite", contact_suite),
        ("estimate verification", estimates),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("PASS {} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
