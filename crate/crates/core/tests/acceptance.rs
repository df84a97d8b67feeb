//! Release gate: every acceptance criterion runs at its pinned tolerance and
//! time budget and prints one PASS/FAIL line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cow_qkd::experiments::{
    run_montecarlo_validation, sweep_qber_curves, with_workers, AttackSet, CheckStatus,
    OutputFormat, SweepSpec,
};
use cow_qkd::montecarlo::{decoy_distortion, ClickPattern, PulseClass};
use cow_qkd::optimize::grid_argmax;
use cow_qkd::{
    active_attack, active_eve_info, active_plan, binary_entropy, binary_entropy_inverse,
    bs_attack, critical_length, fully_insecure_length, holevo_two_pure, key_rate_margin,
    optimal_mu_e, optimal_source_intensity, ProtocolParams, SourceOptimum,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn params(mu: f64, f: f64, delta: f64) -> ProtocolParams {
    ProtocolParams::new(mu, f, delta).unwrap()
}

fn click(x: f64) -> f64 {
    -(-x).exp_m1()
}

fn ac1_critical_length() -> Outcome {
    let l = critical_length(0.2).map_err(|e| e.to_string())?;
    let exact = 10.0 * 2f64.log10() / 0.2;
    ensure!((l - exact).abs() < 1e-12, "l_crit {l} != {exact}");
    ensure!((l - 15.0).abs() <= 0.1, "l_crit {l} is not within 0.1 km of 15 km");
    Ok(format!("l_crit = {l:.4} km"))
}

fn ac2_qber_curve_shape() -> Outcome {
    let mut summary = Vec::new();
    for mu in [0.1, 0.2, 0.5] {
        let p = params(mu, 0.1, 0.2);
        let floor = binary_entropy_inverse(1.0 - binary_entropy(0.5 * (1.0 + (-mu).exp())).unwrap()).unwrap();
        let lengths: Vec<f64> = (0..=1500).map(|k| k as f64 * 0.1).collect();
        let bs: Vec<f64> = lengths.iter().map(|&l| bs_attack(&p, l).unwrap().qber_critical).collect();
        let act: Vec<f64> = lengths.iter().map(|&l| active_attack(&p, l).unwrap().qber_critical).collect();

        ensure!(bs[0] == 0.5 && act[0] == 0.5, "mu={mu}: curves start at {} / {}", bs[0], act[0]);
        for k in 1..lengths.len() {
            ensure!(bs[k] <= bs[k - 1], "mu={mu}: BS curve rises at {} km", lengths[k]);
            ensure!(act[k] <= act[k - 1], "mu={mu}: active curve rises at {} km", lengths[k]);
        }
        ensure!(
            bs.iter().all(|&q| q >= floor - 1e-9),
            "mu={mu}: BS curve drops below its floor {floor}"
        );
        let zero = act
            .iter()
            .position(|&q| q == 0.0)
            .ok_or_else(|| format!("mu={mu}: active curve never reaches 0"))?;
        ensure!(act[zero..].iter().all(|&q| q == 0.0), "mu={mu}: active curve leaves 0");

        let signs: Vec<f64> = (1..zero)
            .map(|k| (act[k] - bs[k]).signum())
            .filter(|s| *s != 0.0)
            .collect();
        let crossings = signs.windows(2).filter(|w| w[0] != w[1]).count();
        ensure!(crossings == 1, "mu={mu}: {crossings} crossings before {} km", lengths[zero]);
        summary.push(format!("mu={mu}: zero at {:.1} km, floor {floor:.4}", lengths[zero]));
    }
    Ok(summary.join("; "))
}

fn ac3_full_insecurity_length() -> Outcome {
    let p = params(0.5, 0.1, 0.2);
    let l = fully_insecure_length(&p).map_err(|e| e.to_string())?;
    ensure!((l - 49.93).abs() <= 0.05, "length {l} not within 0.05 of 49.93 km");
    let (mut lo, mut hi) = (0.0, 200.0);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if active_attack(&p, mid).unwrap().fully_insecure {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    ensure!((l - hi).abs() < 1e-6, "closed form {l} vs bisection {hi}");
    Ok(format!("closed form {l:.6} km, bisection {hi:.6} km"))
}

fn ac4_eve_information_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    let mut worst: f64 = 0.0;
    while tested < 10_000 {
        let mu = rng.random_range(0.01..2.0);
        let delta = rng.random_range(0.05..1.0);
        let l = rng.random_range(0.0..150.0);
        let p = params(mu, 0.1, delta);
        let c = p.channel_point(l).unwrap();
        let mu_e = rng.random_range(0.0..=c.mu_e_max);
        let plan = active_plan(&p, l, mu_e).unwrap();
        if plan.is_capped() || plan.p_conc_inf() == 0.0 {
            continue;
        }
        let composed = plan.p_conc_inf() / (1.0 - plan.block_fraction());
        let closed = click(mu - mu_e) * click(mu_e) / click(c.mu_b);
        let rel = (composed - closed).abs() / closed;
        // The library's own route must agree as well.
        let lib = active_eve_info(&plan);
        worst = worst.max(rel).max((lib - closed).abs() / closed);
        tested += 1;
    }
    ensure!(worst <= 1e-12, "worst relative disagreement {worst:e}");
    Ok(format!("10000 plans, worst relative error {worst:.1e}"))
}

fn ac5_eve_optimal_intensity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    const N: usize = 10_000;
    let mut worst_steps: f64 = 0.0;
    for _ in 0..100 {
        let mu = rng.random_range(0.02..2.0);
        let delta = rng.random_range(0.1..0.5);
        let l = rng.random_range(0.5..200.0);
        let p = params(mu, 0.1, delta);
        let max = p.channel_point(l).unwrap().mu_e_max;
        let info = |x: f64| active_eve_info(&active_plan(&p, l, x).unwrap());
        let (_, _, best) = grid_argmax(info, 0.0, max, N);
        let step = max / (N - 1) as f64;
        let closed = optimal_mu_e(&p, l).unwrap();
        ensure!(
            info(closed) >= best - 1e-12,
            "mu={mu} delta={delta} l={l}: closed form {} below grid max {best}",
            info(closed)
        );
        // Distance from the closed form to the nearest grid maximizer.
        let nearest = (0..N)
            .map(|i| if i == N - 1 { max } else { i as f64 * step })
            .filter(|&x| info(x) >= best - 1e-12)
            .map(|x| (x - closed).abs())
            .fold(f64::INFINITY, f64::min);
        ensure!(
            nearest <= step * (1.0 + 1e-9),
            "mu={mu} delta={delta} l={l}: closed form {closed} is {nearest} from the grid argmax (step {step})"
        );
        worst_steps = worst_steps.max(nearest / step);
    }
    Ok(format!("100 triples, worst distance {worst_steps:.3} grid steps"))
}

fn ac6_holevo_oracle() -> Outcome {
    let oracle = |s: f64| {
        // Orthonormal basis {|ψ0>, (|ψ1> − s|ψ0>)/sqrt(1 − s²)}.
        let c = (1.0 - s * s).max(0.0).sqrt();
        let rho = Matrix2::new(0.5 * (1.0 + s * s), 0.5 * s * c, 0.5 * s * c, 0.5 * c * c);
        rho.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|&l| if l > 0.0 { -l * l.log2() } else { 0.0 })
            .sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let s = k as f64 / 999.0;
        let err = (holevo_two_pure(s).unwrap() - oracle(s)).abs();
        worst = worst.max(err);
    }
    ensure!(worst <= 1e-12, "worst disagreement {worst:e}");
    ensure!(holevo_two_pure(1.0).unwrap() == 0.0, "chi(1) != 0");
    ensure!(holevo_two_pure(0.0).unwrap() == 1.0, "chi(0) != 1");
    Ok(format!("1000 overlaps, worst error {worst:.1e}"))
}

fn ac7_entropy_round_trip() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let y = k as f64 / 999.0;
        let back = binary_entropy(binary_entropy_inverse(y).unwrap()).unwrap();
        worst = worst.max((back - y).abs());
    }
    ensure!(worst <= 1e-10, "worst round-trip error {worst:e}");
    Ok(format!("1000 points, worst error {worst:.1e}"))
}

fn ac8_monte_carlo() -> Outcome {
    let p = params(0.2, 0.1, 0.2);
    let report = run_montecarlo_validation(&p, 20.0, 1_000_000, 42).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for name in [
        "attack_bob_information_click_rate",
        "eve_information_conclusive_rate",
        "blocked_fraction",
        "eve_information_proxy",
    ] {
        let check = report
            .checks
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| format!("missing check {name}"))?;
        ensure!(
            check.status == CheckStatus::Pass && check.z.abs() < 4.0,
            "{name}: z = {} ({:?})",
            check.z,
            check.status
        );
        lines.push(format!("{name} z={:+.2}", check.z));
    }
    ensure!(report.passed, "validation report failed");

    let c = p.channel_point(20.0).unwrap();
    let half = active_plan(&p, 20.0, 0.1).unwrap();
    let r = decoy_distortion(&p, 20.0, &half, 1_000_000, 42).map_err(|e| e.to_string())?;
    let row = r.row(PulseClass::Decoy, ClickPattern::Double).unwrap();
    ensure!(row.flagged, "decoy double-click not flagged at mu_E = mu/2 (z = {})", row.z);
    lines.push(format!("decoy double z={:+.2}", row.z));

    let full = active_plan(&p, 20.0, c.mu_e_max).unwrap();
    let r = decoy_distortion(&p, 20.0, &full, 1_000_000, 42).map_err(|e| e.to_string())?;
    ensure!(!r.any_flagged, "distortion flagged at mu_E = mu_E^max: {:?}", r.rows);
    lines.push("no flags at mu_E^max".into());
    Ok(lines.join(", "))
}

fn ac9_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_cow-qkd");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, workers: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(bin)
            .args(["validate-mc", "--mu", "0.2", "--delta", "0.2", "--length", "20"])
            .args(["--decoy-fraction", "0.1", "--pulses", "1000000", "--seed", "42"])
            .args(["--workers", workers, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("validate-mc exited with {}", status.status));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let a = run("a.json", "4")?;
    let b = run("b.json", "4")?;
    let c = run("c.json", "1")?;
    ensure!(a == b, "validate-mc reports differ between identical runs");
    ensure!(a == c, "validate-mc report depends on the worker count");

    let spec = SweepSpec {
        mu_list: vec![0.1, 0.2, 0.5],
        delta: 0.2,
        decoy_fraction: 0.1,
        lengths: "0:150:1".parse().unwrap(),
        attacks: AttackSet::BOTH,
        output_path: dir.path().join("unused.csv"),
        format: OutputFormat::Csv,
    };
    let one = with_workers(Some(1), || sweep_qber_curves(&spec)).unwrap().unwrap();
    let many = with_workers(Some(8), || sweep_qber_curves(&spec)).unwrap().unwrap();
    ensure!(one == many, "sweep rows depend on the worker count");
    Ok(format!("{} report bytes identical x3; {} sweep rows identical for 1 and 8 workers", a.len(), one.len()))
}

fn ac10_source_intensity() -> Outcome {
    let mut lines = Vec::new();
    for l in [10.0, 30.0, 50.0] {
        let opt = optimal_source_intensity(0.2, 0.1, l).map_err(|e| e.to_string())?;
        let SourceOptimum::Secure { mu, margin } = opt else {
            return Err(format!("no secure intensity at {l} km"));
        };
        let m = |x: f64| key_rate_margin(&params(x, 0.1, 0.2), l).unwrap();
        let (_, grid_mu, grid_best) = grid_argmax(m, 2.0 / 2000.0, 2.0, 2000);
        ensure!(
            margin >= grid_best - 1e-12,
            "l={l}: margin({mu}) = {margin} below grid best {grid_best} at {grid_mu}"
        );
        let fil = fully_insecure_length(&params(mu, 0.1, 0.2)).unwrap();
        ensure!(l < fil, "l={l} is beyond the full-insecurity length {fil} of mu*={mu}");
        ensure!(margin > 0.0, "l={l}: margin {margin} not positive");
        lines.push(format!("l={l}: mu*={mu:.6} margin={margin:.6}"));
    }
    Ok(lines.join("; "))
}

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

#[test]
fn acceptance_criteria() {
    let criteria = [
        Criterion { id: "AC1", name: "critical length", budget: Duration::from_secs(1), run: ac1_critical_length },
        Criterion { id: "AC2", name: "QBER curve shape", budget: Duration::from_secs(5), run: ac2_qber_curve_shape },
        Criterion { id: "AC3", name: "full-insecurity length", budget: Duration::from_secs(1), run: ac3_full_insecurity_length },
        Criterion { id: "AC4", name: "Eve information closed form", budget: Duration::from_secs(1), run: ac4_eve_information_closed_form },
        Criterion { id: "AC5", name: "Eve optimal intensity", budget: Duration::from_secs(5), run: ac5_eve_optimal_intensity },
        Criterion { id: "AC6", name: "Holevo oracle", budget: Duration::from_secs(1), run: ac6_holevo_oracle },
        Criterion { id: "AC7", name: "entropy inverse round trip", budget: Duration::from_secs(1), run: ac7_entropy_round_trip },
        Criterion { id: "AC8", name: "Monte Carlo cross-validation", budget: Duration::from_secs(30), run: ac8_monte_carlo },
        Criterion { id: "AC9", name: "determinism", budget: Duration::from_secs(60), run: ac9_determinism },
        Criterion { id: "AC10", name: "source intensity optimum", budget: Duration::from_secs(5), run: ac10_source_intensity },
    ];

    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|_| Err("panicked".to_string()))
            .and_then(|detail| {
                let elapsed = start.elapsed();
                if elapsed > c.budget {
                    Err(format!("took {elapsed:?}, budget {:?}", c.budget))
                } else {
                    Ok(detail)
                }
            });
        let elapsed = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:<5} {:<30} ({elapsed:.2} s) {detail}", c.id, c.name),
            Err(why) => {
                println!("FAIL {:<5} {:<30} ({elapsed:.2} s) {why}", c.id, c.name);
                failed.push(c.id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
