//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::io::Write;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cvdv_core::optimize::sweep::{run_sweep, Axis, Mode, Param, SweepConfig};
use cvdv_core::qkd::{ch_value, CHSettings};
use cvdv_core::teleportation::sigma_tel_general;
use cvdv_core::*;
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_c0de;
const R_FIG: f64 = 2.395;

type Criterion = (&'static str, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tr(t: f64) -> Transmissivity<f64> {
    Transmissivity::new(t).unwrap()
}

fn loss(db: f64) -> Transmissivity<f64> {
    Transmissivity::from_total_loss_db(db).unwrap()
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn sigma_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r: f64 = rng.random_range(0.0..=3.0);
        let ta = rng.random_range(0.01..=1.0);
        let tb = rng.random_range(0.01..=1.0);
        let g = rng.random_range(0.1..=10.0);
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let channel = attenuate(&tmsv_state(r).unwrap(), tr(ta), tr(tb));
        let oracle = homodyne_teleport_oracle(&SingleModeGaussian::vacuum(), &channel, g).unwrap();
        let closed = sigma_tel(&cfg).value();
        worst = worst.max((oracle.sigma_tel - closed).abs() / closed);
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-10 && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!("max relative deviation {worst:.3e} (<= 1e-10), runtime {elapsed:.2?} (< 1 s)"),
    )
}

fn sigma_special_cases() -> Outcome {
    let eps = f64::EPSILON;
    let mut worst_ideal: f64 = 0.0;
    let mut worst_vacuum: f64 = 0.0;
    for i in 0..=30 {
        let r = 0.1 * i as f64;
        let s = sigma_tel(&ChannelConfig::symmetric(r, 1.0, 1.0).unwrap()).value();
        let expected = (-2.0 * r).exp();
        worst_ideal = worst_ideal.max((s - expected).abs() / expected / eps);
    }
    for i in 0..=100 {
        let t = 0.01 * i as f64;
        let cfg = ChannelConfig::symmetric(0.0, t, 1.0).unwrap();
        let s = sigma_tel(&cfg).value();
        let general = sigma_tel_general(&cfg).value();
        worst_vacuum = worst_vacuum
            .max((s - 1.0).abs() / eps)
            .max((general - 1.0).abs() / eps);
    }
    let pass = worst_ideal <= 2.0 && worst_vacuum <= 2.0;
    outcome(
        pass,
        format!(
            "T=1,g=1: max |sigma - e^(-2r)| = {worst_ideal:.1} ulp; r=0,g=1: max |sigma - 1| = {worst_vacuum:.1} ulp (<= 2 ulp)"
        ),
    )
}

fn maximal_entanglement_limit() -> Outcome {
    let cfg = ChannelConfig::symmetric(10.0_f64, 1.0, 1.0).unwrap();
    let co = teleported_coefficients(&cfg, 1e-12).unwrap();
    let dev = [co.a(1), co.b(0), co.c(-1)]
        .iter()
        .fold(0.0_f64, |m, v| m.max((v - 0.5).abs()));
    let e = log_negativity_blocks(&co, LogBase::Two).value;
    let pass = dev <= 1e-6 && (e - 1.0).abs() <= 1e-6;
    outcome(
        pass,
        format!(
            "gamma - 1 = {:.3e}; max |coef - 1/2| = {dev:.3e}; E_LN = {e:.12} (within 1e-6)",
            co.gamma() - 1.0
        ),
    )
}

fn blocks_vs_generic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut max_dim = 0;
    for _ in 0..50 {
        let r: f64 = rng.random_range(0.0..=2.5);
        let ta: f64 = rng.random_range(0.2..=1.0);
        let tb: f64 = rng.random_range(0.2..=1.0);
        let g = (tb / ta).sqrt() * rng.random_range(0.8..=1.25);
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let co = teleported_coefficients(&cfg, 1e-12).unwrap();
        let blocks = log_negativity_blocks(&co, LogBase::Two).value;
        let rho = assemble_density_matrix(&co);
        max_dim = max_dim.max(rho.dims().1);
        let generic = log_negativity_generic(&rho, 1, LogBase::Two).unwrap().value;
        worst = worst.max((blocks - generic).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-8 && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "max |blocks - generic| = {worst:.3e} (<= 1e-8), largest Fock dim {max_dim}, runtime {elapsed:.2?} (< 10 s)"
        ),
    )
}

fn optimal_gain_limits() -> Outcome {
    let ts = [0.4, 0.55, 0.7, 0.85, 1.0];
    let opts = GainSearchOptions::default();
    let mut worst: f64 = 0.0;
    let mut worst_pair = (0.0, 0.0);
    let mut pairs = 0;
    for &ta in &ts {
        for &tb in &ts {
            if ta == tb {
                continue;
            }
            pairs += 1;
            let res = optimal_gain(R_FIG, ta, tb, &opts).unwrap();
            let dev = (res.g_opt.unwrap() - (tb / ta).sqrt()).abs();
            if dev > worst {
                worst = dev;
                worst_pair = (ta, tb);
            }
        }
    }
    let top = optimal_gain(R_FIG, 1.0, 1.0, &opts).unwrap();
    let e_max = top.e_ln_max.value;
    let gain_ok = worst <= 2e-2;
    let e_ok = (e_max - 1.0).abs() <= 5e-3;
    outcome(
        gain_ok && e_ok,
        format!(
            "{pairs} pairs: max |g_opt - sqrt(T_B/T_A)| = {worst:.4} at (T_A, T_B) = {worst_pair:?} (<= 2e-2: {}); E_max(T=1) = {e_max:.6} at g = {:.4} (|1 - E| <= 5e-3: {})",
            ok(gain_ok),
            top.g_opt.unwrap(),
            ok(e_ok)
        ),
    )
}

fn teleported_vs_direct() -> Outcome {
    let mut min_ratio = f64::INFINITY;
    let mut min_at = 0.0;
    for i in 0..=20 {
        let db = 5.0 + 0.25 * i as f64;
        let cfg = ChannelConfig::symmetric(R_FIG, loss(db).value(), 1.0).unwrap();
        let tel = teleported_log_negativity(&cfg, 1e-12, LogBase::Two)
            .unwrap()
            .value;
        let dir = direct_log_negativity(loss(db), LogBase::Two).value;
        if tel / dir < min_ratio {
            min_ratio = tel / dir;
            min_at = db;
        }
    }
    let mut closed_dev: f64 = 0.0;
    for i in 0..=100 {
        let t = tr(0.01 * i as f64);
        let closed = direct_log_negativity(t, LogBase::Two).value;
        let generic = log_negativity_generic(&direct_state(t), 1, LogBase::Two)
            .unwrap()
            .value;
        closed_dev = closed_dev.max((closed - generic).abs());
    }
    let ln5 = direct_log_negativity(loss(5.0), LogBase::Natural).value;
    let ln10 = direct_log_negativity(loss(10.0), LogBase::Natural).value;
    let ratio_ok = min_ratio > 2.0;
    let closed_ok = closed_dev <= 1e-10;
    let ln_ok = (ln5 - 0.24).abs() <= 0.01 && (ln10 - 0.07).abs() <= 0.01;
    outcome(
        ratio_ok && closed_ok && ln_ok,
        format!(
            "min E_tel/E_dir on [5, 10] dB = {min_ratio:.4} at {min_at} dB (> 2: {}); closed form vs generic {closed_dev:.1e} (<= 1e-10: {}); ln direct 5 dB = {ln5:.4}, 10 dB = {ln10:.4} (0.24/0.07 +- 0.01: {})",
            ok(ratio_ok),
            ok(closed_ok),
            ok(ln_ok)
        ),
    )
}

fn threshold_window() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for db in [5.0, 10.0] {
        let th = threshold_squeezing(loss(db), (0.0, 3.0), 1e-6).unwrap();
        let r = th.value();
        let in_window = r.is_some_and(|r| (0.25..=0.55).contains(&r));
        pass &= in_window;
        parts.push(format!(
            "{db} dB: r_th = {} ({})",
            r.map_or("none".into(), |r| format!("{r:.4}")),
            ok(in_window)
        ));
    }
    outcome(pass, format!("{} (window [0.25, 0.55])", parts.join("; ")))
}

fn first_crossing(rows: &[(f64, f64)]) -> Option<f64> {
    rows.windows(2)
        .find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0)
        .map(|w| {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            x0 + (x1 - x0) * y0 / (y0 - y1)
        })
}

fn qkd_qualitative() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for r in [5.0, 6.0] {
        let mut cfg = SweepConfig::new(Mode::Qkd);
        cfg.fixed.r = Some(r);
        cfg.grid.insert(
            Param::LossDb,
            Axis::Range {
                min: 0.0,
                max: 3.0,
                count: 61,
                spacing: Default::default(),
            },
        );
        let res = run_sweep::<f64>(&cfg).unwrap();
        assert_eq!(res.error_count(), 0);
        let tel: Vec<(f64, f64)> = res
            .rows
            .iter()
            .map(|row| (row.loss_db.unwrap(), row.key_rate_teleported.unwrap()))
            .collect();
        let dir: Vec<(f64, f64)> = res
            .rows
            .iter()
            .map(|row| (row.loss_db.unwrap(), row.key_rate_direct.unwrap()))
            .collect();
        let (k_tel, k_dir) = (tel[0].1, dir[0].1);
        let positive = k_tel > 0.0 && k_dir > 0.0;
        let agree = (k_tel - k_dir).abs() <= 0.1 * k_dir.abs().max(k_tel.abs());
        let (x_tel, x_dir) = (first_crossing(&tel), first_crossing(&dir));
        let cross = x_tel.is_some_and(|x| x <= 2.0) && x_dir.is_some_and(|x| x <= 2.0);
        pass &= positive && agree && cross;
        parts.push(format!(
            "r={r}: K(0 dB) tel {k_tel:.5} dir {k_dir:.5} (positive {}, within 10% {}); zero crossing tel {} dB dir {} dB (<= 2 dB: {})",
            ok(positive),
            ok(agree),
            x_tel.map_or("none".into(), |x| format!("{x:.3}")),
            x_dir.map_or("none".into(), |x| format!("{x:.3}")),
            ok(cross)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn separable_sample(rng: &mut ChaCha8Rng, dims: (usize, usize)) -> DensityMatrix<f64> {
    let mut rho: Option<DensityMatrix<f64>> = None;
    let terms = rng.random_range(1..=4);
    let mut acc = 0.0;
    for _ in 0..terms {
        let mut unit = |n: usize| -> Vec<Complex<f64>> {
            let v: Vec<Complex<f64>> = (0..n)
                .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.into_iter().map(|z| z / norm).collect()
        };
        let a = unit(dims.0);
        let b = unit(dims.1);
        let amps: Vec<_> = a
            .iter()
            .flat_map(|x| b.iter().map(move |y| x * y))
            .collect();
        let pure = DensityMatrix::pure(dims, &amps).unwrap();
        let w: f64 = rng.random_range(0.05..1.0);
        acc += w;
        rho = Some(match rho {
            None => pure,
            Some(prev) => pure.mix(&prev, w / acc).unwrap(),
        });
    }
    rho.unwrap()
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);

    let mut min_eig: f64 = 0.0;
    let mut trace_dev: f64 = 0.0;
    let mut negative_coef = 0;
    for _ in 0..30 {
        let r: f64 = rng.random_range(0.0..=2.5);
        let ta: f64 = rng.random_range(0.2..=1.0);
        let tb: f64 = rng.random_range(0.2..=1.0);
        let g = (tb / ta).sqrt() * rng.random_range(0.8..=1.25);
        let co =
            teleported_coefficients(&ChannelConfig::new(r, ta, tb, g).unwrap(), 1e-12).unwrap();
        negative_coef += co
            .blocks()
            .filter(|&(_, a, _, c)| a < 0.0 || c < 0.0)
            .count();
        trace_dev = trace_dev.max((co.trace() + co.residual() - 1.0).abs());
        if co.residual() > 1e-12 {
            trace_dev = f64::INFINITY;
        }
        let rho = assemble_density_matrix(&co);
        min_eig = min_eig.min(rho.eigenvalues()[0]);
    }
    let state_ok = min_eig >= -1e-12 && trace_dev <= 1e-12 && negative_coef == 0;

    let mut max_ch = f64::NEG_INFINITY;
    for i in 0..100 {
        let dims = if i % 2 == 0 { (2, 3) } else { (2, 2) };
        let rho = separable_sample(&mut rng, dims);
        let mut c = || Complex::new(rng.random_range(-1.2..1.2), rng.random_range(-1.2..1.2));
        let settings = CHSettings::new([c(), c()], [c(), c()]);
        max_ch = max_ch.max(ch_value(&rho, &settings).unwrap().ch_value);
    }
    let ch_ok = max_ch <= 1e-12;

    let mut cfg = SweepConfig::new(Mode::Compare);
    cfg.fixed.r = Some(R_FIG);
    cfg.grid
        .insert(Param::LossDb, Axis::List(vec![0.0, 2.0, 5.0, 10.0]));
    let a = run_sweep::<f64>(&cfg).unwrap();
    let b = run_sweep::<f64>(&cfg).unwrap();
    let c = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_sweep::<f64>(&cfg).unwrap());
    let bits = |r: &cvdv_core::optimize::sweep::SweepResult<f64>| -> Vec<u64> {
        r.rows
            .iter()
            .flat_map(|row| {
                [
                    row.e_ln_teleported,
                    row.e_ln_direct,
                    row.key_rate_teleported,
                    row.key_rate_direct,
                ]
            })
            .map(|v| v.unwrap().to_bits())
            .collect()
    };
    let det_ok = bits(&a) == bits(&b) && bits(&a) == bits(&c);

    outcome(
        state_ok && ch_ok && det_ok,
        format!(
            "min eigenvalue {min_eig:.1e} (>= -1e-12), max |trace + residual - 1| {trace_dev:.1e}, negative coefficients {negative_coef} ({}); max CH over 100 separable states {max_ch:.3e} (<= 0: {}); reruns bit-identical ({})",
            ok(state_ok),
            ok(ch_ok),
            ok(det_ok)
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "1",
            "sigma_tel closed form vs Gaussian conditioning",
            sigma_vs_oracle,
        ),
        ("2", "sigma_tel special cases", sigma_special_cases),
        (
            "3",
            "maximal-entanglement limit",
            maximal_entanglement_limit,
        ),
        (
            "4",
            "block formula vs partial-transpose spectrum",
            blocks_vs_generic,
        ),
        ("5", "optimal gain", optimal_gain_limits),
        (
            "6",
            "teleported vs direct entanglement",
            teleported_vs_direct,
        ),
        ("7", "threshold squeezing", threshold_window),
        ("8", "key-rate qualitative behaviour", qkd_qualitative),
        ("9", "property invariants and determinism", property_suites),
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{verdict} [{id}] {name}: {} [{:.2?}]",
            o.detail,
            t.elapsed()
        )
        .unwrap();
        out.flush().unwrap();
        if !o.pass {
            failed.push(id);
        }
    }
    writeln!(
        out,
        "acceptance: {} of 9 criteria pass, total {:.2?}{}",
        9 - failed.len(),
        start.elapsed(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(", "))
        }
    )
    .unwrap();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
