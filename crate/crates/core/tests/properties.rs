use cvdv_core::optimize::sweep::{run_sweep, Axis, Mode, Param, SweepConfig};
use cvdv_core::qkd::{ch_value, key_rate_bound, CHResult, CHSettings, NonlocalFractionBound};
use cvdv_core::teleportation::sigma_tel_general;
use cvdv_core::*;
use nalgebra::Complex;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

fn tr(t: f64) -> Transmissivity<f64> {
    Transmissivity::new(t).unwrap()
}

fn max_abs_diff(a: &nalgebra::Matrix4<f64>, b: &nalgebra::Matrix4<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn config() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.0..2.5f64, 0.2..=1.0f64, 0.2..=1.0f64, 0.8..1.25f64)
        .prop_map(|(r, ta, tb, u)| (r, ta, tb, (tb / ta).sqrt() * u))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_composes_multiplicatively(r in 0.0..3.0f64, t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64, t3 in 0.0..=1.0f64) {
        let s = tmsv_state(r).unwrap();
        let twice = attenuate(&attenuate(&s, tr(t1), tr(t3)), tr(t2), tr(1.0));
        let once = attenuate(&s, tr(t1 * t2), tr(t3));
        prop_assert!(max_abs_diff(twice.cov(), once.cov()) < 1e-12 * s.cov()[(0, 0)].max(1.0));
    }

    #[test]
    fn attenuated_states_are_physical(r in 0.0..3.0f64, ta in 0.0..=1.0f64, tb in 0.0..=1.0f64) {
        let s = attenuate(&tmsv_state(r).unwrap(), tr(ta), tr(tb));
        let (nu_minus, _) = s.symplectic_eigenvalues();
        prop_assert!(nu_minus >= 0.25 - 1e-9, "nu_- = {nu_minus}");
        prop_assert!(GaussianTwoModeState::new(*s.mean(), *s.cov()).is_ok());
    }

    #[test]
    fn tmsv_is_pure(r in 0.0..3.0f64) {
        let s = tmsv_state(r).unwrap();
        let det = s.cov().determinant();
        prop_assert!((det - 1.0 / 256.0).abs() < 1e-12 * s.cov()[(0, 0)].powi(4), "det = {det}");
        let (lo, hi) = s.symplectic_eigenvalues();
        prop_assert!((lo - 0.25).abs() < 1e-6 && (hi - 0.25).abs() < 1e-6);
    }

    #[test]
    fn oracle_matches_closed_form(r in 0.0..3.0f64, ta in 0.01..=1.0f64, tb in 0.01..=1.0f64, g in 0.1..10.0f64) {
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let channel = attenuate(&tmsv_state(r).unwrap(), tr(ta), tr(tb));
        let oracle = homodyne_teleport_oracle(&SingleModeGaussian::vacuum(), &channel, g).unwrap();
        let closed = sigma_tel_general(&cfg).value();
        prop_assert!((oracle.sigma_tel - closed).abs() <= 1e-10 * closed);
    }

    #[test]
    fn coefficients_are_a_normalised_state((r, ta, tb, g) in config()) {
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let co = teleported_coefficients(&cfg, 1e-12).unwrap();
        for (k, a, _, cc) in co.blocks() {
            prop_assert!(a >= 0.0 && cc >= 0.0, "k = {k}: a = {a}, c = {cc}");
        }
        prop_assert!(co.residual() >= 0.0 && co.residual() < 1e-12);
        prop_assert!((co.trace() + co.residual() - 1.0).abs() < 1e-12);
        let rho = assemble_density_matrix(&co);
        prop_assert!(rho.hermitian_deviation() < 1e-14);
        // Cutting the series can drop one partner of a coupled pair, which
        // costs at most the truncated mass.
        prop_assert!(rho.eigenvalues()[0] >= -1e-12);
        prop_assert!((rho.trace() - co.trace()).abs() < 1e-14);
    }

    #[test]
    fn base_change_is_a_rescaling((r, ta, tb, g) in config()) {
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let two = teleported_log_negativity(&cfg, 1e-12, LogBase::Two).unwrap();
        let e = teleported_log_negativity(&cfg, 1e-12, LogBase::Natural).unwrap();
        prop_assert!((two.value * std::f64::consts::LN_2 - e.value).abs() < 1e-13);
        prop_assert!((two.to_base(LogBase::Natural).value - e.value).abs() < 1e-13);
    }

    #[test]
    fn direct_entanglement_increases_with_transmissivity(t1 in 0.0..=1.0f64, t2 in 0.0..=1.0f64) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let e_lo = direct_log_negativity(tr(lo), LogBase::Two).value;
        let e_hi = direct_log_negativity(tr(hi), LogBase::Two).value;
        prop_assert!(e_lo <= e_hi + 1e-15);
    }

    #[test]
    fn truncation_is_stable((r, ta, tb, g) in config()) {
        let cfg = ChannelConfig::new(r, ta, tb, g).unwrap();
        let co = teleported_coefficients(&cfg, 1e-12).unwrap();
        let wider = teleported_coefficients_with_cutoff(&cfg, co.cutoff() + 20).unwrap();
        let a = log_negativity_blocks(&co, LogBase::Two).value;
        let b = log_negativity_blocks(&wider, LogBase::Two).value;
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn key_rate_monotone(ch1 in -0.2..0.2f64, ch2 in -0.2..0.2f64, e1 in 0.0..=0.5f64, e2 in 0.0..=0.5f64) {
        let result = |v: f64| CHResult {
            ch_value: v,
            probabilities: CHProbabilities { q11: 0.0, q12: 0.0, q21: 0.0, q22: 0.0, q_a1: 0.0, q_b1: 0.0 },
            settings: CHSettings::new([c(0.0, 0.0); 2], [c(0.0, 0.0); 2]),
        };
        let (ch_lo, ch_hi) = (ch1.min(ch2), ch1.max(ch2));
        let (e_lo, e_hi) = (e1.min(e2), e1.max(e2));
        let k = |ch: f64, e: f64| key_rate_bound(&result(ch), e, &NonlocalFractionBound).unwrap();
        prop_assert!(k(ch_lo, e_lo).raw <= k(ch_hi, e_lo).raw);
        prop_assert!(k(ch_lo, e_hi).raw <= k(ch_lo, e_lo).raw);
        prop_assert!(k(ch_lo, e_lo).rate >= 0.0);
    }
}

fn separable_state(parts: &[(f64, [f64; 4], [f64; 6])]) -> DensityMatrix<f64> {
    let dims = (2, 3);
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let mut rho: Option<DensityMatrix<f64>> = None;
    let mut acc = 0.0;
    for (w, a, b) in parts {
        let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]).sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let va = [c(a[0], a[1]) / na, c(a[2], a[3]) / na];
        let vb = [c(b[0], b[1]) / nb, c(b[2], b[3]) / nb, c(b[4], b[5]) / nb];
        let amps: Vec<_> = va
            .iter()
            .flat_map(|x| vb.iter().map(move |y| x * y))
            .collect();
        let pure = DensityMatrix::pure(dims, &amps).unwrap();
        acc += w;
        rho = Some(match rho {
            None => pure,
            Some(prev) => pure.mix(&prev, w / acc).unwrap(),
        });
    }
    let rho = rho.unwrap();
    assert!((rho.trace() - 1.0).abs() < 1e-12, "{} {total}", rho.trace());
    rho
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn separable_states_respect_ch(
        parts in prop::collection::vec(
            (0.05..1.0f64, prop::array::uniform4(0.1..1.0f64), prop::array::uniform6(0.1..1.0f64)),
            1..4,
        ),
        settings in prop::array::uniform8(-1.2..1.2f64),
    ) {
        let rho = separable_state(&parts);
        let s = CHSettings::new(
            [c(settings[0], settings[1]), c(settings[2], settings[3])],
            [c(settings[4], settings[5]), c(settings[6], settings[7])],
        );
        let ch = ch_value(&rho, &s).unwrap().ch_value;
        prop_assert!(ch <= 1e-12, "CH = {ch}");
    }
}

#[test]
fn sweeps_are_deterministic() {
    let mut cfg = SweepConfig::new(Mode::Compare);
    cfg.fixed.r = Some(2.0);
    cfg.grid
        .insert(Param::LossDb, Axis::List(vec![0.0, 1.0, 3.0, 6.0]));
    let first = run_sweep::<f64>(&cfg).unwrap();
    let second = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| run_sweep::<f64>(&cfg).unwrap());
    assert_eq!(first, second);
    for (a, b) in first.rows.iter().zip(&second.rows) {
        assert_eq!(
            a.e_ln_teleported.map(f64::to_bits),
            b.e_ln_teleported.map(f64::to_bits)
        );
        assert_eq!(
            a.key_rate_teleported.map(f64::to_bits),
            b.key_rate_teleported.map(f64::to_bits)
        );
    }
}

#[test]
fn single_precision_tracks_double() {
    let c64 = ChannelConfig::new(1.2_f64, 0.7, 0.5, 0.9).unwrap();
    let c32 = ChannelConfig::new(1.2_f32, 0.7, 0.5, 0.9).unwrap();
    let s64 = sigma_tel(&c64).value();
    let s32 = sigma_tel(&c32).value();
    assert!(((s32 as f64) - s64).abs() < 1e-5 * s64);
    let e64 = teleported_log_negativity(&c64, 1e-12, LogBase::Two)
        .unwrap()
        .value;
    let e32 = teleported_log_negativity(&c32, 1e-6, LogBase::Two)
        .unwrap()
        .value;
    assert!(((e32 as f64) - e64).abs() < 1e-4, "{e32} vs {e64}");
}
