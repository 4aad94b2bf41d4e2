use approx::assert_relative_eq;
use harvest_core::model::Feedback;
use harvest_core::resonance::{self, analyze, snr_equilibria, RateConvention};
use harvest_core::{ExcitationParams, NoiseParams, SystemParams};

fn sr_params() -> SystemParams {
    SystemParams::baseline().with_feedback(Feedback::new(-0.005, 0.005, 0.6, 2.5)).unwrap()
}

// Independent evaluation in 50-digit arithmetic: the frequency fixed point
// solved with the raw period integrand under tanh-sinh quadrature, then the
// rate and spectrum formulas substituted directly.
const OMEGA_EQ: f64 = 2.321_113_266_110_505_799_4;
const X_S: f64 = 0.948_707_742_992_786_870_48;
const R0: f64 = 0.019_956_023_906_329_548_287;
const R1: f64 = 0.009_124_612_782_086_821_047_1;
const S1: f64 = 0.000_406_142_909_077_740_319_8;
const S2: f64 = 12.392_865_531_370_126_694;
const SNR: f64 = 0.000_032_772_316_301_638_923_248;

#[test]
fn baseline_matches_extended_precision_oracle() {
    let p = sr_params();
    let res = analyze(&p, &NoiseParams::baseline(), &ExcitationParams::baseline(), RateConvention::SingleWell).unwrap();
    assert_relative_eq!(res.equilibria.omega_eq, OMEGA_EQ, max_relative = 1e-9);
    assert_relative_eq!(res.equilibria.x_s_plus, X_S, max_relative = 1e-10);
    assert_relative_eq!(res.r0, R0, max_relative = 1e-8);
    assert_relative_eq!(res.r1, R1, max_relative = 1e-8);
    assert_relative_eq!(res.s1_integral, S1, max_relative = 1e-8);
    assert_relative_eq!(res.s2_at_omega, S2, max_relative = 1e-8);
    assert_relative_eq!(res.snr, SNR, max_relative = 1e-8);
}

#[test]
fn rates_symmetric_between_wells() {
    let p = sr_params();
    let eq = snr_equilibria(&p).unwrap();
    let mirrored = resonance::Equilibria { x_s_plus: -eq.x_s_minus, x_s_minus: -eq.x_s_plus, ..eq };
    let (np, ex) = (NoiseParams::baseline(), ExcitationParams::baseline());
    let a = resonance::transition_rates(&p, &np, &ex, &eq, RateConvention::SingleWell).unwrap();
    let b = resonance::transition_rates(&p, &np, &ex, &mirrored, RateConvention::SingleWell).unwrap();
    assert_eq!(a.r0, b.r0);
}

#[test]
fn snr_unimodal_in_noise() {
    let ds: Vec<f64> = (0..30).map(|i| 1e-3 * 100f64.powf(i as f64 / 29.0)).collect();
    for fb in [Feedback::new(-0.005, 0.005, 0.6, 2.5), Feedback::new(-0.01, 0.0, 0.5, 0.0), Feedback::NONE] {
        let p = SystemParams::baseline().with_feedback(fb).unwrap();
        let curve: Vec<f64> = resonance::snr_curve(&p, 0.3, &ExcitationParams::baseline(), &ds, RateConvention::SingleWell)
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap())
            .collect();
        let signs: Vec<bool> = curve.windows(2).map(|w| w[1] > w[0]).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1, "{fb:?}: {curve:?}");
        assert!(signs[0] && !signs[signs.len() - 1]);
    }
}

#[test]
fn snr_positive_with_forcing() {
    let p = sr_params();
    for d in [0.003, 0.01, 0.03] {
        let s = resonance::snr(&p, &NoiseParams::new(d, 0.3).unwrap(), &ExcitationParams::baseline()).unwrap();
        assert!(s > 0.0);
    }
}
