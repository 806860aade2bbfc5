//! Values computed once by independent routes (bisection paths, the cell
//! oracle, direct quadrature) and frozen here.

use relgrowth_core::oracle::{envelope_points_bisection, local_point_bisection, study_weightings, GOLDEN_C, GOLDEN_G};
use relgrowth_core::solver::solve_l;
use relgrowth_core::*;

fn close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * y.abs()
}

const A: f64 = 0.7784423030795683;
const B: f64 = 1.0000149994344165;
const SLOPE: f64 = 3.336933584134036;
const D_C01: f64 = 1.0000110064217338;

#[test]
fn envelope_points() {
    let u = UtilityParams::TVERSKY_KAHNEMAN;
    let g = GlobalEnvelope::solve(&u).unwrap();
    assert!(close(g.a, A, 1e-12), "{}", g.a);
    assert!(close(g.b, B, 1e-14), "{}", g.b);
    assert!(close(g.slope, SLOPE, 1e-10), "{}", g.slope);
    let (a, b, s) = envelope_points_bisection(&u).unwrap();
    assert!(close(a, A, 1e-10) && close(b, B, 1e-12) && close(s, SLOPE, 1e-8));

    let env = EnvelopeData::local(&u, (-0.1f64).exp()).unwrap();
    assert_eq!(env.regime, EnvelopeRegime::LocalChord);
    assert!(close(env.d.unwrap(), D_C01, 1e-12));
    assert!(close(local_point_bisection(&u, (-0.1f64).exp(), B).unwrap(), D_C01, 1e-12));
    // c = 0.3 puts the floor below a
    let env = EnvelopeData::local(&u, (-0.3f64).exp()).unwrap();
    assert_eq!(env.regime, EnvelopeRegime::GlobalCoincides);
}

// weighting-major, then c, then g, as in the study matrix
const LAMBDA: [f64; 27] = [
    2.2032968617, 3.2500633544, 1.3418039021, 2.0894157190, 2.7598081681, 1.3418030304, 2.0524587116, 2.6135838812,
    1.3418025055, 2.4712161007, 3.5446914772, 2.0085568320, 1.9995063043, 2.3023699362, 1.7919295716, 1.8219954700,
    1.9819344892, 1.6936684325, 2.9008094227, 3.0215288407, 1.3604665986, 2.7844056380, 2.8443906951, 1.3604665986,
    2.7671869763, 2.8106638838, 1.3604665986,
];

#[test]
fn multipliers_of_the_study_matrix() {
    let m = MarketParams::default();
    let u = UtilityParams::TVERSKY_KAHNEMAN;
    let mut k = 0;
    for w in study_weightings(&m).unwrap() {
        for c in GOLDEN_C {
            for g in GOLDEN_G {
                let p = Problem::new(m, Benchmark::constant_excess(g, c).unwrap(), u, w);
                let s = solve(&p).unwrap();
                assert!(close(s.lambda_star, LAMBDA[k], 5e-10), "{} c={c} g={g}: {}", w.name(), s.lambda_star);
                k += 1;
            }
        }
    }
}

#[test]
fn comparison_model_identity() {
    let m = MarketParams::default();
    let u = UtilityParams::TVERSKY_KAHNEMAN;
    let p = Problem::new(m, Benchmark::constant_excess(0.0, 0.1).unwrap(), u, Weighting::Identity);
    let z = solve_zhang(&p).unwrap();
    assert!(close(z.lambda1, 2.1957540117164287, 1e-9), "{}", z.lambda1);
    assert!(close(z.l, 1.6153210609747398e-05, 1e-8), "{}", z.l);
    assert!(close(solve_l(&u, z.big_l).unwrap(), z.l, 1e-12));
}
