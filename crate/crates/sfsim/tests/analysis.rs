use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sfsim::analysis::{cross_entropy_fidelity, porter_thomas_check, sample_ideal, sample_uniform};
use sfsim::circuit::{generate_random_circuit, GridLayout, RuleSet, C64};
use sfsim::dense::simulate_dense;

fn pt_state(n_cols: usize, seed: u64) -> sfsim::StateVector {
    simulate_dense(&generate_random_circuit(GridLayout::new(3, n_cols), 40, seed, RuleSet::PaperSimple).unwrap(), None).unwrap()
}

#[test]
fn fidelity_of_ideal_and_uniform_samplers() {
    let s = pt_state(6, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ideal = sample_ideal(&s, 10_000, &mut rng).unwrap();
    let f = cross_entropy_fidelity(&s, &ideal).unwrap();
    assert!((f - 1.0).abs() < 0.05, "ideal sampler gave {f}");
    let uniform = sample_uniform(18, 10_000, &mut rng);
    let f = cross_entropy_fidelity(&s, &uniform).unwrap();
    assert!(f.abs() < 0.05, "uniform sampler gave {f}");
}

#[test]
fn fidelity_ignores_global_phase() {
    let s = pt_state(4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples = sample_ideal(&s, 500, &mut rng).unwrap();
    let mut rotated = s.clone();
    rotated.scale(C64::from_polar(1.0, 0.7));
    let a = cross_entropy_fidelity(&s, &samples).unwrap();
    let b = cross_entropy_fidelity(&rotated, &samples).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn histogram_mass_and_ks_range() {
    let s = pt_state(5, 7);
    let r = porter_thomas_check(&s).unwrap();
    let mass: f64 = r.histogram.iter().map(|b| b.mass).sum::<f64>() + r.zero_fraction;
    assert!((mass - 1.0).abs() < 1e-12);
    assert!((0.0..=1.0).contains(&r.ks_distance));
    assert!(!r.degenerate);
    for w in r.histogram.windows(2) {
        assert!((w[0].hi - w[1].lo).abs() < 1e-12);
    }
}
