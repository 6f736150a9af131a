use sfsim::circuit::{generate_random_circuit, GridLayout, RuleSet};
use sfsim::dense::{read_state, simulate_dense, write_state, StateVector};

#[test]
fn gates_within_a_layer_commute() {
    let c = generate_random_circuit(GridLayout::new(3, 4), 16, 21, RuleSet::PaperSimple).unwrap();
    let mut fwd = StateVector::zero(12);
    let mut rev = StateVector::zero(12);
    for layer in &c.layers {
        let before = fwd.norm_sqr();
        fwd.apply_gates(layer).unwrap();
        assert!((fwd.norm_sqr() - before).abs() < 1e-12 * layer.len().max(1) as f64);
        rev.apply_gates(layer.iter().rev()).unwrap();
    }
    let diff = fwd.amps().iter().zip(rev.amps()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-12);
}

#[test]
fn state_file_round_trip() {
    let c = generate_random_circuit(GridLayout::new(2, 3), 9, 4, RuleSet::GoogleV1).unwrap();
    let s = simulate_dense(&c, None).unwrap();
    let mut buf = Vec::new();
    write_state(&mut buf, &s).unwrap();
    assert_eq!(buf.len(), 8 + 1 + 16 * 64);
    assert_eq!(read_state(&buf[..]).unwrap().amps(), s.amps());
    buf[0] ^= 1;
    assert!(read_state(&buf[..]).is_err());
}
