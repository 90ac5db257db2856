//! Embedded reference states.
//!
//! These ship inside the binary so `verify-paper` and the test suite run with
//! no input files. Every constructor returns a freshly built state.

use crate::state::{PureState, SystemShape};
use num_complex::Complex64;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// |GHZ_m> = (|0...0> + |1...1>)/sqrt(2) on m qubits.
pub fn ghz(m: usize) -> PureState {
    let shape = SystemShape::qubits(m).expect("qubit count within limits");
    let top = shape.total_dim() - 1;
    PureState::from_terms(shape, &[(0, re(1.0)), (top, re(1.0))]).expect("ghz terms")
}

/// |W> = (|100> + |010> + |001>)/sqrt(3).
pub fn w3() -> PureState {
    let shape = SystemShape::qubits(3).expect("three qubits");
    PureState::from_terms(shape, &[(0b100, re(1.0)), (0b010, re(1.0)), (0b001, re(1.0))])
        .expect("w terms")
}

/// |Phi+> = (|00> + |11>)/sqrt(2).
pub fn bell_pair() -> PureState {
    let shape = SystemShape::qubits(2).expect("two qubits");
    PureState::from_terms(shape, &[(0b00, re(1.0)), (0b11, re(1.0))]).expect("bell terms")
}

/// |Phi+>^{AB} (x) |0>^{C}: biseparable but not fully product.
pub fn bell_product() -> PureState {
    let shape = SystemShape::qubits(3).expect("three qubits");
    PureState::from_terms(shape, &[(0b000, re(1.0)), (0b110, re(1.0))]).expect("bell/0 terms")
}

/// |0>^{A} (x) |Phi+>^{BC}: biseparable across the other singleton cut.
/// Mixing it with [`bell_product`] gives a state whose biseparable
/// decomposition needs members split across different cuts.
pub fn zero_bell_product() -> PureState {
    let shape = SystemShape::qubits(3).expect("three qubits");
    PureState::from_terms(shape, &[(0b000, re(1.0)), (0b011, re(1.0))]).expect("0/bell terms")
}

/// The four-qubit benchmark state
/// sqrt5/4 (|0000> + |0100> + |1010>) + 1/4 |1111>,
/// whose cut concurrences are sqrt15/8 (ABC|D) and sqrt65/8 (AB|CD).
pub fn four_qubit_benchmark() -> PureState {
    let shape = SystemShape::qubits(4).expect("four qubits");
    let s5 = 5f64.sqrt() / 4.0;
    PureState::from_terms(
        shape,
        &[
            (0b0000, re(s5)),
            (0b0100, re(s5)),
            (0b1010, re(s5)),
            (0b1111, re(0.25)),
        ],
    )
    .expect("benchmark terms")
}

/// Names accepted wherever a state path is expected on the command line.
pub const FIXTURE_NAMES: [&str; 5] = ["ghz3", "ghz4", "w3", "bell-product", "ref4"];

/// Looks up an embedded fixture by command-line name.
pub fn by_name(name: &str) -> Option<PureState> {
    match name {
        "ghz3" => Some(ghz(3)),
        "ghz4" => Some(ghz(4)),
        "w3" => Some(w3()),
        "bell-product" => Some(bell_product()),
        "ref4" => Some(four_qubit_benchmark()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_normalized_and_named() {
        for name in FIXTURE_NAMES {
            let psi = by_name(name).expect("known fixture");
            assert!((psi.amplitudes().norm() - 1.0).abs() < 1e-12, "{name}");
        }
        assert!(by_name("ghz5").is_none());
    }

    #[test]
    fn benchmark_state_amplitudes() {
        let psi = four_qubit_benchmark();
        let amps = psi.amplitudes();
        let s5 = 5f64.sqrt() / 4.0;
        assert!((amps[0b0000].re - s5).abs() < 1e-15);
        assert!((amps[0b0100].re - s5).abs() < 1e-15);
        assert!((amps[0b1010].re - s5).abs() < 1e-15);
        assert!((amps[0b1111].re - 0.25).abs() < 1e-15);
    }
}
