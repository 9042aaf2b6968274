//! Bundled example chains used by the test suite, the CLI fixtures and the
//! demo page. Each constructor documents the arithmetic that makes the rows
//! stochastic; the JSON files under `fixtures/` mirror these definitions.

use crate::chain::{ChainSpec, Gi1Chain, SequenceSpec, TailSpec};

/// Coefficient of the power-law boundary tail of [`c3`]: `0.2 / zeta(4.5)`,
/// so that `B0 + sum_k B_k = 0.8 + 0.2 = 1`.
pub const C3_POWER_COEFF: f64 = 0.189_626_031_823_371_07;

fn seq(blocks: Vec<Vec<Vec<f64>>>, tail: TailSpec) -> SequenceSpec {
    SequenceSpec { blocks, tail }
}

fn finite(blocks: Vec<Vec<Vec<f64>>>) -> SequenceSpec {
    seq(blocks, TailSpec::Finite)
}

/// Scalar birth–death chain: up 0.2, stay 0.4, down 0.4; boundary holds with
/// 0.8 and enters with 0.2. Negative drift -0.2, decay root 2, stationary
/// law `pi_i = 0.5^(i+1)`.
pub fn c1_spec() -> ChainSpec {
    ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.4]],
        b0: vec![vec![0.8]],
        a_plus: finite(vec![vec![vec![0.2]]]),
        a_minus: finite(vec![vec![vec![0.4]]]),
        b_plus: finite(vec![vec![vec![0.2]]]),
        b_minus: finite(vec![vec![vec![0.4]]]),
    }
}

pub fn c1() -> Gi1Chain {
    Gi1Chain::from_spec(&c1_spec()).expect("C1 is valid")
}

/// Scalar chain with a substochastic phase process (mass 0.9): every
/// interior level keeps a direct 0.1 jump to the boundary, so hitting times
/// are uniformly bounded. Rows: level 0 = 0.9 + 0.1; level 1 = 0.6 + 0.3 +
/// 0.1; deeper levels = 0.1 + 0.5 + 0.3 + 0.1.
pub fn c2_spec() -> ChainSpec {
    ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.3]],
        b0: vec![vec![0.9]],
        a_plus: finite(vec![vec![vec![0.1]]]),
        a_minus: finite(vec![vec![vec![0.5]]]),
        b_plus: finite(vec![vec![vec![0.1]]]),
        b_minus: seq(
            vec![vec![vec![0.6]]],
            TailSpec::Constant {
                start: 1,
                value: vec![vec![0.1]],
            },
        ),
    }
}

pub fn c2() -> Gi1Chain {
    Gi1Chain::from_spec(&c2_spec()).expect("C2 is valid")
}

/// C1's interior with a power-law boundary: from level 0 the chain jumps to
/// level k with probability `C3_POWER_COEFF * k^(-4.5)`. Upward block
/// moments are finite exactly for l <= 3.
pub fn c3_spec() -> ChainSpec {
    ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.4]],
        b0: vec![vec![0.8]],
        a_plus: finite(vec![vec![vec![0.2]]]),
        a_minus: finite(vec![vec![vec![0.4]]]),
        b_plus: seq(
            vec![],
            TailSpec::PowerLaw {
                start: 0,
                alpha: 4.5,
                coeff: vec![vec![C3_POWER_COEFF]],
            },
        ),
        b_minus: finite(vec![vec![vec![0.4]]]),
    }
}

pub fn c3() -> Gi1Chain {
    Gi1Chain::from_spec(&c3_spec()).expect("C3 is valid")
}

/// Two-phase chain with bisymmetric blocks; the symmetric Perron branch has
/// row-sum eigenvalue `0.45/z + 0.4 + 0.15 z`, giving decay root 3. Level-1
/// rows need `B_{-1}` mass 0.45 per row, split uniformly.
pub fn c4_spec() -> ChainSpec {
    ChainSpec {
        m: 2,
        m0: 2,
        a0: vec![vec![0.3, 0.1], vec![0.1, 0.3]],
        b0: vec![vec![0.6, 0.25], vec![0.25, 0.6]],
        a_plus: finite(vec![vec![vec![0.1, 0.05], vec![0.05, 0.1]]]),
        a_minus: finite(vec![vec![vec![0.2, 0.25], vec![0.25, 0.2]]]),
        b_plus: finite(vec![vec![vec![0.1, 0.05], vec![0.05, 0.1]]]),
        b_minus: finite(vec![vec![vec![0.225, 0.225], vec![0.225, 0.225]]]),
    }
}

pub fn c4() -> Gi1Chain {
    Gi1Chain::from_spec(&c4_spec()).expect("C4 is valid")
}

/// Two-phase substochastic variant: phase row sums (0.9, 1.0), so only the
/// first phase leaks to the boundary and the second escapes through it.
/// `(I - A)^(-1) e = (50/3, 170/9)`.
pub fn c5_spec() -> ChainSpec {
    ChainSpec {
        m: 2,
        m0: 1,
        a0: vec![vec![0.3, 0.1], vec![0.2, 0.3]],
        b0: vec![vec![0.7]],
        a_plus: finite(vec![vec![vec![0.1, 0.1], vec![0.05, 0.05]]]),
        a_minus: finite(vec![vec![vec![0.2, 0.1], vec![0.2, 0.2]]]),
        b_plus: finite(vec![vec![vec![0.2, 0.1]]]),
        b_minus: seq(
            vec![vec![vec![0.4], vec![0.4]]],
            TailSpec::Constant {
                start: 1,
                value: vec![vec![0.1], vec![0.0]],
            },
        ),
    }
}

pub fn c5() -> Gi1Chain {
    Gi1Chain::from_spec(&c5_spec()).expect("C5 is valid")
}

/// Zero-drift variant of C1 (up and down both 0.3): null-recurrent or
/// transient, in any case not positive recurrent.
pub fn c1_zero_drift() -> Gi1Chain {
    let spec = ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.4]],
        b0: vec![vec![0.8]],
        a_plus: finite(vec![vec![vec![0.3]]]),
        a_minus: finite(vec![vec![vec![0.3]]]),
        b_plus: finite(vec![vec![vec![0.2]]]),
        b_minus: finite(vec![vec![vec![0.3]]]),
    };
    Gi1Chain::from_spec(&spec).expect("zero-drift variant is valid")
}

/// C1-like chain whose upward interior tail is geometric with ratio 0.5
/// (radius 2): `A_k = 0.2 * 0.5^k` for `k >= 1`, down mass 0.7, hold 0.1.
/// The decay root solves `0.55 z^2 - 1.25 z + 0.7 = 0`, i.e. `14/11`.
pub fn c1_geometric_upper() -> Gi1Chain {
    let spec = ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.1]],
        b0: vec![vec![0.8]],
        a_plus: seq(
            vec![],
            TailSpec::Geometric {
                start: 0,
                ratio: 0.5,
                coeff: vec![vec![0.2]],
            },
        ),
        a_minus: finite(vec![vec![vec![0.7]]]),
        b_plus: finite(vec![vec![vec![0.2]]]),
        b_minus: finite(vec![vec![vec![0.7]]]),
    };
    Gi1Chain::from_spec(&spec).expect("geometric-tail variant is valid")
}

/// Chain with unbounded geometric down-jumps: `A_{-k} = 0.2 * 0.5^k` for
/// all `k >= 1`. Interior rows at level `i` only reach down to lag
/// `i - 1`, so the boundary return blocks must carry the law's residual:
/// `B_{-i} = 0.4 * 0.5^i`, which the matching geometric tail expresses
/// exactly. Drift `0.3 - 0.4 = -0.1`.
pub fn geometric_down() -> Gi1Chain {
    let spec = ChainSpec {
        m: 1,
        m0: 1,
        a0: vec![vec![0.5]],
        b0: vec![vec![0.7]],
        a_plus: finite(vec![vec![vec![0.3]]]),
        a_minus: seq(
            vec![],
            TailSpec::Geometric {
                start: 0,
                ratio: 0.5,
                coeff: vec![vec![0.2]],
            },
        ),
        b_plus: finite(vec![vec![vec![0.3]]]),
        b_minus: seq(
            vec![],
            TailSpec::Geometric {
                start: 0,
                ratio: 0.5,
                coeff: vec![vec![0.4]],
            },
        ),
    };
    Gi1Chain::from_spec(&spec).expect("geometric-down chain is valid")
}

/// All bundled chains by name, for CLI presets and the demo page.
pub fn by_name(name: &str) -> Option<ChainSpec> {
    match name {
        "c1" => Some(c1_spec()),
        "c2" => Some(c2_spec()),
        "c3" => Some(c3_spec()),
        "c4" => Some(c4_spec()),
        "c5" => Some(c5_spec()),
        _ => None,
    }
}
