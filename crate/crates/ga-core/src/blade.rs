//! Canonical blade basis for the 16-dimensional algebra.
//!
//! Blades are ordered grade-major, lexicographic within each grade:
//!
//! ```text
//! idx  0    1   2   3   4    5    6    7    8    9    10    11    12    13    14    15
//!      1    e1  e2  e3  e4   e12  e13  e14  e23  e24  e34   e123  e124  e134  e234  e1234
//! ```
//!
//! Internally each blade is a 4-bit mask (bit i set means e(i+1) is a
//! factor) and the product of two basis blades is computed by counting the
//! transpositions needed to sort the concatenated factor list, contracting
//! repeated vectors through the metric.

/// Number of basis blades in a 4-dimensional algebra.
pub const BLADE_COUNT: usize = 16;

/// Bit masks of the canonical blades, in canonical order.
pub const BLADE_MASKS: [u8; BLADE_COUNT] = [
    0b0000, // 1
    0b0001, 0b0010, 0b0100, 0b1000, // e1 e2 e3 e4
    0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100, // e12 e13 e14 e23 e24 e34
    0b0111, 0b1011, 0b1101, 0b1110, // e123 e124 e134 e234
    0b1111, // e1234
];

/// Canonical indices of blades that do not contain e4. Inner products used
/// for rotation-invariant features sum over exactly these coefficients.
pub const NONDEGENERATE_BLADES: [usize; 8] = [0, 1, 2, 3, 5, 6, 8, 11];

/// Canonical index -> bit mask.
pub fn blade_mask(index: usize) -> u8 {
    BLADE_MASKS[index]
}

/// Bit mask -> canonical index.
pub fn mask_to_index(mask: u8) -> usize {
    const TABLE: [usize; 16] = {
        let mut t = [0usize; 16];
        let mut i = 0;
        while i < 16 {
            t[BLADE_MASKS[i] as usize] = i;
            i += 1;
        }
        t
    };
    TABLE[mask as usize]
}

/// Grade (number of vector factors) of the blade at a canonical index.
pub fn blade_grade(index: usize) -> usize {
    BLADE_MASKS[index].count_ones() as usize
}

/// Whether the blade at a canonical index contains the e4 factor.
pub fn blade_contains_e4(index: usize) -> bool {
    BLADE_MASKS[index] & 0b1000 != 0
}

/// Human-readable name of a blade, for diagnostics.
pub fn blade_name(index: usize) -> &'static str {
    const NAMES: [&str; BLADE_COUNT] = [
        "1", "e1", "e2", "e3", "e4", "e12", "e13", "e14", "e23", "e24", "e34", "e123", "e124",
        "e134", "e234", "e1234",
    ];
    NAMES[index]
}

/// Sign from sorting the factors of `a * b` into canonical ascending order.
///
/// Every transposition of two distinct basis vectors contributes -1; the
/// classic bit trick counts, for each factor of `a`, how many factors of
/// `b` have a strictly lower axis index.
pub(crate) fn reorder_sign(a: u8, b: u8) -> f64 {
    let mut a = a >> 1;
    let mut swaps = 0u32;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}
