//! Exact n-qubit Pauli group arithmetic in binary symplectic form.
//!
//! A `PauliString` stores the operator `i^phase * prod_j X_j^{x_j} Z_j^{z_j}`.
//! In this convention a bare `Y` on qubit j is `(x_j, z_j) = (1, 1)` with
//! stored phase 1, since `Y = i X Z`. Products are exact: the only phase
//! correction in a multiplication is `(-1)^{z1 . x2}` from commuting the left
//! factor's Z part past the right factor's X part.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    I,
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const NON_IDENTITY: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => PauliAxis::I,
            (true, false) => PauliAxis::X,
            (false, true) => PauliAxis::Z,
            (true, true) => PauliAxis::Y,
        }
    }

    /// (x, z) bit pair of the axis.
    pub fn bits(self) -> (bool, bool) {
        match self {
            PauliAxis::I => (false, false),
            PauliAxis::X => (true, false),
            PauliAxis::Z => (false, true),
            PauliAxis::Y => (true, true),
        }
    }

    pub fn to_char(self) -> char {
        match self {
            PauliAxis::I => 'I',
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(PauliAxis::I),
            'X' => Some(PauliAxis::X),
            'Y' => Some(PauliAxis::Y),
            'Z' => Some(PauliAxis::Z),
            _ => None,
        }
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn parity_and(a: &[u64], b: &[u64]) -> u8 {
    let mut acc = 0u32;
    for (x, y) in a.iter().zip(b) {
        acc ^= (x & y).count_ones();
    }
    (acc & 1) as u8
}

/// An n-qubit Pauli operator with exact phase tracking.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    /// Exponent of i in {0,1,2,3}; operator = i^phase * prod X^x Z^z.
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            n,
            x: vec![0; words(n)],
            z: vec![0; words(n)],
            phase: 0,
        }
    }

    /// Build from per-qubit axes and an overall sign exponent of i
    /// (0 -> +1, 1 -> +i, 2 -> -1, 3 -> -i).
    pub fn from_axes(axes: &[PauliAxis], sign_exp: u8) -> Self {
        let mut p = PauliString::identity(axes.len());
        for (j, a) in axes.iter().enumerate() {
            let (xb, zb) = a.bits();
            p.set_bit_x(j, xb);
            p.set_bit_z(j, zb);
        }
        p.phase = (sign_exp + p.y_count() as u8) & 3;
        p
    }

    /// `P^(i)`: the axis on qubit `i`, identity elsewhere, sign +1.
    pub fn embed_single(axis: PauliAxis, i: usize, n: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::QubitOutOfRange { index: i, n });
        }
        let mut p = PauliString::identity(n);
        let (xb, zb) = axis.bits();
        p.set_bit_x(i, xb);
        p.set_bit_z(i, zb);
        if axis == PauliAxis::Y {
            p.phase = 1;
        }
        p
            .check_consistent();
        Ok(p)
    }

    #[inline]
    fn check_consistent(&self) {
        debug_assert_eq!(self.x.len(), words(self.n));
        debug_assert_eq!(self.z.len(), words(self.n));
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_bit(&self, j: usize) -> bool {
        self.x[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn z_bit(&self, j: usize) -> bool {
        self.z[j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub(crate) fn set_bit_x(&mut self, j: usize, v: bool) {
        let w = j / 64;
        let m = 1u64 << (j % 64);
        if v {
            self.x[w] |= m;
        } else {
            self.x[w] &= !m;
        }
    }

    #[inline]
    pub(crate) fn set_bit_z(&mut self, j: usize, v: bool) {
        let w = j / 64;
        let m = 1u64 << (j % 64);
        if v {
            self.z[w] |= m;
        } else {
            self.z[w] &= !m;
        }
    }

    /// Raw phase exponent of i in the X-Z product convention.
    pub fn phase_exp(&self) -> u8 {
        self.phase
    }

    pub(crate) fn add_phase(&mut self, delta: u8) {
        self.phase = (self.phase + delta) & 3;
    }

    /// X mask as a single machine word; only valid for n <= 64.
    pub fn x_mask_u64(&self) -> u64 {
        assert!(self.n <= 64);
        self.x.first().copied().unwrap_or(0)
    }

    pub fn z_mask_u64(&self) -> u64 {
        assert!(self.n <= 64);
        self.z.first().copied().unwrap_or(0)
    }

    pub fn axis_at(&self, j: usize) -> PauliAxis {
        PauliAxis::from_bits(self.x_bit(j), self.z_bit(j))
    }

    pub fn axes(&self) -> impl Iterator<Item = PauliAxis> + '_ {
        (0..self.n).map(|j| self.axis_at(j))
    }

    /// Number of non-identity sites.
    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum()
    }

    fn y_count(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn is_identity_support(&self) -> bool {
        self.weight() == 0
    }

    /// Sign exponent of i in the tensor-of-axes convention:
    /// operator = i^e * (tensor of I/X/Y/Z).
    pub fn sign_exp(&self) -> u8 {
        (self.phase + 3 * (self.y_count() as u8 & 3)) & 3
    }

    /// Hermitian iff the tensor-convention sign is real.
    pub fn is_hermitian(&self) -> bool {
        self.sign_exp() % 2 == 0
    }

    /// +1 or -1 for a Hermitian string.
    pub fn sign(&self) -> i8 {
        debug_assert!(self.is_hermitian());
        if self.sign_exp() == 0 {
            1
        } else {
            -1
        }
    }

    fn check_same_n(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Exact operator product `self * other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_same_n(other)?;
        let mut out = PauliString::identity(self.n);
        for w in 0..self.x.len() {
            out.x[w] = self.x[w] ^ other.x[w];
            out.z[w] = self.z[w] ^ other.z[w];
        }
        // Z of the left factor anticommutes with X of the right factor.
        let swaps = parity_and(&self.z, &other.x);
        out.phase = (self.phase + other.phase + 2 * swaps) & 3;
        Ok(out)
    }

    /// In-place left product: `self = self * other` (no allocation).
    pub(crate) fn multiply_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        let swaps = parity_and(&self.z, &other.x);
        for w in 0..self.x.len() {
            self.x[w] ^= other.x[w];
            self.z[w] ^= other.z[w];
        }
        self.phase = (self.phase + other.phase + 2 * swaps) & 3;
    }

    /// True iff the symplectic inner product is even.
    pub fn commutes(&self, other: &Self) -> Result<bool> {
        self.check_same_n(other)?;
        Ok(parity_and(&self.x, &other.z) ^ parity_and(&self.z, &other.x) == 0)
    }

    /// Same x/z support, phase ignored.
    pub fn same_support(&self, other: &Self) -> bool {
        self.n == other.n && self.x == other.x && self.z == other.z
    }

    /// Parse an observable: imaginary overall phases are rejected.
    pub fn parse_observable(s: &str) -> Result<Self> {
        let p: PauliString = s.parse()?;
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.sign_exp() });
        }
        Ok(p)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign_exp() {
            0 => {}
            1 => write!(f, "+i")?,
            2 => write!(f, "-")?,
            _ => write!(f, "-i")?,
        }
        for a in self.axes() {
            write!(f, "{}", a.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (sign_exp, rest) = if let Some(r) = t.strip_prefix("+i") {
            (1u8, r)
        } else if let Some(r) = t.strip_prefix("-i") {
            (3u8, r)
        } else if let Some(r) = t.strip_prefix('i') {
            (1u8, r)
        } else if let Some(r) = t.strip_prefix('+') {
            (0u8, r)
        } else if let Some(r) = t.strip_prefix('-') {
            (2u8, r)
        } else {
            (0u8, t)
        };
        if rest.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "empty Pauli string".into(),
            });
        }
        let mut axes = Vec::with_capacity(rest.len());
        for c in rest.chars() {
            let a = PauliAxis::from_char(c).ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("invalid Pauli axis '{c}'"),
            })?;
            axes.push(a);
        }
        Ok(PauliString::from_axes(&axes, sign_exp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    type M2 = [[Complex64; 2]; 2];

    fn axis_matrix(a: PauliAxis) -> M2 {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        match a {
            PauliAxis::I => [[l, o], [o, l]],
            PauliAxis::X => [[o, l], [l, o]],
            PauliAxis::Y => [[o, -i], [i, o]],
            PauliAxis::Z => [[l, o], [o, -l]],
        }
    }

    fn matmul(a: &M2, b: &M2) -> M2 {
        let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                for k in 0..2 {
                    c[r][s] += a[r][k] * b[k][s];
                }
            }
        }
        c
    }

    fn single_matrix(p: &PauliString) -> M2 {
        assert_eq!(p.num_qubits(), 1);
        let ph = match p.sign_exp() {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let m = axis_matrix(p.axis_at(0));
        [[m[0][0] * ph, m[0][1] * ph], [m[1][0] * ph, m[1][1] * ph]]
    }

    fn single(axis: PauliAxis) -> PauliString {
        PauliString::embed_single(axis, 0, 1).unwrap()
    }

    #[test]
    fn x_times_x_is_identity() {
        let p = single(PauliAxis::X).multiply(&single(PauliAxis::X)).unwrap();
        assert!(p.is_identity_support());
        assert_eq!(p.sign_exp(), 0);
    }

    #[test]
    fn x_times_z_is_minus_i_y() {
        let p = single(PauliAxis::X).multiply(&single(PauliAxis::Z)).unwrap();
        assert_eq!(p.axis_at(0), PauliAxis::Y);
        assert_eq!(p.sign_exp(), 3);
        assert_eq!(p.to_string(), "-iY");
    }

    #[test]
    fn two_qubit_product_phase() {
        // (X (x) Z) * (Z (x) Z) = -i (Y (x) I)
        let a: PauliString = "XZ".parse().unwrap();
        let b: PauliString = "ZZ".parse().unwrap();
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.to_string(), "-iYI");
    }

    #[test]
    fn commutation_examples() {
        let x = single(PauliAxis::X);
        let z = single(PauliAxis::Z);
        assert!(!x.commutes(&z).unwrap());
        let xx: PauliString = "XX".parse().unwrap();
        let zz: PauliString = "ZZ".parse().unwrap();
        assert!(xx.commutes(&zz).unwrap());
        let xi: PauliString = "XI".parse().unwrap();
        assert!(!xi.commutes(&zz).unwrap());
    }

    #[test]
    fn embed_examples() {
        let p = PauliString::embed_single(PauliAxis::Z, 0, 1).unwrap();
        assert_eq!(p.to_string(), "Z");
        let p = PauliString::embed_single(PauliAxis::X, 1, 3).unwrap();
        assert_eq!(p.to_string(), "IXI");
        let p = PauliString::embed_single(PauliAxis::I, 2, 3).unwrap();
        assert!(p.is_identity_support());
        assert!(PauliString::embed_single(PauliAxis::Z, 3, 3).is_err());
    }

    #[test]
    fn y_is_hermitian_with_plus_sign() {
        let y = single(PauliAxis::Y);
        assert!(y.is_hermitian());
        assert_eq!(y.sign(), 1);
        assert_eq!(y.to_string(), "Y");
    }

    #[test]
    fn parse_rejects_imaginary_observable() {
        assert!(PauliString::parse_observable("-XZY").is_ok());
        assert!(PauliString::parse_observable("+iX").is_err());
        assert!(PauliString::parse_observable("-iZZ").is_err());
    }

    #[test]
    fn parse_display_roundtrip() {
        for s in ["XIZY", "-XIZY", "+iX", "-iZZ", "Y"] {
            let p: PauliString = s.parse().unwrap();
            assert_eq!(p.to_string(), s.replace("+i", "+i"));
        }
    }

    #[test]
    fn mismatch_is_an_error() {
        let a: PauliString = "XX".parse().unwrap();
        let b: PauliString = "X".parse().unwrap();
        assert!(a.multiply(&b).is_err());
        assert!(a.commutes(&b).is_err());
    }

    fn arb_pauli(n: usize) -> impl Strategy<Value = PauliString> {
        (proptest::collection::vec(0u8..4, n), 0u8..4).prop_map(|(axes, sign)| {
            let axes: Vec<PauliAxis> = axes
                .into_iter()
                .map(|b| match b {
                    0 => PauliAxis::I,
                    1 => PauliAxis::X,
                    2 => PauliAxis::Y,
                    _ => PauliAxis::Z,
                })
                .collect();
            PauliString::from_axes(&axes, sign)
        })
    }

    proptest! {
        #[test]
        fn multiplication_is_associative(
            a in arb_pauli(5), b in arb_pauli(5), c in arb_pauli(5)
        ) {
            let ab_c = a.multiply(&b).unwrap().multiply(&c).unwrap();
            let a_bc = a.multiply(&b.multiply(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
        }

        #[test]
        fn single_qubit_product_matches_matrix_oracle(
            a in arb_pauli(1), b in arb_pauli(1)
        ) {
            let p = a.multiply(&b).unwrap();
            let expected = matmul(&single_matrix(&a), &single_matrix(&b));
            let got = single_matrix(&p);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((expected[r][c] - got[r][c]).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn commutation_matches_phase_relation(a in arb_pauli(4), b in arb_pauli(4)) {
            let ab = a.multiply(&b).unwrap();
            let ba = b.multiply(&a).unwrap();
            let commute = a.commutes(&b).unwrap();
            prop_assert_eq!(commute, ab.phase_exp() == ba.phase_exp());
        }

        #[test]
        fn display_parse_roundtrip(a in arb_pauli(6)) {
            let s = a.to_string();
            let back: PauliString = s.parse().unwrap();
            prop_assert_eq!(a, back);
        }
    }
}
