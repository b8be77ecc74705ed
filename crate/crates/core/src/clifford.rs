//! Clifford circuits and symplectic tableaus.
//!
//! A tableau stores the conjugated images of the 2n generators X_1..X_n,
//! Z_1..Z_n. Conjugating an arbitrary Pauli is generator-image composition,
//! O(weight * n) per query, which suits protocols that query many Paulis
//! against one fixed circuit.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Cnot(usize, usize),
    Cz(usize, usize),
    Swap(usize, usize),
}

impl CliffordGate {
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            CliffordGate::H(q)
            | CliffordGate::S(q)
            | CliffordGate::Sdg(q)
            | CliffordGate::X(q)
            | CliffordGate::Y(q)
            | CliffordGate::Z(q) => (q, None),
            CliffordGate::Cnot(a, b) | CliffordGate::Cz(a, b) | CliffordGate::Swap(a, b) => {
                (a, Some(b))
            }
        }
    }

    pub fn max_index(&self) -> usize {
        let (a, b) = self.qubits();
        b.map_or(a, |b| a.max(b))
    }

    pub fn inverse(&self) -> CliffordGate {
        match *self {
            CliffordGate::S(q) => CliffordGate::Sdg(q),
            CliffordGate::Sdg(q) => CliffordGate::S(q),
            g => g,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let (a, b) = self.qubits();
        if a >= n {
            return Err(Error::QubitOutOfRange { index: a, n });
        }
        if let Some(b) = b {
            if b >= n {
                return Err(Error::QubitOutOfRange { index: b, n });
            }
            if a == b {
                return Err(Error::Config(format!(
                    "two-qubit gate with identical indices {a}"
                )));
            }
        }
        Ok(())
    }

    /// Conjugate `p` in place by this gate: p -> g p g^dagger.
    pub fn conjugate_pauli(&self, p: &mut PauliString) {
        match *self {
            CliffordGate::H(q) => {
                let xb = p.x_bit(q);
                let zb = p.z_bit(q);
                if xb && zb {
                    p.add_phase(2);
                }
                p.set_bit_x(q, zb);
                p.set_bit_z(q, xb);
            }
            CliffordGate::S(q) => {
                if p.x_bit(q) {
                    p.add_phase(1);
                    p.set_bit_z(q, !p.z_bit(q));
                }
            }
            CliffordGate::Sdg(q) => {
                if p.x_bit(q) {
                    p.add_phase(3);
                    p.set_bit_z(q, !p.z_bit(q));
                }
            }
            CliffordGate::X(q) => {
                if p.z_bit(q) {
                    p.add_phase(2);
                }
            }
            CliffordGate::Y(q) => {
                if p.x_bit(q) != p.z_bit(q) {
                    p.add_phase(2);
                }
            }
            CliffordGate::Z(q) => {
                if p.x_bit(q) {
                    p.add_phase(2);
                }
            }
            CliffordGate::Cnot(c, t) => {
                if p.x_bit(c) {
                    p.set_bit_x(t, !p.x_bit(t));
                }
                if p.z_bit(t) {
                    p.set_bit_z(c, !p.z_bit(c));
                }
            }
            CliffordGate::Cz(a, b) => {
                if p.x_bit(a) && p.x_bit(b) {
                    p.add_phase(2);
                }
                if p.x_bit(b) {
                    p.set_bit_z(a, !p.z_bit(a));
                }
                if p.x_bit(a) {
                    p.set_bit_z(b, !p.z_bit(b));
                }
            }
            CliffordGate::Swap(a, b) => {
                let (xa, za) = (p.x_bit(a), p.z_bit(a));
                let (xb, zb) = (p.x_bit(b), p.z_bit(b));
                p.set_bit_x(a, xb);
                p.set_bit_z(a, zb);
                p.set_bit_x(b, xa);
                p.set_bit_z(b, za);
            }
        }
    }
}

impl fmt::Display for CliffordGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CliffordGate::H(q) => write!(f, "H {q}"),
            CliffordGate::S(q) => write!(f, "S {q}"),
            CliffordGate::Sdg(q) => write!(f, "SDG {q}"),
            CliffordGate::X(q) => write!(f, "X {q}"),
            CliffordGate::Y(q) => write!(f, "Y {q}"),
            CliffordGate::Z(q) => write!(f, "Z {q}"),
            CliffordGate::Cnot(a, b) => write!(f, "CNOT {a} {b}"),
            CliffordGate::Cz(a, b) => write!(f, "CZ {a} {b}"),
            CliffordGate::Swap(a, b) => write!(f, "SWAP {a} {b}"),
        }
    }
}

/// Parse one gate mnemonic line; shared with the Clifford+T parser.
pub(crate) fn parse_clifford_gate(parts: &[&str]) -> Option<std::result::Result<CliffordGate, String>> {
    let idx = |s: &str| -> std::result::Result<usize, String> {
        s.parse::<usize>().map_err(|_| format!("bad qubit index '{s}'"))
    };
    let one = |mk: fn(usize) -> CliffordGate, parts: &[&str]| {
        if parts.len() != 2 {
            return Err(format!("expected one index after {}", parts[0]));
        }
        idx(parts[1]).map(mk)
    };
    let two = |mk: fn(usize, usize) -> CliffordGate, parts: &[&str]| {
        if parts.len() != 3 {
            return Err(format!("expected two indices after {}", parts[0]));
        }
        Ok(mk(idx(parts[1])?, idx(parts[2])?))
    };
    let mnemonic = parts[0].to_ascii_uppercase();
    Some(match mnemonic.as_str() {
        "H" => one(CliffordGate::H, parts),
        "S" => one(CliffordGate::S, parts),
        "SDG" => one(CliffordGate::Sdg, parts),
        "X" => one(CliffordGate::X, parts),
        "Y" => one(CliffordGate::Y, parts),
        "Z" => one(CliffordGate::Z, parts),
        "CNOT" | "CX" => two(CliffordGate::Cnot, parts),
        "CZ" => two(CliffordGate::Cz, parts),
        "SWAP" => two(CliffordGate::Swap, parts),
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliffordCircuit {
    n: usize,
    gates: Vec<CliffordGate>,
}

impl CliffordCircuit {
    pub fn new(n: usize, gates: Vec<CliffordGate>) -> Result<Self> {
        for g in &gates {
            g.validate(n)?;
        }
        Ok(CliffordCircuit { n, gates })
    }

    pub fn empty(n: usize) -> Self {
        CliffordCircuit { n, gates: Vec::new() }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[CliffordGate] {
        &self.gates
    }

    /// Same gate list acting on a wider register.
    pub fn widened(&self, n: usize) -> Result<Self> {
        if n < self.n {
            return Err(Error::Config(format!(
                "cannot shrink circuit from {} to {n} qubits",
                self.n
            )));
        }
        CliffordCircuit::new(n, self.gates.clone())
    }

    /// Gate-by-gate inverse circuit.
    pub fn inverted(&self) -> Self {
        CliffordCircuit {
            n: self.n,
            gates: self.gates.iter().rev().map(CliffordGate::inverse).collect(),
        }
    }

    /// Circuit text format: one gate per line, `#` comments, optional
    /// leading `QUBITS n` header; width otherwise inferred as 1 + max index.
    pub fn parse(text: &str) -> Result<Self> {
        let mut declared: Option<usize> = None;
        let mut gates = Vec::new();
        let mut seen_gate = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let up = parts[0].to_ascii_uppercase();
            if up == "QUBITS" {
                if seen_gate || declared.is_some() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "QUBITS must be the first non-comment line".into(),
                    });
                }
                let n = parts
                    .get(1)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        msg: "expected QUBITS <n>".into(),
                    })?;
                declared = Some(n);
                continue;
            }
            match parse_clifford_gate(&parts) {
                Some(Ok(g)) => {
                    seen_gate = true;
                    gates.push(g);
                }
                Some(Err(msg)) => {
                    return Err(Error::Parse { line: lineno + 1, msg });
                }
                None => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("unknown gate '{}'", parts[0]),
                    });
                }
            }
        }
        let inferred = gates.iter().map(CliffordGate::max_index).max().map_or(0, |m| m + 1);
        let n = match declared {
            Some(n) => n,
            None => inferred,
        };
        CliffordCircuit::new(n, gates)
    }

    /// Uniformly random gate sequence; diversity fixture, not Haar-uniform.
    pub fn random(n: usize, depth: usize, rng: &mut impl Rng) -> Self {
        assert!(n >= 1);
        let mut gates = Vec::with_capacity(depth);
        for _ in 0..depth {
            let kinds = if n >= 2 { 9 } else { 6 };
            let q = rng.gen_range(0..n);
            let g = match rng.gen_range(0..kinds) {
                0 => CliffordGate::H(q),
                1 => CliffordGate::S(q),
                2 => CliffordGate::Sdg(q),
                3 => CliffordGate::X(q),
                4 => CliffordGate::Y(q),
                5 => CliffordGate::Z(q),
                k => {
                    let mut r = rng.gen_range(0..n - 1);
                    if r >= q {
                        r += 1;
                    }
                    match k {
                        6 => CliffordGate::Cnot(q, r),
                        7 => CliffordGate::Cz(q, r),
                        _ => CliffordGate::Swap(q, r),
                    }
                }
            };
            gates.push(g);
        }
        CliffordCircuit { n, gates }
    }
}

impl fmt::Display for CliffordCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "QUBITS {}", self.n)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Symplectic tableau: images of the 2n generators under conjugation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordTableau {
    n: usize,
    /// Rows 0..n are images of X_j, rows n..2n images of Z_j.
    rows: Vec<PauliString>,
}

impl CliffordTableau {
    pub fn identity(n: usize) -> Self {
        let mut rows = Vec::with_capacity(2 * n);
        for j in 0..n {
            rows.push(PauliString::embed_single(crate::pauli::PauliAxis::X, j, n).unwrap());
        }
        for j in 0..n {
            rows.push(PauliString::embed_single(crate::pauli::PauliAxis::Z, j, n).unwrap());
        }
        CliffordTableau { n, rows }
    }

    pub fn from_circuit(circuit: &CliffordCircuit) -> Self {
        let mut t = CliffordTableau::identity(circuit.num_qubits());
        for g in circuit.gates() {
            for row in &mut t.rows {
                g.conjugate_pauli(row);
            }
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_image(&self, j: usize) -> &PauliString {
        &self.rows[j]
    }

    pub fn z_image(&self, j: usize) -> &PauliString {
        &self.rows[self.n + j]
    }

    pub fn is_identity(&self) -> bool {
        *self == CliffordTableau::identity(self.n)
    }

    /// C P C^dagger by generator-image composition, exact phase.
    /// Accepts any phase; linearity carries imaginary phases through.
    pub fn conjugate(&self, p: &PauliString) -> Result<PauliString> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(p.num_qubits(), self.n));
        }
        let mut acc = PauliString::identity(self.n);
        acc.add_phase(p.phase_exp());
        for j in 0..self.n {
            if p.x_bit(j) {
                acc.multiply_assign(&self.rows[j]);
            }
        }
        for j in 0..self.n {
            if p.z_bit(j) {
                acc.multiply_assign(&self.rows[self.n + j]);
            }
        }
        Ok(acc)
    }

    /// C^dagger P C. Round-trips with `conjugate`.
    pub fn conjugate_inverse(&self, p: &PauliString) -> Result<PauliString> {
        self.inverse().conjugate(p)
    }

    /// Acts as "apply `b`, then `a`".
    pub fn compose(a: &CliffordTableau, b: &CliffordTableau) -> Result<CliffordTableau> {
        if a.n != b.n {
            return Err(Error::DimensionMismatch(a.n, b.n));
        }
        let rows = b
            .rows
            .iter()
            .map(|r| a.conjugate(r).expect("widths match"))
            .collect();
        Ok(CliffordTableau { n: a.n, rows })
    }

    /// Tableau of the inverse Clifford.
    ///
    /// Bits come from the symplectic inverse J M^T J; signs are fixed by
    /// pushing each candidate row back through `self`.
    pub fn inverse(&self) -> CliffordTableau {
        let n = self.n;
        let two_n = 2 * n;
        // bit(r, l): l-th symplectic bit (x for l < n, z for l >= n) of row r.
        let bit = |r: usize, l: usize| -> bool {
            if l < n {
                self.rows[r].x_bit(l)
            } else {
                self.rows[r].z_bit(l - n)
            }
        };
        let mut rows = Vec::with_capacity(two_n);
        for k in 0..two_n {
            let mut cand = PauliString::identity(n);
            for l in 0..two_n {
                // (J M^T J)[k][l] = M[(l+n) mod 2n][(k+n) mod 2n]
                if bit((l + n) % two_n, (k + n) % two_n) {
                    if l < n {
                        cand.set_bit_x(l, true);
                    } else {
                        cand.set_bit_z(l - n, true);
                    }
                }
            }
            // Normalize phase so the candidate sign starts at +1.
            let adjust = (4 - cand.sign_exp()) & 3;
            cand.add_phase(adjust);
            // Conjugating the candidate by self must give back generator k.
            let image = self.conjugate(&cand).expect("widths match");
            let generator = &CliffordTableau::identity(n).rows[k];
            debug_assert!(image.same_support(generator));
            let delta = (4 + generator.phase_exp() - image.phase_exp()) & 3;
            cand.add_phase(delta);
            rows.push(cand);
        }
        CliffordTableau { n, rows }
    }

    /// Check the symplectic condition on all generator-image pairs.
    pub fn is_symplectic_valid(&self) -> bool {
        let n = self.n;
        for j in 0..n {
            for k in 0..n {
                let xx = self.x_image(j).commutes(self.x_image(k)).unwrap();
                let zz = self.z_image(j).commutes(self.z_image(k)).unwrap();
                let xz = self.x_image(j).commutes(self.z_image(k)).unwrap();
                if !xx || !zz || xz != (j != k) {
                    return false;
                }
            }
        }
        self.rows.iter().all(|r| r.is_hermitian())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliAxis;
    use crate::seed::rng_from;

    fn tab(text: &str) -> CliffordTableau {
        CliffordTableau::from_circuit(&CliffordCircuit::parse(text).unwrap())
    }

    #[test]
    fn empty_circuit_gives_identity_tableau() {
        let c = CliffordCircuit::parse("QUBITS 3").unwrap();
        let t = CliffordTableau::from_circuit(&c);
        assert!(t.is_identity());
    }

    #[test]
    fn hadamard_exchanges_x_and_z() {
        let t = tab("H 0");
        assert_eq!(t.conjugate(&"X".parse().unwrap()).unwrap().to_string(), "Z");
        assert_eq!(t.conjugate(&"Z".parse().unwrap()).unwrap().to_string(), "X");
        assert_eq!(t.conjugate(&"Y".parse().unwrap()).unwrap().to_string(), "-Y");
    }

    #[test]
    fn s_maps_x_to_y() {
        let t = tab("S 0");
        assert_eq!(t.conjugate(&"X".parse().unwrap()).unwrap().to_string(), "Y");
        assert_eq!(t.conjugate(&"Y".parse().unwrap()).unwrap().to_string(), "-X");
        assert_eq!(t.conjugate(&"Z".parse().unwrap()).unwrap().to_string(), "Z");
    }

    #[test]
    fn cz_propagates_x() {
        let t = tab("QUBITS 2\nCZ 0 1");
        assert_eq!(
            t.conjugate(&"XI".parse().unwrap()).unwrap().to_string(),
            "XZ"
        );
    }

    #[test]
    fn cnot_propagation() {
        let t = tab("QUBITS 2\nCNOT 0 1");
        assert_eq!(t.conjugate(&"XI".parse().unwrap()).unwrap().to_string(), "XX");
        assert_eq!(t.conjugate(&"IZ".parse().unwrap()).unwrap().to_string(), "ZZ");
        assert_eq!(t.conjugate(&"YY".parse().unwrap()).unwrap().to_string(), "-XZ");
    }

    #[test]
    fn inverse_of_hadamard_is_hadamard() {
        let t = tab("H 0");
        assert_eq!(t.inverse(), t);
    }

    #[test]
    fn compose_with_identity() {
        let t = tab("QUBITS 2\nH 0\nCNOT 0 1\nS 1");
        let id = CliffordTableau::identity(2);
        assert_eq!(CliffordTableau::compose(&id, &t).unwrap(), t);
        assert_eq!(CliffordTableau::compose(&t, &id).unwrap(), t);
    }

    #[test]
    fn compose_order_is_b_then_a() {
        // apply H then S on one qubit: S H X H^ S^ = S Z S^ = Z;
        // the full circuit [H 0, S 0] must match compose(T_S, T_H).
        let th = tab("H 0");
        let ts = tab("S 0");
        let both = tab("H 0\nS 0");
        assert_eq!(CliffordTableau::compose(&ts, &th).unwrap(), both);
    }

    #[test]
    fn random_tableau_roundtrip_and_validity() {
        for seed in 0..20u64 {
            let mut rng = rng_from(seed);
            let n = 1 + (seed as usize % 5);
            let c = CliffordCircuit::random(n, 30, &mut rng);
            let t = CliffordTableau::from_circuit(&c);
            assert!(t.is_symplectic_valid());
            let inv = t.inverse();
            assert!(CliffordTableau::compose(&t, &inv).unwrap().is_identity());
            // round-trip random Paulis
            for k in 0..50 {
                let p = random_hermitian_pauli(n, &mut rng, k);
                let back = t.conjugate_inverse(&t.conjugate(&p).unwrap()).unwrap();
                assert_eq!(back, p);
            }
        }
    }

    fn random_hermitian_pauli(n: usize, rng: &mut impl rand::Rng, _k: u64) -> PauliString {
        let axes: Vec<PauliAxis> = (0..n)
            .map(|_| match rng.gen_range(0..4) {
                0 => PauliAxis::I,
                1 => PauliAxis::X,
                2 => PauliAxis::Y,
                _ => PauliAxis::Z,
            })
            .collect();
        let sign = if rng.gen_bool(0.5) { 0 } else { 2 };
        PauliString::from_axes(&axes, sign)
    }

    #[test]
    fn homomorphism_and_commutation_preservation() {
        let mut rng = rng_from(99);
        for _ in 0..50 {
            let n = 1 + rng.gen_range(0..5);
            let c = CliffordCircuit::random(n, 25, &mut rng);
            let t = CliffordTableau::from_circuit(&c);
            let p = random_hermitian_pauli(n, &mut rng, 0);
            let q = random_hermitian_pauli(n, &mut rng, 1);
            let lhs = t.conjugate(&p.multiply(&q).unwrap()).unwrap();
            let rhs = t
                .conjugate(&p)
                .unwrap()
                .multiply(&t.conjugate(&q).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
            assert_eq!(
                p.commutes(&q).unwrap(),
                t.conjugate(&p).unwrap().commutes(&t.conjugate(&q).unwrap()).unwrap()
            );
        }
    }

    #[test]
    fn random_circuit_is_deterministic_under_seed() {
        let a = CliffordCircuit::random(4, 40, &mut rng_from(5));
        let b = CliffordCircuit::random(4, 40, &mut rng_from(5));
        assert_eq!(a, b);
        let empty = CliffordCircuit::random(3, 0, &mut rng_from(5));
        assert!(empty.gates().is_empty());
    }

    #[test]
    fn parser_errors_and_inference() {
        let c = CliffordCircuit::parse("# comment\nH 0\nCNOT 0 3\n").unwrap();
        assert_eq!(c.num_qubits(), 4);
        assert!(CliffordCircuit::parse("FOO 1").is_err());
        assert!(CliffordCircuit::parse("CNOT 1 1").is_err());
        assert!(CliffordCircuit::parse("QUBITS 2\nH 5").is_err());
        assert!(CliffordCircuit::parse("H 0\nQUBITS 2").is_err());
        // case-insensitive mnemonics
        let c = CliffordCircuit::parse("qubits 2\nh 0\ncnot 0 1\nsdg 1").unwrap();
        assert_eq!(c.gates().len(), 3);
    }

    #[test]
    fn circuit_display_parse_roundtrip() {
        let c = CliffordCircuit::parse("QUBITS 3\nH 0\nS 2\nSDG 2\nCNOT 0 1\nCZ 1 2\nSWAP 0 2").unwrap();
        let back = CliffordCircuit::parse(&c.to_string()).unwrap();
        assert_eq!(c, back);
    }
}
