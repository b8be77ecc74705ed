//! Exact dense reference backend for desk-scale validation (n <= 12).
//!
//! Everything here is the ground truth the fast protocol paths are checked
//! against: state construction, channels, expectations, fidelity, trace
//! distance, the exact product-state witness, projective Pauli measurement,
//! and a global direct-fidelity-estimation reference.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;

use crate::clifford::{CliffordCircuit, CliffordGate};
use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::scalar::Real;
use crate::target::{CpsTarget, SingleQubitState};

/// Hard cap on dense register width; a density matrix at 12 qubits is
/// already ~16M complex entries.
pub const DENSE_QUBIT_CAP: usize = 12;

/// Cap for the exhaustive global DFE reference (cost grows with 4^n).
pub const DFE_QUBIT_CAP: usize = 6;

pub fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::WidthCap { cap, n });
    }
    Ok(())
}

fn cx<F: Real>(re: f64, im: f64) -> Complex<F> {
    Complex::new(F::of(re), F::of(im))
}

fn i_pow<F: Real>(s: u8) -> Complex<F> {
    match s & 3 {
        0 => cx(1.0, 0.0),
        1 => cx(0.0, 1.0),
        2 => cx(-1.0, 0.0),
        _ => cx(0.0, -1.0),
    }
}

type M2x2<F> = [[Complex<F>; 2]; 2];

fn gate_matrix_1q<F: Real>(g: &CliffordGate) -> Option<M2x2<F>> {
    let o = cx(0.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match *g {
        CliffordGate::H(_) => Some([[cx(s, 0.0), cx(s, 0.0)], [cx(s, 0.0), cx(-s, 0.0)]]),
        CliffordGate::S(_) => Some([[cx(1.0, 0.0), o], [o, cx(0.0, 1.0)]]),
        CliffordGate::Sdg(_) => Some([[cx(1.0, 0.0), o], [o, cx(0.0, -1.0)]]),
        CliffordGate::X(_) => Some([[o, cx(1.0, 0.0)], [cx(1.0, 0.0), o]]),
        CliffordGate::Y(_) => Some([[o, cx(0.0, -1.0)], [cx(0.0, 1.0), o]]),
        CliffordGate::Z(_) => Some([[cx(1.0, 0.0), o], [o, cx(-1.0, 0.0)]]),
        _ => None,
    }
}

/// T = diag(1, e^{i pi/4}).
pub fn t_matrix<F: Real>() -> M2x2<F> {
    let o = cx(0.0, 0.0);
    let a = std::f64::consts::FRAC_PI_4;
    [[cx(1.0, 0.0), o], [o, cx(a.cos(), a.sin())]]
}

fn apply_1q_vec<F: Real>(amps: &mut [Complex<F>], q: usize, m: &M2x2<F>) {
    let mask = 1usize << q;
    for i in 0..amps.len() {
        if i & mask == 0 {
            let j = i | mask;
            let a = amps[i];
            let b = amps[j];
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        }
    }
}

fn apply_gate_vec<F: Real>(amps: &mut [Complex<F>], g: &CliffordGate) {
    if let Some(m) = gate_matrix_1q::<F>(g) {
        let (q, _) = g.qubits();
        apply_1q_vec(amps, q, &m);
        return;
    }
    match *g {
        CliffordGate::Cnot(c, t) => {
            let cm = 1usize << c;
            let tm = 1usize << t;
            for i in 0..amps.len() {
                if i & cm != 0 && i & tm == 0 {
                    amps.swap(i, i | tm);
                }
            }
        }
        CliffordGate::Cz(a, b) => {
            let am = 1usize << a;
            let bm = 1usize << b;
            for (i, v) in amps.iter_mut().enumerate() {
                if i & am != 0 && i & bm != 0 {
                    *v = -*v;
                }
            }
        }
        CliffordGate::Swap(a, b) => {
            let am = 1usize << a;
            let bm = 1usize << b;
            for i in 0..amps.len() {
                if i & am != 0 && i & bm == 0 {
                    amps.swap(i, (i & !am) | bm);
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Pure n-qubit state; qubit j is bit j of the basis index (little-endian).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState<F: Real> {
    n: usize,
    amps: Vec<Complex<F>>,
}

impl<F: Real> DenseState<F> {
    pub fn computational(n: usize, basis: usize) -> Result<Self> {
        check_cap(n, DENSE_QUBIT_CAP)?;
        let mut amps = vec![cx(0.0, 0.0); 1 << n];
        amps[basis] = cx(1.0, 0.0);
        Ok(DenseState { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex<F>>) -> Result<Self> {
        check_cap(n, DENSE_QUBIT_CAP)?;
        if amps.len() != 1 << n {
            return Err(Error::Config(format!(
                "expected {} amplitudes, got {}",
                1usize << n,
                amps.len()
            )));
        }
        Ok(DenseState { n, amps })
    }

    pub fn product(states: &[SingleQubitState<F>]) -> Result<Self> {
        let n = states.len();
        check_cap(n, DENSE_QUBIT_CAP)?;
        let mut amps = vec![cx::<F>(1.0, 0.0)];
        for st in states {
            let [a0, a1] = st.amplitudes();
            // earlier qubits occupy lower-order bits
            let mut next = vec![cx(0.0, 0.0); amps.len() * 2];
            for (idx, v) in amps.iter().enumerate() {
                next[idx] = *v * a0;
                next[idx + amps.len()] = *v * a1;
            }
            amps = next;
        }
        Ok(DenseState { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex<F>] {
        &self.amps
    }

    pub fn norm_sq(&self) -> F {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_circuit(&mut self, circuit: &CliffordCircuit) -> Result<()> {
        if circuit.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(circuit.num_qubits(), self.n));
        }
        for g in circuit.gates() {
            apply_gate_vec(&mut self.amps, g);
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &CliffordGate) {
        apply_gate_vec(&mut self.amps, g);
    }

    pub fn apply_t(&mut self, q: usize) {
        let m = t_matrix::<F>();
        apply_1q_vec(&mut self.amps, q, &m);
    }

    /// P |psi> with exact phase.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<Self> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(p.num_qubits(), self.n));
        }
        let xm = p.x_mask_u64() as usize;
        let zm = p.z_mask_u64() as usize;
        let ph = i_pow::<F>(p.phase_exp());
        let mut out = vec![cx(0.0, 0.0); self.amps.len()];
        for (c, v) in self.amps.iter().enumerate() {
            // X^x Z^z |c> = (-1)^{c.z} |c ^ x>
            let sgn = if ((c & zm).count_ones() & 1) == 1 {
                cx::<F>(-1.0, 0.0)
            } else {
                cx(1.0, 0.0)
            };
            out[c ^ xm] = ph * sgn * *v;
        }
        Ok(DenseState { n: self.n, amps: out })
    }

    /// <psi| P |psi>; real for Hermitian P.
    pub fn expectation(&self, p: &PauliString) -> Result<F> {
        let pv = self.apply_pauli(p)?;
        let mut acc = cx::<F>(0.0, 0.0);
        for (a, b) in self.amps.iter().zip(&pv.amps) {
            acc += a.conj() * *b;
        }
        Ok(acc.re)
    }

    pub fn inner(&self, other: &Self) -> Complex<F> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * *b)
            .sum()
    }

    /// Probability distribution of a full computational-basis measurement.
    pub fn probabilities(&self) -> Vec<F> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Project onto the `sign` eigenspace of Hermitian `p`.
    /// Returns the branch probability and the renormalized state; the state
    /// is `None` when the branch probability vanishes.
    pub fn project_pauli(&self, p: &PauliString, sign: i8) -> Result<(F, Option<Self>)> {
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.sign_exp() });
        }
        let pv = self.apply_pauli(p)?;
        let half = F::half();
        let s = if sign >= 0 { F::one() } else { -F::one() };
        let mut amps: Vec<Complex<F>> = self
            .amps
            .iter()
            .zip(&pv.amps)
            .map(|(a, b)| (*a + *b * Complex::new(s, F::zero())) * Complex::new(half, F::zero()))
            .collect();
        let prob: F = amps.iter().map(|a| a.norm_sqr()).sum();
        if prob <= F::of(1e-14) {
            return Ok((prob, None));
        }
        let inv = Complex::new(F::one() / prob.sqrt(), F::zero());
        for a in &mut amps {
            *a *= inv;
        }
        Ok((prob, Some(DenseState { n: self.n, amps })))
    }

    /// Projective measurement of a Hermitian Pauli.
    pub fn measure_pauli(&self, p: &PauliString, rng: &mut impl Rng) -> Result<(i8, Self)> {
        let e = self.expectation(p)?;
        let p_plus = ((F::one() + e) * F::half()).to64().clamp(0.0, 1.0);
        let sign: i8 = if rng.gen_bool(p_plus) { 1 } else { -1 };
        let (_, st) = self.project_pauli(p, sign)?;
        Ok((sign, st.expect("sampled branch has nonzero probability")))
    }
}

/// Density operator, row-major dim x dim.
#[derive(Clone, Debug)]
pub struct DenseDensity<F: Real> {
    n: usize,
    mat: Vec<Complex<F>>,
}

impl<F: Real> DenseDensity<F> {
    pub fn from_pure(state: &DenseState<F>) -> Self {
        let dim = state.amps.len();
        let mut mat = vec![cx(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                mat[r * dim + c] = state.amps[r] * state.amps[c].conj();
            }
        }
        DenseDensity { n: state.n, mat }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_cap(n, DENSE_QUBIT_CAP)?;
        let dim = 1usize << n;
        let mut mat = vec![cx(0.0, 0.0); dim * dim];
        let v = cx::<F>(1.0, 0.0) / Complex::new(F::of(dim as f64), F::zero());
        for r in 0..dim {
            mat[r * dim + r] = v;
        }
        Ok(DenseDensity { n, mat })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex<F> {
        self.mat[r * self.dim() + c]
    }

    pub fn trace(&self) -> Complex<F> {
        (0..self.dim()).map(|r| self.entry(r, r)).sum()
    }

    pub fn scaled(&self, w: F) -> Self {
        let c = Complex::new(w, F::zero());
        DenseDensity { n: self.n, mat: self.mat.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let mat = self.mat.iter().zip(&other.mat).map(|(a, b)| a + b).collect();
        Ok(DenseDensity { n: self.n, mat })
    }

    fn apply_1q_left(&mut self, q: usize, m: &M2x2<F>) {
        let dim = self.dim();
        let mask = 1usize << q;
        for col in 0..dim {
            for r in 0..dim {
                if r & mask == 0 {
                    let r1 = r | mask;
                    let a = self.mat[r * dim + col];
                    let b = self.mat[r1 * dim + col];
                    self.mat[r * dim + col] = m[0][0] * a + m[0][1] * b;
                    self.mat[r1 * dim + col] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
    }

    fn apply_1q_right_dag(&mut self, q: usize, m: &M2x2<F>) {
        let dim = self.dim();
        let mask = 1usize << q;
        for row in 0..dim {
            for c in 0..dim {
                if c & mask == 0 {
                    let c1 = c | mask;
                    let a = self.mat[row * dim + c];
                    let b = self.mat[row * dim + c1];
                    self.mat[row * dim + c] = a * m[0][0].conj() + b * m[0][1].conj();
                    self.mat[row * dim + c1] = a * m[1][0].conj() + b * m[1][1].conj();
                }
            }
        }
    }

    fn conjugate_gate(&mut self, g: &CliffordGate) {
        if let Some(m) = gate_matrix_1q::<F>(g) {
            let (q, _) = g.qubits();
            self.apply_1q_left(q, &m);
            self.apply_1q_right_dag(q, &m);
            return;
        }
        let dim = self.dim();
        let permute = |i: usize| -> usize {
            match *g {
                CliffordGate::Cnot(c, t) => {
                    if i & (1 << c) != 0 {
                        i ^ (1 << t)
                    } else {
                        i
                    }
                }
                CliffordGate::Swap(a, b) => {
                    let ba = (i >> a) & 1;
                    let bb = (i >> b) & 1;
                    (i & !((1 << a) | (1 << b))) | (bb << a) | (ba << b)
                }
                _ => i,
            }
        };
        match *g {
            CliffordGate::Cz(a, b) => {
                let am = 1usize << a;
                let bm = 1usize << b;
                let phase = |i: usize| i & am != 0 && i & bm != 0;
                let mut out = vec![cx::<F>(0.0, 0.0); dim * dim];
                for r in 0..dim {
                    for c in 0..dim {
                        let mut v = self.mat[r * dim + c];
                        if phase(r) != phase(c) {
                            v = -v;
                        }
                        out[r * dim + c] = v;
                    }
                }
                self.mat = out;
            }
            CliffordGate::Cnot(..) | CliffordGate::Swap(..) => {
                let mut out = vec![cx::<F>(0.0, 0.0); dim * dim];
                for r in 0..dim {
                    for c in 0..dim {
                        out[permute(r) * dim + permute(c)] = self.mat[r * dim + c];
                    }
                }
                self.mat = out;
            }
            _ => unreachable!(),
        }
    }

    /// rho -> U rho U^dagger for the whole circuit.
    pub fn apply_circuit(&mut self, circuit: &CliffordCircuit) -> Result<()> {
        if circuit.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(circuit.num_qubits(), self.n));
        }
        for g in circuit.gates() {
            self.conjugate_gate(g);
        }
        Ok(())
    }

    /// P rho (left product).
    fn pauli_left(&self, p: &PauliString) -> Vec<Complex<F>> {
        let dim = self.dim();
        let xm = p.x_mask_u64() as usize;
        let zm = p.z_mask_u64() as usize;
        let ph = i_pow::<F>(p.phase_exp());
        let f = |c: usize| -> Complex<F> {
            if ((c & zm).count_ones() & 1) == 1 {
                -ph
            } else {
                ph
            }
        };
        let mut out = vec![cx(0.0, 0.0); dim * dim];
        for r in 0..dim {
            let src = r ^ xm;
            let coeff = f(src);
            for c in 0..dim {
                out[r * dim + c] = coeff * self.mat[src * dim + c];
            }
        }
        out
    }

    /// rho P (right product).
    fn pauli_right(&self, p: &PauliString) -> Vec<Complex<F>> {
        let dim = self.dim();
        let xm = p.x_mask_u64() as usize;
        let zm = p.z_mask_u64() as usize;
        let ph = i_pow::<F>(p.phase_exp());
        let f = |c: usize| -> Complex<F> {
            if ((c & zm).count_ones() & 1) == 1 {
                -ph
            } else {
                ph
            }
        };
        let mut out = vec![cx(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                out[r * dim + c] = self.mat[r * dim + (c ^ xm)] * f(c);
            }
        }
        out
    }

    /// P rho P^dagger for Hermitian P.
    pub fn conjugate_pauli(&self, p: &PauliString) -> Result<Self> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(p.num_qubits(), self.n));
        }
        let mut tmp = DenseDensity { n: self.n, mat: self.pauli_left(p) };
        tmp.mat = tmp.pauli_right(p);
        // P rho P: for Hermitian P this equals P rho P^dagger.
        Ok(tmp)
    }

    /// Tr[rho P]; real for Hermitian P.
    pub fn expectation(&self, p: &PauliString) -> Result<F> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch(p.num_qubits(), self.n));
        }
        let dim = self.dim();
        let xm = p.x_mask_u64() as usize;
        let zm = p.z_mask_u64() as usize;
        let ph = i_pow::<F>(p.phase_exp());
        let mut acc = cx::<F>(0.0, 0.0);
        for c in 0..dim {
            let coeff = if ((c & zm).count_ones() & 1) == 1 { -ph } else { ph };
            acc += coeff * self.mat[c * dim + (c ^ xm)];
        }
        Ok(acc.re)
    }

    /// <psi| rho |psi>.
    pub fn fidelity(&self, psi: &DenseState<F>) -> Result<F> {
        if psi.n != self.n {
            return Err(Error::DimensionMismatch(psi.n, self.n));
        }
        let dim = self.dim();
        let mut acc = cx::<F>(0.0, 0.0);
        for r in 0..dim {
            for c in 0..dim {
                acc += psi.amps[r].conj() * self.mat[r * dim + c] * psi.amps[c];
            }
        }
        Ok(acc.re)
    }

    pub fn to_dmatrix(&self) -> DMatrix<Complex<F>> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |r, c| self.mat[r * dim + c])
    }

    /// Eigenvalues of the Hermitian operator, ascending not guaranteed.
    pub fn eigenvalues(&self) -> Vec<F> {
        self.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    /// Hermitian, unit trace, eigenvalues >= -1e-9 (scaled for f32).
    pub fn is_valid_density(&self) -> bool {
        let dim = self.dim();
        let tol = F::norm_tol();
        if (self.trace().re - F::one()).abs() > tol || self.trace().im.abs() > tol {
            return false;
        }
        for r in 0..dim {
            for c in 0..dim {
                if (self.mat[r * dim + c] - self.mat[c * dim + r].conj()).norm_sqr() > tol * tol {
                    return false;
                }
            }
        }
        self.eigenvalues().iter().all(|&e| e >= -tol)
    }

    /// Single-qubit reduced density matrix of qubit `i`.
    pub fn reduced_qubit(&self, i: usize) -> Result<M2x2<F>> {
        if i >= self.n {
            return Err(Error::QubitOutOfRange { index: i, n: self.n });
        }
        let dim = self.dim();
        let mask = 1usize << i;
        let mut out = [[cx::<F>(0.0, 0.0); 2]; 2];
        for rest in 0..dim {
            if rest & mask != 0 {
                continue;
            }
            for a in 0..2 {
                for b in 0..2 {
                    let r = rest | (a << i);
                    let c = rest | (b << i);
                    out[a][b] += self.mat[r * dim + c];
                }
            }
        }
        Ok(out)
    }

    /// Project onto the `sign` eigenspace of Hermitian `p`, renormalized.
    pub fn project_pauli(&self, p: &PauliString, sign: i8) -> Result<(F, Option<Self>)> {
        if !p.is_hermitian() {
            return Err(Error::NonHermitian { phase: p.sign_exp() });
        }
        let dim = self.dim();
        let s = if sign >= 0 { F::one() } else { -F::one() };
        let sc = Complex::new(s, F::zero());
        let half = Complex::new(F::half(), F::zero());
        // Pi rho Pi with Pi = (I + s P)/2
        let pl = self.pauli_left(p);
        let mut half_rho = DenseDensity { n: self.n, mat: vec![cx(0.0, 0.0); dim * dim] };
        for k in 0..dim * dim {
            half_rho.mat[k] = (self.mat[k] + sc * pl[k]) * half;
        }
        let pr = half_rho.pauli_right(p);
        let mut out = DenseDensity { n: self.n, mat: vec![cx(0.0, 0.0); dim * dim] };
        for k in 0..dim * dim {
            out.mat[k] = (half_rho.mat[k] + sc * pr[k]) * half;
        }
        let prob = out.trace().re;
        if prob <= F::of(1e-14) {
            return Ok((prob, None));
        }
        let inv = Complex::new(F::one() / prob, F::zero());
        for v in &mut out.mat {
            *v *= inv;
        }
        Ok((prob, Some(out)))
    }

    pub fn measure_pauli(&self, p: &PauliString, rng: &mut impl Rng) -> Result<(i8, Self)> {
        let e = self.expectation(p)?;
        let p_plus = ((F::one() + e) * F::half()).to64().clamp(0.0, 1.0);
        let sign: i8 = if rng.gen_bool(p_plus) { 1 } else { -1 };
        let (_, rho) = self.project_pauli(p, sign)?;
        Ok((sign, rho.expect("sampled branch has nonzero probability")))
    }

    pub fn apply_channel(&mut self, ch: &Channel<F>) -> Result<()> {
        match ch {
            Channel::Depolarizing { qubit, p } => {
                let p = *p;
                self.apply_kraus_1q(
                    *qubit,
                    &[
                        scale_m2(&ident_m2(), (F::one() - F::of(0.75) * p).sqrt()),
                        scale_m2(&pauli_m2(PauliAxis::X), (p * F::of(0.25)).sqrt()),
                        scale_m2(&pauli_m2(PauliAxis::Y), (p * F::of(0.25)).sqrt()),
                        scale_m2(&pauli_m2(PauliAxis::Z), (p * F::of(0.25)).sqrt()),
                    ],
                )
            }
            Channel::Dephasing { qubit, p } => {
                let p = *p;
                self.apply_kraus_1q(
                    *qubit,
                    &[
                        scale_m2(&ident_m2(), (F::one() - p).sqrt()),
                        scale_m2(&pauli_m2(PauliAxis::Z), p.sqrt()),
                    ],
                )
            }
            Channel::AmplitudeDamping { qubit, gamma } => {
                let g = *gamma;
                let o = cx(0.0, 0.0);
                let k0 = [
                    [cx(1.0, 0.0), o],
                    [o, Complex::new((F::one() - g).sqrt(), F::zero())],
                ];
                let k1 = [[o, Complex::new(g.sqrt(), F::zero())], [o, o]];
                self.apply_kraus_1q(*qubit, &[k0, k1])
            }
            Channel::Rotation { qubit, axis, angle } => {
                let half = *angle * F::half();
                let (c, s) = (half.cos(), half.sin());
                // exp(-i angle/2 sigma_axis)
                let sig = pauli_m2::<F>(*axis);
                let mut u = [[cx::<F>(0.0, 0.0); 2]; 2];
                for r in 0..2 {
                    for cc in 0..2 {
                        let idm = if r == cc { F::one() } else { F::zero() };
                        u[r][cc] = Complex::new(c * idm, F::zero())
                            - Complex::new(F::zero(), s) * sig[r][cc];
                    }
                }
                self.apply_kraus_1q(*qubit, &[u])
            }
            Channel::Pauli(terms) => {
                let mut total = F::zero();
                let mut acc = self.clone();
                for v in &mut acc.mat {
                    *v = cx(0.0, 0.0);
                }
                for (p, prob) in terms {
                    total += *prob;
                    let conj = self.conjugate_pauli(p)?;
                    let w = Complex::new(*prob, F::zero());
                    for (a, b) in acc.mat.iter_mut().zip(&conj.mat) {
                        *a += w * *b;
                    }
                }
                if total > F::one() + F::norm_tol() {
                    return Err(Error::Config("Pauli channel probabilities exceed 1".into()));
                }
                let keep = Complex::new(F::one() - total, F::zero());
                for (a, b) in acc.mat.iter_mut().zip(&self.mat) {
                    *a += keep * *b;
                }
                self.mat = acc.mat;
                Ok(())
            }
        }
    }

    fn apply_kraus_1q(&mut self, q: usize, kraus: &[M2x2<F>]) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        let mut acc = vec![cx::<F>(0.0, 0.0); self.mat.len()];
        for k in kraus {
            let mut tmp = self.clone();
            tmp.apply_1q_left(q, k);
            tmp.apply_1q_right_dag(q, k);
            for (a, b) in acc.iter_mut().zip(&tmp.mat) {
                *a += *b;
            }
        }
        self.mat = acc;
        Ok(())
    }
}

fn ident_m2<F: Real>() -> M2x2<F> {
    [[cx(1.0, 0.0), cx(0.0, 0.0)], [cx(0.0, 0.0), cx(1.0, 0.0)]]
}

/// 2x2 matrix of a single-qubit Pauli axis.
pub fn pauli_m2<F: Real>(a: PauliAxis) -> M2x2<F> {
    let o = cx(0.0, 0.0);
    match a {
        PauliAxis::I => ident_m2(),
        PauliAxis::X => [[o, cx(1.0, 0.0)], [cx(1.0, 0.0), o]],
        PauliAxis::Y => [[o, cx(0.0, -1.0)], [cx(0.0, 1.0), o]],
        PauliAxis::Z => [[cx(1.0, 0.0), o], [o, cx(-1.0, 0.0)]],
    }
}

fn scale_m2<F: Real>(m: &M2x2<F>, s: F) -> M2x2<F> {
    let sc = Complex::new(s, F::zero());
    [[m[0][0] * sc, m[0][1] * sc], [m[1][0] * sc, m[1][1] * sc]]
}

/// Quantum channels for the simulated prover.
#[derive(Clone, Debug)]
pub enum Channel<F: Real> {
    Depolarizing { qubit: usize, p: F },
    Dephasing { qubit: usize, p: F },
    AmplitudeDamping { qubit: usize, gamma: F },
    Rotation { qubit: usize, axis: PauliAxis, angle: F },
    Pauli(Vec<(PauliString, F)>),
}

/// Amplitude vector of C applied to the product state.
pub fn build_cps_dense<F: Real>(target: &CpsTarget<F>) -> Result<DenseState<F>> {
    let mut st = DenseState::product(target.states())?;
    st.apply_circuit(target.circuit())?;
    Ok(st)
}

/// Full unitary of a Clifford circuit, column by column.
pub fn circuit_unitary<F: Real>(circuit: &CliffordCircuit) -> Result<DMatrix<Complex<F>>> {
    let n = circuit.num_qubits();
    check_cap(n, DENSE_QUBIT_CAP)?;
    let dim = 1usize << n;
    let mut u = DMatrix::from_element(dim, dim, cx::<F>(0.0, 0.0));
    for col in 0..dim {
        let mut st = DenseState::<F>::computational(n, col)?;
        st.apply_circuit(circuit)?;
        for r in 0..dim {
            u[(r, col)] = st.amps[r];
        }
    }
    Ok(u)
}

/// Dense matrix of an n-qubit Pauli string.
pub fn pauli_matrix<F: Real>(p: &PauliString) -> Result<DMatrix<Complex<F>>> {
    let n = p.num_qubits();
    check_cap(n, DENSE_QUBIT_CAP)?;
    let dim = 1usize << n;
    let xm = p.x_mask_u64() as usize;
    let zm = p.z_mask_u64() as usize;
    let ph = i_pow::<F>(p.phase_exp());
    let mut m = DMatrix::from_element(dim, dim, cx::<F>(0.0, 0.0));
    for c in 0..dim {
        let coeff = if ((c & zm).count_ones() & 1) == 1 { -ph } else { ph };
        m[(c ^ xm, c)] = coeff;
    }
    Ok(m)
}

/// D(rho, sigma) = half the sum of |eigenvalues| of rho - sigma.
pub fn trace_distance<F: Real>(rho: &DenseDensity<F>, sigma: &DenseDensity<F>) -> Result<F> {
    if rho.n != sigma.n {
        return Err(Error::DimensionMismatch(rho.n, sigma.n));
    }
    let diff = rho.to_dmatrix() - sigma.to_dmatrix();
    let eig = diff.symmetric_eigen();
    Ok(eig.eigenvalues.iter().map(|e| e.abs()).sum::<F>() * F::half())
}

/// Exact product-state fidelity witness: 1 - sum_i (1 - F_i) computed on
/// the single-qubit reductions of C^dagger rho C.
pub fn exact_witness<F: Real>(rho: &DenseDensity<F>, target: &CpsTarget<F>) -> Result<F> {
    if rho.n != target.num_qubits() {
        return Err(Error::DimensionMismatch(rho.n, target.num_qubits()));
    }
    let mut back = rho.clone();
    back.apply_circuit(&target.circuit().inverted())?;
    let mut w = F::one();
    for (i, st) in target.states().iter().enumerate() {
        let red = back.reduced_qubit(i)?;
        let [a0, a1] = st.amplitudes();
        let mut f = cx::<F>(0.0, 0.0);
        let amp = [a0, a1];
        for r in 0..2 {
            for c in 0..2 {
                f += amp[r].conj() * red[r][c] * amp[c];
            }
        }
        w -= F::one() - f.re;
    }
    Ok(w)
}

/// Global direct fidelity estimation at small n: importance-samples the full
/// 4^n Pauli set proportionally to |chi| and averages signed single-shot
/// outcomes drawn from `rho`.
///
/// Returns the estimate together with the number of samples used.
pub fn dfe_global<F: Real>(
    psi: &DenseState<F>,
    rho: &DenseDensity<F>,
    epsilon: F,
    delta: F,
    rng: &mut impl Rng,
) -> Result<(F, usize)> {
    let n = psi.n;
    check_cap(n, DFE_QUBIT_CAP)?;
    if rho.n != n {
        return Err(Error::DimensionMismatch(rho.n, n));
    }
    let d = F::of((1usize << n) as f64);
    // chi(P) = <psi|P|psi> / d over all Hermitian sign-+1 strings.
    let mut support: Vec<(PauliString, F, F)> = Vec::new(); // (P, |chi|, sgn)
    let mut l1 = F::zero();
    for xm in 0..(1u64 << n) {
        for zm in 0..(1u64 << n) {
            if xm == 0 && zm == 0 {
                continue;
            }
            let mut p = PauliString::identity(n);
            for j in 0..n {
                p.set_bit_x(j, (xm >> j) & 1 == 1);
                p.set_bit_z(j, (zm >> j) & 1 == 1);
            }
            p.add_phase(((xm & zm).count_ones() % 4) as u8); // Hermitian, sign +1
            let chi = psi.expectation(&p)? / d;
            if chi.abs() > F::of(1e-12) {
                l1 += chi.abs();
                support.push((p, chi.abs(), if chi > F::zero() { F::one() } else { -F::one() }));
            }
        }
    }
    // cumulative table over D_psi(P) = |chi|/l1
    let mut cum = Vec::with_capacity(support.len());
    let mut acc = F::zero();
    for (_, w, _) in &support {
        acc += *w / l1;
        cum.push(acc);
    }
    // Two-sided Hoeffding with range 2*l1 on the signed estimator.
    let range = F::of(2.0) * l1;
    let nsamp = ((range * range * (F::of(2.0) / delta).ln())
        / (F::of(2.0) * epsilon * epsilon))
        .to64()
        .ceil()
        .max(1.0) as usize;
    let mut total = F::zero();
    for _ in 0..nsamp {
        let u = F::of(rng.gen::<f64>());
        let idx = match cum.iter().position(|&c| u < c) {
            Some(i) => i,
            None => support.len() - 1,
        };
        let (p, _, sgn) = &support[idx];
        let e = rho.expectation(p)?;
        let p_plus = ((F::one() + e) * F::half()).to64().clamp(0.0, 1.0);
        let x = if rng.gen_bool(p_plus) { F::one() } else { -F::one() };
        total += *sgn * x;
    }
    let mean = total / F::of(nsamp as f64);
    Ok((F::one() / d + l1 * mean, nsamp))
}
