//! CPS target descriptions: single-qubit states, characteristic weights,
//! sampling plans and back-propagated measurement settings.
//!
//! Normalization convention: chi(P) = Tr[|psi><psi| P] / 2 per qubit, so the
//! expansion |psi><psi| = sum_P chi(P) P holds exactly. Stabilizer qubits
//! then have l1 weight 1/2 and T|+> has 1/sqrt(2).

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordCircuit, CliffordTableau};
use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::scalar::Real;

/// Pure single-qubit state as a Bloch vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitState<F: Real> {
    bloch: [F; 3],
}

impl<F: Real> SingleQubitState<F> {
    pub fn from_bloch(r: [F; 3]) -> Result<Self> {
        let norm_sq = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        if (norm_sq - F::one()).abs() > F::norm_tol() {
            return Err(Error::NotPure { norm_sq: norm_sq.to64() });
        }
        Ok(SingleQubitState { bloch: r })
    }

    /// Polar angles in radians: bloch = (sin t cos p, sin t sin p, cos t).
    pub fn from_angles(theta: F, phi: F) -> Self {
        SingleQubitState {
            bloch: [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()],
        }
    }

    pub fn zero() -> Self {
        SingleQubitState { bloch: [F::zero(), F::zero(), F::one()] }
    }

    pub fn one() -> Self {
        SingleQubitState { bloch: [F::zero(), F::zero(), -F::one()] }
    }

    pub fn plus() -> Self {
        SingleQubitState { bloch: [F::one(), F::zero(), F::zero()] }
    }

    pub fn minus() -> Self {
        SingleQubitState { bloch: [-F::one(), F::zero(), F::zero()] }
    }

    pub fn plus_i() -> Self {
        SingleQubitState { bloch: [F::zero(), F::one(), F::zero()] }
    }

    pub fn minus_i() -> Self {
        SingleQubitState { bloch: [F::zero(), -F::one(), F::zero()] }
    }

    /// T|+> = (|0> + e^{i pi/4}|1>)/sqrt(2).
    pub fn t_state() -> Self {
        let s = F::of(std::f64::consts::FRAC_1_SQRT_2);
        SingleQubitState { bloch: [s, s, F::zero()] }
    }

    pub fn bloch(&self) -> [F; 3] {
        self.bloch
    }

    pub fn bloch_component(&self, axis: PauliAxis) -> F {
        match axis {
            PauliAxis::I => F::one(),
            PauliAxis::X => self.bloch[0],
            PauliAxis::Y => self.bloch[1],
            PauliAxis::Z => self.bloch[2],
        }
    }

    /// Amplitudes (a0, a1) with a0 real non-negative.
    pub fn amplitudes(&self) -> [Complex<F>; 2] {
        let rz = self.bloch[2].clamp(-F::one(), F::one());
        let theta = rz.acos();
        let phi = self.bloch[1].atan2(self.bloch[0]);
        let half = theta * F::half();
        [
            Complex::new(half.cos(), F::zero()),
            Complex::new(phi.cos(), phi.sin()) * Complex::new(half.sin(), F::zero()),
        ]
    }

    /// One line of the state-spec format:
    /// `0 | 1 | + | - | +i | -i | T | bloch rx ry rz | angles theta phi`.
    pub fn parse_spec(line: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["0"] => Ok(Self::zero()),
            ["1"] => Ok(Self::one()),
            ["+"] => Ok(Self::plus()),
            ["-"] => Ok(Self::minus()),
            ["+i"] => Ok(Self::plus_i()),
            ["-i"] => Ok(Self::minus_i()),
            ["T"] | ["t"] => Ok(Self::t_state()),
            ["bloch", rx, ry, rz] => {
                let v = [parse_f::<F>(rx)?, parse_f::<F>(ry)?, parse_f::<F>(rz)?];
                Self::from_bloch(v).map_err(|e| e.to_string())
            }
            ["angles", th, ph] => Ok(Self::from_angles(parse_f::<F>(th)?, parse_f::<F>(ph)?)),
            _ => Err(format!("unrecognized state spec '{line}'")),
        }
    }
}

fn parse_f<F: Real>(s: &str) -> std::result::Result<F, String> {
    s.parse::<f64>()
        .map(F::of)
        .map_err(|_| format!("bad number '{s}'"))
}

/// Parse a state-spec file: one qubit per line, `#` comments.
pub fn parse_states<F: Real>(text: &str) -> Result<Vec<SingleQubitState<F>>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let st = SingleQubitState::parse_spec(line).map_err(|msg| Error::Parse {
            line: lineno + 1,
            msg,
        })?;
        out.push(st);
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no states in spec".into() });
    }
    Ok(out)
}

/// Characteristic-function table of a single qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiTable<F: Real> {
    chi: [F; 3], // X, Y, Z; chi(I) = 1/2 always
    w: F,
}

impl<F: Real> ChiTable<F> {
    pub fn chi(&self, axis: PauliAxis) -> F {
        match axis {
            PauliAxis::I => F::half(),
            PauliAxis::X => self.chi[0],
            PauliAxis::Y => self.chi[1],
            PauliAxis::Z => self.chi[2],
        }
    }

    /// l1 weight over the non-identity axes.
    pub fn weight(&self) -> F {
        self.w
    }

    pub fn sign(&self, axis: PauliAxis) -> i8 {
        if self.chi(axis) >= F::zero() {
            1
        } else {
            -1
        }
    }
}

/// chi(P) = r_P / 2, w = (|r_x| + |r_y| + |r_z|)/2.
pub fn chi<F: Real>(state: &SingleQubitState<F>) -> ChiTable<F> {
    let [rx, ry, rz] = state.bloch();
    let half = F::half();
    ChiTable {
        chi: [rx * half, ry * half, rz * half],
        w: (rx.abs() + ry.abs() + rz.abs()) * half,
    }
}

/// The target |Psi> = C(tensor of psi_i) with its derived tableaus.
#[derive(Clone, Debug)]
pub struct CpsTarget<F: Real> {
    states: Vec<SingleQubitState<F>>,
    circuit: CliffordCircuit,
    tableau: CliffordTableau,
    inverse_tableau: CliffordTableau,
}

impl<F: Real> CpsTarget<F> {
    pub fn new(states: Vec<SingleQubitState<F>>, circuit: CliffordCircuit) -> Result<Self> {
        if circuit.num_qubits() != states.len() {
            return Err(Error::DimensionMismatch(circuit.num_qubits(), states.len()));
        }
        let tableau = CliffordTableau::from_circuit(&circuit);
        let inverse_tableau = tableau.inverse();
        Ok(CpsTarget { states, circuit, tableau, inverse_tableau })
    }

    pub fn num_qubits(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[SingleQubitState<F>] {
        &self.states
    }

    pub fn circuit(&self) -> &CliffordCircuit {
        &self.circuit
    }

    pub fn tableau(&self) -> &CliffordTableau {
        &self.tableau
    }

    pub fn inverse_tableau(&self) -> &CliffordTableau {
        &self.inverse_tableau
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Sample only non-identity axes; witness map 1 - n/2 + m*X.
    #[default]
    ExcludeIdentity,
    /// Identity axis in the support with chi(I) = 1/2; witness map 1 - n + M*X.
    IncludeIdentity,
}

/// One sampled measurement setting (i, P) with the sign of chi.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Setting {
    pub qubit: usize,
    pub axis: PauliAxis,
    pub sign: i8,
}

#[derive(Clone, Copy, Debug)]
pub struct SupportEntry<F: Real> {
    pub qubit: usize,
    pub axis: PauliAxis,
    pub prob: F,
    pub sign: i8,
}

/// Precomputed joint distribution D(i, P) with cumulative table.
#[derive(Clone, Debug)]
pub struct SamplingPlan<F: Real> {
    mode: SamplingMode,
    n: usize,
    weights: Vec<F>,
    m: F,
    support: Vec<SupportEntry<F>>,
    cumulative: Vec<F>,
}

impl<F: Real> SamplingPlan<F> {
    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// m = sum_i w_i.
    pub fn m(&self) -> F {
        self.m
    }

    /// M = n/2 + m.
    pub fn m_include(&self) -> F {
        F::of(self.n as f64) * F::half() + self.m
    }

    /// The affine-map normalizer for the active mode.
    pub fn m_eff(&self) -> F {
        match self.mode {
            SamplingMode::ExcludeIdentity => self.m,
            SamplingMode::IncludeIdentity => self.m_include(),
        }
    }

    /// mu(i), the marginal qubit distribution.
    pub fn mu(&self, i: usize) -> F {
        match self.mode {
            SamplingMode::ExcludeIdentity => self.weights[i] / self.m,
            SamplingMode::IncludeIdentity => (F::half() + self.weights[i]) / self.m_include(),
        }
    }

    pub fn qubit_weight(&self, i: usize) -> F {
        self.weights[i]
    }

    pub fn support(&self) -> &[SupportEntry<F>] {
        &self.support
    }

    /// Witness value from the signed-outcome mean, per the active mode.
    pub fn witness_from_x(&self, x_bar: F) -> F {
        let n = F::of(self.n as f64);
        match self.mode {
            SamplingMode::ExcludeIdentity => F::one() - n * F::half() + self.m * x_bar,
            SamplingMode::IncludeIdentity => F::one() - n + self.m_include() * x_bar,
        }
    }
}

/// Build the joint sampling plan for a target; axes with |chi| below 1e-12
/// are excluded from the support.
pub fn build_plan<F: Real>(target: &CpsTarget<F>, mode: SamplingMode) -> Result<SamplingPlan<F>> {
    let n = target.num_qubits();
    let tiny = F::of(1e-12);
    let mut weights = Vec::with_capacity(n);
    let mut m = F::zero();
    let mut support = Vec::new();
    for (i, st) in target.states().iter().enumerate() {
        let table = chi(st);
        let w = table.weight();
        if w < F::of(0.5) - F::norm_tol() {
            return Err(Error::Config(format!(
                "qubit {i}: chi weight {} below 1/2; state not pure",
                w.to64()
            )));
        }
        weights.push(w);
        m += w;
        for axis in PauliAxis::NON_IDENTITY {
            let c = table.chi(axis);
            if c.abs() > tiny {
                support.push(SupportEntry { qubit: i, axis, prob: c.abs(), sign: table.sign(axis) });
            }
        }
        if mode == SamplingMode::IncludeIdentity {
            support.push(SupportEntry { qubit: i, axis: PauliAxis::I, prob: F::half(), sign: 1 });
        }
    }
    if m <= F::zero() {
        return Err(Error::Config("degenerate plan: m == 0".into()));
    }
    let norm = match mode {
        SamplingMode::ExcludeIdentity => m,
        SamplingMode::IncludeIdentity => F::of(n as f64) * F::half() + m,
    };
    let mut cumulative = Vec::with_capacity(support.len());
    let mut acc = F::zero();
    for e in &mut support {
        e.prob /= norm;
        acc += e.prob;
        cumulative.push(acc);
    }
    Ok(SamplingPlan { mode, n, weights, m, support, cumulative })
}

/// Draw (i, P) ~ D and report sgn(chi); identity settings carry sign +1.
pub fn sample_setting<F: Real>(plan: &SamplingPlan<F>, rng: &mut impl Rng) -> Setting {
    let u = F::of(rng.gen::<f64>());
    let idx = plan
        .cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(plan.support.len() - 1);
    let e = &plan.support[idx];
    Setting { qubit: e.qubit, axis: e.axis, sign: e.sign }
}

/// The back-propagated observable C P^(i) C^dagger.
pub fn backprop_observable<F: Real>(target: &CpsTarget<F>, s: &Setting) -> Result<PauliString> {
    let p = PauliString::embed_single(s.axis, s.qubit, target.num_qubits())?;
    target.tableau().conjugate(&p)
}
