//! Simulated provers and measurement sessions.
//!
//! The honest i.i.d. prover is evaluated on a fast path that never builds the
//! 2^n-dimensional state: single-qubit noise acts on Bloch vectors, the global
//! post-circuit Pauli channel contributes a multiplicative factor on each
//! observable, and the back-conjugated observable factorizes over qubits.
//! A dense-matrix route to the same density is kept for cross-checking.

use std::collections::HashMap;

use rand::Rng;

use crate::dense::{build_cps_dense, Channel, DenseDensity, DenseState};
use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::target::CpsTarget;

/// Single-qubit noise acting before the Clifford circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel1Q {
    Depolarizing { p: f64 },
    Dephasing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    Rotation { axis: PauliAxis, angle: f64 },
}

impl Channel1Q {
    /// Action on a Bloch vector.
    pub fn apply_bloch(&self, r: [f64; 3]) -> [f64; 3] {
        match *self {
            Channel1Q::Depolarizing { p } => {
                let s = 1.0 - p;
                [s * r[0], s * r[1], s * r[2]]
            }
            Channel1Q::Dephasing { p } => {
                let s = 1.0 - 2.0 * p;
                [s * r[0], s * r[1], r[2]]
            }
            Channel1Q::AmplitudeDamping { gamma } => {
                let s = (1.0 - gamma).sqrt();
                [s * r[0], s * r[1], (1.0 - gamma) * r[2] + gamma]
            }
            Channel1Q::Rotation { axis, angle } => rotate_bloch(r, axis, angle),
        }
    }

    /// Same channel as a dense Kraus map on the given qubit.
    pub fn to_dense(&self, qubit: usize) -> Channel<f64> {
        match *self {
            Channel1Q::Depolarizing { p } => Channel::Depolarizing { qubit, p },
            Channel1Q::Dephasing { p } => Channel::Dephasing { qubit, p },
            Channel1Q::AmplitudeDamping { gamma } => Channel::AmplitudeDamping { qubit, gamma },
            Channel1Q::Rotation { axis, angle } => Channel::Rotation { qubit, axis, angle },
        }
    }
}

/// Rodrigues rotation of a Bloch vector about a Pauli axis; the unitary
/// exp(-i angle sigma/2) rotates Bloch space by `angle` about that axis.
fn rotate_bloch(r: [f64; 3], axis: PauliAxis, angle: f64) -> [f64; 3] {
    let k = match axis {
        PauliAxis::X => [1.0, 0.0, 0.0],
        PauliAxis::Y => [0.0, 1.0, 0.0],
        PauliAxis::Z => [0.0, 0.0, 1.0],
        PauliAxis::I => return r,
    };
    let (s, c) = angle.sin_cos();
    let dot = k[0] * r[0] + k[1] * r[1] + k[2] * r[2];
    let cross = [
        k[1] * r[2] - k[2] * r[1],
        k[2] * r[0] - k[0] * r[2],
        k[0] * r[1] - k[1] * r[0],
    ];
    [
        r[0] * c + cross[0] * s + k[0] * dot * (1.0 - c),
        r[1] * c + cross[1] * s + k[1] * dot * (1.0 - c),
        r[2] * c + cross[2] * s + k[2] * dot * (1.0 - c),
    ]
}

/// Honest prover: per-qubit pre-circuit noise plus an optional global Pauli
/// channel after the circuit; every copy is the same state.
#[derive(Clone, Debug)]
pub struct HonestIid {
    target: CpsTarget<f64>,
    pre: Vec<Vec<Channel1Q>>,
    post_pauli: Vec<(PauliString, f64)>,
    noisy_bloch: Vec<[f64; 3]>,
}

impl HonestIid {
    pub fn new(
        target: CpsTarget<f64>,
        pre: Vec<Vec<Channel1Q>>,
        post_pauli: Vec<(PauliString, f64)>,
    ) -> Result<Self> {
        let n = target.num_qubits();
        if pre.len() != n {
            return Err(Error::DimensionMismatch(pre.len(), n));
        }
        let mut total = 0.0;
        for (p, prob) in &post_pauli {
            if p.num_qubits() != n {
                return Err(Error::DimensionMismatch(p.num_qubits(), n));
            }
            if !p.is_hermitian() || p.sign() < 0 {
                return Err(Error::Config("post-circuit Pauli must be +Hermitian".into()));
            }
            if *prob < 0.0 {
                return Err(Error::Config("negative Pauli-channel probability".into()));
            }
            total += prob;
        }
        if total > 1.0 + 1e-9 {
            return Err(Error::Config(format!(
                "post-circuit Pauli probabilities sum to {total} > 1"
            )));
        }
        let noisy_bloch = target
            .states()
            .iter()
            .zip(&pre)
            .map(|(st, chans)| chans.iter().fold(st.bloch(), |r, ch| ch.apply_bloch(r)))
            .collect();
        Ok(HonestIid { target, pre, post_pauli, noisy_bloch })
    }

    pub fn noiseless(target: CpsTarget<f64>) -> Self {
        let n = target.num_qubits();
        Self::new(target, vec![Vec::new(); n], Vec::new()).expect("trivial noise always valid")
    }

    pub fn target(&self) -> &CpsTarget<f64> {
        &self.target
    }

    pub fn noisy_bloch(&self, i: usize) -> [f64; 3] {
        self.noisy_bloch[i]
    }

    /// Adjoint factor of the post-circuit Pauli channel on observable `q`:
    /// 1 - 2 sum of probabilities of error Paulis anticommuting with q.
    fn post_factor(&self, q: &PauliString) -> Result<f64> {
        let mut f = 1.0;
        for (e, prob) in &self.post_pauli {
            if !e.commutes(q)? {
                f -= 2.0 * prob;
            }
        }
        Ok(f)
    }

    /// Exact <q> on the prover's state, via Bloch-vector back-propagation.
    pub fn expectation(&self, q: &PauliString) -> Result<f64> {
        let back = self.target.inverse_tableau().conjugate(q)?;
        if !back.is_hermitian() {
            return Err(Error::NonHermitian { phase: back.sign_exp() });
        }
        let mut val = f64::from(back.sign());
        for (j, axis) in back.axes().enumerate() {
            match axis {
                PauliAxis::I => {}
                PauliAxis::X => val *= self.noisy_bloch[j][0],
                PauliAxis::Y => val *= self.noisy_bloch[j][1],
                PauliAxis::Z => val *= self.noisy_bloch[j][2],
            }
        }
        Ok(val * self.post_factor(q)?)
    }

    /// The same state built through the dense Kraus route.
    pub fn density(&self) -> Result<DenseDensity<f64>> {
        let psi = DenseState::product(self.target.states())?;
        let mut rho = DenseDensity::from_pure(&psi);
        for (qubit, chans) in self.pre.iter().enumerate() {
            for ch in chans {
                rho.apply_channel(&ch.to_dense(qubit))?;
            }
        }
        rho.apply_circuit(self.target.circuit())?;
        if !self.post_pauli.is_empty() {
            rho.apply_channel(&Channel::Pauli(self.post_pauli.clone()))?;
        }
        Ok(rho)
    }
}

/// What the prover hands over each round.
#[derive(Clone, Debug)]
pub enum ProverSpec {
    /// Same (possibly noisy) state every copy.
    Honest(HonestIid),
    /// Classically correlated adversary: one strategy is drawn per session
    /// (shared randomness) and governs every copy in it. Probabilities must
    /// sum to 1.
    CorrelatedClassical(Vec<(f64, HonestIid)>),
    /// A fixed pure state, unrelated to any target.
    FixedAlternative(DenseState<f64>),
}

impl ProverSpec {
    pub fn num_qubits(&self) -> usize {
        match self {
            ProverSpec::Honest(h) => h.target.num_qubits(),
            ProverSpec::CorrelatedClassical(parts) => parts
                .first()
                .map(|(_, h)| h.target.num_qubits())
                .unwrap_or(0),
            ProverSpec::FixedAlternative(psi) => psi.num_qubits(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let ProverSpec::CorrelatedClassical(parts) = self {
            if parts.is_empty() {
                return Err(Error::Config("empty prover strategy list".into()));
            }
            let n = self.num_qubits();
            if parts.iter().any(|(w, h)| *w < 0.0 || h.target.num_qubits() != n) {
                return Err(Error::Config("bad prover strategy component".into()));
            }
            let total: f64 = parts.iter().map(|(w, _)| *w).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "strategy probabilities sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Session-averaged per-copy density matrix (dense route; n-capped).
    pub fn average_density(&self) -> Result<DenseDensity<f64>> {
        match self {
            ProverSpec::Honest(h) => h.density(),
            ProverSpec::FixedAlternative(psi) => Ok(DenseDensity::from_pure(psi)),
            ProverSpec::CorrelatedClassical(parts) => {
                let mut acc: Option<DenseDensity<f64>> = None;
                for (w, h) in parts {
                    let rho = h.density()?.scaled(*w);
                    acc = Some(match acc {
                        None => rho,
                        Some(a) => a.add(&rho)?,
                    });
                }
                Ok(acc.expect("strategy list validated non-empty"))
            }
        }
    }
}

/// The preparation in force for one session.
enum ActiveStrategy<'a> {
    Honest(&'a HonestIid),
    Fixed(&'a DenseState<f64>),
}

/// A stream of single-shot measurements on fresh copies.
pub struct MeasurementSession<'a> {
    strategy: ActiveStrategy<'a>,
    copies_left: Option<u64>,
    cache: HashMap<PauliString, f64>,
}

/// For `CorrelatedClassical`, the strategy is drawn here, once, from the
/// session RNG; every copy of the session then shares it.
pub fn open_session<'a>(
    spec: &'a ProverSpec,
    copies: Option<u64>,
    rng: &mut impl Rng,
) -> Result<MeasurementSession<'a>> {
    spec.validate()?;
    let strategy = match spec {
        ProverSpec::Honest(h) => ActiveStrategy::Honest(h),
        ProverSpec::FixedAlternative(psi) => ActiveStrategy::Fixed(psi),
        ProverSpec::CorrelatedClassical(parts) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = parts.len() - 1;
            for (i, (w, _)) in parts.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            ActiveStrategy::Honest(&parts[pick].1)
        }
    };
    Ok(MeasurementSession { strategy, copies_left: copies, cache: HashMap::new() })
}

impl MeasurementSession<'_> {
    pub fn copies_left(&self) -> Option<u64> {
        self.copies_left
    }

    fn take_copy(&mut self) -> Result<()> {
        if let Some(left) = &mut self.copies_left {
            if *left == 0 {
                return Err(Error::CopiesExhausted);
            }
            *left -= 1;
        }
        Ok(())
    }

    fn expectation_of(&mut self, q: &PauliString) -> Result<f64> {
        if let Some(&e) = self.cache.get(q) {
            return Ok(e);
        }
        let e = match &self.strategy {
            ActiveStrategy::Honest(h) => h.expectation(q)?,
            ActiveStrategy::Fixed(psi) => psi.expectation(q)?,
        };
        self.cache.insert(q.clone(), e);
        Ok(e)
    }

    /// Measure Hermitian `q` once, consuming one copy.
    pub fn measure_once(&mut self, q: &PauliString, rng: &mut impl Rng) -> Result<i8> {
        if !q.is_hermitian() {
            return Err(Error::NonHermitian { phase: q.sign_exp() });
        }
        self.take_copy()?;
        let e = self.expectation_of(q)?;
        let p_plus = ((1.0 + e) / 2.0).clamp(0.0, 1.0);
        Ok(if rng.gen::<f64>() < p_plus { 1 } else { -1 })
    }

    /// Hand over one untouched copy as a collapsible state for adaptive use.
    pub fn take_adaptive(&mut self) -> Result<AdaptiveSession> {
        self.take_copy()?;
        let rho = match &self.strategy {
            ActiveStrategy::Honest(h) => h.density()?,
            ActiveStrategy::Fixed(psi) => DenseDensity::from_pure(psi),
        };
        Ok(AdaptiveSession { rho })
    }
}

/// A single held copy supporting sequential (collapsing) Pauli measurements.
pub struct AdaptiveSession {
    rho: DenseDensity<f64>,
}

impl AdaptiveSession {
    pub fn from_density(rho: DenseDensity<f64>) -> Self {
        AdaptiveSession { rho }
    }

    pub fn density(&self) -> &DenseDensity<f64> {
        &self.rho
    }

    /// Measure and collapse; the copy persists for further measurements.
    pub fn measure(&mut self, q: &PauliString, rng: &mut impl Rng) -> Result<i8> {
        let (outcome, post) = self.rho.measure_pauli(q, rng)?;
        self.rho = post;
        Ok(outcome)
    }
}

/// Honest noiseless prover for a target.
pub fn ideal_prover(target: &CpsTarget<f64>) -> ProverSpec {
    ProverSpec::Honest(HonestIid::noiseless(target.clone()))
}

/// The exact CPS for a target, for use as a `Fixed` prover or oracle input.
pub fn ideal_state(target: &CpsTarget<f64>) -> Result<DenseState<f64>> {
    build_cps_dense(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CliffordCircuit;
    use crate::seed::rng_from;
    use crate::target::SingleQubitState;
    use approx::assert_abs_diff_eq;

    fn ghz_target(n: usize) -> CpsTarget<f64> {
        let mut text = format!("QUBITS {n}\nH 0\n");
        for i in 1..n {
            text.push_str(&format!("CNOT 0 {i}\n"));
        }
        CpsTarget::new(
            vec![SingleQubitState::zero(); n],
            CliffordCircuit::parse(&text).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bloch_channels_match_kraus_route() {
        // apply each channel both ways to the same qubit and compare rho.
        let st = SingleQubitState::<f64>::from_angles(1.0, 0.4);
        let chans = [
            Channel1Q::Depolarizing { p: 0.3 },
            Channel1Q::Dephasing { p: 0.2 },
            Channel1Q::AmplitudeDamping { gamma: 0.35 },
            Channel1Q::Rotation { axis: PauliAxis::Y, angle: 0.8 },
        ];
        for ch in &chans {
            let r = ch.apply_bloch(st.bloch());
            let psi = DenseState::product(std::slice::from_ref(&st)).unwrap();
            let mut rho = DenseDensity::from_pure(&psi);
            rho.apply_channel(&ch.to_dense(0)).unwrap();
            for (axis, want) in PauliAxis::NON_IDENTITY.iter().zip(r) {
                let p = PauliString::embed_single(*axis, 0, 1).unwrap();
                assert_abs_diff_eq!(rho.expectation(&p).unwrap(), want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotation_is_trace_preserving_and_unital() {
        let ch = Channel1Q::Rotation { axis: PauliAxis::X, angle: 1.3 };
        let r = ch.apply_bloch([0.6, 0.0, 0.8]);
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fast_expectation_matches_dense_density() {
        let mut rng = rng_from(11);
        for trial in 0..20 {
            let n = 1 + trial % 4;
            let circuit = CliffordCircuit::random(n, 3 * n, &mut rng);
            let states: Vec<_> = (0..n)
                .map(|_| {
                    SingleQubitState::<f64>::from_angles(
                        rng.gen::<f64>() * std::f64::consts::PI,
                        rng.gen::<f64>() * std::f64::consts::TAU,
                    )
                })
                .collect();
            let target = CpsTarget::new(states, circuit).unwrap();
            let pre: Vec<Vec<Channel1Q>> = (0..n)
                .map(|_| {
                    vec![
                        Channel1Q::Depolarizing { p: 0.1 * rng.gen::<f64>() },
                        Channel1Q::AmplitudeDamping { gamma: 0.2 * rng.gen::<f64>() },
                    ]
                })
                .collect();
            let mut post = Vec::new();
            if n >= 2 {
                post.push((PauliString::from_axes(&vec![PauliAxis::X; n], 0), 0.05));
            }
            let prover = HonestIid::new(target, pre, post).unwrap();
            let rho = prover.density().unwrap();
            for _ in 0..8 {
                let axes: Vec<PauliAxis> = (0..n)
                    .map(|_| [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z]
                        [rng.gen_range(0..4)])
                    .collect();
                let q = PauliString::from_axes(&axes, 0);
                assert_abs_diff_eq!(
                    prover.expectation(&q).unwrap(),
                    rho.expectation(&q).unwrap(),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn noiseless_ghz_expectations() {
        let prover = HonestIid::noiseless(ghz_target(3));
        let xxx = PauliString::parse_observable("XXX").unwrap();
        let zzi = PauliString::parse_observable("ZZI").unwrap();
        let zii = PauliString::parse_observable("ZII").unwrap();
        assert_abs_diff_eq!(prover.expectation(&xxx).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prover.expectation(&zzi).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(prover.expectation(&zii).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn session_copy_accounting() {
        let spec = ideal_prover(&ghz_target(2));
        let mut rng = rng_from(5);
        let mut s = open_session(&spec, Some(3), &mut rng).unwrap();
        let q = PauliString::parse_observable("XX").unwrap();
        for _ in 0..3 {
            assert_eq!(s.measure_once(&q, &mut rng).unwrap(), 1);
        }
        assert!(matches!(s.measure_once(&q, &mut rng), Err(Error::CopiesExhausted)));
    }

    #[test]
    fn correlated_sessions_share_one_strategy() {
        // (0.7 perfect, 0.3 fully depolarized): within one session XX on the
        // GHZ target is deterministic (+1) or fair; across sessions the
        // mixture's mean appears.
        let t = ghz_target(2);
        let good = HonestIid::noiseless(t.clone());
        let bad = HonestIid::new(
            t.clone(),
            vec![vec![Channel1Q::Depolarizing { p: 1.0 }]; 2],
            Vec::new(),
        )
        .unwrap();
        let spec = ProverSpec::CorrelatedClassical(vec![(0.7, good), (0.3, bad)]);
        let q = PauliString::parse_observable("XX").unwrap();
        let mut rng = rng_from(9);
        let sessions = 400usize;
        let shots = 100u32;
        let mut grand = 0.0;
        let mut extreme = 0usize; // sessions whose mean is clearly one-sided
        for _ in 0..sessions {
            let mut s = open_session(&spec, None, &mut rng).unwrap();
            let mean: f64 = (0..shots)
                .map(|_| f64::from(s.measure_once(&q, &mut rng).unwrap()))
                .sum::<f64>()
                / f64::from(shots);
            grand += mean / sessions as f64;
            if mean > 0.9 || mean.abs() < 0.5 {
                extreme += 1;
            }
        }
        let want = spec.average_density().unwrap().expectation(&q).unwrap();
        assert_abs_diff_eq!(want, 0.7, epsilon = 1e-12);
        assert!((grand - want).abs() < 0.05, "grand mean {grand} vs {want}");
        // bimodal: every session is either deterministic or unbiased
        assert_eq!(extreme, sessions);
    }

    #[test]
    fn strategy_probabilities_must_sum_to_one() {
        let t = ghz_target(2);
        let spec = ProverSpec::CorrelatedClassical(vec![
            (0.6, HonestIid::noiseless(t.clone())),
            (0.6, HonestIid::noiseless(t)),
        ]);
        let mut rng = rng_from(1);
        assert!(open_session(&spec, None, &mut rng).is_err());
    }

    #[test]
    fn adaptive_measurements_collapse() {
        let spec = ideal_prover(&ghz_target(2));
        let mut rng = rng_from(2);
        let mut s = open_session(&spec, Some(1), &mut rng).unwrap();
        let mut kept = s.take_adaptive().unwrap();
        let z0 = PauliString::parse_observable("ZI").unwrap();
        let z1 = PauliString::parse_observable("IZ").unwrap();
        let a = kept.measure(&z0, &mut rng).unwrap();
        // GHZ correlations survive collapse
        assert_eq!(kept.measure(&z1, &mut rng).unwrap(), a);
        assert_eq!(kept.measure(&z0, &mut rng).unwrap(), a);
    }
}
