//! Witness estimation and the certification / verification protocols.
//!
//! Each round samples a (qubit, axis) setting from the target's chi
//! distribution, measures the back-conjugated Pauli on a fresh copy, and
//! folds the signed outcomes into the fidelity witness
//! W = 1 - sum_i (1 - F_i).  Acceptance thresholds and sample counts come
//! from a two-sided Hoeffding bound on the signed-outcome mean.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::prover::{open_session, AdaptiveSession, MeasurementSession, ProverSpec};
use crate::seed::{derive_seed, rng_from};
use crate::target::{build_plan, sample_setting, CpsTarget, SamplingMode, SamplingPlan};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CertConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Threshold placement: accept at W >= 1 - (1 - 1/k) * epsilon, so an
    /// epsilon/k-good state passes and an epsilon-bad one fails, each with
    /// probability >= 1 - delta.
    pub k: f64,
    #[serde(default)]
    pub mode: SamplingMode,
    pub seed: u64,
}

impl CertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon {} not in (0,1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} not in (0,1)", self.delta)));
        }
        if self.k <= 1.0 {
            return Err(Error::Config(format!("k {} must exceed 1", self.k)));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        1.0 - (1.0 - 1.0 / self.k) * self.epsilon
    }

    /// Margin between the threshold and each hypothesis, in witness units.
    pub fn lambda(&self) -> f64 {
        self.epsilon / self.k
    }
}

/// N = ceil( 2 m_eff^2 (k/eps)^2 ln(2/delta) ): Hoeffding with range
/// 2 m_eff on the witness and margin eps/k on each side.
pub fn sample_size_iid(plan: &SamplingPlan<f64>, cfg: &CertConfig) -> Result<u64> {
    cfg.validate()?;
    let m = plan.m_eff();
    let ratio = cfg.k / cfg.epsilon;
    let raw = 2.0 * m * m * ratio * ratio * (2.0 / cfg.delta).ln();
    Ok(raw.ceil() as u64)
}

/// Copy budget for the non-i.i.d. reduction:
/// ceil( c * n ln 2 / (delta^2 eps^2) * N_iid^2 * ln^2(N_iid/delta) ).
pub fn sample_size_noniid(n: usize, n_iid: u64, cfg: &CertConfig, c: f64) -> Result<u64> {
    cfg.validate()?;
    if c <= 0.0 {
        return Err(Error::Config(format!("non-iid constant {c} must be positive")));
    }
    let ni = n_iid as f64;
    let log_term = (ni / cfg.delta).ln().max(1.0);
    let raw = c * (n as f64) * std::f64::consts::LN_2
        / (cfg.delta * cfg.delta * cfg.epsilon * cfg.epsilon)
        * ni
        * ni
        * log_term
        * log_term;
    if raw >= u64::MAX as f64 {
        return Err(Error::Config("non-iid copy count overflows u64".into()));
    }
    Ok(raw.ceil() as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct CertResult {
    pub n_qubits: usize,
    pub n_samples: u64,
    pub plus: u64,
    pub minus: u64,
    pub x_bar: f64,
    pub witness: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub m_eff: f64,
    pub mode: SamplingMode,
    pub epsilon: f64,
    pub delta: f64,
    pub k: f64,
    pub seed: u64,
}

/// Back-conjugated observables for every setting in the plan's support.
fn observable_cache(
    target: &CpsTarget<f64>,
    plan: &SamplingPlan<f64>,
) -> Result<HashMap<(usize, PauliAxis), PauliString>> {
    let n = target.num_qubits();
    let mut cache = HashMap::new();
    for e in plan.support() {
        if let std::collections::hash_map::Entry::Vacant(slot) = cache.entry((e.qubit, e.axis)) {
            let p = PauliString::embed_single(e.axis, e.qubit, n)?;
            slot.insert(target.tableau().conjugate(&p)?);
        }
    }
    Ok(cache)
}

fn run_rounds(
    target: &CpsTarget<f64>,
    plan: &SamplingPlan<f64>,
    session: &mut MeasurementSession<'_>,
    rounds: u64,
    rng: &mut impl Rng,
) -> Result<(u64, u64)> {
    let cache = observable_cache(target, plan)?;
    let mut plus = 0u64;
    let mut minus = 0u64;
    for _ in 0..rounds {
        let s = sample_setting(plan, rng);
        let q = &cache[&(s.qubit, s.axis)];
        let outcome = session.measure_once(q, rng)?;
        if i32::from(outcome) * i32::from(s.sign) > 0 {
            plus += 1;
        } else {
            minus += 1;
        }
    }
    Ok((plus, minus))
}

fn tally_result(
    plan: &SamplingPlan<f64>,
    cfg: &CertConfig,
    plus: u64,
    minus: u64,
) -> CertResult {
    let n_samples = plus + minus;
    let x_bar = if n_samples == 0 {
        0.0
    } else {
        (plus as f64 - minus as f64) / n_samples as f64
    };
    let witness = plan.witness_from_x(x_bar);
    let threshold = cfg.threshold();
    CertResult {
        n_qubits: plan.num_qubits(),
        n_samples,
        plus,
        minus,
        x_bar,
        witness,
        threshold,
        accepted: witness >= threshold,
        m_eff: plan.m_eff(),
        mode: plan.mode(),
        epsilon: cfg.epsilon,
        delta: cfg.delta,
        k: cfg.k,
        seed: cfg.seed,
    }
}

/// Protocol for i.i.d. copies: N rounds of sampled single-Pauli tests, with
/// N from `sample_size_iid`.
pub fn certify_iid(
    target: &CpsTarget<f64>,
    spec: &ProverSpec,
    cfg: &CertConfig,
) -> Result<CertResult> {
    cfg.validate()?;
    let plan = build_plan(target, cfg.mode)?;
    let rounds = sample_size_iid(&plan, cfg)?;
    certify_iid_rounds(target, spec, cfg, rounds)
}

/// Same protocol with an explicit round count (for operating-characteristic
/// studies at fixed N).
pub fn certify_iid_rounds(
    target: &CpsTarget<f64>,
    spec: &ProverSpec,
    cfg: &CertConfig,
    rounds: u64,
) -> Result<CertResult> {
    cfg.validate()?;
    if spec.num_qubits() != target.num_qubits() {
        return Err(Error::DimensionMismatch(spec.num_qubits(), target.num_qubits()));
    }
    let plan = build_plan(target, cfg.mode)?;
    let mut rng = rng_from(derive_seed(cfg.seed, "certify", 0));
    let mut session = open_session(spec, Some(rounds), &mut rng)?;
    let (plus, minus) = run_rounds(target, &plan, &mut session, rounds, &mut rng)?;
    Ok(tally_result(&plan, cfg, plus, minus))
}

/// Exact expected witness under a prover with known per-copy expectations.
pub fn expected_witness(
    target: &CpsTarget<f64>,
    plan: &SamplingPlan<f64>,
    mut expect: impl FnMut(&PauliString) -> Result<f64>,
) -> Result<f64> {
    let n = target.num_qubits();
    let mut x_mean = 0.0;
    for e in plan.support() {
        let p = PauliString::embed_single(e.axis, e.qubit, n)?;
        let q = target.tableau().conjugate(&p)?;
        x_mean += e.prob * f64::from(e.sign) * expect(&q)?;
    }
    Ok(plan.witness_from_x(x_mean))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub cert: CertConfig,
    /// Total copies requested from the prover (N1). Zero means "use the
    /// protocol scaling" via `sample_size_noniid` with constant `c_noniid`.
    #[serde(default)]
    pub n1: u64,
    #[serde(default = "default_c_noniid")]
    pub c_noniid: f64,
}

fn default_c_noniid() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyResult {
    pub cert: CertResult,
    pub n1: u64,
    pub n2: u64,
    pub kept_index: u64,
}

/// Protocol for adversarial (non-i.i.d.) copies: randomly pick N2 of the N1
/// copies for testing, and on acceptance keep one random untested copy.
///
/// Copies are requested in permuted order, so position in the measurement
/// stream is uniform over the prover's preparation order.
pub fn verify_noniid(
    target: &CpsTarget<f64>,
    spec: &ProverSpec,
    cfg: &VerifyConfig,
) -> Result<(VerifyResult, Option<AdaptiveSession>)> {
    cfg.cert.validate()?;
    if spec.num_qubits() != target.num_qubits() {
        return Err(Error::DimensionMismatch(spec.num_qubits(), target.num_qubits()));
    }
    let plan = build_plan(target, cfg.cert.mode)?;
    let n2 = sample_size_iid(&plan, &cfg.cert)?;
    let n1 = if cfg.n1 == 0 {
        sample_size_noniid(target.num_qubits(), n2, &cfg.cert, cfg.c_noniid)?
    } else {
        cfg.n1
    };
    if n1 <= n2 {
        return Err(Error::Config(format!("N1 = {n1} must exceed N2 = {n2}")));
    }
    let mut rng = rng_from(derive_seed(cfg.cert.seed, "verify", 0));
    // Random subset choice: the first N2 labels of a uniform permutation are
    // tested, the next one is kept, the rest discarded unmeasured. Only the
    // first N2+1 Fisher-Yates draws are materialized (sparse swap map), since
    // the protocol-scale N1 can be astronomically large.
    let mut swaps: HashMap<u64, u64> = HashMap::new();
    let mut draw = |i: u64, rng: &mut rand_chacha::ChaCha12Rng| -> u64 {
        let j = rng.gen_range(i..n1);
        let vj = *swaps.get(&j).unwrap_or(&j);
        let vi = *swaps.get(&i).unwrap_or(&i);
        swaps.insert(j, vi);
        vj
    };
    for i in 0..n2 {
        draw(i, &mut rng); // test-set labels; identities not needed further
    }
    let kept_index = draw(n2, &mut rng);

    let mut session = open_session(spec, Some(n1), &mut rng)?;
    let (plus, minus) = run_rounds(target, &plan, &mut session, n2, &mut rng)?;
    let cert = tally_result(&plan, &cfg.cert, plus, minus);
    let kept = if cert.accepted {
        Some(session.take_adaptive()?)
    } else {
        None
    };
    Ok((VerifyResult { cert, n1, n2, kept_index }, kept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::CliffordCircuit;
    use crate::prover::ideal_prover;
    use crate::target::SingleQubitState;

    fn single_zero() -> CpsTarget<f64> {
        CpsTarget::new(vec![SingleQubitState::zero()], CliffordCircuit::empty(1)).unwrap()
    }

    fn cfg(seed: u64) -> CertConfig {
        CertConfig { epsilon: 0.3, delta: 0.1, k: 3.0, mode: SamplingMode::ExcludeIdentity, seed }
    }

    #[test]
    fn sample_size_worked_example() {
        // n = 1, |0>: m = 1/2, eps = 0.3, delta = 0.1, k = 3 -> 150 rounds.
        let plan = build_plan(&single_zero(), SamplingMode::ExcludeIdentity).unwrap();
        assert_eq!(sample_size_iid(&plan, &cfg(0)).unwrap(), 150);
    }

    #[test]
    fn sample_size_monotonicity() {
        let plan = build_plan(&single_zero(), SamplingMode::ExcludeIdentity).unwrap();
        let base = sample_size_iid(&plan, &cfg(0)).unwrap();
        let mut tighter = cfg(0);
        tighter.epsilon = 0.15;
        assert!(sample_size_iid(&plan, &tighter).unwrap() > base);
        let mut surer = cfg(0);
        surer.delta = 0.01;
        assert!(sample_size_iid(&plan, &surer).unwrap() > base);
    }

    #[test]
    fn threshold_placement() {
        let c = cfg(0);
        assert!((c.threshold() - 0.8).abs() < 1e-12);
        assert!((c.lambda() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn ideal_prover_always_accepted() {
        let target = single_zero();
        let spec = ideal_prover(&target);
        for seed in 0..5 {
            let r = certify_iid(&target, &spec, &cfg(seed)).unwrap();
            assert!(r.accepted);
            assert_eq!(r.n_samples, 150);
            assert!((r.witness - 1.0).abs() < 1e-12, "ideal witness {}", r.witness);
        }
    }

    #[test]
    fn orthogonal_state_always_rejected() {
        // prover sends |1> while the target is |0>: witness = 0.
        let target = single_zero();
        let bad = CpsTarget::new(vec![SingleQubitState::one()], CliffordCircuit::empty(1)).unwrap();
        let spec = ideal_prover(&bad);
        for seed in 0..5 {
            let r = certify_iid(&target, &spec, &cfg(seed)).unwrap();
            assert!(!r.accepted);
            assert!(r.witness < 0.2, "witness {}", r.witness);
        }
    }

    #[test]
    fn results_are_seed_deterministic() {
        let target = single_zero();
        let spec = ideal_prover(&target);
        let a = certify_iid(&target, &spec, &cfg(42)).unwrap();
        let b = certify_iid(&target, &spec, &cfg(42)).unwrap();
        assert_eq!((a.plus, a.minus, a.accepted), (b.plus, b.minus, b.accepted));
    }

    #[test]
    fn expected_witness_of_ideal_prover_is_one() {
        let target = single_zero();
        for mode in [SamplingMode::ExcludeIdentity, SamplingMode::IncludeIdentity] {
            let plan = build_plan(&target, mode).unwrap();
            let spec = ideal_prover(&target);
            let w = match &spec {
                ProverSpec::Honest(h) => {
                    expected_witness(&target, &plan, |q| h.expectation(q)).unwrap()
                }
                _ => unreachable!(),
            };
            assert!((w - 1.0).abs() < 1e-12, "mode {mode:?}: {w}");
        }
    }

    #[test]
    fn noniid_budget_scales_and_verify_accepts_honest() {
        let target = single_zero();
        let plan = build_plan(&target, SamplingMode::ExcludeIdentity).unwrap();
        let n2 = sample_size_iid(&plan, &cfg(0)).unwrap();
        let full = sample_size_noniid(1, n2, &cfg(0), 1.0).unwrap();
        assert!(full > n2 * n2); // quadratic blowup at least

        let vcfg = VerifyConfig { cert: cfg(3), n1: 10 * n2, c_noniid: 1.0 };
        let spec = ideal_prover(&target);
        let (res, kept) = verify_noniid(&target, &spec, &vcfg).unwrap();
        assert!(res.cert.accepted);
        assert_eq!(res.n2, n2);
        assert!(res.kept_index < res.n1);
        let kept = kept.unwrap();
        let z = PauliString::parse_observable("Z").unwrap();
        assert!((kept.density().expectation(&z).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(0);
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        c.k = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        c.delta = 1.0;
        assert!(c.validate().is_err());
    }
}
