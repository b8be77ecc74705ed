//! JSON experiment configuration and construction of provers/targets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certifier::{CertConfig, VerifyConfig};
use crate::dense::DenseState;
use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::prover::{Channel1Q, HonestIid, ProverSpec};
use crate::target::{parse_states, CpsTarget, SamplingMode};
use crate::clifford::CliffordCircuit;

fn default_k() -> f64 {
    3.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Path to the state-spec file (one qubit per line).
    pub states: PathBuf,
    /// Path to the Clifford circuit file.
    pub circuit: PathBuf,
    #[serde(default)]
    pub prover: ProverConfig,
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default)]
    pub mode: SamplingMode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noniid: Option<NoniidConfig>,
    #[serde(default)]
    pub sweep: Option<crate::sweep::SweepConfig>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoniidConfig {
    /// Total copies N1; 0 requests the protocol scaling.
    #[serde(default)]
    pub n1: u64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct HonestNoiseConfig {
    /// Per-qubit probabilities; a single entry broadcasts to all qubits.
    #[serde(default)]
    pub depolarizing: Vec<f64>,
    #[serde(default)]
    pub dephasing: Vec<f64>,
    #[serde(default)]
    pub amplitude_damping: Vec<f64>,
    /// (qubit, axis, angle) coherent over-rotations before the circuit.
    #[serde(default)]
    pub rotations: Vec<(usize, char, f64)>,
    /// Global Pauli channel after the circuit: (pauli text, probability).
    #[serde(default)]
    pub post_pauli: Vec<(String, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProverConfig {
    Honest(HonestNoiseConfig),
    /// Classically correlated adversary: one strategy per session.
    Correlated { strategies: Vec<StrategyConfig> },
    /// Fixed pure state: amplitudes as (re, im) pairs in basis order.
    Fixed { amplitudes: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub prob: f64,
    #[serde(default)]
    pub noise: HonestNoiseConfig,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig::Honest(HonestNoiseConfig::default())
    }
}

fn broadcast(name: &str, values: &[f64], n: usize) -> Result<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![0.0; n]),
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(Error::Config(format!(
            "{name}: expected 0, 1 or {n} entries, got {len}"
        ))),
    }
}

pub fn build_honest(noise: &HonestNoiseConfig, target: &CpsTarget<f64>) -> Result<HonestIid> {
    let n = target.num_qubits();
    let depol = broadcast("depolarizing", &noise.depolarizing, n)?;
    let deph = broadcast("dephasing", &noise.dephasing, n)?;
    let damp = broadcast("amplitude_damping", &noise.amplitude_damping, n)?;
    let mut pre: Vec<Vec<Channel1Q>> = vec![Vec::new(); n];
    for (q, c, angle) in &noise.rotations {
        if *q >= n {
            return Err(Error::QubitOutOfRange { index: *q, n });
        }
        let axis = PauliAxis::from_char(*c)
            .filter(|a| *a != PauliAxis::I)
            .ok_or_else(|| Error::Config(format!("bad rotation axis '{c}'")))?;
        pre[*q].push(Channel1Q::Rotation { axis, angle: *angle });
    }
    for q in 0..n {
        if depol[q] > 0.0 {
            pre[q].push(Channel1Q::Depolarizing { p: depol[q] });
        }
        if deph[q] > 0.0 {
            pre[q].push(Channel1Q::Dephasing { p: deph[q] });
        }
        if damp[q] > 0.0 {
            pre[q].push(Channel1Q::AmplitudeDamping { gamma: damp[q] });
        }
    }
    let mut post = Vec::with_capacity(noise.post_pauli.len());
    for (text, prob) in &noise.post_pauli {
        post.push((PauliString::parse_observable(text)?, *prob));
    }
    HonestIid::new(target.clone(), pre, post)
}

pub fn build_prover(cfg: &ProverConfig, target: &CpsTarget<f64>) -> Result<ProverSpec> {
    match cfg {
        ProverConfig::Honest(noise) => Ok(ProverSpec::Honest(build_honest(noise, target)?)),
        ProverConfig::Correlated { strategies } => {
            let mut parts = Vec::with_capacity(strategies.len());
            for s in strategies {
                parts.push((s.prob, build_honest(&s.noise, target)?));
            }
            Ok(ProverSpec::CorrelatedClassical(parts))
        }
        ProverConfig::Fixed { amplitudes } => {
            let dim = amplitudes.len();
            if dim == 0 || dim & (dim - 1) != 0 {
                return Err(Error::Config(format!(
                    "fixed-state amplitude count {dim} is not a power of two"
                )));
            }
            let n = dim.trailing_zeros() as usize;
            let amps = amplitudes
                .iter()
                .map(|(re, im)| num_complex::Complex64::new(*re, *im))
                .collect();
            let psi = DenseState::from_amplitudes(n, amps)?;
            let norm = psi.norm_sq();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::NotPure { norm_sq: norm });
            }
            Ok(ProverSpec::FixedAlternative(psi))
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolve relative state/circuit paths against the config's directory.
    pub fn anchored(mut self, config_path: &Path) -> Self {
        if let Some(dir) = config_path.parent() {
            if self.states.is_relative() {
                self.states = dir.join(&self.states);
            }
            if self.circuit.is_relative() {
                self.circuit = dir.join(&self.circuit);
            }
        }
        self
    }

    pub fn load_target(&self) -> Result<CpsTarget<f64>> {
        let states = parse_states(&std::fs::read_to_string(&self.states)?)?;
        let circuit = CliffordCircuit::parse(&std::fs::read_to_string(&self.circuit)?)?;
        let circuit = if circuit.num_qubits() < states.len() {
            circuit.widened(states.len())?
        } else {
            circuit
        };
        CpsTarget::new(states, circuit)
    }

    pub fn cert_config(&self, seed_override: Option<u64>) -> CertConfig {
        CertConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            k: self.k,
            mode: self.mode,
            seed: seed_override.or(self.seed).unwrap_or(0),
        }
    }

    pub fn verify_config(&self, seed_override: Option<u64>) -> VerifyConfig {
        let nn = self.noniid.unwrap_or(NoniidConfig { n1: 0, c: 1.0 });
        VerifyConfig {
            cert: self.cert_config(seed_override),
            n1: nn.n1,
            c_noniid: nn.c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_defaults() {
        let text = r#"{
            "states": "states.txt",
            "circuit": "circ.txt",
            "epsilon": 0.2,
            "delta": 0.05,
            "prover": {"kind": "honest", "depolarizing": [0.1], "post_pauli": [["ZZ", 0.05]]}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.k, 3.0);
        assert_eq!(cfg.mode, SamplingMode::ExcludeIdentity);
        assert!(cfg.seed.is_none());
        match &cfg.prover {
            ProverConfig::Honest(h) => {
                assert_eq!(h.depolarizing, vec![0.1]);
                assert_eq!(h.post_pauli.len(), 1);
            }
            other => panic!("wrong prover {other:?}"),
        }
        let json = serde_json::to_string(&cfg).unwrap();
        let _again: ExperimentConfig = serde_json::from_str(&json).unwrap();
    }

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast("t", &[], 3).unwrap(), vec![0.0; 3]);
        assert_eq!(broadcast("t", &[0.2], 3).unwrap(), vec![0.2; 3]);
        assert_eq!(broadcast("t", &[0.1, 0.2, 0.3], 3).unwrap(), vec![0.1, 0.2, 0.3]);
        assert!(broadcast("t", &[0.1, 0.2], 3).is_err());
    }

    #[test]
    fn fixed_prover_requires_normalized_power_of_two() {
        use crate::clifford::CliffordCircuit;
        use crate::target::SingleQubitState;
        let t = CpsTarget::new(vec![SingleQubitState::zero()], CliffordCircuit::empty(1)).unwrap();
        let bad = ProverConfig::Fixed { amplitudes: vec![(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)] };
        assert!(build_prover(&bad, &t).is_err());
        let unnorm = ProverConfig::Fixed { amplitudes: vec![(1.0, 0.0), (1.0, 0.0)] };
        assert!(build_prover(&unnorm, &t).is_err());
        let ok = ProverConfig::Fixed { amplitudes: vec![(0.6, 0.0), (0.0, 0.8)] };
        assert!(build_prover(&ok, &t).is_ok());
    }
}
