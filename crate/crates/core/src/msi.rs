//! Magic-state-injection compilation and execution.
//!
//! A Clifford+T circuit is rewritten as one big Clifford acting on the data
//! register plus one T|+> ancilla per T gate: each T becomes a
//! CNOT(data -> ancilla) entangler, a deferred Z measurement on the ancilla,
//! and a conditional S correction on the data wire. Corrections are never
//! applied physically; a Pauli-frame-style Clifford frame rewrites every
//! later measurement instead, so the prepared state is exactly a CPS and the
//! run phase is measurement-only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{parse_clifford_gate, CliffordCircuit, CliffordGate, CliffordTableau};
use crate::dense::{DenseState, DENSE_QUBIT_CAP};
use crate::error::{Error, Result};
use crate::pauli::{PauliAxis, PauliString};
use crate::prover::AdaptiveSession;
use crate::target::{CpsTarget, SingleQubitState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UGate {
    Clifford(CliffordGate),
    T(usize),
}

/// Clifford+T circuit in the same text format with an extra `T q` mnemonic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalCircuit {
    n: usize,
    gates: Vec<UGate>,
}

impl UniversalCircuit {
    pub fn new(n: usize, gates: Vec<UGate>) -> Result<Self> {
        for g in &gates {
            let max = match g {
                UGate::Clifford(c) => c.max_index(),
                UGate::T(q) => *q,
            };
            if max >= n {
                return Err(Error::QubitOutOfRange { index: max, n });
            }
            if let UGate::Clifford(c) = g {
                let (a, b) = c.qubits();
                if b == Some(a) {
                    return Err(Error::Config(format!(
                        "two-qubit gate with identical indices {a}"
                    )));
                }
            }
        }
        Ok(UniversalCircuit { n, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[UGate] {
        &self.gates
    }

    pub fn t_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, UGate::T(_))).count()
    }

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
                declared = parts.get(1).and_then(|s| s.parse().ok());
                if declared.is_none() {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "expected QUBITS <n>".into(),
                    });
                }
                continue;
            }
            seen_gate = true;
            if up == "T" {
                let q = parts
                    .get(1)
                    .filter(|_| parts.len() == 2)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        msg: "expected T <q>".into(),
                    })?;
                gates.push(UGate::T(q));
                continue;
            }
            match parse_clifford_gate(&parts) {
                Some(Ok(g)) => gates.push(UGate::Clifford(g)),
                Some(Err(msg)) => return Err(Error::Parse { line: lineno + 1, msg }),
                None => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("unknown gate '{}'", parts[0]),
                    })
                }
            }
        }
        let inferred = gates
            .iter()
            .map(|g| match g {
                UGate::Clifford(c) => c.max_index(),
                UGate::T(q) => *q,
            })
            .max()
            .map_or(0, |m| m + 1);
        UniversalCircuit::new(declared.unwrap_or(inferred), gates)
    }

    /// Random Clifford+T word with the requested number of T gates mixed in.
    pub fn random(n: usize, clifford_depth: usize, t_count: usize, rng: &mut impl Rng) -> Self {
        let base = CliffordCircuit::random(n, clifford_depth, rng);
        let mut gates: Vec<UGate> = base.gates().iter().copied().map(UGate::Clifford).collect();
        for _ in 0..t_count {
            let pos = rng.gen_range(0..=gates.len());
            gates.insert(pos, UGate::T(rng.gen_range(0..n)));
        }
        UniversalCircuit { n, gates }
    }
}

impl std::fmt::Display for UniversalCircuit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "QUBITS {}", self.n)?;
        for g in &self.gates {
            match g {
                UGate::Clifford(c) => writeln!(f, "{c}")?,
                UGate::T(q) => writeln!(f, "T {q}")?,
            }
        }
        Ok(())
    }
}

/// One deferred ancilla measurement.
#[derive(Clone, Debug)]
pub struct ScheduleEntry {
    pub ancilla: usize,
    pub data_qubit: usize,
    /// Clifford suffix after this T event, on the full register.
    pub suffix: CliffordCircuit,
    /// Measurement observable L Z_a L^dagger for suffix L.
    pub base: PauliString,
    /// Frame update on outcome -1: L S_q L^dagger as a tableau.
    pub correction: CliffordTableau,
}

/// Compiled program: a CPS preparation plus a measurement-only schedule.
#[derive(Clone, Debug)]
pub struct MsiProgram {
    data_qubits: usize,
    cps: CpsTarget<f64>,
    schedule: Vec<ScheduleEntry>,
}

impl MsiProgram {
    pub fn data_qubits(&self) -> usize {
        self.data_qubits
    }

    pub fn t_count(&self) -> usize {
        self.schedule.len()
    }

    pub fn total_qubits(&self) -> usize {
        self.cps.num_qubits()
    }

    pub fn cps(&self) -> &CpsTarget<f64> {
        &self.cps
    }

    pub fn schedule(&self) -> &[ScheduleEntry] {
        &self.schedule
    }
}

/// Rewrite a Clifford+T circuit over product-state inputs as an MSI program.
pub fn compile_msi(
    circ: &UniversalCircuit,
    inputs: &[SingleQubitState<f64>],
) -> Result<MsiProgram> {
    let n_data = circ.num_qubits();
    if inputs.len() != n_data {
        return Err(Error::DimensionMismatch(inputs.len(), n_data));
    }
    let t_count = circ.t_count();
    let total = n_data + t_count;
    let mut gates: Vec<CliffordGate> = Vec::new();
    // (position of first suffix gate, data qubit, ancilla wire)
    let mut events: Vec<(usize, usize, usize)> = Vec::new();
    let mut next_ancilla = n_data;
    for g in circ.gates() {
        match g {
            UGate::Clifford(c) => gates.push(*c),
            UGate::T(q) => {
                gates.push(CliffordGate::Cnot(*q, next_ancilla));
                events.push((gates.len(), *q, next_ancilla));
                next_ancilla += 1;
            }
        }
    }
    let cps_circuit = CliffordCircuit::new(total, gates.clone())?;
    let mut states = inputs.to_vec();
    states.extend(std::iter::repeat(SingleQubitState::t_state()).take(t_count));
    let cps = CpsTarget::new(states, cps_circuit)?;

    let mut schedule = Vec::with_capacity(t_count);
    for (start, q, a) in events {
        let suffix = CliffordCircuit::new(total, gates[start..].to_vec())?;
        let l = CliffordTableau::from_circuit(&suffix);
        let base = l.conjugate(&PauliString::embed_single(PauliAxis::Z, a, total)?)?;
        let s_gate = CliffordTableau::from_circuit(&CliffordCircuit::new(
            total,
            vec![CliffordGate::S(q)],
        )?);
        let correction =
            CliffordTableau::compose(&l, &CliffordTableau::compose(&s_gate, &l.inverse())?)?;
        schedule.push(ScheduleEntry { ancilla: a, data_qubit: q, suffix, base, correction });
    }
    Ok(MsiProgram { data_qubits: n_data, cps, schedule })
}

/// Outcome of one MSI execution.
#[derive(Clone, Debug, Serialize)]
pub struct MsiRun {
    /// Per-T-event ancilla outcomes: true means -1 (a correction fired).
    pub ancilla_flips: Vec<bool>,
    /// Z outcomes on the data wires, bit 1 for outcome -1.
    pub output_bits: Vec<u8>,
}

impl MsiRun {
    pub fn output_index(&self) -> usize {
        self.output_bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, b)| acc | (usize::from(*b) << j))
    }
}

/// Execute the schedule on one held copy, then read out the data register.
pub fn run_msi(
    program: &MsiProgram,
    copy: &mut AdaptiveSession,
    rng: &mut impl Rng,
) -> Result<MsiRun> {
    let total = program.total_qubits();
    if copy.density().num_qubits() != total {
        return Err(Error::DimensionMismatch(copy.density().num_qubits(), total));
    }
    let mut frame = CliffordTableau::identity(total);
    let mut ancilla_flips = Vec::with_capacity(program.schedule.len());
    for entry in &program.schedule {
        // observable on the raw copy: W^dagger (base) W for pending frame W
        let eff = frame.conjugate_inverse(&entry.base)?;
        let outcome = copy.measure(&eff, rng)?;
        let flipped = outcome < 0;
        if flipped {
            frame = CliffordTableau::compose(&entry.correction, &frame)?;
        }
        ancilla_flips.push(flipped);
    }
    let mut output_bits = Vec::with_capacity(program.data_qubits);
    for o in 0..program.data_qubits {
        let z = PauliString::embed_single(PauliAxis::Z, o, total)?;
        let eff = frame.conjugate_inverse(&z)?;
        let outcome = copy.measure(&eff, rng)?;
        output_bits.push(u8::from(outcome < 0));
    }
    Ok(MsiRun { ancilla_flips, output_bits })
}

/// Z-basis output distribution of the original Clifford+T circuit, by dense
/// simulation; index bit j is data qubit j.
pub fn ideal_output_distribution(
    circ: &UniversalCircuit,
    inputs: &[SingleQubitState<f64>],
) -> Result<Vec<f64>> {
    if inputs.len() != circ.num_qubits() {
        return Err(Error::DimensionMismatch(inputs.len(), circ.num_qubits()));
    }
    let mut st = DenseState::<f64>::product(inputs)?;
    for g in circ.gates() {
        match g {
            UGate::Clifford(c) => st.apply_gate(c),
            UGate::T(q) => st.apply_t(*q),
        }
    }
    Ok(st.probabilities())
}

/// Exact output distribution of the compiled program on a given pure copy,
/// by exhaustive enumeration of all ancilla-outcome branches.
pub fn enumerate_branches(program: &MsiProgram, copy: &DenseState<f64>) -> Result<Vec<f64>> {
    let total = program.total_qubits();
    if copy.num_qubits() != total {
        return Err(Error::DimensionMismatch(copy.num_qubits(), total));
    }
    check_enum_width(total)?;
    let mut dist = vec![0.0f64; 1 << program.data_qubits];
    descend(program, 0, copy, &CliffordTableau::identity(total), 1.0, &mut dist)?;
    Ok(dist)
}

fn check_enum_width(total: usize) -> Result<()> {
    crate::dense::check_cap(total, DENSE_QUBIT_CAP)
}

fn descend(
    program: &MsiProgram,
    depth: usize,
    state: &DenseState<f64>,
    frame: &CliffordTableau,
    weight: f64,
    dist: &mut [f64],
) -> Result<()> {
    if weight <= 0.0 {
        return Ok(());
    }
    if depth == program.schedule.len() {
        return leaf_outputs(program, 0, state, frame, weight, 0, dist);
    }
    let entry = &program.schedule[depth];
    let eff = frame.conjugate_inverse(&entry.base)?;
    for sign in [1i8, -1i8] {
        let (prob, post) = state.project_pauli(&eff, sign)?;
        if let Some(post) = post {
            let next_frame = if sign < 0 {
                CliffordTableau::compose(&entry.correction, frame)?
            } else {
                frame.clone()
            };
            descend(program, depth + 1, &post, &next_frame, weight * prob, dist)?;
        }
    }
    Ok(())
}

fn leaf_outputs(
    program: &MsiProgram,
    wire: usize,
    state: &DenseState<f64>,
    frame: &CliffordTableau,
    weight: f64,
    index: usize,
    dist: &mut [f64],
) -> Result<()> {
    if weight <= 0.0 {
        return Ok(());
    }
    if wire == program.data_qubits {
        dist[index] += weight;
        return Ok(());
    }
    let z = PauliString::embed_single(PauliAxis::Z, wire, program.total_qubits())?;
    let eff = frame.conjugate_inverse(&z)?;
    for sign in [1i8, -1i8] {
        let (prob, post) = state.project_pauli(&eff, sign)?;
        if let Some(post) = post {
            let bit = usize::from(sign < 0) << wire;
            leaf_outputs(program, wire + 1, &post, frame, weight * prob, index | bit, dist)?;
        }
    }
    Ok(())
}

/// Protocol 3 end to end: verify the prover's copies, then drive the kept
/// register through the schedule. On rejection the run aborts (`run: None`).
#[derive(Serialize)]
pub struct VerifiedRun {
    pub verify: crate::certifier::VerifyResult,
    /// Theorem guarantee on the kept copy: trace distance to the ideal
    /// output is at most sqrt(epsilon) when the verifier accepts.
    pub sqrt_epsilon: f64,
    pub run: Option<MsiRun>,
}

pub fn verify_and_run(
    program: &MsiProgram,
    spec: &crate::prover::ProverSpec,
    vcfg: &crate::certifier::VerifyConfig,
    rng: &mut impl Rng,
) -> Result<VerifiedRun> {
    let (verify, kept) = crate::certifier::verify_noniid(program.cps(), spec, vcfg)?;
    let run = match kept {
        Some(mut copy) => Some(run_msi(program, &mut copy, rng)?),
        None => None,
    };
    Ok(VerifiedRun { sqrt_epsilon: vcfg.cert.epsilon.sqrt(), verify, run })
}

/// Serializable form of a compiled program; measurement bases and frame
/// corrections are recomputed on load.
#[derive(Serialize, Deserialize)]
pub struct ProgramDoc {
    pub data_qubits: usize,
    pub t_count: usize,
    pub states: Vec<String>,
    pub circuit: String,
    pub schedule: Vec<ScheduleDoc>,
}

#[derive(Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub ancilla: usize,
    pub data_qubit: usize,
    pub base: String,
    pub suffix_start: usize,
}

impl MsiProgram {
    pub fn to_doc(&self) -> ProgramDoc {
        let gate_count = self.cps.circuit().gates().len();
        ProgramDoc {
            data_qubits: self.data_qubits,
            t_count: self.schedule.len(),
            states: self
                .cps
                .states()
                .iter()
                .map(|s| {
                    let [x, y, z] = s.bloch();
                    format!("bloch {x:.17} {y:.17} {z:.17}")
                })
                .collect(),
            circuit: self.cps.circuit().to_string(),
            schedule: self
                .schedule
                .iter()
                .map(|e| ScheduleDoc {
                    ancilla: e.ancilla,
                    data_qubit: e.data_qubit,
                    base: e.base.to_string(),
                    suffix_start: gate_count - e.suffix.gates().len(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: &ProgramDoc) -> Result<Self> {
        let circuit = CliffordCircuit::parse(&doc.circuit)?;
        let total = circuit.num_qubits();
        if total != doc.data_qubits + doc.t_count || doc.states.len() != total {
            return Err(Error::Config("inconsistent program document".into()));
        }
        let mut states = Vec::with_capacity(total);
        for (i, line) in doc.states.iter().enumerate() {
            states.push(
                SingleQubitState::parse_spec(line)
                    .map_err(|msg| Error::Parse { line: i + 1, msg })?,
            );
        }
        let cps = CpsTarget::new(states, circuit)?;
        let gates = cps.circuit().gates().to_vec();
        let mut schedule = Vec::with_capacity(doc.schedule.len());
        for d in &doc.schedule {
            if d.suffix_start > gates.len() || d.ancilla >= total || d.data_qubit >= total {
                return Err(Error::Config("schedule entry out of range".into()));
            }
            let suffix = CliffordCircuit::new(total, gates[d.suffix_start..].to_vec())?;
            let l = CliffordTableau::from_circuit(&suffix);
            let base = l.conjugate(&PauliString::embed_single(PauliAxis::Z, d.ancilla, total)?)?;
            if base.to_string() != d.base {
                return Err(Error::Config(format!(
                    "schedule base mismatch: recomputed {base}, document says {}",
                    d.base
                )));
            }
            let s_gate = CliffordTableau::from_circuit(&CliffordCircuit::new(
                total,
                vec![CliffordGate::S(d.data_qubit)],
            )?);
            let correction =
                CliffordTableau::compose(&l, &CliffordTableau::compose(&s_gate, &l.inverse())?)?;
            schedule.push(ScheduleEntry {
                ancilla: d.ancilla,
                data_qubit: d.data_qubit,
                suffix,
                base,
                correction,
            });
        }
        Ok(MsiProgram { data_qubits: doc.data_qubits, cps, schedule })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::build_cps_dense;
    use crate::prover::AdaptiveSession;
    use crate::seed::rng_from;
    use approx::assert_abs_diff_eq;

    fn tvd(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
    }

    fn plus_inputs(n: usize) -> Vec<SingleQubitState<f64>> {
        vec![SingleQubitState::plus(); n]
    }

    #[test]
    fn parse_and_display_clifford_plus_t() {
        let c = UniversalCircuit::parse("QUBITS 2\nH 0\nT 0\nCNOT 0 1\nT 1\n").unwrap();
        assert_eq!(c.num_qubits(), 2);
        assert_eq!(c.t_count(), 2);
        let again = UniversalCircuit::parse(&c.to_string()).unwrap();
        assert_eq!(c, again);
        assert!(UniversalCircuit::parse("T 0 1").is_err());
        assert!(UniversalCircuit::parse("TDG 0").is_err());
    }

    #[test]
    fn compile_shape() {
        let c = UniversalCircuit::parse("QUBITS 2\nH 0\nT 0\nCNOT 0 1\nT 1\n").unwrap();
        let p = compile_msi(&c, &plus_inputs(2)).unwrap();
        assert_eq!(p.data_qubits(), 2);
        assert_eq!(p.t_count(), 2);
        assert_eq!(p.total_qubits(), 4);
        // entanglers in place: H, CNOT(0,2), CNOT(0,1), CNOT(1,3)
        assert_eq!(p.cps().circuit().gates().len(), 4);
        assert_eq!(p.cps().circuit().gates()[1], CliffordGate::Cnot(0, 2));
        assert_eq!(p.cps().circuit().gates()[3], CliffordGate::Cnot(1, 3));
    }

    #[test]
    fn single_t_on_plus_matches_dense() {
        // T|+> data qubit, read out in Z: uniform distribution.
        let c = UniversalCircuit::parse("QUBITS 1\nT 0").unwrap();
        let p = compile_msi(&c, &plus_inputs(1)).unwrap();
        let copy = build_cps_dense(p.cps()).unwrap();
        let got = enumerate_branches(&p, &copy).unwrap();
        let want = ideal_output_distribution(&c, &plus_inputs(1)).unwrap();
        assert_abs_diff_eq!(tvd(&got, &want), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn t_then_hadamard_is_outcome_sensitive() {
        // H T |+> separates T from T^dagger, so the S correction matters.
        let c = UniversalCircuit::parse("QUBITS 1\nT 0\nH 0").unwrap();
        let p = compile_msi(&c, &plus_inputs(1)).unwrap();
        let copy = build_cps_dense(p.cps()).unwrap();
        let got = enumerate_branches(&p, &copy).unwrap();
        let want = ideal_output_distribution(&c, &plus_inputs(1)).unwrap();
        assert!(tvd(&got, &want) < 1e-12, "{got:?} vs {want:?}");
        assert!((want[0] - 0.853_553_390_593_273_8).abs() < 1e-12);
    }

    #[test]
    fn random_circuits_match_dense_reference() {
        let mut rng = rng_from(17);
        for trial in 0..20 {
            let n = 1 + trial % 3;
            let t_count = 1 + trial % 4;
            let c = UniversalCircuit::random(n, 2 * n + 2, t_count, &mut rng);
            let inputs: Vec<_> = (0..n)
                .map(|_| {
                    SingleQubitState::<f64>::from_angles(
                        rng.gen::<f64>() * std::f64::consts::PI,
                        rng.gen::<f64>() * std::f64::consts::TAU,
                    )
                })
                .collect();
            let p = compile_msi(&c, &inputs).unwrap();
            let copy = build_cps_dense(p.cps()).unwrap();
            let got = enumerate_branches(&p, &copy).unwrap();
            let want = ideal_output_distribution(&c, &inputs).unwrap();
            assert!(
                tvd(&got, &want) < 1e-9,
                "trial {trial}: tvd {}",
                tvd(&got, &want)
            );
        }
    }

    #[test]
    fn sampled_runs_agree_with_ideal_distribution() {
        let c = UniversalCircuit::parse("QUBITS 2\nH 0\nT 0\nCNOT 0 1\nH 1\nT 1\nH 1").unwrap();
        let inputs = plus_inputs(2);
        let p = compile_msi(&c, &inputs).unwrap();
        let want = ideal_output_distribution(&c, &inputs).unwrap();
        let psi = build_cps_dense(p.cps()).unwrap();
        let mut rng = rng_from(23);
        let shots = 20_000usize;
        let mut counts = vec![0usize; want.len()];
        for _ in 0..shots {
            let mut copy = AdaptiveSession::from_density(crate::dense::DenseDensity::from_pure(&psi));
            let run = run_msi(&p, &mut copy, &mut rng).unwrap();
            counts[run.output_index()] += 1;
        }
        let got: Vec<f64> = counts.iter().map(|&k| k as f64 / shots as f64).collect();
        assert!(tvd(&got, &want) < 0.02, "tvd {}", tvd(&got, &want));
    }

    #[test]
    fn doc_roundtrip() {
        let mut rng = rng_from(31);
        let c = UniversalCircuit::random(2, 5, 3, &mut rng);
        let inputs = plus_inputs(2);
        let p = compile_msi(&c, &inputs).unwrap();
        let json = serde_json::to_string(&p.to_doc()).unwrap();
        let doc: ProgramDoc = serde_json::from_str(&json).unwrap();
        let q = MsiProgram::from_doc(&doc).unwrap();
        assert_eq!(p.cps().circuit(), q.cps().circuit());
        for (a, b) in p.schedule().iter().zip(q.schedule()) {
            assert_eq!(a.base, b.base);
            assert_eq!(a.ancilla, b.ancilla);
        }
        let copy = build_cps_dense(q.cps()).unwrap();
        let got = enumerate_branches(&q, &copy).unwrap();
        let want = ideal_output_distribution(&c, &inputs).unwrap();
        assert!(tvd(&got, &want) < 1e-9);
    }
}
