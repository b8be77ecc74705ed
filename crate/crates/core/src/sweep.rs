//! Parameter sweeps: repeated certification trials over a noise or
//! protocol-parameter grid, parallelized per trial with stable seeding.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certifier::{certify_iid, sample_size_iid, CertConfig};
use crate::config::{build_honest, HonestNoiseConfig};
use crate::error::{Error, Result};
use crate::prover::ProverSpec;
use crate::seed::derive_seed;
use crate::target::{build_plan, CpsTarget};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Sweep the protocol error budget epsilon.
    Epsilon,
    /// Sweep a uniform per-qubit depolarizing rate on the honest prover.
    Depolarizing,
    /// Sweep a uniform per-qubit dephasing rate on the honest prover.
    Dephasing,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Depolarizing => "depolarizing",
            SweepParam::Dephasing => "dephasing",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub trials: u64,
    /// Extra honest-prover noise applied at every grid point.
    #[serde(default)]
    pub base_noise: HonestNoiseConfig,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub trials: u64,
    pub n_per_trial: u64,
    pub mean_w: f64,
    pub stderr_w: f64,
    pub accept_rate: f64,
}

fn point_config(
    sweep: &SweepConfig,
    base: &CertConfig,
    value: f64,
) -> Result<(CertConfig, HonestNoiseConfig)> {
    let mut cert = *base;
    let mut noise = sweep.base_noise.clone();
    match sweep.param {
        SweepParam::Epsilon => cert.epsilon = value,
        SweepParam::Depolarizing => noise.depolarizing = vec![value],
        SweepParam::Dephasing => noise.dephasing = vec![value],
    }
    if !matches!(sweep.param, SweepParam::Epsilon) && !(0.0..=1.0).contains(&value) {
        return Err(Error::Config(format!(
            "{} value {value} outside [0, 1]",
            sweep.param.name()
        )));
    }
    Ok((cert, noise))
}

/// Run the sweep; trials are independent and parallel, each with a seed
/// derived from (master seed, parameter index, trial index).
pub fn run_sweep(
    target: &CpsTarget<f64>,
    base: &CertConfig,
    sweep: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if sweep.trials == 0 || sweep.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value and one trial".into()));
    }
    let mut rows = Vec::with_capacity(sweep.values.len());
    for (vi, &value) in sweep.values.iter().enumerate() {
        let (cert, noise) = point_config(sweep, base, value)?;
        cert.validate()?;
        let plan = build_plan(target, cert.mode)?;
        let n_per_trial = sample_size_iid(&plan, &cert)?;
        let prover = ProverSpec::Honest(build_honest(&noise, target)?);
        let tag = format!("sweep/{}/{vi}", sweep.param.name());
        let outcomes: Vec<(f64, bool)> = (0..sweep.trials)
            .into_par_iter()
            .map(|t| {
                let mut c = cert;
                c.seed = derive_seed(base.seed, &tag, t);
                let r = certify_iid(target, &prover, &c)?;
                Ok((r.witness, r.accepted))
            })
            .collect::<Result<_>>()?;
        let k = outcomes.len() as f64;
        let mean_w = outcomes.iter().map(|(w, _)| w).sum::<f64>() / k;
        let var = outcomes.iter().map(|(w, _)| (w - mean_w).powi(2)).sum::<f64>() / k.max(2.0);
        let accept_rate = outcomes.iter().filter(|(_, a)| *a).count() as f64 / k;
        rows.push(SweepRow {
            param: value,
            trials: sweep.trials,
            n_per_trial,
            mean_w,
            stderr_w: (var / k).sqrt(),
            accept_rate,
        });
    }
    Ok(rows)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("param,trials,N_per_trial,mean_W,stderr_W,accept_rate\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.4}\n",
            r.param, r.trials, r.n_per_trial, r.mean_w, r.stderr_w, r.accept_rate
        ));
    }
    out
}
