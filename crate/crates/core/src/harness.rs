//! End-to-end tracing attacks.
//!
//! One trial samples a codebook, pads and permutes it, optionally hides it
//! among `k - 1` decoy blocks, runs the mechanisms, maps their answers back
//! to the original columns and traces. [`estimate_leakage`] repeats this over
//! independent trials and aggregates the outcomes.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, mismatch, Result};
use crate::fp_code::{code_length, generate_instance, trace, Codebook, TraceKey, TraceResult, DEFAULT_LENGTH_CONSTANT};
use crate::matrix::SignMatrix;
use crate::pap::{
    extract, k_copy_embed, padding_plan, pap_transform_random, strongly_agrees, PaddingMode, PaddingPlan, PapInstance,
};
use crate::reductions::{sign_signs, WeaklyAccurateMechanism};
use crate::rng::{derive_seed, seeded, stream, SimRng};
use crate::stats::binomial_ci95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Averaging,
    Clustering,
    Svd,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackConfig {
    pub n0: usize,
    pub beta: f64,
    /// Padding parameter: `l = ceil(d0 / (2 alpha))`.
    pub alpha: f64,
    pub k: usize,
    pub lambda: f64,
    pub task: Task,
    pub trials: usize,
    pub seed: u64,
    pub d0_override: Option<usize>,
    pub z: f64,
    pub xi: f64,
    /// Run trials on the rayon pool. Results do not depend on this.
    pub parallel: bool,
}

impl AttackConfig {
    pub fn new(task: Task, n0: usize, beta: f64, alpha: f64) -> Self {
        AttackConfig {
            n0,
            beta,
            alpha,
            k: 1,
            lambda: 1.0,
            task,
            trials: 200,
            seed: 0,
            d0_override: None,
            z: 2.0,
            xi: 0.0,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.k == 0 {
            return Err(invalid("n0 and k must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(format!("alpha = {} must lie in (0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(invalid(format!("beta = {} must lie in (0, 1]", self.beta)));
        }
        if self.d0_override == Some(0) {
            return Err(invalid("d0 must be positive"));
        }
        Ok(())
    }

    /// Code width: the override if set, otherwise the full code length.
    pub fn original_width(&self) -> Result<usize> {
        match self.d0_override {
            Some(d0) => Ok(d0),
            None => code_length(self.n0, self.beta, DEFAULT_LENGTH_CONSTANT),
        }
    }

    pub fn plan(&self) -> Result<PaddingPlan> {
        padding_plan(self.alpha, PaddingMode::FromOriginal(self.original_width()?))
    }

    /// Rows of the matrix handed to the mechanisms.
    pub fn input_rows(&self) -> usize {
        self.n0 * self.k
    }
}

/// The matrix a mechanism sees, with the secret needed to read its answer.
#[derive(Clone, Debug)]
pub struct PreparedInput {
    pub pap: PapInstance,
    pub slot: usize,
    embedded: Option<SignMatrix>,
}

impl PreparedInput {
    pub fn input(&self) -> &SignMatrix {
        self.embedded.as_ref().unwrap_or(&self.pap.padded)
    }
}

/// Pads and permutes `x`, then for `k > 1` places it at a uniformly random
/// slot among `k - 1` decoys. The random draws do not depend on `x`.
pub fn prepare_input<R: Rng + ?Sized>(
    x: &SignMatrix,
    plan: &PaddingPlan,
    k: usize,
    rng: &mut R,
) -> Result<PreparedInput> {
    if x.cols() != plan.original_width {
        return Err(mismatch(format!("codebook width {} differs from plan width {}", x.cols(), plan.original_width)));
    }
    let pap = pap_transform_random(x, plan.pad_len, rng)?;
    if k <= 1 {
        return Ok(PreparedInput { pap, slot: 0, embedded: None });
    }
    let slot = rng.random_range(0..k);
    let embedded = k_copy_embed(&pap.padded, slot, k, plan.pad_len, plan.original_width, rng)?;
    Ok(PreparedInput { pap, slot, embedded: Some(embedded) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AttackOutcome {
    pub result: TraceResult,
    pub coalition_hit: bool,
    /// Some mechanism's answer strongly agreed with the hidden block.
    pub agreement: bool,
}

/// Runs every mechanism on the same prepared input and traces each answer.
/// The first accusation wins. Each mechanism gets a copy of the same
/// generator state.
pub fn attack_instance(
    mechs: &[WeaklyAccurateMechanism],
    codebook: &Codebook,
    key: &TraceKey,
    prepared: &PreparedInput,
    rng: &mut SimRng,
) -> Result<AttackOutcome> {
    if mechs.is_empty() {
        return Err(invalid("at least one mechanism is needed"));
    }
    let mech_rng = seeded(derive_seed(rng));
    let mut result = TraceResult::NoAccusation;
    let mut agreement = false;
    for mech in mechs {
        let out = mech.run(prepared.input(), &mut mech_rng.clone())?;
        agreement |= strongly_agrees(&sign_signs(&out), &prepared.pap.padded)?;
        let q = extract(&out, &prepared.pap.perm, prepared.pap.original_width)?;
        drop(out);
        if result == TraceResult::NoAccusation {
            result = trace(codebook, key, &q)?;
        }
    }
    let coalition_hit = matches!(result, TraceResult::Accused(i) if i < codebook.n());
    Ok(AttackOutcome { result, coalition_hit, agreement })
}

/// One trial of the attack.
pub fn run_attack(mechs: &[WeaklyAccurateMechanism], config: &AttackConfig, rng: &mut SimRng) -> Result<AttackOutcome> {
    config.validate()?;
    if let Some(m) = mechs.iter().find(|m| m.k > 1 && m.k != config.k) {
        return Err(mismatch(format!("{} expects k = {}, config has k = {}", m.label, m.k, config.k)));
    }
    let plan = config.plan()?;
    let inst = generate_instance(config.n0, config.beta, rng, Some(plan.original_width))?;
    let codebook = Codebook { matrix: inst.codebook };
    let key = TraceKey { reference: inst.reference };
    let prepared = prepare_input(&codebook.matrix, &plan, config.k, rng)?;
    attack_instance(mechs, &codebook, &key, &prepared, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rates {
    pub trace_success: f64,
    pub false_accusation: f64,
    pub no_accusation: f64,
    pub agreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeakageReport {
    pub trials: usize,
    pub rates: Rates,
    /// Half-widths of normal-approximation 95% intervals.
    pub ci95: Rates,
    #[serde(skip)]
    pub outcomes: Vec<AttackOutcome>,
}

impl LeakageReport {
    pub fn from_outcomes(outcomes: Vec<AttackOutcome>) -> Result<Self> {
        let trials = outcomes.len();
        if trials == 0 {
            return Err(invalid("no trials to aggregate"));
        }
        let count = |f: &dyn Fn(&AttackOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let hits = count(&|o| o.coalition_hit);
        let none = count(&|o| o.result == TraceResult::NoAccusation);
        let agree = count(&|o| o.agreement);
        let false_acc = trials - hits - none;
        let t = trials as f64;
        let rates = Rates {
            trace_success: hits as f64 / t,
            false_accusation: false_acc as f64 / t,
            no_accusation: none as f64 / t,
            agreement: agree as f64 / t,
        };
        let ci95 = Rates {
            trace_success: binomial_ci95(rates.trace_success, trials),
            false_accusation: binomial_ci95(rates.false_accusation, trials),
            no_accusation: binomial_ci95(rates.no_accusation, trials),
            agreement: binomial_ci95(rates.agreement, trials),
        };
        Ok(LeakageReport { trials, rates, ci95, outcomes })
    }

    pub fn accusations(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result != TraceResult::NoAccusation).count()
    }

    /// Trace-success rate among trials whose answer strongly agreed. `None`
    /// when no trial agreed.
    pub fn success_rate_given_agreement(&self) -> Option<f64> {
        let agreed: Vec<_> = self.outcomes.iter().filter(|o| o.agreement).collect();
        if agreed.is_empty() {
            return None;
        }
        Some(agreed.iter().filter(|o| o.coalition_hit).count() as f64 / agreed.len() as f64)
    }
}

/// Runs `config.trials` independent trials. Trial `t` draws from stream
/// `t + 1` of a seed taken from `rng`, so the report does not depend on
/// `config.parallel`.
pub fn estimate_leakage(
    mechs: &[WeaklyAccurateMechanism],
    config: &AttackConfig,
    rng: &mut SimRng,
) -> Result<LeakageReport> {
    config.validate()?;
    if config.trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let base = derive_seed(rng);
    let one = |t: usize| run_attack(mechs, config, &mut stream(base, t as u64 + 1));
    let outcomes: Result<Vec<AttackOutcome>> = if config.parallel {
        (0..config.trials).into_par_iter().map(one).collect()
    } else {
        (0..config.trials).map(one).collect()
    };
    LeakageReport::from_outcomes(outcomes?)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a AttackConfig,
    rates: Rates,
    ci95: Rates,
    runtime_seconds: Option<f64>,
}

/// Writes `{config, rates, ci95, runtime_seconds}` as pretty JSON.
pub fn write_json_report<W: Write>(
    out: W,
    config: &AttackConfig,
    report: &LeakageReport,
    runtime_seconds: Option<f64>,
) -> Result<()> {
    let doc = JsonReport { config, rates: report.rates, ci95: report.ci95, runtime_seconds };
    serde_json::to_writer_pretty(out, &doc).map_err(|e| crate::error::Error::Io(e.into()))
}

/// One row per trial: `trial,accused,coalition_hit,agreement`. `accused` is
/// the 1-based user number, empty when nobody was accused.
pub fn write_csv_report<W: Write>(out: W, report: &LeakageReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| crate::error::Error::Io(e.into());
    w.write_record(["trial", "accused", "coalition_hit", "agreement"]).map_err(io)?;
    for (t, o) in report.outcomes.iter().enumerate() {
        let accused = o.result.accused().map(|i| (i + 1).to_string()).unwrap_or_default();
        w.write_record([t.to_string(), accused, o.coalition_hit.to_string(), o.agreement.to_string()]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock seconds taken by `f`.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Points;
    use crate::mechanisms::{block_consensus_mechanism, constant_mechanism, exact_average};
    use crate::reductions::{averaging_adversary, Estimator};
    use std::sync::Arc;

    fn averaging() -> WeaklyAccurateMechanism {
        let est: Estimator = Arc::new(|_, p: &dyn Points, _: &mut SimRng| exact_average(p));
        averaging_adversary(est, 1.0).unwrap()
    }

    fn small_config(task: Task) -> AttackConfig {
        AttackConfig { trials: 40, seed: 5, ..AttackConfig::new(task, 3, 0.1, 1.0 / 41.0) }
    }

    #[test]
    fn exact_average_is_traced_and_constant_is_not() {
        let config = small_config(Task::Averaging);
        let r = estimate_leakage(&[averaging()], &config, &mut seeded(1)).unwrap();
        assert!(r.rates.trace_success >= 0.9, "{:?}", r.rates);
        assert_eq!(r.rates.agreement, 1.0);
        let c = estimate_leakage(&[constant_mechanism(1.0).unwrap()], &config, &mut seeded(1)).unwrap();
        assert!(c.rates.trace_success <= 0.1, "{:?}", c.rates);
    }

    #[test]
    fn rates_partition_and_determinism() {
        let config = AttackConfig { d0_override: Some(2_000), ..small_config(Task::Averaging) };
        let a = estimate_leakage(&[averaging()], &config, &mut seeded(2)).unwrap();
        let serial = AttackConfig { parallel: false, ..config.clone() };
        let b = estimate_leakage(&[averaging()], &serial, &mut seeded(2)).unwrap();
        assert_eq!(a, b);
        let r = a.rates;
        assert!((r.trace_success + r.false_accusation + r.no_accusation - 1.0).abs() < 1e-12);
        assert_eq!(r.false_accusation, 0.0);
    }

    #[test]
    fn doubling_trials_shrinks_intervals() {
        let outcome = |hit| AttackOutcome {
            result: if hit { TraceResult::Accused(0) } else { TraceResult::NoAccusation },
            coalition_hit: hit,
            agreement: hit,
        };
        let base: Vec<_> = (0..200).map(|t| outcome(t % 4 != 0)).collect();
        let doubled: Vec<_> = base.iter().chain(&base).copied().collect();
        let a = LeakageReport::from_outcomes(base).unwrap();
        let b = LeakageReport::from_outcomes(doubled).unwrap();
        assert!((a.ci95.trace_success / b.ci95.trace_success - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.success_rate_given_agreement(), Some(1.0));
    }

    #[test]
    fn neighbouring_codebooks_give_neighbouring_inputs() {
        let plan = padding_plan(0.25, PaddingMode::FromOriginal(50)).unwrap();
        let mut rng = seeded(3);
        for trial in 0..100 {
            let x = generate_instance(4, 0.1, &mut rng, Some(50)).unwrap().codebook;
            let mut rows = x.to_rows();
            let changed = trial % 4;
            rows[changed] = (0..50).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let y = SignMatrix::from_rows(&rows).unwrap();
            let k = 1 + trial % 3;
            let seed = rng.random::<u64>();
            let a = prepare_input(&x, &plan, k, &mut seeded(seed)).unwrap();
            let b = prepare_input(&y, &plan, k, &mut seeded(seed)).unwrap();
            assert_eq!(a.slot, b.slot);
            let (ia, ib) = (a.input(), b.input());
            let differing = (0..ia.rows()).filter(|&i| ia.row(i) != ib.row(i)).count();
            assert!(differing <= 1);
        }
    }

    #[test]
    fn k_copies_dilute_the_consensus_oracle() {
        let config = AttackConfig { k: 3, trials: 90, ..small_config(Task::Raw) };
        let mech = block_consensus_mechanism(3, 3).unwrap();
        let r = estimate_leakage(&[mech], &config, &mut seeded(4)).unwrap();
        assert!(r.rates.trace_success > 0.1 && r.rates.trace_success < 0.6, "{:?}", r.rates);
        assert!(r.success_rate_given_agreement().unwrap() >= r.rates.trace_success);
    }

    #[test]
    fn reports_serialize() {
        let config = AttackConfig { trials: 3, d0_override: Some(100), ..small_config(Task::Averaging) };
        let r = estimate_leakage(&[averaging()], &config, &mut seeded(0)).unwrap();
        let mut json = Vec::new();
        write_json_report(&mut json, &config, &r, None).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["config"]["task"], "averaging");
        assert_eq!(v["config"]["n0"], 3);
        assert!(v["runtime_seconds"].is_null());
        assert!(v["rates"]["trace_success"].is_number());
        let mut csv = Vec::new();
        write_csv_report(&mut csv, &r).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "trial,accused,coalition_hit,agreement");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn config_validation() {
        let mut c = small_config(Task::Averaging);
        c.k = 0;
        assert!(c.validate().is_err());
        let c = AttackConfig { alpha: 0.0, ..small_config(Task::Averaging) };
        assert!(run_attack(&[averaging()], &c, &mut seeded(0)).is_err());
        assert!(run_attack(&[], &small_config(Task::Averaging), &mut seeded(0)).is_err());
    }
}
