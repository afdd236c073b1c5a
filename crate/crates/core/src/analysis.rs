//! Independent oracles for the decryption-stage outcome distribution and
//! Monte-Carlo statistics for the attack models.
//!
//! Outcome indices pack registers register-major: bits `r·m .. (r+1)·m` hold
//! `y_r` for `r < n − 1` and Alice's register sits on top. Written as a
//! binary string of width `n·m` an index therefore reads `a y_{n−2} … y_0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::adversary::{attack_tuple, eve_postprocess, AttackKind, EveStrategy};
use crate::bitvec::{concat_aiv, BitVector};
use crate::distribution::make_decoy_tuple;
use crate::error::{Error, Result};
use crate::protocol::{run_protocol_with_rng, Registers, Scenario, Verdict};
use crate::statevec::{prepare_ghz, GhzTopology, MeasurementBasis, PureState, SUPPORT_CUTOFF};

/// Largest `n·m` the joint state-vector oracle accepts.
pub const JOINT_ORACLE_MAX_QUBITS: usize = 20;
pub const FACTORIZED_MAX_PARTIES: usize = 12;
pub const FACTORIZED_MAX_BITS: usize = 20;
/// Largest support, as a power of two, the factorized oracle materializes.
pub const FACTORIZED_MAX_SUPPORT_LOG2: usize = 22;

/// Half-width multiplier used for every reported confidence radius.
pub const CONFIDENCE_Z: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub n: usize,
    pub m: usize,
    /// `(outcome index, probability)`, sorted by index, zero-probability outcomes omitted.
    pub entries: Vec<(u64, f64)>,
}

impl OutcomeDistribution {
    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn probability(&self, outcome: u64) -> f64 {
        self.entries
            .binary_search_by_key(&outcome, |e| e.0)
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn same_support(&self, other: &Self) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.0 == b.0)
    }

    /// Largest probability difference over the union of both supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.entries.len() || j < other.entries.len() {
            let a = self.entries.get(i);
            let b = other.entries.get(j);
            let diff = match (a, b) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    i += 1;
                    j += 1;
                    (x.1 - y.1).abs()
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    i += 1;
                    x.1
                }
                (Some(_), Some(y)) => {
                    j += 1;
                    y.1
                }
                (Some(x), None) => {
                    i += 1;
                    x.1
                }
                (None, Some(y)) => {
                    j += 1;
                    y.1
                }
                (None, None) => unreachable!(),
            };
            worst = worst.max(diff);
        }
        worst
    }

    pub fn registers(&self, outcome: u64) -> Registers {
        unpack_registers(outcome, self.n, self.m)
    }

    /// `"a y_{n−2} … y_0"` for an outcome index.
    pub fn label(&self, outcome: u64) -> String {
        self.registers(outcome).outcome_label()
    }
}

pub fn outcome_index(registers: &Registers) -> u64 {
    let m = registers.alice.len();
    let mut index = 0u64;
    for (r, reg) in registers.agents.iter().chain(std::iter::once(&registers.alice)).enumerate() {
        index |= reg.to_u64().expect("register fits in a word") << (r * m);
    }
    index
}

fn unpack_registers(outcome: u64, n: usize, m: usize) -> Registers {
    let reg = |r: usize| BitVector::from_u64(outcome >> (r * m), m);
    Registers {
        alice: reg(n - 1),
        agents: (0..n - 1).map(reg).collect(),
    }
}

/// How the output register is modelled in the joint oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRegister {
    /// Alice's oracle applied as a sign on her qubit's |1⟩ branch.
    PhaseKickback,
    /// An explicit qubit in |−⟩ targeted by CNOTs, checked to stay |−⟩ and then dropped.
    Explicit,
}

/// Exact outcome distribution from the full `n·m`-qubit state.
pub fn joint_oracle(aiv: &BitVector, n: usize) -> Result<OutcomeDistribution> {
    joint_oracle_with(aiv, n, OutputRegister::PhaseKickback)
}

pub fn joint_oracle_with(aiv: &BitVector, n: usize, output: OutputRegister) -> Result<OutcomeDistribution> {
    let m = aiv.len();
    if n < 2 || m == 0 {
        return Err(Error::InvalidScenario("joint oracle needs n ≥ 2 and m ≥ 1".into()));
    }
    if n * m > JOINT_ORACLE_MAX_QUBITS {
        return Err(Error::OracleCap(format!(
            "n·m = {} exceeds {JOINT_ORACLE_MAX_QUBITS}",
            n * m
        )));
    }
    let width = n * m;
    let extra = usize::from(output == OutputRegister::Explicit);
    let mut state = PureState::zero(width + extra)?;
    let alice = |j: usize| (n - 1) * m + j;
    for j in 0..m {
        state.apply_hadamard(alice(j))?;
        for r in 0..n - 1 {
            state.apply_cnot(alice(j), r * m + j)?;
        }
    }
    match output {
        OutputRegister::PhaseKickback => {
            for j in (0..m).filter(|&j| aiv.get(j)) {
                state.apply_z(alice(j))?;
            }
        }
        OutputRegister::Explicit => {
            state.apply_x(width)?;
            state.apply_hadamard(width)?;
            for j in (0..m).filter(|&j| aiv.get(j)) {
                state.apply_cnot(alice(j), width)?;
            }
        }
    }
    for q in 0..width {
        state.apply_hadamard(q)?;
    }
    if output == OutputRegister::Explicit {
        let (rest, out) = state
            .split_last()
            .ok_or_else(|| Error::InvalidState("output register entangled".into()))?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        if (out[0].re - h).abs() > 1e-9 || (out[1].re + h).abs() > 1e-9 || out[1].im.abs() > 1e-9 {
            return Err(Error::InvalidState("output register left |−⟩".into()));
        }
        state = rest;
    }
    let entries = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > SUPPORT_CUTOFF)
        .map(|(i, a)| (i as u64, a.norm_sqr()))
        .collect();
    Ok(OutcomeDistribution { n, m, entries })
}

/// Per-tuple `n`-bit distributions combined as a product over AIV bits.
pub fn factorized_oracle(aiv: &BitVector, n: usize) -> Result<OutcomeDistribution> {
    let m = aiv.len();
    if n < 2 || m == 0 {
        return Err(Error::InvalidScenario("factorized oracle needs n ≥ 2 and m ≥ 1".into()));
    }
    if n > FACTORIZED_MAX_PARTIES || m > FACTORIZED_MAX_BITS {
        return Err(Error::OracleCap(format!(
            "n = {n}, m = {m} exceeds n ≤ {FACTORIZED_MAX_PARTIES}, m ≤ {FACTORIZED_MAX_BITS}"
        )));
    }
    if m * (n - 1) > FACTORIZED_MAX_SUPPORT_LOG2 {
        return Err(Error::OracleCap(format!(
            "support of 2^{} outcomes exceeds 2^{FACTORIZED_MAX_SUPPORT_LOG2}; use analytic sampling",
            m * (n - 1)
        )));
    }
    let mut entries: Vec<(u64, f64)> = vec![(0, 1.0)];
    for j in 0..m {
        let mut tuple = prepare_ghz(n, GhzTopology::LogDepth)?;
        if aiv.get(j) {
            tuple.apply_z(n - 1)?;
        }
        let local: Vec<(u64, f64)> = tuple
            .probabilities(&vec![MeasurementBasis::Hadamard; n])?
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > SUPPORT_CUTOFF * SUPPORT_CUTOFF)
            .map(|(label, p)| {
                let spread = (0..n)
                    .filter(|r| label >> r & 1 == 1)
                    .fold(0u64, |acc, r| acc | 1u64 << (r * m + j));
                (spread, p)
            })
            .collect();
        entries = entries
            .iter()
            .flat_map(|&(idx, p)| local.iter().map(move |&(bits, q)| (idx | bits, p * q)))
            .collect();
    }
    entries.sort_unstable_by_key(|e| e.0);
    Ok(OutcomeDistribution { n, m, entries })
}

/// Samples registers from the uniform solution set of `a ⊕ y_{n−2} ⊕ … ⊕ y_0 = aiv`.
pub fn analytic_sample<R: Rng + ?Sized>(aiv: &BitVector, n: usize, rng: &mut R) -> Registers {
    let m = aiv.len();
    let agents: Vec<BitVector> = (0..n - 1)
        .map(|_| BitVector::from_bits_lsb_first((0..m).map(|_| rng.random::<bool>())))
        .collect();
    let alice = agents
        .iter()
        .fold(aiv.clone(), |acc, y| acc.xor(y).expect("equal lengths"));
    Registers { alice, agents }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of observed outcome counts against `expected`.
/// Adjacent cells are pooled until each group expects at least five samples;
/// any observation outside the support yields p = 0.
pub fn chi_square_gof(observed: &[u64], expected: &OutcomeDistribution) -> ChiSquare {
    let total = observed.len() as f64;
    let mut sorted = observed.to_vec();
    sorted.sort_unstable();
    let mut counts = Vec::with_capacity(expected.entries.len());
    let mut cursor = 0;
    for &(idx, _) in &expected.entries {
        let start = cursor;
        while cursor < sorted.len() && sorted[cursor] < idx {
            cursor += 1;
        }
        if cursor > start {
            return ChiSquare {
                statistic: f64::INFINITY,
                dof: 0,
                p_value: 0.0,
            };
        }
        let first = cursor;
        while cursor < sorted.len() && sorted[cursor] == idx {
            cursor += 1;
        }
        counts.push((cursor - first) as f64);
    }
    if cursor < sorted.len() {
        return ChiSquare {
            statistic: f64::INFINITY,
            dof: 0,
            p_value: 0.0,
        };
    }

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (count, &(_, p)) in counts.iter().zip(&expected.entries) {
        obs += count;
        exp += p * total;
        if exp >= 5.0 {
            groups.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => groups.push((obs, exp)),
        }
    }
    let statistic: f64 = groups.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = groups.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map(|d| 1.0 - d.cdf(statistic))
            .unwrap_or(0.0)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub center: f64,
    pub radius: f64,
}

impl Rate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (center, radius) = wilson_interval(successes, trials, CONFIDENCE_Z);
        let value = if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        };
        Self {
            successes,
            trials,
            value,
            center,
            radius,
        }
    }
}

/// Wilson score interval as `(center, half-width)`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 0.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let radius = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (center, radius)
}

/// Per-trial summary, one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub errors: usize,
    pub decoy_checks: usize,
    pub verdict: Verdict,
    pub eve_bit_accuracy: f64,
    #[serde(skip)]
    pub eve_correct: usize,
    #[serde(skip)]
    pub eve_bits: usize,
    #[serde(skip)]
    pub attacked_checks: usize,
    #[serde(skip)]
    pub attacked_errors: usize,
    #[serde(skip)]
    pub decoy_tuples: usize,
    #[serde(skip)]
    pub tuples_with_error: usize,
    #[serde(skip)]
    pub recovered_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentStats {
    pub trials: u64,
    /// Over every decoy qubit Alice checks, `d·(n − 1)` per trial.
    pub decoy_error_rate: Rate,
    /// Over decoy qubits on the attacked agents' wires only.
    pub attacked_qubit_error_rate: Rate,
    /// Decoy tuples with at least one wrong outcome among attacked qubits.
    pub attacked_tuple_error_rate: Rate,
    pub abort_rate: Rate,
    pub eve_bit_accuracy: Rate,
    /// Among runs that passed validation, fraction where every agent got its PIV.
    pub recovery_rate: Rate,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub stats: ExperimentStats,
    pub trials: Vec<TrialOutcome>,
}

/// Independent generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trial(scenario: &Scenario, trial: u64) -> Result<TrialOutcome> {
    let mut rng = trial_rng(scenario.seed, trial);
    let run = run_protocol_with_rng(scenario, &mut rng)?;
    let t = &run.transcript;
    let v = t.validation.as_ref().expect("validation always runs");
    let targets = scenario.eve.targets();
    let attacked: Vec<_> = v.checks.iter().filter(|c| targets.contains(&c.agent)).collect();
    let mut positions: Vec<usize> = v.checks.iter().map(|c| c.position).collect();
    positions.dedup();
    let tuples_with_error = positions
        .iter()
        .filter(|&&p| attacked.iter().any(|c| c.position == p && c.is_error()))
        .count();

    let guesses = eve_postprocess(&run.eve, t, &mut rng);
    let (mut correct, mut bits) = (0, 0);
    for (guess, piv) in guesses.iter().zip(&scenario.pivs) {
        bits += piv.len();
        correct += piv.len() - guess.xor(piv)?.count_ones();
    }
    Ok(TrialOutcome {
        trial,
        errors: v.errors,
        decoy_checks: v.decoy_checks,
        verdict: v.verdict,
        eve_bit_accuracy: correct as f64 / bits as f64,
        eve_correct: correct,
        eve_bits: bits,
        attacked_checks: attacked.len(),
        attacked_errors: attacked.iter().filter(|c| c.is_error()).count(),
        decoy_tuples: if targets.is_empty() { 0 } else { positions.len() },
        tuples_with_error,
        recovered_ok: t.recovered.as_ref().map(|r| r == &scenario.pivs),
    })
}

/// Runs `trials` independent protocol executions of `scenario` in parallel.
/// Trial `t` draws from stream `t` of the scenario seed, so totals do not
/// depend on scheduling.
pub fn detection_experiment(scenario: &Scenario, trials: u64) -> Result<Experiment> {
    if trials == 0 {
        return Err(Error::InvalidScenario("an experiment needs at least one trial".into()));
    }
    scenario.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(scenario, t))
        .collect::<Result<_>>()?;
    let sum = |f: fn(&TrialOutcome) -> usize| outcomes.iter().map(f).sum::<usize>() as u64;
    let passed = outcomes.iter().filter(|o| o.recovered_ok.is_some()).count() as u64;
    let recovered = outcomes.iter().filter(|o| o.recovered_ok == Some(true)).count() as u64;
    let stats = ExperimentStats {
        trials,
        decoy_error_rate: Rate::new(sum(|o| o.errors), sum(|o| o.decoy_checks)),
        attacked_qubit_error_rate: Rate::new(sum(|o| o.attacked_errors), sum(|o| o.attacked_checks)),
        attacked_tuple_error_rate: Rate::new(sum(|o| o.tuples_with_error), sum(|o| o.decoy_tuples)),
        abort_rate: Rate::new(
            outcomes.iter().filter(|o| o.verdict == Verdict::Fail).count() as u64,
            trials,
        ),
        eve_bit_accuracy: Rate::new(sum(|o| o.eve_correct), sum(|o| o.eve_bits)),
        recovery_rate: Rate::new(recovered, passed),
    };
    Ok(Experiment {
        stats,
        trials: outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationStat {
    pub pairs: u64,
    pub agreement: Rate,
    pub baseline: Rate,
    /// Standard deviation of a fair-coin agreement rate at this many pairs.
    pub sigma: f64,
    /// Agreement differs from 1/2 by more than three sigma.
    pub flagged: bool,
}

/// Pairwise agreement of Hadamard-basis outcomes on attacked decoy qubits,
/// next to the same statistic for undisturbed decoys.
pub fn decoy_correlation_stat(strategy: &EveStrategy, n: usize, trials: u64, seed: u64) -> Result<CorrelationStat> {
    if strategy.k() < 2 {
        return Err(Error::InvalidStrategy(
            "pairwise agreement needs at least two attacked qubits per tuple".into(),
        ));
    }
    if strategy.kind() == AttackKind::None {
        return Err(Error::InvalidStrategy("no attack to measure".into()));
    }
    strategy.validate(n)?;
    let targets = strategy.targets();
    let pairs_per_tuple = (targets.len() * (targets.len() - 1) / 2) as u64;
    let count = |attack: bool, stream: u64| -> Result<u64> {
        let mut rng = trial_rng(seed, stream);
        let mut agree = 0u64;
        for _ in 0..trials {
            let mut rec = make_decoy_tuple(n, &mut rng)?;
            if attack {
                attack_tuple(strategy, &mut rec.tuple, &mut rng)?;
            }
            let qubits: Vec<usize> = targets.iter().map(|&a| rec.tuple.agent_qubit(a)).collect();
            let bases = vec![MeasurementBasis::Hadamard; qubits.len()];
            let out = rec.tuple.state.measure_qubits(&qubits, &bases, &mut rng)?;
            for a in 0..out.len() {
                for b in a + 1..out.len() {
                    agree += u64::from(out[a] == out[b]);
                }
            }
        }
        Ok(agree)
    };
    let pairs = trials * pairs_per_tuple;
    let agreement = Rate::new(count(true, 0)?, pairs);
    let baseline = Rate::new(count(false, 1)?, pairs);
    let sigma = (0.25 / pairs as f64).sqrt();
    Ok(CorrelationStat {
        pairs,
        agreement,
        baseline,
        sigma,
        flagged: (agreement.value - 0.5).abs() > 3.0 * sigma,
    })
}

/// One comparison in the oracle triangle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleCase {
    pub n: usize,
    pub aiv: BitVector,
    pub support: usize,
    pub same_support: bool,
    pub max_abs_diff: f64,
    pub chi_square: ChiSquare,
}

impl TriangleCase {
    pub fn passed(&self, prob_tol: f64, p_min: f64) -> bool {
        self.same_support && self.max_abs_diff <= prob_tol && self.chi_square.p_value > p_min
    }
}

/// Compares joint and factorized oracles on one AIV and fits `samples`
/// analytic draws against them.
pub fn triangle_case<R: Rng + ?Sized>(aiv: &BitVector, n: usize, samples: usize, rng: &mut R) -> Result<TriangleCase> {
    let joint = joint_oracle(aiv, n)?;
    let factorized = factorized_oracle(aiv, n)?;
    let draws: Vec<u64> = (0..samples)
        .map(|_| outcome_index(&analytic_sample(aiv, n, rng)))
        .collect();
    Ok(TriangleCase {
        n,
        aiv: aiv.clone(),
        support: joint.support_len(),
        same_support: joint.same_support(&factorized),
        max_abs_diff: joint.max_abs_diff(&factorized),
        chi_square: chi_square_gof(&draws, &joint),
    })
}

/// `cases` random `(n, m, aiv)` with `n·m ≤ max_qubits`.
pub fn oracle_triangle(cases: usize, max_qubits: usize, samples: usize, seed: u64) -> Result<Vec<TriangleCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|_| {
            let n = rng.random_range(2..=max_qubits / 2);
            let m = rng.random_range(1..=max_qubits / n);
            let aiv = BitVector::from_u64(rng.random(), m);
            triangle_case(&aiv, n, samples, &mut rng)
        })
        .collect()
}

/// Joint-oracle distribution for a scenario's AIV, falling back to the
/// factorized oracle when the joint state is too large.
pub fn scenario_distribution(scenario: &Scenario) -> Result<OutcomeDistribution> {
    let (aiv, _) = concat_aiv(&scenario.pivs)?;
    if scenario.n * aiv.len() <= JOINT_ORACLE_MAX_QUBITS {
        joint_oracle(&aiv, scenario.n)
    } else {
        factorized_oracle(&aiv, scenario.n)
    }
}
