//! The full transmission run: distribution, validation, embedding,
//! decryption and the classical segment exchange.
//!
//! A run is strictly sequential and deterministic for a given scenario seed.
//! Secret-dependent gates are applied only after the validation verdict is
//! known, so an aborted run never touches the AIV.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::{attack_tuple, EveRecord, EveStrategy};
use crate::bitvec::{concat_aiv, segment, BitVector, SegmentLayout};
use crate::distribution::{build_plan, dispatch, DistributionPlan, TupleState};
use crate::error::{Error, Result};
use crate::statevec::{MeasurementBasis, PureState};

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub n: usize,
    /// `pivs[k]` is Agent_k's PIV.
    pub pivs: Vec<BitVector>,
    pub d: usize,
    pub eve: EveStrategy,
    pub noise_p: f64,
    pub threshold_fraction: f64,
    pub seed: u64,
}

impl Scenario {
    /// Honest scenario with the default decoy count (`d = m`) and threshold.
    pub fn new(pivs: Vec<BitVector>, seed: u64) -> Self {
        let m = pivs.iter().map(BitVector::len).sum();
        Self {
            n: pivs.len() + 1,
            pivs,
            d: m,
            eve: EveStrategy::none(),
            noise_p: 0.0,
            threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            seed,
        }
    }

    pub fn with_decoys(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn with_eve(mut self, eve: EveStrategy) -> Self {
        self.eve = eve;
        self
    }

    pub fn with_noise(mut self, noise_p: f64) -> Self {
        self.noise_p = noise_p;
        self
    }

    pub fn with_threshold(mut self, fraction: f64) -> Self {
        self.threshold_fraction = fraction;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn m(&self) -> usize {
        self.pivs.iter().map(BitVector::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidScenario(format!("n must be at least 2, got {}", self.n)));
        }
        if self.pivs.len() != self.n - 1 {
            return Err(Error::InvalidScenario(format!(
                "{} PIVs given for {} agents",
                self.pivs.len(),
                self.n - 1
            )));
        }
        if let Some(k) = self.pivs.iter().position(BitVector::is_empty) {
            return Err(Error::InvalidScenario(format!("PIV for agent {k} is empty")));
        }
        if !(0.0..=1.0).contains(&self.noise_p) {
            return Err(Error::InvalidScenario(format!("noise_p {} outside [0, 1]", self.noise_p)));
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "threshold_fraction {} outside (0, 1)",
                self.threshold_fraction
            )));
        }
        if self.n > crate::statevec::DEFAULT_QUBIT_CAP {
            return Err(Error::InvalidScenario(format!("n = {} exceeds the qubit cap", self.n)));
        }
        self.eve.validate(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Agent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Distribution,
    Validation,
    Embedding,
    Decryption,
    Exchange,
    Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Layout {
        aiv_len: usize,
        piv_lengths: Vec<usize>,
    },
    DecoyPositions(Vec<usize>),
    /// `(stream position, Hadamard outcome)` for each decoy qubit the sender holds.
    DecoyOutcomes(Vec<(usize, bool)>),
    /// Segment `segment` of the sender's measured register.
    Segment { segment: usize, bits: BitVector },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub stage: Stage,
    pub from: Party,
    pub to: Party,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecoyCheck {
    pub position: usize,
    pub agent: usize,
    pub expected: bool,
    pub reported: bool,
}

impl DecoyCheck {
    pub fn is_error(&self) -> bool {
        self.expected != self.reported
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub decoy_checks: usize,
    pub errors: usize,
    /// Abort threshold on `errors`: `threshold_fraction · decoy_checks`.
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub checks: Vec<DecoyCheck>,
}

/// Measured input registers: `agents[i]` is `y_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Registers {
    pub alice: BitVector,
    pub agents: Vec<BitVector>,
}

impl Registers {
    pub fn xor_all(&self) -> BitVector {
        self.agents
            .iter()
            .fold(self.alice.clone(), |acc, y| acc.xor(y).expect("registers share a length"))
    }

    /// `"a y_{n−2} … y_0"`, each register most-significant-first.
    pub fn outcome_label(&self) -> String {
        std::iter::once(self.alice.to_string())
            .chain(self.agents.iter().rev().map(BitVector::to_string))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn register(&self, party: Party) -> &BitVector {
        match party {
            Party::Alice => &self.alice,
            Party::Agent(i) => &self.agents[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    StageStarted(Stage),
    Message(Message),
    Validation(ValidationReport),
    /// Alice applied her secret-dependent transform to this many tuples.
    SecretEmbedded { tuples: usize },
    Measured { party: Party, register: BitVector },
    Recovered { agent: usize, piv: BitVector },
    Aborted,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transcript {
    pub layout: SegmentLayout,
    /// Number of tuples sent (`m + d`).
    pub stream_len: usize,
    pub events: Vec<Event>,
    pub validation: Option<ValidationReport>,
    pub registers: Option<Registers>,
    pub recovered: Option<Vec<BitVector>>,
    pub aborted: bool,
}

impl Transcript {
    pub fn public_messages(&self) -> impl Iterator<Item = &Message> {
        self.events.iter().filter_map(|e| match e {
            Event::Message(m) => Some(m),
            _ => None,
        })
    }

    pub fn message_count(&self, stage: Stage) -> usize {
        self.public_messages().filter(|m| m.stage == stage).count()
    }

    pub fn has_embedding(&self) -> bool {
        self.events
            .iter()
            .any(|e| matches!(e, Event::SecretEmbedded { .. } | Event::StageStarted(Stage::Embedding)))
    }

    /// Checks the structural secrecy rules: nobody sends Alice anything after
    /// validation, and no agent ever publishes its own segment.
    pub fn secrecy_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in self.public_messages() {
            let after_validation = matches!(m.stage, Stage::Decryption | Stage::Exchange | Stage::Recovery);
            if after_validation && m.to == Party::Alice {
                if let Party::Agent(i) = m.from {
                    out.push(format!("agent {i} sent a message to Alice during {:?}", m.stage));
                }
            }
            if let (Party::Agent(i), Payload::Segment { segment, .. }) = (m.from, &m.payload) {
                if *segment == i {
                    out.push(format!("agent {i} published its own segment"));
                }
            }
        }
        out
    }
}

/// Realizes Alice's oracle by phase kickback: for every set AIV bit, her
/// qubit of that tuple controls a CNOT onto an output qubit held in |−⟩.
pub fn embed_secret(tuples: &mut [TupleState], aiv: &BitVector) -> Result<()> {
    if tuples.len() != aiv.len() {
        return Err(Error::LengthMismatch {
            left: tuples.len(),
            right: aiv.len(),
        });
    }
    let minus = PureState::from_amplitudes(vec![
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(-FRAC_1_SQRT_2, 0.0),
    ])?;
    for (j, tuple) in tuples.iter_mut().enumerate() {
        if !aiv.get(j) {
            continue;
        }
        let alice = tuple.alice_qubit();
        let mut joint = tuple.state.tensor(&minus)?;
        let output = joint.num_qubits() - 1;
        joint.apply_cnot(alice, output)?;
        let (rest, out) = joint
            .split_last()
            .ok_or_else(|| Error::InvalidState("output register became entangled".into()))?;
        if (out[0] - minus.amplitude(0)).norm() > 1e-9 || (out[1] - minus.amplitude(1)).norm() > 1e-9 {
            return Err(Error::InvalidState("output register left |−⟩".into()));
        }
        tuple.state = rest;
    }
    Ok(())
}

/// Every party applies H to each of its qubits and measures; tuple `j`
/// supplies bit `j` of every register.
pub fn decrypt_and_measure<R: Rng + ?Sized>(tuples: &mut [TupleState], rng: &mut R) -> Result<Registers> {
    let m = tuples.len();
    let agents = tuples.first().map_or(0, |t| t.num_parties() - 1);
    let mut alice = BitVector::zeros(m);
    let mut ys = vec![BitVector::zeros(m); agents];
    for (j, tuple) in tuples.iter_mut().enumerate() {
        let mut qubits: Vec<usize> = (0..agents).map(|i| tuple.agent_qubit(i)).collect();
        qubits.push(tuple.alice_qubit());
        let bases = vec![MeasurementBasis::Hadamard; qubits.len()];
        let outcome = tuple.state.measure_qubits(&qubits, &bases, rng)?;
        for (i, y) in ys.iter_mut().enumerate() {
            y.set(j, outcome[i]);
        }
        alice.set(j, outcome[agents]);
    }
    Ok(Registers { alice, agents: ys })
}

pub struct Validation {
    pub report: ValidationReport,
    pub messages: Vec<Message>,
}

/// Agents measure their decoy qubits in the Hadamard basis and report to
/// Alice, who compares the outcomes against her preparation record.
pub fn run_validation<R: Rng + ?Sized>(
    plan: &DistributionPlan,
    tuples: &mut [TupleState],
    scenario: &Scenario,
    rng: &mut R,
) -> Result<Validation> {
    let agents = plan.n - 1;
    let positions = plan.decoy_positions();
    let mut messages: Vec<Message> = (0..agents)
        .map(|i| Message {
            stage: Stage::Validation,
            from: Party::Alice,
            to: Party::Agent(i),
            payload: Payload::DecoyPositions(positions.clone()),
        })
        .collect();

    let mut reports: Vec<Vec<(usize, bool)>> = vec![Vec::with_capacity(positions.len()); agents];
    let mut checks = Vec::with_capacity(positions.len() * agents);
    for entry in &plan.position_map {
        let tuple = &mut tuples[entry.position];
        for (agent, report) in reports.iter_mut().enumerate() {
            let q = tuple.agent_qubit(agent);
            let mut outcome = tuple.state.measure_qubits(&[q], &[MeasurementBasis::Hadamard], rng)?[0];
            if scenario.noise_p > 0.0 && rng.random_bool(scenario.noise_p) {
                outcome = !outcome;
            }
            report.push((entry.position, outcome));
            checks.push(DecoyCheck {
                position: entry.position,
                agent,
                expected: entry.prep[agent].expected_outcome(),
                reported: outcome,
            });
        }
    }
    messages.extend(reports.into_iter().enumerate().map(|(i, r)| Message {
        stage: Stage::Validation,
        from: Party::Agent(i),
        to: Party::Alice,
        payload: Payload::DecoyOutcomes(r),
    }));

    let decoy_checks = checks.len();
    let errors = checks.iter().filter(|c| c.is_error()).count();
    let threshold = scenario.threshold_fraction * decoy_checks as f64;
    let verdict = if decoy_checks > 0 && errors as f64 >= threshold {
        Verdict::Fail
    } else {
        Verdict::Pass
    };
    Ok(Validation {
        report: ValidationReport {
            decoy_checks,
            errors,
            threshold,
            verdict,
            checks,
        },
        messages,
    })
}

/// Segments one agent has collected from the other parties.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReceivedSegments {
    pub from_alice: Option<BitVector>,
    pub from_agents: BTreeMap<usize, BitVector>,
}

pub struct Exchange {
    pub messages: Vec<Message>,
    pub received: Vec<ReceivedSegments>,
}

/// Alice sends `a^i` to Agent_i; every Agent_i sends `y_i^j` to each other
/// Agent_j. Each agent keeps its own segment `y_i^i`.
pub fn classical_exchange(registers: &Registers, layout: &SegmentLayout) -> Result<Exchange> {
    let agents = registers.agents.len();
    let mut messages = Vec::with_capacity(agents * agents);
    let mut received = vec![ReceivedSegments::default(); agents];
    for (i, slot) in received.iter_mut().enumerate() {
        let bits = segment(&registers.alice, layout, i)?;
        slot.from_alice = Some(bits.clone());
        messages.push(Message {
            stage: Stage::Exchange,
            from: Party::Alice,
            to: Party::Agent(i),
            payload: Payload::Segment { segment: i, bits },
        });
    }
    for (i, y) in registers.agents.iter().enumerate() {
        for (j, slot) in received.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let bits = segment(y, layout, j)?;
            slot.from_agents.insert(i, bits.clone());
            messages.push(Message {
                stage: Stage::Exchange,
                from: Party::Agent(i),
                to: Party::Agent(j),
                payload: Payload::Segment { segment: j, bits },
            });
        }
    }
    Ok(Exchange { messages, received })
}

/// XORs the agent's own segment with everything it received.
pub fn recover_piv(
    agent: usize,
    own: &BitVector,
    received: &ReceivedSegments,
    layout: &SegmentLayout,
) -> Result<BitVector> {
    let agents = layout.segment_count();
    let missing = |from: String| Error::MissingSegment {
        agent,
        segment: agent,
        from,
    };
    let mut acc = segment(own, layout, agent)?;
    acc.xor_assign(received.from_alice.as_ref().ok_or_else(|| missing("Alice".into()))?)?;
    for i in (0..agents).filter(|&i| i != agent) {
        let bits = received
            .from_agents
            .get(&i)
            .ok_or_else(|| missing(format!("agent {i}")))?;
        acc.xor_assign(bits)?;
    }
    Ok(acc)
}

/// Honest-party transcript together with Eve's private record.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub transcript: Transcript,
    pub eve: EveRecord,
}

impl ProtocolRun {
    pub fn aborted(&self) -> bool {
        self.transcript.aborted
    }
}

pub fn run_protocol(scenario: &Scenario) -> Result<ProtocolRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    run_protocol_with_rng(scenario, &mut rng)
}

pub fn run_protocol_with_rng<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ProtocolRun> {
    scenario.validate()?;
    let (aiv, layout) = concat_aiv(&scenario.pivs)?;
    let agents = scenario.n - 1;
    let mut events = Vec::new();

    events.push(Event::StageStarted(Stage::Distribution));
    for i in 0..agents {
        events.push(Event::Message(Message {
            stage: Stage::Distribution,
            from: Party::Alice,
            to: Party::Agent(i),
            payload: Payload::Layout {
                aiv_len: layout.total(),
                piv_lengths: layout.lengths().to_vec(),
            },
        }));
    }
    let plan = build_plan(aiv.len(), scenario.d, scenario.n, rng)?;
    let _streams = dispatch(&plan);
    let mut states: Vec<TupleState> = plan.tuples.iter().map(|t| t.tuple.clone()).collect();
    let mut eve = EveRecord::default();
    if scenario.eve.is_active() {
        for (position, state) in states.iter_mut().enumerate() {
            let mut entry = attack_tuple(&scenario.eve, state, rng)?;
            entry.stream_position = position;
            eve.entries.push(entry);
        }
    }

    events.push(Event::StageStarted(Stage::Validation));
    let validation = run_validation(&plan, &mut states, scenario, rng)?;
    events.extend(validation.messages.into_iter().map(Event::Message));
    events.push(Event::Validation(validation.report.clone()));

    let mut transcript = Transcript {
        layout: layout.clone(),
        stream_len: plan.len(),
        events,
        validation: Some(validation.report.clone()),
        registers: None,
        recovered: None,
        aborted: false,
    };
    if validation.report.verdict == Verdict::Fail {
        transcript.events.push(Event::Aborted);
        transcript.aborted = true;
        return Ok(ProtocolRun { transcript, eve });
    }

    transcript.events.push(Event::StageStarted(Stage::Embedding));
    let info_positions = plan.information_positions();
    let mut info: Vec<TupleState> = info_positions.iter().map(|&p| states[p].clone()).collect();
    embed_secret(&mut info, &aiv)?;
    transcript.events.push(Event::SecretEmbedded { tuples: info.len() });

    transcript.events.push(Event::StageStarted(Stage::Decryption));
    let registers = decrypt_and_measure(&mut info, rng)?;
    transcript.events.push(Event::Measured {
        party: Party::Alice,
        register: registers.alice.clone(),
    });
    for (i, y) in registers.agents.iter().enumerate().rev() {
        transcript.events.push(Event::Measured {
            party: Party::Agent(i),
            register: y.clone(),
        });
    }
    for (p, s) in info_positions.iter().zip(info) {
        states[*p] = s;
    }
    eve.measure_retained(&mut states, rng)?;

    transcript.events.push(Event::StageStarted(Stage::Exchange));
    let exchange = classical_exchange(&registers, &layout)?;
    transcript.events.extend(exchange.messages.into_iter().map(Event::Message));

    transcript.events.push(Event::StageStarted(Stage::Recovery));
    let mut recovered = Vec::with_capacity(agents);
    for (i, received) in exchange.received.iter().enumerate() {
        let piv = recover_piv(i, &registers.agents[i], received, &layout)?;
        transcript.events.push(Event::Recovered {
            agent: i,
            piv: piv.clone(),
        });
        recovered.push(piv);
    }
    transcript.registers = Some(registers);
    transcript.recovered = Some(recovered);
    Ok(ProtocolRun { transcript, eve })
}

/// The three-party run used throughout the tests: Agent_0 (Charlie) gets
/// `010`, Agent_1 (Bob) gets `101`, so the AIV is `101010`.
pub fn example_scenario(seed: u64) -> Scenario {
    Scenario::new(
        vec!["010".parse().expect("valid"), "101".parse().expect("valid")],
        seed,
    )
}
