//! Eavesdropper models acting on qubits while they cross the quantum channel.
//!
//! An attack only ever sees a [`TupleState`]: it cannot tell information
//! tuples from decoys, so every tuple in the stream is treated the same way.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitvec::{BitVector, SegmentLayout};
use crate::distribution::{Holder, TupleState};
use crate::error::{Error, Result};
use crate::protocol::{Party, Payload, Transcript};
use crate::statevec::{prepare_ghz, GhzTopology, MeasurementBasis, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisPolicy {
    AlwaysComputational,
    RandomBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    MeasureResend,
    InterceptReplace,
    EntangleAncilla,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EveStrategy {
    kind: AttackKind,
    basis_policy: Option<BasisPolicy>,
    targets: Vec<usize>,
}

impl EveStrategy {
    pub fn none() -> Self {
        Self {
            kind: AttackKind::None,
            basis_policy: None,
            targets: Vec::new(),
        }
    }

    pub fn new(kind: AttackKind, basis_policy: Option<BasisPolicy>, targets: Vec<usize>) -> Result<Self> {
        match (kind, basis_policy) {
            (AttackKind::MeasureResend, None) => {
                return Err(Error::InvalidStrategy("measure_resend needs a basis policy".into()))
            }
            (AttackKind::MeasureResend, Some(_)) => {}
            (_, Some(_)) => {
                return Err(Error::InvalidStrategy(
                    "basis policy only applies to measure_resend".into(),
                ))
            }
            (_, None) => {}
        }
        if kind == AttackKind::None {
            if !targets.is_empty() {
                return Err(Error::InvalidStrategy("strategy none takes no targets".into()));
            }
        } else if targets.is_empty() {
            return Err(Error::InvalidStrategy("an attack needs at least one target".into()));
        }
        let mut sorted = targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::InvalidStrategy("duplicate attack target".into()));
        }
        Ok(Self {
            kind,
            basis_policy,
            targets,
        })
    }

    /// Attack on the `k` lowest-numbered agents.
    pub fn lowest(kind: AttackKind, basis_policy: Option<BasisPolicy>, k: usize) -> Result<Self> {
        Self::new(kind, basis_policy, (0..k).collect())
    }

    pub fn measure_resend(policy: BasisPolicy, k: usize) -> Result<Self> {
        Self::lowest(AttackKind::MeasureResend, Some(policy), k)
    }

    pub fn intercept_replace(k: usize) -> Result<Self> {
        Self::lowest(AttackKind::InterceptReplace, None, k)
    }

    pub fn entangle_ancilla(k: usize) -> Result<Self> {
        Self::lowest(AttackKind::EntangleAncilla, None, k)
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn basis_policy(&self) -> Option<BasisPolicy> {
        self.basis_policy
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn k(&self) -> usize {
        self.targets.len()
    }

    pub fn is_active(&self) -> bool {
        self.kind != AttackKind::None
    }

    /// Checks the strategy against a run with `n` parties.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let Some(&t) = self.targets.iter().find(|&&t| t + 1 >= n) {
            return Err(Error::InvalidStrategy(format!(
                "target agent {t} does not exist with {} agents",
                n - 1
            )));
        }
        let extra = match self.kind {
            AttackKind::InterceptReplace => n,
            AttackKind::EntangleAncilla => self.k(),
            _ => 0,
        };
        if n + extra > crate::statevec::DEFAULT_QUBIT_CAP {
            return Err(Error::InvalidStrategy(format!(
                "attack on {n}-qubit tuples needs {} qubits, over the simulator cap",
                n + extra
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EveMeasurement {
    pub agent: usize,
    pub basis: MeasurementBasis,
    pub outcome: bool,
}

/// What Eve keeps about one tuple.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EveEntry {
    pub stream_position: usize,
    /// Measure-and-resend results.
    pub measured: Vec<EveMeasurement>,
    /// Tuple-state indices of qubits Eve holds that are entangled with
    /// Alice's preparation: intercepted originals or ancillas.
    pub retained: Vec<usize>,
    /// Agents that received one of Eve's substitute qubits instead of Alice's.
    pub replaced_agents: Vec<usize>,
    /// Hadamard-basis outcomes of `retained`, filled in by [`EveRecord::measure_retained`].
    pub retained_outcomes: Vec<bool>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EveRecord {
    pub entries: Vec<EveEntry>,
}

impl EveRecord {
    pub fn entry(&self, stream_position: usize) -> Option<&EveEntry> {
        self.entries.iter().find(|e| e.stream_position == stream_position)
    }

    /// Eve's delayed measurement of everything she kept, in the Hadamard basis.
    /// `tuples` is indexed by stream position.
    pub fn measure_retained<R: Rng + ?Sized>(
        &mut self,
        tuples: &mut [TupleState],
        rng: &mut R,
    ) -> Result<()> {
        for entry in &mut self.entries {
            if entry.retained.is_empty() || !entry.retained_outcomes.is_empty() {
                continue;
            }
            let bases = vec![MeasurementBasis::Hadamard; entry.retained.len()];
            entry.retained_outcomes =
                tuples[entry.stream_position]
                    .state
                    .measure_qubits(&entry.retained, &bases, rng)?;
        }
        Ok(())
    }
}

/// Applies `strategy` to the in-flight qubits of one tuple.
pub fn attack_tuple<R: Rng + ?Sized>(
    strategy: &EveStrategy,
    tuple: &mut TupleState,
    rng: &mut R,
) -> Result<EveEntry> {
    let mut entry = EveEntry::default();
    match strategy.kind {
        AttackKind::None => {
            return Err(Error::InvalidStrategy("strategy none has nothing to apply".into()))
        }
        AttackKind::MeasureResend => {
            let policy = strategy.basis_policy.expect("validated on construction");
            for &agent in &strategy.targets {
                let q = tuple.agent_qubit(agent);
                let basis = match policy {
                    BasisPolicy::AlwaysComputational => MeasurementBasis::Computational,
                    BasisPolicy::RandomBasis if rng.random_bool(0.5) => MeasurementBasis::Hadamard,
                    BasisPolicy::RandomBasis => MeasurementBasis::Computational,
                };
                let outcome = tuple.state.measure_qubits(&[q], &[basis], rng)?[0];
                entry.measured.push(EveMeasurement {
                    agent,
                    basis,
                    outcome,
                });
            }
        }
        AttackKind::InterceptReplace => {
            let n = tuple.num_parties();
            let fake = prepare_ghz(n, GhzTopology::LogDepth)?;
            let base = tuple.state.num_qubits();
            tuple.state = tuple.state.tensor(&fake)?;
            tuple.holders.extend(std::iter::repeat_n(Holder::Eve, n));
            tuple.lineage.extend(std::iter::repeat_n(false, n));
            for (r, &agent) in strategy.targets.iter().enumerate() {
                let original = tuple.agent_qubit(agent);
                tuple.holders[original] = Holder::Eve;
                tuple.holders[base + r] = Holder::Agent(agent);
                entry.retained.push(original);
                entry.replaced_agents.push(agent);
            }
        }
        AttackKind::EntangleAncilla => {
            for &agent in &strategy.targets {
                let q = tuple.agent_qubit(agent);
                tuple.state = tuple.state.tensor(&PureState::zero(1)?)?;
                let ancilla = tuple.state.num_qubits() - 1;
                tuple.state.apply_cnot(q, ancilla)?;
                tuple.holders.push(Holder::Eve);
                tuple.lineage.push(true);
                entry.retained.push(ancilla);
            }
        }
    }
    Ok(entry)
}

/// Eve's reconstruction of every PIV from her record and the public
/// classical traffic.
///
/// For an information bit in agent `s`'s segment she can only form the XOR
/// of all outcomes on qubits entangled with Alice's if agent `s` never held
/// such a qubit; otherwise the missing `y_s` bit leaves her a coin flip.
pub fn eve_postprocess<R: Rng + ?Sized>(
    record: &EveRecord,
    transcript: &Transcript,
    rng: &mut R,
) -> Vec<BitVector> {
    let layout: &SegmentLayout = &transcript.layout;
    let m = layout.total();
    let agents = layout.segment_count();

    let total_positions = transcript.stream_len;
    let decoys: Vec<usize> = transcript
        .public_messages()
        .find_map(|msg| match &msg.payload {
            Payload::DecoyPositions(p) => Some(p.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let info_positions: Vec<usize> = (0..total_positions).filter(|p| !decoys.contains(p)).collect();

    // public[party][bit] from the segment exchange
    let mut alice_bits: Vec<Option<bool>> = vec![None; m];
    let mut agent_bits: Vec<Vec<Option<bool>>> = vec![vec![None; m]; agents];
    for msg in transcript.public_messages() {
        if let Payload::Segment { segment, bits } = &msg.payload {
            let Ok(range) = layout.range(*segment) else { continue };
            let slot = match msg.from {
                Party::Alice => &mut alice_bits,
                Party::Agent(i) => &mut agent_bits[i],
            };
            for (offset, pos) in range.enumerate() {
                slot[pos] = Some(bits.get(offset));
            }
        }
    }

    let mut guesses: Vec<BitVector> = layout.lengths().iter().map(|&l| BitVector::zeros(l)).collect();
    for bit in 0..m {
        let s = layout.segment_of(bit).expect("bit within layout");
        let known = info_positions
            .get(bit)
            .and_then(|&p| record.entry(p))
            .filter(|e| e.replaced_agents.contains(&s) && e.retained_outcomes.len() == e.retained.len())
            .and_then(|e| {
                let mut acc = alice_bits[bit]?;
                for (i, row) in agent_bits.iter().enumerate() {
                    if i != s && !e.replaced_agents.contains(&i) {
                        acc ^= row[bit]?;
                    }
                }
                Some(e.retained_outcomes.iter().fold(acc, |a, &b| a ^ b))
            });
        let guess = known.unwrap_or_else(|| rng.random_bool(0.5));
        let start = layout.range(s).expect("segment exists").start;
        guesses[s].set(bit - start, guess);
    }
    guesses
}
