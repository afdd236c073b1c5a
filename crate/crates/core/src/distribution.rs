//! Preparation and interleaving of information and decoy tuples.
//!
//! In every freshly prepared tuple qubit `i < n − 1` is bound for Agent_i and
//! qubit `n − 1` stays in Alice's input register.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::statevec::{prepare_ghz, GhzTopology, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoyLabel {
    Plus,
    Minus,
}

impl DecoyLabel {
    /// Hadamard-basis outcome an undisturbed qubit in this state produces.
    pub fn expected_outcome(self) -> bool {
        self == DecoyLabel::Minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleKind {
    Information,
    Decoy,
}

/// Who physically holds a qubit of a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Holder {
    Alice,
    Agent(usize),
    Eve,
}

/// Joint state of one tuple plus whatever an adversary has attached to it.
///
/// `lineage[q]` is true for qubits that came out of Alice's preparation (or
/// were entangled with it through a controlled gate); substituted qubits are
/// false.
#[derive(Debug, Clone)]
pub struct TupleState {
    pub state: PureState,
    pub holders: Vec<Holder>,
    pub lineage: Vec<bool>,
}

impl TupleState {
    fn fresh(state: PureState) -> Self {
        let n = state.num_qubits();
        let holders = (0..n)
            .map(|q| if q == n - 1 { Holder::Alice } else { Holder::Agent(q) })
            .collect();
        Self {
            state,
            holders,
            lineage: vec![true; n],
        }
    }

    pub fn num_parties(&self) -> usize {
        self.holders.iter().filter(|h| **h != Holder::Eve).count()
    }

    pub fn qubit_of(&self, holder: Holder) -> Option<usize> {
        self.holders.iter().position(|&h| h == holder)
    }

    pub fn alice_qubit(&self) -> usize {
        self.qubit_of(Holder::Alice).expect("Alice always keeps her qubit")
    }

    pub fn agent_qubit(&self, agent: usize) -> usize {
        self.qubit_of(Holder::Agent(agent))
            .expect("every agent holds exactly one qubit of each tuple")
    }
}

#[derive(Debug, Clone)]
pub struct TupleRecord {
    pub stream_position: usize,
    pub kind: TupleKind,
    pub decoy_prep: Option<Vec<DecoyLabel>>,
    pub tuple: TupleState,
}

pub fn information_tuple(n: usize) -> Result<TupleRecord> {
    Ok(TupleRecord {
        stream_position: 0,
        kind: TupleKind::Information,
        decoy_prep: None,
        tuple: TupleState::fresh(prepare_ghz(n, GhzTopology::LogDepth)?),
    })
}

/// Product state of |+⟩/|−⟩ qubits, `labels[q]` describing qubit `q`.
pub fn decoy_tuple_with_labels(labels: Vec<DecoyLabel>) -> Result<TupleRecord> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidScenario(format!(
            "a decoy tuple needs at least 2 qubits, got {n}"
        )));
    }
    let mut state = single(labels[0]);
    for &l in &labels[1..] {
        state = state.tensor(&single(l))?;
    }
    Ok(TupleRecord {
        stream_position: 0,
        kind: TupleKind::Decoy,
        decoy_prep: Some(labels),
        tuple: TupleState::fresh(state),
    })
}

fn single(label: DecoyLabel) -> PureState {
    let sign = match label {
        DecoyLabel::Plus => 1.0,
        DecoyLabel::Minus => -1.0,
    };
    PureState::from_amplitudes(vec![
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(sign * FRAC_1_SQRT_2, 0.0),
    ])
    .expect("normalized")
}

pub fn make_decoy_tuple<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<TupleRecord> {
    if n < 2 {
        return Err(Error::InvalidScenario(format!(
            "a decoy tuple needs at least 2 qubits, got {n}"
        )));
    }
    let labels = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                DecoyLabel::Minus
            } else {
                DecoyLabel::Plus
            }
        })
        .collect();
    decoy_tuple_with_labels(labels)
}

/// Alice's private record of one decoy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecoyEntry {
    pub position: usize,
    pub prep: Vec<DecoyLabel>,
}

#[derive(Debug, Clone)]
pub struct DistributionPlan {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    /// `order[position]` is the tuple id sent at that position. Ids `0..m`
    /// are information tuples, carrying AIV bit `id` and appearing in
    /// increasing order along the stream; ids `m..m + d` are decoys.
    pub order: Vec<usize>,
    pub position_map: Vec<DecoyEntry>,
    /// Tuples in stream order.
    pub tuples: Vec<TupleRecord>,
}

impl DistributionPlan {
    pub fn len(&self) -> usize {
        self.m + self.d
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stream positions of the information tuples, in AIV bit order.
    pub fn information_positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.m];
        for (p, &id) in self.order.iter().enumerate() {
            if id < self.m {
                pos[id] = p;
            }
        }
        pos
    }

    pub fn decoy_positions(&self) -> Vec<usize> {
        self.position_map.iter().map(|e| e.position).collect()
    }
}

pub fn build_plan<R: Rng + ?Sized>(m: usize, d: usize, n: usize, rng: &mut R) -> Result<DistributionPlan> {
    if m == 0 {
        return Err(Error::InvalidScenario("at least one information tuple is required".into()));
    }
    if n < 2 {
        return Err(Error::InvalidScenario(format!("n must be at least 2, got {n}")));
    }
    let mut is_decoy: Vec<bool> = (0..m + d).map(|i| i >= m).collect();
    is_decoy.shuffle(rng);
    // Information tuples keep AIV bit order along the stream; decoys are numbered after them.
    let (mut next_info, mut next_decoy) = (0, m);
    let order: Vec<usize> = is_decoy
        .iter()
        .map(|&decoy| {
            let counter = if decoy { &mut next_decoy } else { &mut next_info };
            *counter += 1;
            *counter - 1
        })
        .collect();
    let mut decoys = Vec::with_capacity(d);
    for _ in 0..d {
        decoys.push(make_decoy_tuple(n, rng)?);
    }
    let info = information_tuple(n)?;
    let mut tuples = Vec::with_capacity(m + d);
    let mut position_map = Vec::with_capacity(d);
    for (position, &id) in order.iter().enumerate() {
        let mut rec = if id < m {
            info.clone()
        } else {
            decoys[id - m].clone()
        };
        rec.stream_position = position;
        if let Some(prep) = &rec.decoy_prep {
            position_map.push(DecoyEntry {
                position,
                prep: prep.clone(),
            });
        }
        tuples.push(rec);
    }
    Ok(DistributionPlan {
        n,
        m,
        d,
        order,
        position_map,
        tuples,
    })
}

/// One qubit slot in a party's stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitRef {
    pub stream_position: usize,
    pub qubit: usize,
}

#[derive(Debug, Clone)]
pub struct QubitStreams {
    pub alice: Vec<QubitRef>,
    pub agents: Vec<Vec<QubitRef>>,
}

impl QubitStreams {
    /// Qubits that cross the quantum channel.
    pub fn transmitted(&self) -> usize {
        self.agents.iter().map(Vec::len).sum()
    }
}

/// Assigns qubit `n − 1` of each tuple to Alice and qubit `i` to Agent_i.
pub fn dispatch(plan: &DistributionPlan) -> QubitStreams {
    let n = plan.n;
    let stream = |q: usize| -> Vec<QubitRef> {
        (0..plan.len())
            .map(|p| QubitRef {
                stream_position: p,
                qubit: q,
            })
            .collect()
    };
    QubitStreams {
        alice: stream(n - 1),
        agents: (0..n - 1).map(stream).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decoy_product_state() {
        use DecoyLabel::*;
        let rec = decoy_tuple_with_labels(vec![Plus, Minus, Plus]).unwrap();
        let amp = 1.0 / (2.0 * 2f64.sqrt());
        for i in 0..8usize {
            // qubit 1 is |−⟩: sign flips when bit 1 is set
            let sign = if i & 2 != 0 { -1.0 } else { 1.0 };
            let a = rec.tuple.state.amplitude(i);
            assert!((a - Complex64::new(sign * amp, 0.0)).norm() < 1e-12);
        }
        let rec = decoy_tuple_with_labels(vec![Plus, Plus]).unwrap();
        for i in 0..4 {
            assert!((rec.tuple.state.amplitude(i) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        }
        assert_eq!(rec.decoy_prep.as_ref().unwrap().len(), 2);
        assert!(decoy_tuple_with_labels(vec![Plus]).is_err());
    }

    #[test]
    fn decoy_labels_are_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 10_000;
        let mut minus = [0usize; 4];
        for _ in 0..draws {
            let rec = make_decoy_tuple(4, &mut rng).unwrap();
            for (q, l) in rec.decoy_prep.unwrap().iter().enumerate() {
                minus[q] += (*l == DecoyLabel::Minus) as usize;
            }
        }
        for count in minus {
            assert!((count as f64 / draws as f64 - 0.5).abs() < 0.02);
        }
        assert!(make_decoy_tuple(1, &mut rng).is_err());
    }

    #[test]
    fn plan_without_decoys_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plan = build_plan(6, 0, 3, &mut rng).unwrap();
        assert_eq!(plan.order, (0..6).collect::<Vec<_>>());
        assert!(plan.position_map.is_empty());
        assert!(plan.tuples.iter().all(|t| t.kind == TupleKind::Information));
    }

    #[test]
    fn plan_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plan = build_plan(6, 4, 3, &mut rng).unwrap();
        assert_eq!(plan.len(), 10);
        assert_eq!(plan.position_map.len(), 4);
        for entry in &plan.position_map {
            let rec = &plan.tuples[entry.position];
            assert_eq!(rec.kind, TupleKind::Decoy);
            assert_eq!(rec.decoy_prep.as_ref(), Some(&entry.prep));
            assert_eq!(entry.prep.len(), 3);
        }
        let info = plan.information_positions();
        assert_eq!(info.len(), 6);
        let mut all: Vec<usize> = info.iter().copied().chain(plan.decoy_positions()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(build_plan(0, 1, 3, &mut rng).is_err());
    }

    #[test]
    fn information_tuples_are_ghz() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let plan = build_plan(3, 2, 4, &mut rng).unwrap();
        let ghz = prepare_ghz(4, GhzTopology::Linear).unwrap();
        for p in plan.information_positions() {
            assert!(plan.tuples[p].tuple.state.approx_eq(&ghz, 1e-12));
            assert!(plan.tuples[p].decoy_prep.is_none());
        }
    }

    #[test]
    fn single_decoy_position_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let first = (0..draws)
            .filter(|_| build_plan(1, 1, 2, &mut rng).unwrap().order[0] == 1)
            .count();
        assert!((first as f64 / draws as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn decoy_positions_are_exchangeable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (m, d, plans) = (5, 3, 8_000);
        let mut hits = vec![0usize; m + d];
        for _ in 0..plans {
            for p in build_plan(m, d, 2, &mut rng).unwrap().decoy_positions() {
                hits[p] += 1;
            }
        }
        let p = d as f64 / (m + d) as f64;
        let sigma = (p * (1.0 - p) / plans as f64).sqrt();
        for h in hits {
            assert!((h as f64 / plans as f64 - p).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn dispatch_routes_qubits() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plan = build_plan(1, 0, 3, &mut rng).unwrap();
        let streams = dispatch(&plan);
        assert_eq!(streams.alice[0].qubit, 2);
        assert_eq!(streams.agents[1][0].qubit, 1);
        assert_eq!(streams.agents[0][0].qubit, 0);

        let plan = build_plan(6, 4, 3, &mut rng).unwrap();
        let streams = dispatch(&plan);
        assert_eq!(streams.transmitted(), (6 + 4) * 2);
        let decoy_qubits = streams
            .agents
            .iter()
            .flatten()
            .filter(|r| plan.tuples[r.stream_position].kind == TupleKind::Decoy)
            .count();
        assert_eq!(decoy_qubits, 4 * 2);
        assert!(streams.agents.iter().all(|s| s.len() == 10));
    }
}
