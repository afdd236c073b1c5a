//! Simulation of a quantum protocol in which Alice distributes private
//! information vectors to `n − 1` agents through GHZ tuples, together with
//! the attack models and statistics used to evaluate it.

pub mod adversary;
pub mod analysis;
pub mod bitvec;
pub mod distribution;
pub mod error;
pub mod protocol;
pub mod statevec;

pub use adversary::{AttackKind, BasisPolicy, EveRecord, EveStrategy};
pub use analysis::{
    analytic_sample, detection_experiment, factorized_oracle, joint_oracle, Experiment, ExperimentStats,
    OutcomeDistribution, Rate,
};
pub use bitvec::{cip_census, concat_aiv, inner_product_mod2, BitVector, SegmentLayout};
pub use distribution::{build_plan, DistributionPlan, TupleKind};
pub use error::{Error, Result};
pub use protocol::{run_protocol, Registers, Scenario, Transcript, Verdict};
pub use statevec::{GhzTopology, MeasurementBasis, PureState};
