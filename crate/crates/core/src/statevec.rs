//! Dense pure-state simulation for small registers.
//!
//! Basis label bit `j` is the value of qubit `j`; qubit 0 is the least
//! significant. Hadamard-basis measurements rotate by H and then measure in
//! the computational basis, so outcome 0 stands for |+⟩ and 1 for |−⟩.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bitvec::BitVector;
use crate::error::{Error, Result};

pub const DEFAULT_QUBIT_CAP: usize = 24;
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Amplitudes with magnitude below this are treated as outside the support.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementBasis {
    Computational,
    Hadamard,
}

fn check_cap(n: usize) -> Result<()> {
    if n > DEFAULT_QUBIT_CAP {
        return Err(Error::QubitCap {
            requested: n,
            cap: DEFAULT_QUBIT_CAP,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_cap(n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits: n, amps })
    }

    /// Computational basis state |labels⟩.
    pub fn basis(labels: &BitVector) -> Result<Self> {
        let mut s = Self::zero(labels.len())?;
        let index = labels.to_u64().expect("capped length fits in a word") as usize;
        s.amps.swap(0, index);
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidState(format!(
                "{} amplitudes is not a power of two",
                amps.len()
            )));
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        check_cap(num_qubits)?;
        let s = Self { num_qubits, amps };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!("norm² {norm} is not 1")));
        }
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_hadamard(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a = self.amps[i];
                let b = self.amps[i | bit];
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[i | bit] = (a - b) * FRAC_1_SQRT_2;
            }
        }
        Ok(())
    }

    pub fn apply_x(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                self.amps.swap(i, i | bit);
            }
        }
        Ok(())
    }

    pub fn apply_z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubit(control)?;
        self.check_qubit(target)?;
        if control == target {
            return Err(Error::SameQubit(control));
        }
        let (c, t) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
        Ok(())
    }

    /// `self ⊗ high`: `self` keeps qubits `0..k`, `high` occupies the qubits above.
    pub fn tensor(&self, high: &PureState) -> Result<PureState> {
        check_cap(self.num_qubits + high.num_qubits)?;
        let mut amps = Vec::with_capacity(self.amps.len() * high.amps.len());
        for h in &high.amps {
            for l in &self.amps {
                amps.push(l * h);
            }
        }
        Ok(PureState {
            num_qubits: self.num_qubits + high.num_qubits,
            amps,
        })
    }

    /// Splits off the most significant qubit when the state is a product
    /// `rest ⊗ |q⟩`. Returns `None` if that qubit is entangled with the rest.
    pub fn split_last(&self) -> Option<(PureState, [Complex64; 2])> {
        if self.num_qubits == 0 {
            return None;
        }
        let half = self.amps.len() / 2;
        let (lo, hi) = self.amps.split_at(half);
        let w0 = lo.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let w1 = hi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let inner = |u: &[Complex64], v: &[Complex64]| -> Complex64 {
            u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
        };
        // Global phase is fixed by making the heavier coefficient real and positive.
        let (rest, q) = if w0 >= w1 {
            let rest: Vec<Complex64> = lo.iter().map(|a| a / w0).collect();
            let q1 = inner(&rest, hi);
            (rest, [Complex64::new(w0, 0.0), q1])
        } else {
            let rest: Vec<Complex64> = hi.iter().map(|a| a / w1).collect();
            let q0 = inner(&rest, lo);
            (rest, [q0, Complex64::new(w1, 0.0)])
        };
        let product = rest
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(r, (a, b))| (a - r * q[0]).norm() <= 1e-9 && (b - r * q[1]).norm() <= 1e-9);
        product.then(|| {
            (
                PureState {
                    num_qubits: self.num_qubits - 1,
                    amps: rest,
                },
                q,
            )
        })
    }

    pub fn approx_eq(&self, other: &PureState, tol: f64) -> bool {
        self.num_qubits == other.num_qubits
            && self
                .amps
                .iter()
                .zip(&other.amps)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    fn rotate_into(&mut self, bases: impl IntoIterator<Item = (usize, MeasurementBasis)>) -> Result<()> {
        for (q, basis) in bases {
            if basis == MeasurementBasis::Hadamard {
                self.apply_hadamard(q)?;
            }
        }
        Ok(())
    }

    /// Exact outcome probabilities, indexed by basis label, after rotating each
    /// qubit into its measurement basis.
    pub fn probabilities(&self, bases: &[MeasurementBasis]) -> Result<Vec<f64>> {
        if bases.len() != self.num_qubits {
            return Err(Error::LengthMismatch {
                left: bases.len(),
                right: self.num_qubits,
            });
        }
        let mut rotated = self.clone();
        rotated.rotate_into(bases.iter().copied().enumerate())?;
        Ok(rotated.amps.iter().map(|a| a.norm_sqr()).collect())
    }

    /// Measures every qubit; the collapsed state is the observed basis state
    /// in the measured frame.
    pub fn measure_all<R: Rng + ?Sized>(
        &self,
        bases: &[MeasurementBasis],
        rng: &mut R,
    ) -> Result<(BitVector, PureState)> {
        let probs = self.probabilities(bases)?;
        let index = sample_index(&probs, rng);
        let outcome = BitVector::from_u64(index as u64, self.num_qubits);
        let collapsed = PureState::basis(&outcome)?;
        Ok((outcome, collapsed))
    }

    /// Measures the listed qubits in order, collapsing the state in place.
    /// Each measured qubit is left in the eigenstate it collapsed to, so a
    /// Hadamard-basis outcome leaves |+⟩ or |−⟩ behind.
    pub fn measure_qubits<R: Rng + ?Sized>(
        &mut self,
        qubits: &[usize],
        bases: &[MeasurementBasis],
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        if qubits.len() != bases.len() {
            return Err(Error::LengthMismatch {
                left: qubits.len(),
                right: bases.len(),
            });
        }
        for &q in qubits {
            self.check_qubit(q)?;
        }
        self.rotate_into(qubits.iter().copied().zip(bases.iter().copied()))?;
        let mut out = Vec::with_capacity(qubits.len());
        for &q in qubits {
            out.push(self.collapse_qubit(q, rng));
        }
        self.rotate_into(qubits.iter().copied().zip(bases.iter().copied()))?;
        Ok(out)
    }

    fn collapse_qubit<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> bool {
        let bit = 1usize << q;
        let p1: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let one = rng.random::<f64>() < p1;
        let keep = if one { p1 } else { 1.0 - p1 };
        let scale = 1.0 / keep.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) == one {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        one
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    // Rounding left `u` past the end: fall back to the last nonzero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn prepare_basis(labels: &BitVector) -> Result<PureState> {
    PureState::basis(labels)
}

pub fn apply_hadamard(mut s: PureState, qubit: usize) -> Result<PureState> {
    s.apply_hadamard(qubit)?;
    Ok(s)
}

pub fn apply_cnot(mut s: PureState, control: usize, target: usize) -> Result<PureState> {
    s.apply_cnot(control, target)?;
    Ok(s)
}

/// Exact Born distribution over outcomes with nonzero probability, keyed by basis label.
pub fn distribution(s: &PureState, bases: &[MeasurementBasis]) -> Result<Vec<(u64, f64)>> {
    Ok(s.probabilities(bases)?
        .into_iter()
        .enumerate()
        .filter(|&(_, p)| p > SUPPORT_CUTOFF * SUPPORT_CUTOFF)
        .map(|(i, p)| (i as u64, p))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GhzTopology {
    Linear,
    LogDepth,
}

/// A GHZ preparation circuit: H on qubit 0 followed by layers of CNOTs whose
/// gates act on disjoint qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhzCircuit {
    num_qubits: usize,
    layers: Vec<Vec<(usize, usize)>>,
}

impl GhzCircuit {
    pub fn new(n: usize, topology: GhzTopology) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidState(format!("GHZ needs at least 2 qubits, got {n}")));
        }
        check_cap(n)?;
        let layers = match topology {
            GhzTopology::Linear => (0..n - 1).map(|q| vec![(q, q + 1)]).collect(),
            GhzTopology::LogDepth => {
                let mut layers = Vec::new();
                let mut reached = 1;
                while reached < n {
                    let layer: Vec<_> = (0..reached)
                        .filter(|q| q + reached < n)
                        .map(|q| (q, q + reached))
                        .collect();
                    reached *= 2;
                    layers.push(layer);
                }
                layers
            }
        };
        Ok(Self {
            num_qubits: n,
            layers,
        })
    }

    pub fn layers(&self) -> &[Vec<(usize, usize)>] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn cnot_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn prepare(&self) -> Result<PureState> {
        let mut s = PureState::zero(self.num_qubits)?;
        s.apply_hadamard(0)?;
        for layer in &self.layers {
            for &(c, t) in layer {
                s.apply_cnot(c, t)?;
            }
        }
        Ok(s)
    }
}

pub fn prepare_ghz(n: usize, topology: GhzTopology) -> Result<PureState> {
    GhzCircuit::new(n, topology)?.prepare()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = FRAC_1_SQRT_2;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn basis_indices() {
        assert_eq!(prepare_basis(&bv("0")).unwrap().amplitude(0), c(1.0));
        assert_eq!(prepare_basis(&bv("101")).unwrap().amplitude(5), c(1.0));
        assert_eq!(prepare_basis(&bv("11")).unwrap().amplitude(3), c(1.0));
        assert!(matches!(
            PureState::zero(25),
            Err(Error::QubitCap { requested: 25, .. })
        ));
    }

    #[test]
    fn hadamard_makes_plus_and_minus() {
        let plus = apply_hadamard(prepare_basis(&bv("0")).unwrap(), 0).unwrap();
        assert!(plus.approx_eq(&PureState::from_amplitudes(vec![c(H), c(H)]).unwrap(), 1e-12));
        let minus = apply_hadamard(prepare_basis(&bv("1")).unwrap(), 0).unwrap();
        assert!(minus.approx_eq(&PureState::from_amplitudes(vec![c(H), c(-H)]).unwrap(), 1e-12));
        let back = apply_hadamard(plus, 0).unwrap();
        assert!(back.approx_eq(&prepare_basis(&bv("0")).unwrap(), 1e-12));
        assert!(matches!(
            apply_hadamard(back, 1),
            Err(Error::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn cnot_examples() {
        let s = apply_cnot(prepare_basis(&bv("10")).unwrap(), 1, 0).unwrap();
        assert!(s.approx_eq(&prepare_basis(&bv("11")).unwrap(), 0.0));
        let s = apply_cnot(prepare_basis(&bv("00")).unwrap(), 1, 0).unwrap();
        assert!(s.approx_eq(&prepare_basis(&bv("00")).unwrap(), 0.0));
        assert!(matches!(
            apply_cnot(s.clone(), 0, 0),
            Err(Error::SameQubit(0))
        ));
        assert!(apply_cnot(s, 0, 2).is_err());
    }

    #[test]
    fn cnot_phase_kickback() {
        // control qubit 0 in α|0⟩+β|1⟩, target qubit 1 in |−⟩
        let (alpha, beta) = (0.6, 0.8);
        let control = PureState::from_amplitudes(vec![c(alpha), c(beta)]).unwrap();
        let minus = PureState::from_amplitudes(vec![c(H), c(-H)]).unwrap();
        let out = apply_cnot(control.tensor(&minus).unwrap(), 0, 1).unwrap();
        let flipped = PureState::from_amplitudes(vec![c(alpha), c(-beta)]).unwrap();
        let expected = flipped.tensor(&minus).unwrap();
        // brute-force comparison over all four amplitudes
        for i in 0..4 {
            assert!((out.amplitude(i) - expected.amplitude(i)).norm() < 1e-12);
        }
    }

    #[test]
    fn ghz_amplitudes() {
        let g3 = prepare_ghz(3, GhzTopology::Linear).unwrap();
        for i in 0..8 {
            let want = if i == 0 || i == 7 { H } else { 0.0 };
            assert!((g3.amplitude(i) - c(want)).norm() < 1e-12);
        }
        let g2 = prepare_ghz(2, GhzTopology::LogDepth).unwrap();
        assert!((g2.amplitude(0) - c(H)).norm() < 1e-12);
        assert!((g2.amplitude(3) - c(H)).norm() < 1e-12);
        assert!(prepare_ghz(1, GhzTopology::Linear).is_err());
        assert!(prepare_ghz(25, GhzTopology::Linear).is_err());
    }

    #[test]
    fn ghz_topologies_agree() {
        for n in 2..=10 {
            let lin = prepare_ghz(n, GhzTopology::Linear).unwrap();
            let log = prepare_ghz(n, GhzTopology::LogDepth).unwrap();
            assert!(lin.approx_eq(&log, 1e-12), "n = {n}");
            let depth = GhzCircuit::new(n, GhzTopology::LogDepth).unwrap().depth();
            assert_eq!(depth, (n as f64).log2().ceil() as usize, "n = {n}");
            assert_eq!(GhzCircuit::new(n, GhzTopology::LogDepth).unwrap().cnot_count(), n - 1);
        }
    }

    #[test]
    fn ghz_hadamard_distribution_is_even_parity() {
        for n in 2..=10 {
            let g = prepare_ghz(n, GhzTopology::LogDepth).unwrap();
            let dist = distribution(&g, &vec![MeasurementBasis::Hadamard; n]).unwrap();
            assert_eq!(dist.len(), 1 << (n - 1));
            for (label, p) in dist {
                assert_eq!(label.count_ones() % 2, 0);
                assert!((p - 1.0 / (1u64 << (n - 1)) as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn distribution_examples() {
        let zero = prepare_basis(&bv("0")).unwrap();
        assert_eq!(
            distribution(&zero, &[MeasurementBasis::Computational]).unwrap(),
            vec![(0, 1.0)]
        );
        let mut g = prepare_ghz(3, GhzTopology::Linear).unwrap();
        g.apply_z(2).unwrap();
        let dist = distribution(&g, &[MeasurementBasis::Hadamard; 3]).unwrap();
        let labels: Vec<u64> = dist.iter().map(|d| d.0).collect();
        assert_eq!(labels, vec![1, 2, 4, 7]);
        assert!(dist.iter().all(|d| (d.1 - 0.25).abs() < 1e-10));
    }

    #[test]
    fn plus_in_hadamard_basis_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let plus = apply_hadamard(PureState::zero(1).unwrap(), 0).unwrap();
        for _ in 0..200 {
            let (o, _) = plus.measure_all(&[MeasurementBasis::Hadamard], &mut rng).unwrap();
            assert!(!o.get(0));
        }
    }

    #[test]
    fn measurement_frequencies_match_born_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = prepare_ghz(3, GhzTopology::Linear).unwrap();
        s.apply_hadamard(1).unwrap();
        let bases = [
            MeasurementBasis::Computational,
            MeasurementBasis::Hadamard,
            MeasurementBasis::Computational,
        ];
        let probs = s.probabilities(&bases).unwrap();
        let samples = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..samples {
            let (o, _) = s.measure_all(&bases, &mut rng).unwrap();
            counts[o.to_u64().unwrap() as usize] += 1;
        }
        for (i, &p) in probs.iter().enumerate() {
            let sigma = (p * (1.0 - p) / samples as f64).sqrt();
            let freq = counts[i] as f64 / samples as f64;
            assert!((freq - p).abs() <= 4.0 * sigma + 1e-12, "outcome {i}: {freq} vs {p}");
        }
    }

    #[test]
    fn sequential_measurement_matches_joint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = prepare_ghz(3, GhzTopology::Linear).unwrap();
        let mut counts = [0usize; 8];
        let samples = 40_000;
        for _ in 0..samples {
            let mut s = g.clone();
            let bits = s
                .measure_qubits(&[2, 0, 1], &[MeasurementBasis::Hadamard; 3], &mut rng)
                .unwrap();
            let label = (bits[0] as usize) << 2 | bits[1] as usize | (bits[2] as usize) << 1;
            counts[label] += 1;
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
        for (label, &count) in counts.iter().enumerate() {
            let freq = count as f64 / samples as f64;
            let p = if label.count_ones() % 2 == 0 { 0.25 } else { 0.0 };
            assert!((freq - p).abs() < 0.01, "label {label}: {freq}");
        }
    }

    #[test]
    fn split_last_detects_products() {
        let minus = PureState::from_amplitudes(vec![c(H), c(-H)]).unwrap();
        let g = prepare_ghz(3, GhzTopology::Linear).unwrap();
        let (rest, q) = g.tensor(&minus).unwrap().split_last().unwrap();
        assert!(rest.approx_eq(&g, 1e-12));
        assert!((q[0] - c(H)).norm() < 1e-12 && (q[1] - c(-H)).norm() < 1e-12);
        assert!(g.split_last().is_none());
    }

    #[test]
    fn involutions_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let amps: Vec<Complex64> = (0..16)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let s = PureState::from_amplitudes(amps.iter().map(|a| a / norm).collect()).unwrap();
        let mut t = s.clone();
        t.apply_hadamard(2).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
        t.apply_hadamard(2).unwrap();
        assert!(t.approx_eq(&s, 1e-12));
        t.apply_cnot(3, 1).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-10);
        t.apply_cnot(3, 1).unwrap();
        assert!(t.approx_eq(&s, 1e-12));
    }
}
