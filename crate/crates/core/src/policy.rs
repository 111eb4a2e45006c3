//! Single-hidden-layer recurrent controller.
//!
//! `h' = tanh(W_ih·x + W_hh·h + b_h)`, `y = W_ho·h' + b_o`. The output layer is
//! linear; discrete actions take the argmax (lowest index on ties) and
//! continuous actions pass the outputs through unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{ActionMode, Genome, PolicySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    activations: Vec<f64>,
}

impl HiddenState {
    pub fn activations(&self) -> &[f64] {
        &self.activations
    }

    pub fn from_activations(activations: Vec<f64>) -> Self {
        Self { activations }
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Compact text form used in episode traces.
    pub fn label(&self) -> String {
        match self {
            Action::Discrete(i) => i.to_string(),
            Action::Continuous(v) => v
                .iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

pub fn reset_hidden(spec: &PolicySpec) -> HiddenState {
    HiddenState {
        activations: vec![0.0; spec.n_hidden],
    }
}

/// One network evaluation. Returns the output vector and the next hidden state.
pub fn forward(
    genome: &Genome,
    spec: &PolicySpec,
    obs: &[f64],
    h: &HiddenState,
) -> Result<(Vec<f64>, HiddenState)> {
    check_dims(genome, spec, obs, h)?;
    let mut next = vec![0.0; spec.n_hidden];
    let mut out = vec![0.0; spec.n_outputs];
    forward_raw(genome.weights(), spec, obs, &h.activations, &mut next, &mut out);
    Ok((out, HiddenState { activations: next }))
}

/// Evaluates the network and advances `h` in place; `out` receives the outputs.
/// Dimension checks are the caller's job.
pub(crate) fn forward_in_place(
    genome: &Genome,
    spec: &PolicySpec,
    obs: &[f64],
    h: &mut HiddenState,
    scratch: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    scratch.clear();
    scratch.resize(spec.n_hidden, 0.0);
    out.clear();
    out.resize(spec.n_outputs, 0.0);
    forward_raw(genome.weights(), spec, obs, &h.activations, scratch, out);
    std::mem::swap(&mut h.activations, scratch);
}

fn forward_raw(
    w: &[f64],
    spec: &PolicySpec,
    obs: &[f64],
    h: &[f64],
    next: &mut [f64],
    out: &mut [f64],
) {
    let (n_in, n_h) = (spec.n_inputs, spec.n_hidden);
    let (w_ih, rest) = w.split_at(spec.ih_len());
    let (w_hh, rest) = rest.split_at(spec.hh_len());
    let (b_h, rest) = rest.split_at(n_h);
    let (w_ho, b_o) = rest.split_at(spec.ho_len());

    for (j, slot) in next.iter_mut().enumerate() {
        let row_ih = &w_ih[j * n_in..(j + 1) * n_in];
        let row_hh = &w_hh[j * n_h..(j + 1) * n_h];
        let mut acc = b_h[j];
        acc += dot(row_ih, obs);
        acc += dot(row_hh, h);
        *slot = acc.tanh();
    }
    for (o, slot) in out.iter_mut().enumerate() {
        *slot = b_o[o] + dot(&w_ho[o * n_h..(o + 1) * n_h], next);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(genome: &Genome, spec: &PolicySpec, obs: &[f64], h: &HiddenState) -> Result<()> {
    let expected = crate::genome::genome_length(spec);
    if genome.len() != expected {
        return Err(Error::Dimension {
            what: "genome",
            expected,
            actual: genome.len(),
        });
    }
    if obs.len() != spec.n_inputs {
        return Err(Error::Dimension {
            what: "observation",
            expected: spec.n_inputs,
            actual: obs.len(),
        });
    }
    if h.len() != spec.n_hidden {
        return Err(Error::Dimension {
            what: "hidden state",
            expected: spec.n_hidden,
            actual: h.len(),
        });
    }
    Ok(())
}

pub fn select_action(outputs: &[f64], mode: ActionMode) -> Result<Action> {
    if outputs.is_empty() {
        return Err(Error::Contract("select_action on empty output vector".into()));
    }
    Ok(match mode {
        ActionMode::Discrete => Action::Discrete(argmax(outputs)),
        ActionMode::Continuous => Action::Continuous(outputs.to_vec()),
    })
}

/// Index of the largest value; the first one wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::new_random_genome;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn spec(i: usize, h: usize, o: usize) -> PolicySpec {
        PolicySpec::new(i, h, o, ActionMode::Discrete).unwrap()
    }

    #[test]
    fn zero_genome_gives_zero_everything() {
        let s = spec(3, 4, 2);
        let (out, h) = forward(&Genome::zeros(&s), &s, &[1.0, -2.0, 0.5], &reset_hidden(&s)).unwrap();
        assert!(out.iter().all(|&y| y == 0.0));
        assert!(h.activations().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn hand_computed_single_unit() {
        let s = spec(1, 1, 1);
        let g = Genome::from_weights(&s, vec![1.0, 0.0, 0.0, 2.0, 0.0]).unwrap();
        let (out, h) = forward(&g, &s, &[0.5], &reset_hidden(&s)).unwrap();
        assert!((h.activations()[0] - 0.462_117_157_260_009_8).abs() < 1e-12);
        assert!((out[0] - 0.924_234_314_520_019_6).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors_name_lengths() {
        let s = spec(2, 3, 1);
        let g = Genome::zeros(&s);
        let err = forward(&g, &s, &[0.0], &reset_hidden(&s)).unwrap_err();
        assert!(matches!(
            err,
            Error::Dimension { what: "observation", expected: 2, actual: 1 }
        ));
        let err = forward(&g, &s, &[0.0, 0.0], &HiddenState::from_activations(vec![0.0])).unwrap_err();
        assert!(matches!(err, Error::Dimension { expected: 3, actual: 1, .. }));
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(
            select_action(&[0.1, 0.9, 0.3], ActionMode::Discrete).unwrap(),
            Action::Discrete(1)
        );
        assert_eq!(
            select_action(&[0.5, 0.5], ActionMode::Discrete).unwrap(),
            Action::Discrete(0)
        );
        assert_eq!(
            select_action(&[0.2, -0.7], ActionMode::Continuous).unwrap(),
            Action::Continuous(vec![0.2, -0.7])
        );
        assert!(select_action(&[], ActionMode::Discrete).is_err());
    }

    #[test]
    fn reset_hidden_is_zero() {
        assert_eq!(reset_hidden(&spec(1, 32, 1)).activations(), &[0.0; 32][..]);
        assert_eq!(reset_hidden(&spec(1, 1, 1)).activations(), &[0.0]);
    }

    #[test]
    fn in_place_matches_pure() {
        let s = spec(4, 6, 3);
        let mut rng = RngStream::new(2);
        let g = new_random_genome(&s, 0.5, &mut rng);
        let mut h = reset_hidden(&s);
        let mut pure_h = reset_hidden(&s);
        let (mut scratch, mut out) = (Vec::new(), Vec::new());
        for t in 0..5 {
            let obs: Vec<f64> = (0..4).map(|i| (t * 4 + i) as f64 * 0.1).collect();
            let (pure_out, next) = forward(&g, &s, &obs, &pure_h).unwrap();
            forward_in_place(&g, &s, &obs, &mut h, &mut scratch, &mut out);
            assert_eq!(out, pure_out);
            assert_eq!(h, next);
            pure_h = next;
        }
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_monotone_maps(
            values in prop::collection::vec(-10.0f64..10.0, 1..12),
            a in 0.01f64..5.0,
            b in -3.0f64..3.0,
        ) {
            let base = argmax(&values);
            let affine: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            let cubic: Vec<f64> = values.iter().map(|v| v * v * v + v).collect();
            let squashed: Vec<f64> = values.iter().map(|v| (0.3 * v).tanh()).collect();
            prop_assert_eq!(argmax(&affine), base);
            prop_assert_eq!(argmax(&cubic), base);
            // tanh can collapse distinct large values to equal floats; only
            // check it when values are well separated.
            let mut sorted = values.clone();
            sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
            if sorted.windows(2).all(|w| w[1] - w[0] > 1e-6) {
                prop_assert_eq!(argmax(&squashed), base);
            }
        }

        #[test]
        fn hidden_state_stays_bounded(
            seed in any::<u64>(),
            scale in 0.1f64..20.0,
            steps in 1usize..30,
        ) {
            let s = spec(3, 5, 2);
            let mut rng = RngStream::new(seed);
            let g = new_random_genome(&s, scale, &mut rng);
            let mut h = reset_hidden(&s);
            for _ in 0..steps {
                let obs: Vec<f64> = (0..3).map(|_| 100.0 * rng.normal()).collect();
                let (_, next) = forward(&g, &s, &obs, &h).unwrap();
                prop_assert!(next.activations().iter().all(|a| (-1.0..=1.0).contains(a)));
                h = next;
            }
        }

        #[test]
        fn forward_is_pure(seed in any::<u64>()) {
            let s = spec(2, 3, 2);
            let mut rng = RngStream::new(seed);
            let g = new_random_genome(&s, 1.0, &mut rng);
            let before = g.clone();
            let h = HiddenState::from_activations(vec![0.1, -0.2, 0.3]);
            let a = forward(&g, &s, &[0.4, -0.5], &h).unwrap();
            let b = forward(&g, &s, &[0.4, -0.5], &h).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(g, before);
        }
    }
}
