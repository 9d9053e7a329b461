#![allow(dead_code)]

use rand::Rng;
use socialvec::train::{cbow_step, sgns_step, Matrix};

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, dim: usize, scale: f64) -> Matrix<f64> {
    let data = (0..rows * dim).map(|_| (rng.random::<f64>() - 0.5) * scale).collect();
    Matrix::from_vec(rows, dim, data)
}

/// One update shape: SGNS uses `context[0]` as the positive id; CBOW
/// averages every `context` row and predicts `target`.
#[derive(Debug, Clone)]
pub struct Example {
    pub cbow: bool,
    pub target: u32,
    pub context: Vec<u32>,
    pub negatives: Vec<u32>,
}

pub fn loss(input: &Matrix<f64>, output: &Matrix<f64>, ex: &Example) -> f64 {
    let (mut i, mut o) = (input.clone(), output.clone());
    step(&mut i, &mut o, ex, 1e-12)
}

pub fn step(input: &mut Matrix<f64>, output: &mut Matrix<f64>, ex: &Example, lr: f64) -> f64 {
    if ex.cbow {
        cbow_step(input, output, ex.target, &ex.context, &ex.negatives, lr).unwrap()
    } else {
        sgns_step(input, output, ex.target, ex.context[0], &ex.negatives, lr).unwrap()
    }
}

/// Relative error `|a - n| / max(|a|, |n|)` between the gradient implied by
/// one unit-rate step and central finite differences of the loss.
pub fn gradient_error(input: &Matrix<f64>, output: &Matrix<f64>, ex: &Example, h: f64) -> f64 {
    let (mut i1, mut o1) = (input.clone(), output.clone());
    step(&mut i1, &mut o1, ex, 1.0);
    let analytic: Vec<f64> = input
        .as_slice()
        .iter()
        .zip(i1.as_slice())
        .chain(output.as_slice().iter().zip(o1.as_slice()))
        .map(|(before, after)| before - after)
        .collect();

    let mut numeric = Vec::with_capacity(analytic.len());
    for which in 0..2 {
        let len = if which == 0 { input.as_slice().len() } else { output.as_slice().len() };
        for k in 0..len {
            let probe = |delta: f64| {
                let (mut i, mut o) = (input.clone(), output.clone());
                let m = if which == 0 { &mut i } else { &mut o };
                m.as_mut_slice()[k] += delta;
                loss(&i, &o, ex)
            };
            numeric.push((probe(h) - probe(-h)) / (2.0 * h));
        }
    }

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    let scale = norm(&analytic).max(norm(&numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// A random tiny configuration: at most 10 entities and 8 dimensions.
pub fn random_example<R: Rng>(rng: &mut R, cbow: bool) -> (Matrix<f64>, Matrix<f64>, Example) {
    let rows = rng.random_range(3..=10);
    let dim = rng.random_range(1..=8);
    let input = random_matrix(rng, rows, dim, 1.0);
    let output = random_matrix(rng, rows, dim, 1.0);
    let target = rng.random_range(0..rows as u32);
    let mut others: Vec<u32> = (0..rows as u32).filter(|&r| r != target).collect();
    let n_ctx = if cbow { rng.random_range(1..=others.len().min(4)) } else { 1 };
    let mut context = Vec::with_capacity(n_ctx);
    for _ in 0..n_ctx {
        let k = rng.random_range(0..others.len());
        context.push(others.swap_remove(k));
    }
    let negatives = (0..rng.random_range(0..=5)).map(|_| rng.random_range(0..rows as u32)).collect();
    (input, output, Example { cbow, target, context, negatives })
}
