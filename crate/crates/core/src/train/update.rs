//! Negative-sampling update kernels.
//!
//! For an input vector `h` and an output row set `{v_pos} ∪ {v_k}` the
//! per-example loss is
//!
//! ```text
//! L = -ln σ(h·v_pos) - Σ_k ln σ(-h·v_k)
//! ```
//!
//! SGNS uses the target row of the input matrix as `h`; CBOW uses the mean
//! of the context rows. Every gradient is computed from pre-update values
//! and then applied, so a kernel call is exactly one gradient-descent step
//! even when a negative id repeats.

use num_traits::Float;

use super::matrix::{dot, RowStore};
use crate::error::{Error, Result};

/// Dot products are clamped to `[-SIGMOID_CLIP, SIGMOID_CLIP]` before the
/// sigmoid is applied.
pub const SIGMOID_CLIP: f64 = 8.0;

/// Scratch buffers reused across kernel calls.
#[derive(Debug, Clone)]
pub struct Workspace<F> {
    h: Vec<F>,
    grad_h: Vec<F>,
    rows: Vec<F>,
    coefs: Vec<F>,
    tmp: Vec<F>,
}

impl<F: Float> Workspace<F> {
    pub fn new(dim: usize) -> Self {
        Workspace {
            h: vec![F::zero(); dim],
            grad_h: vec![F::zero(); dim],
            rows: Vec::new(),
            coefs: Vec::new(),
            tmp: vec![F::zero(); dim],
        }
    }

    fn dim(&self) -> usize {
        self.h.len()
    }
}

/// Scores `ws.h` against the positive and negative output rows, applies the
/// output-row updates, leaves `dL/dh` in `ws.grad_h` and returns the
/// pre-update loss.
fn negative_sampling<F, O>(ws: &mut Workspace<F>, output: &mut O, positive: u32, negatives: &[u32], lr: F) -> f64
where
    F: Float,
    O: RowStore<F> + ?Sized,
{
    let d = ws.dim();
    let n = negatives.len() + 1;
    ws.rows.resize(n * d, F::zero());
    ws.coefs.clear();

    let mut likelihood = 1.0f64;
    let mut log_acc = 0.0f64;
    for k in 0..n {
        let id = if k == 0 { positive } else { negatives[k - 1] };
        let row = &mut ws.rows[k * d..(k + 1) * d];
        output.read_row(id as usize, row);
        let x = dot(&ws.h, row).to_f64().unwrap_or(0.0).clamp(-SIGMOID_CLIP, SIGMOID_CLIP);
        let e = (-x).exp();
        let sig = 1.0 / (1.0 + e);
        let (p, coef) = if k == 0 {
            (sig, sig - 1.0)
        } else {
            (e / (1.0 + e), sig)
        };
        likelihood *= p;
        if likelihood < 1e-280 {
            log_acc += likelihood.ln();
            likelihood = 1.0;
        }
        ws.coefs.push(F::from(coef).unwrap());
    }

    for g in ws.grad_h.iter_mut() {
        *g = F::zero();
    }
    for k in 0..n {
        let coef = ws.coefs[k];
        let row = &ws.rows[k * d..(k + 1) * d];
        for (g, &v) in ws.grad_h.iter_mut().zip(row) {
            *g = *g + coef * v;
        }
    }

    for k in 0..n {
        let id = if k == 0 { positive } else { negatives[k - 1] };
        output.add_scaled(id as usize, -lr * ws.coefs[k], &ws.h);
    }

    -(log_acc + likelihood.ln())
}

/// Unchecked SGNS step; ids must be in range.
#[inline]
pub(crate) fn sgns_kernel<F, I, O>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: u32,
    negatives: &[u32],
    lr: F,
    ws: &mut Workspace<F>,
) -> f64
where
    F: Float,
    I: RowStore<F> + ?Sized,
    O: RowStore<F> + ?Sized,
{
    input.read_row(target as usize, &mut ws.h);
    let loss = negative_sampling(ws, output, context, negatives, lr);
    input.add_scaled(target as usize, -lr, &ws.grad_h);
    loss
}

/// Unchecked CBOW step; `context` must be non-empty and ids in range.
#[inline]
pub(crate) fn cbow_kernel<F, I, O>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: &[u32],
    negatives: &[u32],
    lr: F,
    ws: &mut Workspace<F>,
) -> f64
where
    F: Float,
    I: RowStore<F> + ?Sized,
    O: RowStore<F> + ?Sized,
{
    for h in ws.h.iter_mut() {
        *h = F::zero();
    }
    for &c in context {
        input.read_row(c as usize, &mut ws.tmp);
        for (h, &x) in ws.h.iter_mut().zip(&ws.tmp) {
            *h = *h + x;
        }
    }
    let inv = F::one() / F::from(context.len()).unwrap();
    for h in ws.h.iter_mut() {
        *h = *h * inv;
    }
    let loss = negative_sampling(ws, output, target, negatives, lr);
    let scale = -lr * inv;
    for &c in context {
        input.add_scaled(c as usize, scale, &ws.grad_h);
    }
    loss
}

fn check_id(id: u32, rows: usize, what: &str) -> Result<()> {
    if (id as usize) < rows {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} id {id} outside vocabulary of size {rows}"
        )))
    }
}

fn check_common<F: Float>(rows: usize, out_rows: usize, negatives: &[u32], lr: F) -> Result<()> {
    if rows != out_rows {
        return Err(Error::InvalidArgument("input and output matrices differ in rows".into()));
    }
    if !(lr > F::zero()) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }
    for &n in negatives {
        check_id(n, rows, "negative")?;
    }
    Ok(())
}

/// One SGNS gradient step on `(target, context)` with the given negatives.
/// Returns the loss before the update.
pub fn sgns_step<F, I, O>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: u32,
    negatives: &[u32],
    lr: F,
) -> Result<f64>
where
    F: Float,
    I: RowStore<F>,
    O: RowStore<F>,
{
    let rows = input.num_rows();
    check_common(rows, output.num_rows(), negatives, lr)?;
    check_id(target, rows, "target")?;
    check_id(context, rows, "context")?;
    if target == context {
        return Err(Error::InvalidArgument("target and context must differ".into()));
    }
    let mut ws = Workspace::new(input.dim());
    Ok(sgns_kernel(input, output, target, context, negatives, lr, &mut ws))
}

/// One CBOW gradient step predicting `target` from the mean of `context`.
/// Returns the loss before the update.
pub fn cbow_step<F, I, O>(
    input: &mut I,
    output: &mut O,
    target: u32,
    context: &[u32],
    negatives: &[u32],
    lr: F,
) -> Result<f64>
where
    F: Float,
    I: RowStore<F>,
    O: RowStore<F>,
{
    let rows = input.num_rows();
    check_common(rows, output.num_rows(), negatives, lr)?;
    check_id(target, rows, "target")?;
    if context.is_empty() {
        return Err(Error::InvalidArgument("CBOW context is empty".into()));
    }
    for &c in context {
        check_id(c, rows, "context")?;
        if c == target {
            return Err(Error::InvalidArgument("CBOW context contains the target".into()));
        }
    }
    let mut ws = Workspace::new(input.dim());
    Ok(cbow_kernel(input, output, target, context, negatives, lr, &mut ws))
}
