use num_traits::Float;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F = f32> {
    rows: usize,
    dim: usize,
    data: Vec<F>,
}

impl<F: Float> Matrix<F> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            rows,
            dim,
            data: vec![F::zero(); rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * dim, "matrix data does not match shape");
        Matrix { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Row access used by the update kernels, so the same arithmetic runs on a
/// private matrix and on the trainer's shared storage.
pub trait RowStore<F> {
    fn dim(&self) -> usize;
    fn num_rows(&self) -> usize;
    fn read_row(&self, row: usize, out: &mut [F]);
    /// `row += scale * x`
    fn add_scaled(&mut self, row: usize, scale: F, x: &[F]);
}

impl<F: Float> RowStore<F> for Matrix<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_rows(&self) -> usize {
        self.rows
    }

    fn read_row(&self, row: usize, out: &mut [F]) {
        out.copy_from_slice(self.row(row));
    }

    fn add_scaled(&mut self, row: usize, scale: F, x: &[F]) {
        axpy(scale, x, self.row_mut(row));
    }
}

pub(crate) fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = F::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

pub(crate) fn axpy<F: Float>(a: F, x: &[F], y: &mut [F]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..19).map(|i| i as f64 * 0.5 - 3.0).collect();
        let b: Vec<f64> = (0..19).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn row_store_add_scaled() {
        let mut m = Matrix::<f32>::zeros(2, 3);
        m.add_scaled(1, 2.0, &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(0), [0.0; 3]);
        assert_eq!(m.row(1), [2.0, 4.0, 6.0]);
    }
}
