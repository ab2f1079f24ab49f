use rand::Rng;

/// Dense row-major `rows × dim` matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Table {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Table {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "table data length");
        Table { rows, dim, data }
    }

    /// Uniform in `±sqrt(6 / (rows + dim))`.
    pub fn xavier_uniform(rows: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (rows + dim) as f64).sqrt();
        let data = (0..rows * dim).map(|_| rng.random_range(-bound..bound)).collect();
        Table { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn add_assign(&mut self, other: &Table) {
        debug_assert_eq!((self.rows, self.dim), (other.rows, other.dim));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}
