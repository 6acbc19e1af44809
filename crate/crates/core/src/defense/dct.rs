use std::sync::{Arc, OnceLock};

use crate::autodiff::gemm;

/// Orthonormal DCT-II of a fixed size, stored as a dense row-major matrix
/// `C[k][n] = s_k cos(pi (n + 1/2) k / N)`.
#[derive(Debug)]
pub struct Dct {
    size: usize,
    matrix: Vec<f64>,
}

impl Dct {
    pub fn new(size: usize) -> Self {
        let n = size as f64;
        let mut matrix = vec![0.0; size * size];
        for k in 0..size {
            let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for i in 0..size {
                matrix[k * size + i] = s * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / n).cos();
            }
        }
        Self { size, matrix }
    }

    /// Shared 512-point instance.
    pub fn shared() -> Arc<Dct> {
        static DCT: OnceLock<Arc<Dct>> = OnceLock::new();
        DCT.get_or_init(|| Arc::new(Dct::new(crate::signal::FRAME_LEN))).clone()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Transform each row of a row-major `rows x size` block.
    pub fn forward(&self, rows: &[f64]) -> Vec<f64> {
        let m = rows.len() / self.size;
        let mut out = vec![0.0; rows.len()];
        gemm(m, self.size, self.size, 1.0, rows, false, &self.matrix, true, 0.0, &mut out);
        out
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let m = coeffs.len() / self.size;
        let mut out = vec![0.0; coeffs.len()];
        gemm(m, self.size, self.size, 1.0, coeffs, false, &self.matrix, false, 0.0, &mut out);
        out
    }
}
