use serde::{Deserialize, Serialize};

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant columns store 1.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(values: &[f64], p: usize) -> Self {
        let n = (values.len() / p).max(1) as f64;
        let mut mean = vec![0.0; p];
        for row in values.chunks_exact(p) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in values.chunks_exact(p) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, values: &[f64]) -> Vec<f64> {
        let p = self.mean.len();
        let mut out = vec![0.0; values.len()];
        for (src, dst) in values.chunks_exact(p).zip(out.chunks_exact_mut(p)) {
            self.transform_row(src, dst);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_unit_variance() {
        let x = [1.0, 10.0, 2.0, 10.0, 3.0, 10.0];
        let s = Standardizer::fit(&x, 2);
        assert_eq!(s.mean, vec![2.0, 10.0]);
        assert_eq!(s.scale[1], 1.0);
        let z = s.transform(&x);
        assert!((z[0] + z[2] + z[4]).abs() < 1e-12);
        let var: f64 = [z[0], z[2], z[4]].iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
    }
}
