//! Diagonal conditioning of the design problem.
//!
//! Amplitude bounds can sit orders of magnitude above frequency bounds, so
//! the solver works on similarity-rescaled matrices `F̃ = D F D` with
//! `D_pp = 1/√m_p`, where `m_p` is the median per-sample information of
//! parameter `p` pooled over candidates and grid members. The rescale is an
//! exact reparametrization: `μ̃_p = m_p μ_p`, `ψ̃_p = ψ_p/m_p`,
//! `λ̃_p = m_p λ_p`, and the objective value is unchanged. All reported
//! quantities are mapped back before leaving the solver.

use nalgebra::DMatrix;

use crate::fisher::FimBank;

#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    /// Median per-sample diagonal information per parameter.
    m: Vec<f64>,
}

impl Scaling {
    pub fn from_banks(banks: &[FimBank]) -> Self {
        let p = banks[0].dim();
        let mut m = vec![1.0; p];
        let mut buf: Vec<f64> = Vec::new();
        for (pi, slot) in m.iter_mut().enumerate() {
            buf.clear();
            for b in banks {
                for n in 0..b.len() {
                    buf.push(b.fim(n)[(pi, pi)]);
                }
            }
            buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = buf[buf.len() / 2];
            let mean = buf.iter().sum::<f64>() / buf.len() as f64;
            *slot = if median > 0.0 {
                median
            } else if mean > 0.0 {
                mean
            } else {
                1.0
            };
        }
        Self { m }
    }

    pub fn identity(p: usize) -> Self {
        Self { m: vec![1.0; p] }
    }

    /// Scaled low-rank factor `D U` (so `F̃ = (DU)(DU)ᵀ`).
    pub fn scale_factor(&self, factor: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = factor.clone();
        for (pi, &mp) in self.m.iter().enumerate() {
            let d = 1.0 / mp.sqrt();
            for j in 0..out.ncols() {
                out[(pi, j)] *= d;
            }
        }
        out
    }

    /// Maps a CRLB-like quantity of parameter `p` from scaled to original
    /// coordinates.
    pub fn unscale_bound(&self, p: usize, scaled: f64) -> f64 {
        scaled / self.m[p]
    }

    /// Maps a CRLB cap of parameter `p` into scaled coordinates.
    pub fn scale_bound(&self, p: usize, original: f64) -> f64 {
        original * self.m[p]
    }

    /// Objective weight of parameter `p` in scaled coordinates.
    pub fn scale_psi(&self, p: usize, psi: f64) -> f64 {
        psi / self.m[p]
    }
}
