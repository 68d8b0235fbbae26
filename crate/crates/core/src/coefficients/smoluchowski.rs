use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coagulation kernel β for N cluster sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoluchowskiParams {
    pub beta: Vec<Vec<f64>>,
}

impl SmoluchowskiParams {
    /// β_ij = c for all i, j.
    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            beta: vec![vec![c; n]; n],
        }
    }

    pub fn species(&self) -> usize {
        self.beta.len()
    }

    pub fn is_zero(&self) -> bool {
        self.beta.iter().flatten().all(|&b| b == 0.0)
    }

    /// Square, symmetric, finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        let n = self.beta.len();
        for (i, row) in self.beta.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid("beta", format!("row {} has {} entries, expected {n}", i + 1, row.len())));
            }
            for (j, &b) in row.iter().enumerate() {
                if !b.is_finite() || b < 0.0 {
                    return Err(Error::invalid("beta", format!("entry ({}, {}) = {b}", i + 1, j + 1)));
                }
                if b != self.beta[j][i] {
                    return Err(Error::invalid("beta", "matrix is not symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// R_i(s) = ½ Σ_{k+j=i} β_kj s_k s_j − Σ_j β_ij s_i s_j, sizes numbered from 1.
pub fn smoluchowski_rate(s: &[f64], p: &SmoluchowskiParams) -> Vec<f64> {
    let mut r = vec![0.0; s.len()];
    smoluchowski_rate_into(s, p, &mut r);
    r
}

pub fn smoluchowski_rate_into(s: &[f64], p: &SmoluchowskiParams, r: &mut [f64]) {
    let n = s.len();
    debug_assert_eq!(p.species(), n);
    for i in 0..n {
        // size i+1 = (k+1) + (j+1)
        let mut gain = 0.0;
        for k in 0..i {
            let j = i - 1 - k;
            gain += p.beta[k][j] * s[k] * s[j];
        }
        let loss: f64 = (0..n).map(|j| p.beta[i][j] * s[j]).sum::<f64>() * s[i];
        r[i] = 0.5 * gain - loss;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_evaluated_examples() {
        let p = SmoluchowskiParams::constant(3, 1.0);
        assert_eq!(smoluchowski_rate(&[1.0, 1.0, 1.0], &p), vec![-3.0, -2.5, -2.0]);
        assert_eq!(smoluchowski_rate(&[0.0; 3], &p), vec![0.0; 3]);
        assert_eq!(smoluchowski_rate(&[2.0, 0.0, 0.0], &p), vec![-4.0, 2.0, 0.0]);
    }

    #[test]
    fn validation() {
        SmoluchowskiParams::constant(3, 1.0).validate().unwrap();
        let bad = SmoluchowskiParams {
            beta: vec![vec![1.0, 2.0], vec![1.0, 1.0]],
        };
        assert!(bad.validate().is_err());
    }

    fn truncated(n: usize) -> SmoluchowskiParams {
        let beta = (0..n)
            .map(|k| (0..n).map(|j| if k + j + 2 > n { 0.0 } else { 1.0 }).collect())
            .collect();
        SmoluchowskiParams { beta }
    }

    proptest! {
        #[test]
        fn quasi_positive(s in prop::collection::vec(0.0f64..10.0, 3), zero in 0usize..3) {
            let mut s = s;
            s[zero] = 0.0;
            let r = smoluchowski_rate(&s, &SmoluchowskiParams::constant(3, 1.0));
            prop_assert!(r[zero] >= 0.0);
        }

        #[test]
        fn truncated_mass_nonincreasing(s in prop::collection::vec(0.0f64..10.0, 3)) {
            let r = smoluchowski_rate(&s, &SmoluchowskiParams::constant(3, 1.0));
            let m: f64 = r.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
            prop_assert!(m <= 1e-12);
            let r = smoluchowski_rate(&s, &truncated(3));
            let m: f64 = r.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
            prop_assert!(m.abs() <= 1e-12 * (1.0 + s.iter().map(|v| v * v).sum::<f64>()));
        }
    }
}
