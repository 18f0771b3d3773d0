use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SECTORS: usize = 10;
pub const MAX_RELATIVE_RESIDUAL: f64 = 1e-10;

/// National input–output accounts. `A` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicAccounts {
    pub sector_names: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub f_cons: Vec<f64>,
    #[serde(rename = "P_grid")]
    pub p_grid: f64,
}

impl EconomicAccounts {
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(SECTORS, SECTORS, |r, c| self.a[r][c])
    }

    /// Shape and sign checks, then the spectral-radius check (a numerical
    /// error, since it means the Leontief inverse does not exist as a
    /// non-negative series).
    pub fn validate(&self) -> Result<()> {
        if self.sector_names.len() != SECTORS || self.f_cons.len() != SECTORS || self.a.len() != SECTORS {
            return Err(Error::validation(format!("accounts must describe exactly {SECTORS} sectors")));
        }
        if self.a.iter().any(|row| row.len() != SECTORS) {
            return Err(Error::validation(format!("A must be {SECTORS}×{SECTORS}")));
        }
        if self.a.iter().flatten().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::validation("A entries must be finite and non-negative"));
        }
        if self.f_cons.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::validation("f_cons entries must be finite and non-negative"));
        }
        if !(self.p_grid > 0.0 && self.p_grid.is_finite()) {
            return Err(Error::validation("P_grid must be positive"));
        }
        let rho = self.spectral_radius();
        if !(rho < 1.0) {
            return Err(Error::Numerical(format!(
                "spectral-radius check failed: ρ(A) = {rho} ≥ 1, so I − A has no convergent inverse"
            )));
        }
        Ok(())
    }

    /// Largest eigenvalue modulus of A (real Schur decomposition).
    pub fn spectral_radius(&self) -> f64 {
        self.matrix()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Δf = −(ρ/365)·f_cons with ρ = L_pop / P_grid.
pub fn demand_shock(l_pop: f64, accounts: &EconomicAccounts) -> Result<Vec<f64>> {
    if !(l_pop >= 0.0) {
        return Err(Error::validation(format!("affected population must be non-negative, got {l_pop}")));
    }
    if l_pop > accounts.p_grid {
        return Err(Error::validation(format!(
            "affected population {l_pop} exceeds grid population {}",
            accounts.p_grid
        )));
    }
    let rho = l_pop / accounts.p_grid;
    Ok(accounts.f_cons.iter().map(|f| -(rho / 365.0) * f).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub delta_x: Vec<f64>,
    /// ΣΔx / ΣΔf; `None` for a zero shock.
    pub multiplier: Option<f64>,
    pub relative_residual: f64,
}

/// Solve (I − A)·Δx = Δf by LU decomposition.
pub fn leontief_propagate(delta_f: &[f64], accounts: &EconomicAccounts) -> Result<Propagation> {
    if delta_f.len() != SECTORS {
        return Err(Error::validation(format!("shock must have {SECTORS} sectors")));
    }
    let m = DMatrix::<f64>::identity(SECTORS, SECTORS) - accounts.matrix();
    let f = DVector::from_column_slice(delta_f);
    let x = m
        .clone()
        .lu()
        .solve(&f)
        .ok_or_else(|| Error::Numerical("spectral-radius check: I − A is singular".into()))?;
    let f_norm = f.amax();
    let residual = if f_norm == 0.0 { (&m * &x - &f).amax() } else { (&m * &x - &f).amax() / f_norm };
    if !(residual <= MAX_RELATIVE_RESIDUAL) {
        return Err(Error::Numerical(format!(
            "Leontief solve residual {residual} exceeds {MAX_RELATIVE_RESIDUAL}"
        )));
    }
    let sum_f: f64 = delta_f.iter().sum();
    let sum_x: f64 = x.iter().sum();
    Ok(Propagation {
        delta_x: x.iter().copied().collect(),
        multiplier: (sum_f != 0.0).then(|| sum_x / sum_f),
        relative_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn accounts(a: Vec<Vec<f64>>) -> EconomicAccounts {
        EconomicAccounts {
            sector_names: (1..=SECTORS).map(|i| format!("sector_{i}")).collect(),
            a,
            f_cons: vec![365.0; SECTORS],
            p_grid: 1000.0,
        }
    }

    fn zero() -> Vec<Vec<f64>> {
        vec![vec![0.0; SECTORS]; SECTORS]
    }

    #[test]
    fn demand_shock_examples() {
        let mut acc = accounts(zero());
        assert!(demand_shock(0.0, &acc).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(demand_shock(1000.0, &acc).unwrap(), vec![-1.0; SECTORS]);
        acc.f_cons = vec![0.0; SECTORS];
        acc.f_cons[0] = 730.0;
        let df = demand_shock(500.0, &acc).unwrap();
        assert_eq!(df[0], -1.0);
        assert!(df[1..].iter().all(|v| *v == 0.0));
        assert!(demand_shock(1000.5, &acc).is_err());
    }

    #[test]
    fn identity_economy() {
        let acc = accounts(zero());
        let df: Vec<f64> = (0..SECTORS).map(|i| -(i as f64) - 0.5).collect();
        let p = leontief_propagate(&df, &acc).unwrap();
        assert_eq!(p.delta_x, df);
        assert_eq!(p.multiplier, Some(1.0));
        assert_eq!(leontief_propagate(&[0.0; SECTORS], &acc).unwrap().multiplier, None);
    }

    #[test]
    fn two_sector_direct_inversion() {
        let mut a = zero();
        a[0][0] = 0.2;
        a[0][1] = 0.1;
        a[1][0] = 0.3;
        a[1][1] = 0.3;
        let acc = accounts(a);
        acc.validate().unwrap();
        // (I−A) = [[0.8, −0.1], [−0.3, 0.7]], det = 0.53
        let det = 0.8 * 0.7 - 0.1 * 0.3;
        let inv = [[0.7 / det, 0.1 / det], [0.3 / det, 0.8 / det]];
        let want = [-(inv[0][0] + inv[0][1]), -(inv[1][0] + inv[1][1])];
        let mut df = vec![0.0; SECTORS];
        df[0] = -1.0;
        df[1] = -1.0;
        let p = leontief_propagate(&df, &acc).unwrap();
        assert!((p.delta_x[0] - want[0]).abs() < 1e-12);
        assert!((p.delta_x[1] - want[1]).abs() < 1e-12);
        assert!(p.delta_x[2..].iter().all(|v| *v == 0.0));
        assert!(p.multiplier.unwrap() > 1.0);
    }

    #[test]
    fn nilpotent_truncates() {
        let mut a = zero();
        a[0][1] = 0.4;
        a[3][1] = 0.25;
        // only column 1 is non-zero and row 1 is zero, so A² = 0
        let acc = accounts(a.clone());
        let df: Vec<f64> = (0..SECTORS).map(|i| -1.0 - i as f64).collect();
        let p = leontief_propagate(&df, &acc).unwrap();
        for r in 0..SECTORS {
            let af: f64 = (0..SECTORS).map(|c| a[r][c] * df[c]).sum();
            assert_eq!(p.delta_x[r], df[r] + af);
        }
    }

    #[test]
    fn divergent_accounts_rejected() {
        let mut a = zero();
        a[0][0] = 1.0;
        let err = accounts(a).validate().unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("spectral-radius"));
        let mut bad = accounts(zero());
        bad.a[2][2] = -0.1;
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
    }

    fn arb_accounts() -> impl Strategy<Value = EconomicAccounts> {
        (prop::collection::vec(0.0f64..1.0, SECTORS * SECTORS), 0.05f64..0.95).prop_map(|(raw, target)| {
            // scale so every column sums to `target` < 1, bounding ρ(A)
            let mut a = zero();
            for c in 0..SECTORS {
                let s: f64 = (0..SECTORS).map(|r| raw[r * SECTORS + c]).sum::<f64>().max(1e-9);
                for r in 0..SECTORS {
                    a[r][c] = raw[r * SECTORS + c] / s * target;
                }
            }
            accounts(a)
        })
    }

    proptest! {
        #[test]
        fn residual_linearity_and_multiplier(acc in arb_accounts(), shock in prop::collection::vec(-1e6f64..0.0, SECTORS)) {
            acc.validate().unwrap();
            let p = leontief_propagate(&shock, &acc).unwrap();
            prop_assert!(p.relative_residual <= 1e-10);
            let doubled: Vec<f64> = shock.iter().map(|v| 2.0 * v).collect();
            let p2 = leontief_propagate(&doubled, &acc).unwrap();
            // scaling by two is exact in binary floating point
            for (a, b) in p.delta_x.iter().zip(&p2.delta_x) {
                prop_assert_eq!(2.0 * a, *b);
            }
            if let Some(m) = p.multiplier {
                prop_assert!(m >= 1.0 - 1e-12);
            }
        }

        #[test]
        fn leontief_diagonal_at_least_one(acc in arb_accounts(), k in 0usize..SECTORS) {
            let mut e = vec![0.0; SECTORS];
            e[k] = -1.0;
            let p = leontief_propagate(&e, &acc).unwrap();
            prop_assert!(p.delta_x[k] <= -1.0 + 1e-12);
            prop_assert!(p.delta_x.iter().all(|v| *v <= 1e-15));
        }
    }
}
