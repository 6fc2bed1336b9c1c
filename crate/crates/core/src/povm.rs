//! Standard informationally complete measurements.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{c, HermitianMatrix};
use crate::likelihood::PovmEffect;

/// One projective measurement: effects summing to the identity.
pub type Setting = Vec<PovmEffect>;

/// The three Pauli settings of a qubit, `Z` first, each as
/// `[(I + P)/2, (I - P)/2]`.
pub fn pauli_settings() -> Vec<Setting> {
    let id = HermitianMatrix::identity(2);
    [HermitianMatrix::pauli_z(), HermitianMatrix::pauli_x(), HermitianMatrix::pauli_y()]
        .iter()
        .map(|p| {
            vec![
                PovmEffect::new((&id + p).scale(0.5)).expect("projector"),
                PovmEffect::new((&id - p).scale(0.5)).expect("projector"),
            ]
        })
        .collect()
}

/// The six Pauli projectors `(I +- Z)/2, (I +- X)/2, (I +- Y)/2`.
pub fn pauli_effects() -> Vec<PovmEffect> {
    pauli_settings().into_iter().flatten().collect()
}

fn is_odd_prime(d: usize) -> bool {
    d >= 3 && d % 2 == 1 && (3..).step_by(2).take_while(|k| k * k <= d).all(|k| d % k != 0)
}

/// Complete set of `d + 1` mutually unbiased bases, computational basis
/// first. Available for `d = 2` and odd primes.
pub fn mub_settings(d: usize) -> Result<Vec<Setting>> {
    if d == 2 {
        return Ok(pauli_settings());
    }
    if !is_odd_prime(d) {
        return Err(Error::InvalidInput(format!("no built-in MUB construction for d = {d}")));
    }
    let mut settings = Vec::with_capacity(d + 1);
    settings.push(
        (0..d)
            .map(|b| {
                let mut e = vec![0.0; d];
                e[b] = 1.0;
                PovmEffect::new(HermitianMatrix::from_real_diagonal(&e)).expect("projector")
            })
            .collect(),
    );
    let norm = 1.0 / (d as f64).sqrt();
    for a in 0..d {
        let basis = (0..d)
            .map(|b| {
                let v: Vec<Complex64> = (0..d)
                    .map(|k| {
                        let phase = 2.0 * std::f64::consts::PI * ((a * k * k + b * k) % d) as f64 / d as f64;
                        c(phase.cos() * norm, phase.sin() * norm)
                    })
                    .collect();
                PovmEffect::new(HermitianMatrix::outer(&v)).expect("projector")
            })
            .collect();
        settings.push(basis);
    }
    Ok(settings)
}

pub fn mub_effects(d: usize) -> Result<Vec<PovmEffect>> {
    Ok(mub_settings(d)?.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setting_sum(s: &Setting) -> HermitianMatrix {
        let d = s[0].dim();
        s.iter().fold(HermitianMatrix::zeros(d), |acc, e| &acc + e.matrix())
    }

    #[test]
    fn settings_resolve_identity() {
        for d in [2, 3, 5] {
            for s in mub_settings(d).unwrap() {
                let err = (&setting_sum(&s) - &HermitianMatrix::identity(d)).frobenius_norm();
                assert!(err < 1e-12, "d={d} err={err}");
            }
        }
        assert!(mub_settings(4).is_err());
    }

    #[test]
    fn bases_are_mutually_unbiased() {
        let d = 3;
        let settings = mub_settings(d).unwrap();
        assert_eq!(settings.len(), 4);
        for (i, s) in settings.iter().enumerate() {
            for t in settings.iter().skip(i + 1) {
                for a in s {
                    for b in t {
                        let overlap = a.matrix().dot(b.matrix());
                        assert!((overlap - 1.0 / d as f64).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
