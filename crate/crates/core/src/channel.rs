//! Line-of-sight multi-user channel on a half-wavelength ULA, its null-space
//! basis and the zero-forcing combiner.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::PI;

use crate::error::{config_err, Error, Result};

/// Maximum AoA magnitude admitted by the random scenario generator.
pub const MAX_AOA: f64 = PI / 3.0;

/// Smallest singular value ratio accepted for `H`.
const CONDITION_FLOOR: f64 = 1e-8;

/// `[h]_n = exp(j pi n sin(theta))`, `n = 0..nr`.
pub fn steering_vector(theta: f64, nr: usize) -> Vec<Complex64> {
    let phase = PI * theta.sin();
    (0..nr).map(|n| Complex64::from_polar(1.0, phase * n as f64)).collect()
}

/// Immutable channel description shared by every stage of a trial.
#[derive(Debug, Clone)]
pub struct MultiUserChannel {
    /// Nr x U, columns are steering vectors.
    pub h: DMatrix<Complex64>,
    pub aoas: Vec<f64>,
    /// (Nr - U) x Nr with orthonormal rows spanning the left null space of `h`.
    pub null_basis: DMatrix<Complex64>,
    /// U x Nr zero-forcing combiner `(H^H H)^-1 H^H`.
    pub zf: DMatrix<Complex64>,
    /// Nr x Nr projector onto the null space, `N^H N`.
    pub null_projector: DMatrix<Complex64>,
}

impl MultiUserChannel {
    pub fn nr(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h.ncols()
    }

    pub fn null_dim(&self) -> usize {
        self.null_basis.nrows()
    }
}

/// Builds the geometric channel for the given angles of arrival.
pub fn build_channel(aoas: &[f64], nr: usize) -> Result<MultiUserChannel> {
    let u = aoas.len();
    if u == 0 {
        return Err(config_err("at least one user is required"));
    }
    if u >= nr {
        return Err(config_err(format!("need fewer users ({u}) than antennas ({nr})")));
    }
    if let Some(bad) = aoas.iter().find(|t| !t.is_finite() || t.abs() > PI / 2.0) {
        return Err(config_err(format!("AoA {bad} outside [-pi/2, pi/2]")));
    }

    let mut h = DMatrix::<Complex64>::zeros(nr, u);
    for (k, &theta) in aoas.iter().enumerate() {
        h.set_column(k, &nalgebra::DVector::from_vec(steering_vector(theta, nr)));
    }

    let sv = h.clone().singular_values();
    let (smin, smax) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if !(smin > CONDITION_FLOOR * smax) {
        return Err(Error::Conditioning {
            min_singular_value: smin,
        });
    }

    // Householder QR of [H | I] yields a full unitary Q whose trailing
    // Nr - U columns are orthogonal to range(H).
    let mut aug = DMatrix::<Complex64>::zeros(nr, u + nr);
    aug.view_mut((0, 0), (nr, u)).copy_from(&h);
    aug.view_mut((0, u), (nr, nr)).fill_with_identity();
    let q = aug.qr().q();
    let null_basis = q.columns(u, nr - u).adjoint();

    let hh = h.adjoint();
    let gram = &hh * &h;
    let chol = gram.cholesky().ok_or(Error::Conditioning {
        min_singular_value: smin,
    })?;
    let zf = chol.solve(&hh);
    let null_projector = null_basis.adjoint() * &null_basis;

    Ok(MultiUserChannel {
        h,
        aoas: aoas.to_vec(),
        null_basis,
        zf,
        null_projector,
    })
}

/// `x_t = H s_t` for every column of `frame` (users x samples).
pub fn apply_channel(ch: &MultiUserChannel, frame: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    if frame.nrows() != ch.num_users() {
        return Err(Error::DimensionMismatch {
            expected: ch.num_users(),
            actual: frame.nrows(),
        });
    }
    Ok(&ch.h * frame)
}

/// Draws `num_users` AoAs uniformly in `[-pi/3, pi/3]` such that every pair
/// satisfies `|sin a - sin b| >= 2 / nr`.
pub fn random_aoas<R: Rng + ?Sized>(rng: &mut R, num_users: usize, nr: usize) -> Result<Vec<f64>> {
    let min_sep = 2.0 / nr as f64;
    let span = 2.0 * MAX_AOA.sin();
    if (num_users.saturating_sub(1)) as f64 * min_sep > span {
        return Err(config_err(format!(
            "cannot place {num_users} users with separation {min_sep} in sin-space"
        )));
    }
    let mut out: Vec<f64> = Vec::with_capacity(num_users);
    let mut attempts = 0usize;
    while out.len() < num_users {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(config_err("AoA rejection sampling did not terminate"));
        }
        let theta = rng.random_range(-MAX_AOA..=MAX_AOA);
        if out.iter().all(|&a| (a.sin() - theta.sin()).abs() >= min_sep) {
            out.push(theta);
        }
    }
    Ok(out)
}

/// Closed-form array factor `sum_{n=0}^{nr-1} exp(j pi n sin w)` with
/// `sin w = sin(theta_l) + sin(theta_m) - sin(theta_n)`.
///
/// Returns [`Error::OutOfVisibleSpace`] when the image direction has
/// `|sin w| > 1`; such terms do not correspond to a propagating direction.
pub fn imd_kernel(theta_l: f64, theta_m: f64, theta_n: f64, nr: usize) -> Result<Complex64> {
    let s = theta_l.sin() + theta_m.sin() - theta_n.sin();
    if s.abs() > 1.0 + 1e-15 {
        return Err(Error::OutOfVisibleSpace(s));
    }
    Ok(array_factor(s.clamp(-1.0, 1.0), nr))
}

/// `sum_{n=0}^{nr-1} exp(j pi n s)` via the Dirichlet form.
pub fn array_factor(s: f64, nr: usize) -> Complex64 {
    let half = 0.5 * PI * s;
    let den = half.sin();
    let mag = if den.abs() < 1e-15 {
        nr as f64
    } else {
        (nr as f64 * half).sin() / den
    };
    Complex64::from_polar(mag, (nr as f64 - 1.0) * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use approx::assert_relative_eq;

    fn fro(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn steering_examples() {
        for v in steering_vector(0.0, 4) {
            assert_relative_eq!(v.re, 1.0);
            assert_relative_eq!(v.im, 0.0);
        }
        let v = steering_vector(PI / 2.0, 2);
        assert_relative_eq!(v[1].re, -1.0, epsilon = 1e-15);
        assert!(v[1].im.abs() < 1e-15);
        let v = steering_vector(PI / 6.0, 3);
        assert!((v[1] - Complex64::i()).norm() < 1e-15);
        assert!((v[2] + Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn two_element_null_space() {
        let ch = build_channel(&[PI / 2.0], 2).unwrap();
        let n = &ch.null_basis;
        assert_eq!(n.shape(), (1, 2));
        // Up to a unit phase, N = [1, 1] / sqrt(2).
        let ratio = n[(0, 1)] / n[(0, 0)];
        assert!((ratio - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_relative_eq!(n[(0, 0)].norm(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert!(fro(&(n * &ch.h)) < 1e-12);
    }

    #[test]
    fn duplicate_aoas_rejected() {
        assert!(matches!(
            build_channel(&[0.3, 0.3], 16),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn too_many_users_rejected() {
        assert!(matches!(build_channel(&[0.0, 0.1, 0.2, 0.3], 4), Err(Error::Config(_))));
    }

    #[test]
    fn structural_invariants_64x8() {
        let mut rng = seed::rng(5);
        let aoas = random_aoas(&mut rng, 8, 64).unwrap();
        let ch = build_channel(&aoas, 64).unwrap();
        let hf = fro(&ch.h);
        assert!(fro(&(&ch.null_basis * &ch.h)) < 1e-10 * hf);
        let nnh = &ch.null_basis * ch.null_basis.adjoint();
        assert!(fro(&(nnh - DMatrix::identity(56, 56))) < 1e-10);
        let wh = &ch.zf * &ch.h;
        assert!(fro(&(wh - DMatrix::identity(8, 8))) < 1e-10);
        assert!(ch.h.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn apply_channel_examples() {
        let ch = build_channel(&[0.2, -0.5], 8).unwrap();
        let zero = DMatrix::<Complex64>::zeros(2, 5);
        assert!(apply_channel(&ch, &zero).unwrap().iter().all(|v| v.norm() == 0.0));

        let single = build_channel(&[0.7], 4).unwrap();
        let ones = DMatrix::from_element(1, 3, Complex64::new(1.0, 0.0));
        let x = apply_channel(&single, &ones).unwrap();
        for t in 0..3 {
            assert_eq!(x.column(t), single.h.column(0));
        }

        assert!(matches!(
            apply_channel(&ch, &DMatrix::zeros(3, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apply_channel_matches_triple_loop() {
        let mut rng = seed::rng(9);
        let aoas = random_aoas(&mut rng, 5, 16).unwrap();
        let ch = build_channel(&aoas, 16).unwrap();
        let s = DMatrix::from_fn(5, 40, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let x = apply_channel(&ch, &s).unwrap();
        for n in 0..16 {
            for t in 0..40 {
                let mut acc = Complex64::new(0.0, 0.0);
                for u in 0..5 {
                    acc += ch.h[(n, u)] * s[(u, t)];
                }
                assert!((acc - x[(n, t)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_examples() {
        // sin w = sin l + sin m - sin n vanishes when m and n coincide and l = 0.
        let k = imd_kernel(0.0, 0.3, 0.3, 64).unwrap();
        assert_relative_eq!(k.re, 64.0, epsilon = 1e-9);
        assert!(k.im.abs() < 1e-9);
        // Three equal angles put the image on the users' own direction.
        let k = imd_kernel(0.3, 0.3, 0.3, 64).unwrap();
        assert!((k - array_factor(0.3f64.sin(), 64)).norm() < 1e-12);

        // sin w = 2 / Nr is the first zero of the array factor.
        let s = 2.0 / 64.0;
        assert!(array_factor(s, 64).norm() < 1e-12);
        let k = imd_kernel(s.asin(), 0.0, 0.0, 64).unwrap();
        assert!(k.norm() < 1e-12);

        assert!(matches!(
            imd_kernel(1.2, 1.2, -1.2, 64),
            Err(Error::OutOfVisibleSpace(_))
        ));
    }

    #[test]
    fn kernel_matches_partial_sum() {
        let mut rng = seed::rng(1);
        for _ in 0..1000 {
            let s: f64 = rng.random_range(-1.0..1.0);
            let nr = rng.random_range(1..130usize);
            let brute: Complex64 = (0..nr).map(|n| Complex64::from_polar(1.0, PI * n as f64 * s)).sum();
            let k = array_factor(s, nr);
            assert!((brute - k).norm() < 1e-10, "s={s} nr={nr}");
            assert!(k.norm() <= nr as f64 + 1e-9);
        }
    }

    #[test]
    fn random_aoas_respect_separation() {
        let mut rng = seed::rng(3);
        for _ in 0..20 {
            let a = random_aoas(&mut rng, 8, 64).unwrap();
            for i in 0..8 {
                assert!(a[i].abs() <= MAX_AOA);
                for j in 0..i {
                    assert!((a[i].sin() - a[j].sin()).abs() >= 2.0 / 64.0);
                }
            }
        }
    }
}
