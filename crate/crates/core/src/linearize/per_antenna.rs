//! Per-RF-chain inversion of the small-signal LNA response.

use num_complex::Complex64;

use crate::impairments::LnaParams;

const TOL: f64 = 1e-12;

/// Inverts `beta1 r + beta3 r^3 = |y|` on `[0, v_sat]` and keeps the phase.
///
/// Magnitudes at or above `v_max` cannot be inverted (saturation) and map to
/// `v_sat`.
pub fn per_antenna_inverse(y_adc: Complex64, p: &LnaParams) -> Complex64 {
    let target = y_adc.norm();
    if target == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let r = if target >= p.v_max {
        p.v_sat
    } else {
        invert_magnitude(target, p)
    };
    y_adc * (r / target)
}

/// Safeguarded Newton iteration on the bracket `[0, v_sat]`.
fn invert_magnitude(target: f64, p: &LnaParams) -> f64 {
    if p.beta3 == 0.0 {
        return (target / p.beta1).min(p.v_sat);
    }
    let f = |r: f64| p.beta1 * r + p.beta3 * r * r * r - target;
    let (mut lo, mut hi) = (0.0, p.v_sat);
    let mut r = (target / p.beta1).min(hi);
    for _ in 0..100 {
        let fr = f(r);
        if fr.abs() <= TOL * target.max(1e-300) {
            return r;
        }
        if fr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let d = p.beta1 + 3.0 * p.beta3 * r * r;
        let newton = r - fr / d;
        r = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= TOL * 1e-3 * p.v_sat {
            break;
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impairments::{lna, lna_params_from_spec};
    use crate::seed;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn zero_maps_to_zero() {
        let p = lna_params_from_spec(15.0, -30.0, 50.0).unwrap();
        assert_eq!(
            per_antenna_inverse(Complex64::new(0.0, 0.0), &p),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn saturated_magnitude_clamps_to_knee() {
        let p = lna_params_from_spec(15.0, -30.0, 50.0).unwrap();
        let z = per_antenna_inverse(Complex64::from_polar(p.v_max, 1.1), &p);
        assert_relative_eq!(z.norm(), p.v_sat, max_relative = 1e-15);
        assert_relative_eq!(z.arg(), 1.1, epsilon = 1e-14);
        let z = per_antenna_inverse(Complex64::from_polar(10.0 * p.v_max, -0.3), &p);
        assert_relative_eq!(z.norm(), p.v_sat, max_relative = 1e-15);
    }

    #[test]
    fn left_inverse_on_ball() {
        let mut rng = seed::rng(12);
        for (gain, iip3) in [(15.0, -30.0), (35.0, -10.0), (15.0, -40.0)] {
            let p = lna_params_from_spec(gain, iip3, 50.0).unwrap();
            for _ in 0..10_000 {
                let r = p.v_sat * rng.random_range(0.0f64..=1.0).sqrt();
                let x = Complex64::from_polar(r, rng.random_range(-3.2..3.2));
                let back = per_antenna_inverse(lna(x, &p), &p);
                assert!((back - x).norm() < 1e-9, "{x} -> {back}");
            }
        }
    }

    #[test]
    fn linear_lna_inverse() {
        let p = LnaParams::new(4.0, 0.0, 1.0).unwrap();
        let z = per_antenna_inverse(Complex64::new(2.0, -2.0), &p);
        assert_relative_eq!(z.re, 0.5);
        assert_relative_eq!(z.im, -0.5);
    }

    #[test]
    fn inverse_at_monotone_limit_knee() {
        // Knee at the turning point: derivative vanishes at v_sat.
        let p = lna_params_from_spec(15.0, -30.0, 50.0)
            .unwrap()
            .knee_at_monotone_limit()
            .unwrap();
        let x = Complex64::new(p.v_sat * 0.999_999, 0.0);
        let back = per_antenna_inverse(lna(x, &p), &p);
        assert!((back - x).norm() < 1e-5 * p.v_sat);
    }
}
