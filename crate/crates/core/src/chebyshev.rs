//! Chebyshev polynomials of the first and second kind, evaluated by the
//! three-term recurrence. All stability polynomials and stage coefficients in
//! this crate reduce to `T_k` and `U_k` evaluated slightly outside `[-1, 1]`,
//! where the recurrence is forward-stable.

/// Value and first derivative of a Chebyshev polynomial at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebEval {
    pub value: f64,
    pub derivative: f64,
}

/// First-kind Chebyshev polynomial `T_k(x)`.
pub fn cheb_t(k: u32, x: f64) -> f64 {
    assert!(x.is_finite(), "cheb_t: argument must be finite, got {x}");
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut last = x;
            for _ in 2..=k {
                let next = 2.0 * x * last - prev;
                prev = last;
                last = next;
            }
            last
        }
    }
}

/// Second-kind Chebyshev polynomial `U_k(x)`.
pub fn cheb_u(k: u32, x: f64) -> f64 {
    assert!(x.is_finite(), "cheb_u: argument must be finite, got {x}");
    match k {
        0 => 1.0,
        1 => 2.0 * x,
        _ => {
            let mut prev = 1.0;
            let mut last = 2.0 * x;
            for _ in 2..=k {
                let next = 2.0 * x * last - prev;
                prev = last;
                last = next;
            }
            last
        }
    }
}

/// Derivative of the first-kind polynomial, `T_k'(x) = k U_{k-1}(x)`.
pub fn cheb_t_prime(k: u32, x: f64) -> f64 {
    if k == 0 {
        assert!(x.is_finite(), "cheb_t_prime: argument must be finite, got {x}");
        return 0.0;
    }
    f64::from(k) * cheb_u(k - 1, x)
}

/// `T_k(x)` together with its derivative, sharing one recurrence pass.
pub fn cheb_t_with_derivative(k: u32, x: f64) -> ChebEval {
    ChebEval { value: cheb_t(k, x), derivative: cheb_t_prime(k, x) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn first_kind_base_cases() {
        assert_eq!(cheb_t(0, 7.3), 1.0);
        assert_eq!(cheb_t(1, -0.4), -0.4);
        // T_3(x) = 4x^3 - 3x, so T_3(1/2) = -1.
        assert_eq!(cheb_t(3, 0.5), -1.0);
    }

    #[test]
    fn first_kind_matches_hyperbolic_form_outside_interval() {
        // For x > 1, T_k(x) = cosh(k arccosh x); independent of the recurrence.
        let x = 1.0005_f64;
        let oracle = (10.0 * x.acosh()).cosh();
        assert_relative_eq!(cheb_t(10, x), oracle, max_relative = 1e-12);
    }

    #[test]
    fn first_kind_matches_trig_form_inside_interval() {
        // x = cos(theta) gives T_k(x) = cos(k theta).
        for k in 0..=64u32 {
            for &theta in &[0.0, 0.3, 1.0, 2.2, std::f64::consts::PI] {
                let x = theta.cos();
                assert_abs_diff_eq!(cheb_t(k, x), (f64::from(k) * theta).cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn second_kind_base_cases() {
        assert_eq!(cheb_u(0, -2.1), 1.0);
        assert_eq!(cheb_u(1, 0.7), 1.4);
        // U_2(x) = 4x^2 - 1.
        assert_eq!(cheb_u(2, 1.0), 3.0);
    }

    #[test]
    fn second_kind_matches_hyperbolic_form_outside_interval() {
        // For x > 1, U_k(x) = sinh((k+1) arccosh x) / sinh(arccosh x).
        let x = 1.02_f64;
        let a = x.acosh();
        let oracle = (6.0 * a).sinh() / a.sinh();
        assert_relative_eq!(cheb_u(5, x), oracle, max_relative = 1e-12);
    }

    #[test]
    fn derivative_base_cases() {
        assert_eq!(cheb_t_prime(0, 3.0), 0.0);
        assert_eq!(cheb_t_prime(1, 5.0), 1.0);
        // T_k'(1) = k^2.
        assert_eq!(cheb_t_prime(4, 1.0), 16.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let x = 1.01_f64;
        let h = 1e-6;
        let fd = (cheb_t(6, x + h) - cheb_t(6, x - h)) / (2.0 * h);
        assert_relative_eq!(cheb_t_prime(6, x), fd, max_relative = 1e-7);
    }

    #[test]
    fn double_angle_identity_on_grid() {
        // 2 T_r(x)^2 = T_{2r}(x) + 1 on a dense grid straddling the interval edge.
        for r in 1..=8u32 {
            for i in 0..1000 {
                let x = -1.0 + 2.1 * (i as f64) / 999.0;
                let lhs = 2.0 * cheb_t(r, x).powi(2);
                let rhs = cheb_t(2 * r, x) + 1.0;
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12 * rhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pell_identity_on_grid() {
        // T_r(x)^2 - 1 = U_{r-1}(x)^2 (x^2 - 1).
        for r in 1..=8u32 {
            for i in 0..1000 {
                let x = -1.0 + 2.1 * (i as f64) / 999.0;
                let lhs = cheb_t(r, x).powi(2) - 1.0;
                let rhs = cheb_u(r - 1, x).powi(2) * (x * x - 1.0);
                assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn derivative_identity_links_kinds() {
        // T_r'(x) = r U_{r-1}(x), checked against the finite difference above
        // and used throughout the stage-coefficient construction.
        for r in 1..=12u32 {
            for &x in &[1.0, 1.001, 1.05, 0.3, -0.9] {
                assert_relative_eq!(
                    cheb_t_prime(r, x),
                    f64::from(r) * cheb_u(r - 1, x),
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn combined_evaluation_agrees_with_parts() {
        let e = cheb_t_with_derivative(9, 1.003);
        assert_eq!(e.value, cheb_t(9, 1.003));
        assert_eq!(e.derivative, cheb_t_prime(9, 1.003));
    }

    #[test]
    #[should_panic(expected = "finite")]
    fn non_finite_argument_is_rejected() {
        cheb_t(3, f64::NAN);
    }
}
