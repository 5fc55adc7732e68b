use statrs::function::erf::erfc;

use crate::activation::{Activation, ActivationKind};
use crate::quadrature::NormalQuadrature;

/// (c1, c2) = (E[σ(z) z²], E[σ(z)]) for z ~ N(0, 1).
pub fn moment_coefficients(act: &Activation) -> (f64, f64) {
    let m = act.m();
    match act.kind() {
        ActivationKind::Quadratic => (3.0, 1.0),
        ActivationKind::HardTrunc => {
            let r = (m / 2.0).sqrt();
            let tail = erfc(r);
            let e = (-m / 2.0).exp();
            let c1 = 3.0 + (m - 3.0) * tail - 6.0 / std::f64::consts::PI.sqrt() * r * e;
            let c2 = 1.0 + (m - 1.0) * tail - (2.0 * m / std::f64::consts::PI).sqrt() * e;
            (c1, c2)
        }
        ActivationKind::SmoothTrunc => {
            let quad = NormalQuadrature::new(64).expect("positive order");
            let kinks = act.breakpoints();
            let c1 = quad.expect(&kinks, |z| act.value(z) * z * z);
            let c2 = quad.expect(&kinks, |z| act.value(z));
            (c1, c2)
        }
    }
}
