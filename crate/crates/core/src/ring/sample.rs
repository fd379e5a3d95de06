use rand::Rng;

use super::{Modulus, RingElement, RingParams};
use crate::rng::SeededGenerator;

pub fn sample_uniform(p: &RingParams, rng: &mut SeededGenerator) -> RingElement {
    let coeffs = (0..p.d).map(|_| rng.gen_range(0..p.q)).collect();
    RingElement { coeffs, q: p.q }
}

/// Centered discrete Gaussian of width σ by cut-and-reject over [−6σ, 6σ].
pub fn sample_gaussian(p: &RingParams, rng: &mut SeededGenerator) -> RingElement {
    let m = Modulus::new(p.q);
    let coeffs = (0..p.d).map(|_| m.from_i64(gaussian_int(p.sigma, rng))).collect();
    RingElement { coeffs, q: p.q }
}

pub(crate) fn gaussian_int(sigma: u32, rng: &mut SeededGenerator) -> i64 {
    let bound = 6 * sigma as i64;
    let two_var = 2.0 * (sigma as f64) * (sigma as f64);
    loop {
        let x = rng.gen_range(-bound..=bound);
        let accept = (-((x * x) as f64) / two_var).exp();
        if rng.gen::<f64>() < accept {
            return x;
        }
    }
}

/// Coefficients uniform in {−1, 0, 1}.
pub fn sample_ternary(p: &RingParams, rng: &mut SeededGenerator) -> RingElement {
    let m = Modulus::new(p.q);
    let coeffs = (0..p.d).map(|_| m.from_i64(rng.gen_range(-1i64..=1))).collect();
    RingElement { coeffs, q: p.q }
}
