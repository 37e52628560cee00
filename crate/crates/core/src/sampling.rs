//! Random time quadruples for the kernel and bound sweeps.
//!
//! Quadruples are uniform on `{0<s<t<T, 0<s′<t′<T}`; those with any two of the four
//! times closer than `MIN_GAP_FRACTION·T` are rejected. Sample `i` draws from its
//! own stream, so sweeps can be split across workers freely.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::kernels::{Region, TimeQuad};
use crate::rng::{stream, Purpose};

pub const MIN_GAP_FRACTION: f64 = 1e-6;

/// Stream for sample `index` of a sweep; `sub` separates sweeps sharing a seed.
pub fn sample_rng(seed: u64, index: u64, sub: u64) -> ChaCha12Rng {
    stream(seed, Purpose::Sampling, index, sub)
}

fn ordered_pair(rng: &mut ChaCha12Rng, horizon: f64) -> (f64, f64) {
    let u = rng.random::<f64>() * horizon;
    let v = rng.random::<f64>() * horizon;
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// A uniform interior quadruple.
pub fn random_tau(rng: &mut ChaCha12Rng, horizon: f64) -> TimeQuad {
    loop {
        let (s, t) = ordered_pair(rng, horizon);
        let (s2, t2) = ordered_pair(rng, horizon);
        let tau = TimeQuad { s, t, s2, t2, subregion: None, abc: None };
        if s > 0.0 && tau.min_gap() >= MIN_GAP_FRACTION * horizon {
            return tau;
        }
    }
}

/// Gaps of a uniform quadruple conditioned on its ordering falling in `region`.
pub fn random_abc(rng: &mut ChaCha12Rng, region: Region, horizon: f64) -> [f64; 3] {
    loop {
        let (r, abc, _) = random_tau(rng, horizon).classify();
        if r == region {
            return abc;
        }
    }
}

/// Like [`random_abc`], additionally conditioned on `accept`.
pub fn random_abc_where<F: Fn(&[f64; 3]) -> bool>(
    rng: &mut ChaCha12Rng,
    region: Region,
    horizon: f64,
    accept: F,
) -> [f64; 3] {
    loop {
        let abc = random_abc(rng, region, horizon);
        if accept(&abc) {
            return abc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadruples_are_valid_and_reproducible() {
        for i in 0..200 {
            let tau = random_tau(&mut sample_rng(3, i, 0), 2.0);
            assert!(tau.validate().is_ok());
            assert!(tau.t2 < 2.0 && tau.t < 2.0);
            assert!(tau.min_gap() >= 2e-6);
            let again = random_tau(&mut sample_rng(3, i, 0), 2.0);
            assert_eq!(tau.as_array(), again.as_array());
        }
    }

    #[test]
    fn orderings_are_equally_likely() {
        let mut counts = [0usize; 3];
        for i in 0..3000 {
            let (r, _, _) = random_tau(&mut sample_rng(1, i, 0), 1.0).classify();
            counts[Region::ALL.iter().position(|&x| x == r).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 100.0, "{counts:?}");
        }
    }

    #[test]
    fn conditioned_gaps() {
        let abc = random_abc_where(&mut sample_rng(5, 0, 0), Region::T3, 1.0, |g| g[1] > 10.0 * g[0].max(g[2]));
        assert!(abc[1] > 10.0 * abc[0] && abc.iter().sum::<f64>() < 1.0);
    }
}
