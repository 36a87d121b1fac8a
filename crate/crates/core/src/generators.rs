//! Model generators: the chain benchmark and random non-degenerate ensembles.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{precondition, Result};
use crate::model::RbmModel;

/// Chain model: hidden unit `k` couples visible `k` and `k + 1` with weight
/// `j_val`; every visible field is `h_val` and every hidden field `g_val`.
pub fn gen_chain_model(n: usize, j_val: f64, h_val: f64, g_val: f64) -> Result<RbmModel> {
    if n < 2 {
        return precondition("a chain needs at least two visible nodes");
    }
    let m = n - 1;
    let j = (0..n)
        .map(|i| (0..m).map(|k| if k == i || k + 1 == i { j_val } else { 0.0 }).collect())
        .collect();
    RbmModel::new(j, vec![h_val; n], vec![g_val; m])
}

/// Parameters of the random locally consistent ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomRbmSpec {
    pub n: usize,
    pub m: usize,
    /// Range for the smallest nonzero coupling magnitude.
    pub alpha_range: (f64, f64),
    /// Upper bound on every row and column strength.
    pub beta_max: f64,
    /// Largest number of visible units a hidden unit attaches to.
    pub max_hidden_degree: usize,
    /// Fields are drawn from `[-field_scale, field_scale]` (or `[0, field_scale]`
    /// for ferromagnetic draws).
    pub field_scale: f64,
    pub ferromagnetic: bool,
}

impl RandomRbmSpec {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            alpha_range: (0.2, 1.0),
            beta_max: 3.0,
            max_hidden_degree: 3,
            field_scale: 0.5,
            ferromagnetic: false,
        }
    }
}

/// Draws a locally consistent RBM whose tight `(alpha, beta)` fall inside the
/// requested ranges, by rejection. Each hidden column has one sign; its
/// magnitudes lie in `[a, a + 0.5]` for a drawn `a`.
pub fn random_lc_rbm<R: Rng + ?Sized>(spec: &RandomRbmSpec, rng: &mut R) -> Result<RbmModel> {
    let (lo, hi) = spec.alpha_range;
    if spec.n == 0 || spec.m == 0 || spec.max_hidden_degree == 0 || !(0.0 < lo && lo <= hi) || spec.beta_max < lo {
        return precondition(format!("unusable ensemble spec {spec:?}"));
    }
    for _ in 0..100_000 {
        let a = rng.gen_range(lo..=hi);
        let mut j = vec![vec![0.0; spec.m]; spec.n];
        for k in 0..spec.m {
            let degree = rng.gen_range(1..=spec.max_hidden_degree.min(spec.n));
            let sign = if spec.ferromagnetic || rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for i in sample(rng, spec.n, degree) {
                j[i][k] = sign * rng.gen_range(a..=a + 0.5);
            }
        }
        let field = |rng: &mut R| {
            if spec.ferromagnetic {
                rng.gen_range(0.0..=spec.field_scale)
            } else {
                rng.gen_range(-spec.field_scale..=spec.field_scale)
            }
        };
        let h = (0..spec.n).map(|_| field(rng)).collect();
        let g = (0..spec.m).map(|_| field(rng)).collect();
        let model = RbmModel::new(j, h, g)?;
        let report = model.validate(lo, spec.beta_max);
        if report.alpha >= lo && report.alpha <= hi && report.beta <= spec.beta_max {
            return Ok(model);
        }
    }
    precondition(format!("could not draw a model satisfying {spec:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn chain_construction() {
        let model = gen_chain_model(5, 1.0, -0.1, -0.1).unwrap();
        assert_eq!(model.m(), 4);
        let nonzeros = (0..5).flat_map(|i| model.row(i).to_vec()).filter(|w| *w != 0.0).count();
        assert_eq!(nonzeros, 8);
        let pair = gen_chain_model(2, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(pair.m(), 1);
        assert_eq!(pair.two_hop().neighbors(0), &[1]);
        assert!(gen_chain_model(1, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn random_models_respect_class_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ferro in [false, true] {
            let spec = RandomRbmSpec { ferromagnetic: ferro, ..RandomRbmSpec::new(6, 4) };
            for _ in 0..20 {
                let r = random_lc_rbm(&spec, &mut rng).unwrap().validate(0.2, 3.0);
                assert!(r.is_locally_consistent && r.is_nondegenerate);
                assert!(r.alpha <= 1.0);
                assert_eq!(r.is_ferromagnetic, ferro);
            }
        }
    }
}
