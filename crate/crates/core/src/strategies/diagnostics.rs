//! Divergence and log-likelihood diagnostics for drift analysis.

use super::{dyadic_levels, StrategyError};
use crate::channel::{kl_bernoulli, NoiseProfile};
use crate::posterior::{avg_log_likelihood, PosteriorDense, QuerySet};

fn membership(query: &QuerySet) -> Vec<bool> {
    let mut inside = vec![false; query.n_bins()];
    for b in query.bins() {
        inside[b - 1] = true;
    }
    inside
}

/// Posterior mass inside and outside `query`.
fn split_mass(post: &PosteriorDense, inside: &[bool]) -> (f64, f64) {
    let (mut a, mut b) = (0.0, 0.0);
    for (&m, &x) in post.masses().iter().zip(inside) {
        if x {
            a += m;
        } else {
            b += m;
        }
    }
    (a, b)
}

fn check(post: &PosteriorDense, query: &QuerySet) -> Result<(), StrategyError> {
    if query.n_bins() != post.masses().len() {
        return Err(crate::posterior::PosteriorError::BinCountMismatch {
            query: query.n_bins(),
            posterior: post.masses().len(),
        }
        .into());
    }
    Ok(())
}

/// `EJS(π, S) = Σ_i π_i · D(P_{y|i} ‖ P_{y|≠i})`.
///
/// `P_{y|≠i}` is the posterior mixture over the other bins. A bin holding
/// all the mass yields `+∞`.
pub fn ejs_divergence(
    post: &PosteriorDense,
    query: &QuerySet,
    profile: &NoiseProfile,
) -> Result<f64, StrategyError> {
    check(post, query)?;
    let p = profile.crossover_for_query(query.size_fraction())?;
    let inside = membership(query);
    let (mass_in, mass_out) = split_mass(post, &inside);
    let mut total = 0.0;
    for (&m, &x) in post.masses().iter().zip(&inside) {
        if m == 0.0 {
            continue;
        }
        let (others_in, others_out) =
            if x { ((mass_in - m).max(0.0), mass_out) } else { (mass_in, (mass_out - m).max(0.0)) };
        let rest = others_in + others_out;
        if rest <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let own = if x { 1.0 - p } else { p };
        let mix = (others_in * (1.0 - p) + others_out * p) / rest;
        total += m * kl_bernoulli(own, mix);
    }
    Ok(total)
}

/// `JS(π, S) = Σ_i π_i · D(P_{y|i} ‖ P_y)` against the full predictive law.
pub fn js_divergence(
    post: &PosteriorDense,
    query: &QuerySet,
    profile: &NoiseProfile,
) -> Result<f64, StrategyError> {
    check(post, query)?;
    let p = profile.crossover_for_query(query.size_fraction())?;
    let (mass_in, mass_out) = split_mass(post, &membership(query));
    let mix = mass_in * (1.0 - p) + mass_out * p;
    Ok(mass_in * kl_bernoulli(1.0 - p, mix) + mass_out * kl_bernoulli(p, mix))
}

fn group_sums(values: impl Iterator<Item = f64>, group: usize, n_groups: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_groups];
    for (i, v) in values.enumerate() {
        out[i / group] += v;
    }
    out
}

/// `U_α`: U of the descending-sorted posterior summed in groups of `α/δ`
/// bins.
pub fn binned_sorted_loglik(post: &PosteriorDense, alpha: f64) -> Result<f64, StrategyError> {
    let n = post.masses().len();
    let inv = 1.0 / alpha;
    let n_groups = inv.round();
    if !(alpha > 0.0 && alpha <= 1.0) || (inv - n_groups).abs() > 1e-9 {
        return Err(StrategyError::Domain(format!("1/alpha must be an integer (alpha={alpha})")));
    }
    let n_groups = n_groups as usize;
    if !n.is_multiple_of(n_groups) {
        return Err(StrategyError::Domain(format!(
            "alpha={alpha} does not divide {n} bins into equal groups"
        )));
    }
    let mut sorted = post.masses().to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(avg_log_likelihood(&group_sums(sorted.into_iter(), n / n_groups, n_groups)))
}

/// `U^{l}`: U of the `2^l` level-`l` dyadic node masses, `1 ≤ l ≤ L`.
pub fn nested_loglik(post: &PosteriorDense, level: u32) -> Result<f64, StrategyError> {
    let n = post.masses().len();
    let levels = dyadic_levels(n)?;
    if level == 0 || level > levels {
        return Err(StrategyError::Domain(format!("level {level} outside 1..={levels}")));
    }
    let n_groups = 1usize << level;
    Ok(avg_log_likelihood(&group_sums(post.masses().iter().copied(), n / n_groups, n_groups)))
}

/// `E[F(π(t+1)) | π(t)] − F(π(t))` after querying `query`, averaging both
/// observations by their predictive probabilities.
pub fn expected_drift<F>(
    post: &PosteriorDense,
    query: &QuerySet,
    profile: &NoiseProfile,
    functional: F,
) -> Result<f64, StrategyError>
where
    F: Fn(&PosteriorDense) -> Result<f64, StrategyError>,
{
    check(post, query)?;
    let p = profile.crossover_for_query(query.size_fraction())?;
    let (mass_in, mass_out) = split_mass(post, &membership(query));
    let p_one = mass_in * (1.0 - p) + mass_out * p;
    let now = functional(post)?;
    let mut expected = 0.0;
    for (y, w) in [(true, p_one), (false, 1.0 - p_one)] {
        if w > 0.0 {
            expected += w * functional(&post.updated(query, y, profile)?)?;
        }
    }
    Ok(expected - now)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{mutual_info_bsc, reliability_c1};

    fn dense(m: &[f64]) -> PosteriorDense {
        PosteriorDense::from_masses(m.to_vec()).unwrap()
    }

    #[test]
    fn ejs_two_hypotheses() {
        let prof = NoiseProfile::constant(0.35).unwrap();
        let q = QuerySet::from_bins([1], 2).unwrap();
        let v = ejs_divergence(&dense(&[0.5, 0.5]), &q, &prof).unwrap();
        assert!((v - 0.267_925_438_825_045_04).abs() < 1e-12);
        assert!((v - reliability_c1(0.35)).abs() < 1e-12);
    }

    #[test]
    fn ejs_useless_channel() {
        let prof = NoiseProfile::constant(0.5).unwrap();
        let q = QuerySet::from_bins([1, 3], 4).unwrap();
        let v = ejs_divergence(&dense(&[0.1, 0.2, 0.3, 0.4]), &q, &prof).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn ejs_near_certainty() {
        let prof = NoiseProfile::constant(0.1).unwrap();
        let q = QuerySet::from_bins([1], 2).unwrap();
        let v = ejs_divergence(&dense(&[1.0 - 1e-12, 1e-12]), &q, &prof).unwrap();
        assert!((v - 2.536).abs() < 1e-3);
        let point = ejs_divergence(&dense(&[1.0, 0.0]), &q, &prof).unwrap();
        assert_eq!(point, f64::INFINITY);
    }

    #[test]
    fn js_is_mutual_information_of_membership() {
        let prof = NoiseProfile::constant(0.2).unwrap();
        let q = QuerySet::from_bins([2, 3], 4).unwrap();
        let v = js_divergence(&dense(&[0.1, 0.2, 0.3, 0.4]), &q, &prof).unwrap();
        assert!((v - mutual_info_bsc(0.5, 0.2)).abs() < 1e-12);
    }

    #[test]
    fn binned_sorted_examples() {
        assert!(binned_sorted_loglik(&PosteriorDense::uniform(4).unwrap(), 0.5).unwrap().abs() < 1e-15);
        let v = binned_sorted_loglik(&dense(&[0.1, 0.7, 0.1, 0.1]), 0.5).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
        let v = binned_sorted_loglik(&PosteriorDense::uniform(8).unwrap(), 0.25).unwrap();
        assert!((v + 3f64.log2()).abs() < 1e-12);
        assert!(binned_sorted_loglik(&PosteriorDense::uniform(8).unwrap(), 0.3).is_err());
        assert!(binned_sorted_loglik(&PosteriorDense::uniform(6).unwrap(), 0.25).is_err());
    }

    #[test]
    fn nested_examples() {
        assert!(nested_loglik(&PosteriorDense::uniform(4).unwrap(), 1).unwrap().abs() < 1e-15);
        let v = nested_loglik(&dense(&[0.7, 0.1, 0.1, 0.1]), 1).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
        assert!(nested_loglik(&dense(&[0.7, 0.1, 0.1, 0.1]), 0).is_err());
        assert!(nested_loglik(&dense(&[0.7, 0.1, 0.1, 0.1]), 3).is_err());
    }

    #[test]
    fn drift_of_full_loglik_is_ejs() {
        let prof = NoiseProfile::affine(0.1, 0.5).unwrap();
        let post = dense(&[0.05, 0.3, 0.15, 0.1, 0.2, 0.05, 0.1, 0.05]);
        let q = QuerySet::from_bins([2, 5], 8).unwrap();
        let drift =
            expected_drift(&post, &q, &prof, |p| Ok(p.avg_log_likelihood())).unwrap();
        let ejs = ejs_divergence(&post, &q, &prof).unwrap();
        assert!((drift - ejs).abs() < 1e-12, "{drift} vs {ejs}");
    }
}
