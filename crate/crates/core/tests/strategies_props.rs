use pmsearch::channel::{kl_bernoulli, mutual_info_bsc, reliability_c1, NoiseProfile};
use pmsearch::posterior::{Posterior, PosteriorDense, PosteriorPartition, QuerySet};
use pmsearch::strategies::{
    ejs_divergence, heaviest_node, select_dya_pm, select_hie_node, select_hie_pm, select_median_pm,
    select_sort_pm, sorted_order, OpCounter, SortPmTracker, StrategyKind, TreeNode,
};
use pmsearch::theory::{k_d, k_h, k_s, tau_upper_bound, FloorCheck, KsVariant};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

/// Dirichlet(1, …, 1) posteriors from normalized exponential draws.
fn dirichlet(n: usize) -> impl Strategy<Value = PosteriorDense> {
    prop::collection::vec(1e-12..1.0f64, n)
        .prop_map(|u| PosteriorDense::from_weights(u.into_iter().map(|x| -x.ln()).collect()).unwrap())
}

fn dyadic_dirichlet() -> impl Strategy<Value = PosteriorDense> {
    (1u32..=6).prop_flat_map(|l| dirichlet(1 << l))
}

fn query_mass(post: &PosteriorDense, q: &QuerySet) -> f64 {
    q.bins().map(|b| post.mass(b)).sum()
}

fn ops() -> OpCounter {
    OpCounter::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn median_is_best_prefix(post in (1usize..=40).prop_flat_map(dirichlet)) {
        let q = select_median_pm(&post, &mut ops()).unwrap();
        let run = q.single_run().unwrap();
        prop_assert_eq!(run.lo, 1);
        let best = (1..=post.n_bins())
            .map(|k| (post.cumulative(k) - 0.5).abs())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((post.cumulative(run.hi) - 0.5).abs() <= best + TOL);
    }

    #[test]
    fn dya_is_best_extension_of_heaviest_node(post in dyadic_dirichlet()) {
        let levels = post.n_bins().trailing_zeros();
        let (star, star_mass) = heaviest_node(&post, &mut ops()).unwrap();
        prop_assert!(star_mass >= 0.5 - TOL);
        let (d, _) = star.interval(levels);
        let q = select_dya_pm(&post, &mut ops()).unwrap();
        let run = q.single_run().unwrap();
        prop_assert_eq!(run.lo, d);
        let best = (d..=post.n_bins())
            .map(|k| (post.range_mass(d, k) - 0.5).abs())
            .fold(f64::INFINITY, f64::min);
        prop_assert!((post.range_mass(d, run.hi) - 0.5).abs() <= best + TOL);
    }

    #[test]
    fn hie_queries_a_node_near_the_heaviest(post in dyadic_dirichlet()) {
        let levels = post.n_bins().trailing_zeros();
        let (star, _) = heaviest_node(&post, &mut ops()).unwrap();
        let (node, mass) = select_hie_node(&post, &mut ops()).unwrap();
        let mut allowed = vec![star];
        if star.level < levels {
            allowed.extend(star.children());
        }
        prop_assert!(allowed.contains(&node));
        for cand in &allowed {
            prop_assert!((mass - 0.5).abs() <= (cand.mass(&post, levels) - 0.5).abs() + TOL);
        }
        let q = select_hie_pm(&post, &mut ops()).unwrap();
        let run = q.single_run().unwrap();
        prop_assert_eq!(TreeNode::from_interval(run.lo, run.hi, levels), Some(node));
    }

    #[test]
    fn heaviest_node_has_no_heavy_child(post in dyadic_dirichlet()) {
        let levels = post.n_bins().trailing_zeros();
        let (star, _) = heaviest_node(&post, &mut ops()).unwrap();
        if star.level < levels {
            for child in star.children() {
                prop_assert!(child.mass(&post, levels) < 0.5 + TOL);
            }
        }
    }

    #[test]
    fn sort_picks_top_bins_closest_to_half(post in (1usize..=12).prop_flat_map(dirichlet)) {
        let q = select_sort_pm(&post, &mut ops()).unwrap();
        let m = query_mass(&post, &q);
        // No excluded bin outweighs an included one.
        let min_in = q.bins().map(|b| post.mass(b)).fold(f64::INFINITY, f64::min);
        let max_out = (1..=post.n_bins())
            .filter(|&b| !q.contains(b))
            .map(|b| post.mass(b))
            .fold(0.0, f64::max);
        prop_assert!(min_in >= max_out);
        let mut sorted = post.masses().to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for &x in &sorted {
            acc += x;
            prop_assert!((m - 0.5).abs() <= (acc - 0.5).abs() + TOL);
        }
    }

    #[test]
    fn sort_is_permutation_equivariant(
        post in (2usize..=16).prop_flat_map(dirichlet),
        seed in any::<u64>(),
    ) {
        let n = post.n_bins();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates driven by a fixed LCG.
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let mut permuted = vec![0.0; n];
        for (i, &j) in perm.iter().enumerate() {
            permuted[j] = post.masses()[i];
        }
        let permuted = PosteriorDense::from_masses(permuted).unwrap();
        let q = select_sort_pm(&post, &mut ops()).unwrap();
        let qp = select_sort_pm(&permuted, &mut ops()).unwrap();
        let mapped: std::collections::BTreeSet<usize> = q.bins().map(|b| perm[b - 1] + 1).collect();
        let got: std::collections::BTreeSet<usize> = qp.bins().collect();
        prop_assert_eq!(mapped, got);
    }

    #[test]
    fn ejs_lower_bounds(post in dirichlet(64)) {
        let profile = NoiseProfile::affine(0.1, 0.5).unwrap();
        let mut o = ops();
        for (q, share) in [
            (select_sort_pm(&post, &mut o).unwrap(), 0.5),
            (select_dya_pm(&post, &mut o).unwrap(), 0.5),
            (select_hie_pm(&post, &mut o).unwrap(), 1.0 / 3.0),
        ] {
            let p = profile.crossover_for_query(q.size_fraction()).unwrap();
            let ejs = ejs_divergence(&post, &q, &profile).unwrap();
            prop_assert!(ejs >= mutual_info_bsc(share, p) - 1e-9, "{ejs} < I({share}, {p})");
        }
    }

    #[test]
    fn tracker_matches_fresh_sort(post in dirichlet(32), ys in prop::collection::vec(any::<bool>(), 1..60)) {
        let profile = NoiseProfile::affine(0.1, 0.5).unwrap();
        let mut post = post;
        let mut o = ops();
        let mut tracker = SortPmTracker::new(&post, &mut o);
        for y in ys {
            let q = tracker.select(&post, &mut o).unwrap();
            prop_assert_eq!(&q, &select_sort_pm(&post, &mut o).unwrap());
            post.bayes_update(&q, y, &profile).unwrap();
            tracker.after_update(&post, &mut o);
            let fresh = sorted_order(&post, &mut o);
            prop_assert_eq!(tracker.order(), fresh.as_slice());
        }
    }

    #[test]
    fn connected_rules_agree_across_representations(
        steps in prop::collection::vec((1usize..=64, 1usize..=64, any::<bool>()), 0..30),
    ) {
        let profile = NoiseProfile::affine(0.1, 0.5).unwrap();
        let mut part = PosteriorPartition::uniform(64).unwrap();
        for (a, b, y) in steps {
            part.bayes_update(&QuerySet::interval(a.min(b), a.max(b), 64).unwrap(), y, &profile).unwrap();
        }
        let dense = part.flatten();
        let mut o = ops();
        prop_assert_eq!(select_median_pm(&part, &mut o).unwrap(), select_median_pm(&dense, &mut o).unwrap());
        prop_assert_eq!(select_dya_pm(&part, &mut o).unwrap(), select_dya_pm(&dense, &mut o).unwrap());
        prop_assert_eq!(select_hie_pm(&part, &mut o).unwrap(), select_hie_pm(&dense, &mut o).unwrap());
    }

    #[test]
    fn mutual_info_is_symmetric_and_peaks_at_half(q in 0.0..1.0f64, p in 0.0..0.5f64) {
        prop_assert!((mutual_info_bsc(q, p) - mutual_info_bsc(1.0 - q, p)).abs() < 1e-12);
        prop_assert!(mutual_info_bsc(q, p) <= mutual_info_bsc(0.5, p) + 1e-12);
        prop_assert!(mutual_info_bsc(q, p) >= -1e-15);
    }

    #[test]
    fn kl_is_nonnegative_and_c1_matches(a in 0.0..1.0f64, b in 1e-6..(1.0 - 1e-6), p in 1e-6..0.5f64) {
        prop_assert!(kl_bernoulli(a, b) >= 0.0);
        prop_assert!(kl_bernoulli(b, b).abs() < 1e-12);
        prop_assert!((reliability_c1(p) - kl_bernoulli(p, 1.0 - p)).abs() < 1e-9 * (1.0 + reliability_c1(p)));
    }

    #[test]
    fn drift_constants_positive_and_ordered(p1 in 0.01..0.49f64, p2 in 0.01..0.49f64) {
        let (lo, hi) = if p1 < p2 { (p1, p2) } else { (p2, p1) };
        for k in [
            |p| k_s(p, KsVariant::Eighth),
            |p| k_s(p, KsVariant::Quarter),
            k_h,
            k_d,
        ] as [fn(f64) -> f64; 4] {
            prop_assert!(k(lo) > 0.0 && k(hi) > 0.0);
            prop_assert!(k(lo) >= k(hi) - 1e-12, "not monotone: K({lo})={} K({hi})={}", k(lo), k(hi));
        }
    }
}

#[test]
fn bounds_grow_as_targets_tighten() {
    let profile = NoiseProfile::affine(0.1, 0.5).unwrap();
    for kind in StrategyKind::PROPOSED {
        let tau = |delta: f64, eps: f64| {
            tau_upper_bound(kind, &profile, delta, eps, 1.0 / 32.0, KsVariant::Eighth, FloorCheck::Report)
                .unwrap()
                .tau_upper
        };
        assert!(tau(2f64.powi(-12), 1e-4) > tau(2f64.powi(-12), 1e-3));
        assert!(tau(2f64.powi(-14), 1e-3) > tau(2f64.powi(-12), 1e-3));
    }
    assert!(tau_upper_bound(
        StrategyKind::Median, &profile, 1e-3, 1e-3, 1.0 / 32.0, KsVariant::Eighth, FloorCheck::Report
    )
    .is_err());
}
