mod common;

use std::collections::BTreeMap;

use ciss::chanmap::ChannelMap;
use ciss::features::{compute_channel_stack, DistanceParams, IntegralStack, TextureSource};
use ciss::model::{CategoryPriors, DependencyModel, Exponential, GammaParams, Prior};
use ciss::rescore::{
    build_covariance_system, rescore_anchor, rescore_image, revised_base, solve_mmse, supporter_score_lookup,
    Detection, RescoreConfig, ScoreProvider,
};
use ciss::search::{find_supporters, SearchConfig, Supporter};
use ciss::synth::{generate_scene, simulate_base_scores, NoiseConfig, SynthConfig};
use ciss::BBox;
use common::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn model(ss: Exponential, ls: Exponential) -> DependencyModel {
    let prior = Prior { e_l: 0.17, e_s: 0.29 };
    DependencyModel {
        gamma: GammaParams { ss, ls },
        priors: CategoryPriors {
            per_category: ["sheep", "bottle", "car"].iter().map(|c| (c.to_string(), prior)).collect(),
            fallback: prior,
        },
        distance: DistanceParams::default(),
        ridge: 1e-6,
    }
}

fn default_model() -> DependencyModel {
    model(Exponential { a: 0.04, b: 6.0 }, Exponential { a: 0.06, b: 5.0 })
}

fn random_system(r: &mut common::TestRng, n: usize) -> (Vec<Supporter>, Vec<Vec<f64>>) {
    let sup: Vec<Supporter> = (0..n)
        .map(|i| Supporter {
            bbox: BBox::new(20 * i as u32, 0, 16, 16),
            distance: r.random_range(0.0..0.25),
            score: Some(r.random_range(0.0..1.0)),
        })
        .collect();
    let mut pw = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = r.random_range(0.0..0.5);
            pw[i][j] = d;
            pw[j][i] = d;
        }
    }
    (sup, pw)
}

#[test]
fn covariance_system_matches_entrywise_oracle() {
    let m = default_model();
    let mut r = rng(1);
    for n in 0..6 {
        let (sup, pw) = random_system(&mut r, n);
        let sys = build_covariance_system(0.6, "car", &sup, &pw, &m).unwrap();
        let diag = m.gamma_ss(0.0) + 1e-6 * m.gamma_ss(0.0);
        let dist = |i: usize, j: usize| match (i, j) {
            (0, 0) => 0.0,
            (0, k) | (k, 0) => sup[k - 1].distance,
            (a, b) => pw[a - 1][b - 1],
        };
        for i in 0..=n {
            assert_eq!(sys.r[i], 0.06 * (-5.0 * dist(0, i)).exp());
            for j in 0..=n {
                let want = if i == j { diag } else { 0.04 * (-6.0 * dist(i, j)).exp() };
                assert_eq!(sys.c[(i, j)], want);
                assert_eq!(sys.c[(i, j)], sys.c[(j, i)]);
            }
        }
    }
}

#[test]
fn zero_supporters_reduce_to_revised_base() {
    let m = default_model();
    for s in [0.0, 0.1, 0.55, 1.0] {
        let sys = build_covariance_system(s, "car", &[], &[], &m).unwrap();
        let sol = solve_mmse(&sys);
        assert_eq!(sol.coefficients[0], m.gamma_ls(0.0) / (m.gamma_ss(0.0) + m.ridge_abs()));
        assert_eq!(rescore_anchor(&sys, &sol.coefficients), revised_base(&m, "car", s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn supporter_order_does_not_matter(seed in any::<u64>(), n in 1usize..=5, s in 0.0f64..1.0) {
        let m = default_model();
        let mut r = rng(seed);
        let (sup, pw) = random_system(&mut r, n);
        let p = {
            let sys = build_covariance_system(s, "car", &sup, &pw, &m).unwrap();
            rescore_anchor(&sys, &solve_mmse(&sys).coefficients).raw
        };
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let sup2: Vec<Supporter> = perm.iter().map(|&i| sup[i].clone()).collect();
        let pw2: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| pw[i][j]).collect()).collect();
        let sys2 = build_covariance_system(s, "car", &sup2, &pw2, &m).unwrap();
        let p2 = rescore_anchor(&sys2, &solve_mmse(&sys2).coefficients).raw;
        prop_assert!((p - p2).abs() <= 1e-12, "{} vs {}", p, p2);
    }

    #[test]
    fn distant_supporters_do_not_matter(seed in any::<u64>(), n in 1usize..=5, s in 0.0f64..1.0) {
        let m = default_model();
        let mut r = rng(seed);
        let (mut sup, mut pw) = random_system(&mut r, n);
        for x in sup.iter_mut() {
            x.distance = 1e3;
        }
        for row in pw.iter_mut() {
            for v in row.iter_mut() {
                *v = 1e3;
            }
        }
        prop_assert!(m.gamma_ss(1e3) < 1e-12 && m.gamma_ls(1e3) < 1e-12);
        let sys = build_covariance_system(s, "car", &sup, &pw, &m).unwrap();
        let p = rescore_anchor(&sys, &solve_mmse(&sys).coefficients).raw;
        prop_assert!((p - revised_base(&m, "car", s).raw).abs() <= 1e-9);
    }

    #[test]
    fn coupling_sign_follows_the_coefficient(d in 0.0f64..0.5, s in 0.0f64..1.0, s1 in 0.0f64..0.9, b_ls in 0.1f64..20.0) {
        let m = model(Exponential { a: 0.04, b: 6.0 }, Exponential { a: 0.05, b: b_ls });
        let p_at = |score: f64| {
            let sup = [Supporter { bbox: BBox::new(0, 0, 16, 16), distance: d, score: Some(score) }];
            let sys = build_covariance_system(s, "car", &sup, &[vec![0.0]], &m).unwrap();
            let sol = solve_mmse(&sys);
            (rescore_anchor(&sys, &sol.coefficients).raw, sol.coefficients[1])
        };
        let (p_lo, coef) = p_at(s1);
        let (p_hi, _) = p_at(s1 + 0.1);
        prop_assert_eq!(p_hi > p_lo, coef > 0.0);
    }

    #[test]
    fn random_systems_meet_the_residual_bound(seed in any::<u64>()) {
        let m = default_model();
        let mut r = rng(seed);
        let n = r.random_range(0..=5);
        let (sup, pw) = random_system(&mut r, n);
        let sys = build_covariance_system(r.random(), "car", &sup, &pw, &m).unwrap();
        let sol = solve_mmse(&sys);
        if !sol.fallback {
            let res = (&sys.c * &sol.coefficients - &sys.r).amax();
            prop_assert!(res <= 1e-9 * (1.0 + sys.r.amax()));
        }
    }
}

fn scene_detections(seed: u64, noise: &NoiseConfig) -> (ciss::synth::Scene, Vec<Detection>) {
    let cfg = SynthConfig::default();
    let scene = generate_scene(&cfg, seed).unwrap();
    let dets = simulate_base_scores(&scene, &cfg, noise, seed);
    (scene, dets)
}

fn lookup_provider(dets: &[Detection]) -> ScoreProvider {
    ScoreProvider::lookup(dets.iter().map(|d| (d.category.clone(), d.bbox, d.base_score)).collect(), 0.3).unwrap()
}

#[test]
fn zero_coupling_gives_the_prior() {
    let m = model(Exponential { a: 0.04, b: 6.0 }, Exponential::ZERO);
    let (scene, dets) = scene_detections(5, &NoiseConfig::default());
    let out = rescore_image(&scene.image, &dets, &m, &lookup_provider(&dets), &RescoreConfig::default()).unwrap();
    for d in &out {
        assert_eq!(d.ciss.unwrap().raw, 0.17);
    }
}

#[test]
fn revised_base_preserves_rank_per_category() {
    let m = default_model();
    for seed in 0..5 {
        let (scene, dets) = scene_detections(seed, &NoiseConfig::default());
        let out = rescore_image(&scene.image, &dets, &m, &lookup_provider(&dets), &RescoreConfig::default()).unwrap();
        assert_eq!(out.len(), dets.len());
        for cat in ["sheep", "bottle", "car"] {
            let idx: Vec<usize> = (0..out.len()).filter(|&i| out[i].category == cat).collect();
            let mut by_base = idx.clone();
            by_base.sort_by(|&a, &b| out[a].base_score.total_cmp(&out[b].base_score).then(a.cmp(&b)));
            let mut by_rev = idx.clone();
            by_rev.sort_by(|&a, &b| {
                let (x, y) = (out[a].revised.unwrap().raw, out[b].revised.unwrap().raw);
                x.total_cmp(&y).then(a.cmp(&b))
            });
            assert_eq!(by_base, by_rev);
        }
    }
}

/// A background false alarm whose only supporter scores 0: the 2x2 system, solved
/// by hand, pulls its estimate below the revised base-score.
#[test]
fn false_alarm_with_unconfident_supporter_drops() {
    let m = default_model();
    let cfg = RescoreConfig {
        search: SearchConfig {
            n_max: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    let noise = NoiseConfig {
        mu0: 0.5,
        sigma: 0.05,
        ..Default::default()
    };
    let mut checked = 0;
    for seed in 0..40 {
        let (scene, dets) = scene_detections(seed, &noise);
        let sp = lookup_provider(&dets);
        let out = rescore_image(&scene.image, &dets, &m, &sp, &cfg).unwrap();
        let is = IntegralStack::build(&compute_channel_stack(&scene.image, &TextureSource::default()).unwrap());
        for d in &out[scene.instances.len()..] {
            if !d.is_anchor || d.n_supporters != 1 {
                continue;
            }
            let sup = &find_supporters(&is, &d.bbox, &m.distance, &cfg.search).unwrap()[0];
            let s1 = supporter_score_lookup(&sp, &sup.bbox, &d.category).unwrap();
            if s1 != 0.0 {
                continue;
            }
            let (g0, e) = (m.gamma_ss(0.0), m.ridge_abs());
            let (c00, c01) = (g0 + e, m.gamma_ss(sup.distance));
            let (r0, r1) = (m.gamma_ls(0.0), m.gamma_ls(sup.distance));
            let det = c00 * c00 - c01 * c01;
            let m0 = (r0 * c00 - c01 * r1) / det;
            let m1 = (c00 * r1 - c01 * r0) / det;
            let p = 0.17 + m0 * (d.base_score - 0.29) + m1 * (s1 - 0.29);
            let got = d.ciss.unwrap().raw;
            assert!((p - got).abs() <= 1e-12, "{p} vs {got}");
            assert!(m1 > 0.0);
            assert!(got < d.revised.unwrap().raw);
            checked += 1;
        }
    }
    assert!(checked >= 5, "only {checked} false alarms checked");
}

#[test]
fn dense_rasters_give_box_means() {
    let map = ChannelMap::new(10, 8, 1, vec![0.7; 80]).unwrap();
    let sp = ScoreProvider::dense(&BTreeMap::from([("car".to_string(), map)]));
    for b in [BBox::new(0, 0, 10, 8), BBox::new(3, 2, 4, 5)] {
        assert!((supporter_score_lookup(&sp, &b, "car").unwrap() - 0.7).abs() < 1e-6);
    }
    assert!(supporter_score_lookup(&sp, &BBox::new(0, 0, 2, 2), "dog").is_err());
}
