use han_core::evolution::{
    center_rank, AdaptiveEs, AdaptiveEsConfig, AskTell, GenomeLayout, OpenAiEs, OpenAiEsConfig,
};
use han_core::seeding::rng_from;
use han_core::{LearningRateMode, NetworkShape, PlasticityRule};
use proptest::prelude::*;

fn sphere(x: &[f64], target: &[f64]) -> f64 {
    -x.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Rank map written independently: sort indices, assign average ranks to
/// ties, then map 0..n-1 linearly to [-0.5, 0.5].
fn rank_oracle(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let below = f.iter().filter(|&&v| v < f[i]).count() as f64;
        let equal = f.iter().filter(|&&v| v == f[i]).count() as f64;
        let rank = below + (equal - 1.0) / 2.0;
        out[i] = rank / (n - 1) as f64 - 0.5;
    }
    out
}

fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.clone();
        let x = rest.remove(i);
        for mut p in permutations(rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

#[test]
fn center_rank_matches_oracle_on_all_orderings_of_five() {
    let base = [0.3, -1.2, 7.0, 2.5, 0.0];
    for p in permutations((0..5).collect()) {
        let f: Vec<f64> = p.iter().map(|&i| base[i]).collect();
        let r = center_rank(&f).unwrap();
        assert_eq!(r, rank_oracle(&f));
        assert!(r.iter().sum::<f64>().abs() <= 1e-12);
    }
    assert_eq!(center_rank(&[3.0, 1.0]).unwrap(), vec![0.5, -0.5]);
    assert!(center_rank(&[1.0]).is_err());
}

proptest! {
    #[test]
    fn center_rank_properties(f in prop::collection::vec(-1e6f64..1e6, 2..50), scale in 0.01f64..100.0, shift in -1e3f64..1e3) {
        let r = center_rank(&f).unwrap();
        prop_assert!(r.iter().sum::<f64>().abs() <= 1e-12);
        prop_assert_eq!(&r, &rank_oracle(&f));
        let g: Vec<f64> = f.iter().map(|v| scale * v + shift).collect();
        prop_assert_eq!(&center_rank(&g).unwrap(), &r);
        let cubed: Vec<f64> = f.iter().map(|v| v * v * v).collect();
        prop_assert_eq!(&center_rank(&cubed).unwrap(), &r);
        let mut rev = f.clone();
        rev.reverse();
        let mut rr = center_rank(&rev).unwrap();
        rr.reverse();
        prop_assert_eq!(rr, r);
    }

    #[test]
    fn genome_round_trip(hidden in 1usize..6, inputs in 1usize..5, outputs in 1usize..4, seed in any::<u64>()) {
        let shape = NetworkShape::with_hidden(inputs, &[hidden], outputs).unwrap();
        let layout = GenomeLayout::new(shape.clone(), LearningRateMode::Evolved);
        let rule = PlasticityRule::random(&shape, &mut rng_from(seed), 1.0, LearningRateMode::Evolved);
        let g = layout.encode(&rule).unwrap();
        prop_assert_eq!(g.len(), 5 * shape.connections());
        prop_assert_eq!(layout.decode(g.as_slice()).unwrap(), rule);
        prop_assert!(layout.decode(&g.as_slice()[1..]).is_err());
    }
}

#[test]
fn adaptive_es_ask_is_centered_on_mean() {
    let es = AdaptiveEs::with_mean(
        vec![1.0, -2.0, 0.5],
        AdaptiveEsConfig {
            population: 4000,
            ..Default::default()
        },
    );
    let pop = es.ask(&mut rng_from(1));
    for d in 0..3 {
        let m = pop.iter().map(|x| x[d]).sum::<f64>() / pop.len() as f64;
        let sd = (pop.iter().map(|x| (x[d] - m).powi(2)).sum::<f64>() / pop.len() as f64).sqrt();
        // 4 standard errors
        assert!((m - es.mean[d]).abs() < 4.0 * 0.5 / (4000f64).sqrt());
        assert!((sd - 0.5).abs() < 0.03);
    }
}

#[test]
fn adaptive_es_sphere_convergence() {
    let target: Vec<f64> = (0..20).map(|i| 0.1 * i as f64 - 1.0).collect();
    let mut ok = 0;
    for seed in 0..5 {
        let mut rng = rng_from(seed);
        let cfg = AdaptiveEsConfig {
            population: 64,
            ..Default::default()
        };
        let mut es = AdaptiveEs::new(20, cfg, &mut rng).unwrap();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..300 {
            let pop = es.ask(&mut rng);
            let fit: Vec<f64> = pop.iter().map(|x| sphere(x, &target)).collect();
            best = fit.iter().copied().fold(best, f64::max);
            es.tell(&pop, &fit).unwrap();
        }
        if best >= -1e-2 {
            ok += 1;
        }
    }
    assert!(ok >= 4, "{ok}/5");
}

#[test]
fn openai_es_gradient_sign_on_quadratic() {
    let mut negative = 0;
    for seed in 0..100 {
        let es = OpenAiEs::with_mean(
            vec![1.0],
            OpenAiEsConfig {
                population: 64,
                ..Default::default()
            },
        );
        let pop = es.ask(&mut rng_from(seed));
        let fit: Vec<f64> = pop.iter().map(|x| -x[0] * x[0]).collect();
        if es.gradient_estimate(&pop, &fit).unwrap()[0] < 0.0 {
            negative += 1;
        }
    }
    assert!(negative >= 95, "{negative}/100");
}

#[test]
fn openai_es_moves_toward_optimum_and_decays() {
    let mut es = OpenAiEs::with_mean(
        vec![2.0],
        OpenAiEsConfig {
            population: 64,
            ..Default::default()
        },
    );
    let mut rng = rng_from(4);
    for g in 0..100 {
        assert_eq!(es.learning_rate(), 0.1 * 0.999f64.powi(g));
        assert_eq!(es.sigma(), 0.2 * 0.995f64.powi(g));
        let pop = es.ask(&mut rng);
        let fit: Vec<f64> = pop.iter().map(|x| -x[0] * x[0]).collect();
        es.tell(&pop, &fit).unwrap();
    }
    assert!(es.mean[0].abs() < 1.0);
}
