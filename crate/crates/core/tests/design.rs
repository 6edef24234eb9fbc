use std::sync::OnceLock;

use rand_distr::{Distribution, Normal};
use spreadsurvey::design::{
    criterion_qd, evaluate_design, exchange_improve, optimize, random_designs, random_search, EvalContext,
};
use spreadsurvey::forecast::RefitConfig;
use spreadsurvey::grid::Design;
use spreadsurvey::mcmc::{run_chain, ChainConfig, PosteriorSamples};
use spreadsurvey::rng::{substream, Stream};
use spreadsurvey::synth::{reference_scenario, Scenario, ScenarioConfig};

struct Fixture {
    scenario: Scenario,
    baseline: PosteriorSamples,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let scenario = reference_scenario(&ScenarioConfig {
            seed: 5,
            ..Default::default()
        })
        .unwrap();
        let config = ChainConfig {
            n_iter: 1500,
            n_burn: 500,
            seed: 5,
            ..Default::default()
        };
        let baseline = run_chain(&scenario.spec, &scenario.data, &scenario.grid, &config).unwrap();
        Fixture { scenario, baseline }
    })
}

fn context(seed: u64) -> EvalContext<'static> {
    let f = fixture();
    let s = &f.scenario;
    let refit = RefitConfig {
        n_iter: 300,
        n_burn: 100,
        thin: 1,
        seed,
        adapt: true,
    };
    EvalContext::new(&s.spec, &s.grid, &s.data, &s.transects, &f.baseline, 3, refit).unwrap()
}

#[test]
fn random_designs_are_distinct_and_sized() {
    let mut rng = substream(3, Stream::DesignSampling);
    let ds = random_designs(170, 20, 64, &mut rng).unwrap();
    let distinct: std::collections::HashSet<_> = ds.iter().collect();
    assert_eq!(distinct.len(), 64);
    assert!(ds.iter().all(|d| d.len() == 20 && d.indices().iter().all(|&t| t < 170)));
    let full = random_designs(40, 40, 1, &mut rng).unwrap();
    assert_eq!(full[0].indices(), (0..40).collect::<Vec<_>>().as_slice());
    assert!(random_designs(40, 41, 1, &mut rng).is_err());
}

/// Each member index appears with probability n / count.
#[test]
fn random_design_membership_is_uniform() {
    let mut rng = substream(8, Stream::DesignSampling);
    let (count, n, reps) = (30, 7, 20_000);
    let mut hits = vec![0usize; count];
    for _ in 0..reps {
        for &t in random_designs(count, n, 1, &mut rng).unwrap()[0].indices() {
            hits[t] += 1;
        }
    }
    let p = n as f64 / count as f64;
    let sd = (reps as f64 * p * (1.0 - p)).sqrt();
    for (t, h) in hits.iter().enumerate() {
        assert!((*h as f64 - reps as f64 * p).abs() < 4.5 * sd, "transect {t}: {h}");
    }
}

#[test]
fn qd_error_halves_when_draws_quadruple() {
    let normal = Normal::new(10.0, 2.0).unwrap();
    let mut rng = substream(12, Stream::Replicate(1));
    let rmse = |k: usize, rng: &mut _| {
        let reps = 4000;
        let sq: f64 = (0..reps)
            .map(|_| {
                let x: Vec<f64> = (0..k).map(|_| normal.sample(rng)).collect();
                (criterion_qd(&x).unwrap() - 4.0).powi(2)
            })
            .sum();
        (sq / reps as f64).sqrt()
    };
    let a = rmse(250, &mut rng);
    let b = rmse(1000, &mut rng);
    assert!((b / a - 0.5).abs() < 0.06, "ratio {}", b / a);
}

#[test]
fn cached_and_fresh_evaluations_agree_bitwise() {
    let ctx = context(31);
    let d = Design::new(vec![2, 5, 9]).unwrap();
    assert!(ctx.cached(&d).is_none());
    let first = evaluate_design(&ctx, &d).unwrap();
    let hit = evaluate_design(&ctx, &d).unwrap();
    assert_eq!(first, hit);
    let fresh = evaluate_design(&context(31), &d).unwrap();
    assert_eq!(first.q_d.to_bits(), fresh.q_d.to_bits());
    assert_eq!(first.k, 200);
    let other = evaluate_design(&context(32), &d).unwrap();
    assert_ne!(first.q_d.to_bits(), other.q_d.to_bits());
}

#[test]
fn exchange_descends_to_a_local_optimum() {
    let ctx = context(41);
    let start = Design::new(vec![0, 1, 2]).unwrap();
    let report = exchange_improve(&ctx, &start, 1).unwrap();
    let (_, q0) = report.start.clone().unwrap();
    let mut prev = q0;
    for swap in &report.exchange {
        assert!(swap.q_d < prev, "swap did not strictly improve: {} -> {}", prev, swap.q_d);
        prev = swap.q_d;
    }
    let (fin, q_fin) = report.final_design.clone().unwrap();
    assert_eq!(q_fin, prev);
    let count = ctx.transects.count();
    for &t in fin.indices() {
        for nb in [t.checked_sub(1), Some(t + 1)].into_iter().flatten() {
            if nb < count && !fin.contains(nb) {
                let q = evaluate_design(&ctx, &fin.swapped(t, nb)).unwrap().q_d;
                assert!(q >= q_fin, "neighbor {t}->{nb} improves: {q} < {q_fin}");
            }
        }
    }
    let again = exchange_improve(&ctx, &fin, 1).unwrap();
    assert!(again.exchange.is_empty());
    assert_eq!(again.passes, 1);
    assert_eq!(again.final_design.unwrap().0, fin);
}

#[test]
fn search_is_deterministic_and_improves_on_its_start() {
    let a = optimize(&context(51), 4, 3, 1).unwrap();
    let b = optimize(&context(51), 4, 3, 2).unwrap();
    assert_eq!(a, strip_times(b.clone(), &a));
    assert_eq!(a.random_count, 4);
    let (_, best) = a.best_random.clone().unwrap();
    let (_, fin) = a.final_design.clone().unwrap();
    assert!(fin <= best);
    assert!(a.random_q_d().iter().all(|q| *q >= best));
    let r = random_search(&context(51), 4, 3, 1).unwrap();
    assert_eq!(r.best_random, a.best_random);
}

/// Wall-clock timings are the only field allowed to differ between runs.
fn strip_times(
    mut r: spreadsurvey::design::SearchReport,
    like: &spreadsurvey::design::SearchReport,
) -> spreadsurvey::design::SearchReport {
    for (e, l) in r.evaluations.iter_mut().zip(&like.evaluations) {
        if let (Ok(x), Ok(y)) = (&mut e.result, &l.result) {
            x.seconds = y.seconds;
        }
    }
    r
}
