use spreadsurvey::grid::Grid;
use spreadsurvey::mcmc::{
    bayesian_p_value, gelman_rubin, run_chain, run_chain_from, BlockSwitches, ChainConfig, PosteriorSamples,
};
use spreadsurvey::model::{ModelSpec, Survey, SurveyData, Theta};
use spreadsurvey::propagator::CovariateMatrix;
use spreadsurvey::rng::{substream, Stream};
use spreadsurvey::synth::{reference_scenario, Scenario, ScenarioConfig};
use spreadsurvey::Error;
use statrs::function::gamma::gamma_lr;

fn scenario(seed: u64) -> Scenario {
    reference_scenario(&ScenarioConfig {
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn short(seed: u64, n_iter: usize, n_burn: usize) -> ChainConfig {
    ChainConfig {
        n_iter,
        n_burn,
        seed,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_samples_within_support() {
    let s = scenario(4);
    let config = ChainConfig {
        thin: 3,
        field_thin: 5,
        ..short(9, 400, 100)
    };
    let a = run_chain(&s.spec, &s.data, &s.grid, &config).unwrap();
    let b = run_chain(&s.spec, &s.data, &s.grid, &config).unwrap();
    assert_eq!(a.draws, b.draws);
    assert_eq!(a.fields, b.fields);
    assert_eq!(a.len(), 2 * 100);
    assert_eq!(a.len(), config.n_chains * config.retained_per_chain());
    for d in &a.draws {
        assert!(d.theta.in_support());
        assert!(d.theta.phi > 0.0 && d.theta.phi < 1.0 && d.theta.tau > 0.0 && d.theta.kappa > 0.0);
        assert!(d.log_post.is_finite());
        assert!(d.iteration >= config.n_burn);
    }
    let other = run_chain(&s.spec, &s.data, &s.grid, &short(10, 400, 100)).unwrap();
    assert_ne!(a.draws[0].theta, other.draws[0].theta);
}

#[test]
fn default_configuration_retains_thirty_thousand_draws() {
    let c = ChainConfig::default();
    assert_eq!((c.n_iter, c.n_burn, c.n_chains, c.thin), (20_000, 5_000, 2, 1));
    c.validate().unwrap();
    assert_eq!(c.n_chains * c.retained_per_chain(), 30_000);
}

/// Proposal scales adapt during burn-in and stay fixed afterwards; sampling
/// acceptance lands in a workable range on the reference scenario.
#[test]
fn adaptation_freezes_and_acceptance_is_sane() {
    let s = scenario(2);
    let config = short(3, 4000, 1500);
    let post = run_chain(&s.spec, &s.data, &s.grid, &config).unwrap();
    for c in &post.chains {
        assert_eq!(c.scale_trace.len(), config.n_iter);
        let frozen = c.scale_trace[config.n_burn];
        assert!(c.scale_trace[config.n_burn..].iter().all(|s| *s == frozen), "scales moved after burn-in");
        assert!(c.scale_trace[..config.n_burn].iter().any(|s| *s != frozen), "no adaptation happened");
        for (b, k) in c.sampling.iter().enumerate() {
            let r = k.rate();
            assert!((0.1..=0.6).contains(&r), "chain {} block {b}: acceptance {r}", c.chain);
            assert_eq!(k.proposed, (config.n_iter - config.n_burn) as u64);
        }
    }
}

/// Regularized-gamma moments of Gamma(a, rate b) truncated to (0, 1).
fn truncated_gamma_moments(a: f64, b: f64) -> (f64, f64) {
    let p0 = gamma_lr(a, b);
    let m1 = a / b * gamma_lr(a + 1.0, b) / p0;
    let m2 = a * (a + 1.0) / (b * b) * gamma_lr(a + 2.0, b) / p0;
    (m1, m2 - m1 * m1)
}

fn batch_means_se(chains: &[Vec<f64>], batches: usize) -> f64 {
    let mut means = Vec::new();
    for c in chains {
        let size = c.len() / batches;
        for b in 0..batches {
            means.push(c[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64);
        }
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

/// With every Metropolis block frozen at the truth, integrating out the latent
/// counts gives φ | y, u proportional to φ^Σy exp(-φ Σu) on (0, 1).
#[test]
fn frozen_blocks_leave_the_analytic_phi_conditional() {
    let mut s = scenario(6);
    s.spec.detection_trials = None;
    let config = ChainConfig {
        blocks: BlockSwitches {
            beta: false,
            alpha: false,
            initial: false,
        },
        field_thin: 0,
        ..short(11, 20_000, 1000)
    };
    let post = run_chain_from(&s.spec, &s.data, &s.grid, &config, &s.truth_theta).unwrap();
    assert!(post.draws.iter().all(|d| d.theta.beta == s.truth_theta.beta && d.theta.tau == s.truth_theta.tau));

    let fields = s.spec.trajectory(&s.grid, &s.truth_theta, &s.data.offsets()).unwrap();
    let (mut y, mut u) = (0.0, 0.0);
    for (t, survey) in s.data.surveys.iter().enumerate() {
        for (&c, &count) in survey.cells.iter().zip(&survey.counts) {
            y += count as f64;
            u += fields[t][c];
        }
    }
    let (mean, var) = truncated_gamma_moments(y + s.spec.priors.phi_a, u);
    let phi = post.values(0);
    let m = phi.iter().sum::<f64>() / phi.len() as f64;
    let v = phi.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (phi.len() - 1) as f64;
    let se = batch_means_se(&post.chain_values(0), 25);
    assert!((m - mean).abs() < 4.0 * se, "mean {m} vs {mean} (se {se})");
    assert!((v / var - 1.0).abs() < 0.15, "variance {v} vs {var}");
}

/// With no observations φ only sees its Beta(1, 1) prior.
#[test]
fn zero_data_recovers_the_phi_prior() {
    let grid = Grid::full(6, 6, 1.0).unwrap();
    let q = grid.cell_count();
    let spec = ModelSpec::new(CovariateMatrix::intercept_only(q), (3.0, 3.0));
    let data = SurveyData::new(2000, vec![Survey::empty(2000)]).unwrap();
    let post = run_chain(&spec, &data, &grid, &ChainConfig::default()).unwrap();
    assert_eq!(post.len(), 30_000);
    let phi = post.values(0);
    let m = phi.iter().sum::<f64>() / phi.len() as f64;
    let v = phi.iter().map(|x| (x - m).powi(2)).sum::<f64>() / phi.len() as f64;
    assert!((m - 0.5).abs() < 0.02, "mean {m}");
    assert!((v - 1.0 / 12.0).abs() < 0.005, "variance {v}");
    let err = bayesian_p_value(&post, &data, &spec, &grid, 100, &mut substream(1, Stream::PValue)).unwrap_err();
    assert!(matches!(err, Error::Domain(_)));
}

/// Counts far from a narrow initial kernel have zero expected abundance.
#[test]
fn impossible_start_is_an_initialization_error() {
    let grid = Grid::full(1, 40, 1.0).unwrap();
    let spec = ModelSpec::new(CovariateMatrix::intercept_only(40), (0.5, 0.5));
    let data = SurveyData::new(
        2000,
        vec![Survey {
            year: 2000,
            cells: vec![39],
            counts: vec![5],
        }],
    )
    .unwrap();
    let start = Theta {
        kappa: 0.01,
        ..Theta::initial(&spec)
    };
    let err = run_chain_from(&spec, &data, &grid, &short(1, 10, 2), &start).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

fn fit(s: &Scenario, seed: u64) -> PosteriorSamples {
    run_chain(&s.spec, &s.data, &s.grid, &short(seed, 3000, 1000)).unwrap()
}

#[test]
fn p_value_flags_inflated_counts() {
    let s = scenario(8);
    let post = fit(&s, 8);
    let p = bayesian_p_value(&post, &s.data, &s.spec, &s.grid, 300, &mut substream(8, Stream::PValue)).unwrap();
    assert!(p > 0.05 && p < 0.95, "self-consistent p = {p}");
    let mut inflated = s.data.clone();
    for survey in &mut inflated.surveys {
        for c in &mut survey.counts {
            *c *= 10;
        }
    }
    let p = bayesian_p_value(&post, &inflated, &s.spec, &s.grid, 300, &mut substream(8, Stream::PValue)).unwrap();
    assert!(p < 0.05, "misfit p = {p}");
}

#[test]
fn single_chain_rhat_is_refused() {
    let s = scenario(1);
    let config = ChainConfig {
        n_chains: 1,
        ..short(1, 200, 50)
    };
    let post = run_chain(&s.spec, &s.data, &s.grid, &config).unwrap();
    let err = gelman_rubin(&post).unwrap_err();
    assert!(err.to_string().contains("two chains"), "{err}");
}
