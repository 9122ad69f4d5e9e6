use posbias_core::pipeline::simulate;
use posbias_core::{
    derive_rankings, generate_corpus, generate_rankers, true_propensities, SamplingMode,
    SeedStream, SimulationConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        seed,
        ..SimulationConfig::default()
    }
}

/// (impressions, clicks) per (displayed rank, relevance).
fn click_cells(sim: &posbias_core::pipeline::Simulation) -> Vec<[(u64, u64); 2]> {
    let len = sim.corpus.queries()[0].candidates.len();
    let mut cells = vec![[(0u64, 0u64); 2]; len];
    for rec in sim.logs.records() {
        let rel = &sim.corpus.queries()[rec.query].relevance;
        for (pos, (&doc, &clicked)) in rec.ranking.iter().zip(&rec.clicks).enumerate() {
            let cell = &mut cells[pos][rel[doc] as usize];
            cell.0 += 1;
            cell.1 += clicked as u64;
        }
    }
    cells
}

#[test]
fn click_rates_follow_position_model() {
    let cfg = SimulationConfig {
        sweeps: 100,
        ..config(77)
    };
    let sim = simulate(&cfg).unwrap();
    let cells = click_cells(&sim);
    let p = true_propensities(cfg.eta, cells.len());

    let (n, c) = cells[0][1];
    assert!(n > 0);
    assert_eq!(n, c, "relevant documents at rank 1 are always clicked");

    let (n, c) = cells[1][0];
    assert!(n >= 100_000, "{n} impressions");
    let rate = c as f64 / n as f64;
    let se = (0.05 * 0.95 / n as f64).sqrt();
    assert!((rate - 0.05).abs() <= 3.0 * se, "rate {rate}, se {se}");

    for (r, cell) in cells.iter().enumerate() {
        for (rel, &(n, c)) in cell.iter().enumerate() {
            if n < 10_000 {
                continue;
            }
            let expected = if rel == 1 { p[r] } else { p[r] * cfg.eps_minus };
            let se = (expected * (1.0 - expected) / n as f64).sqrt();
            let rate = c as f64 / n as f64;
            assert!(
                (rate - expected).abs() <= 4.0 * se.max(1e-12),
                "rank {} rel {rel}: {rate} vs {expected}",
                r + 1
            );
        }
    }
}

#[test]
fn no_clicks_without_relevance_or_noise() {
    let cfg = SimulationConfig {
        relevant_fraction: 0.0,
        eps_minus: 0.0,
        num_queries: 100,
        ..config(1)
    };
    let sim = simulate(&cfg).unwrap();
    assert!(sim.logs.records().iter().all(|r| r.clicks.iter().all(|&c| !c)));
}

#[test]
fn relevant_fraction_matches_config() {
    let cfg = config(2024);
    let corpus = generate_corpus(&cfg, &mut SeedStream::corpus(cfg.seed)).unwrap();
    let labels: Vec<bool> = corpus
        .queries()
        .iter()
        .flat_map(|q| q.relevance.iter().copied())
        .collect();
    assert_eq!(labels.len(), 20_000);
    let frac = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    assert!((frac - 0.25).abs() <= 0.02, "{frac}");
}

#[test]
fn corpus_and_rankers_are_deterministic() {
    let cfg = SimulationConfig {
        num_queries: 50,
        ..config(8)
    };
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a.corpus, b.corpus);
    assert_eq!(a.rankings, b.rankings);
    assert_eq!(a.logs, b.logs);
}

#[test]
fn full_and_zero_noise_overlap_give_identical_rankers() {
    let cfg = SimulationConfig {
        num_queries: 200,
        ..config(9)
    };
    let corpus = generate_corpus(&cfg, &mut SeedStream::corpus(cfg.seed)).unwrap();
    for (overlap, noise) in [(1.0, 2.0), (0.3, 0.0)] {
        let t = generate_rankers(&corpus, overlap, noise, &mut SeedStream::rankers(cfg.seed)).unwrap();
        for q in 0..corpus.len() {
            assert_eq!(t.get(0, q), t.get(1, q));
        }
    }
}

/// Probability that the two rankers put different documents first at
/// overlap 0, estimated by an independent re-implementation of the score
/// model on the same labels.
#[test]
fn independent_rankers_disagree_at_the_expected_rate() {
    let cfg = SimulationConfig {
        num_queries: 10_000,
        overlap: 0.0,
        ..config(31)
    };
    let sim = simulate(&SimulationConfig { sweeps: 1, ..cfg.clone() }).unwrap();
    let observed = (0..cfg.num_queries)
        .filter(|&q| sim.rankings.get(0, q).unwrap()[0] != sim.rankings.get(1, q).unwrap()[0])
        .count() as f64
        / cfg.num_queries as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut normal = || {
        // Box-Muller
        let u: f64 = 1.0 - rng.random::<f64>();
        let v: f64 = rng.random();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let mut differ = 0;
    for q in sim.corpus.queries() {
        let top = |noise: &mut dyn FnMut() -> f64| {
            q.relevance
                .iter()
                .enumerate()
                .map(|(i, &r)| (r as u8 as f64 + cfg.score_noise * noise(), i))
                .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
                .1
        };
        if top(&mut normal) != top(&mut normal) {
            differ += 1;
        }
    }
    let expected = differ as f64 / cfg.num_queries as f64;
    let se = (2.0 * expected * (1.0 - expected) / cfg.num_queries as f64).sqrt();
    assert!((observed - expected).abs() <= 4.0 * se, "{observed} vs {expected}");
}

#[test]
fn sweep_and_iid_log_sizes() {
    for mode in [SamplingMode::Sweep, SamplingMode::IidSampling] {
        let cfg = SimulationConfig {
            num_queries: 300,
            sweeps: 3,
            mode,
            ..config(4)
        };
        let sim = simulate(&cfg).unwrap();
        for (_, n) in sim.logs.log_sizes() {
            assert_eq!(n, 900);
        }
        for rec in sim.logs.records() {
            assert_eq!(rec.clicks.len(), rec.ranking.len());
        }
    }
}

#[test]
fn iid_sampling_covers_queries_uniformly() {
    let cfg = SimulationConfig {
        num_queries: 50,
        sweeps: 200,
        mode: SamplingMode::IidSampling,
        ..config(6)
    };
    let sim = simulate(&cfg).unwrap();
    let mut counts = vec![0usize; cfg.num_queries];
    for rec in sim.logs.records() {
        counts[rec.query] += 1;
    }
    // 20000 draws over 50 queries: 400 expected per query, sd 19.8.
    assert!(counts.iter().all(|&c| (c as f64 - 400.0).abs() < 6.0 * 19.8), "{counts:?}");
    assert_eq!(sim.logs, simulate(&cfg).unwrap().logs);
}

#[test]
fn derived_rankings_equal_simulator_table() {
    let sim = simulate(&SimulationConfig {
        num_queries: 300,
        sweeps: 2,
        ..config(12)
    })
    .unwrap();
    assert_eq!(derive_rankings(&sim.logs).unwrap(), sim.rankings);
}
