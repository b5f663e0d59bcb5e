//! Acceptance criteria. Every test prints one `PASS` or `FAIL` line.
//!
//! The demo and calibration tests run Monte Carlo batches on the built-in
//! scenarios and take several minutes in release mode.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;

use rfs_core::assignment::{kbest_subsets, ranked_assignments, CostMatrix};
use rfs_core::filters::bernoulli::{bernoulli_predict, bernoulli_update, BernoulliBelief, BernoulliConfig};
use rfs_core::filters::glmb::{glmb_predict, glmb_update, score_track, GlmbConfig, GlmbDensity, Track};
use rfs_core::filters::phd::{phd_predict, phd_update_partition, PhdConfig, PhdSystem};
use rfs_core::filters::rfs_optimal::{association_count, enumerate_associations};
use rfs_core::filters::standard::{bootstrap_step, pf_loglik};
use rfs_core::filters::{FilterRegistry, FilterSettings, Label};
use rfs_core::fisst::{set_integral_quadrature, Density1D, QuadratureGrid, RfsFamily};
use rfs_core::harness::calibrate::{calibrate_sigma_w, Backend, SigmaWCalibration};
use rfs_core::harness::run::ideal;
use rfs_core::harness::{paper_scenario, run_monte_carlo, simulate, McOptions, MonteCarloResult, ScenarioConfig, Variant};
use rfs_core::math::normalize_weighted;
use rfs_core::metrics::{ospa, OspaParams};
use rfs_core::models::{BearingsModel, LinearGaussian1d, MultiObjectModel, TargetState};
use rfs_core::particles::MoveConfig;
use rfs_core::rng::{stream, SimRng, Stage};

fn verdict(name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

// ---------------------------------------------------------------- oracles

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

#[test]
fn association_counts() {
    let maps = enumerate_associations(2, 3);
    let mut ok = maps.len() == 13;
    for n in 0..=5 {
        for m in 0..=5 {
            let closed: u128 = (0..=n.min(m)).map(|k| binom(n, k) * binom(m, k) * (1..=k as u128).product::<u128>()).sum();
            let all = enumerate_associations(n, m);
            let mut sorted = all.clone();
            sorted.sort();
            sorted.dedup();
            let injective = all.iter().all(|a| {
                let hits: Vec<usize> = a.iter().copied().filter(|&j| j > 0).collect();
                let mut h = hits.clone();
                h.sort();
                h.dedup();
                h.len() == hits.len() && hits.iter().all(|&j| j <= m)
            });
            ok &= all.len() as u128 == closed && association_count(n, m) == closed && sorted.len() == all.len() && injective;
        }
    }
    assert!(verdict("association count", ok, format!("(2,3) -> {} maps; closed form checked for n,m <= 5", maps.len())));
}

fn brute_assignments(c: &CostMatrix) -> Vec<(Vec<usize>, f64)> {
    fn rec(c: &CostMatrix, r: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
        if r == c.rows {
            let cost = c.cost_of(cur);
            if cost.is_finite() {
                out.push((cur.clone(), cost));
            }
            return;
        }
        for j in 0..c.cols {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(c, r + 1, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(c, 0, &mut vec![false; c.cols], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}

#[test]
fn ranked_assignment_matches_enumeration() {
    let mut rng = stream(101, Stage::Simulation);
    let mut ok = true;
    let mut checked = 0;
    for _ in 0..200 {
        let rows = rng.random_range(1..=4usize);
        let cols = rng.random_range(rows..=4usize);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| if rng.random::<f64>() < 0.15 { f64::INFINITY } else { rng.random_range(0.0..10.0) })
            .collect();
        let c = CostMatrix::new(rows, cols, data);
        let brute = brute_assignments(&c);
        for k in 1..=brute.len() + 1 {
            let got = ranked_assignments(&c, k);
            let want = k.min(brute.len());
            ok &= got.solutions.len() == want && got.exhausted == (k > brute.len());
            for (i, (cols_i, cost)) in got.solutions.iter().enumerate() {
                ok &= (cost - brute[i].1).abs() < 1e-9 && (c.cost_of(cols_i) - cost).abs() < 1e-9;
            }
            let mut distinct: Vec<&Vec<usize>> = got.solutions.iter().map(|s| &s.0).collect();
            distinct.sort();
            distinct.dedup();
            ok &= distinct.len() == got.solutions.len();
            checked += 1;
        }
    }
    assert!(verdict("ranked assignments vs enumeration", ok, format!("200 matrices up to 4x4, {checked} (matrix, M) pairs")));
}

#[test]
fn kbest_subsets_match_enumeration() {
    let mut rng = stream(102, Stage::Simulation);
    let mut ok = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=10usize);
        let w: Vec<f64> = (0..n)
            .map(|_| match rng.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random::<f64>(),
            })
            .collect();
        let wc: Vec<f64> = w.iter().map(|x| x.clamp(1e-12, 1.0 - 1e-12)).collect();
        let mut brute: Vec<f64> = (0..1usize << n)
            .map(|mask| (0..n).map(|i| if mask >> i & 1 == 1 { -wc[i].ln() } else { -(1.0 - wc[i]).ln() }).sum())
            .collect();
        brute.sort_by(f64::total_cmp);
        let k = rng.random_range(1..=(1usize << n) + 1);
        let got = kbest_subsets(&w, k);
        ok &= got.len() == k.min(1 << n);
        for (i, s) in got.iter().enumerate() {
            let recomputed: f64 = (0..n).map(|j| if s.kept.contains(&j) { -wc[j].ln() } else { -(1.0 - wc[j]).ln() }).sum();
            ok &= (s.cost - brute[i]).abs() < 1e-9 * brute[i].abs().max(1.0) && (s.cost - recomputed).abs() < 1e-9 * recomputed.abs().max(1.0);
        }
        let mut sets: Vec<&Vec<usize>> = got.iter().map(|s| &s.kept).collect();
        sets.sort();
        sets.dedup();
        ok &= sets.len() == got.len();
    }
    assert!(verdict("k-best subsets vs enumeration", ok, "200 instances, n <= 10"));
}

fn ospa_brute(x: &[[f64; 2]], y: &[[f64; 2]], c: f64, p: f64) -> f64 {
    let (s, l) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    if l.is_empty() {
        return 0.0;
    }
    fn best(s: &[[f64; 2]], l: &[[f64; 2]], i: usize, used: &mut Vec<bool>, c: f64, p: f64) -> f64 {
        if i == s.len() {
            return 0.0;
        }
        let mut out = f64::INFINITY;
        for j in 0..l.len() {
            if !used[j] {
                used[j] = true;
                let d = ((s[i][0] - l[j][0]).powi(2) + (s[i][1] - l[j][1]).powi(2)).sqrt().min(c).powf(p);
                out = out.min(d + best(s, l, i + 1, used, c, p));
                used[j] = false;
            }
        }
        out
    }
    let loc = best(s, l, 0, &mut vec![false; l.len()], c, p);
    ((loc + c.powf(p) * (l.len() - s.len()) as f64) / l.len() as f64).powf(1.0 / p)
}

#[test]
fn ospa_matches_permutation_oracle() {
    let mut rng = stream(103, Stage::Simulation);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let set = |rng: &mut SimRng| -> Vec<[f64; 2]> {
            let n = rng.random_range(0..=4usize);
            (0..n).map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)]).collect()
        };
        let x = set(&mut rng);
        let y = set(&mut rng);
        let c = rng.random_range(1.0..100.0);
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3usize)];
        let got = ospa(&x, &y, OspaParams { c, p }).total;
        worst = worst.max((got - ospa_brute(&x, &y, c, p)).abs());
    }
    assert!(verdict("OSPA vs permutation oracle", worst <= 1e-9, format!("500 pairs, max deviation {worst:.2e}")));
}

#[test]
fn fisst_set_integrals_are_one() {
    let gauss = Density1D::Gaussian { mean: 0.0, std: 1.0 };
    let cases: Vec<(&str, RfsFamily, usize, QuadratureGrid)> = vec![
        ("bernoulli", RfsFamily::Bernoulli { r: 0.35, p: gauss }, 2, QuadratureGrid { a: -12.0, b: 12.0, nodes: 100 }),
        (
            "poisson 0.4 uniform",
            RfsFamily::Poisson { lambda: 0.4, p: Density1D::Uniform { a: 0.0, b: 2.0 } },
            12,
            QuadratureGrid { a: 0.0, b: 2.0, nodes: 2 },
        ),
        (
            "poisson 1.0 parabolic",
            RfsFamily::Poisson { lambda: 1.0, p: Density1D::Parabolic { a: -1.0, b: 3.0 } },
            10,
            QuadratureGrid { a: -1.0, b: 3.0, nodes: 3 },
        ),
        (
            "multi-bernoulli",
            RfsFamily::MultiBernoulli {
                components: vec![(0.4, gauss), (0.7, Density1D::Gaussian { mean: 0.5, std: 0.8 })],
            },
            2,
            QuadratureGrid { a: -12.0, b: 12.0, nodes: 100 },
        ),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, family, n_max, grid) in cases {
        let v = set_integral_quadrature(&family, n_max, grid).unwrap();
        ok &= (v - 1.0).abs() <= 1e-6;
        detail.push(format!("{name}={v:.9}"));
    }
    assert!(verdict("FISST set integrals", ok, detail.join(", ")));
}

// ------------------------------------------------------------- reductions

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// A short single-target data set for `model`, one measurement per step.
fn reduction_data<M: MultiObjectModel>(model: &M, x0: &M::State, steps: usize, z_of: impl Fn(&M::State, &mut SimRng) -> f64) -> Vec<f64> {
    let mut rng = stream(7, Stage::Simulation);
    let mut x = x0.clone();
    (1..=steps)
        .map(|k| {
            x = model.propagate(k, &x, &mut rng);
            z_of(&x, &mut rng)
        })
        .collect()
}

fn bearings_setup() -> (BearingsModel, Vec<TargetState>, usize, Vec<f64>) {
    let cfg = paper_scenario(Variant::Single);
    let model = ideal(&cfg.model().unwrap());
    let mut sim_rng = stream(5, Stage::Simulation);
    let sim = simulate(&cfg, &model, &mut sim_rng);
    let first = sim.scans.iter().position(|s| s.len() == 1).unwrap();
    let mut rng = stream(6, Stage::Filter);
    let init: Vec<TargetState> = (0..400).map(|_| model.sample_birth(first, sim.scans[first][0], &mut rng)).collect();
    // Steps first+1.. with the scans that follow.
    let zs: Vec<f64> = sim.scans[first + 1..first + 31].iter().map(|s| s[0]).collect();
    (model, init, first, zs)
}

fn shifted(first: usize, j: usize) -> usize {
    first + 1 + j
}

/// Steps `other` and the bootstrap filter from the same particles and seed,
/// then continues both from the bootstrap output. Returns the worst weight
/// deviation and whether the resampled particles also agreed.
fn reduce_against_std<M, F>(model: &M, init: &[M::State], first: usize, zs: &[f64], mut other: F) -> (f64, bool)
where
    M: MultiObjectModel,
    M::State: PartialEq,
    F: FnMut(usize, &[M::State], f64, &mut SimRng) -> (Vec<f64>, Vec<M::State>),
{
    let moves = MoveConfig::default();
    let mut particles = init.to_vec();
    let mut worst: f64 = 0.0;
    let mut same = true;
    for (j, &z) in zs.iter().enumerate() {
        let step = shifted(first, j);
        let seed = 11 + j as u64;
        let s = bootstrap_step(model, step, &particles, z, &moves, &mut stream(seed, Stage::Filter)).unwrap();
        let (w, p) = other(step, &particles, z, &mut stream(seed, Stage::Filter));
        worst = worst.max(max_dev(&s.weights, &w));
        same &= s.particles == p;
        particles = s.particles;
    }
    (worst, same)
}

fn linear_setup() -> (LinearGaussian1d, Vec<f64>, Vec<f64>) {
    let model = LinearGaussian1d::new(0.95, 0.5, 1.0);
    let zs = reduction_data(&model, &0.0, 30, |x, rng| x + rng.sample::<f64, _>(StandardNormal));
    let mut rng = stream(6, Stage::Filter);
    let init: Vec<f64> = (0..400).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    (model, init, zs)
}

fn bernoulli_as_std<M: MultiObjectModel>(model: &M, n: usize) -> impl FnMut(usize, &[M::State], f64, &mut SimRng) -> (Vec<f64>, Vec<M::State>) + '_ {
    let cfg = BernoulliConfig { p_birth: 0.0, p_survive: 1.0, particles: n, birth_particles: 10, moves: MoveConfig::default() };
    move |step, particles, z, rng| {
        let belief = BernoulliBelief { r: 1.0, particles: particles.to_vec() };
        let pred = bernoulli_predict(model, step, &belief, &[z], &cfg, rng).unwrap();
        let upd = bernoulli_update(model, step, &pred, &[z], &[0.0], n, &cfg.moves, rng).unwrap();
        assert_eq!(upd.belief.r, 1.0);
        (upd.weights, upd.belief.particles)
    }
}

fn phd_as_std<M: MultiObjectModel>(model: &M, n: usize) -> impl FnMut(usize, &[M::State], f64, &mut SimRng) -> (Vec<f64>, Vec<M::State>) + '_ {
    let cfg = PhdConfig::from_settings(&FilterSettings { nu_b: 0.0, p_survive: 1.0, cluster_particles: n, ..Default::default() });
    move |step, particles, z, rng| {
        let system = PhdSystem { particles: particles.to_vec(), weights: vec![1.0 / n as f64; n] };
        let pred = phd_predict(model, step, &system, &[z], &cfg, rng);
        let out = phd_update_partition(model, step, &pred, &[z], &cfg, rng).unwrap();
        assert_eq!(out.clusters.len(), 1);
        let c = &out.clusters[0];
        // Particles whose likelihood underflows are tagged as missed and
        // dropped with weight (1 - p_D) w = 0.
        let mut w = vec![0.0; pred.particles.len()];
        let members = pred.particles.iter().enumerate().filter(|(_, x)| model.log_likelihood(step, z, x).exp() > 0.0).map(|(i, _)| i);
        for (i, wi) in members.zip(&c.weights) {
            w[i] = *wi;
        }
        (w, c.particles.clone())
    }
}

fn glmb_as_std<M: MultiObjectModel>(model: &M, n: usize) -> impl FnMut(usize, &[M::State], f64, &mut SimRng) -> (Vec<f64>, Vec<M::State>) + '_ {
    let cfg = GlmbConfig::from_settings(&FilterSettings { p_survive: 1.0, r_birth: 0.0, track_particles: n, ..Default::default() });
    move |step, particles, z, rng| {
        let label = Label { birth_step: 0, index: 0 };
        let density = GlmbDensity::single(vec![Track { label, particles: particles.to_vec() }]);
        let pred = glmb_predict(model, step, &density, &[z], &cfg, rng).unwrap();
        assert_eq!(pred.hypotheses.len(), 1);
        let scores = score_track(model, step, &pred.tracks[0].track, &[z], cfg.gate);
        let (w, _) = normalize_weighted(None, &scores.loglik[0]).unwrap();
        let (upd, _) = glmb_update(model, step, &pred, &[z], &cfg, rng).unwrap();
        assert_eq!(upd.hypotheses.len(), 1);
        assert_eq!(upd.hypotheses[0].tracks.len(), 1);
        (w, upd.hypotheses[0].tracks[0].particles.clone())
    }
}

fn reduction(name: &str, run: impl Fn() -> Vec<(f64, bool)>) {
    let results = run();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let same = results.iter().all(|r| r.1);
    assert!(verdict(name, worst < 1e-12, format!("max weight deviation {worst:.1e}, resampled particles identical: {same}")));
}

#[test]
fn bernoulli_reduces_to_standard_pf() {
    reduction("Bernoulli reduces to the standard PF", || {
        let (lm, li, lz) = linear_setup();
        let (bm, bi, bf, bz) = bearings_setup();
        vec![
            reduce_against_std(&lm, &li, 0, &lz, bernoulli_as_std(&lm, li.len())),
            reduce_against_std(&bm, &bi, bf, &bz, bernoulli_as_std(&bm, bi.len())),
        ]
    });
}

#[test]
fn phd_reduces_to_standard_pf() {
    reduction("PHD reduces to the standard PF", || {
        let (lm, li, lz) = linear_setup();
        let (bm, bi, bf, bz) = bearings_setup();
        vec![
            reduce_against_std(&lm, &li, 0, &lz, phd_as_std(&lm, li.len())),
            reduce_against_std(&bm, &bi, bf, &bz, phd_as_std(&bm, bi.len())),
        ]
    });
}

#[test]
fn glmb_reduces_to_standard_pf() {
    reduction("GLMB reduces to the standard PF", || {
        let (lm, li, lz) = linear_setup();
        let (bm, bi, bf, bz) = bearings_setup();
        vec![
            reduce_against_std(&lm, &li, 0, &lz, glmb_as_std(&lm, li.len())),
            reduce_against_std(&bm, &bi, bf, &bz, glmb_as_std(&bm, bi.len())),
        ]
    });
}

// ---------------------------------------------------- statistical checks

/// Exact Kalman filter for the scalar model, starting from `N(0, p0)`.
struct Kalman {
    a: f64,
    q: f64,
    r: f64,
}

impl Kalman {
    /// Posterior means, variances and the log-likelihood of `zs`.
    fn run(&self, p0: f64, zs: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let (mut m, mut p) = (0.0, p0);
        let mut means = Vec::new();
        let mut vars = Vec::new();
        let mut ll = 0.0;
        for &z in zs {
            let mp = self.a * m;
            let pp = self.a * self.a * p + self.q;
            let s = pp + self.r;
            ll += -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + (z - mp).powi(2) / s);
            let k = pp / s;
            m = mp + k * (z - mp);
            p = (1.0 - k) * pp;
            means.push(m);
            vars.push(p);
        }
        (means, vars, ll)
    }
}

fn linear_data(model: &LinearGaussian1d, p0: f64, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Stage::Simulation);
    let mut x = p0.sqrt() * rng.sample::<f64, _>(StandardNormal);
    (0..steps)
        .map(|_| {
            x = model.a * x + model.q_std * rng.sample::<f64, _>(StandardNormal);
            x + model.r_std * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

#[test]
fn bootstrap_pf_matches_kalman_mean() {
    let model = LinearGaussian1d::new(0.9, 1.0, 1.0);
    let kf = Kalman { a: 0.9, q: 1.0, r: 1.0 };
    let (p0, steps, n, runs) = (4.0, 10, 1000, 100);
    let mut sq = vec![0.0; steps];
    let mut post_var = vec![0.0; steps];
    for run in 0..runs {
        let zs = linear_data(&model, p0, steps, 1000 + run);
        let (means, vars, _) = kf.run(p0, &zs);
        let mut rng = stream(2000 + run, Stage::Filter);
        let mut particles: Vec<f64> = (0..n).map(|_| p0.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        for (k, &z) in zs.iter().enumerate() {
            let s = bootstrap_step(&model, k + 1, &particles, z, &MoveConfig::default(), &mut rng).unwrap();
            let m: f64 = s.predicted.iter().zip(&s.weights).map(|(x, w)| x * w).sum();
            sq[k] += (m - means[k]).powi(2) / runs as f64;
            post_var[k] = vars[k];
            particles = s.particles;
        }
    }
    let ratio = (0..steps).map(|k| sq[k].sqrt() / (post_var[k].sqrt() / (n as f64).sqrt())).fold(0.0, f64::max);
    assert!(verdict(
        "PF posterior mean vs Kalman",
        ratio < 4.0,
        format!("worst RMS error over {runs} runs = {ratio:.2} posterior std / sqrt(N), N={n}")
    ));
}

#[test]
fn pf_loglik_matches_kalman() {
    let model = LinearGaussian1d::new(0.9, 1.0, 1.0);
    let kf = Kalman { a: 0.9, q: 1.0, r: 1.0 };
    let p0 = 4.0;
    let zs = linear_data(&model, p0, 25, 77);
    let (_, _, exact) = kf.run(p0, &zs);
    let est: Vec<f64> = (0..50)
        .map(|run| {
            let mut rng = stream(3000 + run, Stage::Filter);
            let init: Vec<f64> = (0..1000).map(|_| p0.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
            pf_loglik(&model, &init, 1, &zs, &MoveConfig::default(), &mut rng).unwrap().loglik
        })
        .collect();
    let mean = est.iter().sum::<f64>() / est.len() as f64;
    let sd = (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
    let dev = (mean - exact).abs();
    assert!(verdict(
        "pf_loglik vs Kalman",
        dev <= 3.0 * sd,
        format!("exact {exact:.4}, PF mean {mean:.4}, sd {sd:.4}, |diff| = {:.2} sd", dev / sd)
    ));
}

// ------------------------------------------------------------- demo trends

const DEMO_RUNS: usize = 50;
const DEMO_PARTICLES: usize = 2000;

fn demo_settings() -> FilterSettings {
    FilterSettings {
        particles: DEMO_PARTICLES,
        birth_particles: DEMO_PARTICLES / 2,
        cluster_particles: DEMO_PARTICLES,
        track_particles: DEMO_PARTICLES,
        ..Default::default()
    }
}

fn demo(cfg: &ScenarioConfig, filter: &str) -> MonteCarloResult {
    let registry = FilterRegistry::<BearingsModel>::with_builtin();
    let mut opts = McOptions::new(filter, demo_settings());
    opts.runs = DEMO_RUNS;
    opts.base_seed = 500;
    opts.jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let out = run_monte_carlo(cfg, &registry, &opts).unwrap();
    assert!(out.failures().is_empty(), "{filter}: {:?}", out.failures());
    out
}

fn single_runs() -> &'static (ScenarioConfig, MonteCarloResult, MonteCarloResult) {
    static CELL: OnceLock<(ScenarioConfig, MonteCarloResult, MonteCarloResult)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = paper_scenario(Variant::Single);
        let bern = demo(&cfg, "bernoulli");
        let std = demo(&cfg, "std");
        (cfg, bern, std)
    })
}

fn mean_over(series: &[f64], cfg: &ScenarioConfig, lo: f64, hi: f64) -> f64 {
    let v: Vec<f64> =
        series.iter().enumerate().filter(|(k, x)| (lo..=hi).contains(&cfg.time(*k)) && x.is_finite()).map(|(_, x)| *x).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn bernoulli_existence_trend() {
    let (cfg, bern, _) = single_runs();
    let r = bern.series("existence");
    let target = &cfg.targets[0];
    let birth = (target.birth_s / cfg.dt_s).round() as usize;
    let death = (target.death_s / cfg.dt_s).round() as usize;
    let before = r[..birth].iter().all(|&x| x < 0.2);
    let rise = (birth..=birth + 10).find(|&k| r[k] > 0.8);
    let fall = (death + 1..=(death + 15).min(r.len() - 1)).find(|&k| r[k] < 0.2);
    let ok = before && rise.is_some() && fall.is_some();
    assert!(verdict(
        "Bernoulli existence trend",
        ok,
        format!(
            "max r before birth {:.3}; r > 0.8 at {:?} steps after birth; r < 0.2 at {:?} steps after death",
            r[..birth].iter().copied().fold(0.0, f64::max),
            rise.map(|k| k - birth),
            fall.map(|k| k - death)
        )
    ));
}

#[test]
fn bernoulli_rms_close_to_ideal_pf() {
    let (cfg, bern, std) = single_runs();
    let b = mean_over(&bern.series("rms_pos"), cfg, 1000.0, 2400.0);
    let s = mean_over(&std.series("rms_pos"), cfg, 1000.0, 2400.0);
    assert!(verdict(
        "Bernoulli RMS vs ideal standard PF",
        b <= 1.5 * s,
        format!("mean position RMS over 1000-2400 s: Bernoulli {b:.1} m, ideal PF {s:.1} m, ratio {:.2}", b / s)
    ));
}

#[test]
fn phd_partition_beats_plu() {
    let cfg = paper_scenario(Variant::FourTarget);
    let part = demo(&cfg, "phd");
    let plu = demo(&cfg, "phd-plu");
    let a = mean_over(&part.series("ospa"), &cfg, 0.0, cfg.duration_s);
    let b = mean_over(&plu.series("ospa"), &cfg, 0.0, cfg.duration_s);
    assert!(verdict("PHD partition vs PLU", a < b, format!("mean OSPA partition {a:.1} m, PLU {b:.1} m")));
}

#[test]
fn glmb_not_worse_than_lm_bernoulli() {
    let cfg = paper_scenario(Variant::FourTarget);
    let glmb = demo(&cfg, "glmb");
    let lm = demo(&cfg, "lm-bernoulli");
    let g = glmb.series("ospa");
    let l = lm.series("ospa");
    let gc = mean_over(&g, &cfg, 1400.0, 1900.0);
    let lc = mean_over(&l, &cfg, 1400.0, 1900.0);
    let crossing = verdict("GLMB vs LM-Bernoulli while crossing", gc <= lc, format!("mean OSPA 1400-1900 s: GLMB {gc:.1} m, LM {lc:.1} m"));
    let gs = mean_over(&g, &cfg, 2000.0, 2400.0);
    let ls = mean_over(&l, &cfg, 2000.0, 2400.0);
    let rel = (gs - ls).abs() / ls;
    let separated =
        verdict("GLMB vs LM-Bernoulli when separated", rel <= 0.1, format!("mean OSPA 2000-2400 s: GLMB {gs:.1} m, LM {ls:.1} m, {:.1}% apart", 100.0 * rel));
    assert!(crossing && separated);
}

// -------------------------------------------------------------- calibration

#[test]
fn sigma_w_calibration_coverage() {
    let cfg = paper_scenario(Variant::Single);
    let truth_deg = cfg.sensor.sigma_w_deg;
    let model = ideal(&cfg.model().unwrap());
    let settings = FilterSettings { particles: 500, ..Default::default() };
    let cal = SigmaWCalibration { iterations: 300, proposal_deg: 0.03, ..Default::default() };
    let trials = 20;
    let mut hits = 0;
    for trial in 0..trials {
        let sim = simulate(&cfg, &model, &mut stream(9000 + trial, Stage::Simulation));
        let first = sim.scans.iter().position(|s| !s.is_empty()).unwrap();
        let scans = &sim.scans[..first + 60];
        let res = calibrate_sigma_w(&model, scans, Backend::Pf, &settings, &cal, &mut stream(9000 + trial, Stage::Calibration)).unwrap();
        let (lo, hi) = res.interval_deg;
        if lo <= truth_deg && truth_deg <= hi {
            hits += 1;
        }
    }
    assert!(verdict("sigma_w calibration coverage", hits >= 14, format!("{hits}/{trials} 90% intervals contain {truth_deg} deg")));
}
