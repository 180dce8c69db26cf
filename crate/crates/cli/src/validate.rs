//! Fast self-check suite behind `selfcorrect validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selfcorrect::bounds::{
    admissible, admissible_threshold, contraction_factor, StabilityConstants,
};
use selfcorrect::correction::{match_pointwise, mixture_density, Matching};
use selfcorrect::metrics::{empirical_w2, param_distance};
use selfcorrect::model::{from_param_vector, sample_gaussian, to_param_vector, GaussianDensity};
use selfcorrect::{Dataset, Gamma, GaussianParams, Result as CoreResult};

use crate::csvio::format_float;

pub type W2Fn = fn(&GaussianParams, &GaussianParams) -> CoreResult<f64>;

/// Replaceable pieces, so that the suite itself can be tested against
/// deliberately broken implementations.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub gaussian_w2: W2Fn,
}

impl Default for Hooks {
    fn default() -> Self {
        Self {
            gaussian_w2: selfcorrect::metrics::gaussian_w2,
        }
    }
}

type Check = fn(&Hooks) -> Result<(), String>;

pub const PROPERTIES: [(&str, Check); 14] = [
    ("w2_identity", w2_identity),
    ("w2_nonnegative", w2_nonnegative),
    ("w2_symmetry", w2_symmetry),
    ("w2_triangle", w2_triangle),
    ("w2_mean_shift", w2_mean_shift),
    ("w2_one_dimensional", w2_one_dimensional),
    ("w2_empirical_oracle", w2_empirical_oracle),
    ("param_distance_metric", param_distance_metric),
    ("param_vector_round_trip", param_vector_round_trip),
    ("mixture_normalization", mixture_normalization),
    ("mixture_pointwise_inequality", mixture_pointwise_inequality),
    ("matching_brute_force", matching_brute_force),
    (
        "admissible_implies_contraction",
        admissible_implies_contraction,
    ),
    ("csv_float_round_trip", csv_float_round_trip),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub failure: Option<String>,
}

pub fn run_all(hooks: &Hooks) -> Vec<Outcome> {
    PROPERTIES
        .iter()
        .map(|(name, check)| Outcome {
            name,
            failure: check(hooks).err(),
        })
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> GaussianParams {
    let mean: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let a: Vec<f64> = (0..dim * dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            cov[i * dim + j] = (0..dim)
                .map(|k| a[i * dim + k] * a[j * dim + k])
                .sum::<f64>()
                + if i == j { 0.1 } else { 0.0 };
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[i * dim + j] = cov[j * dim + i];
        }
    }
    GaussianParams::from_slices(&mean, &cov).expect("SPD by construction")
}

fn triples() -> Vec<[GaussianParams; 3]> {
    let mut r = rng(1);
    (0..100)
        .map(|k| {
            let d = 1 + k % 3;
            [
                random_gaussian(&mut r, d),
                random_gaussian(&mut r, d),
                random_gaussian(&mut r, d),
            ]
        })
        .collect()
}

fn w2(h: &Hooks, p: &GaussianParams, q: &GaussianParams) -> Result<f64, String> {
    (h.gaussian_w2)(p, q).map_err(|e| e.to_string())
}

fn w2_identity(h: &Hooks) -> Result<(), String> {
    for [p, ..] in triples() {
        let v = w2(h, &p, &p)?;
        if v != 0.0 {
            return Err(format!("W2(p, p) = {v}"));
        }
    }
    Ok(())
}

fn w2_nonnegative(h: &Hooks) -> Result<(), String> {
    for [p, q, _] in triples() {
        let v = w2(h, &p, &q)?;
        if v.is_nan() || v < 0.0 {
            return Err(format!("W2 = {v}"));
        }
    }
    Ok(())
}

fn w2_symmetry(h: &Hooks) -> Result<(), String> {
    for [p, q, _] in triples() {
        let (a, b) = (w2(h, &p, &q)?, w2(h, &q, &p)?);
        if (a - b).abs() > 1e-9 {
            return Err(format!("{a} vs {b}"));
        }
    }
    Ok(())
}

fn w2_triangle(h: &Hooks) -> Result<(), String> {
    for [p, q, r] in triples() {
        let (pq, qr, pr) = (w2(h, &p, &q)?, w2(h, &q, &r)?, w2(h, &p, &r)?);
        if pr > pq + qr + 1e-9 {
            return Err(format!("{pr} > {pq} + {qr}"));
        }
    }
    Ok(())
}

fn w2_mean_shift(h: &Hooks) -> Result<(), String> {
    let p = GaussianParams::standard(2).map_err(|e| e.to_string())?;
    let q = GaussianParams::isotropic(&[3.0, 4.0], 1.0).map_err(|e| e.to_string())?;
    let v = w2(h, &p, &q)?;
    if (v - 5.0).abs() > 1e-12 {
        return Err(format!("expected 5, got {v}"));
    }
    Ok(())
}

fn w2_one_dimensional(h: &Hooks) -> Result<(), String> {
    for (s1, s2) in [(0.5, 2.0), (1.0, 1.0), (3.0, 0.1)] {
        let p = GaussianParams::isotropic(&[0.0], s1 * s1).map_err(|e| e.to_string())?;
        let q = GaussianParams::isotropic(&[0.0], s2 * s2).map_err(|e| e.to_string())?;
        let v = w2(h, &p, &q)?;
        if (v - (s1 - s2).abs()).abs() > 1e-12 {
            return Err(format!("sigma {s1} vs {s2}: {v}"));
        }
    }
    Ok(())
}

fn w2_empirical_oracle(h: &Hooks) -> Result<(), String> {
    let mut r = rng(2);
    for _ in 0..5 {
        let p = GaussianParams::isotropic(&[r.random_range(-2.0..2.0)], r.random_range(0.25..4.0))
            .map_err(|e| e.to_string())?;
        let q = GaussianParams::isotropic(&[r.random_range(-2.0..2.0)], r.random_range(0.25..4.0))
            .map_err(|e| e.to_string())?;
        // Both clouds reuse one seed, so they share the underlying normals.
        let seed: u64 = r.random();
        let a = sample_gaussian(&p, 512, &mut rng(seed)).map_err(|e| e.to_string())?;
        let b = sample_gaussian(&q, 512, &mut rng(seed)).map_err(|e| e.to_string())?;
        let emp = empirical_w2(&a, &b).map_err(|e| e.to_string())?;
        let exact = w2(h, &p, &q)?;
        if (emp - exact).abs() > 0.15 * exact {
            return Err(format!("empirical {emp} vs closed form {exact}"));
        }
    }
    Ok(())
}

fn param_distance_metric(_: &Hooks) -> Result<(), String> {
    for [p, q, r] in triples() {
        let d = |a: &GaussianParams, b: &GaussianParams| {
            param_distance(a, b).map_err(|e| e.to_string())
        };
        let (pq, qp, qr, pr) = (d(&p, &q)?, d(&q, &p)?, d(&q, &r)?, d(&p, &r)?);
        if pq != qp || pr > pq + qr + 1e-12 || d(&p, &p)? != 0.0 {
            return Err(format!("{pq} {qp} {qr} {pr}"));
        }
    }
    Ok(())
}

fn param_vector_round_trip(_: &Hooks) -> Result<(), String> {
    for [p, ..] in triples() {
        let back = from_param_vector(&to_param_vector(&p)).map_err(|e| e.to_string())?;
        if back != p {
            return Err(format!("{p:?} became {back:?}"));
        }
    }
    Ok(())
}

fn trapezoid(
    f: impl Fn(f64) -> Result<f64, String>,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<f64, String> {
    let h = (hi - lo) / steps as f64;
    let mut sum = 0.5 * (f(lo)? + f(hi)?);
    for i in 1..steps {
        sum += f(lo + i as f64 * h)?;
    }
    Ok(sum * h)
}

fn mixture_pair() -> (GaussianParams, GaussianParams) {
    (
        GaussianParams::isotropic(&[0.7], 1.3).expect("valid"),
        GaussianParams::standard(1).expect("valid"),
    )
}

fn mixture_normalization(_: &Hooks) -> Result<(), String> {
    let (p, star) = mixture_pair();
    for g in [0.0, 0.5, 1.0, 4.0] {
        let mass = trapezoid(
            |x| mixture_density(&p, &star, Gamma::Finite(g), &[x]).map_err(|e| e.to_string()),
            -10.0,
            10.0,
            20_000,
        )?;
        if (mass - 1.0).abs() > 1e-4 {
            return Err(format!("gamma {g}: mass {mass}"));
        }
    }
    Ok(())
}

fn mixture_pointwise_inequality(_: &Hooks) -> Result<(), String> {
    let (p, star) = mixture_pair();
    let density = |q: &GaussianParams, x: f64| {
        GaussianDensity::new(q)
            .and_then(|d| d.pdf(&[x]))
            .map_err(|e| e.to_string())
    };
    for (g, closer_to_target) in [(2.0, true), (4.0, true), (0.25, false), (0.5, false)] {
        for i in 0..100 {
            let x = -5.0 + 10.0 * i as f64 / 99.0;
            let mix =
                mixture_density(&p, &star, Gamma::Finite(g), &[x]).map_err(|e| e.to_string())?;
            let (to_target, to_model) = (
                (mix - density(&star, x)?).abs(),
                (mix - density(&p, x)?).abs(),
            );
            let holds = if closer_to_target {
                to_target <= to_model
            } else {
                to_target >= to_model
            };
            if !holds {
                return Err(format!("gamma {g}, x {x}: {to_target} vs {to_model}"));
            }
        }
    }
    Ok(())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                prefix.push(j);
                rec(prefix, used, out);
                prefix.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn matching_brute_force(_: &Hooks) -> Result<(), String> {
    let mut r = rng(3);
    for k in 0..20 {
        let n = 1 + k % 8;
        let d = 1 + k % 3;
        let cloud = |r: &mut ChaCha8Rng| {
            // Coarse grid values create ties.
            let coords = (0..n * d)
                .map(|_| r.random_range(0..5) as f64 * 0.5)
                .collect();
            Dataset::from_flat(d, coords).expect("finite")
        };
        let (src, dst) = (cloud(&mut r), cloud(&mut r));
        let got = match_pointwise(&src, &dst).map_err(|e| e.to_string())?;
        let best = permutations(n)
            .into_iter()
            .map(|p| Matching::new(p).expect("permutation").cost(&src, &dst))
            .fold(f64::INFINITY, f64::min);
        let cost = got.cost(&src, &dst);
        if (cost - best).abs() > 1e-9 {
            return Err(format!("n={n}: {cost} vs brute force {best}"));
        }
    }
    Ok(())
}

fn admissible_implies_contraction(_: &Hooks) -> Result<(), String> {
    let mut r = rng(4);
    for _ in 0..10 {
        let c = StabilityConstants::new(
            r.random_range(0.1..5.0),
            r.random_range(0.0..3.0),
            r.random_range(0.0..0.5),
            0.0,
            1.0,
            2.0,
        )
        .map_err(|e| e.to_string())?;
        for i in 0..50 {
            for j in 0..50 {
                let lambda = 1.2 * i as f64 / 49.0;
                let g = if j == 49 {
                    Gamma::Infinite
                } else {
                    Gamma::Finite(0.2 * j as f64)
                };
                if admissible(lambda, g, &c)
                    && !contraction_factor(lambda, g, &c).is_some_and(|k| k < 1.0)
                {
                    return Err(format!("lambda {lambda}, gamma {g}"));
                }
            }
        }
    }
    let c = StabilityConstants::new(1.0, 1.0, 0.0, 0.0, 1.0, 2.0).map_err(|e| e.to_string())?;
    let (zero, inf) = (
        admissible_threshold(Gamma::ZERO, &c),
        admissible_threshold(Gamma::Infinite, &c),
    );
    if zero * 2.0 != inf {
        return Err(format!("thresholds {zero} and {inf}"));
    }
    Ok(())
}

fn csv_float_round_trip(_: &Hooks) -> Result<(), String> {
    let mut r = rng(5);
    for _ in 0..10_000 {
        let v = f64::from_bits(r.random::<u64>());
        if !v.is_finite() {
            continue;
        }
        let s = format_float(v);
        let back: f64 = s.parse().map_err(|_| format!("cannot parse {s}"))?;
        if back.to_bits() != v.to_bits() {
            return Err(format!("{v:e} -> {s} -> {back:e}"));
        }
    }
    Ok(())
}
