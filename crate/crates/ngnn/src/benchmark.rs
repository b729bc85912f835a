//! Parameter-count and runtime scaling study across propagation variants.
//!
//! Complete unit-weight graphs of growing size are scored and differentiated
//! once per repetition; parameter counts come from both the closed-form
//! formula and a structural audit of instantiated tensors. Growth orders are
//! asserted on the exact counts — wall times are recorded for reporting but
//! are hardware-dependent and only weakly comparable.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::corpus::{Item, Outfit, Split};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureStore};
use crate::graph::{extract_subgraph, FashionGraph};
use crate::model::{
    channel_forward, count_params, edge_term_params, FeatureSet, ModelConfig, ModelParams,
    Modality, ParamBinder, Variant,
};
use crate::rng::Rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: Variant,
    pub nodes: usize,
    pub edges: usize,
    /// Closed-form parameter count.
    pub param_count: usize,
    /// Count audited from the instantiated tensors.
    pub audited_param_count: usize,
    /// The edge-transform share of the count (zero unless edge-wise).
    pub edge_term_count: usize,
    /// Median wall time of one forward+backward pass.
    pub median_seconds: f64,
    pub repetitions: usize,
    pub timer_note: String,
}

/// Time forward+backward passes over complete graphs of `n_range` nodes for
/// all three variants. At least 5 repetitions; two warmup runs per point are
/// discarded.
pub fn run_bench(
    n_range: std::ops::RangeInclusive<usize>,
    latent_dim: usize,
    feature_dim: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    if repetitions < 5 {
        return Err(Error::Config(format!(
            "need at least 5 repetitions, got {repetitions}"
        )));
    }
    if *n_range.start() < 2 {
        return Err(Error::Config("benchmark graphs start at 2 nodes".into()));
    }
    let timer_note =
        format!("monotonic clock, 2 warmup runs discarded, median of {repetitions}");

    let mut records = Vec::new();
    for n in n_range {
        let graph = FashionGraph::complete_unit(n);

        // One outfit covering every node, with seeded features.
        let mut feat_rng = Rng::for_substream(seed, "bench/features", n as u64);
        let mut store = FeatureStore::new(FeatureKind::Visual, feature_dim);
        let mut items = Vec::with_capacity(n);
        for c in 0..n {
            let id = format!("bench-{c}");
            store.insert(&id, (0..feature_dim).map(|_| feat_rng.normal()).collect())?;
            items.push(Item {
                item_id: id.clone(),
                category: c,
                title: String::new(),
                visual_key: id.clone(),
                textual_key: id,
            });
        }
        let outfit = Outfit {
            outfit_id: format!("bench-n{n}"),
            split: Split::Test,
            items,
        };
        let subgraph = extract_subgraph(&outfit, &graph)?;
        let features = FeatureSet::visual_only(&store);

        for variant in [Variant::Ngnn, Variant::Ggnn, Variant::Egnn] {
            let config = ModelConfig {
                latent_dim,
                steps: 3,
                variant,
                modality: Modality::Visual,
                fusion_weight: 0.2,
            };
            let params = ModelParams::init(
                config,
                &graph,
                &[(FeatureKind::Visual, feature_dim)],
                seed ^ n as u64,
            )?;

            let pass = || -> Result<f64> {
                let started = Instant::now();
                let mut tape = Tape::new();
                let mut binder = ParamBinder::new(&params);
                let vars = channel_forward(
                    &mut tape,
                    &mut binder,
                    &graph,
                    &subgraph,
                    &outfit,
                    &features,
                    FeatureKind::Visual,
                    &config,
                )?;
                let grads = tape.backward(vars.score)?;
                let _ = binder.collect_grads(&tape, &grads);
                Ok(started.elapsed().as_secs_f64())
            };

            pass()?;
            pass()?;
            let mut times = Vec::with_capacity(repetitions);
            for _ in 0..repetitions {
                times.push(pass()?);
            }
            times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
            let median = if times.len() % 2 == 1 {
                times[times.len() / 2]
            } else {
                0.5 * (times[times.len() / 2 - 1] + times[times.len() / 2])
            };

            records.push(BenchRecord {
                variant,
                nodes: n,
                edges: graph.edge_count(),
                param_count: count_params(
                    variant,
                    n,
                    graph.edge_count(),
                    latent_dim,
                    feature_dim,
                ),
                audited_param_count: params.count(),
                edge_term_count: edge_term_params(variant, graph.edge_count(), latent_dim),
                median_seconds: median,
                repetitions,
                timer_note: timer_note.clone(),
            });
        }
    }
    Ok(records)
}

/// A least-squares polynomial fit and its coefficient of determination.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    /// Coefficients from the constant term up.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingVerdict {
    Linear,
    Quadratic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    pub linear: FitResult,
    pub quadratic: FitResult,
    pub verdict: ScalingVerdict,
}

/// Solve a small linear system in place by Gaussian elimination with partial
/// pivoting. `a` is row-major n x n, `b` length n.
fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .expect("finite")
            })
            .expect("non-empty");
        if a[pivot * n + col].abs() < 1e-12 {
            return Err(Error::Fit("singular normal equations".into()));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let factor = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<FitResult> {
    let terms = degree + 1;
    let mut normal = vec![0.0; terms * terms];
    let mut rhs = vec![0.0; terms];
    for (&x, &y) in xs.iter().zip(ys) {
        let mut powers = vec![1.0; 2 * terms - 1];
        for p in 1..powers.len() {
            powers[p] = powers[p - 1] * x;
        }
        for r in 0..terms {
            for c in 0..terms {
                normal[r * terms + c] += powers[r + c];
            }
            rhs[r] += powers[r] * y;
        }
    }
    let coefficients = solve(normal, rhs)?;

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let mut pred = 0.0;
            let mut pow = 1.0;
            for &c in &coefficients {
                pred += c * pow;
                pow *= x;
            }
            (y - pred) * (y - pred)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(FitResult {
        coefficients,
        r_squared,
    })
}

/// Fit a series against n and n^2 and pick the better-explaining model.
///
/// The quadratic fit can never explain less than the linear one (it nests
/// it), so the verdict goes to quadratic only when it improves R^2 beyond
/// rounding noise.
pub fn fit_scaling(ns: &[usize], values: &[f64]) -> Result<ScalingFit> {
    let mut distinct: Vec<usize> = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 distinct sizes, got {}",
            distinct.len()
        )));
    }
    if ns.len() != values.len() {
        return Err(Error::Fit("sizes and values must align".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let linear = polyfit(&xs, values, 1)?;
    let quadratic = polyfit(&xs, values, 2)?;
    let verdict = if quadratic.r_squared - linear.r_squared > 1e-6 {
        ScalingVerdict::Quadratic
    } else {
        ScalingVerdict::Linear
    };
    Ok(ScalingFit {
        linear,
        quadratic,
        verdict,
    })
}

/// Delimited-text export of benchmark records.
pub fn export_records<W: Write>(mut w: W, records: &[BenchRecord]) -> Result<()> {
    writeln!(
        w,
        "# variant\tnodes\tedges\tparam_count\tedge_term_count\tmedian_seconds\trepetitions"
    )?;
    for r in records {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{:.9e}\t{}",
            r.variant, r.nodes, r.edges, r.param_count, r.edge_term_count, r.median_seconds,
            r.repetitions
        )?;
    }
    Ok(())
}

/// Gnuplot-friendly export: one indexed block per variant with
/// `n param_count median_seconds` columns.
pub fn export_gnuplot<W: Write>(mut w: W, records: &[BenchRecord]) -> Result<()> {
    for variant in [Variant::Ngnn, Variant::Ggnn, Variant::Egnn] {
        writeln!(w, "# variant: {variant}")?;
        writeln!(w, "# nodes\tparam_count\tmedian_seconds")?;
        for r in records.iter().filter(|r| r.variant == variant) {
            writeln!(w, "{}\t{}\t{:.9e}", r.nodes, r.param_count, r.median_seconds)?;
        }
        writeln!(w)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_linear_series_votes_linear_with_perfect_fit() {
        let ns: Vec<usize> = (2..=12).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| 3.0 + 2.5 * n as f64).collect();
        let fit = fit_scaling(&ns, &ys).unwrap();
        assert_eq!(fit.verdict, ScalingVerdict::Linear);
        assert!(fit.linear.r_squared > 0.999999);
    }

    #[test]
    fn exactly_quadratic_series_votes_quadratic() {
        let ns: Vec<usize> = (2..=12).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| 1.0 + 0.5 * (n * n) as f64).collect();
        let fit = fit_scaling(&ns, &ys).unwrap();
        assert_eq!(fit.verdict, ScalingVerdict::Quadratic);
        assert!(fit.quadratic.r_squared > 0.999999);
    }

    #[test]
    fn too_few_sizes_is_a_fit_error() {
        let err = fit_scaling(&[2, 3, 4, 4], &[1.0, 2.0, 3.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::Fit(_)), "{err}");
    }

    #[test]
    fn closed_form_counts_vote_their_expected_orders() {
        let ns: Vec<usize> = (2..=30).collect();
        let series = |variant: Variant| -> Vec<f64> {
            ns.iter()
                .map(|&n| count_params(variant, n, n * (n - 1), 12, 32) as f64)
                .collect()
        };
        assert_eq!(
            fit_scaling(&ns, &series(Variant::Ngnn)).unwrap().verdict,
            ScalingVerdict::Linear
        );
        assert_eq!(
            fit_scaling(&ns, &series(Variant::Ggnn)).unwrap().verdict,
            ScalingVerdict::Linear
        );
        assert_eq!(
            fit_scaling(&ns, &series(Variant::Egnn)).unwrap().verdict,
            ScalingVerdict::Quadratic
        );
    }

    #[test]
    fn edge_term_quadruples_from_15_to_30_nodes() {
        let d = 12;
        let term = |n: usize| edge_term_params(Variant::Egnn, n * (n - 1), d) as f64;
        let ratio = term(30) / term(15);
        assert!((ratio - 4.0).abs() / 4.0 < 0.05, "ratio {ratio}");
    }

    #[test]
    fn bench_runs_and_audits_counts() {
        let records = run_bench(2..=6, 4, 6, 5, 1).unwrap();
        assert_eq!(records.len(), 5 * 3);
        for r in &records {
            assert_eq!(r.param_count, r.audited_param_count, "{:?} n={}", r.variant, r.nodes);
            assert!(r.median_seconds > 0.0);
            assert_eq!(r.edges, r.nodes * (r.nodes - 1));
        }
    }

    #[test]
    fn too_few_repetitions_rejected() {
        assert!(run_bench(2..=4, 4, 6, 3, 1).is_err());
    }

    #[test]
    fn exports_are_well_formed() {
        let records = run_bench(2..=6, 3, 4, 5, 2).unwrap();
        let mut tsv = Vec::new();
        export_records(&mut tsv, &records).unwrap();
        let text = String::from_utf8(tsv).unwrap();
        assert_eq!(text.lines().count(), 1 + records.len());

        let mut dat = Vec::new();
        export_gnuplot(&mut dat, &records).unwrap();
        let text = String::from_utf8(dat).unwrap();
        assert!(text.contains("# variant: ngnn"));
        assert!(text.contains("# variant: egnn"));
    }
}
