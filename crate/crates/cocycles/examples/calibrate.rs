// Scratch calibration for acceptance protocol sizing. Not part of the library.
use std::time::Instant;

use cocycles::benchgen::{AblationLaw, DesignSpec};
use cocycles::causal::{impute, Target};
use cocycles::cmmd::{CvConfig, TrainConfig};
use cocycles::harness::config::{ExperimentConfig, Method};
use cocycles::harness::metrics::ks_distance;
use cocycles::harness::runner::{fit_method, run_experiment};
use cocycles::ot::{chain_nodes, SeqOtModel};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "cv".into());
    match mode.as_str() {
        "cv" => cv_ablation(),
        "ex1" => example1(),
        "chain" => chain(),
        _ => eprintln!("unknown mode"),
    }
}

fn cv_ablation() {
    for law in [AblationLaw::Gaussian, AblationLaw::Cauchy, AblationLaw::InverseGamma] {
        for method in [Method::CocycleU, Method::MlGaussian] {
            let cfg = ExperimentConfig {
                design: DesignSpec::LinearAblation { law, n: 1000, seed: 0 },
                methods: vec![method],
                hierarchy: ["linear", "additive-mlp", "masked-affine", "spline"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                train: TrainConfig {
                    batch_size: Some(64),
                    epochs: 150,
                    learning_rate: 0.01,
                    seed: 0,
                },
                cv: CvConfig { folds: 2 },
                trials: 4,
                seed_base: 100,
            };
            let t0 = Instant::now();
            let rep = run_experiment(&cfg).unwrap();
            let agg = &rep.aggregates[0];
            println!(
                "{:?} {:12}: sel={:?} rmse={:?} ks={:?} fails={} ({:.0}s, {:.0}s/trial)",
                law,
                agg.method,
                agg.selection_counts,
                agg.cf_rmse_mean.map(|v| (v * 1000.0).round() / 1000.0),
                agg.ks_int_mean.map(|v| (v * 1000.0).round() / 1000.0),
                agg.trials_failed,
                t0.elapsed().as_secs_f64(),
                t0.elapsed().as_secs_f64() / 4.0,
            );
        }
    }
}

fn example1() {
    for (design, label) in [
        (DesignSpec::Example1Mixed { n: 2000, seed: 11 }, "mixed"),
        (DesignSpec::Example1Binary { n: 2000, seed: 12 }, "binary"),
    ] {
        for (method, epochs, lr) in [
            (Method::CocycleV, 300, 0.01),
            (Method::MlGaussian, 400, 0.001),
        ] {
            let cfg = ExperimentConfig {
                design: design.clone(),
                methods: vec![method],
                hierarchy: vec!["spline".into()],
                train: TrainConfig {
                    batch_size: Some(64),
                    epochs,
                    learning_rate: lr,
                    seed: 0,
                },
                cv: CvConfig { folds: 2 },
                trials: 1,
                seed_base: 0,
            };
            let t0 = Instant::now();
            let (data, truth) = cocycles::benchgen::generate(&cfg.design).unwrap();
            let fitted = fit_method(&cfg, &data, method, 1234);
            match fitted {
                Ok((model, _)) => {
                    let panel =
                        impute(&model, &data, &[Target::level(0.0), Target::level(1.0)]).unwrap();
                    let eff = cocycles::causal::effects(&panel, 1, 0);
                    let true_eff = truth.effect_samples.clone().unwrap();
                    let ks = ks_distance(&eff, &true_eff);
                    let lo = eff.iter().filter(|e| (e[0] + 1.0).abs() < 0.25).count() as f64
                        / eff.len() as f64;
                    let hi = eff.iter().filter(|e| (e[0] - 1.0).abs() < 0.25).count() as f64
                        / eff.len() as f64;
                    println!(
                        "{label} {:?}: ks_effect={ks:.3} atom(-1)={lo:.3} atom(+1)={hi:.3} ({:.0}s)",
                        method,
                        t0.elapsed().as_secs_f64()
                    );
                }
                Err(e) => println!("{label} {:?}: FAILED {e} ({:.0}s)", method, t0.elapsed().as_secs_f64()),
            }
        }
    }
}

fn chain() {
    for rho in [0.0, 0.4, 0.8] {
        let design = DesignSpec::Chain { rho, n: 1500, seed: 21 };
        let (data, _) = cocycles::benchgen::generate(&design).unwrap();
        // seq-OT shift
        let t0 = Instant::now();
        let m = SeqOtModel::fit(chain_nodes(), &data).unwrap();
        let mut shift = 0.0;
        let mut count = 0.0;
        for i in (0..data.n()).step_by(3) {
            let out = m.transport(&data.x[i], &[data.x[i][0] + 1.0], &data.y[i]).unwrap();
            shift += out[1] - data.y[i][1];
            count += 1.0;
        }
        let seq_shift = shift / count;
        let seq_t = t0.elapsed().as_secs_f64();
        // MAF cocycle shift
        let t0 = Instant::now();
        let cfg = ExperimentConfig {
            design: design.clone(),
            methods: vec![Method::CocycleV],
            hierarchy: vec!["masked-affine".into()],
            train: TrainConfig { batch_size: Some(32), epochs: 100, learning_rate: 0.01, seed: 0 },
            cv: CvConfig { folds: 2 },
            trials: 1,
            seed_base: 0,
        };
        let (model, _) = fit_method(&cfg, &data, Method::CocycleV, 77).unwrap();
        let panel = impute(&model, &data, &[Target::shift(1.0)]).unwrap();
        let coc_shift: f64 = panel.imputed[0]
            .iter()
            .zip(&data.y)
            .map(|(c, y)| c[1] - y[1])
            .sum::<f64>()
            / data.n() as f64;
        let coc1: f64 = panel.imputed[0]
            .iter()
            .zip(&data.y)
            .map(|(c, y)| c[0] - y[0])
            .sum::<f64>()
            / data.n() as f64;
        println!(
            "rho={rho}: seq_shift={seq_shift:.3} (want {:.2}, {seq_t:.0}s) cocycle y2={coc_shift:.3} y1={coc1:.3} (want 1.0, {:.0}s)",
            1.0 + rho / 2.0,
            t0.elapsed().as_secs_f64()
        );
    }
}
