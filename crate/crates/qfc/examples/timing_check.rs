// scratch: event sweep separation check
use qfc::sim::{self, ExperimentConfig, Policy, RateModel};
use qfc::PdfSpec;
use std::time::Instant;

fn main() {
    let base = ExperimentConfig {
        a: 1.5, horizon: 30, state_weight: 1.0, control_weight: 0.0,
        disturbance: PdfSpec::Gaussian { mean: 0.0, variance: 1.0 },
        policy: Policy::Greedy, rate_model: RateModel::Fixed { rate: 1 },
        trials: 8000, seed: 23, grid_points: 512, tail_mass: 1e-12,
    };
    for rbar in [0.6, 0.7, 0.8, 0.9, 1.0] {
        let t = Instant::now();
        let cfg = ExperimentConfig { policy: Policy::Event { average_rate: rbar }, ..base.clone() };
        let rep = sim::run_monte_carlo(&cfg).unwrap();
        let min_sil = rep.steps[..29].iter().map(|s| s.silence_freq).fold(f64::INFINITY, f64::min);
        println!("rbar={:.1} steady={:.5} realized_rate={:.4} min_silence={:.4}  ({:?})",
                 rbar, rep.steady_state_cost, rep.realized_avg_rate, min_sil, t.elapsed());
    }
    let rep = sim::run_monte_carlo(&base).unwrap();
    println!("greedy 2-cell rate-1 steady={:.5}", rep.steady_state_cost);
}
