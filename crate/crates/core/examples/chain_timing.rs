//! Times one default-length posterior fit on the four-arm setting.

use std::time::Instant;

use basket_core::inference::{hierarchy_tail_probs, ArmData, HierArm, McmcControl};
use basket_core::model::{HyperPrior, PriorSpec};

fn main() {
    let arms: Vec<HierArm> = [(0.05, 2), (0.05, 3), (0.05, 1), (0.15, 4)]
        .iter()
        .map(|&(p0, x)| HierArm { p0, data: ArmData { n: 20, x } })
        .collect();
    let p1s = [0.2, 0.2, 0.2, 0.3];
    let hyper = HyperPrior::default();
    for prior in [
        PriorSpec::inverse_gamma(2.0, 8.0).unwrap(),
        PriorSpec::inverse_gamma(0.0005, 0.000005).unwrap(),
        PriorSpec::half_cauchy(1.0).unwrap(),
    ] {
        let start = Instant::now();
        let runs = 200;
        let mut acc = 0.0;
        for seed in 0..runs {
            let control = McmcControl::default().with_seed(seed);
            let t = hierarchy_tail_probs(&arms, &p1s, &prior, &hyper, &control).unwrap();
            acc += t[0].0;
        }
        println!("{prior}: {:.3} ms per fit (mean fut {:.4})", start.elapsed().as_secs_f64() * 1e3 / runs as f64, acc / runs as f64);
    }
}
