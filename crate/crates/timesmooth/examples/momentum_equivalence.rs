//! When the window covers the whole horizon, dynamic exponential
//! time-smoothing *is* momentum SGD: decay alpha, rate eta / W.

use timesmooth::losses::SinusoidFamily;
use timesmooth::optim::{run_dts, run_momentum};
use timesmooth::regret::window_normalizer;
use timesmooth::seeding;

fn main() {
    let steps = 100;
    let window = 128; // >= steps, so no gradient is ever evicted
    let alpha = 0.9;
    let eta = 1.0;
    let dim = 4;

    let family = SinusoidFamily::random_phases(1.0, steps, dim, 7).expect("valid family");
    let normalizer = window_normalizer(window, alpha);

    let mut rng = seeding::rng_for(0, 0);
    let dts = run_dts(&family, steps, window, alpha, eta, vec![0.0; dim], &mut rng).expect("dts run");
    let mut rng = seeding::rng_for(0, 0);
    let momentum =
        run_momentum(&family, steps, alpha, eta / normalizer, vec![0.0; dim], &mut rng).expect("momentum run");

    let mut max_gap = 0.0f64;
    for t in 1..=steps {
        for j in 0..dim {
            max_gap = max_gap.max((dts.ledger.x(t)[j] - momentum.ledger.x(t)[j]).abs());
        }
    }

    println!("time-smoothed window w = {window} >= T = {steps}, alpha = {alpha}");
    println!("momentum uses decay {alpha} and rate eta/W = {:.6}", eta / normalizer);
    println!("largest coordinate gap over the whole trajectory: {max_gap:.3e}");
    println!("equivalent to 1e-10: {}", if max_gap <= 1e-10 { "yes" } else { "NO" });
}
