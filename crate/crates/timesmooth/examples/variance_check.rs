//! Monte Carlo check of the smoothed-gradient variance bound
//! sigma^2 (1 - alpha^{2w}) / (W^2 (1 - alpha^2)) — tight for exact
//! exponential weights, so the empirical mean lands on the closed form.

use timesmooth::bounds::{variance_bound, verify_variance_bound};
use timesmooth::losses::{with_gaussian_noise, SinusoidFamily};

fn main() {
    let sigma = 1.0;
    let samples = 100_000;
    println!("gaussian gradient noise, total std {sigma}, {samples} draws per config\n");
    println!("{:>6} {:>8} {:>14} {:>14} {:>12}", "w", "alpha", "empirical", "analytic", "3*sem");
    for &(window, alpha) in &[(1usize, 0.5), (10, 0.99), (50, 0.999)] {
        let family = SinusoidFamily::new(1.0, vec![0.3; window.max(2)], 4).expect("family");
        let noisy = with_gaussian_noise(family, sigma, 17).expect("noise wrapper");
        let report = verify_variance_bound(&noisy, window, alpha, samples, 0).expect("verification");
        println!(
            "{:>6} {:>8} {:>14.6} {:>14.6} {:>12.2e}",
            window, alpha, report.empirical, report.analytic, report.tolerance
        );
        assert!(!report.violated);
    }
    println!("\nlimit behavior: alpha -> 1 gives sigma^2 / w exactly:");
    for &w in &[1usize, 4, 16] {
        println!("  w = {w:>2}: {:.6}", variance_bound(sigma, w, 1.0).expect("closed form"));
    }
}
